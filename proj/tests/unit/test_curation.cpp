#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "bpseg/curation.hpp"
#include "bpseg/rng.hpp"

using namespace bpseg;

namespace {

Image noise_image(Rng& rng, int rows, int cols) {
  Image img(rows, cols);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform() * 255.0);
  return img;
}

UsSample sample_with(int subject, int index, Image img, bool annotated) {
  UsSample s;
  s.subject_id = subject;
  s.image_index = index;
  s.mask = Mask(img.rows, img.cols, 0);
  if (annotated) s.mask.at(img.rows / 2, img.cols / 2) = 1;
  s.image = std::move(img);
  s.label = annotated ? Label::BP : Label::NO_BP;
  return s;
}

DatasetIndex build_index(std::vector<UsSample> samples) {
  DatasetIndex index;
  index.samples = std::move(samples);
  index.source = DataSource::SYNTHETIC;
  index.class_counts = count_classes(index.samples);
  return index;
}

}  // namespace

TEST_CASE("zncc scores: identity, noise, shift, and constant grids") {
  Rng rng(31);
  const Image a = noise_image(rng, 64, 64);
  CHECK(zncc(a, a) == doctest::Approx(1.0));

  const Image b = noise_image(rng, 64, 64);
  CHECK(zncc(a, b) < 0.5);  // independent speckle decorrelates

  // A one-pixel translation of smooth content stays highly correlated.
  Image smooth(64, 64);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c)
      smooth.at(r, c) = static_cast<float>(std::sin(r * 0.2) * std::cos(c * 0.15) * 100.0);
  Image shifted(64, 64, 0.0f);
  for (int r = 0; r < 64; ++r)
    for (int c = 1; c < 64; ++c) shifted.at(r, c) = smooth.at(r, c - 1);
  CHECK(zncc(smooth, shifted) > 0.95);

  CHECK(zncc(Image(8, 8, 3.0f), Image(8, 8, 3.0f)) == doctest::Approx(1.0));
  CHECK(zncc(Image(8, 8, 3.0f), Image(8, 8, 4.0f)) == doctest::Approx(0.0));
  CHECK(zncc(Image(8, 8, 3.0f), a) == doctest::Approx(0.0));

  // Anti-correlated content clamps to zero rather than going negative.
  Image neg = smooth;
  for (auto& v : neg.data) v = -v;
  CHECK(zncc(smooth, neg) == doctest::Approx(0.0));

  CHECK_THROWS_AS(zncc(Image(4, 4), Image(4, 5)), std::invalid_argument);
}

TEST_CASE("zncc is symmetric and invariant to affine intensity changes") {
  Rng rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const Image a = noise_image(rng, 16, 16);
    const Image b = noise_image(rng, 16, 16);
    CHECK(std::abs(zncc(a, b) - zncc(b, a)) <= 1e-12);

    Image scaled = a;
    for (auto& v : scaled.data) v = 2.5f * v + 17.0f;
    CHECK(zncc(a, scaled) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("an inserted duplicate surfaces as a similarity-1 pair") {
  Rng rng(33);
  std::vector<UsSample> samples;
  for (int i = 1; i <= 5; ++i) samples.push_back(sample_with(1, i, noise_image(rng, 48, 48), true));
  // Sample 6 duplicates sample 1's pixels.
  UsSample dup = samples[0];
  dup.image_index = 6;
  samples.push_back(dup);
  const auto index = build_index(std::move(samples));

  const auto pairs = pairwise_similarity(index);
  auto hit = std::find_if(pairs.begin(), pairs.end(), [](const SimilarityPair& p) {
    return p.id_a == 0 && p.id_b == 5;
  });
  REQUIRE(hit != pairs.end());
  CHECK(hit->similarity == doctest::Approx(1.0));
  // Independent noise pairs do not clear the reporting floor.
  for (const auto& p : pairs) CHECK(p.similarity >= 0.90);
}

TEST_CASE("same-subject search skips cross-subject duplicates unless global") {
  Rng rng(34);
  const Image shared = noise_image(rng, 48, 48);
  auto index = build_index({sample_with(1, 1, shared, true), sample_with(2, 1, shared, false)});

  CHECK(pairwise_similarity(index).empty());

  SimilarityOptions global;
  global.global_search = true;
  const auto pairs = pairwise_similarity(index, global);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].similarity == doctest::Approx(1.0));
  CHECK(pairs[0].contradictory);
}

TEST_CASE("contradiction search needs high similarity AND differing labels") {
  Rng rng(35);
  const Image shared = noise_image(rng, 48, 48);

  // Identical images, one annotated and one not: exactly one contradictory pair.
  auto conflicted = build_index({sample_with(1, 1, shared, true), sample_with(1, 2, shared, false)});
  auto pairs = pairwise_similarity(conflicted);
  auto contras = find_contradictions(pairs, conflicted, 0.95);
  REQUIRE(contras.size() == 1);
  CHECK(contras[0].contradictory);
  CHECK(contras[0].similarity >= 0.95);

  // Identical images with identical labels: no contradiction.
  auto agreeing = build_index({sample_with(1, 1, shared, true), sample_with(1, 2, shared, true)});
  pairs = pairwise_similarity(agreeing);
  CHECK(find_contradictions(pairs, agreeing, 0.95).empty());

  CHECK_THROWS_AS(find_contradictions(pairs, agreeing, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(find_contradictions(pairs, agreeing, 1.5), std::invalid_argument);
}

TEST_CASE("planted contradictions are recovered exactly at the default threshold") {
  auto index = synth_generate(12, 0.75, 64, 64, 41);
  const auto planted = plant_contradictions(index, 3, 8);
  REQUIRE(planted.size() == 3);

  const auto pairs = pairwise_similarity(index);
  const auto contras = find_contradictions(pairs, index, 0.95);
  REQUIRE(contras.size() == 3);

  std::set<std::pair<int, int>> expected(planted.begin(), planted.end());
  std::set<std::pair<int, int>> found;
  for (const auto& c : contras) found.insert({c.id_a, c.id_b});
  CHECK(found == expected);
}

TEST_CASE("filtering removes the unannotated member and preserves annotated counts") {
  auto index = synth_generate(10, 0.6, 64, 64, 51);
  plant_contradictions(index, 2, 9);
  const auto counts_in = index.class_counts;

  const auto pairs = pairwise_similarity(index);
  const auto contras = find_contradictions(pairs, index, 0.95);
  REQUIRE(contras.size() == 2);

  const auto [filtered, report] = filter_dataset(index, contras, FilterPolicy::REMOVE_NO_BP_MEMBER, 0.95);
  CHECK(report.threshold == 0.95);
  CHECK(report.counts_before == counts_in);
  CHECK(report.counts_after == filtered.class_counts);
  CHECK(report.removed_ids.size() == 2);
  CHECK(filtered.class_counts.bp == counts_in.bp);
  CHECK(filtered.class_counts.no_bp == counts_in.no_bp - 2);
  CHECK_NOTHROW(validate_index(filtered));

  // Every removed id was a NO_BP sample in the source index.
  for (int id : report.removed_ids)
    CHECK(index.samples[static_cast<size_t>(id)].label == Label::NO_BP);
}

TEST_CASE("filtering with no contradictions is the identity") {
  auto index = synth_generate(8, 0.5, 32, 32, 61);
  const auto [filtered, report] =
      filter_dataset(index, {}, FilterPolicy::REMOVE_NO_BP_MEMBER, 0.95);
  CHECK(filtered.samples.size() == index.samples.size());
  CHECK(report.removed_ids.empty());
  CHECK(report.counts_before == report.counts_after);
}

TEST_CASE("filtering is idempotent") {
  auto index = synth_generate(10, 0.7, 64, 64, 71);
  plant_contradictions(index, 2, 3);
  const auto contras = find_contradictions(pairwise_similarity(index), index, 0.95);
  const auto [once, r1] = filter_dataset(index, contras, FilterPolicy::REMOVE_NO_BP_MEMBER, 0.95);

  const auto contras2 = find_contradictions(pairwise_similarity(once), once, 0.95);
  const auto [twice, r2] = filter_dataset(once, contras2, FilterPolicy::REMOVE_NO_BP_MEMBER, 0.95);
  CHECK(r2.removed_ids.empty());
  CHECK(twice.samples.size() == once.samples.size());
}

TEST_CASE("remove-both drops each member of each pair exactly once") {
  Rng rng(36);
  const Image shared = noise_image(rng, 48, 48);
  auto index = build_index({sample_with(1, 1, shared, true), sample_with(1, 2, shared, false),
                            sample_with(1, 3, noise_image(rng, 48, 48), true)});
  const auto contras = find_contradictions(pairwise_similarity(index), index, 0.95);
  REQUIRE(contras.size() == 1);

  const auto [filtered, report] = filter_dataset(index, contras, FilterPolicy::REMOVE_BOTH, 0.95);
  CHECK(report.removed_ids.size() == 2);
  CHECK(filtered.samples.size() == 1);
  CHECK(filtered.class_counts.bp == 1);
  CHECK(filtered.class_counts.no_bp == 0);
}

TEST_CASE("the unannotated-member policy never removes an annotated sample") {
  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    auto index = synth_generate(8 + trial, 0.6, 48, 48, 100 + static_cast<std::uint64_t>(trial));
    plant_contradictions(index, 1 + trial % 3, 200 + static_cast<std::uint64_t>(trial));
    const auto contras = find_contradictions(pairwise_similarity(index), index, 0.95);
    const auto [filtered, report] =
        filter_dataset(index, contras, FilterPolicy::REMOVE_NO_BP_MEMBER, 0.95);
    CHECK(filtered.class_counts.bp == index.class_counts.bp);
    for (int id : report.removed_ids)
      REQUIRE(index.samples[static_cast<size_t>(id)].label == Label::NO_BP);
  }
}
