#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpseg/report.hpp"
#include "bpseg/rng.hpp"

using namespace bpseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("bpseg_report_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ExperimentReport sample_report() {
  ExperimentReport rep;
  rep.mode = {Mode::HYBRID, ModelKind::MNET, DataVariant::FILTERED};
  rep.seed = 12345;
  rep.any_invalid = true;
  for (int f = 0; f < 3; ++f) {
    FoldResult fold;
    fold.fold_index = f;
    fold.valid = f != 1;
    if (f == 1) fold.invalid_reason = "classifier training diverged";
    fold.mean_dsc = 0.5 + 0.1 * f;
    fold.gated_mean_dsc = 0.6 + 0.1 * f;
    fold.gated_count = 1;
    fold.has_gate_metrics = true;
    fold.gate_accuracy = 0.9;
    fold.gate_f1 = 0.8;
    fold.classifier_train = {true, 10, 4, 0.123456789, 0.2, false, false};
    fold.segmenter_train = {true, 20, 15, 0.05, 0.06, false, false};
    for (int s = 0; s < 2; ++s) {
      SampleResult sr;
      sr.gate = {f * 10 + s, s == 0 ? Label::BP : Label::NO_BP, s == 0 ? 0.73 : 0.21,
                 GateSource::CNN};
      sr.predicted = Mask(8, 8);
      for (int i = s; i < 64; i += 3) sr.predicted.data[static_cast<size_t>(i)] = 1;
      sr.score = {0.4 + 0.01 * s, false};
      fold.samples.push_back(sr);
    }
    rep.folds.push_back(fold);
  }
  return rep;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cell names combine variant, segmenter, and protocol") {
  CHECK(cell_name(DataVariant::NON_FILTERED, ModelKind::UNET, Mode::HYBRID) ==
        "non_filtered_unet_hybrid");
  CHECK(cell_name(DataVariant::FILTERED, ModelKind::MNET, Mode::PERFECT_CLASSIFICATION) ==
        "filtered_mnet_perfect_classification");
  const ExperimentMode m{Mode::NO_CLASSIFICATION, ModelKind::UNET, DataVariant::FILTERED};
  CHECK(cell_name(m) == "filtered_unet_no_classification");
}

TEST_CASE("mask run-length coding round trips and validates") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const int r = 1 + static_cast<int>(rng.uniform_int(20));
    const int c = 1 + static_cast<int>(rng.uniform_int(20));
    Mask m(r, c);
    for (auto& v : m.data) v = rng.uniform() < 0.3 ? 1 : 0;
    const Mask back = decode_mask_rle(encode_mask_rle(m), r, c);
    REQUIRE(back == m);
  }
  const Mask zeros(4, 4), ones(4, 4, 1);
  CHECK(decode_mask_rle(encode_mask_rle(zeros), 4, 4) == zeros);
  CHECK(decode_mask_rle(encode_mask_rle(ones), 4, 4) == ones);

  Mask bad(2, 2, 0);
  bad.at(0, 0) = 3;
  CHECK_THROWS_AS(encode_mask_rle(bad), std::invalid_argument);
  // Wrong total length and malformed runs are rejected.
  CHECK_THROWS_AS(decode_mask_rle(encode_mask_rle(zeros), 4, 5), std::invalid_argument);
  CHECK_THROWS_AS(decode_mask_rle("2:3", 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(decode_mask_rle("0:x", 2, 2), std::invalid_argument);
}

TEST_CASE("experiment reports survive a write/read cycle with identical bytes") {
  TempDir dir("roundtrip");
  const ExperimentReport rep = sample_report();
  const fs::path p1 = dir.path / "exp.json";
  const fs::path p2 = dir.path / "exp2.json";
  write_experiment_report(p1, rep);
  const ExperimentReport back = read_experiment_report(p1);

  CHECK(canonical_json(experiment_to_json(rep)) == canonical_json(experiment_to_json(back)));
  CHECK(back.mode.mode == rep.mode.mode);
  CHECK(back.mode.segmenter == rep.mode.segmenter);
  CHECK(back.mode.variant == rep.mode.variant);
  CHECK(back.seed == rep.seed);
  CHECK(back.any_invalid == rep.any_invalid);
  REQUIRE(back.folds.size() == rep.folds.size());
  CHECK(back.folds[1].invalid_reason == "classifier training diverged");
  REQUIRE(back.folds[0].samples.size() == 2);
  CHECK(back.folds[0].samples[0].predicted == rep.folds[0].samples[0].predicted);
  CHECK(back.folds[0].samples[0].gate.probability == rep.folds[0].samples[0].gate.probability);

  // A rewrite of the parsed report is byte-identical to the original file.
  write_experiment_report(p2, back);
  const std::string b1 = read_file(p1), b2 = read_file(p2);
  REQUIRE_FALSE(b1.empty());
  CHECK(b1 == b2);
}

TEST_CASE("fold serialization is the fold equivalence relation") {
  const ExperimentReport rep = sample_report();
  const auto j0 = fold_to_json(rep.folds[0]);
  CHECK(canonical_json(j0) == canonical_json(fold_to_json(rep.folds[0])));
  CHECK(canonical_json(j0) != canonical_json(fold_to_json(rep.folds[2])));
  const FoldResult parsed = fold_from_json(j0);
  CHECK(canonical_json(fold_to_json(parsed)) == canonical_json(j0));
}

TEST_CASE("reading a corrupt or wrong-schema report fails") {
  TempDir dir("corrupt");
  const fs::path junk = dir.path / "junk.json";
  std::ofstream(junk) << "{not json";
  CHECK_THROWS(read_experiment_report(junk));
  const fs::path wrong = dir.path / "wrong.json";
  std::ofstream(wrong) << "{\"schema\": \"something-else/9\"}\n";
  CHECK_THROWS(read_experiment_report(wrong));
  CHECK_THROWS(read_experiment_report(dir.path / "missing.json"));
}

TEST_CASE("summaries, tables, and stats cover present, degenerate, and absent cells") {
  const ExperimentReport rep = sample_report();

  ExperimentReport single;
  single.mode = {Mode::PERFECT_CLASSIFICATION, ModelKind::UNET, DataVariant::NON_FILTERED};
  FoldResult f0;
  f0.fold_index = 0;
  f0.valid = true;
  f0.mean_dsc = 0.91;
  f0.gated_mean_dsc = 0.95;
  f0.gated_count = 1;
  SampleResult sr;
  sr.gate = {0, Label::BP, 1.0, GateSource::ORACLE};
  sr.predicted = Mask(4, 4, 1);
  sr.score = {0.91, false};
  f0.samples.push_back(sr);
  single.folds.push_back(f0);

  ExperimentReport none;
  none.mode = {Mode::NO_CLASSIFICATION, ModelKind::UNET, DataVariant::NON_FILTERED};
  FoldResult bad;
  bad.fold_index = 0;
  bad.valid = false;
  bad.invalid_reason = "x";
  none.folds.push_back(bad);
  none.any_invalid = true;

  const std::vector<ExperimentReport> reports = {rep, single, none};
  const RunSummary summary = summarize_reports(reports);
  REQUIRE(summary.cells.size() == 3);

  const auto& hybrid_cell = summary.cells.at("filtered_mnet_hybrid");
  CHECK(hybrid_cell.any_valid);
  CHECK(hybrid_cell.all.mean == doctest::Approx(0.6));  // folds 0 and 2: 0.5 and 0.7
  CHECK_FALSE(hybrid_cell.all.degenerate);
  CHECK(hybrid_cell.has_gated);

  const auto& single_cell = summary.cells.at("non_filtered_unet_perfect_classification");
  CHECK(single_cell.any_valid);
  CHECK(single_cell.all.degenerate);  // one valid fold only

  CHECK_FALSE(summary.cells.at("non_filtered_unet_no_classification").any_valid);

  const std::string csv = render_table2_csv(summary);
  const std::string md = render_table2_md(summary);

  // Header names the dual scopes per variant and segmenter.
  CHECK(csv.find("protocol,non_filtered_unet_all,non_filtered_unet_gated") == 0);
  // Three protocol rows, one line each plus the header.
  CHECK(csv.find("\nNo classification,") != std::string::npos);
  CHECK(csv.find("\nHybrid model,") != std::string::npos);
  CHECK(csv.find("\nPerfect classification,") != std::string::npos);
  // The degenerate single-fold cell is starred, the failed cell shows n/a.
  CHECK(csv.find("0.91 +- 0.00*") != std::string::npos);
  CHECK(csv.find("n/a") != std::string::npos);
  // Hybrid filtered values appear with two decimals.
  CHECK(csv.find("0.60 +- 0.14") != std::string::npos);

  CHECK(md.find("| Hybrid model |") != std::string::npos);
  CHECK(md.find("±") != std::string::npos);
  CHECK(md.find("—") != std::string::npos);  // absent cells render as a dash

  const nlohmann::json stats = stats_tests_json(summary, TTestKind::WELCH);
  CHECK(stats.at("schema").get<std::string>() == "bpseg-stats/1");
  CHECK(stats.at("t_test_kind").get<std::string>() == "welch");
  CHECK(stats.at("grouping").get<std::string>() == "per_fold");
  REQUIRE(stats.contains("scopes"));
  REQUIRE(stats.at("scopes").contains("all"));
  REQUIRE(stats.at("scopes").contains("gated"));
  const auto& all_scope = stats.at("scopes").at("all");
  CHECK(all_scope.contains("shapiro_wilk"));
  CHECK(all_scope.contains("t_tests"));
  // The failed cell has no data, so only the two live cells get compared.
  CHECK(all_scope.at("shapiro_wilk").size() == 2);
  CHECK(all_scope.at("t_tests").size() == 1);

  const nlohmann::json per_image = stats_tests_json(summary, TTestKind::WELCH,
                                                    TTestGrouping::PER_IMAGE);
  CHECK(per_image.at("grouping").get<std::string>() == "per_image");
}

TEST_CASE("class count table lists both variants") {
  const std::string csv = render_table1_csv({2322, 3313}, {1454, 2452});
  CHECK(csv.find("class,non_filtered,filtered") == 0);
  CHECK(csv.find("BP,2322,1454") != std::string::npos);
  CHECK(csv.find("No-BP,3313,2452") != std::string::npos);
  CHECK(csv.find("total,5635,3906") != std::string::npos);
}

TEST_CASE("filter reports serialize the policy, threshold, and removals") {
  FilterReport fr;
  fr.threshold = 0.95;
  fr.removed_ids = {4, 9};
  fr.counts_before = {10, 12};
  fr.counts_after = {10, 10};
  SimilarityPair pair;
  pair.id_a = 4;
  pair.id_b = 2;
  pair.similarity = 0.99;
  pair.contradictory = true;
  const nlohmann::json j = filter_report_to_json(fr, FilterPolicy::REMOVE_NO_BP_MEMBER, {pair});
  CHECK(j.at("schema").get<std::string>() == "bpseg-filter/1");
  CHECK(j.at("policy").get<std::string>() == "remove_no_bp_member");
  CHECK(j.at("threshold").get<double>() == 0.95);
  CHECK(j.at("removed_ids").size() == 2);
  CHECK(j.at("contradictions").size() == 1);
  CHECK(j.at("counts_before").at("bp").get<long long>() == 10);
  CHECK(j.at("counts_after").at("no_bp").get<long long>() == 10);

  CHECK(filter_policy_from_string("remove_both") == FilterPolicy::REMOVE_BOTH);
  CHECK(filter_policy_from_string(to_string(FilterPolicy::REMOVE_NO_BP_MEMBER)) ==
        FilterPolicy::REMOVE_NO_BP_MEMBER);
  CHECK_THROWS_AS(filter_policy_from_string("drop_all"), std::invalid_argument);
}

TEST_CASE("t-test grouping names round trip") {
  CHECK(t_test_grouping_from_string(to_string(TTestGrouping::PER_FOLD)) == TTestGrouping::PER_FOLD);
  CHECK(t_test_grouping_from_string(to_string(TTestGrouping::PER_IMAGE)) ==
        TTestGrouping::PER_IMAGE);
  CHECK_THROWS_AS(t_test_grouping_from_string("per_pixel"), std::invalid_argument);
}
