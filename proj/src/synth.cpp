#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "bpseg/dataset.hpp"
#include "bpseg/io.hpp"

namespace fs = std::filesystem;

namespace bpseg {

namespace {

constexpr int kImagesPerSubject = 20;

// Speckle texture: Rayleigh-distributed multiplicative noise over a smooth
// depth gradient, loosely mimicking a B-mode background.
Image speckle_background(int rows, int cols, Rng& rng) {
  Image img(rows, cols);
  for (int y = 0; y < rows; ++y) {
    const double depth = 55.0 + 35.0 * std::sin(3.1 * y / rows + 0.4);
    for (int x = 0; x < cols; ++x) {
      const double n1 = rng.normal(), n2 = rng.normal();
      const double rayleigh = std::sqrt(n1 * n1 + n2 * n2) * 0.7071;
      const double v = depth * (0.45 + 0.55 * rayleigh);
      img.at(y, x) = static_cast<float>(std::clamp(v, 0.0, 255.0));
    }
  }
  return img;
}

// Bright elliptical band plus the matching mask.
void add_ellipse(Image& img, Mask& mask, Rng& rng) {
  const int rows = img.rows, cols = img.cols;
  const double cx = cols * rng.uniform(0.30, 0.70);
  const double cy = rows * rng.uniform(0.30, 0.70);
  const double a = std::max(2.0, cols * rng.uniform(0.12, 0.22));
  const double b = std::max(2.0, rows * rng.uniform(0.08, 0.15));
  const double theta = rng.uniform(0.0, 3.14159265358979);
  const double ct = std::cos(theta), st = std::sin(theta);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = (dx * ct + dy * st) / a;
      const double v = (-dx * st + dy * ct) / b;
      const double r2 = u * u + v * v;
      if (r2 <= 1.0) {
        mask.at(y, x) = 1;
        img.at(y, x) = static_cast<float>(
            std::clamp(img.at(y, x) + 85.0 * (1.0 - 0.5 * r2), 0.0, 255.0));
      }
    }
  }
  // The center pixel is always inside, so the mask is never empty.
}

}  // namespace

DatasetIndex synth_generate(int n, double bp_fraction, int rows, int cols, std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("synth_generate: n must be > 0");
  if (bp_fraction < 0.0 || bp_fraction > 1.0)
    throw std::invalid_argument("synth_generate: bp_fraction must be in [0, 1]");
  if (rows < 4 || cols < 4) throw std::invalid_argument("synth_generate: size too small");

  // Half-up rounding fixes the BP count exactly.
  const int bp_count = static_cast<int>(std::floor(n * bp_fraction + 0.5));
  std::vector<Label> labels(n, Label::NO_BP);
  std::fill(labels.begin(), labels.begin() + bp_count, Label::BP);
  Rng label_rng(Rng::derive(seed, 1));
  label_rng.shuffle(labels);

  DatasetIndex out;
  out.source = DataSource::SYNTHETIC;
  out.samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(Rng::derive(seed, 1000 + static_cast<std::uint64_t>(i)));
    UsSample s;
    s.subject_id = i / kImagesPerSubject + 1;
    s.image_index = i % kImagesPerSubject + 1;
    s.image = speckle_background(rows, cols, rng);
    s.mask = Mask(rows, cols);
    if (labels[i] == Label::BP) add_ellipse(s.image, s.mask, rng);
    s.label = derive_label(s.mask);
    out.samples.push_back(std::move(s));
  }
  out.class_counts = count_classes(out.samples);
  return out;
}

std::vector<std::pair<int, int>> plant_contradictions(DatasetIndex& index, int n_pairs,
                                                      std::uint64_t seed) {
  if (n_pairs < 0) throw std::invalid_argument("plant_contradictions: n_pairs must be >= 0");
  std::vector<int> bp_ids;
  for (int i = 0; i < static_cast<int>(index.samples.size()); ++i)
    if (index.samples[i].label == Label::BP) bp_ids.push_back(i);
  if (static_cast<int>(bp_ids.size()) < n_pairs)
    throw std::invalid_argument("plant_contradictions: not enough BP samples");

  Rng rng(Rng::derive(seed, 2));
  rng.shuffle(bp_ids);

  std::map<int, int> max_index;
  for (const auto& s : index.samples)
    max_index[s.subject_id] = std::max(max_index[s.subject_id], s.image_index);

  std::vector<std::pair<int, int>> planted;
  for (int k = 0; k < n_pairs; ++k) {
    const int src_id = bp_ids[k];
    const UsSample& src = index.samples[src_id];
    UsSample dup;
    dup.subject_id = src.subject_id;
    dup.image_index = ++max_index[src.subject_id];
    dup.image = src.image;
    // Faint jitter keeps the correlation far above any duplicate threshold
    // while making the copy distinguishable from its source.
    for (float& v : dup.image.data)
      v = static_cast<float>(std::clamp(v + rng.uniform(-1.0, 1.0), 0.0, 255.0));
    dup.mask = Mask(src.mask.rows, src.mask.cols);
    dup.label = Label::NO_BP;
    index.samples.push_back(std::move(dup));
    planted.emplace_back(src_id, static_cast<int>(index.samples.size()) - 1);
  }
  index.class_counts = count_classes(index.samples);
  return planted;
}

void write_dataset(const fs::path& out_dir, const DatasetIndex& index,
                   const std::string& extension) {
  fs::create_directories(out_dir);
  for (const auto& s : index.samples) {
    const std::string stem = std::to_string(s.subject_id) + "_" + std::to_string(s.image_index);
    write_image_gray(out_dir / (stem + extension), s.image);
    write_mask(out_dir / (stem + "_mask" + extension), s.mask);
  }
  write_manifest(out_dir / "manifest.csv", index);
}

}  // namespace bpseg
