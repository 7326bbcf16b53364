#include "bpseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "bpseg/io.hpp"

namespace fs = std::filesystem;

namespace bpseg {

ClassCounts count_classes(const std::vector<UsSample>& samples) {
  ClassCounts c;
  for (const auto& s : samples) (s.label == Label::BP ? c.bp : c.no_bp)++;
  return c;
}

void validate_index(const DatasetIndex& index) {
  if (count_classes(index.samples) != index.class_counts)
    throw std::runtime_error("dataset index: class_counts do not match samples");
  std::set<std::pair<int, int>> ids;
  for (const auto& s : index.samples) {
    if (s.subject_id < 1 || s.image_index < 1)
      throw std::runtime_error("dataset index: subject_id and image_index must be >= 1");
    if (!ids.insert({s.subject_id, s.image_index}).second)
      throw std::runtime_error("dataset index: duplicate sample id " + std::to_string(s.subject_id) +
                               "_" + std::to_string(s.image_index));
    if (!s.mask.same_shape(Mask(s.image.rows, s.image.cols)))
      throw std::runtime_error("dataset index: image/mask dimension mismatch");
    if (derive_label(s.mask) != s.label)
      throw std::runtime_error("dataset index: stored label contradicts mask");
  }
}

Label derive_label(const Mask& mask) {
  if (!mask.is_binary()) throw std::invalid_argument("derive_label: mask has non-binary values");
  return mask.is_empty_mask() ? Label::NO_BP : Label::BP;
}

namespace {

// Parses "<subject>_<index>" stems; returns false for non-conforming names.
bool parse_stem(const std::string& stem, int& subject, int& index) {
  const auto us = stem.find('_');
  if (us == std::string::npos || us == 0 || us + 1 >= stem.size()) return false;
  const std::string a = stem.substr(0, us);
  const std::string b = stem.substr(us + 1);
  if (a.find_first_not_of("0123456789") != std::string::npos) return false;
  if (b.find_first_not_of("0123456789") != std::string::npos) return false;
  subject = std::stoi(a);
  index = std::stoi(b);
  return true;
}

bool is_image_extension(std::string ext) {
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".tif" || ext == ".tiff" || ext == ".png";
}

}  // namespace

DatasetIndex load_dataset(const fs::path& root) {
  if (!fs::is_directory(root))
    throw std::runtime_error("dataset root is not a directory: " + root.string());

  // Collect image stems and mask stems separately, keyed by (subject, index).
  std::map<std::pair<int, int>, fs::path> images, masks;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const fs::path& p = entry.path();
    if (!is_image_extension(p.extension().string())) continue;
    std::string stem = p.stem().string();
    const bool is_mask = stem.size() > 5 && stem.ends_with("_mask");
    if (is_mask) stem = stem.substr(0, stem.size() - 5);
    int subject = 0, index = 0;
    if (!parse_stem(stem, subject, index)) continue;
    auto& table = is_mask ? masks : images;
    if (!table.emplace(std::make_pair(subject, index), p).second)
      throw std::runtime_error("duplicate dataset file for sample " + stem);
  }
  if (images.empty()) throw std::runtime_error("no image files found under " + root.string());

  DatasetIndex out;
  out.source = DataSource::REAL;
  for (const auto& [key, img_path] : images) {
    const auto mask_it = masks.find(key);
    if (mask_it == masks.end())
      throw std::runtime_error("image has no mask file: " + img_path.string());
    UsSample s;
    s.subject_id = key.first;
    s.image_index = key.second;
    s.image = read_image_gray(img_path);
    s.mask = read_mask(mask_it->second);
    if (s.mask.rows != s.image.rows || s.mask.cols != s.image.cols)
      throw std::runtime_error("image/mask dimension mismatch for " + img_path.string());
    s.label = derive_label(s.mask);
    out.samples.push_back(std::move(s));
  }
  for (const auto& [key, mask_path] : masks)
    if (!images.count(key)) throw std::runtime_error("mask has no image file: " + mask_path.string());

  out.class_counts = count_classes(out.samples);
  return out;
}

void write_manifest(const fs::path& path, const DatasetIndex& index) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest: " + path.string());
  f << "subject_id,image_index,label,rows,cols\n";
  for (const auto& s : index.samples)
    f << s.subject_id << ',' << s.image_index << ',' << to_string(s.label) << ',' << s.image.rows
      << ',' << s.image.cols << '\n';
}

PreprocessedSample preprocess(const UsSample& sample, const PreprocessSpec& spec) {
  if (spec.target_rows <= 0 || spec.target_cols <= 0 || spec.target_rows > sample.image.rows ||
      spec.target_cols > sample.image.cols)
    throw std::invalid_argument("preprocess: target size must be positive and <= source size");

  PreprocessedSample out;
  out.image = resize_bilinear(sample.image, spec.target_rows, spec.target_cols);
  out.mask = resize_nearest(sample.mask, spec.target_rows, spec.target_cols);
  if (!spec.normalize) return out;

  // Standardization uses the population convention (divide by N) on the
  // resized grid.
  const size_t n = out.image.size();
  double sum = 0;
  for (float v : out.image.data) sum += v;
  const double mean = sum / n;
  double rss = 0;
  for (float v : out.image.data) rss += (v - mean) * (v - mean);
  const double std_dev = std::sqrt(rss / n);
  if (std_dev == 0.0) {
    std::fill(out.image.data.begin(), out.image.data.end(), 0.0f);
    out.degenerate = true;
    return out;
  }
  for (float& v : out.image.data) v = static_cast<float>((v - mean) / std_dev);
  return out;
}

FoldPlan make_folds(const DatasetIndex& index, std::uint64_t seed, int n_folds,
                    double val_fraction, bool group_by_subject) {
  const int n = static_cast<int>(index.samples.size());
  if (n_folds < 2) throw std::invalid_argument("make_folds: need at least 2 folds");
  if (n < n_folds) throw std::invalid_argument("make_folds: fewer samples than folds");

  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.seed = seed;
  plan.val_fraction = val_fraction;

  // Cut the shuffled id sequence into k test chunks; fold f gets an extra
  // sample while f < n % k, so remainders land in the earliest folds.
  std::vector<std::vector<int>> test_chunks(n_folds);
  Rng rng(Rng::derive(seed, 0));
  if (!group_by_subject) {
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    rng.shuffle(ids);
    size_t pos = 0;
    for (int f = 0; f < n_folds; ++f) {
      const int size = n / n_folds + (f < n % n_folds ? 1 : 0);
      test_chunks[f].assign(ids.begin() + pos, ids.begin() + pos + size);
      pos += size;
    }
  } else {
    std::vector<int> subjects;
    std::map<int, std::vector<int>> by_subject;
    for (int i = 0; i < n; ++i) by_subject[index.samples[i].subject_id].push_back(i);
    for (const auto& [sid, _] : by_subject) subjects.push_back(sid);
    if (static_cast<int>(subjects.size()) < n_folds)
      throw std::invalid_argument("make_folds: fewer subjects than folds");
    rng.shuffle(subjects);
    const int ns = static_cast<int>(subjects.size());
    size_t pos = 0;
    for (int f = 0; f < n_folds; ++f) {
      const int size = ns / n_folds + (f < ns % n_folds ? 1 : 0);
      for (int k = 0; k < size; ++k)
        for (int id : by_subject[subjects[pos + k]]) test_chunks[f].push_back(id);
      pos += size;
    }
  }

  std::vector<char> in_test(n);
  for (int f = 0; f < n_folds; ++f) {
    FoldPlan::Fold fold;
    fold.test_ids = test_chunks[f];
    std::fill(in_test.begin(), in_test.end(), 0);
    for (int id : fold.test_ids) in_test[id] = 1;
    std::vector<int> rest;
    rest.reserve(n - fold.test_ids.size());
    for (int i = 0; i < n; ++i)
      if (!in_test[i]) rest.push_back(i);
    Rng fold_rng(Rng::derive(seed, static_cast<std::uint64_t>(f) + 1));
    fold_rng.shuffle(rest);
    const int n_val = static_cast<int>(std::llround(val_fraction * rest.size()));
    fold.val_ids.assign(rest.begin(), rest.begin() + n_val);
    fold.train_ids.assign(rest.begin() + n_val, rest.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

void validate_folds(const FoldPlan& plan, int n_samples) {
  std::vector<int> test_seen(n_samples, 0);
  for (const auto& fold : plan.folds) {
    std::vector<char> seen(n_samples, 0);
    auto mark = [&](const std::vector<int>& ids) {
      for (int id : ids) {
        if (id < 0 || id >= n_samples) throw std::runtime_error("fold plan: id out of range");
        if (seen[id]++) throw std::runtime_error("fold plan: id appears twice within a fold");
      }
    };
    mark(fold.train_ids);
    mark(fold.val_ids);
    mark(fold.test_ids);
    for (int i = 0; i < n_samples; ++i)
      if (!seen[i]) throw std::runtime_error("fold plan: fold does not cover all samples");
    for (int id : fold.test_ids) test_seen[id]++;
    const double trainval = static_cast<double>(fold.train_ids.size() + fold.val_ids.size());
    if (std::abs(fold.val_ids.size() - plan.val_fraction * trainval) > 1.0 + 1e-9)
      throw std::runtime_error("fold plan: train/val ratio off by more than one sample");
  }
  for (int i = 0; i < n_samples; ++i)
    if (test_seen[i] != 1) throw std::runtime_error("fold plan: test folds do not partition samples");
}

AffineMatrix affine_matrix(const AffineParams& params, int rows, int cols) {
  if (!(params.scale > 0) || !std::isfinite(params.scale) || !std::isfinite(params.shear) ||
      !std::isfinite(params.rotation))
    throw std::invalid_argument("affine params must be finite with scale > 0");
  const double cx = (cols - 1) / 2.0;
  const double cy = (rows - 1) / 2.0;
  const AffineMatrix to_origin{1, 0, -cx, 0, 1, -cy};
  const AffineMatrix back{1, 0, cx, 0, 1, cy};
  const AffineMatrix reflect{params.reflect_x ? -1.0 : 1.0, 0, 0,
                             0, params.reflect_y ? -1.0 : 1.0, 0};
  const AffineMatrix scale{params.scale, 0, 0, 0, params.scale, 0};
  const AffineMatrix shear{1, std::tan(params.shear), 0, 0, 1, 0};
  const double cs = std::cos(params.rotation), sn = std::sin(params.rotation);
  const AffineMatrix rotate{cs, -sn, 0, sn, cs, 0};
  return back.compose(rotate).compose(shear).compose(scale).compose(reflect).compose(to_origin);
}

UsSample apply_affine(const UsSample& sample, const AffineParams& params) {
  const AffineMatrix m = affine_matrix(params, sample.image.rows, sample.image.cols);
  UsSample out;
  out.subject_id = sample.subject_id;
  out.image_index = sample.image_index;
  out.image = warp_affine_bilinear(sample.image, m);
  out.mask = warp_affine_nearest(sample.mask, m);
  out.label = derive_label(out.mask);
  return out;
}

AffineParams draw_affine_params(Rng& rng, const AugmentRanges& r) {
  AffineParams p;
  p.scale = r.scale_min + rng.uniform() * (r.scale_max - r.scale_min);
  p.shear = r.shear_min + rng.uniform() * (r.shear_max - r.shear_min);
  p.rotation = r.rotation_min + rng.uniform() * (r.rotation_max - r.rotation_min);
  p.reflect_x = rng.bernoulli(r.reflect_prob);
  p.reflect_y = rng.bernoulli(r.reflect_prob);
  return p;
}

std::vector<UsSample> augment_training_set(const std::vector<UsSample>& train, int n_extra,
                                           std::uint64_t seed, const AugmentRanges& ranges) {
  if (train.empty()) throw std::invalid_argument("augment_training_set: empty training set");
  if (n_extra < 0) throw std::invalid_argument("augment_training_set: n_extra must be >= 0");
  std::vector<UsSample> out = train;
  out.reserve(train.size() + n_extra);
  Rng rng(seed);
  for (int i = 0; i < n_extra; ++i) {
    const auto& src = train[rng.uniform_int(train.size())];
    out.push_back(apply_affine(src, draw_affine_params(rng, ranges)));
  }
  return out;
}

}  // namespace bpseg
