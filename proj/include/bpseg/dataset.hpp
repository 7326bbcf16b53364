#ifndef BPSEG_DATASET_HPP
#define BPSEG_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bpseg/grid.hpp"
#include "bpseg/rng.hpp"

namespace bpseg {

/** One ultrasound frame: image, paired binary mask, provenance ids, and the
 * BP/no-BP label derived from mask emptiness. */
struct UsSample {
  int subject_id = 0;   // >= 1
  int image_index = 0;  // >= 1
  Image image;
  Mask mask;
  Label label = Label::NO_BP;
};

enum class DataSource { REAL, SYNTHETIC };

struct ClassCounts {
  long long bp = 0;
  long long no_bp = 0;

  long long total() const { return bp + no_bp; }
  bool operator==(const ClassCounts&) const = default;
};

/** Ordered sample collection with per-class counts.
 *
 * Invariants (checked by validate_index): class_counts sums to the sample
 * count, every (subject_id, image_index) pair is unique, and each sample's
 * stored label matches derive_label of its mask.
 */
struct DatasetIndex {
  std::vector<UsSample> samples;
  DataSource source = DataSource::REAL;
  ClassCounts class_counts;
};

/** Recomputes class counts from the samples. */
ClassCounts count_classes(const std::vector<UsSample>& samples);

/** Throws std::runtime_error on any violated DatasetIndex invariant. */
void validate_index(const DatasetIndex& index);

/** BP iff the mask has at least one set pixel. Throws on non-binary masks. */
Label derive_label(const Mask& mask);

/** Loads `<subject>_<index>.tif` / `<subject>_<index>_mask.tif` pairs (PNG
 * accepted too). Every image must have exactly one mask of equal dimensions;
 * an orphan image or a dimension mismatch is a hard error naming the file. */
DatasetIndex load_dataset(const std::filesystem::path& root);

/** Writes/reads the manifest CSV: subject_id,image_index,label,rows,cols. */
void write_manifest(const std::filesystem::path& path, const DatasetIndex& index);

struct PreprocessSpec {
  int target_rows = 0;
  int target_cols = 0;
  bool normalize = true;
};

struct PreprocessedSample {
  Image image;  // standardized intensities when spec.normalize
  Mask mask;    // nearest-neighbor resized, still binary
  bool degenerate = false;  // constant-intensity input, image forced to zeros
};

/** Bilinear-resizes the image, nearest-resizes the mask, then standardizes
 * the image to mean 0 / population std 1. A constant image cannot be
 * standardized; it becomes all zeros with the degenerate flag set. */
PreprocessedSample preprocess(const UsSample& sample, const PreprocessSpec& spec);

/** Deterministic k-fold split with a per-fold train/validation subdivision. */
struct FoldPlan {
  struct Fold {
    std::vector<int> train_ids;
    std::vector<int> val_ids;
    std::vector<int> test_ids;
  };
  int n_folds = 5;
  std::uint64_t seed = 0;
  double val_fraction = 0.20;
  std::vector<Fold> folds;
};

/** Shuffles sample indices and cuts test folds of size n/k, distributing the
 * remainder to the earliest folds. The non-test remainder of each fold is
 * reshuffled and split val/train at val_fraction (count rounded to nearest).
 *
 * With group_by_subject, test folds are cut at subject granularity so no
 * subject spans a test boundary; the train/val subdivision stays per-image.
 */
FoldPlan make_folds(const DatasetIndex& index, std::uint64_t seed, int n_folds = 5,
                    double val_fraction = 0.20, bool group_by_subject = false);

void validate_folds(const FoldPlan& plan, int n_samples);

struct AffineParams {
  double scale = 1.0;     // > 0
  double shear = 0.0;     // radians
  double rotation = 0.0;  // radians
  bool reflect_x = false;
  bool reflect_y = false;
};

/** Sampling ranges for random augmentation draws. */
struct AugmentRanges {
  double scale_min = 0.9, scale_max = 1.1;
  double shear_min = -0.1, shear_max = 0.1;                  // radians
  double rotation_min = -0.17453293, rotation_max = 0.17453293;  // +-10 degrees
  double reflect_prob = 0.5;
};

/** Center-anchored forward map: translate(center) * rotate * shear * scale *
 * reflect * translate(-center). Identity params give the identity matrix. */
AffineMatrix affine_matrix(const AffineParams& params, int rows, int cols);

/** Warps image (bilinear) and mask (nearest) by the same matrix and
 * re-derives the label. Output dimensions equal input dimensions. */
UsSample apply_affine(const UsSample& sample, const AffineParams& params);

AffineParams draw_affine_params(Rng& rng, const AugmentRanges& ranges);

/** Returns the originals followed by n_extra transformed copies of randomly
 * selected members. Image and mask always receive the identical map. */
std::vector<UsSample> augment_training_set(const std::vector<UsSample>& train, int n_extra,
                                           std::uint64_t seed,
                                           const AugmentRanges& ranges = {});

/** Generates a deterministic synthetic dataset: speckle-noise backgrounds,
 * with round(n * bp_fraction) samples (half-up) carrying a bright elliptical
 * band plus the matching elliptical mask. */
DatasetIndex synth_generate(int n, double bp_fraction, int rows, int cols, std::uint64_t seed);

/** Appends near-duplicate copies of BP samples relabeled NO_BP (empty mask,
 * faint intensity jitter) to create known contradictory pairs. Returns
 * (original, duplicate) sample indices into the grown index. Duplicates keep
 * the source subject_id so default same-subject pair search finds them. */
std::vector<std::pair<int, int>> plant_contradictions(DatasetIndex& index, int n_pairs,
                                                      std::uint64_t seed);

/** Materializes a dataset as image/mask files plus manifest.csv. */
void write_dataset(const std::filesystem::path& out_dir, const DatasetIndex& index,
                   const std::string& extension = ".png");

}  // namespace bpseg

#endif
