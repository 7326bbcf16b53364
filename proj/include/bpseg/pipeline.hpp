#ifndef BPSEG_PIPELINE_HPP
#define BPSEG_PIPELINE_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bpseg/dataset.hpp"
#include "bpseg/evaluation.hpp"
#include "bpseg/models.hpp"

namespace bpseg {

enum class Mode { NO_CLASSIFICATION, HYBRID, PERFECT_CLASSIFICATION };
enum class DataVariant { NON_FILTERED, FILTERED };
enum class GateSource { CNN, ORACLE, NONE };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);
std::string to_string(DataVariant variant);
DataVariant variant_from_string(const std::string& s);
std::string to_string(GateSource source);
GateSource gate_source_from_string(const std::string& s);

/** One experiment cell: protocol x segmenter x data variant. */
struct ExperimentMode {
  Mode mode = Mode::NO_CLASSIFICATION;
  ModelKind segmenter = ModelKind::UNET;  // UNET or MNET
  DataVariant variant = DataVariant::NON_FILTERED;
};

/** Per-sample gate verdict. ORACLE decisions equal the ground-truth label;
 * NONE passes everything as BP. */
struct GateDecision {
  int sample_id = 0;
  Label predicted = Label::BP;
  double probability = 1.0;
  GateSource source = GateSource::NONE;
};

/** Gate decisions for a set of samples. CNN requires a trained classifier
 * plus classifier-sized images aligned with ids; ORACLE requires the
 * ground-truth labels. */
std::vector<GateDecision> gate(GateSource source, std::span<const int> sample_ids,
                               std::span<const Label> gt_labels,
                               TrainedModel* classifier = nullptr,
                               std::span<const Image> images = {});

struct SampleResult {
  GateDecision gate;
  Mask predicted;   // segmenter-sized; the empty mask when gated NO_BP
  DscResult score;  // vs the segmenter-sized ground truth
};

struct TrainSummary {
  bool trained = false;
  int epochs = 0;
  int best_epoch = -1;
  double final_train_loss = 0.0;
  double best_val_loss = 0.0;
  bool diverged = false;
  bool no_validation = false;
};

/** Everything observed on one fold. Every test sample appears exactly once
 * in `samples` regardless of gating. */
struct FoldResult {
  int fold_index = 0;
  bool valid = false;
  std::string invalid_reason;  // set iff !valid
  std::vector<SampleResult> samples;
  double mean_dsc = 0.0;        // over all test samples
  double gated_mean_dsc = 0.0;  // over BP-gated samples only; 0 when none
  int gated_count = 0;
  bool has_gate_metrics = false;  // a real gate (CNN or ORACLE) ran
  double gate_accuracy = 0.0;
  double gate_f1 = 0.0;
  bool gate_f1_degenerate = false;
  TrainSummary classifier_train;
  TrainSummary segmenter_train;
};

struct ExperimentReport {
  ExperimentMode mode;
  std::uint64_t seed = 0;
  std::vector<FoldResult> folds;
  bool any_invalid = false;
};

/** Test-double injection points. A gate override suppresses classifier
 * training; a segment override suppresses segmenter training. on_model fires
 * once per trained model so callers can persist checkpoints. */
struct PipelineHooks {
  std::optional<GateSource> gate_source_override;
  std::function<GateDecision(const UsSample& raw, int sample_id)> gate_fn;
  std::function<Mask(const UsSample& raw, const Mask& gt)> segment_fn;
  std::function<void(int fold, ModelKind kind, const TrainedModel& model)> on_model;
};

struct PipelineConfigs {
  ModelSpec classifier_spec{ModelKind::CLASSIFIER, 128, 128, 8, 3};
  ModelSpec segmenter_spec{ModelKind::UNET, 96, 96, 8, 3};
  TrainConfig classifier_train{100, 8, 3e-3, 10, LossKind::BCE, 0};
  TrainConfig segmenter_train{100, 4, 3e-3, 10, LossKind::SOFT_DICE, 0};
  int augment_extra = 0;     // extra training samples per fold
  std::uint64_t seed = 0;    // master seed; per-role seeds derive from it
  bool parallel_folds = false;
};

/** Runs one experiment cell over every fold of the plan.
 *
 * Per fold: NO_CLASSIFICATION trains the segmenter on all training images
 * and gates nothing; HYBRID trains the classifier on all training images and
 * the segmenter on BP-labeled ones only, then gates test images through the
 * classifier; PERFECT_CLASSIFICATION is HYBRID with the ground-truth oracle
 * as gate and no classifier. NO_BP-gated samples are scored against the
 * empty mask. A fold with no BP training sample (HYBRID/PERFECT) or a
 * diverged training run is marked invalid, never dropped. */
ExperimentReport run_experiment(const ExperimentMode& mode, const DatasetIndex& data,
                                const FoldPlan& folds, const PipelineConfigs& configs,
                                const PipelineHooks& hooks = {});

/** Mean +- sample (n-1) std of per-fold mean DSC over valid folds.
 * Throws if no fold is valid. */
FoldAggregate score_pipeline(const ExperimentReport& report);

/** Same aggregation for the gated-subset DSC (folds with >= 1 BP-gated
 * sample). Throws if no valid fold has gated samples. */
FoldAggregate score_pipeline_gated(const ExperimentReport& report);

}  // namespace bpseg

#endif
