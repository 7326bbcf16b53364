#ifndef BPSEG_CONFIG_HPP
#define BPSEG_CONFIG_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpseg/curation.hpp"
#include "bpseg/pipeline.hpp"
#include "bpseg/report.hpp"

namespace bpseg {

/** Synthetic-dataset parameters used when no data root is configured. */
struct SynthConfig {
  int n = 200;
  double bp_fraction = 0.5;
  int rows = 144;  // classifier preprocessing is downsample-only, so any
  int cols = 192;  // source feeding it needs >= 128 on both axes
};

struct CurationConfig {
  double threshold = 0.95;  // calibration knob for the contradiction cut
  FilterPolicy policy = FilterPolicy::REMOVE_NO_BP_MEMBER;
  double similarity_floor = 0.90;
  bool global_search = false;  // false restricts pairs to same-subject
};

struct FoldConfig {
  int n_folds = 5;
  double val_fraction = 0.20;
  bool group_by_subject = false;
};

struct NetConfig {
  int base_channels = 8;
  int depth = 3;
  int max_epochs = 100;
  int batch_size = 4;
  double learning_rate = 3e-3;
  int patience = 10;
  LossKind loss = LossKind::SOFT_DICE;  // fixed to BCE for the classifier
};

/** One declarative description of a full run: data source, grid, curation,
 * folds, training hyperparameters, output location. */
struct RunConfig {
  std::string data_root;  // empty selects the synthetic dataset
  SynthConfig synth;

  std::vector<Mode> modes = {Mode::NO_CLASSIFICATION, Mode::HYBRID,
                             Mode::PERFECT_CLASSIFICATION};
  std::vector<ModelKind> segmenters = {ModelKind::UNET, ModelKind::MNET};
  std::vector<DataVariant> variants = {DataVariant::NON_FILTERED, DataVariant::FILTERED};

  CurationConfig curation;
  FoldConfig folds;
  int augment_extra = 0;
  std::uint64_t seed = 0;

  NetConfig classifier{8, 3, 100, 8, 3e-3, 10, LossKind::BCE};
  NetConfig segmenter{8, 3, 100, 4, 3e-3, 10, LossKind::SOFT_DICE};

  TTestKind t_test = TTestKind::WELCH;
  TTestGrouping t_test_grouping = TTestGrouping::PER_FOLD;
  bool parallel_folds = false;
  std::string out_dir;  // empty resolves via BPSEG_OUT_ROOT or ./runs
};

nlohmann::json run_config_to_json(const RunConfig& config);

/** Overlays the JSON onto defaults. Unknown keys are errors (typo guard);
 * absent keys keep their defaults. */
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);

/** Throws std::invalid_argument on an unusable config: empty grid axis,
 * out-of-range fractions or thresholds, nonpositive sizes, or a configured
 * data root that does not exist. */
void validate_run_config(const RunConfig& config);

/** The run directory: out_dir if set, else $BPSEG_OUT_ROOT/run-<seed>, else
 * runs/run-<seed>. */
std::filesystem::path resolve_out_dir(const RunConfig& config);

/** Pipeline knobs for one grid cell, derived from the run config. The
 * segmenter kind is substituted per cell by the caller. */
PipelineConfigs make_pipeline_configs(const RunConfig& config);

std::string to_string(TTestKind kind);
TTestKind t_test_kind_from_string(const std::string& s);

}  // namespace bpseg

#endif
