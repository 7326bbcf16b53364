// bpseg: configuration-driven runner for the classify-then-segment
// ultrasound nerve localization experiments.
//
// Commands: synth, curate, run, report.
// Exit codes: 0 success, 2 input error, 3 artifact error, 4 run finished
// with invalid folds.

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bpseg/config.hpp"
#include "bpseg/curation.hpp"
#include "bpseg/dataset.hpp"
#include "bpseg/pipeline.hpp"
#include "bpseg/report.hpp"

namespace fs = std::filesystem;
using namespace bpseg;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kArtifactError = 3;
constexpr int kPartialFailure = 4;

[[noreturn]] void fail(int code, const std::string& message) {
  std::fprintf(stderr, "bpseg: error: %s\n", message.c_str());
  std::exit(code);
}

DatasetIndex load_data(const RunConfig& config) {
  if (config.data_root.empty()) {
    std::printf("data: synthetic, n=%d bp_fraction=%.3f %dx%d seed=%llu\n", config.synth.n,
                config.synth.bp_fraction, config.synth.rows, config.synth.cols,
                static_cast<unsigned long long>(config.seed));
    return synth_generate(config.synth.n, config.synth.bp_fraction, config.synth.rows,
                          config.synth.cols, config.seed);
  }
  std::printf("data: loading %s\n", config.data_root.c_str());
  try {
    return load_dataset(config.data_root);
  } catch (const std::exception& e) {
    fail(kInputError, std::string("cannot load data root: ") + e.what());
  }
}

struct CurationResult {
  DatasetIndex filtered;
  FilterReport report;
  std::vector<SimilarityPair> contradictions;
};

CurationResult run_curation(const DatasetIndex& index, const CurationConfig& config) {
  SimilarityOptions options;
  options.floor = config.similarity_floor;
  options.global_search = config.global_search;
  const std::vector<SimilarityPair> pairs = pairwise_similarity(index, options);
  CurationResult result;
  result.contradictions = find_contradictions(pairs, index, config.threshold);
  auto [filtered, report] =
      filter_dataset(index, result.contradictions, config.policy, config.threshold);
  result.filtered = std::move(filtered);
  result.report = std::move(report);
  return result;
}

// Shared flag-override plumbing: every value is optional so a set flag wins
// over the config file while an unset one leaves the file value alone.
struct Overrides {
  std::string config_path;
  std::string data_root;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> modes, segmenters, variants;
  double threshold = 0.0;
  bool threshold_set = false;
  int n_folds = 0;
  bool n_folds_set = false;
  int augment_extra = -1;
  bool parallel_folds = false;
  bool parallel_set = false;
  int synth_n = 0;
  bool synth_n_set = false;
  double synth_bp_fraction = -1.0;
  bool synth_bp_set = false;
  std::string t_test;
  std::string t_test_grouping;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "run configuration file (JSON)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--data-root", o.data_root, "directory of image/mask files (overrides config)");
  cmd->add_option("--out", o.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", o.seed, "master seed (overrides config)")
      ->each([&o](const std::string&) { o.seed_set = true; });
  cmd->add_option("--threshold", o.threshold, "curation contradiction threshold")
      ->each([&o](const std::string&) { o.threshold_set = true; });
}

RunConfig merge_config(const Overrides& o) {
  RunConfig config;
  if (!o.config_path.empty()) config = load_run_config(o.config_path);
  if (!o.data_root.empty()) config.data_root = o.data_root;
  if (!o.out_dir.empty()) config.out_dir = o.out_dir;
  if (o.seed_set) config.seed = o.seed;
  if (o.threshold_set) config.curation.threshold = o.threshold;
  if (!o.modes.empty()) {
    config.modes.clear();
    for (const std::string& m : o.modes) config.modes.push_back(mode_from_string(m));
  }
  if (!o.segmenters.empty()) {
    config.segmenters.clear();
    for (const std::string& s : o.segmenters)
      config.segmenters.push_back(model_kind_from_string(s));
  }
  if (!o.variants.empty()) {
    config.variants.clear();
    for (const std::string& v : o.variants) config.variants.push_back(variant_from_string(v));
  }
  if (o.n_folds_set) config.folds.n_folds = o.n_folds;
  if (o.augment_extra >= 0) config.augment_extra = o.augment_extra;
  if (o.parallel_set) config.parallel_folds = o.parallel_folds;
  if (o.synth_n_set) config.synth.n = o.synth_n;
  if (o.synth_bp_set) config.synth.bp_fraction = o.synth_bp_fraction;
  if (!o.t_test.empty()) config.t_test = t_test_kind_from_string(o.t_test);
  if (!o.t_test_grouping.empty())
    config.t_test_grouping = t_test_grouping_from_string(o.t_test_grouping);
  return config;
}

int cmd_synth(int n, double bp_fraction, int rows, int cols, std::uint64_t seed,
              const std::string& out_dir, bool force) {
  if (n <= 0 || bp_fraction < 0.0 || bp_fraction > 1.0 || rows <= 0 || cols <= 0)
    fail(kInputError, "synth: need n > 0, bp-fraction in [0, 1], positive size");
  const fs::path out(out_dir);
  if (fs::exists(out) && !fs::is_empty(out) && !force)
    fail(kInputError, "synth: " + out_dir + " is not empty (use --force to overwrite)");
  const DatasetIndex index = synth_generate(n, bp_fraction, rows, cols, seed);
  fs::create_directories(out);
  write_dataset(out, index);
  std::printf("synth: wrote %zu samples (%lld BP / %lld no-BP) to %s\n", index.samples.size(),
              index.class_counts.bp, index.class_counts.no_bp, out_dir.c_str());
  return kOk;
}

int cmd_curate(const RunConfig& config) {
  const DatasetIndex index = load_data(config);
  const CurationResult curated = run_curation(index, config.curation);

  const fs::path out = resolve_out_dir(config);
  fs::create_directories(out);
  write_text_file(out / "filter_report.json",
                  canonical_json(filter_report_to_json(curated.report, config.curation.policy,
                                                       curated.contradictions)));
  write_text_file(out / "table1.csv",
                  render_table1_csv(curated.report.counts_before, curated.report.counts_after));
  write_manifest(out / "filtered_manifest.csv", curated.filtered);

  std::printf("curate: %zu contradictory pairs, removed %zu samples\n",
              curated.contradictions.size(), curated.report.removed_ids.size());
  std::printf("curate: counts %lld/%lld -> %lld/%lld (BP/no-BP)\n",
              curated.report.counts_before.bp, curated.report.counts_before.no_bp,
              curated.report.counts_after.bp, curated.report.counts_after.no_bp);
  std::printf("curate: wrote %s\n", out.string().c_str());
  return kOk;
}

int cmd_run(const RunConfig& config) {
  const fs::path run_dir = resolve_out_dir(config);
  fs::create_directories(run_dir / "experiments");
  write_text_file(run_dir / "config.json", canonical_json(run_config_to_json(config)));

  const DatasetIndex non_filtered = load_data(config);

  const bool want_filtered =
      std::find(config.variants.begin(), config.variants.end(), DataVariant::FILTERED) !=
      config.variants.end();
  DatasetIndex filtered;
  if (want_filtered) {
    CurationResult curated = run_curation(non_filtered, config.curation);
    filtered = std::move(curated.filtered);
    write_text_file(run_dir / "filter_report.json",
                    canonical_json(filter_report_to_json(curated.report, config.curation.policy,
                                                         curated.contradictions)));
    write_text_file(run_dir / "table1.csv",
                    render_table1_csv(curated.report.counts_before, curated.report.counts_after));
    std::printf("curation: removed %zu samples for the filtered variant\n",
                curated.report.removed_ids.size());
  }

  std::vector<ExperimentReport> reports;
  bool any_invalid = false;
  for (DataVariant variant : config.variants) {
    const DatasetIndex& data = variant == DataVariant::FILTERED ? filtered : non_filtered;
    FoldPlan plan;
    try {
      plan = make_folds(data, config.seed, config.folds.n_folds, config.folds.val_fraction,
                        config.folds.group_by_subject);
    } catch (const std::exception& e) {
      fail(kInputError, std::string("cannot build folds: ") + e.what());
    }
    for (ModelKind segmenter : config.segmenters) {
      for (Mode mode : config.modes) {
        const ExperimentMode cell{mode, segmenter, variant};
        const std::string name = cell_name(cell);
        std::printf("cell %s: running %d folds\n", name.c_str(), plan.n_folds);
        std::fflush(stdout);

        PipelineConfigs configs = make_pipeline_configs(config);
        configs.segmenter_spec.kind = segmenter;

        const fs::path ckpt_dir = run_dir / "checkpoints" / name;
        fs::create_directories(ckpt_dir);
        PipelineHooks hooks;
        hooks.on_model = [&ckpt_dir](int fold, ModelKind kind, const TrainedModel& model) {
          save_checkpoint(model, ckpt_dir / ("fold" + std::to_string(fold) + "_" +
                                             to_string(kind) + ".ckpt"));
        };

        const ExperimentReport report = run_experiment(cell, data, plan, configs, hooks);
        write_experiment_report(run_dir / "experiments" / (name + ".json"), report);
        any_invalid = any_invalid || report.any_invalid;

        int valid = 0;
        for (const FoldResult& f : report.folds) valid += f.valid ? 1 : 0;
        if (valid > 0) {
          const FoldAggregate agg = score_pipeline(report);
          std::printf("cell %s: %d/%zu folds valid, mean DSC %.4f +- %.4f\n", name.c_str(),
                      valid, report.folds.size(), agg.mean, agg.stddev);
        } else {
          std::printf("cell %s: no valid folds\n", name.c_str());
        }
        std::fflush(stdout);
        reports.push_back(report);
      }
    }
  }

  const RunSummary summary = summarize_reports(reports);
  write_text_file(run_dir / "table2.csv", render_table2_csv(summary));
  write_text_file(run_dir / "table2.md", render_table2_md(summary));
  write_text_file(run_dir / "stats_tests.json",
                  canonical_json(stats_tests_json(summary, config.t_test,
                                                  config.t_test_grouping)));

  std::printf("run: wrote %s\n", run_dir.string().c_str());
  if (any_invalid) {
    std::fprintf(stderr, "bpseg: warning: some folds were invalid; see experiment reports\n");
    return kPartialFailure;
  }
  return kOk;
}

int cmd_report(const std::string& run_dir_arg, const std::string& out_dir) {
  const fs::path run_dir(run_dir_arg);
  const fs::path exp_dir = run_dir / "experiments";
  if (!fs::is_directory(exp_dir))
    fail(kArtifactError, "report: " + exp_dir.string() + " is not a directory");

  TTestKind t_test = TTestKind::WELCH;
  TTestGrouping grouping = TTestGrouping::PER_FOLD;
  const fs::path config_path = run_dir / "config.json";
  if (fs::exists(config_path)) {
    try {
      const RunConfig stored = load_run_config(config_path);
      t_test = stored.t_test;
      grouping = stored.t_test_grouping;
    } catch (const std::exception& e) {
      fail(kArtifactError, std::string("report: stored config unreadable: ") + e.what());
    }
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(exp_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(kArtifactError, "report: no experiment reports in " + exp_dir.string());

  std::vector<ExperimentReport> reports;
  for (const fs::path& file : files) {
    try {
      reports.push_back(read_experiment_report(file));
    } catch (const std::exception& e) {
      fail(kArtifactError, e.what());
    }
  }

  const RunSummary summary = summarize_reports(reports);
  const std::string md = render_table2_md(summary);
  const std::string csv = render_table2_csv(summary);
  const std::string stats = canonical_json(stats_tests_json(summary, t_test, grouping));

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text_file(fs::path(out_dir) / "table2.csv", csv);
    write_text_file(fs::path(out_dir) / "table2.md", md);
    write_text_file(fs::path(out_dir) / "stats_tests.json", stats);
  }
  std::printf("%s\n%s", md.c_str(), stats.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"classify-then-segment experiment runner for ultrasound nerve localization"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset on disk");
  int synth_n = 40;
  double synth_fraction = 0.5;
  int synth_rows = 144, synth_cols = 192;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  bool synth_force = false;
  synth->add_option("--n", synth_n, "number of samples")->capture_default_str();
  synth->add_option("--bp-fraction", synth_fraction, "fraction of BP-positive samples")
      ->capture_default_str();
  synth->add_option("--rows", synth_rows, "image rows")->capture_default_str();
  synth->add_option("--cols", synth_cols, "image cols")->capture_default_str();
  synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_flag("--force", synth_force, "overwrite a non-empty output directory");

  // curate
  auto* curate = app.add_subcommand("curate", "find contradictions and write the filtered set");
  Overrides curate_o;
  add_common_flags(curate, curate_o);
  std::string curate_policy;
  curate->add_option("--policy", curate_policy, "remove_no_bp_member or remove_both");
  bool curate_global = false;
  auto* curate_global_flag =
      curate->add_flag("--global-search", curate_global, "compare pairs across subjects");

  // run
  auto* run = app.add_subcommand("run", "execute the experiment grid");
  Overrides run_o;
  add_common_flags(run, run_o);
  run->add_option("--modes", run_o.modes,
                  "protocols: no_classification, hybrid, perfect_classification")
      ->delimiter(',');
  run->add_option("--segmenters", run_o.segmenters, "segmenters: unet, mnet")->delimiter(',');
  run->add_option("--variants", run_o.variants, "data variants: non_filtered, filtered")
      ->delimiter(',');
  run->add_option("--n-folds", run_o.n_folds, "cross-validation folds")
      ->each([&run_o](const std::string&) { run_o.n_folds_set = true; });
  run->add_option("--augment-extra", run_o.augment_extra,
                  "extra augmented training samples per fold");
  run->add_flag("--parallel-folds", run_o.parallel_folds, "train folds concurrently")
      ->each([&run_o](const std::string&) { run_o.parallel_set = true; });
  run->add_option("--synth-n", run_o.synth_n, "synthetic dataset size")
      ->each([&run_o](const std::string&) { run_o.synth_n_set = true; });
  run->add_option("--synth-bp-fraction", run_o.synth_bp_fraction, "synthetic BP fraction")
      ->each([&run_o](const std::string&) { run_o.synth_bp_set = true; });
  run->add_option("--t-test", run_o.t_test, "welch or student_pooled");
  run->add_option("--t-test-grouping", run_o.t_test_grouping, "per_fold or per_image");

  // report
  auto* report = app.add_subcommand("report", "re-render tables from a stored run");
  std::string report_run_dir, report_out;
  report->add_option("--run-dir", report_run_dir, "directory written by `run`")->required();
  report->add_option("--out", report_out, "write rendered tables here (default: stdout only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_n, synth_fraction, synth_rows, synth_cols, synth_seed, synth_out,
                       synth_force);
    if (curate->parsed()) {
      RunConfig config = merge_config(curate_o);
      if (!curate_policy.empty()) config.curation.policy = filter_policy_from_string(curate_policy);
      if (curate_global_flag->count() > 0) config.curation.global_search = curate_global;
      validate_run_config(config);
      return cmd_curate(config);
    }
    if (run->parsed()) {
      const RunConfig config = merge_config(run_o);
      validate_run_config(config);
      return cmd_run(config);
    }
    if (report->parsed()) return cmd_report(report_run_dir, report_out);
  } catch (const std::invalid_argument& e) {
    fail(kInputError, e.what());
  } catch (const std::exception& e) {
    fail(kArtifactError, e.what());
  }
  return kOk;
}
