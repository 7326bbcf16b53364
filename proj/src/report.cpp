#include "bpseg/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bpseg {

namespace {

constexpr const char* kExperimentSchema = "bpseg-experiment/1";
constexpr const char* kStatsSchema = "bpseg-stats/1";
constexpr const char* kFilterSchema = "bpseg-filter/1";

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string cell_name(DataVariant variant, ModelKind segmenter, Mode mode) {
  return to_string(variant) + "_" + to_string(segmenter) + "_" + to_string(mode);
}

std::string cell_name(const ExperimentMode& mode) {
  return cell_name(mode.variant, mode.segmenter, mode.mode);
}

std::string encode_mask_rle(const Mask& mask) {
  if (!mask.is_binary()) throw std::invalid_argument("encode_mask_rle: mask not binary");
  std::string out;
  size_t i = 0;
  while (i < mask.data.size()) {
    const std::uint8_t v = mask.data[i];
    size_t j = i;
    while (j < mask.data.size() && mask.data[j] == v) ++j;
    if (!out.empty()) out += ',';
    out += std::to_string(int(v));
    out += ':';
    out += std::to_string(j - i);
    i = j;
  }
  return out;
}

Mask decode_mask_rle(const std::string& rle, int rows, int cols) {
  Mask mask(rows, cols);
  size_t pos = 0;
  std::istringstream in(rle);
  std::string run;
  while (std::getline(in, run, ',')) {
    const size_t colon = run.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("decode_mask_rle: malformed run");
    const int value = std::stoi(run.substr(0, colon));
    const long long length = std::stoll(run.substr(colon + 1));
    if (value != 0 && value != 1) throw std::invalid_argument("decode_mask_rle: non-binary value");
    if (length <= 0 || pos + static_cast<size_t>(length) > mask.data.size())
      throw std::invalid_argument("decode_mask_rle: run length exceeds mask size");
    for (long long k = 0; k < length; ++k) mask.data[pos++] = static_cast<std::uint8_t>(value);
  }
  if (pos != mask.data.size() && !(pos == 0 && mask.data.empty()))
    throw std::invalid_argument("decode_mask_rle: runs cover " + std::to_string(pos) + " of " +
                                std::to_string(mask.data.size()) + " pixels");
  return mask;
}

namespace {

nlohmann::json train_summary_to_json(const TrainSummary& t) {
  return {
      {"trained", t.trained},
      {"epochs", t.epochs},
      {"best_epoch", t.best_epoch},
      {"final_train_loss", t.final_train_loss},
      {"best_val_loss", t.best_val_loss},
      {"diverged", t.diverged},
      {"no_validation", t.no_validation},
  };
}

TrainSummary train_summary_from_json(const nlohmann::json& j) {
  TrainSummary t;
  t.trained = j.at("trained").get<bool>();
  t.epochs = j.at("epochs").get<int>();
  t.best_epoch = j.at("best_epoch").get<int>();
  t.final_train_loss = j.at("final_train_loss").get<double>();
  t.best_val_loss = j.at("best_val_loss").get<double>();
  t.diverged = j.at("diverged").get<bool>();
  t.no_validation = j.at("no_validation").get<bool>();
  return t;
}

}  // namespace

nlohmann::json fold_to_json(const FoldResult& fold) {
  nlohmann::json samples = nlohmann::json::array();
  for (const SampleResult& s : fold.samples) {
    samples.push_back({
        {"sample_id", s.gate.sample_id},
        {"gate_predicted", to_string(s.gate.predicted)},
        {"gate_probability", s.gate.probability},
        {"gate_source", to_string(s.gate.source)},
        {"dsc", s.score.value},
        {"empty_both", s.score.empty_both},
        {"mask_rows", s.predicted.rows},
        {"mask_cols", s.predicted.cols},
        {"mask_rle", encode_mask_rle(s.predicted)},
    });
  }
  return {
      {"fold_index", fold.fold_index},
      {"valid", fold.valid},
      {"invalid_reason", fold.invalid_reason},
      {"samples", samples},
      {"mean_dsc", fold.mean_dsc},
      {"gated_mean_dsc", fold.gated_mean_dsc},
      {"gated_count", fold.gated_count},
      {"has_gate_metrics", fold.has_gate_metrics},
      {"gate_accuracy", fold.gate_accuracy},
      {"gate_f1", fold.gate_f1},
      {"gate_f1_degenerate", fold.gate_f1_degenerate},
      {"classifier_train", train_summary_to_json(fold.classifier_train)},
      {"segmenter_train", train_summary_to_json(fold.segmenter_train)},
  };
}

FoldResult fold_from_json(const nlohmann::json& j) {
  FoldResult fold;
  fold.fold_index = j.at("fold_index").get<int>();
  fold.valid = j.at("valid").get<bool>();
  fold.invalid_reason = j.at("invalid_reason").get<std::string>();
  fold.mean_dsc = j.at("mean_dsc").get<double>();
  fold.gated_mean_dsc = j.at("gated_mean_dsc").get<double>();
  fold.gated_count = j.at("gated_count").get<int>();
  fold.has_gate_metrics = j.at("has_gate_metrics").get<bool>();
  fold.gate_accuracy = j.at("gate_accuracy").get<double>();
  fold.gate_f1 = j.at("gate_f1").get<double>();
  fold.gate_f1_degenerate = j.at("gate_f1_degenerate").get<bool>();
  fold.classifier_train = train_summary_from_json(j.at("classifier_train"));
  fold.segmenter_train = train_summary_from_json(j.at("segmenter_train"));
  for (const nlohmann::json& sj : j.at("samples")) {
    SampleResult s;
    s.gate.sample_id = sj.at("sample_id").get<int>();
    s.gate.predicted = label_from_string(sj.at("gate_predicted").get<std::string>());
    s.gate.probability = sj.at("gate_probability").get<double>();
    s.gate.source = gate_source_from_string(sj.at("gate_source").get<std::string>());
    s.score.value = sj.at("dsc").get<double>();
    s.score.empty_both = sj.at("empty_both").get<bool>();
    s.predicted = decode_mask_rle(sj.at("mask_rle").get<std::string>(),
                                  sj.at("mask_rows").get<int>(), sj.at("mask_cols").get<int>());
    fold.samples.push_back(std::move(s));
  }
  return fold;
}

nlohmann::json experiment_to_json(const ExperimentReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const FoldResult& f : report.folds) folds.push_back(fold_to_json(f));
  return {
      {"schema", kExperimentSchema},
      {"cell", cell_name(report.mode)},
      {"mode", to_string(report.mode.mode)},
      {"segmenter", to_string(report.mode.segmenter)},
      {"variant", to_string(report.mode.variant)},
      {"seed", report.seed},
      {"any_invalid", report.any_invalid},
      {"folds", folds},
  };
}

ExperimentReport experiment_from_json(const nlohmann::json& j) {
  if (j.at("schema").get<std::string>() != kExperimentSchema)
    throw std::runtime_error("experiment report: unsupported schema " +
                             j.at("schema").get<std::string>());
  ExperimentReport report;
  report.mode.mode = mode_from_string(j.at("mode").get<std::string>());
  report.mode.segmenter = model_kind_from_string(j.at("segmenter").get<std::string>());
  report.mode.variant = variant_from_string(j.at("variant").get<std::string>());
  report.seed = j.at("seed").get<std::uint64_t>();
  report.any_invalid = j.at("any_invalid").get<bool>();
  for (const nlohmann::json& fj : j.at("folds")) report.folds.push_back(fold_from_json(fj));
  return report;
}

std::string canonical_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_experiment_report(const std::filesystem::path& path, const ExperimentReport& report) {
  write_text_file(path, canonical_json(experiment_to_json(report)));
}

ExperimentReport read_experiment_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open experiment report: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed experiment report " + path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

RunSummary summarize_reports(std::span<const ExperimentReport> reports) {
  RunSummary summary;
  for (const ExperimentReport& report : reports) {
    CellStats stats;
    stats.present = true;
    bool any_valid = false;
    bool any_gated = false;
    for (const FoldResult& f : report.folds) {
      if (!f.valid) continue;
      any_valid = true;
      if (f.gated_count > 0) any_gated = true;
    }
    stats.any_valid = any_valid;
    if (any_valid) stats.all = score_pipeline(report);
    stats.has_gated = any_gated;
    if (any_gated) stats.gated = score_pipeline_gated(report);
    for (const FoldResult& f : report.folds) {
      if (!f.valid) continue;
      for (const SampleResult& s : f.samples) {
        stats.per_image_all.push_back(s.score.value);
        if (s.gate.predicted == Label::BP) stats.per_image_gated.push_back(s.score.value);
      }
    }
    summary.cells[cell_name(report.mode)] = std::move(stats);
  }
  return summary;
}

namespace {

const Mode kRowOrder[] = {Mode::NO_CLASSIFICATION, Mode::HYBRID, Mode::PERFECT_CLASSIFICATION};
const DataVariant kVariantOrder[] = {DataVariant::NON_FILTERED, DataVariant::FILTERED};
const ModelKind kSegmenterOrder[] = {ModelKind::UNET, ModelKind::MNET};

std::string protocol_label(Mode mode) {
  switch (mode) {
    case Mode::NO_CLASSIFICATION: return "No classification";
    case Mode::HYBRID: return "Hybrid model";
    case Mode::PERFECT_CLASSIFICATION: return "Perfect classification";
  }
  throw std::logic_error("unknown mode");
}

// One table cell: "mean +- std" over valid folds, "*" when only one fold
// contributed (std undefined), "n/a" when the cell ran but no fold was
// valid, empty when the cell was never run.
std::string format_cell(const RunSummary& summary, DataVariant variant, ModelKind segmenter,
                        Mode mode, bool gated, const char* pm) {
  const auto it = summary.cells.find(cell_name(variant, segmenter, mode));
  if (it == summary.cells.end()) return "";
  const CellStats& stats = it->second;
  const bool have = gated ? stats.has_gated : stats.any_valid;
  if (!have) return "n/a";
  const FoldAggregate& agg = gated ? stats.gated : stats.all;
  std::string text = fmt2(agg.mean) + " " + pm + " " + fmt2(agg.stddev);
  if (agg.degenerate) text += "*";
  return text;
}

std::string variant_label(DataVariant variant) {
  return variant == DataVariant::NON_FILTERED ? "Non-filtered" : "Filtered";
}

std::string segmenter_label(ModelKind kind) { return kind == ModelKind::UNET ? "U-net" : "M-net"; }

}  // namespace

std::string render_table2_csv(const RunSummary& summary) {
  std::string out = "protocol";
  for (DataVariant variant : kVariantOrder)
    for (ModelKind segmenter : kSegmenterOrder)
      for (const char* scope : {"all", "gated"})
        out += "," + to_string(variant) + "_" + to_string(segmenter) + "_" + scope;
  out += "\n";
  for (Mode mode : kRowOrder) {
    out += protocol_label(mode);
    for (DataVariant variant : kVariantOrder)
      for (ModelKind segmenter : kSegmenterOrder)
        for (bool gated : {false, true})
          out += "," + format_cell(summary, variant, segmenter, mode, gated, "+-");
    out += "\n";
  }
  return out;
}

std::string render_table2_md(const RunSummary& summary) {
  std::string out = "| Protocol |";
  int n_cols = 1;
  for (DataVariant variant : kVariantOrder)
    for (ModelKind segmenter : kSegmenterOrder)
      for (const char* scope : {"all images", "gated subset"}) {
        out += " " + variant_label(variant) + " " + segmenter_label(segmenter) + " (" + scope +
               ") |";
        ++n_cols;
      }
  out += "\n|";
  for (int i = 0; i < n_cols; ++i) out += " --- |";
  out += "\n";
  for (Mode mode : kRowOrder) {
    out += "| " + protocol_label(mode) + " |";
    for (DataVariant variant : kVariantOrder)
      for (ModelKind segmenter : kSegmenterOrder)
        for (bool gated : {false, true}) {
          std::string cell = format_cell(summary, variant, segmenter, mode, gated, "±");
          out += " " + (cell.empty() ? std::string("—") : cell) + " |";
        }
    out += "\n";
  }
  out +=
      "\nMean DSC ± sample standard deviation over valid folds. \"All images\" scores every "
      "test image (non-gated images score against the empty mask); \"gated subset\" scores only "
      "images the gate passed. \\* = single valid fold (std undefined, shown as 0.00); n/a = no "
      "valid fold; — = cell not run.\n";
  return out;
}

std::string render_table1_csv(const ClassCounts& non_filtered, const ClassCounts& filtered) {
  std::string out = "class,non_filtered,filtered\n";
  out += "BP," + std::to_string(non_filtered.bp) + "," + std::to_string(filtered.bp) + "\n";
  out += "No-BP," + std::to_string(non_filtered.no_bp) + "," + std::to_string(filtered.no_bp) +
         "\n";
  out += "Total," + std::to_string(non_filtered.total()) + "," +
         std::to_string(filtered.total()) + "\n";
  return out;
}

namespace {

nlohmann::json scope_stats(const RunSummary& summary, bool gated, TTestKind kind,
                           TTestGrouping grouping) {
  // Cells with data in this scope, in map (name) order for stable output.
  std::vector<std::pair<std::string, const std::vector<double>*>> groups;
  for (const auto& [name, stats] : summary.cells) {
    const bool have = gated ? stats.has_gated : stats.any_valid;
    if (!have) continue;
    const std::vector<double>* values =
        grouping == TTestGrouping::PER_FOLD
            ? (gated ? &stats.gated.per_fold : &stats.all.per_fold)
            : (gated ? &stats.per_image_gated : &stats.per_image_all);
    groups.emplace_back(name, values);
  }

  nlohmann::json shapiro = nlohmann::json::object();
  for (const auto& [name, values] : groups) {
    try {
      const StatTestResult r = shapiro_wilk(*values);
      shapiro[name] = {{"statistic", r.statistic}, {"p_value", r.p_value}, {"n", r.n.at(0)}};
    } catch (const std::exception& e) {
      shapiro[name] = {{"error", e.what()}, {"n", int(values->size())}};
    }
  }

  nlohmann::json tests = nlohmann::json::array();
  for (size_t i = 0; i < groups.size(); ++i) {
    for (size_t k = i + 1; k < groups.size(); ++k) {
      nlohmann::json entry = {{"cell_a", groups[i].first}, {"cell_b", groups[k].first}};
      try {
        const StatTestResult r = t_test_two_sided(*groups[i].second, *groups[k].second, kind);
        entry["statistic"] = r.statistic;
        entry["p_value"] = r.p_value;
        entry["n_a"] = r.n.at(0);
        entry["n_b"] = r.n.at(1);
      } catch (const std::exception& e) {
        entry["error"] = e.what();
      }
      tests.push_back(std::move(entry));
    }
  }

  return {{"shapiro_wilk", shapiro}, {"t_tests", tests}};
}

}  // namespace

std::string to_string(TTestGrouping grouping) {
  return grouping == TTestGrouping::PER_FOLD ? "per_fold" : "per_image";
}

TTestGrouping t_test_grouping_from_string(const std::string& s) {
  if (s == "per_fold") return TTestGrouping::PER_FOLD;
  if (s == "per_image") return TTestGrouping::PER_IMAGE;
  throw std::invalid_argument("unknown t-test grouping: " + s);
}

nlohmann::json stats_tests_json(const RunSummary& summary, TTestKind kind,
                                TTestGrouping grouping) {
  return {
      {"schema", kStatsSchema},
      {"t_test_kind", kind == TTestKind::WELCH ? "welch" : "student_pooled"},
      {"grouping", to_string(grouping)},
      {"scopes",
       {{"all", scope_stats(summary, false, kind, grouping)},
        {"gated", scope_stats(summary, true, kind, grouping)}}},
  };
}

std::string to_string(FilterPolicy policy) {
  return policy == FilterPolicy::REMOVE_NO_BP_MEMBER ? "remove_no_bp_member" : "remove_both";
}

FilterPolicy filter_policy_from_string(const std::string& s) {
  if (s == "remove_no_bp_member") return FilterPolicy::REMOVE_NO_BP_MEMBER;
  if (s == "remove_both") return FilterPolicy::REMOVE_BOTH;
  throw std::invalid_argument("unknown filter policy: " + s);
}

nlohmann::json filter_report_to_json(const FilterReport& report, FilterPolicy policy,
                                     const std::vector<SimilarityPair>& contradictions) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const SimilarityPair& p : contradictions)
    pairs.push_back({{"id_a", p.id_a}, {"id_b", p.id_b}, {"similarity", p.similarity}});
  return {
      {"schema", kFilterSchema},
      {"threshold", report.threshold},
      {"policy", to_string(policy)},
      {"removed_ids", report.removed_ids},
      {"counts_before", {{"bp", report.counts_before.bp}, {"no_bp", report.counts_before.no_bp}}},
      {"counts_after", {{"bp", report.counts_after.bp}, {"no_bp", report.counts_after.no_bp}}},
      {"contradictions", pairs},
  };
}

}  // namespace bpseg
