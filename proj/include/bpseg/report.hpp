#ifndef BPSEG_REPORT_HPP
#define BPSEG_REPORT_HPP

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpseg/curation.hpp"
#include "bpseg/pipeline.hpp"

namespace bpseg {

/** "variant_segmenter_mode", the run-directory identity of one grid cell. */
std::string cell_name(DataVariant variant, ModelKind segmenter, Mode mode);
std::string cell_name(const ExperimentMode& mode);

/** Row-major run-length mask encoding, "value:length" comma-joined. */
std::string encode_mask_rle(const Mask& mask);
Mask decode_mask_rle(const std::string& rle, int rows, int cols);

/** Mode-label-free fold serialization; two folds are equivalent iff their
 * JSON matches. */
nlohmann::json fold_to_json(const FoldResult& fold);
FoldResult fold_from_json(const nlohmann::json& j);

nlohmann::json experiment_to_json(const ExperimentReport& report);
ExperimentReport experiment_from_json(const nlohmann::json& j);

/** Canonical dump: sorted keys, two-space indent, trailing newline. */
std::string canonical_json(const nlohmann::json& j);

void write_experiment_report(const std::filesystem::path& path, const ExperimentReport& report);
ExperimentReport read_experiment_report(const std::filesystem::path& path);

/** Per-cell aggregates feeding the table and statistics renderers. */
struct CellStats {
  bool present = false;
  bool any_valid = false;       // >= 1 valid fold
  FoldAggregate all;            // over valid folds' all-test-image DSC
  bool has_gated = false;       // >= 1 valid fold with gated samples
  FoldAggregate gated;          // over gated-subset DSC of those folds
  std::vector<double> per_image_all;    // per-sample DSC pooled over valid folds
  std::vector<double> per_image_gated;  // same, BP-gated samples only
};

struct RunSummary {
  std::map<std::string, CellStats> cells;  // keyed by cell_name
};

RunSummary summarize_reports(std::span<const ExperimentReport> reports);

/** DSC table shaped like the experiment grid: one row per protocol, column
 * groups variant x segmenter, each split into the all-test-image column and
 * the gated-subset column. Cells are "mean +- std" (sample std, 2 decimals);
 * "*" marks a single-fold std, "n/a" a cell with no valid fold, and an empty
 * cell was not requested. */
std::string render_table2_csv(const RunSummary& summary);
std::string render_table2_md(const RunSummary& summary);

/** Class-count table: rows BP / No-BP, columns per dataset variant. */
std::string render_table1_csv(const ClassCounts& non_filtered, const ClassCounts& filtered);

/** Which DSC values feed the statistical tests: one mean per fold (the
 * default presentation) or every test image's score pooled across folds. */
enum class TTestGrouping { PER_FOLD, PER_IMAGE };

std::string to_string(TTestGrouping grouping);
TTestGrouping t_test_grouping_from_string(const std::string& s);

/** Shapiro-Wilk per cell plus pairwise two-sided t-tests between cells, on
 * both DSC scopes. Cells whose sample counts cannot support a test carry an
 * error string instead of statistics. */
nlohmann::json stats_tests_json(const RunSummary& summary, TTestKind kind,
                                TTestGrouping grouping = TTestGrouping::PER_FOLD);

nlohmann::json filter_report_to_json(const FilterReport& report, FilterPolicy policy,
                                     const std::vector<SimilarityPair>& contradictions);

std::string to_string(FilterPolicy policy);
FilterPolicy filter_policy_from_string(const std::string& s);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace bpseg

#endif
