#ifndef BPSEG_CURATION_HPP
#define BPSEG_CURATION_HPP

#include <utility>
#include <vector>

#include "bpseg/dataset.hpp"

namespace bpseg {

/** One close-matching image pair. Ids are indices into the source
 * DatasetIndex. Similarity is symmetric and exactly 1 for identical grids. */
struct SimilarityPair {
  int id_a = 0;
  int id_b = 0;
  double similarity = 0.0;
  bool contradictory = false;  // members carry differing labels
};

struct FilterReport {
  double threshold = 0.0;
  std::vector<int> removed_ids;  // indices into the pre-filter index
  ClassCounts counts_before;
  ClassCounts counts_after;
};

enum class FilterPolicy { REMOVE_NO_BP_MEMBER, REMOVE_BOTH };

struct SimilarityOptions {
  int downsample_rows = 64;
  int downsample_cols = 64;
  double floor = 0.90;        // pairs below this are not reported
  bool global_search = false; // default restricts to same-subject pairs
};

/** Zero-normalized cross-correlation of two equal-shape grids, negative
 * correlations clamped to 0. Identical grids score exactly 1. Two constant
 * grids score 1 when equal, else 0; one constant grid scores 0. */
double zncc(const Image& a, const Image& b);

/** All pairs (id_a < id_b) whose ZNCC on downsampled images reaches the
 * floor. Same-subject pairs only unless global_search. */
std::vector<SimilarityPair> pairwise_similarity(const DatasetIndex& index,
                                                const SimilarityOptions& options = {});

/** Pairs at or above the threshold whose members carry differing labels.
 * Threshold must be in (0, 1]. */
std::vector<SimilarityPair> find_contradictions(const std::vector<SimilarityPair>& pairs,
                                                const DatasetIndex& index, double threshold);

/** Removes the NO_BP member of each contradictory pair (or both members
 * under REMOVE_BOTH) and reports before/after class counts. The threshold is
 * recorded in the report verbatim. */
std::pair<DatasetIndex, FilterReport> filter_dataset(const DatasetIndex& index,
                                                     const std::vector<SimilarityPair>& contradictions,
                                                     FilterPolicy policy, double threshold);

}  // namespace bpseg

#endif
