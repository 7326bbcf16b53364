#include "bpseg/curation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace bpseg {

double zncc(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("zncc: shape mismatch");
  const size_t n = a.size();
  if (n == 0) throw std::invalid_argument("zncc: empty grids");
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (size_t i = 0; i < n; ++i) {
    const double x = a.data[i], y = b.data[i];
    sa += x;
    sb += y;
    saa += x * x;
    sbb += y * y;
    sab += x * y;
  }
  const double na = n * saa - sa * sa;
  const double nb = n * sbb - sb * sb;
  if (na <= 0.0 || nb <= 0.0) {
    // At least one constant grid. Equal constants agree perfectly.
    return (na <= 0.0 && nb <= 0.0 && a.data == b.data) ? 1.0 : 0.0;
  }
  const double r = (n * sab - sa * sb) / std::sqrt(na * nb);
  return std::clamp(r, 0.0, 1.0);
}

std::vector<SimilarityPair> pairwise_similarity(const DatasetIndex& index,
                                                const SimilarityOptions& options) {
  if (index.samples.empty()) throw std::invalid_argument("pairwise_similarity: empty index");
  const int n = static_cast<int>(index.samples.size());
  std::vector<Image> thumbs(n);
  for (int i = 0; i < n; ++i)
    thumbs[i] = resize_bilinear(index.samples[i].image, options.downsample_rows,
                                options.downsample_cols);

  std::vector<SimilarityPair> pairs;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!options.global_search &&
          index.samples[i].subject_id != index.samples[j].subject_id)
        continue;
      const double s = zncc(thumbs[i], thumbs[j]);
      if (s >= options.floor) pairs.push_back({i, j, s, false});
    }
  }
  return pairs;
}

std::vector<SimilarityPair> find_contradictions(const std::vector<SimilarityPair>& pairs,
                                                const DatasetIndex& index, double threshold) {
  if (threshold <= 0.0 || threshold > 1.0)
    throw std::invalid_argument("find_contradictions: threshold must be in (0, 1]");
  std::vector<SimilarityPair> result;
  for (const auto& p : pairs) {
    if (p.similarity < threshold) continue;
    if (index.samples.at(p.id_a).label == index.samples.at(p.id_b).label) continue;
    SimilarityPair marked = p;
    marked.contradictory = true;
    result.push_back(marked);
  }
  return result;
}

std::pair<DatasetIndex, FilterReport> filter_dataset(const DatasetIndex& index,
                                                     const std::vector<SimilarityPair>& contradictions,
                                                     FilterPolicy policy, double threshold) {
  std::set<int> removed;
  for (const auto& p : contradictions) {
    if (policy == FilterPolicy::REMOVE_BOTH) {
      removed.insert(p.id_a);
      removed.insert(p.id_b);
    } else {
      removed.insert(index.samples.at(p.id_a).label == Label::NO_BP ? p.id_a : p.id_b);
    }
  }

  FilterReport report;
  report.threshold = threshold;
  report.counts_before = index.class_counts;
  report.removed_ids.assign(removed.begin(), removed.end());

  DatasetIndex filtered;
  filtered.source = index.source;
  for (int i = 0; i < static_cast<int>(index.samples.size()); ++i)
    if (!removed.count(i)) filtered.samples.push_back(index.samples[i]);
  filtered.class_counts = count_classes(filtered.samples);
  report.counts_after = filtered.class_counts;
  return {std::move(filtered), report};
}

}  // namespace bpseg
