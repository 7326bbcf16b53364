#include "bpseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

namespace bpseg {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::NO_CLASSIFICATION: return "no_classification";
    case Mode::HYBRID: return "hybrid";
    case Mode::PERFECT_CLASSIFICATION: return "perfect_classification";
  }
  throw std::logic_error("unknown mode");
}

Mode mode_from_string(const std::string& s) {
  if (s == "no_classification") return Mode::NO_CLASSIFICATION;
  if (s == "hybrid") return Mode::HYBRID;
  if (s == "perfect_classification") return Mode::PERFECT_CLASSIFICATION;
  throw std::invalid_argument("unknown mode: " + s);
}

std::string to_string(DataVariant variant) {
  return variant == DataVariant::NON_FILTERED ? "non_filtered" : "filtered";
}

DataVariant variant_from_string(const std::string& s) {
  if (s == "non_filtered") return DataVariant::NON_FILTERED;
  if (s == "filtered") return DataVariant::FILTERED;
  throw std::invalid_argument("unknown data variant: " + s);
}

std::string to_string(GateSource source) {
  switch (source) {
    case GateSource::CNN: return "cnn";
    case GateSource::ORACLE: return "oracle";
    case GateSource::NONE: return "none";
  }
  throw std::logic_error("unknown gate source");
}

GateSource gate_source_from_string(const std::string& s) {
  if (s == "cnn") return GateSource::CNN;
  if (s == "oracle") return GateSource::ORACLE;
  if (s == "none") return GateSource::NONE;
  throw std::invalid_argument("unknown gate source: " + s);
}

std::vector<GateDecision> gate(GateSource source, std::span<const int> sample_ids,
                               std::span<const Label> gt_labels, TrainedModel* classifier,
                               std::span<const Image> images) {
  std::vector<GateDecision> decisions;
  decisions.reserve(sample_ids.size());
  switch (source) {
    case GateSource::NONE:
      for (int id : sample_ids) decisions.push_back({id, Label::BP, 1.0, source});
      break;
    case GateSource::ORACLE:
      if (gt_labels.size() != sample_ids.size())
        throw std::invalid_argument("gate: oracle needs one ground-truth label per sample");
      for (size_t i = 0; i < sample_ids.size(); ++i) {
        const bool bp = gt_labels[i] == Label::BP;
        decisions.push_back({sample_ids[i], gt_labels[i], bp ? 1.0 : 0.0, source});
      }
      break;
    case GateSource::CNN: {
      if (!classifier) throw std::invalid_argument("gate: cnn source needs a classifier");
      if (images.size() != sample_ids.size())
        throw std::invalid_argument("gate: cnn source needs one image per sample");
      for (size_t i = 0; i < sample_ids.size(); ++i) {
        const ClassPrediction p = predict_class(*classifier, images[i]);
        decisions.push_back({sample_ids[i], p.label, p.probability, source});
      }
      break;
    }
  }
  return decisions;
}

namespace {

// Sub-seed roles so each trained component draws from an independent stream;
// the oracle-gate identity between modes depends on this.
constexpr std::uint64_t kRoleClassifier = 1;
constexpr std::uint64_t kRoleSegmenter = 2;
constexpr std::uint64_t kRoleAugment = 3;

std::uint64_t fold_seed(std::uint64_t master, std::uint64_t role, int fold) {
  return Rng::derive(Rng::derive(master, role), static_cast<std::uint64_t>(fold));
}

std::vector<TrainSample> preprocess_set(std::span<const UsSample> raw,
                                        const PreprocessSpec& spec) {
  std::vector<TrainSample> out;
  out.reserve(raw.size());
  for (const UsSample& s : raw) {
    PreprocessedSample p = preprocess(s, spec);
    out.push_back({std::move(p.image), std::move(p.mask), s.label});
  }
  return out;
}

std::vector<TrainSample> bp_only(std::span<const TrainSample> set) {
  std::vector<TrainSample> out;
  for (const TrainSample& s : set)
    if (s.label == Label::BP) out.push_back(s);
  return out;
}

TrainSummary summarize(const TrainedModel& m) {
  TrainSummary t;
  t.trained = true;
  t.epochs = static_cast<int>(m.history.size());
  t.best_epoch = m.best_epoch;
  t.final_train_loss = m.history.empty() ? 0.0 : m.history.back().train_loss;
  t.best_val_loss = m.best_epoch >= 0 ? m.history[m.best_epoch].val_loss : 0.0;
  t.diverged = m.diverged;
  t.no_validation = m.no_validation;
  return t;
}

FoldResult run_fold(const ExperimentMode& mode, const DatasetIndex& data,
                    const FoldPlan::Fold& fold, int fold_index,
                    const PipelineConfigs& configs, const PipelineHooks& hooks) {
  FoldResult result;
  result.fold_index = fold_index;

  const GateSource source = hooks.gate_source_override.value_or(
      mode.mode == Mode::NO_CLASSIFICATION  ? GateSource::NONE
      : mode.mode == Mode::HYBRID           ? GateSource::CNN
                                            : GateSource::ORACLE);
  const bool bp_only_training = mode.mode != Mode::NO_CLASSIFICATION;

  // Fold ids index into data.samples.
  auto collect = [&](const std::vector<int>& ids) {
    std::vector<UsSample> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(data.samples.at(id));
    return out;
  };
  std::vector<UsSample> train_raw = collect(fold.train_ids);
  const std::vector<UsSample> val_raw = collect(fold.val_ids);
  const std::vector<UsSample> test_raw = collect(fold.test_ids);

  if (configs.augment_extra > 0)
    train_raw = augment_training_set(train_raw, configs.augment_extra,
                                     fold_seed(configs.seed, kRoleAugment, fold_index));

  if (bp_only_training) {
    const bool any_bp = std::any_of(train_raw.begin(), train_raw.end(),
                                    [](const UsSample& s) { return s.label == Label::BP; });
    if (!any_bp) {
      result.invalid_reason = "no BP training samples for BP-only segmenter training";
      return result;
    }
  }

  const PreprocessSpec clf_pp{configs.classifier_spec.rows, configs.classifier_spec.cols, true};
  const PreprocessSpec seg_pp{configs.segmenter_spec.rows, configs.segmenter_spec.cols, true};

  // Classifier: only the CNN gate needs one, and a gate stub replaces it.
  TrainedModel classifier;
  const bool want_classifier = source == GateSource::CNN && !hooks.gate_fn;
  if (want_classifier) {
    const std::vector<TrainSample> train128 = preprocess_set(train_raw, clf_pp);
    const std::vector<TrainSample> val128 = preprocess_set(val_raw, clf_pp);
    TrainConfig cfg = configs.classifier_train;
    cfg.seed = fold_seed(configs.seed, kRoleClassifier, fold_index);
    classifier = train(configs.classifier_spec, train128, val128, cfg);
    result.classifier_train = summarize(classifier);
    if (classifier.diverged) {
      result.invalid_reason = "classifier training diverged";
      return result;
    }
    if (hooks.on_model) hooks.on_model(fold_index, ModelKind::CLASSIFIER, classifier);
  }

  // Segmenter, unless a stub replaces it.
  ModelSpec seg_spec = configs.segmenter_spec;
  seg_spec.kind = mode.segmenter;
  TrainedModel segmenter;
  if (!hooks.segment_fn) {
    std::vector<TrainSample> train96 = preprocess_set(train_raw, seg_pp);
    std::vector<TrainSample> val96 = preprocess_set(val_raw, seg_pp);
    std::vector<TrainSample> seg_train =
        bp_only_training ? bp_only(train96) : std::move(train96);
    std::vector<TrainSample> seg_val = bp_only_training ? bp_only(val96) : std::move(val96);
    TrainConfig cfg = configs.segmenter_train;
    cfg.seed = fold_seed(configs.seed, kRoleSegmenter, fold_index);
    segmenter = train(seg_spec, seg_train, seg_val, cfg);
    result.segmenter_train = summarize(segmenter);
    if (segmenter.diverged) {
      result.invalid_reason = "segmenter training diverged";
      return result;
    }
    if (hooks.on_model) hooks.on_model(fold_index, seg_spec.kind, segmenter);
  }

  // Gate the test set.
  const std::vector<TrainSample> test96 = preprocess_set(test_raw, seg_pp);
  std::vector<GateDecision> decisions;
  if (hooks.gate_fn) {
    for (size_t i = 0; i < test_raw.size(); ++i)
      decisions.push_back(hooks.gate_fn(test_raw[i], fold.test_ids[i]));
  } else {
    std::vector<Label> gt;
    for (const UsSample& s : test_raw) gt.push_back(s.label);
    std::vector<Image> images128;
    if (source == GateSource::CNN) {
      for (const UsSample& s : test_raw) images128.push_back(preprocess(s, clf_pp).image);
    }
    decisions = gate(source, fold.test_ids, gt, want_classifier ? &classifier : nullptr,
                     images128);
  }

  // Segment and score every test sample; NO_BP-gated ones get the empty mask.
  double dsc_sum = 0.0, gated_sum = 0.0;
  for (size_t i = 0; i < test_raw.size(); ++i) {
    SampleResult sr;
    sr.gate = decisions[i];
    const Mask& gt = test96[i].mask;
    if (sr.gate.predicted == Label::BP) {
      sr.predicted = hooks.segment_fn ? hooks.segment_fn(test_raw[i], gt)
                                      : predict_mask(segmenter, test96[i].image);
    } else {
      sr.predicted = Mask(gt.rows, gt.cols);
    }
    sr.score = dsc(sr.predicted, gt);
    dsc_sum += sr.score.value;
    if (sr.gate.predicted == Label::BP) {
      gated_sum += sr.score.value;
      ++result.gated_count;
    }
    result.samples.push_back(std::move(sr));
  }
  if (!result.samples.empty()) result.mean_dsc = dsc_sum / result.samples.size();
  if (result.gated_count > 0) result.gated_mean_dsc = gated_sum / result.gated_count;

  // Gate quality against ground truth, when a real gate ran.
  if (source != GateSource::NONE) {
    std::vector<Label> pred, truth;
    for (size_t i = 0; i < test_raw.size(); ++i) {
      pred.push_back(decisions[i].predicted);
      truth.push_back(test_raw[i].label);
    }
    if (!pred.empty()) {
      const ConfusionCounts c = confusion(pred, truth);
      result.has_gate_metrics = true;
      result.gate_accuracy = accuracy(c);
      const F1Result f = f1(c);
      result.gate_f1 = f.value;
      result.gate_f1_degenerate = f.degenerate;
    }
  }

  result.valid = true;
  return result;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentMode& mode, const DatasetIndex& data,
                                const FoldPlan& folds, const PipelineConfigs& configs,
                                const PipelineHooks& hooks) {
  if (mode.segmenter != ModelKind::UNET && mode.segmenter != ModelKind::MNET)
    throw std::invalid_argument("run_experiment: segmenter must be unet or mnet");
  validate_index(data);
  validate_folds(folds, static_cast<int>(data.samples.size()));

  ExperimentReport report;
  report.mode = mode;
  report.seed = configs.seed;
  report.folds.resize(folds.folds.size());

  auto run_one = [&](int f) {
    try {
      report.folds[f] =
          run_fold(mode, data, folds.folds[f], f, configs, hooks);
    } catch (const std::exception& e) {
      FoldResult bad;
      bad.fold_index = f;
      bad.invalid_reason = e.what();
      report.folds[f] = std::move(bad);
    }
  };

  if (configs.parallel_folds) {
    std::vector<std::thread> workers;
    for (size_t f = 0; f < folds.folds.size(); ++f)
      workers.emplace_back(run_one, static_cast<int>(f));
    for (auto& w : workers) w.join();
  } else {
    for (size_t f = 0; f < folds.folds.size(); ++f) run_one(static_cast<int>(f));
  }

  for (const FoldResult& fr : report.folds)
    if (!fr.valid) report.any_invalid = true;
  return report;
}

FoldAggregate score_pipeline(const ExperimentReport& report) {
  std::vector<double> per_fold;
  for (const FoldResult& f : report.folds)
    if (f.valid) per_fold.push_back(f.mean_dsc);
  if (per_fold.empty()) throw std::runtime_error("score_pipeline: no valid folds");
  return aggregate_folds(per_fold);
}

FoldAggregate score_pipeline_gated(const ExperimentReport& report) {
  std::vector<double> per_fold;
  for (const FoldResult& f : report.folds)
    if (f.valid && f.gated_count > 0) per_fold.push_back(f.gated_mean_dsc);
  if (per_fold.empty())
    throw std::runtime_error("score_pipeline_gated: no valid folds with gated samples");
  return aggregate_folds(per_fold);
}

}  // namespace bpseg
