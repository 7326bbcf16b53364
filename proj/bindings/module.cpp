// Python bindings for the experiment framework. Images cross the boundary
// as float32 arrays, masks as uint8 arrays; conversions copy.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bpseg/config.hpp"
#include "bpseg/curation.hpp"
#include "bpseg/dataset.hpp"
#include "bpseg/evaluation.hpp"
#include "bpseg/models.hpp"
#include "bpseg/pipeline.hpp"
#include "bpseg/report.hpp"

namespace py = pybind11;
using namespace bpseg;

namespace {

Image image_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("image array must be 2-D");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

py::array_t<float> image_to_array(const Image& img) {
  py::array_t<float> a({img.rows, img.cols});
  std::copy(img.data.begin(), img.data.end(), a.mutable_data());
  return a;
}

Mask mask_from_array(
    const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("mask array must be 2-D");
  Mask mask(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), mask.data.begin());
  if (!mask.is_binary()) throw std::invalid_argument("mask values must be 0 or 1");
  return mask;
}

py::array_t<std::uint8_t> mask_to_array(const Mask& mask) {
  py::array_t<std::uint8_t> a({mask.rows, mask.cols});
  std::copy(mask.data.begin(), mask.data.end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "classify-then-segment ultrasound nerve localization framework";

  // enums
  py::enum_<Label>(m, "Label").value("NO_BP", Label::NO_BP).value("BP", Label::BP);
  py::enum_<ModelKind>(m, "ModelKind")
      .value("CLASSIFIER", ModelKind::CLASSIFIER)
      .value("UNET", ModelKind::UNET)
      .value("MNET", ModelKind::MNET);
  py::enum_<LossKind>(m, "LossKind")
      .value("BCE", LossKind::BCE)
      .value("SOFT_DICE", LossKind::SOFT_DICE);
  py::enum_<Mode>(m, "Mode")
      .value("NO_CLASSIFICATION", Mode::NO_CLASSIFICATION)
      .value("HYBRID", Mode::HYBRID)
      .value("PERFECT_CLASSIFICATION", Mode::PERFECT_CLASSIFICATION);
  py::enum_<DataVariant>(m, "DataVariant")
      .value("NON_FILTERED", DataVariant::NON_FILTERED)
      .value("FILTERED", DataVariant::FILTERED);
  py::enum_<GateSource>(m, "GateSource")
      .value("CNN", GateSource::CNN)
      .value("ORACLE", GateSource::ORACLE)
      .value("NONE", GateSource::NONE);
  py::enum_<TTestKind>(m, "TTestKind")
      .value("WELCH", TTestKind::WELCH)
      .value("STUDENT_POOLED", TTestKind::STUDENT_POOLED);
  py::enum_<FilterPolicy>(m, "FilterPolicy")
      .value("REMOVE_NO_BP_MEMBER", FilterPolicy::REMOVE_NO_BP_MEMBER)
      .value("REMOVE_BOTH", FilterPolicy::REMOVE_BOTH);

  // grids
  py::class_<Image>(m, "Image")
      .def(py::init(&image_from_array), py::arg("array"))
      .def_readonly("rows", &Image::rows)
      .def_readonly("cols", &Image::cols)
      .def("numpy", &image_to_array);
  py::class_<Mask>(m, "Mask")
      .def(py::init(&mask_from_array), py::arg("array"))
      .def_readonly("rows", &Mask::rows)
      .def_readonly("cols", &Mask::cols)
      .def("count", &Mask::count)
      .def("numpy", &mask_to_array);

  // dataset
  py::class_<UsSample>(m, "UsSample")
      .def(py::init<>())
      .def_readwrite("subject_id", &UsSample::subject_id)
      .def_readwrite("image_index", &UsSample::image_index)
      .def_readwrite("image", &UsSample::image)
      .def_readwrite("mask", &UsSample::mask)
      .def_readwrite("label", &UsSample::label);
  py::class_<ClassCounts>(m, "ClassCounts")
      .def_readonly("bp", &ClassCounts::bp)
      .def_readonly("no_bp", &ClassCounts::no_bp)
      .def("total", &ClassCounts::total);
  py::class_<DatasetIndex>(m, "DatasetIndex")
      .def(py::init<>())
      .def_readwrite("samples", &DatasetIndex::samples)
      .def_readonly("class_counts", &DatasetIndex::class_counts);
  m.def("derive_label", &derive_label, py::arg("mask"));
  m.def("count_classes", &count_classes, py::arg("samples"));
  m.def("validate_index", &validate_index, py::arg("index"));
  m.def("synth_generate", &synth_generate, py::arg("n"), py::arg("bp_fraction"), py::arg("rows"),
        py::arg("cols"), py::arg("seed"));
  m.def("plant_contradictions", &plant_contradictions, py::arg("index"), py::arg("n_pairs"),
        py::arg("seed"));
  m.def("load_dataset", &load_dataset, py::arg("root"));
  m.def("write_dataset", &write_dataset, py::arg("out_dir"), py::arg("index"),
        py::arg("extension") = ".png");

  py::class_<FoldPlan::Fold>(m, "Fold")
      .def_readonly("train_ids", &FoldPlan::Fold::train_ids)
      .def_readonly("val_ids", &FoldPlan::Fold::val_ids)
      .def_readonly("test_ids", &FoldPlan::Fold::test_ids);
  py::class_<FoldPlan>(m, "FoldPlan")
      .def_readonly("n_folds", &FoldPlan::n_folds)
      .def_readonly("seed", &FoldPlan::seed)
      .def_readonly("val_fraction", &FoldPlan::val_fraction)
      .def_readonly("folds", &FoldPlan::folds);
  m.def("make_folds", &make_folds, py::arg("index"), py::arg("seed"), py::arg("n_folds") = 5,
        py::arg("val_fraction") = 0.20, py::arg("group_by_subject") = false);
  m.def(
      "validate_folds",
      [](const FoldPlan& plan, int n_samples) { validate_folds(plan, n_samples); },
      py::arg("plan"), py::arg("n_samples"));

  py::class_<PreprocessedSample>(m, "PreprocessedSample")
      .def_readonly("image", &PreprocessedSample::image)
      .def_readonly("mask", &PreprocessedSample::mask)
      .def_readonly("degenerate", &PreprocessedSample::degenerate);
  m.def(
      "preprocess",
      [](const UsSample& sample, int target_rows, int target_cols, bool normalize) {
        return preprocess(sample, {target_rows, target_cols, normalize});
      },
      py::arg("sample"), py::arg("target_rows"), py::arg("target_cols"),
      py::arg("normalize") = true);
  m.def(
      "augment_training_set",
      [](const std::vector<UsSample>& train, int n_extra, std::uint64_t seed) {
        return augment_training_set(train, n_extra, seed);
      },
      py::arg("train"), py::arg("n_extra"), py::arg("seed"));

  // curation
  py::class_<SimilarityPair>(m, "SimilarityPair")
      .def_readonly("id_a", &SimilarityPair::id_a)
      .def_readonly("id_b", &SimilarityPair::id_b)
      .def_readonly("similarity", &SimilarityPair::similarity)
      .def_readonly("contradictory", &SimilarityPair::contradictory);
  py::class_<FilterReport>(m, "FilterReport")
      .def_readonly("threshold", &FilterReport::threshold)
      .def_readonly("removed_ids", &FilterReport::removed_ids)
      .def_readonly("counts_before", &FilterReport::counts_before)
      .def_readonly("counts_after", &FilterReport::counts_after);
  m.def("zncc", &zncc, py::arg("a"), py::arg("b"));
  m.def(
      "pairwise_similarity",
      [](const DatasetIndex& index, double floor, bool global_search) {
        SimilarityOptions options;
        options.floor = floor;
        options.global_search = global_search;
        return pairwise_similarity(index, options);
      },
      py::arg("index"), py::arg("floor") = 0.90, py::arg("global_search") = false);
  m.def("find_contradictions", &find_contradictions, py::arg("pairs"), py::arg("index"),
        py::arg("threshold"));
  m.def("filter_dataset", &filter_dataset, py::arg("index"), py::arg("contradictions"),
        py::arg("policy"), py::arg("threshold"));

  // evaluation
  py::class_<ConfusionCounts>(m, "ConfusionCounts")
      .def_readonly("tp", &ConfusionCounts::tp)
      .def_readonly("fp", &ConfusionCounts::fp)
      .def_readonly("tn", &ConfusionCounts::tn)
      .def_readonly("fn", &ConfusionCounts::fn)
      .def("total", &ConfusionCounts::total);
  m.def(
      "confusion",
      [](const std::vector<Label>& predicted, const std::vector<Label>& truth) {
        return confusion(predicted, truth);
      },
      py::arg("predicted"), py::arg("truth"));
  m.def("accuracy", &accuracy, py::arg("counts"));
  m.def(
      "f1",
      [](const ConfusionCounts& c) {
        const F1Result r = f1(c);
        return py::make_tuple(r.value, r.degenerate);
      },
      py::arg("counts"), "returns (value, degenerate)");
  m.def(
      "dsc",
      [](const Mask& predicted, const Mask& truth) {
        const DscResult r = dsc(predicted, truth);
        return py::make_tuple(r.value, r.empty_both);
      },
      py::arg("predicted"), py::arg("ground_truth"), "returns (value, empty_both)");
  m.def(
      "shapiro_wilk",
      [](const std::vector<double>& samples) {
        const StatTestResult r = shapiro_wilk(samples);
        return py::make_tuple(r.statistic, r.p_value);
      },
      py::arg("samples"), "returns (W, p_value)");
  m.def(
      "t_test_two_sided",
      [](const std::vector<double>& a, const std::vector<double>& b, TTestKind kind) {
        const StatTestResult r = t_test_two_sided(a, b, kind);
        return py::make_tuple(r.statistic, r.p_value);
      },
      py::arg("a"), py::arg("b"), py::arg("kind") = TTestKind::WELCH,
      "returns (statistic, p_value)");
  py::class_<FoldAggregate>(m, "FoldAggregate")
      .def_readonly("mean", &FoldAggregate::mean)
      .def_readonly("stddev", &FoldAggregate::stddev)
      .def_readonly("degenerate", &FoldAggregate::degenerate)
      .def_readonly("per_fold", &FoldAggregate::per_fold);
  m.def(
      "aggregate_folds",
      [](const std::vector<double>& per_fold) { return aggregate_folds(per_fold); },
      py::arg("per_fold"));

  // models
  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init([](ModelKind kind, int rows, int cols, int base_channels, int depth) {
             return ModelSpec{kind, rows, cols, base_channels, depth};
           }),
           py::arg("kind") = ModelKind::UNET, py::arg("rows") = 96, py::arg("cols") = 96,
           py::arg("base_channels") = 32, py::arg("depth") = 4)
      .def_readwrite("kind", &ModelSpec::kind)
      .def_readwrite("rows", &ModelSpec::rows)
      .def_readwrite("cols", &ModelSpec::cols)
      .def_readwrite("base_channels", &ModelSpec::base_channels)
      .def_readwrite("depth", &ModelSpec::depth);
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init([](int max_epochs, int batch_size, double learning_rate,
                       int early_stop_patience, LossKind loss, std::uint64_t seed) {
             return TrainConfig{max_epochs, batch_size, learning_rate, early_stop_patience, loss,
                                seed};
           }),
           py::arg("max_epochs") = 50, py::arg("batch_size") = 4,
           py::arg("learning_rate") = 1e-3, py::arg("early_stop_patience") = 10,
           py::arg("loss") = LossKind::SOFT_DICE, py::arg("seed") = 0)
      .def_readwrite("max_epochs", &TrainConfig::max_epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("early_stop_patience", &TrainConfig::early_stop_patience)
      .def_readwrite("loss", &TrainConfig::loss)
      .def_readwrite("seed", &TrainConfig::seed);
  py::class_<TrainSample>(m, "TrainSample")
      .def(py::init([](const Image& image, const Mask& mask, Label label) {
             return TrainSample{image, mask, label};
           }),
           py::arg("image"), py::arg("mask") = Mask(), py::arg("label") = Label::NO_BP)
      .def_readwrite("image", &TrainSample::image)
      .def_readwrite("mask", &TrainSample::mask)
      .def_readwrite("label", &TrainSample::label);
  py::class_<EpochStats>(m, "EpochStats")
      .def_readonly("train_loss", &EpochStats::train_loss)
      .def_readonly("val_loss", &EpochStats::val_loss)
      .def_readonly("val_metric", &EpochStats::val_metric);
  py::class_<TrainedModel>(m, "TrainedModel")
      .def_readonly("spec", &TrainedModel::spec)
      .def_readonly("history", &TrainedModel::history)
      .def_readonly("diverged", &TrainedModel::diverged)
      .def_readonly("no_validation", &TrainedModel::no_validation)
      .def_readonly("best_epoch", &TrainedModel::best_epoch)
      .def("parameter_count", [](const TrainedModel& model) { return model.net->parameter_count(); });
  m.def(
      "train",
      [](const ModelSpec& spec, const std::vector<TrainSample>& train_set,
         const std::vector<TrainSample>& val_set, const TrainConfig& config) {
        py::gil_scoped_release release;
        return train(spec, train_set, val_set, config);
      },
      py::arg("spec"), py::arg("train_set"), py::arg("val_set"), py::arg("config"));
  m.def(
      "predict_class",
      [](TrainedModel& model, const Image& image) {
        const ClassPrediction p = predict_class(model, image);
        return py::make_tuple(p.probability, p.label);
      },
      py::arg("model"), py::arg("image"), "returns (probability, label)");
  m.def(
      "predict_mask",
      [](TrainedModel& model, const Image& image) { return predict_mask(model, image); },
      py::arg("model"), py::arg("image"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  // pipeline
  py::class_<ExperimentMode>(m, "ExperimentMode")
      .def(py::init([](Mode mode, ModelKind segmenter, DataVariant variant) {
             return ExperimentMode{mode, segmenter, variant};
           }),
           py::arg("mode"), py::arg("segmenter") = ModelKind::UNET,
           py::arg("variant") = DataVariant::NON_FILTERED)
      .def_readwrite("mode", &ExperimentMode::mode)
      .def_readwrite("segmenter", &ExperimentMode::segmenter)
      .def_readwrite("variant", &ExperimentMode::variant);
  py::class_<PipelineConfigs>(m, "PipelineConfigs")
      .def(py::init<>())
      .def_readwrite("classifier_spec", &PipelineConfigs::classifier_spec)
      .def_readwrite("segmenter_spec", &PipelineConfigs::segmenter_spec)
      .def_readwrite("classifier_train", &PipelineConfigs::classifier_train)
      .def_readwrite("segmenter_train", &PipelineConfigs::segmenter_train)
      .def_readwrite("augment_extra", &PipelineConfigs::augment_extra)
      .def_readwrite("seed", &PipelineConfigs::seed)
      .def_readwrite("parallel_folds", &PipelineConfigs::parallel_folds);
  py::class_<GateDecision>(m, "GateDecision")
      .def_readonly("sample_id", &GateDecision::sample_id)
      .def_readonly("predicted", &GateDecision::predicted)
      .def_readonly("probability", &GateDecision::probability)
      .def_readonly("source", &GateDecision::source);
  py::class_<SampleResult>(m, "SampleResult")
      .def_readonly("gate", &SampleResult::gate)
      .def_readonly("predicted", &SampleResult::predicted)
      .def_property_readonly("dsc", [](const SampleResult& s) { return s.score.value; })
      .def_property_readonly("empty_both",
                             [](const SampleResult& s) { return s.score.empty_both; });
  py::class_<TrainSummary>(m, "TrainSummary")
      .def_readonly("trained", &TrainSummary::trained)
      .def_readonly("epochs", &TrainSummary::epochs)
      .def_readonly("best_epoch", &TrainSummary::best_epoch)
      .def_readonly("final_train_loss", &TrainSummary::final_train_loss)
      .def_readonly("best_val_loss", &TrainSummary::best_val_loss)
      .def_readonly("diverged", &TrainSummary::diverged)
      .def_readonly("no_validation", &TrainSummary::no_validation);
  py::class_<FoldResult>(m, "FoldResult")
      .def_readonly("fold_index", &FoldResult::fold_index)
      .def_readonly("valid", &FoldResult::valid)
      .def_readonly("invalid_reason", &FoldResult::invalid_reason)
      .def_readonly("samples", &FoldResult::samples)
      .def_readonly("mean_dsc", &FoldResult::mean_dsc)
      .def_readonly("gated_mean_dsc", &FoldResult::gated_mean_dsc)
      .def_readonly("gated_count", &FoldResult::gated_count)
      .def_readonly("has_gate_metrics", &FoldResult::has_gate_metrics)
      .def_readonly("gate_accuracy", &FoldResult::gate_accuracy)
      .def_readonly("gate_f1", &FoldResult::gate_f1)
      .def_readonly("gate_f1_degenerate", &FoldResult::gate_f1_degenerate)
      .def_readonly("classifier_train", &FoldResult::classifier_train)
      .def_readonly("segmenter_train", &FoldResult::segmenter_train);
  py::class_<ExperimentReport>(m, "ExperimentReport")
      .def_readonly("mode", &ExperimentReport::mode)
      .def_readonly("seed", &ExperimentReport::seed)
      .def_readonly("folds", &ExperimentReport::folds)
      .def_readonly("any_invalid", &ExperimentReport::any_invalid);
  m.def(
      "run_experiment",
      [](const ExperimentMode& mode, const DatasetIndex& data, const FoldPlan& folds,
         const PipelineConfigs& configs) {
        py::gil_scoped_release release;
        return run_experiment(mode, data, folds, configs);
      },
      py::arg("mode"), py::arg("data"), py::arg("folds"), py::arg("configs"));
  m.def("score_pipeline", &score_pipeline, py::arg("report"));
  m.def("score_pipeline_gated", &score_pipeline_gated, py::arg("report"));

  // report
  m.def("cell_name", py::overload_cast<const ExperimentMode&>(&cell_name), py::arg("mode"));
  m.def("encode_mask_rle", &encode_mask_rle, py::arg("mask"));
  m.def("decode_mask_rle", &decode_mask_rle, py::arg("rle"), py::arg("rows"), py::arg("cols"));
  m.def(
      "experiment_to_json",
      [](const ExperimentReport& report) { return canonical_json(experiment_to_json(report)); },
      py::arg("report"), "canonical JSON text of an experiment report");
  m.def("write_experiment_report", &write_experiment_report, py::arg("path"), py::arg("report"));
  m.def("read_experiment_report", &read_experiment_report, py::arg("path"));
  m.def(
      "render_table2_csv",
      [](const std::vector<ExperimentReport>& reports) {
        return render_table2_csv(summarize_reports(reports));
      },
      py::arg("reports"));
  m.def(
      "render_table2_md",
      [](const std::vector<ExperimentReport>& reports) {
        return render_table2_md(summarize_reports(reports));
      },
      py::arg("reports"));
  m.def(
      "stats_tests",
      [](const std::vector<ExperimentReport>& reports, TTestKind kind) {
        return canonical_json(stats_tests_json(summarize_reports(reports), kind));
      },
      py::arg("reports"), py::arg("kind") = TTestKind::WELCH,
      "statistical-test summary as canonical JSON text");
  m.def("render_table1_csv", &render_table1_csv, py::arg("non_filtered"), py::arg("filtered"));
}
