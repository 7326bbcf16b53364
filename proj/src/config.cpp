#include "bpseg/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

#include "bpseg/report.hpp"

namespace bpseg {

namespace {

constexpr const char* kConfigSchema = "bpseg-config/1";

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key \"" + key + "\" in " + where);
  }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

nlohmann::json net_to_json(const NetConfig& n) {
  return {
      {"base_channels", n.base_channels},
      {"depth", n.depth},
      {"max_epochs", n.max_epochs},
      {"batch_size", n.batch_size},
      {"learning_rate", n.learning_rate},
      {"patience", n.patience},
      {"loss", to_string(n.loss)},
  };
}

void net_from_json(const nlohmann::json& j, NetConfig& n, const std::string& where) {
  check_keys(j, {"base_channels", "depth", "max_epochs", "batch_size", "learning_rate",
                 "patience", "loss"},
             where);
  maybe(j, "base_channels", n.base_channels);
  maybe(j, "depth", n.depth);
  maybe(j, "max_epochs", n.max_epochs);
  maybe(j, "batch_size", n.batch_size);
  maybe(j, "learning_rate", n.learning_rate);
  maybe(j, "patience", n.patience);
  if (j.contains("loss")) n.loss = loss_kind_from_string(j.at("loss").get<std::string>());
}

}  // namespace

std::string to_string(TTestKind kind) {
  return kind == TTestKind::WELCH ? "welch" : "student_pooled";
}

TTestKind t_test_kind_from_string(const std::string& s) {
  if (s == "welch") return TTestKind::WELCH;
  if (s == "student_pooled") return TTestKind::STUDENT_POOLED;
  throw std::invalid_argument("unknown t-test kind: " + s);
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json modes = nlohmann::json::array();
  for (Mode m : c.modes) modes.push_back(to_string(m));
  nlohmann::json segmenters = nlohmann::json::array();
  for (ModelKind k : c.segmenters) segmenters.push_back(to_string(k));
  nlohmann::json variants = nlohmann::json::array();
  for (DataVariant v : c.variants) variants.push_back(to_string(v));
  return {
      {"schema", kConfigSchema},
      {"data",
       {{"root", c.data_root},
        {"synth",
         {{"n", c.synth.n},
          {"bp_fraction", c.synth.bp_fraction},
          {"rows", c.synth.rows},
          {"cols", c.synth.cols}}}}},
      {"grid", {{"modes", modes}, {"segmenters", segmenters}, {"variants", variants}}},
      {"curation",
       {{"threshold", c.curation.threshold},
        {"policy", to_string(c.curation.policy)},
        {"similarity_floor", c.curation.similarity_floor},
        {"global_search", c.curation.global_search}}},
      {"folds",
       {{"n_folds", c.folds.n_folds},
        {"val_fraction", c.folds.val_fraction},
        {"group_by_subject", c.folds.group_by_subject}}},
      {"augment_extra", c.augment_extra},
      {"seed", c.seed},
      {"classifier", net_to_json(c.classifier)},
      {"segmenter", net_to_json(c.segmenter)},
      {"t_test", to_string(c.t_test)},
      {"t_test_grouping", to_string(c.t_test_grouping)},
      {"parallel_folds", c.parallel_folds},
      {"out_dir", c.out_dir},
  };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  check_keys(j, {"schema", "data", "grid", "curation", "folds", "augment_extra", "seed",
                 "classifier", "segmenter", "t_test", "t_test_grouping", "parallel_folds",
                 "out_dir"},
             "config root");
  if (j.contains("schema") && j.at("schema").get<std::string>() != kConfigSchema)
    throw std::invalid_argument("config: unsupported schema " +
                                j.at("schema").get<std::string>());

  RunConfig c;
  if (j.contains("data")) {
    const nlohmann::json& d = j.at("data");
    check_keys(d, {"root", "synth"}, "data");
    maybe(d, "root", c.data_root);
    if (d.contains("synth")) {
      const nlohmann::json& s = d.at("synth");
      check_keys(s, {"n", "bp_fraction", "rows", "cols"}, "data.synth");
      maybe(s, "n", c.synth.n);
      maybe(s, "bp_fraction", c.synth.bp_fraction);
      maybe(s, "rows", c.synth.rows);
      maybe(s, "cols", c.synth.cols);
    }
  }
  if (j.contains("grid")) {
    const nlohmann::json& g = j.at("grid");
    check_keys(g, {"modes", "segmenters", "variants"}, "grid");
    if (g.contains("modes")) {
      c.modes.clear();
      for (const auto& m : g.at("modes")) c.modes.push_back(mode_from_string(m.get<std::string>()));
    }
    if (g.contains("segmenters")) {
      c.segmenters.clear();
      for (const auto& s : g.at("segmenters"))
        c.segmenters.push_back(model_kind_from_string(s.get<std::string>()));
    }
    if (g.contains("variants")) {
      c.variants.clear();
      for (const auto& v : g.at("variants"))
        c.variants.push_back(variant_from_string(v.get<std::string>()));
    }
  }
  if (j.contains("curation")) {
    const nlohmann::json& cu = j.at("curation");
    check_keys(cu, {"threshold", "policy", "similarity_floor", "global_search"}, "curation");
    maybe(cu, "threshold", c.curation.threshold);
    if (cu.contains("policy"))
      c.curation.policy = filter_policy_from_string(cu.at("policy").get<std::string>());
    maybe(cu, "similarity_floor", c.curation.similarity_floor);
    maybe(cu, "global_search", c.curation.global_search);
  }
  if (j.contains("folds")) {
    const nlohmann::json& f = j.at("folds");
    check_keys(f, {"n_folds", "val_fraction", "group_by_subject"}, "folds");
    maybe(f, "n_folds", c.folds.n_folds);
    maybe(f, "val_fraction", c.folds.val_fraction);
    maybe(f, "group_by_subject", c.folds.group_by_subject);
  }
  maybe(j, "augment_extra", c.augment_extra);
  maybe(j, "seed", c.seed);
  if (j.contains("classifier")) net_from_json(j.at("classifier"), c.classifier, "classifier");
  if (j.contains("segmenter")) net_from_json(j.at("segmenter"), c.segmenter, "segmenter");
  if (j.contains("t_test")) c.t_test = t_test_kind_from_string(j.at("t_test").get<std::string>());
  if (j.contains("t_test_grouping"))
    c.t_test_grouping = t_test_grouping_from_string(j.at("t_test_grouping").get<std::string>());
  maybe(j, "parallel_folds", c.parallel_folds);
  maybe(j, "out_dir", c.out_dir);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void validate_run_config(const RunConfig& c) {
  if (c.modes.empty()) throw std::invalid_argument("config: no modes requested");
  if (c.segmenters.empty()) throw std::invalid_argument("config: no segmenters requested");
  if (c.variants.empty()) throw std::invalid_argument("config: no data variants requested");
  for (ModelKind k : c.segmenters)
    if (k == ModelKind::CLASSIFIER)
      throw std::invalid_argument("config: classifier is not a segmenter");
  if (!c.data_root.empty() && !std::filesystem::exists(c.data_root))
    throw std::invalid_argument("config: data root does not exist: " + c.data_root);
  if (c.data_root.empty()) {
    if (c.synth.n <= 0) throw std::invalid_argument("config: synth.n must be positive");
    if (c.synth.bp_fraction < 0.0 || c.synth.bp_fraction > 1.0)
      throw std::invalid_argument("config: synth.bp_fraction must be in [0, 1]");
    if (c.synth.rows <= 0 || c.synth.cols <= 0)
      throw std::invalid_argument("config: synth size must be positive");
  }
  if (c.curation.threshold <= 0.0 || c.curation.threshold > 1.0)
    throw std::invalid_argument("config: curation.threshold must be in (0, 1]");
  if (c.curation.similarity_floor < 0.0 || c.curation.similarity_floor > 1.0)
    throw std::invalid_argument("config: curation.similarity_floor must be in [0, 1]");
  if (c.folds.n_folds < 2) throw std::invalid_argument("config: folds.n_folds must be >= 2");
  if (c.folds.val_fraction < 0.0 || c.folds.val_fraction >= 1.0)
    throw std::invalid_argument("config: folds.val_fraction must be in [0, 1)");
  if (c.augment_extra < 0) throw std::invalid_argument("config: augment_extra must be >= 0");
  for (const NetConfig* n : {&c.classifier, &c.segmenter}) {
    if (n->base_channels < 1 || n->depth < 1)
      throw std::invalid_argument("config: network base_channels and depth must be >= 1");
    if (n->max_epochs < 1 || n->batch_size < 1 || n->learning_rate <= 0.0 || n->patience < 0 ||
        n->patience > n->max_epochs)
      throw std::invalid_argument("config: bad training hyperparameters");
  }
}

std::filesystem::path resolve_out_dir(const RunConfig& c) {
  if (!c.out_dir.empty()) return c.out_dir;
  const std::string leaf = "run-" + std::to_string(c.seed);
  if (const char* root = std::getenv("BPSEG_OUT_ROOT"); root && *root)
    return std::filesystem::path(root) / leaf;
  return std::filesystem::path("runs") / leaf;
}

PipelineConfigs make_pipeline_configs(const RunConfig& c) {
  PipelineConfigs p;
  p.classifier_spec = {ModelKind::CLASSIFIER, 128, 128, c.classifier.base_channels,
                       c.classifier.depth};
  p.segmenter_spec = {ModelKind::UNET, 96, 96, c.segmenter.base_channels, c.segmenter.depth};
  p.classifier_train = {c.classifier.max_epochs, c.classifier.batch_size,
                        c.classifier.learning_rate, c.classifier.patience, c.classifier.loss,
                        c.seed};
  p.segmenter_train = {c.segmenter.max_epochs, c.segmenter.batch_size,
                       c.segmenter.learning_rate, c.segmenter.patience, c.segmenter.loss,
                       c.seed};
  p.augment_extra = c.augment_extra;
  p.seed = c.seed;
  p.parallel_folds = c.parallel_folds;
  return p;
}

}  // namespace bpseg
