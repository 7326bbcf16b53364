#ifndef BPSEG_MODELS_HPP
#define BPSEG_MODELS_HPP

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bpseg/dataset.hpp"
#include "bpseg/nn.hpp"

namespace bpseg {

enum class ModelKind { CLASSIFIER, UNET, MNET };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

/** Architecture description. The classifier requires 128x128 input, the
 * segmenters 96x96, and both dimensions must divide by 2^depth. */
struct ModelSpec {
  ModelKind kind = ModelKind::UNET;
  int rows = 96;
  int cols = 96;
  int base_channels = 32;
  int depth = 4;
};

void validate_spec(const ModelSpec& spec);  // throws on any violation

enum class LossKind { BCE, SOFT_DICE };

std::string to_string(LossKind loss);
LossKind loss_kind_from_string(const std::string& s);

struct TrainConfig {
  int max_epochs = 50;
  int batch_size = 4;
  double learning_rate = 1e-3;
  int early_stop_patience = 10;
  LossKind loss = LossKind::SOFT_DICE;
  std::uint64_t seed = 0;
};

void validate_train_config(const TrainConfig& config);

/** Abstract network: forward produces probabilities, backward consumes the
 * probability gradient. Param/buffer collection order is fixed per
 * architecture, which checkpointing relies on. */
class Network {
 public:
  virtual ~Network() = default;
  virtual nn::Tensor forward_probs(const nn::Tensor& x, bool train) = 0;
  virtual void backward_from_probs(const nn::Tensor& dprob) = 0;
  virtual std::vector<nn::Param*> params() = 0;
  virtual std::vector<Eigen::VectorXf*> buffers() = 0;
  long parameter_count();
};

/** Builds an initialized network; weights are seeded deterministically. */
std::unique_ptr<Network> build_network(const ModelSpec& spec, std::uint64_t init_seed);

/** One sample already preprocessed to a model's input size. */
struct TrainSample {
  Image image;
  Mask mask;                 // segmentation target
  Label label = Label::NO_BP;  // classification target
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_metric = 0.0;  // accuracy (classifier) or mean DSC (segmenters)
};

struct TrainedModel {
  ModelSpec spec;
  std::unique_ptr<Network> net;
  std::vector<EpochStats> history;
  bool diverged = false;          // NaN loss encountered
  bool no_validation = false;     // early stopping fell back to train loss
  int best_epoch = -1;
};

/** Trains with Adam and early stopping on validation loss, returning the
 * best-validation snapshot. An empty validation set falls back to train-loss
 * stopping and flags the result. Deterministic for a fixed config.seed. */
TrainedModel train(const ModelSpec& spec, std::span<const TrainSample> train_set,
                   std::span<const TrainSample> val_set, const TrainConfig& config);

struct ClassPrediction {
  double probability = 0.0;
  Label label = Label::NO_BP;  // BP iff probability >= 0.5
};

ClassPrediction predict_class(TrainedModel& model, const Image& image);

/** Per-pixel probabilities thresholded at 0.5 (boundary goes to 1). */
Mask predict_mask(TrainedModel& model, const Image& image);

/** Batched probability inference shared by both predict paths. */
std::vector<nn::Tensor> predict_probs(TrainedModel& model, std::span<const Image> images,
                                      int batch_size = 8);

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace bpseg

#endif
