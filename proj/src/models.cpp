#include "bpseg/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "bpseg/evaluation.hpp"

namespace bpseg {

using nn::Tensor;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::CLASSIFIER: return "classifier";
    case ModelKind::UNET: return "unet";
    case ModelKind::MNET: return "mnet";
  }
  throw std::logic_error("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "classifier") return ModelKind::CLASSIFIER;
  if (s == "unet") return ModelKind::UNET;
  if (s == "mnet") return ModelKind::MNET;
  throw std::invalid_argument("unknown model kind: " + s);
}

std::string to_string(LossKind loss) {
  return loss == LossKind::BCE ? "bce" : "soft_dice";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "bce") return LossKind::BCE;
  if (s == "soft_dice") return LossKind::SOFT_DICE;
  throw std::invalid_argument("unknown loss kind: " + s);
}

void validate_spec(const ModelSpec& spec) {
  const bool classifier = spec.kind == ModelKind::CLASSIFIER;
  const int want = classifier ? 128 : 96;
  if (spec.rows != want || spec.cols != want)
    throw std::invalid_argument("model spec: " + to_string(spec.kind) + " requires " +
                                std::to_string(want) + "x" + std::to_string(want) + " input");
  if (spec.base_channels < 1) throw std::invalid_argument("model spec: base_channels must be >= 1");
  if (spec.depth < 1) throw std::invalid_argument("model spec: depth must be >= 1");
  const int div = 1 << spec.depth;
  if (spec.rows % div || spec.cols % div)
    throw std::invalid_argument("model spec: input size " + std::to_string(spec.rows) + "x" +
                                std::to_string(spec.cols) + " not divisible by 2^depth = " +
                                std::to_string(div));
}

void validate_train_config(const TrainConfig& config) {
  if (config.max_epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0))
    throw std::invalid_argument("train config: epochs, batch size, and learning rate must be positive");
  if (config.early_stop_patience < 0 || config.early_stop_patience > config.max_epochs)
    throw std::invalid_argument("train config: patience must be in [0, max_epochs]");
}

long Network::parameter_count() {
  long total = 0;
  for (const nn::Param* p : params()) total += p->value.size();
  return total;
}

namespace {

// Conv-BN-ReLU twice, the standard encoder/decoder block.
struct DoubleConv {
  nn::Conv2d c1;
  nn::BatchNorm2d b1;
  nn::ReLU r1;
  nn::Conv2d c2;
  nn::BatchNorm2d b2;
  nn::ReLU r2;

  DoubleConv(int in_c, int out_c, Rng& rng)
      : c1(in_c, out_c, 3, rng), b1(out_c), c2(out_c, out_c, 3, rng), b2(out_c) {}

  Tensor forward(const Tensor& x, bool train) {
    return r2.forward(b2.forward(c2.forward(r1.forward(b1.forward(c1.forward(x, train), train), train), train), train), train);
  }
  Tensor backward(const Tensor& dy) {
    return c1.backward(b1.backward(r1.backward(c2.backward(b2.backward(r2.backward(dy))))));
  }
  void collect_params(std::vector<nn::Param*>& out) {
    c1.collect_params(out);
    b1.collect_params(out);
    c2.collect_params(out);
    b2.collect_params(out);
  }
  void collect_buffers(std::vector<Eigen::VectorXf*>& out) {
    b1.collect_buffers(out);
    b2.collect_buffers(out);
  }
};

class ClassifierNet : public Network {
 public:
  ClassifierNet(const ModelSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    int in_c = 1;
    for (int i = 0; i < spec.depth; ++i) {
      const int out_c = spec.base_channels << i;
      convs_.push_back(std::make_unique<nn::Conv2d>(in_c, out_c, 3, rng));
      bns_.push_back(std::make_unique<nn::BatchNorm2d>(out_c));
      relus_.push_back(std::make_unique<nn::ReLU>());
      pools_.push_back(std::make_unique<nn::MaxPool2x2>());
      in_c = out_c;
    }
    dense_ = std::make_unique<nn::Dense>(in_c, 1, rng);
  }

  Tensor forward_probs(const Tensor& x, bool train) override {
    Tensor cur = x;
    for (size_t i = 0; i < convs_.size(); ++i) {
      cur = pools_[i]->forward(
          relus_[i]->forward(bns_[i]->forward(convs_[i]->forward(cur, train), train), train),
          train);
    }
    cur = gap_.forward(cur, train);
    return head_.forward({dense_->forward(cur, train)});
  }

  void backward_from_probs(const Tensor& dprob) override {
    Tensor dcur = dense_->backward(head_.backward(dprob)[0]);
    dcur = gap_.backward(dcur);
    for (size_t i = convs_.size(); i-- > 0;) {
      dcur = convs_[i]->backward(
          bns_[i]->backward(relus_[i]->backward(pools_[i]->backward(dcur))));
    }
  }

  std::vector<nn::Param*> params() override {
    std::vector<nn::Param*> out;
    for (size_t i = 0; i < convs_.size(); ++i) {
      convs_[i]->collect_params(out);
      bns_[i]->collect_params(out);
    }
    dense_->collect_params(out);
    return out;
  }

  std::vector<Eigen::VectorXf*> buffers() override {
    std::vector<Eigen::VectorXf*> out;
    for (auto& bn : bns_) bn->collect_buffers(out);
    return out;
  }

 private:
  std::vector<std::unique_ptr<nn::Conv2d>> convs_;
  std::vector<std::unique_ptr<nn::BatchNorm2d>> bns_;
  std::vector<std::unique_ptr<nn::ReLU>> relus_;
  std::vector<std::unique_ptr<nn::MaxPool2x2>> pools_;
  nn::GlobalAvgPool gap_;
  std::unique_ptr<nn::Dense> dense_;
  nn::SigmoidAverage head_;
};

// Shared encoder-decoder skeleton. with_injections/with_sides selects the
// plain U-net or the multi-scale variant.
class SegNet : public Network {
 public:
  SegNet(const ModelSpec& spec, std::uint64_t seed, bool multiscale)
      : depth_(spec.depth), base_(spec.base_channels), multiscale_(multiscale) {
    Rng rng(seed);
    for (int k = 0; k < depth_; ++k) {
      int in_c = k == 0 ? 1 : base_ << (k - 1);
      if (multiscale_ && k >= 1) {
        inj_.push_back(std::make_unique<nn::Conv2d>(1, base_, 3, rng));
        in_c += base_;
      }
      enc_.push_back(std::make_unique<DoubleConv>(in_c, base_ << k, rng));
      pools_.push_back(std::make_unique<nn::MaxPool2x2>());
    }
    bottleneck_ = std::make_unique<DoubleConv>(base_ << (depth_ - 1), base_ << depth_, rng);
    for (int k = depth_ - 1; k >= 0; --k) {
      up_.push_back(std::make_unique<nn::ConvTranspose2d>(base_ << (k + 1), base_ << k, rng));
      dec_.push_back(std::make_unique<DoubleConv>(2 * (base_ << k), base_ << k, rng));
    }
    head_ = std::make_unique<nn::Conv2d>(base_, 1, 1, rng);
    if (multiscale_) {
      for (int k = 1; k < depth_; ++k) {
        side_.push_back(std::make_unique<nn::Conv2d>(base_ << k, 1, 1, rng));
        side_up_.push_back(std::make_unique<nn::NearestUpsample>(1 << k));
      }
    }
  }

  Tensor forward_probs(const Tensor& x, bool train) override {
    // Input pyramid for the injection path.
    std::vector<Tensor> pyramid;
    if (multiscale_) {
      pyramid.push_back(x);
      for (int k = 1; k < depth_; ++k) pyramid.push_back(avg_.forward(pyramid.back(), train));
    }

    skips_.clear();
    Tensor cur = enc_[0]->forward(x, train);
    skips_.push_back(cur);
    for (int k = 1; k < depth_; ++k) {
      Tensor pooled = pools_[k - 1]->forward(cur, train);
      if (multiscale_) {
        Tensor injected = inj_[k - 1]->forward(pyramid[k], train);
        pooled = nn::concat_channels(pooled, injected);
      }
      cur = enc_[k]->forward(pooled, train);
      skips_.push_back(cur);
    }
    cur = bottleneck_->forward(pools_[depth_ - 1]->forward(cur, train), train);

    dec_out_.assign(depth_, Tensor());
    for (int i = 0; i < depth_; ++i) {  // decoder level k = depth_-1-i
      const int k = depth_ - 1 - i;
      Tensor u = up_[i]->forward(cur, train);
      cur = dec_[i]->forward(nn::concat_channels(skips_[k], u), train);
      dec_out_[k] = cur;
    }

    std::vector<Tensor> logits;
    logits.push_back(head_->forward(dec_out_[0], train));
    if (multiscale_)
      for (int k = 1; k < depth_; ++k)
        logits.push_back(side_up_[k - 1]->forward(side_[k - 1]->forward(dec_out_[k], train), train));
    return combiner_.forward(logits);
  }

  void backward_from_probs(const Tensor& dprob) override {
    const std::vector<Tensor> dz = combiner_.backward(dprob);
    std::vector<Tensor> dskip(depth_);

    Tensor dcur = head_->backward(dz[0]);
    for (int k = 0; k < depth_; ++k) {  // walk decoder levels bottom-up
      const int i = depth_ - 1 - k;    // index into up_/dec_ construction order
      Tensor dcat = dec_[i]->backward(dcur);
      Tensor du;
      nn::split_channels(dcat, base_ << k, dskip[k], du);
      dcur = up_[i]->backward(du);
      if (multiscale_ && k + 1 < depth_) {
        const int s = k;  // side head for level k+1 lives at side_[k]
        dcur.data += dec_grad_from_side(s, dz[k + 1]).data;
      }
    }

    dcur = bottleneck_->backward(dcur);
    dcur = pools_[depth_ - 1]->backward(dcur);
    for (int k = depth_ - 1; k >= 1; --k) {
      dcur.data += dskip[k].data;
      Tensor din = enc_[k]->backward(dcur);
      if (multiscale_) {
        Tensor dpooled, dinj;
        nn::split_channels(din, base_ << (k - 1), dpooled, dinj);
        inj_[k - 1]->backward(dinj);  // input carries no gradient
        din = std::move(dpooled);
      }
      dcur = pools_[k - 1]->backward(din);
    }
    dcur.data += dskip[0].data;
    enc_[0]->backward(dcur);
  }

  std::vector<nn::Param*> params() override {
    std::vector<nn::Param*> out;
    for (int k = 0; k < depth_; ++k) {
      if (multiscale_ && k >= 1) inj_[k - 1]->collect_params(out);
      enc_[k]->collect_params(out);
    }
    bottleneck_->collect_params(out);
    for (int i = 0; i < depth_; ++i) {
      up_[i]->collect_params(out);
      dec_[i]->collect_params(out);
    }
    head_->collect_params(out);
    for (auto& s : side_) s->collect_params(out);
    return out;
  }

  std::vector<Eigen::VectorXf*> buffers() override {
    std::vector<Eigen::VectorXf*> out;
    for (auto& e : enc_) e->collect_buffers(out);
    bottleneck_->collect_buffers(out);
    for (auto& d : dec_) d->collect_buffers(out);
    return out;
  }

 private:
  Tensor dec_grad_from_side(int side_idx, const Tensor& dz) {
    return side_[side_idx]->backward(side_up_[side_idx]->backward(dz));
  }

  int depth_, base_;
  bool multiscale_;
  std::vector<std::unique_ptr<DoubleConv>> enc_, dec_;
  std::vector<std::unique_ptr<nn::MaxPool2x2>> pools_;
  std::vector<std::unique_ptr<nn::Conv2d>> inj_, side_;
  std::vector<std::unique_ptr<nn::NearestUpsample>> side_up_;
  std::vector<std::unique_ptr<nn::ConvTranspose2d>> up_;
  std::unique_ptr<DoubleConv> bottleneck_;
  std::unique_ptr<nn::Conv2d> head_;
  nn::AvgPool2x2 avg_;
  nn::SigmoidAverage combiner_;
  std::vector<Tensor> skips_, dec_out_;
};

}  // namespace

std::unique_ptr<Network> build_network(const ModelSpec& spec, std::uint64_t init_seed) {
  validate_spec(spec);
  switch (spec.kind) {
    case ModelKind::CLASSIFIER: return std::make_unique<ClassifierNet>(spec, init_seed);
    case ModelKind::UNET: return std::make_unique<SegNet>(spec, init_seed, false);
    case ModelKind::MNET: return std::make_unique<SegNet>(spec, init_seed, true);
  }
  throw std::logic_error("unknown model kind");
}

namespace {

Tensor batch_inputs(std::span<const TrainSample> samples, std::span<const int> ids) {
  const Image& first = samples[ids[0]].image;
  Tensor t(static_cast<int>(ids.size()), 1, first.rows, first.cols);
  for (size_t b = 0; b < ids.size(); ++b) {
    const Image& img = samples[ids[b]].image;
    std::memcpy(t.data.data() + t.index(static_cast<int>(b), 0, 0, 0), img.data.data(),
                img.size() * sizeof(float));
  }
  return t;
}

Tensor batch_targets(std::span<const TrainSample> samples, std::span<const int> ids,
                     bool classifier) {
  if (classifier) {
    Tensor t(static_cast<int>(ids.size()), 1, 1, 1);
    for (size_t b = 0; b < ids.size(); ++b)
      t.data[b] = samples[ids[b]].label == Label::BP ? 1.0f : 0.0f;
    return t;
  }
  const Mask& first = samples[ids[0]].mask;
  Tensor t(static_cast<int>(ids.size()), 1, first.rows, first.cols);
  for (size_t b = 0; b < ids.size(); ++b) {
    const Mask& m = samples[ids[b]].mask;
    float* dst = t.data.data() + t.index(static_cast<int>(b), 0, 0, 0);
    for (size_t i = 0; i < m.data.size(); ++i) dst[i] = m.data[i];
  }
  return t;
}

struct EvalStats {
  double loss = 0.0;
  double metric = 0.0;
};

EvalStats evaluate(Network& net, std::span<const TrainSample> set, bool classifier,
                   LossKind loss_kind, int batch_size) {
  EvalStats stats;
  if (set.empty()) return stats;
  double metric_sum = 0.0;
  long correct = 0;
  std::vector<int> ids(set.size());
  std::iota(ids.begin(), ids.end(), 0);
  for (size_t pos = 0; pos < ids.size(); pos += batch_size) {
    const size_t end = std::min(ids.size(), pos + batch_size);
    const std::span<const int> batch(ids.data() + pos, end - pos);
    const Tensor x = batch_inputs(set, batch);
    const Tensor target = batch_targets(set, batch, classifier);
    Tensor probs = net.forward_probs(x, false);
    const nn::LossResult lr = loss_kind == LossKind::BCE ? nn::bce_loss(probs, target)
                                                         : nn::soft_dice_loss(probs, target);
    stats.loss += lr.value * batch.size();
    if (classifier) {
      for (size_t b = 0; b < batch.size(); ++b) {
        const Label pred = probs.data[b] >= 0.5f ? Label::BP : Label::NO_BP;
        if (pred == set[batch[b]].label) ++correct;
      }
    } else {
      for (size_t b = 0; b < batch.size(); ++b) {
        Mask pred(probs.h, probs.w);
        const float* p = probs.data.data() + probs.index(static_cast<int>(b), 0, 0, 0);
        for (size_t i = 0; i < pred.data.size(); ++i) pred.data[i] = p[i] >= 0.5f ? 1 : 0;
        metric_sum += dsc(pred, set[batch[b]].mask).value;
      }
    }
  }
  stats.loss /= set.size();
  stats.metric = classifier ? static_cast<double>(correct) / set.size()
                            : metric_sum / set.size();
  return stats;
}

std::vector<Eigen::VectorXf> snapshot_state(Network& net) {
  std::vector<Eigen::VectorXf> state;
  for (nn::Param* p : net.params()) state.push_back(p->value);
  for (Eigen::VectorXf* b : net.buffers()) state.push_back(*b);
  return state;
}

void restore_state(Network& net, const std::vector<Eigen::VectorXf>& state) {
  size_t i = 0;
  for (nn::Param* p : net.params()) p->value = state[i++];
  for (Eigen::VectorXf* b : net.buffers()) *b = state[i++];
}

}  // namespace

TrainedModel train(const ModelSpec& spec, std::span<const TrainSample> train_set,
                   std::span<const TrainSample> val_set, const TrainConfig& config) {
  validate_spec(spec);
  validate_train_config(config);
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  for (const TrainSample* s : {&train_set.front(), &train_set.back()})
    if (s->image.rows != spec.rows || s->image.cols != spec.cols)
      throw std::invalid_argument("train: sample size does not match model input size");

  const bool classifier = spec.kind == ModelKind::CLASSIFIER;
  TrainedModel model;
  model.spec = spec;
  model.net = build_network(spec, Rng::derive(config.seed, 1));
  model.no_validation = val_set.empty();

  nn::Adam adam(model.net->params(), config.learning_rate);
  std::vector<Eigen::VectorXf> best_state = snapshot_state(*model.net);
  double best_watched = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    Rng epoch_rng(Rng::derive(config.seed, 100 + static_cast<std::uint64_t>(epoch)));
    epoch_rng.shuffle(order);

    double train_loss = 0.0;
    for (size_t pos = 0; pos < order.size(); pos += config.batch_size) {
      const size_t end = std::min(order.size(), pos + config.batch_size);
      const std::span<const int> batch(order.data() + pos, end - pos);
      const Tensor x = batch_inputs(train_set, batch);
      const Tensor target = batch_targets(train_set, batch, classifier);
      Tensor probs = model.net->forward_probs(x, true);
      const nn::LossResult lr = config.loss == LossKind::BCE
                                    ? nn::bce_loss(probs, target)
                                    : nn::soft_dice_loss(probs, target);
      adam.zero_grad();
      model.net->backward_from_probs(lr.dprob);
      adam.step();
      train_loss += lr.value * batch.size();
    }
    train_loss /= train_set.size();

    if (!std::isfinite(train_loss)) {
      model.diverged = true;
      model.history.push_back({train_loss, train_loss, 0.0});
      break;
    }

    EpochStats stats;
    stats.train_loss = train_loss;
    if (model.no_validation) {
      // Train loss doubles as the watched quantity.
      stats.val_loss = train_loss;
      stats.val_metric = 0.0;
    } else {
      const EvalStats ev = evaluate(*model.net, val_set, classifier, config.loss,
                                    config.batch_size);
      stats.val_loss = ev.loss;
      stats.val_metric = ev.metric;
    }
    model.history.push_back(stats);

    const double watched = stats.val_loss;
    if (watched < best_watched) {
      best_watched = watched;
      best_state = snapshot_state(*model.net);
      model.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs > config.early_stop_patience) {
      break;
    }
  }

  restore_state(*model.net, best_state);
  return model;
}

std::vector<Tensor> predict_probs(TrainedModel& model, std::span<const Image> images,
                                  int batch_size) {
  std::vector<Tensor> out;
  for (size_t pos = 0; pos < images.size(); pos += batch_size) {
    const size_t end = std::min(images.size(), pos + batch_size);
    const int bs = static_cast<int>(end - pos);
    Tensor x(bs, 1, model.spec.rows, model.spec.cols);
    for (int b = 0; b < bs; ++b) {
      const Image& img = images[pos + b];
      if (img.rows != model.spec.rows || img.cols != model.spec.cols)
        throw std::invalid_argument("predict: image size does not match model input size");
      std::memcpy(x.data.data() + x.index(b, 0, 0, 0), img.data.data(),
                  img.size() * sizeof(float));
    }
    Tensor probs = model.net->forward_probs(x, false);
    for (int b = 0; b < bs; ++b) {
      Tensor one(1, probs.c, probs.h, probs.w);
      std::memcpy(one.data.data(), probs.data.data() + probs.index(b, 0, 0, 0),
                  static_cast<size_t>(probs.c) * probs.h * probs.w * sizeof(float));
      out.push_back(std::move(one));
    }
  }
  return out;
}

ClassPrediction predict_class(TrainedModel& model, const Image& image) {
  if (model.spec.kind != ModelKind::CLASSIFIER)
    throw std::invalid_argument("predict_class: model is not a classifier");
  const Tensor probs = predict_probs(model, std::span<const Image>(&image, 1))[0];
  ClassPrediction p;
  p.probability = probs.data[0];
  p.label = p.probability >= 0.5 ? Label::BP : Label::NO_BP;
  return p;
}

Mask predict_mask(TrainedModel& model, const Image& image) {
  if (model.spec.kind != ModelKind::UNET && model.spec.kind != ModelKind::MNET)
    throw std::invalid_argument("predict_mask: model is not a segmenter");
  const Tensor probs = predict_probs(model, std::span<const Image>(&image, 1))[0];
  Mask mask(probs.h, probs.w);
  for (size_t i = 0; i < mask.data.size(); ++i)
    mask.data[i] = probs.data[static_cast<long>(i)] >= 0.5f ? 1 : 0;
  return mask;
}

// ---------------------------------------------------------------------------
// Checkpoints: "BPSEGCKPT <semver>" header line, then little-endian binary.

namespace {

constexpr const char* kMagic = "BPSEGCKPT";
constexpr const char* kVersion = "1.0.0";

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error("checkpoint truncated");
}

void write_vec(std::ofstream& f, const Eigen::VectorXf& v) {
  write_pod<std::int64_t>(f, v.size());
  f.write(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
}

void read_vec(std::ifstream& f, Eigen::VectorXf& v) {
  std::int64_t size;
  read_pod(f, size);
  if (size != v.size())
    throw std::runtime_error("checkpoint parameter size mismatch (corrupt file or wrong spec)");
  f.read(reinterpret_cast<char*>(v.data()), size * sizeof(float));
  if (!f) throw std::runtime_error("checkpoint truncated");
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  f << kMagic << ' ' << kVersion << '\n';
  write_pod<std::int32_t>(f, static_cast<std::int32_t>(model.spec.kind));
  write_pod<std::int32_t>(f, model.spec.rows);
  write_pod<std::int32_t>(f, model.spec.cols);
  write_pod<std::int32_t>(f, model.spec.base_channels);
  write_pod<std::int32_t>(f, model.spec.depth);
  write_pod<std::uint8_t>(f, model.diverged ? 1 : 0);
  write_pod<std::uint8_t>(f, model.no_validation ? 1 : 0);
  write_pod<std::int32_t>(f, model.best_epoch);

  const auto params = model.net->params();
  write_pod<std::int64_t>(f, static_cast<std::int64_t>(params.size()));
  for (const nn::Param* p : params) write_vec(f, p->value);
  const auto buffers = model.net->buffers();
  write_pod<std::int64_t>(f, static_cast<std::int64_t>(buffers.size()));
  for (const Eigen::VectorXf* b : buffers) write_vec(f, *b);

  write_pod<std::int64_t>(f, static_cast<std::int64_t>(model.history.size()));
  for (const EpochStats& e : model.history) {
    write_pod(f, e.train_loss);
    write_pod(f, e.val_loss);
    write_pod(f, e.val_metric);
  }
  if (!f) throw std::runtime_error("checkpoint write failed: " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::string magic, version;
  f >> magic >> version;
  f.ignore();  // newline
  if (magic != kMagic) throw std::runtime_error("not a model checkpoint: " + path.string());
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + version + " (expected " +
                             kVersion + "): " + path.string());

  TrainedModel model;
  std::int32_t kind;
  read_pod(f, kind);
  if (kind < 0 || kind > 2) throw std::runtime_error("checkpoint has invalid model kind");
  model.spec.kind = static_cast<ModelKind>(kind);
  read_pod(f, model.spec.rows);
  read_pod(f, model.spec.cols);
  read_pod(f, model.spec.base_channels);
  read_pod(f, model.spec.depth);
  std::uint8_t flag;
  read_pod(f, flag);
  model.diverged = flag;
  read_pod(f, flag);
  model.no_validation = flag;
  std::int32_t best_epoch;
  read_pod(f, best_epoch);
  model.best_epoch = best_epoch;

  model.net = build_network(model.spec, 0);
  std::int64_t n;
  read_pod(f, n);
  const auto params = model.net->params();
  if (n != static_cast<std::int64_t>(params.size()))
    throw std::runtime_error("checkpoint parameter list mismatch (corrupt file or wrong spec)");
  for (nn::Param* p : params) read_vec(f, p->value);
  read_pod(f, n);
  const auto buffers = model.net->buffers();
  if (n != static_cast<std::int64_t>(buffers.size()))
    throw std::runtime_error("checkpoint buffer list mismatch (corrupt file or wrong spec)");
  for (Eigen::VectorXf* b : buffers) read_vec(f, *b);

  read_pod(f, n);
  if (n < 0 || n > 1000000) throw std::runtime_error("checkpoint history length implausible");
  model.history.resize(n);
  for (auto& e : model.history) {
    read_pod(f, e.train_loss);
    read_pod(f, e.val_loss);
    read_pod(f, e.val_metric);
  }
  return model;
}

}  // namespace bpseg
