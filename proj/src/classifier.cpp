#include "lesionsynth/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lesionsynth/augment.hpp"
#include "lesionsynth/errors.hpp"

namespace lesionsynth::eval {

void ClassifierConfig::validate() const {
  if (input_res < 8 || (input_res & (input_res - 1)) != 0)
    throw ConfigError("classifier: input_res must be a power of two >= 8");
  if (base_channels < 1) throw ConfigError("classifier: base_channels must be >= 1");
  if (epochs < 1) throw ConfigError("classifier: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("classifier: batch_size must be >= 1");
  if (learning_rate <= 0) throw ConfigError("classifier: learning_rate must be > 0");
}

SmallCnnClassifier::SmallCnnClassifier(const ClassifierConfig& cfg)
    : cfg_(cfg),
      rng_(cfg.seed),
      opt_(static_cast<float>(cfg.learning_rate), static_cast<float>(cfg.adam_beta1),
           static_cast<float>(cfg.adam_beta2)) {
  cfg_.validate();
  // Downsample with stride-2 convs until 4x4.
  int res = cfg_.input_res;
  int in_ch = 3;
  int out_ch = cfg_.base_channels;
  int idx = 0;
  while (res > 4) {
    features_.add(std::make_unique<nn::Conv2d>("clf_conv" + std::to_string(idx), in_ch, out_ch,
                                               3, 2, 1, nn::PadMode::kZero, rng_));
    features_.add(std::make_unique<nn::LeakyReLU>(0.2f));
    in_ch = out_ch;
    out_ch = std::min(out_ch * 2, 128);
    res /= 2;
    ++idx;
  }
  features_.add(std::make_unique<nn::Conv2d>("clf_conv" + std::to_string(idx), in_ch, in_ch, 3,
                                             1, 1, nn::PadMode::kZero, rng_));
  features_.add(std::make_unique<nn::LeakyReLU>(0.2f));
  feat_channels_ = in_ch;
  head_.add(std::make_unique<nn::Linear>("clf_fc", feat_channels_, 1, rng_));

  std::vector<nn::Parameter*> params;
  features_.collect(params);
  head_.collect(params);
  opt_.attach(params);
}

Tensorf SmallCnnClassifier::forward_logits(const Tensorf& batch) {
  Tensorf f = features_.forward(batch);
  feat_shape_ = f.shape();
  const int n = f.dim(0), c = f.dim(1), h = f.dim(2), w = f.dim(3);
  Tensorf pooled({n, c});
  const float inv = 1.0f / static_cast<float>(h * w);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      float s = 0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) s += f.at4(i, j, y, x);
      pooled[static_cast<int64_t>(i) * c + j] = s * inv;
    }
  return head_.forward(pooled);
}

void SmallCnnClassifier::backward_logits(const Tensorf& glogits) {
  Tensorf gpooled = head_.backward(glogits);
  const int n = feat_shape_[0], c = feat_shape_[1], h = feat_shape_[2], w = feat_shape_[3];
  Tensorf gf(feat_shape_);
  const float inv = 1.0f / static_cast<float>(h * w);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const float g = gpooled[static_cast<int64_t>(i) * c + j] * inv;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) gf.at4(i, j, y, x) = g;
    }
  features_.backward(gf);
}

void SmallCnnClassifier::train(const std::vector<Tensorf>& images,
                               const std::vector<int>& labels) {
  if (images.size() != labels.size())
    throw std::invalid_argument("classifier train: images/labels length mismatch");
  if (images.empty()) throw InsufficientData("classifier train: empty training set");
  const int r = cfg_.input_res;
  for (const auto& img : images)
    if (img.ndim() != 3 || img.dim(0) != 3 || img.dim(1) != r || img.dim(2) != r)
      throw std::invalid_argument("classifier train: image shape mismatch");

  std::vector<size_t> order(images.size());
  std::iota(order.begin(), order.end(), size_t{0});
  augment::Rng aug_rng(cfg_.seed + 101);

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    for (size_t start = 0; start < order.size(); start += cfg_.batch_size) {
      const size_t end = std::min(order.size(), start + cfg_.batch_size);
      const int n = static_cast<int>(end - start);
      Tensorf batch({n, 3, r, r});
      Tensorf targets({n});
      for (int i = 0; i < n; ++i) {
        const size_t src = order[start + i];
        Tensorf img = cfg_.augment ? augment::random_augment(images[src], aug_rng)
                                   : images[src];
        std::copy(img.data(), img.data() + img.size(),
                  batch.data() + static_cast<int64_t>(i) * img.size());
        targets[i] = static_cast<float>(labels[src] ? 1 : 0);
      }

      Tensorf logits = forward_logits(batch);
      // BCE with logits: dL/dz = (sigmoid(z) - y) / n.
      Tensorf glogits({n, 1});
      for (int i = 0; i < n; ++i) {
        const float z = logits[static_cast<int64_t>(i)];
        const float s = 1.0f / (1.0f + std::exp(-z));
        glogits[static_cast<int64_t>(i)] = (s - targets[i]) / static_cast<float>(n);
      }
      opt_.zero_grad();
      backward_logits(glogits);
      opt_.step();
    }
  }
}

double SmallCnnClassifier::predict(const Tensorf& image) {
  if (image.ndim() != 3) throw std::invalid_argument("classifier predict: expected (3,R,R)");
  Tensorf batch({1, image.dim(0), image.dim(1), image.dim(2)});
  std::copy(image.data(), image.data() + image.size(), batch.data());
  Tensorf logits = forward_logits(batch);
  return 1.0 / (1.0 + std::exp(-static_cast<double>(logits[0])));
}

namespace {
std::map<std::string, ClassifierFactory>& registry() {
  static std::map<std::string, ClassifierFactory> r = {
      {"smallcnn",
       [](const ClassifierConfig& cfg) -> std::unique_ptr<BinaryClassifier> {
         return std::make_unique<SmallCnnClassifier>(cfg);
       }}};
  return r;
}
}  // namespace

void register_classifier(const std::string& name, ClassifierFactory factory) {
  registry()[name] = std::move(factory);
}

std::unique_ptr<BinaryClassifier> make_classifier(const std::string& name,
                                                  const ClassifierConfig& cfg) {
  auto it = registry().find(name);
  if (it == registry().end()) throw ConfigError("unknown classifier: " + name);
  return it->second(cfg);
}

std::vector<std::string> registered_classifiers() {
  std::vector<std::string> names;
  for (const auto& [k, v] : registry()) names.push_back(k);
  return names;
}

}  // namespace lesionsynth::eval
