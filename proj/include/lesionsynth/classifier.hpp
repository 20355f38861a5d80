#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lesionsynth/nn.hpp"
#include "lesionsynth/tensor.hpp"

namespace lesionsynth::eval {

struct ClassifierConfig {
  int input_res = 64;
  int base_channels = 8;
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  bool augment = true;
  uint64_t seed = 0;

  void validate() const;
};

// Binary melanoma-vs-benign classifier. Images are (3,R,R) in [-1,1],
// labels 1 = melanoma.
class BinaryClassifier {
 public:
  virtual ~BinaryClassifier() = default;
  virtual void train(const std::vector<Tensorf>& images, const std::vector<int>& labels) = 0;
  virtual double predict(const Tensorf& image) = 0;  // P(melanoma)
};

// Stride-2 conv stack -> global average pool -> linear logit, trained
// with BCE and Adam.
class SmallCnnClassifier : public BinaryClassifier {
 public:
  explicit SmallCnnClassifier(const ClassifierConfig& cfg);
  void train(const std::vector<Tensorf>& images, const std::vector<int>& labels) override;
  double predict(const Tensorf& image) override;

 private:
  Tensorf forward_logits(const Tensorf& batch);  // (N,3,R,R) -> (N,1)
  void backward_logits(const Tensorf& glogits);

  ClassifierConfig cfg_;
  nn::Rng rng_;
  nn::Sequential features_;
  nn::Sequential head_;  // linear on pooled features
  nn::Adam opt_;
  int feat_channels_ = 0;
  std::vector<int> feat_shape_;  // cached for the pooling backward
};

using ClassifierFactory =
    std::function<std::unique_ptr<BinaryClassifier>(const ClassifierConfig&)>;

// Name-keyed factory registry so evaluation configs can select the model.
void register_classifier(const std::string& name, ClassifierFactory factory);
std::unique_ptr<BinaryClassifier> make_classifier(const std::string& name,
                                                  const ClassifierConfig& cfg);
std::vector<std::string> registered_classifiers();

}  // namespace lesionsynth::eval
