#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lesionsynth/augment.hpp"
#include "lesionsynth/classifier.hpp"
#include "lesionsynth/stats.hpp"
#include "lesionsynth/tensor.hpp"

namespace lesionsynth::eval {

// Where a training image comes from: the real corpus or one of the
// synthesis branches.
enum class Source { kReal, kSemantic, kInstance, kPgan };

Source parse_source(const std::string& s);
std::string source_name(Source s);

struct LabeledExample {
  Tensorf image;  // (3,R,R) in [-1,1]
  int label = 0;  // 1 = melanoma
};

using Pool = std::vector<LabeledExample>;

// Available examples keyed by source.
using SamplePools = std::map<Source, Pool>;

struct DatasetPart {
  Source source = Source::kReal;
  int count = 0;
};

struct DatasetSpec {
  std::string name;
  std::vector<DatasetPart> parts;
  int total() const;
};

// Deterministically draws each part from its pool. GAN-sampled parts
// preserve the benign/melanoma ratio of the real pool; the others draw
// uniformly without replacement. Throws InsufficientData when a pool is
// too small.
std::vector<LabeledExample> assemble_training_set(const DatasetSpec& spec,
                                                  const SamplePools& pools, uint64_t seed);

// Mean probability over `replicas` random augmentations of the image.
double tta_predict(BinaryClassifier& clf, const Tensorf& image, int replicas,
                   augment::Rng& rng);

struct RunResult {
  int run_index = 0;
  uint64_t seed = 0;
  double auc = 0;
};

struct SpecResult {
  DatasetSpec spec;
  std::vector<RunResult> runs;
  double mean_auc = 0;  // fraction in [0,1]
  double std_auc = 0;   // sample std over runs
  std::optional<stats::TTestResult> vs_reference;  // absent for the reference row
};

struct ExperimentReport {
  std::vector<SpecResult> rows;
  std::string reference_spec;
  int runs_per_spec = 0;
};

struct ExperimentConfig {
  std::vector<DatasetSpec> specs;
  // Row whose per-run AUCs anchor the paired t-tests.
  std::string reference_spec = "Real+Instance+PGAN";
  int runs_per_spec = 10;
  uint64_t seed = 0;
  std::string classifier_name = "smallcnn";
  ClassifierConfig classifier;
  int tta_replicas = 50;

  void validate() const;
};

// Trains `runs_per_spec` independently seeded classifiers per dataset
// spec, scores the shared test set with TTA, and reports mean/std AUC
// plus paired t-tests against the reference row.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const SamplePools& pools,
                                const Pool& test_set);

std::string report_to_csv(const ExperimentReport& report);
std::string report_to_json(const ExperimentReport& report);

}  // namespace lesionsynth::eval
