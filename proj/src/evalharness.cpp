#include "lesionsynth/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lesionsynth/augment.hpp"
#include "lesionsynth/errors.hpp"
#include "lesionsynth/hash.hpp"

#include "json.hpp"

namespace lesionsynth::eval {

Source parse_source(const std::string& s) {
  if (s == "real") return Source::kReal;
  if (s == "semantic") return Source::kSemantic;
  if (s == "instance") return Source::kInstance;
  if (s == "pgan") return Source::kPgan;
  throw ConfigError("unknown sample source: " + s);
}

std::string source_name(Source s) {
  switch (s) {
    case Source::kReal: return "real";
    case Source::kSemantic: return "semantic";
    case Source::kInstance: return "instance";
    case Source::kPgan: return "pgan";
  }
  throw std::logic_error("bad source");
}

int DatasetSpec::total() const {
  int n = 0;
  for (const auto& p : parts) n += p.count;
  return n;
}

void ExperimentConfig::validate() const {
  if (specs.empty()) throw ConfigError("experiment: no dataset specs");
  if (runs_per_spec < 2) throw ConfigError("experiment: runs_per_spec must be >= 2");
  if (tta_replicas < 1) throw ConfigError("experiment: tta_replicas must be >= 1");
  bool have_ref = false;
  for (const auto& s : specs) {
    if (s.name.empty()) throw ConfigError("experiment: dataset spec without a name");
    if (s.parts.empty()) throw ConfigError("experiment: dataset spec '" + s.name + "' is empty");
    for (const auto& p : s.parts)
      if (p.count <= 0) throw ConfigError("experiment: non-positive part count in " + s.name);
    if (s.name == reference_spec) have_ref = true;
  }
  if (!have_ref) throw ConfigError("experiment: reference spec '" + reference_spec +
                                   "' is not among the dataset specs");
  classifier.validate();
}

namespace {

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

uint64_t mix_seed(uint64_t base, const std::string& tag) {
  std::string key = std::to_string(base) + "/" + tag;
  return fnv1a64(key);
}

}  // namespace

std::vector<LabeledExample> assemble_training_set(const DatasetSpec& spec,
                                                  const SamplePools& pools, uint64_t seed) {
  std::vector<LabeledExample> out;
  out.reserve(static_cast<size_t>(spec.total()));

  // Class balance of the real pool anchors GAN sampling.
  double real_pos_ratio = 0.5;
  auto real_it = pools.find(Source::kReal);
  if (real_it != pools.end() && !real_it->second.empty()) {
    size_t pos = 0;
    for (const auto& e : real_it->second) pos += e.label ? 1 : 0;
    real_pos_ratio = static_cast<double>(pos) / static_cast<double>(real_it->second.size());
  }

  for (size_t pi = 0; pi < spec.parts.size(); ++pi) {
    const auto& part = spec.parts[pi];
    auto it = pools.find(part.source);
    if (it == pools.end())
      throw InsufficientData("assemble: no pool for source " + source_name(part.source));
    const Pool& pool = it->second;
    const uint64_t part_seed =
        mix_seed(seed, spec.name + "/" + std::to_string(pi) + "/" + source_name(part.source));

    if (part.source == Source::kPgan) {
      // Keep the real benign/melanoma ratio among GAN draws.
      const int want_pos =
          static_cast<int>(std::lround(part.count * real_pos_ratio));
      const int want_neg = part.count - want_pos;
      std::vector<size_t> pos_idx, neg_idx;
      for (size_t i = 0; i < pool.size(); ++i)
        (pool[i].label ? pos_idx : neg_idx).push_back(i);
      if (static_cast<int>(pos_idx.size()) < want_pos ||
          static_cast<int>(neg_idx.size()) < want_neg)
        throw InsufficientData("assemble: pgan pool too small for spec " + spec.name);
      std::mt19937_64 rng(part_seed);
      std::shuffle(pos_idx.begin(), pos_idx.end(), rng);
      std::shuffle(neg_idx.begin(), neg_idx.end(), rng);
      for (int i = 0; i < want_pos; ++i) out.push_back(pool[pos_idx[static_cast<size_t>(i)]]);
      for (int i = 0; i < want_neg; ++i) out.push_back(pool[neg_idx[static_cast<size_t>(i)]]);
    } else {
      if (static_cast<int>(pool.size()) < part.count)
        throw InsufficientData("assemble: pool " + source_name(part.source) +
                               " too small for spec " + spec.name);
      auto idx = shuffled_indices(pool.size(), part_seed);
      for (int i = 0; i < part.count; ++i) out.push_back(pool[idx[static_cast<size_t>(i)]]);
    }
  }
  return out;
}

double tta_predict(BinaryClassifier& clf, const Tensorf& image, int replicas,
                   augment::Rng& rng) {
  if (replicas < 1) throw std::invalid_argument("tta_predict: replicas must be >= 1");
  double acc = 0;
  for (int i = 0; i < replicas; ++i)
    acc += clf.predict(augment::random_augment(image, rng));
  return acc / replicas;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const SamplePools& pools,
                                const Pool& test_set) {
  cfg.validate();
  if (test_set.empty()) throw InsufficientData("experiment: empty test set");
  std::vector<int> test_labels;
  test_labels.reserve(test_set.size());
  for (const auto& e : test_set) test_labels.push_back(e.label);

  ExperimentReport report;
  report.reference_spec = cfg.reference_spec;
  report.runs_per_spec = cfg.runs_per_spec;

  for (const auto& spec : cfg.specs) {
    SpecResult row;
    row.spec = spec;
    for (int run = 0; run < cfg.runs_per_spec; ++run) {
      const uint64_t run_seed =
          mix_seed(cfg.seed, "run/" + spec.name + "/" + std::to_string(run));
      auto training = assemble_training_set(spec, pools, run_seed);

      std::vector<Tensorf> images;
      std::vector<int> labels;
      images.reserve(training.size());
      labels.reserve(training.size());
      for (auto& e : training) {
        images.push_back(std::move(e.image));
        labels.push_back(e.label);
      }

      ClassifierConfig ccfg = cfg.classifier;
      ccfg.seed = run_seed + 1;
      auto clf = make_classifier(cfg.classifier_name, ccfg);
      clf->train(images, labels);

      augment::Rng tta_rng(run_seed + 2);
      std::vector<double> scores;
      scores.reserve(test_set.size());
      for (const auto& e : test_set)
        scores.push_back(tta_predict(*clf, e.image, cfg.tta_replicas, tta_rng));

      RunResult rr;
      rr.run_index = run;
      rr.seed = run_seed;
      rr.auc = stats::auc(scores, test_labels);
      row.runs.push_back(rr);
    }
    std::vector<double> aucs;
    for (const auto& r : row.runs) aucs.push_back(r.auc);
    row.mean_auc = stats::mean(aucs);
    row.std_auc = stats::sample_std(aucs);
    report.rows.push_back(std::move(row));
  }

  // Paired t-tests against the reference row, pairing runs by index.
  const SpecResult* ref = nullptr;
  for (const auto& row : report.rows)
    if (row.spec.name == cfg.reference_spec) ref = &row;
  std::vector<double> ref_aucs;
  for (const auto& r : ref->runs) ref_aucs.push_back(r.auc);
  for (auto& row : report.rows) {
    if (row.spec.name == cfg.reference_spec) continue;
    std::vector<double> aucs;
    for (const auto& r : row.runs) aucs.push_back(r.auc);
    try {
      row.vs_reference = stats::paired_t_test(aucs, ref_aucs);
    } catch (const DegenerateInput&) {
      row.vs_reference.reset();  // identical per-run AUCs: no test possible
    }
  }
  return report;
}

std::string report_to_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "dataset,size,mean_auc_pct,std_auc_pct,p_value_vs_" << report.reference_spec << "\n";
  os.setf(std::ios::fixed);
  for (const auto& row : report.rows) {
    os.precision(1);
    os << row.spec.name << "," << row.spec.total() << "," << 100.0 * row.mean_auc << ","
       << 100.0 * row.std_auc << ",";
    if (row.vs_reference) {
      os.precision(4);
      os << row.vs_reference->p;
    } else {
      os << (row.spec.name == report.reference_spec ? "-" : "n/a");
    }
    os << "\n";
  }
  return os.str();
}

std::string report_to_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["reference_spec"] = report.reference_spec;
  j["runs_per_spec"] = report.runs_per_spec;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json r;
    r["dataset"] = row.spec.name;
    r["size"] = row.spec.total();
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& p : row.spec.parts)
      parts.push_back({{"source", source_name(p.source)}, {"count", p.count}});
    r["parts"] = parts;
    r["mean_auc"] = row.mean_auc;
    r["std_auc"] = row.std_auc;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& rr : row.runs)
      runs.push_back({{"run", rr.run_index}, {"seed", rr.seed}, {"auc", rr.auc}});
    r["runs"] = runs;
    if (row.vs_reference) {
      r["p_value"] = row.vs_reference->p;
      r["t"] = row.vs_reference->t;
      r["dof"] = row.vs_reference->dof;
      r["significant"] = row.vs_reference->significant;
    }
    j["rows"].push_back(r);
  }
  return j.dump(2) + "\n";
}

}  // namespace lesionsynth::eval
