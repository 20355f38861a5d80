#include "lesionsynth/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lesionsynth/errors.hpp"
#include "lesionsynth/hash.hpp"

namespace lesionsynth::trainer {

namespace fs = std::filesystem;

void TrainingConfig::validate() const {
  if (epochs < 1) throw ConfigError("trainer.epochs must be >= 1");
  if (decay_epochs < 0 || decay_epochs > epochs)
    throw ConfigError("trainer.decay_epochs must be in [0, epochs]");
  if (!(learning_rate > 0)) throw ConfigError("trainer.learning_rate must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1)) throw ConfigError("trainer.adam_beta1 out of range");
  if (!(adam_beta2 >= 0 && adam_beta2 < 1)) throw ConfigError("trainer.adam_beta2 out of range");
  if (batch_size < 1) throw ConfigError("trainer.batch_size must be >= 1");
  if (width < 1 || height < 1) throw ConfigError("trainer.resolution must be positive");
  if (lambda_fm < 0) throw ConfigError("trainer.lambda_fm must be >= 0");
  if (checkpoint_every < 1) throw ConfigError("trainer.checkpoint_every must be >= 1");
  const int div = 1 << gen.num_downsamples;
  if (width % div != 0 || height % div != 0)
    throw ConfigError("trainer.resolution must be divisible by 2^num_downsamples");
  const int expected = mapkit::kNumLabels + (use_boundary ? 1 : 0);
  if (gen.input_channels != expected)
    throw ConfigError("synthnet.input_channels inconsistent with use_boundary");
  if (dis.cond_channels != gen.input_channels)
    throw ConfigError("discriminator cond_channels must equal generator input_channels");
}

std::string TrainingConfig::serialize() const {
  std::ostringstream os;
  auto num = [&os](const char* key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << key << "=" << buf << "\n";
  };
  os << "kind=pix2pixhd\n";
  num("epochs", epochs);
  num("decay_epochs", decay_epochs);
  num("learning_rate", learning_rate);
  num("adam_beta1", adam_beta1);
  num("adam_beta2", adam_beta2);
  num("batch_size", batch_size);
  num("seed", static_cast<double>(seed));
  num("width", width);
  num("height", height);
  num("use_boundary", use_boundary ? 1 : 0);
  num("lambda_fm", lambda_fm);
  num("checkpoint_every", checkpoint_every);
  num("gen.input_channels", gen.input_channels);
  num("gen.output_channels", gen.output_channels);
  num("gen.base_channels", gen.base_channels);
  num("gen.num_downsamples", gen.num_downsamples);
  num("gen.num_residual_blocks", gen.num_residual_blocks);
  num("dis.cond_channels", dis.cond_channels);
  num("dis.image_channels", dis.image_channels);
  num("dis.base_channels", dis.base_channels);
  num("dis.num_layers", dis.num_layers);
  num("dis.num_scales", dis.num_scales);
  return os.str();
}

TrainingConfig TrainingConfig::deserialize(const std::string& text) {
  TrainingConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    double v = std::strtod(line.c_str() + eq + 1, nullptr);
    if (key == "epochs") cfg.epochs = static_cast<int>(v);
    else if (key == "decay_epochs") cfg.decay_epochs = static_cast<int>(v);
    else if (key == "learning_rate") cfg.learning_rate = v;
    else if (key == "adam_beta1") cfg.adam_beta1 = v;
    else if (key == "adam_beta2") cfg.adam_beta2 = v;
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(v);
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(v);
    else if (key == "width") cfg.width = static_cast<int>(v);
    else if (key == "height") cfg.height = static_cast<int>(v);
    else if (key == "use_boundary") cfg.use_boundary = v != 0;
    else if (key == "lambda_fm") cfg.lambda_fm = v;
    else if (key == "checkpoint_every") cfg.checkpoint_every = static_cast<int>(v);
    else if (key == "gen.input_channels") cfg.gen.input_channels = static_cast<int>(v);
    else if (key == "gen.output_channels") cfg.gen.output_channels = static_cast<int>(v);
    else if (key == "gen.base_channels") cfg.gen.base_channels = static_cast<int>(v);
    else if (key == "gen.num_downsamples") cfg.gen.num_downsamples = static_cast<int>(v);
    else if (key == "gen.num_residual_blocks") cfg.gen.num_residual_blocks = static_cast<int>(v);
    else if (key == "dis.cond_channels") cfg.dis.cond_channels = static_cast<int>(v);
    else if (key == "dis.image_channels") cfg.dis.image_channels = static_cast<int>(v);
    else if (key == "dis.base_channels") cfg.dis.base_channels = static_cast<int>(v);
    else if (key == "dis.num_layers") cfg.dis.num_layers = static_cast<int>(v);
    else if (key == "dis.num_scales") cfg.dis.num_scales = static_cast<int>(v);
  }
  return cfg;
}

std::string TrainingConfig::fingerprint() const { return sha256_hex(serialize()); }

double lr_factor(int epoch, int total_epochs, int decay_epochs) {
  const int keep = total_epochs - decay_epochs;
  if (epoch < keep || decay_epochs == 0) return 1.0;
  return std::max(0.0, static_cast<double>(total_epochs - epoch) / decay_epochs);
}

Pix2PixTrainer::Pix2PixTrainer(const TrainingConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(cfg_.seed);
  gen_ = std::make_unique<synthnet::Generator>(cfg_.gen, rng);
  dis_ = std::make_unique<synthnet::MultiScaleDiscriminator>(cfg_.dis, rng);
  opt_g_ = std::make_unique<nn::Adam>(static_cast<float>(cfg_.learning_rate),
                                      static_cast<float>(cfg_.adam_beta1),
                                      static_cast<float>(cfg_.adam_beta2));
  opt_d_ = std::make_unique<nn::Adam>(static_cast<float>(cfg_.learning_rate),
                                      static_cast<float>(cfg_.adam_beta1),
                                      static_cast<float>(cfg_.adam_beta2));
  opt_g_->attach(gen_->params());
  opt_d_->attach(dis_->params());
}

namespace {

using objectives::FeaturePyramid;
using objectives::LogitMaps;

LogitMaps<float> take_logits(const FeaturePyramid<float>& feats) {
  LogitMaps<float> out;
  out.reserve(feats.size());
  for (const auto& scale : feats) out.push_back(scale.back());
  return out;
}

// Per-scale grad vectors sized like `feats`, mid entries empty, last = logit grad.
FeaturePyramid<float> logit_only_grads(const FeaturePyramid<float>& feats,
                                       const LogitMaps<float>& logit_grads) {
  FeaturePyramid<float> g(feats.size());
  for (size_t s = 0; s < feats.size(); ++s) {
    g[s].resize(feats[s].size());
    g[s].back() = logit_grads[s];
  }
  return g;
}

}  // namespace

objectives::LossReport Pix2PixTrainer::train_step(const Tensorf& input, const Tensorf& target) {
  if (input.ndim() != 4 || target.ndim() != 4 || input.dim(0) != target.dim(0) ||
      input.dim(2) != target.dim(2) || input.dim(3) != target.dim(3))
    throw std::invalid_argument("train_step: input/target shape mismatch");

  Tensorf fake = gen_->forward(input);

  objectives::LossReport rep;
  rep.lambda_fm = cfg_.lambda_fm;

  // Discriminator update. Real and fake passes backprop independently
  // because the LSGAN terms do not couple them.
  opt_d_->zero_grad();
  {
    auto feats_real = dis_->forward(input, target);
    auto logits_real = take_logits(feats_real);
    rep.d_real = objectives::lsgan_d_real_loss(logits_real);
    dis_->backward(logit_only_grads(feats_real, objectives::lsgan_d_real_grad(logits_real)));

    auto feats_fake = dis_->forward(input, fake);
    auto logits_fake = take_logits(feats_fake);
    rep.d_fake = objectives::lsgan_d_fake_loss(logits_fake);
    dis_->backward(logit_only_grads(feats_fake, objectives::lsgan_d_fake_grad(logits_fake)));
  }
  if (!std::isfinite(rep.d_real) || !std::isfinite(rep.d_fake))
    throw TrainingDiverged("discriminator loss is not finite");
  opt_d_->step();

  // Generator update against the freshly updated discriminator.
  opt_g_->zero_grad();
  opt_d_->zero_grad();  // D grads from this pass are discarded
  {
    auto feats_real = dis_->forward(input, target);  // constants for FM
    auto feats_fake = dis_->forward(input, fake);
    auto logits_fake = take_logits(feats_fake);
    rep.g_gan = objectives::lsgan_g_loss(logits_fake);

    FeaturePyramid<float> real_mid(feats_real.size()), fake_mid(feats_fake.size());
    for (size_t s = 0; s < feats_real.size(); ++s) {
      real_mid[s].assign(feats_real[s].begin(), feats_real[s].end() - 1);
      fake_mid[s].assign(feats_fake[s].begin(), feats_fake[s].end() - 1);
    }
    rep.g_fm = objectives::feature_matching(real_mid, fake_mid);

    auto logit_grads = objectives::lsgan_g_grad(logits_fake);
    auto fm_grads = objectives::feature_matching_grad(real_mid, fake_mid);
    const float lfm = static_cast<float>(cfg_.lambda_fm);
    FeaturePyramid<float> grads(feats_fake.size());
    for (size_t s = 0; s < feats_fake.size(); ++s) {
      for (auto& g : fm_grads[s])
        grads[s].emplace_back(g.shape(), g.array() * lfm);
      grads[s].push_back(logit_grads[s]);
    }
    Tensorf gimg = dis_->backward(grads);
    gen_->backward(gimg);
  }
  if (!std::isfinite(rep.g_gan) || !std::isfinite(rep.g_fm))
    throw TrainingDiverged("generator loss is not finite");
  opt_g_->step();

  ++global_step_;
  return rep;
}

Checkpoint Pix2PixTrainer::make_checkpoint(int64_t epoch) const {
  Checkpoint ckpt;
  ckpt.kind = "pix2pixhd";
  ckpt.fingerprint = cfg_.fingerprint();
  ckpt.meta = cfg_.serialize();
  ckpt.epoch = epoch;
  ckpt.g_steps = opt_g_->steps();
  ckpt.d_steps = opt_d_->steps();
  auto dump = [&ckpt](const std::vector<nn::Parameter*>& params) {
    for (const nn::Parameter* p : params) {
      ckpt.add(p->name, p->value);
      ckpt.add(p->name + ".adam_m", p->adam_m);
      ckpt.add(p->name + ".adam_v", p->adam_v);
    }
  };
  dump(const_cast<Pix2PixTrainer*>(this)->gen_->params());
  dump(const_cast<Pix2PixTrainer*>(this)->dis_->params());
  return ckpt;
}

void Pix2PixTrainer::load(const Checkpoint& ckpt) {
  if (ckpt.fingerprint != cfg_.fingerprint())
    throw ConfigMismatch("checkpoint fingerprint does not match the active config");
  auto restore = [&ckpt](const std::vector<nn::Parameter*>& params) {
    for (nn::Parameter* p : params) {
      const Tensorf* v = ckpt.find(p->name);
      const Tensorf* m = ckpt.find(p->name + ".adam_m");
      const Tensorf* av = ckpt.find(p->name + ".adam_v");
      if (!v || !m || !av)
        throw std::runtime_error("checkpoint missing parameter: " + p->name);
      if (!v->same_shape(p->value))
        throw std::runtime_error("checkpoint shape mismatch for: " + p->name);
      p->value = *v;
      p->adam_m = *m;
      p->adam_v = *av;
    }
  };
  restore(gen_->params());
  restore(dis_->params());
  opt_g_->set_steps(ckpt.g_steps);
  opt_d_->set_steps(ckpt.d_steps);
}

Checkpoint Pix2PixTrainer::train(const std::vector<Sample>& dataset,
                                 const std::string& metrics_path,
                                 const std::optional<Checkpoint>& resume) {
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  int64_t start_epoch = 0;
  if (resume) {
    load(*resume);
    start_epoch = resume->epoch + 1;
  }

  std::ofstream metrics;
  if (!metrics_path.empty()) metrics.open(metrics_path, std::ios::app);

  nn::Rng order_rng(cfg_.seed + 17);
  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), size_t{0});

  fs::create_directories(cfg_.checkpoint_dir);
  for (int64_t epoch = start_epoch; epoch < cfg_.epochs; ++epoch) {
    const double f = lr_factor(static_cast<int>(epoch), cfg_.epochs, cfg_.decay_epochs);
    opt_g_->set_lr(static_cast<float>(cfg_.learning_rate * f));
    opt_d_->set_lr(static_cast<float>(cfg_.learning_rate * f));
    std::shuffle(order.begin(), order.end(), order_rng);

    for (size_t i = 0; i < order.size(); i += cfg_.batch_size) {
      const int bs = static_cast<int>(std::min<size_t>(cfg_.batch_size, order.size() - i));
      const auto& first = dataset[order[i]];
      const int c = first.input.dim(0), h = first.input.dim(1), w = first.input.dim(2);
      Tensorf input({bs, c, h, w});
      Tensorf target({bs, 3, h, w});
      for (int b = 0; b < bs; ++b) {
        const Sample& s = dataset[order[i + b]];
        std::copy(s.input.data(), s.input.data() + s.input.size(),
                  input.data() + static_cast<int64_t>(b) * c * h * w);
        std::copy(s.target.data(), s.target.data() + s.target.size(),
                  target.data() + static_cast<int64_t>(b) * 3 * h * w);
      }
      auto rep = train_step(input, target);
      if (metrics.is_open()) {
        metrics << "{\"step\":" << global_step_ << ",\"epoch\":" << epoch
                << ",\"g_gan\":" << rep.g_gan << ",\"g_fm\":" << rep.g_fm
                << ",\"d_real\":" << rep.d_real << ",\"d_fake\":" << rep.d_fake << "}\n";
        metrics.flush();
      }
    }

    if ((epoch + 1) % cfg_.checkpoint_every == 0 && epoch + 1 < cfg_.epochs) {
      char name[64];
      std::snprintf(name, sizeof(name), "ckpt_epoch_%05lld.bin",
                    static_cast<long long>(epoch));
      save_checkpoint((fs::path(cfg_.checkpoint_dir) / name).string(),
                      make_checkpoint(epoch));
    }
  }

  Checkpoint final_ckpt = make_checkpoint(cfg_.epochs - 1);
  save_checkpoint((fs::path(cfg_.checkpoint_dir) / "final.bin").string(), final_ckpt);
  return final_ckpt;
}

Tensorf Pix2PixTrainer::synthesize_batch(const Tensorf& input) {
  return gen_->forward(input);
}

Tensorf image_to_tensor(const RGBImage& img) {
  Tensorf t({3, img.height, img.width});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        t.at3(c, y, x) = img.at(y, x, c) / 127.5f - 1.0f;
  return t;
}

RGBImage tensor_to_image(const Tensorf& t, int batch_index) {
  const int c = t.ndim() == 4 ? t.dim(1) : t.dim(0);
  const int h = t.ndim() == 4 ? t.dim(2) : t.dim(1);
  const int w = t.ndim() == 4 ? t.dim(3) : t.dim(2);
  if (c != 3) throw std::invalid_argument("tensor_to_image: expected 3 channels");
  const float* base =
      t.data() + (t.ndim() == 4 ? static_cast<int64_t>(batch_index) * c * h * w : 0);
  RGBImage img(w, h);
  for (int cc = 0; cc < 3; ++cc)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float v = base[(static_cast<int64_t>(cc) * h + y) * w + x];
        // -1 -> 0, +1 -> 255
        float mapped = std::round((v + 1.0f) * 127.5f);
        img.at(y, x, cc) = static_cast<uint8_t>(std::clamp(mapped, 0.0f, 255.0f));
      }
  return img;
}

Tensorf encode_maps(const mapkit::SemanticLabelMap& sem, const mapkit::InstanceMap* inst,
                    int target_w, int target_h) {
  mapkit::SemanticLabelMap s = sem;
  if (s.width != target_w || s.height != target_h)
    s = mapkit::letterbox(s, target_w, target_h);
  if (!inst) return mapkit::one_hot(s, mapkit::kNumLabels);
  mapkit::InstanceMap in = *inst;
  if (in.width != target_w || in.height != target_h)
    in = mapkit::letterbox(in, target_w, target_h);
  auto bmap = mapkit::boundary_map(in);
  return mapkit::one_hot(s, mapkit::kNumLabels, &bmap);
}

std::vector<RGBImage> synthesize(
    const Checkpoint& ckpt,
    const std::vector<std::pair<mapkit::SemanticLabelMap,
                                std::optional<mapkit::InstanceMap>>>& maps) {
  if (ckpt.kind != "pix2pixhd")
    throw std::invalid_argument("synthesize: checkpoint kind is not pix2pixhd");
  TrainingConfig cfg = TrainingConfig::deserialize(ckpt.meta);
  Pix2PixTrainer t(cfg);
  t.load(ckpt);

  std::vector<RGBImage> out;
  out.reserve(maps.size());
  for (const auto& [sem, inst] : maps) {
    if (cfg.use_boundary && !inst)
      throw std::invalid_argument("synthesize: checkpoint expects an instance map");
    Tensorf x = encode_maps(sem, cfg.use_boundary ? &*inst : nullptr, cfg.width, cfg.height);
    if (x.dim(1) != cfg.height || x.dim(2) != cfg.width)
      throw std::invalid_argument("synthesize: resolution mismatch after letterboxing");
    Tensorf y = t.synthesize_batch(x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)}));
    out.push_back(tensor_to_image(y, 0));
  }
  return out;
}

}  // namespace lesionsynth::trainer
