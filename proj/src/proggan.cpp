#include "lesionsynth/proggan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lesionsynth/errors.hpp"
#include "lesionsynth/hash.hpp"

namespace lesionsynth::proggan {

ConditionLabel parse_label(const std::string& s) {
  if (s == "benign") return ConditionLabel::kBenign;
  if (s == "melanoma") return ConditionLabel::kMelanoma;
  throw std::invalid_argument("unknown condition label: " + s);
}

std::string label_name(ConditionLabel l) {
  return l == ConditionLabel::kBenign ? "benign" : "melanoma";
}

void ResolutionSchedule::validate() const {
  if (start_res != 4) throw ConfigError("proggan.start_res must be 4");
  if (target_res < start_res || (target_res & (target_res - 1)) != 0)
    throw ConfigError("proggan.target_res must be a power of two >= 4");
  if (fade_epochs < 1 || stable_epochs < 0 || initial_stable_epochs < 1)
    throw ConfigError("proggan schedule epochs out of range");
}

std::vector<int> ResolutionSchedule::stage_resolutions() const {
  std::vector<int> out;
  for (int r = start_res; r <= target_res; r *= 2) out.push_back(r);
  return out;
}

int ResolutionSchedule::num_stages() const {
  return static_cast<int>(stage_resolutions().size());
}

int ResolutionSchedule::epochs_for_stage(int stage) const {
  return stage == 0 ? initial_stable_epochs : fade_epochs + stable_epochs;
}

int ResolutionSchedule::total_epochs() const {
  int total = 0;
  for (int s = 0; s < num_stages(); ++s) total += epochs_for_stage(s);
  return total;
}

double fade_alpha(int epoch_in_stage, const ResolutionSchedule& schedule) {
  if (epoch_in_stage < 0 ||
      epoch_in_stage >= schedule.fade_epochs + schedule.stable_epochs)
    throw std::out_of_range("fade_alpha: epoch_in_stage out of range");
  return std::min(1.0, static_cast<double>(epoch_in_stage + 1) / schedule.fade_epochs);
}

Tensorf condition_concat(const Tensorf& features, ConditionLabel label) {
  const bool batched = features.ndim() == 4;
  if (!batched && features.ndim() != 3)
    throw std::invalid_argument("condition_concat: expected (C,H,W) or (N,C,H,W)");
  const int n = batched ? features.dim(0) : 1;
  const int c = features.dim(batched ? 1 : 0);
  const int h = features.dim(batched ? 2 : 1);
  const int w = features.dim(batched ? 3 : 2);
  const int64_t hw = static_cast<int64_t>(h) * w;
  Tensorf out(batched ? std::vector<int>{n, c + 2, h, w} : std::vector<int>{c + 2, h, w});
  const int hot = static_cast<int>(label);
  for (int i = 0; i < n; ++i) {
    std::copy(features.data() + static_cast<int64_t>(i) * c * hw,
              features.data() + static_cast<int64_t>(i + 1) * c * hw,
              out.data() + static_cast<int64_t>(i) * (c + 2) * hw);
    for (int plane = 0; plane < 2; ++plane) {
      float* dst = out.data() + (static_cast<int64_t>(i) * (c + 2) + c + plane) * hw;
      std::fill(dst, dst + hw, plane == hot ? 1.0f : 0.0f);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

// Appends the batch's per-sample label planes; labels are set by the owning
// network before each forward.
class ConditionConcatLayer : public nn::Layer {
 public:
  void set_labels(const std::vector<ConditionLabel>* labels) { labels_ = labels; }

  Tensorf forward(const Tensorf& x) override {
    if (!labels_ || static_cast<int>(labels_->size()) != x.dim(0))
      throw std::invalid_argument("condition concat: labels not set for this batch");
    in_channels_ = x.dim(1);
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t hw = static_cast<int64_t>(h) * w;
    Tensorf out({n, c + 2, h, w});
    for (int i = 0; i < n; ++i) {
      std::copy(x.data() + static_cast<int64_t>(i) * c * hw,
                x.data() + static_cast<int64_t>(i + 1) * c * hw,
                out.data() + static_cast<int64_t>(i) * (c + 2) * hw);
      const int hot = static_cast<int>((*labels_)[i]);
      for (int plane = 0; plane < 2; ++plane) {
        float* dst = out.data() + (static_cast<int64_t>(i) * (c + 2) + c + plane) * hw;
        std::fill(dst, dst + hw, plane == hot ? 1.0f : 0.0f);
      }
    }
    return out;
  }

  Tensorf backward(const Tensorf& gy) override {
    const int n = gy.dim(0), c = in_channels_, h = gy.dim(2), w = gy.dim(3);
    const int64_t hw = static_cast<int64_t>(h) * w;
    Tensorf gx({n, c, h, w});
    for (int i = 0; i < n; ++i)
      std::copy(gy.data() + static_cast<int64_t>(i) * (c + 2) * hw,
                gy.data() + static_cast<int64_t>(i) * (c + 2) * hw + c * hw,
                gx.data() + static_cast<int64_t>(i) * c * hw);
    return gx;
  }

 private:
  const std::vector<ConditionLabel>* labels_ = nullptr;
  int in_channels_ = 0;
};

// ---------------------------------------------------------------------------

void PganConfig::validate() const {
  schedule.validate();
  if (latent_dim < 1) throw ConfigError("proggan.latent_dim must be >= 1");
  if (base_channels < 4) throw ConfigError("proggan.base_channels must be >= 4");
  if (!(learning_rate > 0)) throw ConfigError("proggan.learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("proggan.batch_size must be >= 1");
}

int PganConfig::channels_at(int stage) const {
  return std::max(base_channels >> stage, 8);
}

std::string PganConfig::serialize() const {
  std::ostringstream os;
  os << "kind=pgan\n"
     << "latent_dim=" << latent_dim << "\n"
     << "base_channels=" << base_channels << "\n"
     << "target_res=" << schedule.target_res << "\n"
     << "fade_epochs=" << schedule.fade_epochs << "\n"
     << "stable_epochs=" << schedule.stable_epochs << "\n"
     << "initial_stable_epochs=" << schedule.initial_stable_epochs << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", learning_rate);
  os << "learning_rate=" << buf << "\n"
     << "adam_beta1=" << adam_beta1 << "\n"
     << "adam_beta2=" << adam_beta2 << "\n"
     << "batch_size=" << batch_size << "\n"
     << "seed=" << seed << "\n";
  return os.str();
}

PganConfig PganConfig::deserialize(const std::string& text) {
  PganConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    double v = std::strtod(line.c_str() + eq + 1, nullptr);
    if (key == "latent_dim") cfg.latent_dim = static_cast<int>(v);
    else if (key == "base_channels") cfg.base_channels = static_cast<int>(v);
    else if (key == "target_res") cfg.schedule.target_res = static_cast<int>(v);
    else if (key == "fade_epochs") cfg.schedule.fade_epochs = static_cast<int>(v);
    else if (key == "stable_epochs") cfg.schedule.stable_epochs = static_cast<int>(v);
    else if (key == "initial_stable_epochs")
      cfg.schedule.initial_stable_epochs = static_cast<int>(v);
    else if (key == "learning_rate") cfg.learning_rate = v;
    else if (key == "adam_beta1") cfg.adam_beta1 = v;
    else if (key == "adam_beta2") cfg.adam_beta2 = v;
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(v);
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(v);
  }
  return cfg;
}

std::string PganConfig::fingerprint() const { return sha256_hex(serialize()); }

// ---------------------------------------------------------------------------

namespace {

nn::LayerPtr make_concat(std::vector<ConditionConcatLayer*>& sites) {
  auto l = std::make_unique<ConditionConcatLayer>();
  sites.push_back(l.get());
  return l;
}

Tensorf scaled(const Tensorf& t, float s) { return Tensorf(t.shape(), t.array() * s); }

Tensorf added(const Tensorf& a, const Tensorf& b) {
  return Tensorf(a.shape(), a.array() + b.array());
}

}  // namespace

PganGenerator::PganGenerator(const PganConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  const int stages = cfg.schedule.num_stages();
  const int ch0 = cfg.channels_at(0);

  // Latent + label one-hot feeds the first dense layer.
  fc_.add(std::make_unique<nn::Linear>("pg.g.fc", cfg.latent_dim + 2, ch0 * 4 * 4, rng));
  fc_.add(std::make_unique<nn::LeakyReLU>(0.2f));

  base_conv_.add(make_concat(concat_sites_));
  base_conv_.add(std::make_unique<nn::Conv2d>("pg.g.base", ch0 + 2, ch0, 3, 1, 1,
                                              nn::PadMode::kZero, rng));
  base_conv_.add(std::make_unique<nn::LeakyReLU>(0.2f));

  blocks_.resize(stages);
  to_rgb_.resize(stages);
  for (int s = 1; s < stages; ++s) {
    const int cin = cfg.channels_at(s - 1), cout = cfg.channels_at(s);
    auto b = std::make_unique<nn::Sequential>();
    std::string n = "pg.g.block" + std::to_string(s);
    b->add(std::make_unique<nn::Upsample2xNearest>());
    b->add(make_concat(concat_sites_));
    b->add(std::make_unique<nn::Conv2d>(n + ".conv0", cin + 2, cout, 3, 1, 1,
                                        nn::PadMode::kZero, rng));
    b->add(std::make_unique<nn::LeakyReLU>(0.2f));
    b->add(make_concat(concat_sites_));
    b->add(std::make_unique<nn::Conv2d>(n + ".conv1", cout + 2, cout, 3, 1, 1,
                                        nn::PadMode::kZero, rng));
    b->add(std::make_unique<nn::LeakyReLU>(0.2f));
    blocks_[s] = std::move(b);
  }
  for (int s = 0; s < stages; ++s) {
    auto t = std::make_unique<nn::Sequential>();
    t->add(std::make_unique<nn::Conv2d>("pg.g.torgb" + std::to_string(s), cfg.channels_at(s),
                                        3, 1, 1, 0, nn::PadMode::kZero, rng));
    t->add(std::make_unique<nn::Tanh>());
    to_rgb_[s] = std::move(t);
  }
}

Tensorf PganGenerator::forward(const Tensorf& z, const std::vector<ConditionLabel>& labels,
                               int stage, double alpha) {
  if (z.ndim() != 2 || z.dim(1) != cfg_.latent_dim)
    throw std::invalid_argument("pgan generator: latent shape mismatch");
  if (stage < 0 || stage >= cfg_.schedule.num_stages())
    throw std::invalid_argument("pgan generator: stage out of range");
  if (static_cast<int>(labels.size()) != z.dim(0))
    throw std::invalid_argument("pgan generator: one label per batch item required");

  for (auto* site : concat_sites_) site->set_labels(&labels);
  fwd_stage_ = stage;
  fwd_alpha_ = alpha;
  fwd_fade_ = stage > 0 && alpha < 1.0;
  fwd_batch_ = z.dim(0);

  const int n = z.dim(0), ch0 = cfg_.channels_at(0);
  Tensorf zin({n, cfg_.latent_dim + 2});
  for (int i = 0; i < n; ++i) {
    std::copy(z.data() + static_cast<int64_t>(i) * cfg_.latent_dim,
              z.data() + static_cast<int64_t>(i + 1) * cfg_.latent_dim,
              zin.data() + static_cast<int64_t>(i) * (cfg_.latent_dim + 2));
    zin[static_cast<int64_t>(i) * (cfg_.latent_dim + 2) + cfg_.latent_dim +
        static_cast<int>(labels[i])] = 1.0f;
  }

  Tensorf h = fc_.forward(zin).reshaped({n, ch0, 4, 4});
  h = base_conv_.forward(h);
  Tensorf h_prev;
  for (int s = 1; s <= stage; ++s) {
    if (s == stage) h_prev = h;
    h = blocks_[s]->forward(h);
  }

  Tensorf out = to_rgb_[stage]->forward(h);
  if (fwd_fade_) {
    Tensorf old = old_path_up_.forward(to_rgb_[stage - 1]->forward(h_prev));
    out = added(scaled(out, static_cast<float>(alpha)),
                scaled(old, static_cast<float>(1.0 - alpha)));
  }
  return out;
}

Tensorf PganGenerator::backward(const Tensorf& gy) {
  Tensorf g_h;
  Tensorf g_prev_extra;
  if (fwd_fade_) {
    g_h = to_rgb_[fwd_stage_]->backward(scaled(gy, static_cast<float>(fwd_alpha_)));
    Tensorf g_old = old_path_up_.backward(scaled(gy, static_cast<float>(1.0 - fwd_alpha_)));
    g_prev_extra = to_rgb_[fwd_stage_ - 1]->backward(g_old);
  } else {
    g_h = to_rgb_[fwd_stage_]->backward(gy);
  }
  for (int s = fwd_stage_; s >= 1; --s) {
    g_h = blocks_[s]->backward(g_h);
    if (s == fwd_stage_ && fwd_fade_) g_h = added(g_h, g_prev_extra);
  }
  g_h = base_conv_.backward(g_h);
  Tensorf g_fc = fc_.backward(g_h.reshaped({fwd_batch_, static_cast<int>(g_h.size() / fwd_batch_)}));
  return g_fc;  // includes the label entries; callers ignore them
}

std::vector<nn::Parameter*> PganGenerator::params() {
  std::vector<nn::Parameter*> out;
  fc_.collect(out);
  base_conv_.collect(out);
  for (auto& b : blocks_)
    if (b) b->collect(out);
  for (auto& t : to_rgb_) t->collect(out);
  return out;
}

// ---------------------------------------------------------------------------

PganDiscriminator::PganDiscriminator(const PganConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  const int stages = cfg.schedule.num_stages();
  const int ch0 = cfg.channels_at(0);

  from_rgb_.resize(stages);
  blocks_.resize(stages);
  for (int s = 0; s < stages; ++s) {
    auto f = std::make_unique<nn::Sequential>();
    f->add(std::make_unique<nn::Conv2d>("pg.d.fromrgb" + std::to_string(s), 3,
                                        cfg.channels_at(s), 1, 1, 0, nn::PadMode::kZero, rng));
    f->add(std::make_unique<nn::LeakyReLU>(0.2f));
    from_rgb_[s] = std::move(f);
  }
  for (int s = 1; s < stages; ++s) {
    const int cin = cfg.channels_at(s), cout = cfg.channels_at(s - 1);
    auto b = std::make_unique<nn::Sequential>();
    std::string n = "pg.d.block" + std::to_string(s);
    b->add(make_concat(concat_sites_));
    b->add(std::make_unique<nn::Conv2d>(n + ".conv0", cin + 2, cin, 3, 1, 1,
                                        nn::PadMode::kZero, rng));
    b->add(std::make_unique<nn::LeakyReLU>(0.2f));
    b->add(make_concat(concat_sites_));
    b->add(std::make_unique<nn::Conv2d>(n + ".conv1", cin + 2, cout, 3, 1, 1,
                                        nn::PadMode::kZero, rng));
    b->add(std::make_unique<nn::LeakyReLU>(0.2f));
    b->add(std::make_unique<nn::AvgPool2x2>());
    blocks_[s] = std::move(b);
  }

  head_conv_.add(std::make_unique<nn::MinibatchStddev>());
  head_conv_.add(make_concat(concat_sites_));
  head_conv_.add(std::make_unique<nn::Conv2d>("pg.d.head", ch0 + 1 + 2, ch0, 3, 1, 1,
                                              nn::PadMode::kZero, rng));
  head_conv_.add(std::make_unique<nn::LeakyReLU>(0.2f));
  // Final layer: no label concat.
  head_fc_.add(std::make_unique<nn::Linear>("pg.d.fc", ch0 * 4 * 4, 1, rng));
}

Tensorf PganDiscriminator::forward(const Tensorf& img, const std::vector<ConditionLabel>& labels,
                                   int stage, double alpha) {
  if (img.ndim() != 4 || img.dim(1) != 3)
    throw std::invalid_argument("pgan discriminator: expected (N,3,H,W)");
  if (static_cast<int>(labels.size()) != img.dim(0))
    throw std::invalid_argument("pgan discriminator: one label per batch item required");
  for (auto* site : concat_sites_) site->set_labels(&labels);
  fwd_stage_ = stage;
  fwd_alpha_ = alpha;
  fwd_fade_ = stage > 0 && alpha < 1.0;
  fwd_batch_ = img.dim(0);

  Tensorf h = from_rgb_[stage]->forward(img);
  if (stage > 0) {
    h = blocks_[stage]->forward(h);
    if (fwd_fade_) {
      Tensorf h_old = from_rgb_[stage - 1]->forward(old_path_down_.forward(img));
      h = added(scaled(h, static_cast<float>(alpha)),
                scaled(h_old, static_cast<float>(1.0 - alpha)));
    }
  }
  for (int s = stage - 1; s >= 1; --s) h = blocks_[s]->forward(h);
  h = head_conv_.forward(h);
  const int n = h.dim(0);
  return head_fc_.forward(h.reshaped({n, static_cast<int>(h.size() / n)}));
}

Tensorf PganDiscriminator::backward(const Tensorf& gy) {
  Tensorf g = head_fc_.backward(gy);
  const int ch0 = cfg_.channels_at(0);
  g = head_conv_.backward(g.reshaped({fwd_batch_, ch0, 4, 4}));
  for (int s = 1; s <= fwd_stage_ - 1; ++s) g = blocks_[s]->backward(g);
  if (fwd_stage_ == 0) return from_rgb_[0]->backward(g);
  if (fwd_fade_) {
    Tensorf g_new = blocks_[fwd_stage_]->backward(scaled(g, static_cast<float>(fwd_alpha_)));
    Tensorf gi_new = from_rgb_[fwd_stage_]->backward(g_new);
    Tensorf g_old =
        from_rgb_[fwd_stage_ - 1]->backward(scaled(g, static_cast<float>(1.0 - fwd_alpha_)));
    Tensorf gi_old = old_path_down_.backward(g_old);
    return added(gi_new, gi_old);
  }
  Tensorf g_new = blocks_[fwd_stage_]->backward(g);
  return from_rgb_[fwd_stage_]->backward(g_new);
}

std::vector<nn::Parameter*> PganDiscriminator::params() {
  std::vector<nn::Parameter*> out;
  for (auto& f : from_rgb_) f->collect(out);
  for (auto& b : blocks_)
    if (b) b->collect(out);
  head_conv_.collect(out);
  head_fc_.collect(out);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Tensorf downsample_to(const Tensorf& img, int res) {
  Tensorf t = img.reshaped({1, img.dim(0), img.dim(1), img.dim(2)});
  nn::AvgPool2x2 pool;
  while (t.dim(2) > res) t = pool.forward(t);
  if (t.dim(2) != res) throw std::invalid_argument("pgan: image size not a multiple of stage res");
  return t.reshaped({t.dim(1), t.dim(2), t.dim(3)});
}

Checkpoint make_pgan_checkpoint(const PganConfig& cfg, PganGenerator& g, PganDiscriminator& d,
                                int64_t epoch, int64_t gs, int64_t ds) {
  Checkpoint ckpt;
  ckpt.kind = "pgan";
  ckpt.fingerprint = cfg.fingerprint();
  ckpt.meta = cfg.serialize();
  ckpt.epoch = epoch;
  ckpt.g_steps = gs;
  ckpt.d_steps = ds;
  for (nn::Parameter* p : g.params()) {
    ckpt.add(p->name, p->value);
    ckpt.add(p->name + ".adam_m", p->adam_m);
    ckpt.add(p->name + ".adam_v", p->adam_v);
  }
  for (nn::Parameter* p : d.params()) {
    ckpt.add(p->name, p->value);
    ckpt.add(p->name + ".adam_m", p->adam_m);
    ckpt.add(p->name + ".adam_v", p->adam_v);
  }
  return ckpt;
}

void load_params(const Checkpoint& ckpt, const std::vector<nn::Parameter*>& params) {
  for (nn::Parameter* p : params) {
    const Tensorf* v = ckpt.find(p->name);
    if (!v) throw std::runtime_error("pgan checkpoint missing parameter: " + p->name);
    if (!v->same_shape(p->value))
      throw std::runtime_error("pgan checkpoint shape mismatch for: " + p->name);
    p->value = *v;
    if (const Tensorf* m = ckpt.find(p->name + ".adam_m")) p->adam_m = *m;
    if (const Tensorf* av = ckpt.find(p->name + ".adam_v")) p->adam_v = *av;
  }
}

RGBImage to_image(const Tensorf& t, int batch_index) {
  const int c = t.dim(1), h = t.dim(2), w = t.dim(3);
  const float* base = t.data() + static_cast<int64_t>(batch_index) * c * h * w;
  RGBImage img(w, h);
  for (int cc = 0; cc < 3; ++cc)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float v = base[(static_cast<int64_t>(cc) * h + y) * w + x];
        img.at(y, x, cc) =
            static_cast<uint8_t>(std::clamp(std::round((v + 1.0f) * 127.5f), 0.0f, 255.0f));
      }
  return img;
}

}  // namespace

Checkpoint train_pgan(const PganConfig& cfg, const std::vector<LabeledImage>& dataset,
                      const std::string& metrics_path) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train_pgan: dataset is empty");
  for (const auto& s : dataset)
    if (s.image.ndim() != 3 || s.image.dim(0) != 3 ||
        s.image.dim(1) != cfg.schedule.target_res || s.image.dim(2) != cfg.schedule.target_res)
      throw std::invalid_argument("train_pgan: images must be (3, target_res, target_res)");

  nn::Rng rng(cfg.seed);
  PganGenerator gen(cfg, rng);
  PganDiscriminator dis(cfg, rng);
  nn::Adam opt_g(static_cast<float>(cfg.learning_rate), static_cast<float>(cfg.adam_beta1),
                 static_cast<float>(cfg.adam_beta2));
  nn::Adam opt_d(static_cast<float>(cfg.learning_rate), static_cast<float>(cfg.adam_beta1),
                 static_cast<float>(cfg.adam_beta2));
  opt_g.attach(gen.params());
  opt_d.attach(dis.params());

  std::ofstream metrics;
  if (!metrics_path.empty()) metrics.open(metrics_path, std::ios::app);

  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), size_t{0});

  int64_t global_epoch = 0;
  const int stages = cfg.schedule.num_stages();
  for (int stage = 0; stage < stages; ++stage) {
    const int res = cfg.schedule.stage_resolutions()[stage];
    std::vector<Tensorf> staged;
    staged.reserve(dataset.size());
    for (const auto& s : dataset) staged.push_back(downsample_to(s.image, res));

    const int stage_epochs = cfg.schedule.epochs_for_stage(stage);
    for (int e = 0; e < stage_epochs; ++e, ++global_epoch) {
      const double alpha = stage == 0 ? 1.0 : fade_alpha(e, cfg.schedule);
      std::shuffle(order.begin(), order.end(), rng);
      for (size_t i = 0; i < order.size(); i += cfg.batch_size) {
        const int bs = static_cast<int>(std::min<size_t>(cfg.batch_size, order.size() - i));
        Tensorf real({bs, 3, res, res});
        std::vector<ConditionLabel> labels(bs);
        for (int b = 0; b < bs; ++b) {
          const auto& src = staged[order[i + b]];
          std::copy(src.data(), src.data() + src.size(),
                    real.data() + static_cast<int64_t>(b) * src.size());
          labels[b] = dataset[order[i + b]].label;
        }
        Tensorf z({bs, cfg.latent_dim});
        for (int64_t j = 0; j < z.size(); ++j) z[j] = normal(rng);

        Tensorf fake = gen.forward(z, labels, stage, alpha);

        // LSGAN discriminator update.
        opt_d.zero_grad();
        Tensorf lr_ = dis.forward(real, labels, stage, alpha);
        double d_real = 0.5 * (lr_.array() - 1.0f).square().mean();
        dis.backward(Tensorf(lr_.shape(), (lr_.array() - 1.0f) / static_cast<float>(lr_.size())));
        Tensorf lf = dis.forward(fake, labels, stage, alpha);
        double d_fake = 0.5 * lf.array().square().mean();
        dis.backward(Tensorf(lf.shape(), lf.array() / static_cast<float>(lf.size())));
        if (!std::isfinite(d_real) || !std::isfinite(d_fake))
          throw TrainingDiverged("pgan discriminator loss is not finite");
        opt_d.step();

        // Generator update.
        opt_g.zero_grad();
        opt_d.zero_grad();
        Tensorf lg = dis.forward(fake, labels, stage, alpha);
        double g_gan = (lg.array() - 1.0f).square().mean();
        Tensorf gimg = dis.backward(
            Tensorf(lg.shape(), 2.0f * (lg.array() - 1.0f) / static_cast<float>(lg.size())));
        gen.backward(gimg);
        if (!std::isfinite(g_gan)) throw TrainingDiverged("pgan generator loss is not finite");
        opt_g.step();

        if (metrics.is_open())
          metrics << "{\"epoch\":" << global_epoch << ",\"stage\":" << stage
                  << ",\"res\":" << res << ",\"alpha\":" << alpha << ",\"g_gan\":" << g_gan
                  << ",\"d_real\":" << d_real << ",\"d_fake\":" << d_fake << "}\n";
      }
    }
  }

  Checkpoint ckpt =
      make_pgan_checkpoint(cfg, gen, dis, global_epoch - 1, opt_g.steps(), opt_d.steps());
  if (!cfg.checkpoint_dir.empty())
    save_checkpoint(cfg.checkpoint_dir + "/final.bin", ckpt);
  return ckpt;
}

std::vector<Tensorf> sample_pgan_tensors(const Checkpoint& ckpt, ConditionLabel label, int n,
                                         uint64_t seed) {
  if (ckpt.kind != "pgan") throw std::invalid_argument("sample_pgan: not a pgan checkpoint");
  if (n < 0) throw std::invalid_argument("sample_pgan: n must be >= 0");
  PganConfig cfg = PganConfig::deserialize(ckpt.meta);
  nn::Rng init_rng(cfg.seed);
  PganGenerator gen(cfg, init_rng);
  load_params(ckpt, gen.params());

  const int stage = cfg.schedule.num_stages() - 1;
  nn::Rng rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<Tensorf> out;
  out.reserve(n);
  int remaining = n;
  while (remaining > 0) {
    const int bs = std::min(remaining, 16);
    Tensorf z({bs, cfg.latent_dim});
    for (int64_t j = 0; j < z.size(); ++j) z[j] = normal(rng);
    std::vector<ConditionLabel> labels(bs, label);
    Tensorf imgs = gen.forward(z, labels, stage, 1.0);
    const int64_t per = imgs.size() / bs;
    for (int b = 0; b < bs; ++b) {
      Tensorf one({imgs.dim(1), imgs.dim(2), imgs.dim(3)});
      std::copy(imgs.data() + b * per, imgs.data() + (b + 1) * per, one.data());
      out.push_back(std::move(one));
    }
    remaining -= bs;
  }
  return out;
}

std::vector<RGBImage> sample_pgan(const Checkpoint& ckpt, ConditionLabel label, int n,
                                  uint64_t seed) {
  auto tensors = sample_pgan_tensors(ckpt, label, n, seed);
  std::vector<RGBImage> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors)
    out.push_back(to_image(t.reshaped({1, t.dim(0), t.dim(1), t.dim(2)}), 0));
  return out;
}

}  // namespace lesionsynth::proggan
