#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "conjointnet/conjoint/schema.hpp"
#include "conjointnet/numcore/gradcheck.hpp"
#include "conjointnet/numcore/losses.hpp"
#include "conjointnet/numcore/network.hpp"
#include "conjointnet/numcore/optimizer.hpp"
#include "conjointnet/numcore/serialize.hpp"
#include "conjointnet/training.hpp"

namespace conjointnet {

enum class AEVariant { AE, VAE };

inline const char* to_string(AEVariant v) { return v == AEVariant::AE ? "ae" : "vae"; }

inline AEVariant ae_variant_from_string(const std::string& s) {
  if (s == "ae" || s == "AE") return AEVariant::AE;
  if (s == "vae" || s == "VAE") return AEVariant::VAE;
  throw ValidationError("unknown autoencoder variant '" + s + "'");
}

struct AEConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims{128};
  std::size_t latent_dim = 2;
  AEVariant variant = AEVariant::AE;
  ReconKind recon = ReconKind::BCE;
  double kl_weight = 1.0;
  bool batch_norm = true;
  // Attribute block widths of the one-hot input; enables argmax reconstruction accuracy.
  std::vector<std::size_t> blocks;

  void validate() const {
    if (input_dim == 0) throw ValidationError("autoencoder input_dim must be positive");
    if (latent_dim == 0 || latent_dim >= input_dim)
      throw ValidationError("autoencoder latent_dim must be in [1, input_dim)");
    for (std::size_t h : hidden_dims)
      if (h == 0) throw ValidationError("autoencoder hidden widths must be positive");
    if (kl_weight < 0.0) throw ValidationError("kl_weight must be non-negative");
    if (!blocks.empty()) {
      std::size_t total = 0;
      for (std::size_t b : blocks) total += b;
      if (total != input_dim) throw ValidationError("autoencoder block widths do not sum to input_dim");
    }
  }
};

inline nlohmann::json ae_config_to_json(const AEConfig& c) {
  return {{"input_dim", c.input_dim},   {"hidden_dims", c.hidden_dims}, {"latent_dim", c.latent_dim},
          {"variant", to_string(c.variant)}, {"recon", to_string(c.recon)},   {"kl_weight", c.kl_weight},
          {"batch_norm", c.batch_norm}, {"blocks", c.blocks}};
}

inline AEConfig ae_config_from_json(const nlohmann::json& j, AEConfig c = {}) {
  c.input_dim = j.value("input_dim", c.input_dim);
  c.hidden_dims = j.value("hidden_dims", c.hidden_dims);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  if (j.contains("variant")) c.variant = ae_variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("recon")) c.recon = recon_kind_from_string(j.at("recon").get<std::string>());
  c.kl_weight = j.value("kl_weight", c.kl_weight);
  c.batch_norm = j.value("batch_norm", c.batch_norm);
  c.blocks = j.value("blocks", c.blocks);
  return c;
}

struct LatentCode {
  Matrix z;
  Matrix mu;      // VAE only
  Matrix logvar;  // VAE only
};

// Fraction of (row, attribute block) pairs whose argmax matches between x and x_recon.
inline double reconstruction_accuracy(const Matrix& x, const Matrix& x_recon, std::span<const std::size_t> blocks) {
  require_same_shape(x, x_recon, "reconstruction_accuracy");
  if (blocks.empty() || x.rows() == 0) return std::numeric_limits<double>::quiet_NaN();
  std::size_t hits = 0, total = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::size_t offset = 0;
    for (std::size_t b : blocks) {
      const auto xs = x.row(r).subspan(offset, b);
      const auto rs = x_recon.row(r).subspan(offset, b);
      const auto xa = std::max_element(xs.begin(), xs.end()) - xs.begin();
      const auto ra = std::max_element(rs.begin(), rs.end()) - rs.begin();
      hits += xa == ra ? 1 : 0;
      ++total;
      offset += b;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

// Symmetric encoder/decoder over one-hot items. Encoder blocks are
// Dense -> BatchNorm -> ReLU, then a linear bottleneck (two heads, mu and
// logvar, for the VAE). The decoder mirrors the hidden widths with Dense -> ReLU
// and ends in Dense -> Sigmoid.
class AutoEncoder {
 public:
  AutoEncoder(AEConfig config, Rng& rng) : config_(std::move(config)) {
    config_.validate();
    std::size_t width = config_.input_dim;
    for (std::size_t h : config_.hidden_dims) {
      trunk_.add(Dense(width, h, rng));
      if (config_.batch_norm) trunk_.add(BatchNorm(h));
      trunk_.add(ReLU(h));
      width = h;
    }
    mu_head_.add(Dense(width, config_.latent_dim, rng));
    if (config_.variant == AEVariant::VAE) logvar_head_.add(Dense(width, config_.latent_dim, rng));
    width = config_.latent_dim;
    for (auto it = config_.hidden_dims.rbegin(); it != config_.hidden_dims.rend(); ++it) {
      decoder_.add(Dense(width, *it, rng));
      decoder_.add(ReLU(*it));
      width = *it;
    }
    decoder_.add(Dense(width, config_.input_dim, rng));
    decoder_.add(Sigmoid(config_.input_dim));
  }

  const AEConfig& config() const { return config_; }
  const Sequential& trunk() const { return trunk_; }
  const Sequential& decoder() const { return decoder_; }
  Sequential& decoder() { return decoder_; }

  std::vector<std::size_t> encoder_widths() const {
    std::vector<std::size_t> out{config_.input_dim};
    out.insert(out.end(), config_.hidden_dims.begin(), config_.hidden_dims.end());
    out.push_back(config_.latent_dim);
    return out;
  }

  std::vector<std::size_t> decoder_widths() const {
    std::vector<std::size_t> out{config_.latent_dim};
    for (const auto& s : decoder_.specs())
      if (s.kind == LayerKind::Dense) out.push_back(s.out_dim);
    return out;
  }

  // Deterministic encoding (z = mu for the VAE).
  LatentCode encode(const Matrix& x) const {
    check_input(x);
    const Matrix h = trunk_.infer(x);
    LatentCode code;
    code.z = mu_head_.infer(h);
    if (is_vae()) {
      code.mu = code.z;
      code.logvar = logvar_head_.infer(h);
    }
    return code;
  }

  // Train mode caches for backward; the VAE samples z = mu + exp(logvar/2) * eps.
  LatentCode encode(const Matrix& x, Mode mode, Rng* noise = nullptr) {
    if (mode == Mode::Infer) return encode(x);
    check_input(x);
    const Matrix h = trunk_.forward(x, Mode::Train);
    LatentCode code;
    if (!is_vae()) {
      code.z = mu_head_.forward(h, Mode::Train);
      return code;
    }
    if (noise == nullptr) throw ProtocolError("VAE Train-mode encode needs a noise generator");
    code.mu = mu_head_.forward(h, Mode::Train);
    code.logvar = logvar_head_.forward(h, Mode::Train);
    eps_ = Matrix(code.mu.rows(), code.mu.cols());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& e : eps_.data()) e = normal(*noise);
    code.z = code.mu;
    for (std::size_t i = 0; i < code.z.size(); ++i)
      code.z.data()[i] += std::exp(0.5 * code.logvar.data()[i]) * eps_.data()[i];
    return code;
  }

  Matrix decode(const Matrix& z) const {
    if (z.cols() != config_.latent_dim)
      throw ShapeError("decode: latent width " + std::to_string(z.cols()) + " != " + std::to_string(config_.latent_dim));
    return decoder_.infer(z);
  }

  Matrix reconstruct(const Matrix& x) const { return decode(encode(x).z); }

  // Loss on x (Infer mode): reconstruction plus kl_weight * KL for the VAE.
  double eval_loss(const Matrix& x, bool include_kl = true) const {
    const LatentCode code = encode(x);
    double loss = recon_loss(x, decode(code.z), config_.recon).loss;
    if (is_vae() && include_kl) loss += config_.kl_weight * kl_standard_normal(code.mu, code.logvar).loss;
    return loss;
  }

  // Forward + backward on one batch; gradients are added to the parameters.
  double train_step(const Matrix& x, Rng& noise) { return objective(x, noise, true); }

  double objective(const Matrix& x, Rng& noise, bool accumulate) {
    const LatentCode code = encode(x, Mode::Train, &noise);
    const Matrix x_recon = decoder_.forward(code.z, Mode::Train);
    const LossResult rec = recon_loss(x, x_recon, config_.recon);
    double loss = rec.loss;
    std::optional<KLResult> kl;
    if (is_vae()) {
      kl = kl_standard_normal(code.mu, code.logvar);
      loss += config_.kl_weight * kl->loss;
    }
    if (!accumulate) {
      clear_caches();
      return loss;
    }
    const Matrix dz = decoder_.backward(rec.grad);
    if (!is_vae()) {
      trunk_.backward(mu_head_.backward(dz));
      return loss;
    }
    Matrix dmu = dz;
    Matrix dlogvar(dz.rows(), dz.cols());
    for (std::size_t i = 0; i < dz.size(); ++i) {
      dmu.data()[i] += config_.kl_weight * kl->grad_mu.data()[i];
      dlogvar.data()[i] = dz.data()[i] * eps_.data()[i] * 0.5 * std::exp(0.5 * code.logvar.data()[i]) +
                          config_.kl_weight * kl->grad_logvar.data()[i];
    }
    Matrix dh = mu_head_.backward(dmu);
    const Matrix dh2 = logvar_head_.backward(dlogvar);
    for (std::size_t i = 0; i < dh.size(); ++i) dh.data()[i] += dh2.data()[i];
    trunk_.backward(dh);
    return loss;
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out = trunk_.parameters();
    for (auto* p : mu_head_.parameters()) out.push_back(p);
    for (auto* p : logvar_head_.parameters()) out.push_back(p);
    for (auto* p : decoder_.parameters()) out.push_back(p);
    return out;
  }

  // The encoder as a standalone network producing z (AE) or mu (VAE).
  Sequential embedding() const {
    std::vector<Layer> layers = trunk_.layers();
    layers.push_back(mu_head_.layers().front());
    return Sequential(std::move(layers));
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"config", ae_config_to_json(config_)},
                     {"trunk", network_to_json(trunk_)},
                     {"mu_head", network_to_json(mu_head_)},
                     {"decoder", network_to_json(decoder_)}};
    if (is_vae()) j["logvar_head"] = network_to_json(logvar_head_);
    return j;
  }

  static AutoEncoder from_json(const nlohmann::json& j) {
    AutoEncoder ae(ae_config_from_json(j.at("config")));
    ae.trunk_ = network_from_json(j.at("trunk"));
    ae.mu_head_ = network_from_json(j.at("mu_head"));
    if (ae.is_vae()) ae.logvar_head_ = network_from_json(j.at("logvar_head"));
    ae.decoder_ = network_from_json(j.at("decoder"));
    if (ae.decoder_.out_dim() != ae.config_.input_dim || ae.mu_head_.out_dim() != ae.config_.latent_dim)
      throw ShapeError("autoencoder checkpoint dims disagree with its config");
    return ae;
  }

 private:
  explicit AutoEncoder(AEConfig config) : config_(std::move(config)) { config_.validate(); }

  bool is_vae() const { return config_.variant == AEVariant::VAE; }

  void check_input(const Matrix& x) const {
    if (x.cols() != config_.input_dim)
      throw ShapeError("encode: input width " + std::to_string(x.cols()) + " != " + std::to_string(config_.input_dim));
  }

  void clear_caches() {
    trunk_.reset_caches();
    mu_head_.reset_caches();
    logvar_head_.reset_caches();
    decoder_.reset_caches();
  }

  AEConfig config_;
  Sequential trunk_;
  Sequential mu_head_;
  Sequential logvar_head_;
  Sequential decoder_;
  Matrix eps_;
};

struct AETrainConfig {
  TrainConfig train;
  double val_fraction = 0.1;
};

// Minimizes reconstruction loss (plus weighted KL for the VAE) with Adam/SGD and
// keeps the epoch with the lowest validation reconstruction loss.
inline TrainReport train_ae(AutoEncoder& model, const Matrix& data, const AETrainConfig& config) {
  if (data.rows() == 0) throw ValidationError("train_ae: no data");
  if (config.val_fraction < 0.0 || config.val_fraction >= 1.0) throw ValidationError("val_fraction must be in [0,1)");
  Rng rng(config.train.seed);
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(config.val_fraction * static_cast<double>(data.rows())));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  const Matrix train = take_rows(data, train_idx);
  const Matrix val = take_rows(data, val_idx);
  const auto& blocks = model.config().blocks;

  Optimizer optimizer(config.train.optimizer);
  for (auto* p : model.parameters()) p->zero_grad();
  TrainReport report;
  report.model = model.config().variant == AEVariant::VAE ? "vae" : "ae";
  report.selection = n_val > 0 ? "val_loss" : "final";
  std::optional<AutoEncoder> best;
  double best_loss = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.train.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& idx : epoch_batches(train.rows(), config.train.batch_size, rng)) {
      const double loss = model.train_step(take_rows(train, idx), rng);
      if (!std::isfinite(loss))
        throw NumericError("autoencoder: non-finite loss at epoch " + std::to_string(epoch));
      loss_sum += loss * static_cast<double>(idx.size());
      auto params = model.parameters();
      optimizer.step(params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.rows());
    rec.train_accuracy = reconstruction_accuracy(train, model.reconstruct(train), blocks);
    if (n_val > 0) {
      rec.val_loss = model.eval_loss(val, false);
      rec.val_accuracy = reconstruction_accuracy(val, model.reconstruct(val), blocks);
      if (!std::isfinite(rec.val_loss))
        throw NumericError("autoencoder: non-finite validation loss at epoch " + std::to_string(epoch));
      if (rec.val_loss < best_loss) {
        best_loss = rec.val_loss;
        best = model;
        report.best_epoch = epoch;
      }
    }
    report.history.push_back(rec);
  }
  if (best) {
    model = std::move(*best);
  } else {
    report.best_epoch = config.train.max_epochs;
  }
  report.finalize_trend();
  return report;
}

struct ReconstructionRow {
  std::size_t dim_index = 0;
  std::string attribute;
  std::string level;
  double original = 0.0;
  double reconstructed = 0.0;
};

// Per-dimension original vs reconstructed values for one item, grouped by attribute block.
inline std::vector<ReconstructionRow> reconstruction_dump(const AutoEncoder& model, const AttributeSchema& schema,
                                                          const ItemVector& item) {
  if (schema.width() != model.config().input_dim) throw ShapeError("reconstruction_dump: schema width mismatch");
  const auto x = item.one_hot(schema);
  const Matrix recon = model.reconstruct(Matrix::row_vector(x));
  std::vector<ReconstructionRow> rows;
  for (std::size_t i = 0; i < schema.attribute_count(); ++i)
    for (std::size_t j = 0; j < schema.level_count(i); ++j) {
      const std::size_t d = schema.offset(i) + j;
      rows.push_back({d, schema.attribute(i).name, schema.attribute(i).levels[j], x[d], recon(0, d)});
    }
  return rows;
}

inline void write_reconstruction_csv(std::ostream& os, const std::vector<ReconstructionRow>& rows) {
  os << "dim_index,attribute,level,original,reconstructed\n" << std::setprecision(17);
  for (const auto& r : rows)
    os << r.dim_index << ',' << r.attribute << ',' << r.level << ',' << r.original << ',' << r.reconstructed << '\n';
}

}  // namespace conjointnet
