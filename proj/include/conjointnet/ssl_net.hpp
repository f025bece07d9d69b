#pragma once

#include <optional>
#include <string>
#include <vector>

#include "conjointnet/autoencoder.hpp"
#include "conjointnet/training.hpp"

namespace conjointnet {

enum class EncoderMode { Frozen, FineTune };

inline const char* to_string(EncoderMode m) { return m == EncoderMode::Frozen ? "frozen" : "finetune"; }

inline EncoderMode encoder_mode_from_string(const std::string& s) {
  if (s == "frozen" || s == "Frozen") return EncoderMode::Frozen;
  if (s == "finetune" || s == "FineTune" || s == "fine_tune") return EncoderMode::FineTune;
  throw ValidationError("unknown encoder mode '" + s + "'");
}

struct SSLConfig {
  std::vector<std::size_t> classifier_hidden_dims{64, 32};
  EncoderMode encoder_mode = EncoderMode::Frozen;
  std::size_t n_options = 2;
  // Encoder learning rate relative to the classifier's, FineTune mode only.
  double encoder_lr_scale = 0.1;
  // Adds (B, A, 1 - y) for every training pair.
  bool augment_swapped = false;
  // When set, build() rejects encoders with a different latent width.
  std::optional<std::size_t> expected_latent_dim;
};

inline nlohmann::json ssl_config_to_json(const SSLConfig& c) {
  nlohmann::json j{{"classifier_hidden_dims", c.classifier_hidden_dims},
                   {"encoder_mode", to_string(c.encoder_mode)},
                   {"n_options", c.n_options},
                   {"encoder_lr_scale", c.encoder_lr_scale},
                   {"augment_swapped", c.augment_swapped}};
  if (c.expected_latent_dim) j["latent_dim"] = *c.expected_latent_dim;
  return j;
}

inline SSLConfig ssl_config_from_json(const nlohmann::json& j, SSLConfig c = {}) {
  c.classifier_hidden_dims = j.value("classifier_hidden_dims", c.classifier_hidden_dims);
  if (j.contains("encoder_mode")) c.encoder_mode = encoder_mode_from_string(j.at("encoder_mode").get<std::string>());
  c.n_options = j.value("n_options", c.n_options);
  c.encoder_lr_scale = j.value("encoder_lr_scale", c.encoder_lr_scale);
  c.augment_swapped = j.value("augment_swapped", c.augment_swapped);
  if (j.contains("latent_dim") && !j.at("latent_dim").is_null())
    c.expected_latent_dim = j.at("latent_dim").get<std::size_t>();
  return c;
}

struct ChoicePrediction {
  double score = 0.0;  // P(first option chosen)
  int label = 0;       // score >= 0.5
};

// Pretrained encoder applied to every option, latent codes concatenated, then
// an MLP classifier ending in one logit (sigmoid head).
class SSLNet {
 public:
  static SSLNet build(const SSLConfig& config, const AutoEncoder& pretrained, Rng& rng) {
    if (config.n_options == 0) throw ValidationError("n_options must be positive");
    const std::size_t latent = pretrained.config().latent_dim;
    if (config.expected_latent_dim && *config.expected_latent_dim != latent)
      throw ValidationError("encoder latent_dim " + std::to_string(latent) + " != configured " +
                            std::to_string(*config.expected_latent_dim));
    SSLNet net;
    net.config_ = config;
    net.encoder_ = pretrained.embedding();
    net.classifier_ = make_mlp(config.n_options * latent, config.classifier_hidden_dims, 1, rng);
    net.apply_encoder_mode();
    return net;
  }

  const SSLConfig& config() const { return config_; }
  std::size_t latent_dim() const { return encoder_.out_dim(); }
  std::size_t input_dim() const { return encoder_.in_dim(); }
  std::size_t classifier_input_dim() const { return classifier_.in_dim(); }
  const Sequential& encoder() const { return encoder_; }
  const Sequential& classifier() const { return classifier_; }

  // One logit per row: P(option 0 chosen) = sigmoid(logit).
  Matrix logits(const ChoiceBatch& batch) const {
    check(batch);
    std::vector<Matrix> codes;
    for (const auto& opt : batch.options) codes.push_back(encoder_.infer(opt));
    return classifier_.infer(hstack(codes));
  }

  double train_step(const ChoiceBatch& batch) { return objective(batch, true); }

  // Forward/backward on a batch. All options go through the encoder as one
  // stacked batch so a single cache serves the backward pass.
  double objective(const ChoiceBatch& batch, bool accumulate) {
    check(batch);
    const std::size_t n = batch.size();
    const std::size_t k = batch.option_count();
    const std::size_t latent = latent_dim();
    const bool tune = config_.encoder_mode == EncoderMode::FineTune;
    const Matrix stacked = vstack(batch.options);
    const Matrix codes = tune ? encoder_.forward(stacked, Mode::Train) : encoder_.infer(stacked);
    std::vector<Matrix> per_option;
    for (std::size_t o = 0; o < k; ++o) per_option.push_back(slice_rows(codes, o * n, n));
    const Matrix logit = classifier_.forward(hstack(per_option), Mode::Train);
    const LossResult loss = bce_with_logits(logit, batch.target_matrix());
    if (!accumulate) {
      classifier_.reset_caches();
      encoder_.reset_caches();
      return loss.loss;
    }
    const Matrix dinput = classifier_.backward(loss.grad);
    if (tune) {
      std::vector<Matrix> dcodes;
      for (std::size_t o = 0; o < k; ++o) dcodes.push_back(slice_cols(dinput, o * latent, latent));
      encoder_.backward(vstack(dcodes));
    }
    return loss.loss;
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out = encoder_.parameters();
    for (auto* p : classifier_.parameters()) out.push_back(p);
    return out;
  }

  std::vector<ChoicePrediction> predict(const ChoiceBatch& batch) const {
    std::vector<ChoicePrediction> out;
    for (double s : sigmoid_scores(logits(batch))) out.push_back({s, s >= 0.5 ? 1 : 0});
    return out;
  }

  ChoicePrediction predict(const ItemVector& a, const ItemVector& b, const AttributeSchema& schema) const {
    ChoiceBatch batch{{Matrix::row_vector(a.one_hot(schema)), Matrix::row_vector(b.one_hot(schema))}, {0}};
    return predict(batch).front();
  }

  nlohmann::json to_json() const {
    return {{"config", ssl_config_to_json(config_)},
            {"encoder", network_to_json(encoder_)},
            {"classifier", network_to_json(classifier_)}};
  }

  static SSLNet from_json(const nlohmann::json& j) {
    SSLNet net;
    net.config_ = ssl_config_from_json(j.at("config"));
    net.encoder_ = network_from_json(j.at("encoder"));
    net.classifier_ = network_from_json(j.at("classifier"));
    if (net.classifier_.in_dim() != net.config_.n_options * net.encoder_.out_dim())
      throw ShapeError("SSL checkpoint: classifier input width disagrees with n_options x latent_dim");
    net.apply_encoder_mode();
    return net;
  }

 private:
  SSLNet() = default;

  void apply_encoder_mode() {
    encoder_.set_frozen(config_.encoder_mode == EncoderMode::Frozen);
    encoder_.set_lr_scale(config_.encoder_mode == EncoderMode::FineTune ? config_.encoder_lr_scale : 1.0);
  }

  void check(const ChoiceBatch& batch) const {
    if (batch.option_count() != config_.n_options)
      throw ShapeError("SSL model expects " + std::to_string(config_.n_options) + " options, got " +
                       std::to_string(batch.option_count()));
    for (const auto& m : batch.options) {
      if (m.cols() != input_dim())
        throw ShapeError("SSL model: option width " + std::to_string(m.cols()) + " != " + std::to_string(input_dim()));
      if (m.rows() != batch.size()) throw ShapeError("SSL model: option rows disagree with target count");
    }
  }

  SSLConfig config_;
  Sequential encoder_;
  Sequential classifier_;
};

inline TrainReport train_ssl(SSLNet& model, const ChoiceBatch& train, const ChoiceBatch& val, const TrainConfig& config) {
  if (train.size() == 0) throw ValidationError("train_ssl: no labeled pairs");
  if (config.max_epochs > 100) throw ValidationError("train_ssl: max_epochs is capped at 100");
  if (!model.config().augment_swapped) return train_classifier(model, train, val, config, "ssl");
  ChoiceBatch augmented = train;
  augmented.append(train.swapped());
  return train_classifier(model, augmented, val, config, "ssl");
}

}  // namespace conjointnet
