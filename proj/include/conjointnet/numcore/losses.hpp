#pragma once

#include <cmath>
#include <string>

#include "conjointnet/numcore/matrix.hpp"

namespace conjointnet {

inline constexpr double kBceClamp = 1e-7;

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // d(loss)/d(prediction)
};

// Mean binary cross entropy on probabilities. Predictions are clamped to
// [eps, 1-eps]; outside that band the clamp is flat so the gradient is zero.
inline LossResult bce_loss(const Matrix& pred, const Matrix& target) {
  require_same_shape(pred, target, "bce_loss");
  if (pred.empty()) throw ShapeError("bce_loss: empty batch");
  const double n = static_cast<double>(pred.size());
  LossResult out{0.0, Matrix(pred.rows(), pred.cols())};
  const auto p = pred.data();
  const auto t = target.data();
  auto g = out.grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (t[i] != 0.0 && t[i] != 1.0)
      throw ValidationError("bce_loss: target value " + std::to_string(t[i]) + " not in {0,1}");
    const double pc = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    out.loss -= t[i] == 1.0 ? std::log(pc) : std::log(1.0 - pc);
    const bool inside = p[i] >= kBceClamp && p[i] <= 1.0 - kBceClamp;
    g[i] = inside ? (t[i] == 1.0 ? -1.0 / pc : 1.0 / (1.0 - pc)) / n : 0.0;
  }
  out.loss /= n;
  return out;
}

// Mean BCE taken directly on logits; the gradient is w.r.t. the logits.
// Used by the classifier trainers, where a saturated sigmoid would stall the clamped form.
inline LossResult bce_with_logits(const Matrix& logits, const Matrix& target) {
  require_same_shape(logits, target, "bce_with_logits");
  if (logits.empty()) throw ShapeError("bce_with_logits: empty batch");
  const double n = static_cast<double>(logits.size());
  LossResult out{0.0, Matrix(logits.rows(), logits.cols())};
  const auto z = logits.data();
  const auto t = target.data();
  auto g = out.grad.data();
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (t[i] != 0.0 && t[i] != 1.0)
      throw ValidationError("bce_with_logits: target value " + std::to_string(t[i]) + " not in {0,1}");
    out.loss += t[i] == 1.0 ? softplus(-z[i]) : softplus(z[i]);
    g[i] = (sigmoid(z[i]) - t[i]) / n;
  }
  out.loss /= n;
  return out;
}

enum class ReconKind { BCE, L1, L2 };

inline const char* to_string(ReconKind k) {
  switch (k) {
    case ReconKind::BCE: return "bce";
    case ReconKind::L1: return "l1";
    case ReconKind::L2: return "l2";
  }
  return "?";
}

inline ReconKind recon_kind_from_string(const std::string& s) {
  if (s == "bce" || s == "BCE") return ReconKind::BCE;
  if (s == "l1" || s == "L1") return ReconKind::L1;
  if (s == "l2" || s == "L2") return ReconKind::L2;
  throw ValidationError("unknown reconstruction loss '" + s + "'");
}

// Mean per-element reconstruction loss; grad is w.r.t. x_recon.
inline LossResult recon_loss(const Matrix& x, const Matrix& x_recon, ReconKind kind) {
  require_same_shape(x, x_recon, "recon_loss");
  if (x.empty()) throw ShapeError("recon_loss: empty batch");
  const double n = static_cast<double>(x.size());
  LossResult out{0.0, Matrix(x.rows(), x.cols())};
  const auto t = x.data();
  const auto p = x_recon.data();
  auto g = out.grad.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = p[i] - t[i];
    switch (kind) {
      case ReconKind::L1:
        out.loss += std::abs(d);
        g[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
        break;
      case ReconKind::L2:
        out.loss += d * d;
        g[i] = 2.0 * d / n;
        break;
      case ReconKind::BCE: {
        const double pc = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
        out.loss -= t[i] * std::log(pc) + (1.0 - t[i]) * std::log(1.0 - pc);
        const bool inside = p[i] >= kBceClamp && p[i] <= 1.0 - kBceClamp;
        g[i] = inside ? (-t[i] / pc + (1.0 - t[i]) / (1.0 - pc)) / n : 0.0;
        break;
      }
    }
  }
  out.loss /= n;
  return out;
}

struct KLResult {
  double loss = 0.0;
  Matrix grad_mu;
  Matrix grad_logvar;
};

// KL(N(mu, exp(logvar)) || N(0, I)), summed over latent dims, averaged over the batch.
inline KLResult kl_standard_normal(const Matrix& mu, const Matrix& logvar) {
  require_same_shape(mu, logvar, "kl_standard_normal");
  if (mu.rows() == 0) throw ShapeError("kl_standard_normal: empty batch");
  const double n = static_cast<double>(mu.rows());
  KLResult out{0.0, Matrix(mu.rows(), mu.cols()), Matrix(mu.rows(), mu.cols())};
  const auto m = mu.data();
  const auto lv = logvar.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double e = std::exp(lv[i]);
    out.loss += -0.5 * (1.0 + lv[i] - m[i] * m[i] - e);
    out.grad_mu.data()[i] = m[i] / n;
    out.grad_logvar.data()[i] = 0.5 * (e - 1.0) / n;
  }
  out.loss /= n;
  return out;
}

}  // namespace conjointnet
