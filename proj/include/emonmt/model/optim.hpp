#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "emonmt/error.hpp"
#include "emonmt/model/loss.hpp"
#include "emonmt/model/params.hpp"
#include "emonmt/model/transformer.hpp"
#include "emonmt/random.hpp"

namespace emonmt {

/// One training pair as token ids. The target carries neither <sos> nor
/// <eos>; the decoder input is <sos> + target and the gold is target + <eos>.
struct Example {
  std::vector<int> source;
  std::vector<int> target;
};

inline std::vector<int> decoder_input(const Example& ex) {
  std::vector<int> in{kSosId};
  in.insert(in.end(), ex.target.begin(), ex.target.end());
  return in;
}

inline std::vector<int> decoder_gold(const Example& ex) {
  std::vector<int> gold(ex.target.begin(), ex.target.end());
  gold.push_back(kEosId);
  return gold;
}

template <typename Real>
struct BatchGradient {
  ModelParams<Real> grads;
  double loss_sum = 0;
  std::size_t tokens = 0;

  double mean_loss() const { return tokens == 0 ? 0.0 : loss_sum / static_cast<double>(tokens); }
};

template <typename Real>
bool all_finite(const ModelParams<Real>& params) {
  bool ok = true;
  for_each_tensor(params, [&](const std::string&, const Matrix<Real>& m) { ok = ok && m.allFinite(); });
  return ok;
}

/// Gradient of loss_scale * (token-mean smoothed loss over the batch).
/// Each example gets its own dropout stream derived from dropout_seed and
/// its position in the batch.
template <typename Real>
BatchGradient<Real> compute_gradients(const ModelParams<Real>& params, std::span<const Example> batch,
                                      double epsilon, Mode mode = Mode::Train,
                                      std::uint64_t dropout_seed = 0, double loss_scale = 1.0) {
  BatchGradient<Real> out{zeros_like(params), 0.0, 0};
  std::size_t total = 0;
  for (const auto& ex : batch) {
    for (int t : decoder_gold(ex)) total += t != kPadId;
  }
  if (total == 0) return out;
  const double scale = loss_scale / static_cast<double>(total);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto input = decoder_input(batch[i]);
    const auto gold = decoder_gold(batch[i]);
    SequencePass<Real> pass(params, mode, mix_seed(dropout_seed, i));
    const auto& logits = pass.run(batch[i].source, input);
    auto lg = label_smoothing_loss_and_grad(logits, gold, epsilon, scale);
    out.loss_sum += lg.loss_sum;
    out.tokens += lg.tokens;
    pass.backward(lg.dlogits, out.grads);
  }
  if (!all_finite(out.grads)) throw Error(Errc::NonFiniteGradient, "gradient contains NaN or Inf");
  return out;
}

/// Token-mean smoothed loss in eval mode (no dropout).
template <typename Real>
double evaluate_loss(const ModelParams<Real>& params, std::span<const Example> examples, double epsilon) {
  double sum = 0;
  std::size_t tokens = 0;
  for (const auto& ex : examples) {
    const auto input = decoder_input(ex);
    const auto gold = decoder_gold(ex);
    SequencePass<Real> pass(params, Mode::Eval);
    const auto lg = label_smoothing_loss_and_grad(pass.run(ex.source, input), gold, epsilon);
    sum += lg.loss_sum;
    tokens += lg.tokens;
  }
  return tokens == 0 ? 0.0 : sum / static_cast<double>(tokens);
}

template <typename Real>
double global_norm(const ModelParams<Real>& grads) {
  double sq = 0;
  for_each_tensor(grads, [&](const std::string&, const Matrix<Real>& m) {
    sq += m.template cast<double>().squaredNorm();
  });
  return std::sqrt(sq);
}

/// Rescales grads so their global L2 norm is at most max_norm (0 disables).
template <typename Real>
double clip_global_norm(ModelParams<Real>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0 && norm > max_norm) {
    const auto factor = static_cast<Real>(max_norm / norm);
    for_each_tensor(grads, [&](const std::string&, Matrix<Real>& m) { m *= factor; });
  }
  return norm;
}

/// Bias-corrected Adam moments.
template <typename Real>
class Adam {
 public:
  Adam(const ModelParams<Real>& like, double beta1, double beta2, double eps)
      : m_(zeros_like(like)), v_(zeros_like(like)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ModelParams<Real>& params, const ModelParams<Real>& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto p = tensor_list(params);
    auto g = tensor_list(grads);
    auto m = tensor_list(m_);
    auto v = tensor_list(v_);
    const auto b1 = static_cast<Real>(beta1_), b2 = static_cast<Real>(beta2_);
    const auto step_size = static_cast<Real>(lr / c1);
    const auto inv_c2 = static_cast<Real>(1.0 / c2);
    const auto eps = static_cast<Real>(eps_);
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto& mi = *m[i].second;
      auto& vi = *v[i].second;
      const auto& gi = *g[i].second;
      mi = b1 * mi + (Real(1) - b1) * gi;
      vi = b2 * vi + (Real(1) - b2) * gi.cwiseAbs2();
      p[i].second->array() -= step_size * mi.array() / ((vi.array() * inv_c2).sqrt() + eps);
    }
  }

  std::int64_t steps() const noexcept { return t_; }

 private:
  ModelParams<Real> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace emonmt
