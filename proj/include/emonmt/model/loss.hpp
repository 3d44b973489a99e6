#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "emonmt/bpe.hpp"
#include "emonmt/error.hpp"
#include "emonmt/model/params.hpp"

namespace emonmt {

template <typename Real>
struct LossAndGrad {
  double loss_sum = 0;        // summed over non-pad positions
  std::size_t tokens = 0;     // non-pad positions
  Matrix<Real> dlogits;       // d(scale * loss_sum) / d logits
};

/// Cross-entropy against the smoothed target: (1 - epsilon) on the gold
/// token, epsilon / (V - 1) on every other token. Positions whose gold id is
/// <pad> contribute nothing.
template <typename Real>
LossAndGrad<Real> label_smoothing_loss_and_grad(const Matrix<Real>& logits, std::span<const int> gold,
                                                double epsilon, double scale = 1.0) {
  if (static_cast<std::size_t>(logits.rows()) != gold.size()) {
    throw Error(Errc::LengthMismatch, "logits rows differ from gold length");
  }
  const auto vocab = logits.cols();
  if (vocab < 2) throw Error(Errc::InvalidConfig, "label smoothing needs at least two classes");
  const double off = epsilon / static_cast<double>(vocab - 1);
  const double on = 1.0 - epsilon;
  LossAndGrad<Real> out;
  out.dlogits = Matrix<Real>::Zero(logits.rows(), vocab);
  std::vector<double> logp(static_cast<std::size_t>(vocab));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int g = gold[static_cast<std::size_t>(r)];
    if (g == kPadId) continue;
    if (g < 0 || g >= vocab) throw Error(Errc::UnknownId, "gold id outside vocabulary");
    double max_logit = -INFINITY;
    for (Eigen::Index j = 0; j < vocab; ++j) max_logit = std::max(max_logit, double(logits(r, j)));
    double total = 0;
    for (Eigen::Index j = 0; j < vocab; ++j) total += std::exp(double(logits(r, j)) - max_logit);
    const double log_total = std::log(total) + max_logit;
    double sum_logp = 0;
    for (Eigen::Index j = 0; j < vocab; ++j) {
      logp[static_cast<std::size_t>(j)] = double(logits(r, j)) - log_total;
      sum_logp += logp[static_cast<std::size_t>(j)];
    }
    const double gold_logp = logp[static_cast<std::size_t>(g)];
    out.loss_sum += -(on * gold_logp + off * (sum_logp - gold_logp));
    ++out.tokens;
    for (Eigen::Index j = 0; j < vocab; ++j) {
      const double target = j == g ? on : off;
      out.dlogits(r, j) = static_cast<Real>(scale * (std::exp(logp[static_cast<std::size_t>(j)]) - target));
    }
  }
  return out;
}

/// Mean smoothed cross-entropy over non-pad positions.
template <typename Real>
double label_smoothing_loss(const Matrix<Real>& logits, std::span<const int> gold, double epsilon) {
  const auto r = label_smoothing_loss_and_grad(logits, gold, epsilon);
  return r.tokens == 0 ? 0.0 : r.loss_sum / static_cast<double>(r.tokens);
}

/// Entropy of the smoothed target distribution, the floor of the loss.
inline double smoothed_target_entropy(std::size_t vocab, double epsilon) {
  const double on = 1.0 - epsilon;
  const double off = epsilon / static_cast<double>(vocab - 1);
  double h = on > 0 ? -on * std::log(on) : 0.0;
  if (off > 0) h -= static_cast<double>(vocab - 1) * off * std::log(off);
  return h;
}

}  // namespace emonmt
