#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "emonmt/model/optim.hpp"
#include "emonmt/model/params.hpp"
#include "emonmt/random.hpp"

namespace emonmt::testing {

struct GroupError {
  std::string name;
  double analytic_norm = 0;
  double numeric_norm = 0;
  double relative = 0;  // |a - n| / max(|a|, |n|), 0 when both vanish
};

inline constexpr double kGradNormFloor = 1e-5;

inline ModelConfig gradcheck_config() {
  ModelConfig c;
  c.enc_layers = 2;
  c.dec_layers = 2;
  c.heads = 2;
  c.model_dim = 8;
  c.ff_dim = 16;
  c.dropout = 0.1;
  c.max_len = 16;
  c.vocab_size = 14;
  c.seed = 17;
  return c;
}

/// Random batch over non-special ids; the first source ends in a pad so the
/// key mask is exercised.
inline std::vector<Example> gradcheck_batch(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Example> batch;
  for (int i = 0; i < 3; ++i) {
    Example ex;
    const auto src_len = 2 + rng.below(4);
    const auto tgt_len = 1 + rng.below(4);
    for (std::uint64_t j = 0; j < src_len; ++j) ex.source.push_back(4 + static_cast<int>(rng.below(c.vocab_size - 4)));
    for (std::uint64_t j = 0; j < tgt_len; ++j) ex.target.push_back(4 + static_cast<int>(rng.below(c.vocab_size - 4)));
    batch.push_back(std::move(ex));
  }
  batch.front().source.push_back(0);
  return batch;
}

/// Central differences over every scalar of every tensor, compared with the
/// analytic gradient of the token-mean loss under a fixed dropout stream.
inline std::vector<GroupError> gradient_check(const ModelParams<double>& params, std::span<const Example> batch,
                                              double epsilon, std::uint64_t dropout_seed, double step = 1e-6) {
  const auto analytic = compute_gradients(params, batch, epsilon, Mode::Train, dropout_seed).grads;
  ModelParams<double> probe = params;
  auto loss_at = [&] { return compute_gradients(probe, batch, epsilon, Mode::Train, dropout_seed).mean_loss(); };
  const auto a_list = tensor_list(analytic);
  auto p_list = tensor_list(probe);
  std::vector<GroupError> out;
  for (std::size_t t = 0; t < p_list.size(); ++t) {
    Matrix<double>& m = *p_list[t].second;
    const Matrix<double>& a = *a_list[t].second;
    Matrix<double> numeric(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + step;
      const double up = loss_at();
      m.data()[i] = saved - step;
      const double down = loss_at();
      m.data()[i] = saved;
      numeric.data()[i] = (up - down) / (2 * step);
    }
    GroupError e;
    e.name = p_list[t].first;
    e.analytic_norm = a.norm();
    e.numeric_norm = numeric.norm();
    // Groups whose true gradient is zero (key biases) only carry difference
    // round-off, so the denominator is floored well above that noise.
    const double scale = std::max({e.analytic_norm, e.numeric_norm, kGradNormFloor});
    e.relative = (a - numeric).norm() / scale;
    out.push_back(e);
  }
  return out;
}

}  // namespace emonmt::testing
