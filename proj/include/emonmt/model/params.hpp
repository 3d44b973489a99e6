#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "emonmt/model/config.hpp"
#include "emonmt/random.hpp"

namespace emonmt {

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// y = x * weight + bias, weight stored (in x out), bias (1 x out).
template <typename Real>
struct LinearParams {
  Matrix<Real> weight;
  Matrix<Real> bias;
};

template <typename Real>
struct LayerNormParams {
  Matrix<Real> gain;
  Matrix<Real> bias;
};

template <typename Real>
struct AttentionParams {
  LinearParams<Real> query, key, value, output;
};

template <typename Real>
struct FeedForwardParams {
  LinearParams<Real> hidden, output;
};

template <typename Real>
struct EncoderLayerParams {
  LayerNormParams<Real> attn_norm;
  AttentionParams<Real> self_attn;
  LayerNormParams<Real> ff_norm;
  FeedForwardParams<Real> ff;
};

template <typename Real>
struct DecoderLayerParams {
  LayerNormParams<Real> self_norm;
  AttentionParams<Real> self_attn;
  LayerNormParams<Real> cross_norm;
  AttentionParams<Real> cross_attn;
  LayerNormParams<Real> ff_norm;
  FeedForwardParams<Real> ff;
};

/// All trainable tensors of the encoder-decoder plus the fixed sinusoidal
/// position table (not trainable, not visited by for_each_tensor).
template <typename Real>
struct ModelParams {
  ModelConfig config;
  Matrix<Real> src_embedding;
  Matrix<Real> tgt_embedding;
  std::vector<EncoderLayerParams<Real>> encoder;
  LayerNormParams<Real> encoder_norm;
  std::vector<DecoderLayerParams<Real>> decoder;
  LayerNormParams<Real> decoder_norm;
  LinearParams<Real> generator;
  Matrix<Real> positions;
};

namespace detail {

template <typename L, typename F>
void visit_linear(L& lin, const std::string& name, F& fn) {
  fn(name + ".weight", lin.weight);
  fn(name + ".bias", lin.bias);
}

template <typename N, typename F>
void visit_norm(N& norm, const std::string& name, F& fn) {
  fn(name + ".gain", norm.gain);
  fn(name + ".bias", norm.bias);
}

template <typename A, typename F>
void visit_attention(A& attn, const std::string& name, F& fn) {
  visit_linear(attn.query, name + ".query", fn);
  visit_linear(attn.key, name + ".key", fn);
  visit_linear(attn.value, name + ".value", fn);
  visit_linear(attn.output, name + ".output", fn);
}

template <typename FF, typename F>
void visit_ff(FF& ff, const std::string& name, F& fn) {
  visit_linear(ff.hidden, name + ".hidden", fn);
  visit_linear(ff.output, name + ".output", fn);
}

}  // namespace detail

/// Calls fn(name, tensor) for every trainable tensor in a fixed order.
/// Works on const and mutable params alike.
template <typename P, typename F>
void for_each_tensor(P& p, F&& fn) {
  fn(std::string("src_embedding"), p.src_embedding);
  fn(std::string("tgt_embedding"), p.tgt_embedding);
  for (std::size_t i = 0; i < p.encoder.size(); ++i) {
    auto& layer = p.encoder[i];
    const std::string base = "encoder." + std::to_string(i);
    detail::visit_norm(layer.attn_norm, base + ".attn_norm", fn);
    detail::visit_attention(layer.self_attn, base + ".self_attn", fn);
    detail::visit_norm(layer.ff_norm, base + ".ff_norm", fn);
    detail::visit_ff(layer.ff, base + ".ff", fn);
  }
  detail::visit_norm(p.encoder_norm, "encoder_norm", fn);
  for (std::size_t i = 0; i < p.decoder.size(); ++i) {
    auto& layer = p.decoder[i];
    const std::string base = "decoder." + std::to_string(i);
    detail::visit_norm(layer.self_norm, base + ".self_norm", fn);
    detail::visit_attention(layer.self_attn, base + ".self_attn", fn);
    detail::visit_norm(layer.cross_norm, base + ".cross_norm", fn);
    detail::visit_attention(layer.cross_attn, base + ".cross_attn", fn);
    detail::visit_norm(layer.ff_norm, base + ".ff_norm", fn);
    detail::visit_ff(layer.ff, base + ".ff", fn);
  }
  detail::visit_norm(p.decoder_norm, "decoder_norm", fn);
  detail::visit_linear(p.generator, "generator", fn);
}

/// Flat list of (name, tensor pointer) in for_each_tensor order.
template <typename Real>
std::vector<std::pair<std::string, Matrix<Real>*>> tensor_list(ModelParams<Real>& p) {
  std::vector<std::pair<std::string, Matrix<Real>*>> out;
  for_each_tensor(p, [&](const std::string& name, Matrix<Real>& m) { out.emplace_back(name, &m); });
  return out;
}

template <typename Real>
std::vector<std::pair<std::string, const Matrix<Real>*>> tensor_list(const ModelParams<Real>& p) {
  std::vector<std::pair<std::string, const Matrix<Real>*>> out;
  for_each_tensor(p, [&](const std::string& name, const Matrix<Real>& m) {
    out.emplace_back(name, &m);
  });
  return out;
}

template <typename Real>
Matrix<Real> sinusoidal_positions(int max_len, int dim) {
  Matrix<Real> pe(max_len, dim);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
      pe(pos, i) = static_cast<Real>(std::sin(pos * freq));
      if (i + 1 < dim) pe(pos, i + 1) = static_cast<Real>(std::cos(pos * freq));
    }
  }
  return pe;
}

/// Allocates every tensor with the shapes dictated by the config, all zero.
template <typename Real>
ModelParams<Real> zero_params(const ModelConfig& config) {
  config.validate();
  const int d = config.model_dim, ff = config.ff_dim, v = config.vocab_size;
  auto linear = [](int in, int out) {
    return LinearParams<Real>{Matrix<Real>::Zero(in, out), Matrix<Real>::Zero(1, out)};
  };
  auto norm = [d] { return LayerNormParams<Real>{Matrix<Real>::Zero(1, d), Matrix<Real>::Zero(1, d)}; };
  auto attention = [&] {
    return AttentionParams<Real>{linear(d, d), linear(d, d), linear(d, d), linear(d, d)};
  };
  auto feed_forward = [&] { return FeedForwardParams<Real>{linear(d, ff), linear(ff, d)}; };

  ModelParams<Real> p;
  p.config = config;
  p.src_embedding = Matrix<Real>::Zero(v, d);
  p.tgt_embedding = Matrix<Real>::Zero(v, d);
  for (int i = 0; i < config.enc_layers; ++i) {
    p.encoder.push_back({norm(), attention(), norm(), feed_forward()});
  }
  p.encoder_norm = norm();
  for (int i = 0; i < config.dec_layers; ++i) {
    p.decoder.push_back({norm(), attention(), norm(), attention(), norm(), feed_forward()});
  }
  p.decoder_norm = norm();
  p.generator = linear(d, v);
  p.positions = sinusoidal_positions<Real>(config.max_len, d);
  return p;
}

template <typename Real>
ModelParams<Real> zeros_like(const ModelParams<Real>& params) {
  return zero_params<Real>(params.config);
}

/// Embedding entries are drawn U(-a, a) with variance 1/model_dim.
inline double embedding_init_variance(const ModelConfig& config) {
  return 1.0 / config.model_dim;
}

/// Deterministic given config.seed. Linear weights: Xavier-uniform;
/// embeddings: uniform with variance 1/model_dim; biases 0; norm gains 1.
template <typename Real>
ModelParams<Real> init_params(const ModelConfig& config) {
  ModelParams<Real> p = zero_params<Real>(config);
  Rng rng(mix_seed(config.seed, 0x1417));
  for_each_tensor(p, [&](const std::string& name, Matrix<Real>& m) {
    if (name.ends_with(".gain")) {
      m.setOnes();
    } else if (name.ends_with(".bias")) {
      m.setZero();
    } else {
      double bound = 0;
      if (name.ends_with("embedding")) {
        bound = std::sqrt(3.0 * embedding_init_variance(config));
      } else {
        bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      }
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<Real>(rng.uniform(-bound, bound));
      }
    }
  });
  return p;
}

template <typename Real>
std::size_t parameter_count(const ModelParams<Real>& params) {
  std::size_t n = 0;
  for_each_tensor(params, [&](const std::string&, const Matrix<Real>& m) {
    n += static_cast<std::size_t>(m.size());
  });
  return n;
}

/// Converts between scalar types (e.g. double checkpoints to float inference).
template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& from) {
  ModelParams<To> to = zero_params<To>(from.config);
  auto src = tensor_list(from);
  auto dst = tensor_list(to);
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<To>();
  return to;
}

}  // namespace emonmt
