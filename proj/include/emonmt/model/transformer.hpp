#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "emonmt/bpe.hpp"
#include "emonmt/error.hpp"
#include "emonmt/model/params.hpp"
#include "emonmt/random.hpp"

namespace emonmt {

enum class Mode { Train, Eval };

namespace detail {

template <typename Real>
using Column = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

template <typename Real>
Matrix<Real> linear_forward(const LinearParams<Real>& p, const Matrix<Real>& x) {
  Matrix<Real> y = x * p.weight;
  y.rowwise() += p.bias.row(0);
  return y;
}

/// Accumulates weight/bias gradients into g and returns dL/dx.
template <typename Real>
Matrix<Real> linear_backward(const LinearParams<Real>& p, const Matrix<Real>& x,
                             const Matrix<Real>& dy, LinearParams<Real>& g) {
  g.weight.noalias() += x.transpose() * dy;
  g.bias += dy.colwise().sum();
  return dy * p.weight.transpose();
}

template <typename Real>
struct NormCache {
  Matrix<Real> normalized;
  Column<Real> inv_std;
};

inline constexpr double kNormEps = 1e-5;

template <typename Real>
Matrix<Real> norm_forward(const LayerNormParams<Real>& p, const Matrix<Real>& x, NormCache<Real>& c) {
  const auto rows = x.rows();
  const auto cols = static_cast<Real>(x.cols());
  c.normalized.resize(rows, x.cols());
  c.inv_std.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Real mean = x.row(r).sum() / cols;
    const auto centered = x.row(r).array() - mean;
    const Real var = centered.square().sum() / cols;
    const Real inv = Real(1) / std::sqrt(var + static_cast<Real>(kNormEps));
    c.inv_std(r) = inv;
    c.normalized.row(r) = centered * inv;
  }
  Matrix<Real> y = c.normalized.array().rowwise() * p.gain.row(0).array();
  y.rowwise() += p.bias.row(0);
  return y;
}

template <typename Real>
Matrix<Real> norm_backward(const LayerNormParams<Real>& p, const NormCache<Real>& c,
                           const Matrix<Real>& dy, LayerNormParams<Real>& g) {
  g.gain += (dy.array() * c.normalized.array()).colwise().sum().matrix();
  g.bias += dy.colwise().sum();
  const Matrix<Real> dxhat = dy.array().rowwise() * p.gain.row(0).array();
  const auto cols = static_cast<Real>(dy.cols());
  Matrix<Real> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const Real mean_d = dxhat.row(r).sum() / cols;
    const Real mean_dx = (dxhat.row(r).array() * c.normalized.row(r).array()).sum() / cols;
    dx.row(r) = c.inv_std(r) *
                (dxhat.row(r).array() - mean_d - c.normalized.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

/// Inverted dropout; an inactive mask is the identity.
template <typename Real>
struct Dropout {
  Matrix<Real> mask;
  bool active = false;

  void sample(Eigen::Index rows, Eigen::Index cols, double rate, Rng* rng) {
    active = rng != nullptr && rate > 0.0;
    if (!active) return;
    mask.resize(rows, cols);
    const Real keep = static_cast<Real>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      mask.data()[i] = rng->uniform() < rate ? Real(0) : keep;
    }
  }

  Matrix<Real> apply(const Matrix<Real>& x) const {
    if (!active) return x;
    return x.cwiseProduct(mask);
  }
};

template <typename Real>
struct AttentionCache {
  Matrix<Real> query_in, kv_in;
  Matrix<Real> q, k, v, context;
  std::vector<Matrix<Real>> probs;  // one (Lq x Lk) map per head
};

/// Multi-head scaled dot-product attention. key_mask[j] == 0 hides key j;
/// causal additionally hides keys j > i for query i.
template <typename Real>
Matrix<Real> attention_forward(const AttentionParams<Real>& p, const Matrix<Real>& query_in,
                               const Matrix<Real>& kv_in, std::span<const char> key_mask,
                               bool causal, int heads, AttentionCache<Real>& c) {
  c.query_in = query_in;
  c.kv_in = kv_in;
  c.q = linear_forward(p.query, query_in);
  c.k = linear_forward(p.key, kv_in);
  c.v = linear_forward(p.value, kv_in);
  const auto lq = query_in.rows();
  const auto lk = kv_in.rows();
  const auto dk = c.q.cols() / heads;
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dk));
  c.context.resize(lq, c.q.cols());
  c.probs.resize(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Matrix<Real>& prob = c.probs[static_cast<std::size_t>(h)];
    prob.noalias() = (c.q.middleCols(h * dk, dk) * c.k.middleCols(h * dk, dk).transpose()) * scale;
    for (Eigen::Index i = 0; i < lq; ++i) {
      Real max_score = -std::numeric_limits<Real>::infinity();
      for (Eigen::Index j = 0; j < lk; ++j) {
        const bool visible = key_mask[static_cast<std::size_t>(j)] && (!causal || j <= i);
        if (visible) max_score = std::max(max_score, prob(i, j));
      }
      Real total = 0;
      for (Eigen::Index j = 0; j < lk; ++j) {
        const bool visible = key_mask[static_cast<std::size_t>(j)] && (!causal || j <= i);
        const Real e = visible ? std::exp(prob(i, j) - max_score) : Real(0);
        prob(i, j) = e;
        total += e;
      }
      prob.row(i) /= total;
    }
    c.context.middleCols(h * dk, dk).noalias() = prob * c.v.middleCols(h * dk, dk);
  }
  return linear_forward(p.output, c.context);
}

/// Returns (dL/dquery_in, dL/dkv_in).
template <typename Real>
std::pair<Matrix<Real>, Matrix<Real>> attention_backward(const AttentionParams<Real>& p,
                                                         const AttentionCache<Real>& c,
                                                         const Matrix<Real>& dout, int heads,
                                                         AttentionParams<Real>& g) {
  const Matrix<Real> dcontext = linear_backward(p.output, c.context, dout, g.output);
  const auto dk = c.q.cols() / heads;
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dk));
  Matrix<Real> dq(c.q.rows(), c.q.cols());
  Matrix<Real> dkey(c.k.rows(), c.k.cols());
  Matrix<Real> dv(c.v.rows(), c.v.cols());
  for (int h = 0; h < heads; ++h) {
    const Matrix<Real>& prob = c.probs[static_cast<std::size_t>(h)];
    const auto dctx = dcontext.middleCols(h * dk, dk);
    Matrix<Real> dprob = dctx * c.v.middleCols(h * dk, dk).transpose();
    dv.middleCols(h * dk, dk).noalias() = prob.transpose() * dctx;
    for (Eigen::Index i = 0; i < dprob.rows(); ++i) {
      const Real dot = (dprob.row(i).array() * prob.row(i).array()).sum();
      dprob.row(i) = (prob.row(i).array() * (dprob.row(i).array() - dot)).matrix() * scale;
    }
    dq.middleCols(h * dk, dk).noalias() = dprob * c.k.middleCols(h * dk, dk);
    dkey.middleCols(h * dk, dk).noalias() = dprob.transpose() * c.q.middleCols(h * dk, dk);
  }
  Matrix<Real> dquery_in = linear_backward(p.query, c.query_in, dq, g.query);
  Matrix<Real> dkv_in = linear_backward(p.key, c.kv_in, dkey, g.key);
  dkv_in += linear_backward(p.value, c.kv_in, dv, g.value);
  return {std::move(dquery_in), std::move(dkv_in)};
}

template <typename Real>
struct FeedForwardCache {
  Matrix<Real> input, pre, act;
};

template <typename Real>
Matrix<Real> ff_forward(const FeedForwardParams<Real>& p, const Matrix<Real>& x, FeedForwardCache<Real>& c) {
  c.input = x;
  c.pre = linear_forward(p.hidden, x);
  c.act = c.pre.cwiseMax(Real(0));
  return linear_forward(p.output, c.act);
}

template <typename Real>
Matrix<Real> ff_backward(const FeedForwardParams<Real>& p, const FeedForwardCache<Real>& c,
                         const Matrix<Real>& dy, FeedForwardParams<Real>& g) {
  Matrix<Real> dact = linear_backward(p.output, c.act, dy, g.output);
  dact = (c.pre.array() > Real(0)).select(dact, Real(0));
  return linear_backward(p.hidden, c.input, dact, g.hidden);
}

template <typename Real>
struct EncoderLayerCache {
  NormCache<Real> attn_norm, ff_norm;
  AttentionCache<Real> attn;
  FeedForwardCache<Real> ff;
  Dropout<Real> attn_drop, ff_drop;
};

template <typename Real>
struct DecoderLayerCache {
  NormCache<Real> self_norm, cross_norm, ff_norm;
  AttentionCache<Real> self_attn, cross_attn;
  FeedForwardCache<Real> ff;
  Dropout<Real> self_drop, cross_drop, ff_drop;
};

}  // namespace detail

/// One sequence pair through the encoder-decoder, keeping every intermediate
/// needed for backward(). Pre-norm residual blocks with final norms on both
/// stacks; embeddings are scaled by sqrt(model_dim) and summed with fixed
/// sinusoidal positions. Dropout (train mode only) hits the embedded input
/// and each sublayer output before its residual add.
template <typename Real>
class SequencePass {
 public:
  SequencePass(const ModelParams<Real>& params, Mode mode, std::uint64_t dropout_seed = 0)
      : params_(params), mode_(mode), rng_(dropout_seed) {}

  /// Runs the encoder. key_mask (1 = visible) defaults to "not <pad>".
  const Matrix<Real>& encode(std::span<const int> source, std::span<const char> key_mask = {}) {
    const auto& cfg = params_.config;
    if (source.empty()) throw Error(Errc::EmptyInput, "empty source sequence");
    if (static_cast<int>(source.size()) > cfg.max_len) {
      throw Error(Errc::SequenceTooLong, "source length " + std::to_string(source.size()) +
                                             " exceeds max_len " + std::to_string(cfg.max_len));
    }
    source_.assign(source.begin(), source.end());
    if (key_mask.empty()) {
      source_mask_.resize(source.size());
      for (std::size_t i = 0; i < source.size(); ++i) source_mask_[i] = source[i] != kPadId;
    } else {
      if (key_mask.size() != source.size()) {
        throw Error(Errc::LengthMismatch, "source mask length differs from source length");
      }
      source_mask_.assign(key_mask.begin(), key_mask.end());
    }
    bool any_visible = false;
    for (char m : source_mask_) any_visible = any_visible || m;
    if (!any_visible) throw Error(Errc::EmptyInput, "source has no unmasked positions");

    Matrix<Real> x = embed(params_.src_embedding, source_, src_drop_);
    const int heads = cfg.heads;
    enc_caches_.assign(params_.encoder.size(), detail::EncoderLayerCache<Real>());
    for (std::size_t l = 0; l < params_.encoder.size(); ++l) {
      const auto& layer = params_.encoder[l];
      auto& c = enc_caches_[l];
      Matrix<Real> h = detail::norm_forward(layer.attn_norm, x, c.attn_norm);
      Matrix<Real> a = detail::attention_forward(layer.self_attn, h, h, source_mask_, false, heads, c.attn);
      c.attn_drop.sample(a.rows(), a.cols(), dropout_rate(), rng_ptr());
      x += c.attn_drop.apply(a);
      h = detail::norm_forward(layer.ff_norm, x, c.ff_norm);
      Matrix<Real> f = detail::ff_forward(layer.ff, h, c.ff);
      c.ff_drop.sample(f.rows(), f.cols(), dropout_rate(), rng_ptr());
      x += c.ff_drop.apply(f);
    }
    memory_ = detail::norm_forward(params_.encoder_norm, x, enc_norm_);
    encoded_ = true;
    return memory_;
  }

  /// Runs the decoder over target_prefix against the last encoded source and
  /// returns logits, one row per prefix position.
  const Matrix<Real>& decode(std::span<const int> target_prefix) {
    const auto& cfg = params_.config;
    if (!encoded_) throw Error(Errc::InvalidConfig, "decode() called before encode()");
    if (target_prefix.empty()) throw Error(Errc::EmptyInput, "empty target prefix");
    if (static_cast<int>(target_prefix.size()) > cfg.max_len) {
      throw Error(Errc::SequenceTooLong, "target length " + std::to_string(target_prefix.size()) +
                                             " exceeds max_len " + std::to_string(cfg.max_len));
    }
    target_.assign(target_prefix.begin(), target_prefix.end());
    target_mask_.assign(target_.size(), 1);
    Matrix<Real> y = embed(params_.tgt_embedding, target_, tgt_drop_);
    const int heads = cfg.heads;
    dec_caches_.assign(params_.decoder.size(), detail::DecoderLayerCache<Real>());
    for (std::size_t l = 0; l < params_.decoder.size(); ++l) {
      const auto& layer = params_.decoder[l];
      auto& c = dec_caches_[l];
      Matrix<Real> h = detail::norm_forward(layer.self_norm, y, c.self_norm);
      Matrix<Real> a = detail::attention_forward(layer.self_attn, h, h, target_mask_, true, heads, c.self_attn);
      c.self_drop.sample(a.rows(), a.cols(), dropout_rate(), rng_ptr());
      y += c.self_drop.apply(a);
      h = detail::norm_forward(layer.cross_norm, y, c.cross_norm);
      a = detail::attention_forward(layer.cross_attn, h, memory_, source_mask_, false, heads, c.cross_attn);
      c.cross_drop.sample(a.rows(), a.cols(), dropout_rate(), rng_ptr());
      y += c.cross_drop.apply(a);
      h = detail::norm_forward(layer.ff_norm, y, c.ff_norm);
      Matrix<Real> f = detail::ff_forward(layer.ff, h, c.ff);
      c.ff_drop.sample(f.rows(), f.cols(), dropout_rate(), rng_ptr());
      y += c.ff_drop.apply(f);
    }
    dec_out_ = detail::norm_forward(params_.decoder_norm, y, dec_norm_);
    logits_ = detail::linear_forward(params_.generator, dec_out_);
    return logits_;
  }

  const Matrix<Real>& run(std::span<const int> source, std::span<const int> target_prefix,
                          std::span<const char> key_mask = {}) {
    encode(source, key_mask);
    return decode(target_prefix);
  }

  /// Accumulates dL/dθ into grads given dL/dlogits for the last run().
  void backward(const Matrix<Real>& dlogits, ModelParams<Real>& grads) const {
    const int heads = params_.config.heads;
    Matrix<Real> dy = detail::linear_backward(params_.generator, dec_out_, dlogits, grads.generator);
    dy = detail::norm_backward(params_.decoder_norm, dec_norm_, dy, grads.decoder_norm);
    Matrix<Real> dmemory = Matrix<Real>::Zero(memory_.rows(), memory_.cols());
    for (std::size_t l = params_.decoder.size(); l-- > 0;) {
      const auto& layer = params_.decoder[l];
      auto& g = grads.decoder[l];
      const auto& c = dec_caches_[l];
      Matrix<Real> dh = detail::ff_backward(layer.ff, c.ff, c.ff_drop.apply(dy), g.ff);
      dy += detail::norm_backward(layer.ff_norm, c.ff_norm, dh, g.ff_norm);
      auto [dq_cross, dkv_cross] =
          detail::attention_backward(layer.cross_attn, c.cross_attn, c.cross_drop.apply(dy), heads, g.cross_attn);
      dmemory += dkv_cross;
      dy += detail::norm_backward(layer.cross_norm, c.cross_norm, dq_cross, g.cross_norm);
      auto [dq_self, dkv_self] =
          detail::attention_backward(layer.self_attn, c.self_attn, c.self_drop.apply(dy), heads, g.self_attn);
      dq_self += dkv_self;
      dy += detail::norm_backward(layer.self_norm, c.self_norm, dq_self, g.self_norm);
    }
    embed_backward(grads.tgt_embedding, target_, tgt_drop_, dy);

    Matrix<Real> dx = detail::norm_backward(params_.encoder_norm, enc_norm_, dmemory, grads.encoder_norm);
    for (std::size_t l = params_.encoder.size(); l-- > 0;) {
      const auto& layer = params_.encoder[l];
      auto& g = grads.encoder[l];
      const auto& c = enc_caches_[l];
      Matrix<Real> dh = detail::ff_backward(layer.ff, c.ff, c.ff_drop.apply(dx), g.ff);
      dx += detail::norm_backward(layer.ff_norm, c.ff_norm, dh, g.ff_norm);
      auto [dq, dkv] = detail::attention_backward(layer.self_attn, c.attn, c.attn_drop.apply(dx), heads, g.self_attn);
      dq += dkv;
      dx += detail::norm_backward(layer.attn_norm, c.attn_norm, dq, g.attn_norm);
    }
    embed_backward(grads.src_embedding, source_, src_drop_, dx);
  }

  const Matrix<Real>& logits() const noexcept { return logits_; }
  const Matrix<Real>& memory() const noexcept { return memory_; }

  /// Every attention probability map of the last pass (encoder self,
  /// decoder self, decoder cross), one matrix per head.
  std::vector<const Matrix<Real>*> attention_maps() const {
    std::vector<const Matrix<Real>*> out;
    for (const auto& c : enc_caches_) {
      for (const auto& p : c.attn.probs) out.push_back(&p);
    }
    for (const auto& c : dec_caches_) {
      for (const auto& p : c.self_attn.probs) out.push_back(&p);
      for (const auto& p : c.cross_attn.probs) out.push_back(&p);
    }
    return out;
  }

 private:
  double dropout_rate() const noexcept { return mode_ == Mode::Train ? params_.config.dropout : 0.0; }
  Rng* rng_ptr() noexcept { return mode_ == Mode::Train ? &rng_ : nullptr; }

  Matrix<Real> embed(const Matrix<Real>& table, const std::vector<int>& ids, detail::Dropout<Real>& drop) {
    const auto& cfg = params_.config;
    const Real scale = std::sqrt(static_cast<Real>(cfg.model_dim));
    Matrix<Real> x(static_cast<Eigen::Index>(ids.size()), cfg.model_dim);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= cfg.vocab_size) {
        throw Error(Errc::UnknownId, "token id " + std::to_string(ids[i]) + " outside vocabulary of " +
                                         std::to_string(cfg.vocab_size));
      }
      x.row(static_cast<Eigen::Index>(i)) =
          table.row(ids[i]) * scale + params_.positions.row(static_cast<Eigen::Index>(i));
    }
    drop.sample(x.rows(), x.cols(), dropout_rate(), rng_ptr());
    return drop.apply(x);
  }

  void embed_backward(Matrix<Real>& grad_table, const std::vector<int>& ids,
                      const detail::Dropout<Real>& drop, const Matrix<Real>& dx) const {
    const Real scale = std::sqrt(static_cast<Real>(params_.config.model_dim));
    const Matrix<Real> d = drop.apply(dx);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      grad_table.row(ids[i]) += d.row(static_cast<Eigen::Index>(i)) * scale;
    }
  }

  const ModelParams<Real>& params_;
  Mode mode_;
  Rng rng_;
  bool encoded_ = false;

  std::vector<int> source_, target_;
  std::vector<char> source_mask_, target_mask_;
  detail::Dropout<Real> src_drop_, tgt_drop_;
  std::vector<detail::EncoderLayerCache<Real>> enc_caches_;
  detail::NormCache<Real> enc_norm_;
  Matrix<Real> memory_;
  std::vector<detail::DecoderLayerCache<Real>> dec_caches_;
  detail::NormCache<Real> dec_norm_;
  Matrix<Real> dec_out_;
  Matrix<Real> logits_;
};

/// Logits (|target_prefix| x vocab_size) for one source/prefix pair.
template <typename Real>
Matrix<Real> forward(const ModelParams<Real>& params, std::span<const int> source,
                     std::span<const int> target_prefix, Mode mode = Mode::Eval,
                     std::uint64_t dropout_seed = 0) {
  SequencePass<Real> pass(params, mode, dropout_seed);
  return pass.run(source, target_prefix);
}

}  // namespace emonmt
