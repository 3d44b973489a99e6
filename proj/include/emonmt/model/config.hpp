#pragma once

#include <cstdint>
#include <sstream>
#include <string>

#include "emonmt/digest.hpp"
#include "emonmt/error.hpp"

namespace emonmt {

/// Transformer shape. Defaults are the full-size recipe (6+6 layers,
/// 4 heads, dropout 0.1); desk-scale runs shrink it.
struct ModelConfig {
  int enc_layers = 6;
  int dec_layers = 6;
  int heads = 4;
  int model_dim = 256;
  int ff_dim = 2048;
  double dropout = 0.1;
  int max_len = 256;
  int vocab_size = 1000;
  std::uint64_t seed = 1;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
    if (enc_layers < 1 || dec_layers < 1) fail("layer counts must be >= 1");
    if (heads < 1 || model_dim < 1 || ff_dim < 1 || max_len < 1 || vocab_size < 1) {
      fail("all model dimensions must be >= 1");
    }
    if (model_dim % heads != 0) fail("model_dim must be divisible by heads");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  }

  /// Fields that fix tensor shapes; seed and dropout are deliberately left out
  /// so runs that differ only in those can still be averaged.
  std::string shape_string() const {
    std::ostringstream out;
    out << "enc_layers=" << enc_layers << ";dec_layers=" << dec_layers << ";heads=" << heads
        << ";model_dim=" << model_dim << ";ff_dim=" << ff_dim << ";max_len=" << max_len
        << ";vocab_size=" << vocab_size;
    return out.str();
  }

  std::string hash() const { return sha256(shape_string()); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Optimisation recipe. Defaults follow the full-size setup: warmup 8000,
/// batch 96, 250 epochs, 5-best averaging.
struct TrainConfig {
  int warmup_steps = 8000;
  int batch_size = 96;
  int epochs = 250;
  double label_smoothing = 0.1;
  int avg_top_k = 5;
  double peak_scale = 1.0;
  double clip_norm = 5.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
    if (warmup_steps < 1) fail("warmup_steps must be >= 1");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (epochs < 0) fail("epochs must be >= 0");
    if (avg_top_k < 1) fail("avg_top_k must be >= 1");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) fail("label_smoothing must lie in [0, 1)");
    if (!(peak_scale > 0.0)) fail("peak_scale must be positive");
    if (!(clip_norm >= 0.0)) fail("clip_norm must be >= 0 (0 disables clipping)");
  }

  std::string describe() const {
    std::ostringstream out;
    out.precision(17);
    out << "warmup=" << warmup_steps << ";batch=" << batch_size << ";epochs=" << epochs
        << ";eps=" << label_smoothing << ";top_k=" << avg_top_k << ";peak=" << peak_scale
        << ";clip=" << clip_norm << ";betas=" << adam_beta1 << "," << adam_beta2
        << ";adam_eps=" << adam_eps;
    return out.str();
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

}  // namespace emonmt
