#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace emonmt {

/// Linear warmup to step == warmup, inverse square root decay afterwards:
/// peak_scale * model_dim^-0.5 * min(step^-0.5, step * warmup^-1.5).
inline double noam_lr(std::int64_t step, int model_dim, int warmup, double peak_scale) {
  const double s = static_cast<double>(std::max<std::int64_t>(step, 1));
  const double w = static_cast<double>(warmup);
  return peak_scale / std::sqrt(static_cast<double>(model_dim)) *
         std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
}

}  // namespace emonmt
