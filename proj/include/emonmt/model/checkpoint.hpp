#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "emonmt/digest.hpp"
#include "emonmt/error.hpp"
#include "emonmt/model/params.hpp"

namespace emonmt {

template <typename Real>
struct Checkpoint {
  ModelParams<Real> params;
  int epoch = 0;
  std::int64_t step = 0;
  double dev_loss = 0;
  std::string config_hash;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'E', 'M', 'O', 'N', 'M', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}
  void u64(std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(b, 8);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class LeReader {
 public:
  explicit LeReader(std::istream& in) : in_(in) {}
  std::uint64_t u64() {
    unsigned char b[8];
    if (!in_.read(reinterpret_cast<char*>(b), 8)) throw Error(Errc::Format, "checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u64();
    if (n > (1u << 20)) throw Error(Errc::Format, "implausible string length in checkpoint");
    std::string s(n, '\0');
    if (!in_.read(s.data(), static_cast<std::streamsize>(n))) throw Error(Errc::Format, "checkpoint truncated");
    return s;
  }

 private:
  std::istream& in_;
};

}  // namespace detail

/// Binary container: magic, version, model config, metadata, then every
/// named tensor as (name, rows, cols, little-endian float64 values). Storing
/// float64 keeps float and double models lossless.
template <typename Real>
void save_checkpoint(const Checkpoint<Real>& ckpt, std::ostream& out) {
  out.write(detail::kCheckpointMagic, 8);
  detail::LeWriter w(out);
  w.u64(detail::kCheckpointVersion);
  const auto& c = ckpt.params.config;
  for (int v : {c.enc_layers, c.dec_layers, c.heads, c.model_dim, c.ff_dim, c.max_len, c.vocab_size}) {
    w.i64(v);
  }
  w.f64(c.dropout);
  w.u64(c.seed);
  w.str(ckpt.config_hash);
  w.i64(ckpt.epoch);
  w.i64(ckpt.step);
  w.f64(ckpt.dev_loss);
  const auto tensors = tensor_list(ckpt.params);
  w.u64(tensors.size());
  for (const auto& [name, m] : tensors) {
    w.str(name);
    w.u64(static_cast<std::uint64_t>(m->rows()));
    w.u64(static_cast<std::uint64_t>(m->cols()));
    for (Eigen::Index i = 0; i < m->size(); ++i) w.f64(static_cast<double>(m->data()[i]));
  }
  if (!out) throw Error(Errc::Io, "checkpoint write failed");
}

template <typename Real>
Checkpoint<Real> load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, detail::kCheckpointMagic)) {
    throw Error(Errc::Format, "not a checkpoint file");
  }
  detail::LeReader r(in);
  if (r.u64() != detail::kCheckpointVersion) throw Error(Errc::Format, "unsupported checkpoint version");
  ModelConfig c;
  for (int* field : {&c.enc_layers, &c.dec_layers, &c.heads, &c.model_dim, &c.ff_dim, &c.max_len, &c.vocab_size}) {
    *field = static_cast<int>(r.i64());
  }
  c.dropout = r.f64();
  c.seed = r.u64();
  Checkpoint<Real> ckpt;
  ckpt.params = zero_params<Real>(c);
  ckpt.config_hash = r.str();
  ckpt.epoch = static_cast<int>(r.i64());
  ckpt.step = r.i64();
  ckpt.dev_loss = r.f64();
  auto tensors = tensor_list(ckpt.params);
  if (r.u64() != tensors.size()) throw Error(Errc::Format, "checkpoint tensor count does not match config");
  for (auto& [name, m] : tensors) {
    const std::string stored = r.str();
    const auto rows = r.u64();
    const auto cols = r.u64();
    if (stored != name || rows != static_cast<std::uint64_t>(m->rows()) ||
        cols != static_cast<std::uint64_t>(m->cols())) {
      throw Error(Errc::Format, "checkpoint tensor '" + stored + "' does not match expected '" + name + "'");
    }
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = static_cast<Real>(r.f64());
  }
  return ckpt;
}

template <typename Real>
void save_checkpoint(const Checkpoint<Real>& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  save_checkpoint(ckpt, out);
}

template <typename Real>
Checkpoint<Real> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return load_checkpoint<Real>(in);
}

/// SHA-256 over the serialized checkpoint.
template <typename Real>
std::string checkpoint_digest(const Checkpoint<Real>& ckpt) {
  std::ostringstream out(std::ios::binary);
  save_checkpoint(ckpt, out);
  return sha256(out.str());
}

/// Indices of the k checkpoints with the lowest dev loss (earlier epoch wins ties).
template <typename Real>
std::vector<std::size_t> select_best(std::span<const Checkpoint<Real>> checkpoints, std::size_t k) {
  std::vector<std::size_t> order(checkpoints.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return checkpoints[a].dev_loss < checkpoints[b].dev_loss;
  });
  order.resize(std::min(k, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

/// Element-wise mean of the k lowest-dev-loss checkpoints.
template <typename Real>
ModelParams<Real> average_checkpoints(std::span<const Checkpoint<Real>> checkpoints, std::size_t k) {
  if (k == 0) throw Error(Errc::InvalidConfig, "cannot average zero checkpoints");
  if (checkpoints.size() < k) {
    throw Error(Errc::NotEnoughCheckpoints, "need " + std::to_string(k) + " checkpoints, have " +
                                                std::to_string(checkpoints.size()));
  }
  for (const auto& c : checkpoints) {
    if (c.config_hash != checkpoints.front().config_hash) {
      throw Error(Errc::ConfigMismatch, "checkpoints come from different model configurations");
    }
  }
  const auto chosen = select_best(checkpoints, k);
  ModelParams<Real> avg = zeros_like(checkpoints[chosen.front()].params);
  avg.config = checkpoints[chosen.front()].params.config;
  auto dst = tensor_list(avg);
  for (std::size_t idx : chosen) {
    auto src = tensor_list(checkpoints[idx].params);
    for (std::size_t t = 0; t < dst.size(); ++t) *dst[t].second += *src[t].second;
  }
  const auto count = static_cast<Real>(k);
  for (auto& [name, m] : dst) *m /= count;
  return avg;
}

}  // namespace emonmt
