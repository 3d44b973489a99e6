#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "emonmt/bpe.hpp"
#include "emonmt/corpus.hpp"
#include "emonmt/error.hpp"
#include "emonmt/model/checkpoint.hpp"
#include "emonmt/model/config.hpp"
#include "emonmt/model/optim.hpp"
#include "emonmt/model/params.hpp"
#include "emonmt/model/schedule.hpp"
#include "emonmt/random.hpp"

namespace emonmt {

struct EpochLog {
  int epoch = 0;
  std::int64_t step = 0;
  double train_loss = 0;
  double dev_loss = 0;
  double lr = 0;
};

inline constexpr std::string_view kTrainLogHeader = "epoch,step,train_loss,dev_loss,lr";

inline std::string format_log_row(const EpochLog& e) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out.precision(10);
  out << e.epoch << ',' << e.step << ',' << e.train_loss << ',' << e.dev_loss << ',' << e.lr;
  return out.str();
}

inline std::vector<Example> encode_corpus(const BpeVocab& vocab, const ParallelCorpus& corpus) {
  std::vector<Example> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus.pairs) out.push_back({encode(vocab, p.source), encode(vocab, p.target)});
  return out;
}

/// Everything the loop hands back to the caller after each epoch.
template <typename Real>
using EpochCallback = std::function<void(const EpochLog&, const Checkpoint<Real>&)>;

/// Trains from init_params(config). Returns the initial checkpoint (epoch 0)
/// followed by one checkpoint per epoch, each with its eval-mode dev loss.
/// Batch order and dropout are deterministic given config.seed.
template <typename Real>
std::vector<Checkpoint<Real>> train(std::span<const Example> train_set, std::span<const Example> dev_set,
                                    const ModelConfig& config, const TrainConfig& tcfg,
                                    const EpochCallback<Real>& on_epoch = {}) {
  config.validate();
  tcfg.validate();
  if (train_set.empty()) throw Error(Errc::EmptyCorpus, "training set is empty");
  if (dev_set.empty()) throw Error(Errc::EmptyCorpus, "dev set is empty");

  const std::string hash = config.hash();
  ModelParams<Real> params = init_params<Real>(config);
  Adam<Real> optimizer(params, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps);

  std::vector<Checkpoint<Real>> checkpoints;
  checkpoints.push_back({params, 0, 0, evaluate_loss(params, dev_set, tcfg.label_smoothing), hash});

  std::vector<std::size_t> order(train_set.size());
  std::vector<Example> batch;
  std::int64_t step = 0;
  double lr = 0;
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(config.seed, 0xE90C0000ull + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    double loss_sum = 0;
    std::size_t tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tcfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);
      ++step;
      auto result = compute_gradients(params, std::span<const Example>(batch), tcfg.label_smoothing,
                                      Mode::Train, mix_seed(config.seed, static_cast<std::uint64_t>(step)));
      loss_sum += result.loss_sum;
      tokens += result.tokens;
      clip_global_norm(result.grads, tcfg.clip_norm);
      lr = noam_lr(step, config.model_dim, tcfg.warmup_steps, tcfg.peak_scale);
      optimizer.step(params, result.grads, lr);
      if (!all_finite(params)) {
        throw Error(Errc::NonFiniteGradient, "parameters diverged at step " + std::to_string(step));
      }
    }
    EpochLog log{epoch, step, tokens ? loss_sum / static_cast<double>(tokens) : 0.0,
                 evaluate_loss(params, dev_set, tcfg.label_smoothing), lr};
    checkpoints.push_back({params, epoch, step, log.dev_loss, hash});
    if (on_epoch) on_epoch(log, checkpoints.back());
  }
  return checkpoints;
}

/// Convenience overload over text corpora.
template <typename Real>
std::vector<Checkpoint<Real>> train(const ParallelCorpus& train_corpus, const ParallelCorpus& dev_corpus,
                                    const BpeVocab& vocab, const ModelConfig& config,
                                    const TrainConfig& tcfg, const EpochCallback<Real>& on_epoch = {}) {
  ModelConfig cfg = config;
  cfg.vocab_size = static_cast<int>(vocab.size());
  const auto tr = encode_corpus(vocab, train_corpus);
  const auto dv = encode_corpus(vocab, dev_corpus);
  return train<Real>(std::span<const Example>(tr), std::span<const Example>(dv), cfg, tcfg, on_epoch);
}

}  // namespace emonmt
