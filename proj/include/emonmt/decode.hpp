#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emonmt/bpe.hpp"
#include "emonmt/corpus.hpp"
#include "emonmt/emotion.hpp"
#include "emonmt/error.hpp"
#include "emonmt/model/transformer.hpp"

namespace emonmt {

struct BeamConfig {
  int beam_size = 4;
  int max_len = 64;
  double length_penalty = 0.6;

  void validate() const {
    if (beam_size < 1) throw Error(Errc::InvalidConfig, "beam_size must be >= 1");
    if (max_len < 1) throw Error(Errc::InvalidConfig, "max_len must be >= 1");
    if (!(length_penalty >= 0)) throw Error(Errc::InvalidConfig, "length_penalty must be >= 0");
  }
};

/// ids start with <sos>; score is log_prob / (generated length)^alpha.
struct Hypothesis {
  std::vector<int> ids;
  double log_prob = 0;
  double score = 0;
  bool finished = false;
};

/// Tokens the decoder may emit: everything except <pad>, <sos> and the
/// source-side specials beyond the four control tokens.
inline std::vector<char> generation_mask(int vocab_size, std::size_t special_count) {
  std::vector<char> allowed(static_cast<std::size_t>(vocab_size), 1);
  allowed[kPadId] = 0;
  allowed[kSosId] = 0;
  for (std::size_t i = 4; i < special_count && i < allowed.size(); ++i) allowed[i] = 0;
  return allowed;
}

inline double length_normalized(double log_prob, std::size_t generated, double alpha) {
  if (generated == 0 || alpha == 0) return log_prob;
  return log_prob / std::pow(static_cast<double>(generated), alpha);
}

namespace detail {

inline bool better_final(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.ids.size() != b.ids.size()) return a.ids.size() < b.ids.size();
  return a.ids < b.ids;
}

template <typename Real>
std::vector<double> last_log_probs(const Matrix<Real>& logits) {
  const auto last = logits.rows() - 1;
  double max_logit = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < logits.cols(); ++j) max_logit = std::max(max_logit, double(logits(last, j)));
  double total = 0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) total += std::exp(double(logits(last, j)) - max_logit);
  const double log_total = std::log(total) + max_logit;
  std::vector<double> out(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index j = 0; j < logits.cols(); ++j) out[static_cast<std::size_t>(j)] = double(logits(last, j)) - log_total;
  return out;
}

}  // namespace detail

/// Beam search with a shrinking beam: each step keeps the beam_size best
/// expansions; those ending in <eos> are set aside as finished, the rest stay
/// live. Search stops when nothing is live or no live hypothesis can still
/// beat the best finished score. Hypotheses reaching max_len without <eos>
/// are finalised as they are.
template <typename Real>
Hypothesis beam_search(const ModelParams<Real>& params, std::span<const int> source, const BeamConfig& cfg,
                       std::span<const char> allowed = {}) {
  cfg.validate();
  const auto& mc = params.config;
  if (static_cast<int>(source.size()) > mc.max_len) {
    throw Error(Errc::SourceTooLong, "source length " + std::to_string(source.size()) +
                                         " exceeds model max_len " + std::to_string(mc.max_len));
  }
  std::vector<char> default_allowed;
  if (allowed.empty()) {
    default_allowed = generation_mask(mc.vocab_size, 4);
    allowed = default_allowed;
  }
  // Prefix length includes <sos>, so at most max_total - 1 tokens are generated.
  const int max_total = std::min(cfg.max_len + 1, mc.max_len);
  const auto max_generated = static_cast<std::size_t>(std::max(1, max_total - 1));
  const double best_possible_divisor =
      cfg.length_penalty == 0 ? 1.0 : std::pow(static_cast<double>(max_generated), cfg.length_penalty);

  SequencePass<Real> pass(params, Mode::Eval);
  pass.encode(source);

  std::vector<Hypothesis> live{Hypothesis{{kSosId}, 0.0, 0.0, false}};
  std::vector<Hypothesis> finished;
  struct Candidate {
    std::size_t parent;
    int token;
    double log_prob;
  };
  std::vector<Candidate> candidates;
  while (!live.empty() && static_cast<int>(live.front().ids.size()) < max_total) {
    candidates.clear();
    for (std::size_t h = 0; h < live.size(); ++h) {
      const auto logp = detail::last_log_probs(pass.decode(live[h].ids));
      for (std::size_t t = 0; t < logp.size(); ++t) {
        if (allowed[t]) candidates.push_back({h, static_cast<int>(t), live[h].log_prob + logp[t]});
      }
    }
    const auto keep = std::min(candidates.size(), static_cast<std::size_t>(cfg.beam_size));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [&](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.parent != b.parent) return live[a.parent].ids < live[b.parent].ids;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t c = 0; c < keep; ++c) {
      Hypothesis hyp = live[candidates[c].parent];
      hyp.ids.push_back(candidates[c].token);
      hyp.log_prob = candidates[c].log_prob;
      hyp.score = length_normalized(hyp.log_prob, hyp.ids.size() - 1, cfg.length_penalty);
      hyp.finished = candidates[c].token == kEosId;
      (hyp.finished ? finished : next).push_back(std::move(hyp));
    }
    live = std::move(next);
    if (!finished.empty() && !live.empty()) {
      const double best_finished =
          std::max_element(finished.begin(), finished.end(),
                           [](const Hypothesis& a, const Hypothesis& b) { return detail::better_final(b, a); })
              ->score;
      double best_bound = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) best_bound = std::max(best_bound, h.log_prob / best_possible_divisor);
      if (best_finished >= best_bound) break;
    }
  }
  for (auto& h : live) finished.push_back(std::move(h));
  return *std::min_element(finished.begin(), finished.end(), detail::better_final);
}

/// Translations in corpus order. With a token map, each source is tagged
/// with its emotion token before encoding; without one the source is used
/// as is.
template <typename Real>
std::vector<std::pair<std::string, std::string>> translate_corpus(
    const ModelParams<Real>& params, const BpeVocab& vocab, const ParallelCorpus& corpus,
    const BeamConfig& cfg, const std::map<std::string, EmotionToken>* token_map = nullptr) {
  const auto allowed = generation_mask(params.config.vocab_size, vocab.specials().size());
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(corpus.size());
  for (const auto& pair : corpus.pairs) {
    std::string source = pair.source;
    if (token_map) {
      auto it = token_map->find(pair.id);
      if (it == token_map->end()) throw Error(Errc::MissingToken, "no emotion token for '" + pair.id + "'");
      source = inject_token(pair, it->second).source;
    }
    const auto ids = encode(vocab, source);
    const auto hyp = beam_search(params, ids, cfg, allowed);
    out.emplace_back(pair.id, decode(vocab, hyp.ids));
  }
  return out;
}

}  // namespace emonmt
