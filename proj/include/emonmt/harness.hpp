#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "emonmt/bleu.hpp"
#include "emonmt/bpe.hpp"
#include "emonmt/corpus.hpp"
#include "emonmt/decode.hpp"
#include "emonmt/digest.hpp"
#include "emonmt/emotion.hpp"
#include "emonmt/error.hpp"
#include "emonmt/model/checkpoint.hpp"
#include "emonmt/model/train.hpp"

namespace emonmt {

/// Scalar type used for experiment training and decoding.
using ExperimentReal = float;

enum class Variant { Baseline, Arousal, Dominance, Valence };

inline constexpr std::array<Variant, 4> kVariants{Variant::Baseline, Variant::Arousal, Variant::Dominance,
                                                   Variant::Valence};

constexpr std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::Arousal: return "arousal";
    case Variant::Dominance: return "dominance";
    case Variant::Valence: return "valence";
  }
  return "baseline";
}

inline Variant parse_variant(std::string_view name) {
  for (Variant v : kVariants) {
    if (to_string(v) == name) return v;
  }
  throw Error(Errc::InvalidConfig, "unknown variant '" + std::string(name) + "'");
}

constexpr std::optional<Dimension> dimension_of(Variant v) noexcept {
  switch (v) {
    case Variant::Baseline: return std::nullopt;
    case Variant::Arousal: return Dimension::Arousal;
    case Variant::Dominance: return Dimension::Dominance;
    case Variant::Valence: return Dimension::Valence;
  }
  return std::nullopt;
}

struct CorpusFiles {
  std::filesystem::path source;
  std::filesystem::path target;
  std::optional<std::filesystem::path> ids;
};

struct ExperimentSpec {
  CorpusFiles train, dev, test;
  std::optional<std::filesystem::path> scores;
  std::vector<Variant> variants{kVariants.begin(), kVariants.end()};
  ModelConfig model;
  TrainConfig training;
  BeamConfig beam;
  std::size_t bpe_size = 1000;
  std::filesystem::path output_dir = "experiment";
  std::uint64_t seed = 1;
  bool force = false;
};

struct SplitCorpora {
  ParallelCorpus train, dev, test;
};

inline SplitCorpora load_splits(const ExperimentSpec& spec) {
  return {load_corpus(spec.train.source, spec.train.target, spec.train.ids, Split::Train),
          load_corpus(spec.dev.source, spec.dev.target, spec.dev.ids, Split::Dev),
          load_corpus(spec.test.source, spec.test.target, spec.test.ids, Split::Test)};
}

/// Tags every source of one split with its polarity token for `dim`.
inline ParallelCorpus tag_corpus(const ParallelCorpus& corpus, const ScoreTable& scores, Dimension dim) {
  std::vector<std::string> missing;
  for (const auto& p : corpus.pairs) {
    if (!scores.contains(p.id)) missing.push_back(p.id);
  }
  if (!missing.empty()) {
    std::string listed;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) listed += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) listed += ", ...";
    throw Error(Errc::MissingScore, std::to_string(missing.size()) + " " + std::string(to_string(corpus.split)) +
                                        " utterances lack scores: " + listed);
  }
  ParallelCorpus out;
  out.split = corpus.split;
  out.pairs.reserve(corpus.size());
  for (const auto& p : corpus.pairs) out.pairs.push_back(inject_token(p, bin_emotion(scores.at(p.id), dim)));
  return out;
}

/// Baseline returns the corpora untouched; dimension variants need scores.
inline SplitCorpora prepare_variant(const SplitCorpora& corpora, const ScoreTable* scores, Variant variant) {
  const auto dim = dimension_of(variant);
  if (!dim) return corpora;
  if (!scores) {
    throw Error(Errc::MissingScore, "variant '" + std::string(to_string(variant)) + "' needs a score file");
  }
  return {tag_corpus(corpora.train, *scores, *dim), tag_corpus(corpora.dev, *scores, *dim),
          tag_corpus(corpora.test, *scores, *dim)};
}

inline std::map<Variant, SplitCorpora> prepare_variants(const ExperimentSpec& spec) {
  const SplitCorpora corpora = load_splits(spec);
  std::optional<ScoreTable> scores;
  if (spec.scores) scores = load_scores(*spec.scores);
  std::map<Variant, SplitCorpora> out;
  for (Variant v : spec.variants) out.emplace(v, prepare_variant(corpora, scores ? &*scores : nullptr, v));
  return out;
}

struct VariantResult {
  Variant variant = Variant::Baseline;
  bool ok = false;
  std::string error;
  Errc code = Errc::Io;
  BleuBreakdown dev, test;
};

struct ResultsTable {
  std::vector<VariantResult> rows;
  std::string signature = bleu_signature();

  const VariantResult* find(Variant v) const {
    for (const auto& r : rows) {
      if (r.variant == v) return &r;
    }
    return nullptr;
  }

  bool has_baseline() const {
    const auto* b = find(Variant::Baseline);
    return b && b->ok;
  }

  /// One row per variant with dev/test BLEU; delta columns only when the
  /// baseline succeeded and some other variant is present.
  std::vector<std::vector<std::string>> cells() const {
    const bool deltas = has_baseline() && rows.size() > 1;
    const auto* base = find(Variant::Baseline);
    std::vector<std::vector<std::string>> out;
    out.push_back({"variant", "dev", "test"});
    if (deltas) {
      out.front().emplace_back("delta_dev");
      out.front().emplace_back("delta_test");
    }
    for (const auto& r : rows) {
      std::vector<std::string> row{std::string(to_string(r.variant))};
      if (!r.ok) {
        row.insert(row.end(), deltas ? 4 : 2, "FAILED");
        out.push_back(row);
        continue;
      }
      row.push_back(format_fixed(r.dev.score, 2));
      row.push_back(format_fixed(r.test.score, 2));
      if (deltas) {
        for (double d : {r.dev.score - base->dev.score, r.test.score - base->test.score}) {
          row.push_back((d >= 0 ? "+" : "") + format_fixed(d, 2));
        }
      }
      out.push_back(row);
    }
    return out;
  }

  std::string to_text() const {
    const auto table = cells();
    std::vector<std::size_t> width(table.front().size(), 0);
    for (const auto& row : table) {
      for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    for (const auto& row : table) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        out << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << (c ? std::right : std::left) << row[c];
      }
      out << '\n';
    }
    for (const auto& r : rows) {
      if (!r.ok) out << "# " << to_string(r.variant) << " failed: " << r.error << '\n';
    }
    out << "# BLEU " << signature << '\n';
    return out.str();
  }

  std::string to_csv() const {
    std::ostringstream out;
    for (const auto& row : cells()) out << join(row, ",") << '\n';
    return out.str();
  }
};

/// Trains, writes train_log.csv and the k best checkpoints under `dir`, then
/// saves their average as model.ckpt and returns it.
inline ModelParams<ExperimentReal> train_and_average(const ParallelCorpus& train_corpus,
                                                     const ParallelCorpus& dev_corpus, const BpeVocab& vocab,
                                                     const ModelConfig& config, const TrainConfig& tcfg,
                                                     const std::filesystem::path& dir,
                                                     const EpochCallback<ExperimentReal>& on_epoch = {}) {
  namespace fs = std::filesystem;
  std::vector<std::string> log_rows{std::string(kTrainLogHeader)};
  const auto checkpoints = train<ExperimentReal>(train_corpus, dev_corpus, vocab, config, tcfg,
                                                 [&](const EpochLog& e, const Checkpoint<ExperimentReal>& c) {
                                                   log_rows.push_back(format_log_row(e));
                                                   if (on_epoch) on_epoch(e, c);
                                                 });
  write_lines(dir / "train_log.csv", log_rows);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(tcfg.avg_top_k), checkpoints.size());
  const std::span<const Checkpoint<ExperimentReal>> all(checkpoints);
  fs::remove_all(dir / "checkpoints");
  for (std::size_t idx : select_best(all, k)) {
    std::ostringstream name;
    name << "epoch-" << std::setw(4) << std::setfill('0') << checkpoints[idx].epoch << ".ckpt";
    save_checkpoint(checkpoints[idx], dir / "checkpoints" / name.str());
  }
  ModelParams<ExperimentReal> model = average_checkpoints(all, k);
  const auto dev_examples = encode_corpus(vocab, dev_corpus);
  const Checkpoint<ExperimentReal> averaged{
      model, -1, checkpoints.back().step,
      evaluate_loss(model, std::span<const Example>(dev_examples), tcfg.label_smoothing),
      checkpoints.back().config_hash};
  save_checkpoint(averaged, dir / "model.ckpt");
  return model;
}

/// BPE over both sides of the training split.
inline BpeVocab train_vocab(const ParallelCorpus& train_corpus, std::size_t size) {
  std::vector<std::string> text = train_corpus.sources();
  for (auto& t : train_corpus.targets()) text.push_back(std::move(t));
  return bpe_train(text, size);
}

namespace detail {

inline std::string corpus_text(const ParallelCorpus& c) {
  std::string s;
  for (const auto& p : c.pairs) s += p.id + '\t' + p.source + '\t' + p.target + '\n';
  return s;
}

inline std::string bleu_report(const BleuBreakdown& b) {
  std::ostringstream out;
  out << "BLEU = " << format_fixed(b.score, 2);
  for (std::size_t i = 0; i < b.precisions.size(); ++i) {
    out << (i ? "/" : " ") << format_fixed(100.0 * b.precisions[i], 1);
  }
  out << " (BP = " << format_fixed(b.brevity_penalty, 3) << " hyp_len = " << b.hyp_len
      << " ref_len = " << b.ref_len << ")";
  return out.str();
}

inline std::vector<std::string> hypothesis_lines(const std::vector<std::pair<std::string, std::string>>& t) {
  std::vector<std::string> out;
  for (const auto& [id, text] : t) out.push_back(text);
  return out;
}

inline void log_line(std::ostream* log, const std::string& line) {
  if (log) *log << line << std::endl;
}

/// Trains (or reuses) one variant and scores dev/test.
inline VariantResult run_variant(const ExperimentSpec& spec, Variant variant, const SplitCorpora& data,
                                 std::ostream* log) {
  namespace fs = std::filesystem;
  const fs::path dir = spec.output_dir / std::string(to_string(variant));
  fs::create_directories(dir);
  for (const auto* c : {&data.train, &data.dev, &data.test}) {
    const std::string split(to_string(c->split));
    save_corpus(*c, dir / (split + ".src"), dir / (split + ".tgt"), dir / (split + ".ids"));
  }

  const BpeVocab vocab = train_vocab(data.train, spec.bpe_size);
  save_vocab(vocab, dir / "vocab.txt");

  ModelConfig mcfg = spec.model;
  mcfg.vocab_size = static_cast<int>(vocab.size());
  mcfg.seed = spec.seed;
  std::ostringstream run_key;
  run_key << mcfg.shape_string() << ";dropout=" << format_fixed(mcfg.dropout, 17) << ";seed=" << mcfg.seed << '\n'
          << spec.training.describe() << '\n'
          << vocab_to_string(vocab) << corpus_text(data.train) << corpus_text(data.dev);
  const std::string run_hash = sha256(run_key.str());

  const fs::path model_path = dir / "model.ckpt";
  const fs::path hash_path = dir / "run.hash";
  ModelParams<ExperimentReal> model;
  const bool reuse = !spec.force && fs::exists(model_path) && fs::exists(hash_path) &&
                     normalize_text(read_text(hash_path)) == run_hash;
  if (reuse) {
    log_line(log, std::string(to_string(variant)) + ": reusing " + model_path.string());
    model = load_checkpoint<ExperimentReal>(model_path).params;
  } else {
    model = train_and_average(data.train, data.dev, vocab, mcfg, spec.training, dir,
                              [&](const EpochLog& e, const Checkpoint<ExperimentReal>&) {
                                log_line(log, std::string(to_string(variant)) + " " + format_log_row(e));
                              });
    write_text(hash_path, run_hash + "\n");
  }

  VariantResult result;
  result.variant = variant;
  std::vector<std::string> report;
  for (const auto* c : {&data.dev, &data.test}) {
    const std::string split(to_string(c->split));
    const auto hyps = hypothesis_lines(translate_corpus(model, vocab, *c, spec.beam));
    write_lines(dir / (split + ".hyp"), hyps);
    const auto refs = c->targets();
    const auto bleu = corpus_bleu(hyps, refs);
    (c->split == Split::Dev ? result.dev : result.test) = bleu;
    report.push_back(split + ": " + bleu_report(bleu));
    log_line(log, std::string(to_string(variant)) + " " + report.back());
  }
  report.push_back("signature: " + bleu_signature());
  write_lines(dir / "bleu.txt", report);
  result.ok = true;
  return result;
}

}  // namespace detail

/// Runs every requested variant. A failing variant is recorded in its row
/// and the remaining variants still run. Writes report.txt / report.csv
/// under the output directory.
inline ResultsTable run_experiment(const ExperimentSpec& spec, std::ostream* log = nullptr) {
  spec.model.validate();
  spec.training.validate();
  spec.beam.validate();
  const SplitCorpora corpora = load_splits(spec);
  // A broken score file only fails the tagged variants.
  std::optional<ScoreTable> scores;
  std::optional<Error> score_error;
  if (spec.scores) {
    try {
      scores = load_scores(*spec.scores);
    } catch (const Error& e) {
      score_error = e;
    }
  }

  ResultsTable table;
  for (Variant v : spec.variants) {
    try {
      if (score_error && dimension_of(v)) throw *score_error;
      const SplitCorpora data = prepare_variant(corpora, scores ? &*scores : nullptr, v);
      table.rows.push_back(detail::run_variant(spec, v, data, log));
    } catch (const Error& e) {
      detail::log_line(log, std::string(to_string(v)) + " failed: " + e.what());
      VariantResult failed;
      failed.variant = v;
      failed.error = e.what();
      failed.code = e.code();
      table.rows.push_back(std::move(failed));
    }
  }
  write_text(spec.output_dir / "report.txt", table.to_text());
  write_text(spec.output_dir / "report.csv", table.to_csv());
  return table;
}

/// Distribution statistics per split and dimension. With no splits given,
/// every scored utterance forms one split named "all".
inline std::vector<DistributionStats> stats_report(
    const ScoreTable& scores, const std::vector<std::pair<std::string, std::vector<std::string>>>& splits = {}) {
  std::vector<std::pair<std::string, std::vector<std::string>>> groups = splits;
  if (groups.empty()) {
    std::vector<std::string> all;
    for (const auto& [id, s] : scores) all.push_back(id);
    groups.emplace_back("all", std::move(all));
  }
  std::vector<DistributionStats> out;
  for (const auto& [name, ids] : groups) {
    std::vector<EmotionScores> rows;
    for (const auto& id : ids) {
      auto it = scores.find(id);
      if (it == scores.end()) throw Error(Errc::MissingScore, "split '" + name + "': no score for '" + id + "'");
      rows.push_back(it->second);
    }
    for (Dimension d : kDimensions) out.push_back(distribution_stats(std::span<const EmotionScores>(rows), d, name));
  }
  return out;
}

inline std::string stats_to_csv(const std::vector<DistributionStats>& stats) {
  std::ostringstream out;
  out << "split,dimension,count,min,q1,median,q3,max,mean\n";
  for (const auto& s : stats) {
    out << s.split << ',' << to_string(s.dimension) << ',' << s.count << ',' << format_fixed(s.min, 4) << ','
        << format_fixed(s.q1, 4) << ',' << format_fixed(s.median, 4) << ',' << format_fixed(s.q3, 4) << ','
        << format_fixed(s.max, 4) << ',' << format_fixed(s.mean, 4) << '\n';
  }
  return out.str();
}

inline std::string stats_to_text(const std::vector<DistributionStats>& stats) {
  std::ostringstream out;
  out << std::left << std::setw(8) << "split" << std::setw(11) << "dimension" << std::right << std::setw(7)
      << "count";
  for (const char* h : {"min", "q1", "median", "q3", "max", "mean"}) out << std::setw(8) << h;
  out << '\n';
  for (const auto& s : stats) {
    out << std::left << std::setw(8) << s.split << std::setw(11) << to_string(s.dimension) << std::right
        << std::setw(7) << s.count;
    for (double v : {s.min, s.q1, s.median, s.q3, s.max, s.mean}) out << std::setw(8) << format_fixed(v, 3);
    out << '\n';
  }
  return out.str();
}

}  // namespace emonmt
