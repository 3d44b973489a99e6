// emonmt command-line front end.

#include <algorithm>
#include <filesystem>
#include <map>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emonmt/emonmt.hpp"

namespace fs = std::filesystem;
using namespace emonmt;

namespace {

// Lines of a --config file become "--key=value" arguments unless the key
// was already given on the command line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!config) return args;

  auto given = [&](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  const auto lines = read_lines(*config);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::string_view line = lines[n];
    while (!line.empty() && is_space(line.front())) line.remove_prefix(1);
    while (!line.empty() && is_space(line.back())) line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::InvalidConfig, *config + ":" + std::to_string(n + 1) + ": expected key=value");
    }
    std::string key(line.substr(0, eq));
    std::string value(line.substr(eq + 1));
    while (!key.empty() && is_space(key.back())) key.pop_back();
    while (!value.empty() && is_space(value.front())) value.erase(value.begin());
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.rfind("--", 0) != 0) key = "--" + key;
    if (!given(key)) args.push_back(key + "=" + value);
  }
  return args;
}

void add_config_option(CLI::App* cmd) {
  // Consumed by expand_config; registered so it shows up in --help.
  cmd->add_option("--config", "key=value file; flags on the command line take precedence");
}

void add_model_options(CLI::App* cmd, ModelConfig& m) {
  cmd->add_option("--enc-layers", m.enc_layers, "encoder layers")->capture_default_str();
  cmd->add_option("--dec-layers", m.dec_layers, "decoder layers")->capture_default_str();
  cmd->add_option("--heads", m.heads, "attention heads")->capture_default_str();
  cmd->add_option("--model-dim", m.model_dim, "model width")->capture_default_str();
  cmd->add_option("--ff-dim", m.ff_dim, "feed-forward width")->capture_default_str();
  cmd->add_option("--dropout", m.dropout, "dropout rate")->capture_default_str();
  cmd->add_option("--max-len", m.max_len, "maximum sequence length")->capture_default_str();
}

void add_train_options(CLI::App* cmd, TrainConfig& t) {
  cmd->add_option("--warmup", t.warmup_steps, "warmup steps")->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size, "sentences per batch")->capture_default_str();
  cmd->add_option("--epochs", t.epochs, "training epochs")->capture_default_str();
  cmd->add_option("--label-smoothing", t.label_smoothing, "label smoothing")->capture_default_str();
  cmd->add_option("--avg-top-k", t.avg_top_k, "checkpoints averaged")->capture_default_str();
  cmd->add_option("--peak-scale", t.peak_scale, "learning-rate multiplier")->capture_default_str();
  cmd->add_option("--clip-norm", t.clip_norm, "gradient norm clip, 0 disables")->capture_default_str();
}

void add_beam_options(CLI::App* cmd, BeamConfig& b) {
  cmd->add_option("--beam-size", b.beam_size, "beam width")->capture_default_str();
  cmd->add_option("--max-output", b.max_len, "maximum generated tokens")->capture_default_str();
  cmd->add_option("--length-penalty", b.length_penalty, "length normalization exponent")->capture_default_str();
}

void add_split_options(CLI::App* cmd, const std::string& split, CorpusFiles& files, bool required) {
  auto* s = cmd->add_option("--" + split + "-src", files.source, split + " source text");
  auto* t = cmd->add_option("--" + split + "-tgt", files.target, split + " target text");
  if (required) {
    s->required();
    t->required();
  }
  cmd->add_option_function<std::string>(
      "--" + split + "-ids", [&files](const std::string& p) { files.ids = p; }, split + " utterance IDs");
}

std::optional<std::filesystem::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

std::vector<Variant> parse_variants(const std::vector<std::string>& names) {
  std::vector<Variant> out;
  for (const auto& n : names) {
    for (const auto& part : split(n, ',')) {
      if (part.empty()) continue;
      const Variant v = parse_variant(part);
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion-token conditioned neural machine translation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "emonmt 1.0");

  // stats
  auto* stats = app.add_subcommand("stats", "Distribution of emotion scores per split and dimension");
  std::string stats_scores, stats_format = "text", stats_output;
  std::vector<std::string> stats_splits;
  stats->add_option("--scores", stats_scores, "score CSV (id,arousal,dominance,valence)")->required();
  stats->add_option("--split", stats_splits, "NAME=IDFILE; repeatable, default is one split over all IDs");
  stats->add_option("--format", stats_format, "text or csv")->check(CLI::IsMember({"text", "csv"}));
  stats->add_option("--output", stats_output, "write here instead of stdout");
  add_config_option(stats);

  // bpe-train
  auto* bpe = app.add_subcommand("bpe-train", "Learn a BPE vocabulary");
  std::vector<std::string> bpe_inputs;
  std::size_t bpe_size = 1000;
  std::string bpe_output;
  bpe->add_option("--input", bpe_inputs, "training text files")->required();
  bpe->add_option("--size", bpe_size, "target vocabulary size, specials included")->capture_default_str();
  bpe->add_option("--output", bpe_output, "vocabulary file")->required();
  add_config_option(bpe);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Prepend emotion tokens to a corpus");
  CorpusFiles prep_files;
  std::string prep_scores, prep_variant = "baseline", prep_output;
  prepare->add_option("--src", prep_files.source, "source text")->required();
  prepare->add_option("--tgt", prep_files.target, "target text")->required();
  prepare->add_option_function<std::string>(
      "--ids", [&](const std::string& p) { prep_files.ids = p; }, "utterance IDs");
  prepare->add_option("--scores", prep_scores, "score CSV");
  prepare->add_option("--variant", prep_variant, "baseline, arousal, dominance or valence")->capture_default_str();
  prepare->add_option("--output", prep_output, "output prefix; writes PREFIX.src, PREFIX.tgt, PREFIX.ids")
      ->required();
  add_config_option(prepare);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model and average its best checkpoints");
  CorpusFiles tr_train, tr_dev;
  ModelConfig tr_model;
  TrainConfig tr_train_cfg;
  std::string tr_vocab, tr_output;
  std::size_t tr_bpe_size = 1000;
  std::uint64_t tr_seed = 0;
  add_split_options(train_cmd, "train", tr_train, true);
  add_split_options(train_cmd, "dev", tr_dev, true);
  train_cmd->add_option("--vocab", tr_vocab, "existing vocabulary; trained from the train split if omitted");
  train_cmd->add_option("--bpe-size", tr_bpe_size, "vocabulary size when training one")->capture_default_str();
  train_cmd->add_option("--output", tr_output, "output directory")->required();
  train_cmd->add_option("--seed", tr_seed, "random seed")->required();
  add_model_options(train_cmd, tr_model);
  add_train_options(train_cmd, tr_train_cfg);
  add_config_option(train_cmd);

  // translate
  auto* translate = app.add_subcommand("translate", "Beam-search translation of a source file");
  std::string tl_model, tl_vocab, tl_input, tl_output, tl_ids, tl_scores, tl_variant = "baseline";
  BeamConfig tl_beam;
  translate->add_option("--model", tl_model, "checkpoint")->required();
  translate->add_option("--vocab", tl_vocab, "vocabulary file")->required();
  translate->add_option("--input", tl_input, "source text")->required();
  translate->add_option("--output", tl_output, "hypotheses; stdout if omitted");
  translate->add_option("--ids", tl_ids, "utterance IDs, needed with --scores");
  translate->add_option("--scores", tl_scores, "score CSV for tagging untagged sources");
  translate->add_option("--variant", tl_variant, "dimension used for tagging")->capture_default_str();
  add_beam_options(translate, tl_beam);
  add_config_option(translate);

  // score-bleu
  auto* score_bleu = app.add_subcommand("score-bleu", "Corpus BLEU of hypotheses against one reference");
  std::string sb_hyp, sb_ref, sb_smooth = "exp";
  score_bleu->add_option("--hyp", sb_hyp, "hypothesis file")->required();
  score_bleu->add_option("--ref", sb_ref, "reference file")->required();
  score_bleu->add_option("--smoothing", sb_smooth, "exp or none")->capture_default_str();
  add_config_option(score_bleu);

  // score-ccc
  auto* score_ccc = app.add_subcommand("score-ccc", "Concordance correlation between two score files");
  std::string sc_pred, sc_gold;
  std::vector<std::string> sc_dims;
  score_ccc->add_option("--pred", sc_pred, "predicted score CSV")->required();
  score_ccc->add_option("--gold", sc_gold, "reference score CSV")->required();
  score_ccc->add_option("--dimension", sc_dims, "dimensions to score; all three by default");
  add_config_option(score_ccc);

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Train, decode and score every corpus variant");
  ExperimentSpec spec;
  std::string ex_scores;
  std::vector<std::string> ex_variants;
  add_split_options(experiment, "train", spec.train, true);
  add_split_options(experiment, "dev", spec.dev, true);
  add_split_options(experiment, "test", spec.test, true);
  experiment->add_option("--scores", ex_scores, "score CSV; required for tagged variants");
  experiment->add_option("--variants", ex_variants, "comma-separated subset; all four by default");
  experiment->add_option("--bpe-size", spec.bpe_size, "vocabulary size per variant")->capture_default_str();
  experiment->add_option("--output", spec.output_dir, "output directory")->capture_default_str();
  experiment->add_option("--seed", spec.seed, "random seed")->required();
  experiment->add_flag("--force", spec.force, "retrain even when a matching model exists");
  add_model_options(experiment, spec.model);
  add_train_options(experiment, spec.training);
  add_beam_options(experiment, spec.beam);
  add_config_option(experiment);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  }

  try {
    if (*stats) {
      const ScoreTable scores = load_scores(stats_scores);
      std::vector<std::pair<std::string, std::vector<std::string>>> splits;
      for (const auto& s : stats_splits) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw Error(Errc::InvalidConfig, "--split expects NAME=IDFILE");
        splits.emplace_back(s.substr(0, eq), read_lines(s.substr(eq + 1)));
      }
      const auto report = stats_report(scores, splits);
      const std::string text = stats_format == "csv" ? stats_to_csv(report) : stats_to_text(report);
      if (stats_output.empty()) {
        std::cout << text;
      } else {
        write_text(stats_output, text);
      }
    } else if (*bpe) {
      std::vector<std::string> lines;
      for (const auto& f : bpe_inputs) {
        for (auto& l : read_lines(f)) lines.push_back(std::move(l));
      }
      const BpeVocab vocab = bpe_train(lines, bpe_size);
      save_vocab(vocab, fs::path(bpe_output));
      std::cerr << "vocabulary of " << vocab.size() << " entries, " << vocab.merges().size() << " merges\n";
    } else if (*prepare) {
      const ParallelCorpus corpus = load_corpus(prep_files.source, prep_files.target, prep_files.ids);
      const Variant variant = parse_variant(prep_variant);
      std::optional<ScoreTable> scores;
      if (!prep_scores.empty()) scores = load_scores(prep_scores);
      const SplitCorpora in{corpus, {}, {}};
      const auto out = prepare_variant(in, scores ? &*scores : nullptr, variant);
      save_corpus(out.train, prep_output + ".src", prep_output + ".tgt", fs::path(prep_output + ".ids"));
    } else if (*train_cmd) {
      const ParallelCorpus train_corpus = load_corpus(tr_train.source, tr_train.target, tr_train.ids, Split::Train);
      const ParallelCorpus dev_corpus = load_corpus(tr_dev.source, tr_dev.target, tr_dev.ids, Split::Dev);
      const fs::path dir = tr_output;
      fs::create_directories(dir);
      const BpeVocab vocab = tr_vocab.empty() ? train_vocab(train_corpus, tr_bpe_size) : load_vocab(fs::path(tr_vocab));
      save_vocab(vocab, dir / "vocab.txt");
      tr_model.seed = tr_seed;
      tr_model.vocab_size = static_cast<int>(vocab.size());
      train_and_average(train_corpus, dev_corpus, vocab, tr_model, tr_train_cfg, dir,
                        [](const EpochLog& e, const Checkpoint<ExperimentReal>&) {
                          std::cerr << format_log_row(e) << '\n';
                        });
    } else if (*translate) {
      const auto model = load_checkpoint<ExperimentReal>(fs::path(tl_model)).params;
      const BpeVocab vocab = load_vocab(fs::path(tl_vocab));
      const auto sources = read_lines(tl_input);
      const ParallelCorpus corpus =
          make_corpus(sources, std::vector<std::string>(sources.size(), "-"),
                      tl_ids.empty() ? std::nullopt : std::optional(read_lines(tl_ids)), Split::Test);
      std::map<std::string, EmotionToken> tokens;
      const auto dim = dimension_of(parse_variant(tl_variant));
      if (!tl_scores.empty()) {
        if (!dim) throw Error(Errc::InvalidConfig, "--scores needs a tagged --variant");
        const ScoreTable scores = load_scores(tl_scores);
        for (const auto& p : corpus.pairs) {
          auto it = scores.find(p.id);
          if (it != scores.end()) tokens.emplace(p.id, bin_emotion(it->second, *dim));
        }
      }
      const auto out = translate_corpus(model, vocab, corpus, tl_beam, tl_scores.empty() ? nullptr : &tokens);
      std::vector<std::string> lines;
      for (const auto& [id, text] : out) lines.push_back(text);
      if (tl_output.empty()) {
        for (const auto& l : lines) std::cout << l << '\n';
      } else {
        write_lines(tl_output, lines);
      }
    } else if (*score_bleu) {
      const auto hyps = read_lines(sb_hyp);
      const auto refs = read_lines(sb_ref);
      const Smoothing smoothing = parse_smoothing(sb_smooth);
      const auto b = corpus_bleu(hyps, refs, smoothing);
      std::cout << "BLEU = " << format_fixed(b.score, 2) << ' ';
      for (std::size_t i = 0; i < b.precisions.size(); ++i) {
        std::cout << (i ? "/" : "") << format_fixed(100.0 * b.precisions[i], 1);
      }
      std::cout << " (BP = " << format_fixed(b.brevity_penalty, 3) << " hyp_len = " << b.hyp_len
                << " ref_len = " << b.ref_len << ")\n"
                << bleu_signature(smoothing) << '\n';
    } else if (*score_ccc) {
      const ScoreTable pred = load_scores(sc_pred);
      const ScoreTable gold = load_scores(sc_gold);
      std::vector<Dimension> dims;
      for (const auto& d : sc_dims) dims.push_back(parse_dimension(d));
      if (dims.empty()) dims.assign(kDimensions.begin(), kDimensions.end());
      for (const auto& [id, s] : gold) {
        if (!pred.contains(id)) throw Error(Errc::MissingScore, "no prediction for '" + id + "'");
      }
      for (Dimension d : dims) {
        std::vector<double> p, g;
        for (const auto& [id, s] : gold) {
          g.push_back(s.value(d));
          p.push_back(pred.at(id).value(d));
        }
        std::cout << to_string(d) << ' ' << format_fixed(ccc(p, g), 6) << '\n';
      }
    } else if (*experiment) {
      spec.scores = optional_path(ex_scores);
      if (!ex_variants.empty()) spec.variants = parse_variants(ex_variants);
      const auto table = run_experiment(spec, &std::cerr);
      std::cout << table.to_text();
      int rc = 0;
      for (const auto& r : table.rows) {
        if (!r.ok) rc = std::max(rc, exit_code(r.code));
      }
      return rc;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
