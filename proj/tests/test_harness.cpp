#include <gtest/gtest.h>

#include <sstream>

#include "emonmt/harness.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace emonmt;
namespace fs = std::filesystem;

namespace {

ExperimentSpec tiny_spec(const fs::path& data, const fs::path& out) {
  ExperimentSpec spec;
  for (auto [files, name] : {std::pair{&spec.train, "train"}, {&spec.dev, "dev"}, {&spec.test, "test"}}) {
    files->source = data / (std::string(name) + ".en");
    files->target = data / (std::string(name) + ".fr");
    files->ids = data / (std::string(name) + ".ids");
  }
  spec.scores = data / "scores.csv";
  spec.model.enc_layers = 1;
  spec.model.dec_layers = 1;
  spec.model.heads = 2;
  spec.model.model_dim = 16;
  spec.model.ff_dim = 32;
  spec.model.max_len = 32;
  spec.training.epochs = 2;
  spec.training.batch_size = 8;
  spec.training.warmup_steps = 10;
  spec.training.avg_top_k = 2;
  spec.beam.beam_size = 2;
  spec.beam.max_len = 12;
  spec.bpe_size = 120;
  spec.output_dir = out;
  return spec;
}

fs::path write_tiny_corpus(const fs::path& dir) {
  const auto corpus = emonmt::testing::make_disambiguation_corpus(3, 24, 6, 6);
  fs::create_directories(dir);
  emonmt::testing::write_synthetic(corpus, dir);
  return dir;
}

}  // namespace

TEST(Variants, Names) {
  for (Variant v : kVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_EQ(dimension_of(Variant::Baseline), std::nullopt);
  EXPECT_EQ(dimension_of(Variant::Valence), Dimension::Valence);
  try {
    parse_variant("mood");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidConfig);
  }
}

TEST(PrepareVariant, TagsSourcesOnly) {
  SplitCorpora c;
  c.train = make_corpus({"I am quite foolish", "so happy"}, {"je suis bête", "si content"},
                        std::vector<std::string>{"u1", "u2"}, Split::Train);
  c.dev = make_corpus({"hello"}, {"salut"}, std::vector<std::string>{"u3"}, Split::Dev);
  c.test = make_corpus({"bye"}, {"adieu"}, std::vector<std::string>{"u4"}, Split::Test);
  const ScoreTable scores{{"u1", {"u1", 0.7, 0.4, 0.2}},
                          {"u2", {"u2", 0.3, 0.6, 0.9}},
                          {"u3", {"u3", 0.5, 0.5, 0.5}},
                          {"u4", {"u4", 0.1, 0.1, 0.1}}};

  const auto base = prepare_variant(c, &scores, Variant::Baseline);
  EXPECT_EQ(base.train.sources(), c.train.sources());

  const auto val = prepare_variant(c, &scores, Variant::Valence);
  EXPECT_EQ(val.train.pairs[0].source, "<ValNeg> I am quite foolish");
  EXPECT_EQ(val.train.pairs[1].source, "<ValPos> so happy");
  EXPECT_EQ(val.dev.pairs[0].source, "<ValPos> hello");
  EXPECT_EQ(val.test.pairs[0].source, "<ValNeg> bye");
  for (Variant v : kVariants) {
    const auto p = prepare_variant(c, &scores, v);
    EXPECT_EQ(p.train.targets(), c.train.targets());
    EXPECT_EQ(p.train.pairs[0].id, "u1");
  }
  EXPECT_EQ(prepare_variant(c, &scores, Variant::Arousal).train.pairs[0].source, "<AroPos> I am quite foolish");
  EXPECT_EQ(prepare_variant(c, &scores, Variant::Dominance).train.pairs[0].source, "<DomNeg> I am quite foolish");
}

TEST(PrepareVariant, MissingScores) {
  SplitCorpora c;
  c.train = make_corpus({"a", "b"}, {"x", "y"}, std::vector<std::string>{"u1", "u2"}, Split::Train);
  c.dev = c.test = c.train;
  const ScoreTable scores{{"u1", {"u1", 0.7, 0.4, 0.2}}};
  try {
    prepare_variant(c, &scores, Variant::Arousal);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingScore);
    EXPECT_NE(std::string(e.what()).find("u2"), std::string::npos);
  }
  EXPECT_THROW(prepare_variant(c, nullptr, Variant::Arousal), Error);
  EXPECT_NO_THROW(prepare_variant(c, nullptr, Variant::Baseline));
}

TEST(ResultsTable, BaselineOnlyHasNoDeltas) {
  ResultsTable t;
  VariantResult r;
  r.ok = true;
  r.dev.score = 30.5;
  r.test.score = 29.25;
  t.rows.push_back(r);
  const auto cells = t.cells();
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[0], (std::vector<std::string>{"variant", "dev", "test"}));
  EXPECT_EQ(cells[1], (std::vector<std::string>{"baseline", "30.50", "29.25"}));
  EXPECT_EQ(t.to_csv(), "variant,dev,test\nbaseline,30.50,29.25\n");
}

TEST(ResultsTable, DeltasAndFailures) {
  ResultsTable t;
  VariantResult base, aro, dom;
  base.ok = aro.ok = true;
  base.dev.score = 30;
  base.test.score = 31;
  aro.variant = Variant::Arousal;
  aro.dev.score = 32.5;
  aro.test.score = 30;
  dom.variant = Variant::Dominance;
  dom.error = "boom";
  t.rows = {base, aro, dom};
  EXPECT_EQ(t.to_csv(),
            "variant,dev,test,delta_dev,delta_test\n"
            "baseline,30.00,31.00,+0.00,+0.00\n"
            "arousal,32.50,30.00,+2.50,-1.00\n"
            "dominance,FAILED,FAILED,FAILED,FAILED\n");
  const auto text = t.to_text();
  EXPECT_NE(text.find("# dominance failed: boom"), std::string::npos);
  EXPECT_NE(text.find("# BLEU " + bleu_signature()), std::string::npos);

  t.rows[0].ok = false;
  EXPECT_EQ(t.cells()[0].size(), 3u);
}

TEST(Stats, ConstantAndGrid) {
  ScoreTable s;
  for (int i = 1; i <= 9; ++i) {
    const std::string id = "g" + std::to_string(i);
    s[id] = {id, i / 10.0, 0.5, 0.5};
  }
  const auto all = stats_report(s);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].split, "all");
  EXPECT_EQ(all[0].count, 9u);
  EXPECT_NEAR(all[0].median, 0.5, 1e-12);
  EXPECT_NEAR(all[0].mean, 0.5, 1e-12);
  EXPECT_NEAR(all[0].q1, 0.3, 1e-12);
  EXPECT_NEAR(all[0].q3, 0.7, 1e-12);
  EXPECT_EQ(all[1].min, 0.5);
  EXPECT_EQ(all[1].max, 0.5);

  const auto split = stats_report(s, {{"a", {"g1", "g2"}}, {"b", {"g9"}}});
  ASSERT_EQ(split.size(), 6u);
  EXPECT_EQ(split[3].split, "b");
  EXPECT_EQ(split[3].count, 1u);
  const auto csv = stats_to_csv(split);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "split,dimension,count,min,q1,median,q3,max,mean");
  EXPECT_NE(csv.find("a,arousal,2,0.1000,"), std::string::npos);
  EXPECT_THROW(stats_report(s, {{"a", {"nope"}}}), Error);
}

TEST(RunExperiment, IsolatesFailedVariantAndResumes) {
  const auto root = emonmt::testing::fresh_dir();
  const auto data = write_tiny_corpus(root / "data");
  // Drop one test utterance from the score file so tagged variants fail.
  auto lines = read_lines(data / "scores.csv");
  lines.pop_back();
  write_lines(data / "partial.csv", lines);

  auto spec = tiny_spec(data, root / "out");
  spec.scores = data / "partial.csv";
  spec.variants = {Variant::Baseline, Variant::Arousal};
  std::ostringstream log;
  const auto table = run_experiment(spec, &log);
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_TRUE(table.rows[0].ok);
  EXPECT_FALSE(table.rows[1].ok);
  EXPECT_EQ(table.rows[1].code, Errc::MissingScore);
  EXPECT_GE(table.rows[0].test.score, 0.0);
  for (const char* f : {"report.txt", "report.csv", "baseline/model.ckpt", "baseline/vocab.txt",
                        "baseline/train_log.csv", "baseline/test.hyp", "baseline/bleu.txt", "baseline/run.hash"}) {
    EXPECT_TRUE(fs::exists(spec.output_dir / f)) << f;
  }
  EXPECT_EQ(read_lines(spec.output_dir / "baseline/test.hyp").size(), 6u);
  EXPECT_NE(read_text(spec.output_dir / "report.txt").find("arousal failed"), std::string::npos);

  std::ostringstream again;
  spec.variants = {Variant::Baseline};
  const auto second = run_experiment(spec, &again);
  EXPECT_NE(again.str().find("reusing"), std::string::npos);
  EXPECT_EQ(second.rows[0].test.score, table.rows[0].test.score);
  EXPECT_EQ(read_text(spec.output_dir / "report.csv"),
            "variant,dev,test\nbaseline," + format_fixed(second.rows[0].dev.score, 2) + "," +
                format_fixed(second.rows[0].test.score, 2) + "\n");

  std::ostringstream forced;
  spec.force = true;
  const auto third = run_experiment(spec, &forced);
  EXPECT_EQ(forced.str().find("reusing"), std::string::npos);
  EXPECT_EQ(third.rows[0].test.score, table.rows[0].test.score);
}

TEST(RunExperiment, TaggedVariantTrains) {
  const auto root = emonmt::testing::fresh_dir();
  const auto data = write_tiny_corpus(root / "data");
  auto spec = tiny_spec(data, root / "out");
  spec.variants = {Variant::Valence};
  const auto table = run_experiment(spec);
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_TRUE(table.rows[0].ok) << table.rows[0].error;
  const auto src = read_lines(spec.output_dir / "valence/train.src");
  ASSERT_EQ(src.size(), 24u);
  for (const auto& s : src) EXPECT_TRUE(s.starts_with("<ValPos> ") || s.starts_with("<ValNeg> ")) << s;
}

TEST(RunExperiment, InvalidConfigRejectedUpFront) {
  const auto root = emonmt::testing::fresh_dir();
  auto spec = tiny_spec(write_tiny_corpus(root / "data"), root / "out");
  spec.model.heads = 3;
  try {
    run_experiment(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidConfig);
  }
}
