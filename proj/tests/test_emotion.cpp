#include <gtest/gtest.h>

#include <cmath>

#include "emonmt/emotion.hpp"
#include "emonmt/random.hpp"
#include "support/tempdir.hpp"

using namespace emonmt;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

}  // namespace

TEST(Tokens, SurfaceForms) {
  EXPECT_EQ(surface(EmotionToken::AroNeg), "<AroNeg>");
  EXPECT_EQ(surface(EmotionToken::AroPos), "<AroPos>");
  EXPECT_EQ(surface(EmotionToken::DomNeg), "<DomNeg>");
  EXPECT_EQ(surface(EmotionToken::DomPos), "<DomPos>");
  EXPECT_EQ(surface(EmotionToken::ValNeg), "<ValNeg>");
  EXPECT_EQ(surface(EmotionToken::ValPos), "<ValPos>");
  for (EmotionToken t : kEmotionTokens) {
    EXPECT_EQ(parse_emotion_token(surface(t)), t);
    EXPECT_EQ(flipped(flipped(t)), t);
    EXPECT_NE(is_positive(t), is_positive(flipped(t)));
    EXPECT_EQ(dimension_of(flipped(t)), dimension_of(t));
  }
  EXPECT_FALSE(parse_emotion_token("<aropos>"));
}

TEST(Tokens, DimensionNames) {
  for (Dimension d : kDimensions) EXPECT_EQ(parse_dimension(to_string(d)), d);
  EXPECT_EQ(to_string(Dimension::Arousal), "arousal");
  EXPECT_EQ(code_of([] { parse_dimension("joy"); }), Errc::InvalidConfig);
}

TEST(Scores, ParsesRow) {
  const auto t = parse_scores({"id,arousal,dominance,valence", "utt1,0.62,0.50,0.31"});
  ASSERT_EQ(t.size(), 1u);
  const auto& s = t.at("utt1");
  EXPECT_DOUBLE_EQ(s.arousal, 0.62);
  EXPECT_DOUBLE_EQ(s.dominance, 0.50);
  EXPECT_DOUBLE_EQ(s.valence, 0.31);
}

TEST(Scores, HeaderOnlyIsEmpty) {
  EXPECT_TRUE(parse_scores({"id,arousal,dominance,valence"}).empty());
}

TEST(Scores, ColumnsFoundByName) {
  const auto t = parse_scores({"valence,id,dominance,arousal", "0.1,u,0.2,0.3"});
  EXPECT_DOUBLE_EQ(t.at("u").arousal, 0.3);
  EXPECT_DOUBLE_EQ(t.at("u").valence, 0.1);
}

TEST(Scores, Errors) {
  EXPECT_EQ(code_of([] { parse_scores({"id,arousal,dominance,valence", "utt1,1.2,0.5,0.5"}); }), Errc::OutOfRange);
  EXPECT_EQ(code_of([] { parse_scores({"id,arousal,dominance,valence", "utt1,-0.1,0.5,0.5"}); }), Errc::OutOfRange);
  EXPECT_EQ(code_of([] { parse_scores({"id,arousal,dominance,valence", "utt1,nan,0.5,0.5"}); }), Errc::OutOfRange);
  EXPECT_EQ(code_of([] { parse_scores({"id,arousal,valence", "utt1,0.5,0.5"}); }), Errc::MissingColumn);
  EXPECT_EQ(code_of([] { parse_scores({"id,arousal,dominance,valence", "utt1,0.5,0.5"}); }), Errc::MissingColumn);
  EXPECT_EQ(code_of([] { parse_scores({}); }), Errc::MissingColumn);
  EXPECT_EQ(code_of([] {
              parse_scores({"id,arousal,dominance,valence", "u,0.1,0.1,0.1", "u,0.2,0.2,0.2"});
            }),
            Errc::DuplicateId);
  EXPECT_EQ(code_of([] { parse_scores({"id,arousal,dominance,valence", "u,abc,0.1,0.1"}); }), Errc::Format);
}

TEST(Scores, SaveLoadRoundTrip) {
  const auto dir = emonmt::testing::fresh_dir();
  std::vector<EmotionScores> rows{{"a", 0.1, 0.2, 0.3}, {"b", 1.0 / 3.0, 0.5, 1.0}};
  save_scores(dir / "s.csv", rows);
  const auto t = load_scores(dir / "s.csv");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.at("b").arousal, 1.0 / 3.0);
  EXPECT_EQ(t.at("a").valence, 0.3);
}

TEST(Binning, Examples) {
  EXPECT_EQ(bin_emotion({"u", 0.62, 0.5, 0.5}, Dimension::Arousal), EmotionToken::AroPos);
  EXPECT_EQ(bin_emotion({"u", 0.5, 0.30, 0.5}, Dimension::Dominance), EmotionToken::DomNeg);
  EXPECT_EQ(bin_emotion({"u", 0.5, 0.5, 0.5}, Dimension::Valence), EmotionToken::ValPos);
}

TEST(Binning, PolarityAndDimensionOnRandomValues) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform();
    for (Dimension d : kDimensions) {
      const auto t = bin_value(v, d);
      EXPECT_EQ(dimension_of(t), d);
      if (v != 0.5) {
        EXPECT_EQ(is_positive(t), v > 0.5);
      }
    }
  }
}

TEST(Injection, WorkedExample) {
  const ParallelPair p{"u1", "I am quite foolish", "Je suis toute sotte"};
  const auto tagged = inject_token(p, EmotionToken::ValNeg);
  EXPECT_EQ(tagged.source, "<ValNeg> I am quite foolish");
  EXPECT_EQ(tagged.target, "Je suis toute sotte");
  EXPECT_EQ(tagged.id, "u1");
  const auto stripped = strip_token(tagged.source);
  ASSERT_TRUE(stripped);
  EXPECT_EQ(stripped->first, EmotionToken::ValNeg);
  EXPECT_EQ(stripped->second, p.source);
}

TEST(Injection, TwiceIsRejected) {
  const ParallelPair p{"u1", "hello", "salut"};
  const auto once = inject_token(p, EmotionToken::AroPos);
  EXPECT_EQ(code_of([&] { inject_token(once, EmotionToken::DomNeg); }), Errc::AlreadyTagged);
}

TEST(Injection, ExactlyOneToken) {
  for (EmotionToken t : kEmotionTokens) {
    const auto tagged = inject_token({"x", "a b c", "d"}, t);
    int count = 0;
    for (EmotionToken u : kEmotionTokens) {
      for (auto pos = tagged.source.find(surface(u)); pos != std::string::npos;
           pos = tagged.source.find(surface(u), pos + 1)) {
        ++count;
      }
    }
    EXPECT_EQ(count, 1);
  }
  EXPECT_FALSE(strip_token("hello world"));
}

TEST(Distribution, ConstantData) {
  const std::vector<double> v{0.5, 0.5, 0.5};
  const auto s = distribution_stats(std::span<const double>(v), Dimension::Arousal);
  EXPECT_EQ(s.min, 0.5);
  EXPECT_EQ(s.q1, 0.5);
  EXPECT_EQ(s.median, 0.5);
  EXPECT_EQ(s.q3, 0.5);
  EXPECT_EQ(s.max, 0.5);
  EXPECT_EQ(s.count, 3u);
}

TEST(Distribution, OddLength) {
  const std::vector<double> v{0.9, 0.1, 0.5};
  const auto s = distribution_stats(std::span<const double>(v), Dimension::Valence);
  EXPECT_DOUBLE_EQ(s.median, 0.5);
  EXPECT_DOUBLE_EQ(s.min, 0.1);
  EXPECT_DOUBLE_EQ(s.max, 0.9);
}

// Positions 0.75 and 2.25 of the sorted data.
TEST(Distribution, QuartilesByLinearInterpolation) {
  const std::vector<double> v{0.2, 0.4, 0.6, 0.8};
  const auto s = distribution_stats(std::span<const double>(v), Dimension::Dominance);
  EXPECT_NEAR(s.q1, 0.35, 1e-12);
  EXPECT_NEAR(s.median, 0.5, 1e-12);
  EXPECT_NEAR(s.q3, 0.65, 1e-12);
  EXPECT_NEAR(s.mean, 0.5, 1e-12);
}

TEST(Distribution, EmptyInput) {
  EXPECT_EQ(code_of([] { distribution_stats(std::span<const double>(), Dimension::Arousal); }), Errc::EmptyInput);
}

TEST(Distribution, OrderingOnRandomData) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng.below(50));
    for (auto& x : v) x = rng.uniform();
    const auto s = distribution_stats(std::span<const double>(v), Dimension::Arousal);
    EXPECT_LE(s.min, s.q1);
    EXPECT_LE(s.q1, s.median);
    EXPECT_LE(s.median, s.q3);
    EXPECT_LE(s.q3, s.max);
  }
}

TEST(Ccc, IdentityAndConstant) {
  const std::vector<double> x{0.1, 0.4, 0.35, 0.9};
  EXPECT_NEAR(ccc(x, x), 1.0, 1e-12);
  const std::vector<double> c{0.5, 0.5, 0.5, 0.5};
  EXPECT_EQ(ccc(c, x), 0.0);
}

// 2·cov / (var_p + var_g + (mean_p - mean_g)^2) = (2/150) / (4/150 + 1/100) = 4/7.
TEST(Ccc, ClosedFormFixture) {
  const std::vector<double> pred{0.1, 0.2, 0.3};
  const std::vector<double> gold{0.2, 0.3, 0.4};
  EXPECT_NEAR(ccc(pred, gold), 0.5714285714285714, 1e-9);
}

TEST(Ccc, Errors) {
  const std::vector<double> a{0.1, 0.2}, b{0.1, 0.2, 0.3}, one{0.5}, c{0.3, 0.3};
  EXPECT_EQ(code_of([&] { ccc(a, b); }), Errc::LengthMismatch);
  EXPECT_EQ(code_of([&] { ccc(one, one); }), Errc::LengthMismatch);
  EXPECT_EQ(code_of([&] { ccc(c, c); }), Errc::Degenerate);
}

TEST(Ccc, RandomizedProperties) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform();
      y[i] = rng.uniform();
    }
    const double v = ccc(x, y);
    EXPECT_LE(std::abs(v), 1.0);
    EXPECT_NEAR(v, ccc(y, x), 1e-12);
    std::vector<double> shifted = x;
    for (auto& s : shifted) s += 0.25;
    EXPECT_LT(ccc(x, shifted), 1.0);
  }
}
