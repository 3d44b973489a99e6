#include <gtest/gtest.h>

#include <algorithm>

#include "emonmt/bleu.hpp"
#include "emonmt/random.hpp"
#include "emonmt/text.hpp"

using namespace emonmt;

namespace {

// Reference values computed with sacrebleu 2.6.0 (13a tokenizer).
const std::vector<std::string> kHyps{
    "The cat sat on the mat, didn't it?",
    "Il a payé 3,50 € pour le billet-2 hier.",
    "le chat noir dort &quot;toujours&quot; ici",
};
const std::vector<std::string> kRefs{
    "The cat was sitting on the mat, wasn't it?",
    "Il a payé 3,50 € pour son billet-2 hier soir.",
    "le chat noir dort \"toujours\" ici",
};

std::string joined(const std::vector<std::string>& tokens) { return join(tokens, " "); }

BleuBreakdown single(const std::string& h, const std::string& r, Smoothing s) {
  const std::vector<std::string> hyp{h}, ref{r};
  return corpus_bleu(hyp, ref, s);
}

}  // namespace

TEST(BleuTokenize, MatchesReference) {
  EXPECT_EQ(joined(bleu_tokenize("Il a payé 3,50 € pour le billet-2 hier.")),
            "Il a payé 3,50 € pour le billet-2 hier .");
  EXPECT_EQ(joined(bleu_tokenize("a-b 12-3 x.y 1.5, (ok) [z] {w} $5 @home")),
            "a-b 12 - 3 x . y 1.5 , ( ok ) [ z ] { w } $ 5 @ home");
  EXPECT_EQ(joined(bleu_tokenize("le chat &quot;x&quot; &amp; &lt;y&gt;")), "le chat \" x \" & < y >");
  EXPECT_EQ(joined(bleu_tokenize("foo<skipped>bar -\nbaz\nqux  ")), "foobar baz qux");
}

TEST(CorpusBleu, ReferenceFixture) {
  for (Smoothing s : {Smoothing::Exp, Smoothing::None}) {
    const auto b = corpus_bleu(kHyps, kRefs, s);
    EXPECT_NEAR(b.score, 59.438720551728736, 1e-9);
    EXPECT_EQ(b.matches, (std::array<std::size_t, 4>{25, 18, 12, 9}));
    EXPECT_EQ(b.totals, (std::array<std::size_t, 4>{28, 25, 22, 19}));
    EXPECT_NEAR(b.brevity_penalty, 0.9310627797040228, 1e-12);
    EXPECT_EQ(b.hyp_len, 28u);
    EXPECT_EQ(b.ref_len, 30u);
  }
}

TEST(CorpusBleu, ExpSmoothingRescuesMissingOrders) {
  const auto exp = single("the quick brown fox jumped over", "the quick brown dog jumped over", Smoothing::Exp);
  EXPECT_NEAR(exp.score, 37.99178428257963, 1e-9);
  EXPECT_EQ(exp.matches, (std::array<std::size_t, 4>{5, 3, 1, 0}));
  EXPECT_EQ(exp.totals, (std::array<std::size_t, 4>{6, 5, 4, 3}));
  EXPECT_EQ(single("the quick brown fox jumped over", "the quick brown dog jumped over", Smoothing::None).score, 0.0);
}

TEST(CorpusBleu, BrevityPenalty) {
  const auto b = single("a b c d e f", "a b x c d y e f g h", Smoothing::Exp);
  EXPECT_NEAR(b.score, 14.435783154609952, 1e-9);
  EXPECT_NEAR(b.brevity_penalty, 0.513417119032592, 1e-12);
}

TEST(CorpusBleu, ZeroOverlapIsZero) {
  for (Smoothing s : {Smoothing::Exp, Smoothing::None}) EXPECT_EQ(single("a b c d e", "v w x y z", s).score, 0.0);
}

TEST(CorpusBleu, IdenticalIsExactlyHundred) {
  EXPECT_EQ(corpus_bleu(kRefs, kRefs).score, 100.0);
  EXPECT_EQ(corpus_bleu(kRefs, kRefs, Smoothing::None).score, 100.0);
}

TEST(CorpusBleu, TooShortForFourGramsIsZero) {
  // No 4-gram exists anywhere, so the geometric mean collapses.
  EXPECT_EQ(single("a b c", "a b c", Smoothing::Exp).score, 0.0);
}

TEST(CorpusBleu, Errors) {
  const std::vector<std::string> one{"a"}, two{"a", "b"}, none;
  try {
    corpus_bleu(one, two);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LengthMismatch);
  }
  try {
    corpus_bleu(none, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyCorpus);
  }
  EXPECT_THROW(parse_smoothing("floor"), Error);
}

TEST(CorpusBleu, RandomizedProperties) {
  Rng rng(11);
  const std::vector<std::string> words{"a", "b", "c", "d", "e", "f", "g", "h"};
  auto sentence = [&] {
    std::string s;
    const auto n = 1 + rng.below(9);
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + words[rng.below(words.size())];
    return s;
  };
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> hyps, refs;
    const auto n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      hyps.push_back(sentence());
      refs.push_back(sentence());
    }
    const auto b = corpus_bleu(hyps, refs);
    EXPECT_GE(b.score, 0.0);
    EXPECT_LE(b.score, 100.0);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<std::string> ph, pr;
    for (auto i : order) {
      ph.push_back(hyps[i]);
      pr.push_back(refs[i]);
    }
    EXPECT_DOUBLE_EQ(corpus_bleu(ph, pr).score, b.score);
  }
}

TEST(BleuSignature, Format) {
  EXPECT_EQ(bleu_signature(), "nrefs:1|case:mixed|eff:no|tok:13a|smooth:exp|version:emonmt-1.0");
  EXPECT_EQ(bleu_signature(Smoothing::None), "nrefs:1|case:mixed|eff:no|tok:13a|smooth:none|version:emonmt-1.0");
}
