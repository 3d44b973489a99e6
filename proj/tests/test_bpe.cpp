#include <gtest/gtest.h>

#include <sstream>

#include "emonmt/bpe.hpp"
#include "emonmt/random.hpp"
#include "support/tempdir.hpp"

using namespace emonmt;

namespace {

using Merges = std::vector<std::pair<std::string, std::string>>;

BpeVocab train_on(std::vector<std::string> lines, std::size_t size) { return bpe_train(lines, size); }

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

const std::vector<std::string> kSmallCorpus{"low lower lowest low", "newer newest wider wide",
                                            "the widest newer low"};

}  // namespace

TEST(BpeTrain, MostFrequentPairFirst) {
  const auto v = train_on({"aaab aaab"}, 15);
  EXPECT_EQ(v.merges(), (Merges{{"a", "a"}}));
  EXPECT_EQ(v.size(), 15u);
}

TEST(BpeTrain, SingleCharacterHasNoMerges) {
  const auto v = train_on({"a"}, 20);
  EXPECT_TRUE(v.merges().empty());
  EXPECT_EQ(v.size(), default_specials().size() + 2);
  EXPECT_TRUE(v.find("a"));
  EXPECT_TRUE(v.find("a</w>"));
}

TEST(BpeTrain, TieGoesToSmallestPair) {
  const auto v = train_on({"zy zy ab ab"}, 40);
  EXPECT_EQ(v.merges(), (Merges{{"a", "b</w>"}, {"z", "y</w>"}}));
}

// Merge sequence from an independent reference implementation of the same rules.
TEST(BpeTrain, MatchesReferenceMerges) {
  const auto v = bpe_train(kSmallCorpus, 40);
  const Merges expected{{"l", "o"},  {"w", "e"},   {"e", "we"},   {"i", "d"},
                        {"lo", "w</w>"}, {"n", "ewe"}, {"s", "t</w>"}, {"w", "id"}};
  EXPECT_EQ(v.merges(), expected);
  EXPECT_EQ(v.size(), 40u);
}

TEST(BpeTrain, TargetTooSmall) {
  EXPECT_EQ(code_of([] { train_on({"abc"}, 16); }), Errc::TargetTooSmall);
  EXPECT_EQ(code_of([] { train_on({}, 100); }), Errc::EmptyInput);
}

TEST(BpeTrain, SpecialsExcludedFromStatistics) {
  const auto v = train_on({"<AroPos> hi <AroPos> hi", "<ValNeg> hi"}, 30);
  for (const auto& a : v.alphabet()) {
    const std::string base = a.ends_with(kEndOfWord) ? a.substr(0, a.size() - kEndOfWord.size()) : a;
    EXPECT_EQ(base.find('<'), std::string::npos) << a;
    EXPECT_EQ(base.find('A'), std::string::npos) << a;
  }
}

TEST(BpeVocabLayout, SpecialsTakeLowestIds) {
  const auto v = bpe_train(kSmallCorpus, 40);
  const auto specials = default_specials();
  for (std::size_t i = 0; i < specials.size(); ++i) EXPECT_EQ(v.id(specials[i]), static_cast<int>(i));
  EXPECT_EQ(v.id("<pad>"), kPadId);
  EXPECT_EQ(v.id("<unk>"), kUnkId);
  EXPECT_EQ(v.id("<sos>"), kSosId);
  EXPECT_EQ(v.id("<eos>"), kEosId);
  for (int id = 0; id < static_cast<int>(v.size()); ++id) EXPECT_EQ(v.id(v.token(id)), id);
  EXPECT_EQ(code_of([&] { v.token(static_cast<int>(v.size())); }), Errc::UnknownId);
}

TEST(Encode, EmotionTokenIsOneId) {
  const auto v = bpe_train(kSmallCorpus, 40);
  const auto ids = encode(v, "<AroPos> lower");
  ASSERT_GE(ids.size(), 2u);
  EXPECT_EQ(ids.front(), v.id("<AroPos>"));
  EXPECT_EQ(decode(v, ids), "<AroPos> lower");
}

TEST(Encode, EmptyString) {
  const auto v = bpe_train(kSmallCorpus, 40);
  EXPECT_TRUE(encode(v, "").empty());
  EXPECT_TRUE(encode(v, "   ").empty());
}

TEST(Encode, Deterministic) {
  const auto a = bpe_train(kSmallCorpus, 40);
  const auto b = bpe_train(kSmallCorpus, 40);
  EXPECT_EQ(a, b);
  EXPECT_EQ(encode(a, "newest lower wide"), encode(b, "newest lower wide"));
}

TEST(Encode, UnknownCharacters) {
  const auto v = bpe_train(kSmallCorpus, 40);
  const auto ids = encode(v, "low xyz");
  EXPECT_NE(std::find(ids.begin(), ids.end(), kUnkId), ids.end());
  EXPECT_NE(decode(v, ids).find("<unk>"), std::string::npos);
}

TEST(Decode, ControlTokensStripped) {
  const auto v = bpe_train(kSmallCorpus, 40);
  const std::vector<int> ids{kSosId, kEosId};
  EXPECT_EQ(decode(v, ids), "");
  const std::vector<int> bad{999};
  EXPECT_EQ(code_of([&] { decode(v, bad); }), Errc::UnknownId);
}

TEST(Roundtrip, RandomInAlphabetStrings) {
  const std::vector<std::string> corpus{"le chat noir dort près de la fenêtre", "the quick brown fox jumps",
                                        "über café naïve zèbre", "42 + 7 = 49, n'est-ce pas ?"};
  const auto v = bpe_train(corpus, 120);
  std::vector<std::string> chars;
  for (const auto& a : v.alphabet()) {
    if (!a.ends_with(kEndOfWord)) chars.push_back(a);
  }
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string text;
    const auto words = 1 + rng.below(6);
    for (std::uint64_t w = 0; w < words; ++w) {
      if (w) text += ' ';
      const auto len = 1 + rng.below(8);
      for (std::uint64_t c = 0; c < len; ++c) text += chars[rng.below(chars.size())];
    }
    const auto ids = encode(v, text);
    ASSERT_EQ(decode(v, ids), text) << "trial " << trial;
    EXPECT_EQ(std::find(ids.begin(), ids.end(), kUnkId), ids.end());
  }
}

TEST(Atomicity, EveryTokenInEveryVocab) {
  Rng rng(3);
  for (std::size_t size : {40u, 60u, 200u}) {
    std::vector<std::string> corpus = kSmallCorpus;
    corpus.push_back("<AroPos> lower <DomNeg> wider");
    const auto v = bpe_train(corpus, size);
    for (EmotionToken t : kEmotionTokens) {
      const std::string s(surface(t));
      EXPECT_EQ(encode(v, s), std::vector<int>{v.id(s)});
      for (const char* w : {"low", "newest", "x", "<"}) {
        const auto ids = encode(v, s + " " + w);
        EXPECT_EQ(ids.front(), v.id(s));
        EXPECT_EQ(std::count(ids.begin(), ids.end(), v.id(s)), 1);
      }
    }
    EXPECT_LE(v.size(), size);
  }
}

TEST(Serialization, ByteExactRoundTrip) {
  const auto dir = emonmt::testing::fresh_dir();
  const auto v = bpe_train(kSmallCorpus, 40);
  save_vocab(v, dir / "v.txt");
  const auto loaded = load_vocab(dir / "v.txt");
  EXPECT_EQ(loaded, v);
  EXPECT_EQ(vocab_to_string(loaded), read_text(dir / "v.txt"));
  EXPECT_TRUE(read_text(dir / "v.txt").starts_with("bpe-vocab v1 40\n"));
  EXPECT_EQ(encode(loaded, "the widest newer"), encode(v, "the widest newer"));
}

TEST(Serialization, Malformed) {
  for (const char* text : {"", "nope\n", "bpe-vocab v1 40\n#specials x\n", "bpe-vocab v1 40\n#specials 2\n<pad>\n",
                           "bpe-vocab v1 40\n#specials 0\n#alphabet 0\n#merges 1\na b\n"}) {
    std::istringstream in(text);
    EXPECT_EQ(code_of([&] { load_vocab(in); }), Errc::Format) << text;
  }
}

TEST(SplitSpecials, LongestMatch) {
  const std::vector<std::string> specials{"<a>", "<ab>"};
  const auto segs = split_specials("x<ab>y<a>", specials);
  ASSERT_EQ(segs.size(), 4u);
  EXPECT_EQ(segs[1].text, "<ab>");
  EXPECT_TRUE(segs[1].special);
  EXPECT_EQ(segs[3].text, "<a>");
}
