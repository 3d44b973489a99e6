#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "emonmt/emotion.hpp"
#include "emonmt/error.hpp"
#include "emonmt/text.hpp"

namespace emonmt {

/// Suffix marking the last symbol of a word.
inline constexpr std::string_view kEndOfWord = "</w>";

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kSosId = 2;
inline constexpr int kEosId = 3;

inline std::vector<std::string> default_specials() {
  std::vector<std::string> out{"<pad>", "<unk>", "<sos>", "<eos>"};
  for (EmotionToken t : kEmotionTokens) out.emplace_back(surface(t));
  return out;
}

/// A piece of input text: either a reserved special surface or ordinary text.
struct TextSegment {
  std::string text;
  bool special = false;
};

/// Cuts out special surfaces, scanning left to right and preferring the
/// longest surface at each position.
inline std::vector<TextSegment> split_specials(std::string_view text,
                                               std::span<const std::string> specials) {
  std::vector<TextSegment> out;
  std::size_t plain_start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t best = 0;
    if (text[i] == '<') {
      for (const auto& s : specials) {
        if (s.size() > best && text.substr(i, s.size()) == s) best = s.size();
      }
    }
    if (best == 0) {
      ++i;
      continue;
    }
    if (i > plain_start) out.push_back({std::string(text.substr(plain_start, i - plain_start)), false});
    out.push_back({std::string(text.substr(i, best)), true});
    i += best;
    plain_start = i;
  }
  if (plain_start < text.size()) out.push_back({std::string(text.substr(plain_start)), false});
  return out;
}

/// Learned BPE model. IDs: specials first (in the order given), then the
/// base alphabet in byte order, then one ID per distinct merged symbol in
/// merge order.
class BpeVocab {
 public:
  BpeVocab() = default;

  BpeVocab(std::size_t target_size, std::vector<std::string> specials,
           std::vector<std::string> alphabet,
           std::vector<std::pair<std::string, std::string>> merges)
      : target_size_(target_size),
        specials_(std::move(specials)),
        alphabet_(std::move(alphabet)),
        merges_(std::move(merges)) {
    rebuild();
  }

  std::size_t target_size() const noexcept { return target_size_; }
  std::size_t size() const noexcept { return id_to_token_.size(); }
  const std::vector<std::string>& specials() const noexcept { return specials_; }
  const std::vector<std::string>& alphabet() const noexcept { return alphabet_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const noexcept { return merges_; }

  bool is_special(int id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < specials_.size();
  }

  std::optional<int> find(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
  }

  int id(std::string_view token) const {
    auto found = find(token);
    if (!found) throw Error(Errc::UnknownId, "token '" + std::string(token) + "' not in vocabulary");
    return *found;
  }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
      throw Error(Errc::UnknownId, "id " + std::to_string(id) + " outside vocabulary of " +
                                       std::to_string(id_to_token_.size()));
    }
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  /// Rank and result of merging two adjacent symbols, if such a rule exists.
  std::optional<std::pair<std::size_t, int>> merge_rule(int left, int right) const {
    auto it = merge_rank_.find(pair_key(left, right));
    if (it == merge_rank_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const BpeVocab& a, const BpeVocab& b) {
    return a.target_size_ == b.target_size_ && a.specials_ == b.specials_ &&
           a.alphabet_ == b.alphabet_ && a.merges_ == b.merges_;
  }

 private:
  static std::uint64_t pair_key(int left, int right) noexcept {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(left)) << 32) |
           static_cast<std::uint32_t>(right);
  }

  int intern(const std::string& token) {
    auto [it, inserted] = token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
    if (inserted) id_to_token_.push_back(token);
    return it->second;
  }

  void rebuild() {
    token_to_id_.clear();
    id_to_token_.clear();
    merge_rank_.clear();
    for (const auto& s : specials_) {
      if (token_to_id_.contains(s)) throw Error(Errc::Format, "duplicate special '" + s + "'");
      intern(s);
    }
    for (const auto& a : alphabet_) {
      if (token_to_id_.contains(a)) throw Error(Errc::Format, "alphabet symbol '" + a + "' repeated");
      intern(a);
    }
    for (std::size_t rank = 0; rank < merges_.size(); ++rank) {
      const auto& [left, right] = merges_[rank];
      auto l = token_to_id_.find(left);
      auto r = token_to_id_.find(right);
      if (l == token_to_id_.end() || r == token_to_id_.end()) {
        throw Error(Errc::Format, "merge '" + left + " " + right + "' uses an unknown symbol");
      }
      const int merged = intern(left + right);
      merge_rank_.emplace(pair_key(l->second, r->second), std::pair{rank, merged});
    }
  }

  std::size_t target_size_ = 0;
  std::vector<std::string> specials_;
  std::vector<std::string> alphabet_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  std::unordered_map<std::uint64_t, std::pair<std::size_t, int>> merge_rank_;
};

namespace detail {

inline std::vector<std::string> word_symbols(std::string_view word) {
  auto chars = utf8_chars(word);
  if (!chars.empty()) chars.back() += kEndOfWord;
  return chars;
}

}  // namespace detail

/// Greedy merge learning. Every character seen gets both its word-internal
/// and word-final symbol so any string over the training alphabet encodes
/// without <unk>. Ties between equally frequent pairs go to the
/// lexicographically smallest (left, right).
inline BpeVocab bpe_train(std::span<const std::string> corpus, std::size_t target_size,
                          std::vector<std::string> specials = default_specials()) {
  if (corpus.empty()) throw Error(Errc::EmptyInput, "bpe_train needs a non-empty corpus");

  std::map<std::string, std::int64_t> word_counts;
  std::set<std::string> chars;
  for (const auto& line : corpus) {
    for (const auto& segment : split_specials(normalize_text(line), specials)) {
      if (segment.special) continue;
      for (auto& word : split_whitespace(segment.text)) {
        for (auto& c : utf8_chars(word)) chars.insert(std::move(c));
        ++word_counts[std::move(word)];
      }
    }
  }
  std::vector<std::string> alphabet;
  for (const auto& c : chars) {
    alphabet.push_back(c);
    alphabet.push_back(c + std::string(kEndOfWord));
  }
  std::sort(alphabet.begin(), alphabet.end());
  if (target_size <= specials.size() + alphabet.size()) {
    throw Error(Errc::TargetTooSmall,
                "target size " + std::to_string(target_size) + " leaves no room beyond " +
                    std::to_string(specials.size()) + " specials and " +
                    std::to_string(alphabet.size()) + " alphabet symbols");
  }

  // Symbols are interned as ints during training; strings only matter for
  // tie-breaking and for the final rules.
  std::vector<std::string> names;
  std::unordered_map<std::string, int> ids;
  auto intern = [&](const std::string& s) {
    auto [it, inserted] = ids.emplace(s, static_cast<int>(names.size()));
    if (inserted) names.push_back(s);
    return it->second;
  };
  struct Word {
    std::vector<int> symbols;
    std::int64_t count;
  };
  std::vector<Word> words;
  words.reserve(word_counts.size());
  for (const auto& [word, count] : word_counts) {
    Word w{{}, count};
    for (const auto& s : detail::word_symbols(word)) w.symbols.push_back(intern(s));
    words.push_back(std::move(w));
  }

  std::set<std::string> vocab(specials.begin(), specials.end());
  vocab.insert(alphabet.begin(), alphabet.end());
  std::vector<std::pair<std::string, std::string>> merges;

  std::unordered_map<std::uint64_t, std::int64_t> pair_counts;
  while (vocab.size() < target_size) {
    pair_counts.clear();
    for (const auto& w : words) {
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
        const std::uint64_t key = (static_cast<std::uint64_t>(w.symbols[i]) << 32) |
                                  static_cast<std::uint32_t>(w.symbols[i + 1]);
        pair_counts[key] += w.count;
      }
    }
    std::int64_t best_count = 0;
    std::uint64_t best_key = 0;
    for (const auto& [key, count] : pair_counts) {
      if (count < best_count) continue;
      if (count > best_count) {
        best_count = count;
        best_key = key;
        continue;
      }
      const auto& l = names[key >> 32];
      const auto& r = names[key & 0xFFFFFFFFu];
      const auto& bl = names[best_key >> 32];
      const auto& br = names[best_key & 0xFFFFFFFFu];
      if (std::tie(l, r) < std::tie(bl, br)) best_key = key;
    }
    if (best_count < 2) break;

    const int left = static_cast<int>(best_key >> 32);
    const int right = static_cast<int>(best_key & 0xFFFFFFFFu);
    const std::string merged_name = names[static_cast<std::size_t>(left)] +
                                    names[static_cast<std::size_t>(right)];
    merges.emplace_back(names[static_cast<std::size_t>(left)], names[static_cast<std::size_t>(right)]);
    vocab.insert(merged_name);
    const int merged = intern(merged_name);
    for (auto& w : words) {
      std::vector<int>& s = w.symbols;
      std::size_t out = 0;
      for (std::size_t i = 0; i < s.size();) {
        if (i + 1 < s.size() && s[i] == left && s[i + 1] == right) {
          s[out++] = merged;
          i += 2;
        } else {
          s[out++] = s[i++];
        }
      }
      s.resize(out);
    }
  }
  return BpeVocab(target_size, std::move(specials), std::move(alphabet), std::move(merges));
}

namespace detail {

inline void encode_word(const BpeVocab& vocab, std::string_view word, std::vector<int>& out) {
  std::vector<int> symbols;
  for (const auto& s : word_symbols(word)) symbols.push_back(vocab.find(s).value_or(kUnkId));
  while (symbols.size() > 1) {
    std::size_t best_rank = SIZE_MAX;
    int left = 0, right = 0, merged = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      if (auto rule = vocab.merge_rule(symbols[i], symbols[i + 1]); rule && rule->first < best_rank) {
        best_rank = rule->first;
        left = symbols[i];
        right = symbols[i + 1];
        merged = rule->second;
      }
    }
    if (best_rank == SIZE_MAX) break;
    std::size_t o = 0;
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        symbols[o++] = merged;
        i += 2;
      } else {
        symbols[o++] = symbols[i++];
      }
    }
    symbols.resize(o);
  }
  out.insert(out.end(), symbols.begin(), symbols.end());
}

}  // namespace detail

/// Special surfaces become single IDs; everything else is split on
/// whitespace and segmented word by word.
inline std::vector<int> encode(const BpeVocab& vocab, std::string_view text) {
  std::vector<int> ids;
  for (const auto& segment : split_specials(text, vocab.specials())) {
    if (segment.special) {
      ids.push_back(vocab.id(segment.text));
      continue;
    }
    for (const auto& word : split_whitespace(segment.text)) detail::encode_word(vocab, word, ids);
  }
  return ids;
}

/// Joins surfaces, turning word-final markers back into spaces. Control
/// tokens are dropped; <unk> is kept literally, so the mapping is lossy for
/// text outside the training alphabet.
inline std::string decode(const BpeVocab& vocab, std::span<const int> ids) {
  std::string text;
  for (int id : ids) {
    const std::string& tok = vocab.token(id);
    if (id == kPadId || id == kSosId || id == kEosId) continue;
    if (vocab.is_special(id) && id != kUnkId) {
      text += tok;
      text += ' ';
    } else if (tok.size() >= kEndOfWord.size() && tok.ends_with(kEndOfWord) && !vocab.is_special(id)) {
      text.append(tok, 0, tok.size() - kEndOfWord.size());
      text += ' ';
    } else {
      text += tok;
    }
  }
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

inline constexpr std::string_view kVocabMagic = "bpe-vocab v1";

/// Text format: the header line "bpe-vocab v1 <target_size>", then three
/// counted sections (specials, alphabet, merges as "left right").
inline void save_vocab(const BpeVocab& vocab, std::ostream& out) {
  out << kVocabMagic << ' ' << vocab.target_size() << '\n';
  out << "#specials " << vocab.specials().size() << '\n';
  for (const auto& s : vocab.specials()) out << s << '\n';
  out << "#alphabet " << vocab.alphabet().size() << '\n';
  for (const auto& a : vocab.alphabet()) out << a << '\n';
  out << "#merges " << vocab.merges().size() << '\n';
  for (const auto& [l, r] : vocab.merges()) out << l << ' ' << r << '\n';
}

inline std::string vocab_to_string(const BpeVocab& vocab) {
  std::ostringstream out;
  save_vocab(vocab, out);
  return out.str();
}

inline BpeVocab load_vocab(std::istream& in) {
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw Error(Errc::Format, std::string("vocab truncated before ") + what);
    return line;
  };
  const std::string header = next("header");
  if (!header.starts_with(kVocabMagic)) throw Error(Errc::Format, "not a bpe-vocab v1 file");
  std::size_t target = 0;
  {
    std::istringstream h(header.substr(kVocabMagic.size()));
    if (!(h >> target)) throw Error(Errc::Format, "vocab header lacks target size");
  }
  auto section = [&](std::string_view name) {
    const std::string l = next(name.data());
    const std::string prefix = "#" + std::string(name) + " ";
    if (!l.starts_with(prefix)) throw Error(Errc::Format, "expected section '" + prefix + "'");
    std::size_t n = 0;
    const char* first = l.data() + prefix.size();
    const char* last = l.data() + l.size();
    const auto [ptr, ec] = std::from_chars(first, last, n);
    if (ec != std::errc() || ptr != last) throw Error(Errc::Format, "bad count in '" + l + "'");
    return n;
  };
  std::vector<std::string> specials, alphabet;
  std::vector<std::pair<std::string, std::string>> merges;
  for (std::size_t n = section("specials"); n > 0; --n) specials.push_back(next("specials"));
  for (std::size_t n = section("alphabet"); n > 0; --n) alphabet.push_back(next("alphabet"));
  for (std::size_t n = section("merges"); n > 0; --n) {
    const std::string l = next("merges");
    const auto space = l.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 == l.size()) {
      throw Error(Errc::Format, "malformed merge line '" + l + "'");
    }
    merges.emplace_back(l.substr(0, space), l.substr(space + 1));
  }
  return BpeVocab(target, std::move(specials), std::move(alphabet), std::move(merges));
}

inline void save_vocab(const BpeVocab& vocab, const std::filesystem::path& path) {
  write_text(path, vocab_to_string(vocab));
}

inline BpeVocab load_vocab(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  return load_vocab(in);
}

}  // namespace emonmt
