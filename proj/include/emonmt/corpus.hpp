#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "emonmt/error.hpp"
#include "emonmt/text.hpp"

namespace emonmt {

enum class Split { Train, Dev, Test };

constexpr std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

inline Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "dev") return Split::Dev;
  if (name == "test") return Split::Test;
  throw Error(Errc::InvalidConfig, "unknown split '" + std::string(name) + "'");
}

struct ParallelPair {
  std::string id;
  std::string source;
  std::string target;

  friend bool operator==(const ParallelPair&, const ParallelPair&) = default;
};

struct ParallelCorpus {
  Split split = Split::Train;
  std::vector<ParallelPair> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }

  std::vector<std::string> sources() const {
    std::vector<std::string> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(p.source);
    return out;
  }
  std::vector<std::string> targets() const {
    std::vector<std::string> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(p.target);
    return out;
  }
  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(p.id);
    return out;
  }
};

/// Trims and collapses whitespace runs to one space. Case is untouched.
inline std::string normalize_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

/// Line-index IDs: "0000", "0001", ... widened when the corpus needs more digits.
inline std::string index_id(std::size_t index, std::size_t count) {
  std::size_t width = 4;
  for (std::size_t n = count > 0 ? count - 1 : 0; n >= 10000; n /= 10) ++width;
  std::string digits = std::to_string(index);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return digits;
}

inline void validate_id(std::string_view id, std::size_t line) {
  if (id.empty()) {
    throw Error(Errc::EmptyLine, "id file line " + std::to_string(line) + " is empty");
  }
  for (char c : id) {
    if (is_space(c)) {
      throw Error(Errc::Format, "id on line " + std::to_string(line) + " contains whitespace");
    }
  }
}

/// Builds a corpus from already-read line vectors (file order preserved).
inline ParallelCorpus make_corpus(const std::vector<std::string>& source_lines,
                                  const std::vector<std::string>& target_lines,
                                  const std::optional<std::vector<std::string>>& id_lines,
                                  Split split = Split::Train) {
  if (source_lines.size() != target_lines.size()) {
    throw Error(Errc::LineCountMismatch, "source has " + std::to_string(source_lines.size()) +
                                             " lines, target has " +
                                             std::to_string(target_lines.size()));
  }
  if (id_lines && id_lines->size() != source_lines.size()) {
    throw Error(Errc::LineCountMismatch, "id file has " + std::to_string(id_lines->size()) +
                                             " lines, source has " +
                                             std::to_string(source_lines.size()));
  }
  ParallelCorpus corpus;
  corpus.split = split;
  corpus.pairs.reserve(source_lines.size());
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < source_lines.size(); ++i) {
    const std::size_t line = i + 1;
    ParallelPair pair;
    pair.source = normalize_text(source_lines[i]);
    pair.target = normalize_text(target_lines[i]);
    if (pair.source.empty()) {
      throw Error(Errc::EmptyLine, "source line " + std::to_string(line) + " is empty");
    }
    if (pair.target.empty()) {
      throw Error(Errc::EmptyLine, "target line " + std::to_string(line) + " is empty");
    }
    if (id_lines) {
      pair.id = normalize_text((*id_lines)[i]);
      validate_id(pair.id, line);
    } else {
      pair.id = index_id(i, source_lines.size());
    }
    if (!seen.insert(pair.id).second) {
      throw Error(Errc::DuplicateId, "id '" + pair.id + "' repeated on line " + std::to_string(line));
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

inline ParallelCorpus load_corpus(const std::filesystem::path& source_path,
                                  const std::filesystem::path& target_path,
                                  const std::optional<std::filesystem::path>& id_path = std::nullopt,
                                  Split split = Split::Train) {
  std::optional<std::vector<std::string>> ids;
  if (id_path) ids = read_lines(*id_path);
  return make_corpus(read_lines(source_path), read_lines(target_path), ids, split);
}

/// Writes normalized text back out; every line (the last included) ends in LF.
inline void save_corpus(const ParallelCorpus& corpus, const std::filesystem::path& source_path,
                        const std::filesystem::path& target_path,
                        const std::optional<std::filesystem::path>& id_path = std::nullopt) {
  write_lines(source_path, corpus.sources());
  write_lines(target_path, corpus.targets());
  if (id_path) write_lines(*id_path, corpus.ids());
}

}  // namespace emonmt
