#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "emonmt/corpus.hpp"
#include "emonmt/error.hpp"
#include "emonmt/text.hpp"

namespace emonmt {

enum class Dimension { Arousal, Dominance, Valence };

inline constexpr std::array<Dimension, 3> kDimensions{Dimension::Arousal, Dimension::Dominance,
                                                       Dimension::Valence};

constexpr std::string_view to_string(Dimension dim) noexcept {
  switch (dim) {
    case Dimension::Arousal: return "arousal";
    case Dimension::Dominance: return "dominance";
    case Dimension::Valence: return "valence";
  }
  return "arousal";
}

inline Dimension parse_dimension(std::string_view name) {
  for (Dimension d : kDimensions) {
    if (to_string(d) == name) return d;
  }
  throw Error(Errc::InvalidConfig, "unknown emotion dimension '" + std::string(name) + "'");
}

enum class EmotionToken { AroNeg, AroPos, DomNeg, DomPos, ValNeg, ValPos };

inline constexpr std::array<EmotionToken, 6> kEmotionTokens{
    EmotionToken::AroNeg, EmotionToken::AroPos, EmotionToken::DomNeg,
    EmotionToken::DomPos, EmotionToken::ValNeg, EmotionToken::ValPos};

constexpr std::string_view surface(EmotionToken token) noexcept {
  switch (token) {
    case EmotionToken::AroNeg: return "<AroNeg>";
    case EmotionToken::AroPos: return "<AroPos>";
    case EmotionToken::DomNeg: return "<DomNeg>";
    case EmotionToken::DomPos: return "<DomPos>";
    case EmotionToken::ValNeg: return "<ValNeg>";
    case EmotionToken::ValPos: return "<ValPos>";
  }
  return "<AroNeg>";
}

inline std::optional<EmotionToken> parse_emotion_token(std::string_view text) {
  for (EmotionToken t : kEmotionTokens) {
    if (surface(t) == text) return t;
  }
  return std::nullopt;
}

constexpr Dimension dimension_of(EmotionToken token) noexcept {
  switch (token) {
    case EmotionToken::AroNeg:
    case EmotionToken::AroPos: return Dimension::Arousal;
    case EmotionToken::DomNeg:
    case EmotionToken::DomPos: return Dimension::Dominance;
    case EmotionToken::ValNeg:
    case EmotionToken::ValPos: return Dimension::Valence;
  }
  return Dimension::Arousal;
}

constexpr bool is_positive(EmotionToken token) noexcept {
  return token == EmotionToken::AroPos || token == EmotionToken::DomPos ||
         token == EmotionToken::ValPos;
}

/// The opposite polarity on the same dimension.
constexpr EmotionToken flipped(EmotionToken token) noexcept {
  switch (token) {
    case EmotionToken::AroNeg: return EmotionToken::AroPos;
    case EmotionToken::AroPos: return EmotionToken::AroNeg;
    case EmotionToken::DomNeg: return EmotionToken::DomPos;
    case EmotionToken::DomPos: return EmotionToken::DomNeg;
    case EmotionToken::ValNeg: return EmotionToken::ValPos;
    case EmotionToken::ValPos: return EmotionToken::ValNeg;
  }
  return token;
}

struct EmotionScores {
  std::string id;
  double arousal = 0.5;
  double dominance = 0.5;
  double valence = 0.5;

  double value(Dimension dim) const noexcept {
    switch (dim) {
      case Dimension::Arousal: return arousal;
      case Dimension::Dominance: return dominance;
      case Dimension::Valence: return valence;
    }
    return arousal;
  }
};

using ScoreTable = std::map<std::string, EmotionScores>;

inline constexpr std::string_view kScoreHeader = "id,arousal,dominance,valence";

/// Parses the score CSV. Columns are located by header name.
inline ScoreTable parse_scores(const std::vector<std::string>& lines) {
  ScoreTable table;
  if (lines.empty()) throw Error(Errc::MissingColumn, "score file has no header");
  std::string header_line = lines.front();
  if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
  const auto header = split(header_line, ',');
  auto column = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (normalize_text(header[i]) == name) return i;
    }
    throw Error(Errc::MissingColumn, "score header lacks column '" + std::string(name) + "'");
  };
  const std::size_t id_col = column("id");
  const std::array<std::size_t, 3> value_cols{column("arousal"), column("dominance"),
                                              column("valence")};
  for (std::size_t row = 1; row < lines.size(); ++row) {
    std::string line = lines[row];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (normalize_text(line).empty()) continue;
    const auto fields = split(line, ',');
    const std::string where = "score row " + std::to_string(row + 1);
    if (fields.size() < header.size()) throw Error(Errc::MissingColumn, where + " has too few fields");
    EmotionScores s;
    s.id = normalize_text(fields[id_col]);
    if (s.id.empty()) throw Error(Errc::Format, where + " has an empty id");
    std::array<double, 3> v{};
    for (std::size_t k = 0; k < 3; ++k) {
      if (!parse_real(fields[value_cols[k]], v[k])) {
        throw Error(Errc::Format, where + ": cannot parse '" + fields[value_cols[k]] + "'");
      }
      if (!std::isfinite(v[k]) || v[k] < 0.0 || v[k] > 1.0) {
        throw Error(Errc::OutOfRange, where + ": " + std::string(to_string(kDimensions[k])) +
                                          " value " + fields[value_cols[k]] + " outside [0,1]");
      }
    }
    s.arousal = v[0];
    s.dominance = v[1];
    s.valence = v[2];
    if (table.contains(s.id)) throw Error(Errc::DuplicateId, where + ": id '" + s.id + "' repeated");
    table.emplace(s.id, std::move(s));
  }
  return table;
}

inline ScoreTable load_scores(const std::filesystem::path& path) {
  return parse_scores(read_lines(path));
}

inline void save_scores(const std::filesystem::path& path, const std::vector<EmotionScores>& rows) {
  std::vector<std::string> lines{std::string(kScoreHeader)};
  for (const auto& s : rows) {
    std::ostringstream line;
    line.imbue(std::locale::classic());
    line.precision(17);
    line << s.id << ',' << s.arousal << ',' << s.dominance << ',' << s.valence;
    lines.push_back(line.str());
  }
  write_lines(path, lines);
}

/// Polarity token for one dimension. A score of exactly 0.5 counts as positive.
constexpr EmotionToken bin_value(double value, Dimension dim) noexcept {
  const bool positive = value >= 0.5;
  switch (dim) {
    case Dimension::Arousal: return positive ? EmotionToken::AroPos : EmotionToken::AroNeg;
    case Dimension::Dominance: return positive ? EmotionToken::DomPos : EmotionToken::DomNeg;
    case Dimension::Valence: return positive ? EmotionToken::ValPos : EmotionToken::ValNeg;
  }
  return EmotionToken::AroPos;
}

inline EmotionToken bin_emotion(const EmotionScores& scores, Dimension dim) noexcept {
  return bin_value(scores.value(dim), dim);
}

inline bool contains_emotion_token(std::string_view text) {
  for (EmotionToken t : kEmotionTokens) {
    if (text.find(surface(t)) != std::string_view::npos) return true;
  }
  return false;
}

/// Prepends the token surface and one space to the source side only.
inline ParallelPair inject_token(const ParallelPair& pair, EmotionToken token) {
  if (contains_emotion_token(pair.source)) {
    throw Error(Errc::AlreadyTagged, "source of '" + pair.id + "' already carries an emotion token");
  }
  ParallelPair out = pair;
  out.source = std::string(surface(token)) + " " + pair.source;
  return out;
}

/// Inverse of inject_token: the leading token and the untagged source.
inline std::optional<std::pair<EmotionToken, std::string>> strip_token(std::string_view source) {
  const std::size_t space = source.find(' ');
  if (space == std::string_view::npos) return std::nullopt;
  const auto token = parse_emotion_token(source.substr(0, space));
  if (!token) return std::nullopt;
  return std::pair{*token, std::string(source.substr(space + 1))};
}

struct DistributionStats {
  Dimension dimension = Dimension::Arousal;
  std::string split;
  std::size_t count = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

/// Quantile of sorted data, linear interpolation between closest ranks
/// (position p * (n - 1)).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(Errc::EmptyInput, "quantile of empty data");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline DistributionStats distribution_stats(std::span<const double> values, Dimension dim,
                                            std::string split = "all") {
  if (values.empty()) throw Error(Errc::EmptyInput, "no scores for " + std::string(to_string(dim)));
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  DistributionStats s;
  s.dimension = dim;
  s.split = std::move(split);
  s.count = sorted.size();
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile_sorted(sorted, 0.25);
  s.median = quantile_sorted(sorted, 0.5);
  s.q3 = quantile_sorted(sorted, 0.75);
  double sum = 0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(sorted.size());
  return s;
}

inline DistributionStats distribution_stats(std::span<const EmotionScores> scores, Dimension dim,
                                            std::string split = "all") {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) values.push_back(s.value(dim));
  return distribution_stats(std::span<const double>(values), dim, std::move(split));
}

/// Lin's concordance correlation coefficient with population (1/N) moments.
inline double ccc(std::span<const double> pred, std::span<const double> gold) {
  if (pred.size() != gold.size()) {
    throw Error(Errc::LengthMismatch, "ccc: " + std::to_string(pred.size()) + " predictions vs " +
                                          std::to_string(gold.size()) + " references");
  }
  if (pred.size() < 2) throw Error(Errc::LengthMismatch, "ccc needs at least two points");
  const auto n = static_cast<double>(pred.size());
  double mp = 0, mg = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mp += pred[i];
    mg += gold[i];
  }
  mp /= n;
  mg /= n;
  double vp = 0, vg = 0, cov = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dp = pred[i] - mp;
    const double dg = gold[i] - mg;
    vp += dp * dp;
    vg += dg * dg;
    cov += dp * dg;
  }
  vp /= n;
  vg /= n;
  cov /= n;
  const double denom = vp + vg + (mp - mg) * (mp - mg);
  if (denom == 0.0) throw Error(Errc::Degenerate, "ccc undefined: both series constant and equal");
  return std::clamp(2.0 * cov / denom, -1.0, 1.0);
}

}  // namespace emonmt
