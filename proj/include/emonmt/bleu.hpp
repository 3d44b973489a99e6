#pragma once

#include <array>
#include <cmath>
#include <map>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emonmt/error.hpp"
#include "emonmt/text.hpp"

namespace emonmt {

inline constexpr int kBleuOrder = 4;
inline constexpr std::string_view kBleuVersion = "emonmt-1.0";

enum class Smoothing { None, Exp };

constexpr std::string_view to_string(Smoothing s) noexcept { return s == Smoothing::Exp ? "exp" : "none"; }

inline Smoothing parse_smoothing(std::string_view name) {
  if (name == "exp") return Smoothing::Exp;
  if (name == "none") return Smoothing::None;
  throw Error(Errc::InvalidConfig, "unknown smoothing '" + std::string(name) + "'");
}

namespace detail {

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace detail

/// mteval-v13a tokenization: unescape a few entities, split off punctuation
/// and symbols, keep periods/commas inside numbers, split a dash that
/// follows a digit.
inline std::vector<std::string> bleu_tokenize(std::string_view text) {
  static const std::regex kSymbols(R"(([\{-\~\[-\` -\&\(-\+\:-\@\/]))");
  static const std::regex kPeriodCommaAfter(R"(([^0-9])([\.,]))");
  static const std::regex kPeriodCommaBefore(R"(([\.,])([^0-9]))");
  static const std::regex kDigitDash(R"(([0-9])(-))");

  std::string line(text);
  while (!line.empty() && is_space(line.back())) line.pop_back();
  detail::replace_all(line, "<skipped>", "");
  detail::replace_all(line, "-\n", "");
  detail::replace_all(line, "\n", " ");
  if (line.find('&') != std::string::npos) {
    detail::replace_all(line, "&quot;", "\"");
    detail::replace_all(line, "&amp;", "&");
    detail::replace_all(line, "&lt;", "<");
    detail::replace_all(line, "&gt;", ">");
  }
  line = " " + line + " ";
  line = std::regex_replace(line, kSymbols, " $1 ");
  line = std::regex_replace(line, kPeriodCommaAfter, "$1 $2 ");
  line = std::regex_replace(line, kPeriodCommaBefore, " $1 $2");
  line = std::regex_replace(line, kDigitDash, "$1 $2 ");
  return split_whitespace(line);
}

struct BleuBreakdown {
  double score = 0;                               // 0..100
  std::array<double, kBleuOrder> precisions{};    // 0..1, after smoothing
  std::array<std::size_t, kBleuOrder> matches{};
  std::array<std::size_t, kBleuOrder> totals{};
  double brevity_penalty = 1;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

/// Corpus BLEU, single reference, case-sensitive, clipped n-gram counts
/// pooled over the corpus. Exp smoothing halves the credit of each
/// successive zero-match order.
inline BleuBreakdown corpus_bleu(std::span<const std::string> hypotheses, std::span<const std::string> references,
                                 Smoothing smoothing = Smoothing::Exp) {
  if (hypotheses.size() != references.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(hypotheses.size()) + " hypotheses vs " +
                                          std::to_string(references.size()) + " references");
  }
  if (hypotheses.empty()) throw Error(Errc::EmptyCorpus, "BLEU over an empty corpus");

  BleuBreakdown b;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = bleu_tokenize(hypotheses[s]);
    const auto ref = bleu_tokenize(references[s]);
    b.hyp_len += hyp.size();
    b.ref_len += ref.size();
    for (int n = 1; n <= kBleuOrder; ++n) {
      std::map<std::vector<std::string>, std::size_t> ref_counts;
      for (std::size_t i = 0; i + n <= ref.size(); ++i) {
        ++ref_counts[std::vector<std::string>(ref.begin() + static_cast<std::ptrdiff_t>(i),
                                              ref.begin() + static_cast<std::ptrdiff_t>(i + n))];
      }
      std::map<std::vector<std::string>, std::size_t> hyp_counts;
      for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
        ++hyp_counts[std::vector<std::string>(hyp.begin() + static_cast<std::ptrdiff_t>(i),
                                              hyp.begin() + static_cast<std::ptrdiff_t>(i + n))];
      }
      const auto k = static_cast<std::size_t>(n - 1);
      b.totals[k] += hyp.size() >= static_cast<std::size_t>(n) ? hyp.size() - n + 1 : 0;
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) b.matches[k] += std::min(count, it->second);
      }
    }
  }

  if (b.hyp_len < b.ref_len) {
    b.brevity_penalty = b.hyp_len > 0 ? std::exp(1.0 - static_cast<double>(b.ref_len) / static_cast<double>(b.hyp_len))
                                      : 0.0;
  }
  bool any_match = false;
  for (auto m : b.matches) any_match = any_match || m > 0;
  if (!any_match) return b;

  double smooth = 1.0;
  double log_sum = 0;
  for (int n = 0; n < kBleuOrder; ++n) {
    const auto k = static_cast<std::size_t>(n);
    if (b.totals[k] == 0) break;
    if (b.matches[k] == 0) {
      if (smoothing == Smoothing::Exp) {
        smooth *= 2;
        b.precisions[k] = 1.0 / (smooth * static_cast<double>(b.totals[k]));
      }
    } else {
      b.precisions[k] = static_cast<double>(b.matches[k]) / static_cast<double>(b.totals[k]);
    }
  }
  // Geometric mean on the [0,1] scale so a perfect match is exactly 100.
  for (double p : b.precisions) log_sum += p > 0 ? std::log(p) : -9999999999.0;
  b.score = 100.0 * b.brevity_penalty * std::exp(log_sum / kBleuOrder);
  return b;
}

/// Scorer settings in the usual "key:value|..." signature form.
inline std::string bleu_signature(Smoothing smoothing = Smoothing::Exp) {
  return "nrefs:1|case:mixed|eff:no|tok:13a|smooth:" + std::string(to_string(smoothing)) +
         "|version:" + std::string(kBleuVersion);
}

}  // namespace emonmt
