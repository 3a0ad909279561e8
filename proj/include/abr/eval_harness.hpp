#pragma once

#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abr/core_model.hpp"
#include "abr/decimal.hpp"
#include "abr/errors.hpp"
#include "abr/rng.hpp"

namespace abr {

class PoolExhausted : public DataError {
 public:
  using DataError::DataError;
};

// ---------------------------------------------------------------------------
// Answer normalization

namespace score_detail {

// Replaces U+2212 with '-' so negative model answers parse.
inline std::string ascii_minus(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x88 && static_cast<unsigned char>(text[i + 2]) == 0x92) {
      out.push_back('-');
      i += 2;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

inline bool digit(char c) { return c >= '0' && c <= '9'; }

// Unifies thousands separators and decimal commas into a plain decimal form.
inline std::optional<std::string> canonicalize_number_token(std::string token) {
  while (!token.empty() && (token.back() == '.' || token.back() == ',')) token.pop_back();
  if (token.empty()) return std::nullopt;

  std::size_t last_dot = token.rfind('.');
  std::size_t last_comma = token.rfind(',');
  std::string out;
  if (last_dot != std::string::npos && last_comma != std::string::npos) {
    // The later separator is the decimal point; the other kind groups digits.
    char decimal_sep = last_dot > last_comma ? '.' : ',';
    std::size_t decimal_at = std::max(last_dot, last_comma);
    for (std::size_t i = 0; i < token.size(); ++i) {
      if (token[i] == '.' || token[i] == ',') {
        if (i == decimal_at) out.push_back('.');
        continue;
      }
      out.push_back(token[i]);
    }
    (void)decimal_sep;
  } else if (last_comma != std::string::npos) {
    bool single = token.find(',') == last_comma;
    std::size_t digits_after = token.size() - last_comma - 1;
    if (single && digits_after != 3) {
      out = token;
      out[last_comma] = '.';
    } else {
      for (char c : token) {
        if (c != ',') out.push_back(c);
      }
    }
  } else if (last_dot != std::string::npos) {
    bool single = token.find('.') == last_dot;
    std::size_t digits_after = token.size() - last_dot - 1;
    if (single || digits_after != 3) {
      // Keep the final dot as the decimal point, drop earlier ones.
      for (std::size_t i = 0; i < token.size(); ++i) {
        if (token[i] == '.' && i != last_dot) continue;
        out.push_back(token[i]);
      }
    } else {
      for (char c : token) {
        if (c != '.') out.push_back(c);
      }
    }
  } else {
    out = token;
  }

  // Very long fractions exceed the exact representation; they can only
  // differ from a 2-decimal oracle beyond the tolerance anyway.
  std::size_t dot = out.find('.');
  if (dot != std::string::npos && out.size() - dot - 1 > 6) out.resize(dot + 7);
  return out;
}

}  // namespace score_detail

// The final number mentioned in free-form text, exactly parsed.
inline std::optional<Decimal> extract_final_number(std::string_view raw) {
  std::string text = score_detail::ascii_minus(raw);
  std::optional<Decimal> best;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!score_detail::digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size() && (score_detail::digit(text[i]) || text[i] == '.' || text[i] == ',')) ++i;
    std::string token = text.substr(start, i - start);
    bool negative = false;
    if (start > 0 && (text[start - 1] == '-' || text[start - 1] == '+')) {
      // A sign counts only when it is not glued to a preceding word/number.
      if (start == 1 || !(std::isalnum(static_cast<unsigned char>(text[start - 2])))) {
        negative = text[start - 1] == '-';
      }
    }
    auto canon = score_detail::canonicalize_number_token(std::move(token));
    if (!canon) continue;
    if (auto parsed = Decimal::parse((negative ? "-" : "") + *canon)) best = parsed;
  }
  return best;
}

// Case-folded, whitespace-collapsed form used for exact text comparison.
inline std::string normalize_text(std::string_view text) {
  std::string out;
  bool in_ws = true;
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      if (!in_ws) out.push_back(' ');
      in_ws = true;
      continue;
    }
    in_ws = false;
    out.push_back(static_cast<char>(std::tolower(u)));
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

namespace score_detail {

// "document 3" and "doc3" refer to the same thing.
inline std::string normalize_doc_words(std::string normalized) {
  const std::string kWord = "document ";
  for (std::size_t at = normalized.find(kWord); at != std::string::npos; at = normalized.find(kWord, at + 1)) {
    if (at + kWord.size() < normalized.size() && digit(normalized[at + kWord.size()])) {
      normalized.replace(at, kWord.size(), "doc");
    }
  }
  return normalized;
}

}  // namespace score_detail

// ---------------------------------------------------------------------------
// Scoring

struct ScoreResult {
  int correct = 0;
  std::string reason;            // set when the answer scored 0
  std::string normalized_model;  // canonical form used in the comparison
  std::string normalized_oracle;
};

// Numeric tolerance: half of the 2-decimal rounding quantum.
inline const Decimal& numeric_tolerance() {
  static const Decimal tol = *Decimal::parse("0.005");
  return tol;
}

inline ScoreResult score_answer(const Value& oracle, std::string_view model_answer) {
  ScoreResult r;
  switch (oracle.kind()) {
    case Value::Kind::number: {
      r.normalized_oracle = oracle.as_number().str();
      auto num = extract_final_number(model_answer);
      if (!num) {
        r.reason = "no number found in answer";
        return r;
      }
      r.normalized_model = num->str();
      Decimal diff = (*num - oracle.as_number()).abs();
      if (diff <= numeric_tolerance()) {
        r.correct = 1;
      } else {
        r.reason = "numeric mismatch";
      }
      return r;
    }
    case Value::Kind::doc:
    case Value::Kind::doc_set: {
      r.normalized_oracle = normalize_text(oracle.render());
      r.normalized_model = score_detail::normalize_doc_words(normalize_text(model_answer));
      if (r.normalized_model == r.normalized_oracle) {
        r.correct = 1;
      } else {
        r.reason = "document reference mismatch";
      }
      return r;
    }
    case Value::Kind::text: {
      r.normalized_oracle = normalize_text(oracle.as_text());
      r.normalized_model = normalize_text(model_answer);
      if (r.normalized_model == r.normalized_oracle) {
        r.correct = 1;
      } else {
        r.reason = "text mismatch";
      }
      return r;
    }
    case Value::Kind::list: {
      r.normalized_oracle = normalize_text(oracle.render());
      r.normalized_model = normalize_text(model_answer);
      // Every part must match, in order. Numeric parts consume the next
      // close-enough number; text parts the next containment.
      std::string text = score_detail::ascii_minus(std::string(model_answer));
      std::size_t cursor = 0;
      for (const auto& part : oracle.as_list()) {
        if (part.kind() == Value::Kind::number) {
          bool matched = false;
          std::size_t i = cursor;
          while (i < text.size()) {
            if (!score_detail::digit(text[i])) {
              ++i;
              continue;
            }
            std::size_t start = i;
            while (i < text.size() && (score_detail::digit(text[i]) || text[i] == '.' || text[i] == ',')) ++i;
            bool negative = start > 0 && text[start - 1] == '-' &&
                            (start == 1 || !std::isalnum(static_cast<unsigned char>(text[start - 2])));
            auto canon = score_detail::canonicalize_number_token(text.substr(start, i - start));
            if (!canon) continue;
            auto parsed = Decimal::parse((negative ? "-" : "") + *canon);
            if (!parsed) continue;
            if ((*parsed - part.as_number()).abs() <= numeric_tolerance()) {
              matched = true;
              cursor = i;
              break;
            }
          }
          if (!matched) {
            r.reason = "list part " + part.render() + " not matched in order";
            return r;
          }
        } else {
          std::string want = normalize_text(part.render());
          std::string have = normalize_text(text.substr(cursor));
          std::size_t at = want.empty() ? 0 : have.find(want);
          if (at == std::string::npos) {
            r.reason = "list part '" + part.render() + "' not matched in order";
            return r;
          }
          // Advance past this part in the raw text: approximate by searching
          // the raw tail case-insensitively via the normalized offset.
          cursor += at + want.size();
          if (cursor > text.size()) cursor = text.size();
        }
      }
      r.correct = 1;
      return r;
    }
  }
  r.reason = "unscorable oracle kind";
  return r;
}

inline ScoreResult score_answer(const Sample& s, std::string_view model_answer) {
  return score_answer(s.oracle_answer, model_answer);
}

// ---------------------------------------------------------------------------
// Pass-rate curation

struct ScoreRecord {
  std::string sample_id;
  int rollout_index = 0;
  std::string model_answer;
  int correct = 0;  // binary
};

inline double pass_rate(const std::vector<int>& correct) {
  if (correct.empty()) throw ConfigError("pass_rate needs at least one record");
  long sum = 0;
  for (int c : correct) sum += c != 0 ? 1 : 0;
  return static_cast<double>(sum) / static_cast<double>(correct.size());
}

inline double pass_rate(const std::vector<ScoreRecord>& records) {
  std::vector<int> c;
  c.reserve(records.size());
  for (const auto& r : records) c.push_back(r.correct);
  return pass_rate(c);
}

struct PassRateBand {
  double low = 0.3;
  double high = 0.6;

  void validate() const {
    if (!(low >= 0.0 && low <= high && high <= 1.0)) throw ConfigError("band must satisfy 0 <= low <= high <= 1");
  }
};

inline bool in_band(double rate, const PassRateBand& band) { return rate >= band.low && rate <= band.high; }

struct SampleRate {
  std::string sample_id;
  double rate = 0.0;
};

// Inclusive at both ends, so the documented boundary rates 0.3 and 0.6 stay.
inline std::vector<SampleRate> filter_band(const std::vector<SampleRate>& rates, const PassRateBand& band) {
  band.validate();
  std::vector<SampleRate> kept;
  for (const auto& r : rates) {
    if (in_band(r.rate, band)) kept.push_back(r);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Mixture construction

struct MixtureSpec {
  static constexpr std::array<std::string_view, 6> kCategories = {
      "anti_interfere", "multi_hop", "multi_source", "logic", "calc_reason", "niah"};

  std::array<double, 6> weights = {5, 3, 2, 2, 2, 1};

  void validate() const {
    bool any = false;
    for (double w : weights) {
      if (w < 0) throw ConfigError("mixture weights must be >= 0");
      if (w > 0) any = true;
    }
    if (!any) throw ConfigError("mixture needs at least one positive weight");
  }
};

// Largest-remainder apportionment over exact integer arithmetic; counts sum
// to the requested total and each is within one of the proportional share.
inline std::array<std::size_t, 6> apportion(const MixtureSpec& spec, std::size_t total) {
  spec.validate();
  using i128 = detail::int128;
  std::array<std::int64_t, 6> w{};
  i128 wsum = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    w[i] = static_cast<std::int64_t>(spec.weights[i] * 1e6 + 0.5);
    wsum += w[i];
  }
  std::array<std::size_t, 6> counts{};
  std::array<i128, 6> rem{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    i128 share = i128(total) * w[i];
    counts[i] = static_cast<std::size_t>(share / wsum);
    rem[i] = share % wsum;
    assigned += counts[i];
  }
  std::array<std::size_t, 6> order{0, 1, 2, 3, 4, 5};
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rem[a] != rem[b]) return rem[a] > rem[b];
    if (w[a] != w[b]) return w[a] > w[b];
    return a < b;
  });
  for (std::size_t k = 0; assigned < total; ++k) {
    ++counts[order[k % 6]];
    ++assigned;
  }
  return counts;
}

// Draws the apportioned counts from per-category pools with a deterministic
// shuffle. Pools must cover their share.
inline std::vector<Sample> build_mixture(const std::map<std::string, std::vector<Sample>>& pools,
                                         const MixtureSpec& spec, std::size_t total, std::uint64_t seed) {
  auto counts = apportion(spec, total);
  std::vector<Sample> mixed;
  mixed.reserve(total);
  for (std::size_t i = 0; i < 6; ++i) {
    if (counts[i] == 0) continue;
    std::string category(MixtureSpec::kCategories[i]);
    auto it = pools.find(category);
    if (it == pools.end() || it->second.size() < counts[i]) {
      throw PoolExhausted("category " + category + " needs " + std::to_string(counts[i]) + " samples, pool has " +
                          std::to_string(it == pools.end() ? 0 : it->second.size()));
    }
    std::vector<std::size_t> idx(it->second.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    Rng rng(Rng::mix(seed, 0x6d697874ull + i));
    rng.shuffle(idx);
    for (std::size_t k = 0; k < counts[i]; ++k) mixed.push_back(it->second[idx[k]]);
  }
  std::vector<std::size_t> idx(mixed.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  Rng rng(Rng::mix(seed, 0x66696e616cull));
  rng.shuffle(idx);
  std::vector<Sample> out;
  out.reserve(mixed.size());
  for (std::size_t k : idx) out.push_back(std::move(mixed[k]));
  return out;
}

// Exact percentage with two decimals, e.g. format_percent(16, 33) == "48.48%".
inline std::string format_percent(std::size_t numerator, std::size_t denominator) {
  if (denominator == 0) throw ConfigError("percentage of an empty set");
  detail::int128 scaled = detail::div_half_away(detail::int128(numerator) * 10000, detail::int128(denominator));
  std::string digits = std::to_string(static_cast<long long>(scaled));
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return digits.substr(0, digits.size() - 2) + "." + digits.substr(digits.size() - 2) + "%";
}

}  // namespace abr
