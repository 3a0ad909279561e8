#pragma once

#include <istream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "abr/core_model.hpp"
#include "abr/decimal.hpp"
#include "abr/errors.hpp"
#include "abr/rng.hpp"

namespace abr {

// ---------------------------------------------------------------------------
// Infix arithmetic over exact rationals
//
// Grammar (standard precedence, left associative):
//   expr   := term (('+' | '-') term)*
//   term   := factor (('×' | '*' | '/' | '÷') factor)*
//   factor := number | '(' expr ')' | '-' factor

class ArithmeticTextError : public DataError {
 public:
  using DataError::DataError;
};

namespace qb_detail {

class InfixParser {
 public:
  explicit InfixParser(std::string_view text) : text_(text) {}

  Rational run() {
    Rational r = expr();
    skip_ws();
    if (pos_ != text_.size()) throw ArithmeticTextError("trailing input in arithmetic expression");
    return r;
  }

 private:
  Rational expr() {
    Rational acc = term();
    for (;;) {
      skip_ws();
      if (take('+')) {
        acc = acc + term();
      } else if (take('-')) {
        acc = acc - term();
      } else {
        return acc;
      }
    }
  }

  Rational term() {
    Rational acc = factor();
    for (;;) {
      skip_ws();
      if (take_mul()) {
        acc = acc * factor();
      } else if (take('/') || take_div_sign()) {
        Rational d = factor();
        if (d.is_zero()) throw ArithmeticTextError("division by zero");
        acc = acc / d;
      } else {
        return acc;
      }
    }
  }

  Rational factor() {
    skip_ws();
    if (take('(')) {
      Rational r = expr();
      skip_ws();
      if (!take(')')) throw ArithmeticTextError("missing ')'");
      return r;
    }
    if (take('-')) return Rational::from_int(0) - factor();
    return number();
  }

  Rational number() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() && ((text_[pos_] >= '0' && text_[pos_] <= '9') || text_[pos_] == '.')) ++pos_;
    auto d = Decimal::parse(text_.substr(start, pos_ - start));
    if (!d) throw ArithmeticTextError("expected a number at byte " + std::to_string(start));
    return Rational::from_decimal(*d);
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  bool take(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool take_mul() {
    if (take('*')) return true;
    // UTF-8 multiplication sign.
    if (pos_ + 1 < text_.size() && static_cast<unsigned char>(text_[pos_]) == 0xC3 &&
        static_cast<unsigned char>(text_[pos_ + 1]) == 0x97) {
      pos_ += 2;
      return true;
    }
    return false;
  }

  bool take_div_sign() {
    if (pos_ + 1 < text_.size() && static_cast<unsigned char>(text_[pos_]) == 0xC3 &&
        static_cast<unsigned char>(text_[pos_ + 1]) == 0xB7) {
      pos_ += 2;
      return true;
    }
    return false;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace qb_detail

// Exact value of a rendered arithmetic question. Throws ArithmeticTextError
// on malformed text or division by zero, ArithmeticOverflow when the exact
// value leaves the representable range.
inline Rational eval_arithmetic_text(std::string_view text) { return qb_detail::InfixParser(text).run(); }

// Multi-part fragments carry a "part i of k: " prefix in front of the
// arithmetic body.
inline std::optional<Rational> try_eval_embedded_question(std::string_view question) {
  std::string_view body = question;
  if (body.starts_with("part ")) {
    std::size_t colon = body.find(": ");
    if (colon != std::string_view::npos) body = body.substr(colon + 2);
  }
  try {
    return eval_arithmetic_text(body);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Built-in arithmetic generator

struct ArithmeticSpec {
  int operand_min = 2;
  int operand_max = 99;
  int depth = 2;                   // number of binary operators, 1..4
  std::string operators = "+-*/";  // subset of + - * /; '*' renders as ×
  bool allow_parens = true;

  void validate() const {
    if (depth < 1 || depth > 4) throw ConfigError("arithmetic depth must be in 1..4");
    if (operand_min > operand_max) throw ConfigError("operand range is empty");
    if (operators.empty()) throw ConfigError("operator set is empty");
    for (char c : operators) {
      if (c != '+' && c != '-' && c != '*' && c != '/') throw ConfigError("unknown operator in spec");
    }
  }
};

struct ArithmeticQA {
  std::string question;  // standard infix rendering, e.g. "6 - (8 - 4) + 16"
  Decimal truth;         // exact evaluation rounded to 2 decimal places
};

inline ArithmeticQA gen_arithmetic(const ArithmeticSpec& spec, Rng& rng) {
  spec.validate();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    int ops = spec.depth;
    std::vector<char> op;
    for (int i = 0; i < ops; ++i) op.push_back(spec.operators[rng.below(spec.operators.size())]);

    std::vector<std::string> operand;
    for (int i = 0; i <= ops; ++i) {
      std::int64_t whole = rng.range(spec.operand_min, spec.operand_max);
      if (rng.chance(0.2)) {
        operand.push_back(std::to_string(whole) + "." + std::to_string(rng.range(1, 9)));
      } else {
        operand.push_back(std::to_string(whole));
      }
    }

    // Up to two non-overlapping groups of adjacent operands.
    std::vector<std::pair<int, int>> groups;
    if (spec.allow_parens && ops >= 2) {
      int wanted = static_cast<int>(rng.range(0, 2));
      int cursor = 0;
      for (int g = 0; g < wanted && cursor + 1 <= ops; ++g) {
        int from = static_cast<int>(rng.range(cursor, ops - 1));
        int to = static_cast<int>(rng.range(from + 1, ops));
        groups.emplace_back(from, to);
        cursor = to + 1;
      }
    }

    std::string text;
    for (int i = 0; i <= ops; ++i) {
      for (const auto& g : groups) {
        if (g.first == i) text.push_back('(');
      }
      bool neg = !operand[static_cast<std::size_t>(i)].empty() && operand[static_cast<std::size_t>(i)][0] == '-';
      if (neg) text.push_back('(');
      text += operand[static_cast<std::size_t>(i)];
      if (neg) text.push_back(')');
      for (const auto& g : groups) {
        if (g.second == i) text.push_back(')');
      }
      if (i < ops) {
        text += op[static_cast<std::size_t>(i)] == '*' ? " \xC3\x97 "
              : op[static_cast<std::size_t>(i)] == '/' ? " / "
              : op[static_cast<std::size_t>(i)] == '+' ? " + "
                                                       : " - ";
      }
    }

    try {
      Rational exact = eval_arithmetic_text(text);
      return ArithmeticQA{text, exact.to_decimal(2)};
    } catch (const Error&) {
      continue;  // zero divisor or overflow; redraw
    }
  }
  throw ConfigError("arithmetic spec cannot produce a finite question");
}

// ---------------------------------------------------------------------------
// Imported pools

enum class AnswerKind { numeric, exact_text };

struct ImportedQA {
  std::string question;
  std::string reference_answer;
  AnswerKind kind = AnswerKind::exact_text;
};

// External QA records, line-delimited JSON with fields question /
// reference_answer / answer_kind. Imported truths are trusted as given.
class ImportedPool {
 public:
  static ImportedPool from_stream(std::istream& in) {
    ImportedPool pool;
    std::string line;
    std::set<std::size_t> seen;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto parsed = parse_record(line);
      if (!parsed) {
        ++pool.warnings_;
        continue;
      }
      std::size_t h = std::hash<std::string>{}(parsed->question);
      if (!seen.insert(h).second) continue;  // de-duplicated by question hash
      pool.records_.push_back(std::move(*parsed));
    }
    return pool;
  }

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  int warnings() const { return warnings_; }
  const ImportedQA& at(std::size_t i) const { return records_[i]; }
  const std::vector<ImportedQA>& records() const { return records_; }

  const ImportedQA* find_by_question(std::string_view q) const {
    for (const auto& r : records_) {
      if (r.question == q) return &r;
    }
    return nullptr;
  }

  static Value truth_of(const ImportedQA& qa) {
    if (qa.kind == AnswerKind::numeric) {
      auto d = Decimal::parse(qa.reference_answer);
      if (d) return Value::number(*d);
    }
    return Value::text(qa.reference_answer);
  }

 private:
  static std::optional<ImportedQA> parse_record(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    if (!j.contains("question") || !j["question"].is_string()) return std::nullopt;
    if (!j.contains("reference_answer") || !j["reference_answer"].is_string()) return std::nullopt;
    ImportedQA qa;
    qa.question = j["question"].get<std::string>();
    qa.reference_answer = j["reference_answer"].get<std::string>();
    if (qa.question.empty() || qa.reference_answer.empty()) return std::nullopt;
    std::string kind = j.value("answer_kind", "exact_text");
    if (kind == "numeric") {
      if (!Decimal::parse(qa.reference_answer)) return std::nullopt;
      qa.kind = AnswerKind::numeric;
    } else if (kind == "exact_text") {
      qa.kind = AnswerKind::exact_text;
    } else {
      return std::nullopt;
    }
    return qa;
  }

  std::vector<ImportedQA> records_;
  int warnings_ = 0;
};

// ---------------------------------------------------------------------------
// Question sources for the builders

class QuestionSource {
 public:
  virtual ~QuestionSource() = default;

  // Question text plus a numeric truth; used wherever expressions aggregate.
  virtual std::pair<std::string, Decimal> next_numeric(Rng& rng) = 0;

  // Question text plus any truth kind.
  virtual std::pair<std::string, Value> next_any(Rng& rng) = 0;

  virtual QaSource tag() const = 0;
};

class BuiltinArithmeticSource final : public QuestionSource {
 public:
  explicit BuiltinArithmeticSource(ArithmeticSpec spec = {}) : spec_(std::move(spec)) {}

  std::pair<std::string, Decimal> next_numeric(Rng& rng) override {
    ArithmeticQA qa = gen_arithmetic(spec_, rng);
    return {std::move(qa.question), qa.truth};
  }

  std::pair<std::string, Value> next_any(Rng& rng) override {
    auto [q, t] = next_numeric(rng);
    return {std::move(q), Value::number(t)};
  }

  QaSource tag() const override { return QaSource::builtin_arithmetic; }

 private:
  ArithmeticSpec spec_;
};

class ImportedSource final : public QuestionSource {
 public:
  explicit ImportedSource(const ImportedPool& pool) : pool_(&pool) {
    if (pool.empty()) throw DataError("imported pool is empty");
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool.at(i).kind == AnswerKind::numeric) numeric_.push_back(i);
    }
  }

  std::pair<std::string, Decimal> next_numeric(Rng& rng) override {
    if (numeric_.empty()) throw DataError("imported pool has no numeric answers");
    const ImportedQA& qa = pool_->at(numeric_[rng.below(numeric_.size())]);
    return {qa.question, *Decimal::parse(qa.reference_answer)};
  }

  std::pair<std::string, Value> next_any(Rng& rng) override {
    const ImportedQA& qa = pool_->at(rng.below(pool_->size()));
    return {qa.question, ImportedPool::truth_of(qa)};
  }

  QaSource tag() const override { return QaSource::imported; }

 private:
  const ImportedPool* pool_;
  std::vector<std::size_t> numeric_;
};

}  // namespace abr
