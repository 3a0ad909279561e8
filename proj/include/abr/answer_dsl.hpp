#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "abr/core_model.hpp"
#include "abr/decimal.hpp"
#include "abr/errors.hpp"

// Executable answer expressions: canonical prefix notation, whitespace
// separated. This syntax is the on-disk answer_expr format and must stay
// stable.
//
//   (docs A)                          documents containing anchor A
//   (intersect S S) (union S S) (diff S S)
//   (count S) (count-docs A)
//   (only S)                          the single document of S, else error
//   (solve A D) (solve A D k)         k-th occurrence's embedded answer
//   (solve-in A S)                    sugar for (solve A (only S))
//   (solve-all A)                     answers over all docs holding A, doc order
//   (sum x...) (product x...) (min x...) (max x...)   lists flatten
//   (+ x y) (- x y) (* x y) (/ x y)
//   (> x y) (< x y) (>= x y) (= x y)  1/0
//   (if c then else)                  lazy
//   (unique-anchors)                  anchors with global frequency 1
//   (anchors-in D)                    insertion order
//   (argmax-doc-by-count)
//   (last L) (nth L i) (preceding L item)
//
// Every arithmetic result and every numeric solve result is rounded half away
// from zero to the environment's decimal places before further use.

namespace abr {

// ---------------------------------------------------------------------------
// Errors

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& msg)
      : Error("parse error at byte " + std::to_string(offset) + ": " + msg), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class ArityError : public Error {
 public:
  explicit ArityError(const std::string& msg) : Error(msg) {}
};

enum class EvalErrorClass {
  unresolved_anchor,
  ambiguous_solve,
  empty_only,
  non_singleton_only,
  division_by_zero,
  type_mismatch,
  selection_error,
  overflow,
};

inline std::string_view eval_error_name(EvalErrorClass c) {
  switch (c) {
    case EvalErrorClass::unresolved_anchor: return "UnresolvedAnchor";
    case EvalErrorClass::ambiguous_solve: return "AmbiguousSolve";
    case EvalErrorClass::empty_only: return "EmptyOnly";
    case EvalErrorClass::non_singleton_only: return "NonSingletonOnly";
    case EvalErrorClass::division_by_zero: return "DivisionByZero";
    case EvalErrorClass::type_mismatch: return "TypeMismatch";
    case EvalErrorClass::selection_error: return "SelectionError";
    case EvalErrorClass::overflow: return "Overflow";
  }
  return "?";
}

class EvalError : public Error {
 public:
  EvalError(EvalErrorClass cls, const std::string& msg)
      : Error(std::string(eval_error_name(cls)) + ": " + msg), cls_(cls) {}
  EvalErrorClass cls() const { return cls_; }

 private:
  EvalErrorClass cls_;
};

// ---------------------------------------------------------------------------
// Expression tree

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

class Expr {
 public:
  enum class Kind { number, anchor, doc, call };

  static ExprPtr make_number(Decimal d) {
    auto e = std::make_shared<Expr>();
    e->kind_ = Kind::number;
    e->number_ = d;
    return e;
  }
  static ExprPtr make_anchor(AnchorId a) {
    auto e = std::make_shared<Expr>();
    e->kind_ = Kind::anchor;
    e->anchor_ = std::move(a);
    return e;
  }
  static ExprPtr make_doc(DocId d) {
    auto e = std::make_shared<Expr>();
    e->kind_ = Kind::doc;
    e->doc_ = d;
    return e;
  }
  static ExprPtr make_call(std::string fn, std::vector<ExprPtr> args) {
    auto e = std::make_shared<Expr>();
    e->kind_ = Kind::call;
    e->fn_ = std::move(fn);
    e->args_ = std::move(args);
    return e;
  }

  Kind kind() const { return kind_; }
  const Decimal& number() const { return number_; }
  const AnchorId& anchor() const { return anchor_; }
  DocId doc() const { return doc_; }
  const std::string& fn() const { return fn_; }
  const std::vector<ExprPtr>& args() const { return args_; }

  friend bool operator==(const Expr& a, const Expr& b) {
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
      case Kind::number: return a.number_ == b.number_ && a.number_.scale() == b.number_.scale();
      case Kind::anchor: return a.anchor_ == b.anchor_;
      case Kind::doc: return a.doc_ == b.doc_;
      case Kind::call:
        if (a.fn_ != b.fn_ || a.args_.size() != b.args_.size()) return false;
        for (std::size_t i = 0; i < a.args_.size(); ++i) {
          if (!(*a.args_[i] == *b.args_[i])) return false;
        }
        return true;
    }
    return false;
  }

 private:
  Kind kind_ = Kind::number;
  Decimal number_;
  AnchorId anchor_;
  DocId doc_{};
  std::string fn_;
  std::vector<ExprPtr> args_;
};

inline std::string serialize(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::number: return e.number().str();
    case Expr::Kind::anchor: return e.anchor();
    case Expr::Kind::doc: return e.doc().str();
    case Expr::Kind::call: {
      std::string out = "(" + e.fn();
      for (const auto& a : e.args()) {
        out.push_back(' ');
        out += serialize(*a);
      }
      out.push_back(')');
      return out;
    }
  }
  return {};
}

inline std::string serialize(const ExprPtr& e) { return serialize(*e); }

inline std::size_t node_count(const Expr& e) {
  std::size_t n = 1;
  if (e.kind() == Expr::Kind::call) {
    for (const auto& a : e.args()) n += node_count(*a);
  }
  return n;
}

inline std::size_t tree_depth(const Expr& e) {
  if (e.kind() != Expr::Kind::call) return 1;
  std::size_t deepest = 0;
  for (const auto& a : e.args()) deepest = std::max(deepest, tree_depth(*a));
  return deepest + 1;
}

// Literal anchor references, for coverage checks and template validation.
inline void collect_anchor_refs(const Expr& e, std::set<AnchorId>& out) {
  if (e.kind() == Expr::Kind::anchor) out.insert(e.anchor());
  if (e.kind() == Expr::Kind::call) {
    for (const auto& a : e.args()) collect_anchor_refs(*a, out);
  }
}

inline std::set<AnchorId> anchor_refs(const Expr& e) {
  std::set<AnchorId> out;
  collect_anchor_refs(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace dsl_detail {

struct FnSpec {
  int min_arity;
  int max_arity;  // -1: unbounded
};

inline const std::map<std::string, FnSpec>& fn_table() {
  static const std::map<std::string, FnSpec> table = {
      {"docs", {1, 1}},          {"intersect", {2, 2}},
      {"union", {2, 2}},         {"diff", {2, 2}},
      {"count", {1, 1}},         {"count-docs", {1, 1}},
      {"only", {1, 1}},          {"solve", {2, 3}},
      {"solve-in", {2, 2}},      {"solve-all", {1, 1}},
      {"sum", {1, -1}},          {"product", {1, -1}},
      {"min", {1, -1}},          {"max", {1, -1}},
      {"+", {2, 2}},             {"-", {2, 2}},
      {"*", {2, 2}},             {"/", {2, 2}},
      {">", {2, 2}},             {"<", {2, 2}},
      {">=", {2, 2}},            {"=", {2, 2}},
      {"if", {3, 3}},            {"unique-anchors", {0, 0}},
      {"anchors-in", {1, 1}},    {"argmax-doc-by-count", {0, 0}},
      {"last", {1, 1}},          {"nth", {2, 2}},
      {"preceding", {2, 2}},
  };
  return table;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ExprPtr parse_all() {
    skip_ws();
    ExprPtr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError(pos_, "trailing input after expression");
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && is_ws(text_[pos_])) ++pos_;
  }

  static bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

  ExprPtr parse_expr() {
    if (pos_ >= text_.size()) throw ParseError(pos_, "unexpected end of input");
    if (text_[pos_] == ')') throw ParseError(pos_, "unexpected ')'");
    if (text_[pos_] == '(') return parse_call();
    return parse_atom();
  }

  ExprPtr parse_call() {
    std::size_t open = pos_;
    ++pos_;  // '('
    skip_ws();
    std::size_t fn_at = pos_;
    std::string fn = read_token();
    if (fn.empty()) throw ParseError(fn_at, "expected a function name");
    auto it = fn_table().find(fn);
    if (it == fn_table().end()) throw ParseError(fn_at, "unknown function '" + fn + "'");

    std::vector<ExprPtr> args;
    for (;;) {
      skip_ws();
      if (pos_ >= text_.size()) throw ParseError(open, "unclosed '('");
      if (text_[pos_] == ')') {
        ++pos_;
        break;
      }
      args.push_back(parse_expr());
    }
    const FnSpec& spec = it->second;
    int n = static_cast<int>(args.size());
    if (n < spec.min_arity || (spec.max_arity >= 0 && n > spec.max_arity)) {
      throw ArityError("(" + fn + ") takes " + std::to_string(spec.min_arity) +
                       (spec.max_arity == spec.min_arity ? "" :
                        spec.max_arity < 0 ? "+" : ".." + std::to_string(spec.max_arity)) +
                       " arguments, got " + std::to_string(n));
    }
    return Expr::make_call(std::move(fn), std::move(args));
  }

  ExprPtr parse_atom() {
    std::size_t at = pos_;
    std::string tok = read_token();
    if (tok.empty()) throw ParseError(at, "expected an atom");
    if (auto num = Decimal::parse(tok)) return Expr::make_number(*num);
    if (auto doc = DocId::parse(tok)) return Expr::make_doc(*doc);
    return Expr::make_anchor(std::move(tok));
  }

  std::string read_token() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && !is_ws(text_[pos_]) && text_[pos_] != '(' && text_[pos_] != ')') ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace dsl_detail

inline ExprPtr parse(std::string_view text) { return dsl_detail::Parser(text).parse_all(); }

// ---------------------------------------------------------------------------
// Evaluation environment

// Occurrence-indexed lookup over the embedded QA units of one sample.
class QaIndex {
 public:
  QaIndex() = default;
  explicit QaIndex(const std::vector<EmbeddedQA>& qas) {
    for (const auto& qa : qas) by_key_[{qa.anchor, qa.doc.index, qa.occurrence}] = qa;
  }

  const EmbeddedQA* find(const AnchorId& anchor, DocId doc, int occurrence) const {
    auto it = by_key_.find({anchor, doc.index, occurrence});
    return it == by_key_.end() ? nullptr : &it->second;
  }

 private:
  std::map<std::tuple<AnchorId, int, int>, EmbeddedQA> by_key_;
};

struct EvalNotes {
  bool argmax_tie = false;
};

struct EvalEnv {
  const DocMapping* mapping = nullptr;
  const QaIndex* qas = nullptr;
  int rounding = 2;
};

// ---------------------------------------------------------------------------
// Evaluator

namespace dsl_detail {

class Evaluator {
 public:
  Evaluator(const EvalEnv& env, EvalNotes* notes) : env_(env), notes_(notes) {}

  Value eval(const Expr& e) {
    switch (e.kind()) {
      case Expr::Kind::number: return Value::number(e.number());
      case Expr::Kind::anchor: return Value::text(e.anchor());
      case Expr::Kind::doc: return check_doc(e.doc());
      case Expr::Kind::call: return eval_call(e);
    }
    throw EvalError(EvalErrorClass::type_mismatch, "bad node");
  }

 private:
  Value check_doc(DocId d) {
    if (d.index < 1 || d.index > env_.mapping->num_docs()) {
      throw EvalError(EvalErrorClass::unresolved_anchor, "no such document " + d.str());
    }
    return Value::doc(d);
  }

  // Numeric results are limited to |v| <= 10^12; beyond that an expression
  // is considered out of range regardless of representation.
  static const Decimal& numeric_limit() {
    static const Decimal limit = Decimal::from_int(1'000'000'000'000ll);
    return limit;
  }

  Decimal range_checked(const Decimal& d) {
    if (d.abs() > numeric_limit()) throw EvalError(EvalErrorClass::overflow, "value out of range");
    return d;
  }

  Decimal round(const Decimal& d) {
    try {
      return range_checked(d.rounded(env_.rounding));
    } catch (const ArithmeticOverflow&) {
      throw EvalError(EvalErrorClass::overflow, "value out of range");
    }
  }

  Decimal num_of(const Value& v, const char* where) {
    if (v.kind() != Value::Kind::number) {
      throw EvalError(EvalErrorClass::type_mismatch, std::string(where) + " expects a number");
    }
    return v.as_number();
  }

  std::vector<DocId> set_of(const Value& v, const char* where) {
    if (v.kind() != Value::Kind::doc_set) {
      throw EvalError(EvalErrorClass::type_mismatch, std::string(where) + " expects a document set");
    }
    return v.as_doc_set();
  }

  AnchorId anchor_operand(const Expr& e) {
    if (e.kind() == Expr::Kind::anchor) return e.anchor();
    Value v = eval(e);
    if (v.kind() == Value::Kind::text) return v.as_text();
    throw EvalError(EvalErrorClass::type_mismatch, "expected an anchor");
  }

  DocId doc_operand(const Expr& e) {
    Value v = eval(e);
    if (v.kind() == Value::Kind::doc) return v.as_doc();
    throw EvalError(EvalErrorClass::type_mismatch, "expected a document");
  }

  std::int64_t int_of(const Value& v, const char* where) {
    Decimal d = num_of(v, where);
    detail::int128 p = detail::pow10_128(d.scale());
    if (detail::int128(d.units()) % p != 0) {
      throw EvalError(EvalErrorClass::type_mismatch, std::string(where) + " expects an integer");
    }
    return static_cast<std::int64_t>(detail::int128(d.units()) / p);
  }

  Value solve_one(const AnchorId& anchor, DocId doc, int k, bool k_given) {
    int occ = env_.mapping->occurrences(anchor, doc);
    if (occ == 0) {
      throw EvalError(EvalErrorClass::unresolved_anchor, anchor + " does not occur in " + doc.str());
    }
    if (occ > 1 && !k_given) {
      throw EvalError(EvalErrorClass::ambiguous_solve,
                      anchor + " occurs " + std::to_string(occ) + " times in " + doc.str());
    }
    if (k < 1 || k > occ) {
      throw EvalError(EvalErrorClass::unresolved_anchor,
                      "occurrence " + std::to_string(k) + " of " + anchor + " in " + doc.str());
    }
    const EmbeddedQA* qa = env_.qas ? env_.qas->find(anchor, doc, k) : nullptr;
    if (qa == nullptr) {
      throw EvalError(EvalErrorClass::unresolved_anchor,
                      "no embedded question for " + anchor + " in " + doc.str());
    }
    if (qa->truth.kind() == Value::Kind::number) return Value::number(round(qa->truth.as_number()));
    return qa->truth;
  }

  // Flattens numbers out of aggregate arguments; lists flatten recursively.
  void flatten_numbers(const Value& v, std::vector<Decimal>& out, const char* where) {
    if (v.kind() == Value::Kind::number) {
      out.push_back(v.as_number());
      return;
    }
    if (v.kind() == Value::Kind::list) {
      for (const auto& item : v.as_list()) flatten_numbers(item, out, where);
      return;
    }
    throw EvalError(EvalErrorClass::type_mismatch, std::string(where) + " expects numbers or lists of numbers");
  }

  Value eval_call(const Expr& e) {
    const std::string& fn = e.fn();
    const auto& args = e.args();

    if (fn == "docs") {
      return Value::doc_set(env_.mapping->docs_containing(anchor_operand(*args[0])));
    }
    if (fn == "intersect" || fn == "union" || fn == "diff") {
      auto a = set_of(eval(*args[0]), fn.c_str());
      auto b = set_of(eval(*args[1]), fn.c_str());
      std::vector<DocId> out;
      if (fn == "intersect") {
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
      } else if (fn == "union") {
        std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
      } else {
        std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
      }
      return Value::doc_set(std::move(out));
    }
    if (fn == "count") {
      return Value::number(Decimal::from_int(static_cast<std::int64_t>(set_of(eval(*args[0]), "count").size())));
    }
    if (fn == "count-docs") {
      auto docs = env_.mapping->docs_containing(anchor_operand(*args[0]));
      return Value::number(Decimal::from_int(static_cast<std::int64_t>(docs.size())));
    }
    if (fn == "only") {
      auto s = set_of(eval(*args[0]), "only");
      if (s.empty()) throw EvalError(EvalErrorClass::empty_only, "empty document set");
      if (s.size() > 1) {
        throw EvalError(EvalErrorClass::non_singleton_only,
                        "document set has " + std::to_string(s.size()) + " members");
      }
      return Value::doc(s.front());
    }
    if (fn == "solve") {
      AnchorId anchor = anchor_operand(*args[0]);
      DocId doc = doc_operand(*args[1]);
      bool k_given = args.size() == 3;
      int k = 1;
      if (k_given) {
        std::int64_t ki = int_of(eval(*args[2]), "solve");
        if (ki < 1 || ki > 1'000'000) {
          throw EvalError(EvalErrorClass::type_mismatch, "solve occurrence index out of range");
        }
        k = static_cast<int>(ki);
      }
      return solve_one(anchor, doc, k, k_given);
    }
    if (fn == "solve-in") {
      AnchorId anchor = anchor_operand(*args[0]);
      auto s = set_of(eval(*args[1]), "solve-in");
      if (s.empty()) throw EvalError(EvalErrorClass::empty_only, "empty document set");
      if (s.size() > 1) {
        throw EvalError(EvalErrorClass::non_singleton_only,
                        "document set has " + std::to_string(s.size()) + " members");
      }
      return solve_one(anchor, s.front(), 1, false);
    }
    if (fn == "solve-all") {
      AnchorId anchor = anchor_operand(*args[0]);
      auto docs = env_.mapping->docs_containing(anchor);
      if (docs.empty()) {
        throw EvalError(EvalErrorClass::unresolved_anchor, anchor + " does not occur anywhere");
      }
      std::vector<Value> items;
      for (DocId d : docs) items.push_back(solve_one(anchor, d, 1, false));
      return Value::list(std::move(items));
    }
    if (fn == "sum" || fn == "product" || fn == "min" || fn == "max") {
      std::vector<Decimal> nums;
      for (const auto& a : args) flatten_numbers(eval(*a), nums, fn.c_str());
      try {
        if (fn == "sum") {
          Decimal acc = Decimal::from_int(0);
          for (const auto& d : nums) acc = acc + d;
          return Value::number(round(acc));
        }
        if (fn == "product") {
          Decimal acc = Decimal::from_int(1);
          for (const auto& d : nums) acc = range_checked(Decimal::mul_rounded(acc, d, env_.rounding));
          return Value::number(acc);
        }
        if (nums.empty()) throw EvalError(EvalErrorClass::selection_error, fn + " of nothing");
        Decimal acc = nums.front();
        for (const auto& d : nums) {
          if (fn == "min" ? d < acc : d > acc) acc = d;
        }
        return Value::number(round(acc));
      } catch (const ArithmeticOverflow&) {
        throw EvalError(EvalErrorClass::overflow, fn + " out of range");
      }
    }
    if (fn == "+" || fn == "-" || fn == "*" || fn == "/") {
      Decimal a = num_of(eval(*args[0]), fn.c_str());
      Decimal b = num_of(eval(*args[1]), fn.c_str());
      try {
        if (fn == "+") return Value::number(round(a + b));
        if (fn == "-") return Value::number(round(a - b));
        if (fn == "*") return Value::number(range_checked(Decimal::mul_rounded(a, b, env_.rounding)));
        if (b.is_zero()) throw EvalError(EvalErrorClass::division_by_zero, "division by zero");
        return Value::number(range_checked(Decimal::div_rounded(a, b, env_.rounding)));
      } catch (const ArithmeticOverflow&) {
        throw EvalError(EvalErrorClass::overflow, fn + " out of range");
      }
    }
    if (fn == ">" || fn == "<" || fn == ">=" || fn == "=") {
      Decimal a = num_of(eval(*args[0]), fn.c_str());
      Decimal b = num_of(eval(*args[1]), fn.c_str());
      bool r = fn == ">" ? a > b : fn == "<" ? a < b : fn == ">=" ? a >= b : a == b;
      return Value::number(Decimal::from_int(r ? 1 : 0));
    }
    if (fn == "if") {
      Decimal c = num_of(eval(*args[0]), "if");
      return eval(c.is_zero() ? *args[2] : *args[1]);
    }
    if (fn == "unique-anchors") {
      std::vector<Value> items;
      for (const auto& a : env_.mapping->unique_anchors()) items.push_back(Value::text(a));
      return Value::list(std::move(items));
    }
    if (fn == "anchors-in") {
      DocId doc = doc_operand(*args[0]);
      std::vector<Value> items;
      for (const auto& a : env_.mapping->anchors_in(doc)) items.push_back(Value::text(a));
      return Value::list(std::move(items));
    }
    if (fn == "argmax-doc-by-count") {
      int n = env_.mapping->num_docs();
      if (n == 0) throw EvalError(EvalErrorClass::selection_error, "no documents");
      int best = 1;
      std::size_t best_count = env_.mapping->anchors_in(DocId{1}).size();
      bool tie = false;
      for (int d = 2; d <= n; ++d) {
        std::size_t c = env_.mapping->anchors_in(DocId{d}).size();
        if (c > best_count) {
          best = d;
          best_count = c;
          tie = false;
        } else if (c == best_count) {
          tie = true;
        }
      }
      if (tie && notes_ != nullptr) notes_->argmax_tie = true;
      return Value::doc(DocId{best});
    }
    if (fn == "last") {
      Value v = eval(*args[0]);
      if (v.kind() != Value::Kind::list) throw EvalError(EvalErrorClass::type_mismatch, "last expects a list");
      if (v.as_list().empty()) throw EvalError(EvalErrorClass::selection_error, "last of empty list");
      return v.as_list().back();
    }
    if (fn == "nth") {
      Value v = eval(*args[0]);
      if (v.kind() != Value::Kind::list) throw EvalError(EvalErrorClass::type_mismatch, "nth expects a list");
      std::int64_t i = int_of(eval(*args[1]), "nth");
      if (i < 1 || i > static_cast<std::int64_t>(v.as_list().size())) {
        throw EvalError(EvalErrorClass::selection_error, "nth index " + std::to_string(i) + " out of range");
      }
      return v.as_list()[static_cast<std::size_t>(i - 1)];
    }
    if (fn == "preceding") {
      Value v = eval(*args[0]);
      if (v.kind() != Value::Kind::list) throw EvalError(EvalErrorClass::type_mismatch, "preceding expects a list");
      Value item = eval(*args[1]);
      const auto& items = v.as_list();
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i] == item) {
          if (i == 0) throw EvalError(EvalErrorClass::selection_error, "no element precedes the first");
          return items[i - 1];
        }
      }
      throw EvalError(EvalErrorClass::selection_error, "item not found in list");
    }
    throw EvalError(EvalErrorClass::type_mismatch, "unknown function " + fn);
  }

  const EvalEnv& env_;
  EvalNotes* notes_;
};

}  // namespace dsl_detail

inline Value evaluate(const Expr& e, const EvalEnv& env, EvalNotes* notes = nullptr) {
  if (env.mapping == nullptr) throw InternalError("evaluate: environment has no mapping");
  return dsl_detail::Evaluator(env, notes).eval(e);
}

inline Value evaluate(const ExprPtr& e, const EvalEnv& env, EvalNotes* notes = nullptr) {
  return evaluate(*e, env, notes);
}

}  // namespace abr
