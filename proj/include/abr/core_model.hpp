#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "abr/decimal.hpp"
#include "abr/errors.hpp"
#include "abr/rng.hpp"

namespace abr {

// ---------------------------------------------------------------------------
// Identifiers

// Anchors are plain tokens; uniqueness within a sample's blueprint is an
// identifier property, placement in several documents is multiplicity.
using AnchorId = std::string;

// 1-based document number, contiguous within a sample.
struct DocId {
  int index = 0;

  friend bool operator==(DocId a, DocId b) { return a.index == b.index; }
  friend auto operator<=>(DocId a, DocId b) { return a.index <=> b.index; }

  std::string str() const { return "doc" + std::to_string(index); }

  static std::optional<DocId> parse(std::string_view text) {
    if (text.size() < 4 || text.substr(0, 3) != "doc") return std::nullopt;
    int v = 0;
    for (char c : text.substr(3)) {
      if (c < '0' || c > '9') return std::nullopt;
      v = v * 10 + (c - '0');
      if (v > 1'000'000) return std::nullopt;
    }
    if (v < 1 || text[3] == '0') return std::nullopt;
    return DocId{v};
  }
};

inline bool is_well_formed_anchor(std::string_view token) {
  if (token.empty()) return false;
  for (char c : token) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
    if (!ok) return false;
  }
  return true;
}

enum class AnchorStyle { uppercase_random, timestamp };

struct AnchorConfig {
  AnchorStyle style = AnchorStyle::uppercase_random;
  int length = 8;  // uppercase_random only
};

inline AnchorId make_anchor(Rng& rng, const AnchorConfig& cfg) {
  std::string out;
  if (cfg.style == AnchorStyle::uppercase_random) {
    out.reserve(cfg.length);
    for (int i = 0; i < cfg.length; ++i) out.push_back(static_cast<char>('A' + rng.below(26)));
  } else {
    // Pseudo-timestamp in millis plus a short suffix; derived from the seed
    // stream, never the clock, so generation stays reproducible.
    std::uint64_t millis = 1'600'000'000'000ull + rng.below(400'000'000'000ull);
    out = std::to_string(millis);
    out.push_back('-');
    static constexpr char kSuffix[] = "abcdefghijklmnopqrstuvwxyz0123456789";
    for (int i = 0; i < 4; ++i) out.push_back(kSuffix[rng.below(36)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Values

// Result of evaluating an answer expression. Booleans are numbers 1/0.
class Value {
 public:
  enum class Kind { number, text, doc, doc_set, list };

  Value() : kind_(Kind::number) {}

  static Value number(Decimal d) {
    Value v;
    v.kind_ = Kind::number;
    v.number_ = d;
    return v;
  }
  static Value text(std::string t) {
    Value v;
    v.kind_ = Kind::text;
    v.text_ = std::move(t);
    return v;
  }
  static Value doc(DocId d) {
    Value v;
    v.kind_ = Kind::doc;
    v.doc_ = d;
    return v;
  }
  static Value doc_set(std::vector<DocId> docs) {
    std::sort(docs.begin(), docs.end());
    docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
    Value v;
    v.kind_ = Kind::doc_set;
    v.docs_ = std::move(docs);
    return v;
  }
  static Value list(std::vector<Value> items) {
    Value v;
    v.kind_ = Kind::list;
    v.items_ = std::move(items);
    return v;
  }

  Kind kind() const { return kind_; }
  const Decimal& as_number() const { return number_; }
  const std::string& as_text() const { return text_; }
  DocId as_doc() const { return doc_; }
  const std::vector<DocId>& as_doc_set() const { return docs_; }
  const std::vector<Value>& as_list() const { return items_; }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
      case Kind::number: return a.number_ == b.number_;
      case Kind::text: return a.text_ == b.text_;
      case Kind::doc: return a.doc_ == b.doc_;
      case Kind::doc_set: return a.docs_ == b.docs_;
      case Kind::list: return a.items_ == b.items_;
    }
    return false;
  }

  // Canonical rendering, used for the on-disk oracle_answer and for scoring.
  std::string render() const {
    switch (kind_) {
      case Kind::number: return number_.str();
      case Kind::text: return text_;
      case Kind::doc: return doc_.str();
      case Kind::doc_set: {
        std::string out;
        for (std::size_t i = 0; i < docs_.size(); ++i) {
          if (i) out += ", ";
          out += docs_[i].str();
        }
        return out;
      }
      case Kind::list: {
        std::string out;
        for (std::size_t i = 0; i < items_.size(); ++i) {
          if (i) out += "; ";
          out += items_[i].render();
        }
        return out;
      }
    }
    return {};
  }

 private:
  Kind kind_;
  Decimal number_;
  std::string text_;
  DocId doc_{};
  std::vector<DocId> docs_;
  std::vector<Value> items_;
};

// ---------------------------------------------------------------------------
// Blueprint

// Stage-1 blueprint: which anchors appear in which virtual documents. The
// per-document order is the insertion order within the rendered document;
// relational constructions depend on it.
class DocMapping {
 public:
  DocMapping() = default;
  explicit DocMapping(int num_docs) : docs_(static_cast<std::size_t>(num_docs)) {}

  int num_docs() const { return static_cast<int>(docs_.size()); }

  void place(DocId doc, AnchorId anchor) { at(doc).push_back(std::move(anchor)); }

  void place_at(DocId doc, std::size_t position, AnchorId anchor) {
    auto& list = at(doc);
    if (position > list.size()) position = list.size();
    list.insert(list.begin() + static_cast<std::ptrdiff_t>(position), std::move(anchor));
  }

  const std::vector<AnchorId>& anchors_in(DocId doc) const { return at(doc); }

  std::vector<DocId> docs_containing(const AnchorId& anchor) const {
    std::vector<DocId> out;
    for (int d = 1; d <= num_docs(); ++d) {
      const auto& list = docs_[static_cast<std::size_t>(d - 1)];
      if (std::find(list.begin(), list.end(), anchor) != list.end()) out.push_back(DocId{d});
    }
    return out;
  }

  int occurrences(const AnchorId& anchor, DocId doc) const {
    const auto& list = at(doc);
    return static_cast<int>(std::count(list.begin(), list.end(), anchor));
  }

  int global_count(const AnchorId& anchor) const {
    int n = 0;
    for (const auto& list : docs_) n += static_cast<int>(std::count(list.begin(), list.end(), anchor));
    return n;
  }

  std::size_t total_placements() const {
    std::size_t n = 0;
    for (const auto& list : docs_) n += list.size();
    return n;
  }

  // Distinct anchors in first-placement order.
  std::vector<AnchorId> all_anchors() const {
    std::vector<AnchorId> out;
    std::set<AnchorId> seen;
    for (const auto& list : docs_) {
      for (const auto& a : list) {
        if (seen.insert(a).second) out.push_back(a);
      }
    }
    return out;
  }

  // Anchors whose global placement count is one, ordered by (doc, position).
  std::vector<AnchorId> unique_anchors() const {
    std::vector<AnchorId> out;
    for (const auto& list : docs_) {
      for (const auto& a : list) {
        if (global_count(a) == 1) out.push_back(a);
      }
    }
    return out;
  }

  friend bool operator==(const DocMapping& a, const DocMapping& b) { return a.docs_ == b.docs_; }

 private:
  std::vector<AnchorId>& at(DocId doc) {
    if (doc.index < 1 || doc.index > num_docs()) throw InternalError("doc index out of range: " + doc.str());
    return docs_[static_cast<std::size_t>(doc.index - 1)];
  }
  const std::vector<AnchorId>& at(DocId doc) const {
    if (doc.index < 1 || doc.index > num_docs()) throw InternalError("doc index out of range: " + doc.str());
    return docs_[static_cast<std::size_t>(doc.index - 1)];
  }

  std::vector<std::vector<AnchorId>> docs_;
};

// ---------------------------------------------------------------------------
// Embedded question units

enum class QaSource { builtin_arithmetic, imported };

struct EmbeddedQA {
  AnchorId anchor;
  DocId doc;
  int occurrence = 1;  // k-th occurrence of this anchor in this doc, 1-based
  std::string question;
  Value truth;
  QaSource source = QaSource::builtin_arithmetic;
};

// ---------------------------------------------------------------------------
// Difficulty

struct DifficultyConfig {
  std::size_t target_length = 8000;  // characters; ~4 chars per token
  int num_docs = 3;
  int density_min = 1;  // anchors per document
  int density_max = 3;
  int lure_count = 2;
  int lure_edit_distance = 1;
  int reasoning_depth = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_docs < 1) throw ConfigError("num_docs must be >= 1");
    if (density_min < 0) throw ConfigError("density_min must be >= 0");
    if (density_min > density_max) throw ConfigError("density_min must be <= density_max");
    if (density_max < 1) throw ConfigError("density_max must be >= 1");
    if (lure_count < 0) throw ConfigError("lure_count must be >= 0");
    if (lure_edit_distance < 1) throw ConfigError("lure_edit_distance must be >= 1");
    if (reasoning_depth < 1) throw ConfigError("reasoning_depth must be >= 1");
    if (target_length < 1) throw ConfigError("target_length must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Skills and samples

enum class Skill { niah, anti_interfere, multi_source, logic, calc_reason };

inline std::string_view skill_name(Skill s) {
  switch (s) {
    case Skill::niah: return "niah";
    case Skill::anti_interfere: return "anti_interfere";
    case Skill::multi_source: return "multi_source";
    case Skill::logic: return "logic";
    case Skill::calc_reason: return "calc_reason";
  }
  return "?";
}

inline std::optional<Skill> skill_from_name(std::string_view name) {
  for (Skill s : {Skill::niah, Skill::anti_interfere, Skill::multi_source, Skill::logic, Skill::calc_reason}) {
    if (skill_name(s) == name) return s;
  }
  return std::nullopt;
}

struct AnchorPosition {
  AnchorId anchor;
  DocId doc;
  int occurrence = 1;
  std::size_t offset = 0;  // first character of the anchor within the document
};

// One dataset record: synthesized context plus its verifiable meta-question.
struct Sample {
  std::string id;
  Skill skill = Skill::niah;
  std::vector<std::string> documents;
  std::string question;
  std::string answer_expr;  // canonical prefix notation
  Value oracle_answer;
  DocMapping mapping;
  std::vector<AnchorPosition> positions;
  DifficultyConfig difficulty;
  std::string template_id;
  std::uint64_t seed = 0;
  bool corpus_repeats = false;  // background units reused because the corpus was smaller than the budget
};

// ---------------------------------------------------------------------------
// Blueprint planning
//
// Planners lay out the skill-specific anchor structure; builders attach
// questions and expressions on top. generate_blueprint exposes the mapping
// alone.

namespace plan_detail {

inline AnchorId fresh_anchor(Rng& rng, const AnchorConfig& cfg, std::set<AnchorId>& used) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    AnchorId a = make_anchor(rng, cfg);
    if (used.insert(a).second) return a;
  }
  throw InternalError("anchor space exhausted");
}

// Background fill: per document, draw the density target and top up with
// fresh single-placement anchors around whatever structure is already there.
inline void fill_background(DocMapping& m, const DifficultyConfig& cfg, const AnchorConfig& acfg, Rng& rng,
                            std::set<AnchorId>& used) {
  for (int d = 1; d <= cfg.num_docs; ++d) {
    DocId doc{d};
    int want = static_cast<int>(rng.range(cfg.density_min, cfg.density_max));
    int have = static_cast<int>(m.anchors_in(doc).size());
    for (int i = have; i < want; ++i) {
      std::size_t pos = rng.below(m.anchors_in(doc).size() + 1);
      m.place_at(doc, pos, fresh_anchor(rng, acfg, used));
    }
  }
}

inline DocId pick_doc(Rng& rng, int num_docs) { return DocId{static_cast<int>(rng.range(1, num_docs))}; }

}  // namespace plan_detail

struct NiahPlan {
  DocMapping mapping;
  AnchorId target;
  DocId target_doc;
};

inline NiahPlan plan_niah(const DifficultyConfig& cfg, const AnchorConfig& acfg, Rng& rng) {
  cfg.validate();
  NiahPlan plan;
  plan.mapping = DocMapping(cfg.num_docs);
  std::set<AnchorId> used;
  plan_detail::fill_background(plan.mapping, cfg, acfg, rng, used);
  if (plan.mapping.total_placements() == 0) {
    DocId doc = plan_detail::pick_doc(rng, cfg.num_docs);
    plan.mapping.place(doc, plan_detail::fresh_anchor(rng, acfg, used));
  }
  // Pick the target among all placements, uniformly.
  std::vector<std::pair<AnchorId, DocId>> placements;
  for (int d = 1; d <= cfg.num_docs; ++d) {
    for (const auto& a : plan.mapping.anchors_in(DocId{d})) placements.emplace_back(a, DocId{d});
  }
  const auto& chosen = placements[rng.below(placements.size())];
  plan.target = chosen.first;
  plan.target_doc = chosen.second;
  return plan;
}

enum class AntiMode { similarity, conflict };

struct AntiPlan {
  DocMapping mapping;
  AntiMode mode = AntiMode::similarity;
  AnchorId target;
  DocId scoped_doc;
  int occurrence = 0;  // 0 when the document scope alone disambiguates
  std::vector<AnchorId> lures;
};

// Levenshtein distance over anchor tokens.
inline int levenshtein(std::string_view a, std::string_view b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace plan_detail {

inline char alphabet_char(Rng& rng, AnchorStyle style) {
  if (style == AnchorStyle::uppercase_random) return static_cast<char>('A' + rng.below(26));
  static constexpr char kChars[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  return kChars[rng.below(36)];
}

// A lure differs from the target by 1..max_distance edits
// (substitutions/insertions), verified with true Levenshtein distance.
inline AnchorId make_lure(Rng& rng, const AnchorId& target, int max_distance, AnchorStyle style,
                          std::set<AnchorId>& used) {
  for (int attempt = 0; attempt < 2000; ++attempt) {
    std::string lure = target;
    int edits = static_cast<int>(rng.range(1, max_distance));
    for (int e = 0; e < edits; ++e) {
      if (rng.chance(0.7) && !lure.empty()) {
        std::size_t pos = rng.below(lure.size());
        char c = alphabet_char(rng, style);
        if (c == lure[pos]) c = c == 'Z' || c == '9' ? 'A' : static_cast<char>(c + 1);
        lure[pos] = c;
      } else {
        std::size_t pos = rng.below(lure.size() + 1);
        lure.insert(lure.begin() + static_cast<std::ptrdiff_t>(pos), alphabet_char(rng, style));
      }
    }
    int dist = levenshtein(target, lure);
    if (dist < 1 || dist > max_distance) continue;  // edits can cancel out
    if (used.count(lure)) continue;                 // also rejects lure == target
    used.insert(lure);
    return lure;
  }
  throw InternalError("could not derive a distinct lure anchor");
}

}  // namespace plan_detail

inline AntiPlan plan_anti_interfere(const DifficultyConfig& cfg, const AnchorConfig& acfg, Rng& rng, AntiMode mode) {
  cfg.validate();
  AntiPlan plan;
  plan.mode = mode;
  plan.mapping = DocMapping(cfg.num_docs);
  std::set<AnchorId> used;

  if (mode == AntiMode::similarity) {
    plan.target = plan_detail::fresh_anchor(rng, acfg, used);
    plan.scoped_doc = plan_detail::pick_doc(rng, cfg.num_docs);
    plan.mapping.place(plan.scoped_doc, plan.target);
    for (int i = 0; i < cfg.lure_count; ++i) {
      AnchorId lure = plan_detail::make_lure(rng, plan.target, cfg.lure_edit_distance, acfg.style, used);
      DocId doc = plan_detail::pick_doc(rng, cfg.num_docs);
      plan.mapping.place_at(doc, rng.below(plan.mapping.anchors_in(doc).size() + 1), lure);
      plan.lures.push_back(std::move(lure));
    }
    plan_detail::fill_background(plan.mapping, cfg, acfg, rng, used);
    return plan;
  }

  // Conflict mode: the identical anchor is distributed, and the question pins
  // a document (and an occurrence when the document alone is ambiguous).
  if (cfg.num_docs < 2) throw ConfigError("conflict mode needs at least 2 documents");
  plan.target = plan_detail::fresh_anchor(rng, acfg, used);
  DocId first = plan_detail::pick_doc(rng, cfg.num_docs);
  int second_idx = static_cast<int>(rng.range(1, cfg.num_docs - 1));
  if (second_idx >= first.index) ++second_idx;
  DocId second{second_idx};
  bool doubled = cfg.density_max >= 2 && rng.chance(0.5);
  plan.mapping.place(first, plan.target);
  if (doubled) plan.mapping.place(first, plan.target);
  plan.mapping.place(second, plan.target);
  plan.scoped_doc = rng.chance(0.5) ? first : second;
  // Scoping to the doubled document needs an occurrence index on top of the
  // document scope.
  plan.occurrence = (doubled && plan.scoped_doc == first) ? static_cast<int>(rng.range(1, 2)) : 0;
  plan_detail::fill_background(plan.mapping, cfg, acfg, rng, used);
  return plan;
}

struct MultiSourcePlan {
  DocMapping mapping;
  AnchorId shared;
  std::vector<DocId> part_docs;  // ascending; part i lives in part_docs[i-1]
};

inline MultiSourcePlan plan_multi_source(const DifficultyConfig& cfg, const AnchorConfig& acfg, Rng& rng, int parts) {
  cfg.validate();
  if (parts < 2) throw ConfigError("multi_source needs at least 2 parts");
  if (cfg.num_docs < parts) throw ConfigError("multi_source needs num_docs >= parts");
  MultiSourcePlan plan;
  plan.mapping = DocMapping(cfg.num_docs);
  std::set<AnchorId> used;
  plan.shared = plan_detail::fresh_anchor(rng, acfg, used);

  std::vector<int> all(static_cast<std::size_t>(cfg.num_docs));
  for (int d = 0; d < cfg.num_docs; ++d) all[static_cast<std::size_t>(d)] = d + 1;
  rng.shuffle(all);
  all.resize(static_cast<std::size_t>(parts));
  std::sort(all.begin(), all.end());
  for (int d : all) {
    plan.part_docs.push_back(DocId{d});
    plan.mapping.place(DocId{d}, plan.shared);
  }
  plan_detail::fill_background(plan.mapping, cfg, acfg, rng, used);
  return plan;
}

enum class LogicVariant { intersect, freq_preceding, freq_last };

struct LogicPlan {
  DocMapping mapping;
  LogicVariant variant = LogicVariant::intersect;
  // intersect: question names first/second, answer anchor sits in the single
  // document containing both.
  AnchorId first, second, answer;
  DocId answer_doc;
};

inline LogicPlan plan_logic(const DifficultyConfig& cfg, const AnchorConfig& acfg, Rng& rng) {
  cfg.validate();
  if (cfg.num_docs < 3) throw ConfigError("logic needs at least 3 documents");

  std::vector<LogicVariant> feasible;
  if (cfg.density_max >= 3) feasible.push_back(LogicVariant::intersect);
  if (cfg.density_max >= 2 && cfg.density_min < cfg.density_max) feasible.push_back(LogicVariant::freq_preceding);
  feasible.push_back(LogicVariant::freq_last);

  LogicPlan plan;
  plan.variant = feasible[rng.below(feasible.size())];
  plan.mapping = DocMapping(cfg.num_docs);
  std::set<AnchorId> used;

  if (plan.variant == LogicVariant::intersect) {
    // Target doc holds first, second and the answer anchor; first and second
    // each recur in one other (distinct) document, so their doc sets meet in
    // exactly the target.
    int target = static_cast<int>(rng.range(1, cfg.num_docs));
    int other1 = static_cast<int>(rng.range(1, cfg.num_docs - 1));
    if (other1 >= target) ++other1;
    int other2 = static_cast<int>(rng.range(1, cfg.num_docs - 2));
    for (int taken : {std::min(target, other1), std::max(target, other1)}) {
      if (other2 >= taken) ++other2;
    }
    plan.answer_doc = DocId{target};
    plan.first = plan_detail::fresh_anchor(rng, acfg, used);
    plan.second = plan_detail::fresh_anchor(rng, acfg, used);
    plan.answer = plan_detail::fresh_anchor(rng, acfg, used);
    std::vector<AnchorId> in_target = {plan.first, plan.second, plan.answer};
    rng.shuffle(in_target);
    for (auto& a : in_target) plan.mapping.place(plan.answer_doc, std::move(a));
    plan.mapping.place(DocId{other1}, plan.first);
    plan.mapping.place(DocId{other2}, plan.second);
    plan_detail::fill_background(plan.mapping, cfg, acfg, rng, used);
    return plan;
  }

  if (plan.variant == LogicVariant::freq_preceding) {
    // One document strictly dominates the anchor counts; its last anchor is
    // globally unique, and the answer is the unique anchor just before it.
    // A duplicated "trap" anchor may sit in between.
    DocId dom = plan_detail::pick_doc(rng, cfg.num_docs);
    int m = static_cast<int>(rng.range(std::max(2, cfg.density_min + 1), cfg.density_max));
    std::vector<AnchorId> row;
    for (int i = 0; i < m; ++i) row.push_back(plan_detail::fresh_anchor(rng, acfg, used));
    for (auto& a : row) plan.mapping.place(dom, a);

    for (int d = 1; d <= cfg.num_docs; ++d) {
      if (d == dom.index) continue;
      int want = static_cast<int>(rng.range(cfg.density_min, m - 1));
      for (int i = 0; i < want; ++i) plan.mapping.place(DocId{d}, plan_detail::fresh_anchor(rng, acfg, used));
    }
    // Optional trap: duplicate a middle anchor of the dominant doc into a doc
    // with spare capacity. It drops out of the unique set without touching
    // the dominant count.
    if (m >= 3) {
      for (int d = 1; d <= cfg.num_docs; ++d) {
        if (d == dom.index) continue;
        if (static_cast<int>(plan.mapping.anchors_in(DocId{d}).size()) < m - 1) {
          // Never the first or last anchor of the dominant doc.
          const AnchorId& trap = row[static_cast<std::size_t>(rng.range(1, m - 2))];
          plan.mapping.place_at(DocId{d}, rng.below(plan.mapping.anchors_in(DocId{d}).size() + 1), trap);
          break;
        }
      }
    }
    plan.answer_doc = dom;
    // Answer: last globally-unique anchor of the dominant doc before its
    // final anchor.
    const auto& doms = plan.mapping.anchors_in(dom);
    for (std::size_t i = doms.size() - 1; i-- > 0;) {
      if (plan.mapping.global_count(doms[i]) == 1) {
        plan.answer = doms[i];
        break;
      }
    }
    if (plan.answer.empty()) throw InternalError("frequency plan lost its unique predecessor");
    return plan;
  }

  // freq_last: every anchor distinct; the answer is the globally last unique
  // anchor.
  plan_detail::fill_background(plan.mapping, cfg, acfg, rng, used);
  if (plan.mapping.total_placements() == 0) {
    plan.mapping.place(plan_detail::pick_doc(rng, cfg.num_docs), plan_detail::fresh_anchor(rng, acfg, used));
  }
  auto uniques = plan.mapping.unique_anchors();
  plan.answer = uniques.back();
  auto docs = plan.mapping.docs_containing(plan.answer);
  plan.answer_doc = docs.front();
  return plan;
}

struct CalcPlan {
  DocMapping mapping;
  AnchorId cond_first, cond_second;  // condition: count-docs(first) > count-docs(second)
  bool cond_truth = false;
  std::vector<AnchorId> true_leaves, false_leaves;
  std::map<AnchorId, DocId> leaf_doc;
};

inline CalcPlan plan_calc_reason(const DifficultyConfig& cfg, const AnchorConfig& acfg, Rng& rng, int depth) {
  cfg.validate();
  if (depth < 1) throw ConfigError("calc_reason needs depth >= 1");
  int leaves = depth + 1;
  // 2 condition anchors (one may recur across docs) + two branches of leaves.
  std::size_t capacity = static_cast<std::size_t>(cfg.num_docs) * static_cast<std::size_t>(cfg.density_max);
  std::size_t needed = 2 + 2 * static_cast<std::size_t>(leaves);
  if (capacity < needed + 1) {
    throw ConfigError("calc_reason needs capacity for " + std::to_string(needed) +
                      " anchors; raise num_docs or density_max");
  }

  CalcPlan plan;
  plan.mapping = DocMapping(cfg.num_docs);
  std::set<AnchorId> used;
  plan.cond_first = plan_detail::fresh_anchor(rng, acfg, used);
  plan.cond_second = plan_detail::fresh_anchor(rng, acfg, used);

  // Condition pattern: either equal doc counts (false, as in the 1v1 case) or
  // one anchor spread across more documents.
  int pattern = cfg.num_docs >= 2 ? static_cast<int>(rng.range(0, 2)) : 0;
  int count_first = pattern == 1 ? 2 : 1;
  int count_second = pattern == 2 ? 2 : 1;
  plan.cond_truth = count_first > count_second;

  // Round-robin doc cursor keeps placements within density capacity.
  std::vector<int> load(static_cast<std::size_t>(cfg.num_docs), 0);
  auto place = [&](const AnchorId& a, int copies) {
    DocId first_doc{0};
    for (int c = 0; c < copies; ++c) {
      int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.num_docs)));
      int best = -1;
      for (int off = 0; off < cfg.num_docs; ++off) {
        int idx = (start + off) % cfg.num_docs;
        const auto& list = plan.mapping.anchors_in(DocId{idx + 1});
        bool already = std::find(list.begin(), list.end(), a) != list.end();
        if (load[static_cast<std::size_t>(idx)] < cfg.density_max && !already) {
          best = idx;
          break;
        }
      }
      if (best < 0) throw ConfigError("calc_reason cannot place anchors within density limits");
      DocId doc{best + 1};
      plan.mapping.place_at(doc, rng.below(plan.mapping.anchors_in(doc).size() + 1), a);
      ++load[static_cast<std::size_t>(best)];
      if (c == 0) first_doc = doc;
    }
    return first_doc;
  };

  place(plan.cond_first, count_first);
  place(plan.cond_second, count_second);
  for (int i = 0; i < leaves; ++i) {
    AnchorId a = plan_detail::fresh_anchor(rng, acfg, used);
    plan.leaf_doc[a] = place(a, 1);
    plan.true_leaves.push_back(std::move(a));
  }
  for (int i = 0; i < leaves; ++i) {
    AnchorId a = plan_detail::fresh_anchor(rng, acfg, used);
    plan.leaf_doc[a] = place(a, 1);
    plan.false_leaves.push_back(std::move(a));
  }
  return plan;
}

// Tagged union over the per-skill plans. Builders and generate_blueprint
// derive the same stream from cfg.seed, so a sample's blueprint can be
// re-derived without running the full builder.
struct SkillPlan {
  Skill skill = Skill::niah;
  NiahPlan niah;
  AntiPlan anti;
  MultiSourcePlan multi;
  LogicPlan logic;
  CalcPlan calc;
  int parts = 0;
  int depth = 0;

  const DocMapping& mapping() const {
    switch (skill) {
      case Skill::niah: return niah.mapping;
      case Skill::anti_interfere: return anti.mapping;
      case Skill::multi_source: return multi.mapping;
      case Skill::logic: return logic.mapping;
      case Skill::calc_reason: return calc.mapping;
    }
    throw InternalError("bad skill");
  }
};

inline constexpr std::uint64_t kBlueprintStream = 0x626c75657072696eull;

inline SkillPlan plan_skill(const DifficultyConfig& cfg, Skill skill, const AnchorConfig& acfg, Rng& rng) {
  SkillPlan plan;
  plan.skill = skill;
  switch (skill) {
    case Skill::niah:
      plan.niah = plan_niah(cfg, acfg, rng);
      break;
    case Skill::anti_interfere: {
      AntiMode mode = cfg.num_docs >= 2 && rng.chance(0.5) ? AntiMode::conflict : AntiMode::similarity;
      plan.anti = plan_anti_interfere(cfg, acfg, rng, mode);
      break;
    }
    case Skill::multi_source: {
      if (cfg.num_docs < 2) throw ConfigError("multi_source needs at least 2 documents");
      plan.parts = static_cast<int>(rng.range(2, std::min(cfg.num_docs, 4)));
      plan.multi = plan_multi_source(cfg, acfg, rng, plan.parts);
      break;
    }
    case Skill::logic:
      plan.logic = plan_logic(cfg, acfg, rng);
      break;
    case Skill::calc_reason:
      plan.depth = cfg.reasoning_depth;
      plan.calc = plan_calc_reason(cfg, acfg, rng, plan.depth);
      break;
  }
  return plan;
}

// Stage-1 blueprint generation: returns a mapping honoring the skill's
// structure, deterministic for a fixed cfg.seed.
inline DocMapping generate_blueprint(const DifficultyConfig& cfg, Skill skill, const AnchorConfig& acfg = {}) {
  Rng rng(Rng::mix(cfg.seed, kBlueprintStream));
  return plan_skill(cfg, skill, acfg, rng).mapping();
}

}  // namespace abr
