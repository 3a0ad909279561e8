#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "abr/answer_dsl.hpp"
#include "abr/core_model.hpp"
#include "abr/question_bank.hpp"
#include "abr/rng.hpp"
#include "abr/templates.hpp"

namespace abr {

// One constructor per atomic skill. Each produces the blueprint, the embedded
// QA units, the rendered meta-question, the executable answer expression and
// the expected value. `expected` is computed from the builder's own knowledge
// of the construction, never by running the evaluator, so the two paths can
// check each other.
struct BuilderOutput {
  DocMapping mapping;
  std::vector<EmbeddedQA> qas;
  std::string question;
  ExprPtr expr;
  Value expected;
  std::string template_id;
};

struct BuildContext {
  DifficultyConfig cfg;
  AnchorConfig anchors{};
  const TemplateSet* templates = nullptr;  // builtin when null
  QuestionSource* questions = nullptr;     // builtin arithmetic when null
};

namespace build_detail {

inline constexpr std::uint64_t kQuestionStream = 0x7175657374696f6eull;
inline constexpr int kRounding = 2;  // environment default; see EvalEnv

// Draws questions with sample-wide distinct texts so needle strings stay
// countable in the rendered documents.
class QaDraw {
 public:
  QaDraw(QuestionSource& src, Rng& rng) : src_(&src), rng_(&rng) {}

  std::pair<std::string, Decimal> numeric() {
    for (int i = 0; i < 200; ++i) {
      auto [q, t] = src_->next_numeric(*rng_);
      if (used_.insert(q).second) return {std::move(q), t};
    }
    throw DataError("question source cannot supply enough distinct questions");
  }

  std::pair<std::string, Value> any() {
    for (int i = 0; i < 200; ++i) {
      auto [q, t] = src_->next_any(*rng_);
      if (used_.insert(q).second) return {std::move(q), std::move(t)};
    }
    throw DataError("question source cannot supply enough distinct questions");
  }

  QaSource tag() const { return src_->tag(); }

 private:
  QuestionSource* src_;
  Rng* rng_;
  std::set<std::string> used_;
};

using QaKey = std::tuple<AnchorId, int, int>;  // anchor, doc, occurrence

// Walk the mapping in document order, numbering occurrences, and attach one
// QA per placement. Placements present in `preset` keep their prepared
// question/truth; the rest draw from the source.
inline std::vector<EmbeddedQA> attach_qas(const DocMapping& m, QaDraw& draw,
                                          const std::map<QaKey, std::pair<std::string, Value>>& preset) {
  std::vector<EmbeddedQA> qas;
  for (int d = 1; d <= m.num_docs(); ++d) {
    std::map<AnchorId, int> seen;
    for (const auto& anchor : m.anchors_in(DocId{d})) {
      int occ = ++seen[anchor];
      EmbeddedQA qa;
      qa.anchor = anchor;
      qa.doc = DocId{d};
      qa.occurrence = occ;
      auto it = preset.find({anchor, d, occ});
      if (it != preset.end()) {
        qa.question = it->second.first;
        qa.truth = it->second.second;
      } else {
        auto [q, t] = draw.any();
        qa.question = std::move(q);
        qa.truth = std::move(t);
      }
      qa.source = draw.tag();
      qas.push_back(std::move(qa));
    }
  }
  return qas;
}

inline Value rounded_truth(const Value& truth) {
  if (truth.kind() == Value::Kind::number) return Value::number(truth.as_number().rounded(kRounding));
  return truth;
}

inline const TemplateSet& templates_of(const BuildContext& ctx) {
  static const TemplateSet builtin = TemplateSet::builtin();
  return ctx.templates ? *ctx.templates : builtin;
}

struct SourceBox {
  std::unique_ptr<QuestionSource> owned;
  QuestionSource* use = nullptr;
};

inline SourceBox source_of(const BuildContext& ctx) {
  SourceBox box;
  if (ctx.questions) {
    box.use = ctx.questions;
  } else {
    box.owned = std::make_unique<BuiltinArithmeticSource>();
    box.use = box.owned.get();
  }
  return box;
}

// Aggregation branch for calc_reason: expression, natural-language
// description and the folded value, built side by side.
struct Branch {
  ExprPtr expr;
  std::string description;
  Decimal value;
  bool leaf = false;
};

inline Branch make_leaf(const AnchorId& anchor, DocId doc, const Decimal& truth) {
  Branch b;
  b.expr = Expr::make_call("solve", {Expr::make_anchor(anchor), Expr::make_doc(doc)});
  b.description = "the answer for " + anchor;
  b.value = truth.rounded(kRounding);
  b.leaf = true;
  return b;
}

inline Branch combine(const std::string& op, const Branch& a, const Branch& b) {
  Branch out;
  out.expr = Expr::make_call(op, {a.expr, b.expr});
  auto wrap = [](const Branch& x) { return x.leaf ? x.description : "(" + x.description + ")"; };
  std::string word = op == "sum" ? "sum" : op == "product" ? "product" : op == "min" ? "minimum" : "maximum";
  out.description = "the " + word + " of " + wrap(a) + " and " + wrap(b);
  // Mirrors the evaluator's node rounding: fold, then round half away.
  if (op == "sum") {
    out.value = (a.value + b.value).rounded(kRounding);
  } else if (op == "product") {
    out.value = (a.value * b.value).rounded(kRounding);
  } else if (op == "min") {
    out.value = (a.value < b.value ? a.value : b.value).rounded(kRounding);
  } else {
    out.value = (a.value > b.value ? a.value : b.value).rounded(kRounding);
  }
  return out;
}

}  // namespace build_detail

// ---------------------------------------------------------------------------
// Builders

inline BuilderOutput build_from_plan(const BuildContext& ctx, const SkillPlan& plan) {
  using namespace build_detail;
  const TemplateSet& templates = templates_of(ctx);
  SourceBox src = source_of(ctx);
  Rng qa_rng(Rng::mix(ctx.cfg.seed, kQuestionStream));
  QaDraw draw(*src.use, qa_rng);

  BuilderOutput out;
  out.mapping = plan.mapping();

  switch (plan.skill) {
    case Skill::niah: {
      const NiahPlan& p = plan.niah;
      auto [q, truth] = draw.any();
      std::map<QaKey, std::pair<std::string, Value>> preset{
          {{p.target, p.target_doc.index, 1}, {q, truth}}};
      out.qas = attach_qas(out.mapping, draw, preset);
      out.expr = Expr::make_call("solve", {Expr::make_anchor(p.target), Expr::make_doc(p.target_doc)});
      out.expected = rounded_truth(truth);
      out.template_id = "niah.v1";
      out.question = templates.render(out.template_id, {{"anchor", p.target}});
      return out;
    }

    case Skill::anti_interfere: {
      const AntiPlan& p = plan.anti;
      if (p.mode == AntiMode::similarity) {
        auto [q, truth] = draw.any();
        std::map<QaKey, std::pair<std::string, Value>> preset{
            {{p.target, p.scoped_doc.index, 1}, {q, truth}}};
        out.qas = attach_qas(out.mapping, draw, preset);
        out.expr = Expr::make_call("solve", {Expr::make_anchor(p.target), Expr::make_doc(p.scoped_doc)});
        out.expected = rounded_truth(truth);
        out.template_id = "anti.similarity.v1";
        out.question = templates.render(out.template_id, {{"anchor", p.target}});
        return out;
      }
      // Conflict: several occurrences of the same anchor, each with its own
      // question; the meta-question pins a document (and occurrence).
      int k = p.occurrence > 0 ? p.occurrence : 1;
      auto [q, truth] = draw.any();
      std::map<QaKey, std::pair<std::string, Value>> preset{
          {{p.target, p.scoped_doc.index, k}, {q, truth}}};
      out.qas = attach_qas(out.mapping, draw, preset);
      std::vector<ExprPtr> args{Expr::make_anchor(p.target), Expr::make_doc(p.scoped_doc)};
      if (p.occurrence > 0) args.push_back(Expr::make_number(Decimal::from_int(p.occurrence)));
      out.expr = Expr::make_call("solve", std::move(args));
      out.expected = rounded_truth(truth);
      if (p.occurrence > 0) {
        out.template_id = "anti.conflict.occ.v1";
        out.question = templates.render(out.template_id, {{"anchor", p.target},
                                                          {"doc", std::to_string(p.scoped_doc.index)},
                                                          {"k", std::to_string(p.occurrence)}});
      } else {
        out.template_id = "anti.conflict.doc.v1";
        out.question = templates.render(out.template_id, {{"anchor", p.target},
                                                          {"doc", std::to_string(p.scoped_doc.index)}});
      }
      return out;
    }

    case Skill::multi_source: {
      const MultiSourcePlan& p = plan.multi;
      int parts = static_cast<int>(p.part_docs.size());
      std::map<QaKey, std::pair<std::string, Value>> preset;
      std::vector<Value> part_answers;
      for (int i = 0; i < parts; ++i) {
        auto [q, t] = draw.numeric();
        std::string fragment =
            "part " + std::to_string(i + 1) + " of " + std::to_string(parts) + ": " + q;
        preset[{p.shared, p.part_docs[static_cast<std::size_t>(i)].index, 1}] = {fragment, Value::number(t)};
        part_answers.push_back(Value::number(t.rounded(kRounding)));
      }
      out.qas = attach_qas(out.mapping, draw, preset);
      out.expr = Expr::make_call("solve-all", {Expr::make_anchor(p.shared)});
      out.expected = Value::list(std::move(part_answers));
      out.template_id = "multi_source.v1";
      out.question = templates.render(out.template_id, {{"anchor", p.shared}});
      return out;
    }

    case Skill::logic: {
      const LogicPlan& p = plan.logic;
      auto [q, truth] = draw.any();
      std::map<QaKey, std::pair<std::string, Value>> preset{
          {{p.answer, p.answer_doc.index, 1}, {q, truth}}};
      out.qas = attach_qas(out.mapping, draw, preset);
      out.expected = rounded_truth(truth);
      if (p.variant == LogicVariant::intersect) {
        out.expr = Expr::make_call(
            "solve-in",
            {Expr::make_anchor(p.answer),
             Expr::make_call("intersect", {Expr::make_call("docs", {Expr::make_anchor(p.first)}),
                                           Expr::make_call("docs", {Expr::make_anchor(p.second)})})});
        out.template_id = "logic.intersect.v1";
        out.question = templates.render(out.template_id, {{"anchor_a", p.first},
                                                          {"anchor_b", p.second},
                                                          {"anchor_c", p.answer}});
        return out;
      }
      if (p.variant == LogicVariant::freq_preceding) {
        auto target = Expr::make_call(
            "preceding",
            {Expr::make_call("unique-anchors", {}),
             Expr::make_call("last",
                             {Expr::make_call("anchors-in", {Expr::make_call("argmax-doc-by-count", {})})})});
        out.expr = Expr::make_call("solve-in", {target, Expr::make_call("docs", {target})});
        out.template_id = "logic.freq_preceding.v1";
        out.question = templates.render(out.template_id, {});
        return out;
      }
      auto target = Expr::make_call("last", {Expr::make_call("unique-anchors", {})});
      out.expr = Expr::make_call("solve-in", {target, Expr::make_call("docs", {target})});
      out.template_id = "logic.freq_last.v1";
      out.question = templates.render(out.template_id, {});
      return out;
    }

    case Skill::calc_reason: {
      const CalcPlan& p = plan.calc;
      std::map<QaKey, std::pair<std::string, Value>> preset;
      auto leaf_branches = [&](const std::vector<AnchorId>& leaves) {
        std::vector<Branch> out_branches;
        for (const auto& a : leaves) {
          auto [q, t] = draw.numeric();
          DocId doc = p.leaf_doc.at(a);
          preset[{a, doc.index, 1}] = {q, Value::number(t)};
          out_branches.push_back(make_leaf(a, doc, t));
        }
        return out_branches;
      };
      auto fold_branch = [&](std::vector<Branch> leaves) {
        Branch node = combine(qa_rng.chance(0.5) ? "sum" : "product", leaves[0], leaves[1]);
        for (std::size_t i = 2; i < leaves.size(); ++i) {
          static const std::vector<std::string> outer_ops = {"sum", "min", "max"};
          node = combine(outer_ops[qa_rng.below(outer_ops.size())], node, leaves[i]);
        }
        return node;
      };
      Branch true_branch = fold_branch(leaf_branches(p.true_leaves));
      Branch false_branch = fold_branch(leaf_branches(p.false_leaves));
      out.qas = attach_qas(out.mapping, draw, preset);

      auto cond = Expr::make_call(">", {Expr::make_call("count-docs", {Expr::make_anchor(p.cond_first)}),
                                        Expr::make_call("count-docs", {Expr::make_anchor(p.cond_second)})});
      out.expr = Expr::make_call("if", {cond, true_branch.expr, false_branch.expr});
      out.expected = Value::number(p.cond_truth ? true_branch.value : false_branch.value);
      out.template_id = "calc.conditional.v1";
      out.question = templates.render(out.template_id, {{"anchor_a", p.cond_first},
                                                        {"anchor_b", p.cond_second},
                                                        {"true_branch", true_branch.description},
                                                        {"false_branch", false_branch.description}});
      return out;
    }
  }
  throw ConfigError("unknown skill");
}

inline BuilderOutput build_niah(const BuildContext& ctx) {
  ctx.cfg.validate();
  Rng rng(Rng::mix(ctx.cfg.seed, kBlueprintStream));
  SkillPlan plan;
  plan.skill = Skill::niah;
  plan.niah = plan_niah(ctx.cfg, ctx.anchors, rng);
  return build_from_plan(ctx, plan);
}

inline BuilderOutput build_anti_interfere(const BuildContext& ctx, AntiMode mode) {
  ctx.cfg.validate();
  Rng rng(Rng::mix(ctx.cfg.seed, kBlueprintStream));
  SkillPlan plan;
  plan.skill = Skill::anti_interfere;
  plan.anti = plan_anti_interfere(ctx.cfg, ctx.anchors, rng, mode);
  return build_from_plan(ctx, plan);
}

inline BuilderOutput build_multi_source(const BuildContext& ctx, int parts) {
  ctx.cfg.validate();
  Rng rng(Rng::mix(ctx.cfg.seed, kBlueprintStream));
  SkillPlan plan;
  plan.skill = Skill::multi_source;
  plan.parts = parts;
  plan.multi = plan_multi_source(ctx.cfg, ctx.anchors, rng, parts);
  return build_from_plan(ctx, plan);
}

inline BuilderOutput build_logic(const BuildContext& ctx) {
  ctx.cfg.validate();
  Rng rng(Rng::mix(ctx.cfg.seed, kBlueprintStream));
  SkillPlan plan;
  plan.skill = Skill::logic;
  plan.logic = plan_logic(ctx.cfg, ctx.anchors, rng);
  return build_from_plan(ctx, plan);
}

inline BuilderOutput build_calc_reason(const BuildContext& ctx, int depth) {
  ctx.cfg.validate();
  Rng rng(Rng::mix(ctx.cfg.seed, kBlueprintStream));
  SkillPlan plan;
  plan.skill = Skill::calc_reason;
  plan.depth = depth;
  plan.calc = plan_calc_reason(ctx.cfg, ctx.anchors, rng, depth);
  return build_from_plan(ctx, plan);
}

// Seeded dispatch; the blueprint equals generate_blueprint(cfg, skill).
inline BuilderOutput build_skill(Skill skill, const BuildContext& ctx) {
  ctx.cfg.validate();
  Rng rng(Rng::mix(ctx.cfg.seed, kBlueprintStream));
  return build_from_plan(ctx, plan_skill(ctx.cfg, skill, ctx.anchors, rng));
}

}  // namespace abr
