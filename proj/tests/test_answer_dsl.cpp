#include <catch2/catch_amalgamated.hpp>

#include "abr/answer_dsl.hpp"
#include "support/fuzz_env.hpp"
#include "support/naive_eval.hpp"

using namespace abr;

namespace {

// The Stage-1 example blueprint: 5 anchors across 3 docs.
DocMapping paper_mapping() {
  DocMapping m(3);
  m.place(DocId{1}, "anc4");
  m.place(DocId{1}, "anc5");
  m.place(DocId{1}, "anc3");
  m.place(DocId{2}, "anc1");
  m.place(DocId{2}, "anc5");
  m.place(DocId{2}, "anc2");
  m.place(DocId{3}, "anc4");
  m.place(DocId{3}, "anc3");
  return m;
}

EmbeddedQA qa(const char* anchor, int doc, int occ, const char* question, const char* truth,
              QaSource source = QaSource::builtin_arithmetic) {
  return EmbeddedQA{anchor, DocId{doc}, occ, question, Value::number(*Decimal::parse(truth)), source};
}

}  // namespace

TEST_CASE("parsing the relational example yields a 4-level tree") {
  ExprPtr e = parse("(solve-in anc4 (intersect (docs anc5) (docs anc3)))");
  CHECK(tree_depth(*e) == 4);
  CHECK(node_count(*e) == 7);
  CHECK(anchor_refs(*e) == std::set<AnchorId>{"anc4", "anc5", "anc3"});
}

TEST_CASE("parsing the computational example") {
  ExprPtr e = parse("(sum (solve anc3 doc1) (solve anc3 doc3))");
  CHECK(e->fn() == "sum");
  CHECK(e->args().size() == 2);
  CHECK(e->args()[0]->args()[1]->doc() == DocId{1});
}

TEST_CASE("arity violations raise ArityError") {
  CHECK_THROWS_AS(parse("(only)"), ArityError);
  CHECK_THROWS_AS(parse("(solve anc1)"), ArityError);
  CHECK_THROWS_AS(parse("(solve anc1 doc1 1 1)"), ArityError);
  CHECK_THROWS_AS(parse("(if 1 2)"), ArityError);
  CHECK_THROWS_AS(parse("(unique-anchors doc1)"), ArityError);
}

TEST_CASE("parse errors carry byte offsets") {
  try {
    parse("(sum 1 (bogus 2))");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 8);
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("bogus"));
  }
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("(sum 1 2) extra"), ParseError);
  CHECK_THROWS_AS(parse("(sum 1 2"), ParseError);
  CHECK_THROWS_AS(parse(")"), ParseError);
}

TEST_CASE("serialization round-trips over random expressions") {
  Rng rng(314159);
  for (int i = 0; i < 400; ++i) {
    fuzz::Case c = fuzz::make_case(rng);
    std::string text = serialize(c.expr);
    ExprPtr back = parse(text);
    CHECK(*back == *c.expr);
    CHECK(serialize(back) == text);
  }
}

TEST_CASE("stage-2 evaluations over the stage-1 blueprint") {
  DocMapping m = paper_mapping();
  EvalEnv env{&m, nullptr, 2};
  CHECK(evaluate(parse("(only (intersect (docs anc5) (docs anc3)))"), env).render() == "doc1");
  CHECK(evaluate(parse("(count (docs anc3))"), env).render() == "2");
  CHECK(evaluate(parse("(docs anc3)"), env).render() == "doc1, doc3");
  CHECK(evaluate(parse("(count-docs anc5)"), env).render() == "2");
  CHECK(evaluate(parse("(argmax-doc-by-count)"), env).render() == "doc1");  // 3 > 3? doc1 and doc2 tie
}

TEST_CASE("argmax ties are reported through notes") {
  DocMapping m = paper_mapping();  // doc1 and doc2 both hold 3 anchors
  EvalEnv env{&m, nullptr, 2};
  EvalNotes notes;
  CHECK(evaluate(parse("(argmax-doc-by-count)"), env, &notes).render() == "doc1");
  CHECK(notes.argmax_tie);
}

TEST_CASE("solve-all enumerates documents in id order") {
  DocMapping m = paper_mapping();
  std::vector<EmbeddedQA> qas = {qa("anc3", 1, 1, "q1", "18.00"), qa("anc3", 3, 1, "q2", "5494.00")};
  QaIndex idx(qas);
  EvalEnv env{&m, &idx, 2};
  CHECK(evaluate(parse("(solve-all anc3)"), env).render() == "18.00; 5494.00");
  CHECK(evaluate(parse("(sum (solve anc3 doc1) (solve anc3 doc3))"), env).render() == "5512.00");
}

TEST_CASE("the dynamic-state-tracking showcase evaluates to 2505.64") {
  DocMapping m(4);
  m.place(DocId{1}, "LTUCRHGAXK");
  m.place(DocId{2}, "NNQABR");
  m.place(DocId{3}, "ROXBXXYMYU");
  m.place(DocId{3}, "MPEOEZHO");
  m.place(DocId{4}, "TBWYKIE");
  m.place(DocId{4}, "KYPNFYC");
  std::vector<EmbeddedQA> qas = {
      qa("LTUCRHGAXK", 1, 1, "82 \xC3\x97 67", "5494.00"),
      qa("NNQABR", 2, 1, "6 - (8 - 4) + 16", "18.00"),
      qa("ROXBXXYMYU", 3, 1, "2 - 14.9 / 6 + 7", "6.52"),
      qa("MPEOEZHO", 3, 1, "19 \xC3\x97 19.7 + 20 / 2", "384.30"),
      qa("TBWYKIE", 4, 1, "(20 \xC3\x97 4) \xC3\x97 (3 - 16)", "-1040.00"),
      qa("KYPNFYC", 4, 1, "sin(135deg) x cos(135deg) + 3", "2.50", QaSource::imported),
  };
  QaIndex idx(qas);
  EvalEnv env{&m, &idx, 2};
  Value v = evaluate(parse("(if (> (count-docs LTUCRHGAXK) (count-docs NNQABR)) "
                           "(sum (solve TBWYKIE doc4) (solve KYPNFYC doc4)) "
                           "(product (solve ROXBXXYMYU doc3) (solve MPEOEZHO doc3)))"),
                     env);
  CHECK(v.render() == "2505.64");
}

TEST_CASE("node-level rounding reproduces the two-decimal contract") {
  DocMapping m(1);
  EvalEnv env{&m, nullptr, 2};
  CHECK(evaluate(parse("(+ (- 2 (/ 14.9 6)) 7)"), env).render() == "6.52");
  CHECK(evaluate(parse("(/ 14.9 6)"), env).render() == "2.48");
  CHECK(evaluate(parse("(product 6.52 384.30)"), env).render() == "2505.64");
  CHECK(evaluate(parse("(* -1 0.005)"), env).render() == "-0.01");
}

TEST_CASE("conditionals are lazy") {
  DocMapping m(1);
  EvalEnv env{&m, nullptr, 2};
  CHECK(evaluate(parse("(if (> 1 2) (/ 1 0) 5)"), env).render() == "5");
  CHECK(evaluate(parse("(if (< 1 2) 5 (/ 1 0))"), env).render() == "5");
  CHECK_THROWS_AS(evaluate(parse("(if (< 2 1) 5 (/ 1 0))"), env), EvalError);
}

TEST_CASE("error classes") {
  DocMapping m(2);
  m.place(DocId{1}, "DUP");
  m.place(DocId{1}, "DUP");
  m.place(DocId{2}, "SOLO");
  std::vector<EmbeddedQA> qas = {qa("DUP", 1, 1, "qa", "1.00"), qa("DUP", 1, 2, "qb", "2.00"),
                                 qa("SOLO", 2, 1, "qc", "3.00")};
  QaIndex idx(qas);
  EvalEnv env{&m, &idx, 2};

  auto error_class = [&](const char* text) {
    try {
      evaluate(parse(text), env);
      return std::string("none");
    } catch (const EvalError& e) {
      return std::string(eval_error_name(e.cls()));
    }
  };

  CHECK(error_class("(solve DUP doc1)") == "AmbiguousSolve");
  CHECK(error_class("(solve DUP doc1 2)") == "none");
  CHECK(evaluate(parse("(solve DUP doc1 2)"), env).render() == "2.00");
  CHECK(error_class("(solve DUP doc1 3)") == "UnresolvedAnchor");
  CHECK(error_class("(solve MISSING doc1)") == "UnresolvedAnchor");
  CHECK(error_class("(solve SOLO doc9)") == "UnresolvedAnchor");
  CHECK(error_class("(only (docs MISSING))") == "EmptyOnly");
  CHECK(error_class("(only (union (docs DUP) (docs SOLO)))") == "NonSingletonOnly");
  CHECK(error_class("(/ 1 (- 2 2))") == "DivisionByZero");
  CHECK(error_class("(sum (anchors-in doc1))") == "TypeMismatch");
  CHECK(error_class("(+ 1 (docs SOLO))") == "TypeMismatch");
  CHECK(error_class("(last (unique-anchors))") == "none");
  CHECK(error_class("(nth (anchors-in doc1) 7)") == "SelectionError");
  CHECK(error_class("(preceding (anchors-in doc2) SOLO)") == "SelectionError");  // first element
  CHECK(error_class("(preceding (anchors-in doc1) SOLO)") == "SelectionError");  // absent
  CHECK(error_class("(* 999999999 999999999)") == "Overflow");
}

TEST_CASE("set algebra identities") {
  Rng rng(777);
  for (int i = 0; i < 50; ++i) {
    fuzz::Case c = fuzz::make_case(rng);
    QaIndex idx(c.qas);
    EvalEnv env{&c.mapping, &idx, 2};
    AnchorId a = c.mapping.all_anchors().front();
    std::string da = "(docs " + a + ")";
    CHECK(evaluate(parse("(intersect " + da + " " + da + ")"), env) == evaluate(parse(da), env));
    // Empty set via an anchor that never occurs.
    std::string empty = "(intersect (docs NOPE1) (docs NOPE2))";
    CHECK(evaluate(parse("(union " + da + " " + empty + ")"), env) == evaluate(parse(da), env));
    if (c.mapping.all_anchors().size() >= 2) {
      AnchorId b = c.mapping.all_anchors()[1];
      std::string db = "(docs " + b + ")";
      CHECK(evaluate(parse("(intersect " + da + " " + db + ")"), env) ==
            evaluate(parse("(intersect " + db + " " + da + ")"), env));
    }
  }
}

TEST_CASE("evaluator matches the independent oracle on random expressions") {
  Rng rng(20260809);
  for (int i = 0; i < 300; ++i) {
    fuzz::Case c = fuzz::make_case(rng);
    std::string why;
    INFO(serialize(c.expr));
    CHECK(naive::agree(*c.expr, c.mapping, c.qas, why));
    if (!why.empty()) INFO(why);
  }
}

TEST_CASE("anchor references can be computed") {
  // A.4-style composition: the unique anchor preceding the dominant
  // document's last anchor, resolved and solved in its own document.
  DocMapping m(4);
  m.place(DocId{1}, "OSXVANVP");
  m.place(DocId{1}, "BEKAHJXW");
  m.place(DocId{3}, "KNGUKM");
  m.place(DocId{3}, "ABNKRKRH");
  m.place(DocId{3}, "GIEDWE");
  m.place(DocId{3}, "RJTGAYG");
  m.place(DocId{4}, "GIEDWE");
  std::vector<EmbeddedQA> qas = {
      qa("OSXVANVP", 1, 1, "s1", "1.00"), qa("BEKAHJXW", 1, 1, "s2", "2.00"),
      qa("KNGUKM", 3, 1, "s3", "3.00"),   qa("ABNKRKRH", 3, 1, "inequality", "42.00"),
      qa("GIEDWE", 3, 1, "s4", "4.00"),   qa("RJTGAYG", 3, 1, "s5", "5.00"),
      qa("GIEDWE", 4, 1, "s6", "6.00"),
  };
  QaIndex idx(qas);
  EvalEnv env{&m, &idx, 2};

  // Duplicated GIEDWE drops out of the unique set.
  Value uniques = evaluate(parse("(unique-anchors)"), env);
  REQUIRE(uniques.kind() == Value::Kind::list);
  CHECK(uniques.render() == "OSXVANVP; BEKAHJXW; KNGUKM; ABNKRKRH; RJTGAYG");

  const char* target = "(preceding (unique-anchors) (last (anchors-in (argmax-doc-by-count))))";
  CHECK(evaluate(parse(target), env).render() == "ABNKRKRH");
  std::string expr = std::string("(solve-in ") + target + " (docs " + target + "))";
  CHECK(evaluate(parse(expr), env).render() == "42.00");
}
