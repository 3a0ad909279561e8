#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "abr/answer_dsl.hpp"
#include "abr/context_synth.hpp"
#include "abr/core_model.hpp"
#include "abr/question_bank.hpp"

namespace abr {

struct Finding {
  std::string code;
  std::string detail;
};

struct ValidationReport {
  std::vector<Finding> findings;
  std::string reevaluated_answer;  // rendered, when evaluation succeeded

  bool ok() const { return findings.empty(); }
};

// Re-derives the embedded QA units from the rendered documents, re-evaluates
// the answer expression, and checks every recorded offset and the mapping
// consistency. Findings are data, not failures. Imported questions can only
// be re-solved when their pool is supplied; an expression that depends on an
// unverifiable answer is reported.
inline ValidationReport validate_sample(const Sample& s, const ImportedPool* pool = nullptr) {
  ValidationReport report;
  auto flag = [&](std::string code, std::string detail) {
    report.findings.push_back(Finding{std::move(code), std::move(detail)});
  };

  if (static_cast<int>(s.documents.size()) != s.mapping.num_docs()) {
    flag("doc_count_mismatch", "mapping has " + std::to_string(s.mapping.num_docs()) + " docs, sample has " +
                                   std::to_string(s.documents.size()));
    return report;
  }

  // Scan each document for its needles: "ANCHOR: question" lines.
  struct Hit {
    std::size_t offset;
    std::string question;
  };
  std::map<std::pair<AnchorId, int>, std::vector<Hit>> hits;
  for (int d = 1; d <= s.mapping.num_docs(); ++d) {
    const std::string& doc = s.documents[static_cast<std::size_t>(d - 1)];
    std::vector<AnchorId> anchors = s.mapping.anchors_in(DocId{d});
    std::sort(anchors.begin(), anchors.end());
    anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
    for (const auto& anchor : anchors) {
      std::string needle = anchor + ": ";
      std::vector<Hit> found;
      for (std::size_t at = doc.find(needle); at != std::string::npos; at = doc.find(needle, at + 1)) {
        if (at != 0 && doc[at - 1] != '\n') continue;  // needles start a line
        std::size_t end = doc.find('\n', at);
        if (end == std::string::npos) end = doc.size();
        found.push_back(Hit{at, doc.substr(at + needle.size(), end - at - needle.size())});
      }
      int expected = s.mapping.occurrences(anchor, DocId{d});
      if (static_cast<int>(found.size()) != expected) {
        flag("needle_count", anchor + " in doc" + std::to_string(d) + ": mapping says " +
                                 std::to_string(expected) + ", document shows " + std::to_string(found.size()));
      }
      hits[{anchor, d}] = std::move(found);
    }

    // Textual order must reproduce the blueprint order.
    std::vector<std::pair<std::size_t, AnchorId>> in_doc;
    for (const auto& anchor : anchors) {
      for (const auto& h : hits[{anchor, d}]) in_doc.emplace_back(h.offset, anchor);
    }
    std::sort(in_doc.begin(), in_doc.end());
    const auto& order = s.mapping.anchors_in(DocId{d});
    bool order_ok = in_doc.size() == order.size();
    for (std::size_t i = 0; order_ok && i < order.size(); ++i) order_ok = in_doc[i].second == order[i];
    if (!order_ok) flag("insertion_order", "doc" + std::to_string(d) + " does not follow the blueprint order");
  }

  // Recorded offsets point at the first character of each anchor occurrence.
  if (s.positions.size() != s.mapping.total_placements()) {
    flag("position_count", "recorded " + std::to_string(s.positions.size()) + " positions for " +
                               std::to_string(s.mapping.total_placements()) + " placements");
  }
  for (const auto& p : s.positions) {
    if (p.doc.index < 1 || p.doc.index > s.mapping.num_docs()) {
      flag("position_doc", p.anchor + " recorded in nonexistent " + p.doc.str());
      continue;
    }
    const auto& found = hits[{p.anchor, p.doc.index}];
    if (p.occurrence < 1 || p.occurrence > static_cast<int>(found.size())) {
      flag("position_occurrence", p.anchor + " occurrence " + std::to_string(p.occurrence) + " not present in " +
                                      p.doc.str());
      continue;
    }
    std::size_t actual = found[static_cast<std::size_t>(p.occurrence - 1)].offset;
    if (actual != p.offset) {
      flag("anchor_offset", p.anchor + " occurrence " + std::to_string(p.occurrence) + " in " + p.doc.str() +
                                ": recorded " + std::to_string(p.offset) + ", found at " + std::to_string(actual));
    }
  }

  // Rebuild the QA table from the scanned questions. Built-in arithmetic is
  // re-solved exactly; imported questions resolve through the pool.
  std::vector<EmbeddedQA> qas;
  for (const auto& [key, found] : hits) {
    for (std::size_t k = 0; k < found.size(); ++k) {
      EmbeddedQA qa;
      qa.anchor = key.first;
      qa.doc = DocId{key.second};
      qa.occurrence = static_cast<int>(k + 1);
      qa.question = found[k].question;
      if (auto exact = try_eval_embedded_question(qa.question)) {
        qa.truth = Value::number(exact->to_decimal(2));
        qa.source = QaSource::builtin_arithmetic;
        qas.push_back(std::move(qa));
        continue;
      }
      const ImportedQA* imported = pool ? pool->find_by_question(qa.question) : nullptr;
      if (imported) {
        qa.truth = ImportedPool::truth_of(*imported);
        qa.source = QaSource::imported;
        qas.push_back(std::move(qa));
      }
      // Unverifiable questions stay out of the table; expressions that need
      // them surface as evaluation findings below.
    }
  }

  // Parse and re-evaluate the expression.
  ExprPtr expr;
  try {
    expr = parse(s.answer_expr);
  } catch (const Error& e) {
    flag("expr_parse", e.what());
    return report;
  }
  for (const auto& anchor : anchor_refs(*expr)) {
    if (s.mapping.global_count(anchor) == 0) {
      flag("coverage", "expression references " + anchor + " which is not in the blueprint");
    }
  }

  QaIndex index(qas);
  EvalEnv env{&s.mapping, &index, 2};
  EvalNotes notes;
  try {
    Value v = evaluate(*expr, env, &notes);
    report.reevaluated_answer = v.render();
    if (!(v == s.oracle_answer)) {
      flag("oracle_mismatch", "re-evaluated " + v.render() + ", recorded " + s.oracle_answer.render());
    }
  } catch (const EvalError& e) {
    flag("evaluation", e.what());
  }
  if (notes.argmax_tie) flag("argmax_tie", "expression hit an argmax-doc-by-count tie");

  return report;
}

}  // namespace abr
