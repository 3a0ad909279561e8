// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. argv[1] is the path to the abr CLI binary (used by the
// determinism criterion).

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "abr/analysis.hpp"
#include "abr/context_synth.hpp"
#include "abr/eval_harness.hpp"
#include "abr/rl_math.hpp"
#include "abr/skill_builders.hpp"
#include "abr/validate.hpp"
#include "support/fuzz_env.hpp"
#include "support/naive_eval.hpp"
#include "support/test_corpus.hpp"

namespace {

using namespace abr;
namespace fs = std::filesystem;

int g_failures = 0;
std::vector<std::string> g_current_errors;

void expect(bool ok, const std::string& what) {
  if (!ok) g_current_errors.push_back(what);
}

void criterion(int number, const std::string& name, double budget_seconds,
               const std::function<void()>& body) {
  g_current_errors.clear();
  auto start = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const std::exception& e) {
    g_current_errors.push_back(std::string("exception: ") + e.what());
  }
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_seconds > 0 && elapsed > budget_seconds) {
    g_current_errors.push_back("runtime " + std::to_string(elapsed) + "s exceeds " +
                               std::to_string(budget_seconds) + "s");
  }
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.2fs", elapsed);
  if (g_current_errors.empty()) {
    std::cout << "[PASS] criterion " << number << ": " << name << " (" << timing << ")\n";
  } else {
    ++g_failures;
    std::cout << "[FAIL] criterion " << number << ": " << name << " (" << timing << ")\n";
    for (const auto& e : g_current_errors) std::cout << "       - " << e << "\n";
  }
}

EmbeddedQA qa(const char* anchor, int doc, int occ, const std::string& question, const char* truth,
              QaSource source = QaSource::builtin_arithmetic) {
  return EmbeddedQA{anchor, DocId{doc}, occ, question, Value::number(*Decimal::parse(truth)), source};
}

// The dynamic-state-tracking showcase: 4 documents, 6 keys, the listed
// arithmetic, and the conditional aggregation expression.
BuilderOutput showcase_output() {
  BuilderOutput out;
  out.mapping = DocMapping(4);
  out.mapping.place(DocId{1}, "LTUCRHGAXK");
  out.mapping.place(DocId{2}, "NNQABR");
  out.mapping.place(DocId{3}, "ROXBXXYMYU");
  out.mapping.place(DocId{3}, "MPEOEZHO");
  out.mapping.place(DocId{4}, "TBWYKIE");
  out.mapping.place(DocId{4}, "KYPNFYC");
  out.qas = {
      qa("LTUCRHGAXK", 1, 1, "82 \xC3\x97 67", "5494.00"),
      qa("NNQABR", 2, 1, "6 - (8 - 4) + 16", "18.00"),
      qa("ROXBXXYMYU", 3, 1, "2 - 14.9 / 6 + 7", "6.52"),
      qa("MPEOEZHO", 3, 1, "19 \xC3\x97 19.7 + 20 / 2", "384.30"),
      qa("TBWYKIE", 4, 1, "(20 \xC3\x97 4) \xC3\x97 (3 - 16)", "-1040.00"),
      qa("KYPNFYC", 4, 1, "sin(135deg) x cos(135deg) + 3", "2.50", QaSource::imported),
  };
  out.expr = parse(
      "(if (> (count-docs LTUCRHGAXK) (count-docs NNQABR)) "
      "(sum (solve TBWYKIE doc4) (solve KYPNFYC doc4)) "
      "(product (solve ROXBXXYMYU doc3) (solve MPEOEZHO doc3)))");
  out.expected = Value::number(*Decimal::parse("2505.64"));
  out.template_id = "calc.conditional.v1";
  out.question =
      "If the number of documents containing LTUCRHGAXK is greater than the number of documents containing "
      "NNQABR, calculate the sum of the answers for TBWYKIE and KYPNFYC. Otherwise, calculate the product of "
      "the answers for ROXBXXYMYU and MPEOEZHO. (Round intermediate steps to 2 decimal places.)";
  return out;
}

// Random feasible build contexts for the fuzz criteria.
struct FuzzDraw {
  Skill skill;
  BuildContext ctx;
};

FuzzDraw draw_build(Rng& meta) {
  FuzzDraw d;
  d.skill = static_cast<Skill>(meta.range(0, 4));
  d.ctx.cfg.seed = meta.next();
  d.ctx.cfg.num_docs = static_cast<int>(meta.range(1, 6));
  d.ctx.cfg.density_min = static_cast<int>(meta.range(0, 2));
  d.ctx.cfg.density_max = d.ctx.cfg.density_min + static_cast<int>(meta.range(1, 4));
  d.ctx.cfg.lure_count = static_cast<int>(meta.range(0, 4));
  d.ctx.cfg.lure_edit_distance = static_cast<int>(meta.range(1, 3));
  d.ctx.cfg.reasoning_depth = static_cast<int>(meta.range(1, 3));
  return d;
}

// Independent average-rank Spearman oracle (long double, counting ranks).
long double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<long double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::size_t less = 0, equal = 0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[j] < v[i]) ++less;
        if (v[j] == v[i]) ++equal;
      }
      r[i] = static_cast<long double>(less) + (static_cast<long double>(equal) + 1.0L) / 2.0L;
    }
    return r;
  };
  auto rx = ranks(x), ry = ranks(y);
  long double n = static_cast<long double>(x.size()), mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += rx[i], my += ry[i];
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

int run_command(const std::string& cmd) { return std::system(cmd.c_str()); }

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const Corpus corpus = corpus_from_text(testsupport::corpus_text());

  // -------------------------------------------------------------------- 1
  criterion(1, "dynamic-state-tracking golden sample evaluates to exactly 2505.64", 1.0, [&]() {
    BuilderOutput out = showcase_output();
    QaIndex idx(out.qas);
    EvalEnv env{&out.mapping, &idx, 2};
    Value v = evaluate(*out.expr, env);
    expect(v.render() == "2505.64", "expression evaluated to " + v.render());
    expect(v == out.expected, "value mismatch against the golden answer");

    DifficultyConfig cfg;
    cfg.seed = 405;
    cfg.num_docs = 4;
    cfg.target_length = 9000;
    Sample golden = synthesize(out, Skill::calc_reason, corpus, cfg, "golden-a5");
    ValidationReport report = validate_sample(golden);
    expect(report.ok(), "golden sample produced " + std::to_string(report.findings.size()) + " findings");
    expect(report.reevaluated_answer == "2505.64",
           "re-evaluated answer was " + report.reevaluated_answer);
  });

  // -------------------------------------------------------------------- 2
  criterion(2, "stage-1/stage-2 golden blueprint resolves exactly", 1.0, [&]() {
    DocMapping m(3);
    m.place(DocId{1}, "anc4");
    m.place(DocId{1}, "anc5");
    m.place(DocId{1}, "anc3");
    m.place(DocId{2}, "anc1");
    m.place(DocId{2}, "anc5");
    m.place(DocId{2}, "anc2");
    m.place(DocId{3}, "anc4");
    m.place(DocId{3}, "anc3");
    std::vector<EmbeddedQA> qas = {qa("anc3", 1, 1, "40 + 2", "42.00"), qa("anc3", 3, 1, "50 \xC3\x97 2", "100.00")};
    QaIndex idx(qas);
    EvalEnv env{&m, &idx, 2};

    Value only = evaluate(parse("(only (intersect (docs anc5) (docs anc3)))"), env);
    expect(only.render() == "doc1", "intersection resolved to " + only.render());

    auto docs = m.docs_containing("anc3");
    expect(docs == std::vector<DocId>{DocId{1}, DocId{3}}, "anc3 occurrences are not {doc1, doc3}");
    Value all = evaluate(parse("(solve-all anc3)"), env);
    expect(all.render() == "42.00; 100.00", "solve-all enumerated " + all.render());
    Value sum = evaluate(parse("(sum (solve anc3 doc1) (solve anc3 doc3))"), env);
    expect(sum.render() == "142.00", "sum evaluated to " + sum.render());
  });

  // -------------------------------------------------------------------- 3
  criterion(3, "evaluate agrees with the independent oracle on 1000 random expressions", 10.0, [&]() {
    Rng rng(0xfeedface);
    int values = 0, errors = 0;
    for (int i = 0; i < 1000; ++i) {
      fuzz::Case c = fuzz::make_case(rng);
      std::string why;
      if (!naive::agree(*c.expr, c.mapping, c.qas, why)) {
        expect(false, "case " + std::to_string(i) + ": " + why + " expr " + serialize(c.expr));
        return;
      }
      QaIndex idx(c.qas);
      EvalEnv env{&c.mapping, &idx, 2};
      try {
        evaluate(*c.expr, env);
        ++values;
      } catch (const EvalError&) {
        ++errors;
      }
    }
    expect(values > 200, "too few value-producing cases: " + std::to_string(values));
    expect(errors > 200, "too few error-producing cases: " + std::to_string(errors));
  });

  // -------------------------------------------------------------------- 4
  criterion(4, "10000 builder outputs are self-consistent with their skill structure", 120.0, [&]() {
    Rng meta(0xab12cd34);
    int built = 0;
    long attempts = 0;
    while (built < 10000 && attempts < 60000) {
      ++attempts;
      FuzzDraw d = draw_build(meta);
      BuilderOutput out;
      try {
        out = build_skill(d.skill, d.ctx);
      } catch (const ConfigError&) {
        continue;
      }
      ++built;
      QaIndex idx(out.qas);
      EvalEnv env{&out.mapping, &idx, 2};
      EvalNotes notes;
      Value got = evaluate(*out.expr, env, &notes);
      if (!(got == out.expected)) {
        expect(false, "skill " + std::string(skill_name(d.skill)) + " seed " + std::to_string(d.ctx.cfg.seed) +
                          ": evaluated " + got.render() + ", expected " + out.expected.render());
        return;
      }
      if (notes.argmax_tie) {
        expect(false, "argmax tie hit by " + std::string(skill_name(d.skill)) + " seed " +
                          std::to_string(d.ctx.cfg.seed));
        return;
      }
      for (const auto& anchor : anchor_refs(*out.expr)) {
        if (out.question.find(anchor) == std::string::npos) {
          expect(false, "question does not mention " + anchor);
          return;
        }
      }
      if (out.template_id == "anti.similarity.v1") {
        const AnchorId& target = out.expr->args()[0]->anchor();
        int lures = 0;
        for (const auto& anchor : out.mapping.all_anchors()) {
          if (anchor == target) continue;
          int dist = levenshtein(target, anchor);
          if (dist >= 1 && dist <= d.ctx.cfg.lure_edit_distance) ++lures;
        }
        if (lures < d.ctx.cfg.lure_count) {
          expect(false, "similarity output holds " + std::to_string(lures) + " lures for lure_count " +
                            std::to_string(d.ctx.cfg.lure_count));
          return;
        }
      }
      if (out.template_id == "multi_source.v1") {
        const AnchorId& shared = out.expr->args()[0]->anchor();
        auto docs = out.mapping.docs_containing(shared);
        if (docs.size() != out.expected.as_list().size()) {
          expect(false, "fragment count mismatch");
          return;
        }
        for (DocId doc : docs) {
          if (out.mapping.occurrences(shared, doc) != 1) {
            expect(false, "shared anchor duplicated within " + doc.str());
            return;
          }
        }
      }
    }
    expect(built == 10000, "only " + std::to_string(built) + " feasible builds in " +
                               std::to_string(attempts) + " attempts");
  });

  // -------------------------------------------------------------------- 5
  criterion(5, "cmd_generate is byte-identical across runs and --jobs 1 vs 8", 60.0, [&]() {
    if (cli.empty()) {
      expect(false, "no CLI path supplied in argv[1]");
      return;
    }
    fs::path dir = fs::temp_directory_path() / ("abr_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    {
      std::ofstream c(dir / "corpus.txt", std::ios::binary);
      c << testsupport::corpus_text();
    }
    auto generate = [&](const std::string& out, int jobs) {
      std::string cmd = cli + " generate --skill calc_reason --count 12 --seed 7 --corpus " +
                        (dir / "corpus.txt").string() + " --out " + (dir / out).string() +
                        " --target-length 5000 --num-docs 3 --density-max 4 --jobs " + std::to_string(jobs) +
                        " > " + (dir / (out + ".log")).string();
      return run_command(cmd);
    };
    expect(generate("a.jsonl", 1) == 0, "first run failed");
    std::string a = read_file(dir / "a.jsonl");
    std::string a_manifest = read_file(dir / "a.jsonl.manifest.json");
    expect(!a.empty(), "first run wrote an empty dataset");
    expect(generate("a.jsonl", 1) == 0, "second run failed");
    expect(a == read_file(dir / "a.jsonl"), "two identical runs differ");
    expect(a_manifest == read_file(dir / "a.jsonl.manifest.json"), "manifests differ across runs");
    expect(generate("c.jsonl", 8) == 0, "--jobs 8 run failed");
    expect(a == read_file(dir / "c.jsonl"), "--jobs 1 and --jobs 8 differ");

    int rc = run_command(cli + " validate --dataset " + (dir / "a.jsonl").string() + " > " +
                         (dir / "validate.log").string());
    expect(rc == 0, "cmd-level re-validation reported findings");
    fs::remove_all(dir);
  });

  // -------------------------------------------------------------------- 6
  criterion(6, "oracle's own rendered answers score 100.00% over 500 generated samples", 120.0, [&]() {
    Rng meta(0x5ca1ab1e);
    std::size_t scored = 0, correct = 0;
    int made = 0;
    while (made < 500) {
      FuzzDraw d = draw_build(meta);
      // Per-document budgets stay comfortably above the corpus sentence
      // granularity so depth targeting is feasible.
      d.ctx.cfg.target_length =
          static_cast<std::size_t>(d.ctx.cfg.num_docs) * (1500 + 500 * static_cast<std::size_t>(meta.range(0, 2)));
      BuilderOutput out;
      try {
        out = build_skill(d.skill, d.ctx);
      } catch (const ConfigError&) {
        continue;
      }
      Sample s;
      try {
        s = synthesize(out, d.skill, corpus, d.ctx.cfg, "sym-" + std::to_string(made));
      } catch (const Error& e) {
        expect(false, std::string("synthesis failed: ") + e.what());
        return;
      }
      ++made;
      ScoreResult r = score_answer(s, s.oracle_answer.render());
      ++scored;
      correct += static_cast<std::size_t>(r.correct);
      if (r.correct != 1) {
        expect(false, "sample " + s.id + " (" + std::string(skill_name(s.skill)) + ") rejected its own answer '" +
                          s.oracle_answer.render() + "': " + r.reason);
        return;
      }
    }
    expect(format_percent(correct, scored) == "100.00%",
           "accuracy " + format_percent(correct, scored) + " over " + std::to_string(scored));
  });

  // -------------------------------------------------------------------- 7
  criterion(7, "band filtering keeps exactly the rates in [0.3, 0.6], boundaries included", 5.0, [&]() {
    // Synthetic rollouts with known pass rates, including the exact
    // boundaries 3/10 and 6/10.
    struct Spec {
      const char* id;
      int correct, total;
      bool kept;
    };
    std::vector<Spec> specs = {
        {"r30", 3, 10, true},  {"r60", 6, 10, true},  {"r29", 29, 100, false}, {"r61", 61, 100, false},
        {"r00", 0, 8, false},  {"r100", 8, 8, false}, {"r375", 3, 8, true},    {"r50", 4, 8, true},
        {"r625", 5, 8, false},
    };
    std::vector<SampleRate> rates;
    for (const auto& spec : specs) {
      std::vector<ScoreRecord> records;
      for (int i = 0; i < spec.total; ++i) records.push_back({spec.id, i, "", i < spec.correct ? 1 : 0});
      rates.push_back({spec.id, pass_rate(records)});
    }
    auto kept = filter_band(rates, PassRateBand{});
    std::set<std::string> kept_ids;
    for (const auto& k : kept) kept_ids.insert(k.sample_id);
    for (const auto& spec : specs) {
      expect(kept_ids.count(spec.id) == (spec.kept ? 1u : 0u),
             std::string(spec.id) + (spec.kept ? " should be kept" : " should be dropped"));
    }
  });

  // -------------------------------------------------------------------- 8
  criterion(8, "mixture apportionment is exact largest-remainder", 5.0, [&]() {
    MixtureSpec spec;
    auto c15 = apportion(spec, 15);
    expect(c15 == std::array<std::size_t, 6>{5, 3, 2, 2, 2, 1},
           "total 15 gave " + std::to_string(c15[0]) + "," + std::to_string(c15[1]) + "," +
               std::to_string(c15[2]) + "," + std::to_string(c15[3]) + "," + std::to_string(c15[4]) + "," +
               std::to_string(c15[5]));
    auto c4000 = apportion(spec, 4000);
    expect(c4000 == std::array<std::size_t, 6>{1334, 800, 533, 533, 533, 267}, "total 4000 counts wrong");

    Rng rng(2222);
    for (int trial = 0; trial < 500; ++trial) {
      MixtureSpec s2;
      double wsum = 0;
      for (auto& w : s2.weights) {
        w = static_cast<double>(rng.range(0, 9));
        wsum += w;
      }
      if (wsum == 0) {
        s2.weights[3] = 2;
        wsum = 2;
      }
      std::size_t total = static_cast<std::size_t>(rng.range(0, 9999));
      auto counts = apportion(s2, total);
      std::size_t sum = 0;
      for (std::size_t i = 0; i < 6; ++i) {
        sum += counts[i];
        double share = static_cast<double>(total) * s2.weights[i] / wsum;
        if (std::abs(static_cast<double>(counts[i]) - share) >= 1.0) {
          expect(false, "count deviates from share by >= 1");
          return;
        }
      }
      if (sum != total) {
        expect(false, "counts sum " + std::to_string(sum) + " != total " + std::to_string(total));
        return;
      }
    }
  });

  // -------------------------------------------------------------------- 9
  criterion(9, "spearman is exact on monotone pairs and matches the hand oracle to 1e-12", 10.0, [&]() {
    const std::vector<double> niah = {66.50, 37.00, 58.25, 23.00, 69.50, 74.25,
                                      46.50, 37.50, 27.75, 42.00, 16.50, 5.25};
    const std::vector<double> calc = {47.37, 36.59, 42.11, 19.80, 52.13, 60.15,
                                      37.09, 24.31, 31.58, 37.09, 19.30, 4.51};
    expect(spearman(niah, niah) == 1.0, "rho(x,x) != 1");
    std::vector<double> neg;
    for (double v : niah) neg.push_back(-v);
    expect(spearman(niah, neg) == -1.0, "rho(x,-x) != -1");

    double rho = spearman(niah, calc);
    long double expected = oracle_spearman(niah, calc);
    expect(std::abs(rho - static_cast<double>(expected)) <= 1e-12,
           "library rho " + std::to_string(rho) + " vs oracle " + std::to_string(static_cast<double>(expected)));

    Rng rng(0x0dd0);
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> x, y;
      std::size_t n = static_cast<std::size_t>(rng.range(3, 30));
      for (std::size_t i = 0; i < n; ++i) {
        x.push_back(static_cast<double>(rng.range(0, 10)));
        y.push_back(static_cast<double>(rng.range(0, 10)));
      }
      try {
        double r = spearman(x, y);
        if (std::abs(r - static_cast<double>(oracle_spearman(x, y))) > 1e-12) {
          expect(false, "random-vector mismatch beyond 1e-12");
          return;
        }
      } catch (const DegenerateInput&) {
        continue;
      }
    }
  });

  // ------------------------------------------------------------------- 10
  criterion(10, "GRPO math: exact zero-sum advantages, zero objective, exact pruning", 10.0, [&]() {
    Rng rng(0xbeef);
    for (int trial = 0; trial < 2000; ++trial) {
      std::size_t g = static_cast<std::size_t>(rng.range(1, 16));
      std::vector<double> rewards;
      for (std::size_t i = 0; i < g; ++i) {
        rewards.push_back(rng.chance(0.7) ? static_cast<double>(rng.range(0, 1)) : rng.unit());
      }
      abr::rl::Rat sum;
      for (const auto& a : abr::rl::group_advantages_exact(rewards)) sum = sum + a;
      if (!sum.is_zero()) {
        expect(false, "advantages did not sum to zero for a group of " + std::to_string(g));
        return;
      }
      if (g >= 2) {
        abr::rl::RolloutGroup group;
        group.rewards = rewards;
        group.ratios.assign(g, 1.0);
        double objective = abr::rl::clipped_objective(group, abr::rl::PolicyHyper{}, 0.0);
        if (objective != 0.0) {
          expect(false, "identity-ratio objective was " + std::to_string(objective) + " for G=" +
                            std::to_string(g));
          return;
        }
      }
    }

    std::vector<abr::rl::RolloutGroup> groups;
    std::size_t expected_kept = 0;
    for (int i = 0; i < 200; ++i) {
      abr::rl::RolloutGroup g;
      std::size_t n = static_cast<std::size_t>(rng.range(1, 8));
      for (std::size_t k = 0; k < n; ++k) g.rewards.push_back(static_cast<double>(rng.range(0, 1)));
      if (!abr::rl::zero_reward_variance(g.rewards)) ++expected_kept;
      groups.push_back(std::move(g));
    }
    auto kept = abr::rl::dynamic_sampling_filter(groups);
    expect(kept.size() == expected_kept, "filter kept " + std::to_string(kept.size()) + " of an expected " +
                                             std::to_string(expected_kept));
    for (const auto& g : kept) {
      if (abr::rl::zero_reward_variance(g.rewards)) {
        expect(false, "a zero-variance group survived the filter");
        return;
      }
    }
  });

  // ------------------------------------------------------------------- 11
  criterion(11, "length buckets reproduce 48.48% and 59.09% in (32k,64k]", 5.0, [&]() {
    std::vector<LengthRecord> records;
    for (int i = 0; i < 33; ++i) records.push_back({40'000, i < 16 ? 1 : 0});
    LengthBucketReport a = length_bucket_report(records);
    expect(a.buckets[2].accuracy() == "48.48%", "got " + a.buckets[2].accuracy());
    expect(a.buckets[0].empty() && a.buckets[1].empty() && a.buckets[3].empty(), "other buckets not empty");

    records.clear();
    for (int i = 0; i < 22; ++i) records.push_back({40'000, i < 13 ? 1 : 0});
    LengthBucketReport b = length_bucket_report(records);
    expect(b.buckets[2].accuracy() == "59.09%", "got " + b.buckets[2].accuracy());
    expect(b.out_of_range == 0, "records fell out of range");
  });

  if (g_failures == 0) {
    std::cout << "all 11 acceptance criteria passed\n";
    return 0;
  }
  std::cout << g_failures << " acceptance criteria failed\n";
  return 1;
}
