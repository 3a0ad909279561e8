// abr: synthesize verifiable long-context reasoning datasets, score model
// answers against the expression oracle, curate by pass rate, build training
// mixtures, and run rank-correlation reports.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "abr/analysis.hpp"
#include "abr/context_synth.hpp"
#include "abr/core_model.hpp"
#include "abr/eval_harness.hpp"
#include "abr/judge_client.hpp"
#include "abr/rl_math.hpp"
#include "abr/skill_builders.hpp"
#include "abr/validate.hpp"
#include "abr/version.hpp"

namespace {

using abr::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw abr::DataError("cannot write " + path.string());
  out << text;
}

// Every run leaves a manifest next to its output: resolved config, seed and
// tool version, so re-running the manifest reproduces the artifact.
void write_manifest(const std::filesystem::path& out_path, const std::string& command, std::uint64_t seed,
                    ordered_json config) {
  ordered_json manifest;
  manifest["tool"] = "abr";
  manifest["version"] = abr::kVersion;
  manifest["command"] = command;
  manifest["seed"] = seed;
  manifest["config_hash"] = hex64(fnv1a64(config.dump()));
  manifest["config"] = std::move(config);
  write_text_file(out_path.string() + ".manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string config_path;
  std::string skill;
  long count = -1;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::vector<std::string> corpus;
  std::string out;
  long target_length = -1;
  int num_docs = -1;
  int density_min = -1;
  int density_max = -1;
  int lure_count = -1;
  int lure_edit_distance = -1;
  int reasoning_depth = -1;
  std::string anchor_style;
  int anchor_length = -1;
  std::string templates_dir;
  std::string question_source;
  std::string pool_path;
  std::vector<double> depths;
  int jobs = 1;
};

struct GenerateConfig {
  abr::Skill skill = abr::Skill::niah;
  std::string skill_name = "niah";
  long count = 10;
  std::uint64_t seed = 0;
  std::vector<std::string> corpus;
  std::string out;
  abr::DifficultyConfig difficulty;
  abr::AnchorConfig anchors;
  std::string anchor_style = "uppercase";
  std::string templates_dir;
  std::string question_source = "builtin";
  std::string pool_path;
  std::vector<double> depths;
  int jobs = 1;

  ordered_json to_json() const {
    ordered_json j;
    j["skill"] = skill_name;
    j["count"] = count;
    j["corpus"] = corpus;
    j["out"] = out;
    j["target_length"] = difficulty.target_length;
    j["num_docs"] = difficulty.num_docs;
    j["density_min"] = difficulty.density_min;
    j["density_max"] = difficulty.density_max;
    j["lure_count"] = difficulty.lure_count;
    j["lure_edit_distance"] = difficulty.lure_edit_distance;
    j["reasoning_depth"] = difficulty.reasoning_depth;
    j["anchor_style"] = anchor_style;
    j["anchor_length"] = anchors.length;
    j["templates_dir"] = templates_dir;
    j["question_source"] = question_source;
    j["pool"] = pool_path;
    j["depths"] = depths;
    return j;
  }
};

GenerateConfig resolve_generate(const GenerateArgs& a) {
  GenerateConfig cfg;

  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) throw abr::ConfigError("cannot open config file " + a.config_path);
    ordered_json j = ordered_json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw abr::ConfigError("config file is not a JSON object");
    if (j.contains("skill")) cfg.skill_name = j["skill"].get<std::string>();
    if (j.contains("count")) cfg.count = j["count"].get<long>();
    if (j.contains("corpus")) cfg.corpus = j["corpus"].get<std::vector<std::string>>();
    if (j.contains("out")) cfg.out = j["out"].get<std::string>();
    if (j.contains("target_length")) cfg.difficulty.target_length = j["target_length"].get<std::size_t>();
    if (j.contains("num_docs")) cfg.difficulty.num_docs = j["num_docs"].get<int>();
    if (j.contains("density_min")) cfg.difficulty.density_min = j["density_min"].get<int>();
    if (j.contains("density_max")) cfg.difficulty.density_max = j["density_max"].get<int>();
    if (j.contains("lure_count")) cfg.difficulty.lure_count = j["lure_count"].get<int>();
    if (j.contains("lure_edit_distance")) cfg.difficulty.lure_edit_distance = j["lure_edit_distance"].get<int>();
    if (j.contains("reasoning_depth")) cfg.difficulty.reasoning_depth = j["reasoning_depth"].get<int>();
    if (j.contains("anchor_style")) cfg.anchor_style = j["anchor_style"].get<std::string>();
    if (j.contains("anchor_length")) cfg.anchors.length = j["anchor_length"].get<int>();
    if (j.contains("templates_dir")) cfg.templates_dir = j["templates_dir"].get<std::string>();
    if (j.contains("question_source")) cfg.question_source = j["question_source"].get<std::string>();
    if (j.contains("pool")) cfg.pool_path = j["pool"].get<std::string>();
    if (j.contains("depths")) cfg.depths = j["depths"].get<std::vector<double>>();
  }

  if (!a.skill.empty()) cfg.skill_name = a.skill;
  if (a.count >= 0) cfg.count = a.count;
  if (!a.corpus.empty()) cfg.corpus = a.corpus;
  if (!a.out.empty()) cfg.out = a.out;
  if (a.target_length >= 0) cfg.difficulty.target_length = static_cast<std::size_t>(a.target_length);
  if (a.num_docs >= 0) cfg.difficulty.num_docs = a.num_docs;
  if (a.density_min >= 0) cfg.difficulty.density_min = a.density_min;
  if (a.density_max >= 0) cfg.difficulty.density_max = a.density_max;
  if (a.lure_count >= 0) cfg.difficulty.lure_count = a.lure_count;
  if (a.lure_edit_distance >= 0) cfg.difficulty.lure_edit_distance = a.lure_edit_distance;
  if (a.reasoning_depth >= 0) cfg.difficulty.reasoning_depth = a.reasoning_depth;
  if (!a.anchor_style.empty()) cfg.anchor_style = a.anchor_style;
  if (a.anchor_length >= 0) cfg.anchors.length = a.anchor_length;
  if (!a.templates_dir.empty()) cfg.templates_dir = a.templates_dir;
  if (!a.question_source.empty()) cfg.question_source = a.question_source;
  if (!a.pool_path.empty()) cfg.pool_path = a.pool_path;
  if (!a.depths.empty()) cfg.depths = a.depths;
  cfg.jobs = a.jobs;

  auto skill = abr::skill_from_name(cfg.skill_name);
  if (!skill) throw abr::ConfigError("unknown skill '" + cfg.skill_name + "'");
  cfg.skill = *skill;
  if (cfg.out.empty()) throw abr::ConfigError("--out is required");
  if (cfg.corpus.empty()) throw abr::ConfigError("--corpus is required");
  if (cfg.count < 0) throw abr::ConfigError("--count must be >= 0");
  if (cfg.jobs < 1) throw abr::ConfigError("--jobs must be >= 1");
  if (cfg.anchor_style == "uppercase") {
    cfg.anchors.style = abr::AnchorStyle::uppercase_random;
  } else if (cfg.anchor_style == "timestamp") {
    cfg.anchors.style = abr::AnchorStyle::timestamp;
  } else {
    throw abr::ConfigError("anchor style must be 'uppercase' or 'timestamp'");
  }
  if (cfg.anchors.length < 2 || cfg.anchors.length > 64) throw abr::ConfigError("anchor length must be in 2..64");
  if (cfg.question_source != "builtin" && cfg.question_source != "imported") {
    throw abr::ConfigError("question source must be 'builtin' or 'imported'");
  }
  if (cfg.question_source == "imported" && cfg.pool_path.empty()) {
    throw abr::ConfigError("imported question source needs --pool");
  }
  cfg.difficulty.validate();
  return cfg;
}

int cmd_generate(const GenerateArgs& args) {
  GenerateConfig cfg = resolve_generate(args);

  std::uint64_t root_seed = args.seed;
  if (!args.seed_given) {
    std::random_device rd;
    root_seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cout << "no --seed given; drew seed " << root_seed << "\n";
  }

  std::vector<std::filesystem::path> corpus_paths(cfg.corpus.begin(), cfg.corpus.end());
  abr::Corpus corpus = abr::load_corpus(corpus_paths);
  if (corpus.warnings > 0) {
    std::cerr << "warning: rejected " << corpus.warnings << " corpus segments containing the reserved marker\n";
  }

  abr::TemplateSet templates = abr::TemplateSet::builtin();
  if (!cfg.templates_dir.empty()) templates.load_directory(cfg.templates_dir);

  abr::ImportedPool pool;
  std::unique_ptr<abr::QuestionSource> source;
  if (cfg.question_source == "imported") {
    std::ifstream in(cfg.pool_path);
    if (!in) throw abr::DataError("cannot open pool " + cfg.pool_path);
    pool = abr::ImportedPool::from_stream(in);
    if (pool.warnings() > 0) std::cerr << "warning: skipped " << pool.warnings() << " malformed pool records\n";
    source = std::make_unique<abr::ImportedSource>(pool);
  } else {
    source = std::make_unique<abr::BuiltinArithmeticSource>();
  }

  abr::SynthOptions synth_opts;
  synth_opts.pinned_depths = cfg.depths;

  const std::size_t count = static_cast<std::size_t>(cfg.count);
  std::vector<std::optional<abr::Sample>> slots(count);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto make_sample = [&](std::size_t index) {
    abr::BuildContext ctx;
    ctx.cfg = cfg.difficulty;
    ctx.cfg.seed = abr::Rng::mix(root_seed, index);
    ctx.anchors = cfg.anchors;
    ctx.templates = &templates;
    ctx.questions = source.get();
    abr::BuilderOutput built = abr::build_skill(cfg.skill, ctx);
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "%06zu", index);
    std::string id = "abr-" + cfg.skill_name + "-" + hex64(root_seed) + "-" + suffix;
    abr::Sample sample = abr::synthesize(built, cfg.skill, corpus, ctx.cfg, id, synth_opts);
    auto report = abr::validate_sample(sample, cfg.question_source == "imported" ? &pool : nullptr);
    if (!report.ok()) {
      std::string detail = report.findings.front().code + ": " + report.findings.front().detail;
      throw abr::InternalError("generated sample " + id + " failed validation (" + detail + ")");
    }
    return sample;
  };

  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        slots[i] = make_sample(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };

  int jobs = std::min<long>(cfg.jobs, std::max<long>(1, cfg.count));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::ofstream out(cfg.out, std::ios::binary);
  if (!out) throw abr::DataError("cannot write " + cfg.out);
  for (std::size_t i = 0; i < count; ++i) out << abr::sample_to_json(*slots[i]).dump() << '\n';
  out.close();
  write_manifest(cfg.out, "generate", root_seed, cfg.to_json());

  std::cout << "wrote " << count << " samples to " << cfg.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// validate

int cmd_validate(const std::string& dataset_path, const std::string& pool_path) {
  std::vector<abr::Sample> samples = abr::read_dataset_file(dataset_path);
  abr::ImportedPool pool;
  bool have_pool = false;
  if (!pool_path.empty()) {
    std::ifstream in(pool_path);
    if (!in) throw abr::DataError("cannot open pool " + pool_path);
    pool = abr::ImportedPool::from_stream(in);
    have_pool = true;
  }
  std::size_t findings = 0;
  for (const auto& s : samples) {
    auto report = abr::validate_sample(s, have_pool ? &pool : nullptr);
    for (const auto& f : report.findings) {
      ++findings;
      std::cout << s.id << "\t" << f.code << "\t" << f.detail << "\n";
    }
  }
  std::cout << "validated " << samples.size() << " samples, " << findings << " findings\n";
  return findings == 0 ? kExitOk : kExitInternal;
}

// ---------------------------------------------------------------------------
// score

struct AnswerLine {
  std::string id;
  int rollout = 0;
  std::string answer;
};

std::vector<AnswerLine> read_answers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw abr::DataError("cannot open answers " + path);
  std::vector<AnswerLine> out;
  std::map<std::string, int> next_rollout;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("id") || !j.contains("answer")) {
      throw abr::DataError("answers line " + std::to_string(line_no) + " needs {\"id\", \"answer\"}");
    }
    AnswerLine a;
    a.id = j["id"].get<std::string>();
    a.answer = j["answer"].get<std::string>();
    a.rollout = j.contains("rollout") ? j["rollout"].get<int>() : next_rollout[a.id];
    next_rollout[a.id] = a.rollout + 1;
    out.push_back(std::move(a));
  }
  return out;
}

int cmd_score(const std::string& dataset_path, const std::string& answers_path, const std::string& out_path,
              const std::string& judge_url, const std::string& judge_model, int jobs) {
  std::vector<abr::Sample> samples = abr::read_dataset_file(dataset_path);
  std::map<std::string, const abr::Sample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;

  std::vector<AnswerLine> answers = read_answers(answers_path);

  std::optional<abr::JudgeClient> judge;
  if (!judge_url.empty()) {
    abr::JudgeConfig jc = abr::JudgeConfig::from_env(judge_url);
    if (!judge_model.empty()) jc.model = judge_model;
    judge.emplace(std::move(jc));
  }
  std::atomic<bool> judge_down{false};

  struct Row {
    abr::ScoreRecord record;
    std::string scorer;
    bool matched = true;
  };
  std::vector<Row> rows(answers.size());
  std::atomic<std::size_t> next{0};
  std::mutex warn_mutex;

  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= answers.size()) return;
      const AnswerLine& a = answers[i];
      Row& row = rows[i];
      row.record.sample_id = a.id;
      row.record.rollout_index = a.rollout;
      row.record.model_answer = a.answer;
      auto it = by_id.find(a.id);
      if (it == by_id.end()) {
        row.matched = false;
        std::lock_guard<std::mutex> lock(warn_mutex);
        std::cerr << "warning: answer for unknown sample id " << a.id << "\n";
        continue;
      }
      const abr::Sample& sample = *it->second;
      if (judge && !judge_down.load()) {
        try {
          row.record.correct = judge->judge(sample.question, sample.oracle_answer.render(), a.answer);
          row.scorer = "judge";
          continue;
        } catch (const abr::JudgeUnparseable&) {
          row.scorer = "rule_fallback";
        } catch (const abr::JudgeUnavailable& e) {
          if (!judge_down.exchange(true)) {
            std::lock_guard<std::mutex> lock(warn_mutex);
            std::cerr << "warning: " << e.what() << "; falling back to the rule-based scorer\n";
          }
          row.scorer = "rule_fallback";
        }
      } else {
        row.scorer = judge ? "rule_fallback" : "rule";
      }
      row.record.correct = abr::score_answer(sample, a.answer).correct;
    }
  };

  int workers = std::max(1, std::min<int>(jobs, static_cast<int>(answers.size())));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw abr::DataError("cannot write " + out_path);
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_sample;  // correct, total
  std::size_t correct = 0, total = 0;
  for (const auto& row : rows) {
    if (!row.matched) continue;
    ordered_json j{{"sample_id", row.record.sample_id},
                   {"rollout_index", row.record.rollout_index},
                   {"model_answer", row.record.model_answer},
                   {"correct", row.record.correct},
                   {"scorer", row.scorer}};
    out << j.dump() << '\n';
    auto& agg = per_sample[row.record.sample_id];
    agg.first += static_cast<std::size_t>(row.record.correct);
    agg.second += 1;
    correct += static_cast<std::size_t>(row.record.correct);
    ++total;
  }
  out.close();

  for (const auto& [id, agg] : per_sample) {
    std::cout << id << "\t" << agg.first << "/" << agg.second << "\t"
              << abr::format_percent(agg.first, agg.second) << "\n";
  }
  if (total == 0) {
    std::cout << "no matching answers scored\n";
  } else {
    std::cout << "accuracy " << abr::format_percent(correct, total) << " (" << correct << "/" << total << ")\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// filter

int cmd_filter(const std::string& scores_path, double low, double high, const std::string& dataset_path,
               const std::string& out_path, const std::string& out_dataset_path) {
  std::ifstream in(scores_path);
  if (!in) throw abr::DataError("cannot open scores " + scores_path);
  std::map<std::string, std::vector<int>> per_sample;
  std::vector<std::string> order;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("sample_id") || !j.contains("correct")) {
      throw abr::DataError("scores line " + std::to_string(line_no) + " needs {\"sample_id\", \"correct\"}");
    }
    std::string id = j["sample_id"].get<std::string>();
    if (per_sample.find(id) == per_sample.end()) order.push_back(id);
    per_sample[id].push_back(j["correct"].get<int>());
  }

  abr::PassRateBand band{low, high};
  band.validate();
  std::vector<abr::SampleRate> rates;
  for (const auto& id : order) rates.push_back({id, abr::pass_rate(per_sample[id])});
  std::vector<abr::SampleRate> kept = abr::filter_band(rates, band);

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw abr::DataError("cannot write " + out_path);
  std::map<std::string, bool> kept_ids;
  for (const auto& k : kept) kept_ids[k.sample_id] = true;
  for (const auto& k : kept) {
    ordered_json j{{"sample_id", k.sample_id},
                   {"pass_rate", k.rate},
                   {"rollouts", per_sample[k.sample_id].size()}};
    out << j.dump() << '\n';
  }
  out.close();

  if (!dataset_path.empty()) {
    if (out_dataset_path.empty()) throw abr::ConfigError("--dataset needs --out-dataset");
    std::vector<abr::Sample> samples = abr::read_dataset_file(dataset_path);
    std::ofstream dout(out_dataset_path, std::ios::binary);
    if (!dout) throw abr::DataError("cannot write " + out_dataset_path);
    std::size_t written = 0;
    for (const auto& s : samples) {
      if (kept_ids.count(s.id)) {
        dout << abr::sample_to_json(s).dump() << '\n';
        ++written;
      }
    }
    std::cout << "filtered dataset: " << written << " samples -> " << out_dataset_path << "\n";
  }

  std::cout << "kept " << kept.size() << " of " << rates.size() << " samples in band [" << low << ", " << high
            << "]\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// mix

int cmd_mix(const std::vector<std::string>& pool_args, const std::string& ratio, long total, std::uint64_t seed,
            bool seed_given, const std::string& out_path) {
  if (total < 0) throw abr::ConfigError("--total must be >= 0");
  abr::MixtureSpec spec;
  if (!ratio.empty()) {
    std::array<double, 6> weights{};
    std::size_t i = 0, start = 0;
    std::string r = ratio + ":";
    for (std::size_t at = r.find(':'); at != std::string::npos; at = r.find(':', start)) {
      if (i >= 6) throw abr::ConfigError("ratio needs exactly 6 fields (anti_interfere:multi_hop:multi_source:logic:calc_reason:niah)");
      try {
        weights[i++] = std::stod(r.substr(start, at - start));
      } catch (const std::exception&) {
        throw abr::ConfigError("ratio field '" + r.substr(start, at - start) + "' is not a number");
      }
      start = at + 1;
    }
    if (i != 6) throw abr::ConfigError("ratio needs exactly 6 fields");
    spec.weights = weights;
  }
  spec.validate();

  std::map<std::string, std::vector<abr::Sample>> pools;
  for (const auto& arg : pool_args) {
    std::size_t eq = arg.find('=');
    if (eq == std::string::npos) throw abr::ConfigError("--pool expects category=path, got '" + arg + "'");
    std::string category = arg.substr(0, eq);
    bool known = false;
    for (auto name : abr::MixtureSpec::kCategories) known = known || name == category;
    if (!known) throw abr::ConfigError("unknown mixture category '" + category + "'");
    auto loaded = abr::read_dataset_file(arg.substr(eq + 1));
    auto& dst = pools[category];
    dst.insert(dst.end(), loaded.begin(), loaded.end());
  }

  // The training mixture names a Multi-hop category the five-skill taxonomy
  // does not define. Without an explicit multi_hop pool it maps to the logic
  // intersection subtype; the manifest records the mapping.
  std::string multi_hop_source = "external";
  if (pools.find("multi_hop") == pools.end()) {
    auto logic_it = pools.find("logic");
    if (logic_it != pools.end()) {
      std::vector<abr::Sample> derived;
      for (const auto& s : logic_it->second) {
        if (s.template_id.rfind("logic.intersect", 0) == 0) derived.push_back(s);
      }
      pools["multi_hop"] = std::move(derived);
      multi_hop_source = "logic.intersect";
      std::cerr << "note: multi_hop pool not supplied; using " << pools["multi_hop"].size()
                << " logic intersection samples\n";
    }
  }

  std::uint64_t mix_seed = seed;
  if (!seed_given) {
    std::random_device rd;
    mix_seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cout << "no --seed given; drew seed " << mix_seed << "\n";
  }

  std::vector<abr::Sample> mixed = abr::build_mixture(pools, spec, static_cast<std::size_t>(total), mix_seed);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw abr::DataError("cannot write " + out_path);
  for (const auto& s : mixed) out << abr::sample_to_json(s).dump() << '\n';
  out.close();

  auto counts = abr::apportion(spec, static_cast<std::size_t>(total));
  ordered_json config;
  config["ratio"] = ratio.empty() ? "5:3:2:2:2:1" : ratio;
  config["total"] = total;
  config["multi_hop_source"] = multi_hop_source;
  ordered_json jcounts;
  for (std::size_t i = 0; i < 6; ++i) jcounts[std::string(abr::MixtureSpec::kCategories[i])] = counts[i];
  config["counts"] = std::move(jcounts);
  write_manifest(out_path, "mix", mix_seed, std::move(config));

  std::cout << "mixture of " << mixed.size() << " samples:";
  for (std::size_t i = 0; i < 6; ++i) std::cout << " " << abr::MixtureSpec::kCategories[i] << "=" << counts[i];
  std::cout << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// correlate

int cmd_correlate(const std::string& matrix_path, std::vector<std::string> probes,
                  std::vector<std::string> targets, const std::string& out_base) {
  std::ifstream in(matrix_path);
  if (!in) throw abr::DataError("cannot open matrix " + matrix_path);
  abr::ScoreMatrix matrix = abr::ScoreMatrix::from_csv(in);
  if (probes.empty()) probes = matrix.benchmarks;
  if (targets.empty()) targets = matrix.benchmarks;
  abr::CorrelationReport report = abr::correlation_matrix(matrix, probes, targets);
  write_text_file(out_base + ".csv", report.to_csv());
  write_text_file(out_base + ".json", report.to_json().dump(2) + "\n");
  std::cout << "wrote " << out_base << ".csv and " << out_base << ".json (" << probes.size() << " probes x "
            << report.targets.size() << " targets)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// rl-verify

int cmd_rl_verify(const std::string& groups_path, double epsilon, double beta, const std::string& out_path) {
  std::ifstream in(groups_path);
  if (!in) throw abr::DataError("cannot open groups " + groups_path);
  abr::rl::PolicyHyper hyper{epsilon, beta};
  try {
    hyper.validate();
  } catch (const abr::Error& e) {
    throw abr::ConfigError(e.what());
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw abr::DataError("cannot write " + out_path);

  std::string line;
  std::size_t line_no = 0, groups = 0, pruned = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("rewards")) {
      throw abr::DataError("groups line " + std::to_string(line_no) + " needs {\"rewards\": [...]}");
    }
    abr::rl::RolloutGroup group;
    group.rewards = j["rewards"].get<std::vector<double>>();
    if (j.contains("ratios")) group.ratios = j["ratios"].get<std::vector<double>>();
    if (j.contains("logp_new")) group.logp_new = j["logp_new"].get<std::vector<double>>();
    if (j.contains("logp_old")) group.logp_old = j["logp_old"].get<std::vector<double>>();

    ++groups;
    bool prune = abr::rl::zero_reward_variance(group.rewards);
    if (prune) ++pruned;

    ordered_json row;
    row["line"] = line_no;
    row["advantages"] = abr::rl::group_advantages(group.rewards);
    row["zero_variance"] = prune;
    if (!group.logp_new.empty() || !group.logp_old.empty()) {
      row["kl_estimate"] = abr::rl::kl_estimate(group.logp_new, group.logp_old);
    }
    if (!group.ratios.empty()) {
      double kl = 0.0;
      if (!group.logp_new.empty()) kl = abr::rl::kl_estimate(group.logp_new, group.logp_old);
      row["objective"] = abr::rl::clipped_objective(group, hyper, kl);
    }
    out << row.dump() << '\n';
  }
  out.close();
  std::cout << groups << " groups, " << pruned << " pruned by dynamic sampling\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anchor-based long-context reasoning datasets: generate, validate, score, curate"};
  app.set_version_flag("--version", abr::kVersion);
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Synthesize a dataset for one atomic skill");
  generate->add_option("--config", gen.config_path, "JSON config file; flags override it");
  generate->add_option("--skill", gen.skill, "niah|anti_interfere|multi_source|logic|calc_reason");
  generate->add_option("--count", gen.count, "number of samples");
  auto* seed_opt = generate->add_option("--seed", gen.seed, "root seed; drawn and printed when absent");
  generate->add_option("--corpus", gen.corpus, "background corpus file(s)")->take_all();
  generate->add_option("--out", gen.out, "output JSONL path");
  generate->add_option("--target-length", gen.target_length, "context character budget");
  generate->add_option("--num-docs", gen.num_docs, "virtual documents per sample");
  generate->add_option("--density-min", gen.density_min, "min anchors per document");
  generate->add_option("--density-max", gen.density_max, "max anchors per document");
  generate->add_option("--lure-count", gen.lure_count, "similarity-mode lures");
  generate->add_option("--lure-edit-distance", gen.lure_edit_distance, "max lure edit distance");
  generate->add_option("--depth", gen.reasoning_depth, "reasoning depth (aggregate nesting)");
  generate->add_option("--anchor-style", gen.anchor_style, "uppercase|timestamp");
  generate->add_option("--anchor-length", gen.anchor_length, "uppercase anchor length");
  generate->add_option("--templates", gen.templates_dir, "template directory overriding built-ins");
  generate->add_option("--question-source", gen.question_source, "builtin|imported");
  generate->add_option("--pool", gen.pool_path, "imported QA pool (JSONL)");
  generate->add_option("--depths", gen.depths, "pinned depth fractions per document")->delimiter(',');
  generate->add_option("--jobs", gen.jobs, "parallel workers");

  std::string val_dataset, val_pool;
  auto* validate = app.add_subcommand("validate", "Re-validate every sample of a dataset");
  validate->add_option("--dataset", val_dataset, "dataset JSONL")->required();
  validate->add_option("--pool", val_pool, "imported QA pool used at generation time");

  std::string score_dataset, score_answers, score_out = "scores.jsonl", judge_url, judge_model;
  int score_jobs = 8;
  auto* score = app.add_subcommand("score", "Score model answers against the oracle");
  score->add_option("--dataset", score_dataset, "dataset JSONL")->required();
  score->add_option("--answers", score_answers, "answers JSONL: {\"id\", \"answer\"[, \"rollout\"]}")->required();
  score->add_option("--out", score_out, "score records JSONL");
  score->add_option("--judge-url", judge_url, "OpenAI-compatible judge endpoint (opt-in)");
  score->add_option("--judge-model", judge_model, "judge model name");
  score->add_option("--jobs", score_jobs, "concurrent scoring requests");

  std::string filter_scores, filter_dataset, filter_out = "kept.jsonl", filter_out_dataset;
  double band_low = 0.3, band_high = 0.6;
  auto* filter = app.add_subcommand("filter", "Keep samples whose pass rate falls in a band");
  filter->add_option("--scores", filter_scores, "score records JSONL")->required();
  filter->add_option("--low", band_low, "band lower bound (inclusive)");
  filter->add_option("--high", band_high, "band upper bound (inclusive)");
  filter->add_option("--dataset", filter_dataset, "dataset to filter");
  filter->add_option("--out", filter_out, "kept sample rates JSONL");
  filter->add_option("--out-dataset", filter_out_dataset, "filtered dataset JSONL");

  std::vector<std::string> mix_pools;
  std::string mix_ratio, mix_out = "mixture.jsonl";
  long mix_total = 0;
  std::uint64_t mix_seed = 0;
  auto* mix = app.add_subcommand("mix", "Build a training mixture from per-category pools");
  mix->add_option("--pool", mix_pools, "category=path (repeatable)")->take_all();
  mix->add_option("--ratio", mix_ratio, "anti_interfere:multi_hop:multi_source:logic:calc_reason:niah");
  mix->add_option("--total", mix_total, "total samples")->required();
  auto* mix_seed_opt = mix->add_option("--seed", mix_seed, "shuffle seed");
  mix->add_option("--out", mix_out, "mixture JSONL");

  std::string corr_matrix, corr_out = "correlation";
  std::vector<std::string> corr_probes, corr_targets;
  auto* correlate = app.add_subcommand("correlate", "Spearman correlation matrix from a score CSV");
  correlate->add_option("--matrix", corr_matrix, "CSV: header = benchmarks, first column = model")->required();
  correlate->add_option("--probes", corr_probes, "probe columns")->delimiter(',');
  correlate->add_option("--targets", corr_targets, "target columns")->delimiter(',');
  correlate->add_option("--out", corr_out, "output base path (.csv/.json)");

  std::string rl_groups, rl_out = "rl_report.jsonl";
  double rl_epsilon = 0.2, rl_beta = 0.0;
  auto* rl_verify = app.add_subcommand("rl-verify", "Check GRPO group math over rollout rewards");
  rl_verify->add_option("--groups", rl_groups, "JSONL: {\"rewards\"[, \"ratios\", \"logp_new\", \"logp_old\"]}")
      ->required();
  rl_verify->add_option("--epsilon", rl_epsilon, "clip radius");
  rl_verify->add_option("--beta", rl_beta, "KL weight");
  rl_verify->add_option("--out", rl_out, "report JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    gen.seed_given = seed_opt->count() > 0;
    if (generate->parsed()) return cmd_generate(gen);
    if (validate->parsed()) return cmd_validate(val_dataset, val_pool);
    if (score->parsed()) {
      return cmd_score(score_dataset, score_answers, score_out, judge_url, judge_model, score_jobs);
    }
    if (filter->parsed()) {
      return cmd_filter(filter_scores, band_low, band_high, filter_dataset, filter_out, filter_out_dataset);
    }
    if (mix->parsed()) {
      return cmd_mix(mix_pools, mix_ratio, mix_total, mix_seed, mix_seed_opt->count() > 0, mix_out);
    }
    if (correlate->parsed()) return cmd_correlate(corr_matrix, corr_probes, corr_targets, corr_out);
    if (rl_verify->parsed()) return cmd_rl_verify(rl_groups, rl_epsilon, rl_beta, rl_out);
  } catch (const abr::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const abr::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const abr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
