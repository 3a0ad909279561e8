#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "abr/answer_dsl.hpp"
#include "abr/core_model.hpp"
#include "abr/rng.hpp"
#include "abr/skill_builders.hpp"

namespace abr {

// Header line that renders document boundaries; reserved, so background text
// may never contain it.
inline constexpr std::string_view kDocHeaderMarker = "=== Document";

class CorpusEmpty : public DataError {
 public:
  using DataError::DataError;
};

class CorpusTooSmall : public DataError {
 public:
  using DataError::DataError;
};

class LengthInfeasible : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// ---------------------------------------------------------------------------
// Corpus

struct Corpus {
  std::vector<std::string> segments;  // paragraphs, whitespace-normalized
  std::size_t total_chars = 0;
  int warnings = 0;  // segments rejected for containing the reserved marker
};

namespace synth_detail {

inline std::string normalize_ws(std::string_view text) {
  std::string out;
  bool in_ws = true;
  for (char c : text) {
    bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (ws) {
      if (!in_ws) out.push_back(' ');
      in_ws = true;
    } else {
      out.push_back(c);
      in_ws = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

inline void add_segments(Corpus& corpus, std::string_view text) {
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    std::string seg = normalize_ws(text.substr(start, end - start));
    if (seg.empty()) return;
    if (seg.find(kDocHeaderMarker) != std::string::npos) {
      ++corpus.warnings;
      return;
    }
    corpus.total_chars += seg.size();
    corpus.segments.push_back(std::move(seg));
  };
  // Paragraphs split on blank lines.
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    if (text[i] == '\n' && (text[i + 1] == '\n' || (text[i + 1] == '\r' && i + 2 < text.size() && text[i + 2] == '\n'))) {
      flush(i);
      start = i + 1;
    }
  }
  flush(text.size());
}

}  // namespace synth_detail

inline Corpus load_corpus(const std::vector<std::filesystem::path>& paths) {
  Corpus corpus;
  int readable = 0;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) continue;
    ++readable;
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    synth_detail::add_segments(corpus, text);
  }
  if (readable == 0) throw CorpusEmpty("no readable corpus files");
  if (corpus.segments.empty()) throw CorpusEmpty("corpus has no usable segments");
  return corpus;
}

inline Corpus corpus_from_text(std::string_view text) {
  Corpus corpus;
  synth_detail::add_segments(corpus, text);
  if (corpus.segments.empty()) throw CorpusEmpty("corpus has no usable segments");
  return corpus;
}

// chars/4, rounded up: the documented token estimate.
inline std::size_t estimate_length(std::string_view text) { return (text.size() + 3) / 4; }

// ---------------------------------------------------------------------------
// Synthesis

struct SynthOptions {
  // When a document's insert count matches, these depth fractions are used
  // instead of seeded uniform draws (lost-in-the-middle sweeps).
  std::vector<double> pinned_depths;
};

namespace synth_detail {

// Sentence-sized noise units. Insertions happen only between units, never
// inside one.
inline std::vector<std::string> sentence_units(const Corpus& corpus, std::size_t unit_cap,
                                               const std::vector<std::string>& forbidden) {
  std::vector<std::string> units;
  auto blocked = [&](const std::string& u) {
    for (const auto& f : forbidden) {
      if (!f.empty() && u.find(f) != std::string::npos) return true;
    }
    return false;
  };
  for (const auto& seg : corpus.segments) {
    std::size_t start = 0;
    for (std::size_t i = 0; i < seg.size(); ++i) {
      bool boundary = (seg[i] == '.' || seg[i] == '?' || seg[i] == '!') &&
                      (i + 1 == seg.size() || seg[i + 1] == ' ');
      if (!boundary) continue;
      std::string unit = seg.substr(start, i + 1 - start);
      if (!unit.empty() && unit.front() == ' ') unit.erase(unit.begin());
      if (!unit.empty() && unit.size() <= unit_cap && !blocked(unit)) units.push_back(std::move(unit));
      start = i + 1;
    }
    if (start < seg.size()) {
      std::string unit = seg.substr(start);
      if (!unit.empty() && unit.front() == ' ') unit.erase(unit.begin());
      if (!unit.empty() && unit.size() <= unit_cap && !blocked(unit)) units.push_back(std::move(unit));
    }
  }
  return units;
}

}  // namespace synth_detail

inline Sample synthesize(const BuilderOutput& built, Skill skill, const Corpus& corpus,
                         const DifficultyConfig& cfg, std::string id, const SynthOptions& opts = {}) {
  cfg.validate();
  const int num_docs = built.mapping.num_docs();
  if (num_docs < 1) throw ConfigError("blueprint has no documents");

  QaIndex qa_index(built.qas);
  const std::size_t doc_budget = std::max<std::size_t>(cfg.target_length / static_cast<std::size_t>(num_docs), 1);

  // Insert lines, in mapping (= document) order.
  struct Insert {
    AnchorId anchor;
    int occurrence;
    std::string line;  // "ANCHOR: question"
  };
  std::vector<std::vector<Insert>> inserts(static_cast<std::size_t>(num_docs));
  std::size_t total_insert_chars = 0;
  for (int d = 1; d <= num_docs; ++d) {
    std::map<AnchorId, int> seen;
    for (const auto& anchor : built.mapping.anchors_in(DocId{d})) {
      int occ = ++seen[anchor];
      const EmbeddedQA* qa = qa_index.find(anchor, DocId{d}, occ);
      if (qa == nullptr) throw InternalError("no embedded question for placement of " + anchor);
      Insert ins{anchor, occ, anchor + ": " + qa->question};
      total_insert_chars += ins.line.size() + 1;
      inserts[static_cast<std::size_t>(d - 1)].push_back(std::move(ins));
    }
  }
  if (total_insert_chars > cfg.target_length) {
    throw LengthInfeasible("target_length " + std::to_string(cfg.target_length) +
                           " is below the " + std::to_string(total_insert_chars) +
                           " characters of embedded insertions");
  }

  // Noise units; anything carrying an anchor token or the oracle answer is
  // filtered so needles stay countable and answers never leak.
  std::vector<std::string> forbidden = built.mapping.all_anchors();
  std::string oracle_text = built.expected.render();
  if (oracle_text.size() >= 3) forbidden.push_back(oracle_text);
  const std::size_t unit_cap = std::max<std::size_t>(60, doc_budget / 12);
  std::vector<std::string> units = synth_detail::sentence_units(corpus, unit_cap, forbidden);
  if (units.empty()) {
    throw CorpusTooSmall("corpus has no usable sentence units under " + std::to_string(unit_cap) + " chars");
  }

  Rng rng(Rng::mix(cfg.seed, 0x73796e7468657369ull));
  std::size_t cursor = rng.below(units.size());
  std::size_t consumed = 0;
  bool repeats = false;

  Sample sample;
  sample.id = std::move(id);
  sample.skill = skill;
  sample.question = built.question;
  sample.answer_expr = serialize(built.expr);
  sample.oracle_answer = built.expected;
  sample.mapping = built.mapping;
  sample.difficulty = cfg;
  sample.template_id = built.template_id;
  sample.seed = cfg.seed;

  for (int d = 1; d <= num_docs; ++d) {
    const auto& doc_inserts = inserts[static_cast<std::size_t>(d - 1)];
    std::size_t insert_chars = 0;
    for (const auto& ins : doc_inserts) insert_chars += ins.line.size() + 1;
    if (insert_chars > doc_budget + doc_budget / 10) {
      throw LengthInfeasible("document " + std::to_string(d) + " cannot host " +
                             std::to_string(insert_chars) + " insertion characters within its budget of " +
                             std::to_string(doc_budget));
    }

    // Draw noise lines until the combined document reaches its budget.
    std::vector<std::string> noise;
    std::size_t noise_chars = 0;
    while (noise_chars + insert_chars < doc_budget) {
      if (consumed >= units.size()) repeats = true;
      noise.push_back(units[cursor]);
      noise_chars += units[cursor].size() + 1;
      ++consumed;
      cursor = (cursor + 1) % units.size();
    }

    // Depth fractions, ascending, assigned to mapping order so the textual
    // order matches the blueprint order.
    std::vector<double> depths;
    if (opts.pinned_depths.size() == doc_inserts.size() && !doc_inserts.empty()) {
      depths = opts.pinned_depths;
    } else {
      for (std::size_t i = 0; i < doc_inserts.size(); ++i) depths.push_back(0.02 + rng.unit() * 0.96);
    }
    std::sort(depths.begin(), depths.end());

    // Boundary offsets between noise lines.
    std::vector<std::size_t> boundary(noise.size() + 1, 0);
    for (std::size_t i = 0; i < noise.size(); ++i) boundary[i + 1] = boundary[i] + noise[i].size() + 1;
    const std::size_t final_len = noise_chars + insert_chars;

    std::vector<std::size_t> chosen(doc_inserts.size());
    std::size_t bi = 0;
    std::size_t placed_chars = 0;
    for (std::size_t j = 0; j < doc_inserts.size(); ++j) {
      const double target = depths[j] * static_cast<double>(final_len);
      std::size_t best = bi;
      double best_err = -1;
      for (std::size_t k = bi; k < boundary.size(); ++k) {
        double err = std::abs(static_cast<double>(boundary[k] + placed_chars) - target);
        if (best_err < 0 || err < best_err) {
          best = k;
          best_err = err;
        } else if (err > best_err) {
          break;  // boundaries increase monotonically
        }
      }
      chosen[j] = best;
      bi = best;
      const std::size_t offset = boundary[best] + placed_chars;
      if (best_err > 0.05 * static_cast<double>(final_len) + 1.0) {
        throw LengthInfeasible("corpus sentences too coarse to hit depth " + std::to_string(depths[j]) +
                               " within 5% of the document length");
      }
      sample.positions.push_back(AnchorPosition{doc_inserts[j].anchor, DocId{d}, doc_inserts[j].occurrence, offset});
      placed_chars += doc_inserts[j].line.size() + 1;
    }

    std::string text;
    text.reserve(final_len);
    std::size_t next_insert = 0;
    for (std::size_t k = 0; k <= noise.size(); ++k) {
      while (next_insert < doc_inserts.size() && chosen[next_insert] == k) {
        text += doc_inserts[next_insert].line;
        text.push_back('\n');
        ++next_insert;
      }
      if (k < noise.size()) {
        text += noise[k];
        text.push_back('\n');
      }
    }
    if (text.size() != final_len) throw InternalError("document assembly length drifted");
    std::size_t tolerance = doc_budget / 10;
    if (text.size() + tolerance < doc_budget || text.size() > doc_budget + tolerance) {
      throw InternalError("document " + std::to_string(d) + " missed its length budget");
    }
    sample.documents.push_back(std::move(text));
  }

  sample.corpus_repeats = repeats;
  return sample;
}

// The exact context string shown to models.
inline std::string render_context(const Sample& s) {
  std::string out;
  for (std::size_t d = 0; d < s.documents.size(); ++d) {
    out += "=== Document " + std::to_string(d + 1) + " ===\n";
    out += s.documents[d];
  }
  out += "\n\nQuestion: ";
  out += s.question;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

using ordered_json = nlohmann::ordered_json;

inline ordered_json value_to_json(const Value& v) {
  if (v.kind() == Value::Kind::list) {
    ordered_json arr = ordered_json::array();
    for (const auto& item : v.as_list()) arr.push_back(item.render());
    return arr;
  }
  return v.render();
}

inline Value value_from_rendered(const std::string& text) {
  if (auto num = Decimal::parse(text)) return Value::number(*num);
  if (auto doc = DocId::parse(text)) return Value::doc(*doc);
  // "doc1, doc3" renders a doc set.
  if (text.starts_with("doc")) {
    std::vector<DocId> docs;
    std::size_t start = 0;
    bool all_docs = true;
    while (start < text.size()) {
      std::size_t comma = text.find(", ", start);
      std::string part = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      auto d = DocId::parse(part);
      if (!d) {
        all_docs = false;
        break;
      }
      docs.push_back(*d);
      if (comma == std::string::npos) break;
      start = comma + 2;
    }
    if (all_docs && !docs.empty()) return Value::doc_set(std::move(docs));
  }
  return Value::text(text);
}

inline Value value_from_json(const ordered_json& j) {
  if (j.is_array()) {
    std::vector<Value> items;
    for (const auto& item : j) items.push_back(value_from_rendered(item.get<std::string>()));
    return Value::list(std::move(items));
  }
  return value_from_rendered(j.get<std::string>());
}

inline ordered_json sample_to_json(const Sample& s) {
  ordered_json j;
  j["id"] = s.id;
  j["skill"] = std::string(skill_name(s.skill));
  j["documents"] = s.documents;
  j["question"] = s.question;
  j["answer_expr"] = s.answer_expr;
  j["oracle_answer"] = value_to_json(s.oracle_answer);
  ordered_json mapping = ordered_json::object();
  for (int d = 1; d <= s.mapping.num_docs(); ++d) {
    mapping[DocId{d}.str()] = s.mapping.anchors_in(DocId{d});
  }
  j["doc_mapping"] = std::move(mapping);
  ordered_json positions = ordered_json::array();
  for (const auto& p : s.positions) {
    positions.push_back(ordered_json{{"anchor", p.anchor},
                                     {"doc", p.doc.index},
                                     {"occurrence", p.occurrence},
                                     {"offset", p.offset}});
  }
  j["positions"] = std::move(positions);
  ordered_json difficulty{{"target_length", s.difficulty.target_length},
                          {"num_docs", s.difficulty.num_docs},
                          {"density_min", s.difficulty.density_min},
                          {"density_max", s.difficulty.density_max},
                          {"lure_count", s.difficulty.lure_count},
                          {"lure_edit_distance", s.difficulty.lure_edit_distance},
                          {"reasoning_depth", s.difficulty.reasoning_depth},
                          {"seed", s.difficulty.seed}};
  if (s.corpus_repeats) difficulty["corpus_repeats"] = true;
  j["difficulty"] = std::move(difficulty);
  j["template_id"] = s.template_id;
  j["seed"] = s.seed;
  return j;
}

inline Sample sample_from_json(const ordered_json& j) {
  Sample s;
  s.id = j.at("id").get<std::string>();
  auto skill = skill_from_name(j.at("skill").get<std::string>());
  if (!skill) throw DataError("unknown skill in sample " + s.id);
  s.skill = *skill;
  s.documents = j.at("documents").get<std::vector<std::string>>();
  s.question = j.at("question").get<std::string>();
  s.answer_expr = j.at("answer_expr").get<std::string>();
  s.oracle_answer = value_from_json(j.at("oracle_answer"));
  const auto& mapping = j.at("doc_mapping");
  s.mapping = DocMapping(static_cast<int>(mapping.size()));
  for (int d = 1; d <= s.mapping.num_docs(); ++d) {
    auto it = mapping.find(DocId{d}.str());
    if (it == mapping.end()) throw DataError("doc_mapping misses " + DocId{d}.str() + " in sample " + s.id);
    for (const auto& anchor : *it) s.mapping.place(DocId{d}, anchor.get<std::string>());
  }
  for (const auto& p : j.at("positions")) {
    s.positions.push_back(AnchorPosition{p.at("anchor").get<std::string>(),
                                         DocId{p.at("doc").get<int>()},
                                         p.at("occurrence").get<int>(),
                                         p.at("offset").get<std::size_t>()});
  }
  const auto& diff = j.at("difficulty");
  s.difficulty.target_length = diff.at("target_length").get<std::size_t>();
  s.difficulty.num_docs = diff.at("num_docs").get<int>();
  s.difficulty.density_min = diff.at("density_min").get<int>();
  s.difficulty.density_max = diff.at("density_max").get<int>();
  s.difficulty.lure_count = diff.at("lure_count").get<int>();
  s.difficulty.lure_edit_distance = diff.at("lure_edit_distance").get<int>();
  s.difficulty.reasoning_depth = diff.at("reasoning_depth").get<int>();
  s.difficulty.seed = diff.at("seed").get<std::uint64_t>();
  s.corpus_repeats = diff.value("corpus_repeats", false);
  s.template_id = j.at("template_id").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

inline void write_dataset(std::ostream& out, const std::vector<Sample>& samples) {
  for (const auto& s : samples) out << sample_to_json(s).dump() << '\n';
}

inline std::vector<Sample> read_dataset(std::istream& in) {
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("malformed JSON on dataset line " + std::to_string(line_no));
    samples.push_back(sample_from_json(j));
  }
  return samples;
}

inline std::vector<Sample> read_dataset_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path.string());
  return read_dataset(in);
}

}  // namespace abr
