#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "abr/errors.hpp"

namespace abr {

// Meta-question templates are versioned text resources with {{name}} slots.
// Generation records the template id in the sample, so downstream curation
// can tell template families apart.
class TemplateSet {
 public:
  static TemplateSet builtin() {
    TemplateSet t;
    t.texts_ = {
        {"niah.v1", "Please answer the question following the anchor {{anchor}} in the text above."},
        {"anti.similarity.v1",
         "Several anchors in the text look very similar. Locate the exact anchor {{anchor}} and answer the "
         "question that follows it."},
        {"anti.conflict.doc.v1",
         "The anchor {{anchor}} appears in more than one place. Please answer the question following "
         "{{anchor}} in document {{doc}}."},
        {"anti.conflict.occ.v1",
         "The anchor {{anchor}} appears in more than one place. In document {{doc}}, please answer the "
         "question following occurrence {{k}} of {{anchor}}."},
        {"multi_source.v1", "Please assemble the question corresponding to {{anchor}} and answer it."},
        {"logic.intersect.v1",
         "In the document that contains both {{anchor_a}} and {{anchor_b}}, what is the answer to the "
         "question associated with {{anchor_c}}?"},
        {"logic.freq_preceding.v1",
         "First, identify anchors that appear only once across all documents. Find the document with the "
         "highest total count of anchors. In that document, locate the last unique anchor and answer the "
         "question associated with the unique anchor immediately preceding it."},
        {"logic.freq_last.v1",
         "Identify the anchors that appear exactly once across all documents and answer the question "
         "associated with the last such anchor."},
        {"calc.conditional.v1",
         "If the number of documents containing {{anchor_a}} is greater than the number of documents "
         "containing {{anchor_b}}, calculate {{true_branch}}. Otherwise, calculate {{false_branch}}. "
         "(Round intermediate steps to 2 decimal places.)"},
    };
    return t;
  }

  // Overrides/additions from *.txt files; the template id is the file stem.
  void load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("template directory not found: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
      std::ifstream in(entry.path());
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
      if (text.empty()) throw DataError("empty template: " + entry.path().string());
      texts_[entry.path().stem().string()] = std::move(text);
    }
  }

  bool has(const std::string& id) const { return texts_.count(id) != 0; }

  std::string render(const std::string& id, const std::map<std::string, std::string>& slots) const {
    auto it = texts_.find(id);
    if (it == texts_.end()) throw ConfigError("unknown template id: " + id);
    std::string out = it->second;
    for (std::size_t at = out.find("{{"); at != std::string::npos; at = out.find("{{", at)) {
      std::size_t end = out.find("}}", at);
      if (end == std::string::npos) throw ConfigError("unterminated placeholder in template " + id);
      std::string name = out.substr(at + 2, end - at - 2);
      auto slot = slots.find(name);
      if (slot == slots.end()) throw ConfigError("template " + id + " needs slot '" + name + "'");
      out.replace(at, end + 2 - at, slot->second);
      at += slot->second.size();
    }
    return out;
  }

 private:
  std::map<std::string, std::string> texts_;
};

}  // namespace abr
