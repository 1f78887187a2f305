#include "icda/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "icda/rng.hpp"
#include "icda/text.hpp"
#include "json.hpp"

namespace icda {

LabelVocabulary::LabelVocabulary(std::vector<std::string> sorted_labels)
    : labels_(std::move(sorted_labels)) {
  for (size_t i = 0; i < labels_.size(); ++i) {
    if (i > 0 && labels_[i] <= labels_[i - 1]) {
      throw CorpusError("vocabulary labels must be strictly sorted");
    }
    index_[labels_[i]] = i;
  }
}

std::optional<size_t> LabelVocabulary::find(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

size_t LabelVocabulary::id(const std::string& label) const {
  auto found = find(label);
  if (!found) throw CorpusError("label not in vocabulary: " + label);
  return *found;
}

std::vector<LabeledExample> load_jsonl(const std::string& path, Provenance provenance) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path);
  std::vector<LabeledExample> examples;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    auto require_string = [&](const char* field) -> std::string {
      if (!obj.contains(field) || !obj[field].is_string()) {
        throw CorpusError(path + ":" + std::to_string(line_no) +
                          ": missing or non-string field \"" + field + "\"");
      }
      return obj[field].get<std::string>();
    };
    LabeledExample ex;
    ex.text = trim(require_string("text"));
    ex.label = require_string("label");
    ex.provenance = provenance;
    if (ex.text.empty() && provenance == Provenance::kSeed) {
      throw CorpusError(path + ":" + std::to_string(line_no) + ": empty text after trimming");
    }
    if (obj.contains("pvi") && obj["pvi"].is_number()) {
      ex.pvi = obj["pvi"].get<double>();
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

void save_jsonl(const std::string& path, std::span<const LabeledExample> examples,
                bool with_pvi) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path);
  for (const auto& ex : examples) {
    nlohmann::ordered_json obj;
    obj["text"] = ex.text;
    obj["label"] = ex.label;
    if (with_pvi && ex.pvi) obj["pvi"] = *ex.pvi;
    out << obj.dump() << '\n';
  }
}

LabelVocabulary build_vocabulary(std::span<const LabeledExample> examples) {
  if (examples.empty()) throw CorpusError("cannot build vocabulary from empty example list");
  std::set<std::string> labels;
  for (const auto& ex : examples) labels.insert(ex.label);
  return LabelVocabulary(std::vector<std::string>(labels.begin(), labels.end()));
}

Dataset load_corpus_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset ds;
  ds.train = load_jsonl((fs::path(dir) / "train.jsonl").string());
  ds.validation = load_jsonl((fs::path(dir) / "validation.jsonl").string());
  ds.test = load_jsonl((fs::path(dir) / "test.jsonl").string());
  std::vector<LabeledExample> all = ds.train;
  all.insert(all.end(), ds.validation.begin(), ds.validation.end());
  all.insert(all.end(), ds.test.begin(), ds.test.end());
  ds.vocabulary = build_vocabulary(all);
  return ds;
}

std::map<std::string, size_t> label_counts(std::span<const LabeledExample> examples) {
  std::map<std::string, size_t> counts;
  for (const auto& ex : examples) ++counts[ex.label];
  return counts;
}

Dataset few_shot_sample(const Dataset& dataset, size_t k, uint64_t seed) {
  std::map<std::string, std::vector<size_t>> by_intent;
  for (size_t i = 0; i < dataset.train.size(); ++i) {
    by_intent[dataset.train[i].label].push_back(i);
  }
  for (const auto& [intent, indices] : by_intent) {
    if (indices.size() < k) {
      throw CorpusError("intent \"" + intent + "\" has only " +
                        std::to_string(indices.size()) + " train examples, need " +
                        std::to_string(k));
    }
  }
  Dataset out;
  out.validation = dataset.validation;
  out.test = dataset.test;
  out.vocabulary = dataset.vocabulary;
  for (auto& [intent, indices] : by_intent) {
    SplitMix64 rng(derive_seed(seed, "few_shot:" + intent));
    shuffle(indices, rng);
    std::vector<size_t> chosen(indices.begin(), indices.begin() + k);
    std::sort(chosen.begin(), chosen.end());  // keep corpus order within an intent
    for (size_t idx : chosen) out.train.push_back(dataset.train[idx]);
  }
  return out;
}

}  // namespace icda
