#include "icda/pvi.hpp"

#include <fstream>

#include "json.hpp"

namespace icda {

double ThresholdPolicy::threshold_for(const std::string& intent) const {
  if (kind == ThresholdKind::kPerIntent) {
    auto it = per_intent.find(intent);
    if (it != per_intent.end()) return it->second;
  }
  return global_value;
}

PviRecord compute_pvi(const TaskModel& g_prime, const TaskModel& g_star,
                      const LabeledExample& example) {
  size_t label_id = g_prime.vocabulary().id(example.label);
  if (!g_star.vocabulary().contains(example.label)) {
    throw CorpusError("compute_pvi: label missing from null model vocabulary: " + example.label);
  }
  PviRecord record;
  record.example = example;
  record.log2_conditional =
      g_prime.predict_log2_proba(featurize(example.text, g_prime.feature_config()))[label_id];
  record.log2_null =
      g_star.predict_log2_proba(featurize_null(g_star.feature_config()))[g_star.vocabulary().id(
          example.label)];
  record.pvi = record.log2_conditional - record.log2_null;
  record.example.pvi = record.pvi;
  return record;
}

std::vector<PviRecord> compute_pvi_batch(const TaskModel& g_prime, const TaskModel& g_star,
                                         std::span<const LabeledExample> examples) {
  // The null distribution is the same for every example.
  std::vector<double> null_log2 =
      g_star.predict_log2_proba(featurize_null(g_star.feature_config()));
  std::vector<PviRecord> records;
  records.reserve(examples.size());
  for (const auto& ex : examples) {
    size_t label_id = g_prime.vocabulary().id(ex.label);
    PviRecord record;
    record.example = ex;
    record.log2_conditional =
        g_prime.predict_log2_proba(featurize(ex.text, g_prime.feature_config()))[label_id];
    record.log2_null = null_log2[g_star.vocabulary().id(ex.label)];
    record.pvi = record.log2_conditional - record.log2_null;
    record.example.pvi = record.pvi;
    records.push_back(std::move(record));
  }
  return records;
}

ThresholdPolicy estimate_thresholds(std::span<const PviRecord> validation_records,
                                    ThresholdKind kind) {
  if (validation_records.empty()) {
    throw CorpusError("estimate_thresholds: no validation records");
  }
  ThresholdPolicy policy;
  policy.kind = kind;
  double sum = 0.0;
  std::map<std::string, std::pair<double, size_t>> per_intent;
  for (const auto& r : validation_records) {
    sum += r.pvi;
    auto& acc = per_intent[r.example.label];
    acc.first += r.pvi;
    acc.second += 1;
  }
  policy.global_value = sum / static_cast<double>(validation_records.size());
  if (kind == ThresholdKind::kPerIntent) {
    for (const auto& [intent, acc] : per_intent) {
      policy.per_intent[intent] = acc.first / static_cast<double>(acc.second);
    }
  }
  return policy;
}

std::vector<LabeledExample> filter_records(std::span<const PviRecord> records,
                                           const ThresholdPolicy& policy, FilterMode mode) {
  std::vector<LabeledExample> kept;
  for (const auto& r : records) {
    double eps = policy.threshold_for(r.example.label);
    bool high = r.pvi > eps;  // strict
    if ((mode == FilterMode::kHighPvi) == high) {
      LabeledExample ex = r.example;
      ex.pvi = r.pvi;
      kept.push_back(std::move(ex));
    }
  }
  return kept;
}

void save_pvi_jsonl(const std::string& path, std::span<const PviRecord> records) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path);
  for (const auto& r : records) {
    nlohmann::ordered_json obj;
    obj["text"] = r.example.text;
    obj["label"] = r.example.label;
    obj["log2_conditional"] = r.log2_conditional;
    obj["log2_null"] = r.log2_null;
    obj["pvi"] = r.pvi;
    out << obj.dump() << '\n';
  }
}

std::vector<PviRecord> load_pvi_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path);
  std::vector<PviRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    PviRecord r;
    r.example.text = obj.at("text").get<std::string>();
    r.example.label = obj.at("label").get<std::string>();
    r.example.provenance = Provenance::kSynthetic;
    r.log2_conditional = obj.at("log2_conditional").get<double>();
    r.log2_null = obj.at("log2_null").get<double>();
    r.pvi = obj.at("pvi").get<double>();
    r.example.pvi = r.pvi;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace icda
