#ifndef ICDA_PVI_HPP
#define ICDA_PVI_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

#include "icda/classifier.hpp"
#include "icda/corpus.hpp"

namespace icda {

/// Per-example decomposition of pointwise V-information, in bits.
struct PviRecord {
  LabeledExample example;
  double log2_conditional = 0.0;  // log2 of the with-input model's p(y|x)
  double log2_null = 0.0;         // log2 of the null-input model's p(y)
  double pvi = 0.0;               // log2_conditional - log2_null
};

enum class ThresholdKind { kGlobal, kPerIntent };

struct ThresholdPolicy {
  ThresholdKind kind = ThresholdKind::kGlobal;
  double global_value = 0.0;
  std::map<std::string, double> per_intent;

  // Per-intent lookup falls back to the global mean for intents with no
  // validation records.
  double threshold_for(const std::string& intent) const;
};

enum class FilterMode { kHighPvi, kLowPvi };

PviRecord compute_pvi(const TaskModel& g_prime, const TaskModel& g_star,
                      const LabeledExample& example);
std::vector<PviRecord> compute_pvi_batch(const TaskModel& g_prime, const TaskModel& g_star,
                                         std::span<const LabeledExample> examples);

ThresholdPolicy estimate_thresholds(std::span<const PviRecord> validation_records,
                                    ThresholdKind kind);

// HighPvi keeps pvi strictly greater than the threshold; LowPvi keeps the
// complement (<=). Order preserved; retained examples carry their pvi.
std::vector<LabeledExample> filter_records(std::span<const PviRecord> records,
                                           const ThresholdPolicy& policy, FilterMode mode);

void save_pvi_jsonl(const std::string& path, std::span<const PviRecord> records);
std::vector<PviRecord> load_pvi_jsonl(const std::string& path);

}  // namespace icda

#endif  // ICDA_PVI_HPP
