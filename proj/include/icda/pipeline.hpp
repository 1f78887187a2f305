#ifndef ICDA_PIPELINE_HPP
#define ICDA_PIPELINE_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icda/classifier.hpp"
#include "icda/corpus.hpp"
#include "icda/generator.hpp"
#include "icda/metrics.hpp"
#include "icda/pvi.hpp"
#include "icda/selectors.hpp"
#include "json.hpp"

namespace icda {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendSpec {
  enum class Kind { kMock, kHttp } kind = Kind::kMock;
  double noise_rate = 0.3;  // mock only
  HttpBackend::Options http;
};

struct RunConfig {
  std::string corpus_dir;  // empty -> bundled toy corpus
  int shots = 10;          // 0 = full-shot
  int multiplier = 16;
  ThresholdKind threshold_kind = ThresholdKind::kPerIntent;
  FilterMode filter_mode = FilterMode::kHighPvi;
  BackendSpec backend;
  TrainConfig train_config;
  FeatureConfig feature_config;
  DecodingConfig decoding;
  size_t ngram_order = 3;
  double ngram_delta = 0.1;
  size_t cv_folds = 5;
  double selection_fraction = 1.0 / 3.0;
  CartographyThresholds cartography_thresholds;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
};

// Table-style multiplier names; XS..XL for few-shot runs, S..L for full-shot.
int resolve_multiplier(const std::string& name, bool few_shot);

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
std::string canonical_config_string(const RunConfig& config);
std::string config_hash(const RunConfig& config);

struct DiversityPair {
  DiversityReport seed;
  DiversityReport synthetic;  // size-matched subsample of the synthetic corpus
};

struct SeedOutcome {
  uint64_t seed = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::map<std::string, double> per_intent_f1;
  std::map<std::string, double> mean_pvi_per_intent;
  size_t synthetic_generated = 0;
  size_t duplicates_dropped = 0;
  size_t retained = 0;
  size_t dropped = 0;
  DiversityPair diversity;
  std::vector<std::string> warnings;
};

struct RunReport {
  std::vector<SeedOutcome> per_seed;
  double mean_accuracy = 0.0;
  double mean_macro_f1 = 0.0;
  std::string config_hash;
  std::string prompt_template_version = "v1";
  std::string backend_description;

  nlohmann::ordered_json to_json() const;
};

enum class ArmKind {
  kAll,
  kAllRelabeled,
  kGlobalHigh,
  kGlobalLow,
  kPerIntentHigh,
  kPerIntentLow,
  kCartography,
  kUncertainty,
  kRandom,
};

struct ArmSpec {
  ArmKind kind = ArmKind::kAll;
  CartographyCategory category = CartographyCategory::kHardToLearn;  // kCartography
  UncertaintyMethod method = UncertaintyMethod::kPredictionEntropy;  // kUncertainty
  double fraction = 1.0 / 3.0;                                       // kUncertainty / kRandom

  std::string name() const;
};

ArmSpec parse_arm(const std::string& name);

struct AblationReport {
  struct ArmResult {
    std::string arm;
    std::vector<double> per_seed_accuracy;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::vector<size_t> per_seed_selected;
  };
  std::vector<ArmResult> arms;
  std::vector<uint64_t> seeds;
  std::string config_hash;

  nlohmann::ordered_json to_json() const;
};

// Full Algorithm-1 run over every configured seed. A non-null backend
// overrides the config's backend spec (used for injecting test doubles).
RunReport run_icda(const RunConfig& config, GenerationBackend* backend = nullptr);

AblationReport run_ablation(const RunConfig& config, const std::vector<ArmSpec>& arms,
                            GenerationBackend* backend = nullptr);

// Per-seed artifacts of the shared pipeline prefix (steps through filtering),
// exposed for the CLI's stepwise subcommands.
struct SeedArtifacts {
  Dataset dataset;               // few-shot sampled
  TaskModel g_prime;
  TaskModel g_star;
  GenerationResult generation;
  std::vector<PviRecord> synthetic_records;
  std::vector<PviRecord> validation_records;
  ThresholdPolicy policy;
  std::vector<LabeledExample> filtered;
};

SeedArtifacts run_seed_prefix(const RunConfig& config, uint64_t seed,
                              GenerationBackend* backend = nullptr);

std::unique_ptr<GenerationBackend> make_backend(const RunConfig& config,
                                                const Dataset& dataset);

Dataset load_configured_corpus(const RunConfig& config);

}  // namespace icda

#endif  // ICDA_PIPELINE_HPP
