#ifndef ICDA_CLASSIFIER_HPP
#define ICDA_CLASSIFIER_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "icda/corpus.hpp"

namespace icda {

struct FeatureConfig {
  uint32_t hash_dim = 1u << 18;  // top id reserved for the null token
  bool use_bigrams = true;

  uint32_t null_token_id() const { return hash_dim - 1; }
};

/// Sparse count vector; ids strictly increasing, values > 0.
struct FeatureVector {
  std::vector<std::pair<uint32_t, double>> entries;

  bool empty() const { return entries.empty(); }
};

FeatureVector featurize(const std::string& text, const FeatureConfig& config);
// The distinguished no-input token; never produced by hashing real text.
FeatureVector featurize_null(const FeatureConfig& config);

struct TrainConfig {
  int epochs = 40;
  int batch_size = 16;
  double learning_rate = 0.1;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
  bool record_dynamics = false;
};

struct TrainingDynamicsRecord {
  double confidence_mean = 0.0;  // mean true-class probability over epochs
  double confidence_std = 0.0;   // population std of the same
  double correctness = 0.0;      // fraction of epochs with argmax correct
};

class TaskModel {
 public:
  TaskModel() = default;
  TaskModel(LabelVocabulary vocabulary, FeatureConfig feature_config,
            std::vector<double> weights, std::vector<double> bias);

  const LabelVocabulary& vocabulary() const { return vocabulary_; }
  const FeatureConfig& feature_config() const { return feature_config_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }

  std::vector<double> scores(const FeatureVector& input) const;
  /// Base-2 log-probabilities over labels; logsumexp2 == 0 within 1e-9.
  std::vector<double> predict_log2_proba(const FeatureVector& input) const;
  size_t predict_argmax(const FeatureVector& input) const;  // ties -> lowest id

  void save_json(const std::string& path) const;
  static TaskModel load_json(const std::string& path);

 private:
  LabelVocabulary vocabulary_;
  FeatureConfig feature_config_;
  std::vector<double> weights_;  // row-major [num_labels][hash_dim]
  std::vector<double> bias_;     // [num_labels]
};

struct TrainResult {
  TaskModel model;
  std::vector<TrainingDynamicsRecord> dynamics;  // parallel to input when recorded
};

// Mean cross-entropy + AdamW; when null_mode every input is featurize_null().
// Deterministic given config.seed.
TrainResult train(std::span<const LabeledExample> examples, const LabelVocabulary& vocabulary,
                  const FeatureConfig& feature_config, const TrainConfig& config,
                  bool null_mode = false);

struct EvalResult {
  double accuracy = 0.0;
  std::map<std::string, double> per_intent_f1;
  double macro_f1 = 0.0;
  std::vector<std::string> degenerate_intents;  // no predictions and no gold; F1 pinned to 0
};

EvalResult evaluate(const TaskModel& model, std::span<const LabeledExample> examples);

namespace detail {

// Mean cross-entropy (nats) over a batch of (features, label id) pairs, with
/// the gradient written into grad (same layout as params: weights then bias).
// Exposed for the finite-difference check.
double loss_and_gradient(std::span<const double> params, size_t num_labels, size_t hash_dim,
                         std::span<const FeatureVector* const> batch_features,
                         std::span<const size_t> batch_labels, std::span<double> grad);

}  // namespace detail

}  // namespace icda

#endif  // ICDA_CLASSIFIER_HPP
