#ifndef ICDA_SELECTORS_HPP
#define ICDA_SELECTORS_HPP

#include <span>
#include <string>
#include <vector>

#include "icda/classifier.hpp"
#include "icda/corpus.hpp"

namespace icda {

enum class UncertaintyMethod { kLeastConfidence, kPredictionEntropy, kBreakingTies, kContrastiveAl };

struct UncertaintyScore {
  size_t example_index = 0;
  UncertaintyMethod method = UncertaintyMethod::kLeastConfidence;
  double score = 0.0;  // higher = more uncertain
};

enum class CartographyCategory { kEasyToLearn, kAmbiguous, kHardToLearn, kLowCorrectness };

struct CartographyLabel {
  size_t example_index = 0;
  CartographyCategory category = CartographyCategory::kEasyToLearn;
  double confidence_mean = 0.0;
  double confidence_std = 0.0;
  double correctness = 0.0;
};

struct CartographyThresholds {
  double confidence_cut = 0.5;
  double std_cut = 0.2;
  double correctness_cut = 0.5;
};

struct RelabelResult {
  std::vector<LabeledExample> examples;      // texts unchanged, labels overwritten
  std::vector<std::string> original_labels;  // parallel to examples
  size_t changed = 0;
};

// Overwrites each synthetic label with the oracle's argmax (ties -> lowest
// label id).
RelabelResult relabel(const TaskModel& oracle, std::span<const LabeledExample> synthetic);

// 5-fold (by default) cross-validated uncertainty: every example is scored by
// a model trained on the other folds. Folds are stratified per intent when
// each intent has >= folds examples, otherwise unstratified (warning set).
struct CrossValResult {
  std::vector<UncertaintyScore> scores;    // in input order
  std::vector<size_t> fold_of;             // holdout fold per example
  bool stratified = true;
};

CrossValResult cross_val_scores(std::span<const LabeledExample> examples,
                                const LabelVocabulary& vocabulary,
                                const FeatureConfig& feature_config, UncertaintyMethod method,
                                const TrainConfig& config, size_t folds = 5,
                                size_t contrastive_neighbors = 10);

// Pointwise uncertainty of one predictive distribution (probabilities, not
// logs). Contrastive AL is not expressible per-distribution and throws here.
double uncertainty_score(std::span<const double> probs, UncertaintyMethod method);

// epochs_observed is the number of epochs the dynamics were recorded over;
// fewer than 2 leaves the confidence std undefined and errors.
std::vector<CartographyLabel> cartography(std::span<const TrainingDynamicsRecord> dynamics,
                                          size_t epochs_observed,
                                          const CartographyThresholds& thresholds);

enum class SelectionStrategy { kTopScore, kRandom };

// ceil(fraction * N) example indices; TopScore orders by score descending with
// input-order tie-break, Random is a seeded uniform subset.
std::vector<size_t> select_fraction(std::span<const UncertaintyScore> scores, double fraction,
                                    SelectionStrategy strategy, uint64_t seed = 0);
std::vector<size_t> select_category(std::span<const CartographyLabel> labels,
                                    CartographyCategory category);

const char* uncertainty_method_name(UncertaintyMethod method);
const char* cartography_category_name(CartographyCategory category);

}  // namespace icda

#endif  // ICDA_SELECTORS_HPP
