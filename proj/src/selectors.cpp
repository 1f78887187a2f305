#include "icda/selectors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "icda/rng.hpp"

namespace icda {

namespace {

constexpr double kLog2E = 1.4426950408889634;

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  size_t i = 0, j = 0;
  while (i < a.entries.size() && j < b.entries.size()) {
    if (a.entries[i].first == b.entries[j].first) {
      dot += a.entries[i].second * b.entries[j].second;
      ++i;
      ++j;
    } else if (a.entries[i].first < b.entries[j].first) {
      ++i;
    } else {
      ++j;
    }
  }
  for (const auto& [id, v] : a.entries) na += v * v;
  for (const auto& [id, v] : b.entries) nb += v * v;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// KL(p || q) in bits over label distributions.
double kl_bits(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / std::max(q[i], 1e-300)) * kLog2E;
  }
  return kl;
}


}  // namespace

double uncertainty_score(std::span<const double> probs, UncertaintyMethod method) {
  switch (method) {
    case UncertaintyMethod::kLeastConfidence: {
      return 1.0 - *std::max_element(probs.begin(), probs.end());
    }
    case UncertaintyMethod::kPredictionEntropy: {
      double h = 0.0;
      for (double p : probs) {
        if (p > 0.0) h -= p * std::log2(p);
      }
      return h;
    }
    case UncertaintyMethod::kBreakingTies: {
      double first = 0.0, second = 0.0;
      for (double p : probs) {
        if (p > first) {
          second = first;
          first = p;
        } else if (p > second) {
          second = p;
        }
      }
      return 1.0 - (first - second);
    }
    case UncertaintyMethod::kContrastiveAl:
      break;  // handled by the caller (needs neighbors)
  }
  throw CorpusError("uncertainty_score: contrastive AL needs neighbor context");
}

RelabelResult relabel(const TaskModel& oracle, std::span<const LabeledExample> synthetic) {
  RelabelResult result;
  result.examples.reserve(synthetic.size());
  for (const auto& ex : synthetic) {
    size_t pred = oracle.predict_argmax(featurize(ex.text, oracle.feature_config()));
    LabeledExample out = ex;
    out.label = oracle.vocabulary().label(pred);
    result.original_labels.push_back(ex.label);
    if (out.label != ex.label) ++result.changed;
    result.examples.push_back(std::move(out));
  }
  return result;
}

CrossValResult cross_val_scores(std::span<const LabeledExample> examples,
                                const LabelVocabulary& vocabulary,
                                const FeatureConfig& feature_config, UncertaintyMethod method,
                                const TrainConfig& config, size_t folds,
                                size_t contrastive_neighbors) {
  size_t n = examples.size();
  if (n < folds) {
    throw CorpusError("cross_val_scores: " + std::to_string(n) + " examples < " +
                      std::to_string(folds) + " folds");
  }

  CrossValResult result;
  result.fold_of.assign(n, 0);
  auto counts = label_counts(examples);
  result.stratified =
      std::all_of(counts.begin(), counts.end(), [&](const auto& kv) { return kv.second >= folds; });

  SplitMix64 rng(derive_seed(config.seed, "cv_folds"));
  if (result.stratified) {
    // Shuffle within each intent, then deal round-robin.
    std::map<std::string, std::vector<size_t>> by_intent;
    for (size_t i = 0; i < n; ++i) by_intent[examples[i].label].push_back(i);
    for (auto& [intent, indices] : by_intent) {
      SplitMix64 intent_rng(derive_seed(config.seed, "cv_fold:" + intent));
      shuffle(indices, intent_rng);
      for (size_t pos = 0; pos < indices.size(); ++pos) {
        result.fold_of[indices[pos]] = pos % folds;
      }
    }
  } else {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    for (size_t pos = 0; pos < n; ++pos) result.fold_of[order[pos]] = pos % folds;
  }

  std::vector<FeatureVector> features(n);
  for (size_t i = 0; i < n; ++i) features[i] = featurize(examples[i].text, feature_config);

  std::vector<std::vector<double>> probs(n);
  for (size_t fold = 0; fold < folds; ++fold) {
    std::vector<LabeledExample> train_split;
    std::vector<size_t> holdout;
    for (size_t i = 0; i < n; ++i) {
      if (result.fold_of[i] == fold) {
        holdout.push_back(i);
      } else {
        train_split.push_back(examples[i]);
      }
    }
    TrainConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, "cv_train", fold);
    TaskModel model = train(train_split, vocabulary, feature_config, fold_config).model;
    for (size_t i : holdout) {
      std::vector<double> logp = model.predict_log2_proba(features[i]);
      std::vector<double> p(logp.size());
      for (size_t l = 0; l < logp.size(); ++l) p[l] = std::exp2(logp[l]);
      probs[i] = std::move(p);
    }
  }

  result.scores.reserve(n);
  if (method == UncertaintyMethod::kContrastiveAl) {
    // Mean KL from each cosine neighbor's predictive distribution to the
    // example's own.
    for (size_t i = 0; i < n; ++i) {
      std::vector<std::pair<double, size_t>> sims;
      for (size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        sims.emplace_back(cosine_similarity(features[i], features[j]), j);
      }
      size_t k = std::min(contrastive_neighbors, sims.size());
      std::partial_sort(sims.begin(), sims.begin() + k, sims.end(),
                        [](const auto& a, const auto& b) { return a.first > b.first; });
      double kl_sum = 0.0;
      for (size_t t = 0; t < k; ++t) kl_sum += kl_bits(probs[sims[t].second], probs[i]);
      result.scores.push_back({i, method, k ? kl_sum / static_cast<double>(k) : 0.0});
    }
  } else {
    for (size_t i = 0; i < n; ++i) {
      result.scores.push_back({i, method, uncertainty_score(probs[i], method)});
    }
  }
  return result;
}

std::vector<CartographyLabel> cartography(std::span<const TrainingDynamicsRecord> dynamics,
                                          size_t epochs_observed,
                                          const CartographyThresholds& thresholds) {
  if (epochs_observed < 2) {
    throw CorpusError("cartography: need dynamics over >= 2 epochs");
  }
  std::vector<CartographyLabel> labels;
  labels.reserve(dynamics.size());
  for (size_t i = 0; i < dynamics.size(); ++i) {
    const auto& d = dynamics[i];
    CartographyLabel label;
    label.example_index = i;
    label.confidence_mean = d.confidence_mean;
    label.confidence_std = d.confidence_std;
    label.correctness = d.correctness;
    // Precedence: LowCorrectness > Ambiguous > Easy/Hard.
    if (d.correctness < thresholds.correctness_cut) {
      label.category = CartographyCategory::kLowCorrectness;
    } else if (d.confidence_std >= thresholds.std_cut) {
      label.category = CartographyCategory::kAmbiguous;
    } else if (d.confidence_mean >= thresholds.confidence_cut) {
      label.category = CartographyCategory::kEasyToLearn;
    } else {
      label.category = CartographyCategory::kHardToLearn;
    }
    labels.push_back(label);
  }
  return labels;
}

std::vector<size_t> select_fraction(std::span<const UncertaintyScore> scores, double fraction,
                                    SelectionStrategy strategy, uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw CorpusError("select_fraction: fraction must be in (0, 1]");
  }
  size_t n = scores.size();
  size_t count = static_cast<size_t>(
      std::ceil(fraction * static_cast<double>(n) - 1e-12));
  count = std::min(count, n);

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (strategy == SelectionStrategy::kTopScore) {
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return scores[a].score > scores[b].score;  // ties keep input order
    });
  } else {
    SplitMix64 rng(derive_seed(seed, "select_random"));
    shuffle(order, rng);
  }
  std::vector<size_t> selected;
  selected.reserve(count);
  for (size_t i = 0; i < count; ++i) selected.push_back(scores[order[i]].example_index);
  std::sort(selected.begin(), selected.end());
  return selected;
}

std::vector<size_t> select_category(std::span<const CartographyLabel> labels,
                                    CartographyCategory category) {
  std::vector<size_t> selected;
  for (const auto& l : labels) {
    if (l.category == category) selected.push_back(l.example_index);
  }
  return selected;
}

const char* uncertainty_method_name(UncertaintyMethod method) {
  switch (method) {
    case UncertaintyMethod::kLeastConfidence: return "least_confidence";
    case UncertaintyMethod::kPredictionEntropy: return "prediction_entropy";
    case UncertaintyMethod::kBreakingTies: return "breaking_ties";
    case UncertaintyMethod::kContrastiveAl: return "contrastive_al";
  }
  return "unknown";
}

const char* cartography_category_name(CartographyCategory category) {
  switch (category) {
    case CartographyCategory::kEasyToLearn: return "easy_to_learn";
    case CartographyCategory::kAmbiguous: return "ambiguous";
    case CartographyCategory::kHardToLearn: return "hard_to_learn";
    case CartographyCategory::kLowCorrectness: return "low_correctness";
  }
  return "unknown";
}

}  // namespace icda
