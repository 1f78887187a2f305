// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line; the
// binary exits non-zero if any criterion fails or exceeds its time budget.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "icda/classifier.hpp"
#include "icda/corpus.hpp"
#include "icda/generator.hpp"
#include "icda/metrics.hpp"
#include "icda/pipeline.hpp"
#include "icda/pvi.hpp"
#include "icda/rng.hpp"
#include "icda/selectors.hpp"
#include "icda/text.hpp"
#include "icda/toy.hpp"

using namespace icda;

namespace {

int failures = 0;

void run_criterion(int number, const std::string& title, double budget_seconds,
                   const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool ok = false;
  auto start = std::chrono::steady_clock::now();
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
    ok = false;
  }
  double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (elapsed > budget_seconds) {
    ok = false;
    detail += (detail.empty() ? "" : "; ") + std::string("over time budget");
  }
  std::printf("criterion %2d [%s] %-28s (%.1fs/%.0fs)%s%s\n", number, ok ? "PASS" : "FAIL",
              title.c_str(), elapsed, budget_seconds, detail.empty() ? "" : " — ",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

FeatureConfig acceptance_features() {
  FeatureConfig fc;
  fc.hash_dim = 4096;
  return fc;
}

RunConfig acceptance_config() {
  RunConfig config;
  config.shots = 10;
  config.multiplier = 16;
  config.backend.noise_rate = 0.3;
  config.feature_config = acceptance_features();
  config.seeds = {1, 2, 3, 4, 5};
  return config;
}

TaskModel random_bias_model(const LabelVocabulary& vocab, const FeatureConfig& fc,
                            SplitMix64& rng) {
  std::vector<double> weights(vocab.size() * fc.hash_dim, 0.0);
  // Sprinkle a few nonzero weights so the conditional depends on the text.
  for (int k = 0; k < 200; ++k) {
    weights[rng.next_below(weights.size())] = rng.next_unit() * 4.0 - 2.0;
  }
  std::vector<double> bias;
  for (size_t l = 0; l < vocab.size(); ++l) bias.push_back(rng.next_unit() * 2.0 - 1.0);
  return TaskModel(vocab, fc, std::move(weights), std::move(bias));
}

std::string random_text(SplitMix64& rng, size_t max_tokens, const char* const* words,
                        size_t vocab) {
  std::string text;
  size_t len = 1 + rng.next_below(max_tokens);
  for (size_t w = 0; w < len; ++w) {
    if (w) text += ' ';
    text += words[rng.next_below(vocab)];
  }
  return text;
}

constexpr const char* kWords[] = {"send",    "money", "card", "lost", "my",   "balance",
                                  "euro",    "rate",  "atm",  "near", "loan", "apply",
                                  "deposit", "reset", "pass", "word"};

bool criterion_pvi_oracle(std::string& detail) {
  SplitMix64 rng(1001);
  LabelVocabulary vocab({"a", "b", "c", "d", "e"});
  FeatureConfig fc = acceptance_features();
  for (int pair = 0; pair < 1000; ++pair) {
    TaskModel g_prime = random_bias_model(vocab, fc, rng);
    TaskModel g_star = random_bias_model(vocab, fc, rng);
    LabeledExample ex{random_text(rng, 8, kWords, 16), vocab.label(rng.next_below(5)),
                      Provenance::kSynthetic, {}};
    PviRecord record = compute_pvi(g_prime, g_star, ex);
    size_t id = vocab.id(ex.label);
    double conditional = g_prime.predict_log2_proba(featurize(ex.text, fc))[id];
    double null = g_star.predict_log2_proba(featurize_null(fc))[id];
    // The record logs its two base-2 terms; recompute both routes.
    if (std::abs(record.pvi - (record.log2_conditional - record.log2_null)) > 1e-9 ||
        std::abs(record.pvi - (conditional - null)) > 1e-9) {
      detail = "mismatch at pair " + std::to_string(pair);
      return false;
    }
  }
  return true;
}

bool criterion_null_marginal(std::string& detail) {
  // 60/25/15 label marginal; the null model sees only the null token.
  std::vector<LabeledExample> examples;
  for (int i = 0; i < 60; ++i) examples.push_back({"t", "a", Provenance::kSeed, {}});
  for (int i = 0; i < 25; ++i) examples.push_back({"t", "b", Provenance::kSeed, {}});
  for (int i = 0; i < 15; ++i) examples.push_back({"t", "c", Provenance::kSeed, {}});
  LabelVocabulary vocab({"a", "b", "c"});
  TrainConfig config;
  config.seed = 9;
  config.epochs = 100;
  config.weight_decay = 0.0;  // the closed-form optimum is the unregularized one
  TaskModel g_star = train(examples, vocab, acceptance_features(), config, true).model;
  std::vector<double> logp = g_star.predict_log2_proba(featurize_null(acceptance_features()));
  double marginal[] = {0.60, 0.25, 0.15};
  double kl = 0.0;
  for (size_t l = 0; l < 3; ++l) {
    kl += marginal[l] * (std::log2(marginal[l]) - logp[l]);
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "KL = %.5f bits", kl);
  detail = buf;
  return kl < 0.01;
}

bool criterion_gradients(std::string& detail) {
  SplitMix64 rng(3003);
  for (int instance = 0; instance < 50; ++instance) {
    size_t num_labels = 2 + rng.next_below(4);
    size_t hash_dim = 32;
    size_t batch = 1 + rng.next_below(6);
    FeatureConfig fc;
    fc.hash_dim = static_cast<uint32_t>(hash_dim);
    std::vector<FeatureVector> features;
    std::vector<const FeatureVector*> feature_ptrs;
    std::vector<size_t> labels;
    for (size_t b = 0; b < batch; ++b) {
      features.push_back(featurize(random_text(rng, 5, kWords, 16), fc));
      labels.push_back(rng.next_below(num_labels));
    }
    for (const auto& f : features) feature_ptrs.push_back(&f);
    size_t dim = num_labels * (hash_dim + 1);
    std::vector<double> params(dim);
    for (double& p : params) p = rng.next_unit() * 2.0 - 1.0;
    std::vector<double> grad(dim, 0.0);
    detail::loss_and_gradient(params, num_labels, hash_dim, feature_ptrs, labels, grad);

    const double h = 1e-5;
    for (size_t probe = 0; probe < dim; probe += 7) {
      std::vector<double> scratch(dim, 0.0);
      std::vector<double> plus = params, minus = params;
      plus[probe] += h;
      minus[probe] -= h;
      double lp = detail::loss_and_gradient(plus, num_labels, hash_dim, feature_ptrs, labels,
                                            scratch);
      double lm = detail::loss_and_gradient(minus, num_labels, hash_dim, feature_ptrs, labels,
                                            scratch);
      double numeric = (lp - lm) / (2.0 * h);
      double denom = std::max({std::abs(numeric), std::abs(grad[probe]), 1e-8});
      if (std::abs(numeric - grad[probe]) / denom > 1e-4) {
        detail = "instance " + std::to_string(instance) + " param " + std::to_string(probe);
        return false;
      }
    }
  }
  return true;
}

bool criterion_filter_direction(std::string& detail) {
  RunConfig config = acceptance_config();
  AblationReport report =
      run_ablation(config, {parse_arm("all"), parse_arm("per_intent_high"),
                            parse_arm("per_intent_low")});
  double all = report.arms[0].mean_accuracy;
  double high = report.arms[1].mean_accuracy;
  double low = report.arms[2].mean_accuracy;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "all=%.3f high=%.3f low=%.3f", all, high, low);
  detail = buf;
  return high >= all + 0.01 && low <= all - 0.03;
}

bool criterion_filter_properties(std::string& detail) {
  SplitMix64 rng(5005);
  const char* intents[] = {"w", "x", "y", "z"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<PviRecord> records;
    size_t n = 1 + rng.next_below(50);
    for (size_t i = 0; i < n; ++i) {
      PviRecord r;
      r.pvi = rng.next_unit() * 12.0 - 4.0;
      if (rng.next_below(10) == 0) r.pvi = 1.5;  // force equality hits below
      r.example = {"t" + std::to_string(i), intents[rng.next_below(4)], Provenance::kSynthetic,
                   r.pvi};
      records.push_back(r);
    }
    ThresholdPolicy policy;
    policy.kind = ThresholdKind::kPerIntent;
    policy.global_value = 1.5;
    for (const char* intent : intents) {
      policy.per_intent[intent] = rng.next_below(2) ? 1.5 : rng.next_unit() * 8.0 - 2.0;
    }
    auto high = filter_records(records, policy, FilterMode::kHighPvi);
    auto low = filter_records(records, policy, FilterMode::kLowPvi);
    if (high.size() + low.size() != records.size()) {
      detail = "partition violated";
      return false;
    }
    for (const auto& ex : high) {
      if (!(*ex.pvi > policy.threshold_for(ex.label))) {
        detail = "strictness violated (equality retained)";
        return false;
      }
    }
    for (const auto& ex : low) {
      if (*ex.pvi > policy.threshold_for(ex.label)) {
        detail = "low bucket holds a passing record";
        return false;
      }
    }
    ThresholdPolicy raised = policy;
    for (auto& [intent, value] : raised.per_intent) value += rng.next_unit();
    auto high_raised = filter_records(records, raised, FilterMode::kHighPvi);
    std::set<std::string> kept;
    for (const auto& ex : high) kept.insert(ex.text);
    for (const auto& ex : high_raised) {
      if (!kept.count(ex.text)) {
        detail = "monotonicity violated";
        return false;
      }
    }
  }
  return true;
}

bool criterion_diversity_oracles(std::string& detail) {
  SplitMix64 rng(6006);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> corpus;
    size_t texts = 2 + rng.next_below(4);  // 2..5 texts
    for (size_t t = 0; t < texts; ++t) corpus.push_back(random_text(rng, 6, kWords, 8));

    for (size_t n : {size_t{1}, size_t{2}}) {
      std::set<std::vector<std::string>> unique;
      size_t total = 0;
      for (const auto& text : corpus) {
        auto toks = tokenize(text);
        for (size_t i = 0; i + n <= toks.size(); ++i) {
          unique.insert({toks.begin() + i, toks.begin() + i + n});
          ++total;
        }
      }
      if (total == 0) continue;
      double expected = double(unique.size()) / double(total);
      if (std::abs(distinct_n(corpus, n) - expected) > 1e-9) {
        detail = "distinct-" + std::to_string(n) + " mismatch";
        return false;
      }
    }

    // Brute-force BLEU with uniform 1..4 weights, clipping, brevity penalty.
    auto grams = [](const std::vector<std::string>& toks, size_t n) {
      std::map<std::vector<std::string>, size_t> out;
      for (size_t i = 0; i + n <= toks.size(); ++i) {
        ++out[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
      }
      return out;
    };
    std::vector<std::vector<std::string>> toks;
    for (const auto& t : corpus) toks.push_back(tokenize(t));
    double oracle_sum = 0.0;
    for (size_t i = 0; i < toks.size(); ++i) {
      const auto& hyp = toks[i];
      if (hyp.empty()) continue;
      size_t closest = 0, gap = SIZE_MAX;
      for (size_t j = 0; j < toks.size(); ++j) {
        if (j == i) continue;
        size_t len = toks[j].size();
        size_t g = len > hyp.size() ? len - hyp.size() : hyp.size() - len;
        if (g < gap || (g == gap && len < closest)) {
          gap = g;
          closest = len;
        }
      }
      double bp =
          hyp.size() >= closest ? 1.0 : std::exp(1.0 - double(closest) / double(hyp.size()));
      double log_sum = 0.0;
      size_t used = 0;
      for (size_t n = 1; n <= 4 && hyp.size() >= n; ++n) {
        size_t clipped = 0;
        for (const auto& [gram, count] : grams(hyp, n)) {
          size_t best = 0;
          for (size_t j = 0; j < toks.size(); ++j) {
            if (j == i) continue;
            auto ref = grams(toks[j], n);
            auto it = ref.find(gram);
            if (it != ref.end()) best = std::max(best, it->second);
          }
          clipped += std::min(count, best);
        }
        double p = clipped ? double(clipped) / double(hyp.size() - n + 1) : 1e-9;
        log_sum += std::log(p);
        ++used;
      }
      oracle_sum += used ? bp * std::exp(log_sum / double(used)) : 0.0;
    }
    if (std::abs(self_bleu(corpus) - oracle_sum / double(corpus.size())) > 1e-9) {
      detail = "self-BLEU mismatch at trial " + std::to_string(trial);
      return false;
    }
  }

  std::vector<std::string> identical(5, "freeze my card please");
  if (std::abs(self_bleu(identical) - 1.0) > 1e-12) {
    detail = "identical-corpus self-BLEU != 1";
    return false;
  }
  auto uniform = NgramLanguageModel::uniform({"a", "b", "c", "d", "e", "f", "g", "h", "i"}, 3);
  std::vector<std::string> any = {"a b c", "unseen things entirely"};
  if (std::abs(perplexity(uniform, any) - 9.0) > 1e-12) {
    detail = "uniform perplexity != |V|";
    return false;
  }
  return true;
}

bool criterion_diversity_direction(std::string& detail) {
  RunConfig config = acceptance_config();
  RunReport report = run_icda(config);
  int d1 = 0, d2 = 0, bleu = 0, ppl = 0;
  for (const auto& outcome : report.per_seed) {
    const auto& s = outcome.diversity.seed;
    const auto& g = outcome.diversity.synthetic;
    if (g.distinct1 > s.distinct1) ++d1;
    if (g.distinct2 > s.distinct2) ++d2;
    if (g.self_bleu < s.self_bleu) ++bleu;
    if (g.perplexity > s.perplexity) ++ppl;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "d1 %d/5, d2 %d/5, bleu %d/5, ppl %d/5", d1, d2, bleu, ppl);
  detail = buf;
  return d1 >= 4 && d2 >= 4 && bleu >= 4 && ppl >= 4;
}

bool criterion_selectors(std::string& detail) {
  // Fold partition.
  Dataset toy = make_toy_corpus();
  Dataset few = few_shot_sample(toy, 10, 2);
  TrainConfig quick;
  quick.epochs = 10;
  quick.seed = 2;
  auto cv = cross_val_scores(few.train, few.vocabulary, acceptance_features(),
                             UncertaintyMethod::kPredictionEntropy, quick);
  std::vector<size_t> fold_sizes(5, 0);
  for (size_t fold : cv.fold_of) {
    if (fold >= 5) {
      detail = "fold index out of range";
      return false;
    }
    ++fold_sizes[fold];
  }
  for (size_t size : fold_sizes) {
    if (size != few.train.size() / 5) {
      detail = "folds do not partition evenly";
      return false;
    }
  }

  // Closed-form uncertainty values.
  for (size_t classes : {2, 4, 8, 12}) {
    std::vector<double> uniform(classes, 1.0 / double(classes));
    if (std::abs(uncertainty_score(uniform, UncertaintyMethod::kPredictionEntropy) -
                 std::log2(double(classes))) > 1e-12) {
      detail = "uniform entropy != log2 |Y|";
      return false;
    }
    std::vector<double> one_hot(classes, 0.0);
    one_hot[classes / 2] = 1.0;
    for (auto method : {UncertaintyMethod::kLeastConfidence,
                        UncertaintyMethod::kPredictionEntropy,
                        UncertaintyMethod::kBreakingTies}) {
      if (std::abs(uncertainty_score(one_hot, method)) > 1e-12) {
        detail = "one-hot uncertainty != 0";
        return false;
      }
    }
  }

  // Relabeling with a full-data oracle recovers mock label noise.
  TrainConfig oracle_config;
  oracle_config.seed = 11;
  TaskModel oracle =
      train(toy.train, toy.vocabulary, acceptance_features(), oracle_config).model;
  MockBackend backend(toy.train, 0.3);
  std::map<std::string, PromptSpec> prompts;
  std::map<std::string, std::vector<LabeledExample>> by_intent;
  for (const auto& ex : toy.train) by_intent[ex.label].push_back(ex);
  for (const auto& [intent, seeds] : by_intent) prompts[intent] = build_prompt(intent, seeds);
  MultiplierPlan plan = MultiplierPlan::from_seeds(few.train, 4);
  generate(backend, plan, prompts, DecodingConfig{}, 33);

  size_t noisy = 0, recovered = 0;
  for (const auto& entry : backend.log()) {
    if (entry.source_intent == entry.prompt_intent) continue;
    ++noisy;
    LabeledExample ex{entry.text, entry.prompt_intent, Provenance::kSynthetic, {}};
    if (ex.text.empty()) continue;
    RelabelResult fixed = relabel(oracle, std::vector<LabeledExample>{ex});
    if (fixed.examples[0].label == entry.source_intent) ++recovered;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "noise recovery %zu/%zu", recovered, noisy);
  detail = buf;
  return noisy > 0 && double(recovered) >= 0.8 * double(noisy);
}

bool criterion_reproducibility(std::string& detail) {
  RunConfig config = acceptance_config();
  config.seeds = {1, 2};
  config.multiplier = 4;
  std::string first = run_icda(config).to_json().dump(2);
  std::string second = run_icda(config).to_json().dump(2);
  if (first != second) {
    detail = "reports differ between identical runs";
    return false;
  }
  detail = std::to_string(first.size()) + " bytes, byte-identical";
  return true;
}

bool criterion_multiplier_accounting(std::string& detail) {
  for (int m : {1, 4, 16}) {
    RunConfig config = acceptance_config();
    config.multiplier = m;
    SeedArtifacts art = run_seed_prefix(config, 1);
    if (!art.generation.warnings.empty()) {
      detail = "m=" + std::to_string(m) + ": generation shortfall";
      return false;
    }
    auto seed_counts = label_counts(art.dataset.train);
    auto synthetic_counts = label_counts(art.generation.examples);
    for (const auto& [intent, count] : seed_counts) {
      if (synthetic_counts[intent] != count * static_cast<size_t>(m)) {
        detail = "m=" + std::to_string(m) + ": " + intent + " has " +
                 std::to_string(synthetic_counts[intent]) + " != " +
                 std::to_string(count * static_cast<size_t>(m));
        return false;
      }
    }
  }
  return true;
}

}  // namespace

int main() {
  run_criterion(1, "pvi formula oracle", 10, criterion_pvi_oracle);
  run_criterion(2, "null-model marginal", 30, criterion_null_marginal);
  run_criterion(3, "gradient correctness", 10, criterion_gradients);
  run_criterion(4, "filter direction (scaled)", 300, criterion_filter_direction);
  run_criterion(5, "filter partition/strictness", 5, criterion_filter_properties);
  run_criterion(6, "diversity metric oracles", 30, criterion_diversity_oracles);
  run_criterion(7, "diversity direction (scaled)", 180, criterion_diversity_direction);
  run_criterion(8, "selectors and relabeling", 120, criterion_selectors);
  run_criterion(9, "reproducibility", 120, criterion_reproducibility);
  run_criterion(10, "multiplier accounting", 60, criterion_multiplier_accounting);
  if (failures) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
