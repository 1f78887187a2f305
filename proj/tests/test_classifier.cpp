#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "icda/classifier.hpp"
#include "icda/rng.hpp"

using namespace icda;

namespace {

FeatureConfig small_features() {
  FeatureConfig fc;
  fc.hash_dim = 1u << 12;
  return fc;
}

std::set<uint32_t> ids_of(const FeatureVector& fv) {
  std::set<uint32_t> ids;
  for (const auto& [id, value] : fv.entries) ids.insert(id);
  return ids;
}

TaskModel zero_model(size_t num_labels, const FeatureConfig& fc) {
  std::vector<std::string> labels;
  for (size_t i = 0; i < num_labels; ++i) labels.push_back("l" + std::to_string(i));
  return TaskModel(LabelVocabulary(labels), fc,
                   std::vector<double>(num_labels * fc.hash_dim, 0.0),
                   std::vector<double>(num_labels, 0.0));
}

}  // namespace

TEST_CASE("featurize empty text gives empty vector") {
  CHECK(featurize("", small_features()).empty());
}

TEST_CASE("featurize counts repeated unigrams and emits bigrams") {
  FeatureVector fv = featurize("Hi Hi", small_features());
  // one unigram id (count 2) + one bigram id (count 1)
  REQUIRE(fv.entries.size() == 2);
  std::multiset<double> values;
  for (const auto& [id, value] : fv.entries) values.insert(value);
  CHECK(values == std::multiset<double>{1.0, 2.0});
}

TEST_CASE("featurize distinguishes word order through bigrams") {
  FeatureConfig fc = small_features();
  FeatureVector ab = featurize("alarm query", fc);
  FeatureVector ba = featurize("query alarm", fc);
  FeatureConfig unigram_only = fc;
  unigram_only.use_bigrams = false;
  CHECK(ids_of(featurize("alarm query", unigram_only)) ==
        ids_of(featurize("query alarm", unigram_only)));
  CHECK(ids_of(ab) != ids_of(ba));
}

TEST_CASE("featurize is deterministic and case/punctuation normalizing") {
  FeatureConfig fc = small_features();
  CHECK(ids_of(featurize("Check Balance!", fc)) == ids_of(featurize("check balance", fc)));
}

TEST_CASE("featurize_null is the reserved token, not empty text") {
  FeatureConfig fc = small_features();
  FeatureVector null_fv = featurize_null(fc);
  REQUIRE(null_fv.entries.size() == 1);
  CHECK(null_fv.entries[0].first == fc.null_token_id());
  CHECK(null_fv.entries[0].second == 1.0);
  CHECK(featurize("", fc).entries != null_fv.entries);
  CHECK(featurize_null(fc).entries == null_fv.entries);
}

TEST_CASE("real tokens never hash onto the null token id") {
  FeatureConfig fc;
  fc.hash_dim = 64;  // tiny space to make collisions likely if unreserved
  for (int i = 0; i < 500; ++i) {
    FeatureVector fv = featurize("tok" + std::to_string(i), fc);
    for (const auto& [id, value] : fv.entries) CHECK(id != fc.null_token_id());
  }
}

TEST_CASE("zero-weight model predicts uniform") {
  FeatureConfig fc = small_features();
  TaskModel model = zero_model(4, fc);
  auto logp = model.predict_log2_proba(featurize("anything", fc));
  for (double v : logp) CHECK(v == doctest::Approx(-2.0).epsilon(1e-12));
}

namespace {

std::vector<LabeledExample> separable_toy() {
  // Two classes with disjoint vocabularies, 10 examples each.
  std::vector<LabeledExample> examples;
  for (int i = 0; i < 10; ++i) {
    examples.push_back({"red crimson scarlet item" + std::to_string(i), "warm",
                        Provenance::kSeed, {}});
    examples.push_back({"blue azure navy thing" + std::to_string(i), "cold",
                        Provenance::kSeed, {}});
  }
  return examples;
}

}  // namespace

TEST_CASE("training fits linearly separable data exactly") {
  auto examples = separable_toy();
  auto vocab = build_vocabulary(examples);
  TrainConfig config;
  config.seed = 3;
  TaskModel model = train(examples, vocab, small_features(), config).model;
  size_t correct = 0;
  for (const auto& ex : examples) {
    if (model.predict_argmax(featurize(ex.text, small_features())) == vocab.id(ex.label)) {
      ++correct;
    }
  }
  CHECK(correct == examples.size());
}

TEST_CASE("training is bit-deterministic given the seed") {
  auto examples = separable_toy();
  auto vocab = build_vocabulary(examples);
  TrainConfig config;
  config.seed = 11;
  TaskModel a = train(examples, vocab, small_features(), config).model;
  TaskModel b = train(examples, vocab, small_features(), config).model;
  CHECK(a.weights() == b.weights());
  CHECK(a.bias() == b.bias());
}

TEST_CASE("null-mode training converges to the empirical label marginal") {
  std::vector<LabeledExample> examples;
  // 30 a's and 10 b's so a full epoch has several batches.
  for (int i = 0; i < 30; ++i) examples.push_back({"x" + std::to_string(i), "a", Provenance::kSeed, {}});
  for (int i = 0; i < 10; ++i) examples.push_back({"y" + std::to_string(i), "b", Provenance::kSeed, {}});
  auto vocab = build_vocabulary(examples);
  TrainConfig config;
  config.seed = 5;
  TaskModel g_star = train(examples, vocab, small_features(), config, /*null_mode=*/true).model;
  auto logp = g_star.predict_log2_proba(featurize_null(small_features()));
  double pa = std::exp2(logp[vocab.id("a")]);
  double pb = std::exp2(logp[vocab.id("b")]);
  // Closed-form optimum of cross-entropy on a constant input is the marginal.
  double kl = 0.75 * std::log2(0.75 / pa) + 0.25 * std::log2(0.25 / pb);
  CHECK(kl < 0.01);
}

TEST_CASE("prediction log-probabilities normalize") {
  auto examples = separable_toy();
  auto vocab = build_vocabulary(examples);
  TrainConfig config;
  config.seed = 2;
  config.epochs = 5;
  TaskModel model = train(examples, vocab, small_features(), config).model;
  for (const auto& text : {"red blue", "totally unseen words", ""}) {
    auto logp = model.predict_log2_proba(featurize(text, small_features()));
    double total = 0.0;
    for (double v : logp) total += std::exp2(v);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  SplitMix64 rng(99);
  FeatureConfig fc;
  fc.hash_dim = 32;
  const size_t num_labels = 3;
  const double h = 1e-5;
  for (int instance = 0; instance < 10; ++instance) {
    // Random sparse batch.
    std::vector<FeatureVector> features(4);
    std::vector<size_t> labels(4);
    for (auto& fv : features) {
      size_t nnz = 1 + rng.next_below(4);
      std::set<uint32_t> ids;
      while (ids.size() < nnz) ids.insert(static_cast<uint32_t>(rng.next_below(fc.hash_dim)));
      for (uint32_t id : ids) fv.entries.emplace_back(id, 1.0 + rng.next_below(3));
    }
    for (auto& l : labels) l = rng.next_below(num_labels);

    size_t param_count = num_labels * fc.hash_dim + num_labels;
    std::vector<double> params(param_count);
    for (auto& p : params) p = rng.next_unit() * 2.0 - 1.0;
    std::vector<double> grad(param_count);
    std::vector<const FeatureVector*> fptrs;
    for (const auto& fv : features) fptrs.push_back(&fv);
    detail::loss_and_gradient(params, num_labels, fc.hash_dim, fptrs, labels, grad);

    std::vector<double> scratch(param_count);
    for (size_t p = 0; p < param_count; p += 7) {  // spot-check a stride of params
      std::vector<double> shifted = params;
      shifted[p] += h;
      double up = detail::loss_and_gradient(shifted, num_labels, fc.hash_dim, fptrs, labels,
                                            scratch);
      shifted[p] -= 2 * h;
      double down = detail::loss_and_gradient(shifted, num_labels, fc.hash_dim, fptrs, labels,
                                              scratch);
      double numeric = (up - down) / (2 * h);
      double denom = std::max({std::abs(numeric), std::abs(grad[p]), 1e-8});
      CHECK(std::abs(numeric - grad[p]) / denom < 1e-4);
    }
  }
}

TEST_CASE("full-batch training loss is monotone non-increasing") {
  auto examples = separable_toy();
  auto vocab = build_vocabulary(examples);
  FeatureConfig fc = small_features();

  std::vector<FeatureVector> features;
  std::vector<size_t> labels;
  for (const auto& ex : examples) {
    features.push_back(featurize(ex.text, fc));
    labels.push_back(vocab.id(ex.label));
  }
  std::vector<const FeatureVector*> fptrs;
  for (const auto& fv : features) fptrs.push_back(&fv);

  auto full_batch_loss = [&](const TaskModel& model) {
    std::vector<double> params = model.weights();
    params.insert(params.end(), model.bias().begin(), model.bias().end());
    std::vector<double> scratch(params.size());
    return detail::loss_and_gradient(params, vocab.size(), fc.hash_dim, fptrs, labels, scratch);
  };

  double previous = std::log(static_cast<double>(vocab.size()));  // loss of the zero model
  for (int epochs = 1; epochs <= 8; ++epochs) {
    TrainConfig config;
    config.seed = 4;
    config.epochs = epochs;
    config.batch_size = static_cast<int>(examples.size());  // full batch
    config.weight_decay = 0.0;
    double loss = full_batch_loss(train(examples, vocab, fc, config).model);
    CHECK(loss <= previous + 1e-9);
    previous = loss;
  }
}

TEST_CASE("label permutation equivariance") {
  auto examples = separable_toy();
  auto vocab = build_vocabulary(examples);
  // Renaming labels permutes vocabulary order; outputs must permute with it.
  std::map<std::string, std::string> renaming = {{"warm", "z_warm"}, {"cold", "a_cold"}};
  std::vector<LabeledExample> renamed = examples;
  for (auto& ex : renamed) ex.label = renaming.at(ex.label);
  auto vocab2 = build_vocabulary(renamed);

  TrainConfig config;
  config.seed = 21;
  config.epochs = 10;
  FeatureConfig fc = small_features();
  TaskModel m1 = train(examples, vocab, fc, config).model;
  TaskModel m2 = train(renamed, vocab2, fc, config).model;
  for (const auto& text : {"red crimson", "navy thing3", "red navy"}) {
    auto p1 = m1.predict_log2_proba(featurize(text, fc));
    auto p2 = m2.predict_log2_proba(featurize(text, fc));
    for (const auto& [old_label, new_label] : renaming) {
      CHECK(p1[vocab.id(old_label)] ==
            doctest::Approx(p2[vocab2.id(new_label)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("single-class data trains and predicts that class") {
  std::vector<LabeledExample> examples = {{"only one thing", "solo", Provenance::kSeed, {}},
                                          {"another thing", "solo", Provenance::kSeed, {}}};
  auto vocab = build_vocabulary(examples);
  TrainConfig config;
  config.epochs = 5;
  TaskModel model = train(examples, vocab, small_features(), config).model;
  CHECK(model.predict_argmax(featurize("whatever", small_features())) == 0);
}

TEST_CASE("evaluate on perfect and constant predictors") {
  FeatureConfig fc = small_features();
  std::vector<std::string> labels = {"a", "b"};
  // Bias model that always predicts a.
  TaskModel constant_a(LabelVocabulary(labels), fc, std::vector<double>(2 * fc.hash_dim, 0.0),
                       {1.0, 0.0});
  std::vector<LabeledExample> balanced = {{"t1", "a", Provenance::kSeed, {}},
                                          {"t2", "a", Provenance::kSeed, {}},
                                          {"t3", "b", Provenance::kSeed, {}},
                                          {"t4", "b", Provenance::kSeed, {}}};
  EvalResult eval = evaluate(constant_a, balanced);
  CHECK(eval.accuracy == doctest::Approx(0.5));
  CHECK(eval.per_intent_f1.at("a") == doctest::Approx(2.0 / 3.0));
  CHECK(eval.per_intent_f1.at("b") == doctest::Approx(0.0));

  std::vector<LabeledExample> all_a = {{"t1", "a", Provenance::kSeed, {}}};
  EvalResult perfect = evaluate(constant_a, all_a);
  CHECK(perfect.accuracy == doctest::Approx(1.0));
  CHECK(perfect.per_intent_f1.at("a") == doctest::Approx(1.0));
  // b has no gold and no predictions: defined 0 and flagged.
  CHECK(perfect.per_intent_f1.at("b") == doctest::Approx(0.0));
  REQUIRE(perfect.degenerate_intents.size() == 1);
  CHECK(perfect.degenerate_intents[0] == "b");

  CHECK_THROWS_AS(evaluate(constant_a, std::vector<LabeledExample>{}), CorpusError);
}

TEST_CASE("model JSON round-trip preserves predictions") {
  auto examples = separable_toy();
  auto vocab = build_vocabulary(examples);
  TrainConfig config;
  config.seed = 8;
  config.epochs = 5;
  FeatureConfig fc = small_features();
  TaskModel model = train(examples, vocab, fc, config).model;
  auto path = std::filesystem::temp_directory_path() / "icda_model.json";
  model.save_json(path.string());
  TaskModel loaded = TaskModel::load_json(path.string());
  CHECK(loaded.vocabulary().labels() == model.vocabulary().labels());
  for (const auto& text : {"red crimson", "blue azure", "unrelated"}) {
    CHECK(loaded.predict_log2_proba(featurize(text, fc)) ==
          model.predict_log2_proba(featurize(text, fc)));
  }
}
