#include "icda/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "icda/rng.hpp"
#include "icda/text.hpp"
#include "json.hpp"

namespace icda {

namespace {

constexpr double kLog2E = 1.4426950408889634;

uint32_t hash_feature(std::string_view key, const FeatureConfig& config) {
  // hash_dim - 1 is reserved for the null token, so real tokens map into
  // [0, hash_dim - 2].
  return static_cast<uint32_t>(fnv1a64(key) % (config.hash_dim - 1));
}

std::vector<double> log_softmax(std::vector<double> scores) {
  double max_score = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - max_score);
  double lse = max_score + std::log(sum);
  for (double& s : scores) s -= lse;
  return scores;
}

}  // namespace

FeatureVector featurize(const std::string& text, const FeatureConfig& config) {
  std::vector<std::string> tokens = tokenize(text);
  std::vector<std::pair<uint32_t, double>> raw;
  raw.reserve(tokens.size() * 2);
  for (const auto& tok : tokens) {
    raw.emplace_back(hash_feature(tok, config), 1.0);
  }
  if (config.use_bigrams) {
    for (size_t i = 0; i + 1 < tokens.size(); ++i) {
      raw.emplace_back(hash_feature(tokens[i] + "\x1f" + tokens[i + 1], config), 1.0);
    }
  }
  std::sort(raw.begin(), raw.end());
  FeatureVector fv;
  for (const auto& [id, value] : raw) {
    if (!fv.entries.empty() && fv.entries.back().first == id) {
      fv.entries.back().second += value;
    } else {
      fv.entries.emplace_back(id, value);
    }
  }
  return fv;
}

FeatureVector featurize_null(const FeatureConfig& config) {
  FeatureVector fv;
  fv.entries.emplace_back(config.null_token_id(), 1.0);
  return fv;
}

TaskModel::TaskModel(LabelVocabulary vocabulary, FeatureConfig feature_config,
                     std::vector<double> weights, std::vector<double> bias)
    : vocabulary_(std::move(vocabulary)),
      feature_config_(feature_config),
      weights_(std::move(weights)),
      bias_(std::move(bias)) {
  if (weights_.size() != vocabulary_.size() * feature_config_.hash_dim ||
      bias_.size() != vocabulary_.size()) {
    throw CorpusError("task model shape mismatch");
  }
}

std::vector<double> TaskModel::scores(const FeatureVector& input) const {
  size_t num_labels = vocabulary_.size();
  std::vector<double> out(bias_.begin(), bias_.end());
  for (size_t l = 0; l < num_labels; ++l) {
    const double* row = weights_.data() + l * feature_config_.hash_dim;
    double acc = 0.0;
    for (const auto& [id, value] : input.entries) acc += row[id] * value;
    out[l] += acc;
  }
  return out;
}

std::vector<double> TaskModel::predict_log2_proba(const FeatureVector& input) const {
  std::vector<double> logp = log_softmax(scores(input));
  for (double& v : logp) v *= kLog2E;
  return logp;
}

size_t TaskModel::predict_argmax(const FeatureVector& input) const {
  std::vector<double> s = scores(input);
  size_t best = 0;
  for (size_t l = 1; l < s.size(); ++l) {
    if (s[l] > s[best]) best = l;
  }
  return best;
}

namespace detail {

double loss_and_gradient(std::span<const double> params, size_t num_labels, size_t hash_dim,
                         std::span<const FeatureVector* const> batch_features,
                         std::span<const size_t> batch_labels, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double* bias = params.data() + num_labels * hash_dim;
  double* grad_bias = grad.data() + num_labels * hash_dim;
  double total_loss = 0.0;
  size_t batch = batch_features.size();
  std::vector<double> scores(num_labels);
  for (size_t b = 0; b < batch; ++b) {
    const FeatureVector& fv = *batch_features[b];
    for (size_t l = 0; l < num_labels; ++l) {
      const double* row = params.data() + l * hash_dim;
      double acc = bias[l];
      for (const auto& [id, value] : fv.entries) acc += row[id] * value;
      scores[l] = acc;
    }
    std::vector<double> logp = log_softmax(scores);
    total_loss -= logp[batch_labels[b]];
    for (size_t l = 0; l < num_labels; ++l) {
      double coeff = (std::exp(logp[l]) - (l == batch_labels[b] ? 1.0 : 0.0)) /
                     static_cast<double>(batch);
      double* grow = grad.data() + l * hash_dim;
      for (const auto& [id, value] : fv.entries) grow[id] += coeff * value;
      grad_bias[l] += coeff;
    }
  }
  return total_loss / static_cast<double>(batch);
}

}  // namespace detail

TrainResult train(std::span<const LabeledExample> examples, const LabelVocabulary& vocabulary,
                  const FeatureConfig& feature_config, const TrainConfig& config,
                  bool null_mode) {
  if (examples.empty()) throw CorpusError("train: empty example list");
  size_t num_labels = vocabulary.size();
  size_t hash_dim = feature_config.hash_dim;
  size_t n = examples.size();

  FeatureVector null_fv = featurize_null(feature_config);
  std::vector<FeatureVector> features;
  std::vector<size_t> labels;
  features.reserve(n);
  labels.reserve(n);
  for (const auto& ex : examples) {
    features.push_back(null_mode ? null_fv : featurize(ex.text, feature_config));
    labels.push_back(vocabulary.id(ex.label));
  }

  size_t param_count = num_labels * hash_dim + num_labels;
  std::vector<double> params(param_count, 0.0);
  std::vector<double> grad(param_count, 0.0);
  std::vector<double> moment1(param_count, 0.0);
  std::vector<double> moment2(param_count, 0.0);

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::vector<double>> epoch_confidence;
  std::vector<std::vector<bool>> epoch_correct;

  size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    SplitMix64 rng(derive_seed(config.seed, "epoch", static_cast<uint64_t>(epoch)));
    shuffle(order, rng);
    for (size_t start = 0; start < n; start += static_cast<size_t>(config.batch_size)) {
      size_t end = std::min(n, start + static_cast<size_t>(config.batch_size));
      std::vector<const FeatureVector*> batch_features;
      std::vector<size_t> batch_labels;
      for (size_t i = start; i < end; ++i) {
        batch_features.push_back(&features[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      double loss = detail::loss_and_gradient(params, num_labels, hash_dim, batch_features,
                                              batch_labels, grad);
      if (!std::isfinite(loss)) {
        throw CorpusError("train: non-finite loss at epoch " + std::to_string(epoch) +
                          ", batch " + std::to_string(start / config.batch_size));
      }
      ++step;
      double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (size_t p = 0; p < param_count; ++p) {
        moment1[p] = config.beta1 * moment1[p] + (1.0 - config.beta1) * grad[p];
        moment2[p] = config.beta2 * moment2[p] + (1.0 - config.beta2) * grad[p] * grad[p];
        double mhat = moment1[p] / bc1;
        double vhat = moment2[p] / bc2;
        params[p] -= config.learning_rate *
                     (mhat / (std::sqrt(vhat) + config.adam_eps) + config.weight_decay * params[p]);
      }
    }

    if (config.record_dynamics) {
      std::vector<double> conf(n);
      std::vector<bool> correct(n);
      const double* bias = params.data() + num_labels * hash_dim;
      std::vector<double> scores(num_labels);
      for (size_t i = 0; i < n; ++i) {
        for (size_t l = 0; l < num_labels; ++l) {
          const double* row = params.data() + l * hash_dim;
          double acc = bias[l];
          for (const auto& [id, value] : features[i].entries) acc += row[id] * value;
          scores[l] = acc;
        }
        std::vector<double> logp = log_softmax(scores);
        conf[i] = std::exp(logp[labels[i]]);
        size_t best = 0;
        for (size_t l = 1; l < num_labels; ++l) {
          if (logp[l] > logp[best]) best = l;
        }
        correct[i] = (best == labels[i]);
      }
      epoch_confidence.push_back(std::move(conf));
      epoch_correct.push_back(std::move(correct));
    }
  }

  TrainResult result;
  std::vector<double> weights(params.begin(), params.begin() + num_labels * hash_dim);
  std::vector<double> bias(params.begin() + num_labels * hash_dim, params.end());
  result.model = TaskModel(vocabulary, feature_config, std::move(weights), std::move(bias));

  if (config.record_dynamics) {
    size_t epochs = epoch_confidence.size();
    result.dynamics.resize(n);
    for (size_t i = 0; i < n; ++i) {
      double mean = 0.0;
      double correct_frac = 0.0;
      for (size_t e = 0; e < epochs; ++e) {
        mean += epoch_confidence[e][i];
        correct_frac += epoch_correct[e][i] ? 1.0 : 0.0;
      }
      mean /= static_cast<double>(epochs);
      double var = 0.0;
      for (size_t e = 0; e < epochs; ++e) {
        double d = epoch_confidence[e][i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(epochs);
      result.dynamics[i] = {mean, std::sqrt(var), correct_frac / static_cast<double>(epochs)};
    }
  }
  return result;
}

EvalResult evaluate(const TaskModel& model, std::span<const LabeledExample> examples) {
  if (examples.empty()) throw CorpusError("evaluate: empty example list");
  const auto& vocab = model.vocabulary();
  size_t num_labels = vocab.size();
  std::vector<size_t> tp(num_labels, 0), fp(num_labels, 0), fn(num_labels, 0);
  size_t correct = 0;
  for (const auto& ex : examples) {
    size_t gold = vocab.id(ex.label);
    size_t pred = model.predict_argmax(featurize(ex.text, model.feature_config()));
    if (pred == gold) {
      ++correct;
      ++tp[gold];
    } else {
      ++fp[pred];
      ++fn[gold];
    }
  }
  EvalResult result;
  result.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  double f1_sum = 0.0;
  for (size_t l = 0; l < num_labels; ++l) {
    double denom = static_cast<double>(2 * tp[l] + fp[l] + fn[l]);
    double f1 = denom > 0.0 ? 2.0 * static_cast<double>(tp[l]) / denom : 0.0;
    if (denom == 0.0) result.degenerate_intents.push_back(vocab.label(l));
    result.per_intent_f1[vocab.label(l)] = f1;
    f1_sum += f1;
  }
  result.macro_f1 = f1_sum / static_cast<double>(num_labels);
  return result;
}

void TaskModel::save_json(const std::string& path) const {
  nlohmann::ordered_json obj;
  obj["version"] = 1;
  obj["feature_config"] = {{"hash_dim", feature_config_.hash_dim},
                           {"use_bigrams", feature_config_.use_bigrams}};
  obj["vocabulary"] = vocabulary_.labels();
  // Untouched weights stay exactly zero, so rows serialize sparsely.
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (size_t l = 0; l < vocabulary_.size(); ++l) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    const double* w = weights_.data() + l * feature_config_.hash_dim;
    for (uint32_t id = 0; id < feature_config_.hash_dim; ++id) {
      if (w[id] != 0.0) row.push_back({id, w[id]});
    }
    rows.push_back(std::move(row));
  }
  obj["weights"] = std::move(rows);
  obj["bias"] = bias_;
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path);
  out << obj.dump() << '\n';
}

TaskModel TaskModel::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path);
  nlohmann::json obj = nlohmann::json::parse(in);
  if (!obj.contains("version") || obj["version"].get<int>() != 1) {
    throw CorpusError(path + ": unsupported model version");
  }
  FeatureConfig fc;
  fc.hash_dim = obj["feature_config"]["hash_dim"].get<uint32_t>();
  fc.use_bigrams = obj["feature_config"]["use_bigrams"].get<bool>();
  LabelVocabulary vocab(obj["vocabulary"].get<std::vector<std::string>>());
  std::vector<double> weights(vocab.size() * fc.hash_dim, 0.0);
  const auto& rows = obj["weights"];
  for (size_t l = 0; l < rows.size(); ++l) {
    for (const auto& entry : rows[l]) {
      weights[l * fc.hash_dim + entry[0].get<uint32_t>()] = entry[1].get<double>();
    }
  }
  std::vector<double> bias = obj["bias"].get<std::vector<double>>();
  return TaskModel(std::move(vocab), fc, std::move(weights), std::move(bias));
}

}  // namespace icda
