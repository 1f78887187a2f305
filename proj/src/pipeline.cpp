#include "icda/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "icda/rng.hpp"
#include "icda/text.hpp"
#include "icda/toy.hpp"

namespace icda {

namespace {

std::vector<std::string> texts_of(std::span<const LabeledExample> examples) {
  std::vector<std::string> texts;
  texts.reserve(examples.size());
  for (const auto& ex : examples) texts.push_back(ex.text);
  return texts;
}

// D_train ∪ selected synthetics with (text, label) pairs deduplicated.
std::vector<LabeledExample> augmented_train_set(std::span<const LabeledExample> seed_train,
                                                std::span<const LabeledExample> selected) {
  std::vector<LabeledExample> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& ex : seed_train) {
    if (seen.insert({ex.text, ex.label}).second) out.push_back(ex);
  }
  for (const auto& ex : selected) {
    if (seen.insert({ex.text, ex.label}).second) out.push_back(ex);
  }
  return out;
}

double mean_of(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

double std_of(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  double m = mean_of(values);
  double var = 0.0;
  for (double v : values) var += (v - m) * (v - m);
  return std::sqrt(var / static_cast<double>(values.size()));
}

}  // namespace

int resolve_multiplier(const std::string& name, bool few_shot) {
  if (!name.empty() && std::all_of(name.begin(), name.end(),
                                   [](unsigned char c) { return std::isdigit(c); })) {
    int value = std::stoi(name);
    if (value <= 0) throw PipelineError("multiplier must be positive: " + name);
    return value;
  }
  std::string upper;
  for (char c : name) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (few_shot) {
    if (upper == "XS") return 1;
    if (upper == "S") return 4;
    if (upper == "M") return 16;
    if (upper == "L") return 64;
    if (upper == "XL") return 128;
  } else {
    if (upper == "S") return 1;
    if (upper == "M") return 2;
    if (upper == "L") return 4;
  }
  throw PipelineError("unknown multiplier name \"" + name + "\" for " +
                      (few_shot ? "few-shot" : "full-shot") + " runs");
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig config;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw PipelineError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    kv[trim(stripped.substr(0, eq))] = trim(stripped.substr(eq + 1));
  }

  auto take = [&](const char* key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string value = it->second;
    kv.erase(it);
    return value;
  };

  if (auto v = take("corpus_dir")) config.corpus_dir = *v;
  if (auto v = take("shots")) config.shots = (*v == "full") ? 0 : std::stoi(*v);
  if (auto v = take("multiplier")) config.multiplier = resolve_multiplier(*v, config.shots > 0);
  if (auto v = take("threshold_kind")) {
    if (*v == "global") config.threshold_kind = ThresholdKind::kGlobal;
    else if (*v == "per_intent") config.threshold_kind = ThresholdKind::kPerIntent;
    else throw PipelineError(origin + ": threshold_kind must be global or per_intent");
  }
  if (auto v = take("filter_mode")) {
    if (*v == "high") config.filter_mode = FilterMode::kHighPvi;
    else if (*v == "low") config.filter_mode = FilterMode::kLowPvi;
    else throw PipelineError(origin + ": filter_mode must be high or low");
  }
  if (auto v = take("backend")) {
    if (*v == "mock") config.backend.kind = BackendSpec::Kind::kMock;
    else if (*v == "http") config.backend.kind = BackendSpec::Kind::kHttp;
    else throw PipelineError(origin + ": backend must be mock or http");
  }
  if (auto v = take("noise_rate")) config.backend.noise_rate = std::stod(*v);
  if (auto v = take("http_host")) config.backend.http.host = *v;
  if (auto v = take("http_port")) config.backend.http.port = std::stoi(*v);
  if (auto v = take("http_path")) config.backend.http.path = *v;
  if (auto v = take("epochs")) config.train_config.epochs = std::stoi(*v);
  if (auto v = take("batch_size")) config.train_config.batch_size = std::stoi(*v);
  if (auto v = take("learning_rate")) config.train_config.learning_rate = std::stod(*v);
  if (auto v = take("weight_decay")) config.train_config.weight_decay = std::stod(*v);
  if (auto v = take("hash_dim")) config.feature_config.hash_dim = static_cast<uint32_t>(std::stoul(*v));
  if (auto v = take("use_bigrams")) config.feature_config.use_bigrams = (*v == "true" || *v == "1");
  if (auto v = take("typical_tau")) config.decoding.typical_tau = std::stod(*v);
  if (auto v = take("repetition_penalty")) config.decoding.repetition_penalty = std::stod(*v);
  if (auto v = take("max_new_tokens")) config.decoding.max_new_tokens = std::stoi(*v);
  if (auto v = take("ngram_order")) config.ngram_order = std::stoul(*v);
  if (auto v = take("ngram_delta")) config.ngram_delta = std::stod(*v);
  if (auto v = take("cv_folds")) config.cv_folds = std::stoul(*v);
  if (auto v = take("selection_fraction")) config.selection_fraction = std::stod(*v);
  if (auto v = take("seeds")) {
    config.seeds.clear();
    std::istringstream seed_in(*v);
    std::string item;
    while (std::getline(seed_in, item, ',')) {
      if (!trim(item).empty()) config.seeds.push_back(std::stoull(trim(item)));
    }
    if (config.seeds.empty()) throw PipelineError(origin + ": seeds list empty");
  }
  if (!kv.empty()) {
    throw PipelineError(origin + ": unknown config key \"" + kv.begin()->first + "\"");
  }
  if (config.decoding.typical_tau <= 0.0 || config.decoding.typical_tau > 1.0) {
    throw PipelineError(origin + ": typical_tau must be in (0, 1]");
  }
  if (config.decoding.repetition_penalty < 1.0) {
    throw PipelineError(origin + ": repetition_penalty must be >= 1");
  }
  return config;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string canonical_config_string(const RunConfig& c) {
  std::ostringstream out;
  out << "corpus_dir=" << c.corpus_dir << ";shots=" << c.shots << ";multiplier=" << c.multiplier
      << ";threshold=" << (c.threshold_kind == ThresholdKind::kGlobal ? "global" : "per_intent")
      << ";mode=" << (c.filter_mode == FilterMode::kHighPvi ? "high" : "low")
      << ";backend=" << (c.backend.kind == BackendSpec::Kind::kMock ? "mock" : "http")
      << ";noise=" << c.backend.noise_rate << ";epochs=" << c.train_config.epochs
      << ";batch=" << c.train_config.batch_size << ";lr=" << c.train_config.learning_rate
      << ";wd=" << c.train_config.weight_decay << ";hash_dim=" << c.feature_config.hash_dim
      << ";bigrams=" << c.feature_config.use_bigrams << ";tau=" << c.decoding.typical_tau
      << ";rep=" << c.decoding.repetition_penalty << ";ngram=" << c.ngram_order
      << ";delta=" << c.ngram_delta << ";folds=" << c.cv_folds
      << ";fraction=" << c.selection_fraction << ";seeds=";
  for (uint64_t s : c.seeds) out << s << ",";
  return out.str();
}

std::string config_hash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config_string(config))));
  return buf;
}

Dataset load_configured_corpus(const RunConfig& config) {
  if (config.corpus_dir.empty()) return make_toy_corpus();
  return load_corpus_dir(config.corpus_dir);
}

std::unique_ptr<GenerationBackend> make_backend(const RunConfig& config, const Dataset& dataset) {
  if (config.backend.kind == BackendSpec::Kind::kMock) {
    return std::make_unique<MockBackend>(dataset.train, config.backend.noise_rate);
  }
  HttpBackend::Options options = config.backend.http;
  if (const char* token = std::getenv("ICDA_BACKEND_TOKEN")) {
    options.auth_header = std::string("Bearer ") + token;
  }
  return std::make_unique<HttpBackend>(std::move(options));
}

SeedArtifacts run_seed_prefix(const RunConfig& config, uint64_t seed,
                              GenerationBackend* backend) {
  SeedArtifacts art;
  Dataset full = load_configured_corpus(config);
  art.dataset = config.shots > 0
                    ? few_shot_sample(full, static_cast<size_t>(config.shots),
                                      derive_seed(seed, "sample"))
                    : full;

  TrainConfig prime_config = config.train_config;
  prime_config.seed = derive_seed(seed, "g_prime");
  art.g_prime = train(art.dataset.train, art.dataset.vocabulary, config.feature_config,
                      prime_config).model;

  TrainConfig star_config = config.train_config;
  star_config.seed = derive_seed(seed, "g_star");
  art.g_star = train(art.dataset.train, art.dataset.vocabulary, config.feature_config,
                     star_config, /*null_mode=*/true).model;

  std::map<std::string, PromptSpec> prompts;
  std::map<std::string, std::vector<LabeledExample>> by_intent;
  for (const auto& ex : art.dataset.train) by_intent[ex.label].push_back(ex);
  for (const auto& [intent, seeds_of_intent] : by_intent) {
    prompts[intent] = build_prompt(intent, seeds_of_intent);
  }
  MultiplierPlan plan = MultiplierPlan::from_seeds(art.dataset.train, config.multiplier);

  std::unique_ptr<GenerationBackend> owned;
  if (backend == nullptr) {
    // The mock draws from the full corpus, not just the sampled shots: like a
    // real PLM it can produce phrasings the prompt never showed.
    owned = make_backend(config, full);
    backend = owned.get();
  }
  art.generation = generate(*backend, plan, prompts, config.decoding,
                            derive_seed(seed, "generate"));

  art.synthetic_records = compute_pvi_batch(art.g_prime, art.g_star, art.generation.examples);
  art.validation_records =
      compute_pvi_batch(art.g_prime, art.g_star, art.dataset.validation);
  art.policy = estimate_thresholds(art.validation_records, config.threshold_kind);
  art.filtered = filter_records(art.synthetic_records, art.policy, config.filter_mode);
  return art;
}

RunReport run_icda(const RunConfig& config, GenerationBackend* backend) {
  if (config.seeds.empty()) throw PipelineError("run_icda: no seeds configured");
  RunReport report;
  report.config_hash = config_hash(config);
  report.backend_description =
      config.backend.kind == BackendSpec::Kind::kMock
          ? "mock(noise_rate=" + std::to_string(config.backend.noise_rate) + ")"
          : "http://" + config.backend.http.host + ":" + std::to_string(config.backend.http.port) +
                config.backend.http.path;

  for (uint64_t seed : config.seeds) {
    SeedArtifacts art = run_seed_prefix(config, seed, backend);

    std::vector<LabeledExample> final_train =
        augmented_train_set(art.dataset.train, art.filtered);
    TrainConfig final_config = config.train_config;
    final_config.seed = derive_seed(seed, "final");
    TaskModel final_model =
        train(final_train, art.dataset.vocabulary, config.feature_config, final_config).model;
    EvalResult eval = evaluate(final_model, art.dataset.test);

    SeedOutcome outcome;
    outcome.seed = seed;
    outcome.accuracy = eval.accuracy;
    outcome.macro_f1 = eval.macro_f1;
    outcome.per_intent_f1 = eval.per_intent_f1;
    outcome.synthetic_generated = art.generation.examples.size();
    outcome.duplicates_dropped = art.generation.duplicates_dropped;
    outcome.retained = art.filtered.size();
    outcome.dropped = art.synthetic_records.size() - art.filtered.size();
    outcome.warnings = art.generation.warnings;
    if (art.filtered.empty()) {
      outcome.warnings.push_back("empty augmentation: final model trained on seed data only");
    }

    std::map<std::string, std::pair<double, size_t>> pvi_acc;
    for (const auto& r : art.synthetic_records) {
      auto& acc = pvi_acc[r.example.label];
      acc.first += r.pvi;
      acc.second += 1;
    }
    for (const auto& [intent, acc] : pvi_acc) {
      outcome.mean_pvi_per_intent[intent] = acc.first / static_cast<double>(acc.second);
    }

    NgramLanguageModel lm = NgramLanguageModel::train(texts_of(art.dataset.test),
                                                      config.ngram_order, config.ngram_delta);
    outcome.diversity.seed = diversity_report(texts_of(art.dataset.train), lm);
    if (art.generation.examples.size() >= 2) {
      // Size-match the synthetic corpus to the seed corpus so distinct-n and
      // self-BLEU compare diversity, not corpus size.
      std::vector<std::string> synthetic_texts = texts_of(art.generation.examples);
      if (synthetic_texts.size() > art.dataset.train.size()) {
        SplitMix64 sample_rng(derive_seed(seed, "diversity_sample"));
        shuffle(synthetic_texts, sample_rng);
        synthetic_texts.resize(art.dataset.train.size());
      }
      outcome.diversity.synthetic = diversity_report(synthetic_texts, lm);
    }
    report.per_seed.push_back(std::move(outcome));
  }

  std::vector<double> accs, f1s;
  for (const auto& o : report.per_seed) {
    accs.push_back(o.accuracy);
    f1s.push_back(o.macro_f1);
  }
  report.mean_accuracy = mean_of(accs);
  report.mean_macro_f1 = mean_of(f1s);
  return report;
}

std::string ArmSpec::name() const {
  switch (kind) {
    case ArmKind::kAll: return "all";
    case ArmKind::kAllRelabeled: return "all_relabeled";
    case ArmKind::kGlobalHigh: return "global_high";
    case ArmKind::kGlobalLow: return "global_low";
    case ArmKind::kPerIntentHigh: return "per_intent_high";
    case ArmKind::kPerIntentLow: return "per_intent_low";
    case ArmKind::kCartography:
      return std::string("cartography_") + cartography_category_name(category);
    case ArmKind::kUncertainty:
      return std::string("uncertainty_") + uncertainty_method_name(method);
    case ArmKind::kRandom: return "random";
  }
  return "unknown";
}

ArmSpec parse_arm(const std::string& name) {
  ArmSpec spec;
  if (name == "all") { spec.kind = ArmKind::kAll; return spec; }
  if (name == "all_relabeled") { spec.kind = ArmKind::kAllRelabeled; return spec; }
  if (name == "global_high") { spec.kind = ArmKind::kGlobalHigh; return spec; }
  if (name == "global_low") { spec.kind = ArmKind::kGlobalLow; return spec; }
  if (name == "per_intent_high") { spec.kind = ArmKind::kPerIntentHigh; return spec; }
  if (name == "per_intent_low") { spec.kind = ArmKind::kPerIntentLow; return spec; }
  if (name == "random") { spec.kind = ArmKind::kRandom; return spec; }
  const std::string carto = "cartography_";
  if (name.rfind(carto, 0) == 0) {
    spec.kind = ArmKind::kCartography;
    std::string cat = name.substr(carto.size());
    if (cat == "easy_to_learn") spec.category = CartographyCategory::kEasyToLearn;
    else if (cat == "ambiguous") spec.category = CartographyCategory::kAmbiguous;
    else if (cat == "hard_to_learn") spec.category = CartographyCategory::kHardToLearn;
    else if (cat == "low_correctness") spec.category = CartographyCategory::kLowCorrectness;
    else throw PipelineError("unknown cartography category: " + cat);
    return spec;
  }
  const std::string unc = "uncertainty_";
  if (name.rfind(unc, 0) == 0) {
    spec.kind = ArmKind::kUncertainty;
    std::string method = name.substr(unc.size());
    if (method == "least_confidence") spec.method = UncertaintyMethod::kLeastConfidence;
    else if (method == "prediction_entropy") spec.method = UncertaintyMethod::kPredictionEntropy;
    else if (method == "breaking_ties") spec.method = UncertaintyMethod::kBreakingTies;
    else if (method == "contrastive_al") spec.method = UncertaintyMethod::kContrastiveAl;
    else throw PipelineError("unknown uncertainty method: " + method);
    return spec;
  }
  throw PipelineError("unknown ablation arm: " + name);
}

AblationReport run_ablation(const RunConfig& config, const std::vector<ArmSpec>& arms,
                            GenerationBackend* backend) {
  if (arms.empty()) throw PipelineError("run_ablation: no arms");
  AblationReport report;
  report.seeds = config.seeds;
  report.config_hash = config_hash(config);
  report.arms.resize(arms.size());
  for (size_t a = 0; a < arms.size(); ++a) report.arms[a].arm = arms[a].name();

  Dataset full = load_configured_corpus(config);

  for (uint64_t seed : config.seeds) {
    // One generation shared by every arm of this seed.
    SeedArtifacts art = run_seed_prefix(config, seed, backend);

    std::optional<TaskModel> oracle;
    std::optional<std::vector<TrainingDynamicsRecord>> synthetic_dynamics;

    for (size_t a = 0; a < arms.size(); ++a) {
      const ArmSpec& arm = arms[a];
      std::vector<LabeledExample> selected;
      switch (arm.kind) {
        case ArmKind::kAll:
          selected = art.generation.examples;
          break;
        case ArmKind::kAllRelabeled: {
          if (!oracle) {
            TrainConfig oracle_config = config.train_config;
            oracle_config.seed = derive_seed(seed, "oracle");
            oracle = train(full.train, full.vocabulary, config.feature_config,
                           oracle_config).model;
          }
          selected = relabel(*oracle, art.generation.examples).examples;
          break;
        }
        case ArmKind::kGlobalHigh:
        case ArmKind::kGlobalLow: {
          ThresholdPolicy policy =
              estimate_thresholds(art.validation_records, ThresholdKind::kGlobal);
          selected = filter_records(art.synthetic_records, policy,
                                    arm.kind == ArmKind::kGlobalHigh ? FilterMode::kHighPvi
                                                                     : FilterMode::kLowPvi);
          break;
        }
        case ArmKind::kPerIntentHigh:
        case ArmKind::kPerIntentLow: {
          ThresholdPolicy policy =
              estimate_thresholds(art.validation_records, ThresholdKind::kPerIntent);
          selected = filter_records(art.synthetic_records, policy,
                                    arm.kind == ArmKind::kPerIntentHigh ? FilterMode::kHighPvi
                                                                        : FilterMode::kLowPvi);
          break;
        }
        case ArmKind::kCartography: {
          if (!synthetic_dynamics) {
            // Seed examples first, then the synthetic pool in generation
            // order, so dynamics indices map back to generation.examples.
            std::vector<LabeledExample> pool = art.dataset.train;
            pool.insert(pool.end(), art.generation.examples.begin(),
                        art.generation.examples.end());
            TrainConfig dyn_config = config.train_config;
            dyn_config.seed = derive_seed(seed, "dynamics");
            dyn_config.record_dynamics = true;
            TrainResult dyn = train(pool, art.dataset.vocabulary, config.feature_config,
                                    dyn_config);
            // Dynamics of the synthetic portion only (pool order keeps seed
            // examples first).
            synthetic_dynamics = std::vector<TrainingDynamicsRecord>(
                dyn.dynamics.begin() + static_cast<long>(art.dataset.train.size()),
                dyn.dynamics.end());
          }
          auto labels = cartography(*synthetic_dynamics,
                                    static_cast<size_t>(config.train_config.epochs),
                                    config.cartography_thresholds);
          for (size_t idx : select_category(labels, arm.category)) {
            selected.push_back(art.generation.examples[idx]);
          }
          break;
        }
        case ArmKind::kUncertainty: {
          TrainConfig cv_config = config.train_config;
          cv_config.seed = derive_seed(seed, "cv");
          CrossValResult cv =
              cross_val_scores(art.generation.examples, art.dataset.vocabulary,
                               config.feature_config, arm.method, cv_config, config.cv_folds);
          for (size_t idx : select_fraction(cv.scores, arm.fraction,
                                            SelectionStrategy::kTopScore)) {
            selected.push_back(art.generation.examples[idx]);
          }
          break;
        }
        case ArmKind::kRandom: {
          std::vector<UncertaintyScore> dummy(art.generation.examples.size());
          for (size_t i = 0; i < dummy.size(); ++i) dummy[i].example_index = i;
          for (size_t idx : select_fraction(dummy, arm.fraction, SelectionStrategy::kRandom,
                                            derive_seed(seed, "random_arm"))) {
            selected.push_back(art.generation.examples[idx]);
          }
          break;
        }
      }

      std::vector<LabeledExample> final_train =
          augmented_train_set(art.dataset.train, selected);
      TrainConfig final_config = config.train_config;
      final_config.seed = derive_seed(seed, "final");
      TaskModel final_model =
          train(final_train, art.dataset.vocabulary, config.feature_config, final_config).model;
      EvalResult eval = evaluate(final_model, art.dataset.test);
      report.arms[a].per_seed_accuracy.push_back(eval.accuracy);
      report.arms[a].per_seed_selected.push_back(selected.size());
    }
  }

  for (auto& arm : report.arms) {
    arm.mean_accuracy = mean_of(arm.per_seed_accuracy);
    arm.std_accuracy = std_of(arm.per_seed_accuracy);
  }
  return report;
}

nlohmann::ordered_json RunReport::to_json() const {
  nlohmann::ordered_json root;
  root["config_hash"] = config_hash;
  root["prompt_template_version"] = prompt_template_version;
  root["backend"] = backend_description;
  nlohmann::ordered_json seeds_json = nlohmann::ordered_json::array();
  for (const auto& o : per_seed) {
    nlohmann::ordered_json s;
    s["seed"] = o.seed;
    s["accuracy"] = o.accuracy;
    s["macro_f1"] = o.macro_f1;
    s["per_intent_f1"] = o.per_intent_f1;
    s["mean_pvi_per_intent"] = o.mean_pvi_per_intent;
    s["synthetic_generated"] = o.synthetic_generated;
    s["duplicates_dropped"] = o.duplicates_dropped;
    s["retained"] = o.retained;
    s["dropped"] = o.dropped;
    auto diversity_json = [](const DiversityReport& d) {
      nlohmann::ordered_json j;
      j["distinct1"] = d.distinct1;
      j["distinct2"] = d.distinct2;
      j["self_bleu"] = d.self_bleu;
      j["perplexity"] = d.perplexity;
      j["corpus_size"] = d.corpus_size;
      return j;
    };
    s["diversity"] = {{"seed", diversity_json(o.diversity.seed)},
                      {"synthetic", diversity_json(o.diversity.synthetic)}};
    s["warnings"] = o.warnings;
    seeds_json.push_back(std::move(s));
  }
  root["per_seed"] = std::move(seeds_json);
  root["mean_accuracy"] = mean_accuracy;
  root["mean_macro_f1"] = mean_macro_f1;
  return root;
}

nlohmann::ordered_json AblationReport::to_json() const {
  nlohmann::ordered_json root;
  root["config_hash"] = config_hash;
  root["seeds"] = seeds;
  nlohmann::ordered_json arms_json = nlohmann::ordered_json::array();
  for (const auto& arm : arms) {
    nlohmann::ordered_json a;
    a["arm"] = arm.arm;
    a["per_seed_accuracy"] = arm.per_seed_accuracy;
    a["per_seed_selected"] = arm.per_seed_selected;
    a["mean_accuracy"] = arm.mean_accuracy;
    a["std_accuracy"] = arm.std_accuracy;
    arms_json.push_back(std::move(a));
  }
  root["arms"] = std::move(arms_json);
  return root;
}

}  // namespace icda
