#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "icda/pipeline.hpp"
#include "icda/rng.hpp"
#include "icda/toy.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace icda;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = "icda_out";
  std::optional<uint64_t> seed_override;
};

RunConfig load_config(const GlobalOpts& opts) {
  RunConfig config =
      opts.config_path.empty() ? RunConfig{} : parse_config_file(opts.config_path);
  if (opts.seed_override) config.seeds = {*opts.seed_override};
  return config;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& doc) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw PipelineError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void dump_seed_artifacts(const RunConfig& config, uint64_t seed, const fs::path& out_dir) {
  SeedArtifacts art = run_seed_prefix(config, seed);
  fs::create_directories(out_dir / "models");
  art.g_prime.save_json((out_dir / "models" / "g_prime.json").string());
  art.g_star.save_json((out_dir / "models" / "g_star.json").string());
  save_jsonl((out_dir / "synthetic.jsonl").string(), art.generation.examples);
  save_pvi_jsonl((out_dir / "pvi.jsonl").string(), art.synthetic_records);
  save_pvi_jsonl((out_dir / "validation_pvi.jsonl").string(), art.validation_records);
  save_jsonl((out_dir / "filtered.jsonl").string(), art.filtered, /*with_pvi=*/true);
}

int cmd_ingest(const GlobalOpts& opts) {
  RunConfig config = load_config(opts);
  Dataset ds = load_configured_corpus(config);
  std::cout << "corpus ok: " << ds.vocabulary.size() << " intents, " << ds.train.size()
            << " train / " << ds.validation.size() << " validation / " << ds.test.size()
            << " test examples\n";
  return 0;
}

int cmd_train(const GlobalOpts& opts) {
  RunConfig config = load_config(opts);
  uint64_t seed = config.seeds.front();
  Dataset full = load_configured_corpus(config);
  Dataset ds = config.shots > 0 ? few_shot_sample(full, static_cast<size_t>(config.shots),
                                                  derive_seed(seed, "sample"))
                                : full;
  TrainConfig prime = config.train_config;
  prime.seed = derive_seed(seed, "g_prime");
  TaskModel g_prime = train(ds.train, ds.vocabulary, config.feature_config, prime).model;
  TrainConfig star = config.train_config;
  star.seed = derive_seed(seed, "g_star");
  TaskModel g_star =
      train(ds.train, ds.vocabulary, config.feature_config, star, /*null_mode=*/true).model;
  fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir / "models");
  g_prime.save_json((out_dir / "models" / "g_prime.json").string());
  g_star.save_json((out_dir / "models" / "g_star.json").string());
  EvalResult eval = evaluate(g_prime, ds.test);
  std::cout << "baseline accuracy " << eval.accuracy << ", macro F1 " << eval.macro_f1 << "\n";
  return 0;
}

int cmd_generate(const GlobalOpts& opts) {
  RunConfig config = load_config(opts);
  uint64_t seed = config.seeds.front();
  Dataset full = load_configured_corpus(config);
  Dataset ds = config.shots > 0 ? few_shot_sample(full, static_cast<size_t>(config.shots),
                                                  derive_seed(seed, "sample"))
                                : full;
  auto backend = make_backend(config, ds);
  std::map<std::string, std::vector<LabeledExample>> by_intent;
  for (const auto& ex : ds.train) by_intent[ex.label].push_back(ex);
  std::map<std::string, PromptSpec> prompts;
  for (const auto& [intent, seeds_of] : by_intent) prompts[intent] = build_prompt(intent, seeds_of);
  MultiplierPlan plan = MultiplierPlan::from_seeds(ds.train, config.multiplier);
  GenerationResult result =
      generate(*backend, plan, prompts, config.decoding, derive_seed(seed, "generate"));
  fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);
  save_jsonl((out_dir / "synthetic.jsonl").string(), result.examples);
  std::cout << "generated " << result.examples.size() << " synthetic examples ("
            << result.duplicates_dropped << " duplicates dropped)\n";
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int cmd_score(const GlobalOpts& opts) {
  RunConfig config = load_config(opts);
  fs::path out_dir(opts.out_dir);
  for (const char* artifact : {"models/g_prime.json", "models/g_star.json", "synthetic.jsonl"}) {
    if (!fs::exists(out_dir / artifact)) {
      throw PipelineError("missing artifact " + (out_dir / artifact).string() +
                          " (run `train` and `generate` first)");
    }
  }
  TaskModel g_prime = TaskModel::load_json((out_dir / "models" / "g_prime.json").string());
  TaskModel g_star = TaskModel::load_json((out_dir / "models" / "g_star.json").string());
  std::vector<LabeledExample> synthetic =
      load_jsonl((out_dir / "synthetic.jsonl").string(), Provenance::kSynthetic);
  auto records = compute_pvi_batch(g_prime, g_star, synthetic);
  save_pvi_jsonl((out_dir / "pvi.jsonl").string(), records);

  uint64_t seed = config.seeds.front();
  Dataset full = load_configured_corpus(config);
  Dataset ds = config.shots > 0 ? few_shot_sample(full, static_cast<size_t>(config.shots),
                                                  derive_seed(seed, "sample"))
                                : full;
  auto validation_records = compute_pvi_batch(g_prime, g_star, ds.validation);
  save_pvi_jsonl((out_dir / "validation_pvi.jsonl").string(), validation_records);
  std::cout << "scored " << records.size() << " synthetic and " << validation_records.size()
            << " validation examples\n";
  return 0;
}

int cmd_filter(const GlobalOpts& opts) {
  RunConfig config = load_config(opts);
  fs::path out_dir(opts.out_dir);
  for (const char* artifact : {"pvi.jsonl", "validation_pvi.jsonl"}) {
    if (!fs::exists(out_dir / artifact)) {
      throw PipelineError("missing artifact " + (out_dir / artifact).string() +
                          " (run `score` first)");
    }
  }
  auto records = load_pvi_jsonl((out_dir / "pvi.jsonl").string());
  auto validation_records = load_pvi_jsonl((out_dir / "validation_pvi.jsonl").string());
  ThresholdPolicy policy = estimate_thresholds(validation_records, config.threshold_kind);
  auto filtered = filter_records(records, policy, config.filter_mode);
  save_jsonl((out_dir / "filtered.jsonl").string(), filtered, /*with_pvi=*/true);
  std::cout << "retained " << filtered.size() << "/" << records.size() << " examples\n";
  return 0;
}

int cmd_augment(const GlobalOpts& opts) {
  RunConfig config = load_config(opts);
  RunReport report = run_icda(config);
  fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);
  write_json(out_dir / "report.json", report.to_json());
  dump_seed_artifacts(config, config.seeds.front(), out_dir);
  std::cout << "mean accuracy " << report.mean_accuracy << " over " << config.seeds.size()
            << " seed(s); artifacts in " << out_dir.string() << "\n";
  return 0;
}

int cmd_ablate(const GlobalOpts& opts, const std::vector<std::string>& arm_names) {
  RunConfig config = load_config(opts);
  std::vector<std::string> names = arm_names;
  if (names.empty()) {
    names = {"all",        "all_relabeled",   "global_high",
             "global_low", "per_intent_high", "per_intent_low"};
  }
  std::vector<ArmSpec> arms;
  for (const auto& name : names) arms.push_back(parse_arm(name));
  AblationReport report = run_ablation(config, arms);
  fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);
  write_json(out_dir / "ablation.json", report.to_json());
  for (const auto& arm : report.arms) {
    std::cout << arm.arm << ": " << arm.mean_accuracy << " +/- " << arm.std_accuracy << "\n";
  }
  return 0;
}

int cmd_diversity(const GlobalOpts& opts) {
  RunConfig config = load_config(opts);
  SeedArtifacts art = run_seed_prefix(config, config.seeds.front());
  std::vector<std::string> seed_texts, synthetic_texts, reference;
  for (const auto& ex : art.dataset.train) seed_texts.push_back(ex.text);
  for (const auto& ex : art.generation.examples) synthetic_texts.push_back(ex.text);
  for (const auto& ex : art.dataset.test) reference.push_back(ex.text);
  NgramLanguageModel lm =
      NgramLanguageModel::train(reference, config.ngram_order, config.ngram_delta);
  auto to_json = [](const DiversityReport& d) {
    nlohmann::ordered_json j;
    j["distinct1"] = d.distinct1;
    j["distinct2"] = d.distinct2;
    j["self_bleu"] = d.self_bleu;
    j["perplexity"] = d.perplexity;
    j["corpus_size"] = d.corpus_size;
    return j;
  };
  nlohmann::ordered_json doc;
  doc["seed"] = to_json(diversity_report(seed_texts, lm));
  doc["synthetic"] = to_json(diversity_report(synthetic_texts, lm));
  std::cout << doc.dump(2) << "\n";
  write_json(fs::path(opts.out_dir) / "diversity.json", doc);
  return 0;
}

int cmd_selectors(const GlobalOpts& opts, const std::string& method_name) {
  RunConfig config = load_config(opts);
  uint64_t seed = config.seeds.front();
  SeedArtifacts art = run_seed_prefix(config, seed);
  ArmSpec method = parse_arm("uncertainty_" + method_name);
  TrainConfig cv_config = config.train_config;
  cv_config.seed = derive_seed(seed, "cv");
  CrossValResult cv =
      cross_val_scores(art.generation.examples, art.dataset.vocabulary, config.feature_config,
                       method.method, cv_config, config.cv_folds);
  fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "selector_scores.jsonl");
  for (const auto& s : cv.scores) {
    nlohmann::ordered_json obj;
    obj["text"] = art.generation.examples[s.example_index].text;
    obj["label"] = art.generation.examples[s.example_index].label;
    obj["method"] = uncertainty_method_name(s.method);
    obj["score"] = s.score;
    out << obj.dump() << '\n';
  }
  std::cout << "wrote " << cv.scores.size() << " uncertainty scores ("
            << (cv.stratified ? "stratified" : "unstratified") << " folds)\n";
  return 0;
}

int cmd_report(const GlobalOpts& opts) {
  fs::path path = fs::path(opts.out_dir) / "report.json";
  std::ifstream in(path);
  if (!in) throw PipelineError("missing artifact " + path.string() + " (run `augment` first)");
  nlohmann::json doc = nlohmann::json::parse(in);
  std::cout << "config " << doc.value("config_hash", std::string("?")) << ", backend "
            << doc.value("backend", std::string("?")) << "\n";
  for (const auto& s : doc["per_seed"]) {
    std::cout << "  seed " << s["seed"] << ": accuracy " << s["accuracy"] << ", retained "
              << s["retained"] << "/" << (s["retained"].get<size_t>() + s["dropped"].get<size_t>())
              << "\n";
  }
  std::cout << "mean accuracy " << doc["mean_accuracy"] << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"In-context data augmentation for intent detection with PVI filtering"};
  app.require_subcommand(1);

  GlobalOpts opts;
  app.add_option("--config", opts.config_path, "Run configuration file (key = value lines)");
  app.add_option("--out-dir", opts.out_dir, "Artifact output directory");
  uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "Override configured seeds with one seed");

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus directory");
  auto* train_cmd = app.add_subcommand("train", "Train and save baseline g' and g* models");
  auto* generate_cmd = app.add_subcommand("generate", "Generate synthetic examples");
  auto* score = app.add_subcommand("score", "Compute PVI for generated examples");
  auto* filter = app.add_subcommand("filter", "Filter scored examples by threshold policy");
  auto* augment = app.add_subcommand("augment", "Run the full augmentation pipeline");
  auto* ablate = app.add_subcommand("ablate", "Compare selection strategies");
  std::vector<std::string> arm_names;
  ablate->add_option("--arm", arm_names, "Ablation arm (repeatable)");
  auto* diversity = app.add_subcommand("diversity", "Diversity metrics for seed vs synthetic");
  auto* selectors_cmd = app.add_subcommand("selectors", "Cross-validated uncertainty scores");
  std::string method_name = "prediction_entropy";
  selectors_cmd->add_option("--method", method_name,
                            "least_confidence|prediction_entropy|breaking_ties|contrastive_al");
  auto* report_cmd = app.add_subcommand("report", "Summarize a previous augment run");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) opts.seed_override = seed_flag;

  try {
    if (ingest->parsed()) return cmd_ingest(opts);
    if (train_cmd->parsed()) return cmd_train(opts);
    if (generate_cmd->parsed()) return cmd_generate(opts);
    if (score->parsed()) return cmd_score(opts);
    if (filter->parsed()) return cmd_filter(opts);
    if (augment->parsed()) return cmd_augment(opts);
    if (ablate->parsed()) return cmd_ablate(opts, arm_names);
    if (diversity->parsed()) return cmd_diversity(opts);
    if (selectors_cmd->parsed()) return cmd_selectors(opts, method_name);
    if (report_cmd->parsed()) return cmd_report(opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
