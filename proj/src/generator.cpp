#include "icda/generator.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "icda/rng.hpp"
#include "icda/text.hpp"
#include "json.hpp"

namespace icda {

std::string intent_display_name(const std::string& intent) {
  std::string out = intent;
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

PromptSpec build_prompt(const std::string& intent, std::span<const LabeledExample> seeds) {
  if (seeds.empty()) throw GenerationError("build_prompt: no seed examples for " + intent);
  PromptSpec spec;
  spec.intent = intent;
  for (const auto& ex : seeds) {
    if (ex.label != intent) {
      throw GenerationError("build_prompt: seed labeled " + ex.label + " under intent " + intent);
    }
    spec.seed_examples.push_back(ex.text);
  }
  return spec;
}

std::string render_prompt(const PromptSpec& spec) {
  std::ostringstream out;
  out << "Intent: " << intent_display_name(spec.intent) << "\n";
  for (const auto& seed : spec.seed_examples) {
    out << "Example: " << seed << "\n";
  }
  out << "Example:";
  return out.str();
}

std::vector<std::string> HttpBackend::complete(const GenerationRequest& request) {
  nlohmann::ordered_json body;
  body["prompt"] = request.prompt;
  body["n"] = request.n;
  body["typical_p"] = request.decoding.typical_tau;
  body["repetition_penalty"] = request.decoding.repetition_penalty;
  body["max_new_tokens"] = request.decoding.max_new_tokens;
  body["stop"] = request.decoding.stop_sequences;
  body["seed"] = request.seed;
  std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
    }
    httplib::Client client(options_.host, options_.port);
    client.set_read_timeout(options_.timeout_seconds, 0);
    client.set_connection_timeout(options_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!options_.auth_header.empty()) {
      headers.emplace("Authorization", options_.auth_header);
    }
    auto res = client.Post(options_.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
      throw GenerationError("malformed backend response: " + res->body.substr(0, 200));
    }
    if (!parsed.contains("completions") || !parsed["completions"].is_array()) {
      throw GenerationError("backend response missing \"completions\": " +
                            res->body.substr(0, 200));
    }
    std::vector<std::string> completions;
    for (const auto& c : parsed["completions"]) {
      if (!c.is_string()) {
        throw GenerationError("non-string completion in backend response");
      }
      completions.push_back(c.get<std::string>());
    }
    return completions;
  }
  throw GenerationError("backend unreachable after " + std::to_string(options_.max_retries + 1) +
                        " attempts: " + last_error);
}

namespace {

constexpr double kFillerRate = 0.25;
constexpr double kDropRate = 0.25;
constexpr const char* kFillerWords[] = {
    "kindly", "asap",     "urgently", "btw",      "thanks", "hey",    "possibly", "soon",
    "maybe",  "exactly",  "somehow",  "honestly", "quick",  "ok",     "pls",      "really",
    "umm",    "actually", "perhaps",  "instead",  "also",   "anyway", "alright",  "surely",
    "folks",  "again",    "indeed",   "basically", "sorta", "roughly", "ideally", "stat"};

}  // namespace

MockBackend::MockBackend(std::span<const LabeledExample> corpus, double noise_rate)
    : noise_rate_(noise_rate) {
  if (corpus.empty()) throw GenerationError("mock backend needs a non-empty corpus");
  for (const auto& ex : corpus) {
    std::string display = intent_display_name(ex.label);
    seeds_by_intent_[display].push_back(ex.text);
    display_to_label_[display] = ex.label;
  }
}

std::vector<std::string> MockBackend::complete(const GenerationRequest& request) {
  // First prompt line is "Intent: <display name>".
  size_t eol = request.prompt.find('\n');
  std::string first = request.prompt.substr(0, eol);
  constexpr std::string_view kPrefix = "Intent: ";
  if (first.rfind(kPrefix, 0) != 0) {
    throw GenerationError("mock backend: prompt missing intent line");
  }
  std::string display = first.substr(kPrefix.size());
  auto it = seeds_by_intent_.find(display);
  if (it == seeds_by_intent_.end()) {
    throw GenerationError("mock backend: unknown intent \"" + display + "\"");
  }

  SplitMix64 rng(request.seed);
  std::vector<std::string> completions;
  for (int i = 0; i < request.n; ++i) {
    std::string source_display = display;
    if (noise_rate_ > 0.0 && rng.next_unit() < noise_rate_ && seeds_by_intent_.size() > 1) {
      size_t pick = rng.next_below(seeds_by_intent_.size() - 1);
      for (const auto& [name, texts] : seeds_by_intent_) {
        if (name == display) continue;
        if (pick == 0) {
          source_display = name;
          break;
        }
        --pick;
      }
    }
    const auto& pool = seeds_by_intent_.at(source_display);
    std::vector<std::string> a = tokenize(pool[rng.next_below(pool.size())]);
    std::vector<std::string> b = tokenize(pool[rng.next_below(pool.size())]);
    // Aligned crossover: prefix of one utterance, suffix of the other from the
    // same cut point, so output lengths match the pool's.
    size_t cut = 1 + rng.next_below(std::min(a.size(), b.size()));
    std::vector<std::string> words(a.begin(), a.begin() + cut);
    if (cut < b.size()) words.insert(words.end(), b.begin() + cut, b.end());
    // Paraphrasing noise: occasionally coin a word the pool never used, or
    // drop one, like a PLM rewording the examples.
    if (rng.next_unit() < kFillerRate) {
      const char* filler = kFillerWords[rng.next_below(std::size(kFillerWords))];
      words.insert(words.begin() + rng.next_below(words.size() + 1), filler);
    }
    if (words.size() > 2 && rng.next_unit() < kDropRate) {
      words.erase(words.begin() + rng.next_below(words.size()));
    }
    std::string text;
    for (size_t w = 0; w < words.size(); ++w) {
      if (w) text.push_back(' ');
      text += words[w];
    }
    completions.push_back(" " + text + "\n");
    log_.push_back({text, display_to_label_.at(display), display_to_label_.at(source_display)});
  }
  return completions;
}

MultiplierPlan MultiplierPlan::from_seeds(std::span<const LabeledExample> seeds, int multiplier) {
  if (multiplier <= 0) throw GenerationError("multiplier must be positive");
  MultiplierPlan plan;
  plan.multiplier = multiplier;
  for (const auto& [intent, count] : label_counts(seeds)) {
    plan.per_intent_targets[intent] = static_cast<int>(count) * multiplier;
  }
  return plan;
}

namespace {

std::string cleanup_completion(const std::string& raw, std::span<const std::string> stops) {
  std::string text = raw;
  for (const auto& stop : stops) {
    size_t pos = text.find(stop);
    if (pos != std::string::npos) text = text.substr(0, pos);
  }
  return trim(text);
}

}  // namespace

GenerationResult generate(GenerationBackend& backend, const MultiplierPlan& plan,
                          const std::map<std::string, PromptSpec>& prompts,
                          const DecodingConfig& decoding, uint64_t seed) {
  GenerationResult result;
  std::set<std::pair<std::string, std::string>> seen;  // (text, label)
  for (const auto& [intent, target] : plan.per_intent_targets) {
    auto prompt_it = prompts.find(intent);
    if (prompt_it == prompts.end()) {
      throw GenerationError("generate: no prompt for intent " + intent);
    }
    if (target <= 0) throw GenerationError("generate: non-positive target for " + intent);
    std::set<std::string> seed_texts(prompt_it->second.seed_examples.begin(),
                                     prompt_it->second.seed_examples.end());
    std::string rendered = render_prompt(prompt_it->second);

    int collected = 0;
    int max_requests = 16 + target;  // retry budget per intent
    int request_index = 0;
    std::vector<LabeledExample> accepted;
    while (collected < target && request_index < max_requests) {
      GenerationRequest request;
      request.prompt = rendered;
      request.n = std::min(target - collected + 4, 64);
      request.decoding = decoding;
      request.seed = derive_seed(seed, "gen:" + intent, static_cast<uint64_t>(request_index));
      ++request_index;
      std::vector<std::string> completions;
      try {
        completions = backend.complete(request);
      } catch (const GenerationError& e) {
        throw GenerationError(std::string(e.what()) + " (intent " + intent + ", collected " +
                              std::to_string(collected) + "/" + std::to_string(target) + ")");
      }
      for (const auto& raw : completions) {
        if (collected >= target) break;
        std::string text = cleanup_completion(raw, decoding.stop_sequences);
        if (text.empty()) continue;
        if (seed_texts.count(text) || seen.count({text, intent})) {
          ++result.duplicates_dropped;
          continue;
        }
        seen.insert({text, intent});
        LabeledExample ex;
        ex.text = text;
        ex.label = intent;
        ex.provenance = Provenance::kSynthetic;
        accepted.push_back(std::move(ex));
        ++collected;
      }
    }
    if (collected < target) {
      result.warnings.push_back("intent " + intent + ": generated " + std::to_string(collected) +
                                "/" + std::to_string(target) + " before exhausting retries");
    }
    result.examples.insert(result.examples.end(), accepted.begin(), accepted.end());
  }
  return result;
}

}  // namespace icda
