#ifndef ICDA_GENERATOR_HPP
#define ICDA_GENERATOR_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "icda/corpus.hpp"

namespace icda {

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PromptSpec {
  std::string intent;                       // raw label, underscores intact
  std::vector<std::string> seed_examples;   // utterances of this intent, in order
};

// Template (fixed; see render_prompt):
//   Intent: <intent name, underscores rendered as spaces>
//   Example: <seed 1>
//   ...
//   Example: <seed n>
//   Example:
PromptSpec build_prompt(const std::string& intent, std::span<const LabeledExample> seeds);
std::string render_prompt(const PromptSpec& spec);
std::string intent_display_name(const std::string& intent);

struct DecodingConfig {
  double typical_tau = 0.9;
  double repetition_penalty = 1.1;
  int max_new_tokens = 64;
  std::vector<std::string> stop_sequences = {"\n"};
};

struct GenerationRequest {
  std::string prompt;
  int n = 1;
  DecodingConfig decoding;
  uint64_t seed = 0;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::vector<std::string> complete(const GenerationRequest& request) = 0;
};

/// POSTs {"prompt","n","typical_p","repetition_penalty","max_new_tokens","stop","seed"}
/// and expects {"completions": [...]}; retries transport failures with backoff.
class HttpBackend : public GenerationBackend {
 public:
  struct Options {
    std::string host = "localhost";
    int port = 8080;
    std::string path = "/generate";
    std::string auth_header;  // sent as Authorization when non-empty
    int max_retries = 3;
    int timeout_seconds = 60;
  };

  explicit HttpBackend(Options options) : options_(std::move(options)) {}
  std::vector<std::string> complete(const GenerationRequest& request) override;

 private:
  Options options_;
};

/// Offline stand-in for a PLM: crosses over word sequences from the prompting
/// intent's seed utterances, occasionally inserting a filler word the corpus
/// never used; with probability noise_rate draws from a different intent
/// instead. Deterministic given the request seed.
class MockBackend : public GenerationBackend {
 public:
  struct Completion {
    std::string text;
    std::string prompt_intent;
    std::string source_intent;  // differs from prompt_intent on noisy draws
  };

  MockBackend(std::span<const LabeledExample> corpus, double noise_rate);
  std::vector<std::string> complete(const GenerationRequest& request) override;

  const std::vector<Completion>& log() const { return log_; }
  void clear_log() { log_.clear(); }

 private:
  std::map<std::string, std::vector<std::string>> seeds_by_intent_;  // key: display name
  std::map<std::string, std::string> display_to_label_;
  double noise_rate_;
  std::vector<Completion> log_;
};

struct MultiplierPlan {
  int multiplier = 1;
  std::map<std::string, int> per_intent_targets;

  static MultiplierPlan from_seeds(std::span<const LabeledExample> seeds, int multiplier);
};

struct GenerationResult {
  std::vector<LabeledExample> examples;  // provenance = synthetic, sorted by (intent, arrival)
  size_t duplicates_dropped = 0;
  std::vector<std::string> warnings;     // per-intent shortfalls after retry budget
};

GenerationResult generate(GenerationBackend& backend, const MultiplierPlan& plan,
                          const std::map<std::string, PromptSpec>& prompts,
                          const DecodingConfig& decoding, uint64_t seed);

}  // namespace icda

#endif  // ICDA_GENERATOR_HPP
