#ifndef ICDA_CORPUS_HPP
#define ICDA_CORPUS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace icda {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Provenance { kSeed, kSynthetic };

struct LabeledExample {
  std::string text;
  std::string label;
  Provenance provenance = Provenance::kSeed;
  std::optional<double> pvi;
};

/// Ordered label set with a label <-> integer id bijection.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::vector<std::string> sorted_labels);

  size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(size_t id) const { return labels_.at(id); }
  std::optional<size_t> find(const std::string& label) const;
  size_t id(const std::string& label) const;  // throws CorpusError when absent
  bool contains(const std::string& label) const { return find(label).has_value(); }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, size_t> index_;
};

struct Dataset {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
  LabelVocabulary vocabulary;
};

std::vector<LabeledExample> load_jsonl(const std::string& path,
                                       Provenance provenance = Provenance::kSeed);
void save_jsonl(const std::string& path, std::span<const LabeledExample> examples,
                bool with_pvi = false);

LabelVocabulary build_vocabulary(std::span<const LabeledExample> examples);

// Reads train.jsonl / validation.jsonl / test.jsonl from a directory and
// builds the vocabulary over all three splits.
Dataset load_corpus_dir(const std::string& dir);

// Exactly k train examples per intent, sampled without replacement. Each
// intent draws from its own sub-seed so samples are stable under intent
// additions. Validation/test pass through.
Dataset few_shot_sample(const Dataset& dataset, size_t k, uint64_t seed);

std::map<std::string, size_t> label_counts(std::span<const LabeledExample> examples);

}  // namespace icda

#endif  // ICDA_CORPUS_HPP
