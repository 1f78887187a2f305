#ifndef ICDA_METRICS_HPP
#define ICDA_METRICS_HPP

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace icda {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DiversityReport {
  double distinct1 = 0.0;
  double distinct2 = 0.0;
  double self_bleu = 0.0;
  double perplexity = 0.0;
  size_t corpus_size = 0;
};

// Unique token n-grams over total token n-grams across the whole corpus.
double distinct_n(std::span<const std::string> corpus, size_t n);

// Mean over texts of BLEU (uniform weights over 1..max_n, clipped counts,
// brevity penalty) against the rest of the corpus; zero n-gram matches are
// smoothed with epsilon = 1e-9.
double self_bleu(std::span<const std::string> corpus, size_t max_n = 4);

/// Additive-delta smoothed n-gram model with boundary padding. Train-time
/// singletons map to the unknown token. Probabilities condition on the
/// previous order-1 tokens; unseen contexts give the uniform 1/|V|.
class NgramLanguageModel {
 public:
  NgramLanguageModel(size_t order, double delta);

  static NgramLanguageModel train(std::span<const std::string> reference, size_t order,
                                  double delta);
  // Empty-count model over an explicit vocabulary; every conditional is uniform.
  static NgramLanguageModel uniform(const std::vector<std::string>& vocabulary, size_t order);

  size_t order() const { return order_; }
  // Event vocabulary size (includes unknown and end-of-sentence).
  size_t vocab_size() const { return vocab_.size(); }

  // log2 p(token | context); context/token already mapped through the vocab.
  double log2_prob(std::span<const std::string> context, const std::string& token) const;
  // Total log2 probability and token count (end-of-sentence included) of one text.
  std::pair<double, size_t> score_text(const std::string& text) const;

 private:
  std::string map_token(const std::string& token) const;

  size_t order_;
  double delta_;
  std::map<std::string, double> context_totals_;
  std::map<std::string, double> ngram_counts_;
  std::map<std::string, bool> vocab_;  // token -> present
};

// 2^(-mean log2 p) over all tokens of the corpus, end-of-sentence tokens
// counted once per text.
double perplexity(const NgramLanguageModel& lm, std::span<const std::string> corpus);

DiversityReport diversity_report(std::span<const std::string> corpus,
                                 const NgramLanguageModel& lm);

}  // namespace icda

#endif  // ICDA_METRICS_HPP
