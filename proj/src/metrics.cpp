#include "icda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "icda/text.hpp"

namespace icda {

namespace {

constexpr char kSep = '\x1f';
constexpr const char* kUnknown = "<unk>";
constexpr const char* kBos = "<s>";
constexpr const char* kEos = "</s>";
constexpr double kBleuEpsilon = 1e-9;

std::string join_ngram(std::span<const std::string> tokens, size_t begin, size_t n) {
  std::string key;
  for (size_t i = 0; i < n; ++i) {
    if (i) key.push_back(kSep);
    key += tokens[begin + i];
  }
  return key;
}

std::map<std::string, size_t> ngram_counts_of(std::span<const std::string> tokens, size_t n) {
  std::map<std::string, size_t> counts;
  if (tokens.size() >= n) {
    for (size_t i = 0; i + n <= tokens.size(); ++i) {
      ++counts[join_ngram(tokens, i, n)];
    }
  }
  return counts;
}

}  // namespace

double distinct_n(std::span<const std::string> corpus, size_t n) {
  if (corpus.empty()) throw MetricsError("distinct_n: empty corpus");
  if (n < 1) throw MetricsError("distinct_n: n must be >= 1");
  std::set<std::string> unique;
  size_t total = 0;
  for (const auto& text : corpus) {
    std::vector<std::string> tokens = tokenize(text);
    if (tokens.size() < n) continue;
    for (size_t i = 0; i + n <= tokens.size(); ++i) {
      unique.insert(join_ngram(tokens, i, n));
      ++total;
    }
  }
  if (total == 0) {
    throw MetricsError("distinct_n: no text long enough for n=" + std::to_string(n));
  }
  return static_cast<double>(unique.size()) / static_cast<double>(total);
}

double self_bleu(std::span<const std::string> corpus, size_t max_n) {
  if (corpus.size() < 2) throw MetricsError("self_bleu: need at least 2 texts");
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(corpus.size());
  for (const auto& text : corpus) tokenized.push_back(tokenize(text));

  double bleu_sum = 0.0;
  for (size_t i = 0; i < tokenized.size(); ++i) {
    const auto& hyp = tokenized[i];
    if (hyp.empty()) continue;  // empty hypothesis scores 0

    // Brevity penalty against the closest reference length (ties -> shorter).
    size_t closest_len = 0;
    size_t best_gap = SIZE_MAX;
    for (size_t j = 0; j < tokenized.size(); ++j) {
      if (j == i) continue;
      size_t len = tokenized[j].size();
      size_t gap = len > hyp.size() ? len - hyp.size() : hyp.size() - len;
      if (gap < best_gap || (gap == best_gap && len < closest_len)) {
        best_gap = gap;
        closest_len = len;
      }
    }
    double bp = hyp.size() >= closest_len
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(closest_len) /
                                         static_cast<double>(hyp.size()));

    double log_sum = 0.0;
    size_t orders_used = 0;
    for (size_t n = 1; n <= max_n; ++n) {
      if (hyp.size() < n) break;
      auto hyp_counts = ngram_counts_of(hyp, n);
      size_t clipped = 0;
      size_t total = hyp.size() - n + 1;
      for (const auto& [gram, count] : hyp_counts) {
        size_t best_ref = 0;
        for (size_t j = 0; j < tokenized.size(); ++j) {
          if (j == i || tokenized[j].size() < n) continue;
          auto ref_counts = ngram_counts_of(tokenized[j], n);
          auto it = ref_counts.find(gram);
          if (it != ref_counts.end()) best_ref = std::max(best_ref, it->second);
        }
        clipped += std::min(count, best_ref);
      }
      double precision = clipped > 0
                             ? static_cast<double>(clipped) / static_cast<double>(total)
                             : kBleuEpsilon;
      log_sum += std::log(precision);
      ++orders_used;
    }
    double bleu = orders_used > 0 ? bp * std::exp(log_sum / static_cast<double>(orders_used)) : 0.0;
    bleu_sum += bleu;
  }
  return bleu_sum / static_cast<double>(corpus.size());
}

NgramLanguageModel::NgramLanguageModel(size_t order, double delta)
    : order_(order), delta_(delta) {
  if (order < 1) throw MetricsError("ngram order must be >= 1");
  if (delta <= 0.0) throw MetricsError("smoothing delta must be > 0");
}

std::string NgramLanguageModel::map_token(const std::string& token) const {
  return vocab_.count(token) ? token : kUnknown;
}

NgramLanguageModel NgramLanguageModel::train(std::span<const std::string> reference, size_t order,
                                             double delta) {
  if (reference.empty()) throw MetricsError("ngram train: empty reference corpus");
  NgramLanguageModel lm(order, delta);

  std::map<std::string, size_t> raw_counts;
  std::vector<std::vector<std::string>> tokenized;
  for (const auto& text : reference) {
    tokenized.push_back(tokenize(text));
    for (const auto& tok : tokenized.back()) ++raw_counts[tok];
  }
  // Singletons become the unknown token so held-out OOV mass is estimated.
  for (const auto& [tok, count] : raw_counts) {
    if (count > 1) lm.vocab_[tok] = true;
  }
  lm.vocab_[kUnknown] = true;
  lm.vocab_[kEos] = true;

  for (auto& tokens : tokenized) {
    std::vector<std::string> padded(order - 1, kBos);
    for (const auto& tok : tokens) padded.push_back(lm.map_token(tok));
    padded.push_back(kEos);
    for (size_t i = order - 1; i < padded.size(); ++i) {
      std::string context = join_ngram(padded, i - (order - 1), order - 1);
      lm.context_totals_[context] += 1.0;
      lm.ngram_counts_[context + kSep + padded[i]] += 1.0;
    }
  }
  return lm;
}

NgramLanguageModel NgramLanguageModel::uniform(const std::vector<std::string>& vocabulary,
                                               size_t order) {
  NgramLanguageModel lm(order, 1.0);
  for (const auto& tok : vocabulary) lm.vocab_[tok] = true;
  if (lm.vocab_.empty()) throw MetricsError("uniform LM needs a non-empty vocabulary");
  return lm;
}

double NgramLanguageModel::log2_prob(std::span<const std::string> context,
                                     const std::string& token) const {
  std::string ctx = context.empty() ? std::string() : join_ngram(context, 0, context.size());
  double ctx_total = 0.0;
  if (auto it = context_totals_.find(ctx); it != context_totals_.end()) ctx_total = it->second;
  double count = 0.0;
  if (auto it = ngram_counts_.find(ctx + kSep + map_token(token)); it != ngram_counts_.end()) {
    count = it->second;
  }
  double vsize = static_cast<double>(vocab_.size());
  return std::log2((count + delta_) / (ctx_total + delta_ * vsize));
}

std::pair<double, size_t> NgramLanguageModel::score_text(const std::string& text) const {
  std::vector<std::string> padded(order_ - 1, kBos);
  for (const auto& tok : tokenize(text)) padded.push_back(map_token(tok));
  padded.push_back(kEos);
  double log2_total = 0.0;
  size_t events = 0;
  for (size_t i = order_ - 1; i < padded.size(); ++i) {
    std::span<const std::string> ctx(padded.data() + i - (order_ - 1), order_ - 1);
    log2_total += log2_prob(ctx, padded[i]);
    ++events;
  }
  return {log2_total, events};
}

double perplexity(const NgramLanguageModel& lm, std::span<const std::string> corpus) {
  if (corpus.empty()) throw MetricsError("perplexity: empty corpus");
  double log2_total = 0.0;
  size_t tokens = 0;
  for (const auto& text : corpus) {
    auto [lp, count] = lm.score_text(text);
    log2_total += lp;
    tokens += count;
  }
  return std::exp2(-log2_total / static_cast<double>(tokens));
}

DiversityReport diversity_report(std::span<const std::string> corpus,
                                 const NgramLanguageModel& lm) {
  DiversityReport report;
  report.corpus_size = corpus.size();
  report.distinct1 = distinct_n(corpus, 1);
  report.distinct2 = distinct_n(corpus, 2);
  report.self_bleu = self_bleu(corpus);
  report.perplexity = perplexity(lm, corpus);
  return report;
}

}  // namespace icda
