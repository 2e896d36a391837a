#include "marn/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

#include "marn/error.hpp"

namespace marn {

namespace {

constexpr std::size_t kMaxOrder = 4;

using Ngram = std::vector<std::string>;
using NgramCounts = std::map<Ngram, double>;

NgramCounts count_ngrams(const Sentence& s, std::size_t n) {
  NgramCounts counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) counts[Ngram(s.begin() + i, s.begin() + i + n)] += 1.0;
  return counts;
}

void check_corpus(std::span<const Sentence> candidates, std::span<const std::vector<Sentence>> references) {
  if (candidates.empty()) throw ContractViolation("metric needs at least one candidate");
  if (candidates.size() != references.size())
    throw ContractViolation("metric needs one reference set per candidate");
  for (const auto& refs : references)
    if (refs.empty()) throw ContractViolation("every candidate needs at least one reference");
}

}  // namespace

double bleu4(std::span<const Sentence> candidates, std::span<const std::vector<Sentence>> references) {
  check_corpus(candidates, references);
  std::array<double, kMaxOrder> matched{}, total{};
  double cand_len = 0.0, ref_len = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Sentence& cand = candidates[i];
    const auto& refs = references[i];
    cand_len += static_cast<double>(cand.size());
    std::size_t best = refs.front().size();
    for (const auto& r : refs) {
      const auto diff = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (diff(r.size()) < diff(best) || (diff(r.size()) == diff(best) && r.size() < best)) best = r.size();
    }
    ref_len += static_cast<double>(best);
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      const NgramCounts cand_counts = count_ngrams(cand, n);
      NgramCounts max_ref;
      for (const auto& r : refs)
        for (const auto& [g, c] : count_ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
      for (const auto& [g, c] : cand_counts) {
        total[n - 1] += c;
        auto it = max_ref.find(g);
        if (it != max_ref.end()) matched[n - 1] += std::min(c, it->second);
      }
    }
  }
  if (cand_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < kMaxOrder; ++n) {
    if (total[n] == 0.0 || matched[n] == 0.0) return 0.0;
    log_sum += std::log(matched[n] / total[n]) / static_cast<double>(kMaxOrder);
  }
  const double brevity = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return brevity * std::exp(log_sum);
}

std::size_t lcs_length(const Sentence& a, const Sentence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const Sentence> candidates, std::span<const std::vector<Sentence>> references) {
  check_corpus(candidates, references);
  constexpr double beta = 1.2;
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Sentence& cand = candidates[i];
    double best_p = 0.0, best_r = 0.0;
    for (const auto& ref : references[i]) {
      const double lcs = static_cast<double>(lcs_length(cand, ref));
      if (!cand.empty()) best_p = std::max(best_p, lcs / static_cast<double>(cand.size()));
      if (!ref.empty()) best_r = std::max(best_r, lcs / static_cast<double>(ref.size()));
    }
    if (best_p > 0.0 && best_r > 0.0)
      total += (1.0 + beta * beta) * best_p * best_r / (best_r + beta * beta * best_p);
  }
  return total / static_cast<double>(candidates.size());
}

double cider(std::span<const Sentence> candidates, std::span<const std::vector<Sentence>> references) {
  check_corpus(candidates, references);
  if (candidates.size() < 2)
    throw ContractViolation("CIDEr needs at least 2 videos to compute document frequencies (IDF)");

  // Document frequency: number of videos whose reference set contains the n-gram.
  std::map<Ngram, double> doc_freq;
  for (const auto& refs : references) {
    std::set<Ngram> seen;
    for (const auto& r : refs)
      for (std::size_t n = 1; n <= kMaxOrder; ++n)
        for (const auto& [g, c] : count_ngrams(r, n)) seen.insert(g);
    for (const auto& g : seen) doc_freq[g] += 1.0;
  }
  const double log_docs = std::log(static_cast<double>(references.size()));

  struct Vec {
    std::array<std::map<Ngram, double>, kMaxOrder> weights;
    std::array<double, kMaxOrder> norm{};
  };
  auto tfidf = [&](const Sentence& s) {
    Vec v;
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      for (const auto& [g, tf] : count_ngrams(s, n)) {
        auto it = doc_freq.find(g);
        const double df = std::log(std::max(1.0, it == doc_freq.end() ? 0.0 : it->second));
        const double w = tf * (log_docs - df);
        v.weights[n - 1][g] = w;
        v.norm[n - 1] += w * w;
      }
      v.norm[n - 1] = std::sqrt(v.norm[n - 1]);
    }
    return v;
  };

  double corpus = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Vec cand = tfidf(candidates[i]);
    std::array<double, kMaxOrder> score{};
    for (const auto& ref : references[i]) {
      const Vec rv = tfidf(ref);
      for (std::size_t n = 0; n < kMaxOrder; ++n) {
        double dot = 0.0;
        for (const auto& [g, w] : cand.weights[n]) {
          auto it = rv.weights[n].find(g);
          if (it != rv.weights[n].end()) dot += w * it->second;
        }
        if (cand.norm[n] != 0.0 && rv.norm[n] != 0.0) dot /= cand.norm[n] * rv.norm[n];
        score[n] += dot;
      }
    }
    double mean = 0.0;
    for (double s : score) mean += s;
    mean /= static_cast<double>(kMaxOrder);
    corpus += 10.0 * mean / static_cast<double>(references[i].size());
  }
  return corpus / static_cast<double>(candidates.size());
}

}  // namespace marn
