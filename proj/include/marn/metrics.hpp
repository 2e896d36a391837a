#pragma once

#include <span>
#include <string>
#include <vector>

namespace marn {

using Sentence = std::vector<std::string>;

// Corpus metrics over aligned candidates and reference sets. Every candidate
// needs at least one reference; an empty candidate simply matches nothing.

// Corpus BLEU-4: clipped 1..4-gram precisions (clip = max count in any one
// reference), uniform weights, brevity penalty against the closest reference
// length (shorter wins ties). No smoothing: any zero precision gives 0.
double bleu4(std::span<const Sentence> candidates, std::span<const std::vector<Sentence>> references);

// ROUGE-L with beta = 1.2: LCS precision and recall, each maximized over the
// references, combined as (1 + b^2) P R / (R + b^2 P) and averaged over the corpus.
double rouge_l(std::span<const Sentence> candidates, std::span<const std::vector<Sentence>> references);

// CIDEr: per n = 1..4, cosine similarity of TF-IDF n-gram vectors, IDF from
// the reference sets of this corpus (needs at least 2 videos); averaged over
// n, averaged over references, times 10, then averaged over the corpus.
double cider(std::span<const Sentence> candidates, std::span<const std::vector<Sentence>> references);

std::size_t lcs_length(const Sentence& a, const Sentence& b);

}  // namespace marn
