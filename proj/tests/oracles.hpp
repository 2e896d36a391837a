#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. Written without sharing code or data structures with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "marn/memory_builder.hpp"
#include "marn/metrics.hpp"

namespace oracle {

using Sentence = std::vector<std::string>;

struct Pair {
  Sentence candidate;
  std::vector<Sentence> references;
};

inline Sentence words(const std::string& text) {
  Sentence out;
  std::string cur;
  for (char ch : text) {
    if (ch == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// 20 hand-written candidate/reference pairs with partial overlaps, repeated
// words, an empty candidate and references of uneven length.
inline std::vector<Pair> hand_corpus() {
  const std::vector<std::pair<std::string, std::vector<std::string>>> raw = {
      {"a man is playing a guitar", {"a man is playing a guitar", "a person plays the guitar"}},
      {"a woman is cutting an onion", {"a woman is slicing an onion", "someone cuts an onion"}},
      {"a dog runs in the park", {"a dog is running in a park", "the dog runs through the grass"}},
      {"a cat is sleeping", {"a cat sleeps on a sofa", "a kitten is sleeping"}},
      {"two men are talking", {"two men are talking to each other"}},
      {"a girl is singing on stage", {"a girl sings on a stage", "a young woman is singing"}},
      {"a car is driving down the road", {"a car drives down a road", "a red car is driving on the road"}},
      {"the the the the", {"the cat is on the mat"}},
      {"a man is cooking food in a kitchen", {"a man cooks in a kitchen", "a chef is cooking food"}},
      {"", {"a boy is swimming"}},
      {"people are dancing", {"a group of people are dancing", "people dance at a party"}},
      {"a man is riding a horse", {"a man rides a horse", "a cowboy is riding a horse on a field"}},
      {"a woman is applying makeup", {"a woman applies makeup", "a lady is putting on makeup"}},
      {"a boy plays soccer", {"a boy is playing soccer", "kids play football"}},
      {"a plane is flying", {"an airplane flies in the sky", "a plane is flying in the sky"}},
      {"a baby is laughing", {"a baby laughs", "an infant is laughing at a toy"}},
      {"someone is typing on a keyboard", {"a person types on a keyboard", "someone is typing"}},
      {"a monkey eats a banana", {"a monkey is eating a banana", "an ape eats fruit"}},
      {"a man is playing a piano", {"a man plays the piano", "a pianist is playing"}},
      {"water is flowing", {"a river flows", "water is flowing over rocks"}},
  };
  std::vector<Pair> out;
  for (const auto& [cand, refs] : raw) {
    Pair p{words(cand), {}};
    for (const auto& r : refs) p.references.push_back(words(r));
    out.push_back(std::move(p));
  }
  return out;
}

inline bool same_gram(const Sentence& a, std::size_t i, const Sentence& b, std::size_t j, std::size_t n) {
  for (std::size_t t = 0; t < n; ++t)
    if (a[i + t] != b[j + t]) return false;
  return true;
}

// Occurrences of the n-gram at position i of `s` inside `t`.
inline std::size_t occurrences(const Sentence& s, std::size_t i, const Sentence& t, std::size_t n) {
  std::size_t c = 0;
  for (std::size_t j = 0; j + n <= t.size(); ++j)
    if (same_gram(s, i, t, j, n)) ++c;
  return c;
}

inline double bleu4(const std::vector<Pair>& corpus) {
  double matched[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0};
  double c_len = 0, r_len = 0;
  for (const Pair& p : corpus) {
    const Sentence& c = p.candidate;
    c_len += c.size();
    double best = -1, best_gap = 1e18;
    for (const Sentence& r : p.references) {
      const double gap = std::fabs(double(r.size()) - double(c.size()));
      if (gap < best_gap || (gap == best_gap && double(r.size()) < best)) {
        best_gap = gap;
        best = double(r.size());
      }
    }
    r_len += best;
    for (std::size_t n = 1; n <= 4; ++n) {
      for (std::size_t i = 0; i + n <= c.size(); ++i) {
        total[n - 1] += 1;
        bool first = true;
        for (std::size_t j = 0; j < i; ++j)
          if (same_gram(c, i, c, j, n)) first = false;
        if (!first) continue;
        const double cc = double(occurrences(c, i, c, n));
        double clip = 0;
        for (const Sentence& r : p.references) clip = std::max(clip, double(occurrences(c, i, r, n)));
        matched[n - 1] += std::min(cc, clip);
      }
    }
  }
  double log_p = 0;
  for (int n = 0; n < 4; ++n) {
    if (matched[n] == 0) return 0.0;
    log_p += 0.25 * std::log(matched[n] / total[n]);
  }
  const double bp = c_len > r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
  return bp * std::exp(log_p);
}

// Top-down memoized LCS.
inline std::size_t lcs(const Sentence& a, const Sentence& b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  std::function<long(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> long {
    if (i == a.size() || j == b.size()) return 0;
    long& m = memo[i][j];
    if (m >= 0) return m;
    if (a[i] == b[j]) return m = 1 + go(i + 1, j + 1);
    return m = std::max(go(i + 1, j), go(i, j + 1));
  };
  return static_cast<std::size_t>(go(0, 0));
}

inline double rouge_l(const std::vector<Pair>& corpus) {
  double sum = 0;
  for (const Pair& p : corpus) {
    std::vector<double> precisions, recalls;
    for (const Sentence& r : p.references) {
      const double l = double(lcs(p.candidate, r));
      precisions.push_back(p.candidate.empty() ? 0.0 : l / double(p.candidate.size()));
      recalls.push_back(r.empty() ? 0.0 : l / double(r.size()));
    }
    const double P = *std::max_element(precisions.begin(), precisions.end());
    const double R = *std::max_element(recalls.begin(), recalls.end());
    if (P != 0 && R != 0) sum += (1 + 1.44) * P * R / (R + 1.44 * P);
  }
  return sum / double(corpus.size());
}

inline std::string gram_key(const Sentence& s, std::size_t i, std::size_t n) {
  std::string k;
  for (std::size_t t = 0; t < n; ++t) k += s[i + t] + "\x1f";
  return k;
}

inline double cider(const std::vector<Pair>& corpus) {
  const double docs = double(corpus.size());
  double total = 0;
  std::vector<double> per_video(corpus.size(), 0.0);
  for (std::size_t n = 1; n <= 4; ++n) {
    // Dense index over every n-gram in the corpus.
    std::vector<std::string> index;
    auto id_of = [&](const std::string& k) {
      auto it = std::find(index.begin(), index.end(), k);
      if (it != index.end()) return std::size_t(it - index.begin());
      index.push_back(k);
      return index.size() - 1;
    };
    auto collect = [&](const Sentence& s) {
      for (std::size_t i = 0; i + n <= s.size(); ++i) id_of(gram_key(s, i, n));
    };
    for (const Pair& p : corpus) {
      collect(p.candidate);
      for (const auto& r : p.references) collect(r);
    }
    std::vector<double> df(index.size(), 0.0);
    for (std::size_t g = 0; g < index.size(); ++g)
      for (const Pair& p : corpus) {
        bool present = false;
        for (const auto& r : p.references)
          for (std::size_t i = 0; i + n <= r.size(); ++i)
            if (gram_key(r, i, n) == index[g]) present = true;
        if (present) df[g] += 1;
      }
    auto vec = [&](const Sentence& s) {
      std::vector<double> v(index.size(), 0.0);
      for (std::size_t i = 0; i + n <= s.size(); ++i) v[id_of(gram_key(s, i, n))] += 1;
      for (std::size_t g = 0; g < v.size(); ++g) v[g] *= std::log(docs) - std::log(std::max(1.0, df[g]));
      return v;
    };
    for (std::size_t vi = 0; vi < corpus.size(); ++vi) {
      const auto c = vec(corpus[vi].candidate);
      double cn = 0;
      for (double x : c) cn += x * x;
      for (const auto& r : corpus[vi].references) {
        const auto rv = vec(r);
        double dot = 0, rn = 0;
        for (std::size_t g = 0; g < c.size(); ++g) {
          dot += c[g] * rv[g];
          rn += rv[g] * rv[g];
        }
        const double cos = (cn > 0 && rn > 0) ? dot / (std::sqrt(cn) * std::sqrt(rn)) : 0.0;
        per_video[vi] += cos / 4.0 * 10.0 / double(corpus[vi].references.size());
      }
    }
  }
  for (double s : per_video) total += s;
  return total / docs;
}

inline std::vector<marn::Sentence> candidates(const std::vector<Pair>& c) {
  std::vector<marn::Sentence> out;
  for (const auto& p : c) out.push_back(p.candidate);
  return out;
}

inline std::vector<std::vector<marn::Sentence>> references(const std::vector<Pair>& c) {
  std::vector<std::vector<marn::Sentence>> out;
  for (const auto& p : c) out.push_back(p.references);
  return out;
}

// Indices of the k largest weights by repeated maximum selection, lowest index on ties.
inline std::vector<std::size_t> select_top(const std::vector<double>& w, std::size_t k) {
  std::vector<bool> taken(w.size(), false);
  std::vector<std::size_t> out;
  for (std::size_t round = 0; round < std::min(k, w.size()); ++round) {
    std::size_t best = w.size();
    for (std::size_t i = 0; i < w.size(); ++i)
      if (!taken[i] && (best == w.size() || w[i] > w[best])) best = i;
    taken[best] = true;
    out.push_back(best);
  }
  return out;
}

// g = sum_occ sum_{j in top-k} a_j f'_j / sum_occ sum_{j in top-k} a_j, plus the
// same expression over the clip stream.
inline std::vector<double> visual_context(const std::vector<marn::AttentionRecord>& records,
                                          const marn::ProjectedLookup& projected, std::size_t k, std::size_t m) {
  std::vector<double> g(m, 0.0);
  if (records.empty()) return g;
  for (int stream = 0; stream < 2; ++stream) {
    std::vector<double> num(m, 0.0);
    double den = 0;
    for (const auto& rec : records) {
      const marn::Tensor& w = stream == 0 ? rec.weights2d : rec.weights3d;
      const marn::Tensor& f = stream == 0 ? projected.at(rec.video_id).frames : projected.at(rec.video_id).clips;
      for (std::size_t j : select_top(w.values(), k)) {
        for (std::size_t c = 0; c < m; ++c) num[c] += w[j] * f.at(j, c);
        den += w[j];
      }
    }
    for (std::size_t c = 0; c < m; ++c) g[c] += num[c] / den;
  }
  return g;
}

}  // namespace oracle
