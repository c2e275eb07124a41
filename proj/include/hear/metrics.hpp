#pragma once

// Caption metrics over pre-tokenized text.

#include <array>
#include <string>
#include <vector>

namespace hear::metrics {

using Tokens = std::vector<std::string>;
using References = std::vector<Tokens>;

// Sentence BLEU-n: clipped precisions for orders 1..n, uniform weights,
// brevity penalty against the closest reference length (shorter on ties).
// No smoothing: any zero precision gives 0.
double bleu(const Tokens& candidate, const References& references, int n);

// Corpus BLEU-1..4: counts and lengths pooled over all instances.
std::array<double, 4> corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<References>& references);

inline constexpr double kRougeBeta = 1.2;

// LCS F-measure; precision and recall are maximized over references
// separately before combining.
double rouge_l(const Tokens& candidate, const References& references, double beta = kRougeBeta);
std::size_t lcs_length(const Tokens& a, const Tokens& b);

struct CiderResult {
    double corpus = 0.0;
    std::vector<double> per_instance;
};

inline constexpr double kCiderSigma = 6.0;

// CIDEr-D with document frequencies from the references of the given corpus.
CiderResult cider_d(const std::vector<Tokens>& candidates, const std::vector<References>& references,
                    double sigma = kCiderSigma);

// Lowercased word with one of "ing", "ed", "es", "s" removed when at least
// three characters remain.
std::string stem(const std::string& word);

struct Alignment {
    std::size_t matches = 0;
    std::size_t chunks = 0;
};

// One-to-one unigram alignment (exact or equal stems) with the most matches,
// then the fewest chunks.
Alignment align(const Tokens& candidate, const Tokens& reference);

// Fmean = 10PR / (R + 9P), penalty 0.5 (chunks / matches)^3, max over references.
double meteor_simple(const Tokens& candidate, const References& references);

}  // namespace hear::metrics
