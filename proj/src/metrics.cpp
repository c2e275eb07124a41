#include "hear/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace hear::metrics {

namespace {

using NgramCounts = std::map<Tokens, int>;

NgramCounts ngrams(const Tokens& t, int n) {
    NgramCounts out;
    if (static_cast<int>(t.size()) < n) return out;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= t.size(); ++i) {
        ++out[Tokens(t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(i) + n)];
    }
    return out;
}

// Clipped matches and total candidate n-grams of order n.
std::pair<double, double> clipped(const Tokens& candidate, const References& references, int n) {
    const NgramCounts cand = ngrams(candidate, n);
    NgramCounts max_ref;
    for (const auto& r : references) {
        for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    double match = 0.0;
    double total = 0.0;
    for (const auto& [g, c] : cand) {
        total += c;
        const auto it = max_ref.find(g);
        if (it != max_ref.end()) match += std::min(c, it->second);
    }
    return {match, total};
}

double closest_ref_length(std::size_t c, const References& references) {
    std::size_t best = references.front().size();
    for (const auto& r : references) {
        const auto d = std::abs(static_cast<long>(r.size()) - static_cast<long>(c));
        const auto bd = std::abs(static_cast<long>(best) - static_cast<long>(c));
        if (d < bd || (d == bd && r.size() < best)) best = r.size();
    }
    return static_cast<double>(best);
}

double brevity_penalty(double c, double r) { return c > r ? 1.0 : std::exp(1.0 - r / c); }

}  // namespace

double bleu(const Tokens& candidate, const References& references, int n) {
    if (n < 1) throw std::invalid_argument("bleu: n must be >= 1");
    if (candidate.empty() || references.empty()) return 0.0;
    double log_sum = 0.0;
    for (int k = 1; k <= n; ++k) {
        const auto [match, total] = clipped(candidate, references, k);
        if (match == 0.0 || total == 0.0) return 0.0;
        log_sum += std::log(match / total);
    }
    const double c = static_cast<double>(candidate.size());
    return brevity_penalty(c, closest_ref_length(candidate.size(), references)) * std::exp(log_sum / n);
}

std::array<double, 4> corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<References>& references) {
    if (candidates.size() != references.size()) throw std::invalid_argument("corpus_bleu: size mismatch");
    std::array<double, 4> match{}, total{};
    double c = 0.0;
    double r = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (references[i].empty()) throw std::invalid_argument("corpus_bleu: instance without references");
        c += static_cast<double>(candidates[i].size());
        r += closest_ref_length(candidates[i].size(), references[i]);
        for (int k = 1; k <= 4; ++k) {
            const auto [m, t] = clipped(candidates[i], references[i], k);
            match[static_cast<std::size_t>(k - 1)] += m;
            total[static_cast<std::size_t>(k - 1)] += t;
        }
    }
    std::array<double, 4> out{};
    if (c == 0.0) return out;
    const double bp = brevity_penalty(c, r);
    double log_sum = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        if (match[k] == 0.0 || total[k] == 0.0) break;
        log_sum += std::log(match[k] / total[k]);
        out[k] = bp * std::exp(log_sum / static_cast<double>(k + 1));
    }
    return out;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const References& references, double beta) {
    if (candidate.empty() || references.empty()) return 0.0;
    double p = 0.0;
    double r = 0.0;
    for (const auto& ref : references) {
        if (ref.empty()) continue;
        const double l = static_cast<double>(lcs_length(candidate, ref));
        p = std::max(p, l / static_cast<double>(candidate.size()));
        r = std::max(r, l / static_cast<double>(ref.size()));
    }
    if (p == 0.0 || r == 0.0) return 0.0;
    const double b2 = beta * beta;
    return (1.0 + b2) * p * r / (r + b2 * p);
}

namespace {

struct CiderVector {
    std::array<std::map<Tokens, double>, 4> vec;
    std::array<double, 4> norm{};
    double length = 0.0;
};

std::array<NgramCounts, 4> cider_counts(const Tokens& t) {
    std::array<NgramCounts, 4> out;
    for (int n = 1; n <= 4; ++n) out[static_cast<std::size_t>(n - 1)] = ngrams(t, n);
    return out;
}

CiderVector tfidf(const std::array<NgramCounts, 4>& counts, const std::map<Tokens, double>& df, double ref_len) {
    CiderVector v;
    for (std::size_t n = 0; n < 4; ++n) {
        for (const auto& [g, tf] : counts[n]) {
            const auto it = df.find(g);
            const double d = it == df.end() ? 0.0 : it->second;
            const double w = static_cast<double>(tf) * (ref_len - std::log(std::max(1.0, d)));
            v.vec[n][g] = w;
            v.norm[n] += w * w;
            // Length is measured in bigrams, as in the reference implementation.
            if (n == 1) v.length += tf;
        }
        v.norm[n] = std::sqrt(v.norm[n]);
    }
    return v;
}

std::array<double, 4> cider_sim(const CiderVector& hyp, const CiderVector& ref, double sigma) {
    std::array<double, 4> val{};
    const double delta = hyp.length - ref.length;
    for (std::size_t n = 0; n < 4; ++n) {
        for (const auto& [g, w] : hyp.vec[n]) {
            const auto it = ref.vec[n].find(g);
            if (it == ref.vec[n].end()) continue;
            val[n] += std::min(w, it->second) * it->second;
        }
        if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) val[n] /= hyp.norm[n] * ref.norm[n];
        val[n] *= std::exp(-(delta * delta) / (2.0 * sigma * sigma));
    }
    return val;
}

}  // namespace

CiderResult cider_d(const std::vector<Tokens>& candidates, const std::vector<References>& references, double sigma) {
    if (candidates.size() != references.size()) throw std::invalid_argument("cider_d: size mismatch");
    CiderResult result;
    if (candidates.empty()) return result;

    std::map<Tokens, double> df;
    std::vector<std::vector<std::array<NgramCounts, 4>>> ref_counts(references.size());
    for (std::size_t i = 0; i < references.size(); ++i) {
        if (references[i].empty()) throw std::invalid_argument("cider_d: instance without references");
        std::set<Tokens> seen;
        for (const auto& r : references[i]) {
            ref_counts[i].push_back(cider_counts(r));
            for (const auto& order : ref_counts[i].back()) {
                for (const auto& [g, _] : order) seen.insert(g);
            }
        }
        for (const auto& g : seen) df[g] += 1.0;
    }
    const double ref_len = std::log(static_cast<double>(references.size()));

    double total = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const CiderVector hyp = tfidf(cider_counts(candidates[i]), df, ref_len);
        std::array<double, 4> sum{};
        for (const auto& rc : ref_counts[i]) {
            const auto s = cider_sim(hyp, tfidf(rc, df, ref_len), sigma);
            for (std::size_t n = 0; n < 4; ++n) sum[n] += s[n];
        }
        double mean = 0.0;
        for (double s : sum) mean += s;
        mean /= 4.0;
        const double score = mean / static_cast<double>(ref_counts[i].size()) * 10.0;
        result.per_instance.push_back(score);
        total += score;
    }
    result.corpus = total / static_cast<double>(candidates.size());
    return result;
}

std::string stem(const std::string& word) {
    std::string w = word;
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const char* suffix : {"ing", "ed", "es", "s"}) {
        const std::string s(suffix);
        if (w.size() >= s.size() + 3 && w.compare(w.size() - s.size(), s.size(), s) == 0) {
            return w.substr(0, w.size() - s.size());
        }
    }
    return w;
}

namespace {

class AlignmentSearch {
  public:
    AlignmentSearch(const Tokens& cand, const Tokens& ref) : used_(ref.size(), false) {
        std::vector<std::string> cs, rs;
        for (const auto& t : cand) cs.push_back(stem(t));
        for (const auto& t : ref) rs.push_back(stem(t));
        options_.resize(cand.size());
        for (std::size_t i = 0; i < cand.size(); ++i) {
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (cand[i] == ref[j] || cs[i] == rs[j]) options_[i].push_back(j);
            }
        }
        suffix_options_.assign(cand.size() + 1, 0);
        for (std::size_t i = cand.size(); i-- > 0;) suffix_options_[i] = suffix_options_[i + 1] + (options_[i].empty() ? 0 : 1);
    }

    Alignment run() {
        target_ = max_matching();
        if (target_ == 0) return {};
        best_chunks_ = greedy_chunks();
        search(0, 0, 0, std::numeric_limits<std::size_t>::max());
        if (best_chunks_ == std::numeric_limits<std::size_t>::max()) best_chunks_ = matching_chunks();
        return {target_, best_chunks_};
    }

  private:
    // Kuhn's augmenting paths.
    std::size_t max_matching() {
        owner_.assign(used_.size(), -1);
        std::size_t count = 0;
        for (std::size_t i = 0; i < options_.size(); ++i) {
            std::vector<bool> seen(used_.size(), false);
            if (augment(i, owner_, seen)) ++count;
        }
        return count;
    }

    std::size_t matching_chunks() const {
        std::vector<std::size_t> ref_of(options_.size(), std::numeric_limits<std::size_t>::max());
        for (std::size_t j = 0; j < owner_.size(); ++j) {
            if (owner_[j] >= 0) ref_of[static_cast<std::size_t>(owner_[j])] = j;
        }
        std::size_t chunks = 0;
        std::size_t prev = std::numeric_limits<std::size_t>::max();
        for (std::size_t j : ref_of) {
            if (j != std::numeric_limits<std::size_t>::max() &&
                (prev == std::numeric_limits<std::size_t>::max() || j != prev + 1)) {
                ++chunks;
            }
            prev = j;
        }
        return chunks;
    }

    bool augment(std::size_t i, std::vector<long>& owner, std::vector<bool>& seen) {
        for (std::size_t j : options_[i]) {
            if (seen[j]) continue;
            seen[j] = true;
            if (owner[j] < 0 || augment(static_cast<std::size_t>(owner[j]), owner, seen)) {
                owner[j] = static_cast<long>(i);
                return true;
            }
        }
        return false;
    }

    // Chunks of a left-to-right matching that prefers extending the current
    // chunk; max when that matching is not maximum.
    std::size_t greedy_chunks() const {
        std::vector<bool> used(used_.size(), false);
        std::size_t matched = 0;
        std::size_t chunks = 0;
        std::size_t prev = std::numeric_limits<std::size_t>::max();
        bool prev_matched = false;
        for (std::size_t i = 0; i < options_.size(); ++i) {
            std::size_t pick = std::numeric_limits<std::size_t>::max();
            for (std::size_t j : options_[i]) {
                if (used[j]) continue;
                if (prev_matched && j == prev + 1) {
                    pick = j;
                    break;
                }
                if (pick == std::numeric_limits<std::size_t>::max()) pick = j;
            }
            if (pick == std::numeric_limits<std::size_t>::max()) {
                prev_matched = false;
                continue;
            }
            used[pick] = true;
            ++matched;
            if (!(prev_matched && pick == prev + 1)) ++chunks;
            prev = pick;
            prev_matched = true;
        }
        return matched == target_ ? chunks : std::numeric_limits<std::size_t>::max();
    }

    void search(std::size_t i, std::size_t matched, std::size_t chunks, std::size_t prev_j) {
        if (++nodes_ > kNodeLimit) return;
        if (chunks >= best_chunks_) return;
        if (matched + suffix_options_[i] < target_) return;
        if (i == options_.size()) {
            if (matched == target_) best_chunks_ = chunks;
            return;
        }
        const bool continuing = prev_j != std::numeric_limits<std::size_t>::max();
        for (std::size_t j : options_[i]) {
            if (used_[j]) continue;
            used_[j] = true;
            const bool extends = continuing && j == prev_j + 1;
            search(i + 1, matched + 1, chunks + (extends ? 0 : 1), j);
            used_[j] = false;
        }
        search(i + 1, matched, chunks, std::numeric_limits<std::size_t>::max());
    }

    static constexpr std::size_t kNodeLimit = 2'000'000;
    std::vector<std::vector<std::size_t>> options_;
    std::vector<std::size_t> suffix_options_;
    std::vector<bool> used_;
    std::vector<long> owner_;
    std::size_t target_ = 0;
    std::size_t best_chunks_ = std::numeric_limits<std::size_t>::max();
    std::size_t nodes_ = 0;
};

}  // namespace

Alignment align(const Tokens& candidate, const Tokens& reference) { return AlignmentSearch(candidate, reference).run(); }

double meteor_simple(const Tokens& candidate, const References& references) {
    if (candidate.empty()) return 0.0;
    double best = 0.0;
    for (const auto& ref : references) {
        if (ref.empty()) continue;
        const Alignment a = align(candidate, ref);
        if (a.matches == 0) continue;
        const double m = static_cast<double>(a.matches);
        const double p = m / static_cast<double>(candidate.size());
        const double r = m / static_cast<double>(ref.size());
        const double fmean = 10.0 * p * r / (r + 9.0 * p);
        const double penalty = 0.5 * std::pow(static_cast<double>(a.chunks) / m, 3.0);
        best = std::max(best, fmean * (1.0 - penalty));
    }
    return best;
}

}  // namespace hear::metrics
