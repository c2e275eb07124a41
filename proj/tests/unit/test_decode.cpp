#include "support.hpp"

#include "hear/decode.hpp"

#include <algorithm>

using namespace hear;
using namespace hear::testing;

namespace {

constexpr int kA = 7;
constexpr int kB = 8;
constexpr int kV = 9;

// Known transition probabilities over {end, a, b}; everything else is ~0.
Eigen::VectorXd three_step(std::span<const int> prefix) {
    Eigen::VectorXd p = Eigen::VectorXd::Constant(kV, 1e-12);
    auto set = [&](double end, double a, double b) {
        p(Vocabulary::kEnd) = end;
        p(kA) = a;
        p(kB) = b;
    };
    if (prefix.empty()) {
        set(0.1, 0.6, 0.3);
    } else if (prefix.size() == 1) {
        if (prefix[0] == kA) set(0.5, 0.2, 0.3);
        else set(0.7, 0.2, 0.1);
    } else {
        set(0.9, 0.05, 0.05);
    }
    return p.array().log().matrix();
}

struct Scored {
    TokenIds tokens;
    double score;
};

// All finished sequences of length <= 3 over {end, a, b}, best first.
std::vector<Scored> enumerate(double penalty) {
    std::vector<Scored> out;
    std::vector<TokenIds> frontier = {{}};
    for (int step = 0; step < 3; ++step) {
        std::vector<TokenIds> next;
        for (const auto& prefix : frontier) {
            const Eigen::VectorXd lp = three_step(prefix);
            for (int tok : {Vocabulary::kEnd, kA, kB}) {
                TokenIds seq = prefix;
                seq.push_back(tok);
                if (tok == Vocabulary::kEnd) {
                    double total = 0.0;
                    for (std::size_t i = 0; i < seq.size(); ++i) {
                        total += three_step(std::span<const int>(seq.data(), i))(seq[i]);
                    }
                    out.push_back({seq, total / std::pow(static_cast<double>(seq.size()), penalty)});
                } else {
                    next.push_back(seq);
                }
            }
        }
        frontier = next;
    }
    std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
    return out;
}

StepScorer random_scorer(std::uint64_t seed, int vocab) {
    return [seed, vocab](std::span<const int> prefix) {
        std::uint64_t h = seed;
        for (int t : prefix) h = h * 1000003ULL + static_cast<std::uint64_t>(t) + 1;
        std::mt19937_64 rng(h);
        std::normal_distribution<double> n(0.0, 2.0);
        Eigen::VectorXd logits(vocab);
        for (int i = 0; i < vocab; ++i) logits(i) = n(rng);
        const double lse = std::log(logits.array().exp().sum());
        return Eigen::VectorXd(logits.array() - lse);
    };
}

}  // namespace

TEST_SUITE("decode") {

TEST_CASE("beam of one equals greedy on random scorers") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const StepScorer s = random_scorer(seed, 12);
        DecodeConfig c;
        c.beam = 1;
        c.max_len = 10;
        const auto hyps = beam_search(s, c);
        REQUIRE(hyps.size() == 1);
        CHECK(hyps[0].tokens == greedy_search(s, 10));
    }
}

TEST_CASE("beam of one equals greedy on random toy models") {
    const Vocabulary vocab = tiny_vocab();
    DlmConfig config = tiny_config(static_cast<int>(vocab.size()));
    config.d_model = 8;
    config.heads = 2;
    config.max_answer_len = 12;
    const DialogueInstance inst = tiny_instance(vocab);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const DlmModel model(config, seed);
        const FeatureTrack track = tiny_track(5, config.video_dim, config.audio_dim, 1000 + seed);
        const Var fused = model.embed_av(track.audio, track.video);
        DecodeConfig c;
        c.beam = 1;
        c.max_len = 10;
        CHECK(beam_decode(model, fused, inst, c) == greedy_decode(model, fused, inst, 10));
    }
}

TEST_CASE("beam of two matches exhaustive enumeration") {
    for (double penalty : {0.3, 0.0}) {
        CAPTURE(penalty);
        DecodeConfig c;
        c.beam = 2;
        c.max_len = 3;
        c.length_penalty = penalty;
        const auto hyps = beam_search(three_step, c);
        const auto all = enumerate(penalty);
        REQUIRE(hyps.size() == 2);
        for (std::size_t i = 0; i < hyps.size(); ++i) {
            CHECK(hyps[i].finished);
            CHECK(hyps[i].tokens == all[i].tokens);
            CHECK(hyps[i].score == doctest::Approx(all[i].score).epsilon(1e-12));
        }
    }
    CHECK(enumerate(0.3)[0].tokens == TokenIds{kA, Vocabulary::kEnd});
}

TEST_CASE("length penalty semantics") {
    DecodeConfig c;
    c.beam = 3;
    c.max_len = 3;
    c.length_penalty = 0.0;
    for (const auto& h : beam_search(three_step, c)) CHECK(h.score == h.log_prob);
    c.length_penalty = 0.3;
    for (const auto& h : beam_search(three_step, c)) {
        CHECK(h.score == doctest::Approx(h.log_prob / std::pow(static_cast<double>(h.tokens.size()), 0.3)));
    }
}

TEST_CASE("ties break toward smaller token ids") {
    const StepScorer flat = [](std::span<const int> prefix) {
        Eigen::VectorXd lp = Eigen::VectorXd::Constant(kV, std::log(1.0 / kV));
        if (prefix.size() == 1) lp(Vocabulary::kEnd) = 0.0;
        return lp;
    };
    DecodeConfig c;
    c.beam = 2;
    c.max_len = 4;
    const auto hyps = beam_search(flat, c);
    REQUIRE(hyps.size() == 2);
    CHECK(hyps[0].tokens == TokenIds{0, Vocabulary::kEnd});
    CHECK(hyps[1].tokens == TokenIds{1, Vocabulary::kEnd});
    CHECK(greedy_search(flat, 4) == TokenIds{0, Vocabulary::kEnd});
}

TEST_CASE("output length never exceeds the limit") {
    const StepScorer never_end = [](std::span<const int>) {
        Eigen::VectorXd lp = Eigen::VectorXd::Constant(kV, -5.0);
        lp(kA) = -0.01;
        lp(Vocabulary::kEnd) = -50.0;
        return lp;
    };
    DecodeConfig c;
    c.beam = 3;
    c.max_len = 4;
    const auto hyps = beam_search(never_end, c);
    REQUIRE_FALSE(hyps.empty());
    for (const auto& h : hyps) CHECK(h.tokens.size() <= 4);
    CHECK_FALSE(hyps[0].finished);
    CHECK(answer_tokens(hyps[0]).size() == 4);
    CHECK(answer_tokens(Hypothesis{{kA, Vocabulary::kEnd}, 0.0, 0.0, true}) == TokenIds{kA});

    c.beam = 0;
    CHECK_THROWS(beam_search(never_end, c));
    c.beam = 1;
    c.length_penalty = -1.0;
    CHECK_THROWS(beam_search(never_end, c));
}

}
