#include "support.hpp"

#include "hear/rle.hpp"

#include <algorithm>
#include <set>

using namespace hear;
using namespace hear::testing;

namespace {

std::vector<Index> brute_zero_set(Index frames, const std::vector<Index>& masked, int n) {
    std::vector<Index> out;
    for (Index i = 0; i < frames; ++i) {
        for (Index m : masked) {
            if (std::abs(i - m) <= n) {
                out.push_back(i);
                break;
            }
        }
    }
    return out;
}

bool contains(const std::vector<Index>& set, Index i) { return std::binary_search(set.begin(), set.end(), i); }

void zero_reconstruction_head(DlmModel& model) {
    for (auto& [name, p] : model.parameters().entries()) {
        if (name.rfind("reconstruction.output", 0) == 0) p.mutable_value().setZero();
    }
}

// Predicts each masked row by copying the nearest row that survived masking.
double copy_oracle_error(const Matrix& input, const Matrix& truth, const std::vector<Index>& masked,
                         const std::vector<Index>& removed) {
    double err = 0.0;
    for (Index m : masked) {
        Matrix guess = Matrix::Zero(1, truth.cols());
        for (Index d = 1; d < input.rows(); ++d) {
            const Index left = m - d, right = m + d;
            if (left >= 0 && !contains(removed, left)) {
                guess = input.row(left);
                break;
            }
            if (right < input.rows() && !contains(removed, right)) {
                guess = input.row(right);
                break;
            }
        }
        err += (truth.row(m) - guess).squaredNorm();
    }
    return err;
}

}  // namespace

TEST_SUITE("rle") {

TEST_CASE("mask sampling counts") {
    CHECK(sample_mask(20, 0.1, 1).masked.size() == 2);
    CHECK(sample_mask(5, 0.1, 1).masked.size() == 1);
    CHECK(sample_mask(24, 0.1, 1).masked.size() == 2);
    CHECK(sample_mask(25, 0.1, 1).masked.size() == 3);  // 2.5 rounds away from zero
    CHECK(sample_mask(9, 0.1, 3).masked == sample_mask(9, 0.1, 3).masked);
    CHECK_THROWS(sample_mask(1, 0.1, 1));
    CHECK_THROWS(sample_mask(10, 0.0, 1));
    CHECK_THROWS(sample_mask(10, 1.0, 1));
}

TEST_CASE("masking property sweep") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<Index> frames_dist(2, 40);
    std::uniform_real_distribution<double> p_dist(0.01, 0.99);
    std::uniform_int_distribution<int> n_dist(1, 12);
    for (int trial = 0; trial < 400; ++trial) {
        const Index frames = frames_dist(rng);
        const double p = p_dist(rng);
        const int n = n_dist(rng);
        const std::uint64_t seed = rng();
        const MaskPlan plan = sample_mask(frames, p, seed);
        const auto& m = plan.masked;

        const auto expected_count =
            std::clamp<Index>(static_cast<Index>(std::floor(p * static_cast<double>(frames) + 0.5)), 1, frames);
        REQUIRE(static_cast<Index>(m.size()) == expected_count);
        REQUIRE(std::is_sorted(m.begin(), m.end()));
        REQUIRE(std::set<Index>(m.begin(), m.end()).size() == m.size());
        REQUIRE(m.front() >= 0);
        REQUIRE(m.back() < frames);

        const std::vector<Index> zero = surrounding_zero_set(frames, m, n);
        REQUIRE(zero == brute_zero_set(frames, m, n));
        for (Index i : m) REQUIRE(contains(zero, i));
        const std::vector<Index> wider = surrounding_zero_set(frames, m, n + 1);
        for (Index i : zero) REQUIRE(contains(wider, i));

        const FeatureTrack track = tiny_track(frames, 3, 2, seed);
        const Matrix masked_audio = apply_audio_mask(track.audio, m);
        const auto [un, vn] = apply_surrounding_mask(track, m, n);
        for (Index i = 0; i < frames; ++i) {
            if (contains(m, i)) {
                REQUIRE(masked_audio.row(i).isZero(0.0));
            } else {
                REQUIRE(masked_audio.row(i) == track.audio.row(i));
            }
            if (contains(zero, i)) {
                REQUIRE(un.row(i).isZero(0.0));
                REQUIRE(vn.row(i).isZero(0.0));
            } else {
                REQUIRE(un.row(i) == track.audio.row(i));
                REQUIRE(vn.row(i) == track.video.row(i));
            }
        }
    }
}

TEST_CASE("surrounding mask examples") {
    CHECK(surrounding_zero_set(9, std::vector<Index>{4}, 3) == std::vector<Index>{1, 2, 3, 4, 5, 6, 7});
    CHECK(surrounding_zero_set(4, std::vector<Index>{0}, 1) == std::vector<Index>{0, 1});
    const FeatureTrack track = tiny_track(6, 3, 2, 5);
    const auto [u, v] = apply_surrounding_mask(track, std::vector<Index>{2}, 6);
    CHECK(u.isZero(0.0));
    CHECK(v.isZero(0.0));
    CHECK_THROWS(apply_surrounding_mask(track, std::vector<Index>{2}, 0));
}

TEST_CASE("audio mask examples") {
    Matrix audio(4, 2);
    audio << 1, 2, 3, 4, 5, 6, 7, 8;
    Matrix expected = audio;
    expected.row(1).setZero();
    CHECK(apply_audio_mask(audio, std::vector<Index>{1}) == expected);
    CHECK(apply_audio_mask(audio, std::vector<Index>{0, 1, 2, 3}).isZero(0.0));
}

TEST_CASE("reconstruction losses") {
    const Vocabulary vocab = tiny_vocab();
    DlmModel model(tiny_config(static_cast<int>(vocab.size())), 8);
    const DialogueInstance inst = tiny_instance(vocab);
    zero_reconstruction_head(model);

    SUBCASE("zero head gives the summed squared norms") {
        Matrix audio(5, 2);
        audio << 1, 1, 1, 1.4142135623730951, 0, 0, 0.5, 0.5, 1, -1;
        Matrix row_norm3(1, 2);
        row_norm3 << 1.0, std::sqrt(2.0);
        audio.row(1) = row_norm3;
        audio.row(3) = row_norm3;
        const FeatureTrack track = make_feature_track(random_matrix(5, 3, 2), audio);
        const std::vector<Index> m = {1, 3};
        CHECK(audio_recon_loss(model, inst, track, m).item() == doctest::Approx(6.0).epsilon(1e-14));
        CHECK(upper_bound_loss(model, inst, track, m, 5).item() == doctest::Approx(6.0).epsilon(1e-14));
        CHECK_THROWS(upper_bound_loss(model, inst, track, m, 0));
    }
    SUBCASE("perfect reconstruction on both branches leaves the margin") {
        const FeatureTrack track = make_feature_track(random_matrix(5, 3, 2), Matrix::Zero(5, 2));
        const RleTerms t = rle_loss(model, inst, track, std::vector<Index>{2}, 1);
        CHECK(t.recon == 0.0);
        CHECK(t.upper == 0.0);
        CHECK(t.ranking == doctest::Approx(kDefaultRubMargin).epsilon(1e-15));
        CHECK(t.objective.item() == doctest::Approx(kDefaultRubMargin).epsilon(1e-15));
    }
}

TEST_CASE("objective combines the enabled terms") {
    const Vocabulary vocab = tiny_vocab();
    const DlmModel model(tiny_config(static_cast<int>(vocab.size())), 8);
    const DialogueInstance inst = tiny_instance(vocab);
    const FeatureTrack track = tiny_track(9, 3, 2, 77);
    const std::vector<Index> m = {3, 6};
    const RleTerms full = rle_loss(model, inst, track, m, 2);
    CHECK(full.recon >= 0.0);
    CHECK(full.ranking == doctest::Approx(std::max(full.recon - full.upper + kDefaultRubMargin, 0.0)).epsilon(1e-14));
    CHECK(full.objective.item() == doctest::Approx(full.recon + full.ranking).epsilon(1e-14));

    RleOptions only_recon;
    only_recon.use_ranking = false;
    CHECK(rle_loss(model, inst, track, m, 2, only_recon).objective.item() == doctest::Approx(full.recon).epsilon(1e-14));
    RleOptions only_rank;
    only_rank.use_reconstruction = false;
    CHECK(rle_loss(model, inst, track, m, 2, only_rank).objective.item() ==
          doctest::Approx(full.ranking).epsilon(1e-14));
    RleOptions none;
    none.use_ranking = false;
    none.use_reconstruction = false;
    CHECK_THROWS(rle_loss(model, inst, track, m, 2, none));

    RleOptions inactive;
    inactive.delta = full.upper - full.recon - 1.0;
    const RleTerms t = rle_loss(model, inst, track, m, 2, inactive);
    CHECK(t.ranking == 0.0);
    CHECK(t.objective.item() == doctest::Approx(t.recon).epsilon(1e-14));
}

TEST_CASE("ranking loss examples") {
    CHECK(rub_loss(0.7, 0.7) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(rub_loss(0.7, 0.75) == doctest::Approx(0.0));
    CHECK(rub_loss(1.0, 0.5, 0.05) == doctest::Approx(0.55).epsilon(1e-15));
    CHECK(rub_loss(0.4, 0.2, 0.0) + 0.4 == doctest::Approx(0.6).epsilon(1e-15));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        const double a = u(rng), b = u(rng), d = u(rng) * 0.1 + 1e-3;
        const double r = rub_loss(a, b, d);
        CHECK(r >= 0.0);
        CHECK((r == 0.0) == (b >= a + d));
        const Var v = rub_loss(Var::constant(Matrix::Constant(1, 1, a)), Var::constant(Matrix::Constant(1, 1, b)), d);
        CHECK(v.item() == r);
    }
}

TEST_CASE("a copy-from-neighbours reconstructor is bounded by its surroundings") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const Index frames = 12 + trial % 9;
        // Smooth audio: nearer rows are better copies.
        Matrix audio(frames, 3);
        for (Index t = 0; t < frames; ++t) {
            for (Index c = 0; c < 3; ++c) audio(t, c) = 0.3 * static_cast<double>(t) * (c + 1) + 0.1 * c;
        }
        const FeatureTrack track = make_feature_track(Matrix::Zero(frames, 2), audio);
        const MaskPlan plan = sample_mask(frames, 0.1, rng);
        for (int n = 1; n <= 3; ++n) {
            const Matrix u_masked = apply_audio_mask(audio, plan.masked);
            const auto [un, vn] = apply_surrounding_mask(track, plan.masked, n);
            const double recon = copy_oracle_error(u_masked, audio, plan.masked, plan.masked);
            const double upper =
                copy_oracle_error(un, audio, plan.masked, surrounding_zero_set(frames, plan.masked, n));
            CHECK(upper >= recon);
        }
    }
}

}
