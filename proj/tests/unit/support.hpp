#pragma once

#include "hear/dlm.hpp"
#include "hear/vocab.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <unistd.h>

namespace hear::testing {

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

inline Vocabulary tiny_vocab() {
    const std::vector<std::string> texts = {"a man in a room .", "can you hear any sounds ?",
                                            "what color is it ?", "yes , music", "no it is blue"};
    return Vocabulary::build(texts);
}

// Under 1k parameters: the size used for finite-difference checks.
inline DlmConfig tiny_config(int vocab_size) {
    DlmConfig c;
    c.vocab_size = vocab_size;
    c.video_dim = 3;
    c.audio_dim = 2;
    c.d_model = 4;
    c.heads = 1;
    c.encoder_layers = 1;
    c.decoder_layers = 1;
    c.ff_hidden = 4;
    c.recon_hidden = 4;
    c.max_encoder_len = 40;
    c.max_answer_len = 6;
    return c;
}

inline DialogueInstance tiny_instance(const Vocabulary& v) {
    DialogueInstance inst;
    inst.clip_id = "c0";
    inst.caption = v.encode("a man in a room .");
    inst.history = {{v.encode("what color is it ?"), v.encode("it is blue")}};
    inst.question = v.encode("can you hear any sounds ?");
    inst.answer = v.encode("yes , music");
    inst.round = 2;
    return inst;
}

inline FeatureTrack tiny_track(Index frames, Index dv, Index da, std::uint64_t seed) {
    return make_feature_track(random_matrix(frames, dv, seed), random_matrix(frames, da, seed + 1));
}

// Largest relative errors between analytic and central-difference gradients
// over every parameter entry.
struct GradReport {
    double norm_relative = 0.0;  // ||a - n|| / max(||a||, ||n||)
    double worst_entry = 0.0;    // max |a - n| / max(|a|, |n|, entry_floor)
    std::size_t entries = 0;
};

inline GradReport check_gradients(nn::ParameterStore& params, const std::function<Var()>& loss_fn,
                                  double step = 1e-5, double entry_floor = 1e-2) {
    params.zero_grad();
    Var loss = loss_fn();
    loss.backward();
    GradReport r;
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (auto& [name, p] : params.entries()) {
        const Matrix analytic = p.grad().size() == 0 ? Matrix::Zero(p.rows(), p.cols()) : p.grad();
        for (Index i = 0; i < p.value().size(); ++i) {
            double& x = p.mutable_value().data()[i];
            const double saved = x;
            double up, down;
            {
                ag::NoGradGuard guard;
                x = saved + step;
                up = loss_fn().item();
                x = saved - step;
                down = loss_fn().item();
            }
            x = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic.data()[i];
            diff2 += (a - numeric) * (a - numeric);
            a2 += a * a;
            n2 += numeric * numeric;
            const double denom = std::max({std::abs(a), std::abs(numeric), entry_floor});
            r.worst_entry = std::max(r.worst_entry, std::abs(a - numeric) / denom);
            ++r.entries;
        }
    }
    r.norm_relative = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-300});
    return r;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("hear_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::filesystem::path fixture_dir() { return std::filesystem::path(HEAR_FIXTURE_DIR); }

}  // namespace hear::testing
