#include "hear/rle.hpp"

#include "hear/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hear {

MaskPlan sample_mask(Index frames, double p, std::mt19937_64& rng) {
    if (frames < 2) throw std::invalid_argument("sample_mask: need at least 2 frames");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("sample_mask: p must be in (0, 1)");
    const Index count = std::clamp<Index>(round_half_away(p * static_cast<double>(frames)), 1, frames);
    std::vector<Index> all(static_cast<std::size_t>(frames));
    std::iota(all.begin(), all.end(), Index{0});
    for (Index i = 0; i < count; ++i) {
        std::uniform_int_distribution<Index> pick(i, frames - 1);
        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
    }
    MaskPlan plan;
    plan.p = p;
    plan.masked.assign(all.begin(), all.begin() + count);
    std::sort(plan.masked.begin(), plan.masked.end());
    return plan;
}

MaskPlan sample_mask(Index frames, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_mask(frames, p, rng);
}

std::vector<Index> surrounding_zero_set(Index frames, std::span<const Index> masked, int n) {
    if (n < 0) throw std::invalid_argument("surrounding_zero_set: negative distance");
    std::vector<bool> hit(static_cast<std::size_t>(frames), false);
    for (Index m : masked) {
        if (m < 0 || m >= frames) throw std::out_of_range("surrounding_zero_set: masked index out of range");
        const Index lo = std::max<Index>(0, m - n);
        const Index hi = std::min<Index>(frames - 1, m + n);
        for (Index i = lo; i <= hi; ++i) hit[static_cast<std::size_t>(i)] = true;
    }
    std::vector<Index> out;
    for (Index i = 0; i < frames; ++i) {
        if (hit[static_cast<std::size_t>(i)]) out.push_back(i);
    }
    return out;
}

Matrix apply_audio_mask(const Matrix& audio, std::span<const Index> masked) {
    Matrix out = audio;
    for (Index m : masked) {
        if (m < 0 || m >= audio.rows()) throw std::out_of_range("apply_audio_mask: index out of range");
        out.row(m).setZero();
    }
    return out;
}

std::pair<Matrix, Matrix> apply_surrounding_mask(const FeatureTrack& track, std::span<const Index> masked, int n) {
    if (n < 1) throw std::invalid_argument("apply_surrounding_mask: n must be >= 1");
    const auto zero = surrounding_zero_set(track.frames(), masked, n);
    Matrix audio = track.audio;
    Matrix video = track.video;
    for (Index i : zero) {
        audio.row(i).setZero();
        video.row(i).setZero();
    }
    return {std::move(audio), std::move(video)};
}

Var reconstruction_error(const DlmModel& model, const DialogueInstance& instance, const Matrix& audio_input,
                         const Matrix& video_input, const Matrix& true_audio, std::span<const Index> masked) {
    const EncoderOutput enc = model.encode(model.embed_av(audio_input, video_input), instance);
    Matrix target(static_cast<Index>(masked.size()), true_audio.cols());
    for (std::size_t i = 0; i < masked.size(); ++i) target.row(static_cast<Index>(i)) = true_audio.row(masked[i]);
    return ag::squared_error_sum(model.reconstruct_audio(enc, masked), target);
}

Var audio_recon_loss(const DlmModel& model, const DialogueInstance& instance, const FeatureTrack& track,
                     std::span<const Index> masked) {
    if (masked.empty()) throw std::invalid_argument("audio_recon_loss: empty mask");
    return reconstruction_error(model, instance, apply_audio_mask(track.audio, masked), track.video, track.audio,
                                masked);
}

Var upper_bound_loss(const DlmModel& model, const DialogueInstance& instance, const FeatureTrack& track,
                     std::span<const Index> masked, int n, bool detach) {
    if (masked.empty()) throw std::invalid_argument("upper_bound_loss: empty mask");
    auto [audio, video] = apply_surrounding_mask(track, masked, n);
    if (detach) {
        ag::NoGradGuard no_grad;
        return reconstruction_error(model, instance, audio, video, track.audio, masked);
    }
    return reconstruction_error(model, instance, audio, video, track.audio, masked);
}

Var rub_loss(const Var& recon, const Var& upper_bound, double delta) {
    return ag::hinge(ag::add_const(recon - upper_bound, Matrix::Constant(1, 1, delta)));
}

double rub_loss(double recon, double upper_bound, double delta) { return std::max(recon - upper_bound + delta, 0.0); }

ScheduleCurve parse_schedule_curve(std::string_view text) {
    if (text == "hyperbolic") return ScheduleCurve::Hyperbolic;
    if (text == "linear") return ScheduleCurve::Linear;
    if (text == "logistic") return ScheduleCurve::Logistic;
    throw ConfigError("schedule.curve", "expected hyperbolic|linear|logistic, got '" + std::string(text) + "'");
}

std::string to_string(ScheduleCurve curve) {
    switch (curve) {
        case ScheduleCurve::Hyperbolic: return "hyperbolic";
        case ScheduleCurve::Linear: return "linear";
        case ScheduleCurve::Logistic: return "logistic";
    }
    return "hyperbolic";
}

void ScheduleConfig::validate() const {
    if (n_max < 1) throw ConfigError("schedule.n_max", "must be >= 1");
    if (e_max < 1) throw ConfigError("schedule.e_max", "must be >= 1");
    if (!(logistic_steepness > 0.0)) throw ConfigError("schedule.logistic_steepness", "must be > 0");
}

double ScheduleConfig::alpha() const {
    return e_max > 1 ? static_cast<double>(n_max - 1) / std::sqrt(static_cast<double>(e_max - 1)) : 0.0;
}

int round_half_away(double x) { return static_cast<int>(std::round(x)); }

int mask_distance_schedule(int epoch, const ScheduleConfig& config) {
    config.validate();
    if (epoch < 1 || epoch > config.e_max) {
        throw std::out_of_range("mask_distance_schedule: epoch " + std::to_string(epoch) + " outside [1, " +
                                std::to_string(config.e_max) + "]");
    }
    // A one-epoch schedule has only its final epoch.
    if (config.e_max == 1) return 1;
    const double e = epoch;
    const double e_max = config.e_max;
    const double span = config.n_max - 1;
    int n = 1;
    switch (config.curve) {
        case ScheduleCurve::Hyperbolic:
            n = round_half_away(config.alpha() * std::sqrt(e_max - e)) + 1;
            break;
        case ScheduleCurve::Linear:
            n = round_half_away(config.n_max - span * (e - 1.0) / (e_max - 1.0));
            break;
        case ScheduleCurve::Logistic: {
            // Logistic centred mid-run, rescaled so the first and last epochs hit n_max and 1.
            const double k = config.logistic_steepness;
            const double mid = (1.0 + e_max) / 2.0;
            auto s = [&](double x) { return 1.0 / (1.0 + std::exp(k * (x - mid))); };
            const double unit = (s(e) - s(e_max)) / (s(1.0) - s(e_max));
            n = round_half_away(1.0 + span * unit);
            break;
        }
    }
    return std::clamp(n, 1, config.n_max);
}

RleTerms rle_loss(const DlmModel& model, const DialogueInstance& instance, const FeatureTrack& track,
                  std::span<const Index> masked, int n, const RleOptions& options) {
    if (!options.use_reconstruction && !options.use_ranking) {
        throw std::invalid_argument("rle_loss: no enabled term");
    }
    Var recon = audio_recon_loss(model, instance, track, masked);
    Var upper = upper_bound_loss(model, instance, track, masked, n, options.detach_upper_bound);
    Var ranking = rub_loss(recon, upper, options.delta);
    RleTerms t;
    t.recon = recon.item();
    t.upper = upper.item();
    t.ranking = ranking.item();
    if (options.use_reconstruction && options.use_ranking) {
        t.objective = recon + ranking;
    } else {
        t.objective = options.use_reconstruction ? recon : ranking;
    }
    return t;
}

}  // namespace hear
