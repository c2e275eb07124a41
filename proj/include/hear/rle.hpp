#pragma once

// Reconstructive listening enhancement: masked-audio reconstruction, the
// reconstruction upper bound ranking loss, and masking-distance schedules.

#include "hear/dlm.hpp"

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace hear {

struct MaskPlan {
    std::vector<Index> masked;  // sorted, non-empty, within [0, L)
    double p = 0.1;
};

// Exactly max(1, round(p * L)) indices, uniformly without replacement.
MaskPlan sample_mask(Index frames, double p, std::mt19937_64& rng);
MaskPlan sample_mask(Index frames, double p, std::uint64_t seed);

// Frames within distance <= n of any masked index, clipped to [0, L). Sorted.
std::vector<Index> surrounding_zero_set(Index frames, std::span<const Index> masked, int n);

// Rows at `masked` set to zero; other rows copied verbatim.
Matrix apply_audio_mask(const Matrix& audio, std::span<const Index> masked);

// Both streams zeroed on the surrounding zero set of distance n >= 1.
std::pair<Matrix, Matrix> apply_surrounding_mask(const FeatureTrack& track, std::span<const Index> masked, int n);

// Sum over masked rows of the squared distance between true and reconstructed audio.
Var reconstruction_error(const DlmModel& model, const DialogueInstance& instance, const Matrix& audio_input,
                         const Matrix& video_input, const Matrix& true_audio, std::span<const Index> masked);

// Reconstruction from (u with m zeroed, v, history, question).
Var audio_recon_loss(const DlmModel& model, const DialogueInstance& instance, const FeatureTrack& track,
                     std::span<const Index> masked);

// Same form with the surroundings up to distance n removed from both streams.
// `detach` cuts the graph so the bound acts as a fixed target.
Var upper_bound_loss(const DlmModel& model, const DialogueInstance& instance, const FeatureTrack& track,
                     std::span<const Index> masked, int n, bool detach = true);

inline constexpr double kDefaultRubMargin = 0.05;

// max(L_ar - L_ar^n + delta, 0)
Var rub_loss(const Var& recon, const Var& upper_bound, double delta = kDefaultRubMargin);
double rub_loss(double recon, double upper_bound, double delta = kDefaultRubMargin);

enum class ScheduleCurve { Hyperbolic, Linear, Logistic };
ScheduleCurve parse_schedule_curve(std::string_view text);
std::string to_string(ScheduleCurve curve);

struct ScheduleConfig {
    ScheduleCurve curve = ScheduleCurve::Hyperbolic;
    int n_max = 5;
    int e_max = 15;
    double logistic_steepness = 1.0;

    void validate() const;
    double alpha() const;  // (n_max - 1) / sqrt(e_max - 1)
};

// Rounds half away from zero.
int round_half_away(double x);

// Masking distance for 1-based epoch e in [1, e_max]; result in [1, n_max].
int mask_distance_schedule(int epoch, const ScheduleConfig& config);

struct RleOptions {
    double delta = kDefaultRubMargin;
    bool use_reconstruction = true;  // include L_ar in the objective
    bool use_ranking = true;         // include L_rub in the objective
    bool detach_upper_bound = true;
};

struct RleTerms {
    Var objective;       // the enabled terms summed
    double recon = 0.0;  // L_ar
    double upper = 0.0;  // L_ar^n
    double ranking = 0.0;  // L_rub
};

RleTerms rle_loss(const DlmModel& model, const DialogueInstance& instance, const FeatureTrack& track,
                  std::span<const Index> masked, int n, const RleOptions& options = {});

}  // namespace hear
