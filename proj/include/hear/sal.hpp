#pragma once

// Sensible audio listening: keyword sensing and question-conditioned fusion.

#include "hear/dlm.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hear {

class KeywordSet {
  public:
    // The 19 base keywords used for audio sensing.
    static KeywordSet published();
    // One keyword per line; blank lines and '#' comments ignored.
    static KeywordSet from_file(const std::filesystem::path& path);

    explicit KeywordSet(std::vector<std::string> base);

    // Case-insensitive whole-token match against a base keyword or its
    // naive plural ("s" / "es" appended).
    bool matches(std::string_view token) const;
    std::optional<std::string> base_of(std::string_view token) const;
    const std::vector<std::string>& base() const { return base_; }

  private:
    std::vector<std::string> base_;
};

bool contains_audio_keyword(std::span<const std::string> question_tokens, const KeywordSet& keywords);
// Distinct base keywords present in the question, in keyword-list order.
std::vector<std::string> matched_keywords(std::span<const std::string> question_tokens, const KeywordSet& keywords);

enum class SalMode { None, Keyword, Estimator, Both };
enum class GatingMode { None, KeywordGate, EstimatorCalibrate };

std::string to_string(SalMode mode);
std::string to_string(GatingMode mode);
SalMode parse_sal_mode(std::string_view text);

struct RelatednessDecision {
    bool keyword_hit = false;
    double r = 0.0;  // estimator score; 0 when no estimator is attached
    GatingMode mode = GatingMode::None;
};

// Resolves the gating for one question under `mode`. `estimator_score` must be
// set for Estimator and Both.
RelatednessDecision decide_gating(SalMode mode, bool keyword_hit, std::optional<double> estimator_score);

// [u || v]W, or [u || 0]W when the question hits a keyword.
Var keyword_gate_fuse(const DlmModel& model, const FeatureTrack& track, bool keyword_hit);
Var keyword_gate_fuse(const DlmModel& model, const FeatureTrack& track, std::span<const std::string> question_tokens,
                      const KeywordSet& keywords);

// [r u || (1 - r) v]W.
Var calibrated_fuse(const DlmModel& model, const FeatureTrack& track, double r);
Var calibrated_fuse(const DlmModel& model, const FeatureTrack& track, const Var& r);

// Fusion selected by a decision.
Var sal_fuse(const DlmModel& model, const FeatureTrack& track, const RelatednessDecision& decision);

// Token-mean answer NLL over the sensible fused features.
Var sal_loss(const DlmModel& model, const DialogueInstance& instance, const Var& fused);

}  // namespace hear
