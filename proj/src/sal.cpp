#include "hear/sal.hpp"

#include "hear/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace hear {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

KeywordSet KeywordSet::published() {
    return KeywordSet({"noise", "sound", "voice", "speech", "speak", "talk", "listen", "hear", "say", "sing",
                       "music", "audio", "call", "hum", "loud", "tones", "utter", "volume", "song"});
}

KeywordSet KeywordSet::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path.string() + ": cannot open keyword list");
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto last = line.find_last_not_of(" \t\r");
        words.push_back(line.substr(first, last - first + 1));
    }
    if (words.empty()) throw FormatError(path.string() + ": keyword list is empty");
    return KeywordSet(std::move(words));
}

KeywordSet::KeywordSet(std::vector<std::string> base) {
    for (auto& w : base) base_.push_back(lower(w));
}

std::optional<std::string> KeywordSet::base_of(std::string_view token) const {
    const std::string t = lower(token);
    for (const auto& k : base_) {
        if (t == k || t == k + "s" || t == k + "es") return k;
    }
    return std::nullopt;
}

bool KeywordSet::matches(std::string_view token) const { return base_of(token).has_value(); }

bool contains_audio_keyword(std::span<const std::string> question_tokens, const KeywordSet& keywords) {
    return std::any_of(question_tokens.begin(), question_tokens.end(),
                       [&](const std::string& t) { return keywords.matches(t); });
}

std::vector<std::string> matched_keywords(std::span<const std::string> question_tokens, const KeywordSet& keywords) {
    std::vector<std::string> hits;
    for (const auto& k : keywords.base()) {
        for (const auto& t : question_tokens) {
            if (keywords.base_of(t) == k) {
                hits.push_back(k);
                break;
            }
        }
    }
    return hits;
}

std::string to_string(SalMode mode) {
    switch (mode) {
        case SalMode::None: return "none";
        case SalMode::Keyword: return "keyword";
        case SalMode::Estimator: return "estimator";
        case SalMode::Both: return "both";
    }
    return "none";
}

std::string to_string(GatingMode mode) {
    switch (mode) {
        case GatingMode::None: return "none";
        case GatingMode::KeywordGate: return "keyword-gate";
        case GatingMode::EstimatorCalibrate: return "estimator-calibrate";
    }
    return "none";
}

SalMode parse_sal_mode(std::string_view text) {
    if (text == "none") return SalMode::None;
    if (text == "keyword") return SalMode::Keyword;
    if (text == "estimator") return SalMode::Estimator;
    if (text == "both") return SalMode::Both;
    throw ConfigError("sal_mode", "expected none|keyword|estimator|both, got '" + std::string(text) + "'");
}

RelatednessDecision decide_gating(SalMode mode, bool keyword_hit, std::optional<double> estimator_score) {
    RelatednessDecision d;
    d.keyword_hit = keyword_hit;
    d.r = estimator_score.value_or(0.0);
    const bool needs_score = mode == SalMode::Estimator || (mode == SalMode::Both && !keyword_hit);
    if (needs_score && !estimator_score) throw std::invalid_argument("estimator score required for SAL mode");
    switch (mode) {
        case SalMode::None: d.mode = GatingMode::None; break;
        case SalMode::Keyword: d.mode = keyword_hit ? GatingMode::KeywordGate : GatingMode::None; break;
        case SalMode::Estimator: d.mode = GatingMode::EstimatorCalibrate; break;
        case SalMode::Both: d.mode = keyword_hit ? GatingMode::KeywordGate : GatingMode::EstimatorCalibrate; break;
    }
    return d;
}

Var keyword_gate_fuse(const DlmModel& model, const FeatureTrack& track, bool keyword_hit) {
    if (!keyword_hit) return model.embed_av(track.audio, track.video);
    return model.embed_av(track.audio, Matrix::Zero(track.video.rows(), track.video.cols()));
}

Var keyword_gate_fuse(const DlmModel& model, const FeatureTrack& track, std::span<const std::string> question_tokens,
                      const KeywordSet& keywords) {
    return keyword_gate_fuse(model, track, contains_audio_keyword(question_tokens, keywords));
}

Var calibrated_fuse(const DlmModel& model, const FeatureTrack& track, double r) {
    return model.embed_av(Matrix(track.audio * r), Matrix(track.video * (1.0 - r)));
}

Var calibrated_fuse(const DlmModel& model, const FeatureTrack& track, const Var& r) {
    return model.embed_av(ag::scale(Var::constant(track.audio), r),
                          ag::scale(Var::constant(track.video), ag::one_minus(r)));
}

Var sal_fuse(const DlmModel& model, const FeatureTrack& track, const RelatednessDecision& decision) {
    switch (decision.mode) {
        case GatingMode::None: return model.embed_av(track.audio, track.video);
        case GatingMode::KeywordGate: return keyword_gate_fuse(model, track, true);
        case GatingMode::EstimatorCalibrate: return calibrated_fuse(model, track, decision.r);
    }
    return model.embed_av(track.audio, track.video);
}

Var sal_loss(const DlmModel& model, const DialogueInstance& instance, const Var& fused) {
    const TokenIds targets = answer_targets(instance);
    return dlm_loss(model.forward(fused, instance, targets), targets);
}

}  // namespace hear
