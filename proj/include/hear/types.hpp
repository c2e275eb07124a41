#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hear {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using TokenIds = std::vector<int>;

inline constexpr std::size_t kDefaultHistoryWindow = 3;

// Per-frame video and audio features of one clip, aligned on the frame axis.
struct FeatureTrack {
    Matrix video;  // L x Dv
    Matrix audio;  // L x Da

    Index frames() const { return video.rows(); }
    Index video_dim() const { return video.cols(); }
    Index audio_dim() const { return audio.cols(); }

    // Throws std::invalid_argument unless rows match, L >= 1 and every entry is finite.
    void validate() const;
};

FeatureTrack make_feature_track(Matrix video, Matrix audio);

struct QaPair {
    TokenIds question;
    TokenIds answer;
};

struct DialogueInstance {
    std::string clip_id;
    TokenIds caption;
    std::vector<QaPair> history;  // most recent last, at most `window` entries
    TokenIds question;
    TokenIds answer;
    int round = 1;  // 1-based
};

// The single history builder shared by ingestion, synthesis and the session
// service: keeps the last `window` rounds of everything asked so far.
template <typename Pair>
std::vector<Pair> window_history(std::span<const Pair> prior_rounds, std::size_t window) {
    const std::size_t skip = prior_rounds.size() > window ? prior_rounds.size() - window : 0;
    return std::vector<Pair>(prior_rounds.begin() + static_cast<std::ptrdiff_t>(skip), prior_rounds.end());
}

}  // namespace hear
