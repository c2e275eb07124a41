#pragma once

// HEARFEAT container: "HEARFEAT" magic, u32 LE version (1), u32 LE rows,
// u32 LE cols, then rows*cols IEEE-754 float32 LE values in row-major order.

#include "hear/types.hpp"

#include <filesystem>

namespace hear {

inline constexpr std::uint32_t kHearfeatVersion = 1;

Matrix read_hearfeat(const std::filesystem::path& path);
void write_hearfeat(const std::filesystem::path& path, const Matrix& values);

// Linear interpolation along the frame axis with both endpoints pinned.
Matrix resample_rows(const Matrix& values, Index rows);

// Reads both modalities and resamples audio to the video frame count.
FeatureTrack load_feature_track(const std::filesystem::path& video_path, const std::filesystem::path& audio_path);

}  // namespace hear
