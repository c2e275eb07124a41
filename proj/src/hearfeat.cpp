#include "hear/hearfeat.hpp"

#include "hear/errors.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace hear {

namespace {

constexpr std::array<char, 8> kMagic = {'H', 'E', 'A', 'R', 'F', 'E', 'A', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                   static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in, const std::filesystem::path& path) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw FormatError(path.string() + ": truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void FeatureTrack::validate() const {
    if (video.rows() < 1) throw std::invalid_argument("feature track must have at least one frame");
    if (audio.rows() != video.rows()) throw std::invalid_argument("video and audio frame counts differ");
    if (!video.allFinite() || !audio.allFinite()) throw std::invalid_argument("feature track has non-finite values");
}

FeatureTrack make_feature_track(Matrix video, Matrix audio) {
    FeatureTrack t{std::move(video), std::move(audio)};
    t.validate();
    return t;
}

Matrix read_hearfeat(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string() + ": cannot open");
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), 8) || magic != kMagic) throw FormatError(path.string() + ": bad magic");
    const std::uint32_t version = get_u32(in, path);
    if (version != kHearfeatVersion) {
        throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
    }
    const std::uint32_t rows = get_u32(in, path);
    const std::uint32_t cols = get_u32(in, path);
    Matrix m(rows, cols);
    std::array<unsigned char, 4> b{};
    for (std::uint32_t i = 0; i < rows; ++i) {
        for (std::uint32_t j = 0; j < cols; ++j) {
            if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw FormatError(path.string() + ": truncated payload");
            const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                                       (static_cast<std::uint32_t>(b[2]) << 16) |
                                       (static_cast<std::uint32_t>(b[3]) << 24);
            const float f = std::bit_cast<float>(bits);
            if (!std::isfinite(f)) throw FormatError(path.string() + ": non-finite value");
            m(i, j) = static_cast<double>(f);
        }
    }
    return m;
}

void write_hearfeat(const std::filesystem::path& path, const Matrix& values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(path.string() + ": cannot open for writing");
    out.write(kMagic.data(), 8);
    put_u32(out, kHearfeatVersion);
    put_u32(out, static_cast<std::uint32_t>(values.rows()));
    put_u32(out, static_cast<std::uint32_t>(values.cols()));
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index j = 0; j < values.cols(); ++j) {
            put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(values(i, j))));
        }
    }
    if (!out) throw FormatError(path.string() + ": write failed");
}

Matrix resample_rows(const Matrix& values, Index rows) {
    if (rows < 1) throw std::invalid_argument("resample_rows: target row count must be positive");
    if (values.rows() < 1) throw std::invalid_argument("resample_rows: empty input");
    if (values.rows() == rows) return values;
    Matrix out(rows, values.cols());
    const Index src = values.rows();
    for (Index i = 0; i < rows; ++i) {
        const double x = rows == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(src - 1) / static_cast<double>(rows - 1);
        const auto lo = static_cast<Index>(std::floor(x));
        const Index hi = std::min(lo + 1, src - 1);
        const double w = x - static_cast<double>(lo);
        out.row(i) = (1.0 - w) * values.row(lo) + w * values.row(hi);
    }
    return out;
}

FeatureTrack load_feature_track(const std::filesystem::path& video_path, const std::filesystem::path& audio_path) {
    Matrix video = read_hearfeat(video_path);
    Matrix audio = read_hearfeat(audio_path);
    if (video.rows() < 1 || audio.rows() < 1) throw FormatError("feature files must contain at least one row");
    if (audio.rows() != video.rows()) audio = resample_rows(audio, video.rows());
    return make_feature_track(std::move(video), std::move(audio));
}

}  // namespace hear
