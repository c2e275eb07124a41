#include "hear/checkpoint.hpp"

#include "hear/errors.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace hear {

namespace {

constexpr std::array<char, 8> kMagic = {'H', 'E', 'A', 'R', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::ostream& out, U v) {
    std::array<char, sizeof(U)> b{};
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b.data(), b.size());
}

template <typename U>
U get_le(std::istream& in, const std::string& what) {
    std::array<unsigned char, sizeof(U)> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) throw FormatError("checkpoint: truncated " + what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
    return v;
}

}  // namespace

const Matrix& TensorBundle::at(const std::string& name) const {
    for (const auto& [n, m] : tensors) {
        if (n == name) return m;
    }
    throw FormatError("checkpoint: missing tensor '" + name + "'");
}

void write_bundle(const std::filesystem::path& path, const TensorBundle& bundle) {
    nlohmann::json header = bundle.header;
    header["tensors"] = nlohmann::json::array();
    for (const auto& [name, m] : bundle.tensors) {
        header["tensors"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    }
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
        out.write(kMagic.data(), kMagic.size());
        put_le<std::uint32_t>(out, kCheckpointVersion);
        put_le<std::uint64_t>(out, text.size());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& [_, m] : bundle.tensors) {
            for (Index i = 0; i < m.rows(); ++i) {
                for (Index j = 0; j < m.cols(); ++j) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m(i, j)));
            }
        }
        if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

TensorBundle read_bundle(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("checkpoint: cannot open " + path.string());
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw FormatError("checkpoint: bad magic in " + path.string());
    }
    const auto version = get_le<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto len = get_le<std::uint64_t>(in, "header length");
    if (len > (std::uint64_t{1} << 32)) throw FormatError("checkpoint: implausible header length");
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("checkpoint: truncated header");

    TensorBundle bundle;
    try {
        bundle.header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("checkpoint: bad header: ") + e.what());
    }
    if (!bundle.header.contains("tensors") || !bundle.header["tensors"].is_array()) {
        throw FormatError("checkpoint: header has no tensor table");
    }
    for (const auto& t : bundle.header["tensors"]) {
        const auto name = t.at("name").get<std::string>();
        const auto rows = t.at("rows").get<Index>();
        const auto cols = t.at("cols").get<Index>();
        if (rows < 0 || cols < 0) throw FormatError("checkpoint: negative shape for " + name);
        Matrix m(rows, cols);
        for (Index i = 0; i < rows; ++i) {
            for (Index j = 0; j < cols; ++j) m(i, j) = std::bit_cast<double>(get_le<std::uint64_t>(in, name));
        }
        bundle.tensors.emplace_back(name, std::move(m));
    }
    bundle.header.erase("tensors");
    return bundle;
}

void append_parameters(TensorBundle& bundle, const nn::ParameterStore& params, const std::string& prefix) {
    for (const auto& [name, p] : params.entries()) bundle.tensors.emplace_back(prefix + name, p.value());
}

void load_parameters(const TensorBundle& bundle, nn::ParameterStore& params, const std::string& prefix) {
    for (auto& [name, p] : params.entries()) {
        const Matrix& m = bundle.at(prefix + name);
        if (m.rows() != p.value().rows() || m.cols() != p.value().cols()) {
            throw FormatError("checkpoint: shape mismatch for '" + name + "'");
        }
        p.mutable_value() = m;
    }
}

void save_model(const std::filesystem::path& path, const DlmModel& model, const Vocabulary& vocab,
                const nlohmann::json& extra) {
    TensorBundle bundle;
    bundle.header = {{"kind", "dlm"}, {"config", model.config().to_json()}, {"vocab", vocab.to_json()},
                     {"extra", extra}};
    append_parameters(bundle, model.parameters());
    write_bundle(path, bundle);
}

LoadedModel load_model(const std::filesystem::path& path) {
    const TensorBundle bundle = read_bundle(path);
    if (bundle.header.value("kind", "") != "dlm") throw FormatError("checkpoint: " + path.string() + " is not a model");
    const DlmConfig config = DlmConfig::from_json(bundle.header.at("config"));
    LoadedModel loaded{DlmModel(config, 0), Vocabulary::from_json(bundle.header.at("vocab")),
                       bundle.header.value("extra", nlohmann::json::object())};
    load_parameters(bundle, loaded.model.parameters());
    return loaded;
}

void save_estimator(const std::filesystem::path& path, const EstimatorModel& estimator, const Vocabulary& vocab,
                    const nlohmann::json& extra) {
    TensorBundle bundle;
    bundle.header = {{"kind", "estimator"},
                     {"config", estimator.config().to_json()},
                     {"vocab_size", estimator.vocab_size()},
                     {"vocab", vocab.to_json()},
                     {"extra", extra}};
    append_parameters(bundle, estimator.parameters());
    write_bundle(path, bundle);
}

LoadedEstimator load_estimator(const std::filesystem::path& path) {
    const TensorBundle bundle = read_bundle(path);
    if (bundle.header.value("kind", "") != "estimator") {
        throw FormatError("checkpoint: " + path.string() + " is not an estimator");
    }
    const EstimatorConfig config = EstimatorConfig::from_json(bundle.header.at("config"));
    LoadedEstimator loaded{EstimatorModel(config, bundle.header.at("vocab_size").get<int>(), 0),
                           Vocabulary::from_json(bundle.header.at("vocab")),
                           bundle.header.value("extra", nlohmann::json::object())};
    load_parameters(bundle, loaded.model.parameters());
    return loaded;
}

}  // namespace hear
