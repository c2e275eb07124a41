#include "hear/dlm.hpp"

#include "hear/errors.hpp"
#include "hear/vocab.hpp"

#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace hear {

void DlmConfig::validate() const {
    if (vocab_size <= Vocabulary::kSpecialCount) throw ConfigError("model.vocab_size", "must exceed the special tokens");
    if (video_dim < 1) throw ConfigError("model.video_dim", "must be >= 1");
    if (audio_dim < 1) throw ConfigError("model.audio_dim", "must be >= 1");
    if (d_model < 1) throw ConfigError("model.d_model", "must be >= 1");
    if (heads < 1 || d_model % heads != 0) throw ConfigError("model.heads", "must divide d_model");
    if (encoder_layers < 0) throw ConfigError("model.encoder_layers", "must be >= 0");
    if (decoder_layers < 0) throw ConfigError("model.decoder_layers", "must be >= 0");
    if (ff_hidden < 1) throw ConfigError("model.ff_hidden", "must be >= 1");
    if (recon_hidden < 1) throw ConfigError("model.recon_hidden", "must be >= 1");
    if (max_encoder_len < 1) throw ConfigError("model.max_encoder_len", "must be >= 1");
    if (max_answer_len < 1) throw ConfigError("model.max_answer_len", "must be >= 1");
}

nlohmann::json DlmConfig::to_json() const {
    return {{"vocab_size", vocab_size},         {"video_dim", video_dim},
            {"audio_dim", audio_dim},           {"d_model", d_model},
            {"heads", heads},                   {"encoder_layers", encoder_layers},
            {"decoder_layers", decoder_layers}, {"ff_hidden", ff_hidden},
            {"recon_hidden", recon_hidden},     {"max_encoder_len", max_encoder_len},
            {"max_answer_len", max_answer_len}};
}

DlmConfig DlmConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model", "expected an object");
    static const std::set<std::string> known = {"vocab_size", "video_dim", "audio_dim", "d_model", "heads", "encoder_layers", "decoder_layers", "ff_hidden", "recon_hidden", "max_encoder_len", "max_answer_len"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ConfigError("model." + key, "unknown key");
    }
    DlmConfig c;
    auto read = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            field = j.at(key).get<std::decay_t<decltype(field)>>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(std::string("model.") + key, "wrong type");
        }
    };
    read("vocab_size", c.vocab_size);
    read("video_dim", c.video_dim);
    read("audio_dim", c.audio_dim);
    read("d_model", c.d_model);
    read("heads", c.heads);
    read("encoder_layers", c.encoder_layers);
    read("decoder_layers", c.decoder_layers);
    read("ff_hidden", c.ff_hidden);
    read("recon_hidden", c.recon_hidden);
    read("max_encoder_len", c.max_encoder_len);
    read("max_answer_len", c.max_answer_len);
    return c;
}

EncoderText encoder_text(const DialogueInstance& instance) {
    EncoderText t;
    auto push = [&](const TokenIds& ids, Segment seg) {
        for (int id : ids) {
            t.ids.push_back(id);
            t.segments.push_back(static_cast<int>(seg));
        }
    };
    push(instance.caption, Segment::History);
    for (const auto& qa : instance.history) {
        push({Vocabulary::kSep}, Segment::History);
        push(qa.question, Segment::History);
        push({Vocabulary::kSep}, Segment::History);
        push(qa.answer, Segment::History);
    }
    push({Vocabulary::kSep}, Segment::Question);
    push(instance.question, Segment::Question);
    return t;
}

TokenIds answer_targets(const DialogueInstance& instance) {
    TokenIds t = instance.answer;
    t.push_back(Vocabulary::kEnd);
    return t;
}

DlmModel::DlmModel(const DlmConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(seed);
    const Index d = config_.d_model;
    const auto dd = static_cast<double>(d);
    joint_ = params_.add("embed.joint", nn::uniform_init(config_.audio_dim + config_.video_dim, d,
                                                         static_cast<double>(config_.audio_dim + config_.video_dim), rng));
    token_embedding_ = params_.add("embed.tokens", nn::uniform_init(config_.vocab_size, d, dd, rng));
    encoder_positions_ = params_.add("embed.encoder_positions", nn::uniform_init(config_.max_encoder_len, d, dd, rng));
    segment_embedding_ = params_.add("embed.segments", nn::uniform_init(3, d, dd, rng));
    decoder_positions_ = params_.add("embed.decoder_positions", nn::uniform_init(config_.max_answer_len, d, dd, rng));
    input_norm_ = nn::LayerNorm(params_, "encoder.input_norm", d);
    for (int i = 0; i < config_.encoder_layers; ++i) {
        encoder_.emplace_back(params_, "encoder.layer" + std::to_string(i), d, config_.heads, config_.ff_hidden, rng);
    }
    encoder_norm_ = nn::LayerNorm(params_, "encoder.output_norm", d);
    decoder_input_norm_ = nn::LayerNorm(params_, "decoder.input_norm", d);
    for (int i = 0; i < config_.decoder_layers; ++i) {
        decoder_.emplace_back(params_, "decoder.layer" + std::to_string(i), d, config_.heads, config_.ff_hidden, rng);
    }
    decoder_norm_ = nn::LayerNorm(params_, "decoder.output_norm", d);
    vocab_head_ = nn::Linear(params_, "decoder.vocab_head", d, config_.vocab_size, rng);
    recon_in_ = nn::Linear(params_, "reconstruction.hidden", d, config_.recon_hidden, rng);
    recon_out_ = nn::Linear(params_, "reconstruction.output", config_.recon_hidden, config_.audio_dim, rng);
}

Var DlmModel::embed_av(const Var& audio, const Var& video) const {
    if (audio.cols() != config_.audio_dim || video.cols() != config_.video_dim) {
        throw std::invalid_argument("embed_av: feature width does not match the joint projection");
    }
    if (audio.rows() != video.rows()) throw std::invalid_argument("embed_av: audio/video frame counts differ");
    const Var parts[] = {audio, video};
    return ag::matmul(ag::concat_cols(parts), joint_);
}

Var DlmModel::embed_av(const Matrix& audio, const Matrix& video) const {
    return embed_av(Var::constant(audio), Var::constant(video));
}

EncoderOutput DlmModel::encode(const Var& fused, const DialogueInstance& instance) const {
    if (fused.cols() != config_.d_model) throw std::invalid_argument("encode: fused width must equal d_model");
    const EncoderText text = encoder_text(instance);
    const Index total = fused.rows() + static_cast<Index>(text.ids.size());
    if (total > config_.max_encoder_len) {
        throw std::length_error("encoder input of " + std::to_string(total) + " rows exceeds max_encoder_len " +
                                std::to_string(config_.max_encoder_len));
    }
    Var x = fused;
    if (!text.ids.empty()) {
        const Var parts[] = {fused, ag::gather_rows(token_embedding_, text.ids)};
        x = ag::concat_rows(parts);
    }
    std::vector<int> positions(static_cast<std::size_t>(total));
    std::iota(positions.begin(), positions.end(), 0);
    std::vector<int> segments(static_cast<std::size_t>(fused.rows()), static_cast<int>(Segment::AudioVisual));
    segments.insert(segments.end(), text.segments.begin(), text.segments.end());
    x = x + ag::gather_rows(encoder_positions_, positions) + ag::gather_rows(segment_embedding_, segments);
    x = input_norm_(x);
    for (const auto& layer : encoder_) x = layer(x);
    return {encoder_norm_(x), fused.rows()};
}

Var DlmModel::decoder_states(const EncoderOutput& encoded, std::span<const int> decoder_input) const {
    const auto n = static_cast<Index>(decoder_input.size());
    if (n > config_.max_answer_len) {
        throw std::length_error("answer of " + std::to_string(n) + " tokens exceeds max_answer_len " +
                                std::to_string(config_.max_answer_len));
    }
    std::vector<int> positions(decoder_input.size());
    std::iota(positions.begin(), positions.end(), 0);
    Var h = ag::gather_rows(token_embedding_, decoder_input) + ag::gather_rows(decoder_positions_, positions);
    h = decoder_input_norm_(h);
    for (const auto& layer : decoder_) h = layer(h, encoded.states);
    return decoder_norm_(h);
}

Var DlmModel::decode(const EncoderOutput& encoded, std::span<const int> targets) const {
    if (targets.empty()) throw std::invalid_argument("decode: empty target sequence");
    std::vector<int> input{Vocabulary::kBegin};
    input.insert(input.end(), targets.begin(), targets.end() - 1);
    return vocab_head_(decoder_states(encoded, input));
}

Var DlmModel::forward(const Var& fused, const DialogueInstance& instance, std::span<const int> targets) const {
    return decode(encode(fused, instance), targets);
}

Eigen::VectorXd DlmModel::next_token_log_probs(const EncoderOutput& encoded, std::span<const int> prefix) const {
    ag::NoGradGuard no_grad;
    std::vector<int> input{Vocabulary::kBegin};
    input.insert(input.end(), prefix.begin(), prefix.end());
    const Var states = decoder_states(encoded, input);
    const Var last = ag::slice_rows(states, states.rows() - 1, 1);
    Eigen::VectorXd z = vocab_head_(last).value().row(0).transpose();
    const double mx = z.maxCoeff();
    const double lse = mx + std::log((z.array() - mx).exp().sum());
    return z.array() - lse;
}

Var DlmModel::reconstruct_audio(const EncoderOutput& encoded, std::span<const Index> masked) const {
    if (masked.empty()) throw std::invalid_argument("reconstruct_audio: empty mask");
    for (Index m : masked) {
        if (m < 0 || m >= encoded.av_rows) throw std::out_of_range("reconstruct_audio: masked index out of range");
    }
    return recon_out_(ag::gelu(recon_in_(ag::select_rows(encoded.states, masked))));
}

Var dlm_loss(const Var& logits, std::span<const int> targets) { return ag::cross_entropy(logits, targets); }

}  // namespace hear
