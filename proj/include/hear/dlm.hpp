#pragma once

#include "hear/autograd.hpp"
#include "hear/nn.hpp"
#include "hear/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>

namespace hear {

using ag::Var;

struct DlmConfig {
    int vocab_size = 0;
    Index video_dim = 32;
    Index audio_dim = 8;
    Index d_model = 64;
    int heads = 4;
    int encoder_layers = 2;
    int decoder_layers = 2;
    Index ff_hidden = 256;
    Index recon_hidden = 64;
    Index max_encoder_len = 192;
    Index max_answer_len = 24;  // decoder positions, including the end token

    void validate() const;
    nlohmann::json to_json() const;
    static DlmConfig from_json(const nlohmann::json& j);
};

enum class Segment : int { AudioVisual = 0, History = 1, Question = 2 };

struct EncoderOutput {
    Var states;        // (L + text) x d
    Index av_rows = 0; // the first L rows belong to the fused audio-visual sequence
};

// Text part of the encoder input: caption, then "<sep> q <sep> a" per history
// round, then "<sep> question".
struct EncoderText {
    TokenIds ids;
    std::vector<int> segments;
};
EncoderText encoder_text(const DialogueInstance& instance);

// Answer tokens followed by the end token: the teacher-forcing target.
TokenIds answer_targets(const DialogueInstance& instance);

class DlmModel {
  public:
    DlmModel(const DlmConfig& config, std::uint64_t seed);

    const DlmConfig& config() const { return config_; }
    nn::ParameterStore& parameters() { return params_; }
    const nn::ParameterStore& parameters() const { return params_; }

    // [audio || video] W, no bias; audio is L x Da, video is L x Dv.
    Var embed_av(const Var& audio, const Var& video) const;
    Var embed_av(const Matrix& audio, const Matrix& video) const;
    const Var& joint_projection() const { return joint_; }

    EncoderOutput encode(const Var& fused, const DialogueInstance& instance) const;

    // Teacher-forced logits: row t predicts targets[t] from <bos> targets[0..t).
    Var decode(const EncoderOutput& encoded, std::span<const int> targets) const;
    Var forward(const Var& fused, const DialogueInstance& instance, std::span<const int> targets) const;

    // Log-probabilities of the token following <bos> prefix.
    Eigen::VectorXd next_token_log_probs(const EncoderOutput& encoded, std::span<const int> prefix) const;

    // Rows ordered as `masked`; each row is the head applied to that frame's encoder state.
    Var reconstruct_audio(const EncoderOutput& encoded, std::span<const Index> masked) const;

    const nn::Linear& reconstruction_output() const { return recon_out_; }

  private:
    Var decoder_states(const EncoderOutput& encoded, std::span<const int> decoder_input) const;

    DlmConfig config_;
    nn::ParameterStore params_;
    Var joint_;
    Var token_embedding_;
    Var encoder_positions_;
    Var segment_embedding_;
    Var decoder_positions_;
    nn::LayerNorm input_norm_, encoder_norm_, decoder_input_norm_, decoder_norm_;
    std::vector<nn::EncoderLayer> encoder_;
    std::vector<nn::DecoderLayer> decoder_;
    nn::Linear vocab_head_;
    nn::Linear recon_in_, recon_out_;
};

// Token-mean negative log-likelihood.
Var dlm_loss(const Var& logits, std::span<const int> targets);

}  // namespace hear
