#pragma once

#include "hear/types.hpp"
#include "hear/vocab.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hear {

struct TextRound {
    std::string question;
    std::string answer;
};

struct TextDialogue {
    std::string clip_id;
    std::string caption;
    std::vector<TextRound> rounds;
};

struct LoadOptions {
    bool strict = false;  // missing fields: hard error instead of skip-with-warning
    std::size_t history_window = kDefaultHistoryWindow;
};

// Accepts either a top-level array of dialogues or the public release layout
// {"dialogs": [...]}. Each dialogue needs "image_id", "caption" (or "summary")
// and "dialog": [{"question", "answer"}, ...].
std::vector<TextDialogue> read_avsd_dialogues(const std::filesystem::path& path, const LoadOptions& options,
                                              std::vector<std::string>* warnings = nullptr);
void write_avsd_dialogues(const std::filesystem::path& path, const std::vector<TextDialogue>& dialogues);

// One instance per round, history windowed to the last `window` rounds.
std::vector<DialogueInstance> dialogue_instances(const TextDialogue& dialogue, const Vocabulary& vocab,
                                                 std::size_t window);

std::vector<DialogueInstance> load_avsd(const std::filesystem::path& path, const Vocabulary& vocab,
                                        const LoadOptions& options, std::vector<std::string>* warnings = nullptr);

// Ground truth for one question of the synthetic corpus.
struct QuestionLabel {
    std::string kind;             // audio-keyword | audio-semantic | visual | mixed
    bool audio_related = false;   // the answer depends on the audio stream
    bool audio_only = false;      // ... and the video stream carries no information about it
};

struct Clip {
    std::string clip_id;
    FeatureTrack track;
    TextDialogue dialogue;
    std::vector<DialogueInstance> instances;
    std::vector<QuestionLabel> labels;  // parallel to instances; empty when unknown
};

struct Corpus {
    Vocabulary vocab;
    std::vector<Clip> clips;

    std::size_t instance_count() const;
};

struct SynthCorpusConfig {
    int clips = 50;
    int frames = 24;
    int video_dim = 32;
    int audio_dim = 8;
    int events = 6;                   // latent visual actions and sound events, each
    double audio_only_fraction = 0.5;
    int templates = 6;                // questions (rounds) per clip
    double noise = 0.5;
    double audio_smoothness = 0.8;    // AR(1) coefficient of the per-frame audio texture
    std::size_t history_window = kDefaultHistoryWindow;
    std::uint64_t seed = 7;

    void validate() const;  // throws ConfigError
};

inline constexpr int kMaxSynthEvents = 8;
inline constexpr int kSynthTemplateCount = 10;

// Every word the generator can emit, so vocabularies agree across seeds.
std::vector<std::string> synth_lexicon();

Corpus synth_corpus(const SynthCorpusConfig& config);

// Layout: dialogues.json, vocab.json, labels.jsonl, features/<clip>.{video,audio}.hearfeat
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
// Uses `vocab` when given, else dir/vocab.json, else builds one from the dialogues.
Corpus load_corpus(const std::filesystem::path& dir, const LoadOptions& options, const Vocabulary* vocab = nullptr,
                   std::vector<std::string>* warnings = nullptr);

std::filesystem::path video_feature_path(const std::filesystem::path& dir, const std::string& clip_id);
std::filesystem::path audio_feature_path(const std::filesystem::path& dir, const std::string& clip_id);

struct ClipSplit {
    std::vector<std::size_t> train, validation, test;  // clip indices
};

// Contiguous split by clip: the first `train` share, then `validation`, rest test.
ClipSplit split_clips(std::size_t clip_count, double train = 0.7, double validation = 0.15);

}  // namespace hear
