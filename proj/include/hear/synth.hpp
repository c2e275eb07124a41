#pragma once

// Building blocks of the synthetic corpus, exposed for tests.

#include "hear/corpus.hpp"

#include <array>
#include <string_view>

namespace hear::synth {

inline constexpr std::array<std::string_view, kMaxSynthEvents> kActions = {
    "cooking", "reading", "cleaning", "running", "sitting", "dancing", "eating", "typing"};
inline constexpr std::array<std::string_view, kMaxSynthEvents> kSounds = {
    "music", "talking", "silence", "barking", "knocking", "vacuuming", "singing", "laughing"};
inline constexpr std::array<std::string_view, 6> kColors = {"red", "blue", "green", "black", "white", "yellow"};
inline constexpr std::array<std::string_view, 6> kRooms = {"kitchen", "bedroom", "garage",
                                                           "hallway", "office",  "bathroom"};
inline constexpr int kSilence = 2;

struct Latent {
    int action = 0;
    int color = 0;
    int room = 0;
    int sound = 0;
    bool audio_only = false;  // the sound source is not visible
};

// Fixed random prototypes shared by every clip of one corpus.
struct World {
    Matrix action_video;  // events x Dv
    Matrix color_video;   // colors x Dv
    Matrix sound_video;   // events x Dv, visible trace of a sound source
    Matrix sound_audio;   // events x Da, silence row is zero
    Matrix texture_video; // Da x Dv, couples the audio texture into video for visible sources
};

World make_world(const SynthCorpusConfig& config);

// Video noise is drawn from its own stream before any sound-dependent term, so
// an audio-only clip's video is the same whatever its sound event is.
FeatureTrack render_features(const World& world, const Latent& latent, const SynthCorpusConfig& config,
                             std::uint64_t clip_seed);

struct Template {
    std::string_view id;
    std::string_view kind;  // audio-keyword | audio-semantic | visual | mixed
    std::vector<std::string_view> paraphrases;
};

const std::vector<Template>& templates();
std::string answer_for(const Template& t, const Latent& latent);
std::string caption_for(const Latent& latent);

// Surface variation: an optional opener ("so , ...") and an optional phrase
// before the question mark.
const std::vector<std::string_view>& question_openers();
const std::vector<std::string_view>& question_suffixes();
std::string dress_question(std::string_view paraphrase, std::string_view opener, std::string_view suffix);

}  // namespace hear::synth
