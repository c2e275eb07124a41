#include "hear/synth.hpp"

#include "hear/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace hear {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix(splitmix(splitmix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

Matrix gaussian(Index rows, Index cols, double sd, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, sd);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) m(i, j) = n(rng);
    }
    return m;
}

std::string sound_phrase(int sound) {
    static const std::array<const char*, kMaxSynthEvents> phrases = {
        "music playing",   "people talking",    "nothing",         "a dog barking",
        "someone knocking", "a vacuum cleaner", "someone singing", "people laughing"};
    return phrases[static_cast<std::size_t>(sound)];
}

enum Stream : std::uint64_t { kLatentStream = 1, kVideoStream, kTextureStream, kAudioStream, kTextStream };

}  // namespace

std::size_t Corpus::instance_count() const {
    std::size_t n = 0;
    for (const auto& c : clips) n += c.instances.size();
    return n;
}

void SynthCorpusConfig::validate() const {
    if (clips < 1) throw ConfigError("clips", "must be >= 1");
    if (frames < 1) throw ConfigError("frames", "must be >= 1");
    if (video_dim < 1) throw ConfigError("video_dim", "must be >= 1");
    if (audio_dim < 1) throw ConfigError("audio_dim", "must be >= 1");
    if (events < 1 || events > kMaxSynthEvents) {
        throw ConfigError("events", "must be in [1, " + std::to_string(kMaxSynthEvents) + "]");
    }
    if (!(audio_only_fraction >= 0.0 && audio_only_fraction <= 1.0)) {
        throw ConfigError("audio_only_fraction", "must be in [0, 1]");
    }
    if (templates < 1) throw ConfigError("templates", "must be >= 1");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise", "must be finite and >= 0");
    if (!(audio_smoothness >= 0.0 && audio_smoothness < 1.0)) {
        throw ConfigError("audio_smoothness", "must be in [0, 1)");
    }
}

namespace synth {

World make_world(const SynthCorpusConfig& config) {
    std::mt19937_64 rng(derive_seed(config.seed, 0xfeed));
    World w;
    const Index dv = config.video_dim;
    const Index da = config.audio_dim;
    w.action_video = gaussian(kMaxSynthEvents, dv, 1.0, rng);
    w.color_video = gaussian(static_cast<Index>(kColors.size()), dv, 0.7, rng);
    w.sound_video = gaussian(kMaxSynthEvents, dv, 1.0, rng);
    w.sound_audio = gaussian(kMaxSynthEvents, da, 1.0, rng);
    w.sound_audio.row(kSilence).setZero();
    w.texture_video = gaussian(da, dv, 1.0 / std::sqrt(static_cast<double>(da)), rng);
    return w;
}

FeatureTrack render_features(const World& world, const Latent& latent, const SynthCorpusConfig& config,
                             std::uint64_t clip_seed) {
    const Index frames = config.frames;
    const Index dv = config.video_dim;
    const Index da = config.audio_dim;
    std::mt19937_64 video_rng(derive_seed(clip_seed, kVideoStream));
    std::mt19937_64 texture_rng(derive_seed(clip_seed, kTextureStream));
    std::mt19937_64 audio_rng(derive_seed(clip_seed, kAudioStream));

    Matrix video = gaussian(frames, dv, config.noise, video_rng);
    video.rowwise() += world.action_video.row(latent.action) + world.color_video.row(latent.color);

    const double rho = config.audio_smoothness;
    const double innovation = std::sqrt(1.0 - rho * rho);
    Matrix texture = gaussian(frames, da, 1.0, texture_rng);
    for (Index t = 1; t < frames; ++t) texture.row(t) = rho * texture.row(t - 1) + innovation * texture.row(t);

    const double texture_gain = latent.sound == kSilence ? 0.1 : 0.5;
    Matrix audio = gaussian(frames, da, config.noise, audio_rng);
    audio.rowwise() += world.sound_audio.row(latent.sound);
    audio += texture_gain * texture;

    if (!latent.audio_only) {
        video.rowwise() += world.sound_video.row(latent.sound);
        video += texture * world.texture_video;
    }
    return make_feature_track(std::move(video), std::move(audio));
}

const std::vector<Template>& templates() {
    static const std::vector<Template> pool = {
        {"hear", "audio-keyword",
         {"can you hear any sounds ?", "do you hear anything in the video ?", "is there any sound in the video ?"}},
        {"what_sound", "audio-keyword",
         {"what sound can you hear ?", "what kind of noise is there ?", "what is the audio like ?"}},
        {"music", "audio-keyword",
         {"is there any music ?", "is music playing in the background ?", "can you hear a song ?"}},
        {"talk", "audio-keyword",
         {"does anyone talk in the video ?", "do they speak to each other ?", "can you hear voices ?"}},
        {"vacuum", "audio-semantic", {"is the vacuum cleaner working ?", "is the vacuum running ?"}},
        {"door", "audio-semantic", {"who is outside the door ?", "is someone at the door ?"}},
        {"doing", "visual", {"what is he doing ?", "what is the person doing ?", "what activity is shown ?"}},
        {"color", "visual", {"what color is his shirt ?", "what color are his clothes ?", "what color is his hair ?"}},
        {"where", "visual", {"where is he ?", "which room is he in ?", "can you tell where he goes ?"}},
        {"scene", "mixed", {"what is happening in the video ?", "describe the scene ."}},
    };
    return pool;
}

std::string answer_for(const Template& t, const Latent& z) {
    const bool silent = z.sound == kSilence;
    const std::string action(kActions[static_cast<std::size_t>(z.action)]);
    if (t.id == "hear") return silent ? "no it is silent" : "yes i hear " + sound_phrase(z.sound);
    if (t.id == "what_sound") return silent ? "there is no sound" : "it sounds like " + sound_phrase(z.sound);
    if (t.id == "music") return (z.sound == 0 || z.sound == 6) ? "yes there is music" : "no there is no music";
    if (t.id == "talk") return (z.sound == 1 || z.sound == 7) ? "yes someone is talking" : "no nobody talks";
    if (t.id == "vacuum") return z.sound == 5 ? "yes it is running" : "no it is off";
    if (t.id == "door") return z.sound == 4 ? "someone is knocking" : "nobody is there";
    if (t.id == "doing") return "he is " + action;
    if (t.id == "color") return "it is " + std::string(kColors[static_cast<std::size_t>(z.color)]);
    if (t.id == "where") return "he is in the " + std::string(kRooms[static_cast<std::size_t>(z.room)]);
    if (t.id == "scene") return silent ? "he is " + action + " quietly" : "he is " + action + " with " + sound_phrase(z.sound);
    throw std::logic_error("unknown template " + std::string(t.id));
}

const std::vector<std::string_view>& question_openers() {
    static const std::vector<std::string_view> v = {"", "so", "okay", "and", "also", "um", "now", "well"};
    return v;
}

const std::vector<std::string_view>& question_suffixes() {
    static const std::vector<std::string_view> v = {"", "in the clip", "right now", "at all", "here", "at that moment"};
    return v;
}

std::string dress_question(std::string_view paraphrase, std::string_view opener, std::string_view suffix) {
    std::string q(paraphrase);
    const bool question = q.size() >= 2 && q.compare(q.size() - 2, 2, " ?") == 0;
    if (!suffix.empty() && question && q.find("video") == std::string::npos) {
        q.insert(q.size() - 2, " " + std::string(suffix));
    }
    if (!opener.empty()) q = std::string(opener) + " , " + q;
    return q;
}

std::string caption_for(const Latent& z) {
    return "a person is in the " + std::string(kRooms[static_cast<std::size_t>(z.room)]) + " .";
}

}  // namespace synth

std::vector<std::string> synth_lexicon() {
    using namespace synth;
    std::vector<std::string> texts;
    for (const auto& t : templates()) {
        for (auto p : t.paraphrases) texts.emplace_back(p);
    }
    Latent z;
    for (int a = 0; a < kMaxSynthEvents; ++a) {
        for (int s = 0; s < kMaxSynthEvents; ++s) {
            z.action = a;
            z.sound = s;
            z.color = a % static_cast<int>(kColors.size());
            z.room = s % static_cast<int>(kRooms.size());
            for (const auto& t : templates()) texts.push_back(answer_for(t, z));
            texts.push_back(caption_for(z));
        }
    }
    for (auto o : question_openers()) texts.emplace_back(std::string(o) + " ,");
    for (auto x : question_suffixes()) texts.emplace_back(x);
    for (auto c : kColors) texts.emplace_back(c);
    for (auto r : kRooms) texts.emplace_back(r);
    return texts;
}

Corpus synth_corpus(const SynthCorpusConfig& config) {
    using namespace synth;
    config.validate();
    Corpus corpus;
    const auto lexicon = synth_lexicon();
    corpus.vocab = Vocabulary::build(lexicon);
    const World world = make_world(config);
    const auto& pool = templates();

    for (int c = 0; c < config.clips; ++c) {
        const std::uint64_t clip_seed = derive_seed(config.seed, 0xc11b, static_cast<std::uint64_t>(c));
        std::mt19937_64 latent_rng(derive_seed(clip_seed, kLatentStream));
        std::mt19937_64 text_rng(derive_seed(clip_seed, kTextStream));
        std::uniform_int_distribution<int> event(0, config.events - 1);
        std::uniform_int_distribution<int> color(0, static_cast<int>(kColors.size()) - 1);
        std::uniform_int_distribution<int> room(0, static_cast<int>(kRooms.size()) - 1);
        std::bernoulli_distribution audio_only(config.audio_only_fraction);

        Latent z;
        z.action = event(latent_rng);
        z.color = color(latent_rng);
        z.room = room(latent_rng);
        z.sound = event(latent_rng);
        z.audio_only = audio_only(latent_rng);

        Clip clip;
        char id[32];
        std::snprintf(id, sizeof id, "synth_%04d", c);
        clip.clip_id = id;
        clip.track = render_features(world, z, config, clip_seed);
        clip.dialogue.clip_id = clip.clip_id;
        clip.dialogue.caption = caption_for(z);

        // Template order: consecutive random permutations of the pool.
        std::vector<std::size_t> order;
        while (order.size() < static_cast<std::size_t>(config.templates)) {
            std::vector<std::size_t> perm(pool.size());
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::shuffle(perm.begin(), perm.end(), text_rng);
            order.insert(order.end(), perm.begin(), perm.end());
        }
        order.resize(static_cast<std::size_t>(config.templates));

        for (std::size_t ti : order) {
            const Template& t = pool[ti];
            std::uniform_int_distribution<std::size_t> pick(0, t.paraphrases.size() - 1);
            std::uniform_int_distribution<std::size_t> opener(0, question_openers().size() - 1);
            std::uniform_int_distribution<std::size_t> suffix(0, question_suffixes().size() - 1);
            const auto paraphrase = t.paraphrases[pick(text_rng)];
            const auto o = question_openers()[opener(text_rng)];
            const auto x = question_suffixes()[suffix(text_rng)];
            clip.dialogue.rounds.push_back({dress_question(paraphrase, o, x), answer_for(t, z)});
            QuestionLabel label;
            label.kind = std::string(t.kind);
            label.audio_related = t.kind != "visual";
            label.audio_only = (t.kind == "audio-keyword" || t.kind == "audio-semantic") && z.audio_only;
            clip.labels.push_back(std::move(label));
        }
        clip.instances = dialogue_instances(clip.dialogue, corpus.vocab, config.history_window);
        corpus.clips.push_back(std::move(clip));
    }
    return corpus;
}

ClipSplit split_clips(std::size_t clip_count, double train, double validation) {
    if (!(train > 0.0) || !(validation >= 0.0) || train + validation > 1.0) {
        throw std::invalid_argument("split_clips: invalid split fractions");
    }
    ClipSplit s;
    const auto n_train = static_cast<std::size_t>(std::llround(train * static_cast<double>(clip_count)));
    const auto n_val = static_cast<std::size_t>(std::llround(validation * static_cast<double>(clip_count)));
    for (std::size_t i = 0; i < clip_count; ++i) {
        if (i < n_train) {
            s.train.push_back(i);
        } else if (i < n_train + n_val) {
            s.validation.push_back(i);
        } else {
            s.test.push_back(i);
        }
    }
    return s;
}

}  // namespace hear
