#include "hear/experiment.hpp"

#include "hear/errors.hpp"

#include <set>

namespace hear {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& section) {
    if (!j.is_object()) throw ConfigError(section, "expected an object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ConfigError(section + "." + key, "unknown key");
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& field, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        field = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(section + "." + key, "wrong type");
    }
}

}  // namespace

SynthCorpusConfig synth_config_from_json(const nlohmann::json& j, SynthCorpusConfig c) {
    reject_unknown(j,
                   {"clips", "frames", "video_dim", "audio_dim", "events", "audio_only_fraction", "templates", "noise",
                    "audio_smoothness", "history_window", "seed"},
                   "corpus");
    read(j, "clips", c.clips, "corpus");
    read(j, "frames", c.frames, "corpus");
    read(j, "video_dim", c.video_dim, "corpus");
    read(j, "audio_dim", c.audio_dim, "corpus");
    read(j, "events", c.events, "corpus");
    read(j, "audio_only_fraction", c.audio_only_fraction, "corpus");
    read(j, "templates", c.templates, "corpus");
    read(j, "noise", c.noise, "corpus");
    read(j, "audio_smoothness", c.audio_smoothness, "corpus");
    read(j, "history_window", c.history_window, "corpus");
    read(j, "seed", c.seed, "corpus");
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError("corpus." + e.field(), e.message());
    }
    return c;
}

nlohmann::json to_json(const SynthCorpusConfig& c) {
    return {{"clips", c.clips},
            {"frames", c.frames},
            {"video_dim", c.video_dim},
            {"audio_dim", c.audio_dim},
            {"events", c.events},
            {"audio_only_fraction", c.audio_only_fraction},
            {"templates", c.templates},
            {"noise", c.noise},
            {"audio_smoothness", c.audio_smoothness},
            {"history_window", c.history_window},
            {"seed", c.seed}};
}

DecodeConfig decode_config_from_json(const nlohmann::json& j, DecodeConfig c) {
    reject_unknown(j, {"beam", "max_len", "length_penalty"}, "decode");
    read(j, "beam", c.beam, "decode");
    read(j, "max_len", c.max_len, "decode");
    read(j, "length_penalty", c.length_penalty, "decode");
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::desk_scale(std::uint64_t seed) {
    ExperimentConfig c;
    c.corpus.seed = seed;
    c.corpus.noise = 1.5;
    c.train.seed = seed;
    c.train.lr_start = 3e-3;
    c.train.model.d_model = 32;
    c.train.model.heads = 2;
    c.train.model.ff_hidden = 64;
    return c;
}

void ExperimentConfig::validate() const {
    try {
        corpus.validate();
    } catch (const ConfigError& e) {
        throw ConfigError("corpus." + e.field(), e.message());
    }
    estimator.validate();
    train.validate();
    eval.decode.validate();
    if (!(train_fraction > 0.0 && validation_fraction > 0.0 && train_fraction + validation_fraction < 1.0)) {
        throw ConfigError("split", "train and validation fractions must be positive and leave a test share");
    }
    if (!(swap_fraction >= 0.0 && swap_fraction <= 1.0)) throw ConfigError("split.swap_fraction", "must be in [0, 1]");
    if (!(eval.bucket_threshold > 0.0 && eval.bucket_threshold < 1.0)) {
        throw ConfigError("eval.bucket_threshold", "must be in (0, 1)");
    }
}

nlohmann::json ExperimentConfig::to_json() const {
    return {{"corpus", hear::to_json(corpus)},
            {"estimator", estimator.to_json()},
            {"train", train.to_json()},
            {"eval",
             {{"beam", eval.decode.beam},
              {"max_len", eval.decode.max_len},
              {"length_penalty", eval.decode.length_penalty},
              {"bucket_threshold", eval.bucket_threshold},
              {"zero_audio", eval.zero_audio}}},
            {"split",
             {{"train", train_fraction},
              {"validation", validation_fraction},
              {"swap_fraction", swap_fraction},
              {"label_seed", label_seed}}}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    reject_unknown(j, {"corpus", "estimator", "train", "eval", "split"}, "config");
    ExperimentConfig c;
    if (j.contains("corpus")) c.corpus = synth_config_from_json(j.at("corpus"), c.corpus);
    if (j.contains("estimator")) c.estimator = EstimatorConfig::from_json(j.at("estimator"));
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        reject_unknown(e, {"beam", "max_len", "length_penalty", "bucket_threshold", "zero_audio"}, "eval");
        nlohmann::json decode = nlohmann::json::object();
        for (const char* k : {"beam", "max_len", "length_penalty"}) {
            if (e.contains(k)) decode[k] = e.at(k);
        }
        c.eval.decode = decode_config_from_json(decode, c.eval.decode);
        read(e, "bucket_threshold", c.eval.bucket_threshold, "eval");
        read(e, "zero_audio", c.eval.zero_audio, "eval");
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        reject_unknown(s, {"train", "validation", "swap_fraction", "label_seed"}, "split");
        read(s, "train", c.train_fraction, "split");
        read(s, "validation", c.validation_fraction, "split");
        read(s, "swap_fraction", c.swap_fraction, "split");
        read(s, "label_seed", c.label_seed, "split");
    }
    c.validate();
    return c;
}

std::vector<std::vector<std::string>> question_tokens(const Corpus& corpus, std::span<const std::size_t> clips) {
    std::vector<std::vector<std::string>> out;
    for (std::size_t c : clips) {
        for (const auto& inst : corpus.clips.at(c).instances) out.push_back(corpus.vocab.tokens_of(inst.question));
    }
    return out;
}

PreparedData prepare(const ExperimentConfig& config) {
    config.validate();
    Corpus corpus = synth_corpus(config.corpus);
    ClipSplit split = split_clips(corpus.clips.size(), config.train_fraction, config.validation_fraction);
    const KeywordSet keywords = KeywordSet::published();
    std::vector<LabeledQuestion> labeled =
        build_estimator_labels(question_tokens(corpus, split.train), keywords, config.label_seed, config.swap_fraction);
    EstimatorTrainResult estimator = train_estimator(labeled, corpus.vocab, config.estimator);
    return PreparedData{std::move(corpus), std::move(split), keywords, std::move(labeled), std::move(estimator)};
}

VariantOutcome run_variant(const PreparedData& data, const ExperimentConfig& config, const std::string& variant,
                           const std::filesystem::path& run_dir) {
    VariantOutcome out{variant, apply_variant(config.train, variant), {}, {}};
    const auto decisions = relatedness_table(data.corpus, out.train.sal_mode, &data.estimator.model, data.keywords);
    Trainer trainer(out.train, data.corpus, data.split, decisions);
    out.result = train(trainer, run_dir);
    trainer.model().parameters().restore(trainer.best_parameters());
    out.report = evaluate(trainer.model(), data.corpus, data.split.test, decisions, config.eval);
    out.report.metadata["variant"] = variant;
    return out;
}

}  // namespace hear
