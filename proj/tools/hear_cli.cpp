// hear: command-line front end for data synthesis, training, evaluation,
// analysis and serving.

#include "hear/checkpoint.hpp"
#include "hear/errors.hpp"
#include "hear/experiment.hpp"
#include "hear/server.hpp"
#include "hear/service.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hear;

namespace {

constexpr const char* kRunRootEnv = "HEAR_RUN_ROOT";

fs::path run_root() {
    const char* root = std::getenv(kRunRootEnv);
    return root != nullptr && *root != '\0' ? fs::path(root) : fs::path("runs");
}

// Relative run names live under the run root; absolute paths are kept.
fs::path resolve_run(const std::string& name) {
    const fs::path p(name);
    return p.is_absolute() ? p : run_root() / p;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

// Options shared by every command: a JSON config plus overrides.
struct Common {
    std::string config;
    std::string preset = "desk";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;  // "section.key=<json>"
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON run config")->check(CLI::ExistingFile);
    cmd->add_option("--preset", c.preset, "defaults the config file overrides")
        ->check(CLI::IsMember({"desk", "full"}));
    cmd->add_option("--seed", c.seed, "seed for this command's randomness");
    cmd->add_option("--set", c.sets, "override one config field, e.g. train.epochs=3");
}

// Applies "a.b.c=value" where value is parsed as JSON, falling back to a string.
void apply_set(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "expected key=value");
    std::string pointer = "/" + assignment.substr(0, eq);
    for (auto& ch : pointer) {
        if (ch == '.') ch = '/';
    }
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    j[json::json_pointer(pointer)] = value;
}

using SeedHook = void (*)(json&, std::uint64_t);

ExperimentConfig load_config(const Common& c, SeedHook seed_hook, const json* fallback = nullptr) {
    const ExperimentConfig base = c.preset == "full" ? ExperimentConfig{} : ExperimentConfig::desk_scale(7);
    json j = base.to_json();
    if (!c.config.empty()) {
        j.merge_patch(read_json_file(c.config));
    } else if (fallback != nullptr) {
        j.merge_patch(*fallback);
    }
    for (const auto& s : c.sets) apply_set(j, s);
    if (c.seed && seed_hook != nullptr) seed_hook(j, *c.seed);
    return ExperimentConfig::from_json(j);
}

void corpus_seed(json& j, std::uint64_t s) { j["corpus"]["seed"] = s; }
void estimator_seed(json& j, std::uint64_t s) {
    j["estimator"]["seed"] = s;
    j["split"]["label_seed"] = s;
}
void train_seed(json& j, std::uint64_t s) { j["train"]["seed"] = s; }

Corpus corpus_for(const ExperimentConfig& cfg, const std::string& data_dir) {
    if (data_dir.empty()) return synth_corpus(cfg.corpus);
    std::vector<std::string> warnings;
    Corpus corpus = load_corpus(resolve_run(data_dir), LoadOptions{}, nullptr, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    return corpus;
}

KeywordSet keywords_for(const std::string& file) {
    return file.empty() ? KeywordSet::published() : KeywordSet::from_file(file);
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

// --- synth-data ---------------------------------------------------------

struct SynthArgs {
    Common common;
    std::string out = "data";
};

int cmd_synth(const SynthArgs& a) {
    const ExperimentConfig cfg = load_config(a.common, corpus_seed);
    const Corpus corpus = synth_corpus(cfg.corpus);
    const fs::path dir = resolve_run(a.out);
    save_corpus(corpus, dir);
    write_json_file(dir / "config.json", cfg.to_json());
    print({{"dir", dir.string()},
           {"clips", corpus.clips.size()},
           {"instances", corpus.instance_count()},
           {"vocab", corpus.vocab.size()}});
    return 0;
}

// --- train-estimator ------------------------------------------------------

struct EstimatorArgs {
    Common common;
    std::string data;
    std::string out = "estimator";
    std::string keyword_file;
};

int cmd_train_estimator(const EstimatorArgs& a) {
    const ExperimentConfig cfg = load_config(a.common, estimator_seed);
    const Corpus corpus = corpus_for(cfg, a.data);
    const ClipSplit split = split_clips(corpus.clips.size(), cfg.train_fraction, cfg.validation_fraction);
    const KeywordSet keywords = keywords_for(a.keyword_file);
    const auto labeled = build_estimator_labels(question_tokens(corpus, split.train), keywords, cfg.label_seed,
                                                cfg.swap_fraction);
    const EstimatorTrainResult result = train_estimator(labeled, corpus.vocab, cfg.estimator);

    const fs::path dir = resolve_run(a.out);
    fs::create_directories(dir);
    save_estimator(dir / "estimator.ckpt", result.model, corpus.vocab, {{"holdout_auc", result.holdout_auc}});
    std::ofstream labels(dir / "labels.jsonl");
    for (const auto& q : labeled) {
        std::string text;
        for (const auto& t : q.tokens) text += (text.empty() ? "" : " ") + t;
        labels << json{{"question", text}, {"label", q.label}, {"provenance", q.provenance}}.dump() << '\n';
    }
    write_json_file(dir / "config.json", cfg.to_json());
    print({{"dir", dir.string()},
           {"labeled", labeled.size()},
           {"holdout_auc", result.holdout_auc},
           {"epoch_losses", result.epoch_losses}});
    return 0;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
    Common common;
    std::string data;
    std::string estimator;
    std::string out = "train";
    std::string variant;
    std::string keyword_file;
    bool resume = false;
};

std::optional<EstimatorModel> estimator_for(const ExperimentConfig& cfg, const Corpus& corpus, const std::string& path,
                                            const KeywordSet& keywords) {
    if (!path.empty()) {
        LoadedEstimator loaded = load_estimator(resolve_run(path));
        if (!(loaded.vocab == corpus.vocab)) throw std::runtime_error("estimator vocabulary does not match the corpus");
        return std::move(loaded.model);
    }
    const ClipSplit split = split_clips(corpus.clips.size(), cfg.train_fraction, cfg.validation_fraction);
    const auto labeled = build_estimator_labels(question_tokens(corpus, split.train), keywords, cfg.label_seed,
                                                cfg.swap_fraction);
    return train_estimator(labeled, corpus.vocab, cfg.estimator).model;
}

int cmd_train(TrainArgs a) {
    if (!a.variant.empty()) a.common.sets.push_back("train.variant=\"" + a.variant + "\"");
    const ExperimentConfig cfg = load_config(a.common, train_seed);
    const Corpus corpus = corpus_for(cfg, a.data);
    const ClipSplit split = split_clips(corpus.clips.size(), cfg.train_fraction, cfg.validation_fraction);
    const KeywordSet keywords = keywords_for(a.keyword_file);
    const auto estimator = estimator_for(cfg, corpus, a.estimator, keywords);
    const auto decisions = relatedness_table(corpus, cfg.train.sal_mode, &*estimator, keywords);

    const fs::path dir = resolve_run(a.out);
    fs::create_directories(dir);
    Trainer trainer(cfg.train, corpus, split, decisions);
    if (a.resume && fs::exists(dir / "state.ckpt")) {
        trainer.load_state(dir / "state.ckpt");
    } else {
        fs::remove(dir / "metrics.jsonl");
        fs::remove(dir / "schedule.jsonl");
    }
    json echo = cfg.to_json();
    echo["data"] = a.data;
    write_json_file(dir / "config.json", echo);
    save_estimator(dir / "estimator.ckpt", *estimator, corpus.vocab);
    const TrainResult result = train(trainer, dir);
    print({{"dir", dir.string()},
           {"epochs", result.epochs.size()},
           {"best_epoch", result.best_epoch},
           {"best_validation", result.best_validation},
           {"final_validation", result.epochs.empty() ? 0.0 : result.epochs.back().validation_sal}});
    return 0;
}

// --- shared loading for eval / generate / serve -------------------------

struct RunArgs {
    Common common;
    std::string run = "train";
    std::string checkpoint = "best";
    std::string estimator;
    std::string data;
    std::string keyword_file;
};

struct LoadedRun {
    ExperimentConfig config;
    LoadedModel model;
    std::optional<EstimatorModel> estimator;
    Corpus corpus;
    TrainConfig train;
    KeywordSet keywords = KeywordSet::published();
};

LoadedRun load_run(const RunArgs& a) {
    const fs::path dir = resolve_run(a.run);
    std::optional<json> echo;
    if (fs::exists(dir / "config.json")) echo = read_json_file(dir / "config.json");
    std::string data = a.data;
    if (echo && echo->contains("data")) {
        if (data.empty()) data = echo->at("data").get<std::string>();
        echo->erase("data");
    }
    ExperimentConfig cfg = load_config(a.common, nullptr, echo ? &*echo : nullptr);

    fs::path ckpt = a.checkpoint;
    if (a.checkpoint == "best" || a.checkpoint == "last") ckpt = dir / (a.checkpoint + ".ckpt");
    LoadedModel model = load_model(ckpt);
    TrainConfig train = cfg.train;
    if (model.extra.contains("train")) train = TrainConfig::from_json(model.extra.at("train"));

    Corpus corpus = corpus_for(cfg, data);
    if (!(corpus.vocab == model.vocab)) throw std::runtime_error("checkpoint vocabulary does not match the corpus");
    std::optional<EstimatorModel> estimator;
    const fs::path est = a.estimator.empty() ? dir / "estimator.ckpt" : resolve_run(a.estimator);
    if (fs::exists(est)) estimator.emplace(load_estimator(est).model);
    return LoadedRun{std::move(cfg), std::move(model), std::move(estimator), std::move(corpus), train,
                     keywords_for(a.keyword_file)};
}

void add_run_options(CLI::App* cmd, RunArgs& a) {
    add_common(cmd, a.common);
    cmd->add_option("--run", a.run, "run directory written by train");
    cmd->add_option("--checkpoint", a.checkpoint, "best, last, or a checkpoint path");
    cmd->add_option("--estimator", a.estimator, "estimator checkpoint (default: the run's)");
    cmd->add_option("--data", a.data, "corpus directory (default: the run's source)");
    cmd->add_option("--keyword-file", a.keyword_file, "keyword list, one per line");
}

// --- eval -----------------------------------------------------------------

struct EvalArgs {
    RunArgs run;
    std::string bucket = "all";
    std::string split = "test";
    bool zero_audio = false;
    std::string out;
};

int cmd_eval(EvalArgs a) {
    LoadedRun r = load_run(a.run);
    EvalOptions options = r.config.eval;
    options.zero_audio = options.zero_audio || a.zero_audio;
    const ClipSplit split = split_clips(r.corpus.clips.size(), r.config.train_fraction, r.config.validation_fraction);
    const std::vector<std::size_t>& clips =
        a.split == "train" ? split.train : a.split == "validation" ? split.validation : split.test;
    const auto decisions = relatedness_table(r.corpus, r.train.sal_mode, r.estimator ? &*r.estimator : nullptr, r.keywords);
    const EvalReport report = evaluate(r.model.model, r.corpus, clips, decisions, options);
    json j = report.to_json(a.bucket);
    j["metadata"]["split"] = a.split;
    j["metadata"]["sal_mode"] = to_string(r.train.sal_mode);
    const fs::path out = a.out.empty() ? resolve_run(a.run.run) / ("eval_" + a.split + "_" + a.bucket + ".json")
                                       : resolve_run(a.out);
    write_json_file(out, j);
    if (a.bucket == "all") {
        print({{"report", out.string()}, {"overall", j["overall"]}, {"buckets", j["buckets"]}});
    } else {
        print(j);
    }
    return 0;
}

// --- generate -------------------------------------------------------------

struct GenerateArgs {
    RunArgs run;
    std::string clip;
    std::vector<std::string> questions;
};

std::vector<ServiceClip> service_clips(const Corpus& corpus) {
    std::vector<ServiceClip> clips;
    for (const auto& c : corpus.clips) clips.push_back({c.clip_id, c.dialogue.caption, c.track});
    return clips;
}

ServiceOptions service_options(const LoadedRun& r) {
    ServiceOptions o;
    o.sal_mode = r.train.sal_mode;
    o.decode = r.config.eval.decode;
    o.history_window = r.train.history_window;
    return o;
}

int cmd_generate(const GenerateArgs& a) {
    LoadedRun r = load_run(a.run);
    DialogueService service(r.model.model, r.model.vocab, r.estimator ? &*r.estimator : nullptr, r.keywords,
                            service_clips(r.corpus), service_options(r));
    const std::string clip = a.clip.empty() ? r.corpus.clips.at(0).clip_id : a.clip;
    const std::string id = service.create_session(clip);
    json rounds = json::array();
    for (const auto& q : a.questions) rounds.push_back(service.ask(id, q).to_json());
    print({{"clip_id", clip}, {"rounds", rounds}});
    return 0;
}

// --- analyze --------------------------------------------------------------

struct AnalyzeArgs {
    Common common;
    std::string data;
    std::string keyword_file;
    bool keywords = false;
    bool schedule = false;
};

int cmd_analyze(const AnalyzeArgs& a) {
    const ExperimentConfig cfg = load_config(a.common, corpus_seed);
    if (!a.keywords && !a.schedule) throw CLI::ValidationError("analyze", "choose --keywords and/or --schedule");
    json out = json::object();
    if (a.keywords) {
        const Corpus corpus = corpus_for(cfg, a.data);
        std::vector<std::size_t> all(corpus.clips.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        const auto questions = question_tokens(corpus, all);
        const KeywordSet keywords = keywords_for(a.keyword_file);
        json rows = json::array();
        std::size_t positives = 0;
        for (const auto& q : questions) positives += contains_audio_keyword(q, keywords) ? 1 : 0;
        for (const auto& s : keyword_proportions(questions, keywords)) {
            rows.push_back({{"keyword", s.keyword}, {"count", s.count}, {"share", s.share}});
        }
        out["keywords"] = {{"questions", questions.size()}, {"keyword_positive", positives}, {"table", rows}};
    }
    if (a.schedule) {
        json curves = json::object();
        for (auto curve : {ScheduleCurve::Hyperbolic, ScheduleCurve::Linear, ScheduleCurve::Logistic}) {
            ScheduleConfig s = cfg.train.schedule();
            s.curve = curve;
            json ns = json::array();
            for (int e = 1; e <= s.e_max; ++e) ns.push_back(mask_distance_schedule(e, s));
            curves[to_string(curve)] = ns;
        }
        out["schedule"] = curves;
    }
    print(out);
    return 0;
}

// --- serve ----------------------------------------------------------------

struct ServeArgs {
    RunArgs run;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string journal;
};

int cmd_serve(const ServeArgs& a) {
    LoadedRun r = load_run(a.run);
    ServiceOptions options = service_options(r);
    if (!a.journal.empty()) options.journal = resolve_run(a.journal);
    DialogueService service(r.model.model, r.model.vocab, r.estimator ? &*r.estimator : nullptr, r.keywords,
                            service_clips(r.corpus), options);
    HttpServer server(service);
    const int port = server.bind(a.host, a.port);
    std::cout << "listening on http://" << a.host << ':' << port << std::endl;
    return server.listen_after_bind() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HEAR desk-scale toolkit. Relative run names resolve under $" + std::string(kRunRootEnv) +
                 " (default ./runs)."};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth-data", "write a synthetic corpus");
    add_common(synth_cmd, synth.common);
    synth_cmd->add_option("--out", synth.out, "output directory");

    EstimatorArgs est;
    auto* est_cmd = app.add_subcommand("train-estimator", "train the audio-relatedness estimator");
    add_common(est_cmd, est.common);
    est_cmd->add_option("--data", est.data, "corpus directory (default: synthesize from the config)");
    est_cmd->add_option("--out", est.out, "output directory");
    est_cmd->add_option("--keyword-file", est.keyword_file, "keyword list, one per line");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train the dialogue model");
    add_common(train_cmd, tr.common);
    train_cmd->add_option("--data", tr.data, "corpus directory (default: synthesize from the config)");
    train_cmd->add_option("--estimator", tr.estimator, "estimator checkpoint (default: train one)");
    train_cmd->add_option("--out", tr.out, "run directory");
    train_cmd->add_option("--variant", tr.variant, "ablation row")->check(CLI::IsMember(ablation_variants()));
    train_cmd->add_option("--keyword-file", tr.keyword_file, "keyword list, one per line");
    train_cmd->add_flag("--resume", tr.resume, "continue from the run's state.ckpt");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "decode a split and score it");
    add_run_options(eval_cmd, ev.run);
    eval_cmd->add_option("--bucket", ev.bucket, "all, keyword, estimator or audio")
        ->check(CLI::IsMember({"all", "keyword", "estimator", "audio"}));
    eval_cmd->add_option("--split", ev.split, "train, validation or test")
        ->check(CLI::IsMember({"train", "validation", "test"}));
    eval_cmd->add_flag("--zero-audio", ev.zero_audio, "also decode with the audio stream zeroed");
    eval_cmd->add_option("--out", ev.out, "report path");

    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate", "answer questions about one clip, round by round");
    add_run_options(gen_cmd, gen.run);
    gen_cmd->add_option("--clip", gen.clip, "clip id (default: the first clip)");
    gen_cmd->add_option("--question,-q", gen.questions, "question text; repeat for later rounds")->required();

    AnalyzeArgs an;
    auto* an_cmd = app.add_subcommand("analyze", "corpus and schedule analyses");
    add_common(an_cmd, an.common);
    an_cmd->add_option("--data", an.data, "corpus directory (default: synthesize from the config)");
    an_cmd->add_option("--keyword-file", an.keyword_file, "keyword list, one per line");
    an_cmd->add_flag("--keywords", an.keywords, "share of keyword-positive questions per keyword");
    an_cmd->add_flag("--schedule", an.schedule, "masking distance per epoch for every curve");

    ServeArgs sv;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP session service");
    add_run_options(serve_cmd, sv.run);
    serve_cmd->add_option("--host", sv.host, "bind address");
    serve_cmd->add_option("--port", sv.port, "port, 0 for any free one");
    serve_cmd->add_option("--journal", sv.journal, "append-only session journal");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth_cmd) return cmd_synth(synth);
        if (*est_cmd) return cmd_train_estimator(est);
        if (*train_cmd) return cmd_train(tr);
        if (*eval_cmd) return cmd_eval(ev);
        if (*gen_cmd) return cmd_generate(gen);
        if (*an_cmd) return cmd_analyze(an);
        if (*serve_cmd) return cmd_serve(sv);
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << '\n' << app.help();
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error at " << e.field() << ": " << e.message() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
