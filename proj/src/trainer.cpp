#include "hear/trainer.hpp"

#include "hear/checkpoint.hpp"
#include "hear/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace hear {

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& field, const std::string& prefix) {
    if (!j.contains(key)) return;
    try {
        field = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(prefix + key, "wrong type");
    }
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& prefix) {
    if (!j.is_object()) throw ConfigError(prefix.empty() ? "train" : prefix.substr(0, prefix.size() - 1), "expected an object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ConfigError(prefix + key, "unknown key");
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (!(lr_start > 0.0)) throw ConfigError("train.lr_start", "must be > 0");
    if (!(lr_end > 0.0) || lr_end > lr_start) throw ConfigError("train.lr_end", "must be in (0, lr_start]");
    double prev_f = 0.0;
    double prev_lr = lr_start;
    for (std::size_t i = 0; i < lr_breakpoints.size(); ++i) {
        const auto& b = lr_breakpoints[i];
        const std::string field = "train.lr_breakpoints[" + std::to_string(i) + "]";
        if (!(b.fraction > prev_f && b.fraction < 1.0)) throw ConfigError(field, "fractions must increase within (0, 1)");
        if (!(b.lr > 0.0) || b.lr > prev_lr || b.lr < lr_end) throw ConfigError(field, "lr must be non-increasing");
        prev_f = b.fraction;
        prev_lr = b.lr;
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1", "must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2", "must be in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("train.eps", "must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay", "must be >= 0");
    if (!(grad_clip >= 0.0)) throw ConfigError("train.grad_clip", "must be >= 0");
    if (!(delta > 0.0)) throw ConfigError("train.delta", "must be > 0");
    if (!(mask_p > 0.0 && mask_p < 1.0)) throw ConfigError("train.mask_p", "must be in (0, 1)");
    if (use_rle && !use_reconstruction && !use_ranking) {
        throw ConfigError("train.use_rle", "RLE enabled with neither reconstruction nor ranking");
    }
    if (schedule_n_max < 1) throw ConfigError("train.schedule.n_max", "must be >= 1");
    if (!(schedule_steepness > 0.0)) throw ConfigError("train.schedule.steepness", "must be > 0");
    // Data-dependent dims may still be unset here.
    DlmConfig m = model;
    if (m.vocab_size == 0) m.vocab_size = Vocabulary::kSpecialCount + 1;
    if (m.video_dim == 0) m.video_dim = 1;
    if (m.audio_dim == 0) m.audio_dim = 1;
    try {
        m.validate();
    } catch (const ConfigError& e) {
        throw ConfigError("train." + e.field(), e.message());
    }
}

ScheduleConfig TrainConfig::schedule() const {
    ScheduleConfig s;
    s.curve = schedule_curve;
    s.n_max = schedule_n_max;
    s.e_max = epochs;
    s.logistic_steepness = schedule_steepness;
    return s;
}

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json bps = nlohmann::json::array();
    for (const auto& b : lr_breakpoints) bps.push_back({{"fraction", b.fraction}, {"lr", b.lr}});
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"lr_start", lr_start},
            {"lr_end", lr_end},
            {"lr_breakpoints", bps},
            {"beta1", beta1},
            {"beta2", beta2},
            {"eps", eps},
            {"weight_decay", weight_decay},
            {"grad_clip", grad_clip},
            {"delta", delta},
            {"mask_p", mask_p},
            {"sal_mode", to_string(sal_mode)},
            {"use_rle", use_rle},
            {"use_reconstruction", use_reconstruction},
            {"use_ranking", use_ranking},
            {"detach_upper_bound", detach_upper_bound},
            {"schedule", {{"curve", to_string(schedule_curve)}, {"n_max", schedule_n_max}, {"steepness", schedule_steepness}}},
            {"history_window", history_window},
            {"seed", seed},
            {"model", model.to_json()}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "epochs", "batch_size", "lr_start", "lr_end", "lr_breakpoints", "beta1", "beta2", "eps",
        "weight_decay", "grad_clip", "delta", "mask_p", "sal_mode", "use_rle", "use_reconstruction",
        "use_ranking", "detach_upper_bound", "schedule", "history_window", "seed", "model", "variant"};
    reject_unknown(j, known, "train.");
    TrainConfig c;
    const std::string p = "train.";
    read_field(j, "epochs", c.epochs, p);
    read_field(j, "batch_size", c.batch_size, p);
    read_field(j, "lr_start", c.lr_start, p);
    read_field(j, "lr_end", c.lr_end, p);
    read_field(j, "beta1", c.beta1, p);
    read_field(j, "beta2", c.beta2, p);
    read_field(j, "eps", c.eps, p);
    read_field(j, "weight_decay", c.weight_decay, p);
    read_field(j, "grad_clip", c.grad_clip, p);
    read_field(j, "delta", c.delta, p);
    read_field(j, "mask_p", c.mask_p, p);
    read_field(j, "use_rle", c.use_rle, p);
    read_field(j, "use_reconstruction", c.use_reconstruction, p);
    read_field(j, "use_ranking", c.use_ranking, p);
    read_field(j, "detach_upper_bound", c.detach_upper_bound, p);
    read_field(j, "history_window", c.history_window, p);
    read_field(j, "seed", c.seed, p);
    if (j.contains("sal_mode")) {
        std::string mode;
        read_field(j, "sal_mode", mode, p);
        try {
            c.sal_mode = parse_sal_mode(mode);
        } catch (const ConfigError& e) {
            throw ConfigError("train.sal_mode", e.message());
        }
    }
    if (j.contains("lr_breakpoints")) {
        const auto& bps = j.at("lr_breakpoints");
        if (!bps.is_array()) throw ConfigError("train.lr_breakpoints", "expected an array");
        for (std::size_t i = 0; i < bps.size(); ++i) {
            const std::string field = "train.lr_breakpoints[" + std::to_string(i) + "]";
            LrBreakpoint b{};
            try {
                b.fraction = bps[i].at("fraction").get<double>();
                b.lr = bps[i].at("lr").get<double>();
            } catch (const nlohmann::json::exception&) {
                throw ConfigError(field, "expected {fraction, lr}");
            }
            c.lr_breakpoints.push_back(b);
        }
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        reject_unknown(s, {"curve", "n_max", "steepness"}, "train.schedule.");
        if (s.contains("curve")) {
            std::string curve;
            read_field(s, "curve", curve, "train.schedule.");
            try {
                c.schedule_curve = parse_schedule_curve(curve);
            } catch (const ConfigError& e) {
                throw ConfigError("train.schedule.curve", e.message());
            }
        }
        read_field(s, "n_max", c.schedule_n_max, "train.schedule.");
        read_field(s, "steepness", c.schedule_steepness, "train.schedule.");
    }
    if (j.contains("model")) {
        try {
            c.model = DlmConfig::from_json(j.at("model"));
        } catch (const ConfigError& e) {
            throw ConfigError("train." + e.field(), e.message());
        }
    }
    if (j.contains("variant")) {
        std::string variant;
        read_field(j, "variant", variant, p);
        c = apply_variant(c, variant);
    }
    c.validate();
    return c;
}

const std::vector<std::string>& ablation_variants() {
    static const std::vector<std::string> v = {"none", "k", "s", "s+ar", "s+rub", "s+ar+rub"};
    return v;
}

TrainConfig apply_variant(TrainConfig c, const std::string& variant) {
    c.use_reconstruction = true;
    c.use_ranking = true;
    if (variant == "none") {
        c.sal_mode = SalMode::None;
        c.use_rle = false;
    } else if (variant == "k") {
        c.sal_mode = SalMode::Keyword;
        c.use_rle = false;
    } else if (variant == "s") {
        c.sal_mode = SalMode::Estimator;
        c.use_rle = false;
    } else if (variant == "s+ar") {
        c.sal_mode = SalMode::Estimator;
        c.use_rle = true;
        c.use_ranking = false;
    } else if (variant == "s+rub") {
        c.sal_mode = SalMode::Estimator;
        c.use_rle = true;
        c.use_reconstruction = false;
    } else if (variant == "s+ar+rub") {
        c.sal_mode = SalMode::Estimator;
        c.use_rle = true;
    } else {
        throw ConfigError("train.variant", "unknown variant '" + variant + "'");
    }
    return c;
}

double lr_at(std::int64_t step, std::int64_t total_steps, const TrainConfig& config) {
    if (total_steps < 0 || step < 0 || step > total_steps) {
        throw std::out_of_range("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
    }
    if (total_steps == 0) return config.lr_start;
    if (step == total_steps) return config.lr_end;
    const double x = static_cast<double>(step) / static_cast<double>(total_steps);
    double f0 = 0.0;
    double l0 = config.lr_start;
    for (const auto& b : config.lr_breakpoints) {
        if (x < b.fraction) return l0 + (b.lr - l0) * (x - f0) / (b.fraction - f0);
        f0 = b.fraction;
        l0 = b.lr;
    }
    return l0 + (config.lr_end - l0) * (x - f0) / (1.0 - f0);
}

std::vector<InstanceRef> instances_of(const Corpus& corpus, std::span<const std::size_t> clips) {
    std::vector<InstanceRef> out;
    for (std::size_t c : clips) {
        if (c >= corpus.clips.size()) throw std::out_of_range("instances_of: clip index out of range");
        for (std::size_t i = 0; i < corpus.clips[c].instances.size(); ++i) out.push_back({c, i});
    }
    return out;
}

std::vector<std::vector<RelatednessDecision>> relatedness_table(const Corpus& corpus, SalMode mode,
                                                                const EstimatorModel* estimator,
                                                                const KeywordSet& keywords) {
    const bool needs_score = mode == SalMode::Estimator || mode == SalMode::Both;
    if (needs_score && estimator == nullptr) {
        throw std::invalid_argument("relatedness_table: SAL mode '" + to_string(mode) + "' needs an estimator");
    }
    std::vector<std::vector<RelatednessDecision>> table;
    for (const auto& clip : corpus.clips) {
        auto& row = table.emplace_back();
        for (const auto& inst : clip.instances) {
            const auto tokens = corpus.vocab.tokens_of(inst.question);
            std::optional<double> score;
            if (estimator != nullptr) score = estimator->score(inst.question);
            row.push_back(decide_gating(mode, contains_audio_keyword(tokens, keywords), score));
        }
    }
    return table;
}

std::string to_string(Branch branch) { return branch == Branch::Sal ? "sal" : "rle"; }

nlohmann::json StepRecord::to_json() const {
    nlohmann::json j = {{"type", "step"},   {"iteration", iteration}, {"epoch", epoch},
                        {"branch", to_string(branch)}, {"loss", loss}, {"lr", lr}};
    if (branch == Branch::Rle) {
        j["n"] = n;
        j["recon"] = recon;
        j["upper"] = upper;
        j["ranking"] = ranking;
    }
    return j;
}

nlohmann::json EpochRecord::to_json() const {
    return {{"type", "epoch"},          {"epoch", epoch},           {"n", n},
            {"mean_recon", mean_recon}, {"mean_upper", mean_upper}, {"mean_ranking", mean_ranking},
            {"rle_batches", rle_batches}, {"train_sal", train_sal}, {"validation_sal", validation_sal}};
}

namespace {

StepRecord step_from_json(const nlohmann::json& j) {
    StepRecord s;
    s.iteration = j.at("iteration").get<std::int64_t>();
    s.epoch = j.at("epoch").get<int>();
    s.branch = j.at("branch").get<std::string>() == "rle" ? Branch::Rle : Branch::Sal;
    s.loss = j.at("loss").get<double>();
    s.lr = j.at("lr").get<double>();
    s.n = j.value("n", 0);
    s.recon = j.value("recon", 0.0);
    s.upper = j.value("upper", 0.0);
    s.ranking = j.value("ranking", 0.0);
    return s;
}

EpochRecord epoch_from_json(const nlohmann::json& j) {
    EpochRecord e;
    e.epoch = j.at("epoch").get<int>();
    e.n = j.at("n").get<int>();
    e.mean_recon = j.at("mean_recon").get<double>();
    e.mean_upper = j.at("mean_upper").get<double>();
    e.mean_ranking = j.at("mean_ranking").get<double>();
    e.rle_batches = j.at("rle_batches").get<int>();
    e.train_sal = j.at("train_sal").get<double>();
    e.validation_sal = j.at("validation_sal").get<double>();
    return e;
}

std::uint64_t rng_seed(std::uint64_t seed) { return seed * 0x9e3779b97f4a7c15ULL + 0x5851f42d4c957f2dULL; }

}  // namespace

TrainConfig resolve_model_dims(TrainConfig config, const Corpus& corpus) {
    if (config.model.vocab_size == 0) config.model.vocab_size = static_cast<int>(corpus.vocab.size());
    if (!corpus.clips.empty()) {
        const auto& track = corpus.clips.front().track;
        config.model.video_dim = track.video.cols();
        config.model.audio_dim = track.audio.cols();
    }
    return config;
}

Trainer::Trainer(TrainConfig config, const Corpus& corpus, const ClipSplit& split,
                 std::vector<std::vector<RelatednessDecision>> decisions)
    : config_(resolve_model_dims(std::move(config), corpus)),
      corpus_(&corpus),
      train_(instances_of(corpus, split.train)),
      validation_(instances_of(corpus, split.validation)),
      decisions_(std::move(decisions)),
      model_((config_.validate(), config_.model), config_.seed),
      optimizer_(model_.parameters(), {config_.beta1, config_.beta2, config_.eps, config_.weight_decay}),
      rle_optimizer_(model_.parameters(), {config_.beta1, config_.beta2, config_.eps, config_.weight_decay}) {
    if (train_.empty()) throw std::invalid_argument("Trainer: empty training split");
    if (validation_.empty()) throw std::invalid_argument("Trainer: empty validation split");
    if (decisions_.size() != corpus.clips.size()) throw std::invalid_argument("Trainer: decision table size mismatch");
    for (std::size_t c = 0; c < corpus.clips.size(); ++c) {
        if (decisions_[c].size() != corpus.clips[c].instances.size()) {
            throw std::invalid_argument("Trainer: decision table size mismatch for clip " + corpus.clips[c].clip_id);
        }
        for (const auto& inst : corpus.clips[c].instances) {
            if (inst.history.size() > config_.history_window) {
                throw ConfigError("train.history_window", "corpus instance " + inst.clip_id + " round " +
                                                              std::to_string(inst.round) + " exceeds the window");
            }
        }
    }
    state_.rng.seed(rng_seed(config_.seed));
}

std::int64_t Trainer::batches_per_epoch() const {
    const auto n = static_cast<std::int64_t>(train_.size());
    return (n + config_.batch_size - 1) / config_.batch_size;
}

std::int64_t Trainer::iterations_per_epoch() const { return batches_per_epoch() * (config_.use_rle ? 2 : 1); }

std::int64_t Trainer::total_steps() const { return iterations_per_epoch() * config_.epochs; }

const RelatednessDecision& Trainer::decision(const InstanceRef& ref) const { return decisions_[ref.clip][ref.instance]; }

Var Trainer::sal_batch_loss(std::span<const InstanceRef> batch) const {
    std::vector<Var> terms;
    terms.reserve(batch.size());
    for (const auto& ref : batch) {
        const Clip& clip = corpus_->clips[ref.clip];
        const Var fused = sal_fuse(model_, clip.track, decision(ref));
        terms.push_back(sal_loss(model_, clip.instances[ref.instance], fused));
    }
    return ag::scale(ag::sum(ag::concat_rows(terms)), 1.0 / static_cast<double>(terms.size()));
}

StepRecord Trainer::hear_step(std::span<const InstanceRef> batch) {
    if (batch.empty()) throw std::invalid_argument("hear_step: empty batch");
    StepRecord rec;
    rec.iteration = state_.iteration + 1;
    rec.epoch = std::min(state_.epoch + 1, config_.epochs);
    rec.branch = (config_.use_rle && rec.iteration % 2 == 0) ? Branch::Rle : Branch::Sal;
    rec.lr = lr_at(std::min(rec.iteration - 1, total_steps()), total_steps(), config_);

    model_.parameters().zero_grad();
    Var loss;
    if (rec.branch == Branch::Sal) {
        loss = sal_batch_loss(batch);
    } else {
        rec.n = mask_distance_schedule(rec.epoch, config_.schedule());
        const RleOptions options{config_.delta, config_.use_reconstruction, config_.use_ranking,
                                 config_.detach_upper_bound};
        std::vector<Var> terms;
        for (const auto& ref : batch) {
            const Clip& clip = corpus_->clips[ref.clip];
            const MaskPlan plan = sample_mask(clip.track.frames(), config_.mask_p, state_.rng);
            RleTerms t = rle_loss(model_, clip.instances[ref.instance], clip.track, plan.masked, rec.n, options);
            rec.recon += t.recon;
            rec.upper += t.upper;
            rec.ranking += t.ranking;
            terms.push_back(t.objective);
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        rec.recon *= inv;
        rec.upper *= inv;
        rec.ranking *= inv;
        loss = ag::scale(ag::sum(ag::concat_rows(terms)), inv);
    }
    rec.loss = loss.item();
    if (!std::isfinite(rec.loss)) {
        nlohmann::json snapshot = rec.to_json();
        snapshot["batch"] = nlohmann::json::array();
        for (const auto& ref : batch) {
            const auto& inst = corpus_->clips[ref.clip].instances[ref.instance];
            snapshot["batch"].push_back({{"clip_id", inst.clip_id}, {"round", inst.round}});
        }
        throw TrainingError("non-finite loss: " + snapshot.dump());
    }
    if (loss.requires_grad()) {
        loss.backward();
        if (config_.grad_clip > 0.0) clip_grad_norm(model_.parameters(), config_.grad_clip);
        optimizer(rec.branch).step(rec.lr);
    }
    state_.iteration = rec.iteration;
    steps_.push_back(rec);
    return rec;
}

double Trainer::validation_loss() const {
    ag::NoGradGuard no_grad;
    double total = 0.0;
    for (const auto& ref : validation_) {
        const Clip& clip = corpus_->clips[ref.clip];
        total += sal_loss(model_, clip.instances[ref.instance], sal_fuse(model_, clip.track, decision(ref))).item();
    }
    return total / static_cast<double>(validation_.size());
}

EpochRecord Trainer::run_epoch() {
    if (finished()) throw std::logic_error("run_epoch: all epochs already run");
    EpochRecord rec;
    rec.epoch = state_.epoch + 1;
    rec.n = mask_distance_schedule(rec.epoch, config_.schedule());

    std::vector<InstanceRef> order = train_;
    std::shuffle(order.begin(), order.end(), state_.rng);
    double sal_sum = 0.0;
    int sal_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config_.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config_.batch_size));
        const auto batch = std::span<const InstanceRef>(order).subspan(start, end - start);
        // With RLE on, the batch feeds an odd (SAL) and then an even (RLE) iteration.
        for (int pass = 0; pass < (config_.use_rle ? 2 : 1); ++pass) {
            const StepRecord s = hear_step(batch);
            if (s.branch == Branch::Rle) {
                rec.mean_recon += s.recon;
                rec.mean_upper += s.upper;
                rec.mean_ranking += s.ranking;
                ++rec.rle_batches;
            } else {
                sal_sum += s.loss;
                ++sal_batches;
            }
        }
    }
    if (rec.rle_batches > 0) {
        rec.mean_recon /= rec.rle_batches;
        rec.mean_upper /= rec.rle_batches;
        rec.mean_ranking /= rec.rle_batches;
    }
    rec.train_sal = sal_batches > 0 ? sal_sum / sal_batches : 0.0;
    rec.validation_sal = validation_loss();
    if (!std::isfinite(rec.validation_sal)) {
        throw TrainingError("non-finite validation loss: " + rec.to_json().dump());
    }
    state_.epoch = rec.epoch;
    if (rec.validation_sal < state_.best_validation) {
        state_.best_validation = rec.validation_sal;
        state_.best_epoch = rec.epoch;
        best_ = model_.parameters().snapshot();
    }
    epochs_.push_back(rec);
    return rec;
}

void Trainer::save_state(const std::filesystem::path& path) const {
    TensorBundle bundle;
    std::ostringstream rng;
    rng << state_.rng;
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : steps_) steps.push_back(s.to_json());
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : epochs_) epochs.push_back(e.to_json());
    bundle.header = {{"kind", "train_state"},
                     {"config", config_.to_json()},
                     {"vocab", corpus_->vocab.to_json()},
                     {"iteration", state_.iteration},
                     {"epoch", state_.epoch},
                     {"rng", rng.str()},
                     {"best_validation", std::isfinite(state_.best_validation)
                                             ? nlohmann::json(state_.best_validation)
                                             : nlohmann::json(nullptr)},
                     {"best_epoch", state_.best_epoch},
                     {"optimizer_steps", optimizer_.steps()},
                     {"rle_optimizer_steps", rle_optimizer_.steps()},
                     {"steps", steps},
                     {"epochs", epochs}};
    append_parameters(bundle, model_.parameters());
    const auto& entries = model_.parameters().entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        bundle.tensors.emplace_back("adam.m." + entries[i].first, optimizer_.first_moments()[i]);
        bundle.tensors.emplace_back("adam.v." + entries[i].first, optimizer_.second_moments()[i]);
        bundle.tensors.emplace_back("rle_adam.m." + entries[i].first, rle_optimizer_.first_moments()[i]);
        bundle.tensors.emplace_back("rle_adam.v." + entries[i].first, rle_optimizer_.second_moments()[i]);
        if (!best_.empty()) bundle.tensors.emplace_back("best." + entries[i].first, best_[i]);
    }
    write_bundle(path, bundle);
}

void Trainer::load_state(const std::filesystem::path& path) {
    const TensorBundle bundle = read_bundle(path);
    const auto& h = bundle.header;
    if (h.value("kind", "") != "train_state") throw FormatError("checkpoint: " + path.string() + " is not a train state");
    if (h.at("config") != config_.to_json()) throw FormatError("checkpoint: train state was written under another config");
    load_parameters(bundle, model_.parameters());
    const auto& entries = model_.parameters().entries();
    std::vector<Matrix> m, v, rm, rv, best;
    const bool has_best = h.at("best_epoch").get<int>() > 0;
    for (const auto& [name, _] : entries) {
        m.push_back(bundle.at("adam.m." + name));
        v.push_back(bundle.at("adam.v." + name));
        rm.push_back(bundle.at("rle_adam.m." + name));
        rv.push_back(bundle.at("rle_adam.v." + name));
        if (has_best) best.push_back(bundle.at("best." + name));
    }
    optimizer_.restore(h.at("optimizer_steps").get<std::int64_t>(), std::move(m), std::move(v));
    rle_optimizer_.restore(h.at("rle_optimizer_steps").get<std::int64_t>(), std::move(rm), std::move(rv));
    best_ = std::move(best);
    state_.iteration = h.at("iteration").get<std::int64_t>();
    state_.epoch = h.at("epoch").get<int>();
    std::istringstream rng(h.at("rng").get<std::string>());
    rng >> state_.rng;
    state_.best_validation =
        h.at("best_validation").is_null() ? std::numeric_limits<double>::infinity() : h.at("best_validation").get<double>();
    state_.best_epoch = h.at("best_epoch").get<int>();
    steps_.clear();
    for (const auto& s : h.at("steps")) steps_.push_back(step_from_json(s));
    epochs_.clear();
    for (const auto& e : h.at("epochs")) epochs_.push_back(epoch_from_json(e));
}

TrainResult train(Trainer& trainer, const std::filesystem::path& run_dir) {
    const bool write = !run_dir.empty();
    std::ofstream metrics, schedule;
    if (write) {
        std::filesystem::create_directories(run_dir);
        metrics.open(run_dir / "metrics.jsonl", std::ios::app);
        schedule.open(run_dir / "schedule.jsonl", std::ios::app);
    }
    while (!trainer.finished()) {
        const std::size_t before = trainer.steps().size();
        const EpochRecord e = trainer.run_epoch();
        if (write) {
            for (std::size_t i = before; i < trainer.steps().size(); ++i) metrics << trainer.steps()[i].to_json().dump() << '\n';
            metrics << e.to_json().dump() << '\n';
            schedule << nlohmann::json{{"epoch", e.epoch},
                                       {"n", e.n},
                                       {"mean_recon", e.mean_recon},
                                       {"mean_upper", e.mean_upper},
                                       {"mean_ranking", e.mean_ranking}}
                            .dump()
                     << '\n';
            metrics.flush();
            schedule.flush();
            trainer.save_state(run_dir / "state.ckpt");
        }
    }
    if (write) {
        const nlohmann::json extra = {{"train", trainer.config().to_json()},
                                      {"best_epoch", trainer.state().best_epoch},
                                      {"best_validation", trainer.state().best_validation}};
        save_model(run_dir / "last.ckpt", trainer.model(), trainer.vocab(), extra);
        const std::vector<Matrix> last = trainer.model().parameters().snapshot();
        trainer.model().parameters().restore(trainer.best_parameters());
        save_model(run_dir / "best.ckpt", trainer.model(), trainer.vocab(), extra);
        trainer.model().parameters().restore(last);
    }
    return {trainer.steps(), trainer.epochs(), trainer.state().best_epoch, trainer.state().best_validation};
}

}  // namespace hear
