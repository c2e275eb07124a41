#pragma once

// The alternating optimization loop.

#include "hear/corpus.hpp"
#include "hear/dlm.hpp"
#include "hear/estimator.hpp"
#include "hear/optim.hpp"
#include "hear/rle.hpp"
#include "hear/sal.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace hear {

struct LrBreakpoint {
    double fraction;  // position in (0, 1) of the total step count
    double lr;
};

struct TrainConfig {
    int epochs = 15;
    int batch_size = 8;
    double lr_start = 6.24e-5;
    double lr_end = 3.63e-10;
    std::vector<LrBreakpoint> lr_breakpoints;  // optional interior knots
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double grad_clip = 1.0;  // 0 disables
    double delta = kDefaultRubMargin;
    double mask_p = 0.1;
    SalMode sal_mode = SalMode::Estimator;
    bool use_rle = true;
    bool use_reconstruction = true;  // L_ar inside the RLE objective
    bool use_ranking = true;         // L_rub inside the RLE objective
    bool detach_upper_bound = true;
    ScheduleCurve schedule_curve = ScheduleCurve::Hyperbolic;
    int schedule_n_max = 5;
    double schedule_steepness = 1.0;
    std::size_t history_window = kDefaultHistoryWindow;
    std::uint64_t seed = 1;
    DlmConfig model;  // vocab_size and feature dims are filled from the corpus when zero

    void validate() const;
    ScheduleConfig schedule() const;  // e_max = epochs
    nlohmann::json to_json() const;
    // Keys absent from `j` keep their defaults. Errors name the dotted path.
    static TrainConfig from_json(const nlohmann::json& j);
};

// The six ablation rows: none, k, s, s+ar, s+rub, s+ar+rub.
const std::vector<std::string>& ablation_variants();
TrainConfig apply_variant(TrainConfig config, const std::string& variant);

// Piecewise linear from lr_start at step 0 to lr_end at total_steps.
double lr_at(std::int64_t step, std::int64_t total_steps, const TrainConfig& config);

struct InstanceRef {
    std::size_t clip = 0;
    std::size_t instance = 0;
};

std::vector<InstanceRef> instances_of(const Corpus& corpus, std::span<const std::size_t> clips);

// Per-clip, per-instance gating decisions. `estimator` may be null unless the
// mode needs scores.
std::vector<std::vector<RelatednessDecision>> relatedness_table(const Corpus& corpus, SalMode mode,
                                                                const EstimatorModel* estimator,
                                                                const KeywordSet& keywords);

enum class Branch { Sal, Rle };
std::string to_string(Branch branch);

struct StepRecord {
    std::int64_t iteration = 0;
    int epoch = 0;
    Branch branch = Branch::Sal;
    double loss = 0.0;
    double lr = 0.0;
    int n = 0;  // masking distance, RLE only
    double recon = 0.0;
    double upper = 0.0;
    double ranking = 0.0;
    nlohmann::json to_json() const;
};

struct EpochRecord {
    int epoch = 0;
    int n = 0;
    double mean_recon = 0.0;
    double mean_upper = 0.0;
    double mean_ranking = 0.0;
    int rle_batches = 0;
    double train_sal = 0.0;
    double validation_sal = 0.0;
    nlohmann::json to_json() const;
};

struct TrainState {
    std::int64_t iteration = 0;  // completed iterations; the next one is iteration + 1
    int epoch = 0;               // completed epochs
    std::mt19937_64 rng;
    double best_validation = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
};

class Trainer {
  public:
    Trainer(TrainConfig config, const Corpus& corpus, const ClipSplit& split,
            std::vector<std::vector<RelatednessDecision>> decisions);

    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    const TrainConfig& config() const { return config_; }
    const Vocabulary& vocab() const { return corpus_->vocab; }
    DlmModel& model() { return model_; }
    const DlmModel& model() const { return model_; }
    TrainState& state() { return state_; }
    const TrainState& state() const { return state_; }
    // Each loss keeps its own AdamW moments over the shared parameters.
    AdamW& optimizer(Branch branch) { return branch == Branch::Sal ? optimizer_ : rle_optimizer_; }

    std::int64_t batches_per_epoch() const;
    // Every batch is used once per enabled loss, so RLE doubles the iterations.
    std::int64_t iterations_per_epoch() const;
    std::int64_t total_steps() const;

    // One iteration on `batch`. Odd iterations step on L_SAL, even ones on
    // L_RLE; without RLE every iteration is SAL.
    StepRecord hear_step(std::span<const InstanceRef> batch);

    // Mean L_SAL over the validation split, without gradients.
    double validation_loss() const;

    EpochRecord run_epoch();
    bool finished() const { return state_.epoch >= config_.epochs; }

    const std::vector<StepRecord>& steps() const { return steps_; }
    const std::vector<EpochRecord>& epochs() const { return epochs_; }
    // Parameter values at the lowest validation loss so far.
    const std::vector<Matrix>& best_parameters() const { return best_; }

    // Full resumable state: parameters, moments, counters, RNG, records.
    void save_state(const std::filesystem::path& path) const;
    void load_state(const std::filesystem::path& path);

  private:
    const RelatednessDecision& decision(const InstanceRef& ref) const;
    Var sal_batch_loss(std::span<const InstanceRef> batch) const;

    TrainConfig config_;
    const Corpus* corpus_;
    std::vector<InstanceRef> train_, validation_;
    std::vector<std::vector<RelatednessDecision>> decisions_;
    DlmModel model_;
    AdamW optimizer_;
    AdamW rle_optimizer_;
    TrainState state_;
    std::vector<StepRecord> steps_;
    std::vector<EpochRecord> epochs_;
    std::vector<Matrix> best_;
};

// Fills model dims from the corpus when unset.
TrainConfig resolve_model_dims(TrainConfig config, const Corpus& corpus);

struct TrainResult {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_validation = 0.0;
};

// Runs all epochs. With a run directory, writes best.ckpt, last.ckpt,
// metrics.jsonl (step and epoch records) and schedule.jsonl.
TrainResult train(Trainer& trainer, const std::filesystem::path& run_dir = {});

}  // namespace hear
