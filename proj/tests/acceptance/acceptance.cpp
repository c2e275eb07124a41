// Acceptance run: one PASS/FAIL line per criterion, followed by indented
// detail lines. Deterministic criteria re-run the named unit test cases;
// the estimator and ablation criteria train the desk-scale setting.
//
// Exit status is 0 whenever every criterion was evaluated, so a failing
// criterion is reported without aborting the test run. `--strict` turns
// any FAIL into a non-zero exit. `--report <path>` also writes the verdict
// lines to a file.

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "hear/experiment.hpp"

#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

using namespace hear;

namespace {

// Counts test cases and failures of one doctest run.
struct Tally : doctest::IReporter {
    static inline int cases = 0;
    static inline int failed = 0;

    explicit Tally(const doctest::ContextOptions&) {}
    void report_query(const doctest::QueryData&) override {}
    void test_run_start() override {}
    void test_run_end(const doctest::TestRunStats&) override {}
    void test_case_start(const doctest::TestCaseData&) override { ++cases; }
    void test_case_reenter(const doctest::TestCaseData&) override {}
    void test_case_end(const doctest::CurrentTestCaseStats& s) override {
        if (s.failure_flags != 0) ++failed;
    }
    void test_case_exception(const doctest::TestCaseException&) override {}
    void subcase_start(const doctest::SubcaseSignature&) override {}
    void subcase_end() override {}
    void log_assert(const doctest::AssertData&) override {}
    void log_message(const doctest::MessageData&) override {}
    void test_case_skipped(const doctest::TestCaseData&) override {}
};
REGISTER_LISTENER("tally", 1, Tally);

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int precision = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << x;
    return s.str();
}

int failures = 0;
std::ostringstream report;

void emit(const std::string& line) {
    std::cout << line << std::endl;
    report << line << '\n';
}

void verdict(const std::string& name, bool pass, const std::vector<std::string>& details) {
    emit((pass ? "PASS " : "FAIL ") + name);
    for (const auto& d : details) emit("    " + d);
    if (!pass) ++failures;
}

std::string escape_commas(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == ',') out += '\\';
        out += c;
    }
    return out;
}

struct SuiteRun {
    int cases = 0;
    int failed = 0;
    double seconds = 0.0;
};

SuiteRun run_cases(const std::vector<std::string>& names) {
    std::string filter;
    for (const auto& n : names) filter += (filter.empty() ? "" : ",") + escape_commas(n);
    doctest::Context ctx;
    ctx.setOption("test-case", filter.c_str());
    ctx.setOption("minimal", true);
    ctx.setOption("no-version", true);
    Tally::cases = 0;
    Tally::failed = 0;
    const auto t0 = Clock::now();
    ctx.run();
    return {Tally::cases, Tally::failed, seconds_since(t0)};
}

void unit_criterion(const std::string& name, const std::vector<std::string>& cases, double budget_seconds,
                    std::vector<std::string> extra = {}) {
    const SuiteRun r = run_cases(cases);
    const bool complete = r.cases == static_cast<int>(cases.size());
    const bool pass = complete && r.failed == 0 && r.seconds < budget_seconds;
    std::vector<std::string> details = {
        std::to_string(r.cases - r.failed) + "/" + std::to_string(cases.size()) + " test cases passed",
        "runtime " + fmt(r.seconds, 2) + " s (budget " + fmt(budget_seconds, 0) + " s)"};
    if (!complete) details.push_back("expected " + std::to_string(cases.size()) + " cases, ran " + std::to_string(r.cases));
    details.insert(details.end(), extra.begin(), extra.end());
    verdict(name, pass, details);
}

constexpr std::uint64_t kSeeds[] = {7, 8, 9};

// Pinned thresholds.
constexpr double kEstimatorAucMin = 0.9;
constexpr double kRleBatchShareMin = 0.8;
constexpr int kSeedMajority = 2;
constexpr double kAudioGainMin = 5.0;  // absolute accuracy points
constexpr int kLastEpochs = 3;

// The trend runs use the 50-clip corpus; the ablation verdict uses a larger
// one so the audio bucket holds enough test questions to resolve 5 points.
constexpr std::size_t kTrendClips = 50;
constexpr std::size_t kAblationClips = 200;

struct SeedRun {
    std::uint64_t seed = 0;
    double prepare_seconds = 0.0;
    double holdout_auc = 0.0;
    double mean_shuffled = 0.0;
    double mean_intact = 0.0;
    bool scores_open_unit = true;
    std::map<std::string, VariantOutcome> variants;
    std::map<std::string, double> variant_seconds;
};

double mean(const std::vector<double>& v) {
    return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Exact-match accuracy in points over rows selected by `keep`.
template <typename Pred>
double bucket_accuracy(const EvalReport& report, Pred keep) {
    double hits = 0.0, n = 0.0;
    for (const auto& r : report.rows) {
        if (!keep(r)) continue;
        n += 1.0;
        hits += r.exact ? 1.0 : 0.0;
    }
    return n > 0.0 ? 100.0 * hits / n : std::nan("");
}

SeedRun run_seed(std::uint64_t seed, std::size_t clips, const std::vector<std::string>& variants) {
    SeedRun out;
    out.seed = seed;
    ExperimentConfig config = ExperimentConfig::desk_scale(seed);
    config.corpus.clips = clips;
    auto t0 = Clock::now();
    const PreparedData data = prepare(config);
    out.prepare_seconds = seconds_since(t0);
    out.holdout_auc = data.estimator.holdout_auc;

    std::vector<double> shuffled, intact;
    for (const auto& q : data.estimator.holdout) {
        std::vector<int> ids;
        for (const auto& tok : q.tokens) ids.push_back(data.corpus.vocab.id(tok));
        const double s = data.estimator.model.score(ids);
        if (!(s > 0.0 && s < 1.0)) out.scores_open_unit = false;
        if (q.provenance == "shuffle") shuffled.push_back(s);
        if (q.provenance == "keyword" && q.label == 1) intact.push_back(s);
    }
    out.mean_shuffled = mean(shuffled);
    out.mean_intact = mean(intact);

    for (const auto& v : variants) {
        std::cerr << "[acceptance] " << clips << " clips, seed " << seed << ", variant " << v << std::endl;
        t0 = Clock::now();
        out.variants.emplace(v, run_variant(data, config, v));
        out.variant_seconds[v] = seconds_since(t0);
    }
    return out;
}

struct Ablation {
    int ordered = 0;
    double mean_gain = 0.0;
    double mean_labeled_gain = 0.0;
    double seconds = 0.0;
};

Ablation summarize_ablation(const std::vector<SeedRun>& runs, std::vector<std::string>& details) {
    Ablation a;
    std::vector<double> gains, labeled_gains;
    for (const auto& r : runs) {
        const EvalReport& full = r.variants.at("s+ar+rub").report;
        const EvalReport& s = r.variants.at("s").report;
        const EvalReport& none = r.variants.at("none").report;
        const bool ok = full.overall.cider > s.overall.cider && s.overall.cider > none.overall.cider;
        a.ordered += ok ? 1 : 0;
        // Bucket membership comes from the shared estimator, so it is the
        // same question set for every variant.
        auto by_estimator = [](const InstanceResult& x) { return x.decision.r > kEstimatorBucketThreshold; };
        auto by_label = [](const InstanceResult& x) { return x.label && x.label->audio_related; };
        const double gain = bucket_accuracy(full, by_estimator) - bucket_accuracy(none, by_estimator);
        const double labeled_gain = bucket_accuracy(full, by_label) - bucket_accuracy(none, by_label);
        gains.push_back(gain);
        labeled_gains.push_back(labeled_gain);
        a.seconds += r.prepare_seconds;
        for (const auto& [v, t] : r.variant_seconds) a.seconds += t;
        details.push_back("seed " + std::to_string(r.seed) + ": CIDEr full " + fmt(full.overall.cider) + ", s " +
                          fmt(s.overall.cider) + ", none " + fmt(none.overall.cider) + (ok ? " (ordered)" : "") +
                          "; audio bucket accuracy full - none " + fmt(gain, 1) + " pts (r > " +
                          fmt(kEstimatorBucketThreshold, 1) + ", n=" + std::to_string(full.estimator_bucket.count) +
                          "), labeled audio " + fmt(labeled_gain, 1) + " pts");
    }
    a.mean_gain = mean(gains);
    a.mean_labeled_gain = mean(labeled_gains);
    return a;
}

}  // namespace

int main(int argc, char** argv) {
    bool strict = false;
    std::string report_path;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--strict") == 0) strict = true;
        else if (std::strcmp(argv[i], "--report") == 0 && i + 1 < argc) report_path = argv[++i];
    }

    unit_criterion("schedule exactness",
                   {"hyperbolic default schedule", "closed forms agree with direct evaluation",
                    "boundaries, range and monotonicity for every curve"},
                   1.0);
    unit_criterion("keyword gating suite",
                   {"published keyword list", "table of example questions",
                    "keyword gating is bitwise independent of video on related questions"},
                   1.0,
                   {"question (e) contains no listed keyword and is classified not related; its reference label is related"});
    unit_criterion("gradient checks",
                   {"toy model stays under 1k parameters", "dialogue loss", "SAL loss under calibrated fusion",
                    "SAL loss under keyword gating", "SAL loss with respect to the relatedness score",
                    "audio reconstruction loss", "upper bound loss with gradients through the bound",
                    "ranking loss away from the hinge kink"},
                   60.0, {"relative error tolerance 1e-4, float64, central differences"});
    unit_criterion("masking invariants", {"mask sampling counts", "masking property sweep"}, 10.0);
    unit_criterion("metric oracle parity",
                   {"hand-computed BLEU and ROUGE-L suite", "CIDEr-D matches a direct implementation",
                    "meteor-simple matches exhaustive alignment"},
                   10.0, {"BLEU/ROUGE-L within 1e-9, CIDEr-D and meteor-simple within 1e-6"});
    unit_criterion("beam-search oracle",
                   {"beam of one equals greedy on random scorers", "beam of one equals greedy on random toy models",
                    "beam of two matches exhaustive enumeration"},
                   10.0);

    const std::vector<std::string> variants = {"none", "s", "s+ar+rub"};
    std::vector<SeedRun> runs, large;
    for (std::uint64_t seed : kSeeds) runs.push_back(run_seed(seed, kTrendClips, variants));
    for (std::uint64_t seed : kSeeds) large.push_back(run_seed(seed, kAblationClips, variants));

    // Estimator behaviour.
    {
        bool pass = true;
        std::vector<std::string> details;
        for (const auto& r : runs) {
            const bool ok = r.holdout_auc >= kEstimatorAucMin && r.mean_shuffled < r.mean_intact && r.scores_open_unit;
            pass = pass && ok && r.prepare_seconds < 300.0;
            details.push_back("seed " + std::to_string(r.seed) + ": holdout AUC " + fmt(r.holdout_auc) +
                              ", shuffled mean " + fmt(r.mean_shuffled) + " < intact mean " + fmt(r.mean_intact) +
                              ", scores in (0,1) " + (r.scores_open_unit ? "yes" : "no") + ", " +
                              fmt(r.prepare_seconds, 1) + " s");
        }
        details.push_back("thresholds: AUC >= " + fmt(kEstimatorAucMin, 2) + ", budget 300 s per seed");
        verdict("estimator behavior", pass, details);
    }

    // RLE trend: validation L_SAL and per-batch reconstruction vs bound.
    {
        int lower = 0;
        std::size_t below = 0, batches = 0;
        double fig_seconds = 0.0;
        std::vector<std::string> details;
        for (const auto& r : runs) {
            const auto& with = r.variants.at("s+ar+rub").result;
            const auto& without = r.variants.at("s").result;
            const double a = with.epochs.back().validation_sal;
            const double b = without.epochs.back().validation_sal;
            lower += a <= b ? 1 : 0;
            const int e_max = static_cast<int>(with.epochs.size());
            std::size_t seed_below = 0, seed_batches = 0;
            for (const auto& s : with.steps) {
                if (s.branch != Branch::Rle || s.epoch <= e_max - kLastEpochs) continue;
                ++seed_batches;
                seed_below += s.recon < s.upper ? 1 : 0;
            }
            below += seed_below;
            batches += seed_batches;
            fig_seconds += r.variant_seconds.at("s+ar+rub") + r.variant_seconds.at("s");
            details.push_back("seed " + std::to_string(r.seed) + ": final validation L_SAL with RLE " + fmt(a) +
                              " vs without " + fmt(b) + "; L_ar < bound in " + std::to_string(seed_below) + "/" +
                              std::to_string(seed_batches) + " late batches");
        }
        const double share = batches ? static_cast<double>(below) / static_cast<double>(batches) : 0.0;
        const bool first = lower >= kSeedMajority;
        const bool second = share >= kRleBatchShareMin;
        details.push_back("(i) RLE lowers validation L_SAL in " + std::to_string(lower) + "/3 seeds (need >= " +
                          std::to_string(kSeedMajority) + ")");
        details.push_back("(ii) L_ar below its bound in " + fmt(100.0 * share, 1) + "% of last-" +
                          std::to_string(kLastEpochs) + "-epoch batches (need >= " + fmt(100.0 * kRleBatchShareMin, 0) +
                          "%)");
        details.push_back("runtime " + fmt(fig_seconds / 60.0, 1) + " min (budget 30 min)");
        verdict("RLE training trend", first && second && fig_seconds < 1800.0, details);
    }

    // Ablation ordering and audio-question gain.
    {
        std::vector<std::string> details = {std::to_string(kAblationClips) + "-clip corpus (verdict):"};
        const Ablation a = summarize_ablation(large, details);
        details.push_back("CIDEr ordering holds in " + std::to_string(a.ordered) + "/3 seeds (need >= " +
                          std::to_string(kSeedMajority) + ")");
        details.push_back("mean audio bucket gain " + fmt(a.mean_gain, 2) + " pts (need >= " + fmt(kAudioGainMin, 1) +
                          "); labeled-audio bucket mean " + fmt(a.mean_labeled_gain, 2) + " pts, reported only");
        details.push_back(std::to_string(kTrendClips) + "-clip corpus (reported only):");
        const Ablation small = summarize_ablation(runs, details);
        details.push_back("CIDEr ordering " + std::to_string(small.ordered) + "/3 seeds, mean audio bucket gain " +
                          fmt(small.mean_gain, 2) + " pts, labeled-audio " + fmt(small.mean_labeled_gain, 2) + " pts");
        const double seconds = a.seconds + small.seconds;
        details.push_back("runtime " + fmt(seconds / 60.0, 1) + " min for all runs (budget 45 min)");
        verdict("ablation ordering", a.ordered >= kSeedMajority && a.mean_gain >= kAudioGainMin && seconds < 2700.0,
                details);
    }

    unit_criterion("AVSD ingestion",
                   {"HEARFEAT container is bit-exact", "AVSD dialogues: rounds, history window and strictness",
                    "AVSD fixture trains and evaluates end to end"},
                   600.0,
                   {"AVSD leaderboard numbers need the AVSD data and pretrained backbones and are "
                    "not reproduced here; only ingestion of AVSD-format JSON and HEARFEAT features is checked"});

    emit(failures == 0 ? "ALL PASS" : std::to_string(failures) + " criteria FAILED");
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        out << report.str();
        if (!out) {
            std::cerr << "cannot write " << report_path << std::endl;
            return 1;
        }
    }
    return strict && failures > 0 ? 1 : 0;
}
