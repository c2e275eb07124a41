#include "support.hpp"

#include "hear/checkpoint.hpp"
#include "hear/errors.hpp"
#include "hear/trainer.hpp"

#include <fstream>

using namespace hear;
using namespace hear::testing;

namespace {

SynthCorpusConfig small_corpus_config() {
    SynthCorpusConfig c;
    c.clips = 10;
    c.frames = 10;
    c.video_dim = 6;
    c.audio_dim = 3;
    c.templates = 4;
    c.seed = 5;
    return c;
}

const Corpus& small_corpus() {
    static const Corpus corpus = synth_corpus(small_corpus_config());
    return corpus;
}

TrainConfig small_train_config() {
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 4;
    c.lr_start = 3e-3;
    c.lr_end = 1e-5;
    c.sal_mode = SalMode::Keyword;
    c.seed = 3;
    c.model.d_model = 8;
    c.model.heads = 2;
    c.model.encoder_layers = 1;
    c.model.decoder_layers = 1;
    c.model.ff_hidden = 16;
    c.model.recon_hidden = 8;
    c.model.max_encoder_len = 96;
    c.model.max_answer_len = 12;
    return c;
}

struct Setup {
    const Corpus& corpus = small_corpus();
    ClipSplit split = split_clips(corpus.clips.size(), 0.6, 0.2);
    TrainConfig config;

    explicit Setup(TrainConfig c = small_train_config()) : config(resolve_model_dims(c, corpus)) {}

    std::unique_ptr<Trainer> make() const {
        return std::make_unique<Trainer>(config, corpus, split,
                                         relatedness_table(corpus, config.sal_mode, nullptr, KeywordSet::published()));
    }
};

std::vector<InstanceRef> first_batch(const Setup& s) {
    auto refs = instances_of(s.corpus, s.split.train);
    refs.resize(static_cast<std::size_t>(s.config.batch_size));
    return refs;
}

bool same_parameters(const DlmModel& a, const DlmModel& b) {
    const auto x = a.parameters().snapshot();
    const auto y = b.parameters().snapshot();
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] != y[i]) return false;
    }
    return true;
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("learning rate schedule") {
    const TrainConfig c;
    CHECK(lr_at(0, 1000, c) == 6.24e-5);
    CHECK(lr_at(1000, 1000, c) == 3.63e-10);
    CHECK(lr_at(500, 1000, c) == doctest::Approx(3.1200e-5).epsilon(1e-4));
    CHECK(lr_at(500, 1000, c) == doctest::Approx((6.24e-5 + 3.63e-10) / 2.0).epsilon(1e-14));
    for (std::int64_t s = 0; s < 1000; ++s) CHECK(lr_at(s + 1, 1000, c) <= lr_at(s, 1000, c));
    CHECK_THROWS(lr_at(1001, 1000, c));

    TrainConfig knots;
    knots.lr_breakpoints = {{0.5, 1e-5}};
    CHECK(lr_at(250, 1000, knots) == doctest::Approx((6.24e-5 + 1e-5) / 2.0).epsilon(1e-14));
    CHECK(lr_at(500, 1000, knots) == doctest::Approx(1e-5).epsilon(1e-14));
    CHECK(lr_at(750, 1000, knots) == doctest::Approx((1e-5 + 3.63e-10) / 2.0).epsilon(1e-14));
    knots.lr_breakpoints = {{0.5, 1e-3}};
    CHECK_THROWS_AS(knots.validate(), ConfigError);
}

TEST_CASE("iteration parity") {
    Setup s;
    auto t = s.make();
    const auto batch = first_batch(s);
    const std::vector<Branch> expected = {Branch::Sal, Branch::Rle, Branch::Sal, Branch::Rle};
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const StepRecord r = t->hear_step(batch);
        CHECK(r.iteration == static_cast<std::int64_t>(i + 1));
        CHECK(r.branch == expected[i]);
        if (r.branch == Branch::Rle) {
            CHECK(r.n == mask_distance_schedule(1, s.config.schedule()));
            CHECK(r.loss == doctest::Approx(r.recon + r.ranking).epsilon(1e-12));
        }
    }

    TrainConfig off = small_train_config();
    off.use_rle = false;
    Setup s2(off);
    auto t2 = s2.make();
    for (int i = 0; i < 4; ++i) CHECK(t2->hear_step(batch).branch == Branch::Sal);
    CHECK(t2->iterations_per_epoch() == t2->batches_per_epoch());
    CHECK(t->iterations_per_epoch() == 2 * t->batches_per_epoch());
    CHECK(t->total_steps() == t->iterations_per_epoch() * s.config.epochs);
}

TEST_CASE("RLE on and off diverge only from iteration 2") {
    Setup on;
    TrainConfig c = small_train_config();
    c.use_rle = false;
    Setup off(c);
    auto a = on.make();
    auto b = off.make();
    CHECK(same_parameters(a->model(), b->model()));
    a->run_epoch();
    b->run_epoch();
    REQUIRE(a->steps().size() >= 2);
    REQUIRE(b->steps().size() >= 2);
    CHECK(a->steps()[0].loss == b->steps()[0].loss);
    CHECK(a->steps()[1].branch == Branch::Rle);
    CHECK(b->steps()[1].branch == Branch::Sal);
    CHECK_FALSE(same_parameters(a->model(), b->model()));

    auto c1 = on.make();
    auto d1 = off.make();
    const auto batch = first_batch(on);
    c1->hear_step(batch);
    d1->hear_step(batch);
    CHECK(same_parameters(c1->model(), d1->model()));
    c1->hear_step(batch);
    d1->hear_step(batch);
    CHECK_FALSE(same_parameters(c1->model(), d1->model()));
}

TEST_CASE("training is deterministic for a fixed seed") {
    Setup s;
    auto a = s.make();
    auto b = s.make();
    const TrainResult ra = train(*a);
    const TrainResult rb = train(*b);
    REQUIRE(ra.steps.size() == rb.steps.size());
    for (std::size_t i = 0; i < ra.steps.size(); ++i) CHECK(ra.steps[i].loss == rb.steps[i].loss);
    CHECK(same_parameters(a->model(), b->model()));
    REQUIRE(ra.epochs.size() == 2);
    for (const auto& e : ra.epochs) {
        CHECK(std::isfinite(e.validation_sal));
        CHECK(std::isfinite(e.train_sal));
    }
    CHECK(ra.best_validation == std::min(ra.epochs[0].validation_sal, ra.epochs[1].validation_sal));

    TrainConfig other = small_train_config();
    other.seed = 4;
    Setup s2(other);
    auto c = s2.make();
    train(*c);
    CHECK_FALSE(same_parameters(a->model(), c->model()));
}

TEST_CASE("one-epoch smoke run writes its artifacts") {
    TrainConfig c = small_train_config();
    c.epochs = 1;
    Setup s(c);
    auto t = s.make();
    const auto dir = temp_dir("trainer_smoke");
    const TrainResult r = train(*t, dir);
    CHECK(r.epochs.size() == 1);
    CHECK(std::filesystem::exists(dir / "best.ckpt"));
    CHECK(std::filesystem::exists(dir / "last.ckpt"));
    CHECK(std::filesystem::exists(dir / "state.ckpt"));
    const auto schedule = lines_of(dir / "schedule.jsonl");
    REQUIRE(schedule.size() == 1);
    const auto row = nlohmann::json::parse(schedule[0]);
    CHECK(row.at("epoch") == 1);
    CHECK(row.at("n") == 1);
    const auto metrics = lines_of(dir / "metrics.jsonl");
    CHECK(metrics.size() == r.steps.size() + 1);

    const LoadedModel best = load_model(dir / "best.ckpt");
    t->model().parameters().restore(t->best_parameters());
    CHECK(same_parameters(best.model, t->model()));
    CHECK(best.extra.at("best_epoch") == 1);
}

TEST_CASE("resume reproduces an uninterrupted run") {
    Setup s;
    auto full = s.make();
    train(*full);

    const auto dir = temp_dir("trainer_resume");
    auto first = s.make();
    first->run_epoch();
    first->save_state(dir / "state.ckpt");

    auto resumed = s.make();
    resumed->load_state(dir / "state.ckpt");
    CHECK(resumed->state().iteration == first->state().iteration);
    CHECK(resumed->state().epoch == 1);
    // The next iteration's parity survives the round trip.
    CHECK(resumed->state().iteration % 2 == 0);
    train(*resumed);
    CHECK(same_parameters(resumed->model(), full->model()));
    REQUIRE(resumed->steps().size() == full->steps().size());
    for (std::size_t i = 0; i < full->steps().size(); ++i) {
        CHECK(resumed->steps()[i].loss == full->steps()[i].loss);
        CHECK(resumed->steps()[i].branch == full->steps()[i].branch);
    }
    CHECK(resumed->best_parameters() == full->best_parameters());
}

TEST_CASE("ablation variants") {
    const auto& names = ablation_variants();
    CHECK(names == std::vector<std::string>{"none", "k", "s", "s+ar", "s+rub", "s+ar+rub"});
    const TrainConfig base;
    const TrainConfig none = apply_variant(base, "none");
    CHECK(none.sal_mode == SalMode::None);
    CHECK_FALSE(none.use_rle);
    CHECK(apply_variant(base, "k").sal_mode == SalMode::Keyword);
    CHECK_FALSE(apply_variant(base, "s").use_rle);
    const TrainConfig ar = apply_variant(base, "s+ar");
    CHECK(ar.use_rle);
    CHECK(ar.use_reconstruction);
    CHECK_FALSE(ar.use_ranking);
    const TrainConfig rub = apply_variant(base, "s+rub");
    CHECK(rub.use_ranking);
    CHECK_FALSE(rub.use_reconstruction);
    const TrainConfig full = apply_variant(base, "s+ar+rub");
    CHECK(full.sal_mode == SalMode::Estimator);
    CHECK(full.use_reconstruction);
    CHECK(full.use_ranking);
    CHECK_THROWS_AS(apply_variant(base, "s+video"), ConfigError);
}

TEST_CASE("non-finite losses abort with a diagnostic") {
    Setup s;
    auto t = s.make();
    t->model().parameters().entries().front().second.mutable_value().setConstant(std::nan(""));
    try {
        t->hear_step(first_batch(s));
        FAIL("expected a training error");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("non-finite loss") != std::string::npos);
        CHECK(std::string(e.what()).find("clip_id") != std::string::npos);
    }
}

TEST_CASE("config JSON") {
    const TrainConfig c = small_train_config();
    CHECK(TrainConfig::from_json(c.to_json()).to_json() == c.to_json());
    try {
        TrainConfig::from_json({{"epochs", "many"}});
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "train.epochs");
    }
    try {
        TrainConfig::from_json({{"model", {{"d_model", 8}, {"heads", 3}}}});
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.field().rfind("train.model", 0) == 0);
    }
    CHECK_THROWS_AS(TrainConfig::from_json({{"lr", 0.1}}), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json({{"schedule", {{"curve", "cosine"}}}}), ConfigError);

    TrainConfig est = small_train_config();
    est.sal_mode = SalMode::Estimator;
    Setup s(est);
    CHECK_THROWS(relatedness_table(s.corpus, SalMode::Estimator, nullptr, KeywordSet::published()));
}

}
