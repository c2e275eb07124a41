#include "support.hpp"

#include "hear/corpus.hpp"
#include "hear/server.hpp"
#include "hear/service.hpp"

#include <httplib.h>

#include <thread>

using namespace hear;
using namespace hear::testing;

namespace {

struct World {
    Corpus corpus;
    DlmModel model;
    EstimatorModel estimator;
    std::vector<ServiceClip> clips;

    static DlmConfig model_config(const Corpus& c) {
        DlmConfig m;
        m.vocab_size = static_cast<int>(c.vocab.size());
        m.video_dim = c.clips[0].track.video_dim();
        m.audio_dim = c.clips[0].track.audio_dim();
        m.d_model = 8;
        m.heads = 2;
        m.encoder_layers = 1;
        m.decoder_layers = 1;
        m.ff_hidden = 16;
        m.recon_hidden = 8;
        m.max_encoder_len = 160;
        m.max_answer_len = 24;
        return m;
    }

    static EstimatorConfig estimator_config() {
        EstimatorConfig e;
        e.d_model = 8;
        e.heads = 2;
        e.ff_hidden = 16;
        return e;
    }

    static Corpus make_corpus() {
        SynthCorpusConfig c;
        c.clips = 3;
        c.frames = 8;
        c.video_dim = 4;
        c.audio_dim = 3;
        return synth_corpus(c);
    }

    World()
        : corpus(make_corpus()),
          model(model_config(corpus), 9),
          estimator(estimator_config(), static_cast<int>(corpus.vocab.size()), 2) {
        for (const auto& c : corpus.clips) clips.push_back({c.clip_id, c.dialogue.caption, c.track});
    }

    DialogueService service(ServiceOptions options = {}) const {
        options.decode.beam = 2;
        options.decode.max_len = 8;
        return DialogueService(model, corpus.vocab, &estimator, KeywordSet::published(), clips, options);
    }
};

const World& world() {
    static const World w;
    return w;
}

template <typename Fn>
void expect_service_error(Fn fn, int status, const std::string& code) {
    try {
        fn();
        FAIL("expected a service error");
    } catch (const ServiceError& e) {
        CHECK(e.status() == status);
        CHECK(e.code() == code);
    }
}

const std::vector<std::string> kQuestions = {"what is the man doing ?", "can you hear any sounds ?",
                                             "what color is his shirt ?", "is there any music ?",
                                             "where is he ?"};

}  // namespace

TEST_SUITE("service") {

TEST_CASE("audio question reports its gating") {
    auto svc = world().service();
    const std::string id = svc.create_session(world().clips[0].clip_id);
    const RoundRecord r = svc.ask(id, "can you hear any sounds ?");
    CHECK(r.round == 1);
    CHECK(r.decision.keyword_hit);
    CHECK(r.decision.mode == GatingMode::EstimatorCalibrate);
    CHECK(r.decision.r > 0.0);
    CHECK(r.decision.r < 1.0);
    const auto j = r.to_json();
    for (const char* key : {"round", "question", "answer", "r", "keyword_hit", "gating", "decode_ms"}) {
        CHECK(j.contains(key));
    }
}

TEST_CASE("history keeps the last three rounds") {
    auto svc = world().service();
    const std::string id = svc.create_session(world().clips[1].clip_id);
    std::vector<RoundRecord> rounds;
    for (int i = 0; i < 4; ++i) rounds.push_back(svc.ask(id, kQuestions[static_cast<std::size_t>(i)]));
    for (int i = 0; i < 4; ++i) CHECK(rounds[static_cast<std::size_t>(i)].round == i + 1);

    const SessionSnapshot snap = svc.session(id);
    REQUIRE(snap.rounds.size() == 4);
    REQUIRE(snap.history.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(snap.history[k].question == rounds[k + 1].question_ids);
        CHECK(snap.history[k].answer == rounds[k + 1].answer_ids);
    }

    // The shared builder produces the same window as corpus instances.
    std::vector<QaPair> prior;
    for (const auto& r : rounds) prior.push_back({r.question_ids, r.answer_ids});
    const DialogueInstance next = svc.next_instance(id, world().corpus.vocab.encode(kQuestions[4]));
    CHECK(next.round == 5);
    REQUIRE(next.history.size() == 3);
    const auto expected = window_history<QaPair>(prior, kDefaultHistoryWindow);
    for (std::size_t k = 0; k < 3; ++k) CHECK(next.history[k].question == expected[k].question);
}

TEST_CASE("answers match offline decoding") {
    auto svc = world().service();
    const World& w = world();
    const std::string id = svc.create_session(w.clips[2].clip_id);
    for (const auto& q : kQuestions) {
        const TokenIds ids = w.corpus.vocab.encode(q);
        const DialogueInstance inst = svc.next_instance(id, ids);
        const bool hit = contains_audio_keyword(w.corpus.vocab.tokens_of(ids), KeywordSet::published());
        const RelatednessDecision d = decide_gating(SalMode::Estimator, hit, w.estimator.score(ids));
        const TokenIds offline = beam_decode(w.model, sal_fuse(w.model, w.clips[2].track, d), inst, svc.options().decode);
        const RoundRecord r = svc.ask(id, q);
        CHECK(r.answer_ids == offline);
        CHECK(r.answer == w.corpus.vocab.decode(offline));
        CHECK(r.decision.r == d.r);
    }
}

TEST_CASE("sessions are isolated") {
    auto svc = world().service();
    const std::string clip = world().clips[0].clip_id;
    const std::string a = svc.create_session(clip);
    const std::string b = svc.create_session(clip);
    CHECK(a != b);
    svc.ask(a, kQuestions[0]);
    svc.ask(a, kQuestions[1]);
    svc.ask(b, kQuestions[2]);
    CHECK(svc.session(a).rounds.size() == 2);
    CHECK(svc.session(b).rounds.size() == 1);
    CHECK(svc.session(b).rounds[0].round == 1);
    CHECK(svc.session(b).history.size() == 1);
}

TEST_CASE("errors") {
    ServiceOptions o;
    o.max_question_chars = 40;
    o.max_question_tokens = 6;
    auto svc = world().service(o);
    const std::string id = svc.create_session(world().clips[0].clip_id);
    expect_service_error([&] { svc.create_session("no-such-clip"); }, 404, "clip_not_found");
    expect_service_error([&] { svc.ask("s999999", "hello ?"); }, 404, "session_not_found");
    expect_service_error([&] { svc.session("s999999"); }, 404, "session_not_found");
    expect_service_error([&] { svc.ask(id, std::string(41, 'a')); }, 413, "question_too_long");
    expect_service_error([&] { svc.ask(id, "is there any music in the room ?"); }, 413, "question_too_long");
    expect_service_error([&] { svc.ask(id, "   "); }, 400, "empty_question");
    CHECK(svc.session(id).rounds.empty());

    ServiceOptions needs;
    needs.sal_mode = SalMode::Estimator;
    CHECK_THROWS(DialogueService(world().model, world().corpus.vocab, nullptr, KeywordSet::published(), {}, needs));
}

TEST_CASE("concurrent questions to one session are serialized") {
    auto svc = world().service();
    const std::string id = svc.create_session(world().clips[0].clip_id);
    std::vector<std::thread> threads;
    for (int i = 0; i < 4; ++i) {
        threads.emplace_back([&svc, &id, i] { svc.ask(id, kQuestions[static_cast<std::size_t>(i)]); });
    }
    for (auto& t : threads) t.join();
    const auto snap = svc.session(id);
    REQUIRE(snap.rounds.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(snap.rounds[i].round == static_cast<int>(i) + 1);
}

TEST_CASE("journal replay restores sessions") {
    const auto dir = temp_dir("journal");
    ServiceOptions o;
    o.journal = dir / "sessions.jsonl";
    std::string id;
    std::vector<RoundRecord> before;
    {
        auto svc = world().service(o);
        id = svc.create_session(world().clips[1].clip_id);
        before.push_back(svc.ask(id, kQuestions[0]));
        before.push_back(svc.ask(id, kQuestions[1]));
    }
    auto svc = world().service(o);
    const auto snap = svc.session(id);
    REQUIRE(snap.rounds.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(snap.rounds[i].answer_ids == before[i].answer_ids);
        CHECK(snap.rounds[i].decision.r == before[i].decision.r);
        CHECK(snap.rounds[i].decision.mode == before[i].decision.mode);
    }
    CHECK(svc.ask(id, kQuestions[2]).round == 3);
    CHECK(svc.create_session(world().clips[0].clip_id) != id);
}

}

TEST_SUITE("server") {

TEST_CASE("HTTP endpoints") {
    auto svc = world().service();
    HttpServer server(svc);
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread loop([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    const std::string clip = world().clips[0].clip_id;

    auto clips = client.Get("/clips");
    REQUIRE(clips);
    CHECK(clips->status == 200);
    const auto clip_list = nlohmann::json::parse(clips->body);
    REQUIRE(clip_list.size() == 3);
    CHECK(clip_list[0].at("clip_id") == clip);
    CHECK(clip_list[0].at("frames") == 8);

    auto created = client.Post("/sessions", nlohmann::json{{"clip_id", clip}}.dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string id = nlohmann::json::parse(created->body).at("id");

    nlohmann::json last;
    for (int i = 0; i < 4; ++i) {
        auto asked = client.Post("/sessions/" + id + "/questions",
                                 nlohmann::json{{"text", kQuestions[static_cast<std::size_t>(i)]}}.dump(),
                                 "application/json");
        REQUIRE(asked);
        CHECK(asked->status == 200);
        last = nlohmann::json::parse(asked->body);
        CHECK(last.at("round") == i + 1);
    }
    CHECK(last.at("r").get<double>() > 0.0);
    CHECK(last.at("keyword_hit") == true);
    CHECK(last.at("gating") == "estimator-calibrate");

    auto session = client.Get("/sessions/" + id);
    REQUIRE(session);
    CHECK(session->status == 200);
    const auto s = nlohmann::json::parse(session->body);
    CHECK(s.at("rounds").size() == 4);
    CHECK(s.at("history_rounds") == 3);
    CHECK(s.at("rounds")[3].at("answer") == last.at("answer"));

    auto error_code = [](const httplib::Result& r) { return nlohmann::json::parse(r->body).at("error").at("code"); };

    auto missing = client.Get("/sessions/s424242");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(error_code(missing) == "session_not_found");

    auto bad_clip = client.Post("/sessions", nlohmann::json{{"clip_id", "nope"}}.dump(), "application/json");
    REQUIRE(bad_clip);
    CHECK(bad_clip->status == 404);

    auto bad_json = client.Post("/sessions", "{not json", "application/json");
    REQUIRE(bad_json);
    CHECK(bad_json->status == 400);
    CHECK(error_code(bad_json) == "bad_request");

    auto no_field = client.Post("/sessions/" + id + "/questions", "{}", "application/json");
    REQUIRE(no_field);
    CHECK(no_field->status == 400);
    CHECK(error_code(no_field) == "missing_field");

    auto too_long = client.Post("/sessions/" + id + "/questions",
                                nlohmann::json{{"text", std::string(600, 'a')}}.dump(), "application/json");
    REQUIRE(too_long);
    CHECK(too_long->status == 413);

    auto unknown = client.Get("/nowhere");
    REQUIRE(unknown);
    CHECK(unknown->status == 404);
    CHECK(nlohmann::json::parse(unknown->body).contains("error"));

    server.stop();
    loop.join();
}

}
