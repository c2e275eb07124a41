#include "hear/service.hpp"

#include "hear/errors.hpp"

#include <chrono>
#include <cstdio>

namespace hear {

nlohmann::json RoundRecord::to_json() const {
    return {{"round", round},
            {"question", question},
            {"answer", answer},
            {"r", decision.r},
            {"keyword_hit", decision.keyword_hit},
            {"gating", to_string(decision.mode)},
            {"decode_ms", decode_ms}};
}

nlohmann::json SessionSnapshot::to_json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rounds) rs.push_back(r.to_json());
    return {{"id", id}, {"clip_id", clip_id}, {"rounds", rs}, {"history_rounds", history.size()}};
}

DialogueService::DialogueService(const DlmModel& model, const Vocabulary& vocab, const EstimatorModel* estimator,
                                 KeywordSet keywords, std::vector<ServiceClip> clips, ServiceOptions options)
    : model_(model),
      vocab_(vocab),
      estimator_(estimator),
      keywords_(std::move(keywords)),
      clips_(std::move(clips)),
      options_(std::move(options)) {
    options_.decode.validate();
    const bool needs_score = options_.sal_mode == SalMode::Estimator || options_.sal_mode == SalMode::Both;
    if (needs_score && estimator_ == nullptr) {
        throw ConfigError("serve.sal_mode", "mode '" + to_string(options_.sal_mode) + "' needs an estimator");
    }
    if (!options_.journal.empty()) {
        replay_journal();
        journal_out_.open(options_.journal, std::ios::app);
        if (!journal_out_) throw std::runtime_error("cannot open session journal " + options_.journal.string());
    }
}

const ServiceClip& DialogueService::clip(const std::string& clip_id) const {
    for (const auto& c : clips_) {
        if (c.clip_id == clip_id) return c;
    }
    throw ServiceError(404, "clip_not_found", "unknown clip '" + clip_id + "'");
}

std::shared_ptr<DialogueService::Session> DialogueService::find(const std::string& session_id) const {
    std::lock_guard lock(sessions_mutex_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw ServiceError(404, "session_not_found", "unknown session '" + session_id + "'");
    return it->second;
}

std::string DialogueService::create_session(const std::string& clip_id) {
    clip(clip_id);
    auto s = std::make_shared<Session>();
    s->clip_id = clip_id;
    {
        std::lock_guard lock(sessions_mutex_);
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(next_id_++));
        s->id = buf;
        sessions_[s->id] = s;
    }
    journal({{"event", "create"}, {"id", s->id}, {"clip_id", clip_id}});
    return s->id;
}

DialogueInstance DialogueService::instance_for(const Session& s, const TokenIds& question) const {
    std::vector<QaPair> prior;
    for (const auto& r : s.rounds) prior.push_back({r.question_ids, r.answer_ids});
    DialogueInstance inst;
    inst.clip_id = s.clip_id;
    inst.caption = vocab_.encode(clip(s.clip_id).caption);
    inst.history = window_history<QaPair>(prior, options_.history_window);
    inst.question = question;
    inst.round = static_cast<int>(s.rounds.size()) + 1;
    return inst;
}

DialogueInstance DialogueService::next_instance(const std::string& session_id, const TokenIds& question) const {
    const auto s = find(session_id);
    std::lock_guard lock(s->mutex);
    return instance_for(*s, question);
}

RoundRecord DialogueService::ask(const std::string& session_id, const std::string& text) {
    if (text.size() > options_.max_question_chars) {
        throw ServiceError(413, "question_too_long",
                           "question exceeds " + std::to_string(options_.max_question_chars) + " characters");
    }
    const TokenIds question = vocab_.encode(text);
    if (question.empty()) throw ServiceError(400, "empty_question", "question has no tokens");
    if (question.size() > options_.max_question_tokens) {
        throw ServiceError(413, "question_too_long",
                           "question exceeds " + std::to_string(options_.max_question_tokens) + " tokens");
    }
    const auto s = find(session_id);
    std::lock_guard lock(s->mutex);

    const auto start = std::chrono::steady_clock::now();
    RoundRecord rec;
    rec.question_ids = question;
    rec.question = vocab_.decode(question);
    const ServiceClip& c = clip(s->clip_id);
    const bool hit = contains_audio_keyword(vocab_.tokens_of(question), keywords_);
    std::optional<double> score;
    if (estimator_ != nullptr) score = estimator_->score(question);
    rec.decision = decide_gating(options_.sal_mode, hit, score);
    const DialogueInstance inst = instance_for(*s, question);
    try {
        ag::NoGradGuard no_grad;
        rec.answer_ids = beam_decode(model_, sal_fuse(model_, c.track, rec.decision), inst, options_.decode);
    } catch (const std::length_error& e) {
        throw ServiceError(413, "context_too_long", e.what());
    }
    rec.answer = vocab_.decode(rec.answer_ids);
    rec.round = inst.round;
    rec.decode_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    s->rounds.push_back(rec);

    nlohmann::json event = rec.to_json();
    event["event"] = "round";
    event["id"] = s->id;
    event["question_ids"] = rec.question_ids;
    event["answer_ids"] = rec.answer_ids;
    journal(event);
    return rec;
}

SessionSnapshot DialogueService::session(const std::string& session_id) const {
    const auto s = find(session_id);
    std::lock_guard lock(s->mutex);
    SessionSnapshot snap{s->id, s->clip_id, s->rounds, {}};
    std::vector<QaPair> prior;
    for (const auto& r : s->rounds) prior.push_back({r.question_ids, r.answer_ids});
    snap.history = window_history<QaPair>(prior, options_.history_window);
    return snap;
}

nlohmann::json DialogueService::clips_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : clips_) {
        out.push_back({{"clip_id", c.clip_id}, {"caption", c.caption}, {"frames", c.track.frames()}});
    }
    return out;
}

void DialogueService::journal(const nlohmann::json& event) {
    if (!journal_out_.is_open()) return;
    std::lock_guard lock(journal_mutex_);
    journal_out_ << event.dump() << '\n';
    journal_out_.flush();
}

void DialogueService::replay_journal() {
    std::ifstream in(options_.journal);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json e;
        try {
            e = nlohmann::json::parse(line);
            const std::string id = e.at("id").get<std::string>();
            if (e.at("event") == "create") {
                auto s = std::make_shared<Session>();
                s->id = id;
                s->clip_id = e.at("clip_id").get<std::string>();
                sessions_[id] = s;
                if (id.size() > 1) next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(id.substr(1)) + 1);
            } else if (e.at("event") == "round") {
                auto& s = sessions_.at(id);
                RoundRecord r;
                r.round = e.at("round").get<int>();
                r.question = e.at("question").get<std::string>();
                r.answer = e.at("answer").get<std::string>();
                r.question_ids = e.at("question_ids").get<TokenIds>();
                r.answer_ids = e.at("answer_ids").get<TokenIds>();
                r.decision.r = e.at("r").get<double>();
                r.decision.keyword_hit = e.at("keyword_hit").get<bool>();
                const auto g = e.at("gating").get<std::string>();
                r.decision.mode = g == "keyword-gate"          ? GatingMode::KeywordGate
                                  : g == "estimator-calibrate" ? GatingMode::EstimatorCalibrate
                                                               : GatingMode::None;
                r.decode_ms = e.at("decode_ms").get<double>();
                s->rounds.push_back(std::move(r));
            }
        } catch (const std::exception& ex) {
            throw FormatError("session journal line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
}

}  // namespace hear
