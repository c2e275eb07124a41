#pragma once

// Interactive multi-round dialogue sessions over a frozen model.

#include "hear/decode.hpp"
#include "hear/estimator.hpp"
#include "hear/sal.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace hear {

// Request-level failure with a machine-readable code and HTTP status.
class ServiceError : public std::runtime_error {
  public:
    ServiceError(int status, std::string code, const std::string& message)
        : std::runtime_error(message), status_(status), code_(std::move(code)) {}
    int status() const { return status_; }
    const std::string& code() const { return code_; }

  private:
    int status_;
    std::string code_;
};

struct ServiceClip {
    std::string clip_id;
    std::string caption;
    FeatureTrack track;
};

struct ServiceOptions {
    SalMode sal_mode = SalMode::Estimator;
    DecodeConfig decode;
    std::size_t history_window = kDefaultHistoryWindow;
    std::size_t max_question_chars = 512;
    std::size_t max_question_tokens = 48;
    std::filesystem::path journal;  // empty: in-memory only
};

struct RoundRecord {
    int round = 0;
    std::string question;
    std::string answer;
    TokenIds question_ids;
    TokenIds answer_ids;
    RelatednessDecision decision;
    double decode_ms = 0.0;

    nlohmann::json to_json() const;
};

struct SessionSnapshot {
    std::string id;
    std::string clip_id;
    std::vector<RoundRecord> rounds;
    std::vector<QaPair> history;  // the window the next question will see

    nlohmann::json to_json() const;
};

class DialogueService {
  public:
    // The model, vocabulary and estimator must outlive the service. The
    // estimator may be null when the SAL mode needs no scores.
    DialogueService(const DlmModel& model, const Vocabulary& vocab, const EstimatorModel* estimator,
                    KeywordSet keywords, std::vector<ServiceClip> clips, ServiceOptions options);

    std::string create_session(const std::string& clip_id);
    // Rounds of one session run one at a time, in arrival order.
    RoundRecord ask(const std::string& session_id, const std::string& text);
    SessionSnapshot session(const std::string& session_id) const;
    nlohmann::json clips_json() const;

    // The instance the next question in this session would be decoded from.
    DialogueInstance next_instance(const std::string& session_id, const TokenIds& question) const;

    const ServiceOptions& options() const { return options_; }

  private:
    struct Session {
        std::string id;
        std::string clip_id;
        std::vector<RoundRecord> rounds;
        mutable std::mutex mutex;
    };

    std::shared_ptr<Session> find(const std::string& session_id) const;
    const ServiceClip& clip(const std::string& clip_id) const;
    DialogueInstance instance_for(const Session& s, const TokenIds& question) const;
    void journal(const nlohmann::json& event);
    void replay_journal();

    const DlmModel& model_;
    const Vocabulary& vocab_;
    const EstimatorModel* estimator_;
    KeywordSet keywords_;
    std::vector<ServiceClip> clips_;
    ServiceOptions options_;

    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 1;

    std::mutex journal_mutex_;
    std::ofstream journal_out_;
};

}  // namespace hear
