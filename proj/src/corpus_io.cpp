#include "hear/corpus.hpp"
#include "hear/errors.hpp"
#include "hear/hearfeat.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <map>

namespace hear {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path video_feature_path(const fs::path& dir, const std::string& clip_id) {
    return dir / "features" / (clip_id + ".video.hearfeat");
}

fs::path audio_feature_path(const fs::path& dir, const std::string& clip_id) {
    return dir / "features" / (clip_id + ".audio.hearfeat");
}

void save_corpus(const Corpus& corpus, const fs::path& dir) {
    fs::create_directories(dir / "features");
    std::vector<TextDialogue> dialogues;
    dialogues.reserve(corpus.clips.size());
    std::ofstream labels(dir / "labels.jsonl");
    for (const auto& clip : corpus.clips) {
        dialogues.push_back(clip.dialogue);
        write_hearfeat(video_feature_path(dir, clip.clip_id), clip.track.video);
        write_hearfeat(audio_feature_path(dir, clip.clip_id), clip.track.audio);
        for (std::size_t i = 0; i < clip.labels.size(); ++i) {
            const auto& l = clip.labels[i];
            labels << json{{"clip_id", clip.clip_id},
                           {"round", i + 1},
                           {"question", clip.dialogue.rounds[i].question},
                           {"kind", l.kind},
                           {"audio_related", l.audio_related},
                           {"audio_only", l.audio_only}}
                          .dump()
                   << '\n';
        }
    }
    write_avsd_dialogues(dir / "dialogues.json", dialogues);
    std::ofstream vocab(dir / "vocab.json");
    vocab << corpus.vocab.to_json().dump() << '\n';
}

Corpus load_corpus(const fs::path& dir, const LoadOptions& options, const Vocabulary* vocab,
                   std::vector<std::string>* warnings) {
    Corpus corpus;
    const auto dialogues = read_avsd_dialogues(dir / "dialogues.json", options, warnings);
    if (vocab != nullptr) {
        corpus.vocab = *vocab;
    } else if (fs::exists(dir / "vocab.json")) {
        std::ifstream in(dir / "vocab.json");
        try {
            corpus.vocab = Vocabulary::from_json(json::parse(in));
        } catch (const json::parse_error& e) {
            throw FormatError((dir / "vocab.json").string() + ": " + e.what());
        }
    } else {
        std::vector<std::string> texts;
        for (const auto& d : dialogues) {
            texts.push_back(d.caption);
            for (const auto& r : d.rounds) {
                texts.push_back(r.question);
                texts.push_back(r.answer);
            }
        }
        corpus.vocab = Vocabulary::build(texts);
    }

    std::map<std::pair<std::string, int>, QuestionLabel> labels;
    if (fs::exists(dir / "labels.jsonl")) {
        std::ifstream in(dir / "labels.jsonl");
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                const json j = json::parse(line);
                QuestionLabel l;
                l.kind = j.at("kind").get<std::string>();
                l.audio_related = j.at("audio_related").get<bool>();
                l.audio_only = j.at("audio_only").get<bool>();
                labels[{j.at("clip_id").get<std::string>(), j.at("round").get<int>()}] = l;
            } catch (const json::exception& e) {
                throw FormatError("labels.jsonl line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    }

    for (const auto& d : dialogues) {
        Clip clip;
        clip.clip_id = d.clip_id;
        clip.dialogue = d;
        clip.track = load_feature_track(video_feature_path(dir, d.clip_id), audio_feature_path(dir, d.clip_id));
        clip.instances = dialogue_instances(d, corpus.vocab, options.history_window);
        bool complete = !labels.empty();
        std::vector<QuestionLabel> clip_labels;
        for (const auto& inst : clip.instances) {
            auto it = labels.find({d.clip_id, inst.round});
            if (it == labels.end()) {
                complete = false;
                break;
            }
            clip_labels.push_back(it->second);
        }
        if (complete) clip.labels = std::move(clip_labels);
        corpus.clips.push_back(std::move(clip));
    }
    return corpus;
}

}  // namespace hear
