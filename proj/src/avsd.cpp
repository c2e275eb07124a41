#include "hear/corpus.hpp"
#include "hear/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace hear {

using nlohmann::json;

namespace {

std::string record_name(std::size_t index, const json& rec) {
    std::string name = "dialogue #" + std::to_string(index);
    if (rec.is_object() && rec.contains("image_id") && rec["image_id"].is_string()) {
        name += " (" + rec["image_id"].get<std::string>() + ")";
    }
    return name;
}

// Missing field: skip (tolerant) or throw (strict). Wrong type: always malformed.
bool require_string(const json& rec, const char* key, const std::string& where, const LoadOptions& options,
                    std::vector<std::string>* warnings) {
    if (!rec.contains(key)) {
        const std::string msg = where + ": missing field '" + key + "'";
        if (options.strict) throw FormatError(msg);
        if (warnings) warnings->push_back(msg + "; skipped");
        return false;
    }
    if (!rec[key].is_string()) throw FormatError(where + ": field '" + key + "' must be a string");
    return true;
}

}  // namespace

std::vector<TextDialogue> read_avsd_dialogues(const std::filesystem::path& path, const LoadOptions& options,
                                              std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw FormatError(path.string() + ": cannot open");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    const json* list = &doc;
    if (doc.is_object() && doc.contains("dialogs")) list = &doc["dialogs"];
    if (!list->is_array()) throw FormatError(path.string() + ": expected a list of dialogues");

    std::vector<TextDialogue> out;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const json& rec = (*list)[i];
        const std::string where = path.filename().string() + ": " + record_name(i, rec);
        if (!rec.is_object()) throw FormatError(where + ": record is not an object");
        if (!require_string(rec, "image_id", where, options, warnings)) continue;
        const char* caption_key = rec.contains("caption") ? "caption" : "summary";
        if (!require_string(rec, caption_key, where, options, warnings)) continue;
        if (!rec.contains("dialog")) {
            const std::string msg = where + ": missing field 'dialog'";
            if (options.strict) throw FormatError(msg);
            if (warnings) warnings->push_back(msg + "; skipped");
            continue;
        }
        if (!rec["dialog"].is_array()) throw FormatError(where + ": field 'dialog' must be a list");

        TextDialogue d;
        d.clip_id = rec["image_id"].get<std::string>();
        d.caption = rec[caption_key].get<std::string>();
        bool ok = true;
        for (std::size_t r = 0; r < rec["dialog"].size(); ++r) {
            const json& qa = rec["dialog"][r];
            const std::string round_where = where + " round " + std::to_string(r + 1);
            if (!qa.is_object()) throw FormatError(round_where + ": round is not an object");
            if (!require_string(qa, "question", round_where, options, warnings) ||
                !require_string(qa, "answer", round_where, options, warnings)) {
                ok = false;
                break;
            }
            d.rounds.push_back({qa["question"].get<std::string>(), qa["answer"].get<std::string>()});
        }
        if (ok) out.push_back(std::move(d));
    }
    return out;
}

void write_avsd_dialogues(const std::filesystem::path& path, const std::vector<TextDialogue>& dialogues) {
    json list = json::array();
    for (const auto& d : dialogues) {
        json dialog = json::array();
        for (const auto& r : d.rounds) dialog.push_back({{"question", r.question}, {"answer", r.answer}});
        list.push_back({{"image_id", d.clip_id}, {"caption", d.caption}, {"dialog", std::move(dialog)}});
    }
    std::ofstream out(path);
    if (!out) throw FormatError(path.string() + ": cannot open for writing");
    out << json{{"dialogs", std::move(list)}}.dump(1) << '\n';
}

std::vector<DialogueInstance> dialogue_instances(const TextDialogue& dialogue, const Vocabulary& vocab,
                                                 std::size_t window) {
    std::vector<DialogueInstance> out;
    std::vector<QaPair> prior;
    const TokenIds caption = vocab.encode(dialogue.caption);
    for (std::size_t r = 0; r < dialogue.rounds.size(); ++r) {
        DialogueInstance inst;
        inst.clip_id = dialogue.clip_id;
        inst.caption = caption;
        inst.history = window_history<QaPair>(prior, window);
        inst.question = vocab.encode(dialogue.rounds[r].question);
        inst.answer = vocab.encode(dialogue.rounds[r].answer);
        inst.round = static_cast<int>(r + 1);
        prior.push_back({inst.question, inst.answer});
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<DialogueInstance> load_avsd(const std::filesystem::path& path, const Vocabulary& vocab,
                                        const LoadOptions& options, std::vector<std::string>* warnings) {
    std::vector<DialogueInstance> out;
    for (const auto& d : read_avsd_dialogues(path, options, warnings)) {
        auto inst = dialogue_instances(d, vocab, options.history_window);
        out.insert(out.end(), std::make_move_iterator(inst.begin()), std::make_move_iterator(inst.end()));
    }
    return out;
}

}  // namespace hear
