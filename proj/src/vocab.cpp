#include "hear/vocab.hpp"

#include "hear/errors.hpp"

#include <cctype>
#include <stdexcept>

namespace hear {

namespace {

constexpr const char* kSpecialTokens[Vocabulary::kSpecialCount] = {"<pad>",  "<bos>",  "<eos>", "<unk>",
                                                                   "<cls>",  "<mask>", "<sep>"};

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c == '\'' || c >= 0x80; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) out.push_back(std::move(current));
        current.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else if (is_word_char(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
            out.emplace_back(1, ch);
        }
    }
    flush();
    return out;
}

Vocabulary::Vocabulary() {
    for (const char* t : kSpecialTokens) add(t);
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
    Vocabulary v;
    for (const auto& text : texts) {
        for (const auto& tok : tokenize(text)) v.add(tok);
    }
    return v;
}

int Vocabulary::add(const std::string& token) {
    if (auto it = index_.find(token); it != index_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
}

int Vocabulary::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) throw std::out_of_range("token id out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& tok : tokenize(text)) ids.push_back(id(tok));
    return ids;
}

std::vector<std::string> Vocabulary::tokens_of(std::span<const int> ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int i : ids) {
        if (i == kPad || i == kBegin || i == kEnd) continue;
        out.push_back(token(i));
    }
    return out;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
    std::string out;
    for (const auto& tok : tokens_of(ids)) {
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

nlohmann::json Vocabulary::to_json() const { return tokens_; }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw FormatError("vocabulary must be a JSON array of tokens");
    auto tokens = j.get<std::vector<std::string>>();
    if (tokens.size() < kSpecialCount) throw FormatError("vocabulary is missing special tokens");
    for (int i = 0; i < kSpecialCount; ++i) {
        if (tokens[static_cast<std::size_t>(i)] != kSpecialTokens[i]) {
            throw FormatError("vocabulary special token mismatch at id " + std::to_string(i));
        }
    }
    Vocabulary v;
    for (std::size_t i = kSpecialCount; i < tokens.size(); ++i) {
        if (v.contains(tokens[i])) throw FormatError("duplicate vocabulary token: " + tokens[i]);
        v.add(tokens[i]);
    }
    return v;
}

}  // namespace hear
