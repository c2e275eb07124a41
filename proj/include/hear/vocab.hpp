#pragma once

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hear {

// Lowercases and splits on whitespace; every punctuation character becomes its
// own token. Apostrophes stay inside words ("can't").
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kBegin = 1;
    static constexpr int kEnd = 2;
    static constexpr int kUnknown = 3;
    static constexpr int kCls = 4;
    static constexpr int kMask = 5;
    static constexpr int kSep = 6;
    static constexpr int kSpecialCount = 7;

    Vocabulary();

    // Specials first, then tokens in order of first appearance.
    static Vocabulary build(std::span<const std::string> texts);

    int add(const std::string& token);
    int id(const std::string& token) const;
    bool contains(const std::string& token) const { return index_.contains(token); }
    const std::string& token(int id) const;
    std::size_t size() const { return tokens_.size(); }

    std::vector<int> encode(std::string_view text) const;
    // Pad/begin/end ids are dropped; unknown ids render as "<unk>".
    std::string decode(std::span<const int> ids) const;
    std::vector<std::string> tokens_of(std::span<const int> ids) const;

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace hear
