#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace compass::nn {

// Word-level tokens: runs of letters/digits/apostrophes/hyphens (and any
// non-ASCII bytes) form words, other symbols stand alone. Special tokens
// are matched first and never split.
std::vector<std::string> word_tokenize(std::string_view text, const std::vector<std::string>& specials = {});

// Inverse of word_tokenize for ordinary prose: no space before closing
// punctuation, quote pairs hug their contents.
std::string detokenize(const std::vector<std::string>& tokens);

class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    Vocab();

    // Registers an atomic special token (e.g. a gap marker).
    int add_special(const std::string& token);
    int add(const std::string& token);

    int id(std::string_view token) const;
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& specials() const { return specials_; }
    bool is_control(int id) const { return id == kPad || id == kBos || id == kEos; }

    std::vector<int> encode(std::string_view text) const;
    std::string decode(const std::vector<int>& ids) const;

    // Every registered special must encode to a single id and decode back
    // to itself.
    bool specials_are_atomic() const;

    nlohmann::json to_json() const;
    static Vocab from_json(const nlohmann::json& j);

    // Adds every word of every text, in first-seen order.
    void build_from(const std::vector<std::string>& texts);

private:
    std::vector<std::string> tokens_;
    std::vector<std::string> specials_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace compass::nn
