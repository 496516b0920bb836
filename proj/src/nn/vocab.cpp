#include "compass/nn/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace compass::nn {

namespace {

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) || c == '\'' || c == '-' || c >= 0x80;
}

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool attaches_left(const std::string& tok) {
    static const std::vector<std::string> kLeft = {".", ",", "!", "?", ";", ":", ")", "]", "%"};
    return std::find(kLeft.begin(), kLeft.end(), tok) != kLeft.end();
}

}  // namespace

std::vector<std::string> word_tokenize(std::string_view text, const std::vector<std::string>& specials) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_space(c)) {
            ++i;
            continue;
        }
        const std::string* matched = nullptr;
        for (const auto& s : specials) {
            if (!s.empty() && text.substr(i, s.size()) == s && (!matched || s.size() > matched->size())) matched = &s;
        }
        if (matched) {
            out.push_back(*matched);
            i += matched->size();
            continue;
        }
        if (is_word_byte(c)) {
            std::size_t j = i;
            // A '.' or ',' between two digits stays inside the word.
            auto continues = [&](std::size_t k) {
                const auto ch = static_cast<unsigned char>(text[k]);
                if (is_word_byte(ch)) return true;
                return (ch == '.' || ch == ',') && k > i && k + 1 < text.size() &&
                       std::isdigit(static_cast<unsigned char>(text[k - 1])) &&
                       std::isdigit(static_cast<unsigned char>(text[k + 1]));
            };
            while (j < text.size() && continues(j)) {
                bool special_here = false;
                for (const auto& s : specials) {
                    if (!s.empty() && text.substr(j, s.size()) == s) special_here = true;
                }
                if (special_here) break;
                ++j;
            }
            out.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            out.emplace_back(1, static_cast<char>(c));
            ++i;
        }
    }
    return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
    std::string out;
    bool quote_open = false;
    bool no_space_next = false;
    for (const auto& tok : tokens) {
        bool space = !out.empty() && !no_space_next;
        no_space_next = false;
        if (attaches_left(tok)) space = false;
        if (tok == "\"") {
            if (quote_open) {
                space = false;
            } else {
                no_space_next = true;
            }
            quote_open = !quote_open;
        } else if (tok == "(" || tok == "[") {
            no_space_next = true;
        }
        if (space) out.push_back(' ');
        out += tok;
    }
    return out;
}

Vocab::Vocab() {
    for (const char* s : {"<pad>", "<s>", "</s>", "<unk>"}) add(s);
}

int Vocab::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
}

int Vocab::add_special(const std::string& token) {
    if (token.empty()) throw std::invalid_argument("special token must be non-empty");
    if (std::find(specials_.begin(), specials_.end(), token) == specials_.end()) specials_.push_back(token);
    return add(token);
}

int Vocab::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& tok : word_tokenize(text, specials_)) ids.push_back(id(tok));
    return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::vector<std::string> toks;
    for (int i : ids) {
        if (is_control(i)) continue;
        toks.push_back(token(i));
    }
    return detokenize(toks);
}

bool Vocab::specials_are_atomic() const {
    for (const auto& s : specials_) {
        const auto ids = encode(s);
        if (ids.size() != 1 || ids[0] == kUnk || decode(ids) != s) return false;
    }
    return true;
}

nlohmann::json Vocab::to_json() const {
    return {{"tokens", tokens_}, {"specials", specials_}};
}

Vocab Vocab::from_json(const nlohmann::json& j) {
    Vocab v;
    v.tokens_.clear();
    v.index_.clear();
    for (const auto& t : j.at("tokens")) v.add(t.get<std::string>());
    v.specials_ = j.at("specials").get<std::vector<std::string>>();
    return v;
}

void Vocab::build_from(const std::vector<std::string>& texts) {
    for (const auto& t : texts) {
        for (const auto& tok : word_tokenize(t, specials_)) add(tok);
    }
}

}  // namespace compass::nn
