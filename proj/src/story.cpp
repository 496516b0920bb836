#include "compass/story.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "compass/errors.hpp"
#include "compass/rng.hpp"

namespace compass {

namespace {

using ordered_json = nlohmann::ordered_json;

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_terminal(unsigned char c) { return c == '.' || c == '!' || c == '?'; }

// Length in bytes of a closing quote/bracket at text[pos], 0 if none.
std::size_t closer_length(std::string_view text, std::size_t pos) {
    const auto c = static_cast<unsigned char>(text[pos]);
    if (c == '"' || c == '\'' || c == ')' || c == ']') return 1;
    auto starts = [&](std::string_view seq) { return text.substr(pos, seq.size()) == seq; };
    if (starts("\xE2\x80\x9D") || starts("\xE2\x80\x99")) return 3;  // ” ’
    if (starts("\xC2\xBB")) return 2;                                // »
    if (starts("\xE3\x80\x8D") || starts("\xE3\x80\x8F")) return 3;  // 」 』
    return 0;
}

// Length in bytes of a full-width terminal at text[pos], 0 if none.
std::size_t cjk_terminal_length(std::string_view text, std::size_t pos) {
    auto starts = [&](std::string_view seq) { return text.substr(pos, seq.size()) == seq; };
    if (starts("\xE3\x80\x82") || starts("\xEF\xBC\x81") || starts("\xEF\xBC\x9F")) return 3;  // 。！？
    return 0;
}

// Titles and similar: a following sentence break is never assumed.
const std::unordered_set<std::string> kAlwaysAbbrev = {
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "gen", "gov", "sen",
    "rep", "capt", "col", "lt", "sgt", "vs", "approx", "messrs", "rev", "hon",
};

// Ambiguous: a break is taken only when the next word is capitalized.
const std::unordered_set<std::string> kCapitalAbbrev = {
    "etc", "e.g", "i.e", "inc", "ltd", "co", "corp", "a.m", "p.m", "u.s", "u.k",
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
};

// Numbered references such as "No. 5".
const std::unordered_set<std::string> kNumberAbbrev = {"no", "vol", "fig", "pp", "p"};

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Decides whether "word." followed by next_char ends a sentence.
bool period_is_boundary(std::string_view word, unsigned char next_char) {
    // Strip leading opening quotes/brackets.
    while (!word.empty() && (word.front() == '"' || word.front() == '\'' || word.front() == '(')) {
        word.remove_prefix(1);
    }
    if (word.empty()) return true;
    const std::string lw = lower_ascii(word);
    if (kAlwaysAbbrev.count(lw)) return false;
    if (kNumberAbbrev.count(lw)) return !std::isdigit(next_char);
    const bool next_upper = std::isupper(next_char) || next_char == '"' || next_char == '\'';
    if (kCapitalAbbrev.count(lw)) return next_upper;
    // Single uppercase initial ("J. K. Rowling").
    if (word.size() == 1 && std::isupper(static_cast<unsigned char>(word[0]))) return false;
    // Dotted acronyms ("U.S.A") other than those listed above.
    if (word.find('.') != std::string_view::npos && word.size() <= 6) {
        bool all_alpha_dots = std::all_of(word.begin(), word.end(), [](char c) {
            return c == '.' || std::isalpha(static_cast<unsigned char>(c));
        });
        if (all_alpha_dots) return next_upper;
    }
    return true;
}

std::string strip(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

ordered_json story_json(const Story& story) {
    ordered_json j;
    j["story_id"] = story.story_id;
    j["sentences"] = story.sentences;
    j["language"] = story.language;
    return j;
}

// Minimal RFC 4180 record reader; returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            ++line_no;
            fields.push_back(std::move(field));
            return true;
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

}  // namespace

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "dev") return Split::dev;
    if (name == "test") return Split::test;
    throw Error(ErrorCode::InvalidArgument, "unknown split '" + std::string(name) + "'");
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view raw) {
    const std::string text = normalize_whitespace(raw);
    std::vector<std::string> sentences;
    std::size_t start = 0;
    std::size_t i = 0;
    auto emit = [&](std::size_t end) {
        std::string s = strip(std::string_view(text).substr(start, end - start));
        if (!s.empty()) sentences.push_back(std::move(s));
        start = end;
    };
    while (i < text.size()) {
        if (std::size_t cjk = cjk_terminal_length(text, i)) {
            i += cjk;
            while (i < text.size()) {
                if (std::size_t n = cjk_terminal_length(text, i)) { i += n; continue; }
                if (std::size_t n = closer_length(text, i)) { i += n; continue; }
                break;
            }
            emit(i);
            continue;
        }
        const auto c = static_cast<unsigned char>(text[i]);
        if (!is_terminal(c)) {
            ++i;
            continue;
        }
        const std::size_t run_begin = i;
        while (i < text.size() && is_terminal(static_cast<unsigned char>(text[i]))) ++i;
        const bool single_period = (i - run_begin == 1 && text[run_begin] == '.');
        bool closed = false;
        while (i < text.size()) {
            std::size_t n = closer_length(text, i);
            if (n == 0) break;
            i += n;
            closed = true;
        }
        if (i >= text.size()) {
            emit(i);
            break;
        }
        if (text[i] != ' ') continue;  // "3.5", "U.S.A", "word.word"
        const auto next = static_cast<unsigned char>(i + 1 < text.size() ? text[i + 1] : ' ');
        if (single_period && !closed) {
            std::size_t word_begin = run_begin;
            while (word_begin > start && text[word_begin - 1] != ' ') --word_begin;
            const std::string_view word = std::string_view(text).substr(word_begin, run_begin - word_begin);
            if (!period_is_boundary(word, next)) continue;
        }
        emit(i);
    }
    if (start < text.size()) emit(text.size());
    return sentences;
}

Story segment_text(std::string_view raw_text, std::string_view language) {
    Story story;
    story.language = std::string(language);
    story.sentences = split_sentences(raw_text);
    if (story.sentences.empty()) {
        throw Error(ErrorCode::EmptyInput, "text is empty after whitespace stripping");
    }
    return story;
}

std::string render_story(const Story& story) {
    std::string out;
    for (const auto& s : story.sentences) {
        if (!out.empty()) out.push_back(' ');
        out += s;
    }
    return out;
}

void validate_story(const Story& story) {
    for (std::size_t i = 0; i < story.sentences.size(); ++i) {
        const auto& s = story.sentences[i];
        if (s.empty() || strip(s) != s) {
            throw Error(ErrorCode::InvalidArgument,
                        "story '" + story.story_id + "' sentence " + std::to_string(i) +
                            " is empty or not stripped");
        }
    }
}

Corpus parse_corpus_jsonl(std::istream& in, Split split, std::string source) {
    Corpus corpus{split, std::move(source), {}};
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line_no, e.what());
        }
        if (!j.is_object()) throw ParseError(line_no, "record is not a JSON object");
        if (!j.contains("story_id") || !j["story_id"].is_string()) {
            throw ParseError(line_no, "missing string field 'story_id'");
        }
        if (!j.contains("sentences") || !j["sentences"].is_array()) {
            throw ParseError(line_no, "missing array field 'sentences'");
        }
        Story story;
        story.story_id = j["story_id"].get<std::string>();
        if (j.contains("language")) {
            if (!j["language"].is_string()) throw ParseError(line_no, "'language' must be a string");
            story.language = j["language"].get<std::string>();
        }
        for (const auto& s : j["sentences"]) {
            if (!s.is_string()) throw ParseError(line_no, "sentence is not a string");
            std::string norm = normalize_whitespace(s.get<std::string>());
            if (norm.empty()) throw ParseError(line_no, "empty sentence in story '" + story.story_id + "'");
            story.sentences.push_back(std::move(norm));
        }
        if (story.sentences.empty()) throw ParseError(line_no, "story '" + story.story_id + "' has no sentences");
        if (!seen.insert(story.story_id).second) {
            throw Error(ErrorCode::DuplicateId,
                        "line " + std::to_string(line_no) + ": story_id '" + story.story_id + "'");
        }
        corpus.stories.push_back(std::move(story));
    }
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, Split split, std::string source) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    if (source.empty()) source = path.stem().string();
    return parse_corpus_jsonl(in, split, std::move(source));
}

std::string story_to_json_line(const Story& story) { return story_json(story).dump(); }

std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& story : corpus.stories) {
        out += story_to_json_line(story);
        out.push_back('\n');
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << corpus_to_jsonl(corpus);
}

Corpus parse_rocstories_csv(std::istream& in, Split split, std::string source) {
    Corpus corpus{split, std::move(source), {}};
    std::unordered_set<std::string> seen;
    std::vector<std::string> fields;
    std::size_t line_no = 1;
    std::size_t record_line = 1;
    bool header = true;
    while (true) {
        record_line = line_no;
        if (!read_csv_record(in, fields, line_no)) break;
        if (fields.size() == 1 && strip(fields[0]).empty()) continue;
        if (header) {
            header = false;
            if (!fields.empty() && lower_ascii(strip(fields[0])) == "storyid") continue;
        }
        if (fields.size() < 3) throw ParseError(record_line, "expected storyid, storytitle and sentence columns");
        Story story;
        story.story_id = strip(fields[0]);
        for (std::size_t k = 2; k < fields.size(); ++k) {
            std::string norm = normalize_whitespace(fields[k]);
            if (norm.empty()) throw ParseError(record_line, "empty sentence in story '" + story.story_id + "'");
            story.sentences.push_back(std::move(norm));
        }
        if (!seen.insert(story.story_id).second) {
            throw Error(ErrorCode::DuplicateId,
                        "line " + std::to_string(record_line) + ": story_id '" + story.story_id + "'");
        }
        corpus.stories.push_back(std::move(story));
    }
    return corpus;
}

SplitCorpora split_8_1_1(std::vector<Story> stories, std::uint64_t seed, std::string source) {
    Rng rng = Rng::derive(seed, {"split-8-1-1"});
    for (std::size_t i = stories.size(); i > 1; --i) {
        std::swap(stories[i - 1], stories[rng.below(i)]);
    }
    const std::size_t n = stories.size();
    const std::size_t n_train = n * 8 / 10;
    const std::size_t n_dev = n / 10;
    SplitCorpora out{{Split::train, source, {}}, {Split::dev, source, {}}, {Split::test, source, {}}};
    auto it = std::make_move_iterator(stories.begin());
    out.train.stories.assign(it, it + n_train);
    out.dev.stories.assign(it + n_train, it + n_train + n_dev);
    out.test.stories.assign(it + n_train + n_dev, std::make_move_iterator(stories.end()));
    return out;
}

}  // namespace compass
