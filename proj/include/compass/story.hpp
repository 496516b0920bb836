#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace compass {

struct Story {
    std::string story_id;
    std::vector<std::string> sentences;
    std::string language = "en";

    std::size_t size() const noexcept { return sentences.size(); }
    bool operator==(const Story&) const = default;
};

enum class Split { train, dev, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct Corpus {
    Split split = Split::train;
    std::string source;
    std::vector<Story> stories;

    bool operator==(const Corpus&) const = default;
};

// Collapses internal whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

// Rule-based sentence boundary detection over normalized text. Total: never
// throws, returns an empty list for blank input.
std::vector<std::string> split_sentences(std::string_view text);

// Throws Error(EmptyInput) when raw_text is blank.
Story segment_text(std::string_view raw_text, std::string_view language = "en");

std::string render_story(const Story& story);

// Throws Error(InvalidArgument) when a sentence is blank or not stripped.
void validate_story(const Story& story);

// One JSON object per line: {"story_id", "sentences", "language"}.
Corpus parse_corpus_jsonl(std::istream& in, Split split, std::string source = {});
Corpus load_corpus(const std::filesystem::path& path, Split split, std::string source = {});
std::string story_to_json_line(const Story& story);
std::string corpus_to_jsonl(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// ROCStories CSV (storyid, storytitle, sentence1..sentence5).
Corpus parse_rocstories_csv(std::istream& in, Split split, std::string source = "rocstories");

struct SplitCorpora {
    Corpus train;
    Corpus dev;
    Corpus test;
};

// Random 8:1:1 split; train gets floor(0.8 N), dev floor(0.1 N), test the rest.
SplitCorpora split_8_1_1(std::vector<Story> stories, std::uint64_t seed, std::string source = {});

}  // namespace compass
