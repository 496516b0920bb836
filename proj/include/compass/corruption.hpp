#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "compass/rng.hpp"
#include "compass/story.hpp"
#include "compass/token_protocol.hpp"

namespace compass {

// Upper bound on the number of removed sentences: either a fixed value or
// min(cap, n_sentences).
struct MaxRule {
    enum class Kind { Fixed, MinOfCap };
    Kind kind = Kind::Fixed;
    int value = 0;

    static MaxRule fixed(int v) { return {Kind::Fixed, v}; }
    static MaxRule min_of_cap(int cap) { return {Kind::MinOfCap, cap}; }
    bool operator==(const MaxRule&) const = default;
};

// m ~ DiscreteUniform[m_min, effective_max(n)].
struct CorruptionPolicy {
    std::string name = "custom";
    int m_min = 0;
    MaxRule m_max = MaxRule::fixed(0);
    // Caps m at n - 1 so the incomplete story is never empty.
    bool forbid_empty = false;
    std::uint64_t seed = 0;

    // Five-sentence stories, 0 <= m <= 2.
    static CorruptionPolicy roc();
    // News highlights, 0 <= m <= min(9, n).
    static CorruptionPolicy cnndm();
    static CorruptionPolicy by_name(std::string_view name);

    // Never more than n. Throws Error(InvalidPolicy) if the range is empty.
    int effective_max(int n_sentences) const;

    bool operator==(const CorruptionPolicy&) const = default;
};

struct CorruptedExample {
    Story original;
    std::vector<int> missing_ids;
    std::vector<std::string> incomplete;
    MaskedStory masked;
    std::vector<std::string> targets;

    bool operator==(const CorruptedExample&) const = default;
};

int sample_missing_count(int n_sentences, const CorruptionPolicy& policy, Rng& rng);

// Throws IndexOutOfRange / DuplicateIndex. missing_ids may be unsorted;
// the example stores them sorted.
CorruptedExample corrupt(const Story& story, std::vector<int> missing_ids);

CorruptedExample sample_corruption(const Story& story, const CorruptionPolicy& policy, Rng& rng);

// The per-story stream used for frozen splits and epoch-varying training.
Rng corruption_stream(std::uint64_t seed, Split split, const std::string& story_id, int epoch = 0);

// Frozen corruption for dev/test. Throws InvalidArgument for train.
std::vector<CorruptedExample> make_static_split(const Corpus& corpus, const CorruptionPolicy& policy,
                                                std::uint64_t seed);

// Every admissible missing-id set, ordered lexicographically by id list.
std::vector<CorruptedExample> enumerate_corruptions(const Story& story, const CorruptionPolicy& policy,
                                                    std::size_t max_variants = 100000);

// Frozen split JSONL: {"story_id", "missing_ids", "incomplete", "targets"}.
std::string corrupted_to_json_line(const CorruptedExample& example);
std::vector<CorruptedExample> parse_corrupted_jsonl(std::istream& in);
void save_corrupted_split(const std::vector<CorruptedExample>& examples, const std::filesystem::path& path);
std::vector<CorruptedExample> load_corrupted_split(const std::filesystem::path& path);

struct SplitManifest {
    std::string policy;
    int m_min = 0;
    std::string max_rule;
    int max_value = 0;
    bool forbid_empty = false;
    std::uint64_t seed = 0;
    std::string split;
    std::size_t count = 0;
    std::string source;
};

std::string manifest_to_json(const SplitManifest& manifest);
SplitManifest make_manifest(const CorruptionPolicy& policy, std::uint64_t seed, const Corpus& corpus,
                            std::size_t count);

}  // namespace compass
