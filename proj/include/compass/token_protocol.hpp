#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "compass/errors.hpp"
#include "compass/story.hpp"

namespace compass {

inline constexpr std::string_view kMissingMarker = "<missing_sentence>";
inline constexpr std::string_view kCompletionMarker = "<completion>";

// Marker strings travel with checkpoints; these are only the defaults.
struct Markers {
    std::string missing{kMissingMarker};
    std::string completion{kCompletionMarker};

    bool operator==(const Markers&) const = default;
};

struct MaskedElement {
    bool gap = false;
    std::string text;  // empty for gaps

    static MaskedElement make_gap() { return {true, {}}; }
    static MaskedElement sentence(std::string s) { return {false, std::move(s)}; }

    bool operator==(const MaskedElement&) const = default;
};

// A story with gap markers interleaved between its sentences.
struct MaskedStory {
    std::vector<MaskedElement> elements;

    std::size_t size() const noexcept { return elements.size(); }
    std::size_t gap_count() const;

    // Element indices of gaps; for a gold masked story these are the
    // missing sentence ids in the completed story.
    std::vector<int> gap_positions() const;

    // For each gap, the index into the incomplete story it is inserted
    // before (equal to the context length for trailing gaps).
    std::vector<int> insert_before() const;

    // Sentences with gaps removed.
    std::vector<std::string> context() const;

    bool operator==(const MaskedStory&) const = default;
};

// Builds a masked story from context sentences and insert-before indices.
// Indices must be non-decreasing and within [0, context.size()].
MaskedStory masked_from_insertions(const std::vector<std::string>& context, const std::vector<int>& insert_before);

// Builds a masked story from context sentences and gap positions expressed
// in completed-story coordinates (sorted, distinct).
MaskedStory masked_from_positions(const std::vector<std::string>& context, const std::vector<int>& positions);

struct CompletionSequence {
    std::vector<std::string> sentences;

    bool operator==(const CompletionSequence&) const = default;
};

struct ParsedMasked {
    MaskedStory story;
    Diagnostics diagnostics;
};

struct ParsedCompletion {
    CompletionSequence completion;
    Diagnostics diagnostics;
    std::vector<int> unfilled_gaps;
};

// Throws Error(MarkerCollision) if a sentence contains the marker.
std::string encode_masked(const MaskedStory& masked, std::string_view marker = kMissingMarker);

// Total: tolerates arbitrary model output and reports irregularities as
// diagnostics instead of throwing.
ParsedMasked parse_masked(std::string_view sequence, std::string_view marker = kMissingMarker);

// "<completion> t1 <completion> t2 ..."; empty string for no targets.
std::string encode_completion_target(const std::vector<std::string>& targets,
                                     std::string_view marker = kCompletionMarker);

// Later gaps go unfilled first on under-generation; extras are truncated.
ParsedCompletion parse_completion_output(std::string_view sequence, int expected_gaps,
                                         std::string_view marker = kCompletionMarker);

// Replaces gaps in order; gaps without a completion are dropped.
// Throws Error(TooManyCompletions).
Story splice(const MaskedStory& masked, const CompletionSequence& completions);

// Count of non-overlapping occurrences of marker in text.
std::size_t count_marker(std::string_view text, std::string_view marker);

}  // namespace compass
