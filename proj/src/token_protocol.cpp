#include "compass/token_protocol.hpp"

#include <algorithm>

namespace compass {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::vector<std::size_t> find_markers(std::string_view text, std::string_view marker) {
    std::vector<std::size_t> hits;
    if (marker.empty()) return hits;
    std::size_t pos = text.find(marker);
    while (pos != std::string_view::npos) {
        hits.push_back(pos);
        pos = text.find(marker, pos + marker.size());
    }
    return hits;
}

}  // namespace

std::size_t MaskedStory::gap_count() const {
    return static_cast<std::size_t>(std::count_if(elements.begin(), elements.end(), [](const auto& e) { return e.gap; }));
}

std::vector<int> MaskedStory::gap_positions() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < elements.size(); ++i) {
        if (elements[i].gap) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<int> MaskedStory::insert_before() const {
    std::vector<int> out;
    int seen = 0;
    for (const auto& e : elements) {
        if (e.gap) {
            out.push_back(seen);
        } else {
            ++seen;
        }
    }
    return out;
}

std::vector<std::string> MaskedStory::context() const {
    std::vector<std::string> out;
    for (const auto& e : elements) {
        if (!e.gap) out.push_back(e.text);
    }
    return out;
}

MaskedStory masked_from_insertions(const std::vector<std::string>& context, const std::vector<int>& insert_before) {
    const int n = static_cast<int>(context.size());
    for (std::size_t g = 0; g < insert_before.size(); ++g) {
        if (insert_before[g] < 0 || insert_before[g] > n) {
            throw Error(ErrorCode::IndexOutOfRange, "insert-before index " + std::to_string(insert_before[g]));
        }
        if (g > 0 && insert_before[g] < insert_before[g - 1]) {
            throw Error(ErrorCode::InvalidArgument, "insert-before indices must be non-decreasing");
        }
    }
    MaskedStory masked;
    std::size_t g = 0;
    for (int i = 0; i <= n; ++i) {
        while (g < insert_before.size() && insert_before[g] == i) {
            masked.elements.push_back(MaskedElement::make_gap());
            ++g;
        }
        if (i < n) masked.elements.push_back(MaskedElement::sentence(context[static_cast<std::size_t>(i)]));
    }
    return masked;
}

MaskedStory masked_from_positions(const std::vector<std::string>& context, const std::vector<int>& positions) {
    const int total = static_cast<int>(context.size() + positions.size());
    for (std::size_t k = 0; k < positions.size(); ++k) {
        if (positions[k] < 0 || positions[k] >= total || (k > 0 && positions[k] <= positions[k - 1])) {
            throw Error(ErrorCode::IndexOutOfRange,
                        "gap positions must be sorted, distinct and < " + std::to_string(total));
        }
    }
    MaskedStory masked;
    std::size_t g = 0;
    std::size_t c = 0;
    for (int i = 0; i < total; ++i) {
        if (g < positions.size() && positions[g] == i) {
            masked.elements.push_back(MaskedElement::make_gap());
            ++g;
        } else {
            masked.elements.push_back(MaskedElement::sentence(context[c++]));
        }
    }
    return masked;
}

std::string encode_masked(const MaskedStory& masked, std::string_view marker) {
    std::string out;
    for (const auto& e : masked.elements) {
        if (!e.gap && !marker.empty() && e.text.find(marker) != std::string::npos) {
            throw Error(ErrorCode::MarkerCollision, "sentence contains marker '" + std::string(marker) + "'");
        }
        if (!out.empty()) out.push_back(' ');
        out += e.gap ? std::string(marker) : e.text;
    }
    return out;
}

ParsedMasked parse_masked(std::string_view sequence, std::string_view marker) {
    ParsedMasked result;
    if (marker.empty()) {
        result.diagnostics.push_back({"EmptyMarker", "no marker configured; treating input as plain text"});
    }
    const auto hits = find_markers(sequence, marker);
    std::size_t cursor = 0;
    auto push_text = [&](std::string_view segment) {
        for (auto& s : split_sentences(segment)) {
            result.story.elements.push_back(MaskedElement::sentence(std::move(s)));
        }
    };
    for (std::size_t h = 0; h < hits.size(); ++h) {
        const std::size_t pos = hits[h];
        push_text(sequence.substr(cursor, pos - cursor));
        result.story.elements.push_back(MaskedElement::make_gap());
        const std::size_t end = pos + marker.size();
        const bool glued_left = pos > 0 && !is_space(sequence[pos - 1]);
        const bool glued_right = end < sequence.size() && !is_space(sequence[end]);
        if (glued_left || glued_right) {
            result.diagnostics.push_back(
                {"MalformedSpacing", "marker " + std::to_string(h) + " at byte " + std::to_string(pos) +
                                         " is not separated by whitespace"});
        }
        cursor = end;
    }
    push_text(sequence.substr(cursor));
    return result;
}

std::string encode_completion_target(const std::vector<std::string>& targets, std::string_view marker) {
    std::string out;
    for (const auto& t : targets) {
        if (normalize_whitespace(t).empty()) {
            throw Error(ErrorCode::InvalidArgument, "completion target is empty");
        }
        if (!marker.empty() && t.find(marker) != std::string::npos) {
            throw Error(ErrorCode::MarkerCollision, "target contains marker '" + std::string(marker) + "'");
        }
        if (!out.empty()) out.push_back(' ');
        out += marker;
        out.push_back(' ');
        out += t;
    }
    return out;
}

ParsedCompletion parse_completion_output(std::string_view sequence, int expected_gaps, std::string_view marker) {
    ParsedCompletion result;
    const auto hits = find_markers(sequence, marker);
    std::vector<std::string> pieces;
    std::size_t cursor = 0;
    for (std::size_t h = 0; h <= hits.size(); ++h) {
        const std::size_t end = h < hits.size() ? hits[h] : sequence.size();
        std::string piece = normalize_whitespace(sequence.substr(cursor, end - cursor));
        if (h == 0 && !piece.empty()) {
            result.diagnostics.push_back({"MissingLeadingMarker", "text before the first marker kept as a completion"});
        }
        if (!piece.empty()) pieces.push_back(std::move(piece));
        if (h < hits.size()) cursor = hits[h] + marker.size();
    }
    const auto expected = static_cast<std::size_t>(std::max(expected_gaps, 0));
    if (pieces.size() > expected) {
        result.diagnostics.push_back({"OverGenerated", "generated " + std::to_string(pieces.size()) +
                                                           " completions for " + std::to_string(expected) +
                                                           " gaps; extras dropped"});
        pieces.resize(expected);
    } else if (pieces.size() < expected) {
        std::string gaps;
        for (std::size_t g = pieces.size(); g < expected; ++g) {
            result.unfilled_gaps.push_back(static_cast<int>(g));
            gaps += (gaps.empty() ? "" : ",") + std::to_string(g);
        }
        result.diagnostics.push_back({"UnderGenerated", "unfilled gaps {" + gaps + "}"});
    }
    result.completion.sentences = std::move(pieces);
    return result;
}

Story splice(const MaskedStory& masked, const CompletionSequence& completions) {
    if (completions.sentences.size() > masked.gap_count()) {
        throw Error(ErrorCode::TooManyCompletions, std::to_string(completions.sentences.size()) +
                                                       " completions for " + std::to_string(masked.gap_count()) +
                                                       " gaps");
    }
    Story story;
    std::size_t next = 0;
    for (const auto& e : masked.elements) {
        if (!e.gap) {
            story.sentences.push_back(e.text);
        } else if (next < completions.sentences.size()) {
            story.sentences.push_back(completions.sentences[next++]);
        }
    }
    return story;
}

std::size_t count_marker(std::string_view text, std::string_view marker) { return find_markers(text, marker).size(); }

}  // namespace compass
