#include "doctest.h"

#include "compass/corruption.hpp"
#include "compass/token_protocol.hpp"
#include "support/generators.hpp"

using namespace compass;

namespace {

const char* kEvanContext =
    "He went to the dealership and bought a really fancy BMW. He showed it off around town. Evan knew he looked "
    "cool in the new car.";
const char* kEvanPrintedMpp =
    "<missing_sentence> He went to the dealership and bought a really fancy BMW. He showed it off around town. "
    "<missing_sentence> Evan knew he looked cool in the new car.";

MaskedStory evan_masked() {
    return MaskedStory{{
        MaskedElement::make_gap(),
        MaskedElement::sentence("He went to the dealership and bought a really fancy BMW."),
        MaskedElement::make_gap(),
        MaskedElement::sentence("He showed it off around town."),
        MaskedElement::sentence("Evan knew he looked cool in the new car."),
    }};
}

}  // namespace

TEST_CASE("gold masked encoding of the Evan example") {
    const MaskedStory masked = evan_masked();
    CHECK(encode_masked(masked) ==
          "<missing_sentence> He went to the dealership and bought a really fancy BMW. <missing_sentence> He showed "
          "it off around town. Evan knew he looked cool in the new car.");
    CHECK(masked.gap_positions() == std::vector<int>{0, 2});
    CHECK(masked.insert_before() == std::vector<int>{0, 1});
    CHECK(render_story(Story{"", masked.context(), "en"}) == kEvanContext);
}

TEST_CASE("parsing the printed prediction yields gaps 0 and 3") {
    const ParsedMasked parsed = parse_masked(kEvanPrintedMpp);
    CHECK(parsed.diagnostics.empty());
    CHECK(parsed.story.gap_positions() == std::vector<int>{0, 3});
    CHECK(parsed.story.insert_before() == std::vector<int>{0, 2});
    CHECK(render_story(Story{"", parsed.story.context(), "en"}) == kEvanContext);
}

TEST_CASE("masked builders agree") {
    const std::vector<std::string> ctx = {"A.", "B.", "C."};
    const MaskedStory a = masked_from_insertions(ctx, {0, 1, 3, 3});
    const MaskedStory b = masked_from_positions(ctx, {0, 2, 5, 6});
    CHECK(a == b);
    CHECK(encode_masked(a) == "<missing_sentence> A. <missing_sentence> B. C. <missing_sentence> <missing_sentence>");
    CHECK_THROWS_AS(masked_from_insertions(ctx, {2, 1}), Error);
    CHECK_THROWS_AS(masked_from_insertions(ctx, {4}), Error);
    CHECK_THROWS_AS(masked_from_positions(ctx, {7}), Error);
}

TEST_CASE("parse_masked tolerates glued markers") {
    const ParsedMasked parsed = parse_masked("A.<missing_sentence>B.");
    CHECK(parsed.story.gap_positions() == std::vector<int>{1});
    CHECK(parsed.story.context() == std::vector<std::string>{"A.", "B."});
    CHECK(has_diagnostic(parsed.diagnostics, "MalformedSpacing"));
}

TEST_CASE("parse_masked on degenerate inputs") {
    CHECK(parse_masked("").story.elements.empty());
    CHECK(parse_masked("<missing_sentence>").story.gap_positions() == std::vector<int>{0});
    CHECK(parse_masked("<missing_sentence> <missing_sentence>").story.gap_count() == 2);
    CHECK(parse_masked("No markers here. None.").story.gap_count() == 0);
}

TEST_CASE("encode_masked rejects marker collisions") {
    MaskedStory m{{MaskedElement::sentence("I typed <missing_sentence> here.")}};
    try {
        encode_masked(m);
        FAIL("expected MarkerCollision");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MarkerCollision);
    }
}

TEST_CASE("completion target encoding and parsing") {
    const std::vector<std::string> targets = {"Evan had been saving for years.", "Evan was so proud of his new car."};
    const std::string encoded = encode_completion_target(targets);
    CHECK(encoded ==
          "<completion> Evan had been saving for years. <completion> Evan was so proud of his new car.");
    CHECK(encode_completion_target({}).empty());
    const ParsedCompletion parsed = parse_completion_output(encoded, 2);
    CHECK(parsed.completion.sentences == targets);
    CHECK(parsed.diagnostics.empty());
    CHECK(parsed.unfilled_gaps.empty());
}

TEST_CASE("completion parsing over- and under-generation") {
    SUBCASE("extra completions are truncated") {
        const auto p = parse_completion_output("<completion> A. <completion> B. <completion> C.", 2);
        CHECK(p.completion.sentences == std::vector<std::string>{"A.", "B."});
        CHECK(has_diagnostic(p.diagnostics, "OverGenerated"));
    }
    SUBCASE("missing completions leave later gaps unfilled") {
        const auto p = parse_completion_output("<completion> A.", 3);
        CHECK(p.completion.sentences == std::vector<std::string>{"A."});
        CHECK(p.unfilled_gaps == std::vector<int>{1, 2});
        CHECK(has_diagnostic(p.diagnostics, "UnderGenerated"));
    }
    SUBCASE("leading text without a marker") {
        const auto p = parse_completion_output("A. <completion> B.", 2);
        CHECK(p.completion.sentences == std::vector<std::string>{"A.", "B."});
        CHECK(has_diagnostic(p.diagnostics, "MissingLeadingMarker"));
    }
    SUBCASE("zero expected gaps") {
        const auto p = parse_completion_output("", 0);
        CHECK(p.completion.sentences.empty());
        CHECK(p.diagnostics.empty());
    }
}

TEST_CASE("splice restores the Evan story") {
    const Story s = splice(evan_masked(), {{"Evan had been saving for years.", "Evan was so proud of his new car."}});
    CHECK(s.sentences.size() == 5);
    CHECK(s.sentences[0] == "Evan had been saving for years.");
    CHECK(s.sentences[2] == "Evan was so proud of his new car.");
    CHECK_THROWS_AS(splice(evan_masked(), {{"a", "b", "c"}}), Error);
    CHECK(splice(evan_masked(), {{"only."}}).sentences.size() == 4);
}

TEST_CASE("count_marker counts non-overlapping occurrences") {
    CHECK(count_marker("<completion> a <completion>", kCompletionMarker) == 2);
    CHECK(count_marker("", kCompletionMarker) == 0);
    CHECK(count_marker("aaaa", "aa") == 2);
}

TEST_CASE("property: parse inverts encode on random masked stories") {
    Rng rng(99);
    for (int trial = 0; trial < 2000; ++trial) {
        const MaskedStory m = testing::random_masked(rng);
        const std::string enc = encode_masked(m);
        const ParsedMasked back = parse_masked(enc);
        INFO(enc);
        REQUIRE(back.story == m);
        CHECK(back.diagnostics.empty());
    }
}

TEST_CASE("property: completion parse inverts encode") {
    Rng rng(100);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<std::string> targets;
        const int k = static_cast<int>(rng.below(6));
        for (int i = 0; i < k; ++i) targets.push_back(testing::random_sentence(rng));
        const auto back = parse_completion_output(encode_completion_target(targets), k);
        REQUIRE(back.completion.sentences == targets);
        CHECK(back.diagnostics.empty());
    }
}

TEST_CASE("property: parsers are total on mutated input") {
    Rng rng(101);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::string garbled = testing::mutate(rng, encode_masked(testing::random_masked(rng)));
        CHECK_NOTHROW(parse_masked(garbled));
        CHECK_NOTHROW(parse_completion_output(garbled, static_cast<int>(rng.below(4))));
    }
}
