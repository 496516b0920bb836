#include "doctest.h"

#include <sstream>

#include "compass/errors.hpp"
#include "compass/story.hpp"
#include "support/generators.hpp"

using namespace compass;

namespace {

const std::vector<std::string> kEvanSentences = {
    "Evan had been saving for years.",
    "He went to the dealership and bought a really fancy BMW.",
    "Evan was so proud of his new car.",
    "He showed it off around town.",
    "Evan knew he looked cool in the new car.",
};

const char* kEvanOriginal =
    "Evan had been saving for years. He went to the dealership and bought a really fancy BMW. Evan was so proud "
    "of his new car. He showed it off around town. Evan knew he looked cool in the new car.";

}  // namespace

TEST_CASE("segment_text splits on unambiguous terminals") {
    const Story s = segment_text("He went home. He slept.");
    CHECK(s.sentences == std::vector<std::string>{"He went home.", "He slept."});
    CHECK(s.language == "en");
}

TEST_CASE("segment_text on the Evan opening") {
    const Story s = segment_text(
        "Evan had been saving for years. He went to the dealership and bought a really fancy BMW.");
    REQUIRE(s.sentences.size() == 2);
    CHECK(s.sentences[0] == "Evan had been saving for years.");
}

TEST_CASE("segment_text handles abbreviations, quotes and numbers") {
    CHECK(split_sentences("Mr. Smith met Dr. Lee at 9.5 p.m. yesterday. They talked.") ==
          std::vector<std::string>{"Mr. Smith met Dr. Lee at 9.5 p.m. yesterday.", "They talked."});
    CHECK(split_sentences("She said \"Stop!\" Then she left.") ==
          std::vector<std::string>{"She said \"Stop!\"", "Then she left."});
    CHECK(split_sentences("Wait... What? Really!") == std::vector<std::string>{"Wait...", "What?", "Really!"});
    CHECK(split_sentences("J. K. Rowling wrote it. Fans cheered.") ==
          std::vector<std::string>{"J. K. Rowling wrote it.", "Fans cheered."});
    CHECK(split_sentences("Room No. 5 was empty. No one came.").size() == 2);
    CHECK(split_sentences("no terminal at all") == std::vector<std::string>{"no terminal at all"});
}

TEST_CASE("segment_text splits full-width terminals without spaces") {
    CHECK(split_sentences("\xE5\xBD\xBC\xE3\x81\xAF\xE5\xB8\xB0\xE3\x81\xA3\xE3\x81\x9F\xE3\x80\x82"
                          "\xE5\xAF\x9D\xE3\x81\x9F\xE3\x80\x82")
              .size() == 2);
}

TEST_CASE("segment_text normalizes whitespace and rejects blank input") {
    CHECK(segment_text("  A  b.\n\tC d.  ").sentences == std::vector<std::string>{"A b.", "C d."});
    CHECK_THROWS_AS(segment_text("   \n\t"), Error);
    try {
        segment_text("");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyInput);
    }
}

TEST_CASE("render_story joins with single spaces") {
    CHECK(render_story(Story{"x", {"A."}, "en"}) == "A.");
    CHECK(render_story(Story{"evan", kEvanSentences, "en"}) == kEvanOriginal);
    CHECK(segment_text(kEvanOriginal).sentences == kEvanSentences);
}

TEST_CASE("segmentation recovers joined sentence lists") {
    Rng rng(20240601);
    for (int trial = 0; trial < 200; ++trial) {
        const Story story = testing::random_story(rng, 1, 8);
        INFO("text: " << render_story(story));
        CHECK(segment_text(render_story(story)).sentences == story.sentences);
    }
}

TEST_CASE("corpus JSONL load and byte-stable save") {
    std::istringstream in(
        "{\"story_id\": \"a\", \"sentences\": [\"One.\", \"Two  words.\"], \"language\": \"en\"}\n"
        "\n"
        "{\"story_id\": \"b\", \"sentences\": [\"Three.\"]}\n"
        "{\"story_id\": \"c\", \"sentences\": [\"Four.\", \"Five.\"], \"language\": \"ja\"}\n");
    const Corpus corpus = parse_corpus_jsonl(in, Split::dev, "fixture");
    REQUIRE(corpus.stories.size() == 3);
    CHECK(corpus.stories[0].sentences[1] == "Two words.");
    CHECK(corpus.stories[1].language == "en");
    CHECK(corpus.stories[2].language == "ja");

    const std::string saved = corpus_to_jsonl(corpus);
    CHECK(saved.substr(0, 60) == R"({"story_id":"a","sentences":["One.","Two words."],"language")");
    std::istringstream again(saved);
    const Corpus reloaded = parse_corpus_jsonl(again, Split::dev, "fixture");
    CHECK(reloaded == corpus);
    CHECK(corpus_to_jsonl(reloaded) == saved);
}

TEST_CASE("corpus load reports malformed records with line numbers") {
    SUBCASE("empty sentence") {
        std::istringstream in("{\"story_id\": \"a\", \"sentences\": [\"One.\"]}\n"
                              "{\"story_id\": \"b\", \"sentences\": [\"  \"]}\n");
        try {
            parse_corpus_jsonl(in, Split::train);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("bad json") {
        std::istringstream in("{\"story_id\": \n");
        CHECK_THROWS_AS(parse_corpus_jsonl(in, Split::train), ParseError);
    }
    SUBCASE("duplicate id") {
        std::istringstream in("{\"story_id\": \"a\", \"sentences\": [\"One.\"]}\n"
                              "{\"story_id\": \"a\", \"sentences\": [\"Two.\"]}\n");
        try {
            parse_corpus_jsonl(in, Split::train);
            FAIL("expected DuplicateId");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::DuplicateId);
        }
    }
}

TEST_CASE("rocstories csv ingestion") {
    std::istringstream in(
        "storyid,storytitle,sentence1,sentence2,sentence3,sentence4,sentence5\n"
        "id1,Car,Evan had been saving for years.,\"He went to the dealership, and bought a BMW.\",C.,D.,E.\n"
        "id2,Other,A.,B.,C.,D.,E.\n");
    const Corpus c = parse_rocstories_csv(in, Split::train);
    REQUIRE(c.stories.size() == 2);
    CHECK(c.stories[0].sentences.size() == 5);
    CHECK(c.stories[0].sentences[1] == "He went to the dealership, and bought a BMW.");
}

TEST_CASE("8:1:1 split sizes") {
    std::vector<Story> stories;
    for (int i = 0; i < 98161; ++i) stories.push_back(Story{std::to_string(i), {"A."}, "en"});
    const auto parts = split_8_1_1(std::move(stories), 7, "rocstories");
    CHECK(parts.train.stories.size() == 78528);
    CHECK(parts.dev.stories.size() == 9816);
    CHECK(parts.test.stories.size() == 9817);
    CHECK(parts.dev.split == Split::dev);
}
