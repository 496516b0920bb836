#include "doctest.h"

#include <cmath>
#include <thread>

#include "compass/affect.hpp"
#include "compass/errors.hpp"

#include <httplib.h>

using namespace compass;

namespace {

// Independent restatement of the linear mock: v = bytes mod 5, a = words
// mod 5.
std::pair<double, double> linear_oracle(const std::string& s) {
    std::size_t words = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i < s.size()) ++words;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    }
    return {static_cast<double>(s.size() % 5), static_cast<double>(words % 5)};
}

class FixedLikeness : public LikenessScorer {
public:
    explicit FixedLikeness(double p) : p_(p) {}
    const ScorerManifest& manifest() const override { return m_; }
    double score(const std::string&) const override { return p_; }

private:
    double p_;
    ScorerManifest m_{"story_likeness", 0.0, 1.0, "", "fixed"};
};

class WildVad : public VadScorer {
public:
    const ScorerManifest& manifest() const override { return m_; }
    std::pair<double, double> score(const std::string&) const override { return {9.0, -3.0}; }

private:
    ScorerManifest m_{"vad", 1.0, 5.0, "", "wild"};
};

class FailingVad : public VadScorer {
public:
    const ScorerManifest& manifest() const override { return m_; }
    std::pair<double, double> score(const std::string&) const override { throw std::runtime_error("boom"); }

private:
    ScorerManifest m_{"vad", 1.0, 5.0, "", "failing"};
};

}  // namespace

TEST_CASE("linear mock flow matches the oracle") {
    const Story s{"x", {"Short.", "A somewhat longer sentence here.", "Two  words", "One more sentence now ok."}, "en"};
    const auto flow = emotional_flow(s, *make_linear_mock_vad_scorer());
    REQUIRE(flow.size() == s.sentences.size());
    for (std::size_t i = 0; i < flow.size(); ++i) {
        const auto [v, a] = linear_oracle(s.sentences[i]);
        CHECK(flow[i].sentence_index == static_cast<int>(i));
        CHECK(flow[i].valence == v);
        CHECK(flow[i].arousal == a);
    }
    const auto j = flow_to_json(flow);
    CHECK(j[1]["i"] == 1);
    CHECK(j[1].contains("v"));
    CHECK(j[1].contains("a"));
}

TEST_CASE("constant scorers and the story-like threshold") {
    const Story s{"x", {"Once upon a time.", "The end."}, "en"};
    CHECK(story_likeness(s, *make_constant_likeness_scorer(0.49)) == 0.49);
    CHECK_FALSE(is_story_like(0.49));
    CHECK(is_story_like(0.5));
    CHECK(is_story_like(0.51));
    const auto flow = emotional_flow(s, *make_constant_vad_scorer(2.0, 3.0));
    CHECK(flow[1] == VAPoint{1, 2.0, 3.0});
}

TEST_CASE("scores are clamped into the declared range") {
    const Story s{"x", {"Anything."}, "en"};
    CHECK(story_likeness(s, FixedLikeness(1.7)) == 1.0);
    CHECK(story_likeness(s, FixedLikeness(-0.2)) == 0.0);
    const auto flow = emotional_flow(s, WildVad());
    CHECK(flow[0].valence == 5.0);
    CHECK(flow[0].arousal == 1.0);
}

TEST_CASE("scorer failures surface as ScorerUnavailable") {
    const Story s{"x", {"Anything."}, "en"};
    try {
        emotional_flow(s, FailingVad());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ScorerUnavailable);
    }
}

TEST_CASE("lexicon scorer averages known words") {
    ScorerManifest m{"vad", 1.0, 5.0, "test lexicon", "lex"};
    auto lex = make_lexicon_vad_scorer({{"happy", {5.0, 4.0}}, {"sad", {1.0, 2.0}}}, m, {3.0, 3.0});
    const auto [v, a] = lex->score("Happy and sad.");
    CHECK(v == 3.0);
    CHECK(a == 3.0);
    CHECK(lex->score("Happy day!") == std::pair<double, double>{5.0, 4.0});
    CHECK(lex->score("Nothing known.") == std::pair<double, double>{3.0, 3.0});
    auto def = make_default_lexicon_vad_scorer();
    CHECK(def->score("She was happy.").first > def->score("She was sad.").first);
}

TEST_CASE("default likeness prefers narrative text") {
    auto like = make_default_likeness_scorer();
    const double story =
        story_likeness(Story{"", {"Tom went to the park.", "He saw his friend.", "They played all day."}, "en"}, *like);
    const double list = story_likeness(Story{"", {"Item 4: 12 kg.", "Total 55 units."}, "en"}, *like);
    CHECK(story > list);
    CHECK(story >= 0.0);
    CHECK(story <= 1.0);
}

TEST_CASE("bow logistic follows its formula") {
    ScorerManifest m{"story_likeness", 0.0, 1.0, "", "bow"};
    auto like = make_bow_logistic_likeness_scorer(-1.0, {{"went", 2.0}, {"he", 1.0}}, m);
    // tokens: he, went, home -> sum = 3, n = 3
    CHECK(like->score("He went home") == doctest::Approx(1.0 / (1.0 + std::exp(-(-1.0 + 3.0 / 3.0)))));
}

TEST_CASE("manifests validate and round trip") {
    ScorerManifest m{"vad", 1.0, 5.0, "note", "ckpt"};
    const auto back = ScorerManifest::from_json(m.to_json());
    CHECK(back.kind == "vad");
    CHECK(back.min_value == 1.0);
    CHECK(back.max_value == 5.0);
    CHECK(back.checkpoint == "ckpt");
    CHECK(m.to_json()["range"] == nlohmann::json::array({1.0, 5.0}));
    CHECK_THROWS_AS((ScorerManifest{"mood", 0, 1, "", ""}.validate()), Error);
    CHECK_THROWS_AS((ScorerManifest{"vad", 2, 2, "", ""}.validate()), Error);
}

TEST_CASE("config factories") {
    CHECK(vad_scorer_from_config({{"kind", "linear_mock"}})->manifest().max_value == 4.0);
    CHECK(likeness_scorer_from_config({{"kind", "constant"}, {"value", 0.3}})->score("x") == 0.3);
    CHECK_THROWS_AS(vad_scorer_from_config({{"kind", "nope"}}), Error);
    CHECK_THROWS_AS(likeness_scorer_from_config({{"kind", "nope"}}), Error);
}

TEST_CASE("remote scorers speak the score protocol") {
    httplib::Server server;
    server.Post("/v1/score", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json out;
        out["scores"] = nlohmann::json::array();
        out["points"] = nlohmann::json::array();
        for (const auto& t : body.at("texts")) {
            const double len = static_cast<double>(t.get<std::string>().size());
            out["scores"].push_back(len > 10 ? 0.9 : 0.1);
            out["points"].push_back({1.0 + std::fmod(len, 4.0), 2.0});
        }
        res.set_content(out.dump(), "application/json");
    });
    server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string url = "http://127.0.0.1:" + std::to_string(port);

    auto like = make_remote_likeness_scorer(url, ScorerManifest{"story_likeness", 0, 1, "", "remote"});
    CHECK(like->probe());
    CHECK(like->score("a long enough text") == 0.9);
    auto vad = make_remote_vad_scorer(url, ScorerManifest{"vad", 1, 5, "", "remote"});
    const auto flow = emotional_flow(Story{"", {"abc.", "abcd."}, "en"}, *vad);
    CHECK(flow[0].valence == 1.0 + std::fmod(4.0, 4.0));
    CHECK(flow[1].valence == 1.0 + std::fmod(5.0, 4.0));
    CHECK(flow[1].arousal == 2.0);

    server.stop();
    t.join();
    CHECK_FALSE(like->probe());
    CHECK_THROWS_AS(story_likeness(Story{"", {"x."}, "en"}, *like), Error);
}
