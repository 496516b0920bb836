#include "doctest.h"

#include <chrono>

#include "compass/affect.hpp"
#include "compass/alignment.hpp"
#include "compass/errors.hpp"
#include "compass/evaluation.hpp"
#include "compass/pipeline.hpp"
#include "compass/synthetic.hpp"
#include "support/oracle_fixture.hpp"

using namespace compass;

namespace {

const std::vector<std::string> kEvan = {"Evan had been saving for years.",
                                        "He went to the dealership and bought a really fancy BMW.",
                                        "Evan was so proud of his new car.", "He showed it off around town.",
                                        "Evan knew he looked cool in the new car."};

// Fixed-output backend for scripted scenarios.
class ScriptedBackend : public Backend {
public:
    ScriptedBackend(TaskRole role, std::vector<std::string> outputs) : outputs_(std::move(outputs)) {
        manifest_.kind = "scripted";
        manifest_.checkpoint = "scripted";
        manifest_.role = role;
    }
    const BackendManifest& manifest() const override { return manifest_; }
    GenerationResult generate(std::string_view, const GenerationParams&) override {
        GenerationResult r;
        double score = 0.0;
        for (const auto& o : outputs_) r.candidates.push_back({o, score -= 1.0});
        return r;
    }

private:
    BackendManifest manifest_;
    std::vector<std::string> outputs_;
};

class ThrowingBackend : public Backend {
public:
    explicit ThrowingBackend(ErrorCode code) : code_(code) { manifest_.role = TaskRole::vnmpp; }
    const BackendManifest& manifest() const override { return manifest_; }
    GenerationResult generate(std::string_view, const GenerationParams&) override { throw Error(code_, "injected"); }
    bool probe() override { return false; }

private:
    BackendManifest manifest_;
    ErrorCode code_;
};

std::shared_ptr<BackendPool> scripted(TaskRole role, std::vector<std::string> outputs) {
    return BackendPool::single(std::make_unique<ScriptedBackend>(role, std::move(outputs)));
}

}  // namespace

TEST_CASE("alignment: edit distance") {
    CHECK(normalized_edit_distance("", "") == 0.0);
    CHECK(normalized_edit_distance("abc", "abc") == 0.0);
    CHECK(normalized_edit_distance("abc", "") == 1.0);
    CHECK(normalized_edit_distance("kitten", "sitting") == doctest::Approx(3.0 / 7));
}

TEST_CASE("alignment: paraphrase tolerance and order") {
    const std::vector<std::string> a = {"He went home.", "She laughed loudly.", "The end."};
    const std::vector<std::string> b = {"He went home!", "Something new happened today.", "She laughed loud.",
                                        "The end."};
    const auto pairs = align_sentences(a, b);
    CHECK(pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 2}, {2, 3}});
    // Ties go to the closest then earliest pairing.
    CHECK(align_sentences({"x."}, {"x.", "x."}) == std::vector<std::pair<int, int>>{{0, 0}});
    CHECK(align_sentences({"abc."}, {"abd.", "abc."}) == std::vector<std::pair<int, int>>{{0, 1}});
    CHECK(align_sentences({"completely different"}, {"nothing alike here"}).empty());
}

TEST_CASE("reconcile: exact output maps gaps to input coordinates") {
    const std::vector<std::string> input = {kEvan[1], kEvan[3], kEvan[4]};
    const auto parsed = parse_masked("<missing_sentence> " + kEvan[1] + " " + kEvan[3] + " <missing_sentence> " +
                                     kEvan[4]);
    const PredictResult r = reconcile(parsed.story, input);
    CHECK(r.diagnostics.empty());
    CHECK(r.masked.gap_positions() == std::vector<int>{0, 3});
    CHECK(r.masked.context() == input);
}

TEST_CASE("reconcile: paraphrased context keeps the originals") {
    const std::vector<std::string> input = {"Tom went out.", "It rained all day.", "He came home wet."};
    const auto parsed =
        parse_masked("Tom went outside. <missing_sentence> It rained all day. He came home wet.");
    const PredictResult r = reconcile(parsed.story, input);
    CHECK(has_diagnostic(r.diagnostics, "ContextDrift"));
    CHECK(r.masked.context() == input);
    CHECK(r.masked.insert_before() == std::vector<int>{1});
}

TEST_CASE("reconcile: hallucinated sentences and failures") {
    const std::vector<std::string> input = {"Tom went out.", "It rained all day.", "He came home wet."};
    auto parsed = parse_masked("Tom went out. A dragon appeared from nowhere at once. <missing_sentence> It rained "
                               "all day. He came home wet.");
    PredictResult r = reconcile(parsed.story, input);
    CHECK(has_diagnostic(r.diagnostics, "UnalignedSentence"));
    CHECK(r.masked.context() == input);
    CHECK(r.masked.insert_before() == std::vector<int>{1});

    parsed = parse_masked("<missing_sentence> Completely unrelated words here. Nothing matches at all.");
    r = reconcile(parsed.story, input);
    CHECK(has_diagnostic(r.diagnostics, "ReconciliationFailure"));
    CHECK(r.masked.gap_count() == 0);
    CHECK(r.masked.context() == input);
}

TEST_CASE("infer_insertions places unmatched output sentences") {
    const std::vector<std::string> input = {"A one.", "C three."};
    const auto m = infer_insertions(input, {"A one.", "B two is new.", "C three.", "D four is new."});
    REQUIRE(m);
    CHECK(m->insert_before() == std::vector<int>{1, 2});
    CHECK(m->gap_positions() == std::vector<int>{1, 3});
    CHECK_FALSE(infer_insertions(input, {"Totally other text.", "And more of it."}));
}

TEST_CASE("Evan example: VN-MPP prediction flows through v2 completion") {
    const std::vector<std::string> input = {kEvan[1], kEvan[3], kEvan[4]};
    PipelineConfig c;
    c.vnmpp = scripted(TaskRole::vnmpp, {"<missing_sentence> " + kEvan[1] + " " + kEvan[3] +
                                         " <missing_sentence> " + kEvan[4]});
    c.sc = scripted(TaskRole::sc_v2, {"<completion> Evan had saved for years. <completion> He loved it."});
    const AssistResult r = assist(render_story(Story{"", input, "en"}), c);
    CHECK(r.gap_positions == std::vector<int>{0, 3});
    CHECK(r.insert_before == std::vector<int>{0, 2});
    REQUIRE(r.candidates_per_gap.size() == 2);
    CHECK(r.candidates_per_gap[0].front().text == "Evan had saved for years.");
    CHECK(r.best_completion.sentences ==
          std::vector<std::string>{"Evan had saved for years.", kEvan[1], kEvan[3], "He loved it.", kEvan[4]});
    const auto pm = position_metrics(r.gap_positions, {0, 2});
    CHECK(pm.exact_match == 0.0);
    CHECK(pm.f1 == 0.5);
}

TEST_CASE("oracle backends reconstruct every corruption exactly") {
    const auto examples = testing::oracle_examples(testing::oracle_stories(8));
    for (Approach a : {Approach::two_module, Approach::two_module_v2, Approach::end_to_end}) {
        CAPTURE(to_string(a));
        const PipelineConfig c = testing::oracle_pipeline(examples, a);
        for (const auto& e : examples) {
            const AssistResult r = assist(render_story(Story{"", e.incomplete, "en"}), c);
            CHECK(r.diagnostics.empty());
            CHECK(r.best_completion.sentences == e.original.sentences);
            CHECK(r.gap_positions == e.missing_ids);
        }
    }
}

TEST_CASE("two-module repair restores omitted context and drops misfits") {
    const MaskedStory masked = masked_from_positions({"Ann sat down.", "Ann looked around.", "Ann slept."}, {1});
    PipelineConfig c;
    c.sc = scripted(TaskRole::sc, {"Ann sat down. She was tired. Very tired. So tired. Ann slept.",
                                   "Ann sat down. She yawned. Ann slept.", "Ann sat. Ann slept."});
    const StoryCandidates sc = complete_two_module(masked, c);
    REQUIRE(sc.candidates.size() == 1);
    // The omitted context sentence comes back from the masked story.
    CHECK(sc.candidates[0].story.sentences ==
          std::vector<std::string>{"Ann sat down.", "She yawned.", "Ann looked around.", "Ann slept."});
    CHECK(sc.diagnostics.size() == 2);
    CHECK(has_diagnostic(sc.diagnostics, "MalformedCandidate"));

    c.sc = scripted(TaskRole::sc, {"One. Two. Three. Four. Five. Six."});
    CHECK_THROWS_AS(complete_two_module(masked, c), Error);
}

TEST_CASE("v2 completion reports over- and under-generation per candidate") {
    const MaskedStory masked = masked_from_positions({"A b.", "C d."}, {0, 3});
    PipelineConfig c;
    c.sc = scripted(TaskRole::sc_v2, {"<completion> X. <completion> Y. <completion> Z.", "<completion> P."});
    c.params.num_candidates = 2;
    const GapCandidates g = complete_v2(masked, c);
    REQUIRE(g.per_gap.size() == 2);
    CHECK(g.per_gap[0].size() == 2);
    CHECK(g.per_gap[1].size() == 1);
    CHECK(has_diagnostic(g.diagnostics, "OverGenerated"));
    CHECK(has_diagnostic(g.diagnostics, "UnderGenerated"));
    CHECK(best_completion(masked, g.per_gap).sentences == std::vector<std::string>{"X.", "A b.", "C d.", "Y."});
}

TEST_CASE("end-to-end: per-gap candidates come from agreeing outputs") {
    PipelineConfig c;
    c.approach = Approach::end_to_end;
    c.params.beam_size = 3;
    c.params.num_candidates = 3;
    c.e2e = scripted(TaskRole::end_to_end, {"Ann woke. Ann ate. Ann left.", "Ann woke. Ann ran. Ann left.",
                                            "Ann woke. Ann left. Ann sang."});
    const AssistResult r = assist("Ann woke. Ann left.", c);
    CHECK(r.gap_positions == std::vector<int>{1});
    REQUIRE(r.candidates_per_gap.size() == 1);
    CHECK(r.candidates_per_gap[0].size() == 2);
    CHECK(r.story_candidates.size() == 3);
    CHECK(r.best_completion.sentences == std::vector<std::string>{"Ann woke.", "Ann ate.", "Ann left."});
}

TEST_CASE("assist: zero gaps, empty input and malformed output") {
    PipelineConfig c;
    c.vnmpp = BackendPool::single(make_identity_backend(TaskRole::vnmpp));
    c.sc = BackendPool::single(make_template_backend(TaskRole::sc_v2));
    const AssistResult r = assist("One thing. Another thing.", c);
    CHECK(r.gap_positions.empty());
    CHECK(r.best_completion.sentences == r.input_story.sentences);
    CHECK_THROWS_AS(assist("   \n ", c), Error);

    c.vnmpp = scripted(TaskRole::vnmpp, {"<missing_sentence>One thing. Another thing."});
    const AssistResult bad = assist("One thing. Another thing.", c);
    CHECK(has_diagnostic(bad.diagnostics, "MalformedSpacing"));
    CHECK(bad.best_completion.sentences.size() >= 2);
}

TEST_CASE("assist: infrastructure failures propagate, others become diagnostics") {
    PipelineConfig c;
    c.vnmpp = BackendPool::single(std::make_unique<ThrowingBackend>(ErrorCode::BackendUnavailable));
    c.sc = BackendPool::single(make_template_backend(TaskRole::sc_v2));
    CHECK_THROWS_AS(assist("A b. C d.", c), Error);

    c.vnmpp = BackendPool::single(std::make_unique<ThrowingBackend>(ErrorCode::InputTooLong));
    const AssistResult r = assist("A b. C d.", c);
    CHECK(has_diagnostic(r.diagnostics, "InputTooLong"));
    CHECK(r.best_completion.sentences == r.input_story.sentences);

    PipelineConfig missing;
    missing.vnmpp = c.sc;
    CHECK_THROWS_AS(assist("A b.", missing), Error);
}

TEST_CASE("assist: pool exhaustion is reported") {
    std::vector<std::unique_ptr<Backend>> one;
    one.push_back(make_template_backend(TaskRole::vnmpp));
    auto pool = std::make_shared<BackendPool>(std::move(one), std::chrono::milliseconds(20));
    PipelineConfig c;
    c.vnmpp = pool;
    c.sc = BackendPool::single(make_template_backend(TaskRole::sc_v2));
    auto held = pool->acquire();
    try {
        assist("A b. C d.", c);
        FAIL("expected PoolExhausted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::PoolExhausted);
    }
}

TEST_CASE("assist: marker mismatch is rejected") {
    PipelineConfig c;
    c.vnmpp = BackendPool::single(make_identity_backend(TaskRole::vnmpp, Markers{"<gap>", "<completion>"}));
    c.sc = BackendPool::single(make_template_backend(TaskRole::sc_v2));
    const AssistResult r = assist("A b. C d.", c);
    CHECK(has_diagnostic(r.diagnostics, "InvalidArgument"));
}

TEST_CASE("template backends solve templated stories") {
    const Corpus corpus = make_templated_corpus(20, 3, Split::test);
    PipelineConfig c;
    c.vnmpp = BackendPool::single(make_template_backend(TaskRole::vnmpp));
    c.sc = BackendPool::single(make_template_backend(TaskRole::sc_v2));
    for (const auto& s : corpus.stories) {
        for (const auto& e : enumerate_corruptions(s, CorruptionPolicy::roc())) {
            const AssistResult r = assist(render_story(Story{"", e.incomplete, "en"}), c);
            CHECK(r.gap_positions == e.missing_ids);
            CHECK(r.best_completion.sentences == e.original.sentences);
        }
    }
}

TEST_CASE("scores attach and scorer failures become diagnostics") {
    PipelineConfig c;
    c.vnmpp = BackendPool::single(make_identity_backend(TaskRole::vnmpp));
    c.sc = BackendPool::single(make_template_backend(TaskRole::sc_v2));
    Scorers s;
    s.likeness = make_constant_likeness_scorer(0.8);
    s.vad = make_linear_mock_vad_scorer();
    AssistResult r = assist("A b. C d.", c, s);
    REQUIRE(r.story_likeness);
    CHECK(*r.story_likeness == 0.8);
    REQUIRE(r.flow_before);
    CHECK(r.flow_before->size() == 2);
    r = assist("A b. C d.", c, s, AssistOptions{false, false});
    CHECK_FALSE(r.story_likeness);
    CHECK_FALSE(r.flow_before);

    Scorers remote;
    remote.likeness = make_remote_likeness_scorer("http://127.0.0.1:1", ScorerManifest{"story_likeness", 0.0, 1.0, "", "remote"});
    r = assist("A b. C d.", c, remote);
    CHECK(has_diagnostic(r.diagnostics, "ScorerUnavailable"));
}
