#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "compass/errors.hpp"
#include "compass/evaluation.hpp"
#include "compass/synthetic.hpp"
#include "support/bleu_oracle.hpp"
#include "support/generators.hpp"
#include "support/oracle_fixture.hpp"

using namespace compass;

namespace {

std::string random_text(Rng& rng, int max_words) {
    static const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "the", "cat"};
    std::string s;
    const int n = static_cast<int>(rng.uniform_int(1, max_words));
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + vocab[rng.below(vocab.size())];
    return s;
}

}  // namespace

TEST_CASE("bleu: hand-computed values") {
    CHECK(bleu({"the cat sat on the mat"}, {"the cat sat on the mat"}) == doctest::Approx(100.0));
    // p = 1, 3/4, 2/3, 1/2; BP = exp(1 - 6/5).
    const double expected = 100.0 * std::exp(-0.2) * std::pow(1.0 * 0.75 * (2.0 / 3.0) * 0.5, 0.25);
    CHECK(bleu({"the cat sat on mat"}, {"the cat sat on the mat"}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(57.893).epsilon(1e-4));
}

TEST_CASE("bleu: unigram clipping") {
    const BleuStats s = bleu_stats({"the the the the the the the"}, {"the cat is on the mat"});
    CHECK(s.matches[0] == 2);
    CHECK(s.totals[0] == 7);
    CHECK(s.candidate_length == 7);
    CHECK(s.reference_length == 6);
}

TEST_CASE("bleu: degenerate corpora") {
    CHECK_THROWS_AS(bleu({}, {}), Error);
    CHECK_THROWS_AS(bleu({"a"}, {"a", "b"}), Error);
    CHECK(bleu({""}, {""}) == 100.0);
    CHECK(bleu({""}, {"a b"}) == 0.0);
    CHECK(bleu({"x y z w"}, {"a b c d"}) == 0.0);
    // Short candidates skip the higher orders they cannot form.
    CHECK(bleu({"a b"}, {"a b"}) == doctest::Approx(100.0));
}

TEST_CASE("bleu: matches the brute-force oracle on random pairs") {
    Rng rng(1234);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> c, r;
        const int n = static_cast<int>(rng.uniform_int(1, 4));
        for (int i = 0; i < n; ++i) {
            c.push_back(random_text(rng, 12));
            r.push_back(rng.below(4) == 0 ? c.back() : random_text(rng, 12));
        }
        CHECK(std::abs(bleu(c, r) - testing::brute_force_bleu(c, r)) < 1e-9);
        CHECK(bleu(r, r) == doctest::Approx(100.0).epsilon(1e-12));
    }
}

TEST_CASE("position metrics: set semantics") {
    auto pm = position_metrics({0, 3}, {0, 2});
    CHECK(pm.exact_match == 0.0);
    CHECK(pm.precision == 0.5);
    CHECK(pm.recall == 0.5);
    CHECK(pm.f1 == 0.5);
    pm = position_metrics({}, {});
    CHECK(pm.exact_match == 1.0);
    CHECK(pm.f1 == 1.0);
    pm = position_metrics({1}, {});
    CHECK(pm.exact_match == 0.0);
    CHECK(pm.precision == 0.0);
    CHECK(pm.f1 == 0.0);
    pm = position_metrics({}, {2});
    CHECK(pm.recall == 0.0);
    pm = position_metrics({4, 4, 1}, {1, 4});
    CHECK(pm.exact_match == 1.0);
    pm = position_metrics({1, 2, 3}, {1});
    CHECK(pm.precision == doctest::Approx(1.0 / 3));
    CHECK(pm.recall == 1.0);
    CHECK(pm.f1 == doctest::Approx(0.5));
}

TEST_CASE("position metrics: macro mean") {
    const auto m = mean_position_metrics({position_metrics({0}, {0}), position_metrics({1}, {0})});
    CHECK(m.exact_match == 0.5);
    CHECK(m.f1 == 0.5);
    CHECK_THROWS_AS(mean_position_metrics({}), Error);
}

TEST_CASE("mean length counts whitespace tokens") {
    CHECK(mean_length({"a b c", "d"}) == 2.0);
    CHECK(mean_length({"  spaced   out  "}) == 2.0);
    CHECK_THROWS_AS(mean_length({}), Error);
}

TEST_CASE("external scorers: threshold ratio and mean") {
    auto mock = make_mock_scorer("union", Aggregate::threshold_ratio, {0.6, 0.4});
    const auto s = score_with_external(*mock, {"a", "b"}, {"a", "b"});
    CHECK(s.aggregate == 0.5);
    CHECK(s.aggregate_kind == "threshold_ratio");
    CHECK(s.per_instance == std::vector<double>{0.6, 0.4});
    auto exact = make_mock_scorer("edge", Aggregate::threshold_ratio, {0.5, 0.49});
    CHECK(score_with_external(*exact, {"a", "b"}, {}).aggregate == 0.5);
    auto mean = make_mock_scorer("m", Aggregate::mean, {1.0, 2.0, 3.0});
    CHECK(score_with_external(*mean, {"a", "b", "c"}, {}).aggregate == 2.0);
}

TEST_CASE("external scorers: subprocess adapter") {
    // Scores each line by whether the candidate equals the reference.
    auto sub = make_subprocess_scorer(
        "eq", Aggregate::mean,
        "python3 -c \"import sys, json\nfor l in sys.stdin:\n d = json.loads(l)\n "
        "print(1.0 if d['candidate'] == d['reference'] else 0.0)\"");
    const auto s = score_with_external(*sub, {"x", "y", "z"}, {"x", "q", "z"});
    CHECK(s.per_instance == std::vector<double>{1.0, 0.0, 1.0});
    CHECK(s.aggregate == doctest::Approx(2.0 / 3));

    auto broken = make_subprocess_scorer("broken", Aggregate::mean, "exit 3");
    CHECK_THROWS_AS(score_with_external(*broken, {"x"}, {"x"}), Error);
}

TEST_CASE("external scorers: config and likeness adapter") {
    auto cfg = external_scorer_from_config(
        {{"name", "u"}, {"kind", "mock"}, {"aggregate", "threshold_ratio"}, {"scores", {0.9}}});
    CHECK(cfg->name() == "u");
    CHECK(cfg->aggregate() == Aggregate::threshold_ratio);
    CHECK_THROWS_AS(external_scorer_from_config({{"name", "x"}, {"kind", "nope"}}), Error);
    auto like = make_likeness_adapter(make_constant_likeness_scorer(0.7));
    CHECK(score_with_external(*like, {"a story", "another"}, {}).aggregate == 1.0);
}

TEST_CASE("evaluate_run: oracle backends give perfect scores") {
    const auto examples = testing::oracle_examples(testing::oracle_stories(6));
    for (Approach a : {Approach::two_module, Approach::two_module_v2, Approach::end_to_end}) {
        CAPTURE(to_string(a));
        const MetricReport r = evaluate_run(examples, testing::oracle_pipeline(examples, a), "fixture");
        CHECK(r.errors == 0);
        CHECK(r.count == static_cast<long>(examples.size()));
        for (const auto& [k, v] : r.bleu) {
            CAPTURE(k);
            CHECK(v == doctest::Approx(100.0));
        }
        CHECK(r.position.exact_match == 1.0);
        CHECK(r.position.f1 == 1.0);
        if (a == Approach::end_to_end) {
            CHECK(r.bleu.count("e2e") == 1);
        } else {
            CHECK(r.bleu.count("vnmpp") == 1);
            CHECK(r.bleu.count("pipeline") == 1);
        }
    }
}

TEST_CASE("evaluate_run: unavailable adapters are reported, not fatal") {
    const auto examples = testing::oracle_examples(testing::oracle_stories(2));
    auto broken = make_subprocess_scorer("broken", Aggregate::mean, "exit 3");
    auto mock = make_mock_scorer("union", Aggregate::threshold_ratio, {0.6, 0.4});
    const MetricReport r = evaluate_run(examples, testing::oracle_pipeline(examples, Approach::two_module_v2),
                                        "fixture", {broken.get(), mock.get()});
    CHECK(r.unavailable.count("broken") == 1);
    CHECK(r.learned.at("union") == 0.5);
}

TEST_CASE("evaluate_run: golden report") {
    // Fixed VN-MPP that always appends one gap, with the analytic template
    // completer; the report must be byte-identical to the committed one.
    const Corpus corpus = make_templated_corpus(10, 42, Split::test, "g");
    const auto split = make_static_split(corpus, CorruptionPolicy::roc(), 9);
    PipelineConfig c;
    c.vnmpp = BackendPool::single(make_always_add_last_backend());
    c.sc = BackendPool::single(make_template_backend(TaskRole::sc_v2));
    auto mock = make_mock_scorer("union", Aggregate::threshold_ratio, {0.7, 0.2, 0.5});
    const std::string got = evaluate_run(split, c, "test", {mock.get()}).to_json().dump(2) + "\n";

    const std::filesystem::path golden = std::filesystem::path(COMPASS_TEST_DATA) / "golden_report.json";
    if (!std::filesystem::exists(golden)) {
        std::ofstream(golden) << got;
        MESSAGE("wrote " << golden.string());
    }
    std::ifstream in(golden);
    const std::string want((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(got == want);
}
