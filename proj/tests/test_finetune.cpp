#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "compass/errors.hpp"
#include "compass/finetune.hpp"
#include "compass/synthetic.hpp"
#include "compass/tiny_backend.hpp"
#include "support/generators.hpp"

using namespace compass;

namespace {

const Story kEvan{"evan",
                  {"Evan had been saving for years.", "He went to the dealership and bought a really fancy BMW.",
                   "Evan was so proud of his new car.", "He showed it off around town.",
                   "Evan knew he looked cool in the new car."},
                  "en"};

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("compass_ft_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

TrainConfig tiny_config() {
    TrainConfig c;
    c.model.d_model = 32;
    c.model.heads = 2;
    c.model.ffn = 64;
    c.model.encoder_layers = 1;
    c.model.decoder_layers = 1;
    c.initial_lr = 1e-3;
    c.epochs = 1;
    c.batch_size = 4;
    c.seed = 5;
    return c;
}

std::string read(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("training pairs for the Evan example") {
    const auto e = corrupt(kEvan, {0, 2});
    const std::string incomplete =
        "He went to the dealership and bought a really fancy BMW. He showed it off around town. Evan knew he looked "
        "cool in the new car.";
    const std::string masked =
        "<missing_sentence> He went to the dealership and bought a really fancy BMW. <missing_sentence> He showed it "
        "off around town. Evan knew he looked cool in the new car.";
    CHECK(build_training_pair(e, TaskRole::vnmpp) == std::pair<std::string, std::string>{incomplete, masked});
    CHECK(build_training_pair(e, TaskRole::sc) == std::pair<std::string, std::string>{masked, render_story(kEvan)});
    CHECK(build_training_pair(e, TaskRole::sc_v2) ==
          std::pair<std::string, std::string>{
              masked, "<completion> Evan had been saving for years. <completion> Evan was so proud of his new car."});
    CHECK(build_training_pair(e, TaskRole::end_to_end) ==
          std::pair<std::string, std::string>{incomplete, render_story(kEvan)});
}

TEST_CASE("training pairs: zero gaps and custom markers") {
    const auto e = corrupt(kEvan, {});
    CHECK(build_training_pair(e, TaskRole::sc_v2).second == "");
    CHECK(build_training_pair(e, TaskRole::vnmpp).first == build_training_pair(e, TaskRole::vnmpp).second);
    const auto g = corrupt(kEvan, {4});
    const auto p = build_training_pair(g, TaskRole::sc_v2, Markers{"<gap>", "<fill>"});
    CHECK(p.first.find("<gap>") != std::string::npos);
    CHECK(p.second == "<fill> Evan knew he looked cool in the new car.");
}

TEST_CASE("training pairs agree across roles") {
    Rng rng(77);
    for (int i = 0; i < 300; ++i) {
        const Story s = testing::random_story(rng, 1, 7);
        const auto e = sample_corruption(s, CorruptionPolicy::cnndm(), rng);
        const auto mpp = build_training_pair(e, TaskRole::vnmpp);
        const auto sc = build_training_pair(e, TaskRole::sc);
        const auto v2 = build_training_pair(e, TaskRole::sc_v2);
        const auto e2e = build_training_pair(e, TaskRole::end_to_end);
        CHECK(mpp.second == sc.first);  // VN-MPP output feeds SC
        CHECK(sc.first == v2.first);
        CHECK(e2e.first == mpp.first);
        CHECK(e2e.second == sc.second);
        // Splicing the v2 target into the masked input reproduces the story.
        const auto parsed = parse_completion_output(v2.second, static_cast<int>(e.missing_ids.size()));
        CHECK(render_story(splice(e.masked, parsed.completion)) == sc.second);
    }
}

TEST_CASE("train config validates and round trips") {
    TrainConfig c = tiny_config();
    c.role = TaskRole::sc_v2;
    c.policy = CorruptionPolicy::cnndm();
    c.warmup_steps = 7;
    const auto j = c.to_json();
    CHECK(j["lr_schedule"] == "linear_to_zero");
    CHECK(j["optimizer"]["name"] == "adamw");
    const TrainConfig back = TrainConfig::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(back.role == TaskRole::sc_v2);
    CHECK(back.policy == CorruptionPolicy::cnndm());

    TrainConfig defaults;
    CHECK(defaults.initial_lr == 3e-5);
    CHECK(defaults.batch_size == 32);
    CHECK(defaults.clip_norm == 1.0);
    CHECK(defaults.warmup_steps == 0);

    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = tiny_config();
    c.initial_lr = -1;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK_THROWS_AS(TrainConfig::from_json({{"epochs", -1}}), Error);
}

TEST_CASE("train rejects non-train splits and empty corpora") {
    Corpus dev = make_templated_corpus(4, 1, Split::dev);
    CHECK_THROWS_AS(train(dev, tiny_config(), scratch("dev")), Error);
    Corpus empty;
    empty.split = Split::train;
    try {
        train(empty, tiny_config(), scratch("empty"));
        FAIL("expected EmptyCorpus");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyCorpus);
    }
}

TEST_CASE("train writes a loadable checkpoint and a step log") {
    const Corpus corpus = make_templated_corpus(24, 2, Split::train);
    TrainConfig c = tiny_config();
    c.epochs = 2;
    const auto dir = scratch("ckpt");
    std::vector<TrainStep> seen;
    const TrainResult r = train(corpus, c, dir, [&](const TrainStep& s) { seen.push_back(s); });
    CHECK(r.total_steps == 12);
    CHECK(seen.size() == 12);
    CHECK(seen.back().epoch == 1);
    for (const char* f : {"manifest.json", "vocab.json", "weights.bin", "train_log.jsonl"}) {
        CHECK(std::filesystem::exists(dir / f));
    }
    std::ifstream log(dir / "train_log.jsonl");
    int lines = 0;
    for (std::string line; std::getline(log, line); ++lines) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.contains("step"));
        CHECK(j.contains("loss"));
        CHECK(j.contains("lr"));
    }
    CHECK(lines == 12);
    CHECK(seen.back().lr < seen.front().lr);

    auto backend = load_backend(dir);
    CHECK(backend->manifest().role == TaskRole::vnmpp);
    CHECK(backend->manifest().extra["train"]["role"] == "vnmpp");
    GenerationParams p;
    p.beam_size = 2;
    p.num_candidates = 2;
    p.max_length = 16;
    const auto g1 = backend->generate(render_story(corpus.stories[0]), p);
    const auto g2 = backend->generate(render_story(corpus.stories[0]), p);
    CHECK(g1.candidates.size() <= 2);
    CHECK(g1.candidates == g2.candidates);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const Corpus corpus = make_templated_corpus(12, 3, Split::train);
    const auto a = scratch("det_a"), b = scratch("det_b");
    train(corpus, tiny_config(), a);
    train(corpus, tiny_config(), b);
    CHECK(read(a / "weights.bin") == read(b / "weights.bin"));
    CHECK(read(a / "train_log.jsonl") == read(b / "train_log.jsonl"));
}

TEST_CASE("dynamic corruption differs across epochs") {
    const Corpus corpus = make_templated_corpus(40, 4, Split::train);
    int differing = 0;
    for (const auto& s : corpus.stories) {
        Rng e0 = corruption_stream(0, Split::train, s.story_id, 0);
        Rng e1 = corruption_stream(0, Split::train, s.story_id, 1);
        if (sample_corruption(s, CorruptionPolicy::roc(), e0).missing_ids !=
            sample_corruption(s, CorruptionPolicy::roc(), e1).missing_ids) {
            ++differing;
        }
    }
    CHECK(differing >= 20);
}

TEST_CASE("zero epochs keeps the base weights") {
    const Corpus corpus = make_templated_corpus(8, 5, Split::train);
    const auto base = scratch("base"), cont = scratch("cont");
    train(corpus, tiny_config(), base);
    TrainConfig c = tiny_config();
    c.base_checkpoint = base.string();
    c.epochs = 0;
    const TrainResult r = train(corpus, c, cont);
    CHECK(r.total_steps == 0);
    CHECK(read(base / "weights.bin") == read(cont / "weights.bin"));
}

TEST_CASE("loss falls on a small run") {
    const Corpus corpus = make_templated_corpus(64, 6, Split::train);
    TrainConfig c = tiny_config();
    c.epochs = 3;
    const TrainResult r = train(corpus, c, scratch("loss"));
    double first = 0, last = 0;
    for (int i = 0; i < 8; ++i) {
        first += r.log[static_cast<std::size_t>(i)].loss;
        last += r.log[r.log.size() - 1 - static_cast<std::size_t>(i)].loss;
    }
    CHECK(last < first);
}

TEST_CASE("a diverging run dumps state and stops") {
    const Corpus corpus = make_templated_corpus(8, 7, Split::train);
    TrainConfig c = tiny_config();
    c.initial_lr = 1e30;
    c.clip_norm = 0.0;
    c.epochs = 5;
    const auto dir = scratch("div");
    try {
        train(corpus, c, dir);
        FAIL("expected DivergenceDetected");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DivergenceDetected);
    }
    CHECK(std::filesystem::exists(dir / "divergence" / "state.json"));
    CHECK(std::filesystem::exists(dir / "divergence" / "weights.bin"));
}

TEST_CASE("markers must be atomic tokens of a base vocabulary") {
    const Corpus corpus = make_templated_corpus(8, 8, Split::train);
    const auto base = scratch("mk_base");
    train(corpus, tiny_config(), base);
    TrainConfig c = tiny_config();
    c.base_checkpoint = base.string();
    c.markers.missing = "<never_seen>";
    CHECK_THROWS_AS(train(corpus, c, scratch("mk_cont")), Error);
}
