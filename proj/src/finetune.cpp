#include "compass/finetune.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "compass/errors.hpp"
#include "compass/tiny_backend.hpp"

namespace compass {

namespace {

nlohmann::json policy_to_json(const CorruptionPolicy& p) {
    return {{"name", p.name},
            {"m_min", p.m_min},
            {"max_rule", p.m_max.kind == MaxRule::Kind::Fixed ? "fixed" : "min_of_cap"},
            {"max_value", p.m_max.value},
            {"forbid_empty", p.forbid_empty}};
}

CorruptionPolicy policy_from_json(const nlohmann::json& j) {
    if (j.is_string()) return CorruptionPolicy::by_name(j.get<std::string>());
    CorruptionPolicy p;
    if (j.contains("name")) {
        const auto name = j.at("name").get<std::string>();
        if (name == "roc" || name == "cnndm") p = CorruptionPolicy::by_name(name);
        p.name = name;
    }
    p.m_min = j.value("m_min", p.m_min);
    if (j.contains("max_rule")) {
        const auto rule = j.at("max_rule").get<std::string>();
        const int value = j.value("max_value", p.m_max.value);
        if (rule == "fixed") {
            p.m_max = MaxRule::fixed(value);
        } else if (rule == "min_of_cap") {
            p.m_max = MaxRule::min_of_cap(value);
        } else {
            throw Error(ErrorCode::InvalidPolicy, "unknown max_rule '" + rule + "'");
        }
    }
    p.forbid_empty = j.value("forbid_empty", p.forbid_empty);
    return p;
}

struct TokenizedPair {
    std::vector<int> source;
    std::vector<int> decoder_in;
    std::vector<int> labels;
};

TokenizedPair tokenize_pair(const nn::Vocab& vocab, const std::pair<std::string, std::string>& pair,
                            const TrainConfig& config, int max_positions) {
    TokenizedPair t;
    t.source = vocab.encode(pair.first);
    const auto src_limit = static_cast<std::size_t>(std::max(1, std::min(config.max_source_tokens, max_positions)) - 1);
    if (t.source.size() > src_limit) t.source.resize(src_limit);
    t.source.push_back(nn::Vocab::kEos);
    std::vector<int> target = vocab.encode(pair.second);
    const auto tgt_limit = static_cast<std::size_t>(std::max(1, std::min(config.max_target_tokens, max_positions)) - 1);
    if (target.size() > tgt_limit) target.resize(tgt_limit);
    t.decoder_in.push_back(nn::Vocab::kBos);
    t.decoder_in.insert(t.decoder_in.end(), target.begin(), target.end());
    t.labels = target;
    t.labels.push_back(nn::Vocab::kEos);
    return t;
}

BackendManifest make_manifest(const TrainConfig& config, long total_steps, double final_loss) {
    BackendManifest m;
    m.kind = "tiny_seq2seq";
    m.role = config.role;
    m.markers = config.markers;
    m.extra = {{"train", config.to_json()}, {"total_steps", total_steps}, {"final_loss", final_loss}};
    return m;
}

}  // namespace

std::pair<std::string, std::string> build_training_pair(const CorruptedExample& example, TaskRole role,
                                                        const Markers& markers) {
    const std::string incomplete = render_story(Story{"", example.incomplete, "en"});
    const std::string masked = encode_masked(example.masked, markers.missing);
    const std::string original = render_story(example.original);
    switch (role) {
        case TaskRole::vnmpp: return {incomplete, masked};
        case TaskRole::sc: return {masked, original};
        case TaskRole::sc_v2: return {masked, encode_completion_target(example.targets, markers.completion)};
        case TaskRole::end_to_end: return {incomplete, original};
    }
    throw Error(ErrorCode::InvalidArgument, "unknown role");
}

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorCode::InvalidArgument, what);
    };
    require(initial_lr > 0.0 && std::isfinite(initial_lr), "initial_lr must be positive");
    require(epochs >= 0, "epochs must be >= 0");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(warmup_steps >= 0, "warmup_steps must be >= 0");
    require(clip_norm >= 0.0, "clip_norm must be >= 0 (0 disables clipping)");
    require(max_source_tokens >= 2 && max_target_tokens >= 1, "token limits too small");
    require(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0,
            "betas must lie in [0, 1)");
    require(optimizer.eps > 0.0, "eps must be positive");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"role", std::string(to_string(role))},
            {"base_checkpoint", base_checkpoint},
            {"model", model.to_json()},
            {"optimizer",
             {{"name", "adamw"},
              {"beta1", optimizer.beta1},
              {"beta2", optimizer.beta2},
              {"eps", optimizer.eps},
              {"weight_decay", optimizer.weight_decay}}},
            {"initial_lr", initial_lr},
            {"lr_schedule", "linear_to_zero"},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"warmup_steps", warmup_steps},
            {"clip_norm", clip_norm},
            {"policy", policy_to_json(policy)},
            {"seed", seed},
            {"max_source_tokens", max_source_tokens},
            {"max_target_tokens", max_target_tokens},
            {"markers", {{"missing", markers.missing}, {"completion", markers.completion}}}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    if (j.contains("role")) c.role = parse_role(j.at("role").get<std::string>());
    c.base_checkpoint = j.value("base_checkpoint", c.base_checkpoint);
    if (j.contains("model")) {
        nlohmann::json m = j.at("model");
        if (!m.contains("vocab_size")) m["vocab_size"] = 0;
        c.model = nn::ModelConfig::from_json(m);
    }
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
        c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
        c.optimizer.eps = o.value("eps", c.optimizer.eps);
        c.optimizer.weight_decay = o.value("weight_decay", c.optimizer.weight_decay);
    }
    c.initial_lr = j.value("initial_lr", c.initial_lr);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    if (j.contains("policy")) c.policy = policy_from_json(j.at("policy"));
    c.seed = j.value("seed", c.seed);
    c.max_source_tokens = j.value("max_source_tokens", c.max_source_tokens);
    c.max_target_tokens = j.value("max_target_tokens", c.max_target_tokens);
    if (j.contains("markers")) {
        c.markers.missing = j["markers"].value("missing", c.markers.missing);
        c.markers.completion = j["markers"].value("completion", c.markers.completion);
    }
    c.validate();
    return c;
}

TrainResult train(const Corpus& corpus, const TrainConfig& config, const std::filesystem::path& out_dir,
                  const StepCallback& on_step) {
    config.validate();
    if (corpus.split != Split::train) {
        throw Error(ErrorCode::InvalidArgument, "training needs the train split, got " + std::string(to_string(corpus.split)));
    }
    if (corpus.stories.empty()) throw Error(ErrorCode::EmptyCorpus, "training corpus is empty");

    nn::Vocab vocab;
    std::unique_ptr<nn::Seq2SeqTransformer> model;
    if (!config.base_checkpoint.empty()) {
        const auto dir = resolve_checkpoint(config.base_checkpoint);
        std::ifstream mf(dir / "manifest.json"), vf(dir / "vocab.json");
        if (!mf || !vf) throw Error(ErrorCode::BackendUnavailable, "cannot read base checkpoint " + dir.string());
        const auto manifest = nlohmann::json::parse(mf);
        vocab = nn::Vocab::from_json(nlohmann::json::parse(vf));
        model = std::make_unique<nn::Seq2SeqTransformer>(nn::ModelConfig::from_json(manifest.at("model")), config.seed);
        model->load_weights(dir / "weights.bin");
    } else {
        vocab.add_special(config.markers.missing);
        vocab.add_special(config.markers.completion);
        for (const auto& story : corpus.stories) vocab.build_from(story.sentences);
        nn::ModelConfig mc = config.model;
        mc.vocab_size = vocab.size();
        model = std::make_unique<nn::Seq2SeqTransformer>(mc, config.seed);
    }
    for (const auto& marker : {config.markers.missing, config.markers.completion}) {
        if (vocab.encode(marker).size() != 1 || vocab.encode(marker).front() == nn::Vocab::kUnk) {
            throw Error(ErrorCode::InvalidArgument, "marker '" + marker + "' is not an atomic vocabulary token");
        }
    }

    std::filesystem::create_directories(out_dir);
    std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
    const int max_pos = model->config().max_positions;
    const long n = static_cast<long>(corpus.stories.size());
    const long batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    TrainResult result;
    result.total_steps = batches_per_epoch * config.epochs;
    result.checkpoint = out_dir;

    nn::AdamW optimizer(model->parameters(), config.optimizer);
    optimizer.zero_grad();
    long step = 0;
    double last_loss = std::nan("");
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::size_t> order(corpus.stories.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle = Rng::derive(config.seed, {"shuffle", "epoch-" + std::to_string(epoch)});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        for (long b = 0; b < batches_per_epoch; ++b) {
            const long lo = b * config.batch_size;
            const long hi = std::min(n, lo + config.batch_size);
            const auto weight = static_cast<nn::Scalar>(1.0 / static_cast<double>(hi - lo));
            double batch_loss = 0.0;
            for (long k = lo; k < hi; ++k) {
                const Story& story = corpus.stories[order[static_cast<std::size_t>(k)]];
                Rng rng = corruption_stream(config.seed, Split::train, story.story_id, epoch);
                const auto example = sample_corruption(story, config.policy, rng);
                const auto pair = tokenize_pair(vocab, build_training_pair(example, config.role, config.markers),
                                                config, max_pos);
                const nn::Var loss = model->loss(pair.source, pair.decoder_in, pair.labels);
                batch_loss += static_cast<double>(loss.value()(0, 0));
                nn::backward(nn::scale(loss, weight));
            }
            batch_loss /= static_cast<double>(hi - lo);
            const double lr = nn::linear_schedule(config.initial_lr, step, result.total_steps, config.warmup_steps);
            TrainStep record{step, epoch, batch_loss, lr};
            if (!std::isfinite(batch_loss)) {
                save_tiny_checkpoint(out_dir / "divergence", make_manifest(config, result.total_steps, batch_loss),
                                     vocab, *model);
                std::ofstream dump(out_dir / "divergence" / "state.json");
                dump << nlohmann::json{{"step", step}, {"epoch", epoch}, {"lr", lr}, {"loss", "non-finite"}}.dump()
                     << '\n';
                throw Error(ErrorCode::DivergenceDetected,
                            "non-finite loss at step " + std::to_string(step) + "; state in " +
                                (out_dir / "divergence").string());
            }
            if (config.clip_norm > 0.0) nn::clip_grad_norm(model->parameters(), config.clip_norm);
            optimizer.step(lr);
            optimizer.zero_grad();
            log << nlohmann::json{{"step", step}, {"loss", batch_loss}, {"lr", lr}}.dump() << '\n';
            log.flush();
            result.log.push_back(record);
            if (on_step) on_step(record);
            last_loss = batch_loss;
            ++step;
        }
    }
    save_tiny_checkpoint(out_dir, make_manifest(config, result.total_steps, last_loss), vocab, *model);
    return result;
}

}  // namespace compass
