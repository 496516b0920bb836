#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "compass/corruption.hpp"
#include "compass/errors.hpp"
#include "compass/evaluation.hpp"
#include "compass/finetune.hpp"
#include "compass/pipeline.hpp"
#include "compass/service.hpp"
#include "compass/story.hpp"
#include "compass/synthetic.hpp"

namespace {

using namespace compass;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
}

// Pools and scorers from a service config, shared by evaluate and assist.
struct Loaded {
    PipelineConfig pipeline;
    Scorers scorers;
};

Loaded load_pipeline(const std::filesystem::path& config_path, std::optional<Approach> approach) {
    const ServiceConfig sc = load_service_config(config_path);
    Loaded out;
    out.pipeline.approach = approach.value_or(sc.approach);
    out.pipeline.params = sc.params;
    auto pool = [&](const char* name) -> std::shared_ptr<BackendPool> {
        if (!sc.backends.contains(name) || sc.backends[name].is_null()) return nullptr;
        const auto& desc = sc.backends[name];
        const int instances = desc.is_object() ? desc.value("instances", 1) : 1;
        std::vector<std::unique_ptr<Backend>> backends;
        for (int i = 0; i < instances; ++i) backends.push_back(backend_from_config(desc));
        return std::make_shared<BackendPool>(std::move(backends), sc.pool_timeout);
    };
    out.pipeline.vnmpp = pool("vnmpp");
    out.pipeline.sc = pool("sc");
    out.pipeline.e2e = pool("e2e");
    if (!sc.likeness.is_null()) out.scorers.likeness = likeness_scorer_from_config(sc.likeness);
    if (!sc.vad.is_null()) out.scorers.vad = vad_scorer_from_config(sc.vad);
    return out;
}

std::atomic<Service*> g_service{nullptr};

void on_signal(int) {
    if (Service* s = g_service.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compass: story gap completion workbench"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Normalize a corpus and split it 8:1:1");
    std::string in_path, format = "jsonl", out_dir, source;
    std::uint64_t seed = 0;
    ingest->add_option("--input", in_path, "Corpus file")->required();
    ingest->add_option("--format", format, "jsonl or roc_csv")->check(CLI::IsMember({"jsonl", "roc_csv"}));
    ingest->add_option("--out", out_dir, "Output directory")->required();
    ingest->add_option("--seed", seed, "Split seed");
    ingest->add_option("--source", source, "Source name");

    // corrupt
    auto* corrupt_cmd = app.add_subcommand("corrupt", "Freeze a corrupted dev/test split");
    std::string split_name = "test", policy_name = "roc", corpus_path, out_path;
    corrupt_cmd->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
    corrupt_cmd->add_option("--split", split_name, "dev or test")->check(CLI::IsMember({"dev", "test"}));
    corrupt_cmd->add_option("--policy", policy_name, "roc or cnndm");
    corrupt_cmd->add_option("--seed", seed, "Corruption seed");
    corrupt_cmd->add_option("--out", out_path, "Output JSONL; manifest goes next to it")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Fine-tune a tiny seq2seq checkpoint");
    std::string role_name = "vnmpp", train_config_path;
    train_cmd->add_option("--corpus", corpus_path, "Train corpus JSONL")->required();
    train_cmd->add_option("--role", role_name, "vnmpp, sc, sc_v2 or end_to_end");
    train_cmd->add_option("--policy", policy_name, "roc or cnndm");
    train_cmd->add_option("--config", train_config_path, "Train config JSON or YAML");
    train_cmd->add_option("--out", out_dir, "Checkpoint directory")->required();

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a frozen split");
    std::string service_config_path, approach_name, report_path;
    std::vector<std::string> adapter_specs;
    eval_cmd->add_option("--split", in_path, "Frozen split JSONL")->required();
    eval_cmd->add_option("--config", service_config_path, "Service config with backends")->required();
    eval_cmd->add_option("--approach", approach_name, "two_module, two_module_v2 or end_to_end");
    eval_cmd->add_option("--adapter", adapter_specs, "External scorer JSON description");
    eval_cmd->add_option("--report", report_path, "Report JSON path (stdout if omitted)");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    std::string host;
    int port = 0;
    serve_cmd->add_option("--config", service_config_path, "Service config")->required();
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port");

    // assist
    auto* assist_cmd = app.add_subcommand("assist", "Complete a story from a text file");
    std::string text_file;
    assist_cmd->add_option("--config", service_config_path, "Service config")->required();
    assist_cmd->add_option("--text-file", text_file, "Story text (stdin if omitted)");
    assist_cmd->add_option("--approach", approach_name, "two_module, two_module_v2 or end_to_end");

    // worker
    auto* worker_cmd = app.add_subcommand("worker", "Serve one backend over the worker protocol");
    std::string backend_spec;
    worker_cmd->add_option("--backend", backend_spec, "Checkpoint directory or inline JSON")->required();
    worker_cmd->add_option("--host", host, "Bind address");
    worker_cmd->add_option("--port", port, "Port")->required();

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write a templated five-sentence corpus");
    int count = 500;
    synth_cmd->add_option("--count", count, "Stories")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", seed, "Seed");
    synth_cmd->add_option("--split", split_name, "train, dev or test");
    synth_cmd->add_option("--out", out_path, "Output JSONL")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            Corpus all;
            if (format == "roc_csv") {
                std::ifstream in(in_path);
                if (!in) throw Error(ErrorCode::IoError, "cannot open " + in_path);
                all = parse_rocstories_csv(in, Split::train, source.empty() ? "rocstories" : source);
            } else {
                all = load_corpus(in_path, Split::train, source);
            }
            const SplitCorpora s = split_8_1_1(std::move(all.stories), seed, source);
            std::filesystem::create_directories(out_dir);
            save_corpus(s.train, std::filesystem::path(out_dir) / "train.jsonl");
            save_corpus(s.dev, std::filesystem::path(out_dir) / "dev.jsonl");
            save_corpus(s.test, std::filesystem::path(out_dir) / "test.jsonl");
            std::cout << "train " << s.train.stories.size() << " dev " << s.dev.stories.size() << " test "
                      << s.test.stories.size() << '\n';
        } else if (*corrupt_cmd) {
            const Corpus corpus = load_corpus(corpus_path, parse_split(split_name));
            const CorruptionPolicy policy = CorruptionPolicy::by_name(policy_name);
            const auto examples = make_static_split(corpus, policy, seed);
            save_corrupted_split(examples, out_path);
            write_file(std::filesystem::path(out_path).replace_extension(".manifest.json"),
                       manifest_to_json(make_manifest(policy, seed, corpus, examples.size())) + "\n");
            std::cout << "wrote " << examples.size() << " examples\n";
        } else if (*train_cmd) {
            TrainConfig config;
            if (!train_config_path.empty()) {
                const std::string text = read_file(train_config_path);
                config = TrainConfig::from_json(std::filesystem::path(train_config_path).extension() == ".json"
                                                    ? nlohmann::json::parse(text)
                                                    : yaml_to_json(text));
            }
            if (train_cmd->count("--role")) config.role = parse_role(role_name);
            if (train_cmd->count("--policy")) config.policy = CorruptionPolicy::by_name(policy_name);
            const Corpus corpus = load_corpus(corpus_path, Split::train);
            const TrainResult r = train(corpus, config, out_dir, [](const TrainStep& s) {
                std::cerr << "epoch " << s.epoch << " step " << s.step << " loss " << s.loss << " lr " << s.lr
                          << '\n';
            });
            std::cout << "checkpoint " << r.checkpoint.string() << " steps " << r.total_steps << '\n';
        } else if (*eval_cmd) {
            std::optional<Approach> approach;
            if (!approach_name.empty()) approach = parse_approach(approach_name);
            const Loaded loaded = load_pipeline(service_config_path, approach);
            std::vector<std::unique_ptr<ExternalScorer>> owned;
            std::vector<ExternalScorer*> adapters;
            for (const auto& spec : adapter_specs) {
                owned.push_back(external_scorer_from_config(nlohmann::json::parse(spec)));
                adapters.push_back(owned.back().get());
            }
            const auto examples = load_corrupted_split(in_path);
            const MetricReport report =
                evaluate_run(examples, loaded.pipeline, std::filesystem::path(in_path).stem().string(), adapters);
            const std::string text = report.to_json().dump(2) + "\n";
            if (report_path.empty()) {
                std::cout << text;
            } else {
                write_file(report_path, text);
            }
        } else if (*serve_cmd) {
            Service service(load_service_config(service_config_path));
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            const std::string h = host.empty() ? service.settings().host : host;
            const int p = port ? port : service.settings().port;
            std::cerr << "listening on " << h << ":" << p << '\n';
            service.serve(h, p);
            g_service = nullptr;
        } else if (*assist_cmd) {
            std::optional<Approach> approach;
            if (!approach_name.empty()) approach = parse_approach(approach_name);
            const Loaded loaded = load_pipeline(service_config_path, approach);
            std::string text;
            if (text_file.empty()) {
                std::stringstream ss;
                ss << std::cin.rdbuf();
                text = ss.str();
            } else {
                text = read_file(text_file);
            }
            const AssistResult result = assist(text, loaded.pipeline, loaded.scorers);
            std::cout << assist_result_to_json(result, loaded.pipeline.approach).dump(2) << '\n';
        } else if (*worker_cmd) {
            std::unique_ptr<Backend> backend = std::filesystem::is_directory(backend_spec)
                                                   ? load_backend(backend_spec)
                                                   : backend_from_config(nlohmann::json::parse(backend_spec));
            std::cerr << "worker " << backend->manifest().kind << " on port " << port << '\n';
            run_worker(std::move(backend), host.empty() ? "127.0.0.1" : host, port);
        } else if (*synth_cmd) {
            save_corpus(make_templated_corpus(count, seed, parse_split(split_name)), out_path);
            std::cout << "wrote " << count << " stories\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
