#include "compass/backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <unordered_map>

// Eigen must precede httplib: <resolv.h> defines a _res macro.
#include "compass/tiny_backend.hpp"
#include "compass/synthetic.hpp"

#include <httplib.h>

#include "compass/rng.hpp"

namespace compass {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, message);
}

class OracleBackend final : public Backend {
public:
    explicit OracleBackend(OracleSpec spec) : spec_(std::move(spec)) {}

    const BackendManifest& manifest() const override { return spec_.manifest; }

    GenerationResult generate(std::string_view input, const GenerationParams& params) override {
        params.validate();
        const std::string key = normalize_whitespace(input);
        GenerationResult result;
        if (auto it = spec_.table.find(key); it != spec_.table.end()) {
            result.candidates = finalize_candidates(it->second, params.num_candidates);
            return result;
        }
        if (spec_.rule) {
            if (auto out = spec_.rule(key)) {
                result.candidates = finalize_candidates(std::move(*out), params.num_candidates);
                return result;
            }
        }
        if (spec_.fallback == OracleSpec::Fallback::Identity) {
            result.candidates = {{key, 0.0}};
            result.diagnostics.push_back({"OracleFallback", "input not covered; echoed unchanged"});
            return result;
        }
        throw Error(ErrorCode::SpecMiss, "oracle has no entry for input: " + key.substr(0, 120));
    }

private:
    OracleSpec spec_;
};

class FunctionBackend final : public Backend {
public:
    FunctionBackend(BackendManifest manifest, std::function<std::string(std::string_view)> fn)
        : manifest_(std::move(manifest)), fn_(std::move(fn)) {}

    const BackendManifest& manifest() const override { return manifest_; }

    GenerationResult generate(std::string_view input, const GenerationParams& params) override {
        params.validate();
        return {{{fn_(input), 0.0}}, {}};
    }

private:
    BackendManifest manifest_;
    std::function<std::string(std::string_view)> fn_;
};

class RemoteBackend final : public Backend {
public:
    RemoteBackend(std::string url, BackendManifest manifest, std::chrono::milliseconds timeout)
        : url_(std::move(url)), manifest_(std::move(manifest)), timeout_(timeout) {}

    const BackendManifest& manifest() const override { return manifest_; }

    GenerationResult generate(std::string_view input, const GenerationParams& params) override {
        params.validate();
        auto client = make_client();
        const nlohmann::json body = {{"input", std::string(input)}, {"params", params.to_json()}};
        auto res = client.Post("/v1/generate", body.dump(), "application/json");
        if (!res) throw Error(ErrorCode::BackendUnavailable, "no response from " + url_);
        if (res->status != 200) {
            throw Error(ErrorCode::BackendUnavailable,
                        "worker " + url_ + " returned HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        GenerationResult result;
        try {
            const auto j = nlohmann::json::parse(res->body);
            for (const auto& c : j.at("candidates")) {
                result.candidates.push_back({c.at("text").get<std::string>(), c.at("score").get<double>()});
            }
            for (const auto& d : j.value("diagnostics", nlohmann::json::array())) {
                result.diagnostics.push_back({d.at("kind").get<std::string>(), d.at("message").get<std::string>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::BackendUnavailable, std::string("malformed worker response: ") + e.what());
        }
        result.candidates = finalize_candidates(std::move(result.candidates), params.num_candidates);
        return result;
    }

    bool probe() override {
        auto client = make_client();
        auto res = client.Get("/v1/health");
        return res && res->status == 200;
    }

private:
    httplib::Client make_client() const {
        httplib::Client client(url_);
        const auto secs = timeout_.count() / 1000;
        const auto usecs = (timeout_.count() % 1000) * 1000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        return client;
    }

    std::string url_;
    BackendManifest manifest_;
    std::chrono::milliseconds timeout_;
};

void read_oracle_table(const std::filesystem::path& path, OracleSpec& spec) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::BackendUnavailable, "cannot open oracle table " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (normalize_whitespace(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto input = j.at("input").get<std::string>();
            for (const auto& out : j.at("outputs")) {
                if (out.is_string()) {
                    spec.add(input, out.get<std::string>());
                } else {
                    spec.add(input, out.at("text").get<std::string>(), out.value("score", 0.0));
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, e.what());
        }
    }
}

}  // namespace

std::string_view to_string(TaskRole role) {
    switch (role) {
        case TaskRole::vnmpp: return "vnmpp";
        case TaskRole::sc: return "sc";
        case TaskRole::sc_v2: return "sc_v2";
        case TaskRole::end_to_end: return "end_to_end";
    }
    return "vnmpp";
}

TaskRole parse_role(std::string_view name) {
    if (name == "vnmpp") return TaskRole::vnmpp;
    if (name == "sc") return TaskRole::sc;
    if (name == "sc_v2") return TaskRole::sc_v2;
    if (name == "end_to_end" || name == "e2e") return TaskRole::end_to_end;
    throw Error(ErrorCode::InvalidArgument, "unknown task role '" + std::string(name) + "'");
}

void GenerationParams::validate() const {
    require(beam_size >= 1, "beam_size must be >= 1");
    require(num_candidates >= 1 && num_candidates <= beam_size, "num_candidates must be in [1, beam_size]");
    require(max_length >= 1, "max_length must be >= 1");
    require(min_length >= 0 && min_length <= max_length, "min_length must be in [0, max_length]");
    require(max_input_length >= 1, "max_input_length must be >= 1");
}

nlohmann::json GenerationParams::to_json() const {
    return {{"beam_size", beam_size},           {"num_candidates", num_candidates},
            {"max_length", max_length},         {"min_length", min_length},
            {"length_penalty", length_penalty}, {"max_input_length", max_input_length},
            {"truncate_input", truncate_input}};
}

GenerationParams GenerationParams::with_overrides(const nlohmann::json& j) const {
    GenerationParams p = *this;
    auto take_int = [&](const char* key, int& field) {
        if (!j.contains(key) || j[key].is_null()) return;
        require(j[key].is_number_integer(), std::string(key) + " must be an integer");
        field = j[key].get<int>();
    };
    take_int("beam_size", p.beam_size);
    take_int("num_candidates", p.num_candidates);
    take_int("max_length", p.max_length);
    take_int("min_length", p.min_length);
    take_int("max_input_length", p.max_input_length);
    if (j.contains("length_penalty") && !j["length_penalty"].is_null()) {
        require(j["length_penalty"].is_number(), "length_penalty must be a number");
        p.length_penalty = j["length_penalty"].get<double>();
    }
    if (j.contains("truncate_input") && !j["truncate_input"].is_null()) {
        require(j["truncate_input"].is_boolean(), "truncate_input must be a boolean");
        p.truncate_input = j["truncate_input"].get<bool>();
    }
    return p;
}

nlohmann::json BackendManifest::to_json() const {
    nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
    j["kind"] = kind;
    j["checkpoint"] = checkpoint;
    j["role"] = std::string(to_string(role));
    j["markers"] = {{"missing", markers.missing}, {"completion", markers.completion}};
    return j;
}

BackendManifest BackendManifest::from_json(const nlohmann::json& j) {
    BackendManifest m;
    m.kind = j.at("kind").get<std::string>();
    m.checkpoint = j.value("checkpoint", std::string{});
    m.role = parse_role(j.value("role", std::string("vnmpp")));
    if (j.contains("markers")) {
        m.markers.missing = j["markers"].value("missing", m.markers.missing);
        m.markers.completion = j["markers"].value("completion", m.markers.completion);
    }
    m.extra = j;
    for (const char* k : {"kind", "checkpoint", "role", "markers"}) m.extra.erase(k);
    return m;
}

std::vector<Candidate> finalize_candidates(std::vector<Candidate> candidates, int num_candidates) {
    std::unordered_map<std::string, std::size_t> best;
    std::vector<Candidate> unique;
    for (auto& c : candidates) {
        auto it = best.find(c.text);
        if (it == best.end()) {
            best.emplace(c.text, unique.size());
            unique.push_back(std::move(c));
        } else if (c.score > unique[it->second].score) {
            unique[it->second].score = c.score;
        }
    }
    std::stable_sort(unique.begin(), unique.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.text < b.text;
    });
    if (num_candidates >= 0 && unique.size() > static_cast<std::size_t>(num_candidates)) {
        unique.resize(static_cast<std::size_t>(num_candidates));
    }
    return unique;
}

void OracleSpec::add(std::string_view input, std::string output, double score) {
    table[normalize_whitespace(input)].push_back({std::move(output), score});
}

std::unique_ptr<Backend> make_oracle_backend(OracleSpec spec) {
    return std::make_unique<OracleBackend>(std::move(spec));
}

std::unique_ptr<Backend> make_identity_backend(TaskRole role, Markers markers) {
    BackendManifest m{"identity", "identity", role, std::move(markers), nlohmann::json::object()};
    return std::make_unique<FunctionBackend>(std::move(m),
                                             [](std::string_view in) { return normalize_whitespace(in); });
}

std::unique_ptr<Backend> make_always_add_last_backend(Markers markers) {
    BackendManifest m{"always_add_last", "always_add_last", TaskRole::vnmpp, markers, nlohmann::json::object()};
    return std::make_unique<FunctionBackend>(std::move(m), [marker = markers.missing](std::string_view in) {
        std::string text = normalize_whitespace(in);
        return text.empty() ? marker : text + " " + marker;
    });
}

std::unique_ptr<Backend> make_random_mpp_backend(std::uint64_t seed, Markers markers) {
    BackendManifest m{"random_mpp", "random_mpp", TaskRole::vnmpp, markers, {{"seed", seed}}};
    return std::make_unique<FunctionBackend>(std::move(m), [seed, marker = markers.missing](std::string_view in) {
        const auto sentences = split_sentences(in);
        Rng rng = Rng::derive(seed, {"random-mpp", normalize_whitespace(in)});
        const int pos = static_cast<int>(rng.below(sentences.size() + 1));
        return encode_masked(masked_from_insertions(sentences, {pos}), marker);
    });
}

std::unique_ptr<Backend> make_remote_backend(const std::string& url, BackendManifest manifest,
                                             std::chrono::milliseconds timeout) {
    return std::make_unique<RemoteBackend>(url, std::move(manifest), timeout);
}

std::filesystem::path resolve_checkpoint(const std::string& id) {
    std::filesystem::path p(id);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("COMPASS_MODEL_DIR"); root && *root) return std::filesystem::path(root) / p;
    return p;
}

std::unique_ptr<Backend> load_backend(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorCode::BackendUnavailable, "missing checkpoint manifest " + manifest_path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BackendUnavailable, "bad manifest " + manifest_path.string() + ": " + e.what());
    }
    BackendManifest manifest = BackendManifest::from_json(j);
    if (manifest.checkpoint.empty()) manifest.checkpoint = dir.string();
    const std::string& kind = manifest.kind;
    if (kind == "tiny_seq2seq") return load_tiny_backend(dir);
    if (kind == "oracle_table") {
        OracleSpec spec;
        spec.manifest = manifest;
        spec.fallback = manifest.extra.value("fallback", std::string("spec_miss")) == "identity"
                            ? OracleSpec::Fallback::Identity
                            : OracleSpec::Fallback::SpecMiss;
        read_oracle_table(dir / manifest.extra.value("table", std::string("table.jsonl")), spec);
        return make_oracle_backend(std::move(spec));
    }
    if (kind == "remote") {
        return make_remote_backend(manifest.extra.at("url").get<std::string>(), manifest,
                                   std::chrono::milliseconds(manifest.extra.value("timeout_ms", 30000)));
    }
    if (kind == "identity") return make_identity_backend(manifest.role, manifest.markers);
    if (kind == "always_add_last") return make_always_add_last_backend(manifest.markers);
    if (kind == "random_mpp") return make_random_mpp_backend(manifest.extra.value("seed", 0ULL), manifest.markers);
    throw Error(ErrorCode::BackendUnavailable, "unknown backend kind '" + kind + "'");
}

std::unique_ptr<Backend> backend_from_config(const nlohmann::json& config) {
    if (config.is_string()) return load_backend(resolve_checkpoint(config.get<std::string>()));
    if (config.contains("path")) return load_backend(resolve_checkpoint(config.at("path").get<std::string>()));
    const std::string kind = config.at("kind").get<std::string>();
    Markers markers;
    if (config.contains("markers")) {
        markers.missing = config["markers"].value("missing", markers.missing);
        markers.completion = config["markers"].value("completion", markers.completion);
    }
    const TaskRole role = parse_role(config.value("role", std::string("vnmpp")));
    if (kind == "identity") return make_identity_backend(role, markers);
    if (kind == "always_add_last") return make_always_add_last_backend(markers);
    if (kind == "template") return make_template_backend(role, markers);
    if (kind == "random_mpp") return make_random_mpp_backend(config.value("seed", 0ULL), markers);
    if (kind == "remote") {
        BackendManifest m{"remote", config.at("url").get<std::string>(), role, markers, nlohmann::json::object()};
        return make_remote_backend(config.at("url").get<std::string>(), m,
                                   std::chrono::milliseconds(config.value("timeout_ms", 30000)));
    }
    throw Error(ErrorCode::BackendUnavailable, "unknown inline backend kind '" + kind + "'");
}

BackendPool::Lease::~Lease() {
    if (pool_ && backend_) pool_->release(std::move(backend_));
}

BackendPool::BackendPool(std::vector<std::unique_ptr<Backend>> instances, std::chrono::milliseconds timeout)
    : timeout_(timeout), capacity_(instances.size()), idle_(std::move(instances)) {
    if (idle_.empty()) throw Error(ErrorCode::InvalidArgument, "backend pool needs at least one instance");
    manifest_ = idle_.front()->manifest();
}

std::shared_ptr<BackendPool> BackendPool::single(std::unique_ptr<Backend> backend) {
    std::vector<std::unique_ptr<Backend>> v;
    v.push_back(std::move(backend));
    return std::make_shared<BackendPool>(std::move(v));
}

BackendPool::Lease BackendPool::acquire() {
    std::unique_lock lock(mutex_);
    if (!cv_.wait_for(lock, timeout_, [this] { return !idle_.empty(); })) {
        throw Error(ErrorCode::PoolExhausted, "no backend instance free within " + std::to_string(timeout_.count()) + " ms");
    }
    auto backend = std::move(idle_.back());
    idle_.pop_back();
    return Lease(this, std::move(backend));
}

void BackendPool::release(std::unique_ptr<Backend> backend) {
    {
        std::lock_guard lock(mutex_);
        idle_.push_back(std::move(backend));
    }
    cv_.notify_one();
}

bool BackendPool::probe() {
    try {
        auto lease = acquire();
        return lease->probe();
    } catch (const Error&) {
        return false;
    }
}

}  // namespace compass
