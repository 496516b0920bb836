#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "compass/errors.hpp"
#include "compass/token_protocol.hpp"

namespace compass {

enum class TaskRole { vnmpp, sc, sc_v2, end_to_end };

std::string_view to_string(TaskRole role);
// Accepts "e2e" as an alias for end_to_end.
TaskRole parse_role(std::string_view name);

struct GenerationParams {
    int beam_size = 4;
    int num_candidates = 3;
    int max_length = 256;  // tokens
    int min_length = 0;
    double length_penalty = 1.0;
    int max_input_length = 512;
    bool truncate_input = true;

    // Throws Error(InvalidArgument) when an invariant is violated.
    void validate() const;

    nlohmann::json to_json() const;
    // Applies overrides present in j on top of *this.
    GenerationParams with_overrides(const nlohmann::json& j) const;
    bool operator==(const GenerationParams&) const = default;
};

struct Candidate {
    std::string text;
    double score = 0.0;  // log-probability or surrogate; higher is better

    bool operator==(const Candidate&) const = default;
};

struct GenerationResult {
    std::vector<Candidate> candidates;
    Diagnostics diagnostics;
};

struct BackendManifest {
    std::string kind;
    std::string checkpoint;
    TaskRole role = TaskRole::vnmpp;
    Markers markers;
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
    static BackendManifest from_json(const nlohmann::json& j);
};

// A text-to-text generator. Instances are single-threaded: callers must
// serialize calls per instance (see BackendPool).
class Backend {
public:
    virtual ~Backend() = default;
    virtual const BackendManifest& manifest() const = 0;
    virtual GenerationResult generate(std::string_view input, const GenerationParams& params) = 0;
    // No-op availability check.
    virtual bool probe() { return true; }
};

// Drops duplicate texts (keeping the best score), sorts by score
// descending (ties by text) and keeps the first num_candidates.
std::vector<Candidate> finalize_candidates(std::vector<Candidate> candidates, int num_candidates);

struct OracleSpec {
    enum class Fallback { SpecMiss, Identity };

    // Keyed by whitespace-normalized input.
    std::map<std::string, std::vector<Candidate>> table;
    // Consulted after the table; returns nullopt when not applicable.
    std::function<std::optional<std::vector<Candidate>>(std::string_view)> rule;
    Fallback fallback = Fallback::SpecMiss;
    BackendManifest manifest{"oracle", "oracle", TaskRole::vnmpp, {}, nlohmann::json::object()};

    void add(std::string_view input, std::string output, double score = 0.0);
};

std::unique_ptr<Backend> make_oracle_backend(OracleSpec spec);

// Echoes its input (a complete-story oracle for any role).
std::unique_ptr<Backend> make_identity_backend(TaskRole role, Markers markers = {});

// Gap-detection baseline: always predicts one gap at the end.
std::unique_ptr<Backend> make_always_add_last_backend(Markers markers = {});

// Gap-detection baseline: one gap at a position hashed from the input.
std::unique_ptr<Backend> make_random_mpp_backend(std::uint64_t seed, Markers markers = {});

// Speaks the worker wire format: POST {url}/v1/generate, GET {url}/v1/health.
std::unique_ptr<Backend> make_remote_backend(const std::string& url, BackendManifest manifest,
                                             std::chrono::milliseconds timeout = std::chrono::seconds(30));

// Resolves relative checkpoint ids against COMPASS_MODEL_DIR.
std::filesystem::path resolve_checkpoint(const std::string& id);

// Loads a checkpoint directory by its manifest.json "kind".
std::unique_ptr<Backend> load_backend(const std::filesystem::path& dir);

// Loads a backend from an inline JSON description: either {"path": dir}
// or {"kind": ..., ...} for built-in kinds.
std::unique_ptr<Backend> backend_from_config(const nlohmann::json& config);

// Bounded pool of backend instances; acquire() blocks up to the timeout.
class BackendPool {
public:
    class Lease {
    public:
        Lease(BackendPool* pool, std::unique_ptr<Backend> backend) : pool_(pool), backend_(std::move(backend)) {}
        Lease(Lease&&) noexcept = default;
        Lease& operator=(Lease&&) = delete;
        ~Lease();

        Backend& operator*() const { return *backend_; }
        Backend* operator->() const { return backend_.get(); }

    private:
        BackendPool* pool_;
        std::unique_ptr<Backend> backend_;
    };

    BackendPool(std::vector<std::unique_ptr<Backend>> instances,
                std::chrono::milliseconds timeout = std::chrono::seconds(30));

    static std::shared_ptr<BackendPool> single(std::unique_ptr<Backend> backend);

    // Throws Error(PoolExhausted) on timeout.
    Lease acquire();
    const BackendManifest& manifest() const { return manifest_; }
    std::size_t capacity() const { return capacity_; }
    bool probe();

private:
    void release(std::unique_ptr<Backend> backend);

    BackendManifest manifest_;
    std::chrono::milliseconds timeout_;
    std::size_t capacity_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::vector<std::unique_ptr<Backend>> idle_;
};

}  // namespace compass
