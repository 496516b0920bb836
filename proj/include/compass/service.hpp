#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compass/backend.hpp"
#include "compass/pipeline.hpp"

namespace compass {

inline constexpr const char* kApiVersion = "1.0";
inline constexpr const char* kTimingHeader = "X-Compass-Timing-Ms";

struct ServiceConfig {
    Approach approach = Approach::two_module_v2;
    // Backend descriptions accepted by backend_from_config, keyed by
    // "vnmpp", "sc", "e2e". Each may carry "instances" (pool size).
    nlohmann::json backends = nlohmann::json::object();
    GenerationParams params;
    nlohmann::json likeness;  // null disables story-likeness
    nlohmann::json vad;       // null disables Emotional Flow
    std::string host = "127.0.0.1";
    int port = 8008;
    std::string static_dir;
    std::chrono::milliseconds pool_timeout{30000};
    // Timing-only request logs; needs COMPASS_LOG_OPT_IN and a per-request
    // "log": true.
    bool log_opt_in = false;
    std::string log_path;

    static ServiceConfig from_json(const nlohmann::json& j);
};

// Reads JSON or YAML (by extension, falling back to content sniffing),
// then applies COMPASS_LOG_OPT_IN. COMPASS_MODEL_DIR is consumed by
// checkpoint resolution.
ServiceConfig load_service_config(const std::filesystem::path& path);
nlohmann::json yaml_to_json(const std::string& text);

struct HttpResponse {
    int status = 200;
    nlohmann::ordered_json body;
    std::map<std::string, std::string> headers;
};

// Request handling independent of the transport, so the contract can be
// exercised without sockets.
class Service {
public:
    // Loads every configured backend and scorer. Backends that fail to
    // load are reported by /health; throws Error(BackendUnavailable) when
    // none load.
    explicit Service(ServiceConfig config);
    // Prebuilt pools (tests, embedding).
    Service(ServiceConfig config, std::map<std::string, std::shared_ptr<BackendPool>> pools, Scorers scorers);

    HttpResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

    HttpResponse assist(const nlohmann::json& request) const;
    HttpResponse predict_missing(const nlohmann::json& request) const;
    HttpResponse complete(const nlohmann::json& request) const;
    HttpResponse health() const;
    HttpResponse config() const;
    static nlohmann::ordered_json schema();

    // Blocks serving HTTP until stop() is called from another thread.
    void serve(const std::string& host, int port);
    // Binds to an ephemeral port and returns it; serving continues on a
    // background thread until stop().
    int serve_background(const std::string& host = "127.0.0.1");
    void stop();
    ~Service();

    const ServiceConfig& settings() const { return config_; }

private:
    PipelineConfig pipeline_for(Approach approach, const GenerationParams& params) const;
    void log_timing(const nlohmann::json& request, const std::string& endpoint, double ms,
                    const AssistResult* result) const;

    ServiceConfig config_;
    std::map<std::string, std::shared_ptr<BackendPool>> pools_;
    std::map<std::string, std::string> load_errors_;
    Scorers scorers_;
    mutable std::mutex log_mutex_;
    struct Server;
    std::unique_ptr<Server> server_;
};

nlohmann::ordered_json assist_result_to_json(const AssistResult& result, Approach approach);

// Worker wire format for one backend: POST /v1/generate {input, params}
// -> {candidates: [{text, score}], diagnostics}; GET /v1/health;
// GET /v1/manifest.
HttpResponse worker_handle(Backend& backend, std::mutex& mutex, const std::string& method, const std::string& path,
                           const std::string& body);
void run_worker(std::unique_ptr<Backend> backend, const std::string& host, int port);

}  // namespace compass
