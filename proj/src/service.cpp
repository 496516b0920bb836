#include "compass/service.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "compass/errors.hpp"

#include <httplib.h>

namespace compass {

namespace {

using ojson = nlohmann::ordered_json;

HttpResponse error_response(int status, const std::string& code, const std::string& message) {
    HttpResponse r;
    r.status = status;
    r.body = {{"error", {{"code", code}, {"message", message}}}};
    return r;
}

int status_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::EmptyInput: return 422;
        case ErrorCode::InputTooLong: return 422;
        case ErrorCode::BackendUnavailable:
        case ErrorCode::PoolExhausted: return 503;
        case ErrorCode::InvalidArgument:
        case ErrorCode::IndexOutOfRange:
        case ErrorCode::DuplicateIndex:
        case ErrorCode::MarkerCollision:
        case ErrorCode::ParseError: return 400;
        default: return 500;
    }
}

HttpResponse from_error(const Error& e) { return error_response(status_for(e), std::string(to_string(e.code())), e.what()); }

bool truthy(const char* v) {
    if (!v) return false;
    const std::string s(v);
    return s == "1" || s == "true" || s == "yes" || s == "on";
}

ojson candidates_json(const std::vector<Candidate>& list) {
    ojson out = ojson::array();
    for (const auto& c : list) out.push_back({{"text", c.text}, {"score", c.score}});
    return out;
}

ojson diagnostics_json(const Diagnostics& diags) {
    ojson out = ojson::array();
    for (const auto& d : diags) out.push_back({{"kind", d.kind}, {"message", d.message}});
    return out;
}

ojson flow_json(const std::optional<std::vector<VAPoint>>& flow) {
    if (!flow) return nullptr;
    ojson out = ojson::array();
    for (const auto& p : *flow) out.push_back({{"i", p.sentence_index}, {"v", p.valence}, {"a", p.arousal}});
    return out;
}

// Fails with a 400 response when the request carries a key outside allowed
// or a key of the wrong JSON type.
std::optional<HttpResponse> check_shape(const nlohmann::json& req, const std::map<std::string, std::string>& allowed) {
    if (!req.is_object()) return error_response(400, "SchemaViolation", "request body must be a JSON object");
    for (const auto& [key, value] : req.items()) {
        const auto it = allowed.find(key);
        if (it == allowed.end()) return error_response(400, "SchemaViolation", "unknown field '" + key + "'");
        const std::string& type = it->second;
        const bool ok = (type == "string" && value.is_string()) || (type == "integer" && value.is_number_integer()) ||
                        (type == "number" && value.is_number()) || (type == "boolean" && value.is_boolean()) ||
                        (type == "array" && value.is_array()) || value.is_null();
        if (!ok) return error_response(400, "SchemaViolation", "field '" + key + "' must be " + type);
    }
    return std::nullopt;
}

const std::map<std::string, std::string>& param_fields() {
    static const std::map<std::string, std::string> f = {{"beam_size", "integer"},      {"num_candidates", "integer"},
                                                         {"max_length", "integer"},     {"min_length", "integer"},
                                                         {"length_penalty", "number"}};
    return f;
}

std::map<std::string, std::string> with_params(std::map<std::string, std::string> fields) {
    fields.insert(param_fields().begin(), param_fields().end());
    return fields;
}

AssistOptions options_from(const nlohmann::json& req) {
    AssistOptions o;
    if (req.contains("include_flow") && req["include_flow"].is_boolean()) o.include_flow = req["include_flow"].get<bool>();
    if (req.contains("include_likeness") && req["include_likeness"].is_boolean()) {
        o.include_likeness = req["include_likeness"].get<bool>();
    }
    return o;
}

nlohmann::json yaml_node_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined: return nullptr;
        case YAML::NodeType::Sequence: {
            auto out = nlohmann::json::array();
            for (const auto& child : node) out.push_back(yaml_node_to_json(child));
            return out;
        }
        case YAML::NodeType::Map: {
            auto out = nlohmann::json::object();
            for (const auto& kv : node) out[kv.first.as<std::string>()] = yaml_node_to_json(kv.second);
            return out;
        }
        case YAML::NodeType::Scalar: {
            const std::string s = node.Scalar();
            if (node.Tag() == "!") return s;  // quoted
            if (s == "true" || s == "True" || s == "yes") return true;
            if (s == "false" || s == "False" || s == "no") return false;
            if (s == "null" || s == "~") return nullptr;
            try {
                std::size_t used = 0;
                const long long i = std::stoll(s, &used);
                if (used == s.size()) return i;
                const double d = std::stod(s, &used);
                if (used == s.size()) return d;
            } catch (const std::exception&) {
            }
            return s;
        }
    }
    return nullptr;
}

}  // namespace

nlohmann::json yaml_to_json(const std::string& text) {
    try {
        return yaml_node_to_json(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::ParseError, std::string("invalid YAML: ") + e.what());
    }
}

ServiceConfig ServiceConfig::from_json(const nlohmann::json& j) {
    ServiceConfig c;
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "service config must be an object");
    if (j.contains("approach")) c.approach = parse_approach(j.at("approach").get<std::string>());
    if (j.contains("backends")) c.backends = j.at("backends");
    if (j.contains("params")) c.params = c.params.with_overrides(j.at("params"));
    c.params.validate();
    if (j.contains("scorers")) {
        const auto& s = j.at("scorers");
        c.likeness = s.value("likeness", nlohmann::json());
        c.vad = s.value("vad", nlohmann::json());
    }
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.static_dir = j.value("static_dir", c.static_dir);
    c.pool_timeout = std::chrono::milliseconds(j.value("pool_timeout_ms", static_cast<long>(c.pool_timeout.count())));
    c.log_opt_in = j.value("log_opt_in", c.log_opt_in);
    c.log_path = j.value("log_path", c.log_path);
    return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    nlohmann::json j;
    const auto ext = path.extension().string();
    if (ext == ".json") {
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, std::string("invalid JSON config: ") + e.what());
        }
    } else {
        j = yaml_to_json(text);  // YAML is a superset of JSON
    }
    ServiceConfig c = ServiceConfig::from_json(j);
    if (truthy(std::getenv("COMPASS_LOG_OPT_IN"))) c.log_opt_in = true;
    return c;
}

ojson assist_result_to_json(const AssistResult& result, Approach approach) {
    ojson j;
    j["approach"] = std::string(to_string(approach));
    j["sentences"] = result.input_story.sentences;
    j["gap_positions"] = result.gap_positions;
    j["insert_before"] = result.insert_before;
    ojson per_gap = ojson::array();
    for (const auto& list : result.candidates_per_gap) per_gap.push_back(candidates_json(list));
    j["candidates_per_gap"] = per_gap;
    j["best_completion"] = result.best_completion.sentences;
    j["best_completion_text"] = render_story(result.best_completion);
    j["story_candidates"] = candidates_json(result.story_candidates);
    if (result.story_likeness) {
        j["story_likeness"] = *result.story_likeness;
        j["story_like"] = is_story_like(*result.story_likeness);
    } else {
        j["story_likeness"] = nullptr;
        j["story_like"] = nullptr;
    }
    j["flow_before"] = flow_json(result.flow_before);
    j["flow_after"] = flow_json(result.flow_after);
    j["diagnostics"] = diagnostics_json(result.diagnostics);
    return j;
}

struct Service::Server {
    httplib::Server http;
    std::thread thread;
};

Service::Service(ServiceConfig config) : config_(std::move(config)) {
    for (const char* name : {"vnmpp", "sc", "e2e"}) {
        if (!config_.backends.contains(name) || config_.backends[name].is_null()) continue;
        const auto& desc = config_.backends[name];
        try {
            const int instances = desc.is_object() ? desc.value("instances", 1) : 1;
            if (instances < 1) throw Error(ErrorCode::InvalidArgument, "instances must be >= 1");
            std::vector<std::unique_ptr<Backend>> backends;
            for (int i = 0; i < instances; ++i) backends.push_back(backend_from_config(desc));
            pools_[name] = std::make_shared<BackendPool>(std::move(backends), config_.pool_timeout);
        } catch (const std::exception& e) {
            load_errors_[name] = e.what();
        }
    }
    if (pools_.empty()) {
        std::string why;
        for (const auto& [k, v] : load_errors_) why += " " + k + ": " + v + ";";
        throw Error(ErrorCode::BackendUnavailable, "no backend could be loaded;" + why);
    }
    try {
        if (!config_.likeness.is_null()) scorers_.likeness = likeness_scorer_from_config(config_.likeness);
    } catch (const std::exception& e) {
        load_errors_["likeness"] = e.what();
    }
    try {
        if (!config_.vad.is_null()) scorers_.vad = vad_scorer_from_config(config_.vad);
    } catch (const std::exception& e) {
        load_errors_["vad"] = e.what();
    }
}

Service::Service(ServiceConfig config, std::map<std::string, std::shared_ptr<BackendPool>> pools, Scorers scorers)
    : config_(std::move(config)), pools_(std::move(pools)), scorers_(std::move(scorers)) {}

Service::~Service() { stop(); }

PipelineConfig Service::pipeline_for(Approach approach, const GenerationParams& params) const {
    PipelineConfig p;
    p.approach = approach;
    auto get = [&](const char* name) -> std::shared_ptr<BackendPool> {
        const auto it = pools_.find(name);
        return it == pools_.end() ? nullptr : it->second;
    };
    p.vnmpp = get("vnmpp");
    p.sc = get("sc");
    p.e2e = get("e2e");
    p.params = params;
    return p;
}

void Service::log_timing(const nlohmann::json& request, const std::string& endpoint, double ms,
                         const AssistResult* result) const {
    if (!config_.log_opt_in || !request.is_object() || !request.value("log", false)) return;
    // Timing and shape only; user text never leaves the request.
    nlohmann::json line{{"endpoint", endpoint}, {"timing_ms", ms}};
    if (result) {
        line["sentences"] = result->input_story.sentences.size();
        line["gaps"] = result->gap_positions.size();
    }
    std::lock_guard lock(log_mutex_);
    if (config_.log_path.empty()) {
        std::clog << line.dump() << '\n';
    } else {
        std::ofstream(config_.log_path, std::ios::app) << line.dump() << '\n';
    }
}

HttpResponse Service::assist(const nlohmann::json& request) const {
    const auto started = std::chrono::steady_clock::now();
    if (auto bad = check_shape(request, with_params({{"text", "string"},
                                                     {"approach", "string"},
                                                     {"include_flow", "boolean"},
                                                     {"include_likeness", "boolean"},
                                                     {"include_timing", "boolean"},
                                                     {"log", "boolean"}}))) {
        return *bad;
    }
    if (!request.contains("text") || !request["text"].is_string()) {
        return error_response(400, "SchemaViolation", "field 'text' (string) is required");
    }
    try {
        const Approach approach =
            request.contains("approach") && request["approach"].is_string()
                ? parse_approach(request["approach"].get<std::string>())
                : config_.approach;
        const GenerationParams params = config_.params.with_overrides(request);
        params.validate();
        const std::string text = request["text"].get<std::string>();
        if (normalize_whitespace(text).empty()) return error_response(422, "EmptyInput", "text is empty");
        const PipelineConfig pipeline = pipeline_for(approach, params);
        const AssistResult result = compass::assist(text, pipeline, scorers_, options_from(request));
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        HttpResponse r;
        r.body = assist_result_to_json(result, approach);
        if (request.value("include_timing", false)) r.body["timing_ms"] = ms;
        r.headers[kTimingHeader] = std::to_string(ms);
        log_timing(request, "/assist", ms, &result);
        return r;
    } catch (const Error& e) {
        return from_error(e);
    }
}

HttpResponse Service::predict_missing(const nlohmann::json& request) const {
    if (auto bad = check_shape(request, with_params({{"text", "string"}, {"sentences", "array"}, {"log", "boolean"}}))) {
        return *bad;
    }
    try {
        Story story;
        if (request.contains("sentences") && request["sentences"].is_array()) {
            for (const auto& s : request["sentences"]) {
                if (!s.is_string()) return error_response(400, "SchemaViolation", "sentences must be strings");
                const auto norm = normalize_whitespace(s.get<std::string>());
                if (norm.empty()) return error_response(400, "SchemaViolation", "sentences must be non-empty");
                story.sentences.push_back(norm);
            }
        } else if (request.contains("text") && request["text"].is_string()) {
            if (normalize_whitespace(request["text"].get<std::string>()).empty()) {
                return error_response(422, "EmptyInput", "text is empty");
            }
            story = segment_text(request["text"].get<std::string>());
        } else {
            return error_response(400, "SchemaViolation", "'text' or 'sentences' is required");
        }
        if (story.sentences.empty()) return error_response(422, "EmptyInput", "no sentences");
        const GenerationParams params = config_.params.with_overrides(request);
        params.validate();
        PipelineConfig pipeline = pipeline_for(Approach::two_module_v2, params);
        const PredictResult pr = compass::predict_missing(story, pipeline);
        HttpResponse r;
        r.body["sentences"] = story.sentences;
        r.body["gap_positions"] = pr.masked.gap_positions();
        r.body["insert_before"] = pr.masked.insert_before();
        r.body["masked_text"] = encode_masked(pr.masked, pipeline.vnmpp->manifest().markers.missing);
        r.body["raw_output"] = pr.raw_output;
        r.body["diagnostics"] = diagnostics_json(pr.diagnostics);
        return r;
    } catch (const Error& e) {
        return from_error(e);
    }
}

HttpResponse Service::complete(const nlohmann::json& request) const {
    if (auto bad = check_shape(request, with_params({{"sentences", "array"},
                                                     {"gap_positions", "array"},
                                                     {"masked_text", "string"},
                                                     {"approach", "string"},
                                                     {"include_flow", "boolean"},
                                                     {"include_likeness", "boolean"},
                                                     {"log", "boolean"}}))) {
        return *bad;
    }
    try {
        const Approach approach =
            request.contains("approach") && request["approach"].is_string()
                ? parse_approach(request["approach"].get<std::string>())
                : config_.approach;
        const GenerationParams params = config_.params.with_overrides(request);
        params.validate();
        const PipelineConfig pipeline = pipeline_for(approach, params);
        MaskedStory masked;
        if (request.contains("masked_text") && request["masked_text"].is_string()) {
            const auto marker = pipeline.markers().missing;
            masked = parse_masked(request["masked_text"].get<std::string>(), marker).story;
        } else if (request.contains("sentences") && request["sentences"].is_array()) {
            std::vector<std::string> context;
            for (const auto& s : request["sentences"]) {
                if (!s.is_string()) return error_response(400, "SchemaViolation", "sentences must be strings");
                const auto norm = normalize_whitespace(s.get<std::string>());
                if (norm.empty()) return error_response(400, "SchemaViolation", "sentences must be non-empty");
                context.push_back(norm);
            }
            std::vector<int> gaps;
            if (request.contains("gap_positions") && request["gap_positions"].is_array()) {
                for (const auto& g : request["gap_positions"]) {
                    if (!g.is_number_integer()) {
                        return error_response(400, "SchemaViolation", "gap_positions must be integers");
                    }
                    gaps.push_back(g.get<int>());
                }
            }
            masked = masked_from_positions(context, gaps);
        } else {
            return error_response(400, "SchemaViolation", "'sentences' or 'masked_text' is required");
        }
        if (masked.elements.empty()) return error_response(422, "EmptyInput", "nothing to complete");
        const AssistResult result = complete_masked(masked, pipeline, scorers_, options_from(request));
        HttpResponse r;
        r.body = assist_result_to_json(result, approach == Approach::two_module ? approach : Approach::two_module_v2);
        return r;
    } catch (const Error& e) {
        return from_error(e);
    }
}

HttpResponse Service::health() const {
    HttpResponse r;
    ojson components = ojson::object();
    ojson failing = ojson::array();
    for (const auto& [name, why] : load_errors_) {
        components[name] = {{"ok", false}, {"error", why}};
        failing.push_back(name);
    }
    for (const auto& [name, pool] : pools_) {
        const bool ok = pool->probe();
        components[name] = {{"ok", ok}, {"kind", pool->manifest().kind}};
        if (!ok) failing.push_back(name);
    }
    if (scorers_.likeness) {
        const bool ok = scorers_.likeness->probe();
        components["likeness"] = {{"ok", ok}, {"checkpoint", scorers_.likeness->manifest().checkpoint}};
        if (!ok) failing.push_back("likeness");
    }
    if (scorers_.vad) {
        const bool ok = scorers_.vad->probe();
        components["vad"] = {{"ok", ok}, {"checkpoint", scorers_.vad->manifest().checkpoint}};
        if (!ok) failing.push_back("vad");
    }
    r.status = failing.empty() ? 200 : 503;
    r.body = {{"status", failing.empty() ? "ok" : "unavailable"}, {"failing", failing}, {"components", components}};
    return r;
}

HttpResponse Service::config() const {
    HttpResponse r;
    const PipelineConfig p = pipeline_for(config_.approach, config_.params);
    const Markers markers = p.markers();
    r.body["api_version"] = kApiVersion;
    r.body["approach"] = std::string(to_string(config_.approach));
    r.body["markers"] = {{"missing", markers.missing}, {"completion", markers.completion}};
    ojson backends = ojson::object();
    for (const auto& [name, pool] : pools_) backends[name] = ojson::parse(pool->manifest().to_json().dump());
    r.body["backends"] = backends;
    r.body["params"] = ojson::parse(config_.params.to_json().dump());
    ojson scorers = ojson::object();
    if (scorers_.likeness) scorers["likeness"] = ojson::parse(scorers_.likeness->manifest().to_json().dump());
    if (scorers_.vad) scorers["vad"] = ojson::parse(scorers_.vad->manifest().to_json().dump());
    r.body["scorers"] = scorers;
    r.body["story_like_threshold"] = kStoryLikeThreshold;
    return r;
}

ojson Service::schema() {
    const ojson params = {{"beam_size", {{"type", "integer"}, {"minimum", 1}}},
                          {"num_candidates", {{"type", "integer"}, {"minimum", 1}}},
                          {"max_length", {{"type", "integer"}, {"minimum", 1}}},
                          {"min_length", {{"type", "integer"}, {"minimum", 0}}},
                          {"length_penalty", {{"type", "number"}}}};
    const ojson candidate = {{"type", "object"},
                             {"required", {"text", "score"}},
                             {"properties", {{"text", {{"type", "string"}}}, {"score", {{"type", "number"}}}}}};
    const ojson diagnostic = {{"type", "object"},
                              {"required", {"kind", "message"}},
                              {"properties", {{"kind", {{"type", "string"}}}, {"message", {{"type", "string"}}}}}};
    const ojson va_point = {{"type", "object"},
                            {"required", {"i", "v", "a"}},
                            {"properties",
                             {{"i", {{"type", "integer"}}}, {"v", {{"type", "number"}}}, {"a", {{"type", "number"}}}}}};
    const ojson strings = {{"type", "array"}, {"items", {{"type", "string"}}}};
    const ojson ints = {{"type", "array"}, {"items", {{"type", "integer"}}}};
    const ojson flow = {{"type", {"array", "null"}}, {"items", va_point}};
    const ojson approach = {{"type", "string"}, {"enum", {"two_module", "two_module_v2", "end_to_end"}}};

    ojson assist_request = {{"type", "object"}, {"required", {"text"}}, {"additionalProperties", false}};
    assist_request["properties"] = params;
    assist_request["properties"]["text"] = {{"type", "string"}};
    assist_request["properties"]["approach"] = approach;
    for (const char* flag : {"include_flow", "include_likeness", "include_timing", "log"}) {
        assist_request["properties"][flag] = {{"type", "boolean"}};
    }

    ojson assist_response = {{"type", "object"},
                             {"required",
                              {"approach", "sentences", "gap_positions", "insert_before", "candidates_per_gap",
                               "best_completion", "best_completion_text", "story_candidates", "story_likeness",
                               "story_like", "flow_before", "flow_after", "diagnostics"}}};
    assist_response["properties"] = {
        {"approach", approach},
        {"sentences", strings},
        {"gap_positions", ints},
        {"insert_before", ints},
        {"candidates_per_gap", {{"type", "array"}, {"items", {{"type", "array"}, {"items", candidate}}}}},
        {"best_completion", strings},
        {"best_completion_text", {{"type", "string"}}},
        {"story_candidates", {{"type", "array"}, {"items", candidate}}},
        {"story_likeness", {{"type", {"number", "null"}}, {"minimum", 0}, {"maximum", 1}}},
        {"story_like", {{"type", {"boolean", "null"}}}},
        {"flow_before", flow},
        {"flow_after", flow},
        {"diagnostics", {{"type", "array"}, {"items", diagnostic}}},
        {"timing_ms", {{"type", "number"}}}};

    ojson predict_request = {{"type", "object"}, {"additionalProperties", false}};
    predict_request["properties"] = params;
    predict_request["properties"]["text"] = {{"type", "string"}};
    predict_request["properties"]["sentences"] = strings;
    predict_request["properties"]["log"] = {{"type", "boolean"}};

    ojson predict_response = {
        {"type", "object"},
        {"required", {"sentences", "gap_positions", "insert_before", "masked_text", "raw_output", "diagnostics"}},
        {"properties",
         {{"sentences", strings},
          {"gap_positions", ints},
          {"insert_before", ints},
          {"masked_text", {{"type", "string"}}},
          {"raw_output", {{"type", "string"}}},
          {"diagnostics", {{"type", "array"}, {"items", diagnostic}}}}}};

    ojson complete_request = {{"type", "object"}, {"additionalProperties", false}};
    complete_request["properties"] = params;
    complete_request["properties"]["sentences"] = strings;
    complete_request["properties"]["gap_positions"] = ints;
    complete_request["properties"]["masked_text"] = {{"type", "string"}};
    complete_request["properties"]["approach"] = approach;
    for (const char* flag : {"include_flow", "include_likeness", "log"}) {
        complete_request["properties"][flag] = {{"type", "boolean"}};
    }

    const ojson error = {{"type", "object"},
                         {"required", {"error"}},
                         {"properties",
                          {{"error",
                            {{"type", "object"},
                             {"required", {"code", "message"}},
                             {"properties",
                              {{"code", {{"type", "string"}}}, {"message", {{"type", "string"}}}}}}}}}};
    const ojson health = {{"type", "object"},
                          {"required", {"status", "failing", "components"}},
                          {"properties",
                           {{"status", {{"type", "string"}, {"enum", {"ok", "unavailable"}}}},
                            {"failing", strings},
                            {"components", {{"type", "object"}}}}}};
    const ojson config = {{"type", "object"},
                          {"required", {"api_version", "approach", "markers", "backends", "params", "scorers"}},
                          {"properties",
                           {{"api_version", {{"type", "string"}}},
                            {"approach", approach},
                            {"markers",
                             {{"type", "object"},
                              {"required", {"missing", "completion"}},
                              {"properties",
                               {{"missing", {{"type", "string"}}}, {"completion", {{"type", "string"}}}}}}},
                            {"backends", {{"type", "object"}}},
                            {"params", {{"type", "object"}}},
                            {"scorers", {{"type", "object"}}},
                            {"story_like_threshold", {{"type", "number"}}}}}};

    ojson s;
    s["$schema"] = "https://json-schema.org/draft/2020-12/schema";
    s["title"] = "compass service";
    s["api_version"] = kApiVersion;
    s["timing_header"] = kTimingHeader;
    s["definitions"] = {{"AssistRequest", assist_request},     {"AssistResponse", assist_response},
                        {"PredictRequest", predict_request},   {"PredictResponse", predict_response},
                        {"CompleteRequest", complete_request}, {"CompleteResponse", assist_response},
                        {"HealthResponse", health},            {"ConfigResponse", config},
                        {"ErrorResponse", error}};
    s["endpoints"] = {
        {"/assist", {{"method", "POST"}, {"request", "AssistRequest"}, {"response", "AssistResponse"}}},
        {"/predict-missing", {{"method", "POST"}, {"request", "PredictRequest"}, {"response", "PredictResponse"}}},
        {"/complete", {{"method", "POST"}, {"request", "CompleteRequest"}, {"response", "CompleteResponse"}}},
        {"/health", {{"method", "GET"}, {"response", "HealthResponse"}}},
        {"/config", {{"method", "GET"}, {"response", "ConfigResponse"}}},
        {"/schema", {{"method", "GET"}}}};
    return s;
}

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
    static const std::set<std::string> post_routes = {"/assist", "/predict-missing", "/complete"};
    static const std::set<std::string> get_routes = {"/health", "/config", "/schema"};
    if (post_routes.count(path)) {
        if (method != "POST") return error_response(405, "MethodNotAllowed", path + " expects POST");
        nlohmann::json request;
        try {
            request = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception&) {
            return error_response(400, "SchemaViolation", "body is not valid JSON");
        }
        if (path == "/assist") return assist(request);
        if (path == "/predict-missing") return predict_missing(request);
        return complete(request);
    }
    if (get_routes.count(path)) {
        if (method != "GET") return error_response(405, "MethodNotAllowed", path + " expects GET");
        if (path == "/health") return health();
        if (path == "/config") return config();
        HttpResponse r;
        r.body = schema();
        return r;
    }
    return error_response(404, "NotFound", "no route for " + path);
}

namespace {

void bind_routes(httplib::Server& http, const std::function<HttpResponse(const std::string&, const std::string&,
                                                                         const std::string&)>& handle) {
    auto adapt = [handle](const httplib::Request& req, httplib::Response& res) {
        const HttpResponse r = handle(req.method, req.path, req.body);
        res.status = r.status;
        for (const auto& [k, v] : r.headers) res.set_header(k, v);
        res.set_content(r.body.dump(), "application/json");
    };
    // Both methods route through handle() so a wrong method yields 405.
    for (const char* p : {"/assist", "/predict-missing", "/complete", "/health", "/config", "/schema"}) {
        http.Post(p, adapt);
        http.Get(p, adapt);
    }
}

}  // namespace

void Service::serve(const std::string& host, int port) {
    server_ = std::make_unique<Server>();
    bind_routes(server_->http, [this](const std::string& m, const std::string& p, const std::string& b) {
        return handle(m, p, b);
    });
    if (!config_.static_dir.empty() && !server_->http.set_mount_point("/", config_.static_dir)) {
        throw Error(ErrorCode::IoError, "static_dir " + config_.static_dir + " does not exist");
    }
    const bool ok = server_->http.listen(host, port);
    server_.reset();
    if (!ok) throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
}

int Service::serve_background(const std::string& host) {
    server_ = std::make_unique<Server>();
    bind_routes(server_->http, [this](const std::string& m, const std::string& p, const std::string& b) {
        return handle(m, p, b);
    });
    if (!config_.static_dir.empty() && !server_->http.set_mount_point("/", config_.static_dir)) {
        throw Error(ErrorCode::IoError, "static_dir " + config_.static_dir + " does not exist");
    }
    const int port = server_->http.bind_to_any_port(host);
    if (port <= 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
    server_->thread = std::thread([this] { server_->http.listen_after_bind(); });
    server_->http.wait_until_ready();
    return port;
}

// A blocking serve() owns server_ and releases it when listen returns.
void Service::stop() {
    if (!server_) return;
    server_->http.stop();
    if (server_->thread.joinable()) {
        server_->thread.join();
        server_.reset();
    }
}

HttpResponse worker_handle(Backend& backend, std::mutex& mutex, const std::string& method, const std::string& path,
                           const std::string& body) {
    if (path == "/v1/health" && method == "GET") {
        std::lock_guard lock(mutex);
        HttpResponse r;
        const bool ok = backend.probe();
        r.status = ok ? 200 : 503;
        r.body = {{"status", ok ? "ok" : "unavailable"}};
        return r;
    }
    if (path == "/v1/manifest" && method == "GET") {
        HttpResponse r;
        r.body = ojson::parse(backend.manifest().to_json().dump());
        return r;
    }
    if (path == "/v1/generate" && method == "POST") {
        nlohmann::json req;
        try {
            req = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception&) {
            return error_response(400, "SchemaViolation", "body is not valid JSON");
        }
        if (!req.is_object() || !req.contains("input") || !req["input"].is_string()) {
            return error_response(400, "SchemaViolation", "field 'input' (string) is required");
        }
        try {
            const GenerationParams params =
                GenerationParams{}.with_overrides(req.value("params", nlohmann::json::object()));
            params.validate();
            GenerationResult result;
            {
                std::lock_guard lock(mutex);
                result = backend.generate(req["input"].get<std::string>(), params);
            }
            HttpResponse r;
            r.body = {{"candidates", candidates_json(result.candidates)},
                      {"diagnostics", diagnostics_json(result.diagnostics)}};
            return r;
        } catch (const Error& e) {
            return from_error(e);
        }
    }
    return error_response(404, "NotFound", "no route for " + method + " " + path);
}

void run_worker(std::unique_ptr<Backend> backend, const std::string& host, int port) {
    std::shared_ptr<Backend> shared(std::move(backend));
    auto mutex = std::make_shared<std::mutex>();
    httplib::Server http;
    auto adapt = [shared, mutex](const httplib::Request& req, httplib::Response& res) {
        const HttpResponse r = worker_handle(*shared, *mutex, req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    http.Post("/v1/generate", adapt);
    http.Get("/v1/health", adapt);
    http.Get("/v1/manifest", adapt);
    if (!http.listen(host, port)) throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace compass
