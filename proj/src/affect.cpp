#include "compass/affect.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <httplib.h>

#include "compass/errors.hpp"
#include "compass/nn/vocab.hpp"

namespace compass {

namespace {

std::vector<std::string> lower_words(const std::string& text) {
    std::vector<std::string> out;
    for (auto tok : nn::word_tokenize(text)) {
        if (tok.empty() || !(std::isalnum(static_cast<unsigned char>(tok[0])) || static_cast<unsigned char>(tok[0]) >= 0x80)) {
            continue;
        }
        std::transform(tok.begin(), tok.end(), tok.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        out.push_back(std::move(tok));
    }
    return out;
}

double clamp_to(const ScorerManifest& m, double v) { return std::clamp(v, m.min_value, m.max_value); }

class ConstantVad final : public VadScorer {
public:
    ConstantVad(double v, double a) : v_(v), a_(a) {
        manifest_ = {"vad", std::min({v, a, 0.0}), std::max({v, a, 0.0}) + 1.0, "constant mock", "constant"};
    }
    const ScorerManifest& manifest() const override { return manifest_; }
    std::pair<double, double> score(const std::string&) const override { return {v_, a_}; }

private:
    double v_, a_;
    ScorerManifest manifest_;
};

class LinearMockVad final : public VadScorer {
public:
    const ScorerManifest& manifest() const override { return manifest_; }
    std::pair<double, double> score(const std::string& sentence) const override {
        std::size_t words = 0;
        bool in_word = false;
        for (const char c : sentence) {
            const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
            if (!space && !in_word) ++words;
            in_word = !space;
        }
        return {static_cast<double>(sentence.size() % 5), static_cast<double>(words % 5)};
    }

private:
    ScorerManifest manifest_{"vad", 0.0, 4.0, "linear mock", "linear_mock"};
};

class LexiconVad final : public VadScorer {
public:
    LexiconVad(std::map<std::string, std::pair<double, double>> lexicon, ScorerManifest manifest,
               std::pair<double, double> neutral)
        : lexicon_(std::move(lexicon)), manifest_(std::move(manifest)), neutral_(neutral) {
        manifest_.validate();
    }
    const ScorerManifest& manifest() const override { return manifest_; }
    std::pair<double, double> score(const std::string& sentence) const override {
        double v = 0.0, a = 0.0;
        int hits = 0;
        for (const auto& w : lower_words(sentence)) {
            const auto it = lexicon_.find(w);
            if (it == lexicon_.end()) continue;
            v += it->second.first;
            a += it->second.second;
            ++hits;
        }
        if (hits == 0) return neutral_;
        return {v / hits, a / hits};
    }

private:
    std::map<std::string, std::pair<double, double>> lexicon_;
    ScorerManifest manifest_;
    std::pair<double, double> neutral_;
};

class ConstantLikeness final : public LikenessScorer {
public:
    explicit ConstantLikeness(double p) : p_(p) {}
    const ScorerManifest& manifest() const override { return manifest_; }
    double score(const std::string&) const override { return p_; }

private:
    double p_;
    ScorerManifest manifest_{"story_likeness", 0.0, 1.0, "constant mock", "constant"};
};

class BowLogistic final : public LikenessScorer {
public:
    BowLogistic(double bias, std::map<std::string, double> weights, ScorerManifest manifest)
        : bias_(bias), weights_(std::move(weights)), manifest_(std::move(manifest)) {
        manifest_.validate();
    }
    const ScorerManifest& manifest() const override { return manifest_; }
    double score(const std::string& text) const override {
        const auto words = lower_words(text);
        if (words.empty()) return 1.0 / (1.0 + std::exp(-bias_));
        double z = 0.0;
        for (const auto& w : words) {
            const auto it = weights_.find(w);
            if (it != weights_.end()) z += it->second;
        }
        z = bias_ + z / static_cast<double>(words.size());
        return 1.0 / (1.0 + std::exp(-z));
    }

private:
    double bias_;
    std::map<std::string, double> weights_;
    ScorerManifest manifest_;
};

nlohmann::json post_score(const std::string& url, const nlohmann::json& body) {
    httplib::Client client(url);
    client.set_connection_timeout(std::chrono::seconds(5));
    client.set_read_timeout(std::chrono::seconds(60));
    auto res = client.Post("/v1/score", body.dump(), "application/json");
    if (!res) throw Error(ErrorCode::ScorerUnavailable, "scorer at " + url + " unreachable");
    if (res->status != 200) {
        throw Error(ErrorCode::ScorerUnavailable, "scorer at " + url + " returned " + std::to_string(res->status));
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::ScorerUnavailable, std::string("bad scorer reply: ") + e.what());
    }
}

bool get_health(const std::string& url) {
    httplib::Client client(url);
    client.set_connection_timeout(std::chrono::seconds(2));
    auto res = client.Get("/v1/health");
    return res && res->status == 200;
}

class RemoteVad final : public VadScorer {
public:
    RemoteVad(std::string url, ScorerManifest manifest) : url_(std::move(url)), manifest_(std::move(manifest)) {
        manifest_.validate();
    }
    const ScorerManifest& manifest() const override { return manifest_; }
    std::pair<double, double> score(const std::string& sentence) const override { return score_all({sentence}).at(0); }
    std::vector<std::pair<double, double>> score_all(const std::vector<std::string>& sentences) const override {
        const auto reply = post_score(url_, {{"texts", sentences}});
        std::vector<std::pair<double, double>> out;
        try {
            for (const auto& p : reply.at("points")) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        } catch (const std::exception& e) {
            throw Error(ErrorCode::ScorerUnavailable, std::string("bad VAD reply: ") + e.what());
        }
        if (out.size() != sentences.size()) throw Error(ErrorCode::ScorerUnavailable, "VAD reply has wrong length");
        return out;
    }
    bool probe() const override { return get_health(url_); }

private:
    std::string url_;
    ScorerManifest manifest_;
};

class RemoteLikeness final : public LikenessScorer {
public:
    RemoteLikeness(std::string url, ScorerManifest manifest) : url_(std::move(url)), manifest_(std::move(manifest)) {
        manifest_.validate();
    }
    const ScorerManifest& manifest() const override { return manifest_; }
    double score(const std::string& text) const override {
        const auto reply = post_score(url_, {{"texts", {text}}});
        try {
            return reply.at("scores").at(0).get<double>();
        } catch (const std::exception& e) {
            throw Error(ErrorCode::ScorerUnavailable, std::string("bad likeness reply: ") + e.what());
        }
    }
    bool probe() const override { return get_health(url_); }

private:
    std::string url_;
    ScorerManifest manifest_;
};

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ScorerUnavailable, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::ScorerUnavailable, "cannot parse " + path.string() + ": " + e.what());
    }
}

}  // namespace

nlohmann::json flow_to_json(const std::vector<VAPoint>& flow) {
    auto out = nlohmann::json::array();
    for (const auto& p : flow) out.push_back({{"i", p.sentence_index}, {"v", p.valence}, {"a", p.arousal}});
    return out;
}

void ScorerManifest::validate() const {
    if (kind != "story_likeness" && kind != "vad") {
        throw Error(ErrorCode::InvalidArgument, "unknown scorer kind '" + kind + "'");
    }
    if (!(max_value > min_value)) throw Error(ErrorCode::InvalidArgument, "degenerate scorer range");
}

nlohmann::json ScorerManifest::to_json() const {
    return {{"kind", kind},
            {"range", {min_value, max_value}},
            {"training_note", training_note},
            {"checkpoint", checkpoint}};
}

ScorerManifest ScorerManifest::from_json(const nlohmann::json& j) {
    ScorerManifest m;
    m.kind = j.at("kind").get<std::string>();
    const auto& range = j.at("range");
    m.min_value = range.at(0).get<double>();
    m.max_value = range.at(1).get<double>();
    m.training_note = j.value("training_note", "");
    m.checkpoint = j.value("checkpoint", "");
    m.validate();
    return m;
}

std::vector<std::pair<double, double>> VadScorer::score_all(const std::vector<std::string>& sentences) const {
    std::vector<std::pair<double, double>> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) out.push_back(score(s));
    return out;
}

std::vector<VAPoint> emotional_flow(const Story& story, const VadScorer& scorer) {
    std::vector<std::pair<double, double>> raw;
    try {
        raw = scorer.score_all(story.sentences);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::ScorerUnavailable, e.what());
    }
    if (raw.size() != story.sentences.size()) throw Error(ErrorCode::ScorerUnavailable, "scorer skipped sentences");
    std::vector<VAPoint> flow;
    flow.reserve(raw.size());
    const auto& m = scorer.manifest();
    for (std::size_t i = 0; i < raw.size(); ++i) {
        flow.push_back({static_cast<int>(i), clamp_to(m, raw[i].first), clamp_to(m, raw[i].second)});
    }
    return flow;
}

double story_likeness(const Story& story, const LikenessScorer& scorer) {
    double p = 0.0;
    try {
        p = scorer.score(render_story(story));
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::ScorerUnavailable, e.what());
    }
    if (std::isnan(p)) throw Error(ErrorCode::ScorerUnavailable, "scorer returned NaN");
    return std::clamp(p, 0.0, 1.0);
}

std::unique_ptr<VadScorer> make_constant_vad_scorer(double valence, double arousal) {
    return std::make_unique<ConstantVad>(valence, arousal);
}

std::unique_ptr<VadScorer> make_linear_mock_vad_scorer() { return std::make_unique<LinearMockVad>(); }

std::unique_ptr<VadScorer> make_lexicon_vad_scorer(std::map<std::string, std::pair<double, double>> lexicon,
                                                   ScorerManifest manifest, std::pair<double, double> neutral) {
    return std::make_unique<LexiconVad>(std::move(lexicon), std::move(manifest), neutral);
}

std::unique_ptr<VadScorer> make_default_lexicon_vad_scorer() {
    // Hand-assigned seed values; a trained regression scorer replaces this
    // through the remote adapter.
    std::map<std::string, std::pair<double, double>> lex = {
        {"happy", {4.5, 3.5}},   {"glad", {4.2, 3.0}},     {"love", {4.6, 3.6}},    {"loved", {4.5, 3.4}},
        {"proud", {4.3, 3.5}},   {"excited", {4.3, 4.4}},  {"fun", {4.2, 3.8}},     {"great", {4.3, 3.4}},
        {"cool", {4.0, 3.2}},    {"fancy", {3.8, 3.2}},    {"won", {4.4, 4.0}},     {"smiled", {4.2, 3.0}},
        {"laughed", {4.3, 3.7}}, {"enjoyed", {4.2, 3.2}},  {"beautiful", {4.3, 3.1}}, {"friend", {4.0, 2.9}},
        {"friends", {4.0, 3.0}}, {"celebrated", {4.4, 4.0}}, {"finally", {3.7, 3.3}}, {"saving", {3.3, 2.6}},
        {"new", {3.7, 3.1}},     {"calm", {3.7, 1.6}},     {"quiet", {3.2, 1.6}},   {"slept", {3.4, 1.4}},
        {"tired", {2.4, 1.8}},   {"bored", {2.2, 1.5}},    {"sad", {1.6, 2.4}},     {"cried", {1.6, 3.5}},
        {"lost", {1.9, 3.2}},    {"angry", {1.7, 4.4}},    {"afraid", {1.8, 4.2}},  {"scared", {1.7, 4.3}},
        {"hurt", {1.6, 3.8}},    {"broke", {1.9, 3.5}},    {"broken", {1.8, 3.0}},  {"died", {1.2, 3.6}},
        {"sick", {1.8, 2.6}},    {"worried", {2.0, 3.8}},  {"late", {2.3, 3.2}},    {"fell", {2.1, 3.6}},
        {"failed", {1.7, 3.3}},  {"alone", {2.0, 2.2}},    {"storm", {2.3, 4.0}},   {"fire", {2.0, 4.5}},
        {"ran", {3.1, 3.9}},     {"shouted", {2.3, 4.3}},  {"surprised", {3.6, 4.2}}, {"nervous", {2.3, 4.0}},
        {"relieved", {4.0, 2.2}}, {"home", {3.8, 2.2}},    {"gift", {4.2, 3.3}},    {"party", {4.1, 4.0}},
    };
    return make_lexicon_vad_scorer(std::move(lex),
                                   {"vad", 1.0, 5.0, "hand-assigned seed lexicon, 1..5 scale", "builtin:lexicon"},
                                   {3.0, 3.0});
}

std::unique_ptr<LikenessScorer> make_constant_likeness_scorer(double probability) {
    return std::make_unique<ConstantLikeness>(probability);
}

std::unique_ptr<LikenessScorer> make_bow_logistic_likeness_scorer(double bias, std::map<std::string, double> weights,
                                                                  ScorerManifest manifest) {
    return std::make_unique<BowLogistic>(bias, std::move(weights), std::move(manifest));
}

std::unique_ptr<LikenessScorer> make_default_likeness_scorer() {
    std::map<std::string, double> w = {
        {"he", 4.0},      {"she", 4.0},    {"they", 3.0},  {"was", 4.0},    {"had", 3.0},    {"went", 5.0},
        {"decided", 6.0}, {"then", 4.0},   {"finally", 6.0}, {"got", 3.0},  {"wanted", 5.0}, {"his", 3.0},
        {"her", 3.0},     {"day", 3.0},    {"were", 2.0},  {"after", 3.0},  {"when", 2.0},   {"so", 2.0},
        {"click", -8.0},  {"subscribe", -8.0}, {"http", -10.0}, {"www", -10.0}, {"copyright", -8.0},
        {"lorem", -10.0}, {"ipsum", -10.0},
    };
    return make_bow_logistic_likeness_scorer(
        0.0, std::move(w),
        {"story_likeness", 0.0, 1.0, "hand-weighted narrative-cue heuristic", "builtin:bow_logistic"});
}

std::unique_ptr<VadScorer> make_remote_vad_scorer(const std::string& url, ScorerManifest manifest) {
    return std::make_unique<RemoteVad>(url, std::move(manifest));
}

std::unique_ptr<LikenessScorer> make_remote_likeness_scorer(const std::string& url, ScorerManifest manifest) {
    return std::make_unique<RemoteLikeness>(url, std::move(manifest));
}

std::unique_ptr<VadScorer> vad_scorer_from_config(const nlohmann::json& config) {
    const auto kind = config.value("kind", "lexicon");
    if (kind == "constant") return make_constant_vad_scorer(config.value("valence", 0.0), config.value("arousal", 0.0));
    if (kind == "linear_mock") return make_linear_mock_vad_scorer();
    if (kind == "lexicon") {
        if (!config.contains("path")) return make_default_lexicon_vad_scorer();
        const auto j = read_json_file(config.at("path").get<std::string>());
        std::map<std::string, std::pair<double, double>> lex;
        for (const auto& [word, va] : j.at("lexicon").items()) lex[word] = {va.at(0).get<double>(), va.at(1).get<double>()};
        const auto neutral = j.value("neutral", std::vector<double>{3.0, 3.0});
        return make_lexicon_vad_scorer(std::move(lex), ScorerManifest::from_json(j.at("manifest")),
                                       {neutral.at(0), neutral.at(1)});
    }
    if (kind == "remote") {
        return make_remote_vad_scorer(config.at("url").get<std::string>(),
                                      ScorerManifest::from_json(config.at("manifest")));
    }
    throw Error(ErrorCode::ScorerUnavailable, "unknown VAD scorer kind '" + kind + "'");
}

std::unique_ptr<LikenessScorer> likeness_scorer_from_config(const nlohmann::json& config) {
    const auto kind = config.value("kind", "bow_logistic");
    if (kind == "constant") return make_constant_likeness_scorer(config.value("value", 1.0));
    if (kind == "bow_logistic") {
        if (!config.contains("path")) return make_default_likeness_scorer();
        const auto j = read_json_file(config.at("path").get<std::string>());
        return make_bow_logistic_likeness_scorer(j.at("bias").get<double>(),
                                                 j.at("weights").get<std::map<std::string, double>>(),
                                                 ScorerManifest::from_json(j.at("manifest")));
    }
    if (kind == "remote") {
        return make_remote_likeness_scorer(config.at("url").get<std::string>(),
                                           ScorerManifest::from_json(config.at("manifest")));
    }
    throw Error(ErrorCode::ScorerUnavailable, "unknown likeness scorer kind '" + kind + "'");
}

}  // namespace compass
