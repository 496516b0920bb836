#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "compass/story.hpp"

namespace compass {

struct VAPoint {
    int sentence_index = 0;
    double valence = 0.0;
    double arousal = 0.0;
    bool operator==(const VAPoint&) const = default;
};

// Serialized as {"i", "v", "a"}.
nlohmann::json flow_to_json(const std::vector<VAPoint>& flow);

struct ScorerManifest {
    std::string kind;  // "story_likeness" | "vad"
    double min_value = 0.0;
    double max_value = 1.0;
    std::string training_note;
    std::string checkpoint;

    // Throws Error(InvalidArgument) for an unknown kind or a degenerate range.
    void validate() const;
    nlohmann::json to_json() const;
    static ScorerManifest from_json(const nlohmann::json& j);
};

// Scorers are immutable after construction; score calls are thread-safe.
class VadScorer {
public:
    virtual ~VadScorer() = default;
    virtual const ScorerManifest& manifest() const = 0;
    // (valence, arousal) for one sentence.
    virtual std::pair<double, double> score(const std::string& sentence) const = 0;
    // Scores a whole story; the default calls score() per sentence.
    virtual std::vector<std::pair<double, double>> score_all(const std::vector<std::string>& sentences) const;
    virtual bool probe() const { return true; }
};

class LikenessScorer {
public:
    virtual ~LikenessScorer() = default;
    virtual const ScorerManifest& manifest() const = 0;
    // Probability that text reads as a coherent story.
    virtual double score(const std::string& text) const = 0;
    virtual bool probe() const { return true; }
};

inline constexpr double kStoryLikeThreshold = 0.5;

// One point per sentence, values clamped into the manifest range.
// Throws Error(ScorerUnavailable) if the scorer fails.
std::vector<VAPoint> emotional_flow(const Story& story, const VadScorer& scorer);

// Clamped to [0, 1]. Throws Error(ScorerUnavailable) if the scorer fails.
double story_likeness(const Story& story, const LikenessScorer& scorer);
inline bool is_story_like(double probability) { return probability >= kStoryLikeThreshold; }

std::unique_ptr<VadScorer> make_constant_vad_scorer(double valence, double arousal);
// valence = byte length mod 5, arousal = whitespace word count mod 5.
std::unique_ptr<VadScorer> make_linear_mock_vad_scorer();
// Mean of per-word entries; words outside the lexicon are skipped and a
// sentence without hits scores the neutral point.
std::unique_ptr<VadScorer> make_lexicon_vad_scorer(std::map<std::string, std::pair<double, double>> lexicon,
                                                   ScorerManifest manifest,
                                                   std::pair<double, double> neutral);
// Built-in English lexicon on a 1..5 scale.
std::unique_ptr<VadScorer> make_default_lexicon_vad_scorer();

std::unique_ptr<LikenessScorer> make_constant_likeness_scorer(double probability);
// sigmoid(bias + sum_w weight[w] * count(w) / n_tokens) over lowercased
// word tokens.
std::unique_ptr<LikenessScorer> make_bow_logistic_likeness_scorer(double bias, std::map<std::string, double> weights,
                                                                  ScorerManifest manifest);
std::unique_ptr<LikenessScorer> make_default_likeness_scorer();

// Remote scorers: POST {url}/v1/score with {"texts": [...]}; the reply is
// {"scores": [...]} for likeness and {"points": [[v, a], ...]} for VAD.
std::unique_ptr<VadScorer> make_remote_vad_scorer(const std::string& url, ScorerManifest manifest);
std::unique_ptr<LikenessScorer> make_remote_likeness_scorer(const std::string& url, ScorerManifest manifest);

// {"kind": "constant"|"linear_mock"|"lexicon"|"remote", ...}; "lexicon"
// without "path" is the built-in lexicon, with "path" a JSON object of
// word -> [v, a].
std::unique_ptr<VadScorer> vad_scorer_from_config(const nlohmann::json& config);
// {"kind": "constant"|"bow_logistic"|"remote", ...}; "bow_logistic" reads
// {"bias", "weights"} from "path" or uses the built-in weights.
std::unique_ptr<LikenessScorer> likeness_scorer_from_config(const nlohmann::json& config);

}  // namespace compass
