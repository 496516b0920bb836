#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compass/affect.hpp"
#include "compass/corruption.hpp"
#include "compass/pipeline.hpp"

namespace compass {

inline constexpr const char* kBleuVariant = "corpus BLEU-4, uniform weights, brevity penalty, no smoothing, "
                                            "whitespace tokens, scale 0-100";

struct BleuStats {
    std::array<long, 4> matches{};  // clipped n-gram matches per order
    std::array<long, 4> totals{};   // candidate n-grams per order
    long candidate_length = 0;
    long reference_length = 0;
};

// Whitespace tokenization; throws Error(EmptyCorpus) for no pairs and
// Error(InvalidArgument) for a length mismatch.
BleuStats bleu_stats(const std::vector<std::string>& candidates, const std::vector<std::string>& references);
// Orders with no candidate n-grams anywhere in the corpus are left out of
// the geometric mean; any remaining order with zero matches gives 0.
double bleu_from_stats(const BleuStats& stats);
double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references);

struct PositionMetrics {
    double exact_match = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Set metrics over gap positions; duplicates are ignored. Empty vs empty
// is a perfect score.
PositionMetrics position_metrics(const std::vector<int>& predicted, const std::vector<int>& gold);
// Macro average. Throws Error(EmptyCorpus) for an empty list.
PositionMetrics mean_position_metrics(const std::vector<PositionMetrics>& per_instance);

// Mean whitespace-token count. Throws Error(EmptyCorpus).
double mean_length(const std::vector<std::string>& texts);

enum class Aggregate { threshold_ratio, mean };

// A learned metric behind a process or network boundary.
class ExternalScorer {
public:
    virtual ~ExternalScorer() = default;
    virtual std::string name() const = 0;
    virtual Aggregate aggregate() const = 0;
    // One score per candidate; references may be empty for reference-free
    // metrics. Throws Error(AdapterUnavailable).
    virtual std::vector<double> score(const std::vector<std::string>& candidates,
                                      const std::vector<std::string>& references) = 0;
};

struct ExternalScore {
    std::string name;
    std::string aggregate_kind;
    std::vector<double> per_instance;
    double aggregate = 0.0;
};

// UNION-style threshold_ratio counts scores >= 0.5.
ExternalScore score_with_external(ExternalScorer& scorer, const std::vector<std::string>& candidates,
                                  const std::vector<std::string>& references);

std::unique_ptr<ExternalScorer> make_mock_scorer(std::string name, Aggregate aggregate, std::vector<double> scores);
// Writes {"candidate", "reference"} JSON lines to the command's stdin and
// reads one number per line from its stdout.
std::unique_ptr<ExternalScorer> make_subprocess_scorer(std::string name, Aggregate aggregate, std::string command);
// Story-likeness scorer as a thresholded-ratio metric.
std::unique_ptr<ExternalScorer> make_likeness_adapter(std::shared_ptr<const LikenessScorer> scorer,
                                                      std::string name = "union");
// {"name", "kind": "mock"|"subprocess"|"likeness", "aggregate": "threshold_ratio"|"mean", ...}
std::unique_ptr<ExternalScorer> external_scorer_from_config(const nlohmann::json& config);

struct MetricReport {
    std::string approach;
    std::string split;
    std::map<std::string, double> bleu;  // per module, plus "pipeline"
    double mean_length = 0.0;
    PositionMetrics position;
    std::map<std::string, double> learned;
    std::map<std::string, std::string> unavailable;  // adapter -> reason
    long count = 0;
    long errors = 0;

    nlohmann::ordered_json to_json() const;
};

// Scores each module on its own gold input (VN-MPP against the gold masked
// string, SC against the original story) and the chained pipeline against
// the original; position metrics come from the chained prediction.
MetricReport evaluate_run(const std::vector<CorruptedExample>& split, const PipelineConfig& config,
                          const std::string& split_name = "test",
                          const std::vector<ExternalScorer*>& adapters = {});

}  // namespace compass
