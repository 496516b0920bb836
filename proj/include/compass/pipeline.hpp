#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "compass/affect.hpp"
#include "compass/backend.hpp"
#include "compass/story.hpp"
#include "compass/token_protocol.hpp"

namespace compass {

enum class Approach { two_module, two_module_v2, end_to_end };

std::string_view to_string(Approach approach);
Approach parse_approach(std::string_view name);

// Immutable once built; pools make concurrent calls safe.
struct PipelineConfig {
    Approach approach = Approach::two_module_v2;
    std::shared_ptr<BackendPool> vnmpp;
    std::shared_ptr<BackendPool> sc;   // role sc for two_module, sc_v2 for two_module_v2
    std::shared_ptr<BackendPool> e2e;
    GenerationParams params;

    // Throws Error(BackendUnavailable) when a required pool is missing and
    // Error(InvalidArgument) when marker strings disagree.
    void validate() const;
    Markers markers() const;
};

struct Scorers {
    std::shared_ptr<const LikenessScorer> likeness;
    std::shared_ptr<const VadScorer> vad;
};

struct StoryCandidate {
    Story story;
    double score = 0.0;
};

struct PredictResult {
    MaskedStory masked;  // context is exactly the input sentences
    Diagnostics diagnostics;
    std::string raw_output;  // top VN-MPP beam as generated
};

struct StoryCandidates {
    std::vector<StoryCandidate> candidates;
    Diagnostics diagnostics;
};

struct GapCandidates {
    std::vector<std::vector<Candidate>> per_gap;
    Diagnostics diagnostics;
};

struct EndToEndResult {
    std::vector<StoryCandidate> candidates;
    // Gaps inferred from the top candidate, over the input sentences.
    MaskedStory masked;
    std::vector<std::vector<Candidate>> per_gap;
    Diagnostics diagnostics;
};

// Maps a parsed VN-MPP output onto the true input sentences. Falls back to
// zero gaps with a ReconciliationFailure diagnostic when fewer than half
// of the input sentences can be aligned.
PredictResult reconcile(const MaskedStory& parsed, const std::vector<std::string>& input);

// Output sentences with no aligned input sentence become gaps, placed
// right after the preceding aligned input sentence. Returns nullopt when
// fewer than half of the input sentences align.
std::optional<MaskedStory> infer_insertions(const std::vector<std::string>& input,
                                            const std::vector<std::string>& output);

// Throws Error(EmptyInput) for an empty story.
PredictResult predict_missing(const Story& incomplete, const PipelineConfig& config);

// Throws Error(AllCandidatesMalformed) when no candidate survives repair.
StoryCandidates complete_two_module(const MaskedStory& masked, const PipelineConfig& config);

GapCandidates complete_v2(const MaskedStory& masked, const PipelineConfig& config);

EndToEndResult run_end_to_end(const Story& incomplete, const PipelineConfig& config);

struct AssistOptions {
    bool include_flow = true;
    bool include_likeness = true;
};

struct AssistResult {
    Story input_story;
    std::vector<int> gap_positions;  // completed-story coordinates
    std::vector<int> insert_before;  // indices into input_story
    std::vector<std::vector<Candidate>> candidates_per_gap;
    Story best_completion;
    // Whole-story rewrites for the two-module and end-to-end approaches.
    std::vector<Candidate> story_candidates;
    std::optional<double> story_likeness;
    std::optional<std::vector<VAPoint>> flow_before;
    std::optional<std::vector<VAPoint>> flow_after;
    Diagnostics diagnostics;
};

// Splices each gap's top candidate; gaps without candidates are dropped.
Story best_completion(const MaskedStory& masked, const std::vector<std::vector<Candidate>>& per_gap);

// Attaches story-likeness and Emotional Flow; scorer failures become
// diagnostics.
void attach_scores(AssistResult& result, const Scorers& scorers, const AssistOptions& options);

// Throws Error(EmptyInput) when segmentation yields nothing and rethrows
// BackendUnavailable / PoolExhausted; every other failure is reported
// through diagnostics.
AssistResult assist(std::string_view raw_text, const PipelineConfig& config, const Scorers& scorers = {},
                    const AssistOptions& options = {});

// For user-placed gaps: runs the completion stage of the configured
// approach (two_module or two_module_v2; end_to_end uses v2 when an SC
// pool is present).
AssistResult complete_masked(const MaskedStory& masked, const PipelineConfig& config, const Scorers& scorers = {},
                             const AssistOptions& options = {});

}  // namespace compass
