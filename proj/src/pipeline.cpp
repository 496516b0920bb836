#include "compass/pipeline.hpp"

#include <algorithm>

#include "compass/alignment.hpp"
#include "compass/errors.hpp"

namespace compass {

namespace {

void append(Diagnostics& into, const Diagnostics& from) { into.insert(into.end(), from.begin(), from.end()); }

GenerationResult run_backend(BackendPool& pool, std::string_view input, const GenerationParams& params) {
    auto lease = pool.acquire();
    return lease->generate(input, params);
}

MaskedStory no_gaps(const std::vector<std::string>& input) { return masked_from_insertions(input, {}); }

// Element index of every non-gap element, in order.
std::vector<int> context_elements(const MaskedStory& masked) {
    std::vector<int> out;
    for (std::size_t i = 0; i < masked.elements.size(); ++i) {
        if (!masked.elements[i].gap) out.push_back(static_cast<int>(i));
    }
    return out;
}

// Fits a generated full story onto the masked slots. Returns nullopt when
// the sentence counts cannot be reconciled segment by segment.
std::optional<std::vector<std::string>> repair_story(const MaskedStory& masked, const std::vector<std::string>& out) {
    if (out.size() == masked.size()) return out;
    const auto ctx = masked.context();
    const auto ctx_elem = context_elements(masked);
    auto pairs = align_sentences(ctx, out);
    pairs.emplace_back(static_cast<int>(ctx.size()), static_cast<int>(out.size()));
    std::vector<std::string> result(masked.size());
    int prev_c = -1, prev_j = -1;
    for (const auto& [c, j] : pairs) {
        const int elem_lo = prev_c < 0 ? 0 : ctx_elem[static_cast<std::size_t>(prev_c)] + 1;
        const int elem_hi = c < static_cast<int>(ctx.size()) ? ctx_elem[static_cast<std::size_t>(c)]
                                                              : static_cast<int>(masked.size());
        std::vector<int> slots, gap_slots;
        for (int e = elem_lo; e < elem_hi; ++e) {
            slots.push_back(e);
            if (masked.elements[static_cast<std::size_t>(e)].gap) gap_slots.push_back(e);
        }
        std::vector<std::string> unmatched(out.begin() + prev_j + 1, out.begin() + j);
        if (unmatched.size() == slots.size()) {
            for (std::size_t k = 0; k < slots.size(); ++k) result[static_cast<std::size_t>(slots[k])] = unmatched[k];
        } else if (unmatched.size() == gap_slots.size()) {
            std::size_t u = 0;
            for (const int e : slots) {
                const auto& el = masked.elements[static_cast<std::size_t>(e)];
                result[static_cast<std::size_t>(e)] = el.gap ? unmatched[u++] : el.text;
            }
        } else {
            return std::nullopt;
        }
        if (c < static_cast<int>(ctx.size())) result[static_cast<std::size_t>(elem_hi)] = out[static_cast<std::size_t>(j)];
        prev_c = c;
        prev_j = j;
    }
    return result;
}

std::vector<std::vector<Candidate>> per_gap_from_stories(const MaskedStory& masked,
                                                         const std::vector<StoryCandidate>& stories,
                                                         int num_candidates) {
    const auto positions = masked.gap_positions();
    std::vector<std::vector<Candidate>> per_gap(positions.size());
    for (const auto& sc : stories) {
        if (sc.story.size() != masked.size()) continue;
        for (std::size_t g = 0; g < positions.size(); ++g) {
            per_gap[g].push_back({sc.story.sentences[static_cast<std::size_t>(positions[g])], sc.score});
        }
    }
    for (auto& list : per_gap) list = finalize_candidates(std::move(list), num_candidates);
    return per_gap;
}

}  // namespace

std::string_view to_string(Approach approach) {
    switch (approach) {
        case Approach::two_module: return "two_module";
        case Approach::two_module_v2: return "two_module_v2";
        case Approach::end_to_end: return "end_to_end";
    }
    return "?";
}

Approach parse_approach(std::string_view name) {
    if (name == "two_module") return Approach::two_module;
    if (name == "two_module_v2" || name == "v2") return Approach::two_module_v2;
    if (name == "end_to_end" || name == "e2e") return Approach::end_to_end;
    throw Error(ErrorCode::InvalidArgument, "unknown approach '" + std::string(name) + "'");
}

void PipelineConfig::validate() const {
    params.validate();
    auto require = [](const std::shared_ptr<BackendPool>& pool, const char* what) {
        if (!pool) throw Error(ErrorCode::BackendUnavailable, std::string(what) + " backend not configured");
    };
    if (approach == Approach::end_to_end) {
        require(e2e, "end-to-end");
    } else {
        require(vnmpp, "VN-MPP");
        require(sc, "SC");
        if (!(vnmpp->manifest().markers.missing == sc->manifest().markers.missing)) {
            throw Error(ErrorCode::InvalidArgument, "VN-MPP and SC backends disagree on the missing-sentence marker");
        }
    }
}

Markers PipelineConfig::markers() const {
    if (approach == Approach::end_to_end && e2e) return e2e->manifest().markers;
    if (sc) return sc->manifest().markers;
    if (vnmpp) return vnmpp->manifest().markers;
    return {};
}

PredictResult reconcile(const MaskedStory& parsed, const std::vector<std::string>& input) {
    PredictResult result;
    const auto ctx = parsed.context();
    const auto pairs = align_sentences(ctx, input);
    if (pairs.size() * 2 < input.size()) {
        result.masked = no_gaps(input);
        result.diagnostics.push_back({"ReconciliationFailure", "only " + std::to_string(pairs.size()) + " of " +
                                                                   std::to_string(input.size()) +
                                                                   " input sentences aligned; gaps discarded"});
        return result;
    }
    std::vector<int> anchor(ctx.size(), -1);
    for (const auto& [p, i] : pairs) anchor[static_cast<std::size_t>(p)] = i;

    const int k = static_cast<int>(input.size());
    std::vector<int> inserts;
    int last_anchor = -1, unmatched = 0, drift = 0, dropped = 0;
    std::size_t c = 0;
    for (const auto& el : parsed.elements) {
        if (el.gap) {
            int next_anchor = k;
            for (std::size_t q = c; q < ctx.size(); ++q) {
                if (anchor[q] >= 0) {
                    next_anchor = anchor[q];
                    break;
                }
            }
            inserts.push_back(std::min(last_anchor + 1 + unmatched, next_anchor));
            continue;
        }
        if (anchor[c] >= 0) {
            last_anchor = anchor[c];
            unmatched = 0;
            if (ctx[c] != input[static_cast<std::size_t>(anchor[c])]) ++drift;
        } else {
            ++unmatched;
            ++dropped;
        }
        ++c;
    }
    result.masked = masked_from_insertions(input, inserts);
    if (drift > 0) {
        result.diagnostics.push_back(
            {"ContextDrift", std::to_string(drift) + " context sentence(s) paraphrased; originals kept"});
    }
    if (dropped > 0) {
        result.diagnostics.push_back(
            {"UnalignedSentence", std::to_string(dropped) + " generated sentence(s) matched no input sentence"});
    }
    return result;
}

std::optional<MaskedStory> infer_insertions(const std::vector<std::string>& input,
                                            const std::vector<std::string>& output) {
    const auto pairs = align_sentences(input, output);
    if (pairs.size() * 2 < input.size()) return std::nullopt;
    std::vector<bool> matched(output.size(), false);
    std::vector<int> in_of_out(output.size(), -1);
    for (const auto& [i, j] : pairs) {
        matched[static_cast<std::size_t>(j)] = true;
        in_of_out[static_cast<std::size_t>(j)] = i;
    }
    std::vector<int> inserts;
    int last = -1;
    for (std::size_t j = 0; j < output.size(); ++j) {
        if (matched[j]) {
            last = in_of_out[j];
        } else {
            inserts.push_back(last + 1);
        }
    }
    return masked_from_insertions(input, inserts);
}

PredictResult predict_missing(const Story& incomplete, const PipelineConfig& config) {
    if (incomplete.sentences.empty()) throw Error(ErrorCode::EmptyInput, "story has no sentences");
    if (!config.vnmpp) throw Error(ErrorCode::BackendUnavailable, "VN-MPP backend not configured");
    const auto markers = config.vnmpp->manifest().markers;
    const auto gen = run_backend(*config.vnmpp, render_story(incomplete), config.params);
    if (gen.candidates.empty()) {
        PredictResult r{no_gaps(incomplete.sentences), gen.diagnostics, {}};
        r.diagnostics.push_back({"NoCandidates", "VN-MPP backend returned nothing; assuming no gaps"});
        return r;
    }
    const ParsedMasked parsed = parse_masked(gen.candidates.front().text, markers.missing);
    PredictResult result = reconcile(parsed.story, incomplete.sentences);
    result.raw_output = gen.candidates.front().text;
    Diagnostics all = gen.diagnostics;
    append(all, parsed.diagnostics);
    append(all, result.diagnostics);
    result.diagnostics = std::move(all);
    return result;
}

StoryCandidates complete_two_module(const MaskedStory& masked, const PipelineConfig& config) {
    StoryCandidates result;
    if (masked.gap_count() == 0) {
        result.candidates.push_back({Story{"", masked.context(), "en"}, 0.0});
        return result;
    }
    if (!config.sc) throw Error(ErrorCode::BackendUnavailable, "SC backend not configured");
    const auto markers = config.sc->manifest().markers;
    const auto gen = run_backend(*config.sc, encode_masked(masked, markers.missing), config.params);
    result.diagnostics = gen.diagnostics;
    for (std::size_t k = 0; k < gen.candidates.size(); ++k) {
        const auto& cand = gen.candidates[k];
        const auto repaired = repair_story(masked, split_sentences(cand.text));
        if (!repaired) {
            result.diagnostics.push_back(
                {"MalformedCandidate", "candidate " + std::to_string(k) + " does not fit the masked story; dropped"});
            continue;
        }
        result.candidates.push_back({Story{"", *repaired, "en"}, cand.score});
    }
    if (result.candidates.empty()) {
        throw Error(ErrorCode::AllCandidatesMalformed, "no SC candidate fits the " + std::to_string(masked.size()) +
                                                           "-slot masked story");
    }
    return result;
}

GapCandidates complete_v2(const MaskedStory& masked, const PipelineConfig& config) {
    GapCandidates result;
    const int gaps = static_cast<int>(masked.gap_count());
    result.per_gap.resize(static_cast<std::size_t>(gaps));
    if (gaps == 0) return result;
    if (!config.sc) throw Error(ErrorCode::BackendUnavailable, "SC backend not configured");
    const auto markers = config.sc->manifest().markers;
    const auto gen = run_backend(*config.sc, encode_masked(masked, markers.missing), config.params);
    result.diagnostics = gen.diagnostics;
    for (std::size_t k = 0; k < gen.candidates.size(); ++k) {
        const auto& cand = gen.candidates[k];
        const ParsedCompletion parsed = parse_completion_output(cand.text, gaps, markers.completion);
        for (const auto& d : parsed.diagnostics) {
            result.diagnostics.push_back({d.kind, "candidate " + std::to_string(k) + ": " + d.message});
        }
        for (std::size_t g = 0; g < parsed.completion.sentences.size(); ++g) {
            result.per_gap[g].push_back({parsed.completion.sentences[g], cand.score});
        }
    }
    for (auto& list : result.per_gap) list = finalize_candidates(std::move(list), config.params.num_candidates);
    return result;
}

EndToEndResult run_end_to_end(const Story& incomplete, const PipelineConfig& config) {
    if (incomplete.sentences.empty()) throw Error(ErrorCode::EmptyInput, "story has no sentences");
    if (!config.e2e) throw Error(ErrorCode::BackendUnavailable, "end-to-end backend not configured");
    EndToEndResult result;
    result.masked = no_gaps(incomplete.sentences);
    const auto gen = run_backend(*config.e2e, render_story(incomplete), config.params);
    result.diagnostics = gen.diagnostics;
    std::vector<std::optional<MaskedStory>> inferred;
    for (std::size_t k = 0; k < gen.candidates.size(); ++k) {
        auto sentences = split_sentences(gen.candidates[k].text);
        if (sentences.empty()) {
            result.diagnostics.push_back({"MalformedCandidate", "candidate " + std::to_string(k) + " is empty"});
            continue;
        }
        inferred.push_back(infer_insertions(incomplete.sentences, sentences));
        result.candidates.push_back({Story{"", std::move(sentences), "en"}, gen.candidates[k].score});
    }
    if (result.candidates.empty()) {
        result.diagnostics.push_back({"AllCandidatesMalformed", "end-to-end backend produced no usable story"});
        return result;
    }
    if (!inferred.front()) {
        result.diagnostics.push_back({"ReconciliationFailure", "top output does not align with the input"});
        return result;
    }
    result.masked = *inferred.front();
    const auto ins = result.masked.insert_before();
    result.per_gap.resize(ins.size());
    for (std::size_t k = 0; k < result.candidates.size(); ++k) {
        if (!inferred[k] || inferred[k]->insert_before() != ins) continue;
        // Unmatched output sentences, in order, are this candidate's gap fills.
        const auto& out = result.candidates[k].story.sentences;
        const auto pairs = align_sentences(incomplete.sentences, out);
        std::vector<bool> matched(out.size(), false);
        for (const auto& [i, j] : pairs) matched[static_cast<std::size_t>(j)] = true;
        std::size_t g = 0;
        for (std::size_t j = 0; j < out.size() && g < ins.size(); ++j) {
            if (!matched[j]) result.per_gap[g++].push_back({out[j], result.candidates[k].score});
        }
    }
    for (auto& list : result.per_gap) list = finalize_candidates(std::move(list), config.params.num_candidates);
    return result;
}

Story best_completion(const MaskedStory& masked, const std::vector<std::vector<Candidate>>& per_gap) {
    Story story;
    std::size_t g = 0;
    for (const auto& el : masked.elements) {
        if (!el.gap) {
            story.sentences.push_back(el.text);
        } else {
            if (g < per_gap.size() && !per_gap[g].empty()) story.sentences.push_back(per_gap[g].front().text);
            ++g;
        }
    }
    return story;
}

void attach_scores(AssistResult& result, const Scorers& scorers, const AssistOptions& options) {
    auto guarded = [&](const char* what, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            result.diagnostics.push_back({"ScorerUnavailable", std::string(what) + ": " + e.what()});
        }
    };
    if (options.include_likeness && scorers.likeness && !result.best_completion.sentences.empty()) {
        guarded("story_likeness", [&] { result.story_likeness = story_likeness(result.best_completion, *scorers.likeness); });
    }
    if (options.include_flow && scorers.vad) {
        guarded("emotional_flow", [&] {
            result.flow_before = emotional_flow(result.input_story, *scorers.vad);
            result.flow_after = emotional_flow(result.best_completion, *scorers.vad);
        });
    }
}

namespace {

bool is_infrastructure(const Error& e) {
    return e.code() == ErrorCode::BackendUnavailable || e.code() == ErrorCode::PoolExhausted;
}

void fill_from_masked(AssistResult& r, const MaskedStory& masked, std::vector<std::vector<Candidate>> per_gap) {
    r.gap_positions = masked.gap_positions();
    r.insert_before = masked.insert_before();
    per_gap.resize(r.gap_positions.size());
    r.best_completion = best_completion(masked, per_gap);
    r.candidates_per_gap = std::move(per_gap);
}

void run_completion(AssistResult& r, const MaskedStory& masked, const PipelineConfig& config) {
    if (config.approach == Approach::two_module) {
        const auto sc = complete_two_module(masked, config);
        append(r.diagnostics, sc.diagnostics);
        for (const auto& c : sc.candidates) r.story_candidates.push_back({render_story(c.story), c.score});
        fill_from_masked(r, masked, per_gap_from_stories(masked, sc.candidates, config.params.num_candidates));
    } else {
        auto v2 = complete_v2(masked, config);
        append(r.diagnostics, v2.diagnostics);
        fill_from_masked(r, masked, std::move(v2.per_gap));
    }
}

}  // namespace

AssistResult assist(std::string_view raw_text, const PipelineConfig& config, const Scorers& scorers,
                    const AssistOptions& options) {
    AssistResult r;
    r.input_story = segment_text(raw_text);
    r.best_completion = Story{"", r.input_story.sentences, r.input_story.language};
    try {
        config.validate();
        if (config.approach == Approach::end_to_end) {
            auto e2e = run_end_to_end(r.input_story, config);
            append(r.diagnostics, e2e.diagnostics);
            for (const auto& c : e2e.candidates) r.story_candidates.push_back({render_story(c.story), c.score});
            fill_from_masked(r, e2e.masked, std::move(e2e.per_gap));
        } else {
            const auto predicted = predict_missing(r.input_story, config);
            append(r.diagnostics, predicted.diagnostics);
            fill_from_masked(r, predicted.masked, {});
            run_completion(r, predicted.masked, config);
        }
    } catch (const Error& e) {
        if (is_infrastructure(e)) throw;
        r.diagnostics.push_back({std::string(to_string(e.code())), e.what()});
    }
    r.best_completion.language = r.input_story.language;
    attach_scores(r, scorers, options);
    return r;
}

AssistResult complete_masked(const MaskedStory& masked, const PipelineConfig& config, const Scorers& scorers,
                             const AssistOptions& options) {
    AssistResult r;
    r.input_story = Story{"", masked.context(), "en"};
    fill_from_masked(r, masked, {});
    try {
        config.params.validate();
        PipelineConfig stage = config;
        if (stage.approach == Approach::end_to_end) stage.approach = Approach::two_module_v2;
        run_completion(r, masked, stage);
    } catch (const Error& e) {
        if (is_infrastructure(e)) throw;
        r.diagnostics.push_back({std::string(to_string(e.code())), e.what()});
    }
    attach_scores(r, scorers, options);
    return r;
}

}  // namespace compass
