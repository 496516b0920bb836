#include "compass/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "compass/errors.hpp"

namespace compass {

namespace {

std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::map<std::vector<std::string>, long> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
    std::map<std::vector<std::string>, long> counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        ++counts[std::vector<std::string>(toks.begin() + static_cast<long>(i), toks.begin() + static_cast<long>(i + n))];
    }
    return counts;
}

}  // namespace

BleuStats bleu_stats(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
    if (candidates.empty()) throw Error(ErrorCode::EmptyCorpus, "BLEU needs at least one pair");
    if (candidates.size() != references.size()) {
        throw Error(ErrorCode::InvalidArgument, "BLEU candidate and reference counts differ");
    }
    BleuStats stats;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        const auto cand = whitespace_tokens(candidates[k]);
        const auto ref = whitespace_tokens(references[k]);
        stats.candidate_length += static_cast<long>(cand.size());
        stats.reference_length += static_cast<long>(ref.size());
        for (std::size_t n = 1; n <= 4; ++n) {
            const auto c = ngram_counts(cand, n);
            const auto r = ngram_counts(ref, n);
            for (const auto& [gram, count] : c) {
                const auto it = r.find(gram);
                stats.matches[n - 1] += std::min(count, it == r.end() ? 0L : it->second);
                stats.totals[n - 1] += count;
            }
        }
    }
    return stats;
}

double bleu_from_stats(const BleuStats& stats) {
    double log_sum = 0.0;
    int orders = 0;
    for (std::size_t n = 0; n < 4; ++n) {
        if (stats.totals[n] == 0) continue;
        if (stats.matches[n] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(stats.matches[n]) / static_cast<double>(stats.totals[n]));
        ++orders;
    }
    if (orders == 0) return stats.reference_length == 0 ? 100.0 : 0.0;
    const double c = static_cast<double>(stats.candidate_length);
    const double r = static_cast<double>(stats.reference_length);
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return 100.0 * bp * std::exp(log_sum / orders);
}

double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
    return bleu_from_stats(bleu_stats(candidates, references));
}

PositionMetrics position_metrics(const std::vector<int>& predicted, const std::vector<int>& gold) {
    const std::set<int> p(predicted.begin(), predicted.end());
    const std::set<int> g(gold.begin(), gold.end());
    PositionMetrics m;
    m.exact_match = p == g ? 1.0 : 0.0;
    if (p.empty() && g.empty()) {
        m.precision = m.recall = m.f1 = 1.0;
        return m;
    }
    std::size_t hit = 0;
    for (const int x : p) hit += g.count(x);
    m.precision = p.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(p.size());
    m.recall = g.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(g.size());
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

PositionMetrics mean_position_metrics(const std::vector<PositionMetrics>& per_instance) {
    if (per_instance.empty()) throw Error(ErrorCode::EmptyCorpus, "no position metrics to average");
    PositionMetrics mean;
    for (const auto& m : per_instance) {
        mean.exact_match += m.exact_match;
        mean.precision += m.precision;
        mean.recall += m.recall;
        mean.f1 += m.f1;
    }
    const double n = static_cast<double>(per_instance.size());
    mean.exact_match /= n;
    mean.precision /= n;
    mean.recall /= n;
    mean.f1 /= n;
    return mean;
}

double mean_length(const std::vector<std::string>& texts) {
    if (texts.empty()) throw Error(ErrorCode::EmptyCorpus, "mean_length of no texts");
    double total = 0.0;
    for (const auto& t : texts) total += static_cast<double>(whitespace_tokens(t).size());
    return total / static_cast<double>(texts.size());
}

ExternalScore score_with_external(ExternalScorer& scorer, const std::vector<std::string>& candidates,
                                  const std::vector<std::string>& references) {
    ExternalScore out;
    out.name = scorer.name();
    out.per_instance = scorer.score(candidates, references);
    if (out.per_instance.size() != candidates.size()) {
        throw Error(ErrorCode::AdapterUnavailable, out.name + " returned " + std::to_string(out.per_instance.size()) +
                                                       " scores for " + std::to_string(candidates.size()) + " texts");
    }
    if (out.per_instance.empty()) throw Error(ErrorCode::EmptyCorpus, "nothing to score");
    double acc = 0.0;
    if (scorer.aggregate() == Aggregate::threshold_ratio) {
        out.aggregate_kind = "threshold_ratio";
        for (const double s : out.per_instance) acc += s >= kStoryLikeThreshold ? 1.0 : 0.0;
    } else {
        out.aggregate_kind = "mean";
        for (const double s : out.per_instance) acc += s;
    }
    out.aggregate = acc / static_cast<double>(out.per_instance.size());
    return out;
}

namespace {

class MockScorer final : public ExternalScorer {
public:
    MockScorer(std::string name, Aggregate agg, std::vector<double> scores)
        : name_(std::move(name)), agg_(agg), scores_(std::move(scores)) {}
    std::string name() const override { return name_; }
    Aggregate aggregate() const override { return agg_; }
    std::vector<double> score(const std::vector<std::string>& candidates, const std::vector<std::string>&) override {
        if (scores_.empty()) throw Error(ErrorCode::AdapterUnavailable, name_ + " has no scores configured");
        std::vector<double> out;
        for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back(scores_[i % scores_.size()]);
        return out;
    }

private:
    std::string name_;
    Aggregate agg_;
    std::vector<double> scores_;
};

class SubprocessScorer final : public ExternalScorer {
public:
    SubprocessScorer(std::string name, Aggregate agg, std::string command)
        : name_(std::move(name)), agg_(agg), command_(std::move(command)) {}
    std::string name() const override { return name_; }
    Aggregate aggregate() const override { return agg_; }
    std::vector<double> score(const std::vector<std::string>& candidates,
                              const std::vector<std::string>& references) override {
        static std::atomic<long> counter{0};
        const auto path = std::filesystem::temp_directory_path() /
                          ("compass_scorer_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".jsonl");
        {
            std::ofstream out(path);
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                nlohmann::json line{{"candidate", candidates[i]}};
                if (i < references.size()) line["reference"] = references[i];
                out << line.dump() << '\n';
            }
        }
        const std::string cmd = command_ + " < '" + path.string() + "'";
        FILE* pipe = ::popen(cmd.c_str(), "r");
        if (!pipe) {
            std::filesystem::remove(path);
            throw Error(ErrorCode::AdapterUnavailable, name_ + ": cannot start '" + command_ + "'");
        }
        std::string output;
        char buf[4096];
        while (const std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) output.append(buf, got);
        const int status = ::pclose(pipe);
        std::filesystem::remove(path);
        if (status != 0) {
            throw Error(ErrorCode::AdapterUnavailable, name_ + ": '" + command_ + "' exited with status " +
                                                           std::to_string(status));
        }
        std::vector<double> scores;
        std::istringstream lines(output);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                scores.push_back(std::stod(line));
            } catch (const std::exception&) {
                throw Error(ErrorCode::AdapterUnavailable, name_ + ": unparsable score line '" + line + "'");
            }
        }
        return scores;
    }

private:
    std::string name_;
    Aggregate agg_;
    std::string command_;
};

class LikenessAdapter final : public ExternalScorer {
public:
    LikenessAdapter(std::shared_ptr<const LikenessScorer> scorer, std::string name)
        : scorer_(std::move(scorer)), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    Aggregate aggregate() const override { return Aggregate::threshold_ratio; }
    std::vector<double> score(const std::vector<std::string>& candidates, const std::vector<std::string>&) override {
        std::vector<double> out;
        try {
            for (const auto& c : candidates) out.push_back(std::clamp(scorer_->score(c), 0.0, 1.0));
        } catch (const std::exception& e) {
            throw Error(ErrorCode::AdapterUnavailable, name_ + ": " + e.what());
        }
        return out;
    }

private:
    std::shared_ptr<const LikenessScorer> scorer_;
    std::string name_;
};

Aggregate parse_aggregate(const std::string& s) {
    if (s == "threshold_ratio") return Aggregate::threshold_ratio;
    if (s == "mean") return Aggregate::mean;
    throw Error(ErrorCode::InvalidArgument, "unknown aggregate '" + s + "'");
}

}  // namespace

std::unique_ptr<ExternalScorer> make_mock_scorer(std::string name, Aggregate aggregate, std::vector<double> scores) {
    return std::make_unique<MockScorer>(std::move(name), aggregate, std::move(scores));
}

std::unique_ptr<ExternalScorer> make_subprocess_scorer(std::string name, Aggregate aggregate, std::string command) {
    return std::make_unique<SubprocessScorer>(std::move(name), aggregate, std::move(command));
}

std::unique_ptr<ExternalScorer> make_likeness_adapter(std::shared_ptr<const LikenessScorer> scorer, std::string name) {
    return std::make_unique<LikenessAdapter>(std::move(scorer), std::move(name));
}

std::unique_ptr<ExternalScorer> external_scorer_from_config(const nlohmann::json& config) {
    const auto name = config.at("name").get<std::string>();
    const auto kind = config.at("kind").get<std::string>();
    const auto agg = parse_aggregate(config.value("aggregate", std::string("mean")));
    if (kind == "mock") return make_mock_scorer(name, agg, config.at("scores").get<std::vector<double>>());
    if (kind == "subprocess") return make_subprocess_scorer(name, agg, config.at("command").get<std::string>());
    if (kind == "likeness") {
        return make_likeness_adapter(likeness_scorer_from_config(config.value("scorer", nlohmann::json::object())), name);
    }
    throw Error(ErrorCode::AdapterUnavailable, "unknown adapter kind '" + kind + "'");
}

nlohmann::ordered_json MetricReport::to_json() const {
    nlohmann::ordered_json j;
    j["approach"] = approach;
    j["split"] = split;
    j["bleu_variant"] = kBleuVariant;
    j["count"] = count;
    j["errors"] = errors;
    j["bleu"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : bleu) j["bleu"][k] = v;
    j["mean_length"] = mean_length;
    j["position"] = {{"exact_match", position.exact_match},
                     {"precision", position.precision},
                     {"recall", position.recall},
                     {"f1", position.f1}};
    j["learned"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : learned) j["learned"][k] = v;
    j["unavailable"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : unavailable) j["unavailable"][k] = v;
    return j;
}

MetricReport evaluate_run(const std::vector<CorruptedExample>& split, const PipelineConfig& config,
                          const std::string& split_name, const std::vector<ExternalScorer*>& adapters) {
    if (split.empty()) throw Error(ErrorCode::EmptyCorpus, "evaluation split is empty");
    config.validate();
    MetricReport report;
    report.approach = std::string(to_string(config.approach));
    report.split = split_name;

    const Markers markers = config.markers();
    std::vector<std::string> mpp_cand, mpp_ref, sc_cand, sc_ref, final_cand, final_ref;
    std::vector<PositionMetrics> positions;

    auto complete_text = [&](const MaskedStory& masked) {
        if (config.approach == Approach::two_module) {
            return render_story(complete_two_module(masked, config).candidates.front().story);
        }
        return render_story(best_completion(masked, complete_v2(masked, config).per_gap));
    };

    for (const auto& ex : split) {
        const Story incomplete{ex.original.story_id, ex.incomplete, ex.original.language};
        const std::string original = render_story(ex.original);
        try {
            if (config.approach == Approach::end_to_end) {
                const auto e2e = run_end_to_end(incomplete, config);
                const std::string out =
                    e2e.candidates.empty() ? std::string() : render_story(e2e.candidates.front().story);
                final_cand.push_back(out);
                final_ref.push_back(original);
                positions.push_back(position_metrics(e2e.masked.gap_positions(), ex.missing_ids));
            } else {
                const auto predicted = predict_missing(incomplete, config);
                const std::string gold_sc = complete_text(ex.masked);
                const std::string chained = predicted.masked == ex.masked ? gold_sc : complete_text(predicted.masked);
                mpp_cand.push_back(normalize_whitespace(predicted.raw_output));
                mpp_ref.push_back(encode_masked(ex.masked, markers.missing));
                sc_cand.push_back(gold_sc);
                sc_ref.push_back(original);
                final_cand.push_back(chained);
                final_ref.push_back(original);
                positions.push_back(position_metrics(predicted.masked.gap_positions(), ex.missing_ids));
            }
            ++report.count;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::BackendUnavailable || e.code() == ErrorCode::PoolExhausted) throw;
            ++report.errors;
        }
    }
    if (report.count == 0) return report;

    if (config.approach == Approach::end_to_end) {
        report.bleu["e2e"] = bleu(final_cand, final_ref);
    } else {
        report.bleu["vnmpp"] = bleu(mpp_cand, mpp_ref);
        report.bleu[config.approach == Approach::two_module ? "sc" : "sc_v2"] = bleu(sc_cand, sc_ref);
        report.bleu["pipeline"] = bleu(final_cand, final_ref);
    }
    report.mean_length = mean_length(final_cand);
    report.position = mean_position_metrics(positions);
    for (ExternalScorer* adapter : adapters) {
        try {
            report.learned[adapter->name()] = score_with_external(*adapter, final_cand, final_ref).aggregate;
        } catch (const Error& e) {
            report.unavailable[adapter->name()] = e.what();
        }
    }
    return report;
}

}  // namespace compass
