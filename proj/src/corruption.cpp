#include "compass/corruption.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "compass/errors.hpp"

namespace compass {

CorruptionPolicy CorruptionPolicy::roc() { return {"roc", 0, MaxRule::fixed(2), false, 0}; }

CorruptionPolicy CorruptionPolicy::cnndm() { return {"cnndm", 0, MaxRule::min_of_cap(9), false, 0}; }

CorruptionPolicy CorruptionPolicy::by_name(std::string_view name) {
    if (name == "roc") return roc();
    if (name == "cnndm") return cnndm();
    throw Error(ErrorCode::InvalidPolicy, "unknown policy '" + std::string(name) + "'");
}

int CorruptionPolicy::effective_max(int n) const {
    int hi = m_max.kind == MaxRule::Kind::Fixed ? m_max.value : std::min(m_max.value, n);
    hi = std::min(hi, n);
    if (forbid_empty) hi = std::min(hi, n - 1);
    if (m_min < 0 || hi < m_min) {
        throw Error(ErrorCode::InvalidPolicy, "empty missing-count range [" + std::to_string(m_min) + ", " +
                                                  std::to_string(hi) + "] for n=" + std::to_string(n));
    }
    return hi;
}

int sample_missing_count(int n_sentences, const CorruptionPolicy& policy, Rng& rng) {
    if (n_sentences < 1) throw Error(ErrorCode::InvalidArgument, "story must have at least one sentence");
    const int hi = policy.effective_max(n_sentences);
    return static_cast<int>(rng.uniform_int(policy.m_min, hi));
}

CorruptedExample corrupt(const Story& story, std::vector<int> missing_ids) {
    const int n = static_cast<int>(story.sentences.size());
    std::sort(missing_ids.begin(), missing_ids.end());
    for (std::size_t k = 0; k < missing_ids.size(); ++k) {
        if (missing_ids[k] < 0 || missing_ids[k] >= n) {
            throw Error(ErrorCode::IndexOutOfRange,
                        "missing id " + std::to_string(missing_ids[k]) + " not in [0, " + std::to_string(n - 1) + "]");
        }
        if (k > 0 && missing_ids[k] == missing_ids[k - 1]) {
            throw Error(ErrorCode::DuplicateIndex, "missing id " + std::to_string(missing_ids[k]) + " repeated");
        }
    }
    CorruptedExample ex;
    ex.original = story;
    ex.missing_ids = missing_ids;
    // Delete the chosen sentences first, then insert markers where they were.
    std::size_t next = 0;
    for (int i = 0; i < n; ++i) {
        const auto& s = story.sentences[static_cast<std::size_t>(i)];
        if (next < missing_ids.size() && missing_ids[next] == i) {
            ex.targets.push_back(s);
            ex.masked.elements.push_back(MaskedElement::make_gap());
            ++next;
        } else {
            ex.incomplete.push_back(s);
            ex.masked.elements.push_back(MaskedElement::sentence(s));
        }
    }
    return ex;
}

CorruptedExample sample_corruption(const Story& story, const CorruptionPolicy& policy, Rng& rng) {
    const int n = static_cast<int>(story.sentences.size());
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "story '" + story.story_id + "' is empty");
    const int m = sample_missing_count(n, policy, rng);
    // Partial Fisher-Yates: uniform over m-subsets.
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    for (int k = 0; k < m; ++k) {
        const auto j = static_cast<std::size_t>(k) + rng.below(static_cast<std::uint64_t>(n - k));
        std::swap(ids[static_cast<std::size_t>(k)], ids[j]);
    }
    ids.resize(static_cast<std::size_t>(m));
    return corrupt(story, std::move(ids));
}

Rng corruption_stream(std::uint64_t seed, Split split, const std::string& story_id, int epoch) {
    const std::string epoch_label = "epoch-" + std::to_string(epoch);
    return Rng::derive(seed, {to_string(split), story_id, epoch_label});
}

std::vector<CorruptedExample> make_static_split(const Corpus& corpus, const CorruptionPolicy& policy,
                                                std::uint64_t seed) {
    if (corpus.split == Split::train) {
        throw Error(ErrorCode::InvalidArgument, "train split is corrupted dynamically, not frozen");
    }
    std::vector<CorruptedExample> out;
    out.reserve(corpus.stories.size());
    for (const auto& story : corpus.stories) {
        Rng rng = corruption_stream(seed, corpus.split, story.story_id);
        out.push_back(sample_corruption(story, policy, rng));
    }
    return out;
}

std::vector<CorruptedExample> enumerate_corruptions(const Story& story, const CorruptionPolicy& policy,
                                                    std::size_t max_variants) {
    const int n = static_cast<int>(story.sentences.size());
    const int hi = policy.effective_max(n);
    // Count first so oversized requests fail before allocating.
    std::size_t total = 0;
    for (int m = policy.m_min; m <= hi; ++m) {
        double c = 1.0;
        for (int k = 0; k < m; ++k) c = c * (n - k) / (k + 1);
        total += static_cast<std::size_t>(c + 0.5);
        if (total > max_variants) {
            throw Error(ErrorCode::TooManyVariants, "more than " + std::to_string(max_variants) + " variants");
        }
    }
    std::vector<std::vector<int>> sets;
    sets.reserve(total);
    for (int m = policy.m_min; m <= hi; ++m) {
        std::vector<int> combo(static_cast<std::size_t>(m));
        std::iota(combo.begin(), combo.end(), 0);
        while (true) {
            sets.push_back(combo);
            int k = m - 1;
            while (k >= 0 && combo[static_cast<std::size_t>(k)] == n - m + k) --k;
            if (k < 0) break;
            ++combo[static_cast<std::size_t>(k)];
            for (int j = k + 1; j < m; ++j) combo[static_cast<std::size_t>(j)] = combo[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    std::sort(sets.begin(), sets.end());
    std::vector<CorruptedExample> out;
    out.reserve(sets.size());
    for (auto& ids : sets) out.push_back(corrupt(story, std::move(ids)));
    return out;
}

std::string corrupted_to_json_line(const CorruptedExample& ex) {
    nlohmann::ordered_json j;
    j["story_id"] = ex.original.story_id;
    j["missing_ids"] = ex.missing_ids;
    j["incomplete"] = ex.incomplete;
    j["targets"] = ex.targets;
    if (ex.original.language != "en") j["language"] = ex.original.language;
    return j.dump();
}

std::vector<CorruptedExample> parse_corrupted_jsonl(std::istream& in) {
    std::vector<CorruptedExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (normalize_whitespace(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto incomplete = j.at("incomplete").get<std::vector<std::string>>();
            const auto targets = j.at("targets").get<std::vector<std::string>>();
            auto ids = j.at("missing_ids").get<std::vector<int>>();
            if (ids.size() != targets.size()) throw ParseError(line_no, "missing_ids and targets differ in length");
            if (!std::is_sorted(ids.begin(), ids.end())) throw ParseError(line_no, "missing_ids not sorted");
            // Rebuild the original by splicing targets into the gaps.
            Story original;
            original.story_id = j.at("story_id").get<std::string>();
            original.language = j.value("language", std::string("en"));
            const MaskedStory masked = masked_from_positions(incomplete, ids);
            original.sentences = splice(masked, CompletionSequence{targets}).sentences;
            out.push_back(corrupt(original, ids));
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return out;
}

void save_corrupted_split(const std::vector<CorruptedExample>& examples, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (const auto& ex : examples) out << corrupted_to_json_line(ex) << '\n';
}

std::vector<CorruptedExample> load_corrupted_split(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return parse_corrupted_jsonl(in);
}

std::string manifest_to_json(const SplitManifest& m) {
    nlohmann::ordered_json j;
    j["policy"] = m.policy;
    j["m_min"] = m.m_min;
    j["max_rule"] = m.max_rule;
    j["max_value"] = m.max_value;
    j["forbid_empty"] = m.forbid_empty;
    j["seed"] = m.seed;
    j["split"] = m.split;
    j["count"] = m.count;
    j["source"] = m.source;
    j["id_sampling"] = "uniform-without-replacement";
    return j.dump(2);
}

SplitManifest make_manifest(const CorruptionPolicy& policy, std::uint64_t seed, const Corpus& corpus,
                            std::size_t count) {
    SplitManifest m;
    m.policy = policy.name;
    m.m_min = policy.m_min;
    m.max_rule = policy.m_max.kind == MaxRule::Kind::Fixed ? "fixed" : "min_of_cap";
    m.max_value = policy.m_max.value;
    m.forbid_empty = policy.forbid_empty;
    m.seed = seed;
    m.split = std::string(to_string(corpus.split));
    m.count = count;
    m.source = corpus.source;
    return m;
}

}  // namespace compass
