#pragma once

// Fifty stories with distinct, unambiguous sentences and oracle backends
// that answer every enumerated corruption of them.

#include <memory>
#include <string>
#include <vector>

#include "compass/backend.hpp"
#include "compass/corruption.hpp"
#include "compass/finetune.hpp"
#include "compass/pipeline.hpp"

namespace compass::testing {

inline std::vector<Story> oracle_stories(int count = 50) {
    static const std::vector<std::string> names = {"Mara", "Owen", "Priya", "Lukas", "Ines", "Tariq", "June"};
    static const std::vector<std::string> verbs = {"walked to", "painted", "cleaned", "visited", "fixed",
                                                   "photographed", "sketched"};
    static const std::vector<std::string> places = {"the lake", "the barn", "the old bridge", "the library",
                                                    "the harbor", "the garden", "the station"};
    std::vector<Story> stories;
    for (int k = 0; k < count; ++k) {
        Story s{"o" + std::to_string(k), {}, "en"};
        const int n = 3 + k % 4;  // 3..6 sentences
        for (int j = 0; j < n; ++j) {
            const auto& name = names[(k + j) % names.size()];
            const auto& verb = verbs[(k * 3 + j) % verbs.size()];
            const auto& place = places[(k + 2 * j) % places.size()];
            s.sentences.push_back(name + " " + verb + " " + place + " in week " + std::to_string(k) + " part " +
                                  std::to_string(j) + ".");
        }
        stories.push_back(std::move(s));
    }
    return stories;
}

// Every removal that leaves at least one sentence.
inline CorruptionPolicy oracle_policy() {
    CorruptionPolicy p;
    p.name = "oracle";
    p.m_min = 0;
    p.m_max = MaxRule::min_of_cap(9);
    p.forbid_empty = true;
    return p;
}

inline std::vector<CorruptedExample> oracle_examples(const std::vector<Story>& stories) {
    std::vector<CorruptedExample> all;
    for (const auto& s : stories) {
        for (auto& e : enumerate_corruptions(s, oracle_policy())) all.push_back(std::move(e));
    }
    return all;
}

inline std::shared_ptr<BackendPool> oracle_pool(const std::vector<CorruptedExample>& examples, TaskRole role) {
    OracleSpec spec;
    spec.manifest.role = role;
    spec.manifest.kind = "oracle";
    spec.manifest.checkpoint = std::string("oracle-") + std::string(to_string(role));
    for (const auto& e : examples) {
        const auto [src, tgt] = build_training_pair(e, role);
        spec.add(src, tgt);
    }
    return BackendPool::single(make_oracle_backend(std::move(spec)));
}

inline PipelineConfig oracle_pipeline(const std::vector<CorruptedExample>& examples, Approach approach) {
    PipelineConfig c;
    c.approach = approach;
    c.params.beam_size = 1;
    c.params.num_candidates = 1;
    switch (approach) {
        case Approach::two_module:
            c.vnmpp = oracle_pool(examples, TaskRole::vnmpp);
            c.sc = oracle_pool(examples, TaskRole::sc);
            break;
        case Approach::two_module_v2:
            c.vnmpp = oracle_pool(examples, TaskRole::vnmpp);
            c.sc = oracle_pool(examples, TaskRole::sc_v2);
            break;
        case Approach::end_to_end:
            c.e2e = oracle_pool(examples, TaskRole::end_to_end);
            break;
    }
    return c;
}

}  // namespace compass::testing
