#pragma once

#include <vector>

#include "compass/nn/transformer.hpp"

namespace compass::nn {

struct BeamConfig {
    int beam_size = 4;
    int num_return = 3;
    int max_length = 64;  // generated tokens, excluding BOS/EOS
    int min_length = 0;
    double length_penalty = 1.0;
    int bos = 1;
    int eos = 2;
};

struct Hypothesis {
    std::vector<int> tokens;  // generated ids, no BOS/EOS
    double log_prob = 0.0;
    double score = 0.0;       // log_prob / (len + 1)^length_penalty
    bool finished = false;
};

// Deterministic beam search: ties between equal log-probabilities are
// broken by the lower token id, then by the lexicographically smaller
// prefix. Returns up to num_return hypotheses sorted by score.
std::vector<Hypothesis> beam_search(Seq2SeqTransformer& model, const std::vector<int>& source,
                                    const BeamConfig& config);

}  // namespace compass::nn
