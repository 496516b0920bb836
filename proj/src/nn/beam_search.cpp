#include "compass/nn/beam_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace compass::nn {

namespace {

double normalized(double log_prob, std::size_t generated, double length_penalty) {
    return log_prob / std::pow(static_cast<double>(generated + 1), length_penalty);
}

bool better(const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
}

}  // namespace

std::vector<Hypothesis> beam_search(Seq2SeqTransformer& model, const std::vector<int>& source,
                                    const BeamConfig& config) {
    NoGradGuard guard;
    const int beam = std::max(1, config.beam_size);
    const int max_len = std::max(0, std::min(config.max_length, model.config().max_positions - 1));
    Var memory = model.encode(source);

    std::vector<Hypothesis> alive{Hypothesis{}};
    std::vector<Hypothesis> finished;

    for (int step = 0; step < max_len && !alive.empty(); ++step) {
        std::vector<Hypothesis> expansions;
        for (const auto& hyp : alive) {
            std::vector<int> prefix{config.bos};
            prefix.insert(prefix.end(), hyp.tokens.begin(), hyp.tokens.end());
            const auto logp = model.next_log_probs(memory, prefix);
            std::vector<int> order(static_cast<std::size_t>(logp.size()));
            std::iota(order.begin(), order.end(), 0);
            const auto keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(2 * beam));
            std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                              [&](int a, int b) { return logp(a) != logp(b) ? logp(a) > logp(b) : a < b; });
            for (std::size_t r = 0; r < keep; ++r) {
                const int tok = order[r];
                const double lp = hyp.log_prob + static_cast<double>(logp(tok));
                if (tok == config.eos) {
                    if (static_cast<int>(hyp.tokens.size()) < config.min_length) continue;
                    Hypothesis done{hyp.tokens, lp, normalized(lp, hyp.tokens.size(), config.length_penalty), true};
                    finished.push_back(std::move(done));
                    continue;
                }
                Hypothesis next{hyp.tokens, lp, 0.0, false};
                next.tokens.push_back(tok);
                next.score = normalized(lp, next.tokens.size(), config.length_penalty);
                expansions.push_back(std::move(next));
            }
        }
        std::sort(expansions.begin(), expansions.end(), [](const Hypothesis& a, const Hypothesis& b) {
            if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
            return a.tokens < b.tokens;
        });
        if (expansions.size() > static_cast<std::size_t>(beam)) expansions.resize(static_cast<std::size_t>(beam));
        alive = std::move(expansions);

        if (static_cast<int>(finished.size()) >= beam) {
            std::sort(finished.begin(), finished.end(), better);
            finished.resize(static_cast<std::size_t>(beam));
            double best_alive = -std::numeric_limits<double>::infinity();
            for (const auto& h : alive) best_alive = std::max(best_alive, h.score);
            if (best_alive <= finished.back().score) break;
        }
    }
    if (finished.empty()) finished = alive;  // hit max_length without EOS
    std::sort(finished.begin(), finished.end(), better);
    const auto n = std::min<std::size_t>(finished.size(), static_cast<std::size_t>(std::max(1, config.num_return)));
    finished.resize(n);
    return finished;
}

}  // namespace compass::nn
