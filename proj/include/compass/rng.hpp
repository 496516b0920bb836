#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace compass {

// xoshiro256** seeded through SplitMix64. Bounded draws use rejection
// sampling so sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next_u64();

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Uniform double in [0, 1).
    double uniform01();

    double normal(double mean = 0.0, double stddev = 1.0);

    // Independent child stream keyed by a label.
    Rng split(std::string_view label) const;

    // Stream derived from a root seed and an ordered list of labels, e.g.
    // derive(seed, {"dev", story_id, "epoch-3"}).
    static Rng derive(std::uint64_t seed, std::initializer_list<std::string_view> labels);

private:
    std::uint64_t s_[4];
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace compass
