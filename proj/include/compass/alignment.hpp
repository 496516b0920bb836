#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace compass {

inline constexpr double kMatchThreshold = 0.5;

// Byte-level Levenshtein distance divided by the longer length; 0 for two
// empty strings.
double normalized_edit_distance(std::string_view a, std::string_view b);

// Longest common subsequence over sentences, where a pair matches iff its
// normalized edit distance is <= threshold. Among maximum-length
// alignments the one with the smallest total distance wins; remaining
// ties prefer the earliest pairing. Returns increasing (i, j) index pairs.
std::vector<std::pair<int, int>> align_sentences(const std::vector<std::string>& a, const std::vector<std::string>& b,
                                                 double threshold = kMatchThreshold);

}  // namespace compass
