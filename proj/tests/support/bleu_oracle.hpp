#pragma once

// Corpus BLEU recomputed from its definition, independent of the library
// implementation.

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace compass::testing {

inline std::vector<std::string> words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

// Straight from the definition: clipped n-gram counts per order, summed over
// the corpus, geometric mean over orders with candidate n-grams, times the
// brevity penalty.
inline double brute_force_bleu(const std::vector<std::string>& cands, const std::vector<std::string>& refs) {
    double match[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0};
    double c_len = 0, r_len = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto c = words(cands[i]);
        const auto r = words(refs[i]);
        c_len += static_cast<double>(c.size());
        r_len += static_cast<double>(r.size());
        for (std::size_t n = 1; n <= 4; ++n) {
            std::map<std::vector<std::string>, int> cc, rc;
            for (std::size_t k = 0; k + n <= c.size(); ++k) ++cc[{c.begin() + k, c.begin() + k + n}];
            for (std::size_t k = 0; k + n <= r.size(); ++k) ++rc[{r.begin() + k, r.begin() + k + n}];
            for (const auto& [gram, cnt] : cc) {
                total[n - 1] += cnt;
                const auto it = rc.find(gram);
                match[n - 1] += std::min(cnt, it == rc.end() ? 0 : it->second);
            }
        }
    }
    double log_sum = 0;
    int orders = 0;
    for (int n = 0; n < 4; ++n) {
        if (total[n] == 0) continue;
        if (match[n] == 0) return 0.0;
        log_sum += std::log(match[n] / total[n]);
        ++orders;
    }
    if (orders == 0) return r_len == 0 ? 100.0 : 0.0;
    const double bp = c_len >= r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
    return 100.0 * bp * std::exp(log_sum / orders);
}

}  // namespace compass::testing
