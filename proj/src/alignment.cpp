#include "compass/alignment.hpp"

#include <algorithm>

namespace compass {

double normalized_edit_distance(std::string_view a, std::string_view b) {
    if (a.empty() && b.empty()) return 0.0;
    if (a == b) return 0.0;
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[b.size()]) / static_cast<double>(std::max(a.size(), b.size()));
}

std::vector<std::pair<int, int>> align_sentences(const std::vector<std::string>& a, const std::vector<std::string>& b,
                                                 double threshold) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::vector<double>> dist(n, std::vector<double>(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) dist[i][j] = normalized_edit_distance(a[i], b[j]);

    // best[i][j]: (matches, -total distance) for suffixes a[i:], b[j:].
    struct Cell {
        int matches = 0;
        double cost = 0.0;
        bool better_than(const Cell& o) const {
            if (matches != o.matches) return matches > o.matches;
            return cost < o.cost - 1e-12;
        }
    };
    std::vector<std::vector<Cell>> best(n + 1, std::vector<Cell>(m + 1));
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            Cell c = best[i + 1][j];
            if (best[i][j + 1].better_than(c)) c = best[i][j + 1];
            if (dist[i][j] <= threshold) {
                Cell take{best[i + 1][j + 1].matches + 1, best[i + 1][j + 1].cost + dist[i][j]};
                if (!c.better_than(take)) c = take;
            }
            best[i][j] = c;
        }
    }
    std::vector<std::pair<int, int>> out;
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        const Cell& here = best[i][j];
        if (dist[i][j] <= threshold && best[i + 1][j + 1].matches + 1 == here.matches &&
            std::abs(best[i + 1][j + 1].cost + dist[i][j] - here.cost) < 1e-9) {
            out.emplace_back(static_cast<int>(i), static_cast<int>(j));
            ++i;
            ++j;
        } else if (best[i + 1][j].matches == here.matches && std::abs(best[i + 1][j].cost - here.cost) < 1e-9) {
            ++i;
        } else {
            ++j;
        }
    }
    return out;
}

}  // namespace compass
