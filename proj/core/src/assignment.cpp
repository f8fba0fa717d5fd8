// SPDX-License-Identifier: Apache-2.0
#include "mvsde/assignment.hpp"

#include <algorithm>
#include <limits>

#include "mvsde/error.hpp"

namespace mvsde {

Assignment solve_assignment(std::span<const double> cost, std::size_t n) {
    if (cost.size() != n * n) {
        throw Error(Errc::SizeMismatch, "assignment cost matrix must be n*n");
    }
    Assignment result;
    if (n == 0) return result;

    constexpr double kInf = std::numeric_limits<double>::infinity();
    // 1-based indexing with a virtual column 0 holding the row being inserted.
    std::vector<double> row_pot(n + 1, 0.0);
    std::vector<double> col_pot(n + 1, 0.0);
    std::vector<std::size_t> col_match(n + 1, 0);
    std::vector<std::size_t> way(n + 1, 0);
    std::vector<double> min_slack(n + 1);
    std::vector<char> used(n + 1);

    for (std::size_t row = 1; row <= n; ++row) {
        col_match[0] = row;
        std::size_t col0 = 0;
        std::fill(min_slack.begin(), min_slack.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[col0] = 1;
            const std::size_t r = col_match[col0];
            double delta = kInf;
            std::size_t next_col = 0;
            const double* cost_row = cost.data() + (r - 1) * n;
            for (std::size_t c = 1; c <= n; ++c) {
                if (used[c]) continue;
                const double reduced = cost_row[c - 1] - row_pot[r] - col_pot[c];
                if (reduced < min_slack[c]) {
                    min_slack[c] = reduced;
                    way[c] = col0;
                }
                if (min_slack[c] < delta) {
                    delta = min_slack[c];
                    next_col = c;
                }
            }
            for (std::size_t c = 0; c <= n; ++c) {
                if (used[c]) {
                    row_pot[col_match[c]] += delta;
                    col_pot[c] -= delta;
                } else {
                    min_slack[c] -= delta;
                }
            }
            col0 = next_col;
        } while (col_match[col0] != 0);
        do {
            const std::size_t prev = way[col0];
            col_match[col0] = col_match[prev];
            col0 = prev;
        } while (col0 != 0);
    }

    result.row_to_col.assign(n, 0);
    for (std::size_t c = 1; c <= n; ++c) result.row_to_col[col_match[c] - 1] = c - 1;
    for (std::size_t r = 0; r < n; ++r) result.total_cost += cost[r * n + result.row_to_col[r]];
    return result;
}

}  // namespace mvsde
