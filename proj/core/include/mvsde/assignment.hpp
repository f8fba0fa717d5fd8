// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mvsde {

struct Assignment {
    /// column assigned to each row
    std::vector<std::size_t> row_to_col;
    /// sum of cost[i][row_to_col[i]], accumulated in row order
    double total_cost = 0.0;
};

/// Exact minimum-cost perfect matching on a dense n x n cost matrix
/// (row-major), via the shortest-augmenting-path Hungarian method with
/// potentials. O(n^3) time, O(n) extra memory. Deterministic: ties resolve
/// to the lowest column index.
Assignment solve_assignment(std::span<const double> cost, std::size_t n);

}  // namespace mvsde
