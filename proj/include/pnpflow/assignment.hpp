#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "pnpflow/errors.hpp"
#include "pnpflow/grid.hpp"

namespace pnpflow {

// Latent item i pairs with target item perm[i].
struct OtPlan {
    std::vector<std::size_t> perm;

    void validate() const {
        std::vector<bool> seen(perm.size(), false);
        for (std::size_t c : perm) {
            if (c >= perm.size() || seen[c]) throw validation_error("OtPlan: not a permutation");
            seen[c] = true;
        }
    }
};

// Exact minimum-cost assignment (Hungarian method with row/column potentials,
// shortest augmenting paths; O(n^3)). cost is row-major n x n.
inline std::vector<std::size_t> hungarian_min_assign(const std::vector<double>& cost,
                                                     std::size_t n) {
    if (cost.size() != n * n) throw shape_error("hungarian_min_assign: cost matrix size");
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based columns; p[j] = row currently matched to column j, p[0] = working row.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        minv.assign(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            const double* row = cost.data() + (i0 - 1) * n;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = row[j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        // Augment along the recorded path.
        while (j0 != 0) {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        }
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t j = 1; j <= n; ++j) perm[p[j] - 1] = j - 1;
    return perm;
}

// Permutation minimizing sum_i ||x0_i - x1_perm(i)||^2.
inline OtPlan minibatch_ot_assign(const std::vector<Grid>& x0_batch,
                                  const std::vector<Grid>& x1_batch) {
    const std::size_t B = x0_batch.size();
    if (x1_batch.size() != B) throw shape_error("minibatch_ot_assign: batch size mismatch");
    if (B == 0) throw validation_error("minibatch_ot_assign: empty batch");
    if (B > 512) {
        throw validation_error("minibatch_ot_assign: B > 512 (cubic assignment cost)");
    }
    std::vector<double> cost(B * B);
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < B; ++j) {
            cost[i * B + j] = squared_distance(x0_batch[i], x1_batch[j]);
        }
    }
    OtPlan plan{hungarian_min_assign(cost, B)};
    plan.validate();
    return plan;
}

}  // namespace pnpflow
