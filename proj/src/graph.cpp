#include "noiseproto/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "noiseproto/error.hpp"

namespace noiseproto {

AffinityGraph build_affinity(const FeatureSet& features, std::size_t k_neighbors) {
    const std::size_t n = features.count();
    if (n < 2) throw config_error("build_affinity: need at least 2 examples");
    if (k_neighbors == 0 || k_neighbors >= n) {
        throw config_error("build_affinity: k_neighbors must be in [1, N-1], got " +
                           std::to_string(k_neighbors) + " for N=" + std::to_string(n));
    }

    const Matrix unit = l2_normalize_columns(features.features);
    Matrix sim = matmul(transpose(unit), unit);
    for (double& s : sim.data()) s = std::max(s, 0.0);

    // Top-k neighbor sets per node, self excluded. Ties break toward the
    // smaller index so graph construction is order-deterministic.
    std::vector<std::vector<std::uint8_t>> in_topk(n, std::vector<std::uint8_t>(n, 0));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (sim(i, a) != sim(i, b)) return sim(i, a) > sim(i, b);
            return a < b;
        });
        std::size_t taken = 0;
        for (std::size_t idx : order) {
            if (idx == i) continue;
            in_topk[i][idx] = 1;
            if (++taken == k_neighbors) break;
        }
    }

    AffinityGraph g;
    g.adjacency = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        g.adjacency(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (in_topk[i][j] && in_topk[j][i]) {
                const double w = std::max(sim(i, j), sim(j, i));
                g.adjacency(i, j) = w;
                g.adjacency(j, i) = w;
            }
        }
    }
    g.normalized = false;
    return g;
}

AffinityGraph normalize_adjacency(const AffinityGraph& g) {
    if (g.normalized) throw contract_error("normalize_adjacency: graph already normalized");
    const std::size_t n = g.size();
    if (g.adjacency.cols() != n) throw shape_error("normalize_adjacency: adjacency not square");
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            if (std::fabs(g.adjacency(i, j) - g.adjacency(j, i)) > 1e-12) {
                throw numeric_error("normalize_adjacency: adjacency not symmetric at (" +
                                    std::to_string(i) + ", " + std::to_string(j) + ")");
            }
        }
        if (!(g.adjacency(j, j) > 0.0)) {
            throw numeric_error("normalize_adjacency: non-positive diagonal at " +
                                std::to_string(j));
        }
    }

    Vec inv_sqrt_degree(n);
    for (std::size_t i = 0; i < n; ++i) {
        double degree = 0.0;
        for (std::size_t j = 0; j < n; ++j) degree += g.adjacency(i, j);
        if (!(degree > 0.0)) {
            throw numeric_error("normalize_adjacency: zero degree at node " + std::to_string(i));
        }
        inv_sqrt_degree[i] = 1.0 / std::sqrt(degree);
    }

    AffinityGraph out;
    out.adjacency = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            out.adjacency(i, j) = g.adjacency(i, j) * inv_sqrt_degree[i] * inv_sqrt_degree[j];
        }
    }
    out.normalized = true;
    return out;
}

}  // namespace noiseproto
