#pragma once

#include "noiseproto/dataio.hpp"
#include "noiseproto/matrix.hpp"

namespace noiseproto {

// Symmetric affinity over the examples of one class. `normalized` marks
// whether adjacency has been through the D^{-1/2} (A) D^{-1/2} transform.
struct AffinityGraph {
    Matrix adjacency;
    bool normalized = false;

    std::size_t size() const { return adjacency.rows(); }
};

// Cosine similarities on l2-normalized features, clamped at 0, sparsified
// to mutual k-nearest-neighbor edges, self-loops of weight 1 on the
// diagonal. Returns the unnormalized graph.
AffinityGraph build_affinity(const FeatureSet& features, std::size_t k_neighbors);

// Symmetric normalization D^{-1/2} A D^{-1/2} with D the row-sum degrees.
AffinityGraph normalize_adjacency(const AffinityGraph& g);

}  // namespace noiseproto
