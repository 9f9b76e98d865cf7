#pragma once

#include <cstdint>
#include <vector>

#include "noiseproto/dataio.hpp"
#include "noiseproto/matrix.hpp"
#include "noiseproto/scores.hpp"

namespace noiseproto {

// Equal-width score windows spanning [r_min, r_max] of the noisy scores.
// All windows are half-open except the last, which is closed at r_max so
// the maximum score still lands in a window.
struct WindowSpec {
    std::size_t count = 1;
    double r_min = 0.0;
    double r_max = 0.0;
    bool degenerate = false;  // spread below 1e-8: everything maps to the last window

    double width() const;
    double lower(std::size_t t) const;
    double upper(std::size_t t) const;
    std::size_t window_of(double r) const;
};

struct WindowPartition {
    WindowSpec spec;
    std::vector<std::size_t> assignment;  // one window index per noisy example
};

// Unnormalized r-weighted feature sums per group; empty[t] marks groups
// with no members (their column is zero).
struct GroupedPrototypes {
    Matrix protos;  // d x T
    std::vector<std::uint8_t> empty;

    std::size_t group_count() const { return protos.cols(); }
    std::size_t nonempty_count() const;
};

struct HybridPrototypes {
    Vec clean;         // normalizer-scaled sum of clean features
    Vec noise_global;  // normalizer-scaled r-weighted sum of noisy features
    Vec unified;       // clean + noise_global
    GroupedPrototypes windows;
    std::vector<std::size_t> window_assignment;
    WindowSpec window_spec;
    double normalizer = 0.0;  // clean_count + sum of noisy scores
};

// clean_count + sum of noisy scores: the shared normalizer with clean
// weights pinned to 1.
double prototype_normalizer(const RelevanceScores& r);

Vec clean_prototype(const FeatureSet& fs, double normalizer);

WindowPartition window_partition(const RelevanceScores& r, std::size_t window_count);

GroupedPrototypes grouped_noise_prototypes(const FeatureSet& fs, const RelevanceScores& r,
                                           const std::vector<std::size_t>& assignment,
                                           std::size_t group_count);

GroupedPrototypes windowed_noise_prototypes(const FeatureSet& fs, const RelevanceScores& r,
                                            const WindowPartition& partition);

Vec global_noise_prototype(const FeatureSet& fs, const RelevanceScores& r, double normalizer);

// Full hybrid prototype set with score-window grouping. A set with no noisy
// examples yields all-empty windows and unified == mean of clean features.
HybridPrototypes unified_prototype(const FeatureSet& fs, const RelevanceScores& r,
                                   std::size_t window_count);

// Same, but with an externally fixed grouping (e.g. feature clustering).
HybridPrototypes unified_prototype_grouped(const FeatureSet& fs, const RelevanceScores& r,
                                           const std::vector<std::size_t>& assignment,
                                           std::size_t group_count);

struct KmeansResult {
    Matrix centroids;                     // d x T
    std::vector<std::size_t> assignment;  // per noisy example
    std::vector<double> objective;        // within-cluster SSE per Lloyd iteration
};

// Lloyd's algorithm on the raw noisy features, seeded init from T distinct
// data points, at most 100 iterations, stopping when the assignment is
// fixed or the largest centroid shift drops below 1e-6.
KmeansResult kmeans_noisy_features(const FeatureSet& fs, std::size_t cluster_count,
                                   std::uint64_t seed);

GroupedPrototypes kmeans_noise_prototypes(const FeatureSet& fs, const RelevanceScores& r,
                                          std::size_t cluster_count, std::uint64_t seed);

}  // namespace noiseproto
