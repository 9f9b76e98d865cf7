#include "noiseproto/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "noiseproto/error.hpp"
#include "noiseproto/rng.hpp"

namespace noiseproto {

namespace {
constexpr double kDegenerateSpread = 1e-8;
}

double WindowSpec::width() const {
    return (r_max - r_min) / static_cast<double>(count);
}

double WindowSpec::lower(std::size_t t) const {
    return r_min + width() * static_cast<double>(t);
}

double WindowSpec::upper(std::size_t t) const {
    return t + 1 == count ? r_max : r_min + width() * static_cast<double>(t + 1);
}

std::size_t WindowSpec::window_of(double r) const {
    if (degenerate) return count - 1;
    const double idx = std::floor((r - r_min) / width());
    if (idx < 0.0) return 0;
    const auto t = static_cast<std::size_t>(idx);
    return std::min(t, count - 1);
}

std::size_t GroupedPrototypes::nonempty_count() const {
    std::size_t n = 0;
    for (std::uint8_t e : empty) n += e ? 0 : 1;
    return n;
}

double prototype_normalizer(const RelevanceScores& r) {
    double acc = static_cast<double>(r.clean_count);
    for (double v : r.noisy()) acc += v;
    return acc;
}

Vec clean_prototype(const FeatureSet& fs, double normalizer) {
    if (fs.clean_count == 0) throw config_error("clean_prototype: no clean examples");
    if (!(normalizer > 0.0)) throw config_error("clean_prototype: normalizer must be positive");
    Vec p(fs.dim(), 0.0);
    for (std::size_t j = 0; j < fs.clean_count; ++j) {
        axpy(1.0, fs.features.col_span(j), p);
    }
    const double inv = 1.0 / normalizer;
    for (double& x : p) x *= inv;
    return p;
}

WindowPartition window_partition(const RelevanceScores& r, std::size_t window_count) {
    if (window_count == 0) throw config_error("window_partition: window count must be >= 1");
    const auto noisy = r.noisy();
    if (noisy.empty()) throw config_error("window_partition: no noisy examples");

    WindowSpec spec;
    spec.count = window_count;
    spec.r_min = *std::min_element(noisy.begin(), noisy.end());
    spec.r_max = *std::max_element(noisy.begin(), noisy.end());
    spec.degenerate = (spec.r_max - spec.r_min) < kDegenerateSpread;

    WindowPartition partition;
    partition.spec = spec;
    partition.assignment.resize(noisy.size());
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        partition.assignment[i] = spec.window_of(noisy[i]);
    }
    return partition;
}

GroupedPrototypes grouped_noise_prototypes(const FeatureSet& fs, const RelevanceScores& r,
                                           const std::vector<std::size_t>& assignment,
                                           std::size_t group_count) {
    if (assignment.size() != fs.noisy_count() || r.size() != fs.count()) {
        throw shape_error("grouped_noise_prototypes: assignment/scores do not match features");
    }
    GroupedPrototypes out;
    out.protos = Matrix(fs.dim(), group_count);
    out.empty.assign(group_count, 1);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        const std::size_t t = assignment[i];
        if (t >= group_count) throw shape_error("grouped_noise_prototypes: group index out of range");
        const std::size_t col = fs.clean_count + i;
        axpy(r.values[col], fs.features.col_span(col), out.protos.col_span(t));
        out.empty[t] = 0;
    }
    return out;
}

GroupedPrototypes windowed_noise_prototypes(const FeatureSet& fs, const RelevanceScores& r,
                                            const WindowPartition& partition) {
    return grouped_noise_prototypes(fs, r, partition.assignment, partition.spec.count);
}

Vec global_noise_prototype(const FeatureSet& fs, const RelevanceScores& r, double normalizer) {
    if (!(normalizer > 0.0)) {
        throw config_error("global_noise_prototype: normalizer must be positive");
    }
    Vec p(fs.dim(), 0.0);
    for (std::size_t j = fs.clean_count; j < fs.count(); ++j) {
        axpy(r.values[j], fs.features.col_span(j), p);
    }
    const double inv = 1.0 / normalizer;
    for (double& x : p) x *= inv;
    return p;
}

namespace {

HybridPrototypes assemble(const FeatureSet& fs, const RelevanceScores& r,
                          GroupedPrototypes groups, std::vector<std::size_t> assignment,
                          WindowSpec spec) {
    HybridPrototypes hp;
    hp.normalizer = prototype_normalizer(r);
    hp.clean = clean_prototype(fs, hp.normalizer);
    hp.noise_global = global_noise_prototype(fs, r, hp.normalizer);
    hp.unified.resize(fs.dim());
    for (std::size_t i = 0; i < fs.dim(); ++i) hp.unified[i] = hp.clean[i] + hp.noise_global[i];
    hp.windows = std::move(groups);
    hp.window_assignment = std::move(assignment);
    hp.window_spec = spec;
    return hp;
}

}  // namespace

HybridPrototypes unified_prototype(const FeatureSet& fs, const RelevanceScores& r,
                                   std::size_t window_count) {
    if (r.size() != fs.count() || r.clean_count != fs.clean_count) {
        throw shape_error("unified_prototype: scores do not match the feature set");
    }
    if (fs.noisy_count() == 0) {
        GroupedPrototypes groups;
        groups.protos = Matrix(fs.dim(), window_count);
        groups.empty.assign(window_count, 1);
        return assemble(fs, r, std::move(groups), {}, WindowSpec{window_count, 0.0, 0.0, true});
    }
    WindowPartition partition = window_partition(r, window_count);
    GroupedPrototypes groups = windowed_noise_prototypes(fs, r, partition);
    return assemble(fs, r, std::move(groups), std::move(partition.assignment), partition.spec);
}

HybridPrototypes unified_prototype_grouped(const FeatureSet& fs, const RelevanceScores& r,
                                           const std::vector<std::size_t>& assignment,
                                           std::size_t group_count) {
    GroupedPrototypes groups = grouped_noise_prototypes(fs, r, assignment, group_count);
    return assemble(fs, r, std::move(groups), assignment,
                    WindowSpec{group_count, 0.0, 0.0, true});
}

KmeansResult kmeans_noisy_features(const FeatureSet& fs, std::size_t cluster_count,
                                   std::uint64_t seed) {
    const std::size_t n = fs.noisy_count();
    const std::size_t d = fs.dim();
    if (cluster_count == 0) throw config_error("kmeans: cluster count must be >= 1");
    if (n < cluster_count) {
        throw config_error("kmeans: " + std::to_string(n) + " noisy examples cannot fill " +
                           std::to_string(cluster_count) + " clusters");
    }

    auto noisy_col = [&](std::size_t i) { return fs.features.col_span(fs.clean_count + i); };

    Rng rng(seed);
    const auto init = rng.sample_without_replacement(n, cluster_count);
    KmeansResult result;
    result.centroids = Matrix(d, cluster_count);
    for (std::size_t t = 0; t < cluster_count; ++t) {
        std::copy_n(noisy_col(init[t]).data(), d, result.centroids.col(t));
    }
    result.assignment.assign(n, 0);

    auto sq_dist = [&](std::span<const double> a, const double* b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double diff = a[i] - b[i];
            acc += diff * diff;
        }
        return acc;
    };

    std::vector<std::size_t> counts(cluster_count);
    for (std::size_t iter = 0; iter < 100; ++iter) {
        bool changed = false;
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_dist = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < cluster_count; ++t) {
                const double dist = sq_dist(noisy_col(i), result.centroids.col(t));
                if (dist < best_dist) {
                    best_dist = dist;
                    best = t;
                }
            }
            sse += best_dist;
            if (result.assignment[i] != best) {
                result.assignment[i] = best;
                changed = true;
            }
        }
        result.objective.push_back(sse);
        if (!changed && iter > 0) break;

        Matrix next(d, cluster_count);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            axpy(1.0, noisy_col(i), next.col_span(result.assignment[i]));
            counts[result.assignment[i]] += 1;
        }
        double max_shift = 0.0;
        for (std::size_t t = 0; t < cluster_count; ++t) {
            if (counts[t] == 0) {
                // A cluster with no members keeps its previous centroid.
                std::copy_n(result.centroids.col(t), d, next.col(t));
            } else {
                const double inv = 1.0 / static_cast<double>(counts[t]);
                for (std::size_t i = 0; i < d; ++i) next(i, t) *= inv;
            }
            double shift = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double diff = next(i, t) - result.centroids(i, t);
                shift += diff * diff;
            }
            max_shift = std::max(max_shift, std::sqrt(shift));
        }
        result.centroids = std::move(next);
        if (max_shift < 1e-6) break;
    }
    return result;
}

GroupedPrototypes kmeans_noise_prototypes(const FeatureSet& fs, const RelevanceScores& r,
                                          std::size_t cluster_count, std::uint64_t seed) {
    const KmeansResult km = kmeans_noisy_features(fs, cluster_count, seed);
    return grouped_noise_prototypes(fs, r, km.assignment, cluster_count);
}

}  // namespace noiseproto
