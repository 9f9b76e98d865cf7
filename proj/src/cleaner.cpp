#include "noiseproto/cleaner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "noiseproto/error.hpp"

namespace noiseproto {

namespace {

constexpr double kLogClampEps = 1e-12;
constexpr double kNormGuardEps = 1e-12;

double sigmoid(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct GcnCache {
    Matrix z1;      // h x N, pre-activation
    Matrix hidden;  // h x N, relu(z1)
    Matrix z2;      // 1 x N, pre-sigmoid
    Vec r;          // length N
};

GcnCache gcn_forward_cache(const GcnParams& params, const AffinityGraph& graph,
                           const FeatureSet& fs) {
    if (!graph.normalized) {
        throw contract_error("gcn_forward: graph must be normalized first");
    }
    if (graph.size() != fs.count()) {
        throw shape_error("gcn_forward: graph size does not match example count");
    }
    if (params.feature_dim() != fs.dim() || params.theta2.rows() != params.hidden_dim() ||
        params.theta2.cols() != 1) {
        throw shape_error("gcn_forward: parameter shapes do not match features");
    }
    GcnCache cache;
    cache.z1 = matmul(matmul(transpose(params.theta1), fs.features), graph.adjacency);
    cache.hidden = cache.z1;
    for (double& x : cache.hidden.data()) x = std::max(x, 0.0);
    cache.z2 = matmul(matmul(transpose(params.theta2), cache.hidden), graph.adjacency);
    cache.r.resize(fs.count());
    for (std::size_t i = 0; i < cache.r.size(); ++i) cache.r[i] = sigmoid(cache.z2(0, i));
    return cache;
}

GcnGradients gcn_backward_cached(const GcnParams& params, const AffinityGraph& graph,
                                 const FeatureSet& fs, const GcnCache& cache,
                                 std::span<const double> upstream) {
    const std::size_t n = fs.count();
    if (upstream.size() != n) throw shape_error("gcn_backward: upstream length mismatch");

    Matrix g2(1, n);  // dLoss/dz2
    for (std::size_t i = 0; i < n; ++i) {
        g2(0, i) = upstream[i] * cache.r[i] * (1.0 - cache.r[i]);
    }
    // The adjacency is symmetric, so right-multiplying by it again is the
    // transpose product the chain rule asks for.
    const Matrix g2a = matmul(g2, graph.adjacency);  // 1 x N

    GcnGradients grads;
    grads.theta2 = matmul(cache.hidden, transpose(g2a));  // h x 1

    Matrix g1 = matmul(params.theta2, g2a);  // h x N
    for (std::size_t i = 0; i < g1.size(); ++i) {
        if (cache.z1.data()[i] <= 0.0) g1.data()[i] = 0.0;
    }
    const Matrix g1a = matmul(g1, graph.adjacency);        // h x N
    grads.theta1 = matmul(fs.features, transpose(g1a));    // d x h
    return grads;
}

RelevanceScores scores_from_cache(const GcnCache& cache, std::size_t clean_count) {
    RelevanceScores scores;
    scores.values = cache.r;
    scores.clean_count = clean_count;
    return scores;
}

}  // namespace

GcnParams gcn_init(std::size_t feature_dim, std::size_t hidden_dim, Rng& rng) {
    if (feature_dim == 0 || hidden_dim == 0) {
        throw config_error("gcn_init: dimensions must be >= 1");
    }
    GcnParams params;
    params.theta1 = Matrix(feature_dim, hidden_dim);
    params.theta2 = Matrix(hidden_dim, 1);
    const double limit1 = std::sqrt(6.0 / static_cast<double>(feature_dim + hidden_dim));
    for (double& x : params.theta1.data()) x = rng.uniform(-limit1, limit1);
    const double limit2 = std::sqrt(6.0 / static_cast<double>(hidden_dim + 1));
    for (double& x : params.theta2.data()) x = rng.uniform(-limit2, limit2);
    return params;
}

void CleanerConfig::validate() const {
    if (windows == 0) throw config_error("cleaner config: window count must be >= 1");
    if (iterations == 0) throw config_error("cleaner config: iterations must be >= 1");
    if (!(alpha_lo > 0.0) || !(alpha_hi > 0.0) || alpha_lo > alpha_hi) {
        throw config_error("cleaner config: alpha endpoints must satisfy 0 < lo <= hi");
    }
    if (beta < 0.0) throw config_error("cleaner config: beta must be >= 0");
    if (lambda < 0.0) throw config_error("cleaner config: lambda must be >= 0");
    if (weight_decay < 0.0) throw config_error("cleaner config: weight decay must be >= 0");
    lr.validate();
}

std::size_t CleanerConfig::resolve_hidden_dim(std::size_t feature_dim) const {
    if (hidden_dim != 0) return hidden_dim;
    return std::max<std::size_t>(16, feature_dim / 4);
}

std::vector<double> alpha_weights(const CleanerConfig& cfg) {
    std::vector<double> alphas(cfg.windows, cfg.alpha_hi);
    if (cfg.alpha_schedule == AlphaSchedule::equal || cfg.windows == 1) return alphas;
    const double span = cfg.alpha_hi - cfg.alpha_lo;
    const double denom = static_cast<double>(cfg.windows - 1);
    for (std::size_t t = 0; t < cfg.windows; ++t) {
        const double frac = static_cast<double>(t) / denom;
        alphas[t] = cfg.alpha_schedule == AlphaSchedule::increasing
                        ? cfg.alpha_lo + span * frac
                        : cfg.alpha_hi - span * frac;
    }
    return alphas;
}

RelevanceScores gcn_forward(const GcnParams& params, const AffinityGraph& graph,
                            const FeatureSet& features) {
    return scores_from_cache(gcn_forward_cache(params, graph, features), features.clean_count);
}

GcnGradients gcn_backward(const GcnParams& params, const AffinityGraph& graph,
                          const FeatureSet& features, std::span<const double> upstream) {
    const GcnCache cache = gcn_forward_cache(params, graph, features);
    return gcn_backward_cached(params, graph, features, cache, upstream);
}

double negative_cosine(std::span<const double> p1, std::span<const double> p2, double eps) {
    const double n1 = l2_norm(p1);
    const double n2 = l2_norm(p2);
    if (n1 < eps || n2 < eps) {
        throw numeric_error("negative_cosine: degenerate prototype (norm below guard)");
    }
    return -dot(p1, p2) / (n1 * n2);
}

BinaryLossResult binary_cleaning_loss(const RelevanceScores& r, double lambda) {
    const std::size_t k = r.clean_count;
    const std::size_t n = r.size();
    if (k == 0 || n <= k) {
        throw config_error("binary_cleaning_loss: need k >= 1 clean and at least one noisy");
    }
    BinaryLossResult out;
    out.grad_r.assign(n, 0.0);
    const double kd = static_cast<double>(k);
    const double nd = static_cast<double>(n - k);
    for (std::size_t i = 0; i < n; ++i) {
        double ri = r.values[i];
        if (ri < kLogClampEps || ri > 1.0 - kLogClampEps) {
            ri = std::clamp(ri, kLogClampEps, 1.0 - kLogClampEps);
            out.clamped += 1;
        }
        if (i < k) {
            out.value -= std::log(ri) / kd;
            out.grad_r[i] = -1.0 / (kd * ri);
        } else {
            out.value -= lambda * std::log(1.0 - ri) / nd;
            out.grad_r[i] = lambda / (nd * (1.0 - ri));
        }
    }
    return out;
}

double simnoipro_loss(std::span<const double> p_clean, const GroupedPrototypes& groups,
                      std::span<const double> p_noise_global, std::span<const double> alphas,
                      double beta, bool minimize) {
    if (alphas.size() != groups.group_count()) {
        throw shape_error("simnoipro_loss: alpha count does not match group count");
    }
    const std::size_t nonempty = groups.nonempty_count();
    if (nonempty == 0 && beta == 0.0) {
        throw numeric_error("simnoipro_loss: all groups empty and beta is zero");
    }
    double loss = 0.0;
    if (nonempty > 0) {
        double acc = 0.0;
        for (std::size_t t = 0; t < groups.group_count(); ++t) {
            if (groups.empty[t]) continue;
            acc += alphas[t] * negative_cosine(p_clean, groups.protos.col_span(t), kNormGuardEps);
        }
        loss += acc / static_cast<double>(nonempty);
    }
    if (beta != 0.0) {
        loss += beta * negative_cosine(p_clean, p_noise_global, kNormGuardEps);
    }
    return minimize ? -loss : loss;
}

namespace {

// dM/da for M(a, b) = -(a.b)/(|a||b|): -(b_hat - (a_hat.b_hat) a_hat)/|a|.
void accumulate_cosine_grad(std::span<const double> a, std::span<const double> b, double weight,
                            std::span<double> grad_a, std::span<double> grad_b) {
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na < kNormGuardEps || nb < kNormGuardEps) {
        throw numeric_error("simnoipro gradient: degenerate prototype");
    }
    const double cos_ab = dot(a, b) / (na * nb);
    for (std::size_t i = 0; i < a.size(); ++i) {
        grad_a[i] += weight * (-(b[i] / nb - cos_ab * a[i] / na) / na);
        grad_b[i] += weight * (-(a[i] / na - cos_ab * b[i] / nb) / nb);
    }
}

}  // namespace

ProtoObjective simnoipro_objective(const FeatureSet& fs, const RelevanceScores& r,
                                   const std::vector<std::size_t>& assignment,
                                   std::size_t group_count, std::span<const double> alphas,
                                   double beta, bool minimize) {
    const std::size_t d = fs.dim();
    const std::size_t n = fs.count();
    const std::size_t k = fs.clean_count;

    const double normalizer = prototype_normalizer(r);
    const Vec p_clean = clean_prototype(fs, normalizer);
    const Vec p_glob = global_noise_prototype(fs, r, normalizer);
    const GroupedPrototypes groups = grouped_noise_prototypes(fs, r, assignment, group_count);

    ProtoObjective out;
    out.value = simnoipro_loss(p_clean, groups, p_glob, alphas, beta, minimize);
    out.grad_r.assign(n, 0.0);

    const double sign = minimize ? -1.0 : 1.0;
    const std::size_t nonempty = groups.nonempty_count();

    Vec d_clean(d, 0.0);
    Vec d_glob(d, 0.0);
    Matrix d_groups(d, group_count);
    if (nonempty > 0) {
        const double inv = sign / static_cast<double>(nonempty);
        for (std::size_t t = 0; t < group_count; ++t) {
            if (groups.empty[t]) continue;
            accumulate_cosine_grad(p_clean, groups.protos.col_span(t), inv * alphas[t], d_clean,
                                   d_groups.col_span(t));
        }
    }
    if (beta != 0.0) {
        accumulate_cosine_grad(p_clean, p_glob, sign * beta, d_clean, d_glob);
    }

    // Chain rule in r_i for noisy i, with membership fixed:
    //   d p_clean / d r_i = -p_clean / normalizer
    //   d p_glob  / d r_i = (v_i - p_glob) / normalizer
    //   d group_t / d r_i = v_i if i is in group t
    const double clean_dot = dot(d_clean, p_clean);
    const double glob_dot = dot(d_glob, p_glob);
    for (std::size_t i = k; i < n; ++i) {
        const auto v = fs.features.col_span(i);
        double g = -clean_dot / normalizer;
        g += (dot(d_glob, v) - glob_dot) / normalizer;
        const std::size_t t = assignment[i - k];
        if (!groups.empty[t]) g += dot(d_groups.col_span(t), v);
        out.grad_r[i] = g;
    }
    return out;
}

double cleaner_objective_value(const GcnParams& params, const AffinityGraph& graph,
                               const FeatureSet& fs, const CleanerConfig& cfg,
                               const std::vector<std::size_t>* fixed_groups) {
    const RelevanceScores r = gcn_forward(params, graph, fs);
    if (cfg.loss == LossKind::binary_baseline) {
        return binary_cleaning_loss(r, cfg.lambda).value;
    }
    const std::vector<double> alphas = alpha_weights(cfg);
    const bool minimize = cfg.loss == LossKind::simnoipro_minimize;
    if (fixed_groups != nullptr) {
        return simnoipro_objective(fs, r, *fixed_groups, cfg.windows, alphas, cfg.beta, minimize)
            .value;
    }
    const WindowPartition partition = window_partition(r, cfg.windows);
    return simnoipro_objective(fs, r, partition.assignment, cfg.windows, alphas, cfg.beta,
                               minimize)
        .value;
}

ObjectiveGradients cleaner_objective_gradients(const GcnParams& params,
                                               const AffinityGraph& graph, const FeatureSet& fs,
                                               const CleanerConfig& cfg,
                                               const std::vector<std::size_t>* fixed_groups) {
    const GcnCache cache = gcn_forward_cache(params, graph, fs);
    RelevanceScores r = scores_from_cache(cache, fs.clean_count);

    ObjectiveGradients out;
    Vec upstream;
    if (cfg.loss == LossKind::binary_baseline) {
        BinaryLossResult bl = binary_cleaning_loss(r, cfg.lambda);
        out.value = bl.value;
        out.clamped = bl.clamped;
        upstream = std::move(bl.grad_r);
    } else {
        const std::vector<double> alphas = alpha_weights(cfg);
        const bool minimize = cfg.loss == LossKind::simnoipro_minimize;
        const std::vector<std::size_t>* assignment = fixed_groups;
        WindowPartition partition;
        if (assignment == nullptr) {
            partition = window_partition(r, cfg.windows);
            assignment = &partition.assignment;
        }
        ProtoObjective po =
            simnoipro_objective(fs, r, *assignment, cfg.windows, alphas, cfg.beta, minimize);
        out.value = po.value;
        upstream = std::move(po.grad_r);
    }
    GcnGradients grads = gcn_backward_cached(params, graph, fs, cache, upstream);
    out.d_theta1 = std::move(grads.theta1);
    out.d_theta2 = std::move(grads.theta2);
    out.scores = std::move(r);
    return out;
}

CleanResult train_cleaner(const FeatureSet& fs, const AffinityGraph& graph,
                          const CleanerConfig& cfg) {
    cfg.validate();
    fs.validate();
    if (fs.clean_count == 0) throw config_error("train_cleaner: need at least one clean example");
    if (fs.noisy_count() == 0) throw config_error("train_cleaner: empty noisy set");

    const std::size_t hidden = cfg.resolve_hidden_dim(fs.dim());
    Rng rng(cfg.seed);
    GcnParams params = gcn_init(fs.dim(), hidden, rng);
    AdamState state1(params.theta1, "theta1", 0.9, 0.999, 1e-8, cfg.weight_decay);
    AdamState state2(params.theta2, "theta2", 0.9, 0.999, 1e-8, cfg.weight_decay);

    std::vector<std::size_t> kmeans_groups;
    const std::vector<std::size_t>* fixed_groups = nullptr;
    if (cfg.loss != LossKind::binary_baseline && cfg.grouping == NoiseGrouping::feature_kmeans) {
        kmeans_groups = kmeans_noisy_features(fs, cfg.windows, cfg.seed).assignment;
        fixed_groups = &kmeans_groups;
    }

    CleanResult result;
    result.trace.reserve(cfg.iterations);
    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        ObjectiveGradients step = cleaner_objective_gradients(params, graph, fs, cfg, fixed_groups);
        if (!std::isfinite(step.value)) {
            throw numeric_error("train_cleaner: non-finite loss at iteration " +
                                std::to_string(iter));
        }
        result.log_clamp_count += step.clamped;
        result.trace.push_back(
            {iter, step.value, step.scores.mean_clean(), step.scores.mean_noisy()});

        const double lr = schedule_rate(cfg.lr, iter);
        adam_step(params.theta1, step.d_theta1, state1, lr);
        adam_step(params.theta2, step.d_theta2, state2, lr);
        params.theta1.require_finite("train_cleaner: theta1 after iteration " +
                                     std::to_string(iter));
        params.theta2.require_finite("train_cleaner: theta2 after iteration " +
                                     std::to_string(iter));
    }
    result.scores = gcn_forward(params, graph, fs);
    return result;
}

RelevanceScores beta_weighting_scores(const FeatureSet& fs, double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) {
        throw config_error("beta_weighting_scores: beta must be in (0, 1]");
    }
    RelevanceScores scores;
    scores.clean_count = fs.clean_count;
    scores.values.assign(fs.count(), std::min(beta, 1.0 - kLogClampEps));
    for (std::size_t i = 0; i < fs.clean_count; ++i) scores.values[i] = 1.0 - kLogClampEps;
    return scores;
}

RelevanceScores similarity_scores(const FeatureSet& fs) {
    if (fs.clean_count == 0) throw config_error("similarity_scores: no clean examples");
    Vec mean(fs.dim(), 0.0);
    for (std::size_t j = 0; j < fs.clean_count; ++j) axpy(1.0, fs.features.col_span(j), mean);
    const double norm = l2_norm(mean);
    if (norm < kNormGuardEps) {
        throw numeric_error("similarity_scores: clean mean has zero norm");
    }
    RelevanceScores scores;
    scores.clean_count = fs.clean_count;
    scores.values.resize(fs.count());
    for (std::size_t j = 0; j < fs.count(); ++j) {
        const auto v = fs.features.col_span(j);
        const double vn = l2_norm(v);
        double cosine = vn < kNormGuardEps ? 0.0 : dot(mean, v) / (norm * vn);
        scores.values[j] = std::clamp(cosine, kLogClampEps, 1.0 - kLogClampEps);
    }
    return scores;
}

void save_trace_csv(const std::string& path, std::span<const TraceRow> trace) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out << "iteration,loss,mean_clean_r,mean_noisy_r\n";
    char buf[160];
    for (const TraceRow& row : trace) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", row.iteration, row.loss,
                      row.mean_clean_r, row.mean_noisy_r);
        out << buf;
    }
    if (!out) throw io_error(path + ": write failed");
}

}  // namespace noiseproto
