#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noiseproto/dataio.hpp"
#include "noiseproto/graph.hpp"
#include "noiseproto/matrix.hpp"
#include "noiseproto/optim.hpp"
#include "noiseproto/prototypes.hpp"
#include "noiseproto/rng.hpp"
#include "noiseproto/scores.hpp"

namespace noiseproto {

// Two-layer graph-convolutional relevance scorer:
//   r = sigmoid(theta2^T relu(theta1^T V A) A)
struct GcnParams {
    Matrix theta1;  // d x h
    Matrix theta2;  // h x 1

    std::size_t feature_dim() const { return theta1.rows(); }
    std::size_t hidden_dim() const { return theta1.cols(); }
};

// Uniform +-sqrt(6 / (fan_in + fan_out)) init.
GcnParams gcn_init(std::size_t feature_dim, std::size_t hidden_dim, Rng& rng);

enum class LossKind {
    simnoipro,           // similarity maximization over hybrid prototypes
    binary_baseline,     // clean-vs-noisy binary classification
    simnoipro_minimize,  // sign-flipped similarity objective
};

enum class AlphaSchedule { increasing, equal, decreasing };

enum class NoiseGrouping { relevance_windows, feature_kmeans };

struct CleanerConfig {
    LossKind loss = LossKind::simnoipro;
    NoiseGrouping grouping = NoiseGrouping::relevance_windows;
    std::size_t windows = 5;  // T
    AlphaSchedule alpha_schedule = AlphaSchedule::increasing;
    double alpha_lo = 0.2;
    double alpha_hi = 1.0;
    double beta = 1.0;
    double lambda = 1.0;  // binary baseline balance weight
    std::size_t iterations = 100;
    LrSchedule lr = LrSchedule{};  // defaults to step decay 0.1, x0.1 every 30
    double weight_decay = 5e-4;
    std::size_t hidden_dim = 0;  // 0 -> max(16, d/4)
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t resolve_hidden_dim(std::size_t feature_dim) const;
};

// Per-window weights [alpha_0 .. alpha_{T-1}] from the configured schedule.
std::vector<double> alpha_weights(const CleanerConfig& cfg);

RelevanceScores gcn_forward(const GcnParams& params, const AffinityGraph& graph,
                            const FeatureSet& features);

struct GcnGradients {
    Matrix theta1;
    Matrix theta2;
};

// Analytic reverse pass; `upstream` is dLoss/dr, length N.
GcnGradients gcn_backward(const GcnParams& params, const AffinityGraph& graph,
                          const FeatureSet& features, std::span<const double> upstream);

// -(p1 . p2) / (||p1|| ||p2||). Throws if either norm falls below eps.
double negative_cosine(std::span<const double> p1, std::span<const double> p2,
                       double eps = 1e-12);

struct BinaryLossResult {
    double value = 0.0;
    Vec grad_r;              // dLoss/dr, length N
    std::size_t clamped = 0;  // entries pulled away from exactly 0/1 before the log
};

BinaryLossResult binary_cleaning_loss(const RelevanceScores& r, double lambda);

// Mean of alpha-weighted negative cosines over the NON-empty groups plus the
// beta-weighted global term. `minimize` flips the sign (similarity
// minimization ablation).
double simnoipro_loss(std::span<const double> p_clean, const GroupedPrototypes& groups,
                      std::span<const double> p_noise_global, std::span<const double> alphas,
                      double beta, bool minimize = false);

struct ProtoObjective {
    double value = 0.0;
    Vec grad_r;  // dLoss/dr, zero on clean entries
};

// Loss and dLoss/dr of the prototype objective with the group membership
// held fixed (gradients flow only through the r_i multipliers and the
// normalizer).
ProtoObjective simnoipro_objective(const FeatureSet& fs, const RelevanceScores& r,
                                   const std::vector<std::size_t>& assignment,
                                   std::size_t group_count, std::span<const double> alphas,
                                   double beta, bool minimize);

// Full objective value at the given parameters (forward passes only), with
// membership recomputed from the induced scores unless `fixed_groups` is
// given. This is what finite-difference checks probe.
double cleaner_objective_value(const GcnParams& params, const AffinityGraph& graph,
                               const FeatureSet& fs, const CleanerConfig& cfg,
                               const std::vector<std::size_t>* fixed_groups = nullptr);

struct ObjectiveGradients {
    double value = 0.0;
    Matrix d_theta1;
    Matrix d_theta2;
    RelevanceScores scores;
    std::size_t clamped = 0;
};

ObjectiveGradients cleaner_objective_gradients(const GcnParams& params,
                                               const AffinityGraph& graph, const FeatureSet& fs,
                                               const CleanerConfig& cfg,
                                               const std::vector<std::size_t>* fixed_groups =
                                                   nullptr);

struct TraceRow {
    std::size_t iteration = 0;
    double loss = 0.0;
    double mean_clean_r = 0.0;
    double mean_noisy_r = 0.0;
};

struct CleanResult {
    RelevanceScores scores;
    std::vector<TraceRow> trace;
    std::size_t log_clamp_count = 0;
};

// Full-batch training of the scorer on one class. Window membership is
// recomputed every iteration from the current scores (kmeans grouping is
// computed once up front and held fixed).
CleanResult train_cleaner(const FeatureSet& fs, const AffinityGraph& graph,
                          const CleanerConfig& cfg);

// Reference reweighting rules: a constant score, and cosine similarity to
// the mean of the clean features. Scores are clamped into (0, 1).
RelevanceScores beta_weighting_scores(const FeatureSet& fs, double beta);
RelevanceScores similarity_scores(const FeatureSet& fs);

void save_trace_csv(const std::string& path, std::span<const TraceRow> trace);

}  // namespace noiseproto
