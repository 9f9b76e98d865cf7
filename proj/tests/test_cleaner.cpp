#include <doctest.h>

#include <cmath>
#include <fstream>

#include "noiseproto/cleaner.hpp"
#include "noiseproto/error.hpp"
#include "noiseproto/gradcheck.hpp"
#include "noiseproto/graph.hpp"
#include "test_helpers.hpp"

using namespace noiseproto;

namespace {

AffinityGraph identity_graph(std::size_t n) {
    AffinityGraph g;
    g.adjacency = Matrix::identity(n);
    return normalize_adjacency(g);
}

AffinityGraph class_graph(const FeatureSet& fs, std::size_t k_neighbors) {
    return normalize_adjacency(build_affinity(fs, k_neighbors));
}

GcnParams params_1x1(double theta1, double theta2) {
    GcnParams p;
    p.theta1 = Matrix(1, 1);
    p.theta1(0, 0) = theta1;
    p.theta2 = Matrix(1, 1);
    p.theta2(0, 0) = theta2;
    return p;
}

CleanerConfig small_config(std::size_t windows = 3) {
    CleanerConfig cfg;
    cfg.windows = windows;
    cfg.iterations = 40;
    cfg.lr = LrSchedule::step(0.1, 0.1, 30, 40);
    return cfg;
}

// Synthetic one-class fixture shared by the training tests.
FeatureSet default_synth_class(std::uint64_t seed = 0) {
    SynthSpec spec;
    spec.classes = 1;
    spec.seed = seed;
    spec.queries_per_class = 0;
    return synthesize(spec).train.front();
}

}  // namespace

TEST_CASE("gcn forward matches the hand-evaluated scalar case") {
    FeatureSet fs;
    fs.clean_count = 1;
    fs.features = Matrix(1, 2);
    fs.features(0, 0) = 1.0;
    fs.features(0, 1) = 2.0;
    const RelevanceScores r = gcn_forward(params_1x1(1.0, 1.0), identity_graph(2), fs);
    CHECK(r.values[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(r.values[1] == doctest::Approx(0.8807970779778823).epsilon(1e-12));
}

TEST_CASE("zero output weights give scores of one half") {
    testutil::Rng rng(101);
    const FeatureSet fs = testutil::random_class(rng, 4, 6, 2);
    GcnParams p;
    p.theta1 = testutil::random_matrix(rng, 4, 8);
    p.theta2 = Matrix(8, 1);
    const RelevanceScores r = gcn_forward(p, class_graph(fs, 3), fs);
    for (double v : r.values) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("gcn forward is equivariant to consistent permutations") {
    testutil::Rng rng(103);
    const FeatureSet fs = testutil::random_class(rng, 5, 8, 3);
    GcnParams p;
    p.theta1 = testutil::random_matrix(rng, 5, 6);
    p.theta2 = testutil::random_matrix(rng, 6, 1);
    const AffinityGraph g = class_graph(fs, 3);
    const RelevanceScores base = gcn_forward(p, g, fs);

    std::vector<std::size_t> perm = {3, 1, 7, 0, 5, 2, 6, 4};
    FeatureSet permuted = fs;
    AffinityGraph permuted_graph;
    permuted_graph.adjacency = Matrix(8, 8);
    permuted_graph.normalized = true;
    for (std::size_t j = 0; j < 8; ++j) {
        std::copy_n(fs.features.col(perm[j]), 5, permuted.features.col(j));
        for (std::size_t i = 0; i < 8; ++i) {
            permuted_graph.adjacency(i, j) = g.adjacency(perm[i], perm[j]);
        }
    }
    const RelevanceScores moved = gcn_forward(p, permuted_graph, permuted);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(moved.values[i] == doctest::Approx(base.values[perm[i]]).epsilon(1e-12));
    }
}

TEST_CASE("gcn scores always live strictly inside (0,1)") {
    testutil::Rng rng(105);
    for (int round = 0; round < 20; ++round) {
        const FeatureSet fs = testutil::random_class(rng, 6, 9, 2);
        GcnParams p;
        p.theta1 = testutil::random_matrix(rng, 6, 10, -3.0, 3.0);
        p.theta2 = testutil::random_matrix(rng, 10, 1, -3.0, 3.0);
        const RelevanceScores r = gcn_forward(p, class_graph(fs, 4), fs);
        for (double v : r.values) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("gcn forward insists on a normalized graph") {
    testutil::Rng rng(107);
    const FeatureSet fs = testutil::random_class(rng, 3, 5, 2);
    const AffinityGraph raw = build_affinity(fs, 2);
    GcnParams p;
    p.theta1 = testutil::random_matrix(rng, 3, 4);
    p.theta2 = testutil::random_matrix(rng, 4, 1);
    CHECK_THROWS_AS(gcn_forward(p, raw, fs), contract_error);
}

TEST_CASE("negative cosine hits the landmark values") {
    const Vec p = {0.3, -0.7, 0.2};
    Vec flipped = p;
    for (double& x : flipped) x = -x;
    CHECK(negative_cosine(p, p) == doctest::Approx(-1.0));
    CHECK(negative_cosine(p, flipped) == doctest::Approx(1.0));
    CHECK(negative_cosine(Vec{1.0, 0.0}, Vec{0.0, 1.0}) == doctest::Approx(0.0));
}

TEST_CASE("negative cosine rejects degenerate prototypes") {
    CHECK_THROWS_AS(negative_cosine(Vec{0.0, 0.0}, Vec{1.0, 0.0}), numeric_error);
}

TEST_CASE("binary loss matches the symmetric half-half case") {
    RelevanceScores r;
    r.values = {0.5, 0.5};
    r.clean_count = 1;
    const BinaryLossResult out = binary_cleaning_loss(r, 1.0);
    CHECK(out.value == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(out.clamped == 0);
}

TEST_CASE("binary loss vanishes toward perfect separation") {
    RelevanceScores r;
    r.values = {1.0 - 1e-9, 1e-9, 1e-9};
    r.clean_count = 1;
    const BinaryLossResult out = binary_cleaning_loss(r, 1.0);
    CHECK(out.value < 1e-8);
}

TEST_CASE("binary loss clamps and counts saturated scores") {
    RelevanceScores r;
    r.values = {1.0, 0.0};
    r.clean_count = 1;
    const BinaryLossResult out = binary_cleaning_loss(r, 1.0);
    CHECK(out.clamped == 2);
    CHECK(std::isfinite(out.value));
}

TEST_CASE("binary loss gradient matches finite differences") {
    testutil::Rng rng(109);
    for (int round = 0; round < 10; ++round) {
        const std::size_t n = 5;
        Matrix x(n, 1);
        for (double& v : x.data()) v = rng.uniform(0.05, 0.95);
        const std::size_t k = 2;
        auto loss_of = [&](const Matrix& m) {
            RelevanceScores r;
            r.values.assign(m.data().begin(), m.data().end());
            r.clean_count = k;
            return binary_cleaning_loss(r, 0.7).value;
        };
        RelevanceScores r;
        r.values.assign(x.data().begin(), x.data().end());
        r.clean_count = k;
        const BinaryLossResult out = binary_cleaning_loss(r, 0.7);
        const Matrix fd = finite_diff_gradient(loss_of, x, 1e-6);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::fabs(fd(i, 0) - out.grad_r[i]) < 1e-6);
        }
    }
}

TEST_CASE("simnoipro loss of identical prototypes is minus one") {
    GroupedPrototypes groups;
    groups.protos = Matrix(2, 1);
    groups.protos(0, 0) = 0.5;
    groups.protos(1, 0) = 0.25;
    groups.empty = {0};
    const Vec p_clean = {2.0, 1.0};  // same direction as the group sum
    const Vec alphas = {1.0};
    CHECK(simnoipro_loss(p_clean, groups, p_clean, alphas, 0.0) == doctest::Approx(-1.0));
}

TEST_CASE("simnoipro loss with zero alphas reduces to the global term") {
    GroupedPrototypes groups;
    groups.protos = Matrix(2, 2);
    groups.protos(0, 0) = 1.0;
    groups.protos(1, 1) = 1.0;
    groups.empty = {0, 0};
    const Vec alphas = {0.0, 0.0};
    const Vec p_clean = {1.0, 0.0};
    const Vec orthogonal = {0.0, 3.0};
    CHECK(simnoipro_loss(p_clean, groups, orthogonal, alphas, 1.0) ==
          doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("simnoipro loss is invariant to positive rescaling of prototypes") {
    testutil::Rng rng(111);
    for (int round = 0; round < 30; ++round) {
        GroupedPrototypes groups;
        groups.protos = testutil::random_matrix(rng, 4, 3);
        groups.empty = {0, 0, 0};
        Vec p_clean(4), p_glob(4);
        for (double& x : p_clean) x = rng.normal();
        for (double& x : p_glob) x = rng.normal();
        const Vec alphas = {0.3, 0.6, 1.0};
        const double base = simnoipro_loss(p_clean, groups, p_glob, alphas, 0.8);

        GroupedPrototypes scaled = groups;
        for (std::size_t t = 0; t < 3; ++t) {
            const double c = rng.uniform(0.1, 10.0);
            for (std::size_t i = 0; i < 4; ++i) scaled.protos(i, t) *= c;
        }
        Vec clean_scaled = p_clean, glob_scaled = p_glob;
        const double c1 = rng.uniform(0.1, 10.0), c2 = rng.uniform(0.1, 10.0);
        for (double& x : clean_scaled) x *= c1;
        for (double& x : glob_scaled) x *= c2;
        const double scaled_loss =
            simnoipro_loss(clean_scaled, scaled, glob_scaled, alphas, 0.8);
        CHECK(scaled_loss == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("simnoipro loss needs a usable term") {
    GroupedPrototypes groups;
    groups.protos = Matrix(2, 2);
    groups.empty = {1, 1};
    const Vec alphas = {1.0, 1.0};
    const Vec p = {1.0, 0.0};
    CHECK_THROWS_AS(simnoipro_loss(p, groups, p, alphas, 0.0), numeric_error);
}

TEST_CASE("empty windows are skipped and divided out") {
    // One empty window out of two: the non-empty term carries full weight.
    GroupedPrototypes groups;
    groups.protos = Matrix(2, 2);
    groups.protos(0, 0) = 1.0;
    groups.empty = {0, 1};
    const Vec alphas = {0.5, 0.5};
    const Vec p_clean = {1.0, 0.0};
    CHECK(simnoipro_loss(p_clean, groups, p_clean, alphas, 0.0) == doctest::Approx(-0.5));
}

TEST_CASE("alpha schedules interpolate between the endpoints") {
    CleanerConfig cfg;
    cfg.windows = 5;
    cfg.alpha_lo = 0.2;
    cfg.alpha_hi = 1.0;
    cfg.alpha_schedule = AlphaSchedule::increasing;
    const Vec inc = alpha_weights(cfg);
    CHECK(inc[0] == doctest::Approx(0.2));
    CHECK(inc[2] == doctest::Approx(0.6));
    CHECK(inc[4] == doctest::Approx(1.0));

    cfg.alpha_schedule = AlphaSchedule::decreasing;
    const Vec dec = alpha_weights(cfg);
    CHECK(dec[0] == doctest::Approx(1.0));
    CHECK(dec[4] == doctest::Approx(0.2));

    cfg.alpha_schedule = AlphaSchedule::equal;
    for (double a : alpha_weights(cfg)) CHECK(a == doctest::Approx(1.0));
}

TEST_CASE("gcn backward matches finite differences") {
    testutil::Rng rng(113);
    const FeatureSet fs = testutil::random_class(rng, 4, 6, 2);
    const AffinityGraph g = class_graph(fs, 3);
    GcnParams p;
    p.theta1 = testutil::random_matrix(rng, 4, 5);
    p.theta2 = testutil::random_matrix(rng, 5, 1);
    Vec upstream(6);
    for (double& u : upstream) u = rng.uniform(-1.0, 1.0);

    const GcnGradients analytic = gcn_backward(p, g, fs, upstream);

    auto objective_theta1 = [&](const Matrix& theta1) {
        GcnParams probe = p;
        probe.theta1 = theta1;
        const RelevanceScores r = gcn_forward(probe, g, fs);
        double acc = 0.0;
        for (std::size_t i = 0; i < 6; ++i) acc += upstream[i] * r.values[i];
        return acc;
    };
    auto objective_theta2 = [&](const Matrix& theta2) {
        GcnParams probe = p;
        probe.theta2 = theta2;
        const RelevanceScores r = gcn_forward(probe, g, fs);
        double acc = 0.0;
        for (std::size_t i = 0; i < 6; ++i) acc += upstream[i] * r.values[i];
        return acc;
    };
    const Matrix fd1 = finite_diff_gradient(objective_theta1, p.theta1, 1e-5);
    const Matrix fd2 = finite_diff_gradient(objective_theta2, p.theta2, 1e-5);
    CHECK(gradient_rel_error(analytic.theta1, fd1) < 1e-4);
    CHECK(gradient_rel_error(analytic.theta2, fd2) < 1e-4);
}

TEST_CASE("zero upstream gradient zeroes the parameter gradients") {
    testutil::Rng rng(115);
    const FeatureSet fs = testutil::random_class(rng, 3, 5, 2);
    GcnParams p;
    p.theta1 = testutil::random_matrix(rng, 3, 4);
    p.theta2 = testutil::random_matrix(rng, 4, 1);
    const GcnGradients grads = gcn_backward(p, class_graph(fs, 2), fs, Vec(5, 0.0));
    for (double x : grads.theta1.data()) CHECK(x == 0.0);
    for (double x : grads.theta2.data()) CHECK(x == 0.0);
}

TEST_CASE("a fully inactive relu leaves theta2 untouched") {
    FeatureSet fs;
    fs.clean_count = 1;
    fs.features = Matrix::filled(2, 4, 0.5);  // positive features
    GcnParams p;
    p.theta1 = Matrix::filled(2, 3, -1.0);  // all pre-activations negative
    p.theta2 = Matrix::filled(3, 1, 0.7);
    const GcnGradients grads = gcn_backward(p, identity_graph(4), fs, Vec(4, 1.0));
    for (double x : grads.theta2.data()) CHECK(x == 0.0);
}

TEST_CASE("full simnoipro objective gradient matches finite differences") {
    testutil::Rng rng(117);
    const FeatureSet fs = testutil::random_class(rng, 6, 10, 2);
    const AffinityGraph g = class_graph(fs, 4);
    GcnParams p;
    p.theta1 = testutil::random_matrix(rng, 6, 8);
    p.theta2 = testutil::random_matrix(rng, 8, 1);
    CleanerConfig cfg = small_config(3);

    const ObjectiveGradients analytic = cleaner_objective_gradients(p, g, fs, cfg);

    auto value_theta1 = [&](const Matrix& theta1) {
        GcnParams probe = p;
        probe.theta1 = theta1;
        return cleaner_objective_value(probe, g, fs, cfg);
    };
    auto value_theta2 = [&](const Matrix& theta2) {
        GcnParams probe = p;
        probe.theta2 = theta2;
        return cleaner_objective_value(probe, g, fs, cfg);
    };
    CHECK(gradient_rel_error(analytic.d_theta1,
                             finite_diff_gradient(value_theta1, p.theta1, 1e-5)) < 1e-4);
    CHECK(gradient_rel_error(analytic.d_theta2,
                             finite_diff_gradient(value_theta2, p.theta2, 1e-5)) < 1e-4);
}

TEST_CASE("kmeans-grouped objective gradient matches finite differences") {
    testutil::Rng rng(119);
    const FeatureSet fs = testutil::random_class(rng, 5, 12, 3);
    const AffinityGraph g = class_graph(fs, 4);
    GcnParams p;
    p.theta1 = testutil::random_matrix(rng, 5, 6);
    p.theta2 = testutil::random_matrix(rng, 6, 1);
    CleanerConfig cfg = small_config(3);
    cfg.grouping = NoiseGrouping::feature_kmeans;
    const std::vector<std::size_t> groups = kmeans_noisy_features(fs, 3, 5).assignment;

    const ObjectiveGradients analytic = cleaner_objective_gradients(p, g, fs, cfg, &groups);
    auto value_theta1 = [&](const Matrix& theta1) {
        GcnParams probe = p;
        probe.theta1 = theta1;
        return cleaner_objective_value(probe, g, fs, cfg, &groups);
    };
    CHECK(gradient_rel_error(analytic.d_theta1,
                             finite_diff_gradient(value_theta1, p.theta1, 1e-5)) < 1e-4);
}

TEST_CASE("training produces a finite loss trace and scores") {
    const FeatureSet fs = default_synth_class();
    const AffinityGraph g = class_graph(fs, 10);
    CleanerConfig cfg;
    const CleanResult result = train_cleaner(fs, g, cfg);
    REQUIRE(result.trace.size() == cfg.iterations);
    for (const TraceRow& row : result.trace) CHECK(std::isfinite(row.loss));
    result.scores.validate();
}

TEST_CASE("binary baseline pushes clean scores up") {
    const FeatureSet fs = default_synth_class();
    const AffinityGraph g = class_graph(fs, 10);
    CleanerConfig cfg;
    cfg.loss = LossKind::binary_baseline;
    const CleanResult result = train_cleaner(fs, g, cfg);
    CHECK(result.trace.back().mean_clean_r > result.trace.front().mean_clean_r);
    CHECK(result.scores.mean_clean() > 0.9);
}

TEST_CASE("training is deterministic given the seed") {
    const FeatureSet fs = default_synth_class(3);
    const AffinityGraph g = class_graph(fs, 10);
    CleanerConfig cfg;
    cfg.iterations = 30;
    cfg.lr = LrSchedule::step(0.1, 0.1, 30, 30);
    const CleanResult a = train_cleaner(fs, g, cfg);
    const CleanResult b = train_cleaner(fs, g, cfg);
    REQUIRE(a.scores.values.size() == b.scores.values.size());
    for (std::size_t i = 0; i < a.scores.values.size(); ++i) {
        CHECK(a.scores.values[i] == b.scores.values[i]);
    }
}

TEST_CASE("similarity minimization drives the unified prototype away from the clean one") {
    const FeatureSet fs = default_synth_class(1);
    const AffinityGraph g = class_graph(fs, 10);
    CleanerConfig cfg;

    const CleanResult maximized = train_cleaner(fs, g, cfg);
    cfg.loss = LossKind::simnoipro_minimize;
    const CleanResult minimized = train_cleaner(fs, g, cfg);

    const HybridPrototypes hp_max = unified_prototype(fs, maximized.scores, cfg.windows);
    const HybridPrototypes hp_min = unified_prototype(fs, minimized.scores, cfg.windows);
    const double cos_max = -negative_cosine(hp_max.unified, hp_max.clean);
    const double cos_min = -negative_cosine(hp_min.unified, hp_min.clean);
    CHECK(cos_max > cos_min);
}

TEST_CASE("default training loss is non-increasing across 30-iteration windows") {
    const FeatureSet fs = default_synth_class();
    const AffinityGraph g = class_graph(fs, 10);
    CleanerConfig cfg;
    const CleanResult result = train_cleaner(fs, g, cfg);

    // Dynamic regrouping makes the converged tail jitter by small discrete
    // amounts, so a regression only counts when it exceeds 5% of the total
    // descent range.
    double lo = result.trace.front().loss, hi = lo;
    for (const TraceRow& row : result.trace) {
        lo = std::min(lo, row.loss);
        hi = std::max(hi, row.loss);
    }
    const double tolerance = 0.05 * (hi - lo);
    std::size_t violations = 0;
    for (std::size_t i = 0; i + 30 < result.trace.size(); ++i) {
        if (result.trace[i + 30].loss > result.trace[i].loss + tolerance) ++violations;
    }
    CHECK(violations <= 5);
    // And the descent itself is real: the final window sits below the start.
    CHECK(result.trace.back().loss < result.trace.front().loss);
}

TEST_CASE("training rejects an empty noisy set") {
    testutil::Rng rng(121);
    FeatureSet fs = testutil::random_class(rng, 4, 5, 5);
    AffinityGraph g = class_graph(fs, 2);
    CHECK_THROWS_AS(train_cleaner(fs, g, CleanerConfig{}), config_error);
}

TEST_CASE("invalid window count is rejected before compute") {
    CleanerConfig cfg;
    cfg.windows = 0;
    CHECK_THROWS_AS(cfg.validate(), config_error);
}

TEST_CASE("beta weighting emits a constant score sheet") {
    testutil::Rng rng(123);
    const FeatureSet fs = testutil::random_class(rng, 4, 7, 2);
    const RelevanceScores r = beta_weighting_scores(fs, 0.4);
    r.validate();
    for (std::size_t i = 2; i < 7; ++i) CHECK(r.values[i] == doctest::Approx(0.4));
    CHECK(r.mean_clean() > 0.999);
}

TEST_CASE("similarity scores rank center-aligned features above distractors") {
    const FeatureSet fs = [] {
        FeatureSet f;
        f.clean_count = 2;
        f.features = Matrix(2, 4);
        f.features(0, 0) = 1.0;
        f.features(0, 1) = 1.0;
        f.features(0, 2) = 0.9;   // aligned noisy
        f.features(1, 2) = 0.1;
        f.features(1, 3) = 1.0;   // orthogonal noisy
        return f;
    }();
    const RelevanceScores r = similarity_scores(fs);
    r.validate();
    CHECK(r.values[2] > r.values[3]);
}

TEST_CASE("trace csv writes one row per iteration") {
    testutil::TempDir dir("trace");
    const std::vector<TraceRow> trace = {{0, -0.5, 0.5, 0.5}, {1, -0.75, 0.6, 0.4}};
    const std::string path = dir.file("trace.csv");
    save_trace_csv(path, trace);
    std::ifstream in(path);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);  // header + 2
}
