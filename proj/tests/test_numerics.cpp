#include <doctest.h>

#include <cmath>

#include "noiseproto/error.hpp"
#include "noiseproto/gradcheck.hpp"
#include "noiseproto/matrix.hpp"
#include "noiseproto/optim.hpp"
#include "noiseproto/rng.hpp"
#include "test_helpers.hpp"

using namespace noiseproto;

TEST_CASE("matmul identity leaves a matrix unchanged") {
    testutil::Rng rng(1);
    const Matrix a = testutil::random_matrix(rng, 2, 2);
    const Matrix out = matmul(Matrix::identity(2), a);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(out.data()[i] == doctest::Approx(a.data()[i]).epsilon(1e-15));
    }
}

TEST_CASE("matmul matches hand multiplication") {
    Matrix a(2, 2);
    a(0, 0) = 1;
    a(0, 1) = 2;
    a(1, 0) = 3;
    a(1, 1) = 4;
    Matrix b(2, 1);
    b(0, 0) = 1;
    b(1, 0) = 1;
    const Matrix c = matmul(a, b);
    CHECK(c(0, 0) == doctest::Approx(3.0));
    CHECK(c(1, 0) == doctest::Approx(7.0));
}

TEST_CASE("matmul of zeros and ones annihilates") {
    const Matrix c = matmul(Matrix(2, 3), Matrix::filled(3, 2, 1.0));
    for (double x : c.data()) CHECK(x == 0.0);
}

TEST_CASE("matmul rejects dimension mismatch") {
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(4, 1)), shape_error);
}

TEST_CASE("matmul is associative on random 4x4 matrices") {
    testutil::Rng rng(7);
    for (int round = 0; round < 20; ++round) {
        const Matrix a = testutil::random_matrix(rng, 4, 4);
        const Matrix b = testutil::random_matrix(rng, 4, 4);
        const Matrix c = testutil::random_matrix(rng, 4, 4);
        const Matrix left = matmul(matmul(a, b), c);
        const Matrix right = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < left.size(); ++i) {
            CHECK(std::fabs(left.data()[i] - right.data()[i]) < 1e-10);
        }
    }
}

TEST_CASE("adam first step moves by -lr in the gradient direction") {
    Matrix p(1, 1);
    Matrix g(1, 1);
    g(0, 0) = 2.0;
    AdamState st(p, "scalar");
    adam_step(p, g, st, 0.1);
    CHECK(p(0, 0) == doctest::Approx(-0.1).epsilon(1e-7));
    CHECK(st.step == 1);
}

TEST_CASE("adam with zero gradient and no decay leaves params unchanged") {
    Matrix p = Matrix::filled(2, 2, 0.5);
    AdamState st(p);
    adam_step(p, Matrix(2, 2), st, 0.1);
    for (double x : p.data()) CHECK(x == 0.5);
}

TEST_CASE("adam trajectories are deterministic") {
    testutil::Rng rng(3);
    const Matrix grads1 = testutil::random_matrix(rng, 3, 2);
    const Matrix grads2 = testutil::random_matrix(rng, 3, 2);
    auto run = [&]() {
        Matrix p = Matrix::filled(3, 2, 1.0);
        AdamState st(p);
        adam_step(p, grads1, st, 0.05);
        adam_step(p, grads2, st, 0.05);
        return p;
    };
    const Matrix a = run();
    const Matrix b = run();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("adam rejects non-finite gradients and names the parameter") {
    Matrix p(1, 1);
    Matrix g(1, 1);
    g(0, 0) = std::nan("");
    AdamState st(p, "theta1");
    CHECK_THROWS_WITH_AS(adam_step(p, g, st, 0.1),
                         doctest::Contains("theta1"), numeric_error);
}

TEST_CASE("adam drives a quadratic to zero") {
    Matrix p = Matrix::filled(1, 1, 1.0);
    AdamState st(p);
    for (int i = 0; i < 500; ++i) {
        Matrix g(1, 1);
        g(0, 0) = 2.0 * p(0, 0);
        adam_step(p, g, st, 0.1);
    }
    CHECK(std::fabs(p(0, 0)) < 1e-3);
}

TEST_CASE("step decay schedule matches the configured decades") {
    const LrSchedule s = LrSchedule::step(0.1, 0.1, 30, 100);
    CHECK(schedule_rate(s, 0) == doctest::Approx(0.1));
    CHECK(schedule_rate(s, 29) == doctest::Approx(0.1));
    CHECK(schedule_rate(s, 30) == doctest::Approx(0.01));
    CHECK(schedule_rate(s, 99) == doctest::Approx(1e-4));
}

TEST_CASE("cosine annealing reaches the final rate") {
    const LrSchedule s = LrSchedule::cosine(0.1, 0.001, 50);
    CHECK(schedule_rate(s, 0) == doctest::Approx(0.1));
    CHECK(schedule_rate(s, 50) == doctest::Approx(0.001));
    CHECK(schedule_rate(s, 90) == doctest::Approx(0.001));
}

TEST_CASE("schedules are monotone non-increasing") {
    const LrSchedule step = LrSchedule::step(0.1, 0.5, 7, 200);
    const LrSchedule cosine = LrSchedule::cosine(0.1, 0.001, 200);
    double prev_step = 1e9, prev_cos = 1e9;
    for (std::size_t t = 0; t < 220; ++t) {
        const double rs = schedule_rate(step, t);
        const double rc = schedule_rate(cosine, t);
        CHECK(rs <= prev_step + 1e-15);
        CHECK(rc <= prev_cos + 1e-15);
        CHECK(rs > 0.0);
        CHECK(rc > 0.0);
        prev_step = rs;
        prev_cos = rc;
    }
}

TEST_CASE("finite differences recover the derivative of x^2") {
    Matrix x(1, 1);
    x(0, 0) = 3.0;
    const Matrix g = finite_diff_gradient(
        [](const Matrix& m) { return m(0, 0) * m(0, 0); }, x, 1e-5);
    CHECK(std::fabs(g(0, 0) - 6.0) < 1e-6);
}

TEST_CASE("finite differences of a constant are zero") {
    const Matrix g =
        finite_diff_gradient([](const Matrix&) { return 4.2; }, Matrix::filled(2, 3, 1.0), 1e-5);
    for (double x : g.data()) CHECK(x == doctest::Approx(0.0));
}

TEST_CASE("l2_normalize_columns scales a 3-4-5 column") {
    Matrix m(2, 1);
    m(0, 0) = 3.0;
    m(1, 0) = 4.0;
    const Matrix out = l2_normalize_columns(m);
    CHECK(out(0, 0) == doctest::Approx(0.6));
    CHECK(out(1, 0) == doctest::Approx(0.8));
}

TEST_CASE("l2_normalize_columns is idempotent and scale invariant") {
    testutil::Rng rng(11);
    for (int round = 0; round < 25; ++round) {
        const Matrix m = testutil::random_matrix(rng, 5, 3);
        const Matrix once = l2_normalize_columns(m);
        const Matrix twice = l2_normalize_columns(once);
        Matrix scaled = m;
        const double c = rng.uniform(0.1, 10.0);
        for (double& x : scaled.data()) x *= c;
        const Matrix from_scaled = l2_normalize_columns(scaled);
        for (std::size_t i = 0; i < once.size(); ++i) {
            CHECK(std::fabs(once.data()[i] - twice.data()[i]) < 1e-12);
            CHECK(std::fabs(once.data()[i] - from_scaled.data()[i]) < 1e-12);
        }
    }
}

TEST_CASE("l2_normalize_columns leaves zero columns at zero") {
    const Matrix out = l2_normalize_columns(Matrix(3, 2), 1e-12);
    for (double x : out.data()) CHECK(x == 0.0);
}

TEST_CASE("rng streams are reproducible and distinct across seeds") {
    Rng a(42), b(42), c(43);
    bool saw_difference = false;
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t va = a.next_u64();
        CHECK(va == b.next_u64());
        if (va != c.next_u64()) saw_difference = true;
    }
    CHECK(saw_difference);
}

TEST_CASE("rng sampling without replacement covers the requested count") {
    Rng rng(5);
    const auto sample = rng.sample_without_replacement(10, 4);
    CHECK(sample.size() == 4);
    for (std::size_t i = 1; i < sample.size(); ++i) CHECK(sample[i - 1] < sample[i]);
    const auto full = rng.sample_without_replacement(6, 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(full[i] == i);
}
