#include <catch2/catch.hpp>

#include "remse/rng.hpp"
#include "remse/splines.hpp"

using remse::PenaltyMatrix;
using remse::SplineBasis;

namespace {

// independent Cox-de Boor recursion, used as the oracle
double naive_bspline(const std::vector<double>& knots, int k, int p, double t) {
    if (p == 0) return knots[k] <= t && t < knots[k + 1] ? 1.0 : 0.0;
    double value = 0.0;
    const double d1 = knots[k + p] - knots[k];
    if (d1 > 0.0) value += (t - knots[k]) / d1 * naive_bspline(knots, k, p - 1, t);
    const double d2 = knots[k + p + 1] - knots[k + 1];
    if (d2 > 0.0) value += (knots[k + p + 1] - t) / d2 * naive_bspline(knots, k + 1, p - 1, t);
    return value;
}

}  // namespace

TEST_CASE("degree-0 basis is the bin indicator") {
    SplineBasis b = SplineBasis::build(4.0, 4, 0);
    Eigen::VectorXd v = b.eval(2.5);
    REQUIRE(v.size() == 4);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 0.0);
    CHECK(v[2] == 1.0);
    CHECK(v[3] == 0.0);
    CHECK(b.eval(0.0)[0] == 1.0);
    CHECK(b.eval(4.0)[3] == 1.0);  // right-closed last bin
    CHECK(b.eval(0.999)[0] == 1.0);
    CHECK(b.eval(1.0)[1] == 1.0);
}

TEST_CASE("partition of unity on a dense grid") {
    SplineBasis b = SplineBasis::build(7.3, 12, 3);
    for (int g = 0; g < 1000; ++g) {
        const double t = 7.3 * g / 999.0;
        CHECK(std::abs(b.eval(t).sum() - 1.0) < 1e-10);
        CHECK(b.eval(t).minCoeff() >= 0.0);
    }
}

TEST_CASE("at most degree+1 nonzero basis values") {
    SplineBasis b = SplineBasis::build(5.0, 10, 3);
    remse::Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        const Eigen::VectorXd v = b.eval(5.0 * rng.uniform());
        CHECK((v.array() != 0.0).count() <= 4);
    }
}

TEST_CASE("evaluation outside the window fails") {
    SplineBasis b = SplineBasis::build(2.0, 6, 3);
    CHECK_THROWS_AS(b.eval(-0.001), remse::input_error);
    CHECK_THROWS_AS(b.eval(2.001), remse::input_error);
}

TEST_CASE("construction preconditions") {
    CHECK_THROWS_AS(SplineBasis::build(0.0, 10, 3), remse::input_error);
    CHECK_THROWS_AS(SplineBasis::build(1.0, 3, 3), remse::input_error);
}

TEST_CASE("de Boor evaluation matches the naive recursion") {
    for (int degree : {1, 2, 3}) {
        SplineBasis b = SplineBasis::build(10.0, 9, degree);
        remse::Rng rng(42 + degree);
        for (int i = 0; i < 100; ++i) {
            const double t = 10.0 * rng.uniform();
            const Eigen::VectorXd v = b.eval(t);
            for (int k = 0; k < b.size(); ++k)
                CHECK(std::abs(v[k] - naive_bspline(b.knots(), k, degree, t)) < 1e-12);
        }
    }
}

TEST_CASE("first-order penalty for K=3 is the known matrix") {
    PenaltyMatrix p = PenaltyMatrix::build(3, 1);
    Eigen::MatrixXd expected(3, 3);
    expected << 1, -1, 0, -1, 2, -1, 0, -1, 1;
    CHECK((p.matrix - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant coefficient vectors are unpenalized") {
    for (int order : {1, 2, 3}) {
        PenaltyMatrix p = PenaltyMatrix::build(8, order);
        Eigen::VectorXd alpha = Eigen::VectorXd::Constant(8, 3.7);
        CHECK(std::abs(alpha.dot(p.matrix * alpha)) < 1e-12);
    }
}

TEST_CASE("quadratic form equals the direct squared-difference sum") {
    PenaltyMatrix p = PenaltyMatrix::build(10, 2);
    remse::Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd alpha(10);
        for (int k = 0; k < 10; ++k) alpha[k] = rng.normal();
        double direct = 0.0;
        for (int k = 0; k + 2 < 10; ++k) {
            const double d = alpha[k + 2] - 2.0 * alpha[k + 1] + alpha[k];
            direct += d * d;
        }
        CHECK(std::abs(alpha.dot(p.matrix * alpha) - direct) < 1e-10);
    }
}

TEST_CASE("penalty is positive semidefinite with rank K-order") {
    for (int order : {1, 2}) {
        PenaltyMatrix p = PenaltyMatrix::build(10, order);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.matrix);
        CHECK(es.eigenvalues().minCoeff() > -1e-10);
        CHECK((es.eigenvalues().array() > 1e-10).count() == 10 - order);
    }
    CHECK_THROWS_AS(PenaltyMatrix::build(5, 5), remse::input_error);
}

TEST_CASE("constrained columns have zero grid means") {
    SplineBasis b = SplineBasis::build(3.0, 10, 3);
    Eigen::VectorXd col_means = Eigen::VectorXd::Zero(b.constrained_size());
    for (double t : b.constraint_grid()) col_means += b.eval_constrained(t);
    col_means /= static_cast<double>(b.constraint_grid().size());
    CHECK(col_means.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("penalty transforms consistently to constrained coordinates") {
    SplineBasis b = SplineBasis::build(3.0, 10, 3);
    PenaltyMatrix p = PenaltyMatrix::build(10, 2);
    const Eigen::MatrixXd sc = p.constrained(b);
    remse::Rng rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::VectorXd v(b.constrained_size());
        for (int k = 0; k < v.size(); ++k) v[k] = rng.normal();
        const Eigen::VectorXd mapped = b.constraint_transform() * v;
        CHECK(std::abs(v.dot(sc * v) - mapped.dot(p.matrix * mapped)) < 1e-10);
    }
}
