#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rfmpc/numerics.hpp"

using namespace rfmpc;

namespace {

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

OdeProblem decay_problem() {
    return {1, [](double, const Vector& x) -> Vector { return -x; }, 0.0, Vector::Ones(1)};
}

}  // namespace

TEST(Rk4, ZeroDynamicsKeepsState) {
    OdeProblem prob{2, [](double, const Vector& x) -> Vector { return Vector::Zero(x.size()); }, 0.0,
                    (Vector(2) << 3.0, -1.5).finished()};
    const auto traj = integrate_rk4(prob, 1.0, 0.1);
    for (const auto& x : traj.states) EXPECT_EQ(x, prob.x0);
}

TEST(Rk4, ExponentialDecay) {
    const auto traj = integrate_rk4(decay_problem(), 1.0, 1e-3);
    EXPECT_NEAR(traj.back()(0), std::exp(-1.0), 1e-9);
}

TEST(Rk4, GridIncludesEndpointsAndShortensLastStep) {
    const auto traj = integrate_rk4(decay_problem(), 1.0, 0.3);
    ASSERT_EQ(traj.times.size(), 5u);
    EXPECT_EQ(traj.times.front(), 0.0);
    EXPECT_EQ(traj.times.back(), 1.0);
    EXPECT_NEAR(traj.times[3], 0.9, 1e-15);
}

TEST(Rk4, ZeroLengthInterval) {
    const auto traj = integrate_rk4(decay_problem(), 0.0, 0.1);
    ASSERT_EQ(traj.times.size(), 1u);
    EXPECT_EQ(traj.back()(0), 1.0);
}

TEST(Rk4, FiniteEscapeReportsDivergence) {
    OdeProblem prob{1, [](double, const Vector& x) -> Vector { return x.cwiseProduct(x); }, 0.0, Vector::Ones(1)};
    try {
        integrate_rk4(prob, 2.0, 1e-3);
        FAIL() << "expected divergence";
    } catch (const IntegrationDiverged& e) {
        EXPECT_EQ(e.kind(), ErrorKind::IntegrationDiverged);
        EXPECT_LT(e.last_finite_time(), 2.0);
        EXPECT_GT(e.last_finite_time(), 0.9);
    }
}

TEST(Rk4, RejectsBadArguments) {
    EXPECT_THROW(integrate_rk4(decay_problem(), 1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(integrate_rk4(decay_problem(), -1.0, 0.1), std::invalid_argument);
}

TEST(Rk4, FourthOrderConvergence) {
    const double exact = std::exp(-1.0);
    for (double h : {0.2, 0.1, 0.05}) {
        const double e1 = std::abs(integrate_rk4(decay_problem(), 1.0, h).back()(0) - exact);
        const double e2 = std::abs(integrate_rk4(decay_problem(), 1.0, h / 2).back()(0) - exact);
        EXPECT_GE(e1 / e2, 12.0) << "h = " << h;
    }
}

TEST(NullSpace, CoordinateKernel) {
    const Matrix H = (Matrix(1, 3) << 1, 0, 0).finished();
    const Matrix V = null_space_basis(H);
    ASSERT_EQ(V.rows(), 3);
    ASSERT_EQ(V.cols(), 2);
    EXPECT_LE(max_abs(H * V), 1e-12);
    EXPECT_LE(max_abs(V.row(0)), 1e-12);
    EXPECT_LE(max_abs(V.transpose() * V - Matrix::Identity(2, 2)), 1e-12);
}

TEST(NullSpace, TwoByTwoKernel) {
    const Matrix H = (Matrix(1, 2) << 1, 1).finished();
    const Matrix V = null_space_basis(H);
    ASSERT_EQ(V.cols(), 1);
    const double s = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(V(0, 0)), s, 1e-12);
    EXPECT_NEAR(V(1, 0), -V(0, 0), 1e-12);
}

TEST(NullSpace, SquareFullRankHasEmptyKernel) {
    const Matrix V = null_space_basis(Matrix::Identity(2, 2));
    EXPECT_EQ(V.rows(), 2);
    EXPECT_EQ(V.cols(), 0);
}

TEST(NullSpace, RankDeficientThrows) {
    const Matrix H = (Matrix(2, 3) << 1, 2, 3, 2, 4, 6).finished();
    try {
        null_space_basis(H);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::RankDeficient);
    }
}

TEST(NullSpace, RandomWellConditionedMatrices) {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> dim(1, 6);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = dim(rng) + 1;
        const int m = std::uniform_int_distribution<int>(1, n)(rng);
        // H = U diag(s) W^T with singular values spread up to 1e6
        Eigen::HouseholderQR<Matrix> qu(Matrix::Random(m, m)), qw(Matrix::Random(n, n));
        const Matrix U = qu.householderQ();
        const Matrix W = qw.householderQ();
        Matrix S = Matrix::Zero(m, n);
        for (int i = 0; i < m; ++i) S(i, i) = std::pow(10.0, 6.0 * i / std::max(1, m - 1)) * 1e-3;
        const Matrix H = U * S * W.transpose();
        const Matrix V = null_space_basis(H);
        ASSERT_EQ(V.cols(), n - m);
        EXPECT_LE(max_abs(H * V), 1e-10);
        EXPECT_LE(max_abs(V.transpose() * V - Matrix::Identity(n - m, n - m)), 1e-10);
    }
}

TEST(Pseudoinverse, OrthonormalColumnsGiveTranspose) {
    const Matrix V = null_space_basis((Matrix(1, 3) << 1, 2, 3).finished());
    EXPECT_LE(max_abs(pseudoinverse(V) - V.transpose()), 1e-12);
}

TEST(Pseudoinverse, ScaledColumn) {
    const Matrix V = (Matrix(2, 1) << 2, 0).finished();
    const Matrix P = pseudoinverse(V);
    EXPECT_NEAR(P(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(P(0, 1), 0.0, 1e-15);
}

TEST(Pseudoinverse, UnitColumn) {
    const double s = 1.0 / std::sqrt(2.0);
    const Matrix V = (Matrix(2, 1) << s, -s).finished();
    const Matrix P = pseudoinverse(V);
    EXPECT_NEAR(P(0, 0), s, 1e-15);
    EXPECT_NEAR(P(0, 1), -s, 1e-15);
}

TEST(Pseudoinverse, LeftInverseIdentity) {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = std::uniform_int_distribution<int>(1, 7)(rng);
        const int k = std::uniform_int_distribution<int>(1, n)(rng);
        Matrix V(n, k);
        std::normal_distribution<double> nd;
        for (int i = 0; i < V.size(); ++i) V.data()[i] = nd(rng);
        EXPECT_LE(max_abs(pseudoinverse(V) * V - Matrix::Identity(k, k)), 1e-10);
    }
}

TEST(Pseudoinverse, RankDeficientThrows) {
    const Matrix V = (Matrix(3, 2) << 1, 2, 1, 2, 1, 2).finished();
    EXPECT_THROW(pseudoinverse(V), Error);
}

TEST(StepCount, CoversSpan) {
    EXPECT_EQ(step_count(0.05, 1e-3), 50);
    EXPECT_EQ(step_count(1.0, 0.3), 4);
    EXPECT_EQ(step_count(0.0, 0.1), 0);
}
