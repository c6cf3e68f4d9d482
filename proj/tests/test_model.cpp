#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>
#include <gtest/gtest.h>

#include "rfmpc/model.hpp"
#include "rfmpc/plant.hpp"

using namespace rfmpc;

namespace {

ControlAffineModel reactor_model() {
    const auto lin = linearize_reactor(ReactorParams{}, 337.1);
    return linear_model(lin.A, lin.B, lin.C, lin.D, (Vector(3) << 270.0, 0.02, 0.9).finished());
}

ControlAffineModel integrator_model() {
    const Matrix I1 = Matrix::Identity(1, 1);
    return linear_model(Matrix::Zero(1, 1), I1, I1, Vector::Zero(1), Vector::Zero(1));
}

PiecewiseConstantControl constant_control(double t0, double span, int pieces, double u) {
    return {t0, span / pieces, std::vector<Vector>(pieces, Vector::Constant(1, u))};
}

}  // namespace

TEST(LinearModel, ReactorStructure) {
    const auto model = reactor_model();
    const auto lin = linearize_reactor(ReactorParams{}, 337.1);
    const Vector x = (Vector(3) << 300.0, 0.4, 0.1).finished();
    const Vector u = Vector::Constant(1, 12.0);
    EXPECT_LE((model.dynamics(x, u) - (lin.A * x + lin.B * u + lin.D)).norm(), 1e-12);
    EXPECT_EQ(model.h(x)(0), 300.0);
    EXPECT_EQ(model.state_dim, 3);
    EXPECT_EQ(model.output_dim, 1);
    EXPECT_EQ(model.dynamics_jacobian_at(x, u), lin.A);
    EXPECT_EQ(model.output_jacobian_at(x), lin.C);
}

TEST(LinearModel, SingularInputGainRejected) {
    const Matrix B = (Matrix(2, 1) << 0, 1).finished();
    const Matrix C = (Matrix(1, 2) << 1, 0).finished();
    try {
        linear_model(Matrix::Zero(2, 2), B, C, Vector::Zero(2), Vector::Zero(2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidModel);
    }
}

TEST(LinearModel, FiniteDifferenceJacobianFallback) {
    ControlAffineModel m;
    m.state_dim = 2;
    m.output_dim = 1;
    m.f = [](const Vector& x) -> Vector { return (Vector(2) << std::sin(x(0)) * x(1), x(0) * x(0)).finished(); };
    m.g = [](const Vector& x) -> Matrix { return (Matrix(2, 1) << 1.0 + x(1) * x(1), 0.0).finished(); };
    m.h = [](const Vector& x) -> Vector { return Vector::Constant(1, x(0) + x(1) * x(1)); };
    const Vector x = (Vector(2) << 0.3, -0.7).finished();
    const Vector u = Vector::Constant(1, 2.0);
    Matrix J(2, 2);
    J << std::cos(0.3) * -0.7, std::sin(0.3) + 2 * 2.0 * -0.7, 2 * 0.3, 0;
    EXPECT_LE((m.dynamics_jacobian_at(x, u) - J).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_LE((m.output_jacobian_at(x) - (Matrix(1, 2) << 1, -1.4).finished()).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Bif, CoordinateOutput) {
    const Matrix H = (Matrix(1, 3) << 1, 0, 0).finished();
    const auto bif = linear_bif(H, H.transpose());
    const Vector x = (Vector(3) << 3, -4, 5).finished();
    const auto [y, eta] = bif.forward(x);
    EXPECT_NEAR(y(0), 3, 1e-15);
    ASSERT_EQ(eta.size(), 2);
    EXPECT_NEAR(eta(0), -4, 1e-14);
    EXPECT_NEAR(eta(1), 5, 1e-14);
}

TEST(Bif, HandComputedTwoState) {
    const Matrix H = (Matrix(1, 2) << 1, 1).finished();
    const Matrix G = (Matrix(2, 1) << 1, 0).finished();
    const auto bif = linear_bif(H, G);
    const double r2 = std::sqrt(2.0);
    const Vector x = (Vector(2) << 0.7, -1.9).finished();
    const auto [y, eta] = bif.forward(x);
    EXPECT_NEAR(y(0), x(0) + x(1), 1e-14);
    // eta = -sqrt(2) x2 for V = (1,-1)/sqrt(2); the opposite sign choice of V flips it.
    EXPECT_NEAR(std::abs(eta(0)), r2 * std::abs(x(1)), 1e-14);
    EXPECT_NEAR(eta(0), -r2 * x(1), 1e-14);
    const Vector back = bif.inverse(Vector::Constant(1, 2.0), Vector::Constant(1, 0.5));
    EXPECT_NEAR(back(0), 2.0 + 0.5 / r2, 1e-14);
    EXPECT_NEAR(back(1), -0.5 / r2, 1e-14);
}

TEST(Bif, RoundTripAndOutputConsistency) {
    std::mt19937 rng(11);
    std::normal_distribution<double> nd(0.0, 100.0);
    const auto reactor = reactor_model();
    const Matrix H = (Matrix(1, 2) << 1, 1).finished();
    const Matrix G = (Matrix(2, 1) << 1, 0).finished();
    const auto fixture = linear_bif(H, G);
    for (int i = 0; i < 1000; ++i) {
        Vector x3(3), x2(2);
        for (int j = 0; j < 3; ++j) x3(j) = nd(rng);
        for (int j = 0; j < 2; ++j) x2(j) = nd(rng);
        const auto [y3, eta3] = reactor.bif->forward(x3);
        ASSERT_LE((reactor.bif->inverse(y3, eta3) - x3).norm(), 1e-9);
        ASSERT_EQ(y3, reactor.h(x3));
        const auto [y2, eta2] = fixture.forward(x2);
        ASSERT_LE((fixture.inverse(y2, eta2) - x2).norm(), 1e-9);
        ASSERT_EQ(y2, H * x2);
    }
}

TEST(Bif, ForwardOfZeroInternal) {
    const auto model = reactor_model();
    const Vector y = Vector::Constant(1, 311.0);
    const auto [y2, eta] = model.bif->forward(model.bif->inverse(y, Vector::Zero(2)));
    EXPECT_NEAR(y2(0), 311.0, 1e-12);
    EXPECT_LE(eta.norm(), 1e-12);
}

TEST(Bif, GeneralDimensions) {
    std::mt19937 rng(5);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 5, m = 2;
        Matrix H(m, n), G(n, m);
        for (int i = 0; i < H.size(); ++i) H.data()[i] = nd(rng);
        for (int i = 0; i < G.size(); ++i) G.data()[i] = nd(rng);
        const auto bif = linear_bif(H, G);
        Vector x(n);
        for (int i = 0; i < n; ++i) x(i) = nd(rng);
        const auto [y, eta] = bif.forward(x);
        ASSERT_EQ(eta.size(), n - m);
        ASSERT_LE((bif.inverse(y, eta) - x).norm(), 1e-9 * (1 + x.norm()));
        const Vector y_new = (Vector(m) << 1.0, -2.0).finished();
        ASSERT_LE((H * bif.inverse(y_new, eta) - y_new).norm(), 1e-9);
    }
}

TEST(ProperInit, OpenLoopReturnsPrevious) {
    const auto model = reactor_model();
    const Vector x_pre = (Vector(3) << 300, 0.5, 0.4).finished();
    EXPECT_EQ(proper_init({InitVariant::OpenLoop, 0.0}, model, x_pre, Vector::Constant(1, 1.0)), x_pre);
}

TEST(ProperInit, KeepInternalOnReactor) {
    const auto model = reactor_model();
    const Vector x_pre = (Vector(3) << 300, 0.5, 0.4).finished();
    const Vector x_hat = proper_init({InitVariant::OutputResetKeepInternal, 0.0}, model, x_pre, Vector::Constant(1, 295.0));
    EXPECT_NEAR(x_hat(0), 295.0, 1e-12);
    EXPECT_NEAR(x_hat(1), 0.5, 1e-12);
    EXPECT_NEAR(x_hat(2), 0.4, 1e-12);
}

TEST(ProperInit, ZeroInternal) {
    const auto model = reactor_model();
    const Vector x_hat =
        proper_init({InitVariant::OutputResetZeroInternal, 0.0}, model, Vector::Ones(3), Vector::Constant(1, 280.0));
    const auto [y, eta] = model.bif->forward(x_hat);
    EXPECT_NEAR(y(0), 280.0, 1e-12);
    EXPECT_LE(eta.norm(), 1e-12);
}

TEST(ProperInit, ResetWithoutTransformFails) {
    auto model = reactor_model();
    model.bif.reset();
    for (auto v : {InitVariant::OutputResetKeepInternal, InitVariant::OutputResetZeroInternal}) {
        try {
            proper_init({v, 0.0}, model, Vector::Ones(3), Vector::Ones(1));
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::MissingTransform);
        }
    }
    EXPECT_NO_THROW(proper_init({InitVariant::OpenLoop, 0.0}, model, Vector::Ones(3), Vector::Ones(1)));
}

TEST(ProperInit, ResetsLandInInitialSet) {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> temp(250, 400), conc(-1, 2);
    const auto model = reactor_model();
    const double xi = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Vector x_pre = (Vector(3) << temp(rng), conc(rng), conc(rng)).finished();
        const Vector y_hat = Vector::Constant(1, temp(rng));
        const Vector eta_pre = model.bif->forward(x_pre).second;
        for (auto v : {InitVariant::OutputResetKeepInternal, InitVariant::OutputResetZeroInternal}) {
            const Vector x_hat = proper_init({v, xi}, model, x_pre, y_hat);
            ASSERT_LE((model.h(x_hat) - y_hat).norm(), 1e-9);
            const Vector eta = model.bif->forward(x_hat).second;
            ASSERT_TRUE((eta - eta_pre).norm() <= 1e-9 || eta.norm() <= xi + 1e-12);
        }
    }
}

TEST(Control, IndexingAtBreakpoints) {
    PiecewiseConstantControl c{1.0, 0.25, {Vector::Constant(1, 1), Vector::Constant(1, 2), Vector::Constant(1, 3)}};
    EXPECT_EQ(c.index_at(1.0), 0u);
    EXPECT_EQ(c.index_at(1.2499), 0u);
    EXPECT_EQ(c.index_at(1.25), 1u);
    EXPECT_EQ(c.index_at(1.75), 2u);
    EXPECT_EQ(c.index_at(5.0), 2u);
    EXPECT_DOUBLE_EQ(c.end_time(), 1.75);
    EXPECT_EQ(c.at(1.6)(0), 3.0);
}

TEST(Rollout, IntegratorUnitInput) {
    const auto r = model_rollout(integrator_model(), 0.0, Vector::Zero(1), constant_control(0, 1, 1, 1.0), 1.0, 1e-2);
    EXPECT_NEAR(r.outputs.back()(0), 1.0, 1e-9);
    EXPECT_EQ(r.times.back(), 1.0);
}

TEST(Rollout, ReactorMatchesMatrixExponential) {
    const auto lin = linearize_reactor(ReactorParams{}, 337.1);
    const auto model = reactor_model();
    const Vector x0 = model.initial_state;
    const auto r = model_rollout(model, 0.0, x0, constant_control(0, 1, 4, 0.0), 1.0, 1e-3);
    Matrix M = Matrix::Zero(4, 4);
    M.topLeftCorner(3, 3) = lin.A;
    M.topRightCorner(3, 1) = lin.D;
    for (std::size_t i = 0; i < r.times.size(); i += 50) {
        const Matrix E = (M * r.times[i]).exp();
        const Vector exact = E.topLeftCorner(3, 3) * x0 + E.topRightCorner(3, 1);
        ASSERT_LE((r.states[i] - exact).norm(), 1e-6) << "t = " << r.times[i];
    }
}

TEST(Rollout, BreakpointRestartsAreConsistent) {
    const auto model = reactor_model();
    const auto one = model_rollout(model, 0.2, model.initial_state, constant_control(0.2, 0.6, 1, 50.0), 0.8, 1e-3);
    const auto six = model_rollout(model, 0.2, model.initial_state, constant_control(0.2, 0.6, 6, 50.0), 0.8, 1e-3);
    EXPECT_LE((one.states.back() - six.states.back()).norm(), 1e-9);
}

TEST(Rollout, PiecewiseInputSwitchesAtBreakpoint) {
    PiecewiseConstantControl c{0.0, 0.5, {Vector::Constant(1, 1.0), Vector::Constant(1, -2.0)}};
    const auto r = model_rollout(integrator_model(), 0.0, Vector::Zero(1), c, 1.0, 0.3);
    EXPECT_NEAR(r.outputs.back()(0), 0.5 - 1.0, 1e-12);
    bool has_half = false;
    for (double t : r.times) has_half |= std::abs(t - 0.5) < 1e-15;
    EXPECT_TRUE(has_half);
}
