#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace elastika;
using namespace elastika::testing;

namespace {

constexpr Index kM = 101;

// Trapezoid L2 norm, written out independently.
double trap_norm(const Matrix& q) {
    const double h = 1.0 / static_cast<double>(q.cols() - 1);
    double s = 0.0;
    for (Index j = 0; j < q.cols(); ++j) s += (j == 0 || j == q.cols() - 1 ? 0.5 : 1.0) * q.col(j).squaredNorm();
    return std::sqrt(s * h);
}

SrvfCurve scalar_srvf(const Vector& v) { return SrvfCurve({"x"}, Matrix(v.transpose())); }

} // namespace

TEST(ToSrvf, ConstantCurveIsZero) {
    const auto q = to_srvf(scalar_curve(Vector::Constant(kM, 3.0)));
    EXPECT_EQ(q.values().cwiseAbs().maxCoeff(), 0.0);
}

TEST(ToSrvf, IdentityCurveIsOne) {
    const auto q = to_srvf(scalar_curve(sample(kM, [](double t) { return t; })));
    EXPECT_LE((q.values().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(ToSrvf, SquareMatchesAnalyticForm) {
    const auto q = to_srvf(scalar_curve(sample(kM, [](double t) { return t * t; })));
    const Vector ref = sample(kM, [](double t) { return std::sqrt(2.0 * t); });
    EXPECT_LE((q.values().row(0).transpose() - ref).cwiseAbs().maxCoeff(), 5e-2);
}

TEST(ToSrvf, VectorFormulaAndPerChannelForm) {
    Matrix f(2, kM);
    f.row(0) = sample(kM, [](double t) { return t; }).transpose();
    f.row(1) = sample(kM, [](double t) { return -2.0 * t; }).transpose();
    const Curve c("c", "s", {"a", "b"}, f);
    const auto joint = to_srvf(c, SrvfMode::joint);
    const double scale = std::pow(5.0, 0.25);
    EXPECT_NEAR(joint.values()(0, 50), 1.0 / scale, 1e-12);
    EXPECT_NEAR(joint.values()(1, 50), -2.0 / scale, 1e-12);
    const auto split = to_srvf(c, SrvfMode::per_channel);
    EXPECT_NEAR(split.values()(0, 50), 1.0, 1e-12);
    EXPECT_NEAR(split.values()(1, 50), -std::sqrt(2.0), 1e-12);
}

TEST(ToSrvf, IncreasingCurveGivesNonnegativeSrvf) {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const Warp w = smooth_warp(rng, kM, 0.3);
        const auto q = to_srvf(scalar_curve(w.gamma()));
        EXPECT_GE(q.values().minCoeff(), 0.0);
    }
}

TEST(FromSrvf, ZeroIntegrandKeepsStart) {
    const Curve f = from_srvf(scalar_srvf(Vector::Zero(kM)), Vector::Constant(1, 2.0));
    EXPECT_LE((f.values().array() - 2.0).abs().maxCoeff(), 1e-15);
}

TEST(FromSrvf, ConstantOneGivesIdentity) {
    const Curve f = from_srvf(scalar_srvf(Vector::Ones(kM)), Vector::Zero(1));
    EXPECT_LE((f.values().row(0).transpose() - detail::uniform_grid(kM)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FromSrvf, SineRoundTrip) {
    const Vector v = sample(kM, [](double t) { return std::sin(2.0 * kPi * t); });
    const Curve back = from_srvf(to_srvf(scalar_curve(v)), Vector::Constant(1, v(0)));
    EXPECT_LE((back.values().row(0).transpose() - v).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(FromSrvf, MultichannelRoundTrip) {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix f = random_smooth(rng, 3, kM);
        const Curve c("c", "s", {"a", "b", "c"}, f);
        for (auto mode : {SrvfMode::joint, SrvfMode::per_channel}) {
            const Curve back = from_srvf(to_srvf(c, mode), f.col(0), mode);
            EXPECT_LE((back.values() - f).cwiseAbs().maxCoeff(), 1e-9);
        }
    }
}

TEST(WarpAction, IdentityLeavesSrvfUnchanged) {
    std::mt19937_64 rng(4);
    const SrvfCurve q({"a", "b"}, random_smooth(rng, 2, kM));
    EXPECT_LE((warp_action(q, Warp::identity(kM)).values() - q.values()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(WarpAction, ConstantUnderSquareWarp) {
    const Warp w(sample(kM, [](double t) { return t * t; }));
    const auto out = warp_action(scalar_srvf(Vector::Ones(kM)), w);
    const Vector ref = sample(kM, [](double t) { return std::sqrt(2.0 * t); });
    EXPECT_LE((out.values().row(0).transpose() - ref).cwiseAbs().maxCoeff(), 5e-2);
}

TEST(WarpAction, IsometryOfNormAndDistance) {
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 100; ++rep) {
        const Matrix a = random_smooth(rng, 2, kM), b = random_smooth(rng, 2, kM);
        const SrvfCurve q1({"a", "b"}, a / trap_norm(a));
        const SrvfCurve q2({"a", "b"}, b / trap_norm(b));
        const Warp w = smooth_warp(rng, kM, 0.3);
        const auto a1 = warp_action(q1, w);
        const auto a2 = warp_action(q2, w);
        EXPECT_LE(std::abs(trap_norm(a1.values()) - trap_norm(q1.values())), 1e-3);
        EXPECT_LE(std::abs(trap_norm(a1.values() - a2.values()) - trap_norm(q1.values() - q2.values())), 1e-3);
        EXPECT_NEAR(l2_distance(q1, q2), trap_norm(q1.values() - q2.values()), 1e-12);
    }
}

TEST(WarpAction, AgreesWithSrvfOfComposedCurve) {
    // SRVF(f o gamma) = (q o gamma) sqrt(gamma') up to differencing error.
    std::mt19937_64 rng(10);
    const Matrix f = random_smooth(rng, 1, kM, 2);
    const Warp w = smooth_warp(rng, kM, 0.2);
    const Curve c("c", "s", {"x"}, f);
    const auto lhs = to_srvf(apply_warp(c, w));
    const auto rhs = warp_action(to_srvf(c), w);
    EXPECT_LE(trap_norm(lhs.values() - rhs.values()), 5e-2);
}

TEST(WarpGroup, IdentityLaws) {
    std::mt19937_64 rng(12);
    const Warp id = Warp::identity(kM);
    for (int rep = 0; rep < 20; ++rep) {
        const Warp w = smooth_warp(rng, kM);
        EXPECT_LE((warp_compose(id, w).gamma() - w.gamma()).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LE((warp_compose(w, id).gamma() - w.gamma()).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LE((warp_compose(w, warp_invert(w)).gamma() - id.gamma()).cwiseAbs().maxCoeff(), 1e-6);
    }
    EXPECT_LE((warp_invert(id).gamma() - id.gamma()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(WarpGroup, InverseOfLatticeWarpIsExact) {
    // Piecewise-linear warps with breakpoints on the grid invert exactly.
    Vector g(kM);
    for (Index j = 0; j < kM; ++j) {
        const double t = static_cast<double>(j) / (kM - 1);
        g(j) = t <= 0.5 ? 0.6 * t / 0.5 * 0.5 : 0.3 + (t - 0.5) * 1.4;
    }
    const Warp w(g);
    const Warp back = warp_invert(warp_invert(w));
    EXPECT_LE((back.gamma() - w.gamma()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WarpGroup, DoubleInverseWithinInterpolationBound) {
    std::mt19937_64 rng(14);
    for (int rep = 0; rep < 20; ++rep) {
        const Warp w = smooth_warp(rng, kM, 0.2);
        // PL interpolation error of the inverse is bounded by h^2/8 * max|(gamma^-1)''|
        // times the Lipschitz constant of gamma; 1e-3 covers strength 0.2 at grid 101.
        EXPECT_LE((warp_invert(warp_invert(w)).gamma() - w.gamma()).cwiseAbs().maxCoeff(), 1e-3);
    }
}

TEST(WarpGroup, ComposeIsAssociativeWithinInterpolation) {
    std::mt19937_64 rng(16);
    for (int rep = 0; rep < 20; ++rep) {
        const Warp a = smooth_warp(rng, kM), b = smooth_warp(rng, kM), c = smooth_warp(rng, kM);
        const Warp l = warp_compose(warp_compose(a, b), c);
        const Warp r = warp_compose(a, warp_compose(b, c));
        EXPECT_LE((l.gamma() - r.gamma()).cwiseAbs().maxCoeff(), 1e-3);
    }
}

TEST(WarpInvariants, RejectsNonMonotone) {
    Vector g = detail::uniform_grid(5);
    g(2) = g(1);
    EXPECT_THROW(Warp{g}, NonMonotoneWarp);
    Vector h = detail::uniform_grid(5);
    h(4) = 0.9;
    EXPECT_THROW(Warp{h}, NonMonotoneWarp);
}

TEST(WarpSphere, IdentityIsThePole) {
    const auto rep = warp_to_sphere(Warp::identity(kM));
    EXPECT_LE((rep.psi.array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(WarpSphere, SquareWarpGivesRootDerivative) {
    const auto rep = warp_to_sphere(Warp(sample(kM, [](double t) { return t * t; })));
    const Vector ref = sample(kM, [](double t) { return std::sqrt(2.0 * t); });
    EXPECT_LE((rep.psi - ref).cwiseAbs().maxCoeff(), 5e-2);
}

TEST(WarpSphere, RoundTripAndUnitNorm) {
    std::mt19937_64 rng(18);
    const Vector wts = detail::trapezoid_weights(kM);
    for (int rep = 0; rep < 50; ++rep) {
        const Warp w = smooth_warp(rng, kM, 0.3);
        const auto s = warp_to_sphere(w);
        EXPECT_NEAR(s.psi.cwiseProduct(s.psi).dot(wts), 1.0, 1e-8);
        EXPECT_GE(s.psi.minCoeff(), 0.0);
        EXPECT_LE((sphere_to_warp(s).gamma() - w.gamma()).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(WarpSphere, NegativePsiRejected) {
    Vector psi = Vector::Ones(kM);
    psi(10) = -1e-6;
    EXPECT_THROW(sphere_to_warp({psi}), NegativePsi);
}

TEST(SrvfGrid, MismatchedGridsRejected) {
    EXPECT_THROW(l2_distance(scalar_srvf(Vector::Ones(11)), scalar_srvf(Vector::Ones(12))), GridMismatch);
    EXPECT_THROW(warp_action(scalar_srvf(Vector::Ones(11)), Warp::identity(12)), GridMismatch);
}
