#include <array>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "l4twist/dynamics.hpp"
#include "l4twist/integrate.hpp"

using namespace l4twist;

namespace {

std::mt19937_64 rng(20240611);

double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

RotatingState random_state()
{
    // Keep well away from both primaries.
    while (true) {
        RotatingState q{uniform(-1.2, 1.2), uniform(-1.2, 1.2), uniform(-1.0, 1.0), uniform(-1.0, 1.0)};
        if (std::hypot(q.x + 0.5, q.y) > 0.2 && std::hypot(q.x - 0.5, q.y) > 0.2) return q;
    }
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

} // namespace

TEST(MassRatio, RejectsOutOfRange)
{
    EXPECT_THROW(MassRatio(0.0), Error);
    EXPECT_THROW(MassRatio(-0.1), Error);
    EXPECT_THROW(MassRatio(0.6), Error);
    EXPECT_THROW(MassRatio(NAN), Error);
    EXPECT_NO_THROW(MassRatio(0.01));
    try {
        MassRatio bad(0.0);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidParameter);
    }
}

TEST(Frequencies, SatisfyCharacteristicIdentities)
{
    for (int i = 0; i < 100; ++i) {
        const double mu = uniform(1e-6, kMu1 * 0.999);
        const auto f = frequencies(MassRatio(mu));
        EXPECT_NEAR(f.omega_s * f.omega_s + f.omega_l * f.omega_l, 1.0, 1e-12);
        EXPECT_NEAR(f.omega_s * f.omega_s * f.omega_l * f.omega_l, 27.0 * mu * (1.0 - mu) / 4.0, 1e-12);
        EXPECT_GT(f.omega_s, f.omega_l);
    }
}

TEST(Frequencies, HyperbolicBeyondMu1)
{
    try {
        frequencies(MassRatio(0.04));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::HyperbolicEquilibrium);
    }
    const auto f = frequencies(MassRatio(kMu1));
    EXPECT_NEAR(f.omega_s, f.omega_l, 1e-6);
}

TEST(Resonance, InvertsFrequencyRatio)
{
    for (double r : {3.0, 10.0 / 3.0, 3.5, 11.0 / 3.0, 4.0, 7.0}) {
        const MassRatio mu = mass_ratio_for_resonance(r);
        EXPECT_NEAR(frequencies(mu).ratio(), r, 1e-12 * r);
        EXPECT_LT(mu.value(), kMu1);
    }
    EXPECT_THROW(mass_ratio_for_resonance(1.0), Error);
    EXPECT_THROW(mass_ratio_for_resonance(0.5), Error);
}

TEST(Resonance, TableValuesToFiveDecimals)
{
    EXPECT_NEAR(mass_ratio_for_resonance(4.0).value(), 0.00827, 5e-6);
    EXPECT_NEAR(mass_ratio_for_resonance(11.0 / 3.0).value(), 0.00964, 5e-6);
    EXPECT_NEAR(mass_ratio_for_resonance(3.5).value(), 0.01045, 5e-6);
    EXPECT_NEAR(mass_ratio_for_resonance(10.0 / 3.0).value(), 0.01135, 5e-6);
    // The 1:3 resonance is 0.013516..., which rounds to 0.01352.
    EXPECT_NEAR(mass_ratio_for_resonance(3.0).value(), 0.013516016, 1e-9);
}

TEST(Energy, ZeroAtL4AndPositiveNearby)
{
    for (int i = 0; i < 50; ++i) {
        const MassRatio mu(uniform(1e-5, kMu1 * 0.999));
        const RotatingState l4 = lagrange_point(mu, LagrangePoint::L4);
        EXPECT_NEAR(energy_rotating(l4, mu), 0.0, 1e-14);
        const RotatingState f = vector_field_rotating(l4, mu);
        EXPECT_NEAR(std::abs(f.x) + std::abs(f.y) + std::abs(f.px) + std::abs(f.py), 0.0, 1e-14);
        const RotatingState l5 = lagrange_point(mu, LagrangePoint::L5);
        EXPECT_NEAR(energy_rotating(l5, mu), 0.0, 1e-14);
    }
}

TEST(Energy, QuadraticGrowthAlongX)
{
    const MassRatio mu(0.01);
    RotatingState q = lagrange_point(mu, LagrangePoint::L4);
    q.x += 1e-5;
    const double e1 = energy_rotating(q, mu);
    q.x += 1e-5;
    const double e2 = energy_rotating(q, mu);
    EXPECT_GT(e1, 0.0);
    EXPECT_NEAR(e2 / e1, 4.0, 1e-3);
}

TEST(Energy, JacobiConstant)
{
    const MassRatio mu(0.01);
    const double s = energy_offset(mu);
    EXPECT_NEAR(s, 0.5 * (3.0 + 0.01 * (0.01 - 1.0)), 1e-16);
    EXPECT_NEAR(jacobi_constant(0.0, mu), -2.0 * (0.0 - s), 1e-15);
    EXPECT_NEAR(jacobi_constant(0.02, mu), 2.0 * s - 0.04, 1e-15);
}

TEST(VectorField, MatchesFiniteDifferenceGradient)
{
    for (double mu_v : {0.001, 0.01, 0.03}) {
        const MassRatio mu(mu_v);
        const Cr3bp sys(mu);
        for (int i = 0; i < 100; ++i) {
            const RotatingState q = random_state();
            const RotatingState f = sys.vector_field(q);
            auto dH = [&](int k) {
                const double h = 1e-6;
                RotatingState a = q, b = q;
                double* pa[] = {&a.x, &a.y, &a.px, &a.py};
                double* pb[] = {&b.x, &b.y, &b.px, &b.py};
                *pa[k] += h;
                *pb[k] -= h;
                return (sys.energy(a) - sys.energy(b)) / (2 * h);
            };
            EXPECT_LT(rel_err(f.x, dH(2)), 1e-6);
            EXPECT_LT(rel_err(f.y, dH(3)), 1e-6);
            EXPECT_LT(rel_err(f.px, -dH(0)), 1e-6);
            EXPECT_LT(rel_err(f.py, -dH(1)), 1e-6);
        }
    }
}

TEST(VectorField, RegularizedMatchesFiniteDifferenceGradient)
{
    const MassRatio mu(0.01);
    const Cr3bp sys(mu);
    for (int i = 0; i < 100; ++i) {
        RegularizedState r{uniform(0.1, 3.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0),
                           uniform(-1.0, 1.0), 0.0, uniform(0.0, 0.1)};
        const auto f = sys.regularized_field(r);
        auto dK = [&](int k) {
            const double h = 1e-6;
            RegularizedState a = r, b = r;
            double* pa[] = {&a.u, &a.v, &a.pu, &a.pv};
            double* pb[] = {&b.u, &b.v, &b.pu, &b.pv};
            *pa[k] += h;
            *pb[k] -= h;
            return (sys.regularized_energy(a) - sys.regularized_energy(b)) / (2 * h);
        };
        EXPECT_LT(rel_err(f[0], dK(2)), 1e-6);
        EXPECT_LT(rel_err(f[1], dK(3)), 1e-6);
        EXPECT_LT(rel_err(f[2], -dK(0)), 1e-6);
        EXPECT_LT(rel_err(f[3], -dK(1)), 1e-6);
        EXPECT_NEAR(f[4], time_scale(r.u, r.v), 1e-15);
        EXPECT_GE(f[4], 0.0);
    }
}

TEST(VectorField, ReversingReflection)
{
    // R: (x, y, px, py) -> (x, -y, -px, py) preserves H and reverses time.
    const MassRatio mu(0.01);
    const Cr3bp sys(mu);
    auto R = [](RotatingState q) { return RotatingState{q.x, -q.y, -q.px, q.py}; };
    for (int i = 0; i < 100; ++i) {
        const RotatingState q = random_state();
        EXPECT_NEAR(sys.energy(R(q)), sys.energy(q), 1e-13);
        const RotatingState a = sys.vector_field(R(q));
        const RotatingState b = R(sys.vector_field(q));
        EXPECT_NEAR(a.x, -b.x, 1e-13);
        EXPECT_NEAR(a.y, -b.y, 1e-13);
        EXPECT_NEAR(a.px, -b.px, 1e-13);
        EXPECT_NEAR(a.py, -b.py, 1e-13);
    }
    const RotatingState l4 = lagrange_point(mu, LagrangePoint::L4);
    const RotatingState l5 = lagrange_point(mu, LagrangePoint::L5);
    EXPECT_EQ(R(l4).y, l5.y);
    EXPECT_EQ(R(l4).px, l5.px);
}

TEST(Regularization, RoundTrip)
{
    const MassRatio mu(0.01);
    for (int i = 0; i < 200; ++i) {
        const RotatingState q = random_state();
        const RotatingState back = from_regularized(to_regularized(q, 0.02));
        EXPECT_NEAR(back.x, q.x, 1e-12);
        EXPECT_NEAR(back.y, q.y, 1e-12);
        EXPECT_NEAR(back.px, q.px, 1e-12);
        EXPECT_NEAR(back.py, q.py, 1e-12);
    }
}

TEST(Regularization, EnergyRelation)
{
    // K = |sin w|^2 / 4 (H - E).
    const MassRatio mu(0.01);
    const Cr3bp sys(mu);
    for (int i = 0; i < 100; ++i) {
        const RotatingState q = random_state();
        const double E = uniform(0.0, 0.1);
        const RegularizedState r = to_regularized(q, E);
        EXPECT_NEAR(sys.regularized_energy(r), time_scale(r.u, r.v) * (sys.energy(q) - E), 1e-12);
    }
}

TEST(Regularization, BranchPointsRejected)
{
    try {
        to_regularized({0.5, 0.0, 0.0, 0.0}, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BranchPoint);
    }
    EXPECT_THROW(from_regularized({0.0, 0.0, 0.1, 0.1, 0.0, 0.0}), Error);
}

TEST(Regularization, ConjugacyWithDirectIntegration)
{
    const MassRatio mu(0.01);
    const Cr3bp sys(mu);
    for (int trial = 0; trial < 5; ++trial) {
        RotatingState q0 = lagrange_point(mu, LagrangePoint::L4);
        q0.x += uniform(-0.05, 0.05);
        q0.y += uniform(-0.05, 0.05);
        q0.px += uniform(-0.05, 0.05);
        const double E = sys.energy(q0);
        const RegularizedState r0 = to_regularized(q0, E);

        Vec<5> y = r0.phase();
        const double htau = 1e-3;
        for (int k = 0; k < 4000; ++k)
            y = rk4_step(y, [&](const Vec<5>& s) { return sys.regularized_field(s[0], s[1], s[2], s[3], E); },
                         htau);
        const double T = y[4];
        const RotatingState via_reg = from_regularized(RegularizedState::from_phase(y, E));

        Vec<4> z{q0.x, q0.y, q0.px, q0.py};
        const int n = 8000;
        for (int k = 0; k < n; ++k)
            z = rk4_step(z, [&](const Vec<4>& s) {
                const RotatingState d = sys.vector_field({s[0], s[1], s[2], s[3]});
                return Vec<4>{d.x, d.y, d.px, d.py};
            }, T / n);
        EXPECT_NEAR(via_reg.x, z[0], 1e-8);
        EXPECT_NEAR(via_reg.y, z[1], 1e-8);
        EXPECT_NEAR(via_reg.px, z[2], 1e-8);
        EXPECT_NEAR(via_reg.py, z[3], 1e-8);
    }
}
