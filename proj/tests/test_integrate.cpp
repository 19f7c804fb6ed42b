#include <cmath>

#include <gtest/gtest.h>

#include "l4twist/integrate.hpp"
#include "l4twist/rotation.hpp"
#include "l4twist/section.hpp"

using namespace l4twist;

TEST(Rk4, FourthOrderOnHarmonicOscillator)
{
    auto field = [](const Vec<2>& s) { return Vec<2>{s[1], -s[0]}; };
    auto error_with = [&](int n) {
        Vec<2> y{1.0, 0.0};
        const double h = 1.0 / n;
        for (int k = 0; k < n; ++k) y = rk4_step(y, field, h);
        return std::hypot(y[0] - std::cos(1.0), y[1] + std::sin(1.0));
    };
    const double e1 = error_with(20), e2 = error_with(40);
    EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.1);
    EXPECT_LT(error_with(1000), 1e-13);
}

TEST(Rk4, NonFiniteStageFails)
{
    auto field = [](const Vec<1>& s) { return Vec<1>{1.0 / (s[0] - 1.0)}; };
    try {
        rk4_step(Vec<1>{1.0}, field, 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StepFailure);
    }
}

TEST(Rk4, StepDoublingDetectsLargeSteps)
{
    auto field = [](const Vec<2>& s) { return Vec<2>{s[1], -s[0]}; };
    EXPECT_GT(step_doubling_error(Vec<2>{1.0, 0.0}, field, 0.5),
              step_doubling_error(Vec<2>{1.0, 0.0}, field, 0.05) * 1000);
}

namespace {

RegularizedState island_start(double mu, double E, double offset)
{
    const MassRatio m(mu);
    const PoincareMap map(m, default_integrator_config(m));
    SectionPoint p = find_fixed_point(map, E).point;
    p.pa += offset;
    RegularizedState r = to_regularized(section_lift(map.with_direction(p), m), E);
    return r;
}

} // namespace

TEST(Flow, TimeReversal)
{
    const MassRatio mu(0.01);
    const Cr3bp sys(mu);
    const auto cfg = default_integrator_config(mu);
    const RegularizedFlow flow(sys, cfg);
    const RegularizedState r0 = island_start(0.01, 0.02, 0.02);
    Vec<5> y = r0.phase();
    const int n = 20000;
    for (int k = 0; k < n; ++k) y = flow.step(y, r0.E, cfg.step);
    for (int k = 0; k < n; ++k) y = flow.step(y, r0.E, -cfg.step);
    // RK4 is not symmetric: the return carries the global truncation error.
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(y[i], r0.phase()[i], 1e-8);
}

TEST(Flow, PhysicalTimeIncreases)
{
    const MassRatio mu(0.01);
    const Cr3bp sys(mu);
    const auto cfg = default_integrator_config(mu);
    const RegularizedFlow flow(sys, cfg);
    const RegularizedState r0 = island_start(0.01, 0.02, 0.03);
    Vec<5> y = r0.phase();
    for (int k = 0; k < 20000; ++k) {
        const Vec<5> next = flow.step(y, r0.E);
        ASSERT_GT(next[4], y[4]);
        y = next;
    }
}

TEST(Flow, EnergyDriftBelowDefaultTolerance)
{
    const MassRatio mu(0.01);
    const Cr3bp sys(mu);
    const auto cfg = default_integrator_config(mu);
    const RegularizedState r0 = island_start(0.01, 0.02, 0.04);
    EXPECT_LT(std::abs(sys.regularized_energy(r0)), 1e-14);
    long steps = 0;
    const auto res = propagate(r0, sys, cfg, [&](const RegularizedState&) { return steps++ >= 200000; });
    EXPECT_LT(res.max_abs_K, 1e-9);
    EXPECT_EQ(res.steps, 200000);
}

TEST(Flow, DriftAbortsLoudly)
{
    const MassRatio mu(0.01);
    const Cr3bp sys(mu);
    auto cfg = default_integrator_config(mu, 200);
    cfg.drift_tolerance = 1e-14;
    const RegularizedState r0 = island_start(0.01, 0.02, 0.05);
    long steps = 0;
    try {
        propagate(r0, sys, cfg, [&](const RegularizedState&) { return steps++ >= 100000; });
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DriftExceeded);
    }
}

TEST(Flow, MaxStepsExceeded)
{
    const MassRatio mu(0.01);
    const Cr3bp sys(mu);
    auto cfg = default_integrator_config(mu);
    cfg.max_steps = 100;
    const RegularizedState r0 = island_start(0.01, 0.02, 0.01);
    try {
        propagate(r0, sys, cfg, [](const RegularizedState&) { return false; });
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MaxStepsExceeded);
    }
}

TEST(Flow, ConfigValidation)
{
    IntegratorConfig cfg;
    cfg.step = -1.0;
    EXPECT_THROW(cfg.validate(), Error);
    EXPECT_THROW(default_integrator_config(MassRatio(0.01), 50), Error);
    const auto s = survey_integrator_config(MassRatio(0.01));
    const auto d = default_integrator_config(MassRatio(0.01));
    EXPECT_NEAR(s.step, 2.0 * d.step, 1e-15);
}
