#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>

#include "l4twist/dynamics.hpp"
#include "l4twist/errors.hpp"

namespace l4twist {

template <std::size_t N>
using Vec = std::array<double, N>;

template <std::size_t N>
inline Vec<N> axpy(const Vec<N>& y, double a, const Vec<N>& x)
{
    Vec<N> r;
    for (std::size_t i = 0; i < N; ++i) r[i] = y[i] + a * x[i];
    return r;
}

template <std::size_t N>
inline bool all_finite(const Vec<N>& y)
{
    return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

/// Classical four-stage Runge-Kutta step for an autonomous field.
template <std::size_t N, class Field>
Vec<N> rk4_step(const Vec<N>& y, Field&& field, double h)
{
    const Vec<N> k1 = field(y);
    const Vec<N> k2 = field(axpy(y, 0.5 * h, k1));
    const Vec<N> k3 = field(axpy(y, 0.5 * h, k2));
    const Vec<N> k4 = field(axpy(y, h, k3));
    if (!all_finite(k1) || !all_finite(k2) || !all_finite(k3) || !all_finite(k4))
        fail(ErrorCode::StepFailure, "non-finite Runge-Kutta stage");
    Vec<N> out;
    for (std::size_t i = 0; i < N; ++i)
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

/// Max-norm difference between one step of size h and two of size h/2.
template <std::size_t N, class Field>
double step_doubling_error(const Vec<N>& y, Field&& field, double h)
{
    const Vec<N> full = rk4_step(y, field, h);
    const Vec<N> half = rk4_step(rk4_step(y, field, 0.5 * h), field, 0.5 * h);
    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) err = std::max(err, std::abs(full[i] - half[i]));
    return err;
}

struct IntegratorConfig {
    /// Fictitious-time step.
    double step = 1e-2;
    long max_steps = 20'000'000;
    /// Largest tolerated |K| along a trajectory.
    double drift_tolerance = 1e-9;
    /// |K| is sampled every this many steps (1 = every step).
    int drift_check_interval = 8;
    /// Step-doubling local error estimate every this many steps; 0 disables it.
    int monitor_interval = 0;

    void validate() const
    {
        require(step > 0.0 && std::isfinite(step), ErrorCode::InvalidParameter,
                "integrator step must be positive");
        require(max_steps > 0, ErrorCode::InvalidParameter, "max_steps must be positive");
        require(drift_tolerance > 0.0, ErrorCode::InvalidParameter,
                "drift tolerance must be positive");
        require(drift_check_interval > 0, ErrorCode::InvalidParameter,
                "drift check interval must be positive");
        require(monitor_interval >= 0, ErrorCode::InvalidParameter,
                "monitor interval must be non-negative");
    }
};

/// Step resolving the shortest linear period 2 pi / omega_s with the given
/// number of steps (dt/dtau = 1 at L4). 1280 steps keep |K| below 1e-9 over
/// 1e4 crossings of the island.
inline IntegratorConfig default_integrator_config(MassRatio mu, int steps_per_period = 1280)
{
    require(steps_per_period >= 200, ErrorCode::InvalidParameter,
            "at least 200 steps per short period are required");
    IntegratorConfig cfg;
    cfg.step = 2.0 * std::numbers::pi / frequencies(mu).omega_s / steps_per_period;
    return cfg;
}

/// Cheaper setting for profiles and parameter searches: half the steps and a
/// drift bound that still holds on the outer island curves.
inline IntegratorConfig survey_integrator_config(MassRatio mu)
{
    IntegratorConfig cfg = default_integrator_config(mu, 640);
    cfg.drift_tolerance = 1e-7;
    return cfg;
}

struct PropagationResult {
    RegularizedState state;
    long steps = 0;
    double max_abs_K = 0.0;
    double max_local_error = 0.0;
};

/// Fixed-step integrator for the regularized flow with |K| monitoring.
class RegularizedFlow {
public:
    RegularizedFlow(const Cr3bp& system, IntegratorConfig config)
        : system_(system), config_(config)
    {
        config_.validate();
    }

    const Cr3bp& system() const noexcept { return system_; }
    const IntegratorConfig& config() const noexcept { return config_; }

    Vec<5> field(const Vec<5>& y, double E) const
    {
        return system_.regularized_field(y[0], y[1], y[2], y[3], E);
    }

    Vec<5> step(const Vec<5>& y, double E, double h) const
    {
        return rk4_step(y, [&](const Vec<5>& s) { return field(s, E); }, h);
    }

    Vec<5> step(const Vec<5>& y, double E) const { return step(y, E, config_.step); }

    double K(const Vec<5>& y, double E) const
    {
        return system_.regularized_energy(RegularizedState::from_phase(y, E));
    }

    /// Updates the running |K| maximum; aborts when it exceeds the tolerance.
    void check_drift(const Vec<5>& y, double E, double& max_abs_K) const
    {
        const double k = std::abs(K(y, E));
        max_abs_K = std::max(max_abs_K, k);
        if (!(k <= config_.drift_tolerance))
            fail(ErrorCode::DriftExceeded,
                 "|K| = " + std::to_string(k) + " exceeds drift tolerance");
    }

private:
    Cr3bp system_;
    IntegratorConfig config_;
};

/// Integrates until stop(state) holds, checking the stop predicate before each
/// step. Throws MaxStepsExceeded or DriftExceeded.
template <class Stop>
PropagationResult propagate(const RegularizedState& start, const Cr3bp& system,
                            const IntegratorConfig& config, Stop&& stop)
{
    const RegularizedFlow flow(system, config);
    PropagationResult result;
    result.state = start;
    Vec<5> y = start.phase();
    const double E = start.E;
    flow.check_drift(y, E, result.max_abs_K);
    while (!stop(RegularizedState::from_phase(y, E))) {
        if (result.steps >= config.max_steps)
            fail(ErrorCode::MaxStepsExceeded,
                 "stop condition not met within " + std::to_string(config.max_steps) + " steps");
        if (config.monitor_interval > 0 && result.steps % config.monitor_interval == 0) {
            result.max_local_error = std::max(
                result.max_local_error,
                step_doubling_error(y, [&](const Vec<5>& s) { return flow.field(s, E); },
                                    config.step));
        }
        y = flow.step(y, E);
        ++result.steps;
        if (result.steps % config.drift_check_interval == 0) flow.check_drift(y, E, result.max_abs_K);
    }
    flow.check_drift(y, E, result.max_abs_K);
    result.state = RegularizedState::from_phase(y, E);
    return result;
}

} // namespace l4twist
