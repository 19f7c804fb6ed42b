#pragma once

// Poincare section through the heavy primary (z = -1/2) and L4:
//   g(x, y) = sqrt(3) x - y + sqrt(3)/2 = 0.
// On the line, a = 2x + 1 is the arclength from the heavy primary and
// pa = px/2 + sqrt(3)/2 py = Re(p_z)/2 - sqrt(3)/2 Im(p_z) its conjugate
// momentum, so (a, pa) are canonical on the section.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "l4twist/dynamics.hpp"
#include "l4twist/errors.hpp"
#include "l4twist/integrate.hpp"

namespace l4twist {

/// Sign of dg/dt at the crossing.
enum class Direction { Positive, Negative };

inline int sign_of(Direction d) { return d == Direction::Positive ? 1 : -1; }

inline Direction opposite(Direction d)
{
    return d == Direction::Positive ? Direction::Negative : Direction::Positive;
}

struct SectionPoint {
    double a = 0.0;
    double pa = 0.0;
    double E = 0.0;
    Direction direction = Direction::Positive;
    double t_cross = 0.0;
};

inline double section_value(const RotatingState& q) { return kSqrt3 * q.x - q.y + 0.5 * kSqrt3; }

/// g expressed in Thiele coordinates (identical values).
inline double section_value(double u, double v)
{
    return 0.5 * (kSqrt3 * std::cos(u) * std::cosh(v) + std::sin(u) * std::sinh(v) + kSqrt3);
}

/// Coefficient b of the transverse momentum in H, so that dg/dt = 2 (pn + b).
inline double transverse_shift(double x, double y, double mu)
{
    return 0.5 * kSqrt3 * y + 0.5 * (x + 0.5 - mu);
}

/// Tolerance for accepting a cartesian state as lying on the section.
inline constexpr double kOnSectionTolerance = 1e-9;

inline SectionPoint section_project(const RotatingState& q, double E, MassRatio mu)
{
    const double g = section_value(q);
    require(std::abs(g) <= kOnSectionTolerance, ErrorCode::NotOnSection,
            "state is off the section, g = " + std::to_string(g));
    const double pn = 0.5 * kSqrt3 * q.px - 0.5 * q.py;
    const double rate = pn + transverse_shift(q.x, q.y, mu.value());
    SectionPoint p;
    p.a = 2.0 * q.x + 1.0;
    p.pa = 0.5 * q.px + 0.5 * kSqrt3 * q.py;
    p.E = E;
    p.direction = rate >= 0.0 ? Direction::Positive : Direction::Negative;
    return p;
}

/// Full state on the section with H = E, transverse momentum chosen by direction.
inline RotatingState section_lift(const SectionPoint& p, MassRatio mu)
{
    require(std::isfinite(p.a) && std::isfinite(p.pa) && std::isfinite(p.E),
            ErrorCode::InvalidParameter, "non-finite section point");
    require(p.a != 0.0, ErrorCode::BranchPoint, "section point at the heavy primary");
    const double m = mu.value();
    const Cr3bp system(mu);
    const double x = 0.5 * (p.a - 1.0);
    const double y = 0.5 * kSqrt3 * p.a;
    const double X = x + 0.5 - m;
    const double r1 = std::hypot(x + 0.5, y);
    const double r2 = std::hypot(x - 0.5, y);
    require(r2 > 0.0, ErrorCode::BranchPoint, "section point at a primary");
    const double b = transverse_shift(x, y, m);
    const double c = 0.5 * p.pa * p.pa + p.pa * (0.5 * y - 0.5 * kSqrt3 * X) - (1.0 - m) / r1
                     - m / r2 + system.offset();
    double disc = b * b - 2.0 * (c - p.E);
    // A zero transverse momentum (e.g. the equilibrium) may round slightly negative.
    if (disc < 0.0 && disc > -1e-14) disc = 0.0;
    require(disc >= 0.0, ErrorCode::ForbiddenRegion,
            "no real transverse momentum at a = " + std::to_string(p.a)
                + ", pa = " + std::to_string(p.pa));
    const double pn = -b + sign_of(p.direction) * std::sqrt(disc);
    return {x, y, 0.5 * p.pa + 0.5 * kSqrt3 * pn, 0.5 * kSqrt3 * p.pa - 0.5 * pn};
}

struct SectionConfig {
    /// Crossings in this direction define the return map.
    Direction direction = Direction::Negative;
    /// Residual bound on |g| after refinement.
    double crossing_tolerance = 1e-10;
    int max_polish = 3;
    /// Crossings closer than this to a = 0 sit on the chart branch point.
    double branch_exclusion = 1e-6;
    long max_steps_per_return = 200'000;
};

/// Optional sampling of the configuration-space trajectory (x, y, t).
struct TraceSink {
    int stride = 1;
    std::vector<std::array<double, 3>> points;
};

struct ReturnDiagnostics {
    long steps = 0;
    double max_abs_K = 0.0;
    /// Same- and opposite-direction crossings seen, including the final one.
    long crossings_same = 0;
    long crossings_opposite = 0;
};

/// First-return map of the regularized flow to the section.
class PoincareMap {
public:
    PoincareMap(MassRatio mu, IntegratorConfig integrator, SectionConfig section = {})
        : mu_(mu), flow_(Cr3bp(mu), integrator), section_(section)
    {
        require(section_.crossing_tolerance > 0.0 && section_.max_polish >= 0
                    && section_.max_steps_per_return > 0,
                ErrorCode::InvalidParameter, "invalid section configuration");
    }

    MassRatio mass_ratio() const { return mu_; }
    const RegularizedFlow& flow() const noexcept { return flow_; }
    const SectionConfig& config() const noexcept { return section_; }
    Direction direction() const noexcept { return section_.direction; }

    SectionPoint with_direction(SectionPoint p) const
    {
        p.direction = section_.direction;
        return p;
    }

    /// Regularized state for a section point in the map direction.
    Vec<5> lift(const SectionPoint& p) const
    {
        SectionPoint q = with_direction(p);
        RegularizedState r = to_regularized(section_lift(q, mu_), q.E);
        r.t = q.t_cross;
        return r.phase();
    }

    SectionPoint project(const Vec<5>& y, double E) const
    {
        const RotatingState q = from_regularized(RegularizedState::from_phase(y, E));
        SectionPoint p = section_project(q, E, mu_);
        p.t_cross = y[4];
        return p;
    }

    /// Advances y to the next crossing in the map direction.
    void advance(Vec<5>& y, double E, ReturnDiagnostics& diag, TraceSink* trace = nullptr) const
    {
        const int want = sign_of(section_.direction);
        int prev_sign = want;
        long steps = 0;
        if (trace) trace_point(y, E, *trace);
        while (true) {
            if (steps >= section_.max_steps_per_return)
                fail(ErrorCode::MaxStepsExceeded, "no return to the section within "
                                                      + std::to_string(steps) + " steps");
            const Vec<5> prev = y;
            y = flow_.step(y, E);
            ++steps;
            ++diag.steps;
            if (diag.steps % flow_.config().drift_check_interval == 0)
                flow_.check_drift(y, E, diag.max_abs_K);
            if (trace && steps % trace->stride == 0) trace_point(y, E, *trace);
            const double g = section_value(y[0], y[1]);
            const int cur_sign = g >= 0.0 ? 1 : -1;
            if (cur_sign == prev_sign) continue;
            prev_sign = cur_sign;
            if (cur_sign != want) {
                ++diag.crossings_opposite;
                continue;
            }
            y = refine_crossing(prev, E);
            ++diag.crossings_same;
            flow_.check_drift(y, E, diag.max_abs_K);
            if (trace) trace_point(y, E, *trace);
            const double a = 2.0 * (0.5 * std::cos(y[0]) * std::cosh(y[1])) + 1.0;
            require(std::abs(a) > section_.branch_exclusion, ErrorCode::BranchPoint,
                    "crossing at the heavy primary is unreliable");
            return;
        }
    }

    /// P(p). The equilibrium image is returned unchanged.
    SectionPoint operator()(const SectionPoint& p, ReturnDiagnostics* diag = nullptr) const
    {
        ReturnDiagnostics local;
        ReturnDiagnostics& d = diag ? *diag : local;
        Vec<5> y = lift(p);
        if (is_equilibrium(y, p.E)) return with_direction(p);
        advance(y, p.E, d);
        return project(y, p.E);
    }

    /// Orbit of p under the map: n successive crossings (p itself excluded).
    std::vector<SectionPoint> iterate(const SectionPoint& p, std::size_t n,
                                      ReturnDiagnostics* diag = nullptr,
                                      TraceSink* trace = nullptr) const
    {
        ReturnDiagnostics local;
        ReturnDiagnostics& d = diag ? *diag : local;
        std::vector<SectionPoint> out;
        out.reserve(n);
        Vec<5> y = lift(p);
        if (is_equilibrium(y, p.E)) {
            out.assign(n, with_direction(p));
            return out;
        }
        for (std::size_t k = 0; k < n; ++k) {
            advance(y, p.E, d, trace);
            out.push_back(project(y, p.E));
        }
        return out;
    }

private:
    bool is_equilibrium(const Vec<5>& y, double E) const
    {
        const Vec<5> f = flow_.field(y, E);
        return std::abs(f[0]) + std::abs(f[1]) + std::abs(f[2]) + std::abs(f[3]) < 1e-13;
    }

    double rate(const Vec<5>& y, const Vec<5>& f) const
    {
        const double cu = std::cos(y[0]), su = std::sin(y[0]);
        const double chv = std::cosh(y[1]), shv = std::sinh(y[1]);
        const double gu = 0.5 * (-kSqrt3 * su * chv + cu * shv);
        const double gv = 0.5 * (kSqrt3 * cu * shv + su * chv);
        return gu * f[0] + gv * f[1];
    }

    /// One Runge-Kutta step with g as the independent variable from the last
    /// state before the crossing, then Newton polish in fictitious time.
    Vec<5> refine_crossing(const Vec<5>& before, double E) const
    {
        auto swapped = [&](const Vec<5>& s) {
            const Vec<5> f = flow_.field(s, E);
            const double gdot = rate(s, f);
            if (gdot == 0.0) fail(ErrorCode::StepFailure, "tangential crossing");
            Vec<5> r;
            for (std::size_t i = 0; i < 5; ++i) r[i] = f[i] / gdot;
            return r;
        };
        Vec<5> y = rk4_step(before, swapped, -section_value(before[0], before[1]));
        for (int it = 0; it < section_.max_polish; ++it) {
            const double g = section_value(y[0], y[1]);
            if (std::abs(g) < 1e-14) break;
            const double gdot = rate(y, flow_.field(y, E));
            y = flow_.step(y, E, -g / gdot);
        }
        const double g = section_value(y[0], y[1]);
        require(std::abs(g) < section_.crossing_tolerance, ErrorCode::StepFailure,
                "crossing residual " + std::to_string(g) + " above tolerance");
        return y;
    }

    void trace_point(const Vec<5>& y, double E, TraceSink& trace) const
    {
        (void)E;
        const double x = 0.5 * std::cos(y[0]) * std::cosh(y[1]);
        const double yy = -0.5 * std::sin(y[0]) * std::sinh(y[1]);
        trace.points.push_back({x, yy, y[4]});
    }

    MassRatio mu_;
    RegularizedFlow flow_;
    SectionConfig section_;
};

inline SectionPoint poincare_return(const SectionPoint& p, MassRatio mu,
                                    const IntegratorConfig& config, SectionConfig section = {})
{
    section.direction = p.direction;
    return PoincareMap(mu, config, section)(p);
}

} // namespace l4twist
