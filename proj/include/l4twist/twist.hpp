#pragma once

// Action-space geometry of the normal form: the twistless curve C = 0,
// action-action charts, reconnection loci and the critical mass ratio.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "l4twist/dynamics.hpp"
#include "l4twist/errors.hpp"
#include "l4twist/normalform.hpp"
#include "l4twist/rotation.hpp"

namespace l4twist {

struct Rational {
    int p = 0;
    int q = 1;

    double value() const { return static_cast<double>(p) / q; }
    std::string str() const { return std::to_string(p) + "/" + std::to_string(q); }
    friend bool operator==(const Rational&, const Rational&) = default;
};

inline Rational parse_rational(std::string_view s)
{
    const auto slash = s.find('/');
    require(slash != std::string_view::npos, ErrorCode::InvalidParameter,
            "rational must be written p/q, got '" + std::string(s) + "'");
    Rational r;
    const auto a = std::from_chars(s.data(), s.data() + slash, r.p);
    const auto b = std::from_chars(s.data() + slash + 1, s.data() + s.size(), r.q);
    require(a.ec == std::errc{} && a.ptr == s.data() + slash && b.ec == std::errc{}
                && b.ptr == s.data() + s.size() && r.q > 0 && r.p > 0 && r.p < r.q,
            ErrorCode::InvalidParameter, "invalid rotation number '" + std::string(s) + "'");
    require(std::gcd(r.p, r.q) == 1, ErrorCode::InvalidParameter,
            "rational " + std::string(s) + " is not in lowest terms");
    return r;
}

/// Interior Farey-tree rationals between lo and hi down to the given depth,
/// sorted by value (depth 1 is the mediant alone).
inline std::vector<Rational> farey_between(Rational lo, Rational hi, int depth)
{
    require(depth >= 0 && depth <= 16, ErrorCode::InvalidParameter, "Farey depth out of range");
    require(lo.value() < hi.value(), ErrorCode::InvalidParameter, "empty Farey interval");
    std::vector<Rational> row{lo, hi};
    for (int d = 0; d < depth; ++d) {
        std::vector<Rational> next{row.front()};
        for (std::size_t i = 0; i + 1 < row.size(); ++i) {
            next.push_back({row[i].p + row[i + 1].p, row[i].q + row[i + 1].q});
            next.push_back(row[i + 1]);
        }
        row = std::move(next);
    }
    return {row.begin() + 1, row.end() - 1};
}

struct ActionPoint {
    double Is = 0.0;
    double Il = 0.0;
};

namespace detail {

/// All partial derivatives of H up to order 3 at one point.
struct Jet {
    double h10, h01, h20, h11, h02, h30, h21, h12, h03;

    Jet(const NormalForm& nf, double Is, double Il)
        : h10(nf.derivative(Is, Il, 1, 0)), h01(nf.derivative(Is, Il, 0, 1)),
          h20(nf.derivative(Is, Il, 2, 0)), h11(nf.derivative(Is, Il, 1, 1)),
          h02(nf.derivative(Is, Il, 0, 2)), h30(nf.derivative(Is, Il, 3, 0)),
          h21(nf.derivative(Is, Il, 2, 1)), h12(nf.derivative(Is, Il, 1, 2)),
          h03(nf.derivative(Is, Il, 0, 3))
    {
    }

    double C() const { return h20 * h01 * h01 + h02 * h10 * h10 - 2.0 * h11 * h10 * h01; }

    std::array<double, 2> grad_C() const
    {
        return {h30 * h01 * h01 + 2.0 * h20 * h01 * h11 + h12 * h10 * h10 + 2.0 * h02 * h10 * h20
                    - 2.0 * (h21 * h10 * h01 + h11 * h20 * h01 + h11 * h10 * h11),
                h21 * h01 * h01 + 2.0 * h20 * h01 * h02 + h03 * h10 * h10 + 2.0 * h02 * h10 * h11
                    - 2.0 * (h12 * h10 * h01 + h11 * h11 * h01 + h11 * h10 * h02)};
    }

    double W() const { return -h01 / h10; }

    std::array<double, 2> grad_W() const
    {
        const double d = h10 * h10;
        return {-(h11 * h10 - h01 * h20) / d, -(h02 * h10 - h01 * h11) / d};
    }
};

inline bool solve2(const std::array<double, 4>& m, const std::array<double, 2>& r,
                   std::array<double, 2>& x)
{
    const double det = m[0] * m[3] - m[1] * m[2];
    if (det == 0.0 || !std::isfinite(det)) return false;
    x = {(r[0] * m[3] - m[1] * r[1]) / det, (m[0] * r[1] - m[2] * r[0]) / det};
    return true;
}

} // namespace detail

inline std::array<double, 2> twist_gradient(const NormalForm& nf, double Is, double Il)
{
    return detail::Jet(nf, Is, Il).grad_C();
}

/// |H1 W2 - H2 W1| / (|grad H| |grad W|), zero where the level sets of H and
/// W are tangent.
inline double tangency_defect(const NormalForm& nf, double Is, double Il)
{
    const detail::Jet j(nf, Is, Il);
    const auto gw = j.grad_W();
    const double cross = j.h10 * gw[1] - j.h01 * gw[0];
    const double norm = std::hypot(j.h10, j.h01) * std::hypot(gw[0], gw[1]);
    return norm > 0.0 ? std::abs(cross) / norm : 0.0;
}

/// Box [0, Is_max] x [0, Il_max] in which the truncated form is trusted.
struct ActionCap {
    double Is_max = 0.0;
    double Il_max = 0.0;

    bool contains(double Is, double Il) const
    {
        return Is >= 0.0 && Il >= 0.0 && Is <= Is_max && Il <= Il_max;
    }
};

/// Is_max from H(Is, 0) = E_cap (the short-period energy cap), Il_max equal.
inline ActionCap default_action_cap(const NormalForm& nf, double E_cap = 0.12)
{
    double s = 0.0;
    try {
        s = short_period_action(nf, E_cap);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoPositiveRoot) throw;
        // H(Is, 0) turns over below E_cap: stop at its maximum.
        double lo = 0.0, hi = E_cap / nf.omega_s;
        while (nf.derivative(hi, 0.0, 1, 0) > 0.0) hi *= 2.0;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            (nf.derivative(mid, 0.0, 1, 0) > 0.0 ? lo : hi) = mid;
        }
        s = lo;
    }
    return {s, s};
}

struct TwistVertex {
    double Is = 0.0;
    double Il = 0.0;
    double W = 0.0;
    double H = 0.0;
    double C = 0.0;
};

using TwistBranch = std::vector<TwistVertex>;

struct TwistCurve {
    double mu = 0.0;
    ActionCap cap;
    std::vector<TwistBranch> branches;

    std::size_t size() const
    {
        std::size_t n = 0;
        for (const auto& b : branches) n += b.size();
        return n;
    }
};

struct TwistlessOptions {
    /// Rays from the origin scanned for sign changes of C.
    int rays = 64;
    int ray_samples = 200;
    /// Continuation step as a fraction of the cap diagonal.
    double step_fraction = 2e-3;
    std::size_t max_vertices = 20000;
    double tolerance = 1e-12;
};

namespace detail {

inline TwistVertex twist_vertex(const NormalForm& nf, double Is, double Il)
{
    const Jet j(nf, Is, Il);
    return {Is, Il, j.W(), nf.H(Is, Il), j.C()};
}

/// Newton projection onto C = 0 within the hyperplane through `guess`
/// orthogonal to `tangent`.
inline std::optional<ActionPoint> correct_on_twist(const NormalForm& nf, ActionPoint guess,
                                                   std::array<double, 2> tangent, double tol)
{
    ActionPoint x = guess;
    for (int it = 0; it < 30; ++it) {
        const Jet j(nf, x.Is, x.Il);
        const double c = j.C();
        const auto g = j.grad_C();
        const double r2 = (x.Is - guess.Is) * tangent[0] + (x.Il - guess.Il) * tangent[1];
        std::array<double, 2> d;
        if (!solve2({g[0], g[1], tangent[0], tangent[1]}, {-c, -r2}, d)) return std::nullopt;
        x.Is += d[0];
        x.Il += d[1];
        if (!std::isfinite(x.Is) || !std::isfinite(x.Il)) return std::nullopt;
        if (std::hypot(d[0], d[1]) < 1e-15 && std::abs(c) < tol) return x;
        if (std::abs(Jet(nf, x.Is, x.Il).C()) < tol && std::hypot(d[0], d[1]) < 1e-13) return x;
    }
    if (std::abs(Jet(nf, x.Is, x.Il).C()) < tol) return x;
    return std::nullopt;
}

inline std::array<double, 2> twist_tangent(const NormalForm& nf, const ActionPoint& x)
{
    const auto g = Jet(nf, x.Is, x.Il).grad_C();
    const double n = std::hypot(g[0], g[1]);
    return {-g[1] / n, g[0] / n};
}

/// Last point on the segment a -> b (a inside, b outside) inside the cap,
/// projected back onto C = 0.
inline std::optional<ActionPoint> boundary_point(const NormalForm& nf, const ActionCap& cap,
                                                 ActionPoint a, ActionPoint b, double tol)
{
    double t = 1.0;
    auto clip = [](double v, double lo, double hi, double dv, double& tt) {
        if (dv > 0.0 && v + dv > hi) tt = std::min(tt, (hi - v) / dv);
        if (dv < 0.0 && v + dv < lo) tt = std::min(tt, (lo - v) / dv);
    };
    clip(a.Is, 0.0, cap.Is_max, b.Is - a.Is, t);
    clip(a.Il, 0.0, cap.Il_max, b.Il - a.Il, t);
    ActionPoint p{a.Is + t * (b.Is - a.Is), a.Il + t * (b.Il - a.Il)};
    // slide along the boundary edge to C = 0
    const bool on_Is_edge = std::abs(p.Is) < 1e-14 || std::abs(p.Is - cap.Is_max) < 1e-14 * cap.Is_max;
    for (int it = 0; it < 40; ++it) {
        const Jet j(nf, p.Is, p.Il);
        const auto g = j.grad_C();
        const double d = on_Is_edge ? g[1] : g[0];
        if (d == 0.0) break;
        const double step = -j.C() / d;
        if (on_Is_edge)
            p.Il = std::clamp(p.Il + step, 0.0, cap.Il_max);
        else
            p.Is = std::clamp(p.Is + step, 0.0, cap.Is_max);
        if (std::abs(step) < 1e-16) break;
    }
    if (std::abs(Jet(nf, p.Is, p.Il).C()) < tol) return p;
    return std::nullopt;
}

inline double distance_to_branch(const TwistBranch& b, const ActionPoint& p)
{
    double d = INFINITY;
    for (const auto& v : b) d = std::min(d, std::hypot(v.Is - p.Is, v.Il - p.Il));
    return d;
}

/// Follows C = 0 from a seed in one direction until the cap boundary,
/// closure or the vertex budget.
inline TwistBranch trace_direction(const NormalForm& nf, const ActionCap& cap, ActionPoint seed,
                                   double sign, double h, const TwistlessOptions& opts,
                                   bool& closed)
{
    TwistBranch out;
    ActionPoint x = seed;
    auto t = twist_tangent(nf, x);
    t = {sign * t[0], sign * t[1]};
    double step = h;
    closed = false;
    while (out.size() < opts.max_vertices) {
        const ActionPoint pred{x.Is + step * t[0], x.Il + step * t[1]};
        const auto corr = correct_on_twist(nf, pred, t, opts.tolerance);
        if (!corr || std::hypot(corr->Is - x.Is, corr->Il - x.Il) > 2.0 * step) {
            step *= 0.5;
            if (step < 1e-6 * h) break;
            continue;
        }
        if (!cap.contains(corr->Is, corr->Il)) {
            if (auto b = boundary_point(nf, cap, x, *corr, opts.tolerance))
                out.push_back(twist_vertex(nf, b->Is, b->Il));
            break;
        }
        auto tn = twist_tangent(nf, *corr);
        if (tn[0] * t[0] + tn[1] * t[1] < 0.0) tn = {-tn[0], -tn[1]};
        x = *corr;
        t = tn;
        out.push_back(twist_vertex(nf, x.Is, x.Il));
        step = std::min(h, step * 1.5);
        if (out.size() > 10 && std::hypot(x.Is - seed.Is, x.Il - seed.Il) < 0.75 * h) {
            closed = true;
            break;
        }
    }
    return out;
}

} // namespace detail

/// C = 0 inside the cap, traced by pseudo-arclength continuation from seeds
/// found by sign scanning along rays from the origin.
inline TwistCurve twistless_curve(const NormalForm& nf, const ActionCap& cap,
                                  const TwistlessOptions& opts = {})
{
    require(cap.Is_max > 0.0 && cap.Il_max > 0.0, ErrorCode::InvalidParameter,
            "action cap must be positive");
    require(opts.rays >= 2 && opts.ray_samples >= 2 && opts.step_fraction > 0.0,
            ErrorCode::InvalidParameter, "invalid twistless-curve options");
    TwistCurve curve;
    curve.mu = nf.mu;
    curve.cap = cap;
    const double h = opts.step_fraction * std::hypot(cap.Is_max, cap.Il_max);

    std::vector<ActionPoint> seeds;
    auto C = [&](double s, double l) { return detail::Jet(nf, s, l).C(); };
    for (int r = 0; r < opts.rays; ++r) {
        const double theta = 0.5 * std::numbers::pi * r / (opts.rays - 1);
        // ray from the origin to the cap boundary
        const double c = std::cos(theta), s = std::sin(theta);
        const double len = std::min(c > 1e-15 ? cap.Is_max / c : INFINITY,
                                    s > 1e-15 ? cap.Il_max / s : INFINITY);
        double prev_t = 0.0;
        double prev = C(0.0, 0.0);
        for (int k = 1; k <= opts.ray_samples; ++k) {
            const double t = len * k / opts.ray_samples;
            const double cur = C(t * c, t * s);
            if ((prev < 0.0) != (cur < 0.0)) {
                double lo = prev_t, hi = t;
                for (int it = 0; it < 80; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    ((C(mid * c, mid * s) < 0.0) == (prev < 0.0) ? lo : hi) = mid;
                }
                seeds.push_back({0.5 * (lo + hi) * c, 0.5 * (lo + hi) * s});
            }
            prev = cur;
            prev_t = t;
        }
    }

    for (const ActionPoint& seed0 : seeds) {
        bool known = false;
        for (const auto& b : curve.branches)
            if (detail::distance_to_branch(b, seed0) < 3.0 * h) known = true;
        if (known) continue;
        const auto seed = detail::correct_on_twist(nf, seed0, detail::twist_tangent(nf, seed0),
                                                   opts.tolerance);
        if (!seed || !cap.contains(seed->Is, seed->Il)) continue;
        bool closed = false;
        TwistBranch fwd = detail::trace_direction(nf, cap, *seed, 1.0, h, opts, closed);
        TwistBranch branch;
        if (!closed) {
            bool unused = false;
            TwistBranch bwd = detail::trace_direction(nf, cap, *seed, -1.0, h, opts, unused);
            branch.assign(bwd.rbegin(), bwd.rend());
        }
        branch.push_back(detail::twist_vertex(nf, seed->Is, seed->Il));
        branch.insert(branch.end(), fwd.begin(), fwd.end());
        curve.branches.push_back(std::move(branch));
    }
    if (curve.branches.empty())
        fail(ErrorCode::NoTwistlessCurve,
             "C has no zero inside the action cap at mu = " + std::to_string(nf.mu));
    return curve;
}

inline TwistCurve twistless_curve(const NormalForm& nf, const TwistlessOptions& opts = {})
{
    return twistless_curve(nf, default_action_cap(nf), opts);
}

/// Actions on the energy line H = E as a function of Il: Is solves
/// H(Is, Il) = E on the short-period branch.
inline double energy_line_Is(const NormalForm& nf, double E, double Il)
{
    require_actions(0.0, Il);
    double s = short_period_action(nf, E);
    for (int it = 0; it < 60; ++it) {
        const double f = nf.H(s, Il) - E;
        const double d = nf.derivative(s, Il, 1, 0);
        require(d > 0.0, ErrorCode::NoPositiveRoot, "energy line leaves the short-period branch");
        const double ds = f / d;
        s -= ds;
        if (std::abs(ds) < 1e-16 * std::max(1.0, std::abs(s))) break;
    }
    require(s >= 0.0 && std::abs(nf.H(s, Il) - E) < 1e-12, ErrorCode::NoPositiveRoot,
            "no action on the energy line at Il = " + std::to_string(Il));
    return s;
}

/// Normal-form rotation number of the torus with long-period action Il on
/// the energy surface H = E.
inline double nf_W_on_energy(const NormalForm& nf, double E, double Il)
{
    return nf_rotation_number(nf, energy_line_Is(nf, E, Il), Il);
}

/// Points of the twistless curve on the energy line H = E.
inline std::vector<ActionPoint> twistless_energy_crossings(const NormalForm& nf,
                                                           const TwistCurve& curve, double E)
{
    std::vector<ActionPoint> out;
    for (const auto& b : curve.branches) {
        for (std::size_t i = 0; i + 1 < b.size(); ++i) {
            const double f0 = b[i].H - E, f1 = b[i + 1].H - E;
            if ((f0 < 0.0) == (f1 < 0.0)) continue;
            const double t = f0 / (f0 - f1);
            ActionPoint x{b[i].Is + t * (b[i + 1].Is - b[i].Is), b[i].Il + t * (b[i + 1].Il - b[i].Il)};
            for (int it = 0; it < 30; ++it) {
                const detail::Jet j(nf, x.Is, x.Il);
                std::array<double, 2> d;
                if (!detail::solve2({j.grad_C()[0], j.grad_C()[1], j.h10, j.h01},
                                    {-j.C(), -(nf.H(x.Is, x.Il) - E)}, d))
                    break;
                x.Is += d[0];
                x.Il += d[1];
                if (std::hypot(d[0], d[1]) < 1e-16) break;
            }
            if (curve.cap.contains(x.Is, x.Il)) out.push_back(x);
        }
    }
    std::sort(out.begin(), out.end(), [](const ActionPoint& a, const ActionPoint& b) { return a.Il < b.Il; });
    return out;
}

/// Distance from the origin to the nearest vertex of the curve.
inline double twistless_distance_to_origin(const TwistCurve& curve)
{
    double d = INFINITY;
    for (const auto& b : curve.branches)
        for (const auto& v : b) d = std::min(d, std::hypot(v.Is, v.Il));
    return d;
}

/// True when some branch lies entirely within `radius` of the origin.
inline bool has_near_origin_branch(const TwistCurve& curve, double radius = 5e-3)
{
    for (const auto& b : curve.branches) {
        if (b.empty()) continue;
        bool inside = true;
        for (const auto& v : b) inside = inside && std::hypot(v.Is, v.Il) <= radius;
        if (inside) return true;
    }
    return false;
}

/// Twistless crossings of H = E whose rotation number lies in [lo, hi].
inline std::vector<ActionPoint> twistless_energy_crossings(const NormalForm& nf, const TwistCurve& curve,
                                                           double E, Rational lo, Rational hi)
{
    std::vector<ActionPoint> out;
    for (const auto& x : twistless_energy_crossings(nf, curve, E)) {
        const double w = nf_rotation_number(nf, x.Is, x.Il);
        if (w >= lo.value() && w <= hi.value()) out.push_back(x);
    }
    return out;
}

/// Root of C(0, 0; mu) in (mu4, mu3): grid scan for a sign change, then
/// bisection to tol.
inline double critical_mass_ratio(int degree = 8, double tol = 1e-7)
{
    require(tol > 0.0, ErrorCode::InvalidParameter, "tolerance must be positive");
    const double lo = mass_ratio_for_resonance(4.0).value();
    const double hi = mass_ratio_for_resonance(3.0).value();
    auto C0 = [&](double m) { return nf_twist(normal_form(MassRatio(m), degree), 0.0, 0.0); };
    constexpr int n = 24;
    bool have_prev = false;
    double prev_m = 0.0, prev_c = 0.0;
    for (int k = 1; k < n; ++k) {
        const double m = lo + (hi - lo) * k / n;
        double c = 0.0;
        try {
            c = C0(m);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ResonanceTooClose) throw;
            have_prev = false;
            continue;
        }
        if (have_prev && (prev_c < 0.0) != (c < 0.0)) {
            double a = prev_m, b = m;
            const bool neg_left = prev_c < 0.0;
            while (b - a > tol) {
                const double mid = 0.5 * (a + b);
                ((C0(mid) < 0.0) == neg_left ? a : b) = mid;
            }
            return 0.5 * (a + b);
        }
        have_prev = true;
        prev_m = m;
        prev_c = c;
    }
    fail(ErrorCode::NoSignChange, "C(0, 0) does not change sign between mu4 and mu3");
}

/// Actions with C = 0 and W = p/q, refined by 2D Newton from sign changes of
/// W - p/q along the twistless curve. Sorted by energy.
inline std::vector<ActionPoint> twistless_resonance_points(const NormalForm& nf,
                                                           const TwistCurve& curve, Rational r)
{
    const double target = r.value();
    std::vector<ActionPoint> out;
    for (const auto& b : curve.branches) {
        for (std::size_t i = 0; i + 1 < b.size(); ++i) {
            const double f0 = b[i].W - target, f1 = b[i + 1].W - target;
            if ((f0 < 0.0) == (f1 < 0.0)) continue;
            const double t = f0 / (f0 - f1);
            ActionPoint x{b[i].Is + t * (b[i + 1].Is - b[i].Is), b[i].Il + t * (b[i + 1].Il - b[i].Il)};
            bool ok = false;
            for (int it = 0; it < 40; ++it) {
                const detail::Jet j(nf, x.Is, x.Il);
                const auto gc = j.grad_C();
                const auto gw = j.grad_W();
                std::array<double, 2> d;
                if (!detail::solve2({gc[0], gc[1], gw[0], gw[1]}, {-j.C(), -(j.W() - target)}, d))
                    break;
                x.Is += d[0];
                x.Il += d[1];
                if (std::hypot(d[0], d[1]) < 1e-15) {
                    ok = true;
                    break;
                }
            }
            const detail::Jet j(nf, x.Is, x.Il);
            if (ok && std::abs(j.C()) < 1e-8 && std::abs(j.W() - target) < 1e-8
                && curve.cap.contains(x.Is, x.Il))
                out.push_back(x);
        }
    }
    std::sort(out.begin(), out.end(), [&](const ActionPoint& a, const ActionPoint& b) {
        return nf.H(a.Is, a.Il) < nf.H(b.Is, b.Il);
    });
    return out;
}

enum class LocusMethod { NormalForm, Numeric };

inline std::string_view to_string(LocusMethod m)
{
    return m == LocusMethod::NormalForm ? "normal_form" : "numeric";
}

struct LocusPoint {
    double mu = 0.0;
    double E = 0.0;
    ActionPoint actions;
};

struct LocusFailure {
    double mu = 0.0;
    ErrorCode code = ErrorCode::NoSolution;
    std::string reason;
};

struct ReconnectionLocus {
    Rational rational;
    LocusMethod method = LocusMethod::NormalForm;
    std::vector<LocusPoint> points;
    std::vector<LocusFailure> failures;
};

/// Lowest positive-energy solution of {C = 0, W = p/q} at one mass ratio.
inline LocusPoint reconnection_point_nf(const NormalForm& nf, Rational r,
                                        const TwistlessOptions& opts = {})
{
    const TwistCurve curve = twistless_curve(nf, opts);
    for (const ActionPoint& x : twistless_resonance_points(nf, curve, r)) {
        const double E = nf.H(x.Is, x.Il);
        if (E > 0.0) return {nf.mu, E, x};
    }
    fail(ErrorCode::NoSolution, "no twistless torus with W = " + r.str() + " at mu = "
                                    + std::to_string(nf.mu));
}

/// Normal-form reconnection locus over the given mass ratios; per-mu
/// failures are recorded, not thrown.
inline ReconnectionLocus reconnection_locus_nf(Rational r, const std::vector<double>& mus,
                                               int degree = 8, const TwistlessOptions& opts = {})
{
    ReconnectionLocus locus;
    locus.rational = r;
    locus.method = LocusMethod::NormalForm;
    for (double m : mus) {
        try {
            locus.points.push_back(reconnection_point_nf(normal_form(MassRatio(m), degree), r, opts));
        } catch (const Error& e) {
            if (is_validation_error(e.code())) throw;
            locus.failures.push_back({m, e.code(), e.what()});
        }
    }
    return locus;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    require(n >= 1, ErrorCode::InvalidParameter, "grid needs at least one point");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

/// Mass ratio at which the normal-form locus reaches energy E, by bisection
/// on E_locus(mu) - E within [lo, hi].
inline double reconnection_mu_nf(Rational r, double E, double lo, double hi, int degree = 8,
                                 double tol = 1e-7, const TwistlessOptions& opts = {})
{
    auto f = [&](double m) {
        return reconnection_point_nf(normal_form(MassRatio(m), degree), r, opts).E - E;
    };
    double fa = f(lo);
    const double fb = f(hi);
    require((fa < 0.0) != (fb < 0.0), ErrorCode::NoSignChange,
            "normal-form locus for " + r.str() + " does not reach E = " + std::to_string(E)
                + " inside the bracket");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (fa < 0.0)) {
            lo = mid;
            fa = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Action-action chart

struct ChartGrid {
    std::size_t n_Is = 81;
    std::size_t n_Il = 81;
    /// Zero means the default action cap.
    double Is_max = 0.0;
    double Il_max = 0.0;
    double energy_spacing = 0.01;
    int farey_depth = 3;
};

struct ChartCell {
    double Is = 0.0;
    double Il = 0.0;
    double H = 0.0;
    double W = 0.0;
    double C = 0.0;
};

struct IsoLine {
    /// "H" or "W".
    std::string field;
    double level = 0.0;
    /// p/q label for W lines, empty for H.
    std::string label;
    std::vector<std::vector<ActionPoint>> segments;
};

struct ActionChart {
    double mu = 0.0;
    ActionCap cap;
    std::size_t n_Is = 0;
    std::size_t n_Il = 0;
    /// Row-major over Il, then Is.
    std::vector<ChartCell> cells;
    std::vector<IsoLine> isolines;
    TwistCurve twistless;
    bool has_twistless = false;
};

namespace detail {

/// Marching-squares segments of field == level over the chart grid.
inline std::vector<std::vector<ActionPoint>> contour_segments(const ActionChart& chart,
                                                              double ChartCell::*field,
                                                              double level)
{
    std::vector<std::vector<ActionPoint>> segs;
    auto cell = [&](std::size_t i, std::size_t j) -> const ChartCell& {
        return chart.cells[j * chart.n_Is + i];
    };
    auto interp = [&](const ChartCell& a, const ChartCell& b) {
        const double fa = a.*field - level, fb = b.*field - level;
        const double t = fa / (fa - fb);
        return ActionPoint{a.Is + t * (b.Is - a.Is), a.Il + t * (b.Il - a.Il)};
    };
    for (std::size_t j = 0; j + 1 < chart.n_Il; ++j) {
        for (std::size_t i = 0; i + 1 < chart.n_Is; ++i) {
            const std::array<const ChartCell*, 4> c{&cell(i, j), &cell(i + 1, j), &cell(i + 1, j + 1),
                                                    &cell(i, j + 1)};
            std::vector<ActionPoint> hits;
            for (std::size_t e = 0; e < 4; ++e) {
                const ChartCell& a = *c[e];
                const ChartCell& b = *c[(e + 1) % 4];
                const double fa = a.*field - level, fb = b.*field - level;
                if (!std::isfinite(fa) || !std::isfinite(fb)) continue;
                if ((fa < 0.0) != (fb < 0.0)) hits.push_back(interp(a, b));
            }
            if (hits.size() == 2) segs.push_back(hits);
            if (hits.size() == 4) {
                segs.push_back({hits[0], hits[1]});
                segs.push_back({hits[2], hits[3]});
            }
        }
    }
    return segs;
}

} // namespace detail

/// Grid of (Is, Il) with H, W and C, iso-lines of H every energy_spacing and
/// of W at the Farey rationals between 1/4 and 1/3, and the C = 0 curve.
inline ActionChart action_action_chart(const NormalForm& nf, const ChartGrid& grid = {},
                                       const TwistlessOptions& opts = {})
{
    require(grid.n_Is >= 2 && grid.n_Il >= 2 && grid.energy_spacing > 0.0,
            ErrorCode::InvalidParameter, "chart grid needs at least 2x2 points");
    ActionChart chart;
    chart.mu = nf.mu;
    chart.cap = default_action_cap(nf);
    if (grid.Is_max > 0.0) chart.cap.Is_max = grid.Is_max;
    if (grid.Il_max > 0.0) chart.cap.Il_max = grid.Il_max;
    chart.n_Is = grid.n_Is;
    chart.n_Il = grid.n_Il;
    for (std::size_t j = 0; j < grid.n_Il; ++j) {
        for (std::size_t i = 0; i < grid.n_Is; ++i) {
            const double Is = chart.cap.Is_max * static_cast<double>(i) / static_cast<double>(grid.n_Is - 1);
            const double Il = chart.cap.Il_max * static_cast<double>(j) / static_cast<double>(grid.n_Il - 1);
            const detail::Jet jet(nf, Is, Il);
            chart.cells.push_back({Is, Il, nf.H(Is, Il), jet.h10 != 0.0 ? jet.W() : NAN,
                                   jet.h10 != 0.0 ? jet.C() : NAN});
        }
    }
    double hmin = INFINITY, hmax = -INFINITY;
    for (const auto& c : chart.cells) {
        hmin = std::min(hmin, c.H);
        hmax = std::max(hmax, c.H);
    }
    for (long k = static_cast<long>(std::ceil(hmin / grid.energy_spacing));
         k * grid.energy_spacing <= hmax; ++k) {
        const double level = static_cast<double>(k) * grid.energy_spacing;
        chart.isolines.push_back({"H", level, "", detail::contour_segments(chart, &ChartCell::H, level)});
    }
    for (const Rational& r : farey_between({1, 4}, {1, 3}, grid.farey_depth))
        chart.isolines.push_back(
            {"W", r.value(), r.str(), detail::contour_segments(chart, &ChartCell::W, r.value())});
    try {
        chart.twistless = twistless_curve(nf, chart.cap, opts);
        chart.has_twistless = true;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoTwistlessCurve) throw;
        chart.twistless.mu = nf.mu;
        chart.twistless.cap = chart.cap;
    }
    return chart;
}

/// Intersections of the W = w iso-line with the energy line H = E inside the
/// cap, ordered by Il. Found by sign changes of W along the energy line.
inline std::vector<ActionPoint> rotation_energy_crossings(const NormalForm& nf, double E, double w,
                                                          const ActionCap& cap, std::size_t samples = 2000)
{
    std::vector<ActionPoint> out;
    double prev_Il = 0.0;
    double prev = nf_W_on_energy(nf, E, 0.0) - w;
    for (std::size_t k = 1; k <= samples; ++k) {
        const double Il = cap.Il_max * static_cast<double>(k) / static_cast<double>(samples);
        double Is = 0.0, cur = 0.0;
        try {
            Is = energy_line_Is(nf, E, Il);
            if (Is > cap.Is_max) break;
            cur = nf_rotation_number(nf, Is, Il) - w;
        } catch (const Error&) {
            break;
        }
        if ((prev < 0.0) != (cur < 0.0)) {
            double lo = prev_Il, hi = Il;
            const bool neg_lo = prev < 0.0;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                ((nf_W_on_energy(nf, E, mid) - w < 0.0) == neg_lo ? lo : hi) = mid;
            }
            const double l = 0.5 * (lo + hi);
            out.push_back({energy_line_Is(nf, E, l), l});
        }
        prev = cur;
        prev_Il = Il;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Numerical reconnection search on the return map

struct NumericSearchOptions {
    /// Seeds on the ray from the fixed point in +pa, up to this offset.
    double ray_length = 0.1;
    std::size_t seeds = 24;
    std::size_t crossings = 2000;
    double mu_tolerance = 5e-6;
    unsigned workers = 1;
};

struct ProfileMaximum {
    double W = 0.0;
    double I = 0.0;
    /// Largest raw sample among unflagged entries.
    double W_sample = 0.0;
    std::size_t used = 0;
};

/// Maximum of W(I) over unflagged entries: parabola through the largest
/// sample and its unflagged neighbours, or the sample itself at an end.
inline ProfileMaximum profile_maximum(const std::vector<ProfileEntry>& profile)
{
    std::vector<const ProfileEntry*> ok;
    for (const auto& e : profile)
        if (e.flag == ProfileFlag::Ok) ok.push_back(&e);
    require(ok.size() >= 3, ErrorCode::InsufficientIterates,
            "fewer than three usable profile samples");
    std::sort(ok.begin(), ok.end(), [](auto* a, auto* b) { return a->I < b->I; });
    std::size_t k = 0;
    for (std::size_t i = 1; i < ok.size(); ++i)
        if (ok[i]->W > ok[k]->W) k = i;
    ProfileMaximum m;
    m.used = ok.size();
    m.W = m.W_sample = ok[k]->W;
    m.I = ok[k]->I;
    if (k == 0 || k + 1 == ok.size()) return m;
    const double x0 = ok[k - 1]->I, x1 = ok[k]->I, x2 = ok[k + 1]->I;
    const double y0 = ok[k - 1]->W, y1 = ok[k]->W, y2 = ok[k + 1]->W;
    const double d01 = (y1 - y0) / (x1 - x0), d12 = (y2 - y1) / (x2 - x1);
    const double a = (d12 - d01) / (x2 - x0);
    if (!(a < 0.0)) return m;
    const double b = d01 - a * (x0 + x1);
    const double xv = -b / (2.0 * a);
    if (xv < x0 || xv > x2) return m;
    m.I = xv;
    m.W = y1 + (xv - x1) * (d01 + a * (xv - x0));
    return m;
}

/// Rotation profile along the +pa ray from the short-period fixed point.
inline std::vector<ProfileEntry> island_profile(MassRatio mu, double E,
                                                const NumericSearchOptions& opts,
                                                FixedPoint* fixed_point = nullptr)
{
    const PoincareMap map(mu, survey_integrator_config(mu));
    const FixedPoint fp = find_fixed_point(map, E);
    if (fixed_point) *fixed_point = fp;
    SectionPoint end = fp.point;
    end.pa += opts.ray_length;
    const auto seeds = ray_seeds(fp.point, end, opts.seeds);
    ProfileOptions po;
    po.crossings = opts.crossings;
    po.workers = opts.workers;
    return rotation_profile(map, fp.point, seeds, po);
}

/// True when the profile reaches W = p/q: its fitted maximum, or any
/// unflagged sample (island-chain orbits lock exactly onto p/q).
inline bool profile_reaches(const std::vector<ProfileEntry>& profile, double target)
{
    for (const auto& e : profile)
        if (e.flag == ProfileFlag::Ok && e.W >= target - 1e-9) return true;
    return profile_maximum(profile).W >= target;
}

/// Mass ratio where max_I W(I; mu, E) = p/q, by bisection on mu.
inline double reconnection_search_numeric(Rational r, double E, double lo, double hi,
                                          const NumericSearchOptions& opts = {})
{
    require(lo < hi && E > 0.0, ErrorCode::InvalidParameter, "invalid search bracket");
    const double target = r.value();
    auto above = [&](double m) { return profile_reaches(island_profile(MassRatio(m), E, opts), target); };
    const bool a_lo = above(lo), a_hi = above(hi);
    require(a_lo != a_hi, ErrorCode::NoSignChange,
            "profile maximum minus " + r.str() + " does not change sign in the bracket");
    while (hi - lo > opts.mu_tolerance) {
        const double mid = 0.5 * (lo + hi);
        ((above(mid) == a_lo) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace l4twist
