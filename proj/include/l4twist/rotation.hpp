#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "l4twist/dynamics.hpp"
#include "l4twist/errors.hpp"
#include "l4twist/section.hpp"

namespace l4twist {

/// Row-major 2x2 matrix d(a', pa')/d(a, pa).
using Mat2 = std::array<double, 4>;

inline double det(const Mat2& m) { return m[0] * m[3] - m[1] * m[2]; }
inline double trace(const Mat2& m) { return m[0] + m[3]; }

/// Central-difference Jacobian of the return map.
inline Mat2 return_map_jacobian(const PoincareMap& map, const SectionPoint& p, double delta = 1e-5)
{
    auto eval = [&](double da, double dpa) {
        SectionPoint q = p;
        q.a += da;
        q.pa += dpa;
        return map(q);
    };
    const SectionPoint ap = eval(delta, 0.0), am = eval(-delta, 0.0);
    const SectionPoint pp = eval(0.0, delta), pm = eval(0.0, -delta);
    const double s = 0.5 / delta;
    return {(ap.a - am.a) * s, (pp.a - pm.a) * s, (ap.pa - am.pa) * s, (pp.pa - pm.pa) * s};
}

/// Rotation number arg(lambda)/2pi in (0, 1/2) of an elliptic 2x2 Jacobian.
inline std::optional<double> elliptic_rotation_number(const Mat2& jac)
{
    const double tr = trace(jac);
    const double d = det(jac);
    const double disc = 4.0 * d - tr * tr;
    if (!(disc > 0.0)) return std::nullopt;
    return std::atan2(std::sqrt(disc), tr) / (2.0 * std::numbers::pi);
}

struct FixedPoint {
    SectionPoint point;
    Mat2 jacobian{};
    double residual = 0.0;
    bool elliptic = false;
    int iterations = 0;
};

struct NewtonOptions {
    int max_iterations = 25;
    double tolerance = 1e-10;
    double jacobian_step = 1e-5;
};

/// Newton iteration on P(x) - x with a finite-difference Jacobian.
inline FixedPoint find_fixed_point(const PoincareMap& map, SectionPoint guess,
                                   const NewtonOptions& opts = {})
{
    guess = map.with_direction(guess);
    FixedPoint fp;
    fp.point = guess;
    try {
        for (int it = 0; it < opts.max_iterations; ++it) {
            const SectionPoint image = map(fp.point);
            const double ra = image.a - fp.point.a;
            const double rp = image.pa - fp.point.pa;
            fp.residual = std::hypot(ra, rp);
            fp.jacobian = return_map_jacobian(map, fp.point, opts.jacobian_step);
            fp.iterations = it;
            if (fp.residual < opts.tolerance) {
                fp.point.t_cross = 0.0;
                fp.elliptic = elliptic_rotation_number(fp.jacobian).has_value();
                return fp;
            }
            const double m00 = fp.jacobian[0] - 1.0, m01 = fp.jacobian[1];
            const double m10 = fp.jacobian[2], m11 = fp.jacobian[3] - 1.0;
            const double d = m00 * m11 - m01 * m10;
            if (d == 0.0) fail(ErrorCode::NewtonDiverged, "singular Newton matrix");
            const double da = -(m11 * ra - m01 * rp) / d;
            const double dp = -(-m10 * ra + m00 * rp) / d;
            fp.point.a += da;
            fp.point.pa += dp;
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::NewtonDiverged) throw;
        fail(ErrorCode::NewtonDiverged, std::string("return map failed during Newton: ") + e.what());
    }
    fail(ErrorCode::NewtonDiverged,
         "no convergence after " + std::to_string(opts.max_iterations) + " iterations, residual "
             + std::to_string(fp.residual));
}

/// Image (a, pa) = (1, -sqrt(3) mu / 2) of L4 on the section.
inline SectionPoint l4_section_point(MassRatio mu, double E, Direction dir)
{
    return {1.0, -0.5 * kSqrt3 * mu.value(), E, dir, 0.0};
}

/// Short-period fixed point at energy E > 0, continued from L4 in energy.
/// The displacement from L4 is extrapolated as sqrt(E) between stages.
inline FixedPoint find_fixed_point(const PoincareMap& map, double E, const NewtonOptions& opts = {})
{
    require(E > 0.0 && std::isfinite(E), ErrorCode::InvalidParameter,
            "short-period fixed point needs E > 0");
    const MassRatio mu = map.mass_ratio();
    const SectionPoint l4 = l4_section_point(mu, 0.0, map.direction());
    double e = std::min(E, 1e-6);
    // Linear short-period crossing: small displacement along a, refined by Newton.
    SectionPoint guess = l4;
    guess.E = e;
    FixedPoint fp;
    while (true) {
        fp = find_fixed_point(map, guess, opts);
        if (e >= E) return fp;
        const double next = std::min(E, e * 4.0);
        const double scale = std::sqrt(next / e);
        guess.a = l4.a + (fp.point.a - l4.a) * scale;
        guess.pa = l4.pa + (fp.point.pa - l4.pa) * scale;
        guess.E = next;
        e = next;
    }
}

inline FixedPoint find_fixed_point(MassRatio mu, double E, const SectionPoint& guess,
                                   const IntegratorConfig& config, SectionConfig section = {})
{
    require(E > 0.0, ErrorCode::InvalidParameter, "short-period fixed point needs E > 0");
    section.direction = guess.direction;
    SectionPoint g = guess;
    g.E = E;
    return find_fixed_point(PoincareMap(mu, config, section), g);
}

inline double fixed_point_rotation_number(const FixedPoint& fp)
{
    const auto w = elliptic_rotation_number(fp.jacobian);
    if (!w) fail(ErrorCode::HyperbolicFixedPoint, "fixed point is not elliptic");
    return *w;
}

inline double fixed_point_rotation_number(const PoincareMap& map, double E)
{
    return fixed_point_rotation_number(find_fixed_point(map, E));
}

/// Orbit of a seed on (what should be) an invariant curve about the center.
struct InvariantCurveSample {
    SectionPoint seed;
    /// seed followed by its successive images.
    std::vector<SectionPoint> crossings;
    SectionPoint center;
    /// Unwound polar angles about the center, oriented so they increase.
    std::vector<double> angles;
};

namespace detail {

inline double wrap_pi(double a)
{
    const double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a > std::numbers::pi) a -= two_pi;
    if (a <= -std::numbers::pi) a += two_pi;
    return a;
}

struct Extent {
    double sa = 1.0;
    double sp = 1.0;
};

inline Extent curve_extent(std::span<const SectionPoint> pts, const SectionPoint& c)
{
    double amax = 0.0, pmax = 0.0;
    for (const auto& p : pts) {
        amax = std::max(amax, std::abs(p.a - c.a));
        pmax = std::max(pmax, std::abs(p.pa - c.pa));
    }
    return {amax, pmax};
}

/// Smooth bump weight on (0, 1), zero with all derivatives at the ends.
inline double bump(double t) { return std::exp(-1.0 / (t * (1.0 - t))); }

inline double weighted_mean(std::span<const double> x)
{
    const std::size_t n = x.size();
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double w = bump((static_cast<double>(k) + 1.0) / (static_cast<double>(n) + 1.0));
        num += w * x[k];
        den += w;
    }
    return num / den;
}

} // namespace detail

/// Builds angles about the center after rescaling each axis by the curve extent.
/// Throws CurveNotEncircling when the increments are not sign-definite.
inline std::vector<double> unwound_angles(std::span<const SectionPoint> pts, const SectionPoint& center)
{
    const auto ext = detail::curve_extent(pts, center);
    require(ext.sa > 0.0 && ext.sp > 0.0, ErrorCode::CurveNotEncircling,
            "curve is degenerate (no extent about the center)");
    std::vector<double> th(pts.size());
    int orientation = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const double raw = std::atan2((pts[k].pa - center.pa) / ext.sp, (pts[k].a - center.a) / ext.sa);
        if (k == 0) {
            th[k] = raw;
            continue;
        }
        const double inc = detail::wrap_pi(raw - th[k - 1]);
        const int s = inc > 0.0 ? 1 : (inc < 0.0 ? -1 : 0);
        if (s == 0 || (orientation != 0 && s != orientation))
            fail(ErrorCode::CurveNotEncircling, "angle increments change sign at iterate "
                                                    + std::to_string(k));
        orientation = s;
        th[k] = th[k - 1] + inc;
    }
    if (orientation < 0)
        for (double& t : th) t = -t;
    return th;
}

inline InvariantCurveSample sample_curve(const PoincareMap& map, const SectionPoint& seed,
                                         const SectionPoint& center, std::size_t n)
{
    InvariantCurveSample s;
    s.seed = map.with_direction(seed);
    s.center = center;
    s.crossings.reserve(n + 1);
    s.crossings.push_back(s.seed);
    for (const auto& p : map.iterate(s.seed, n)) s.crossings.push_back(p);
    s.angles = unwound_angles(s.crossings, center);
    return s;
}

struct RotationEstimate {
    double W = 0.0;
    /// Disagreement between the weighted averages of the two halves.
    double error = 0.0;
};

inline constexpr std::size_t kMinRotationIterates = 1000;

/// Weighted Birkhoff average of angle increments divided by 2 pi.
inline RotationEstimate rotation_number_from_angles(std::span<const double> angles,
                                                    std::size_t min_iterates = kMinRotationIterates)
{
    require(angles.size() >= min_iterates + 1, ErrorCode::InsufficientIterates,
            "need at least " + std::to_string(min_iterates) + " iterates, got "
                + std::to_string(angles.size() == 0 ? 0 : angles.size() - 1));
    std::vector<double> inc(angles.size() - 1);
    for (std::size_t k = 0; k + 1 < angles.size(); ++k) {
        inc[k] = angles[k + 1] - angles[k];
        require(inc[k] > 0.0 && inc[k] < 2.0 * std::numbers::pi, ErrorCode::CurveNotEncircling,
                "angle increment outside (0, 2 pi)");
    }
    const double two_pi = 2.0 * std::numbers::pi;
    const std::span<const double> all(inc);
    const std::size_t half = inc.size() / 2;
    RotationEstimate r;
    r.W = detail::weighted_mean(all) / two_pi;
    const double w1 = detail::weighted_mean(all.first(half)) / two_pi;
    const double w2 = detail::weighted_mean(all.subspan(half)) / two_pi;
    r.error = std::max(std::abs(w1 - r.W), std::abs(w2 - r.W));
    return r;
}

/// Rotation number using the first n crossings of the sample (0 = all).
inline RotationEstimate rotation_number_of_curve(const InvariantCurveSample& s, std::size_t n = 0)
{
    std::span<const double> a(s.angles);
    if (n != 0 && n + 1 < a.size()) a = a.first(n + 1);
    return rotation_number_from_angles(a);
}

inline constexpr std::size_t kMinActionPoints = 100;

/// Enclosed area / 2 pi, from the polygon of crossings sorted by angle.
inline double action_of_points(std::span<const SectionPoint> pts, const SectionPoint& center)
{
    require(pts.size() >= kMinActionPoints, ErrorCode::InsufficientIterates,
            "need at least 100 crossings for an action");
    const auto ext = detail::curve_extent(pts, center);
    if (ext.sa == 0.0 && ext.sp == 0.0) return 0.0;
    require(ext.sa > 0.0 && ext.sp > 0.0, ErrorCode::CurveNotEncircling,
            "degenerate curve for action");
    std::vector<std::pair<double, std::size_t>> order(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k)
        order[k] = {std::atan2((pts[k].pa - center.pa) / ext.sp, (pts[k].a - center.a) / ext.sa), k};
    std::sort(order.begin(), order.end());
    // Largest angular gap must be small for the curve to surround the center.
    double gap = order.front().first + 2.0 * std::numbers::pi - order.back().first;
    for (std::size_t k = 1; k < order.size(); ++k) gap = std::max(gap, order[k].first - order[k - 1].first);
    require(gap < std::numbers::pi, ErrorCode::CurveNotEncircling, "crossings do not surround the center");
    double twice_area = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& p = pts[order[k].second];
        const auto& q = pts[order[(k + 1) % order.size()].second];
        twice_area += (p.a - center.a) * (q.pa - center.pa) - (q.a - center.a) * (p.pa - center.pa);
    }
    return std::abs(twice_area) / (4.0 * std::numbers::pi);
}

inline double action_of_curve(const InvariantCurveSample& s)
{
    return action_of_points(s.crossings, s.center);
}

enum class ProfileFlag { Ok, Resonant, Failed };

inline std::string_view to_string(ProfileFlag f)
{
    switch (f) {
    case ProfileFlag::Ok: return "ok";
    case ProfileFlag::Resonant: return "resonant/chaotic";
    case ProfileFlag::Failed: return "failed";
    }
    return "failed";
}

struct ProfileEntry {
    std::size_t index = 0;
    SectionPoint seed;
    double I = 0.0;
    double W = 0.0;
    double error = 0.0;
    ProfileFlag flag = ProfileFlag::Failed;
    std::string reason;
};

struct ProfileOptions {
    std::size_t crossings = 2000;
    /// Error estimate above which a curve is flagged resonant/chaotic.
    double error_threshold = 1e-4;
    unsigned workers = 1;
};

/// Seeds evenly spaced on the segment from -> to (count >= 1, from excluded).
inline std::vector<SectionPoint> ray_seeds(const SectionPoint& from, const SectionPoint& to,
                                           std::size_t count)
{
    require(count >= 1, ErrorCode::InvalidParameter, "ray needs at least one seed");
    std::vector<SectionPoint> seeds(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double t = static_cast<double>(k + 1) / static_cast<double>(count);
        seeds[k] = from;
        seeds[k].a = from.a + t * (to.a - from.a);
        seeds[k].pa = from.pa + t * (to.pa - from.pa);
        seeds[k].t_cross = 0.0;
    }
    return seeds;
}

inline ProfileEntry profile_entry(const PoincareMap& map, const SectionPoint& center,
                                  const SectionPoint& seed, std::size_t index,
                                  const ProfileOptions& opts)
{
    ProfileEntry e;
    e.index = index;
    e.seed = map.with_direction(seed);
    try {
        const InvariantCurveSample s = sample_curve(map, seed, center, opts.crossings);
        const RotationEstimate r = rotation_number_of_curve(s);
        e.W = r.W;
        e.error = r.error;
        e.I = action_of_curve(s);
        e.flag = r.error > opts.error_threshold ? ProfileFlag::Resonant : ProfileFlag::Ok;
        if (e.flag == ProfileFlag::Resonant) e.reason = "error estimate above threshold";
    } catch (const Error& err) {
        e.reason = std::string(to_string(err.code()));
        e.flag = err.code() == ErrorCode::CurveNotEncircling ? ProfileFlag::Resonant : ProfileFlag::Failed;
    }
    return e;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn)
{
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

/// (I, W) for each seed; entries keep the seed order whatever the worker count.
inline std::vector<ProfileEntry> rotation_profile(const PoincareMap& map, const SectionPoint& center,
                                                  std::span<const SectionPoint> seeds,
                                                  const ProfileOptions& opts = {})
{
    std::vector<ProfileEntry> out(seeds.size());
    parallel_for(seeds.size(), opts.workers, [&](std::size_t i) {
        out[i] = profile_entry(map, center, seeds[i], i, opts);
    });
    return out;
}

} // namespace l4twist
