#pragma once

// Planar circular restricted three-body problem in the rotating frame.
//
// Conventions used throughout the library:
//   * primaries of mass 1-mu at z = -1/2 and mu at z = +1/2,
//   * H = |p_z|^2/2 + Im((z + 1/2 - mu) p_z) - (1-mu)/|z+1/2| - mu/|z-1/2| + s,
//     with z = x + i y, p_z = p_x - i p_y and s = (3 + mu(mu-1))/2 so that
//     H(L4) = 0,
//   * Thiele chart z = cos(w)/2, p_z = -2 p_w / sin(w) with w = u + i v,
//     p_w = p_u - i p_v, principal branch u in [0, pi],
//   * regularized Hamiltonian K = |sin w|^2/4 (H - E) in fictitious time tau,
//     dt/dtau = |sin w|^2/4.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "l4twist/errors.hpp"

namespace l4twist {

inline constexpr double kSqrt3 = std::numbers::sqrt3;

/// Largest mass ratio with an elliptic L4, 0.5 (1 - sqrt(69)/9).
inline constexpr double kMu1 = 0.038520896504551370;

/// Earth-Moon mass ratio, omega_s / omega_l close to 16/5.
inline constexpr double kMuEarthMoon = 0.012150585609624;

/// Mass fraction mu = m2 / (m1 + m2), 0 < mu <= 1/2.
class MassRatio {
public:
    explicit MassRatio(double mu) : value_(mu)
    {
        require(std::isfinite(mu) && mu > 0.0 && mu <= 0.5, ErrorCode::InvalidParameter,
                "mass ratio must lie in (0, 1/2], got " + std::to_string(mu));
    }

    double value() const noexcept { return value_; }

private:
    double value_;
};

/// Require the elliptic regime 0 < mu < mu1 that every analysis operation assumes.
inline void require_elliptic(MassRatio mu)
{
    require(mu.value() < kMu1, ErrorCode::HyperbolicEquilibrium,
            "L4 is not elliptic for mu = " + std::to_string(mu.value()));
}

struct RotatingState {
    double x = 0.0;
    double y = 0.0;
    double px = 0.0;
    double py = 0.0;

    std::complex<double> z() const { return {x, y}; }
    std::complex<double> pz() const { return {px, -py}; }
};

/// Extended phase space point in Thiele coordinates. E is the fixed energy
/// parameter, t the accumulated physical time.
struct RegularizedState {
    double u = 0.0;
    double v = 0.0;
    double pu = 0.0;
    double pv = 0.0;
    double t = 0.0;
    double E = 0.0;

    std::complex<double> w() const { return {u, v}; }
    std::complex<double> pw() const { return {pu, -pv}; }

    /// Integrated components (u, v, pu, pv, t); E is a parameter of the flow.
    std::array<double, 5> phase() const { return {u, v, pu, pv, t}; }

    static RegularizedState from_phase(const std::array<double, 5>& p, double E)
    {
        return {p[0], p[1], p[2], p[3], p[4], E};
    }
};

/// Derivative of (u, v, pu, pv, t) with respect to fictitious time.
using RegularizedDerivative = std::array<double, 5>;

struct Frequencies {
    double omega_s = 0.0;
    double omega_l = 0.0;

    double ratio() const { return omega_s / omega_l; }
};

enum class LagrangePoint { L4, L5 };

/// Linear frequencies at L4: the positive roots of w^4 - w^2 + 27 mu (1-mu)/4.
inline Frequencies frequencies(MassRatio mu)
{
    const double m = mu.value();
    require(m <= kMu1, ErrorCode::HyperbolicEquilibrium,
            "no pair of linear frequencies beyond mu1, mu = " + std::to_string(m));
    double disc = 1.0 - 27.0 * m * (1.0 - m);
    // mu1 itself is the double root; tolerate the rounding of its decimal value.
    require(disc > -1e-14, ErrorCode::HyperbolicEquilibrium,
            "complex linear frequencies at mu = " + std::to_string(m));
    disc = std::sqrt(std::max(disc, 0.0));
    const double big = 0.5 * (1.0 + disc);
    const double product = 27.0 * m * (1.0 - m) / 4.0;
    // omega_l^2 from the product of roots; avoids cancellation for small mu.
    return {std::sqrt(big), std::sqrt(product / big)};
}

/// Smaller mass ratio with omega_s / omega_l = r.
inline MassRatio mass_ratio_for_resonance(double r)
{
    require(std::isfinite(r) && r > 1.0, ErrorCode::InvalidParameter,
            "frequency ratio must exceed 1, got " + std::to_string(r));
    const double k = 4.0 * r * r / (27.0 * (1.0 + r * r) * (1.0 + r * r));
    return MassRatio(2.0 * k / (1.0 + std::sqrt(1.0 - 4.0 * k)));
}

/// Energy offset s = (3 + mu(mu-1))/2.
inline double energy_offset(MassRatio mu)
{
    const double m = mu.value();
    return 0.5 * (3.0 + m * (m - 1.0));
}

/// Usual Jacobi integral C = -2 (E - s).
inline double jacobi_constant(double E, MassRatio mu) { return -2.0 * (E - energy_offset(mu)); }

/// The CR3BP Hamiltonian at fixed mass ratio. Holds the energy offset s.
class Cr3bp {
public:
    explicit Cr3bp(MassRatio mu) : mu_(mu.value()), s_(energy_offset(mu)) {}

    double mu() const noexcept { return mu_; }
    MassRatio mass_ratio() const { return MassRatio(mu_); }
    double offset() const noexcept { return s_; }

    double energy(const RotatingState& q) const
    {
        const double r1 = std::hypot(q.x + 0.5, q.y);
        const double r2 = std::hypot(q.x - 0.5, q.y);
        require(r1 > 0.0 && r2 > 0.0, ErrorCode::NonFiniteValue, "energy evaluated at a primary");
        const double h = 0.5 * (q.px * q.px + q.py * q.py) + q.y * q.px
                         - (q.x + 0.5 - mu_) * q.py - (1.0 - mu_) / r1 - mu_ / r2 + s_;
        require(std::isfinite(h), ErrorCode::NonFiniteValue, "non-finite energy");
        return h;
    }

    /// Canonical equations (dH/dp, -dH/dq), returned in RotatingState layout.
    RotatingState vector_field(const RotatingState& q) const
    {
        const double dx1 = q.x + 0.5;
        const double dx2 = q.x - 0.5;
        const double r1sq = dx1 * dx1 + q.y * q.y;
        const double r2sq = dx2 * dx2 + q.y * q.y;
        require(r1sq > 0.0 && r2sq > 0.0, ErrorCode::NonFiniteValue,
                "vector field evaluated at a primary");
        const double c1 = (1.0 - mu_) / (r1sq * std::sqrt(r1sq));
        const double c2 = mu_ / (r2sq * std::sqrt(r2sq));
        RotatingState d;
        d.x = q.px + q.y;
        d.y = q.py - (q.x + 0.5 - mu_);
        d.px = q.py - c1 * dx1 - c2 * dx2;
        d.py = -q.px - c1 * q.y - c2 * q.y;
        require(std::isfinite(d.x) && std::isfinite(d.y) && std::isfinite(d.px)
                    && std::isfinite(d.py),
                ErrorCode::NonFiniteValue, "non-finite vector field");
        return d;
    }

    /// Equilateral equilibrium; L5 is the reflection (y, px) -> (-y, -px).
    RotatingState lagrange_point(LagrangePoint which) const
    {
        const double h = 0.5 * kSqrt3;
        RotatingState l4{0.0, h, -h, 0.5 - mu_};
        if (which == LagrangePoint::L5) {
            l4.y = -l4.y;
            l4.px = -l4.px;
        }
        return l4;
    }

    /// Regularized Hamiltonian K in real Thiele coordinates.
    double regularized_energy(const RegularizedState& r) const
    {
        const double m = 1.0 - 2.0 * mu_;
        const double cu = std::cos(r.u), su = std::sin(r.u);
        const double chv = std::cosh(r.v), shv = std::sinh(r.v);
        return 0.5 * (r.pu * r.pu + r.pv * r.pv) + 0.5 * (m * cu - chv)
               + 0.25 * su * (m * chv + cu) * r.pv + 0.25 * shv * (m * cu + chv) * r.pu
               + 0.125 * (std::cos(2.0 * r.u) - std::cosh(2.0 * r.v)) * (r.E - s_);
    }

    /// d(u, v, pu, pv, t)/dtau. Regular everywhere, including the primaries.
    RegularizedDerivative regularized_field(const RegularizedState& r) const
    {
        return regularized_field(r.u, r.v, r.pu, r.pv, r.E);
    }

    RegularizedDerivative regularized_field(double u, double v, double pu, double pv,
                                            double E) const
    {
        const double m = 1.0 - 2.0 * mu_;
        const double cu = std::cos(u), su = std::sin(u);
        const double ev = std::exp(v), emv = 1.0 / ev;
        const double chv = 0.5 * (ev + emv), shv = 0.5 * (ev - emv);
        const double es = E - s_;
        const double a = m * cu + chv;  // coefficient carried by pu
        const double b = m * chv + cu;  // coefficient carried by pv
        // sin(2u) = 2 su cu, sinh(2v) = 2 shv chv, cos 2u - cosh 2v = 2(cu^2 - chv^2)
        const double dK_du = -0.5 * m * su + 0.25 * (cu * b - su * su) * pv
                             - 0.25 * m * shv * su * pu - 0.5 * su * cu * es;
        const double dK_dv = -0.5 * shv + 0.25 * m * su * shv * pv
                             + 0.25 * (chv * a + shv * shv) * pu - 0.5 * shv * chv * es;
        return {pu + 0.25 * shv * a,
                pv + 0.25 * su * b,
                -dK_du,
                -dK_dv,
                0.25 * (chv * chv - cu * cu)};
    }

private:
    double mu_;
    double s_;
};

inline double energy_rotating(const RotatingState& q, MassRatio mu) { return Cr3bp(mu).energy(q); }

inline RotatingState vector_field_rotating(const RotatingState& q, MassRatio mu)
{
    return Cr3bp(mu).vector_field(q);
}

inline RotatingState lagrange_point(MassRatio mu, LagrangePoint which)
{
    require_elliptic(mu);
    return Cr3bp(mu).lagrange_point(which);
}

inline double energy_regularized(const RegularizedState& r, MassRatio mu)
{
    return Cr3bp(mu).regularized_energy(r);
}

inline RegularizedDerivative vector_field_regularized(const RegularizedState& r, MassRatio mu)
{
    return Cr3bp(mu).regularized_field(r);
}

/// |sin w|^2 / 4 = dt/dtau.
inline double time_scale(double u, double v)
{
    const double c = std::cos(u), ch = std::cosh(v);
    return 0.25 * (ch * ch - c * c);
}

/// Thiele chart, principal branch u in [0, pi]. Time starts at zero.
inline RegularizedState to_regularized(const RotatingState& q, double E)
{
    const std::complex<double> z = q.z();
    require(std::abs(z - 0.5) > 0.0 && std::abs(z + 0.5) > 0.0, ErrorCode::BranchPoint,
            "Thiele chart is singular at the primaries");
    const std::complex<double> w = std::acos(2.0 * z);
    const std::complex<double> pw = -0.5 * q.pz() * std::sin(w);
    return {w.real(), w.imag(), pw.real(), -pw.imag(), 0.0, E};
}

inline RotatingState from_regularized(const RegularizedState& r)
{
    const std::complex<double> w = r.w();
    const std::complex<double> sw = std::sin(w);
    require(std::abs(sw) > 0.0, ErrorCode::BranchPoint, "sin(w) = 0 has no cartesian image");
    const std::complex<double> z = 0.5 * std::cos(w);
    const std::complex<double> pz = -2.0 * r.pw() / sw;
    return {z.real(), z.imag(), pz.real(), -pz.imag()};
}

} // namespace l4twist
