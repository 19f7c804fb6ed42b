#pragma once

// Birkhoff normal form of H at L4.
//
// Conventions, fixed here and nowhere else:
//   * canonical variables ordered (q1, q2, p1, p2), J = [[0, I], [-I, 0]],
//     {f, g} = sum_i f_qi g_pi - f_pi g_qi;
//   * after the linear step H2 = (w_s/2)(Q1^2 + P1^2) - (w_l/2)(Q2^2 + P2^2);
//   * complex variables Q = (x + i y)/sqrt 2, P = (i x + y)/sqrt 2, so each
//     action is I = i x y and H2 = i (w_s x1 y1 - w_l x2 y2);
//   * Deprit triangle with generators W_1, W_2, ... (W_n of degree n + 2),
//     K = sum_n K_{n+2} with K_{n+2} = T[0][n] / n!.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "l4twist/dynamics.hpp"
#include "l4twist/errors.hpp"
#include "l4twist/polynomial.hpp"

namespace l4twist {

using Matrix4 = std::array<std::array<double, 4>, 4>;

/// Working precision of the Lie triangle. Degree-8 terms cancel from
/// magnitudes near 1e9 to 1e4, beyond what double or long double resolve.
using NfReal = __float128;
using NfComplex = std::complex<NfReal>;
using NfPoly = GradedPoly<NfComplex>;

namespace detail {
template <>
inline double magnitude<NfComplex>(const NfComplex& v)
{
    return std::hypot(static_cast<double>(v.real()), static_cast<double>(v.imag()));
}
inline NfReal nf_abs(NfReal x) { return x < 0 ? -x : x; }
} // namespace detail

/// Taylor polynomial of H about L4 in (dx, dy, dpx, dpy).
inline RealPoly taylor_at_l4(MassRatio mu, int max_degree = 8)
{
    require_elliptic(mu);
    require(max_degree >= 2, ErrorCode::InvalidParameter, "max_degree must be at least 2");
    const double m = mu.value();
    const int N = max_degree;
    const RealPoly dx = RealPoly::variable(0, N), dy = RealPoly::variable(1, N);
    const RealPoly dpx = RealPoly::variable(2, N), dpy = RealPoly::variable(3, N);
    const RealPoly one = RealPoly::constant(1.0, N);

    const RealPoly x = dx;
    const RealPoly y = dy + 0.5 * kSqrt3 * one;
    const RealPoly px = dpx - 0.5 * kSqrt3 * one;
    const RealPoly py = dpy + (0.5 - m) * one;

    // 1/sqrt(1 + eps) = sum_k binom(-1/2, k) eps^k; eps has no constant term.
    auto inverse_distance = [&](const RealPoly& eps) {
        RealPoly sum = one;
        RealPoly power = one;
        double coeff = 1.0;
        for (int k = 1; k <= N; ++k) {
            coeff *= (-0.5 - (k - 1)) / k;
            power = power * eps;
            sum += coeff * power;
        }
        return sum;
    };
    const RealPoly quad = dx * dx + dy * dy;
    const RealPoly eps1 = dx + kSqrt3 * dy + quad;
    const RealPoly eps2 = -dx + kSqrt3 * dy + quad;

    RealPoly H = 0.5 * (px * px + py * py) + y * px - (x + (0.5 - m) * one) * py;
    H -= (1.0 - m) * inverse_distance(eps1);
    H -= m * inverse_distance(eps2);
    H += energy_offset(mu) * one;
    return H;
}

/// Symmetric matrix S with H2 = z^T S z / 2.
inline Eigen::Matrix4d hessian_of_quadratic(const RealPoly& H)
{
    Eigen::Matrix4d S = Eigen::Matrix4d::Zero();
    for (const auto& [e, c] : H.terms()) {
        if (total_degree(e) != 2) continue;
        std::array<int, 2> idx{};
        int n = 0;
        for (int i = 0; i < 4; ++i)
            for (int k = 0; k < e[static_cast<std::size_t>(i)]; ++k) idx[static_cast<std::size_t>(n++)] = i;
        if (idx[0] == idx[1]) {
            S(idx[0], idx[0]) += 2.0 * c;
        } else {
            S(idx[0], idx[1]) += c;
            S(idx[1], idx[0]) += c;
        }
    }
    return S;
}

inline Eigen::Matrix4d symplectic_J()
{
    Eigen::Matrix4d J = Eigen::Matrix4d::Zero();
    J(0, 2) = J(1, 3) = 1.0;
    J(2, 0) = J(3, 1) = -1.0;
    return J;
}

struct LinearNormalization {
    /// Old variables z = M zeta.
    Matrix4 M{};
    RealPoly H2{2};
    Frequencies frequencies;
    /// +1 or -1 for the (Q1, P1) and (Q2, P2) pairs.
    std::array<int, 2> signature{};
    double symplectic_error = 0.0;
    double cross_term_error = 0.0;
};

/// Real symplectic M bringing the quadratic part of H to diagonal form, the
/// faster frequency in the first pair.
inline LinearNormalization linear_symplectic_normalize(const RealPoly& H)
{
    const Eigen::Matrix4d S = hessian_of_quadratic(H);
    const Eigen::Matrix4d J = symplectic_J();
    const Eigen::Matrix4d A = J * S;
    Eigen::EigenSolver<Eigen::Matrix4d> solver(A);
    require(solver.info() == Eigen::Success, ErrorCode::DefectiveSpectrum,
            "eigen decomposition failed");
    const auto values = solver.eigenvalues();
    const auto vectors = solver.eigenvectors();

    double scale = 0.0;
    for (int i = 0; i < 4; ++i) scale = std::max(scale, std::abs(values(i)));
    require(scale > 0.0, ErrorCode::DefectiveSpectrum, "vanishing quadratic part");
    std::vector<int> upper;
    for (int i = 0; i < 4; ++i) {
        require(std::abs(values(i).real()) <= 1e-9 * scale, ErrorCode::DefectiveSpectrum,
                "eigenvalue off the imaginary axis, L4 is not elliptic");
        if (values(i).imag() > 0.0) upper.push_back(i);
    }
    require(upper.size() == 2, ErrorCode::DefectiveSpectrum, "expected two frequencies");
    if (values(upper[0]).imag() < values(upper[1]).imag()) std::swap(upper[0], upper[1]);
    const double ws = values(upper[0]).imag(), wl = values(upper[1]).imag();
    require(ws - wl > 1e-8 * scale, ErrorCode::DefectiveSpectrum,
            "coincident frequencies, spectrum is defective");

    LinearNormalization out;
    out.frequencies = {ws, wl};
    Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
    for (int k = 0; k < 2; ++k) {
        const Eigen::Vector4cd v = vectors.col(upper[static_cast<std::size_t>(k)]);
        Eigen::Vector4d a = v.real(), b = v.imag();
        const double kappa = a.dot(J * b);
        require(std::abs(kappa) > 1e-14, ErrorCode::DefectiveSpectrum,
                "degenerate symplectic pairing");
        const int sigma = kappa > 0.0 ? 1 : -1;
        const double norm = 1.0 / std::sqrt(std::abs(kappa));
        M.col(k) = a * norm;
        M.col(k + 2) = sigma * b * norm;
        out.signature[static_cast<std::size_t>(k)] = sigma;
    }
    out.symplectic_error = (M.transpose() * J * M - J).cwiseAbs().maxCoeff();

    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out.M[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = M(i, j);
    out.H2 = substitute_linear(H.homogeneous_part(2).with_max_degree(2), out.M);
    const std::array<double, 2> w{ws, wl};
    for (const auto& [e, c] : out.H2.terms()) {
        bool diagonal = false;
        double expected = 0.0;
        for (std::size_t k = 0; k < 2; ++k) {
            if (e[k] == 2 || e[k + 2] == 2) {
                diagonal = true;
                expected = 0.5 * out.signature[k] * w[k];
            }
        }
        out.cross_term_error = std::max(out.cross_term_error,
                                        diagonal ? std::abs(c - expected) : std::abs(c));
    }
    return out;
}

/// Substitution matrix of the complexification (rows: Q1, Q2, P1, P2 in
/// terms of x1, x2, y1, y2).
inline std::array<std::array<std::complex<double>, 4>, 4> complexification_matrix()
{
    const double h = 1.0 / std::sqrt(2.0);
    const std::complex<double> r(h, 0.0), i(0.0, h), o(0.0, 0.0);
    return {{{r, o, i, o}, {o, r, o, i}, {i, o, r, o}, {o, i, o, r}}};
}

inline ComplexPoly complexify(const RealPoly& H)
{
    return substitute_linear(to_complex(H), complexification_matrix());
}

inline NfPoly to_work_precision(const RealPoly& p)
{
    return p.transform_coefficients<NfComplex>([](double c) { return NfComplex(c, 0.0); });
}

/// Linear substitution followed by complexification, in working precision.
inline NfPoly complexify_work(const RealPoly& H, const Matrix4& M)
{
    std::array<std::array<NfComplex, 4>, 4> Mw{};
    NfReal h = 1.0 / std::sqrt(2.0);
    for (int k = 0; k < 2; ++k) h = (h + NfReal(0.5) / h) / 2;
    const NfComplex r(h, 0.0L), i(0.0L, h), o(0.0L, 0.0L);
    const std::array<std::array<NfComplex, 4>, 4> Cw{{{r, o, i, o}, {o, r, o, i}, {i, o, r, o}, {o, i, o, r}}};
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) Mw[a][b] = NfComplex(M[a][b], 0.0L);
    return substitute_linear(substitute_linear(to_work_precision(H), Mw), Cw);
}

inline bool is_action_monomial(const Exponent& e) { return e[0] == e[2] && e[1] == e[3]; }

/// Normal form H(I_s, I_l) = sum c[j][k] I_s^j I_l^k.
struct NormalForm {
    static constexpr int kMaxActionDegree = 8;

    double mu = 0.0;
    double omega_s = 0.0;
    double omega_l = 0.0;
    /// Total degree in the canonical variables (action degree order / 2).
    int order = 0;
    std::array<std::array<double, kMaxActionDegree + 1>, kMaxActionDegree + 1> c{};
    /// Largest non-action or imaginary leftover of the normalization.
    double residual = 0.0;

    int action_degree() const { return order / 2; }

    double A() const { return 2.0 * c[2][0]; }
    double B() const { return c[1][1]; }
    double C() const { return 2.0 * c[0][2]; }

    /// Copy keeping action degree <= d.
    NormalForm truncated(int d) const
    {
        NormalForm out = *this;
        out.order = std::min(order, 2 * d);
        for (int j = 0; j <= kMaxActionDegree; ++j)
            for (int k = 0; k <= kMaxActionDegree; ++k)
                if (j + k > out.action_degree()) out.c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = 0.0;
        return out;
    }

    /// d^(a+b) H / dIs^a dIl^b.
    double derivative(double Is, double Il, int a, int b) const
    {
        double sum = 0.0;
        for (int j = a; j <= action_degree(); ++j) {
            for (int k = b; j + k <= action_degree(); ++k) {
                const double cjk = c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                if (cjk == 0.0) continue;
                double f = 1.0;
                for (int t = 0; t < a; ++t) f *= j - t;
                for (int t = 0; t < b; ++t) f *= k - t;
                sum += cjk * f * std::pow(Is, j - a) * std::pow(Il, k - b);
            }
        }
        return sum;
    }

    double H(double Is, double Il) const { return derivative(Is, Il, 0, 0); }
};

struct BirkhoffResult {
    NormalForm nf;
    /// Generators W_1 .. W_{order-2}; W_n has degree n + 2.
    std::vector<NfPoly> generators;
    /// H after linear normalization and complexification.
    NfPoly hamiltonian{8};
    LinearNormalization linear;
};

struct VerificationReport {
    double non_action_residual = 0.0;
    double imaginary_residue = 0.0;
    /// Largest coefficient difference against the supplied normal form.
    double coefficient_mismatch = 0.0;
    /// Non-action residual of degree d relative to the largest degree-d
    /// coefficient of H, indexed by degree.
    std::vector<double> relative_by_degree;
};

namespace detail {

inline double factorial(int n)
{
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

inline double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

constexpr double kPrune = 1e-14;

/// Deprit triangle for H = H2 + H3 + ... with N orders. When solve is set,
/// W_n is chosen at each order to remove the non-action part of K_{n+2};
/// otherwise the given generators are used as they are. Returns K_{n+2}
/// for n = 0..N.
template <class Solve>
std::vector<NfPoly> lie_triangle(const NfPoly& H, int N, std::vector<NfPoly>& gens, Solve&& solve)
{
    const int bound = H.max_degree();
    auto zero = [&] { return NfPoly(bound); };
    gens.resize(static_cast<std::size_t>(N), zero());
    std::vector<std::vector<NfPoly>> T(static_cast<std::size_t>(N + 1));
    for (auto& row : T) row.assign(static_cast<std::size_t>(N + 1), zero());
    auto at = [&](int n, int k) -> NfPoly& {
        return T[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
    };
    at(0, 0) = H.homogeneous_part(2);
    std::vector<NfPoly> K{at(0, 0)};
    for (int n = 1; n <= N; ++n) {
        at(n, 0) = H.homogeneous_part(n + 2) * NfComplex(factorial(n), 0.0L);
        for (int k = 1; k <= n; ++k) {
            const int i = n - k;
            NfPoly next = at(i + 1, k - 1);
            for (int j = 0; j <= i; ++j) {
                const NfPoly& g = gens[static_cast<std::size_t>(j)];
                if (g.empty()) continue;
                next += NfComplex(binomial(i, j), 0.0L) * poisson_bracket(at(i - j, k - 1), g);
            }
            // Row 0 is the output and stays unpruned so residuals are measured.
            if (i > 0) next.prune(kPrune);
            at(i, k) = std::move(next);
        }
        if (solve(n, at(0, n), gens[static_cast<std::size_t>(n - 1)])) {
            NfPoly delta = poisson_bracket(at(0, 0), gens[static_cast<std::size_t>(n - 1)]);
            for (int k = 1; k <= n; ++k) {
                at(n - k, k) += delta;
                if (n - k > 0) at(n - k, k).prune(kPrune);
            }
        }
        K.push_back(at(0, n) * NfComplex(1.0L / factorial(n), 0.0L));
    }
    return K;
}

/// (-i)^n, the factor turning (x y)^n into I^n.
inline NfComplex minus_i_power(int n)
{
    static const std::array<NfComplex, 4> table{NfComplex(1, 0), NfComplex(0, -1), NfComplex(-1, 0),
                                                NfComplex(0, 1)};
    return table[static_cast<std::size_t>(n % 4)];
}

/// Splits K into action coefficients and residual measures.
inline void collect_normal_form(const std::vector<NfPoly>& K, const NfPoly& H,
                                NormalForm& nf, VerificationReport& report)
{
    report.relative_by_degree.assign(static_cast<std::size_t>(H.max_degree() + 1), 0.0);
    for (const auto& Kd : K) {
        for (const auto& [e, coeff] : Kd.terms()) {
            const int d = total_degree(e);
            if (is_action_monomial(e)) {
                const int j = e[0], k = e[1];
                const NfComplex value = coeff * minus_i_power(j + k);
                nf.c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]
                    = static_cast<double>(value.real());
                report.imaginary_residue
                    = std::max(report.imaginary_residue, static_cast<double>(detail::nf_abs(value.imag())));
            } else {
                const double mag = detail::magnitude(coeff);
                report.non_action_residual = std::max(report.non_action_residual, mag);
                const double ref = H.max_abs(d);
                auto& slot = report.relative_by_degree[static_cast<std::size_t>(d)];
                slot = std::max(slot, ref > 0.0 ? mag / ref : mag);
            }
        }
    }
}

} // namespace detail

/// Normalizes the Taylor polynomial H (from taylor_at_l4) to the given even
/// degree. Throws ResonanceTooClose when a divisor |k1 w_s - k2 w_l| of a
/// monomial that must be removed falls below denom_floor.
inline BirkhoffResult birkhoff_normalize(const RealPoly& H, MassRatio mu, int degree = 8,
                                         double denom_floor = 1e-4)
{
    require_elliptic(mu);
    require(degree >= 2 && degree % 2 == 0 && degree <= 2 * NormalForm::kMaxActionDegree,
            ErrorCode::InvalidParameter, "normal form degree must be even, 2..16");
    require(degree <= H.max_degree(), ErrorCode::InvalidParameter,
            "normal form degree exceeds the Taylor degree");
    require(denom_floor > 0.0, ErrorCode::InvalidParameter, "denom_floor must be positive");

    BirkhoffResult out;
    out.linear = linear_symplectic_normalize(H);
    RealPoly body(degree);
    for (int d = 2; d <= degree; ++d) body += H.homogeneous_part(d).with_max_degree(degree);
    out.hamiltonian = complexify_work(body, out.linear.M).prune(detail::kPrune);

    // The divisors must be those of the quadratic part the triangle uses, so
    // H2 is replaced by its exact diagonal form; the dropped quadratic rounding
    // is bounded by linear.cross_term_error.
    const auto& sig = out.linear.signature;
    const std::array<NfReal, 2> nu{sig[0] * static_cast<NfReal>(out.linear.frequencies.omega_s),
                                   sig[1] * static_cast<NfReal>(out.linear.frequencies.omega_l)};
    const NfComplex I(0.0L, 1.0L);
    NfPoly H2(degree);
    H2.add_term({1, 0, 1, 0}, I * nu[0]);
    H2.add_term({0, 1, 0, 1}, I * nu[1]);
    out.hamiltonian -= out.hamiltonian.homogeneous_part(2);
    out.hamiltonian += H2;

    auto solve = [&](int, const NfPoly& R, NfPoly& W) {
        W = NfPoly(R.max_degree());
        for (const auto& [e, coeff] : R.terms()) {
            if (is_action_monomial(e)) continue;
            const int k1 = e[0] - e[2], k2 = e[1] - e[3];
            const NfReal div = nu[0] * k1 + nu[1] * k2;
            if (detail::nf_abs(div) < denom_floor) {
                char buf[160];
                std::snprintf(buf, sizeof buf,
                              "small divisor |k1 w_s - k2 w_l| = %.3e for (k1, k2) = (%d, %d) at "
                              "mu = %.9g",
                              static_cast<double>(detail::nf_abs(div)), k1, k2, mu.value());
                fail(ErrorCode::ResonanceTooClose, buf);
            }
            W.add_term(e, NfComplex(coeff.imag() / div, -coeff.real() / div));
        }
        return true;
    };
    const int N = degree - 2;
    const auto K = detail::lie_triangle(out.hamiltonian, N, out.generators, solve);

    NormalForm& nf = out.nf;
    nf.mu = mu.value();
    nf.omega_s = out.linear.frequencies.omega_s;
    nf.omega_l = out.linear.frequencies.omega_l;
    nf.order = degree;
    VerificationReport report;
    detail::collect_normal_form(K, out.hamiltonian, nf, report);
    nf.residual = std::max(report.non_action_residual, report.imaginary_residue);
    return out;
}

inline BirkhoffResult birkhoff_normalize(MassRatio mu, int degree = 8, double denom_floor = 1e-4)
{
    return birkhoff_normalize(taylor_at_l4(mu, degree), mu, degree, denom_floor);
}

inline NormalForm normal_form(MassRatio mu, int degree = 8, double denom_floor = 1e-4)
{
    return birkhoff_normalize(mu, degree, denom_floor).nf;
}

/// Pushes the complexified H through the generators and measures how far the
/// result is from a function of the actions.
inline VerificationReport nf_verify(const NfPoly& H, const NormalForm& nf,
                                    std::vector<NfPoly> generators)
{
    const int N = nf.order - 2;
    generators.resize(static_cast<std::size_t>(N), NfPoly(H.max_degree()));
    const auto K = detail::lie_triangle(H, N, generators,
                                        [](int, const NfPoly&, NfPoly&) { return false; });
    NormalForm check = nf;
    for (auto& row : check.c) row.fill(0.0);
    VerificationReport report;
    detail::collect_normal_form(K, H, check, report);
    for (std::size_t j = 0; j < check.c.size(); ++j)
        for (std::size_t k = 0; k < check.c.size(); ++k)
            report.coefficient_mismatch
                = std::max(report.coefficient_mismatch, std::abs(check.c[j][k] - nf.c[j][k]));
    return report;
}

inline VerificationReport nf_verify(const BirkhoffResult& r)
{
    return nf_verify(r.hamiltonian, r.nf, r.generators);
}

inline void require_actions(double Is, double Il)
{
    require(std::isfinite(Is) && std::isfinite(Il) && Is >= 0.0 && Il >= 0.0,
            ErrorCode::InvalidParameter, "actions must be finite and non-negative");
}

/// W = -(dH/dIl) / (dH/dIs).
inline double nf_rotation_number(const NormalForm& nf, double Is, double Il)
{
    require_actions(Is, Il);
    const double h1 = nf.derivative(Is, Il, 1, 0);
    require(h1 != 0.0, ErrorCode::DegenerateFrequency, "dH/dIs vanishes");
    return -nf.derivative(Is, Il, 0, 1) / h1;
}

/// C = H11 H2^2 + H22 H1^2 - 2 H12 H1 H2.
inline double nf_twist(const NormalForm& nf, double Is, double Il)
{
    require_actions(Is, Il);
    const double h1 = nf.derivative(Is, Il, 1, 0);
    const double h2 = nf.derivative(Is, Il, 0, 1);
    require(h1 != 0.0, ErrorCode::DegenerateFrequency, "dH/dIs vanishes");
    return nf.derivative(Is, Il, 2, 0) * h2 * h2 + nf.derivative(Is, Il, 0, 2) * h1 * h1
           - 2.0 * nf.derivative(Is, Il, 1, 1) * h1 * h2;
}

/// Smallest positive Is with H(Is, 0) = E.
inline double short_period_action(const NormalForm& nf, double E)
{
    require(std::isfinite(E) && E >= 0.0, ErrorCode::InvalidParameter, "E must be non-negative");
    if (E == 0.0) return 0.0;
    auto h = [&](double s) { return nf.H(s, 0.0) - E; };
    const double ds = 0.02 * E / nf.omega_s;
    double lo = 0.0, hi = 0.0;
    bool found = false;
    for (int i = 1; i <= 5000; ++i) {
        hi = i * ds;
        if (h(hi) >= 0.0) {
            found = true;
            break;
        }
        if (nf.derivative(hi, 0.0, 1, 0) <= 0.0) break;
        lo = hi;
    }
    require(found, ErrorCode::NoPositiveRoot,
            "H(Is, 0) = " + std::to_string(E) + " has no positive root");
    double s = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        const double f = h(s);
        if (f == 0.0) return s;
        (f > 0.0 ? hi : lo) = s;
        const double d = nf.derivative(s, 0.0, 1, 0);
        double next = d > 0.0 ? s - f / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - s) <= 1e-15 * std::max(1.0, s)) return next;
        s = next;
    }
    return s;
}

inline double short_period_W_of_E(const NormalForm& nf, double E)
{
    return nf_rotation_number(nf, short_period_action(nf, E), 0.0);
}

} // namespace l4twist
