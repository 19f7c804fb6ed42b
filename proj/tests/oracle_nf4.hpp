#pragma once

// Independent order-4 Birkhoff normal form at L4.
//
// Shares nothing with the library's polynomial or Lie-series code: the
// potential is expanded with Legendre polynomials, the linear part is put in
// complex diagonal form from eigenvectors of J S, and the degree-4 normal form
// is H4 + {H3, W3}/2 with {H2, W3} = -H3.

#include <array>
#include <cmath>
#include <complex>
#include <map>

#include <Eigen/Dense>

namespace oracle {

using real = long double;
using cplx = std::complex<real>;
using Mono = std::array<int, 4>;
using Poly = std::map<Mono, cplx>;

constexpr int kDegree = 4;

inline int degree(const Mono& m) { return m[0] + m[1] + m[2] + m[3]; }

inline void add_to(Poly& a, const Poly& b, cplx s = 1)
{
    for (const auto& [m, c] : b) a[m] += s * c;
}

inline Poly mul(const Poly& a, const Poly& b)
{
    Poly out;
    for (const auto& [ma, ca] : a)
        for (const auto& [mb, cb] : b) {
            Mono m{ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2], ma[3] + mb[3]};
            if (degree(m) <= kDegree) out[m] += ca * cb;
        }
    return out;
}

inline Poly constant(cplx c) { return Poly{{Mono{0, 0, 0, 0}, c}}; }

inline Poly deriv(const Poly& a, int v)
{
    Poly out;
    for (const auto& [m, c] : a) {
        if (m[v] == 0) continue;
        Mono n = m;
        --n[v];
        out[n] += c * static_cast<real>(m[v]);
    }
    return out;
}

/// Canonical pairs (q1, p1) = (0, 2), (q2, p2) = (1, 3).
inline Poly bracket(const Poly& f, const Poly& g)
{
    Poly out;
    for (int i = 0; i < 2; ++i) {
        add_to(out, mul(deriv(f, i), deriv(g, i + 2)));
        add_to(out, mul(deriv(f, i + 2), deriv(g, i)), -1);
    }
    return out;
}

/// Real Hamiltonian about L4 through degree 4, in the variables
/// (dx, dy, dpx, dpy) passed as polynomials.
inline Poly hamiltonian(real mu, const std::array<Poly, 4>& d)
{
    const Poly &dx = d[0], &dy = d[1], &dpx = d[2], &dpy = d[3];
    Poly H;
    add_to(H, mul(dpx, dpx), 0.5L);
    add_to(H, mul(dpy, dpy), 0.5L);
    add_to(H, mul(dy, dpx));
    add_to(H, mul(dx, dpy), -1);
    const real h = std::sqrt(3.0L) / 2;
    const std::array<std::array<real, 2>, 2> R{{{0.5L, h}, {-0.5L, h}}};
    const std::array<real, 2> mass{1 - mu, mu};
    const Poly s = [&] {
        Poly t = mul(dx, dx);
        add_to(t, mul(dy, dy));
        return t;
    }();
    for (int i = 0; i < 2; ++i) {
        Poly u;
        add_to(u, dx, -R[i][0]);
        add_to(u, dy, -R[i][1]);
        const Poly u2 = mul(u, u);
        Poly p2, p3, p4;
        add_to(p2, u2, 1.5L);
        add_to(p2, s, -0.5L);
        add_to(p3, mul(u2, u), 2.5L);
        add_to(p3, mul(u, s), -1.5L);
        add_to(p4, mul(u2, u2), 35.0L / 8);
        add_to(p4, mul(u2, s), -30.0L / 8);
        add_to(p4, mul(s, s), 3.0L / 8);
        add_to(H, p2, -mass[i]);
        add_to(H, p3, -mass[i]);
        add_to(H, p4, -mass[i]);
    }
    return H;
}

inline Poly variable(int v, cplx c = 1)
{
    Mono m{0, 0, 0, 0};
    m[v] = 1;
    return Poly{{m, c}};
}

struct Result {
    /// Coefficients of Is^j Il^k for j + k <= 2.
    std::array<std::array<real, 3>, 3> c{};
    real omega_s = 0, omega_l = 0;
    /// Largest imaginary part met among the action coefficients.
    real imaginary = 0;
    /// Largest off-diagonal leftover of the complex diagonal H2.
    real offdiagonal = 0;
};

inline Result normal_form4(real mu)
{
    using M4 = Eigen::Matrix<real, 4, 4>;
    using CM4 = Eigen::Matrix<cplx, 4, 4>;
    std::array<Poly, 4> real_vars{variable(0), variable(1), variable(2), variable(3)};
    const Poly Hreal = hamiltonian(mu, real_vars);

    M4 S = M4::Zero();
    for (const auto& [m, c] : Hreal) {
        if (degree(m) != 2) continue;
        int a = -1, b = -1;
        for (int v = 0; v < 4; ++v)
            for (int k = 0; k < m[v]; ++k) (a < 0 ? a : b) = v;
        if (a == b) {
            S(a, a) += 2 * c.real();
        } else {
            S(a, b) += c.real();
            S(b, a) += c.real();
        }
    }
    M4 J = M4::Zero();
    J(0, 2) = J(1, 3) = 1;
    J(2, 0) = J(3, 1) = -1;
    Eigen::EigenSolver<M4> es(J * S);
    std::array<int, 2> idx{-1, -1};
    std::array<real, 2> w{0, 0};
    for (int i = 0; i < 4; ++i) {
        const real im = es.eigenvalues()(i).imag();
        if (im <= 0) continue;
        if (idx[0] < 0 || im > w[0]) {
            idx[1] = idx[0];
            w[1] = w[0];
            idx[0] = i;
            w[0] = im;
        } else {
            idx[1] = i;
            w[1] = im;
        }
    }
    CM4 T;
    for (int k = 0; k < 2; ++k) {
        T.col(k) = es.eigenvectors().col(idx[k]);
        T.col(k + 2) = T.col(k).conjugate();
    }
    const CM4 Ti = T.inverse();
    const CM4 P = Ti * J.cast<cplx>() * Ti.transpose();
    std::array<cplx, 2> pi{P(0, 2), P(1, 3)};

    Result res;
    res.omega_s = w[0];
    res.omega_l = w[1];
    res.offdiagonal = std::max({std::abs(P(0, 1)), std::abs(P(0, 3)), std::abs(P(1, 2))});

    // x = sum_k q_k v_k + p_k pi_k conj(v_k)
    std::array<Poly, 4> lin;
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 2; ++k) {
            add_to(lin[i], variable(k, T(i, k)));
            add_to(lin[i], variable(k + 2, pi[k] * T(i, k + 2)));
        }
    const Poly H = hamiltonian(mu, lin);
    Poly H2, H3, H4;
    for (const auto& [m, c] : H) {
        if (degree(m) == 2) H2[m] = c;
        if (degree(m) == 3) H3[m] = c;
        if (degree(m) == 4) H4[m] = c;
    }
    const std::array<cplx, 2> nu{H2[Mono{1, 0, 1, 0}], H2[Mono{0, 1, 0, 1}]};
    for (const auto& [m, c] : H2)
        if (!(m == Mono{1, 0, 1, 0} || m == Mono{0, 1, 0, 1}))
            res.offdiagonal = std::max(res.offdiagonal, std::abs(c));

    Poly W3;
    for (const auto& [m, c] : H3) {
        const cplx div = nu[0] * static_cast<real>(m[2] - m[0]) + nu[1] * static_cast<real>(m[3] - m[1]);
        W3[m] = -c / div;
    }
    Poly K4 = H4;
    add_to(K4, bracket(H3, W3), 0.5L);

    // I_k = s_k i q_k p_k >= 0 on real points, so q_k p_k = -i s_k I_k.
    const std::array<real, 2> sgn{pi[0].imag() > 0 ? 1.0L : -1.0L, pi[1].imag() > 0 ? 1.0L : -1.0L};
    auto action_coeff = [&](cplx a, int j, int k) {
        cplx f = a;
        for (int n = 0; n < j; ++n) f *= cplx(0, -sgn[0]);
        for (int n = 0; n < k; ++n) f *= cplx(0, -sgn[1]);
        res.imaginary = std::max(res.imaginary, std::abs(f.imag()));
        return f.real();
    };
    res.c[1][0] = action_coeff(nu[0], 1, 0);
    res.c[0][1] = action_coeff(nu[1], 0, 1);
    for (const auto& [m, c] : K4) {
        if (m[0] != m[2] || m[1] != m[3]) continue;
        res.c[m[0]][m[1]] = action_coeff(c, m[0], m[1]);
    }
    return res;
}

} // namespace oracle
