#pragma once

// Truncated polynomials in four canonical variables ordered (q1, q2, p1, p2),
// graded by total degree.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "l4twist/errors.hpp"

namespace l4twist {

using Exponent = std::array<std::uint8_t, 4>;

inline int total_degree(const Exponent& e) { return e[0] + e[1] + e[2] + e[3]; }

inline Exponent operator+(const Exponent& a, const Exponent& b)
{
    return {static_cast<std::uint8_t>(a[0] + b[0]), static_cast<std::uint8_t>(a[1] + b[1]),
            static_cast<std::uint8_t>(a[2] + b[2]), static_cast<std::uint8_t>(a[3] + b[3])};
}

namespace detail {
template <class T>
double magnitude(const T& v)
{
    return std::abs(v);
}
} // namespace detail

/// Sparse polynomial with coefficients of type Scalar, truncated at max_degree.
/// Products and brackets drop terms above the bound; inserting such a term
/// directly is an error.
template <class Scalar>
class GradedPoly {
public:
    using Terms = std::map<Exponent, Scalar>;

    explicit GradedPoly(int max_degree = 8) : max_degree_(max_degree)
    {
        require(max_degree >= 0 && max_degree < 64, ErrorCode::InvalidParameter,
                "polynomial degree bound out of range");
    }

    static GradedPoly constant(Scalar c, int max_degree)
    {
        GradedPoly p(max_degree);
        p.add_term({0, 0, 0, 0}, c);
        return p;
    }

    static GradedPoly variable(int index, int max_degree, Scalar c = Scalar(1))
    {
        Exponent e{0, 0, 0, 0};
        e.at(static_cast<std::size_t>(index)) = 1;
        GradedPoly p(max_degree);
        p.add_term(e, c);
        return p;
    }

    int max_degree() const noexcept { return max_degree_; }
    const Terms& terms() const noexcept { return terms_; }
    std::size_t size() const noexcept { return terms_.size(); }
    bool empty() const noexcept { return terms_.empty(); }

    Scalar coefficient(const Exponent& e) const
    {
        const auto it = terms_.find(e);
        return it == terms_.end() ? Scalar(0) : it->second;
    }

    void add_term(const Exponent& e, Scalar c)
    {
        require(total_degree(e) <= max_degree_, ErrorCode::InvalidParameter,
                "term of degree " + std::to_string(total_degree(e)) + " exceeds bound "
                    + std::to_string(max_degree_));
        if (c == Scalar(0)) return;
        auto [it, inserted] = terms_.try_emplace(e, c);
        if (!inserted) {
            it->second += c;
            if (it->second == Scalar(0)) terms_.erase(it);
        }
    }

    /// Highest degree carrying a term, -1 for the zero polynomial.
    int degree() const
    {
        int d = -1;
        for (const auto& [e, c] : terms_) d = std::max(d, total_degree(e));
        return d;
    }

    GradedPoly homogeneous_part(int d) const
    {
        GradedPoly out(max_degree_);
        for (const auto& [e, c] : terms_)
            if (total_degree(e) == d) out.terms_.emplace(e, c);
        return out;
    }

    GradedPoly truncated(int d) const
    {
        GradedPoly out(std::min(d, max_degree_));
        for (const auto& [e, c] : terms_)
            if (total_degree(e) <= d) out.terms_.emplace(e, c);
        return out;
    }

    GradedPoly with_max_degree(int d) const
    {
        GradedPoly out = truncated(d);
        out.max_degree_ = d;
        return out;
    }

    double max_abs(int d) const
    {
        double m = 0.0;
        for (const auto& [e, c] : terms_)
            if (total_degree(e) == d) m = std::max(m, detail::magnitude(c));
        return m;
    }

    double max_abs() const
    {
        double m = 0.0;
        for (const auto& [e, c] : terms_) m = std::max(m, detail::magnitude(c));
        return m;
    }

    /// Drops coefficients below rel times the largest magnitude of the same degree.
    GradedPoly& prune(double rel = 1e-14)
    {
        std::array<double, 64> largest{};
        for (const auto& [e, c] : terms_) {
            const int d = total_degree(e);
            largest[d] = std::max(largest[d], detail::magnitude(c));
        }
        std::erase_if(terms_, [&](const auto& kv) {
            return detail::magnitude(kv.second) <= rel * largest[total_degree(kv.first)];
        });
        return *this;
    }

    GradedPoly& operator+=(const GradedPoly& o)
    {
        for (const auto& [e, c] : o.terms_) add_term(e, c);
        return *this;
    }

    GradedPoly& operator-=(const GradedPoly& o)
    {
        for (const auto& [e, c] : o.terms_) add_term(e, -c);
        return *this;
    }

    GradedPoly& operator*=(Scalar s)
    {
        if (s == Scalar(0)) {
            terms_.clear();
            return *this;
        }
        for (auto& [e, c] : terms_) c *= s;
        return *this;
    }

    friend GradedPoly operator+(GradedPoly a, const GradedPoly& b) { return a += b; }
    friend GradedPoly operator-(GradedPoly a, const GradedPoly& b) { return a -= b; }
    friend GradedPoly operator*(GradedPoly a, Scalar s) { return a *= s; }
    friend GradedPoly operator*(Scalar s, GradedPoly a) { return a *= s; }
    friend GradedPoly operator-(GradedPoly a) { return a *= Scalar(-1); }

    /// Truncated product; the bound is the smaller of the two operands'.
    friend GradedPoly operator*(const GradedPoly& a, const GradedPoly& b)
    {
        const int bound = std::min(a.max_degree_, b.max_degree_);
        GradedPoly out(bound);
        for (const auto& [ea, ca] : a.terms_) {
            const int da = total_degree(ea);
            if (da > bound) continue;
            for (const auto& [eb, cb] : b.terms_) {
                if (da + total_degree(eb) > bound) continue;
                out.add_term(ea + eb, ca * cb);
            }
        }
        return out;
    }

    GradedPoly derivative(int var) const
    {
        GradedPoly out(max_degree_);
        const auto v = static_cast<std::size_t>(var);
        for (const auto& [e, c] : terms_) {
            if (e[v] == 0) continue;
            Exponent f = e;
            --f[v];
            out.add_term(f, c * Scalar(static_cast<double>(e[v])));
        }
        return out;
    }

    template <class T>
    auto evaluate(const std::array<T, 4>& z) const
    {
        using R = std::common_type_t<Scalar, T>;
        R sum(0);
        for (const auto& [e, c] : terms_) {
            R term(c);
            for (std::size_t i = 0; i < 4; ++i)
                for (int k = 0; k < e[i]; ++k) term *= z[i];
            sum += term;
        }
        return sum;
    }

    template <class T, class Fn>
    GradedPoly<T> transform_coefficients(Fn&& fn) const
    {
        GradedPoly<T> out(max_degree_);
        for (const auto& [e, c] : terms_) out.add_term(e, fn(c));
        return out;
    }

private:
    int max_degree_;
    Terms terms_;
};

using RealPoly = GradedPoly<double>;
using ComplexPoly = GradedPoly<std::complex<double>>;
/// Complex-coefficient polynomial in four variables, the normal-form workhorse.
using GradedPoly4 = ComplexPoly;

inline ComplexPoly to_complex(const RealPoly& p)
{
    return p.transform_coefficients<std::complex<double>>(
        [](double c) { return std::complex<double>(c, 0.0); });
}

/// {f, g} = sum_i df/dq_i dg/dp_i - df/dp_i dg/dq_i for pairs (0,2) and (1,3).
template <class Scalar>
GradedPoly<Scalar> poisson_bracket(const GradedPoly<Scalar>& f, const GradedPoly<Scalar>& g)
{
    GradedPoly<Scalar> out(std::min(f.max_degree(), g.max_degree()));
    for (int i = 0; i < 2; ++i) {
        out += f.derivative(i) * g.derivative(i + 2);
        out -= f.derivative(i + 2) * g.derivative(i);
    }
    return out;
}

/// f(L z): variable i of f is replaced by sum_j L[i][j] z_j.
template <class Scalar>
GradedPoly<Scalar> substitute_linear(const GradedPoly<Scalar>& f,
                                     const std::array<std::array<Scalar, 4>, 4>& L)
{
    const int bound = f.max_degree();
    std::array<GradedPoly<Scalar>, 4> image{GradedPoly<Scalar>(bound), GradedPoly<Scalar>(bound),
                                            GradedPoly<Scalar>(bound), GradedPoly<Scalar>(bound)};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            image[static_cast<std::size_t>(i)] += GradedPoly<Scalar>::variable(
                j, bound, L[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    // powers[i][k] = image_i^k
    std::array<std::vector<GradedPoly<Scalar>>, 4> powers;
    for (std::size_t i = 0; i < 4; ++i) {
        powers[i].push_back(GradedPoly<Scalar>::constant(Scalar(1), bound));
        for (int k = 1; k <= bound; ++k) powers[i].push_back(powers[i].back() * image[i]);
    }
    GradedPoly<Scalar> out(bound);
    for (const auto& [e, c] : f.terms()) {
        GradedPoly<Scalar> term = GradedPoly<Scalar>::constant(c, bound);
        for (std::size_t i = 0; i < 4; ++i)
            if (e[i] > 0) term = term * powers[i][e[i]];
        out += term;
    }
    return out;
}

} // namespace l4twist
