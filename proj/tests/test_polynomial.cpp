#include <array>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "l4twist/polynomial.hpp"

using namespace l4twist;

namespace {

std::mt19937_64 rng(99);

RealPoly random_poly(int degree, int bound)
{
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    RealPoly p(bound);
    for (int a = 0; a <= degree; ++a)
        for (int b = 0; a + b <= degree; ++b)
            for (int c = 0; a + b + c <= degree; ++c)
                for (int d = 0; a + b + c + d <= degree; ++d)
                    if (U(rng) > 0.3)
                        p.add_term({static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b),
                                    static_cast<std::uint8_t>(c), static_cast<std::uint8_t>(d)},
                                   U(rng));
    return p;
}

std::array<double, 4> random_point()
{
    std::uniform_real_distribution<double> U(-0.7, 0.7);
    return {U(rng), U(rng), U(rng), U(rng)};
}

} // namespace

TEST(Polynomial, ProductEvaluatesAsProduct)
{
    for (int i = 0; i < 20; ++i) {
        const RealPoly f = random_poly(3, 8), g = random_poly(4, 8);
        const RealPoly h = f * g;
        const auto z = random_point();
        EXPECT_NEAR(h.evaluate(z), f.evaluate(z) * g.evaluate(z), 1e-12);
    }
}

TEST(Polynomial, ProductTruncatesAtBound)
{
    const RealPoly f = random_poly(3, 4), g = random_poly(3, 4);
    const RealPoly h = f * g;
    EXPECT_LE(h.degree(), 4);
    const RealPoly full = f.with_max_degree(6) * g.with_max_degree(6);
    const auto z = random_point();
    EXPECT_NEAR(h.evaluate(z), full.truncated(4).evaluate(z), 1e-12);
}

TEST(Polynomial, InsertingAboveBoundFails)
{
    RealPoly p(2);
    EXPECT_THROW(p.add_term({3, 0, 0, 0}, 1.0), Error);
    RealPoly q(4);
    q.add_term({3, 0, 0, 0}, 1.0);
    EXPECT_THROW(p += q, Error);
}

TEST(Polynomial, DerivativeMatchesFiniteDifference)
{
    const RealPoly f = random_poly(5, 8);
    const auto z = random_point();
    for (int v = 0; v < 4; ++v) {
        auto zp = z, zm = z;
        zp[static_cast<std::size_t>(v)] += 1e-6;
        zm[static_cast<std::size_t>(v)] -= 1e-6;
        EXPECT_NEAR(f.derivative(v).evaluate(z), (f.evaluate(zp) - f.evaluate(zm)) / 2e-6, 1e-7);
    }
}

TEST(Polynomial, HomogeneousPartsSumToWhole)
{
    const RealPoly f = random_poly(5, 8);
    RealPoly sum(8);
    for (int d = 0; d <= 5; ++d) sum += f.homogeneous_part(d);
    const auto z = random_point();
    EXPECT_NEAR(sum.evaluate(z), f.evaluate(z), 1e-13);
}

TEST(PoissonBracket, CanonicalPairs)
{
    const int N = 4;
    const RealPoly q1 = RealPoly::variable(0, N), q2 = RealPoly::variable(1, N);
    const RealPoly p1 = RealPoly::variable(2, N), p2 = RealPoly::variable(3, N);
    EXPECT_NEAR(poisson_bracket(q1, p1).coefficient({0, 0, 0, 0}), 1.0, 0);
    EXPECT_NEAR(poisson_bracket(q2, p2).coefficient({0, 0, 0, 0}), 1.0, 0);
    EXPECT_EQ(poisson_bracket(q1, p2).max_abs(), 0.0);
    EXPECT_EQ(poisson_bracket(q1, q2).max_abs(), 0.0);
}

TEST(PoissonBracket, AntisymmetryAndJacobi)
{
    const RealPoly f = random_poly(3, 9), g = random_poly(3, 9), h = random_poly(3, 9);
    const auto z = random_point();
    EXPECT_NEAR(poisson_bracket(f, g).evaluate(z), -poisson_bracket(g, f).evaluate(z), 1e-12);
    const double jac = poisson_bracket(f, poisson_bracket(g, h)).evaluate(z)
                       + poisson_bracket(g, poisson_bracket(h, f)).evaluate(z)
                       + poisson_bracket(h, poisson_bracket(f, g)).evaluate(z);
    EXPECT_NEAR(jac, 0.0, 1e-10);
}

TEST(PoissonBracket, LeibnizRule)
{
    const RealPoly f = random_poly(2, 8), g = random_poly(2, 8), h = random_poly(2, 8);
    const auto z = random_point();
    EXPECT_NEAR(poisson_bracket(f, g * h).evaluate(z),
                (poisson_bracket(f, g) * h + g * poisson_bracket(f, h)).evaluate(z), 1e-12);
}

TEST(Polynomial, LinearSubstitution)
{
    const RealPoly f = random_poly(4, 6);
    std::array<std::array<double, 4>, 4> L{};
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (auto& row : L)
        for (auto& v : row) v = U(rng);
    const RealPoly g = substitute_linear(f, L);
    const auto z = random_point();
    std::array<double, 4> x{};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) x[i] += L[i][j] * z[j];
    EXPECT_NEAR(g.evaluate(z), f.evaluate(x), 1e-12);
}

TEST(Polynomial, ComplexConversion)
{
    const RealPoly f = random_poly(3, 5);
    const ComplexPoly g = to_complex(f);
    const auto z = random_point();
    const std::array<std::complex<double>, 4> zc{z[0], z[1], z[2], z[3]};
    EXPECT_NEAR(std::abs(g.evaluate(zc) - f.evaluate(z)), 0.0, 1e-14);
}
