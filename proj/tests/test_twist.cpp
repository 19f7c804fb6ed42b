#include <cmath>

#include <gtest/gtest.h>

#include "l4twist/twist.hpp"

using namespace l4twist;

namespace {

const Rational kQuarter{1, 4}, kThird{1, 3};

} // namespace

TEST(Rational, Parse)
{
    EXPECT_EQ(parse_rational("2/7"), (Rational{2, 7}));
    EXPECT_EQ(parse_rational("3/10").str(), "3/10");
    for (const char* bad : {"2/4", "7/2", "0/3", "x/3", "2/", "2", "2/7 ", "-1/3"}) {
        try {
            parse_rational(bad);
            FAIL() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidParameter) << bad;
        }
    }
}

TEST(Rational, FareyBetweenQuarterAndThird)
{
    EXPECT_EQ(farey_between(kQuarter, kThird, 1), (std::vector<Rational>{{2, 7}}));
    EXPECT_EQ(farey_between(kQuarter, kThird, 2), (std::vector<Rational>{{3, 11}, {2, 7}, {3, 10}}));
    const auto d3 = farey_between(kQuarter, kThird, 3);
    ASSERT_EQ(d3.size(), 7u);
    EXPECT_EQ(d3.front(), (Rational{4, 15}));
    EXPECT_EQ(d3.back(), (Rational{4, 13}));
    for (std::size_t i = 1; i < d3.size(); ++i) EXPECT_LT(d3[i - 1].value(), d3[i].value());
}

TEST(Twistless, CriticalMassRatio)
{
    const double mc = critical_mass_ratio();
    EXPECT_NEAR(mc, 0.01091, 1e-4);
    // C(0, 0) vanishes there.
    EXPECT_NEAR(nf_twist(normal_form(MassRatio(mc)), 0.0, 0.0) / nf_twist(normal_form(MassRatio(0.01)), 0.0, 0.0),
                0.0, 1e-4);
}

TEST(Twistless, VerticesLieOnTangency)
{
    for (double mu : {0.0086, 0.009165, 0.009723, 0.0104}) {
        const NormalForm nf = normal_form(MassRatio(mu));
        const TwistCurve curve = twistless_curve(nf);
        ASSERT_GT(curve.size(), 10u) << mu;
        for (const auto& b : curve.branches)
            for (const auto& v : b) {
                EXPECT_LT(std::abs(v.C), 1e-10) << mu;
                EXPECT_LT(std::abs(tangency_defect(nf, v.Is, v.Il)), 1e-8) << mu;
                EXPECT_TRUE(curve.cap.contains(v.Is, v.Il));
                EXPECT_NEAR(v.H, nf.H(v.Is, v.Il), 1e-14);
            }
    }
}

TEST(Twistless, ApproachesOriginBelowCritical)
{
    // The curve reaches the origin as mu rises to mu_c and leaves it above.
    const double mc = critical_mass_ratio();
    double prev = INFINITY;
    for (double mu : {0.009165, 0.0097, 0.0104, mc - 1e-4}) {
        const double d = twistless_distance_to_origin(twistless_curve(normal_form(MassRatio(mu))));
        EXPECT_LT(d, prev) << mu;
        prev = d;
    }
    EXPECT_LT(prev, 1e-4);
    const TwistCurve below = twistless_curve(normal_form(MassRatio(mc - 1e-4)));
    EXPECT_TRUE(has_near_origin_branch(below));
    const TwistCurve above = twistless_curve(normal_form(MassRatio(mc + 3e-4)));
    EXPECT_FALSE(has_near_origin_branch(above));
    EXPECT_GT(twistless_distance_to_origin(above), 1e-3);
}

TEST(Chart, OriginRotationNumber)
{
    const MassRatio mu(0.0097);
    const NormalForm nf = normal_form(mu);
    ChartGrid g;
    g.n_Is = 11;
    g.n_Il = 11;
    const ActionChart chart = action_action_chart(nf, g);
    ASSERT_EQ(chart.cells.size(), 121u);
    EXPECT_NEAR(chart.cells.front().W * frequencies(mu).ratio(), 1.0, 1e-12);
    EXPECT_EQ(chart.cells.front().H, 0.0);
    bool has_H = false, has_W = false;
    for (const auto& l : chart.isolines) {
        has_H = has_H || l.field == "H";
        has_W = has_W || (l.field == "W" && l.label == "2/7");
    }
    EXPECT_TRUE(has_H);
    EXPECT_TRUE(has_W);
    EXPECT_TRUE(chart.has_twistless);
}

TEST(Chart, TwoCrossingsOfReconnectingRotationNumber)
{
    // Near the reconnection mass ratio for p/q at E = 0.02 the energy line
    // meets W = p/q twice, with the twistless curve in between.
    const double E = 0.02;
    for (auto [mu, r] : {std::pair{0.009165, Rational{2, 7}}, std::pair{0.009723, Rational{3, 10}}}) {
        const NormalForm nf = normal_form(MassRatio(mu));
        const TwistCurve curve = twistless_curve(nf);
        const auto xs = rotation_energy_crossings(nf, E, r.value(), curve.cap);
        ASSERT_EQ(xs.size(), 2u) << mu;
        const auto tw = twistless_energy_crossings(nf, curve, E, kQuarter, kThird);
        ASSERT_EQ(tw.size(), 1u) << mu;
        EXPECT_GT(tw[0].Il, xs[0].Il);
        EXPECT_LT(tw[0].Il, xs[1].Il);
        // The extremum of W on the energy line sits beyond p/q.
        EXPECT_GT(nf_W_on_energy(nf, E, tw[0].Il), r.value());
    }
}

TEST(Chart, NoWindowedTwistlessCrossingAboveCritical)
{
    const NormalForm nf = normal_form(MassRatio(0.011283));
    try {
        const TwistCurve curve = twistless_curve(nf);
        EXPECT_TRUE(twistless_energy_crossings(nf, curve, 0.02, kQuarter, kThird).empty());
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoTwistlessCurve);
    }
}

TEST(Chart, NearOriginBranchBetweenResonances)
{
    const TwistCurve curve = twistless_curve(normal_form(MassRatio(0.0104)));
    EXPECT_TRUE(has_near_origin_branch(curve));
    const TwistCurve far = twistless_curve(normal_form(MassRatio(0.009165)));
    EXPECT_FALSE(has_near_origin_branch(far));
}

TEST(Locus, MonotoneAndOrdered)
{
    const auto mus = linspace(0.0088, 0.0105, 8);
    const auto a = reconnection_locus_nf({2, 7}, mus);
    const auto b = reconnection_locus_nf({3, 10}, mus);
    for (const auto* locus : {&a, &b}) {
        ASSERT_GE(locus->points.size(), 3u);
        for (std::size_t i = 1; i < locus->points.size(); ++i) {
            EXPECT_GT(locus->points[i].mu, locus->points[i - 1].mu);
            EXPECT_LT(locus->points[i].E, locus->points[i - 1].E) << locus->rational.str();
        }
        for (const auto& p : locus->points) EXPECT_GT(p.E, 0.0);
    }
    const double m27 = reconnection_mu_nf({2, 7}, 0.02, 0.0085, 0.0095);
    const double m310 = reconnection_mu_nf({3, 10}, 0.02, 0.0092, 0.0102);
    EXPECT_NEAR(m27, 0.0091547, 5e-6);
    EXPECT_NEAR(m310, 0.0096642, 5e-6);
    EXPECT_GT(m310, m27);
}

TEST(Locus, InvalidBracket)
{
    EXPECT_THROW(reconnection_mu_nf({2, 7}, 0.02, 0.0092, 0.0095), Error);
    EXPECT_THROW(linspace(0.0, 1.0, 0), Error);
}
