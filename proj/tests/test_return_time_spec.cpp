#include <gtest/gtest.h>

#include <cmath>

#include "towerlab/return_time_spec.hpp"

using namespace towerlab;

TEST(ReturnTimeSpec, RejectsBadProbabilities)
{
    EXPECT_THROW(ReturnTimeSpec({{1, 0.5, 1}, {2, 0.4, 2}}, 0.5, 0.5), ParameterError);
    EXPECT_THROW(ReturnTimeSpec({{1, 1.0, 1}, {2, 0.0, 2}}, 0.5, 0.5), ParameterError);
    EXPECT_THROW(ReturnTimeSpec({{1, -0.5, 1}, {2, 1.5, 2}}, 0.5, 0.5), ParameterError);
    EXPECT_THROW(ReturnTimeSpec({}, 0.5, 0.5), ParameterError);
}

TEST(ReturnTimeSpec, RejectsBadReturnTimesAndBetas)
{
    EXPECT_THROW(ReturnTimeSpec({{1, 1.0, 0}}, 0.5, 0.5), ParameterError);
    EXPECT_THROW(ReturnTimeSpec({{1, 1.0, 1}}, 1.0, 0.5), ParameterError);
    EXPECT_THROW(ReturnTimeSpec({{1, 1.0, 1}}, 0.5, 0.0), ParameterError);
    EXPECT_THROW(ReturnTimeSpec({{1, 0.5, 1}, {1, 0.5, 2}}, 0.5, 0.5), ParameterError);
    EXPECT_THROW(ReturnTimeSpec({{0, 1.0, 1}}, 0.5, 0.5), ParameterError);
}

TEST(ReturnTimeSpec, AcceptsSumWithinTolerance)
{
    EXPECT_NO_THROW(ReturnTimeSpec({{1, 0.5 + 4e-13, 1}, {2, 0.5, 2}}, 0.5, 0.5));
}

TEST(ReturnTimeSpec, LeftEndpointsAreCumulative)
{
    ReturnTimeSpec s({{3, 0.25, 1}, {1, 0.5, 2}, {7, 0.25, 4}}, 0.5, 0.5);
    EXPECT_DOUBLE_EQ(s.left_endpoint(3), 0.0);
    EXPECT_DOUBLE_EQ(s.left_endpoint(1), 0.25);
    EXPECT_DOUBLE_EQ(s.left_endpoint(7), 0.75);
    EXPECT_DOUBLE_EQ(s.mean_return_time(), 0.25 + 1.0 + 1.0);
    EXPECT_EQ(s.max_return_time(), 4u);
    EXPECT_THROW(s.return_time(2), InvalidPoint);
}

TEST(ReturnTimeSpec, TextRoundTrip)
{
    const auto s = polynomial_spec(3.0, 40);
    const auto t = parse_spec(to_text(s));
    EXPECT_TRUE(s == t);
}

TEST(ReturnTimeSpec, ParseErrorsCarryLine)
{
    try {
        parse_spec("0.5 0.5\n1 0.5 1\n2 oops 2\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(parse_spec(""), ParseError);
    EXPECT_THROW(parse_spec("0.5 0.5\n1 1.0 1 9\n"), ParseError);
    EXPECT_THROW(parse_spec("0.5 0.5\n1 0.7 1\n"), ParseError);
}

TEST(ReturnTimeSpec, CommentsAndBlankLines)
{
    const auto s = parse_spec("# header\n0.5 0.25\n\n1 0.5 1 # first\n2 0.5 3\n");
    EXPECT_EQ(s.size(), 2u);
    EXPECT_DOUBLE_EQ(s.beta_s(), 0.25);
    EXPECT_EQ(s.return_time(2), 3u);
}

TEST(ReturnTimeSpec, GeometricFamilyFoldsTail)
{
    const auto s = geometric_spec(30);
    double total = 0.0;
    for (const auto& b : s.branches())
        total += b.p;
    EXPECT_NEAR(total, 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(s.probability(30), std::ldexp(1.0, -29));
    EXPECT_DOUBLE_EQ(s.truncation_mass(), std::ldexp(1.0, -30));
}

TEST(ReturnTimeSpec, PolynomialFamilyFoldsTail)
{
    const auto s = polynomial_spec(2.0, 100);
    EXPECT_DOUBLE_EQ(s.probability(100), 1e-4);
    EXPECT_DOUBLE_EQ(s.probability(1), 1.0 - 0.25);
}

TEST(DiscreteSampler, InverseCdf)
{
    const std::vector<double> w{1.0, 3.0};
    DiscreteSampler d({5, 9}, w);
    EXPECT_EQ(d.draw(0.0), 5u);
    EXPECT_EQ(d.draw(0.2499), 5u);
    EXPECT_EQ(d.draw(0.25), 9u);
    EXPECT_EQ(d.draw(0.9999999), 9u);
}
