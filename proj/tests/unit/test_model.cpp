#include "gddm/model.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace gddm;

namespace {

StageSchedule example_piecewise_drift()
{
    return StageSchedule::make({0, 1, 2.5, 3.5, 4, 5}, {1, -0.2, 1.5, 0.5, -1}, {1, 1, 1, 1, 1},
                               {1.5, 1.2, 0.75, 0.45, 0.3, 0.0},
                               {-1.5, -1.2, -0.75, -0.45, -0.3, 0.0},
                               InitialCondition::point(-0.5));
}

bool has_message(const std::vector<Violation>& v, const std::string& text)
{
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.message == text; });
}

}  // namespace

TEST(Boundary, InterpolatesAndExtends)
{
    const Boundary b({0.0, 1.0, 3.0}, {2.0, 1.0, 2.0});
    EXPECT_DOUBLE_EQ(b(0.5), 1.5);
    EXPECT_DOUBLE_EQ(b(2.0), 1.5);
    EXPECT_DOUBLE_EQ(b(4.0), 2.5);
    EXPECT_DOUBLE_EQ(b.slope(1), 0.5);
    EXPECT_EQ(b.segment_count(), 2u);
    EXPECT_THROW(Boundary({0.0, 0.0}, {1.0, 1.0}), ValidationError);
    EXPECT_THROW(Boundary({0.5, 1.0}, {1.0, 1.0}), ValidationError);
    EXPECT_THROW(Boundary({0.0, 1.0}, {1.0}), ValidationError);
}

TEST(Schedule, CollapsingPiecewiseDriftExampleIsValid)
{
    EXPECT_TRUE(validate_schedule(example_piecewise_drift()).empty());
}

TEST(Schedule, CrossingBoundariesAreReported)
{
    const auto s = StageSchedule::make({0, 1.5}, {0}, {1}, {1, -0.5}, {-1, 0.5},
                                       InitialCondition::point(0));
    const auto v = validate_schedule(s);
    ASSERT_TRUE(has_message(v, "boundaries cross before T_end"));
    EXPECT_EQ(v.front().stage, std::optional<std::size_t>(0));
    EXPECT_THROW(require_valid(s), ValidationError);
}

TEST(Schedule, InitialMassOnBoundaryIsReported)
{
    const auto s = StageSchedule::make({0, 1}, {0}, {1}, {1, 1}, {-1, -1},
                                       InitialCondition::point(1.0));
    EXPECT_TRUE(has_message(validate_schedule(s), "initial mass on boundary"));
}

TEST(Schedule, OtherInitialViolations)
{
    auto base = [](InitialCondition ic) {
        return StageSchedule::make({0, 1}, {0}, {1}, {1, 1}, {-1, -1}, std::move(ic));
    };
    EXPECT_TRUE(has_message(validate_schedule(base(InitialCondition::point(3.0))),
                            "initial mass outside the boundary gap"));
    EXPECT_TRUE(has_message(
        validate_schedule(base(InitialCondition::discrete({-0.5, 0.5}, {0.7, 0.6}))),
        "initial mass exceeds one"));
    EXPECT_TRUE(has_message(
        validate_schedule(base(InitialCondition::continuous(ContinuousDensity::uniform(-2, 0.5)))),
        "initial density support exceeds the boundary gap"));
    // Sub-probability initial conditions are allowed.
    EXPECT_TRUE(validate_schedule(base(InitialCondition::discrete({-0.5, 0.5}, {0.2, 0.3}))).empty());
}

TEST(Schedule, NonPositiveDiffusionNamesTheStage)
{
    const auto s = StageSchedule::make({0, 1, 2}, {0, 0}, {1, 0}, {1, 1, 1}, {-1, -1, -1},
                                       InitialCondition::point(0));
    const auto v = validate_schedule(s);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].stage, std::optional<std::size_t>(1));
    EXPECT_NE(describe(v).find("stage 1"), std::string::npos);
}

TEST(Schedule, StagesFollowTheBreakpointConvention)
{
    const auto s = example_piecewise_drift();
    EXPECT_EQ(s.stage_index(0.0), 0u);
    EXPECT_EQ(s.stage_index(1.0), 0u);  // (t_k, t_{k+1}]
    EXPECT_EQ(s.stage_index(1.0000001), 1u);
    EXPECT_EQ(s.stage_index(5.0), 4u);
    const LinearStage st = s.stage(1);
    EXPECT_DOUBLE_EQ(st.drift, -0.2);
    EXPECT_DOUBLE_EQ(st.duration, 1.5);
    EXPECT_DOUBLE_EQ(st.upper_slope, -0.3);
    EXPECT_DOUBLE_EQ(st.upper_end(), 0.75);
}

TEST(Schedule, TruncationKeepsBreakpointValues)
{
    const auto s = example_piecewise_drift();
    const auto t = s.truncated(3.0);
    ASSERT_EQ(t.breakpoints, (std::vector<double>{0, 1, 2.5, 3.0}));
    EXPECT_EQ(t.mu, (std::vector<double>{1, -0.2, 1.5}));
    EXPECT_DOUBLE_EQ(t.upper.values().back(), 0.6);
    const auto same = s.truncated(4.0);
    EXPECT_EQ(same.upper.values()[4], 0.3);
    EXPECT_THROW(s.truncated(6.0), ValidationError);
}

TEST(Schedule, MergeOntoCommonGrid)
{
    const PiecewiseConstant drift{{0, 1, 2}, {1.0, -1.0}};
    const PiecewiseConstant diffusion{{0, 0.5, 2}, {1.0, 2.0}};
    const Boundary upper({0, 2}, {2, 1});
    const Boundary lower({0, 1.5, 2}, {-2, -1.5, -1});
    const auto s = merge_onto_common_grid(drift, diffusion, upper, lower,
                                          InitialCondition::point(0));
    EXPECT_EQ(s.breakpoints, (std::vector<double>{0, 0.5, 1, 1.5, 2}));
    EXPECT_EQ(s.mu, (std::vector<double>{1, 1, -1, -1}));
    EXPECT_EQ(s.sigma, (std::vector<double>{1, 2, 2, 2}));
    EXPECT_DOUBLE_EQ(s.upper(1.5), 1.25);
    EXPECT_DOUBLE_EQ(s.lower(1.5), -1.5);
    EXPECT_TRUE(validate_schedule(s).empty());
}

TEST(InitialCondition, MassesAndDensities)
{
    EXPECT_DOUBLE_EQ(InitialCondition::point(0.3).total_mass(), 1.0);
    const auto mix = InitialCondition::mixture({0.1}, {0.25}, ContinuousDensity::uniform(-1, 1, 0.5));
    EXPECT_DOUBLE_EQ(mix.total_mass(), 0.75);
    const auto beta = ContinuousDensity::beta(10, 25);
    // Beta(10, 25) density at its mode (9/33), reference from the closed form.
    EXPECT_NEAR(beta.pdf(9.0 / 33.0), 5.2479328698, 1e-9);
    EXPECT_EQ(beta.pdf(-0.1), 0.0);
    EXPECT_THROW(ContinuousDensity::beta(-1, 2), ValidationError);
    EXPECT_THROW(InitialCondition::discrete({0.0, 1.0}, {1.0}), ValidationError);
}

TEST(BoundaryLabel, ParsesAndPrints)
{
    EXPECT_EQ(parse_boundary_label("upper"), BoundaryLabel::upper);
    EXPECT_EQ(to_string(BoundaryLabel::lower), "lower");
    EXPECT_THROW(parse_boundary_label("middle"), ValidationError);
}
