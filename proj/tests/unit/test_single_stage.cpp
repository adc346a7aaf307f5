#include "gddm/single_stage.hpp"

#include "gddm/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace gddm;

namespace {

constexpr long double kPiL = 3.141592653589793238462643383279502884L;

// Classical method of images for Brownian motion with drift mu started at 0
// between constant barriers a1 > 0 > a2, summed in long double.
long double images_upper_fptd(long double t, long double mu, long double a1, long double a2)
{
    const long double c = a1 - a2;
    long double s = 0.0L;
    for (int n = -200; n <= 200; ++n) {
        const long double x = a1 + 2.0L * n * c;
        s += x / std::sqrt(2.0L * kPiL * t * t * t) * std::exp(-x * x / (2.0L * t));
    }
    return s * std::exp(mu * a1 - mu * mu * t / 2.0L);
}

long double images_npd(long double x, long double T, long double mu, long double a1,
                       long double a2)
{
    const long double c = a1 - a2;
    auto phi = [&](long double z) {
        return std::exp(-z * z / (2.0L * T)) / std::sqrt(2.0L * kPiL * T);
    };
    long double s = 0.0L;
    for (int n = -200; n <= 200; ++n) s += phi(x - 2.0L * n * c) - phi(x - 2.0L * a1 - 2.0L * n * c);
    return s * std::exp(mu * x - mu * mu * T / 2.0L);
}

// Parallel boundaries with common slope b reduce to constant barriers with
// drift mu - b in the moving frame x - b t.
CanonicalStageParams parallel(double mu, double a1, double a2, double b, double T)
{
    return {mu, a1, b, a2, b, T};
}

double total_mass(const CanonicalStageParams& p, int order = 400)
{
    // First-passage mass on both boundaries plus the non-passage mass.
    const QuadratureRule& rule = gauss_legendre(order);
    const int panels = 40;
    double fu = 0.0, fl = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double lo = p.T * k / panels, hi = p.T * (k + 1) / panels;
        fu += integrate(rule, lo, hi, [&](double t) { return fptd_upper_basic(t, p); });
        fl += integrate(rule, lo, hi, [&](double t) { return fptd_lower_basic(t, p); });
    }
    const double lower = p.lower_at(p.T), upper = p.upper_at(p.T);
    double q = 0.0;
    if (upper > lower) q = integrate(rule, lower, upper, [&](double x) { return npd_basic(x, p); });
    return fu + fl + q;
}

}  // namespace

TEST(SingleStage, FarBarrierMatchesInverseGaussian)
{
    // The lower barrier is far enough away to be irrelevant.
    const double mu = 0.8, a = 1.0;
    const CanonicalStageParams p{mu, a, 0.0, -60.0, 0.0, 10.0};
    for (double t : {0.1, 0.5, 1.0, 2.0}) {
        const double ig = a / std::sqrt(2.0 * std::numbers::pi * t * t * t) *
                          std::exp(-(a - mu * t) * (a - mu * t) / (2.0 * t));
        EXPECT_NEAR(fptd_upper_basic(t, p) / ig, 1.0, 1e-12) << "t = " << t;
    }
}

TEST(SingleStage, UpperDensityMatchesImageSumAcrossRegimes)
{
    // Small t uses the direct series and large t the dual; both must agree
    // with the brute-force image sum.
    for (double slope : {0.0, 0.4, -0.7}) {
        const double mu = 0.3, a1 = 0.7, a2 = -1.1, T = 8.0;
        const CanonicalStageParams p = parallel(mu, a1, a2, slope, T);
        for (double t : {0.01, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0}) {
            const double expected = double(images_upper_fptd(t, mu - slope, a1, a2));
            EXPECT_NEAR(fptd_upper_basic(t, p), expected, 1e-13 + 1e-11 * expected)
                << "slope " << slope << " t " << t;
        }
    }
}

TEST(SingleStage, NonPassageDensityMatchesImageSumAcrossRegimes)
{
    for (double slope : {0.0, 0.25}) {
        const double mu = -0.4, a1 = 1.2, a2 = -0.6;
        for (double T : {0.05, 0.3, 1.0, 3.0}) {
            const CanonicalStageParams p = parallel(mu, a1, a2, slope, T);
            for (double u : {0.05, 0.3, 0.5, 0.8, 0.97}) {
                const double x = p.lower_at(T) + u * (p.upper_at(T) - p.lower_at(T));
                const double expected =
                    double(images_npd(x - slope * T, T, mu - slope, a1, a2));
                EXPECT_NEAR(npd_basic(x, p), expected, 1e-13 + 1e-11 * expected)
                    << "T " << T << " x " << x;
            }
        }
    }
}

TEST(SingleStage, MassIsConservedWithClosingBoundaries)
{
    const CanonicalStageParams cases[] = {
        {1.0, 1.5, -0.3, -1.5, 0.3, 2.0},
        {0.0, 0.4, -0.1, -2.0, 0.6, 1.5},
        {-1.2, 2.0, -0.5, -0.5, 0.1, 4.0},
        {0.5, 1.0, 0.3, -1.0, -0.2, 3.0},  // diverging
    };
    for (const auto& p : cases) EXPECT_NEAR(total_mass(p), 1.0, 1e-10);
}

TEST(SingleStage, CollapseAtHorizonLeavesNoNonPassageMass)
{
    const CanonicalStageParams p{0.3, 1.0, -0.5, -1.0, 0.5, 2.0};
    EXPECT_NEAR(total_mass(p), 1.0, 1e-9);
    EXPECT_EQ(npd_basic(0.0, p), 0.0);
}

TEST(SingleStage, ReflectionSwapsBoundaries)
{
    const CanonicalStageParams p{0.7, 1.3, -0.2, -0.9, 0.1, 3.0};
    const CanonicalStageParams r = p.reflected();
    for (double t : {0.05, 0.4, 1.7, 2.9}) {
        EXPECT_DOUBLE_EQ(fptd_lower_basic(t, p), fptd_upper_basic(t, r));
        EXPECT_NEAR(fptd_upper_basic(t, p), fptd_lower_basic(t, r), 1e-15);
    }
    for (double x : {-0.5, 0.0, 0.6})
        EXPECT_NEAR(npd_basic(x, p), npd_basic(-x, r), 1e-14);
    const CanonicalStageParams rr = r.reflected();
    EXPECT_EQ(rr.mu, p.mu);
    EXPECT_EQ(rr.a1, p.a1);
    EXPECT_EQ(rr.b2, p.b2);
}

TEST(SingleStage, DiffusionScalingOfGeneralStage)
{
    // Scaling drift, boundaries and diffusion by s leaves the first-passage
    // time law unchanged and stretches the position density by 1/s.
    const LinearStage base{0.4, 1.0, 1.2, -0.1, -0.8, 0.2, 2.5};
    const double x0 = 0.1, s = 2.5;
    const LinearStage scaled{base.drift * s,       s,   base.upper0 * s, base.upper_slope * s,
                             base.lower0 * s, base.lower_slope * s, base.duration};
    for (double t : {0.1, 0.8, 2.0}) {
        EXPECT_NEAR(fptd_single_upper(t, scaled, x0 * s), fptd_single_upper(t, base, x0), 1e-14);
        EXPECT_NEAR(fptd_single_lower(t, scaled, x0 * s), fptd_single_lower(t, base, x0), 1e-14);
    }
    for (double x : {-0.3, 0.2, 0.9})
        EXPECT_NEAR(npd_single(x * s, scaled, x0 * s) * s, npd_single(x, base, x0), 1e-13);
}

TEST(SingleStage, GeneralStageMatchesCanonicalShift)
{
    const LinearStage st{0.5, 1.0, 2.0, -0.3, -1.0, 0.1, 3.0};
    const double x0 = 0.4;
    const CanonicalStageParams p{0.5, 1.6, -0.3, -1.4, 0.1, 3.0};
    EXPECT_DOUBLE_EQ(fptd_single(1.1, st, x0, BoundaryLabel::upper), fptd_upper_basic(1.1, p));
    EXPECT_DOUBLE_EQ(fptd_single(1.1, st, x0, BoundaryLabel::lower), fptd_lower_basic(1.1, p));
    EXPECT_DOUBLE_EQ(npd_single(0.7, st, x0), npd_basic(0.3, p));
}

TEST(SingleStage, OutsideRangeIsZero)
{
    const CanonicalStageParams p{0.0, 1.0, 0.0, -1.0, 0.0, 1.0};
    EXPECT_EQ(fptd_upper_basic(1.5, p), 0.0);
    EXPECT_EQ(npd_basic(1.0, p), 0.0);
    EXPECT_EQ(npd_basic(-2.0, p), 0.0);
    EXPECT_THROW(fptd_upper_basic(0.0, p), ValidationError);
    EXPECT_EQ(fptd_upper_basic(1e-9, p), 0.0);  // underflows cleanly
}

TEST(SingleStage, TooFewTermsRaises)
{
    SeriesControl ctl;
    ctl.max_terms = 2;
    ctl.rel_tol = 1e-15;
    const CanonicalStageParams p{0.0, 1.0, 0.0, -1.0, 0.0, 1.0};
    EXPECT_THROW(npd_basic(0.0, p, ctl), NonConvergedSeries);
}

TEST(SingleStage, ValidatesCanonicalParameters)
{
    EXPECT_THROW((CanonicalStageParams{0.0, -0.1, 0.0, -1.0, 0.0, 1.0}.validate()),
                 ValidationError);
    EXPECT_THROW((CanonicalStageParams{0.0, 1.0, -1.0, -1.0, 1.0, 2.0}.validate()),
                 ValidationError);
    EXPECT_NO_THROW((CanonicalStageParams{0.0, 1.0, -1.0, -1.0, 1.0, 1.0}.validate()));
    SeriesControl bad;
    bad.max_terms = 1;
    EXPECT_THROW(bad.validate(), ValidationError);
}
