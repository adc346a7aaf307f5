// Full-scale recovery and coverage experiments; each takes tens of minutes
// on a few cores. Built only with -DGDDM_LONG_TESTS=ON.

#include "gddm/inference.hpp"
#include "gddm/parallel.hpp"
#include "gddm/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gddm;

namespace {

const AddmParams kTruth{0.7, 0.5, 2.1, 0.3, -0.2};
constexpr FreeMask kKappaOnly{false, true, false, false, false};

LikelihoodSettings settings()
{
    LikelihoodSettings s;
    s.engine.interior_order = 30;
    s.engine.final_order = 35;
    s.threads = hardware_threads();
    return s;
}

}  // namespace

TEST(Long, FullScaleRecovery)
{
    // At n = 50,000 the published estimates lie within about 0.01 of the truth.
    const auto trials = simulate_addm_dataset(kTruth, {}, 50000, 50, 1e-4, kNoHorizonCap,
                                              hardware_threads());
    const FitResult fit = fit_mle(trials, {0.6, 0.6, 2.0, 0.2, -0.1}, {}, kAllFree, {}, settings());
    ASSERT_TRUE(fit.converged) << fit.message;
    const ParamVector est = to_vector(fit.estimate), truth = to_vector(kTruth);
    for (std::size_t j = 0; j < kParamCount; ++j)
        EXPECT_NEAR(est[j], truth[j], 0.015) << param_names()[j];
    EXPECT_GE(fit.loglik, dataset_loglik(trials, kTruth, settings()).value - 1e-6);
}

TEST(Long, BootstrapCoversTheTruth)
{
    // Single-fixation trials with only kappa free keep each refit cheap.
    int covered = 0;
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        const auto trials = simulate_addm_dataset(kTruth, {2.0, 0.01}, 2000, 100 + rep, 1e-3);
        const FitResult fit = fit_mle(trials, kTruth, {}, kKappaOnly);
        const BootstrapResult r = bootstrap_ci(trials, fit.estimate, 200, 0.95, rep, {}, kKappaOnly);
        if (r.intervals[1].lower <= kTruth.kappa && kTruth.kappa <= r.intervals[1].upper) ++covered;
    }
    EXPECT_GE(covered, 18);
}
