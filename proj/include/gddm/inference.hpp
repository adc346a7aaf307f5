#pragma once

#include "gddm/addm.hpp"
#include "gddm/engine.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gddm {

/// Settings shared by every likelihood evaluation of a dataset.
struct LikelihoodSettings {
    EngineConfig engine;
    int threads = 1;
    double max_horizon = kNoHorizonCap;  // cap on the aDDM schedule horizon
};

/// Schedule of a trial under the given parameters.
StageSchedule trial_schedule(const TrialRecord& trial, const AddmParams& params,
                             double max_horizon = kNoHorizonCap);

/// f(rt, choice) for a response, Q for a non-response. Responses after the
/// schedule horizon have likelihood 0.
double trial_likelihood(const TrialRecord& trial, const AddmParams& params,
                        const LikelihoodSettings& settings = {});

struct LoglikResult {
    double value = 0.0;
    /// First trial (by index) whose likelihood was not positive.
    std::optional<std::size_t> bad_trial;
};

/// Sum of per-trial log-likelihoods, reduced with compensated summation in
/// index order so the value does not depend on the thread count.
LoglikResult dataset_loglik(std::span<const TrialRecord> trials, const AddmParams& params,
                            const LikelihoodSettings& settings = {});

inline constexpr std::size_t kParamCount = 5;

/// Component order everywhere: eta, kappa, a, b, x0.
using ParamVector = std::array<double, kParamCount>;
ParamVector to_vector(const AddmParams& p);
AddmParams from_vector(const ParamVector& v);
const std::array<const char*, kParamCount>& param_names();

/// Unconstrained coordinates: logit(eta), log(kappa), log(a), b, atanh(x0 / a).
ParamVector to_unconstrained(const AddmParams& p);
AddmParams from_unconstrained(const ParamVector& z);

struct ParamBounds {
    ParamVector lower{0.01, 0.01, 0.2, -1.0, -5.0};
    ParamVector upper{0.99, 5.0, 6.0, 2.0, 5.0};

    bool contains(const AddmParams& p) const;
    void validate() const;
};

using FreeMask = std::array<bool, kParamCount>;
inline constexpr FreeMask kAllFree{true, true, true, true, true};

struct OptimizerControl {
    int max_rounds = 20;          // simplex restarts
    int max_evaluations = 20000;
    double param_tol = 1e-5;      // simplex spread, unconstrained coordinates
    double loglik_tol = 1e-8;     // loglik spread across the simplex
    double initial_step = 0.1;    // simplex edge, unconstrained coordinates
};

struct FitResult {
    AddmParams estimate;
    double loglik = 0.0;
    int iterations = 0;   // simplex rounds
    int evaluations = 0;
    bool converged = false;
    std::string message;
};

/// Bounded Nelder–Mead in unconstrained coordinates with restarts. Points
/// outside the bounds score -inf. A round that neither moves the start point
/// by param_tol nor improves the loglik by loglik_tol ends the search and the
/// start point is returned unchanged.
FitResult fit_mle(std::span<const TrialRecord> trials, const AddmParams& init,
                  const ParamBounds& bounds = {}, const FreeMask& free = kAllFree,
                  const OptimizerControl& ctl = {}, const LikelihoodSettings& settings = {});

struct Prior {
    enum class Kind { uniform, point };
    Kind kind = Kind::uniform;
    ParamBounds bounds;  // support of the uniform prior
    AddmParams point;    // location of the point-mass prior

    /// Log density up to a constant; -inf outside the support.
    double log_density(const AddmParams& p) const;
};

struct McmcConfig {
    std::size_t n_burn = 1000;
    std::size_t n_draws = 1000;
    ParamVector proposal_scale{0.02, 0.02, 0.02, 0.02, 0.02};  // natural units
    FreeMask free = kAllFree;
    std::uint64_t seed = 1;
};

struct McmcResult {
    std::vector<AddmParams> draws;
    std::vector<double> logliks;
    double acceptance_rate = 0.0;  // over burn-in and draws
};

/// Random-walk Metropolis–Hastings on prior x likelihood in natural units.
McmcResult mcmc_sample(std::span<const TrialRecord> trials, const Prior& prior,
                       const AddmParams& init, const McmcConfig& cfg,
                       const LikelihoodSettings& settings = {});

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

struct BootstrapResult {
    AddmParams estimate;
    std::array<Interval, kParamCount> intervals;
    std::vector<AddmParams> replicates;
    std::size_t failures = 0;  // refits that threw or did not converge
};

/// Nonparametric pivotal bootstrap: trials are resampled with replacement
/// and refitted from `estimate`; the interval for component j is
/// [2 est - q_hi, 2 est - q_lo] from the replicate quantiles.
BootstrapResult bootstrap_ci(std::span<const TrialRecord> trials, const AddmParams& estimate,
                             std::size_t n_resamples, double level, std::uint64_t seed,
                             const ParamBounds& bounds = {}, const FreeMask& free = kAllFree,
                             const OptimizerControl& ctl = {},
                             const LikelihoodSettings& settings = {});

}  // namespace gddm
