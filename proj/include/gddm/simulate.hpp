#pragma once

#include "gddm/addm.hpp"
#include "gddm/engine.hpp"
#include "gddm/model.hpp"
#include "gddm/transforms.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace gddm {

struct SimConfig {
    double dt = 1e-4;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const;
};

enum class Outcome { upper, lower, none };

std::string to_string(Outcome outcome);
Outcome parse_outcome(const std::string& text);

struct FirstPassageSample {
    double time = 0.0;  // grid time of the first exit, or the horizon
    Outcome outcome = Outcome::none;
};

/// A general diffusion between two boundaries, for simulation only.
struct SdeModel {
    SpaceTimeFunction drift;
    SpaceTimeFunction diffusion;
    TimeFunction upper;
    TimeFunction lower;
    InitialCondition initial;
    double horizon = 1.0;
};

/// Seed of the generator for path `index`. Each path owns its own stream,
/// so results do not depend on the thread count.
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index);

/// Draws X(0). Point masses and discrete parts are sampled directly, uniform
/// and beta densities exactly, other densities by a tabulated inverse CDF.
/// A sub-probability initial condition is normalized.
class InitialSampler {
public:
    explicit InitialSampler(const InitialCondition& initial);
    double operator()(std::mt19937_64& rng) const;

private:
    std::vector<double> points_;
    std::vector<double> cumulative_weights_;  // discrete part, then the density
    std::optional<ContinuousDensity> density_;
    std::vector<double> grid_;  // inverse CDF table for a general density
    std::vector<double> grid_cdf_;
};

/// Euler–Maruyama first-passage samples with exits checked on the time grid.
std::vector<FirstPassageSample> simulate_fpt(const StageSchedule& schedule, const SimConfig& cfg);
std::vector<FirstPassageSample> simulate_fpt(const SdeModel& model, const SimConfig& cfg);

struct OutcomeCounts {
    std::size_t upper = 0;
    std::size_t lower = 0;
    std::size_t none = 0;
};
OutcomeCounts count_outcomes(std::span<const FirstPassageSample> samples);

void write_samples_csv(std::ostream& os, std::span<const FirstPassageSample> samples);

/// Histogram normalized by the total sample count, so that the upper and
/// lower rows together integrate to the response fraction.
void write_histogram_csv(std::ostream& os, std::span<const FirstPassageSample> samples,
                         double horizon, int bins);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;         // samples tested
    std::size_t excluded = 0;  // non-responses left out
};

/// Asymptotic Kolmogorov tail probability at (sqrt(n) + 0.12 + 0.11/sqrt(n)) d.
double kolmogorov_p_value(double statistic, std::size_t n);

/// One-sample KS test against a continuous CDF.
KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf);

/// Response-time CDF of a schedule, normalized by the response probability,
/// from cumulative quadrature of the engine's first-passage densities.
class ResponseTimeCdf {
public:
    struct Options {
        int panel_order = 8;
        double max_panel = 0.0;    // 0: horizon / 2000
        double first_panel = 1e-7;  // graded panels after each stage start
    };

    explicit ResponseTimeCdf(const ScheduleEvaluator& evaluator);
    ResponseTimeCdf(const ScheduleEvaluator& evaluator, Options options);

    /// P(tau <= t | response).
    double operator()(double t) const;
    /// CDF of the signed time: lower exits at -t, upper exits at +t.
    double signed_cdf(double x) const;

    double response_mass() const { return upper_.back() + lower_.back(); }
    double upper_mass() const { return upper_.back(); }
    double lower_mass() const { return lower_.back(); }
    double horizon() const { return grid_.back(); }

private:
    double interpolate(const std::vector<double>& cumulative, double t) const;

    std::vector<double> grid_;
    std::vector<double> upper_;
    std::vector<double> lower_;
};

/// KS test of response times against a schedule CDF. Non-responses are
/// excluded. `time_map`, when set, converts sample times to schedule time
/// (e.g. the time map of a transform).
KsResult ks_test(std::span<const FirstPassageSample> samples, const ResponseTimeCdf& cdf,
                 bool signed_time = false, const TimeFunction& time_map = {});

/// Gamma-distributed fixation dwell times.
struct FixationProcess {
    double shape = 2.0;
    double rate = 3.13;  // about 3.45 fixations per trial at the default parameters
};

/// Simulates one aDDM trial: alternating fixations starting on A or B with
/// equal probability, Euler–Maruyama path, fixations truncated at the
/// response time.
TrialRecord simulate_addm_trial(const AddmParams& params, double rating_a, double rating_b,
                                const FixationProcess& fixations, double max_horizon, double dt,
                                std::mt19937_64& rng);

/// n trials with ratings uniform on {1, ..., 5}; trial i uses path_seed(seed, i).
std::vector<TrialRecord> simulate_addm_dataset(const AddmParams& params,
                                               const FixationProcess& fixations, std::size_t n,
                                               std::uint64_t seed, double dt = 1e-4,
                                               double max_horizon = kNoHorizonCap, int threads = 1);

}  // namespace gddm
