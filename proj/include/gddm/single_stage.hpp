#pragma once

#include "gddm/model.hpp"

namespace gddm {

/// Raised when a density series fails its stopping rule within max_terms, or
/// when truncation noise leaves a clearly negative value.
class NonConvergedSeries : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Truncation control for the density series.
struct SeriesControl {
    double rel_tol = 1e-12;
    double abs_tol = 1e-300;
    int max_terms = 64;
    /// First-passage densities are reported as 0 for t below this.
    double t_min = 1e-12;

    void validate() const;
};

/// Brownian motion with unit diffusion started at 0 between the linear
/// boundaries a1 + b1 t (upper) and a2 + b2 t (lower), truncated at T.
struct CanonicalStageParams {
    double mu = 0.0;
    double a1 = 1.0;
    double b1 = 0.0;
    double a2 = -1.0;
    double b2 = 0.0;
    double T = 1.0;

    double mean_intercept() const { return 0.5 * (a1 + a2); }  // ā
    double mean_slope() const { return 0.5 * (b1 + b2); }      // b̄
    double gap() const { return a1 - a2; }                     // c
    double closing_rate() const { return 0.5 * (b2 - b1); }    // b, gap(t) = c - 2bt
    double gap_at(double t) const { return gap() - 2.0 * closing_rate() * t; }
    double upper_at(double t) const { return a1 + b1 * t; }
    double lower_at(double t) const { return a2 + b2 * t; }

    /// Image under x -> -x: upper and lower boundaries swap roles.
    CanonicalStageParams reflected() const { return {-mu, -a2, -b2, -a1, -b1, T}; }

    /// Throws ValidationError unless a2 < 0 < a1 and the gap stays
    /// nonnegative through T.
    void validate() const;
};

/// Canonical parameters for a stage started at x0: drift and boundaries are
/// shifted by x0 and scaled by 1/sigma.
CanonicalStageParams canonicalize(const LinearStage& stage, double x0);

double fptd_upper_basic(double t, const CanonicalStageParams& p, const SeriesControl& ctl = {});
double fptd_lower_basic(double t, const CanonicalStageParams& p, const SeriesControl& ctl = {});
double npd_basic(double x, const CanonicalStageParams& p, const SeriesControl& ctl = {});

/// Densities for a stage with general drift, diffusion and start x0. The
/// stage duration is the truncation horizon.
double fptd_single(double t, const LinearStage& stage, double x0, BoundaryLabel boundary,
                   const SeriesControl& ctl = {});
double fptd_single_upper(double t, const LinearStage& stage, double x0,
                         const SeriesControl& ctl = {});
double fptd_single_lower(double t, const LinearStage& stage, double x0,
                         const SeriesControl& ctl = {});
double npd_single(double x, const LinearStage& stage, double x0, const SeriesControl& ctl = {});

}  // namespace gddm
