#pragma once

#include "gddm/model.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gddm {

using TimeFunction = std::function<double(double)>;
using SpaceTimeFunction = std::function<double(double x, double t)>;

/// Raised when (c1, c2) do not satisfy the Cherkasov condition on the check
/// grid, or when a transform is numerically unusable.
class ConditionViolated : public ValidationError {
public:
    ConditionViolated(const std::string& what, double x, double t, double residual)
        : ValidationError(what), x_(x), t_(t), residual_(residual)
    {
    }
    double x() const { return x_; }
    double t() const { return t_; }
    double residual() const { return residual_; }

private:
    double x_, t_, residual_;
};

/// Space-time change of variables (t, x) -> (s, w) = (time_map(t), state_map(x, t))
/// under which the process becomes standard Brownian motion.
struct CoordinateTransform {
    TimeFunction time_map;
    TimeFunction time_rate;      // d time_map / dt
    TimeFunction time_inverse;
    SpaceTimeFunction state_map;
    SpaceTimeFunction state_rate;  // d state_map / dx
    SpaceTimeFunction state_inverse;  // inverse in x at fixed t

    static CoordinateTransform identity();
};

/// dX = drift(t) dt + sigma dW. The drift antiderivative is integrated
/// numerically on [0, horizon] unless `antiderivative` is supplied.
CoordinateTransform transform_nonlinear_drift(TimeFunction drift, double sigma, double horizon,
                                              TimeFunction antiderivative = {});

/// dX = theta (lambda - X) dt + sigma dW.
CoordinateTransform transform_ou(double theta, double lambda, double sigma);

/// Region on which the Cherkasov condition is checked and the transform is
/// tabulated.
struct CherkasovDomain {
    double x_lower = -1.0;
    double x_upper = 1.0;
    double horizon = 1.0;
    int grid_points = 64;
    double tolerance = 1e-8;
};

/// Transform to Brownian motion for dX = drift(x, t) dt + diffusion(x, t) dW
/// given the Cherkasov pair (c1, c2). Throws ConditionViolated when the
/// condition residual exceeds the tolerance anywhere on the check grid.
CoordinateTransform transform_cherkasov(TimeFunction c1, TimeFunction c2,
                                        SpaceTimeFunction diffusion, SpaceTimeFunction drift,
                                        const CherkasovDomain& domain);

/// Largest residual of the Cherkasov condition on the check grid.
struct CherkasovResidual {
    double value = 0.0;
    double x = 0.0;
    double t = 0.0;
};
CherkasovResidual cherkasov_residual(const TimeFunction& c1, const TimeFunction& c2,
                                     const SpaceTimeFunction& diffusion,
                                     const SpaceTimeFunction& drift, const CherkasovDomain& domain);

/// Boundary in transformed coordinates: s -> state_map(b(t), t), t = time_inverse(s).
TimeFunction transform_boundary(TimeFunction boundary, const CoordinateTransform& tr);

/// Rejects transforms whose time map stretches [0, horizon] by more than
/// max_ratio, or whose derivatives are not positive on a check grid.
void check_transform(const CoordinateTransform& tr, double horizon, double x_lower,
                     double x_upper, double max_ratio = 1e6);

struct InterpolationControl {
    double max_abs_dev = 1e-4;
    int max_points = 2048;
    double min_segment = 1e-5;

    void validate() const;
};

struct Linearization {
    std::vector<double> breakpoints;
    std::vector<std::vector<double>> values;  // one row per linearized function
    double max_deviation = 0.0;             // on the dense check grid
    std::optional<std::string> warning;     // set when a cap stopped refinement
};

/// Adaptive piecewise-linear interpolation of several functions on one
/// shared grid over [0, horizon]. `mandatory` times are always breakpoints.
Linearization linearize(std::span<const TimeFunction> functions, double horizon,
                        const InterpolationControl& ctl, std::span<const double> mandatory = {});

Boundary piecewise_linearize(const TimeFunction& boundary, double horizon,
                             const InterpolationControl& ctl = {},
                             std::span<const double> mandatory = {});

/// Original-time density from a transformed-time density.
TimeFunction map_back_fptd(TimeFunction transformed_density, const CoordinateTransform& tr);

/// Original-state non-passage density at time T from the transformed one at time_map(T).
TimeFunction map_back_npd(TimeFunction transformed_density, const CoordinateTransform& tr,
                          double T);

/// Initial condition of the transformed process.
InitialCondition transform_initial(const InitialCondition& initial, const CoordinateTransform& tr);

/// A model reduced to a multi-stage Brownian-motion schedule in transformed
/// coordinates.
struct ReducedModel {
    StageSchedule schedule;
    CoordinateTransform transform;
    double horizon = 0.0;  // original time
    Linearization linearization;
};

/// Transforms both boundaries, linearizes them on a shared grid over
/// [0, time_map(horizon)] and builds the unit-diffusion, zero-drift schedule.
/// `mandatory_times` are in original time.
ReducedModel reduce_to_brownian(const TimeFunction& upper, const TimeFunction& lower,
                                const InitialCondition& initial, CoordinateTransform tr,
                                double horizon, const InterpolationControl& ctl = {},
                                std::span<const double> mandatory_times = {});

}  // namespace gddm
