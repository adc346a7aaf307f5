#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace gddm {

/// Base class for all numerical failures raised by the library.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A configuration that violates a structural invariant.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class BoundaryLabel { upper, lower };

std::string to_string(BoundaryLabel label);
BoundaryLabel parse_boundary_label(const std::string& text);

/// Continuous piecewise-linear function of time, given by its values at
/// strictly increasing breakpoints starting at t = 0.
class Boundary {
public:
    Boundary() = default;
    Boundary(std::vector<double> breakpoints, std::vector<double> values);

    /// Linear interpolation; the first/last segment is extended outside
    /// [0, horizon()].
    double operator()(double t) const;

    std::span<const double> breakpoints() const { return breakpoints_; }
    std::span<const double> values() const { return values_; }
    std::size_t segment_count() const { return values_.empty() ? 0 : values_.size() - 1; }
    double slope(std::size_t segment) const;
    double horizon() const { return breakpoints_.back(); }

private:
    std::vector<double> breakpoints_;
    std::vector<double> values_;
};

/// Parametric description of a continuous initial density, kept so that the
/// density can be serialized.
struct DensityForm {
    enum class Kind { uniform, beta };
    Kind kind = Kind::uniform;
    double lower = 0.0;  // support
    double upper = 1.0;
    double alpha = 1.0;  // beta shape parameters
    double beta = 1.0;
    double mass = 1.0;   // total (sub-)probability
};

struct ContinuousDensity {
    std::function<double(double)> pdf;
    double support_lower = 0.0;
    double support_upper = 0.0;
    double mass = 1.0;
    std::optional<DensityForm> form;

    static ContinuousDensity uniform(double lower, double upper, double mass = 1.0);
    /// Beta(alpha, beta) rescaled to (lower, upper).
    static ContinuousDensity beta(double alpha, double beta, double lower = 0.0,
                                  double upper = 1.0, double mass = 1.0);
    static ContinuousDensity from_form(const DensityForm& form);
};

/// Distribution of X(0): point masses, a continuous density, or both.
/// Total mass may be below one (sub-probability).
class InitialCondition {
public:
    InitialCondition() = default;

    static InitialCondition point(double x0);
    static InitialCondition discrete(std::vector<double> points, std::vector<double> weights);
    static InitialCondition continuous(ContinuousDensity density);
    static InitialCondition mixture(std::vector<double> points, std::vector<double> weights,
                                    ContinuousDensity density);

    std::span<const double> points() const { return points_; }
    std::span<const double> weights() const { return weights_; }
    const std::optional<ContinuousDensity>& density() const { return density_; }

    bool has_discrete_part() const { return !points_.empty(); }
    bool is_point_mass() const { return points_.size() == 1 && !density_; }
    double total_mass() const;

private:
    std::vector<double> points_;
    std::vector<double> weights_;
    std::optional<ContinuousDensity> density_;
};

/// One stage of a multi-stage model in original coordinates: constant drift
/// and diffusion, linear boundaries starting at the stage start time.
struct LinearStage {
    double drift = 0.0;
    double diffusion = 1.0;
    double upper0 = 1.0;
    double upper_slope = 0.0;
    double lower0 = -1.0;
    double lower_slope = 0.0;
    double duration = 1.0;

    double upper_end() const { return upper0 + upper_slope * duration; }
    double lower_end() const { return lower0 + lower_slope * duration; }
};

/// Multi-stage GDDM: piecewise-constant drift/diffusion and continuous
/// piecewise-linear boundaries on one shared breakpoint grid.
struct StageSchedule {
    std::vector<double> breakpoints;  // t_0 = 0 < t_1 < ... < t_d = T_end
    std::vector<double> mu;           // per stage, size d
    std::vector<double> sigma;        // per stage, size d
    Boundary upper;
    Boundary lower;
    InitialCondition initial;

    static StageSchedule make(std::vector<double> breakpoints, std::vector<double> mu,
                              std::vector<double> sigma, std::vector<double> upper_values,
                              std::vector<double> lower_values, InitialCondition initial);

    std::size_t stage_count() const { return mu.size(); }
    double horizon() const { return breakpoints.back(); }

    /// Stage k (0-based) covering (t_k, t_{k+1}].
    LinearStage stage(std::size_t k) const;

    /// 0-based index of the stage whose interval (t_k, t_{k+1}] contains t.
    /// t <= 0 maps to stage 0.
    std::size_t stage_index(double t) const;

    /// Copy truncated at a new horizon T <= horizon().
    StageSchedule truncated(double new_horizon) const;
};

/// Piecewise-constant function on (t_{k}, t_{k+1}].
struct PiecewiseConstant {
    std::vector<double> breakpoints;  // starts at 0, last entry is the horizon
    std::vector<double> values;       // size breakpoints.size() - 1

    double operator()(double t) const;
};

/// Builds a schedule on the union of all breakpoint grids. Boundary values
/// at the merged grid are interpolated from the inputs.
StageSchedule merge_onto_common_grid(const PiecewiseConstant& drift,
                                     const PiecewiseConstant& diffusion, const Boundary& upper,
                                     const Boundary& lower, InitialCondition initial,
                                     double tolerance = 1e-12);

struct Response {
    double time = 0.0;
    BoundaryLabel boundary = BoundaryLabel::upper;
};

struct NonResponse {};

using Observation = std::variant<Response, NonResponse>;

/// Sub-probability density sampled at quadrature nodes on a vertical
/// boundary t = time.
struct DensityLattice {
    double time = 0.0;
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<double> values;
    /// Total weighted magnitude of negative values that were clamped to zero.
    double clamped_mass = 0.0;

    std::size_t size() const { return nodes.size(); }
    double mass() const;
};

struct Violation {
    std::optional<std::size_t> stage;  // offending stage (0-based) when applicable
    std::string message;
};

/// Every violated structural invariant of the schedule; empty when valid.
std::vector<Violation> validate_schedule(const StageSchedule& schedule);

/// Throws ValidationError listing all violations.
void require_valid(const StageSchedule& schedule);

std::string describe(const std::vector<Violation>& violations);

}  // namespace gddm
