#pragma once

#include "gddm/engine.hpp"
#include "gddm/io.hpp"
#include "gddm/simulate.hpp"
#include "gddm/transforms.hpp"

#include <memory>
#include <optional>

namespace gddm {

/// A named function of time with its antiderivative when known in closed form.
struct NamedFunction {
    TimeFunction value;
    TimeFunction antiderivative;  // empty when not available
};

/// {"type": "constant", "value"} | {"type": "linear", "intercept", "slope"} |
/// {"type": "sine", "amplitude", "frequency", "phase", "offset"} |
/// {"type": "weibull_survival", "height", "scale", "shape"} (height exp(-(t/scale)^shape)) |
/// {"type": "piecewise", "breakpoints", "values"} (linear interpolation).
NamedFunction function_from_json(const Json& j, const std::string& context);

/// A first-passage model described by a config file. Kinds:
///   schedule   - an explicit multi-stage schedule;
///   time_drift - dX = drift(t) dt + sigma dW with curved boundaries;
///   ou         - dX = theta (lambda - X) dt + sigma dW with curved boundaries.
/// The last two are reduced to Brownian motion and linearized.
struct ModelSpec {
    enum class Kind { schedule, time_drift, ou };
    Kind kind = Kind::schedule;
    std::optional<StageSchedule> schedule;
    NamedFunction drift;
    double sigma = 1.0;
    double theta = 1.0;
    double lambda = 0.0;
    NamedFunction upper;
    NamedFunction lower;
    InitialCondition initial;
    double horizon = 0.0;
    InterpolationControl interpolation;
    /// Quadrature orders from the config's "engine" block; command-line flags
    /// take precedence.
    std::optional<int> interior_order;
    std::optional<int> final_order;

    double end_time() const { return schedule ? schedule->horizon() : horizon; }
};

ModelSpec model_from_json(const Json& j);

/// Diffusion form of a non-schedule model, for simulation.
SdeModel to_sde(const ModelSpec& spec);

/// Densities of a model in original time.
class ModelDensity {
public:
    ModelDensity(const ModelSpec& spec, const EngineConfig& cfg);

    double density(double t, BoundaryLabel boundary) const;
    double non_passage_probability() const { return evaluator_->non_passage_probability(); }

    const ScheduleEvaluator& evaluator() const { return *evaluator_; }
    /// Maps original time to schedule time (identity for schedule models).
    const TimeFunction& time_map() const { return time_map_; }
    const std::optional<Linearization>& linearization() const { return linearization_; }

private:
    std::unique_ptr<ScheduleEvaluator> evaluator_;
    CoordinateTransform transform_;
    TimeFunction time_map_;
    std::optional<Linearization> linearization_;
    bool transformed_ = false;
};

std::vector<FirstPassageSample> simulate_model(const ModelSpec& spec, const SimConfig& cfg);

/// aDDM simulation settings: {"params", "fixations": {"shape", "rate"},
/// "n_trials", "dt", "max_horizon"}.
struct AddmSimulationSpec {
    AddmParams params;
    FixationProcess fixations;
    std::size_t n_trials = 1000;
    double dt = 1e-4;
    double max_horizon = kNoHorizonCap;
};

AddmSimulationSpec addm_simulation_from_json(const Json& j);

}  // namespace gddm
