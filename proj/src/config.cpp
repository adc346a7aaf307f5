#include "gddm/config.hpp"

#include <cmath>

namespace gddm {

namespace {

std::string kind_name(const Json& j)
{
    const auto it = j.find("model");
    if (it == j.end() || !it->is_string())
        throw ValidationError("model config: 'model' must be one of schedule, time_drift, ou");
    return it->get<std::string>();
}

InterpolationControl interpolation_from_json(const Json& j)
{
    const std::string ctx = "interpolation";
    require_known_keys(j, {"max_abs_dev", "max_points", "min_segment"}, ctx);
    InterpolationControl c;
    c.max_abs_dev = get_number_or(j, "max_abs_dev", c.max_abs_dev, ctx);
    c.max_points = int(get_number_or(j, "max_points", c.max_points, ctx));
    c.min_segment = get_number_or(j, "min_segment", c.min_segment, ctx);
    c.validate();
    return c;
}

void read_engine(const Json& j, ModelSpec& spec)
{
    if (!j.contains("engine")) return;
    const Json& e = j["engine"];
    require_known_keys(e, {"interior_order", "final_order"}, "engine");
    if (e.contains("interior_order"))
        spec.interior_order = int(get_number(e, "interior_order", "engine"));
    if (e.contains("final_order")) spec.final_order = int(get_number(e, "final_order", "engine"));
}

void read_curved_model(const Json& j, ModelSpec& spec, const std::string& ctx)
{
    for (const char* key : {"upper", "lower", "initial"})
        if (!j.contains(key)) throw ValidationError(ctx + ": missing key '" + key + "'");
    spec.upper = function_from_json(j.at("upper"), ctx + " upper");
    spec.lower = function_from_json(j.at("lower"), ctx + " lower");
    spec.initial = initial_from_json(j.at("initial"));
    spec.horizon = get_number(j, "horizon", ctx);
    spec.sigma = get_number_or(j, "sigma", 1.0, ctx);
    if (!(spec.horizon > 0.0)) throw ValidationError(ctx + ": horizon must be positive");
    if (!(spec.sigma > 0.0)) throw ValidationError(ctx + ": sigma must be positive");
    if (j.contains("interpolation")) spec.interpolation = interpolation_from_json(j["interpolation"]);
    read_engine(j, spec);
}

CoordinateTransform transform_of(const ModelSpec& spec)
{
    if (spec.kind == ModelSpec::Kind::ou) return transform_ou(spec.theta, spec.lambda, spec.sigma);
    return transform_nonlinear_drift(spec.drift.value, spec.sigma, spec.horizon,
                                     spec.drift.antiderivative);
}

}  // namespace

NamedFunction function_from_json(const Json& j, const std::string& context)
{
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw ValidationError(context + ": function needs a string 'type'");
    const std::string type = j["type"].get<std::string>();
    const std::string ctx = context + " (" + type + ")";
    if (type == "constant") {
        require_known_keys(j, {"type", "value"}, ctx);
        const double c = get_number(j, "value", ctx);
        return {[c](double) { return c; }, [c](double t) { return c * t; }};
    }
    if (type == "linear") {
        require_known_keys(j, {"type", "intercept", "slope"}, ctx);
        const double a = get_number(j, "intercept", ctx);
        const double b = get_number(j, "slope", ctx);
        return {[a, b](double t) { return a + b * t; },
                [a, b](double t) { return a * t + 0.5 * b * t * t; }};
    }
    if (type == "sine") {
        require_known_keys(j, {"type", "amplitude", "frequency", "phase", "offset"}, ctx);
        const double amp = get_number(j, "amplitude", ctx);
        const double freq = get_number_or(j, "frequency", 1.0, ctx);
        const double phase = get_number_or(j, "phase", 0.0, ctx);
        const double offset = get_number_or(j, "offset", 0.0, ctx);
        if (freq == 0.0) throw ValidationError(ctx + ": frequency must be nonzero");
        return {[=](double t) { return offset + amp * std::sin(freq * t + phase); },
                [=](double t) {
                    return offset * t - amp / freq * (std::cos(freq * t + phase) - std::cos(phase));
                }};
    }
    if (type == "weibull_survival") {
        require_known_keys(j, {"type", "height", "scale", "shape"}, ctx);
        const double h = get_number(j, "height", ctx);
        const double scale = get_number(j, "scale", ctx);
        const double shape = get_number(j, "shape", ctx);
        if (!(scale > 0.0 && shape > 0.0))
            throw ValidationError(ctx + ": scale and shape must be positive");
        return {[=](double t) { return h * std::exp(-std::pow(std::max(t, 0.0) / scale, shape)); },
                {}};
    }
    if (type == "piecewise") {
        require_known_keys(j, {"type", "breakpoints", "values"}, ctx);
        const Boundary b(get_numbers(j, "breakpoints", ctx), get_numbers(j, "values", ctx));
        return {[b](double t) { return b(t); }, {}};
    }
    throw ValidationError(context + ": unknown function type '" + type + "'");
}

ModelSpec model_from_json(const Json& j)
{
    const std::string kind = kind_name(j);
    ModelSpec spec;
    if (kind == "schedule") {
        require_known_keys(j, {"model", "schedule", "engine"}, "schedule model");
        if (!j.contains("schedule")) throw ValidationError("schedule model: missing key 'schedule'");
        spec.kind = ModelSpec::Kind::schedule;
        spec.schedule = schedule_from_json(j["schedule"]);
        spec.horizon = spec.schedule->horizon();
        read_engine(j, spec);
        return spec;
    }
    if (kind == "time_drift") {
        const std::string ctx = "time_drift model";
        require_known_keys(j, {"model", "drift", "sigma", "upper", "lower", "initial", "horizon",
                               "interpolation", "engine"},
                           ctx);
        spec.kind = ModelSpec::Kind::time_drift;
        if (!j.contains("drift")) throw ValidationError(ctx + ": missing key 'drift'");
        spec.drift = function_from_json(j["drift"], ctx + " drift");
        read_curved_model(j, spec, ctx);
        return spec;
    }
    if (kind == "ou") {
        const std::string ctx = "ou model";
        require_known_keys(j, {"model", "theta", "lambda", "sigma", "upper", "lower", "initial",
                               "horizon", "interpolation", "engine"},
                           ctx);
        spec.kind = ModelSpec::Kind::ou;
        spec.theta = get_number(j, "theta", ctx);
        spec.lambda = get_number(j, "lambda", ctx);
        if (!(spec.theta > 0.0)) throw ValidationError(ctx + ": theta must be positive");
        read_curved_model(j, spec, ctx);
        return spec;
    }
    throw ValidationError("model config: unknown model '" + kind + "'");
}

SdeModel to_sde(const ModelSpec& spec)
{
    SdeModel m;
    const double sigma = spec.sigma;
    m.diffusion = [sigma](double, double) { return sigma; };
    if (spec.kind == ModelSpec::Kind::ou) {
        const double theta = spec.theta, lambda = spec.lambda;
        m.drift = [theta, lambda](double x, double) { return theta * (lambda - x); };
    } else {
        m.drift = [f = spec.drift.value](double, double t) { return f(t); };
    }
    m.upper = spec.upper.value;
    m.lower = spec.lower.value;
    m.initial = spec.initial;
    m.horizon = spec.horizon;
    return m;
}

ModelDensity::ModelDensity(const ModelSpec& spec, const EngineConfig& cfg)
{
    if (spec.schedule) {
        evaluator_ = std::make_unique<ScheduleEvaluator>(*spec.schedule, cfg);
        time_map_ = [](double t) { return t; };
        return;
    }
    ReducedModel reduced = reduce_to_brownian(spec.upper.value, spec.lower.value, spec.initial,
                                              transform_of(spec), spec.horizon,
                                              spec.interpolation);
    evaluator_ = std::make_unique<ScheduleEvaluator>(std::move(reduced.schedule), cfg);
    transform_ = std::move(reduced.transform);
    time_map_ = transform_.time_map;
    linearization_ = std::move(reduced.linearization);
    transformed_ = true;
}

double ModelDensity::density(double t, BoundaryLabel boundary) const
{
    if (!transformed_) return evaluator_->raw_density(t, boundary);
    const double s = transform_.time_map(t);
    return evaluator_->raw_density(s, boundary) * transform_.time_rate(t);
}

std::vector<FirstPassageSample> simulate_model(const ModelSpec& spec, const SimConfig& cfg)
{
    if (spec.schedule) return simulate_fpt(*spec.schedule, cfg);
    return simulate_fpt(to_sde(spec), cfg);
}

AddmSimulationSpec addm_simulation_from_json(const Json& j)
{
    const std::string ctx = "aDDM simulation";
    require_known_keys(j, {"model", "params", "fixations", "n_trials", "dt", "max_horizon"}, ctx);
    AddmSimulationSpec s;
    if (j.contains("params")) s.params = addm_params_from_json(j["params"]);
    if (j.contains("fixations")) {
        const Json& f = j["fixations"];
        require_known_keys(f, {"shape", "rate"}, ctx + " fixations");
        s.fixations.shape = get_number_or(f, "shape", s.fixations.shape, ctx);
        s.fixations.rate = get_number_or(f, "rate", s.fixations.rate, ctx);
        if (!(s.fixations.shape > 0.0 && s.fixations.rate > 0.0))
            throw ValidationError(ctx + ": fixation shape and rate must be positive");
    }
    const double n = get_number_or(j, "n_trials", double(s.n_trials), ctx);
    if (!(n >= 1.0) || n != std::floor(n))
        throw ValidationError(ctx + ": n_trials must be a positive integer");
    s.n_trials = std::size_t(n);
    s.dt = get_number_or(j, "dt", s.dt, ctx);
    if (!(s.dt > 0.0)) throw ValidationError(ctx + ": dt must be positive");
    if (j.contains("max_horizon") && !j["max_horizon"].is_null())
        s.max_horizon = get_number(j, "max_horizon", ctx);
    return s;
}

}  // namespace gddm
