#include "gddm/config.hpp"
#include "gddm/inference.hpp"
#include "gddm/io.hpp"
#include "gddm/parallel.hpp"
#include "gddm/simulate.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace gddm;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct GlobalOptions {
    int threads = 1;
    std::uint64_t seed = 1;
    std::optional<int> quad_order;
    std::optional<int> final_quad_order;
    bool dry_run = false;

    /// Flags first, then the config's own orders, then the library defaults.
    EngineConfig engine(std::optional<int> config_interior = {},
                        std::optional<int> config_final = {}) const
    {
        EngineConfig cfg;
        cfg.interior_order = quad_order.value_or(config_interior.value_or(cfg.interior_order));
        cfg.final_order = final_quad_order.value_or(config_final.value_or(cfg.final_order));
        cfg.validate();
        return cfg;
    }

    LikelihoodSettings likelihood(double max_horizon) const
    {
        LikelihoodSettings s;
        s.engine = engine();
        s.threads = threads;
        s.max_horizon = max_horizon;
        return s;
    }

    Json to_json() const
    {
        auto flag = [](const std::optional<int>& v) { return v ? Json(*v) : Json(nullptr); };
        return {{"threads", threads},
                {"seed", seed},
                {"quad_order", flag(quad_order)},
                {"final_quad_order", flag(final_quad_order)}};
    }
};

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path resolve(const fs::path& config_path, const std::string& relative)
{
    const fs::path p(relative);
    return p.is_absolute() ? p : config_path.parent_path() / p;
}

void finish(const std::string& command, const fs::path& config, const GlobalOptions& g,
            const Stopwatch& clock, std::vector<fs::path> outputs, Json settings = Json::object())
{
    if (!settings.contains("engine")) {
        const EngineConfig e = g.engine();
        settings["engine"] = {{"interior_order", e.interior_order}, {"final_order", e.final_order}};
    }
    RunManifest m;
    m.command = command;
    m.config_path = config.string();
    m.seed = g.seed;
    m.threads = g.threads;
    m.wall_clock_seconds = clock.seconds();
    for (const auto& o : outputs) m.outputs.push_back(o.string());
    settings["global"] = g.to_json();
    m.settings = std::move(settings);
    m.write_next_to(outputs.front());
}

// ---- dataset configs -------------------------------------------------------

struct DatasetConfig {
    std::vector<TrialRecord> trials;
    double max_horizon = kNoHorizonCap;
};

/// {"data": {"trials": csv, "sidecar": json} | {"simulate": {...}}, "max_horizon"}
DatasetConfig read_dataset(const Json& j, const fs::path& config_path, std::uint64_t seed,
                           int threads)
{
    DatasetConfig d;
    if (!j.contains("data")) throw ValidationError("config: missing key 'data'");
    const Json& data = j["data"];
    require_known_keys(data, {"trials", "sidecar", "simulate"}, "data");
    if (data.contains("simulate")) {
        const AddmSimulationSpec sim = addm_simulation_from_json(data["simulate"]);
        d.trials = simulate_addm_dataset(sim.params, sim.fixations, sim.n_trials, seed, sim.dt,
                                         sim.max_horizon, threads);
    } else {
        if (!data.contains("trials") || !data.contains("sidecar") ||
            !data["trials"].is_string() || !data["sidecar"].is_string())
            throw ValidationError("data: need string keys 'trials' and 'sidecar'");
        d.trials = read_trials(resolve(config_path, data["trials"].get<std::string>()),
                               resolve(config_path, data["sidecar"].get<std::string>()));
    }
    if (d.trials.empty()) throw ValidationError("data: dataset has no trials");
    if (j.contains("max_horizon") && !j["max_horizon"].is_null())
        d.max_horizon = get_number(j, "max_horizon", "config");
    return d;
}

FreeMask free_mask_from_json(const Json& j)
{
    if (!j.is_array()) throw ValidationError("'free' must be an array of parameter names");
    FreeMask mask{};
    for (const Json& name : j) {
        bool found = false;
        for (std::size_t k = 0; k < kParamCount; ++k)
            if (name.is_string() && name.get<std::string>() == param_names()[k])
                mask[k] = found = true;
        if (!found) throw ValidationError("'free': unknown parameter " + name.dump());
    }
    return mask;
}

ParamBounds bounds_from_json(const Json& j)
{
    require_known_keys(j, {"lower", "upper"}, "bounds");
    ParamBounds b;
    auto read = [&](const char* side, ParamVector& v) {
        if (!j.contains(side)) return;
        const Json& s = j[side];
        require_known_keys(s, {"eta", "kappa", "a", "b", "x0"}, std::string("bounds ") + side);
        for (std::size_t k = 0; k < kParamCount; ++k)
            v[k] = get_number_or(s, param_names()[k], v[k], std::string("bounds ") + side);
    };
    read("lower", b.lower);
    read("upper", b.upper);
    b.validate();
    return b;
}

Json intervals_to_json(const std::array<Interval, kParamCount>& intervals)
{
    Json j = Json::object();
    for (std::size_t k = 0; k < kParamCount; ++k)
        j[param_names()[k]] = {intervals[k].lower, intervals[k].upper};
    return j;
}

Json fit_to_json(const FitResult& r)
{
    return {{"estimate", addm_params_to_json(r.estimate)},
            {"loglik", r.loglik},
            {"iterations", r.iterations},
            {"evaluations", r.evaluations},
            {"converged", r.converged},
            {"message", r.message}};
}

// ---- subcommands -----------------------------------------------------------

struct CommonArgs {
    std::string config;
    std::string output;
};

int run_density(const CommonArgs& a, const GlobalOptions& g, int points, bool signed_time)
{
    Stopwatch clock;
    const ModelSpec spec = model_from_json(read_json_file(a.config));
    if (points < 1) throw ValidationError("--points must be positive");
    if (g.dry_run) {
        std::cout << "config ok: horizon " << spec.end_time() << "\n";
        return 0;
    }
    const EngineConfig engine = g.engine(spec.interior_order, spec.final_order);
    const ModelDensity model(spec, engine);
    const double horizon = spec.end_time();
    std::vector<double> times(points), upper(points), lower(points);
    for (int i = 0; i < points; ++i) {
        times[i] = horizon * double(i + 1) / points;
        upper[i] = model.density(times[i], BoundaryLabel::upper);
        lower[i] = model.density(times[i], BoundaryLabel::lower);
    }
    std::ostringstream os;
    if (signed_time) {
        os << "t,density\n";
        for (int i = points - 1; i >= 0; --i)
            os << format_double(-times[i]) << ',' << format_double(lower[i]) << '\n';
        for (int i = 0; i < points; ++i)
            os << format_double(times[i]) << ',' << format_double(upper[i]) << '\n';
    } else {
        os << "t,f_upper,f_lower\n";
        for (int i = 0; i < points; ++i)
            os << format_double(times[i]) << ',' << format_double(upper[i]) << ','
               << format_double(lower[i]) << '\n';
    }
    os << "# npp," << format_double(model.non_passage_probability()) << '\n';
    write_file_atomic(a.output, os.str());
    finish("density", a.config, g, clock, {a.output},
           {{"points", points},
            {"signed_time", signed_time},
            {"engine", {{"interior_order", engine.interior_order},
                        {"final_order", engine.final_order}}}});
    return 0;
}

int run_simulate(const CommonArgs& a, const GlobalOptions& g, std::size_t paths, double dt,
                 const std::string& histogram, int bins, std::string sidecar)
{
    Stopwatch clock;
    const Json j = read_json_file(a.config);
    if (j.contains("model") && j["model"] == "addm") {
        const AddmSimulationSpec sim = addm_simulation_from_json(j);
        if (g.dry_run) {
            std::cout << "config ok: " << sim.n_trials << " aDDM trials\n";
            return 0;
        }
        const auto trials = simulate_addm_dataset(sim.params, sim.fixations, sim.n_trials, g.seed,
                                                  sim.dt, sim.max_horizon, g.threads);
        if (sidecar.empty()) sidecar = fs::path(a.output).replace_extension(".json").string();
        write_trials(trials, a.output, sidecar);
        finish("simulate", a.config, g, clock, {a.output, sidecar},
               {{"n_trials", sim.n_trials}, {"dt", sim.dt}});
        return 0;
    }
    const ModelSpec spec = model_from_json(j);
    SimConfig cfg;
    cfg.dt = dt;
    cfg.n_paths = paths;
    cfg.seed = g.seed;
    cfg.threads = g.threads;
    cfg.validate();
    if (g.dry_run) {
        std::cout << "config ok: " << paths << " paths, dt " << dt << "\n";
        return 0;
    }
    const auto samples = simulate_model(spec, cfg);
    std::ostringstream os;
    write_samples_csv(os, samples);
    write_file_atomic(a.output, os.str());
    std::vector<fs::path> outputs{a.output};
    if (!histogram.empty()) {
        std::ostringstream hs;
        write_histogram_csv(hs, samples, spec.end_time(), bins);
        write_file_atomic(histogram, hs.str());
        outputs.emplace_back(histogram);
    }
    finish("simulate", a.config, g, clock, outputs, {{"paths", paths}, {"dt", dt}});
    return 0;
}

int run_kstest(const CommonArgs& a, const GlobalOptions& g, std::size_t paths, double dt,
               double alpha, bool unsigned_time)
{
    Stopwatch clock;
    const ModelSpec spec = model_from_json(read_json_file(a.config));
    SimConfig cfg;
    cfg.dt = dt;
    cfg.n_paths = paths;
    cfg.seed = g.seed;
    cfg.threads = g.threads;
    cfg.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("--alpha must lie in (0, 1)");
    if (g.dry_run) {
        std::cout << "config ok: " << paths << " paths, dt " << dt << "\n";
        return 0;
    }
    const EngineConfig engine = g.engine(spec.interior_order, spec.final_order);
    const ModelDensity model(spec, engine);
    const ResponseTimeCdf cdf(model.evaluator());
    const auto samples = simulate_model(spec, cfg);
    const KsResult ks = ks_test(samples, cdf, !unsigned_time, model.time_map());
    const OutcomeCounts counts = count_outcomes(samples);
    const Json report = {{"statistic", ks.statistic},
                         {"p_value", ks.p_value},
                         {"n", ks.n},
                         {"excluded_non_responses", ks.excluded},
                         {"alpha", alpha},
                         {"rejected", ks.p_value < alpha},
                         {"signed_time", !unsigned_time},
                         {"dt", dt},
                         {"paths", paths},
                         {"sample_upper", counts.upper},
                         {"sample_lower", counts.lower},
                         {"model_upper_mass", cdf.upper_mass()},
                         {"model_lower_mass", cdf.lower_mass()},
                         {"model_npp", model.non_passage_probability()}};
    write_file_atomic(a.output, report.dump(2) + "\n");
    finish("kstest", a.config, g, clock, {a.output},
           {{"engine", {{"interior_order", engine.interior_order},
                        {"final_order", engine.final_order}}}});
    std::cout << "KS D = " << ks.statistic << ", p = " << ks.p_value
              << (ks.p_value < alpha ? " (rejected)" : " (not rejected)") << " at alpha " << alpha
              << "\n";
    return 0;
}

int run_loglik(const CommonArgs& a, const GlobalOptions& g, int compare_threads)
{
    Stopwatch clock;
    const Json j = read_json_file(a.config);
    require_known_keys(j, {"data", "params", "max_horizon"}, "loglik config");
    const DatasetConfig d = read_dataset(j, a.config, g.seed, g.threads);
    const AddmParams params = j.contains("params") ? addm_params_from_json(j["params"]) : AddmParams{};
    const LikelihoodSettings settings = g.likelihood(d.max_horizon);
    if (g.dry_run) {
        std::cout << "config ok: " << d.trials.size() << " trials\n";
        return 0;
    }
    Stopwatch eval_clock;
    const LoglikResult r = dataset_loglik(d.trials, params, settings);
    const double eval_seconds = eval_clock.seconds();
    Json out = {{"loglik", r.value},
                {"n_trials", d.trials.size()},
                {"mean_negative_loglik", -r.value / double(d.trials.size())},
                {"params", addm_params_to_json(params)}};
    if (r.bad_trial) out["bad_trial"] = *r.bad_trial;
    if (compare_threads > 0) {
        LikelihoodSettings other = settings;
        other.threads = compare_threads;
        Stopwatch other_clock;
        const LoglikResult r2 = dataset_loglik(d.trials, params, other);
        const double other_seconds = other_clock.seconds();
        out["comparison"] = {{"threads", compare_threads},
                             {"loglik", r2.value},
                             {"abs_difference", std::abs(r2.value - r.value)},
                             {"seconds", other_seconds},
                             {"reference_seconds", eval_seconds},
                             {"wall_clock_ratio", eval_seconds / other_seconds}};
    }
    write_file_atomic(a.output, out.dump(2) + "\n");
    finish("loglik", a.config, g, clock, {a.output}, {{"evaluation_seconds", eval_seconds}});
    std::cout << "loglik " << format_double(r.value) << "\n";
    return 0;
}

int run_fit(const CommonArgs& a, const GlobalOptions& g, const std::string& init_from)
{
    Stopwatch clock;
    const Json j = read_json_file(a.config);
    require_known_keys(j, {"data", "init", "bounds", "free", "optimizer", "bootstrap", "max_horizon"},
                       "fit config");
    const DatasetConfig d = read_dataset(j, a.config, g.seed, g.threads);
    AddmParams init = j.contains("init") ? addm_params_from_json(j["init"]) : AddmParams{};
    if (!init_from.empty()) {
        const Json prev = read_json_file(init_from);
        if (!prev.contains("estimate"))
            throw ValidationError(init_from + ": missing key 'estimate'");
        init = addm_params_from_json(prev["estimate"]);
    }
    const ParamBounds bounds = j.contains("bounds") ? bounds_from_json(j["bounds"]) : ParamBounds{};
    const FreeMask free = j.contains("free") ? free_mask_from_json(j["free"]) : kAllFree;
    OptimizerControl ctl;
    if (j.contains("optimizer")) {
        const Json& o = j["optimizer"];
        const std::string ctx = "optimizer";
        require_known_keys(o, {"max_rounds", "max_evaluations", "param_tol", "loglik_tol",
                               "initial_step"},
                           ctx);
        ctl.max_rounds = int(get_number_or(o, "max_rounds", ctl.max_rounds, ctx));
        ctl.max_evaluations = int(get_number_or(o, "max_evaluations", ctl.max_evaluations, ctx));
        ctl.param_tol = get_number_or(o, "param_tol", ctl.param_tol, ctx);
        ctl.loglik_tol = get_number_or(o, "loglik_tol", ctl.loglik_tol, ctx);
        ctl.initial_step = get_number_or(o, "initial_step", ctl.initial_step, ctx);
    }
    std::size_t resamples = 0;
    double level = 0.95;
    if (j.contains("bootstrap")) {
        const Json& b = j["bootstrap"];
        require_known_keys(b, {"n_resamples", "level"}, "bootstrap");
        resamples = std::size_t(get_number(b, "n_resamples", "bootstrap"));
        level = get_number_or(b, "level", level, "bootstrap");
        if (!(level > 0.0 && level < 1.0)) throw ValidationError("bootstrap: level must be in (0, 1)");
    }
    if (!bounds.contains(init)) throw ValidationError("fit: init lies outside the bounds");
    const LikelihoodSettings settings = g.likelihood(d.max_horizon);
    if (g.dry_run) {
        std::cout << "config ok: " << d.trials.size() << " trials\n";
        return 0;
    }
    const FitResult fit = fit_mle(d.trials, init, bounds, free, ctl, settings);
    Json out = fit_to_json(fit);
    if (resamples > 0) {
        const BootstrapResult boot = bootstrap_ci(d.trials, fit.estimate, resamples, level,
                                                  g.seed, bounds, free, ctl, settings);
        out["intervals"] = intervals_to_json(boot.intervals);
        out["bootstrap"] = {{"n_resamples", resamples},
                            {"level", level},
                            {"failures", boot.failures}};
    }
    write_file_atomic(a.output, out.dump(2) + "\n");
    finish("fit", a.config, g, clock, {a.output});
    std::cout << "loglik " << format_double(fit.loglik) << " after " << fit.iterations
              << " rounds\n";
    return 0;
}

int run_mcmc(const CommonArgs& a, const GlobalOptions& g)
{
    Stopwatch clock;
    const Json j = read_json_file(a.config);
    require_known_keys(j, {"data", "init", "prior", "n_burn", "n_draws", "proposal_scale", "free",
                           "max_horizon"},
                       "mcmc config");
    const DatasetConfig d = read_dataset(j, a.config, g.seed, g.threads);
    const AddmParams init = j.contains("init") ? addm_params_from_json(j["init"]) : AddmParams{};
    Prior prior;
    if (j.contains("prior")) {
        const Json& p = j["prior"];
        require_known_keys(p, {"type", "bounds", "point"}, "prior");
        const std::string type = p.value("type", "uniform");
        if (type == "uniform") prior.kind = Prior::Kind::uniform;
        else if (type == "point") prior.kind = Prior::Kind::point;
        else throw ValidationError("prior: unknown type '" + type + "'");
        if (p.contains("bounds")) prior.bounds = bounds_from_json(p["bounds"]);
        prior.point = p.contains("point") ? addm_params_from_json(p["point"]) : init;
    }
    McmcConfig cfg;
    cfg.seed = g.seed;
    cfg.n_burn = std::size_t(get_number_or(j, "n_burn", double(cfg.n_burn), "mcmc config"));
    cfg.n_draws = std::size_t(get_number_or(j, "n_draws", double(cfg.n_draws), "mcmc config"));
    if (j.contains("proposal_scale")) {
        const Json& s = j["proposal_scale"];
        require_known_keys(s, {"eta", "kappa", "a", "b", "x0"}, "proposal_scale");
        for (std::size_t k = 0; k < kParamCount; ++k)
            cfg.proposal_scale[k] =
                get_number_or(s, param_names()[k], cfg.proposal_scale[k], "proposal_scale");
    }
    if (j.contains("free")) cfg.free = free_mask_from_json(j["free"]);
    if (!std::isfinite(prior.log_density(init)))
        throw ValidationError("mcmc: prior density is zero at init");
    const LikelihoodSettings settings = g.likelihood(d.max_horizon);
    if (g.dry_run) {
        std::cout << "config ok: " << d.trials.size() << " trials\n";
        return 0;
    }
    const McmcResult chain = mcmc_sample(d.trials, prior, init, cfg, settings);
    std::ostringstream os;
    os << "draw";
    for (const char* name : param_names()) os << ',' << name;
    os << ",loglik\n";
    for (std::size_t i = 0; i < chain.draws.size(); ++i) {
        os << i;
        for (double v : to_vector(chain.draws[i])) os << ',' << format_double(v);
        os << ',' << format_double(chain.logliks[i]) << '\n';
    }
    write_file_atomic(a.output, os.str());
    finish("mcmc", a.config, g, clock, {a.output},
           {{"acceptance_rate", chain.acceptance_rate},
            {"n_burn", cfg.n_burn},
            {"n_draws", cfg.n_draws}});
    std::cout << "acceptance rate " << chain.acceptance_rate << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"First-passage densities, simulation and inference for generalized drift "
                 "diffusion models"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--quad-order", g.quad_order, "Interior quadrature order")
        ->check(CLI::Range(1, 512));
    app.add_option("--final-quad-order", g.final_quad_order,
                   "Quadrature order of the final stage lattice")
        ->check(CLI::Range(1, 512));
    app.add_flag("--dry-run", g.dry_run, "Validate the config and exit without writing");

    auto add_common = [](CLI::App* sub, CommonArgs& a) {
        sub->add_option("config", a.config, "Config JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("-o,--output", a.output, "Output file")->required();
    };

    CommonArgs density_args;
    int points = 2048;
    bool signed_time = false;
    auto* density = app.add_subcommand("density", "Density curves and non-passage probability");
    add_common(density, density_args);
    density->add_option("--points", points, "Uniform grid points on (0, T_end]");
    density->add_flag("--signed-time", signed_time, "Write lower-boundary densities at negative t");

    CommonArgs sim_args;
    std::size_t paths = 10000;
    double dt = 1e-4;
    std::string histogram, sidecar;
    int bins = 100;
    auto* simulate = app.add_subcommand("simulate", "Euler-Maruyama first-passage samples");
    add_common(simulate, sim_args);
    simulate->add_option("--paths", paths, "Number of paths");
    simulate->add_option("--dt", dt, "Time step");
    simulate->add_option("--histogram", histogram, "Also write a histogram CSV");
    simulate->add_option("--bins", bins, "Histogram bins");
    simulate->add_option("--sidecar", sidecar, "Sidecar JSON for aDDM trial designs");

    CommonArgs ks_args;
    std::size_t ks_paths = 10000;
    double ks_dt = 1e-4, alpha = 0.01;
    bool unsigned_time = false;
    auto* kstest = app.add_subcommand("kstest", "One-sample KS test of simulated response times");
    add_common(kstest, ks_args);
    kstest->add_option("--paths", ks_paths, "Number of paths");
    kstest->add_option("--dt", ks_dt, "Time step");
    kstest->add_option("--alpha", alpha, "Significance level");
    kstest->add_flag("--unsigned-time", unsigned_time,
                     "Test response times only instead of signed times");

    CommonArgs ll_args;
    int compare_threads = 0;
    auto* loglik = app.add_subcommand("loglik", "Dataset log-likelihood");
    add_common(loglik, ll_args);
    loglik->add_option("--compare-threads", compare_threads,
                       "Repeat with this many threads and report the difference and timing");

    CommonArgs fit_args;
    std::string init_from;
    auto* fit = app.add_subcommand("fit", "Maximum-likelihood fit");
    add_common(fit, fit_args);
    fit->add_option("--init-from", init_from, "Start from the estimate in a previous fit JSON")
        ->check(CLI::ExistingFile);

    CommonArgs mcmc_args;
    auto* mcmc = app.add_subcommand("mcmc", "Random-walk Metropolis-Hastings chain");
    add_common(mcmc, mcmc_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*density) return run_density(density_args, g, points, signed_time);
        if (*simulate) return run_simulate(sim_args, g, paths, dt, histogram, bins, sidecar);
        if (*kstest) return run_kstest(ks_args, g, ks_paths, ks_dt, alpha, unsigned_time);
        if (*loglik) return run_loglik(ll_args, g, compare_threads);
        if (*fit) return run_fit(fit_args, g, init_from);
        if (*mcmc) return run_mcmc(mcmc_args, g);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
