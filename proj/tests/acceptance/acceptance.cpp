// Runs every primary acceptance criterion and prints one PASS/FAIL line each.
// Optional arguments select criteria by name, e.g. `acceptance conservation ks`.

#include "gddm/config.hpp"
#include "gddm/engine.hpp"
#include "gddm/inference.hpp"
#include "gddm/parallel.hpp"
#include "gddm/quadrature.hpp"
#include "gddm/simulate.hpp"
#include "gddm/single_stage.hpp"
#include "gddm/transforms.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace gddm;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = GDDM_CONFIG_DIR;
const AddmParams kTruth{0.7, 0.5, 2.1, 0.3, -0.2};

struct Verdict {
    bool pass = false;
    std::string detail;
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

std::string fmt(const char* format, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

StageSchedule example_piecewise_drift()
{
    return StageSchedule::make({0, 1, 2.5, 3.5, 4, 5}, {1, -0.2, 1.5, 0.5, -1}, {1, 1, 1, 1, 1},
                               {1.5, 1.2, 0.75, 0.45, 0.3, 0.0},
                               {-1.5, -1.2, -0.75, -0.45, -0.3, 0.0},
                               InitialCondition::point(-0.5));
}

std::vector<TrialRecord> addm_trials(std::size_t n, std::uint64_t seed)
{
    return simulate_addm_dataset(kTruth, {}, n, seed, 1e-4, kNoHorizonCap, hardware_threads());
}

LikelihoodSettings orders(int interior, int final_order, int threads = 1)
{
    LikelihoodSettings s;
    s.engine.interior_order = interior;
    s.engine.final_order = final_order;
    s.threads = threads;
    return s;
}

// ---------------------------------------------------------------------------

Verdict conservation()
{
    Stopwatch clock;
    const ScheduleEvaluator ev(example_piecewise_drift());
    const ResponseTimeCdf cdf(ev);
    const double defect = cdf.response_mass() + ev.non_passage_probability() - 1.0;
    const double sec = clock.seconds();
    return {std::abs(defect) <= 1e-6 && sec < 1.0,
            fmt("|mass - 1| = %.2e (tol 1e-6), %.3f s (limit 1 s)", std::abs(defect), sec)};
}

Verdict analytic_oracle()
{
    Stopwatch clock;
    const double mu = 0.8, a = 1.0;
    const CanonicalStageParams p{mu, a, 0.0, -60.0, 0.0, 10.0};
    double worst = 0.0;
    for (double t : {0.1, 0.5, 1.0, 2.0}) {
        const double ig = a / std::sqrt(2.0 * std::numbers::pi * t * t * t) *
                          std::exp(-(a - mu * t) * (a - mu * t) / (2.0 * t));
        worst = std::max(worst, std::abs(fptd_upper_basic(t, p) / ig - 1.0));
    }
    const double sec = clock.seconds();
    return {worst < 1e-6 && sec < 1.0,
            fmt("max rel. err %.2e (tol 1e-6), %.3f s (limit 1 s)", worst, sec)};
}

Verdict stage_splitting()
{
    const int m = 40;
    const double T = 5.0;
    auto schedule = [&](std::vector<double> bp) {
        const std::size_t d = bp.size() - 1;
        return StageSchedule::make(std::move(bp), std::vector<double>(d, 0.3),
                                   std::vector<double>(d, 1.0), std::vector<double>(d + 1, 1.5),
                                   std::vector<double>(d + 1, -1.5), InitialCondition::point(0.2));
    };
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, T);
    std::vector<double> bp{0.0, T};
    for (int i = 0; i < 10; ++i) bp.push_back(u(rng));
    std::sort(bp.begin(), bp.end());
    const StageSchedule split = schedule(bp);
    const StageSchedule whole = schedule({0.0, T});

    const DensityLattice a = propagate_stage(init_lattice(whole, m), whole.stage(0), m);
    DensityLattice b = init_lattice(split, m);
    for (std::size_t k = 0; k < split.stage_count(); ++k) b = propagate_stage(b, split.stage(k), m);
    double npd_diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        npd_diff = std::max(npd_diff, std::abs(a.values[i] - b.values[i]));

    EngineConfig cfg;
    cfg.interior_order = cfg.final_order = m;
    const ScheduleEvaluator es(split, cfg), ew(whole, cfg);
    double fptd_diff = 0.0;
    for (int i = 1; i <= 50; ++i) {
        const double t = T * i / 50.0 - 1e-3;
        for (auto lab : {BoundaryLabel::upper, BoundaryLabel::lower})
            fptd_diff = std::max(fptd_diff, std::abs(es.raw_density(t, lab) - ew.raw_density(t, lab)));
    }
    double shortest = T;
    for (std::size_t k = 0; k + 1 < bp.size(); ++k) shortest = std::min(shortest, bp[k + 1] - bp[k]);
    return {npd_diff <= 1e-8 && fptd_diff <= 1e-8 && a.size() == b.size(),
            fmt("max node diff %.2e, max density diff %.2e (tol 1e-8), shortest stage %.4f",
                npd_diff, fptd_diff, shortest)};
}

Verdict ks_validation()
{
    Stopwatch clock;
    std::ostringstream detail;
    bool pass = true;
    for (const char* name : {"example_5_1", "example_5_2", "example_5_3"}) {
        const ModelSpec spec = model_from_json(read_json_file(kConfigs / (std::string(name) + ".json")));
        EngineConfig engine;
        if (spec.interior_order) engine.interior_order = *spec.interior_order;
        if (spec.final_order) engine.final_order = *spec.final_order;
        const ModelDensity model(spec, engine);
        const ResponseTimeCdf cdf(model.evaluator());
        SimConfig sim;
        sim.dt = 1e-4;
        sim.n_paths = 10000;
        sim.seed = 1;
        sim.threads = hardware_threads();
        const auto samples = simulate_model(spec, sim);
        const KsResult ks = ks_test(samples, cdf, true, model.time_map());
        pass = pass && ks.p_value >= 0.01;
        detail << name << " D=" << fmt("%.4f", ks.statistic) << " p=" << fmt("%.3f", ks.p_value)
               << "; ";
    }
    const double sec = clock.seconds();
    pass = pass && sec < 300.0;
    detail << fmt("%.1f s (limit 300 s)", sec);
    return {pass, detail.str()};
}

Verdict quadrature_convergence()
{
    const auto trials = addm_trials(5000, 2024);
    auto ell = [&](int m) {
        return -dataset_loglik(trials, kTruth, orders(m, m, hardware_threads())).value /
               double(trials.size());
    };
    const double reference = ell(200);
    std::vector<double> errors;
    std::ostringstream detail;
    for (int m : {10, 15, 20, 25, 30, 35}) {
        errors.push_back(std::abs(ell(m) - reference) / std::abs(reference));
        detail << "m=" << m << ":" << fmt("%.2e", errors.back()) << " ";
    }
    int inversions = 0;
    for (std::size_t i = 1; i < errors.size(); ++i)
        if (errors[i] > errors[i - 1]) ++inversions;
    detail << "inversions " << inversions;
    return {inversions <= 1 && errors.back() < 1e-4, detail.str()};
}

Verdict throughput()
{
    const auto trials = addm_trials(50000, 77);
    Stopwatch serial_clock;
    const double serial = dataset_loglik(trials, kTruth, orders(30, 35, 1)).value;
    const double t1 = serial_clock.seconds();
    Stopwatch parallel_clock;
    const double parallel = dataset_loglik(trials, kTruth, orders(30, 35, 4)).value;
    const double t4 = parallel_clock.seconds();
    const double speedup = t1 / t4;
    return {t1 < 30.0 && speedup >= 2.5 && std::abs(serial - parallel) < 1e-10,
            fmt("1 worker %.2f s (limit 30 s); 4 workers %.2f s, speedup %.2fx (need 2.5x) on %d "
                "hardware threads",
                t1, t4, speedup, hardware_threads())};
}

Verdict parameter_recovery()
{
    const auto trials = addm_trials(5000, 11);
    Stopwatch clock;
    const FitResult fit = fit_mle(trials, {0.6, 0.6, 2.0, 0.2, -0.1}, {}, kAllFree, {},
                                  orders(30, 35, 8));
    const double sec = clock.seconds();
    const ParamVector est = to_vector(fit.estimate), truth = to_vector(kTruth);
    double worst = 0.0;
    std::ostringstream detail;
    for (std::size_t j = 0; j < kParamCount; ++j) {
        worst = std::max(worst, std::abs(est[j] - truth[j]));
        detail << param_names()[j] << "=" << fmt("%.4f", est[j]) << " ";
    }
    detail << fmt("max |err| %.4f (tol 0.05), %d evaluations, %.0f s at 8 workers (limit 600 s)",
                  worst, fit.evaluations, sec);
    return {fit.converged && worst <= 0.05 && sec < 600.0, detail.str()};
}

Verdict mcmc_sanity()
{
    const auto trials = addm_trials(2000, 19);
    const LikelihoodSettings settings = orders(30, 35, hardware_threads());
    constexpr FreeMask kappa_only{false, true, false, false, false};
    const FitResult mle = fit_mle(trials, kTruth, {}, kappa_only, {}, settings);
    McmcConfig cfg;
    cfg.free = kappa_only;
    cfg.n_burn = 200;
    cfg.n_draws = 1000;
    cfg.proposal_scale[1] = 0.02;
    cfg.seed = 3;
    const McmcResult chain = mcmc_sample(trials, Prior{}, kTruth, cfg, settings);
    double mean = 0.0, sq = 0.0;
    for (const auto& d : chain.draws) mean += d.kappa;
    mean /= double(chain.draws.size());
    for (const auto& d : chain.draws) sq += (d.kappa - mean) * (d.kappa - mean);
    const double sd = std::sqrt(sq / double(chain.draws.size() - 1));
    return {std::abs(mean - 0.5) <= 0.03 && std::abs(mean - mle.estimate.kappa) < sd,
            fmt("posterior mean %.4f, sd %.4f, MLE %.4f, acceptance %.2f", mean, sd,
                mle.estimate.kappa, chain.acceptance_rate)};
}

Verdict gauss_legendre_exactness()
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    double worst = 0.0;
    for (int m : {2, 5, 10, 30}) {
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> c(2 * m);
            for (double& x : c) x = coef(rng);
            const double got = integrate(gauss_legendre(m), -1.0, 1.0, [&](double x) {
                double v = 0.0;
                for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
                return v;
            });
            long double exact = 0.0L;
            for (std::size_t k = 0; k < c.size(); k += 2) exact += 2.0L * c[k] / (long double)(k + 1);
            worst = std::max(worst, std::abs(got - double(exact)) / std::max(1.0, std::abs(double(exact))));
        }
    }
    return {worst <= 1e-12, fmt("max error %.2e on [-1, 1] (tol 1e-12)", worst)};
}

Verdict transform_correctness()
{
    const double theta = 1.0, lambda = 1.5, sigma = 2.0, horizon = 3.0;
    CherkasovDomain dom;
    dom.x_lower = -2.0;
    dom.x_upper = 2.0;
    dom.horizon = horizon;
    const auto ch = transform_cherkasov(
        [=](double) { return 2.0 * theta * lambda / sigma; }, [=](double) { return -2.0 * theta; },
        [=](double, double) { return sigma; },
        [=](double x, double) { return theta * (lambda - x); }, dom);
    const auto ou = transform_ou(theta, lambda, sigma);
    const double shift = ch.state_map(0.0, 0.0) - ou.state_map(0.0, 0.0);
    double map_err = 0.0;
    for (int i = 0; i <= 30; ++i) {
        const double t = horizon * i / 30.0;
        map_err = std::max(map_err, std::abs(ch.time_map(t) - ou.time_map(t)) /
                                        std::max(1.0, ou.time_map(t)));
        for (double x : {-1.5, -0.5, 0.0, 0.8, 1.9})
            map_err = std::max(map_err, std::abs(ch.state_map(x, t) - shift - ou.state_map(x, t)) /
                                            std::max(1.0, std::abs(ou.state_map(x, t))));
    }

    const ModelSpec spec = model_from_json(read_json_file(kConfigs / "example_5_3.json"));
    EngineConfig engine;
    if (spec.interior_order) engine.interior_order = *spec.interior_order;
    if (spec.final_order) engine.final_order = *spec.final_order;
    const ModelDensity model(spec, engine);
    const ScheduleEvaluator& ev = model.evaluator();
    const auto& bp = ev.schedule().breakpoints;
    const QuadratureRule& rule = gauss_legendre(16);
    auto graded = [&](auto f, double a, double b) {
        double sum = 0.0, lo = a, width = std::min(1e-7, (b - a) / 2);
        while (lo < b) {
            const double hi = std::min(b, lo + width);
            sum += integrate(rule, lo, hi, f);
            lo = hi;
            width = std::min(2.0 * width, 0.01);
        }
        return sum;
    };
    const TimeFunction inverse = ou.time_inverse;
    double transformed = 0.0, original = 0.0;
    for (std::size_t k = 0; k + 1 < bp.size(); ++k) {
        for (auto lab : {BoundaryLabel::upper, BoundaryLabel::lower}) {
            transformed += graded([&](double s) { return ev.raw_density(s, lab); }, bp[k], bp[k + 1]);
            original += graded([&](double t) { return model.density(t, lab); }, inverse(bp[k]),
                               std::min(horizon, inverse(bp[k + 1])));
        }
    }
    const double jac_err = std::abs(original - transformed);
    return {map_err <= 1e-12 && jac_err <= 1e-8,
            fmt("Cherkasov vs O-U max rel. diff %.2e (tol 1e-12); |int f dt - int f~ ds| = %.2e "
                "(tol 1e-8)",
                map_err, jac_err)};
}

}  // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"conservation", conservation},
        {"analytic_oracle", analytic_oracle},
        {"stage_splitting", stage_splitting},
        {"gauss_legendre_exactness", gauss_legendre_exactness},
        {"transform_correctness", transform_correctness},
        {"ks_validation", ks_validation},
        {"quadrature_convergence", quadrature_convergence},
        {"throughput", throughput},
        {"parameter_recovery", parameter_recovery},
        {"mcmc_sanity", mcmc_sanity},
    };
    std::vector<std::string> selected(argv + 1, argv + argc);
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end())
            continue;
        Verdict o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
