#include "gddm/inference.hpp"

#include "gddm/parallel.hpp"
#include "gddm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace gddm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Neumaier's compensated sum, in index order.
double compensated_sum(std::span<const double> values)
{
    double sum = 0.0, comp = 0.0;
    for (double v : values) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) comp += (sum - t) + v;
        else comp += (v - t) + sum;
        sum = t;
    }
    return sum + comp;
}

}  // namespace

StageSchedule trial_schedule(const TrialRecord& trial, const AddmParams& params, double max_horizon)
{
    if (const auto* explicit_schedule = std::get_if<StageSchedule>(&trial.design))
        return *explicit_schedule;
    return build_addm_schedule(params, std::get<AddmCovariates>(trial.design), max_horizon);
}

double trial_likelihood(const TrialRecord& trial, const AddmParams& params,
                        const LikelihoodSettings& settings)
{
    const StageSchedule schedule = trial_schedule(trial, params, settings.max_horizon);
    if (const auto* r = std::get_if<Response>(&trial.observation)) {
        if (r->time > schedule.horizon()) return 0.0;
        return fptd(schedule, *r, settings.engine);
    }
    return npp(schedule, settings.engine);
}

LoglikResult dataset_loglik(std::span<const TrialRecord> trials, const AddmParams& params,
                            const LikelihoodSettings& settings)
{
    params.validate();
    std::vector<double> logs(trials.size());
    parallel_for(trials.size(), settings.threads, [&](std::size_t i) {
        const double f = trial_likelihood(trials[i], params, settings);
        logs[i] = f > 0.0 ? std::log(f) : kNegInf;
    });
    LoglikResult out;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        if (logs[i] == kNegInf) {
            out.bad_trial = i;
            out.value = kNegInf;
            return out;
        }
    }
    out.value = compensated_sum(logs);
    return out;
}

ParamVector to_vector(const AddmParams& p)
{
    return {p.eta, p.kappa, p.a, p.b, p.x0};
}

AddmParams from_vector(const ParamVector& v)
{
    return {v[0], v[1], v[2], v[3], v[4]};
}

const std::array<const char*, kParamCount>& param_names()
{
    static const std::array<const char*, kParamCount> names{"eta", "kappa", "a", "b", "x0"};
    return names;
}

ParamVector to_unconstrained(const AddmParams& p)
{
    return {std::log(p.eta / (1.0 - p.eta)), std::log(p.kappa), std::log(p.a), p.b,
            std::atanh(p.x0 / p.a)};
}

AddmParams from_unconstrained(const ParamVector& z)
{
    AddmParams p;
    p.eta = 1.0 / (1.0 + std::exp(-z[0]));
    p.kappa = std::exp(z[1]);
    p.a = std::exp(z[2]);
    p.b = z[3];
    p.x0 = p.a * std::tanh(z[4]);
    return p;
}

bool ParamBounds::contains(const AddmParams& p) const
{
    const ParamVector v = to_vector(p);
    for (std::size_t j = 0; j < kParamCount; ++j) {
        if (!(v[j] >= lower[j] && v[j] <= upper[j])) return false;
    }
    return p.eta > 0.0 && p.eta < 1.0 && p.kappa > 0.0 && p.a > 0.0 && std::abs(p.x0) < p.a;
}

void ParamBounds::validate() const
{
    for (std::size_t j = 0; j < kParamCount; ++j) {
        if (!(lower[j] <= upper[j]))
            throw ValidationError(std::string("empty bounds for ") + param_names()[j]);
    }
}

namespace {

struct Vertex {
    ParamVector z;
    double cost;  // negative loglik, +inf when infeasible
};

class Objective {
public:
    Objective(std::span<const TrialRecord> trials, const ParamBounds& bounds, const FreeMask& free,
              const AddmParams& fixed, const LikelihoodSettings& settings)
        : trials_(trials), bounds_(bounds), free_(free), fixed_(to_vector(fixed)), settings_(settings)
    {
    }

    // Natural parameters: free components from z, the others held at their
    // initial values.
    AddmParams natural(const ParamVector& z) const
    {
        ParamVector v = to_vector(from_unconstrained(z));
        for (std::size_t j = 0; j < kParamCount; ++j) {
            if (!free_[j]) v[j] = fixed_[j];
        }
        return from_vector(v);
    }

    double operator()(const ParamVector& z)
    {
        ++evaluations;
        const AddmParams p = natural(z);
        if (!bounds_.contains(p)) return std::numeric_limits<double>::infinity();
        const double ll = dataset_loglik(trials_, p, settings_).value;
        return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
    }

    int evaluations = 0;

private:
    std::span<const TrialRecord> trials_;
    const ParamBounds& bounds_;
    FreeMask free_;
    ParamVector fixed_;
    const LikelihoodSettings& settings_;
};

// One Nelder–Mead run over the free coordinates, started from `start`.
Vertex nelder_mead(Objective& f, const Vertex& start, const FreeMask& free,
                   const OptimizerControl& ctl)
{
    std::vector<std::size_t> dims;
    for (std::size_t j = 0; j < kParamCount; ++j) {
        if (free[j]) dims.push_back(j);
    }
    std::vector<Vertex> simplex{start};
    for (std::size_t d : dims) {
        Vertex v = start;
        v.z[d] += ctl.initial_step;
        v.cost = f(v.z);
        simplex.push_back(v);
    }
    auto by_cost = [](const Vertex& a, const Vertex& b) { return a.cost < b.cost; };
    auto combine = [&](const ParamVector& c, const ParamVector& x, double coef) {
        ParamVector out = c;
        for (std::size_t d : dims) out[d] = c[d] + coef * (x[d] - c[d]);
        return out;
    };
    const std::size_t n = dims.size();
    while (f.evaluations < ctl.max_evaluations) {
        std::stable_sort(simplex.begin(), simplex.end(), by_cost);
        double spread = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            for (std::size_t d : dims)
                spread = std::max(spread, std::abs(simplex[i].z[d] - simplex[0].z[d]));
        }
        const double cost_spread = simplex[n].cost - simplex[0].cost;
        if (spread < ctl.param_tol && cost_spread < ctl.loglik_tol) break;

        ParamVector centroid = simplex[0].z;
        for (std::size_t d : dims) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += simplex[i].z[d];
            centroid[d] = s / n;
        }
        Vertex& worst = simplex[n];
        const Vertex reflected{combine(centroid, worst.z, -1.0), 0.0};
        const double fr = f(reflected.z);
        if (fr < simplex[0].cost) {
            const ParamVector expanded = combine(centroid, worst.z, -2.0);
            const double fe = f(expanded);
            worst = fe < fr ? Vertex{expanded, fe} : Vertex{reflected.z, fr};
            continue;
        }
        if (fr < simplex[n - 1].cost) {
            worst = {reflected.z, fr};
            continue;
        }
        const bool outside = fr < worst.cost;
        const ParamVector contracted =
            outside ? combine(centroid, worst.z, -0.5) : combine(centroid, worst.z, 0.5);
        const double fc = f(contracted);
        if (fc < (outside ? fr : worst.cost)) {
            worst = {contracted, fc};
            continue;
        }
        for (std::size_t i = 1; i <= n; ++i) {
            simplex[i].z = combine(simplex[0].z, simplex[i].z, 0.5);
            simplex[i].cost = f(simplex[i].z);
        }
    }
    return *std::min_element(simplex.begin(), simplex.end(), by_cost);
}

}  // namespace

FitResult fit_mle(std::span<const TrialRecord> trials, const AddmParams& init,
                  const ParamBounds& bounds, const FreeMask& free, const OptimizerControl& ctl,
                  const LikelihoodSettings& settings)
{
    init.validate();
    bounds.validate();
    if (!bounds.contains(init)) throw ValidationError("initial parameters outside the bounds");
    Objective f(trials, bounds, free, init, settings);
    Vertex start{to_unconstrained(init), 0.0};
    start.cost = f(start.z);
    if (!std::isfinite(start.cost))
        throw NumericalError("log-likelihood is not finite at the initial parameters");

    FitResult result;
    for (int round = 1; round <= ctl.max_rounds; ++round) {
        result.iterations = round;
        const Vertex best = nelder_mead(f, start, free, ctl);
        double moved = 0.0;
        for (std::size_t j = 0; j < kParamCount; ++j)
            moved = std::max(moved, std::abs(best.z[j] - start.z[j]));
        const bool settled = moved < ctl.param_tol && start.cost - best.cost < ctl.loglik_tol;
        if (!settled) start = best;
        if (settled || f.evaluations >= ctl.max_evaluations) {
            result.converged = settled;
            break;
        }
    }
    // A search that never left its start returns the caller's values unchanged.
    const bool stayed = result.converged && result.iterations == 1;
    result.estimate = stayed ? init : f.natural(start.z);
    result.loglik = -start.cost;
    result.evaluations = f.evaluations;
    if (!result.converged) {
        result.message = f.evaluations >= ctl.max_evaluations ? "evaluation cap reached"
                                                              : "round cap reached";
    } else {
        result.message = "converged";
    }
    return result;
}

double Prior::log_density(const AddmParams& p) const
{
    if (kind == Kind::point) return to_vector(p) == to_vector(point) ? 0.0 : kNegInf;
    return bounds.contains(p) ? 0.0 : kNegInf;
}

McmcResult mcmc_sample(std::span<const TrialRecord> trials, const Prior& prior,
                       const AddmParams& init, const McmcConfig& cfg,
                       const LikelihoodSettings& settings)
{
    double log_prior = prior.log_density(init);
    if (log_prior == kNegInf) throw ValidationError("prior density is zero at the initial point");
    double loglik = dataset_loglik(trials, init, settings).value;
    if (!std::isfinite(loglik))
        throw NumericalError("log-likelihood is not finite at the initial point");

    std::mt19937_64 rng(path_seed(cfg.seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ParamVector current = to_vector(init);
    McmcResult out;
    out.draws.reserve(cfg.n_draws);
    std::size_t accepted = 0;
    const std::size_t total = cfg.n_burn + cfg.n_draws;
    for (std::size_t it = 0; it < total; ++it) {
        ParamVector proposal = current;
        for (std::size_t j = 0; j < kParamCount; ++j) {
            if (cfg.free[j]) proposal[j] += cfg.proposal_scale[j] * normal(rng);
        }
        const AddmParams candidate = from_vector(proposal);
        const double cand_prior = prior.log_density(candidate);
        const double u = unit(rng);
        if (cand_prior != kNegInf) {
            const double cand_ll = dataset_loglik(trials, candidate, settings).value;
            const double log_ratio = cand_prior + cand_ll - log_prior - loglik;
            if (std::isfinite(cand_ll) && std::log(u) < log_ratio) {
                current = proposal;
                log_prior = cand_prior;
                loglik = cand_ll;
                ++accepted;
            }
        }
        if (it >= cfg.n_burn) {
            out.draws.push_back(from_vector(current));
            out.logliks.push_back(loglik);
        }
    }
    out.acceptance_rate = total ? double(accepted) / double(total) : 0.0;
    return out;
}

namespace {

// Linear-interpolation sample quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q)
{
    const double pos = q * double(sorted.size() - 1);
    const std::size_t i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= sorted.size()) return sorted.back();
    return sorted[i] + (pos - double(i)) * (sorted[i + 1] - sorted[i]);
}

}  // namespace

BootstrapResult bootstrap_ci(std::span<const TrialRecord> trials, const AddmParams& estimate,
                             std::size_t n_resamples, double level, std::uint64_t seed,
                             const ParamBounds& bounds, const FreeMask& free,
                             const OptimizerControl& ctl, const LikelihoodSettings& settings)
{
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
    if (trials.empty()) throw ValidationError("bootstrap needs trials");
    BootstrapResult out;
    out.estimate = estimate;
    for (std::size_t r = 0; r < n_resamples; ++r) {
        std::mt19937_64 rng(path_seed(seed, r));
        std::uniform_int_distribution<std::size_t> pick(0, trials.size() - 1);
        std::vector<TrialRecord> resample;
        resample.reserve(trials.size());
        for (std::size_t i = 0; i < trials.size(); ++i) resample.push_back(trials[pick(rng)]);
        try {
            const FitResult fit = fit_mle(resample, estimate, bounds, free, ctl, settings);
            if (!fit.converged) {
                ++out.failures;
                continue;
            }
            out.replicates.push_back(fit.estimate);
        } catch (const std::exception&) {
            ++out.failures;
        }
    }
    const double alpha = 1.0 - level;
    const ParamVector est = to_vector(estimate);
    for (std::size_t j = 0; j < kParamCount; ++j) {
        if (out.replicates.empty()) {
            out.intervals[j] = {std::nan(""), std::nan("")};
            continue;
        }
        std::vector<double> values;
        for (const AddmParams& p : out.replicates) values.push_back(to_vector(p)[j]);
        std::sort(values.begin(), values.end());
        const double lo = quantile(values, 0.5 * alpha);
        const double hi = quantile(values, 1.0 - 0.5 * alpha);
        out.intervals[j] = {2.0 * est[j] - hi, 2.0 * est[j] - lo};
    }
    return out;
}

}  // namespace gddm
