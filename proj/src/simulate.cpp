#include "gddm/simulate.hpp"

#include "gddm/parallel.hpp"
#include "gddm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace gddm {

void SimConfig::validate() const
{
    if (!(dt > 0.0)) throw ValidationError("simulation step must be positive");
    if (n_paths < 1) throw ValidationError("need at least one path");
}

std::string to_string(Outcome outcome)
{
    switch (outcome) {
    case Outcome::upper: return "upper";
    case Outcome::lower: return "lower";
    case Outcome::none: return "none";
    }
    return "none";
}

Outcome parse_outcome(const std::string& text)
{
    if (text == "upper") return Outcome::upper;
    if (text == "lower") return Outcome::lower;
    if (text == "none") return Outcome::none;
    throw ValidationError("unknown outcome '" + text + "'");
}

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index)
{
    // splitmix64 of the combined key
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

InitialSampler::InitialSampler(const InitialCondition& initial)
    : points_(initial.points().begin(), initial.points().end()), density_(initial.density())
{
    double acc = 0.0;
    for (double w : initial.weights()) {
        acc += w;
        cumulative_weights_.push_back(acc);
    }
    if (density_) {
        acc += density_->mass;
        cumulative_weights_.push_back(acc);
        if (!density_->form) {
            constexpr int cells = 4096;
            const double lo = density_->support_lower, hi = density_->support_upper;
            const QuadratureRule& rule = gauss_legendre(8);
            grid_.push_back(lo);
            grid_cdf_.push_back(0.0);
            for (int i = 0; i < cells; ++i) {
                const double a = lo + (hi - lo) * i / cells;
                const double b = lo + (hi - lo) * (i + 1) / cells;
                grid_.push_back(b);
                grid_cdf_.push_back(grid_cdf_.back() + integrate(rule, a, b, density_->pdf));
            }
        }
    }
    if (cumulative_weights_.empty() || !(acc > 0.0))
        throw ValidationError("initial condition has no mass to sample");
}

double InitialSampler::operator()(std::mt19937_64& rng) const
{
    if (points_.size() == 1 && !density_) return points_[0];
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double pick = unit(rng) * cumulative_weights_.back();
    const std::size_t part = std::min<std::size_t>(
        std::upper_bound(cumulative_weights_.begin(), cumulative_weights_.end(), pick) -
            cumulative_weights_.begin(),
        cumulative_weights_.size() - 1);
    if (part < points_.size()) return points_[part];

    const ContinuousDensity& d = *density_;
    const double lo = d.support_lower, hi = d.support_upper;
    if (d.form && d.form->kind == DensityForm::Kind::uniform) return lo + (hi - lo) * unit(rng);
    if (d.form && d.form->kind == DensityForm::Kind::beta) {
        std::gamma_distribution<double> ga(d.form->alpha, 1.0), gb(d.form->beta, 1.0);
        const double x = ga(rng);
        const double y = gb(rng);
        return lo + (hi - lo) * x / (x + y);
    }
    const double target = unit(rng) * grid_cdf_.back();
    const std::size_t i = std::min<std::size_t>(
        std::lower_bound(grid_cdf_.begin(), grid_cdf_.end(), target) - grid_cdf_.begin(),
        grid_cdf_.size() - 1);
    if (i == 0) return grid_[0];
    const double span = grid_cdf_[i] - grid_cdf_[i - 1];
    const double frac = span > 0.0 ? (target - grid_cdf_[i - 1]) / span : 0.5;
    return grid_[i - 1] + frac * (grid_[i] - grid_[i - 1]);
}

namespace {

// Runs one path per index in parallel with per-path generators.
template <class Path>
std::vector<FirstPassageSample> run_paths(const SimConfig& cfg, Path&& path)
{
    cfg.validate();
    std::vector<FirstPassageSample> out(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t i) {
        std::mt19937_64 rng(path_seed(cfg.seed, i));
        out[i] = path(rng);
    });
    return out;
}

// Euler–Maruyama path through a stage schedule from x.
FirstPassageSample schedule_path(const StageSchedule& s, double x, double dt,
                                 std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    const double horizon = s.horizon();
    const auto& t = s.breakpoints;
    const auto up = s.upper.values();
    const auto lo = s.lower.values();
    const std::size_t d = s.stage_count();
    std::size_t coef_stage = 0;   // t_k <= previous grid time < t_{k+1}
    std::size_t bound_stage = 0;  // t_k < current grid time <= t_{k+1}
    double prev = 0.0;
    for (std::uint64_t n = 1;; ++n) {
        const double r = std::min(double(n) * dt, horizon);
        while (coef_stage + 1 < d && prev >= t[coef_stage + 1]) ++coef_stage;
        const double h = r - prev;
        x += s.mu[coef_stage] * h + s.sigma[coef_stage] * std::sqrt(h) * normal(rng);
        while (bound_stage + 1 < d && r > t[bound_stage + 1]) ++bound_stage;
        const double frac = (r - t[bound_stage]) / (t[bound_stage + 1] - t[bound_stage]);
        const double u = up[bound_stage] + frac * (up[bound_stage + 1] - up[bound_stage]);
        const double l = lo[bound_stage] + frac * (lo[bound_stage + 1] - lo[bound_stage]);
        if (x >= u) return {r, Outcome::upper};
        if (x <= l) return {r, Outcome::lower};
        if (r >= horizon) return {horizon, Outcome::none};
        prev = r;
    }
}

}  // namespace

std::vector<FirstPassageSample> simulate_fpt(const StageSchedule& schedule, const SimConfig& cfg)
{
    require_valid(schedule);
    const InitialSampler initial(schedule.initial);
    return run_paths(cfg, [&](std::mt19937_64& rng) {
        const double x0 = initial(rng);
        return schedule_path(schedule, x0, cfg.dt, rng);
    });
}

std::vector<FirstPassageSample> simulate_fpt(const SdeModel& model, const SimConfig& cfg)
{
    if (!(model.horizon > 0.0)) throw ValidationError("simulation horizon must be positive");
    const InitialSampler initial(model.initial);
    return run_paths(cfg, [&](std::mt19937_64& rng) -> FirstPassageSample {
        std::normal_distribution<double> normal(0.0, 1.0);
        double x = initial(rng);
        double prev = 0.0;
        for (std::uint64_t n = 1;; ++n) {
            const double r = std::min(double(n) * cfg.dt, model.horizon);
            const double h = r - prev;
            x += model.drift(x, prev) * h + model.diffusion(x, prev) * std::sqrt(h) * normal(rng);
            if (x >= model.upper(r)) return {r, Outcome::upper};
            if (x <= model.lower(r)) return {r, Outcome::lower};
            if (r >= model.horizon) return {model.horizon, Outcome::none};
            prev = r;
        }
    });
}

OutcomeCounts count_outcomes(std::span<const FirstPassageSample> samples)
{
    OutcomeCounts c;
    for (const auto& s : samples) {
        if (s.outcome == Outcome::upper) ++c.upper;
        else if (s.outcome == Outcome::lower) ++c.lower;
        else ++c.none;
    }
    return c;
}

void write_samples_csv(std::ostream& os, std::span<const FirstPassageSample> samples)
{
    os << "time,outcome\n";
    os.precision(17);
    for (const auto& s : samples) os << s.time << ',' << to_string(s.outcome) << '\n';
}

void write_histogram_csv(std::ostream& os, std::span<const FirstPassageSample> samples,
                         double horizon, int bins)
{
    if (bins < 1 || !(horizon > 0.0)) throw ValidationError("histogram needs bins and a horizon");
    std::vector<std::size_t> upper(bins, 0), lower(bins, 0);
    for (const auto& s : samples) {
        if (s.outcome == Outcome::none) continue;
        const int b = std::clamp(int(std::ceil(s.time / horizon * bins)) - 1, 0, bins - 1);
        (s.outcome == Outcome::upper ? upper : lower)[b]++;
    }
    const double width = horizon / bins;
    const double norm = 1.0 / (double(samples.size()) * width);
    os << "bin_left,bin_right,density,outcome\n";
    os.precision(17);
    for (int b = 0; b < bins; ++b)
        os << b * width << ',' << (b + 1) * width << ',' << upper[b] * norm << ",upper\n";
    for (int b = 0; b < bins; ++b)
        os << b * width << ',' << (b + 1) * width << ',' << lower[b] * norm << ",lower\n";
}

double kolmogorov_p_value(double statistic, std::size_t n)
{
    if (n == 0) throw ValidationError("KS test needs at least one sample");
    const double rn = std::sqrt(double(n));
    const double lambda = (rn + 0.12 + 0.11 / rn) * statistic;
    if (lambda <= 0.0) return 1.0;
    constexpr double pi = std::numbers::pi;
    if (lambda < 1.18) {
        // Theta-function form, accurate for small lambda.
        const double y = std::exp(-pi * pi / (8.0 * lambda * lambda));
        double sum = 0.0;
        for (int j = 1; j <= 9; j += 2) sum += std::pow(y, j * j);
        return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * sum, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 == 1 ? term : -term);
        if (term < 1e-300) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf)
{
    if (samples.empty()) throw ValidationError("KS test needs at least one sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = double(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    KsResult r;
    r.statistic = d;
    r.n = sorted.size();
    r.p_value = kolmogorov_p_value(d, r.n);
    return r;
}

ResponseTimeCdf::ResponseTimeCdf(const ScheduleEvaluator& evaluator)
    : ResponseTimeCdf(evaluator, Options{})
{
}

ResponseTimeCdf::ResponseTimeCdf(const ScheduleEvaluator& evaluator, Options options)
{
    const StageSchedule& s = evaluator.schedule();
    const double horizon = s.horizon();
    const double max_panel = options.max_panel > 0.0 ? options.max_panel : horizon / 2000.0;
    const QuadratureRule& rule = gauss_legendre(options.panel_order);

    grid_.push_back(0.0);
    for (std::size_t k = 0; k < s.stage_count(); ++k) {
        const double a = s.breakpoints[k], b = s.breakpoints[k + 1];
        const double len = b - a;
        double edge = a;
        // Geometric panels resolve the narrow spikes that follow a stage start.
        for (double h = options.first_panel; h < std::min(0.25 * len, max_panel); h *= 4.0) {
            edge = a + h;
            grid_.push_back(edge);
        }
        const int uniform = std::max(1, int(std::ceil((b - edge) / max_panel)));
        for (int i = 1; i <= uniform; ++i)
            grid_.push_back(i == uniform ? b : edge + (b - edge) * i / uniform);
    }

    upper_.assign(grid_.size(), 0.0);
    lower_.assign(grid_.size(), 0.0);
    for (std::size_t i = 1; i < grid_.size(); ++i) {
        double fu = 0.0, fl = 0.0;
        const double half = 0.5 * (grid_[i] - grid_[i - 1]);
        const double mid = 0.5 * (grid_[i] + grid_[i - 1]);
        for (std::size_t j = 0; j < rule.order(); ++j) {
            const double t = mid + half * rule.nodes[j];
            fu += rule.weights[j] * evaluator.raw_density(t, BoundaryLabel::upper);
            fl += rule.weights[j] * evaluator.raw_density(t, BoundaryLabel::lower);
        }
        upper_[i] = upper_[i - 1] + half * fu;
        lower_[i] = lower_[i - 1] + half * fl;
    }
    if (!(response_mass() > 0.0)) throw NumericalError("schedule has no response probability");
}

double ResponseTimeCdf::interpolate(const std::vector<double>& cumulative, double t) const
{
    if (t <= 0.0) return 0.0;
    if (t >= grid_.back()) return cumulative.back();
    const std::size_t i = std::upper_bound(grid_.begin(), grid_.end(), t) - grid_.begin();
    const double frac = (t - grid_[i - 1]) / (grid_[i] - grid_[i - 1]);
    return cumulative[i - 1] + frac * (cumulative[i] - cumulative[i - 1]);
}

double ResponseTimeCdf::operator()(double t) const
{
    return (interpolate(upper_, t) + interpolate(lower_, t)) / response_mass();
}

double ResponseTimeCdf::signed_cdf(double x) const
{
    if (x < 0.0) return (lower_mass() - interpolate(lower_, -x)) / response_mass();
    return (lower_mass() + interpolate(upper_, x)) / response_mass();
}

KsResult ks_test(std::span<const FirstPassageSample> samples, const ResponseTimeCdf& cdf,
                 bool signed_time, const TimeFunction& time_map)
{
    std::vector<double> times;
    std::size_t excluded = 0;
    for (const auto& s : samples) {
        if (s.outcome == Outcome::none) {
            ++excluded;
            continue;
        }
        const double t = time_map ? time_map(s.time) : s.time;
        times.push_back(signed_time && s.outcome == Outcome::lower ? -t : t);
    }
    KsResult r = signed_time ? ks_test(times, [&](double x) { return cdf.signed_cdf(x); })
                             : ks_test(times, [&](double t) { return cdf(t); });
    r.excluded = excluded;
    return r;
}

TrialRecord simulate_addm_trial(const AddmParams& p, double rating_a, double rating_b,
                                const FixationProcess& fixations, double max_horizon, double dt,
                                std::mt19937_64& rng)
{
    p.validate();
    if (!(fixations.shape > 0.0 && fixations.rate > 0.0))
        throw ValidationError("fixation process needs positive shape and rate");
    const double horizon = addm_horizon(p, max_horizon);
    std::uniform_int_distribution<int> coin(0, 1);
    std::gamma_distribution<double> dwell(fixations.shape, 1.0 / fixations.rate);
    std::normal_distribution<double> normal(0.0, 1.0);

    AddmCovariates cov{{}, rating_a, rating_b};
    Fixation label = coin(rng) == 0 ? Fixation::A : Fixation::B;
    double seg_end = dwell(rng);
    double seg_start = 0.0;
    const double sqrt_dt = std::sqrt(dt);
    double drift = addm_drift(p, label, rating_a, rating_b);
    double x = p.x0;
    double prev = 0.0;
    TrialRecord trial;
    for (std::uint64_t n = 1;; ++n) {
        const double r = std::min(double(n) * dt, horizon);
        const double h = r - prev;
        x += drift * h + (h == dt ? sqrt_dt : std::sqrt(h)) * normal(rng);
        const double u = p.a - p.b * r;
        Observation obs = NonResponse{};
        bool done = false;
        if (x >= u) {
            obs = Response{r, BoundaryLabel::upper};
            done = true;
        } else if (x <= -u) {
            obs = Response{r, BoundaryLabel::lower};
            done = true;
        } else if (r >= horizon) {
            done = true;
        }
        if (done) {
            cov.fixations.push_back({r - seg_start, label});
            trial.observation = obs;
            break;
        }
        // Switch fixation when the dwell ends inside this step.
        while (seg_end <= r) {
            cov.fixations.push_back({seg_end - seg_start, label});
            seg_start = seg_end;
            label = label == Fixation::A ? Fixation::B : Fixation::A;
            seg_end += dwell(rng);
            drift = addm_drift(p, label, rating_a, rating_b);
        }
        prev = r;
    }
    trial.design = std::move(cov);
    return trial;
}

std::vector<TrialRecord> simulate_addm_dataset(const AddmParams& params,
                                               const FixationProcess& fixations, std::size_t n,
                                               std::uint64_t seed, double dt, double max_horizon,
                                               int threads)
{
    std::vector<TrialRecord> trials(n);
    parallel_for(n, threads, [&](std::size_t i) {
        std::mt19937_64 rng(path_seed(seed, i));
        std::uniform_int_distribution<int> rating(1, 5);
        const double ra = rating(rng);
        const double rb = rating(rng);
        trials[i] = simulate_addm_trial(params, ra, rb, fixations, max_horizon, dt, rng);
    });
    return trials;
}

}  // namespace gddm
