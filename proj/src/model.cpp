#include "gddm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gddm {

std::string to_string(BoundaryLabel label)
{
    return label == BoundaryLabel::upper ? "upper" : "lower";
}

BoundaryLabel parse_boundary_label(const std::string& text)
{
    if (text == "upper") return BoundaryLabel::upper;
    if (text == "lower") return BoundaryLabel::lower;
    throw ValidationError("unknown boundary label '" + text + "'");
}

namespace {

void check_grid(std::span<const double> breakpoints, const char* what)
{
    if (breakpoints.size() < 2)
        throw ValidationError(std::string(what) + ": need at least two breakpoints");
    if (breakpoints.front() != 0.0)
        throw ValidationError(std::string(what) + ": first breakpoint must be 0");
    for (std::size_t i = 1; i < breakpoints.size(); ++i) {
        if (!std::isfinite(breakpoints[i]) || !(breakpoints[i] > breakpoints[i - 1]))
            throw ValidationError(std::string(what) + ": breakpoints must be strictly increasing");
    }
}

// Index of the segment (t_k, t_{k+1}] containing t, clamped to valid range.
std::size_t segment_of(std::span<const double> grid, double t)
{
    const std::size_t segments = grid.size() - 1;
    if (t <= grid.front()) return 0;
    auto it = std::lower_bound(grid.begin() + 1, grid.end(), t);
    if (it == grid.end()) return segments - 1;
    return static_cast<std::size_t>(it - grid.begin()) - 1;
}

}  // namespace

Boundary::Boundary(std::vector<double> breakpoints, std::vector<double> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values))
{
    check_grid(breakpoints_, "boundary");
    if (values_.size() != breakpoints_.size())
        throw ValidationError("boundary: values and breakpoints differ in length");
    for (double v : values_) {
        if (!std::isfinite(v)) throw ValidationError("boundary: non-finite value");
    }
}

double Boundary::slope(std::size_t segment) const
{
    return (values_[segment + 1] - values_[segment]) /
           (breakpoints_[segment + 1] - breakpoints_[segment]);
}

double Boundary::operator()(double t) const
{
    const std::size_t k = segment_of(breakpoints_, t);
    return values_[k] + slope(k) * (t - breakpoints_[k]);
}

ContinuousDensity ContinuousDensity::uniform(double lower, double upper, double mass)
{
    DensityForm form;
    form.kind = DensityForm::Kind::uniform;
    form.lower = lower;
    form.upper = upper;
    form.mass = mass;
    return from_form(form);
}

ContinuousDensity ContinuousDensity::beta(double alpha, double beta, double lower, double upper,
                                          double mass)
{
    DensityForm form;
    form.kind = DensityForm::Kind::beta;
    form.lower = lower;
    form.upper = upper;
    form.alpha = alpha;
    form.beta = beta;
    form.mass = mass;
    return from_form(form);
}

ContinuousDensity ContinuousDensity::from_form(const DensityForm& form)
{
    if (!(form.upper > form.lower)) throw ValidationError("density support is empty");
    if (!(form.mass >= 0.0)) throw ValidationError("density mass must be nonnegative");
    ContinuousDensity d;
    d.support_lower = form.lower;
    d.support_upper = form.upper;
    d.mass = form.mass;
    d.form = form;
    const double width = form.upper - form.lower;
    if (form.kind == DensityForm::Kind::uniform) {
        const double height = form.mass / width;
        const double lo = form.lower, hi = form.upper;
        d.pdf = [=](double x) { return (x > lo && x < hi) ? height : 0.0; };
    } else {
        if (!(form.alpha > 0.0) || !(form.beta > 0.0))
            throw ValidationError("beta density shape parameters must be positive");
        const double a = form.alpha, b = form.beta, lo = form.lower;
        const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) -
                                std::log(width) + std::log(form.mass);
        d.pdf = [=](double x) {
            const double z = (x - lo) / width;
            if (!(z > 0.0 && z < 1.0)) return 0.0;
            return std::exp(log_norm + (a - 1.0) * std::log(z) + (b - 1.0) * std::log1p(-z));
        };
    }
    return d;
}

InitialCondition InitialCondition::point(double x0)
{
    return discrete({x0}, {1.0});
}

InitialCondition InitialCondition::discrete(std::vector<double> points, std::vector<double> weights)
{
    if (points.size() != weights.size())
        throw ValidationError("discrete initial condition: points and weights differ in length");
    InitialCondition ic;
    ic.points_ = std::move(points);
    ic.weights_ = std::move(weights);
    return ic;
}

InitialCondition InitialCondition::continuous(ContinuousDensity density)
{
    if (!density.pdf) throw ValidationError("continuous initial condition without a density");
    InitialCondition ic;
    ic.density_ = std::move(density);
    return ic;
}

InitialCondition InitialCondition::mixture(std::vector<double> points, std::vector<double> weights,
                                           ContinuousDensity density)
{
    InitialCondition ic = discrete(std::move(points), std::move(weights));
    if (!density.pdf) throw ValidationError("mixture initial condition without a density");
    ic.density_ = std::move(density);
    return ic;
}

double InitialCondition::total_mass() const
{
    double m = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    if (density_) m += density_->mass;
    return m;
}

StageSchedule StageSchedule::make(std::vector<double> breakpoints, std::vector<double> mu,
                                  std::vector<double> sigma, std::vector<double> upper_values,
                                  std::vector<double> lower_values, InitialCondition initial)
{
    StageSchedule s;
    s.upper = Boundary(breakpoints, std::move(upper_values));
    s.lower = Boundary(breakpoints, std::move(lower_values));
    s.breakpoints = std::move(breakpoints);
    s.mu = std::move(mu);
    s.sigma = std::move(sigma);
    s.initial = std::move(initial);
    if (s.mu.size() != s.breakpoints.size() - 1 || s.sigma.size() != s.breakpoints.size() - 1)
        throw ValidationError("schedule: mu and sigma need one value per stage");
    return s;
}

LinearStage StageSchedule::stage(std::size_t k) const
{
    LinearStage st;
    st.drift = mu[k];
    st.diffusion = sigma[k];
    st.duration = breakpoints[k + 1] - breakpoints[k];
    st.upper0 = upper.values()[k];
    st.lower0 = lower.values()[k];
    st.upper_slope = (upper.values()[k + 1] - st.upper0) / st.duration;
    st.lower_slope = (lower.values()[k + 1] - st.lower0) / st.duration;
    return st;
}

std::size_t StageSchedule::stage_index(double t) const
{
    return segment_of(breakpoints, t);
}

StageSchedule StageSchedule::truncated(double new_horizon) const
{
    if (!(new_horizon > 0.0) || new_horizon > horizon())
        throw ValidationError("truncation horizon must lie in (0, T_end]");
    const std::size_t last = stage_index(new_horizon);
    std::vector<double> grid(breakpoints.begin(), breakpoints.begin() + last + 1);
    grid.push_back(new_horizon);
    std::vector<double> up, lo;
    for (double t : grid) {
        up.push_back(upper(t));
        lo.push_back(lower(t));
    }
    // keep exact breakpoint values where the grid is unchanged
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        up[i] = upper.values()[i];
        lo[i] = lower.values()[i];
    }
    if (new_horizon == breakpoints[last + 1]) {
        up.back() = upper.values()[last + 1];
        lo.back() = lower.values()[last + 1];
    }
    return make(std::move(grid), std::vector<double>(mu.begin(), mu.begin() + last + 1),
                std::vector<double>(sigma.begin(), sigma.begin() + last + 1), std::move(up),
                std::move(lo), initial);
}

double PiecewiseConstant::operator()(double t) const
{
    return values[segment_of(breakpoints, t)];
}

StageSchedule merge_onto_common_grid(const PiecewiseConstant& drift,
                                     const PiecewiseConstant& diffusion, const Boundary& upper,
                                     const Boundary& lower, InitialCondition initial,
                                     double tolerance)
{
    check_grid(drift.breakpoints, "drift");
    check_grid(diffusion.breakpoints, "diffusion");
    const double horizon = std::min({drift.breakpoints.back(), diffusion.breakpoints.back(),
                                     upper.horizon(), lower.horizon()});
    std::vector<double> grid;
    auto add = [&](std::span<const double> pts) {
        for (double t : pts) {
            if (t <= horizon) grid.push_back(t);
        }
    };
    add(drift.breakpoints);
    add(diffusion.breakpoints);
    add(upper.breakpoints());
    add(lower.breakpoints());
    grid.push_back(horizon);
    std::sort(grid.begin(), grid.end());
    std::vector<double> merged;
    for (double t : grid) {
        if (merged.empty() || t - merged.back() > tolerance) merged.push_back(t);
    }
    merged.back() = horizon;

    std::vector<double> mu, sigma, up, lo;
    for (std::size_t k = 0; k + 1 < merged.size(); ++k) {
        const double mid = 0.5 * (merged[k] + merged[k + 1]);
        mu.push_back(drift(mid));
        sigma.push_back(diffusion(mid));
    }
    for (double t : merged) {
        up.push_back(upper(t));
        lo.push_back(lower(t));
    }
    return StageSchedule::make(std::move(merged), std::move(mu), std::move(sigma), std::move(up),
                               std::move(lo), std::move(initial));
}

double DensityLattice::mass() const
{
    double m = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) m += weights[i] * values[i];
    return m;
}

std::vector<Violation> validate_schedule(const StageSchedule& s)
{
    std::vector<Violation> out;
    auto fail = [&](std::optional<std::size_t> stage, std::string msg) {
        out.push_back({stage, std::move(msg)});
    };

    const auto& t = s.breakpoints;
    if (t.size() < 2) {
        fail(std::nullopt, "schedule needs at least one stage");
        return out;
    }
    if (t.front() != 0.0) fail(std::nullopt, "first breakpoint must be 0");
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (!std::isfinite(t[k]) || !(t[k] > t[k - 1]))
            fail(k - 1, "breakpoints not strictly increasing");
    }
    const std::size_t d = t.size() - 1;
    if (s.mu.size() != d) fail(std::nullopt, "drift needs one value per stage");
    if (s.sigma.size() != d) fail(std::nullopt, "diffusion needs one value per stage");
    for (std::size_t k = 0; k < std::min(d, s.mu.size()); ++k) {
        if (!std::isfinite(s.mu[k])) fail(k, "non-finite drift");
    }
    for (std::size_t k = 0; k < std::min(d, s.sigma.size()); ++k) {
        if (!(s.sigma[k] > 0.0) || !std::isfinite(s.sigma[k])) fail(k, "diffusion must be positive");
    }

    const bool same_grid = s.upper.breakpoints().size() == t.size() &&
                           s.lower.breakpoints().size() == t.size() &&
                           std::equal(t.begin(), t.end(), s.upper.breakpoints().begin()) &&
                           std::equal(t.begin(), t.end(), s.lower.breakpoints().begin());
    if (!same_grid) {
        fail(std::nullopt, "boundaries are not defined on the schedule breakpoints");
        return out;
    }

    const auto up = s.upper.values();
    const auto lo = s.lower.values();
    // Linear segments: a positive gap at t_k and a nonnegative gap at t_{k+1}
    // give a positive gap on [t_k, t_{k+1}).
    for (std::size_t k = 0; k < d; ++k) {
        if (!(up[k] > lo[k])) {
            fail(k, "boundaries cross before T_end");
        } else if (k + 1 < d && !(up[k + 1] > lo[k + 1])) {
            fail(k, "boundaries cross before T_end");
        } else if (k + 1 == d && up[d] < lo[d]) {
            fail(k, "boundaries cross before T_end");
        }
    }

    const double u0 = up[0], l0 = lo[0];
    const auto pts = s.initial.points();
    const auto wts = s.initial.weights();
    double total = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
        if (pts[j] == u0 || pts[j] == l0) {
            fail(0, "initial mass on boundary");
        } else if (!(pts[j] > l0 && pts[j] < u0)) {
            fail(0, "initial mass outside the boundary gap");
        }
        if (!(wts[j] >= 0.0)) fail(0, "initial weights must be nonnegative");
        total += wts[j];
    }
    if (const auto& dens = s.initial.density()) {
        if (!(dens->support_upper > dens->support_lower)) {
            fail(0, "initial density has empty support");
        } else if (dens->support_lower < l0 || dens->support_upper > u0) {
            fail(0, "initial density support exceeds the boundary gap");
        }
        if (!(dens->mass >= 0.0)) fail(0, "initial density mass must be nonnegative");
        total += dens->mass;
    }
    if (pts.empty() && !s.initial.density()) fail(0, "initial condition is empty");
    if (total > 1.0 + 1e-12) fail(0, "initial mass exceeds one");
    return out;
}

std::string describe(const std::vector<Violation>& violations)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i) os << "; ";
        if (violations[i].stage) os << "stage " << *violations[i].stage << ": ";
        os << violations[i].message;
    }
    return os.str();
}

void require_valid(const StageSchedule& schedule)
{
    const auto violations = validate_schedule(schedule);
    if (!violations.empty()) throw ValidationError("invalid schedule: " + describe(violations));
}

}  // namespace gddm
