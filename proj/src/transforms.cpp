#include "gddm/transforms.hpp"

#include "gddm/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace gddm {

namespace {

constexpr int kPanelOrder = 20;

// Running integral of f from 0, tabulated at panel edges on [0, horizon]
// and completed with one Gauss–Legendre panel per query.
class CumulativeIntegral {
public:
    CumulativeIntegral(TimeFunction f, double horizon, int panels = 128)
        : f_(std::move(f)), width_(horizon / panels)
    {
        if (!(horizon > 0.0)) throw ValidationError("integration horizon must be positive");
        const QuadratureRule& rule = gauss_legendre(kPanelOrder);
        cumulative_.assign(panels + 1, 0.0);
        for (int k = 0; k < panels; ++k)
            cumulative_[k + 1] = cumulative_[k] + integrate(rule, k * width_, (k + 1) * width_, f_);
    }

    double operator()(double t) const
    {
        const QuadratureRule& rule = gauss_legendre(kPanelOrder);
        if (t <= 0.0) return t == 0.0 ? 0.0 : -integrate(rule, t, 0.0, f_);
        const std::size_t last = cumulative_.size() - 1;
        std::size_t k = std::min(static_cast<std::size_t>(t / width_), last);
        double sum = cumulative_[k];
        double start = k * width_;
        // Beyond the table, continue panel by panel.
        while (t - start > width_) {
            sum += integrate(rule, start, start + width_, f_);
            start += width_;
        }
        if (t > start) sum += integrate(rule, start, t, f_);
        return sum;
    }

private:
    TimeFunction f_;
    double width_;
    std::vector<double> cumulative_;
};

// Root of the increasing function f at `target` by safeguarded Newton.
double invert_increasing(const std::function<double(double)>& f,
                         const std::function<double(double)>& df, double target, double guess,
                         double lower_limit)
{
    double lo = guess, hi = guess;
    double step = std::max(1.0, std::abs(guess));
    for (int i = 0; f(lo) > target; ++i) {
        lo = std::max(lower_limit, lo - step);
        step *= 2.0;
        if (i > 200 || (lo == lower_limit && f(lo) > target))
            throw NumericalError("inverse map: target below range");
    }
    step = std::max(1.0, std::abs(guess));
    for (int i = 0; f(hi) < target; ++i) {
        hi += step;
        step *= 2.0;
        if (i > 200) throw NumericalError("inverse map: target above range");
    }
    double x = std::clamp(guess, lo, hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double value = f(x) - target;
        if (value == 0.0) return x;
        if (value < 0.0) lo = x; else hi = x;
        double next = x - value / df(x);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-15 * std::max(1.0, std::abs(x))) return next;
        x = next;
        if (hi - lo <= 1e-15 * std::max(1.0, std::abs(x))) return x;
    }
    return x;
}

double chord_deviation(std::span<const TimeFunction> fns, double a, double b,
                       std::span<const double> fa, std::span<const double> fb, int probes)
{
    double dev = 0.0;
    for (int p = 1; p < probes; ++p) {
        const double frac = double(p) / probes;
        const double t = a + frac * (b - a);
        for (std::size_t i = 0; i < fns.size(); ++i) {
            const double chord = fa[i] + frac * (fb[i] - fa[i]);
            dev = std::max(dev, std::abs(fns[i](t) - chord));
        }
    }
    return dev;
}

}  // namespace

CoordinateTransform CoordinateTransform::identity()
{
    CoordinateTransform tr;
    tr.time_map = [](double t) { return t; };
    tr.time_rate = [](double) { return 1.0; };
    tr.time_inverse = [](double s) { return s; };
    tr.state_map = [](double x, double) { return x; };
    tr.state_rate = [](double, double) { return 1.0; };
    tr.state_inverse = [](double w, double) { return w; };
    return tr;
}

CoordinateTransform transform_nonlinear_drift(TimeFunction drift, double sigma, double horizon,
                                              TimeFunction antiderivative)
{
    if (!(sigma > 0.0)) throw ValidationError("diffusion must be positive");
    TimeFunction mean = antiderivative;
    if (!mean) {
        auto table = std::make_shared<CumulativeIntegral>(std::move(drift), horizon);
        mean = [table](double t) { return (*table)(t); };
    }
    CoordinateTransform tr = CoordinateTransform::identity();
    tr.state_map = [=](double x, double t) { return (x - mean(t)) / sigma; };
    tr.state_rate = [=](double, double) { return 1.0 / sigma; };
    tr.state_inverse = [=](double w, double t) { return sigma * w + mean(t); };
    return tr;
}

CoordinateTransform transform_ou(double theta, double lambda, double sigma)
{
    if (theta == 0.0) throw ValidationError("O-U rate theta must be nonzero");
    if (!(sigma > 0.0)) throw ValidationError("diffusion must be positive");
    CoordinateTransform tr;
    tr.time_map = [=](double t) { return std::expm1(2.0 * theta * t) / (2.0 * theta); };
    tr.time_rate = [=](double t) { return std::exp(2.0 * theta * t); };
    tr.time_inverse = [=](double s) { return std::log1p(2.0 * theta * s) / (2.0 * theta); };
    tr.state_map = [=](double x, double t) {
        return (std::exp(theta * t) * (x - lambda) + lambda) / sigma;
    };
    tr.state_rate = [=](double, double t) { return std::exp(theta * t) / sigma; };
    tr.state_inverse = [=](double w, double t) {
        return (sigma * w - lambda) * std::exp(-theta * t) + lambda;
    };
    return tr;
}

CherkasovResidual cherkasov_residual(const TimeFunction& c1, const TimeFunction& c2,
                                     const SpaceTimeFunction& diffusion,
                                     const SpaceTimeFunction& drift, const CherkasovDomain& domain)
{
    const int n = domain.grid_points;
    if (n < 2) throw ValidationError("Cherkasov check grid needs at least 2 points per axis");
    auto var = [&](double x, double t) {
        const double s = diffusion(x, t);
        return s * s;
    };
    const QuadratureRule& rule = gauss_legendre(40);
    CherkasovResidual worst;
    for (int j = 0; j < n; ++j) {
        const double t = domain.horizon * j / (n - 1);
        const double ht = 1e-5 * std::max(1.0, t);
        auto dvar_dt = [&](double y) {
            if (t < ht)
                return (-3.0 * var(y, t) + 4.0 * var(y, t + ht) - var(y, t + 2.0 * ht)) / (2.0 * ht);
            return (var(y, t + ht) - var(y, t - ht)) / (2.0 * ht);
        };
        const double c2t = c2(t);
        for (int i = 0; i < n; ++i) {
            const double x = domain.x_lower + (domain.x_upper - domain.x_lower) * i / (n - 1);
            const double hx = 1e-5 * std::max(1.0, std::abs(x));
            const double dvar_dx = (var(x + hx, t) - var(x - hx, t)) / (2.0 * hx);
            const double inner = x == 0.0 ? 0.0 : integrate(rule, 0.0, x, [&](double y) {
                const double s = diffusion(y, t);
                return (c2t * s * s + dvar_dt(y)) / (s * s * s);
            });
            const double predicted = 0.25 * dvar_dx + 0.5 * diffusion(x, t) * (c1(t) + inner);
            const double residual = std::abs(drift(x, t) - predicted);
            if (!(residual <= worst.value)) worst = {residual, x, t};
        }
    }
    return worst;
}

CoordinateTransform transform_cherkasov(TimeFunction c1, TimeFunction c2,
                                        SpaceTimeFunction diffusion, SpaceTimeFunction drift,
                                        const CherkasovDomain& domain)
{
    if (!(domain.x_upper > domain.x_lower) || !(domain.horizon > 0.0))
        throw ValidationError("Cherkasov domain is empty");
    const CherkasovResidual worst = cherkasov_residual(c1, c2, diffusion, drift, domain);
    if (!(worst.value <= domain.tolerance)) {
        std::ostringstream os;
        os << "Cherkasov condition violated: residual " << worst.value << " at x = " << worst.x
           << ", t = " << worst.t;
        throw ConditionViolated(os.str(), worst.x, worst.t, worst.value);
    }

    const double horizon = domain.horizon;
    auto c2_integral = std::make_shared<CumulativeIntegral>(c2, horizon);
    auto time_map = std::make_shared<CumulativeIntegral>(
        [c2_integral](double r) { return std::exp(-(*c2_integral)(r)); }, horizon);
    auto offset = std::make_shared<CumulativeIntegral>(
        [c2_integral, c1](double r) { return c1(r) * std::exp(-0.5 * (*c2_integral)(r)); },
        horizon);
    auto inverse_diffusion_integral = [diffusion](double x, double t) {
        if (x == 0.0) return 0.0;
        const QuadratureRule& rule = gauss_legendre(kPanelOrder);
        double sum = 0.0;
        constexpr int panels = 4;
        for (int k = 0; k < panels; ++k)
            sum += integrate(rule, x * k / panels, x * (k + 1) / panels,
                             [&](double y) { return 1.0 / diffusion(y, t); });
        return sum;
    };

    CoordinateTransform tr;
    tr.time_map = [time_map](double t) { return (*time_map)(t); };
    tr.time_rate = [c2_integral](double t) { return std::exp(-(*c2_integral)(t)); };
    tr.time_inverse = [tm = tr.time_map, tr_rate = tr.time_rate](double s) {
        return invert_increasing(tm, tr_rate, s, 0.0, 0.0);
    };
    tr.state_map = [=](double x, double t) {
        return std::exp(-0.5 * (*c2_integral)(t)) * inverse_diffusion_integral(x, t) -
               0.5 * (*offset)(t);
    };
    tr.state_rate = [=](double x, double t) {
        return std::exp(-0.5 * (*c2_integral)(t)) / diffusion(x, t);
    };
    tr.state_inverse = [map = tr.state_map, rate = tr.state_rate](double w, double t) {
        return invert_increasing([&](double x) { return map(x, t); },
                                 [&](double x) { return rate(x, t); }, w, 0.0,
                                 -std::numeric_limits<double>::infinity());
    };
    check_transform(tr, horizon, domain.x_lower, domain.x_upper);
    return tr;
}

void check_transform(const CoordinateTransform& tr, double horizon, double x_lower,
                     double x_upper, double max_ratio)
{
    const double stretched = tr.time_map(horizon);
    if (!(stretched / horizon <= max_ratio)) {
        std::ostringstream os;
        os << "time map dilates [0, " << horizon << "] to [0, " << stretched
           << "], beyond the allowed factor " << max_ratio;
        throw ConditionViolated(os.str(), 0.0, horizon, stretched / horizon);
    }
    constexpr int n = 64;
    for (int j = 0; j < n; ++j) {
        const double t = horizon * j / (n - 1);
        if (!(tr.time_rate(t) > 0.0))
            throw ConditionViolated("time map is not increasing", 0.0, t, tr.time_rate(t));
        for (int i = 0; i < n; ++i) {
            const double x = x_lower + (x_upper - x_lower) * i / (n - 1);
            if (!(tr.state_rate(x, t) > 0.0))
                throw ConditionViolated("state map is not increasing", x, t, tr.state_rate(x, t));
        }
    }
}

TimeFunction transform_boundary(TimeFunction boundary, const CoordinateTransform& tr)
{
    return [boundary = std::move(boundary), tr](double s) {
        const double t = tr.time_inverse(s);
        return tr.state_map(boundary(t), t);
    };
}

void InterpolationControl::validate() const
{
    if (!(max_abs_dev > 0.0) || !(min_segment > 0.0))
        throw ValidationError("interpolation tolerances must be positive");
    if (max_points < 2) throw ValidationError("interpolation needs at least 2 points");
}

Linearization linearize(std::span<const TimeFunction> functions, double horizon,
                        const InterpolationControl& ctl, std::span<const double> mandatory)
{
    ctl.validate();
    if (!(horizon > 0.0)) throw ValidationError("linearization horizon must be positive");
    constexpr int probes = 8;

    std::vector<double> grid{0.0, horizon};
    for (double t : mandatory) {
        if (t > 0.0 && t < horizon) grid.push_back(t);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    auto eval = [&](double t) {
        std::vector<double> v(functions.size());
        for (std::size_t i = 0; i < functions.size(); ++i) v[i] = functions[i](t);
        return v;
    };

    struct Node {
        double t;
        std::vector<double> values;
        bool settled;  // segment to the next node needs no further splitting
    };
    std::vector<Node> nodes;
    for (double t : grid) nodes.push_back({t, eval(t), false});

    Linearization out;
    bool hit_points = false, hit_segment = false;
    for (bool changed = true; changed;) {
        changed = false;
        std::vector<Node> refined;
        refined.reserve(2 * nodes.size());
        for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
            Node& left = nodes[k];
            const Node& right = nodes[k + 1];
            refined.push_back(left);
            if (left.settled) continue;
            const double dev = chord_deviation(functions, left.t, right.t, left.values,
                                               right.values, probes);
            if (!(dev > ctl.max_abs_dev)) {
                refined.back().settled = true;
                continue;
            }
            if (0.5 * (right.t - left.t) < ctl.min_segment) {
                hit_segment = true;
                refined.back().settled = true;
                continue;
            }
            if (nodes.size() + (refined.size() - (k + 1)) >= std::size_t(ctl.max_points)) {
                hit_points = true;
                refined.back().settled = true;
                continue;
            }
            const double mid = 0.5 * (left.t + right.t);
            refined.push_back({mid, eval(mid), false});
            changed = true;
        }
        refined.push_back(nodes.back());
        nodes = std::move(refined);
    }

    for (std::size_t i = 0; i < functions.size(); ++i) out.values.emplace_back();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        out.breakpoints.push_back(nodes[k].t);
        for (std::size_t i = 0; i < functions.size(); ++i) out.values[i].push_back(nodes[k].values[i]);
        if (k + 1 < nodes.size())
            out.max_deviation = std::max(
                out.max_deviation, chord_deviation(functions, nodes[k].t, nodes[k + 1].t,
                                                   nodes[k].values, nodes[k + 1].values, 16));
    }
    if (hit_points || hit_segment) {
        std::ostringstream os;
        os << "linearization stopped by "
           << (hit_points ? "max_points = " + std::to_string(ctl.max_points)
                          : "min_segment = " + std::to_string(ctl.min_segment))
           << "; max deviation " << out.max_deviation;
        out.warning = os.str();
    }
    return out;
}

Boundary piecewise_linearize(const TimeFunction& boundary, double horizon,
                             const InterpolationControl& ctl, std::span<const double> mandatory)
{
    Linearization lin = linearize(std::span(&boundary, 1), horizon, ctl, mandatory);
    return Boundary(std::move(lin.breakpoints), std::move(lin.values[0]));
}

TimeFunction map_back_fptd(TimeFunction transformed_density, const CoordinateTransform& tr)
{
    return [f = std::move(transformed_density), tr](double t) {
        return tr.time_rate(t) * f(tr.time_map(t));
    };
}

TimeFunction map_back_npd(TimeFunction transformed_density, const CoordinateTransform& tr,
                          double T)
{
    return [q = std::move(transformed_density), tr, T](double x) {
        return tr.state_rate(x, T) * q(tr.state_map(x, T));
    };
}

InitialCondition transform_initial(const InitialCondition& initial, const CoordinateTransform& tr)
{
    std::vector<double> points;
    for (double x : initial.points()) points.push_back(tr.state_map(x, 0.0));
    std::vector<double> weights(initial.weights().begin(), initial.weights().end());
    if (!initial.density()) return InitialCondition::discrete(std::move(points), std::move(weights));

    const ContinuousDensity& src = *initial.density();
    const double lo = tr.state_map(src.support_lower, 0.0);
    const double hi = tr.state_map(src.support_upper, 0.0);
    ContinuousDensity mapped;
    const double mid = tr.state_map(0.5 * (src.support_lower + src.support_upper), 0.0);
    const bool affine = std::abs(mid - 0.5 * (lo + hi)) <= 1e-14 * std::max(1.0, std::abs(hi - lo));
    if (src.form && affine) {
        // An increasing affine map keeps the parametric family.
        DensityForm form = *src.form;
        form.lower = lo;
        form.upper = hi;
        mapped = ContinuousDensity::from_form(form);
    } else {
        mapped.support_lower = lo;
        mapped.support_upper = hi;
        mapped.mass = src.mass;
        mapped.pdf = [pdf = src.pdf, tr](double w) {
            const double x = tr.state_inverse(w, 0.0);
            return pdf(x) / tr.state_rate(x, 0.0);
        };
    }
    if (points.empty()) return InitialCondition::continuous(std::move(mapped));
    return InitialCondition::mixture(std::move(points), std::move(weights), std::move(mapped));
}

ReducedModel reduce_to_brownian(const TimeFunction& upper, const TimeFunction& lower,
                                const InitialCondition& initial, CoordinateTransform tr,
                                double horizon, const InterpolationControl& ctl,
                                std::span<const double> mandatory_times)
{
    ReducedModel model;
    model.horizon = horizon;
    const double end = tr.time_map(horizon);
    std::vector<double> mandatory;
    for (double t : mandatory_times) mandatory.push_back(tr.time_map(t));

    const std::array<TimeFunction, 2> bounds{transform_boundary(upper, tr),
                                             transform_boundary(lower, tr)};
    model.linearization = linearize(bounds, end, ctl, mandatory);
    auto up = model.linearization.values[0];
    auto lo = model.linearization.values[1];
    // A collapse at the horizon should survive the round trip through the maps.
    const double scale = std::max({1.0, std::abs(up.back()), std::abs(lo.back())});
    if (std::abs(up.back() - lo.back()) <= 1e-12 * scale) {
        const double meet = 0.5 * (up.back() + lo.back());
        up.back() = meet;
        lo.back() = meet;
    }
    const std::size_t stages = model.linearization.breakpoints.size() - 1;
    model.schedule = StageSchedule::make(model.linearization.breakpoints,
                                         std::vector<double>(stages, 0.0),
                                         std::vector<double>(stages, 1.0), std::move(up),
                                         std::move(lo), transform_initial(initial, tr));
    model.transform = std::move(tr);
    return model;
}

}  // namespace gddm
