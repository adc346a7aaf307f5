#include "gddm/addm.hpp"

#include <algorithm>
#include <cmath>

namespace gddm {

std::string to_string(Fixation f)
{
    return f == Fixation::A ? "A" : "B";
}

Fixation parse_fixation(const std::string& text)
{
    if (text == "A") return Fixation::A;
    if (text == "B") return Fixation::B;
    throw ValidationError("unknown fixation label '" + text + "'");
}

void AddmParams::validate() const
{
    if (!(eta > 0.0 && eta < 1.0)) throw ValidationError("eta must lie in (0, 1)");
    if (!(kappa > 0.0)) throw ValidationError("kappa must be positive");
    if (!(a > 0.0)) throw ValidationError("boundary intercept a must be positive");
    if (!std::isfinite(b)) throw ValidationError("collapse rate b must be finite");
    if (!(x0 > -a && x0 < a)) throw ValidationError("start point x0 must lie in (-a, a)");
}

double addm_drift(const AddmParams& p, Fixation f, double rating_a, double rating_b)
{
    return f == Fixation::A ? p.kappa * (rating_a - p.eta * rating_b)
                            : p.kappa * (p.eta * rating_a - rating_b);
}

double addm_horizon(const AddmParams& p, double max_horizon)
{
    const double collapse = p.b > 0.0 ? p.a / p.b : kNoHorizonCap;
    const double h = std::min(collapse, max_horizon);
    if (!std::isfinite(h)) throw ValidationError("aDDM horizon is unbounded; set a horizon cap");
    return h;
}

StageSchedule build_addm_schedule(const AddmParams& p, const AddmCovariates& cov,
                                  double max_horizon)
{
    p.validate();
    if (cov.fixations.empty()) throw ValidationError("trial has no fixations");
    const double horizon = addm_horizon(p, max_horizon);

    std::vector<double> breakpoints{0.0};
    std::vector<double> mu;
    for (const FixationSegment& seg : cov.fixations) {
        if (!(seg.duration > 0.0)) throw ValidationError("fixation durations must be positive");
        const double end = breakpoints.back() + seg.duration;
        mu.push_back(addm_drift(p, seg.label, cov.rating_a, cov.rating_b));
        if (end >= horizon) break;
        breakpoints.push_back(end);
    }
    // The last segment runs to the horizon.
    if (breakpoints.size() == mu.size()) {
        breakpoints.push_back(horizon);
    } else {
        breakpoints.back() = horizon;
    }
    std::vector<double> upper, lower;
    upper.reserve(breakpoints.size());
    lower.reserve(breakpoints.size());
    for (double t : breakpoints) {
        upper.push_back(p.a - p.b * t);
        lower.push_back(-p.a + p.b * t);
    }
    if (horizon == p.a / p.b) {
        upper.back() = 0.0;
        lower.back() = 0.0;
    }
    std::vector<double> sigma(mu.size(), 1.0);
    return StageSchedule::make(std::move(breakpoints), std::move(mu), std::move(sigma), std::move(upper),
                               std::move(lower), InitialCondition::point(p.x0));
}

}  // namespace gddm
