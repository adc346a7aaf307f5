#include "gddm/engine.hpp"

#include "gddm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gddm {

void EngineConfig::validate() const
{
    if (interior_order < 2 || final_order < 2)
        throw ValidationError("quadrature orders must be at least 2");
    if (interior_order > kMaxQuadratureOrder || final_order > kMaxQuadratureOrder)
        throw ValidationError("quadrature orders must be at most 512");
    if (!(t_inflate >= 0.0)) throw ValidationError("t_inflate must be nonnegative");
    series.validate();
}

DensityLattice init_lattice(const StageSchedule& schedule, int order)
{
    const InitialCondition& init = schedule.initial;
    const double lower = schedule.lower.values().front();
    const double upper = schedule.upper.values().front();

    struct Entry {
        double node, weight, value;
    };
    std::vector<Entry> entries;
    const auto points = init.points();
    const auto masses = init.weights();
    for (std::size_t j = 0; j < points.size(); ++j) entries.push_back({points[j], masses[j], 1.0});

    if (const auto& density = init.density()) {
        const double lo = std::max(lower, density->support_lower);
        const double hi = std::min(upper, density->support_upper);
        if (lo < hi) {
            const MappedRule rule = map_to_interval(gauss_legendre(order), lo, hi);
            for (std::size_t i = 0; i < rule.positions.size(); ++i)
                entries.push_back({rule.positions[i], rule.weights[i], density->pdf(rule.positions[i])});
        }
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.node < b.node; });

    DensityLattice lat;
    lat.time = schedule.breakpoints.front();
    for (const Entry& e : entries) {
        if (!lat.nodes.empty() && lat.nodes.back() == e.node) {
            // Coincident nodes: fold both contributions into one unit-valued atom.
            lat.weights.back() = lat.weights.back() * lat.values.back() + e.weight * e.value;
            lat.values.back() = 1.0;
            continue;
        }
        lat.nodes.push_back(e.node);
        lat.weights.push_back(e.weight);
        lat.values.push_back(e.value);
    }
    return lat;
}

DensityLattice propagate_stage(const DensityLattice& previous, const LinearStage& stage, int order,
                               const SeriesControl& series)
{
    DensityLattice next;
    next.time = previous.time + stage.duration;
    next.clamped_mass = previous.clamped_mass;
    const double lower = stage.lower_end();
    const double upper = stage.upper_end();
    if (!(upper > lower)) return next;

    const MappedRule rule = map_to_interval(gauss_legendre(order), lower, upper);
    next.nodes = rule.positions;
    next.weights = rule.weights;
    next.values.assign(next.nodes.size(), 0.0);

    const double inv_sigma = 1.0 / stage.diffusion;
    for (std::size_t j = 0; j < previous.size(); ++j) {
        const double mass = previous.values[j] * previous.weights[j];
        if (mass == 0.0) continue;
        const double x0 = previous.nodes[j];
        const CanonicalStageParams p = canonicalize(stage, x0);
        for (std::size_t i = 0; i < next.nodes.size(); ++i)
            next.values[i] += mass * npd_basic((next.nodes[i] - x0) * inv_sigma, p, series) * inv_sigma;
    }
    for (std::size_t i = 0; i < next.values.size(); ++i) {
        if (next.values[i] < 0.0) {
            next.clamped_mass -= next.values[i] * next.weights[i];
            next.values[i] = 0.0;
        }
    }
    return next;
}

namespace {

// Contracts single-stage first-passage densities at elapsed time `dt`
// against a lattice at the stage start.
double contract_fptd(const DensityLattice& lat, const LinearStage& stage, double dt,
                     BoundaryLabel boundary, const SeriesControl& series)
{
    double sum = 0.0;
    for (std::size_t j = 0; j < lat.size(); ++j) {
        const double mass = lat.values[j] * lat.weights[j];
        if (mass == 0.0) continue;
        sum += mass * fptd_single(dt, stage, lat.nodes[j], boundary, series);
    }
    return sum;
}

// Lattice at t_k for an observation in stage k: interior order along the
// way, final order for the last one.
DensityLattice lattice_at_stage_start(const StageSchedule& s, std::size_t k, const EngineConfig& cfg)
{
    DensityLattice lat = init_lattice(s, k == 0 ? cfg.final_order : cfg.interior_order);
    for (std::size_t i = 0; i < k; ++i) {
        const int order = i + 1 == k ? cfg.final_order : cfg.interior_order;
        lat = propagate_stage(lat, s.stage(i), order, cfg.series);
        if (lat.size() == 0) break;
    }
    return lat;
}

double inflated_time(const StageSchedule& s, std::size_t k, double t, double t_inflate)
{
    const double start = s.breakpoints[k];
    if (t - start < t_inflate) return std::min(start + t_inflate, s.breakpoints[k + 1]);
    return t;
}

void check_response_time(const StageSchedule& s, double t)
{
    if (!(t > 0.0) || t > s.horizon())
        throw ValidationError("response time must lie in (0, T_end]");
}

}  // namespace

double fptd(const StageSchedule& schedule, const Response& observation, const EngineConfig& cfg)
{
    check_response_time(schedule, observation.time);
    const std::size_t k = schedule.stage_index(observation.time);
    const double t = inflated_time(schedule, k, observation.time, cfg.t_inflate);
    const DensityLattice lat = lattice_at_stage_start(schedule, k, cfg);
    return contract_fptd(lat, schedule.stage(k), t - schedule.breakpoints[k], observation.boundary,
                         cfg.series);
}

double npp(const StageSchedule& schedule, const EngineConfig& cfg)
{
    const std::size_t d = schedule.stage_count();
    DensityLattice lat = init_lattice(schedule, cfg.interior_order);
    for (std::size_t i = 0; i < d; ++i) {
        const int order = i + 1 == d ? cfg.final_order : cfg.interior_order;
        lat = propagate_stage(lat, schedule.stage(i), order, cfg.series);
        if (lat.size() == 0) return 0.0;
    }
    return lat.mass();
}

double likelihood(const StageSchedule& schedule, const Observation& observation,
                  const EngineConfig& cfg)
{
    if (const auto* r = std::get_if<Response>(&observation)) return fptd(schedule, *r, cfg);
    return npp(schedule, cfg);
}

ScheduleEvaluator::ScheduleEvaluator(StageSchedule schedule, EngineConfig cfg)
    : schedule_(std::move(schedule)), cfg_(cfg)
{
    cfg_.validate();
    const std::size_t d = schedule_.stage_count();
    final_lattices_.reserve(d);
    final_lattices_.push_back(init_lattice(schedule_, cfg_.final_order));
    DensityLattice chain = init_lattice(schedule_, cfg_.interior_order);
    for (std::size_t k = 1; k <= d; ++k) {
        const LinearStage stage = schedule_.stage(k - 1);
        if (k < d) {
            final_lattices_.push_back(propagate_stage(chain, stage, cfg_.final_order, cfg_.series));
            chain = propagate_stage(chain, stage, cfg_.interior_order, cfg_.series);
        } else {
            npp_ = propagate_stage(chain, stage, cfg_.final_order, cfg_.series).mass();
        }
    }
}

double ScheduleEvaluator::raw_density(double t, BoundaryLabel boundary) const
{
    check_response_time(schedule_, t);
    const std::size_t k = schedule_.stage_index(t);
    return contract_fptd(final_lattices_[k], schedule_.stage(k), t - schedule_.breakpoints[k],
                         boundary, cfg_.series);
}

double ScheduleEvaluator::density(double t, BoundaryLabel boundary) const
{
    check_response_time(schedule_, t);
    const std::size_t k = schedule_.stage_index(t);
    return raw_density(inflated_time(schedule_, k, t, cfg_.t_inflate), boundary);
}

double ScheduleEvaluator::non_passage_probability() const { return npp_; }

}  // namespace gddm
