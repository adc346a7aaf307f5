#pragma once

#include "gddm/model.hpp"
#include "gddm/single_stage.hpp"

#include <vector>

namespace gddm {

struct EngineConfig {
    int interior_order = 30;
    int final_order = 50;
    SeriesControl series;
    /// Observation times closer than this to their stage start are moved to
    /// stage start + t_inflate.
    double t_inflate = 1e-4;

    void validate() const;
};

/// Lattice for X(0). Discrete parts keep their own points with unit values;
/// a continuous part is sampled at `order` Gauss–Legendre nodes on its
/// support within the initial gap.
DensityLattice init_lattice(const StageSchedule& schedule, int order);

/// Non-passage density at the end of `stage`, sampled at `order` nodes on
/// the gap at that time. An empty lattice is returned if the gap has closed.
DensityLattice propagate_stage(const DensityLattice& previous, const LinearStage& stage, int order,
                               const SeriesControl& series = {});

/// Joint density of (response time, boundary) for one observation.
double fptd(const StageSchedule& schedule, const Response& observation,
            const EngineConfig& cfg = {});

/// Probability of no boundary hit by the schedule horizon.
double npp(const StageSchedule& schedule, const EngineConfig& cfg = {});

/// Likelihood contribution of one observation: fptd for a response, npp for
/// a non-response.
double likelihood(const StageSchedule& schedule, const Observation& observation,
                  const EngineConfig& cfg = {});

/// Batch evaluation of one schedule at many times. Lattices are built once:
/// the interior chain, plus one final-order lattice per stage start.
class ScheduleEvaluator {
public:
    ScheduleEvaluator(StageSchedule schedule, EngineConfig cfg = {});

    /// Density at t in (0, T_end], with the configured observation inflation.
    double density(double t, BoundaryLabel boundary) const;
    /// Density without inflation, for integration over time.
    double raw_density(double t, BoundaryLabel boundary) const;
    double non_passage_probability() const;

    const StageSchedule& schedule() const { return schedule_; }
    const EngineConfig& config() const { return cfg_; }
    /// Final-order lattice at the start of stage k.
    const DensityLattice& stage_start(std::size_t k) const { return final_lattices_[k]; }

private:
    StageSchedule schedule_;
    EngineConfig cfg_;
    std::vector<DensityLattice> final_lattices_;
    double npp_ = 0.0;
};

}  // namespace gddm
