#pragma once

#include "gddm/model.hpp"

#include <limits>
#include <variant>
#include <vector>

namespace gddm {

enum class Fixation { A, B };

std::string to_string(Fixation f);
Fixation parse_fixation(const std::string& text);

struct FixationSegment {
    double duration = 0.0;
    Fixation label = Fixation::A;
};

/// Per-trial covariates of the attentional DDM.
struct AddmCovariates {
    std::vector<FixationSegment> fixations;
    double rating_a = 0.0;
    double rating_b = 0.0;
};

/// Attentional DDM parameters; diffusion is fixed at 1.
struct AddmParams {
    double eta = 0.7;    // discount on the non-fixated item, in (0, 1)
    double kappa = 0.5;  // drift scale, > 0
    double a = 2.1;      // boundary intercept, > 0
    double b = 0.3;      // boundary collapse rate
    double x0 = -0.2;    // start point, in (-a, a)

    void validate() const;
};

inline constexpr double kNoHorizonCap = std::numeric_limits<double>::infinity();

/// Drift while fixating `f`.
double addm_drift(const AddmParams& p, Fixation f, double rating_a, double rating_b);

/// Schedule horizon: the collapse time a/b when b > 0, capped at max_horizon.
double addm_horizon(const AddmParams& p, double max_horizon);

/// One stage per fixation segment, boundaries a - bt and -a + bt, point mass
/// at x0. Segments are clipped at the horizon and the last one is extended
/// to reach it.
StageSchedule build_addm_schedule(const AddmParams& p, const AddmCovariates& covariates,
                                  double max_horizon = kNoHorizonCap);

/// One experimental trial: either aDDM covariates or an explicit schedule,
/// plus what was observed.
struct TrialRecord {
    std::variant<AddmCovariates, StageSchedule> design;
    Observation observation = NonResponse{};
};

}  // namespace gddm
