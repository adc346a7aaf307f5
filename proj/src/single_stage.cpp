#include "gddm/single_stage.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace gddm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLogUnderflow = -745.0;

double exp_or_zero(double exponent)
{
    return exponent < kLogUnderflow ? 0.0 : std::exp(exponent);
}

struct Term {
    double value;
    double envelope;  // magnitude used by the stopping rule
};

class SeriesSum {
public:
    SeriesSum(const SeriesControl& ctl, const char* name) : ctl_(ctl), name_(name) {}

    // Adds step(n) for n = start, start + dir, ... and stops once n is past
    // `peak` and two consecutive envelopes fall below the tolerance.
    template <class Step>
    void walk(long start, int dir, double peak, Step&& step)
    {
        int quiet = 0;
        for (long n = start;; n += dir) {
            if (++used_ > ctl_.max_terms)
                throw NonConvergedSeries(std::string(name_) + ": series did not converge within " +
                                         std::to_string(ctl_.max_terms) + " terms");
            const Term term = step(n);
            sum_ += term.value;
            scale_ = std::max(scale_, std::abs(term.value));
            const bool past_peak = dir > 0 ? double(n) > peak : double(n) < peak;
            const double tol = std::max(ctl_.rel_tol * std::abs(sum_), ctl_.abs_tol);
            quiet = term.envelope < tol ? quiet + 1 : 0;
            if (past_peak && quiet >= 2) return;
        }
    }

    // Log of the current stopping threshold; terms whose log-magnitude is
    // below it cannot affect the sum and need not be exponentiated.
    double log_cut()
    {
        if (sum_ != cut_sum_ || !cut_valid_) {
            cut_sum_ = sum_;
            cut_valid_ = true;
            log_cut_ = std::log(std::max(ctl_.rel_tol * std::abs(sum_), ctl_.abs_tol));
        }
        return log_cut_;
    }

    // Clamps truncation noise below zero; anything larger is an error.
    double result() const
    {
        if (sum_ >= 0.0) return sum_;
        if (sum_ > -ctl_.rel_tol * scale_) return 0.0;
        throw NonConvergedSeries(std::string(name_) + ": negative value " + std::to_string(sum_) +
                                 " exceeds truncation noise");
    }

private:
    const SeriesControl& ctl_;
    const char* name_;
    double sum_ = 0.0;
    double scale_ = 0.0;
    int used_ = 0;
    double cut_sum_ = 0.0;
    double log_cut_ = 0.0;
    bool cut_valid_ = false;
};

// Upper-boundary density of the canonical problem, without range checks.
double upper_density(double t, const CanonicalStageParams& p, const SeriesControl& ctl)
{
    const double c = p.gap();
    const double ratio = p.closing_rate() / c;
    const double drift_rel = p.mu - p.b1;  // drift relative to the upper boundary
    const double beta = 0.5 / t - ratio;
    if (!(beta > 0.0)) return 0.0;  // the gap has closed by time t

    const double log_pref = -0.5 * std::log(2.0 * kPi * t * t * t) - ratio * p.a1 * p.a1 +
                            p.a1 * drift_rel - 0.5 * drift_rel * drift_rel * t;

    SeriesSum series(ctl, "upper first-passage density");
    if (4.0 * c * c * beta >= kPi) {
        // Image sum over x_n = a1 + 2nc of x_n exp(-beta x_n^2).
        const double crest = 1.0 / std::sqrt(2.0 * beta);
        auto step = [&](long n) {
            const double x = p.a1 + 2.0 * double(n) * c;
            const double v = x * exp_or_zero(log_pref - beta * x * x);
            return Term{v, std::abs(v)};
        };
        series.walk(0, +1, (crest - p.a1) / (2.0 * c), step);
        series.walk(-1, -1, (-crest - p.a1) / (2.0 * c), step);
    } else {
        // Poisson-summation dual of the same image sum.
        const double gamma = kPi * kPi / (4.0 * c * c * beta);
        const double log_dual = log_pref + 1.5 * std::log(kPi) - std::log(2.0 * c * c) -
                                1.5 * std::log(beta);
        const double phase = kPi * p.a1 / c;
        auto step = [&](long k) {
            const double kd = double(k);
            const double env = kd * exp_or_zero(log_dual - gamma * kd * kd);
            return Term{env * std::sin(phase * kd), env};
        };
        series.walk(1, +1, 1.0 / std::sqrt(2.0 * gamma), step);
    }
    return series.result();
}

}  // namespace

void SeriesControl::validate() const
{
    if (!(rel_tol > 0.0)) throw ValidationError("series rel_tol must be positive");
    if (!(abs_tol >= 0.0)) throw ValidationError("series abs_tol must be nonnegative");
    if (max_terms < 2) throw ValidationError("series max_terms must be at least 2");
    if (!(t_min >= 0.0)) throw ValidationError("series t_min must be nonnegative");
}

void CanonicalStageParams::validate() const
{
    if (!(a2 < 0.0 && 0.0 < a1))
        throw ValidationError("canonical stage must start strictly between its boundaries");
    if (!(T > 0.0)) throw ValidationError("stage horizon must be positive");
    if (gap_at(T) < -1e-12 * gap())
        throw ValidationError("stage boundaries cross before the horizon");
}

CanonicalStageParams canonicalize(const LinearStage& stage, double x0)
{
    const double inv = 1.0 / stage.diffusion;
    return {stage.drift * inv,       (stage.upper0 - x0) * inv, stage.upper_slope * inv,
            (stage.lower0 - x0) * inv, stage.lower_slope * inv, stage.duration};
}

double fptd_upper_basic(double t, const CanonicalStageParams& p, const SeriesControl& ctl)
{
    if (!(t > 0.0)) throw ValidationError("first-passage time must be positive");
    if (t > p.T || t < ctl.t_min) return 0.0;
    return upper_density(t, p, ctl);
}

double fptd_lower_basic(double t, const CanonicalStageParams& p, const SeriesControl& ctl)
{
    return fptd_upper_basic(t, p.reflected(), ctl);
}

double npd_basic(double x, const CanonicalStageParams& p, const SeriesControl& ctl)
{
    const double T = p.T;
    const double upper = p.upper_at(T);
    const double lower = p.lower_at(T);
    if (!(x > lower && x < upper)) return 0.0;
    const double gap_end = upper - lower;
    if (!(gap_end > 0.0)) return 0.0;

    const double c = p.gap();
    const double b = p.closing_rate();
    const double mean_slope = p.mean_slope();
    const double y = x - mean_slope * T;
    const double alpha = 2.0 * c * gap_end / T;
    const double theta = p.a1 / c;
    const double lin = -4.0 * b * p.mean_intercept() + 2.0 * y * c / T;
    const double base = -y * y / (2.0 * T);
    const double log_pref = -0.5 * std::log(2.0 * kPi * T) + (p.mu - mean_slope) * x -
                            0.5 * (p.mu * p.mu - mean_slope * mean_slope) * T;

    SeriesSum series(ctl, "non-passage density");
    if (alpha >= kPi) {
        // sum_k [F(k) - F(k + theta)] with F(z) = exp(-alpha z^2 + lin z + base).
        const double crest = lin / (2.0 * alpha);
        if (!(std::abs(crest) < 1e6))
            throw NonConvergedSeries("non-passage density: series centre out of range");
        auto log_f = [&](double z) { return log_pref + base + z * (lin - alpha * z); };
        auto step = [&](long k) {
            const double e_direct = log_f(double(k));
            const double e_image = log_f(double(k) + theta);
            if (std::max(e_direct, e_image) < series.log_cut()) return Term{0.0, 0.0};
            const double direct = exp_or_zero(e_direct);
            const double image = exp_or_zero(e_image);
            return Term{direct - image, std::max(direct, image)};
        };
        const long start = std::lround(crest - 0.5 * theta);
        series.walk(start, +1, crest, step);
        series.walk(start - 1, -1, crest - theta, step);
    } else {
        // Poisson-summation dual: products of sines vanishing on both boundaries.
        const double rel_pos = (upper - x) / gap_end;
        const double log_dual = log_pref + std::log(4.0) + 0.5 * std::log(kPi / alpha) + base +
                                lin * lin / (4.0 * alpha);
        const double decay = kPi * kPi / alpha;
        auto step = [&](long m) {
            const double md = double(m);
            const double env = exp_or_zero(log_dual - decay * md * md);
            return Term{env * std::sin(kPi * md * theta) * std::sin(kPi * md * rel_pos), env};
        };
        series.walk(1, +1, 0.0, step);
    }
    return series.result();
}

double fptd_single(double t, const LinearStage& stage, double x0, BoundaryLabel boundary,
                   const SeriesControl& ctl)
{
    const CanonicalStageParams p = canonicalize(stage, x0);
    return boundary == BoundaryLabel::upper ? fptd_upper_basic(t, p, ctl)
                                            : fptd_lower_basic(t, p, ctl);
}

double fptd_single_upper(double t, const LinearStage& stage, double x0, const SeriesControl& ctl)
{
    return fptd_upper_basic(t, canonicalize(stage, x0), ctl);
}

double fptd_single_lower(double t, const LinearStage& stage, double x0, const SeriesControl& ctl)
{
    return fptd_lower_basic(t, canonicalize(stage, x0), ctl);
}

double npd_single(double x, const LinearStage& stage, double x0, const SeriesControl& ctl)
{
    const CanonicalStageParams p = canonicalize(stage, x0);
    return npd_basic((x - x0) / stage.diffusion, p, ctl) / stage.diffusion;
}

}  // namespace gddm
