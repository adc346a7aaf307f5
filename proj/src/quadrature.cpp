#include "gddm/quadrature.hpp"

#include "gddm/model.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace gddm {

namespace {

QuadratureRule compute_rule(int m)
{
    QuadratureRule rule;
    rule.nodes.resize(m);
    rule.weights.resize(m);
    const int half = (m + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Tricomi-style initial guess for the i-th largest root.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= m; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = m * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute the derivative at the converged root.
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= m; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = m * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[m - 1 - i] = x;
        rule.nodes[i] = -x;
        rule.weights[m - 1 - i] = w;
        rule.weights[i] = w;
    }
    if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
    return rule;
}

struct RuleCache {
    std::array<std::once_flag, kMaxQuadratureOrder + 1> once;
    std::array<std::unique_ptr<QuadratureRule>, kMaxQuadratureOrder + 1> rules;
};

RuleCache& cache()
{
    static RuleCache instance;
    return instance;
}

}  // namespace

const QuadratureRule& gauss_legendre(int m)
{
    if (m < 1 || m > kMaxQuadratureOrder)
        throw ValidationError("quadrature order " + std::to_string(m) + " outside [1, " +
                              std::to_string(kMaxQuadratureOrder) + "]");
    RuleCache& c = cache();
    std::call_once(c.once[m], [&] { c.rules[m] = std::make_unique<QuadratureRule>(compute_rule(m)); });
    return *c.rules[m];
}

MappedRule map_to_interval(const QuadratureRule& rule, double a, double b)
{
    if (!(a < b)) throw ValidationError("quadrature interval must satisfy a < b");
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    MappedRule out;
    out.positions.resize(rule.nodes.size());
    out.weights.resize(rule.nodes.size());
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        out.positions[i] = half * rule.nodes[i] + mid;
        out.weights[i] = half * rule.weights[i];
    }
    return out;
}

}  // namespace gddm
