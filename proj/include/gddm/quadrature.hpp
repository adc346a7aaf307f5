#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gddm {

/// Gauss–Legendre rule on [-1, 1].
struct QuadratureRule {
    std::vector<double> nodes;    // strictly increasing, symmetric about 0
    std::vector<double> weights;  // positive, summing to 2

    std::size_t order() const { return nodes.size(); }
};

inline constexpr int kMaxQuadratureOrder = 512;

/// Cached rule of order m, 1 <= m <= 512. The reference stays valid for the
/// lifetime of the process.
const QuadratureRule& gauss_legendre(int m);

struct MappedRule {
    std::vector<double> positions;
    std::vector<double> weights;
};

/// Affine map of a rule onto [a, b]; throws ValidationError unless a < b.
MappedRule map_to_interval(const QuadratureRule& rule, double a, double b);

/// Weighted sum of f over a mapped rule.
template <class F>
double integrate(const QuadratureRule& rule, double a, double b, F&& f)
{
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        sum += rule.weights[i] * f(half * rule.nodes[i] + mid);
    return half * sum;
}

}  // namespace gddm
