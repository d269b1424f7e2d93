#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace wavedg {

/// Gauss–Legendre rule on the reference interval [-1, 1].
struct QuadratureRule {
    std::vector<double> points;
    std::vector<double> weights;

    std::size_t size() const { return points.size(); }

    /// Point i mapped to [a, b].
    double point(std::size_t i, double a, double b) const
    {
        return 0.5 * (a + b) + 0.5 * (b - a) * points[i];
    }
    /// Weight i scaled to [a, b].
    double weight(std::size_t i, double a, double b) const { return 0.5 * (b - a) * weights[i]; }

    template <class F>
    double integrate(F&& f, double a, double b) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += weight(i, a, b) * f(point(i, a, b));
        return s;
    }
};

namespace detail {

inline QuadratureRule make_gauss_legendre(int n)
{
    QuadratureRule rule;
    rule.points.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Chebyshev-like initial guess, then Newton on P_n.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        const auto lo = static_cast<std::size_t>(i);
        const auto hi = static_cast<std::size_t>(n - 1 - i);
        rule.points[lo] = -x;
        rule.points[hi] = x;
        rule.weights[lo] = w;
        rule.weights[hi] = w;
    }
    if (n % 2 == 1) rule.points[static_cast<std::size_t>(n / 2)] = 0.0;
    return rule;
}

} // namespace detail

/// n-point Gauss–Legendre rule, exact for polynomials of degree 2n − 1.
/// Rules up to 16 points are built once and cached.
inline const QuadratureRule& gauss_legendre(int n)
{
    static const std::array<QuadratureRule, 17> rules = [] {
        std::array<QuadratureRule, 17> r;
        for (int i = 1; i <= 16; ++i) r[static_cast<std::size_t>(i)] = detail::make_gauss_legendre(i);
        return r;
    }();
    if (n < 1 || n > 16) {
        throw std::invalid_argument("gauss_legendre: supported orders are 1..16");
    }
    return rules[static_cast<std::size_t>(n)];
}

} // namespace wavedg
