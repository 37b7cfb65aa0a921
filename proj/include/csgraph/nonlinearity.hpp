#pragma once

#include "csgraph/calculus.hpp"
#include "csgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>

namespace csgraph {

/// f(t) = e^t (e^{bt} - 1). Uses expm1 so that values near t = 0 keep full relative accuracy.
inline double f_eval(double b, double t)
{
    return std::exp(t) * std::expm1(b * t);
}

/// f'(t) = (b+1) e^{(b+1)t} - e^t.
inline double f_prime(double b, double t)
{
    // e^t ((b+1) e^{bt} - 1) = e^t (b + (b+1) expm1(bt))
    return std::exp(t) * (b + (b + 1.0) * std::expm1(b * t));
}

struct FMinimum {
    double t_star;
    double value;
};

/// Unique minimizer of f on the real line: t* = -ln(b+1)/b, f(t*) = -b (b+1)^{-(b+1)/b}.
inline FMinimum f_min(double b)
{
    if (!(b > 0.0)) {
        throw ValidationError("b must be positive");
    }
    const double t_star = -std::log1p(b) / b;
    const double value = -b * std::pow(b + 1.0, -(b + 1.0) / b);
    return {t_star, value};
}

/// The minimum value as printed in the source literature, -b/(b+1)^{b+1}. Correct only at b = 1.
inline double f_min_printed(double b)
{
    if (!(b > 0.0)) {
        throw ValidationError("b must be positive");
    }
    return -b / std::pow(b + 1.0, b + 1.0);
}

/// Necessary condition for solvability: lambda >= (4 pi N / |V|) / |min f|.
inline double lambda_lower_bound(const FiniteGraph& g, std::size_t n_vortices, double b)
{
    if (n_vortices < 1) {
        throw ValidationError("N must be at least 1");
    }
    return 4.0 * std::numbers::pi * static_cast<double>(n_vortices) / g.total_measure() / std::abs(f_min(b).value);
}

/// Same bound with the printed constant (b+1)^{b+1}/b. Reported alongside, asserted only for b = 1.
inline double lambda_lower_bound_printed(const FiniteGraph& g, std::size_t n_vortices, double b)
{
    if (n_vortices < 1) {
        throw ValidationError("N must be at least 1");
    }
    return 4.0 * std::numbers::pi * static_cast<double>(n_vortices) / g.total_measure() / std::abs(f_min_printed(b));
}

/// One equation instance: graph, vortices, coupling lambda and exponent b.
struct Problem {
    std::shared_ptr<const FiniteGraph> graph;
    VortexSet vortices;
    double lambda = 1.0;
    double b = 1.0;

    [[nodiscard]] const FiniteGraph& g() const { return *graph; }

    void validate() const
    {
        if (!graph) {
            throw ValidationError("problem has no graph");
        }
        if (!(lambda > 0.0) || !std::isfinite(lambda)) {
            throw ValidationError("lambda must be positive and finite");
        }
        if (!(b > 0.0) || !std::isfinite(b)) {
            throw ValidationError("b must be positive and finite");
        }
        if (vortices.count() < 1) {
            throw ValidationError("at least one vortex point is required");
        }
        for (auto p : vortices.points()) {
            if (p >= graph->size()) {
                throw ValidationError("vortex index out of range for this graph");
            }
        }
    }

    /// The constant 4 pi N / |V|.
    [[nodiscard]] double source_density() const
    {
        return 4.0 * std::numbers::pi * static_cast<double>(vortices.count()) / graph->total_measure();
    }

    [[nodiscard]] Problem with_lambda(double new_lambda) const
    {
        Problem p = *this;
        p.lambda = new_lambda;
        return p;
    }
};

/// Mean-zero background field u0 with Delta u0 = -4 pi N/|V| + 4 pi sum_j delta_{p_j}.
struct BackgroundField {
    VertexFunction u0;
};

/// lambda f(u0 + v) evaluated pointwise.
inline VertexFunction nonlinear_term(const Problem& problem, const BackgroundField& bg, const VertexFunction& v)
{
    const VertexFunction u = bg.u0 + v;
    VertexFunction out(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        out[i] = problem.lambda * f_eval(problem.b, u[i]);
    }
    return out;
}

/// r = Delta v - lambda e^{u0+v}(e^{b(u0+v)} - 1) - 4 pi N/|V|.
inline VertexFunction residual(const Problem& problem, const BackgroundField& bg, const VertexFunction& v)
{
    const auto& g = problem.g();
    g.check_function(v, "v");
    g.check_function(bg.u0, "u0");
    return (laplacian(g, v) - nonlinear_term(problem, bg, v)).array() - problem.source_density();
}

/**
 * Rounding floor for evaluating the residual at v: 64 eps times the size of
 * the largest terms entering it. Matters only for very large lambda, where
 * lambda * f'(u) amplifies the rounding in u0 + v.
 */
inline double attainable_residual(const Problem& problem, const BackgroundField& bg, const VertexFunction& v)
{
    const auto& g = problem.g();
    double lap_norm = 0.0;
    for (std::size_t x = 0; x < g.size(); ++x) {
        double row = 0.0;
        for (const auto& n : g.neighbors(x)) {
            row += n.weight;
        }
        lap_norm = std::max(lap_norm, 2.0 * row / g.mu(x));
    }
    const double vmax = v.cwiseAbs().maxCoeff();
    const double umax = bg.u0.cwiseAbs().maxCoeff();
    const double scale = lap_norm * vmax + problem.lambda * (problem.b + 1.0) * (umax + vmax) + problem.source_density();
    return 64.0 * std::numeric_limits<double>::epsilon() * scale;
}

enum class SubSuper { lower, upper, solution, neither };

inline std::string_view to_string(SubSuper s)
{
    switch (s) {
    case SubSuper::lower: return "lower";
    case SubSuper::upper: return "upper";
    case SubSuper::solution: return "solution";
    case SubSuper::neither: return "neither";
    }
    return "neither";
}

inline constexpr double kClassificationTolerance = 1e-9;

/// lower: Delta v >= RHS everywhere; upper: Delta v <= RHS everywhere; solution: both.
inline SubSuper classify_sub_super(const Problem& problem, const BackgroundField& bg, const VertexFunction& v,
                                   double tol = kClassificationTolerance)
{
    const VertexFunction r = residual(problem, bg, v);
    const bool lower = r.minCoeff() >= -tol;
    const bool upper = r.maxCoeff() <= tol;
    if (lower && upper) {
        return SubSuper::solution;
    }
    if (lower) {
        return SubSuper::lower;
    }
    if (upper) {
        return SubSuper::upper;
    }
    return SubSuper::neither;
}

} // namespace csgraph
