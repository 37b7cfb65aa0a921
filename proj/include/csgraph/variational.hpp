#pragma once

#include "csgraph/calculus.hpp"
#include "csgraph/critical.hpp"
#include "csgraph/monotone.hpp"
#include "csgraph/nonlinearity.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace csgraph {

/**
 * J(v) = 1/2 int |grad v|^2 + lambda/(b+1) int e^{(b+1)(u0+v)} - lambda int e^{u0+v} + (4 pi N/|V|) int v.
 *
 * Throws SolverError when the exponentials overflow.
 */
inline double functional_J(const Problem& problem, const BackgroundField& bg, const VertexFunction& v)
{
    const auto& g = problem.g();
    g.check_function(v, "v");
    const Eigen::ArrayXd u = (bg.u0 + v).array();
    const double b = problem.b;
    const double lambda = problem.lambda;
    const double potential = integrate(g, ((b + 1.0) * u).exp().matrix()) * lambda / (b + 1.0) -
                             lambda * integrate(g, u.exp().matrix());
    const double value = 0.5 * dirichlet_energy(g, v) + potential + problem.source_density() * integrate(g, v);
    if (!std::isfinite(value)) {
        throw SolverError("J overflowed: max(u0+v) = " + std::to_string(u.maxCoeff()));
    }
    return value;
}

/// Gradient of J in the mu-weighted inner product: -Delta v + lambda f(u0+v) + 4 pi N/|V| = -residual.
inline VertexFunction grad_J(const Problem& problem, const BackgroundField& bg, const VertexFunction& v)
{
    return -residual(problem, bg, v);
}

/// mu-weighted inner product.
inline double inner(const FiniteGraph& g, const VertexFunction& a, const VertexFunction& b)
{
    return integrate(g, a.cwiseProduct(b));
}

/// Obstacle v_star of the constraint set {v >= v_star}: the solution at lambda_c.
struct ObstacleSet {
    VertexFunction v_star;
    double lambda_c = 0.0;
    double residual_sup = 0.0;
    /// True when v_star is the maximal solution at the bracket's upper end rather than a limit at lambda_c.
    bool from_bracket = false;
};

struct DescentOptions {
    /// Stop once the projected gradient step falls below this sup-norm.
    double gradient_tolerance = 1e-10;
    std::size_t max_iterations = 200000;
    double armijo = 1e-4;
    int max_backtracks = 60;
};

struct MinimizerReport {
    SolveReport report;
    double energy = 0.0;
    /// Vertices with w == v_star at convergence.
    std::size_t active_set_size = 0;
    /// min_x (w(x) - v_star(x)).
    double obstacle_gap = 0.0;
    double unconstrained_gradient_sup = 0.0;
};

namespace detail {

/// Armijo test that switches to the trapezoid estimate of J(cand) - J(v) once exact differences drown in rounding.
inline bool sufficient_decrease(const FiniteGraph& g, double j_old, double j_new, const VertexFunction& g_old,
                                const VertexFunction& g_new, const VertexFunction& step, double armijo)
{
    const double predicted = inner(g, g_old, step);
    const double noise = 1e-12 * std::max(1.0, std::abs(j_old));
    if (std::abs(predicted) > noise) {
        return j_new <= j_old + armijo * predicted;
    }
    const double approx = 0.5 * (inner(g, g_old, step) + inner(g, g_new, step));
    return approx <= armijo * predicted;
}

} // namespace detail

/**
 * Projected gradient descent on J over {v >= v_star} with pointwise projection
 * max(v, v_star), Barzilai-Borwein trial steps and Armijo backtracking.
 * Starts from v_star unless a start is given.
 */
inline MinimizerReport minimize_over_sigma(const Problem& problem, const BackgroundField& bg,
                                           const ObstacleSet& obstacle, const DescentOptions& opts = {},
                                           std::optional<VertexFunction> start = std::nullopt)
{
    problem.validate();
    const auto& g = problem.g();
    g.check_function(obstacle.v_star, "v_star");
    const auto project = [&](const VertexFunction& x) -> VertexFunction { return x.cwiseMax(obstacle.v_star); };

    VertexFunction v = project(start ? *start : obstacle.v_star);
    double j = functional_J(problem, bg, v);
    VertexFunction grad = grad_J(problem, bg, v);
    double alpha = 1.0 / std::max(1.0, grad.cwiseAbs().maxCoeff());

    MinimizerReport out;
    SolveReport& rep = out.report;
    rep.lambda = problem.lambda;
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        const double pg = (project(v - grad) - v).cwiseAbs().maxCoeff();
        if (pg < opts.gradient_tolerance) {
            rep.status = SolveStatus::converged;
            break;
        }
        bool accepted = false;
        VertexFunction cand, cand_grad, step;
        double cand_j = 0.0;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            cand = project(v - alpha * grad);
            step = cand - v;
            cand_j = functional_J(problem, bg, cand);
            cand_grad = grad_J(problem, bg, cand);
            if (detail::sufficient_decrease(g, j, cand_j, grad, cand_grad, step, opts.armijo)) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            throw SolverError("projected gradient line search failed after " + std::to_string(opts.max_backtracks) +
                              " halvings (|pg| = " + std::to_string(pg) + ")");
        }
        if (cand_j > j + 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(j))) {
            ++rep.monotone_violations;
        }
        const VertexFunction y = cand_grad - grad;
        const double sy = inner(g, step, y);
        const double ss = inner(g, step, step);
        alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : 2.0 * alpha;
        v = std::move(cand);
        j = cand_j;
        grad = std::move(cand_grad);
        rep.iterations = it + 1;
    }

    rep.v = v;
    rep.final_residual_sup = grad.cwiseAbs().maxCoeff();
    detail::fill_bounds(rep, bg);
    out.energy = j;
    out.unconstrained_gradient_sup = rep.final_residual_sup;
    const VertexFunction gap = v - obstacle.v_star;
    out.obstacle_gap = gap.minCoeff();
    out.active_set_size = static_cast<std::size_t>((gap.array() <= 0.0).count());
    if (rep.status == SolveStatus::converged && out.active_set_size > 0) {
        throw SolverError("obstacle active at " + std::to_string(out.active_set_size) +
                          " vertices at convergence; lambda may not exceed lambda_c");
    }
    return out;
}

struct MountainPassOptions {
    std::size_t path_points = 64;
    /// The path is refined (points doubled) whenever its maximum sits at an endpoint, up to this count.
    std::size_t max_path_points = 4096;
    /// Gradient sup-norm at the path maximum that ends the search.
    double descent_tolerance = 1e-8;
    std::size_t max_deformations = 50000;
    double tau_growth = 2.0;
    double armijo = 1e-4;
    /// Gradient level at the path maximum below which Newton refinement takes over.
    double newton_switch = 1e-3;
    int max_newton_steps = 100;
    /// Deformations without lowering the path maximum before refinement takes over.
    std::size_t stall_window = 500;

    void validate() const
    {
        if (path_points < 3) {
            throw ValidationError("mountain pass needs at least 3 path points");
        }
        if (max_path_points < path_points) {
            throw ValidationError("max_path_points must be at least path_points");
        }
        if (!(tau_growth > 1.0)) {
            throw ValidationError("tau_growth must exceed 1");
        }
        if (!(descent_tolerance > 0.0)) {
            throw ValidationError("descent_tolerance must be positive");
        }
    }
};

struct MountainPassResult {
    VertexFunction saddle;
    double c0 = 0.0;
    double tau0 = 0.0;
    std::size_t path_refinements = 0;
    double J_minimizer = 0.0;
    double J_far_end = 0.0;
    std::size_t deformations = 0;
    std::size_t newton_steps = 0;
    /// Gradient at the path maximum when deformation stopped.
    double deformation_gradient_sup = 0.0;
    double gradient_sup = 0.0;
    double path_max_J = 0.0;
};

namespace detail {

/// Dense Hessian of J in matrix form: L + M diag(lambda f'(u0+v)).
inline Eigen::MatrixXd hessian_matrix(const Problem& problem, const BackgroundField& bg, const VertexFunction& v)
{
    const auto& g = problem.g();
    Eigen::MatrixXd h(g.stiffness());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        h(i, i) += g.mu()[i] * problem.lambda * f_prime(problem.b, bg.u0[i] + v[i]);
    }
    return h;
}

/// Damped Newton iteration on grad J = 0 with the mu-weighted gradient norm as merit.
inline VertexFunction newton_critical_point(const Problem& problem, const BackgroundField& bg, VertexFunction v,
                                            double tol, int max_steps, std::size_t& steps)
{
    const auto& g = problem.g();
    VertexFunction grad = grad_J(problem, bg, v);
    double merit = std::sqrt(inner(g, grad, grad));
    for (int k = 0; k < max_steps && grad.cwiseAbs().maxCoeff() >= tol; ++k) {
        const Eigen::MatrixXd h = hessian_matrix(problem, bg, v);
        const VertexFunction delta = h.fullPivLu().solve(-(g.mu().cwiseProduct(grad)));
        double t = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 40; ++bt, t *= 0.5) {
            const VertexFunction cand = v + t * delta;
            if (!((bg.u0 + cand).maxCoeff() < 50.0)) {
                continue;
            }
            const VertexFunction cg = grad_J(problem, bg, cand);
            const double m = std::sqrt(inner(g, cg, cg));
            if (m < merit) {
                v = cand;
                grad = cg;
                merit = m;
                moved = true;
                break;
            }
        }
        ++steps;
        if (!moved) {
            break;
        }
    }
    return v;
}

/// Redistributes m points (default: the current count) uniformly in mu-weighted arc length
/// along the current polyline, keeping both endpoints.
inline void reparametrize(const Problem& problem, const BackgroundField& bg, std::vector<VertexFunction>& path,
                          std::vector<double>& energy, std::size_t m = 0)
{
    const auto& g = problem.g();
    const std::size_t n = path.size();
    if (m == 0) {
        m = n;
    }
    std::vector<double> arc(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        const VertexFunction d = path[i] - path[i - 1];
        arc[i] = arc[i - 1] + std::sqrt(inner(g, d, d));
    }
    const double total = arc.back();
    if (!(total > 0.0)) {
        return;
    }
    std::vector<VertexFunction> fresh(m);
    fresh.front() = path.front();
    fresh.back() = path.back();
    std::size_t seg = 1;
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double target = total * static_cast<double>(i) / static_cast<double>(m - 1);
        while (seg + 1 < n && arc[seg] < target) {
            ++seg;
        }
        const double len = arc[seg] - arc[seg - 1];
        const double t = len > 0.0 ? (target - arc[seg - 1]) / len : 0.0;
        fresh[i] = (1.0 - t) * path[seg - 1] + t * path[seg];
    }
    path = std::move(fresh);
    const double first = energy.front();
    const double last = energy.back();
    energy.assign(m, 0.0);
    energy.front() = first;
    energy.back() = last;
    for (std::size_t i = 1; i + 1 < m; ++i) {
        energy[i] = functional_J(problem, bg, path[i]);
    }
}

} // namespace detail

/**
 * Numerical mountain pass from a strict local minimizer.
 *
 * The far endpoint is minimizer - tau0 with J(minimizer - tau0) < J(minimizer) - 1.
 * Starting from the straight path, the current maximum point is pushed along
 * -grad J with Armijo backtracking, one point per sweep. Once the gradient
 * there drops below newton_switch (or the descent stalls) the point is
 * refined by damped Newton iteration to a critical point, whose J value is c0.
 */
inline MountainPassResult mountain_pass(const Problem& problem, const BackgroundField& bg,
                                        const VertexFunction& minimizer, const MountainPassOptions& opts = {})
{
    opts.validate();
    problem.validate();
    const auto& g = problem.g();
    g.check_function(minimizer, "minimizer");

    MountainPassResult out;
    out.J_minimizer = functional_J(problem, bg, minimizer);

    double tau = 1.0;
    bool found = false;
    for (int k = 0; k < 200; ++k, tau *= opts.tau_growth) {
        if (functional_J(problem, bg, minimizer.array() - tau) < out.J_minimizer - 1.0) {
            found = true;
            break;
        }
    }
    if (!found) {
        throw SolverError("mountain pass: no tau0 with J(minimizer - tau0) < J(minimizer) - 1");
    }
    out.tau0 = tau;
    out.J_far_end = functional_J(problem, bg, minimizer.array() - tau);

    std::size_t n = opts.path_points;
    std::vector<VertexFunction> path(n);
    std::vector<double> energy(n);
    for (std::size_t i = 0; i < n; ++i) {
        path[i] = minimizer.array() - tau * static_cast<double>(i) / static_cast<double>(n - 1);
        energy[i] = functional_J(problem, bg, path[i]);
    }
    const auto norm = [&](const VertexFunction& x) { return std::sqrt(inner(g, x, x)); };
    const auto argmax = [&] {
        return static_cast<std::size_t>(std::max_element(energy.begin(), energy.end()) - energy.begin());
    };

    std::size_t top = argmax();
    double alpha = 1.0;
    double best = energy[top];
    std::size_t last_improvement = 0;
    for (; out.deformations < opts.max_deformations; ++out.deformations) {
        top = argmax();
        if (top == 0 || top == n - 1) {
            // The ridge lies inside the first or last segment.
            if (2 * n - 1 > opts.max_path_points) {
                throw SolverError("mountain pass: degenerate path, maximum at an endpoint with " +
                                  std::to_string(n) + " points");
            }
            n = 2 * n - 1;
            detail::reparametrize(problem, bg, path, energy, n);
            ++out.path_refinements;
            best = std::numeric_limits<double>::infinity();
            continue;
        }
        if (energy[top] < best - 1e-12 * std::max(1.0, std::abs(best))) {
            best = energy[top];
            last_improvement = out.deformations;
        } else if (out.deformations - last_improvement > opts.stall_window) {
            break;
        }
        const VertexFunction grad = grad_J(problem, bg, path[top]);
        const double gsup = grad.cwiseAbs().maxCoeff();
        if (gsup < opts.descent_tolerance || gsup < opts.newton_switch) {
            break;
        }
        // A move never exceeds the local spacing, so the polyline stays an honest path.
        const double spacing = std::min(norm(path[top] - path[top - 1]), norm(path[top + 1] - path[top]));
        const double slope = inner(g, grad, grad);
        alpha = std::min(2.0 * alpha, spacing / std::sqrt(slope));
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt, alpha *= 0.5) {
            const VertexFunction cand = path[top] - alpha * grad;
            const double jc = functional_J(problem, bg, cand);
            if (jc <= energy[top] - opts.armijo * alpha * slope) {
                path[top] = cand;
                energy[top] = jc;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            break;
        }
        detail::reparametrize(problem, bg, path, energy);
    }
    top = argmax();
    out.path_max_J = energy[top];
    out.deformation_gradient_sup = grad_J(problem, bg, path[top]).cwiseAbs().maxCoeff();

    VertexFunction saddle = path[top];
    if (out.deformation_gradient_sup >= opts.descent_tolerance) {
        saddle = detail::newton_critical_point(problem, bg, saddle, opts.descent_tolerance, opts.max_newton_steps,
                                               out.newton_steps);
    }
    out.gradient_sup = grad_J(problem, bg, saddle).cwiseAbs().maxCoeff();
    if (!(out.gradient_sup < opts.descent_tolerance)) {
        throw SolverError("mountain pass: gradient at the path maximum stalled at " +
                          std::to_string(out.gradient_sup) + " after " + std::to_string(out.deformations) +
                          " deformations");
    }
    out.c0 = functional_J(problem, bg, saddle);
    if ((saddle - minimizer).cwiseAbs().maxCoeff() <= 1e-4 || !(out.c0 > out.J_minimizer)) {
        throw SolverError("mountain pass collapsed onto the minimizer");
    }
    out.saddle = std::move(saddle);
    return out;
}

enum class MultiplicityRoute { distinct_maximal, mountain_pass };

inline std::string_view to_string(MultiplicityRoute r)
{
    return r == MultiplicityRoute::distinct_maximal ? "distinct_maximal" : "mountain_pass";
}

struct MultiplicityResult {
    VertexFunction minimizer;
    VertexFunction second;
    double J_min = 0.0;
    double J_second = 0.0;
    /// Mountain-pass level; empty when the maximal solution already differs from the minimizer.
    std::optional<double> c0;
    MultiplicityRoute route = MultiplicityRoute::mountain_pass;
    double separation_sup = 0.0;
    double residual_minimizer = 0.0;
    double residual_second = 0.0;
    double max_u0_plus_minimizer = 0.0;
    double max_u0_plus_second = 0.0;
    double obstacle_gap = 0.0;
    std::size_t active_set_size = 0;
    bool obstacle_from_bracket = false;
    double lambda_c = 0.0;
    VertexFunction v_star;
    std::optional<MountainPassResult> mountain;
};

struct MultiplicityOptions {
    MonotoneOptions monotone{};
    DescentOptions descent{};
    MountainPassOptions mountain{};
    /// Sup-norm below which the maximal solution and the minimizer count as identical.
    double distinct_threshold = 1e-6;
    /// Both returned functions must have residuals below this.
    double verify_tolerance = 1e-6;
};

/// Obstacle from the lambda_c limit, falling back to the maximal solution at the bracket's upper end.
inline ObstacleSet build_obstacle(const Problem& problem, const BackgroundField& bg,
                                  const CriticalLambdaResult& critical, const MonotoneOptions& opts = {})
{
    ObstacleSet obs;
    obs.lambda_c = critical.lambda_c;
    try {
        CriticalSolveReport crit = solve_at_critical(problem.with_lambda(critical.lambda_c), bg, opts);
        if (crit.report.status == SolveStatus::converged) {
            obs.v_star = std::move(crit.report.v);
            obs.residual_sup = crit.report.final_residual_sup;
            return obs;
        }
    } catch (const SolverError&) {
    }
    SolveReport fallback = iterate_scheme(problem.with_lambda(critical.hi), bg, opts);
    if (fallback.status != SolveStatus::converged) {
        throw SolverError("no certified obstacle: maximal solution at bracket hi is " +
                          std::string(to_string(fallback.status)));
    }
    obs.v_star = std::move(fallback.v);
    obs.residual_sup = fallback.final_residual_sup;
    obs.lambda_c = critical.hi;
    obs.from_bracket = true;
    return obs;
}

/**
 * Two distinct solutions for lambda > lambda_c: the maximal solution and the
 * constrained minimizer w over {v >= v_star}; if they coincide, the second
 * one comes from the mountain pass started at w.
 */
inline MultiplicityResult find_two_solutions(const Problem& problem, const BackgroundField& bg,
                                             const CriticalLambdaResult& critical,
                                             const MultiplicityOptions& opts = {})
{
    problem.validate();
    if (!(problem.lambda > critical.lambda_c)) {
        throw ValidationError("multiplicity requires lambda > lambda_c (" + std::to_string(critical.lambda_c) + ")");
    }
    const SolveReport maximal = iterate_scheme(problem, bg, opts.monotone);
    if (maximal.status != SolveStatus::converged) {
        throw SolverError("maximal solution: monotone scheme " + std::string(to_string(maximal.status)));
    }

    MultiplicityResult out;
    const ObstacleSet obstacle = build_obstacle(problem, bg, critical, opts.monotone);
    out.obstacle_from_bracket = obstacle.from_bracket;
    out.lambda_c = obstacle.lambda_c;
    out.v_star = obstacle.v_star;

    const MinimizerReport w = minimize_over_sigma(problem, bg, obstacle, opts.descent);
    if (w.report.status != SolveStatus::converged) {
        throw SolverError("constrained minimization did not converge in " + std::to_string(w.report.iterations) +
                          " iterations");
    }
    out.obstacle_gap = w.obstacle_gap;
    out.active_set_size = w.active_set_size;
    out.minimizer = w.report.v;
    out.J_min = w.energy;

    const double gap = (maximal.v - w.report.v).cwiseAbs().maxCoeff();
    if (gap > opts.distinct_threshold) {
        out.route = MultiplicityRoute::distinct_maximal;
        out.second = maximal.v;
    } else {
        out.route = MultiplicityRoute::mountain_pass;
        MountainPassResult mp = mountain_pass(problem, bg, out.minimizer, opts.mountain);
        out.second = mp.saddle;
        out.c0 = mp.c0;
        out.mountain = std::move(mp);
    }
    out.J_second = functional_J(problem, bg, out.second);
    out.separation_sup = (out.minimizer - out.second).cwiseAbs().maxCoeff();
    out.residual_minimizer = residual(problem, bg, out.minimizer).cwiseAbs().maxCoeff();
    out.residual_second = residual(problem, bg, out.second).cwiseAbs().maxCoeff();
    out.max_u0_plus_minimizer = (bg.u0 + out.minimizer).maxCoeff();
    out.max_u0_plus_second = (bg.u0 + out.second).maxCoeff();
    if (!(out.residual_minimizer < opts.verify_tolerance && out.residual_second < opts.verify_tolerance)) {
        throw SolverError("multiplicity: returned functions fail verification (residuals " +
                          std::to_string(out.residual_minimizer) + ", " + std::to_string(out.residual_second) + ")");
    }
    return out;
}

} // namespace csgraph
