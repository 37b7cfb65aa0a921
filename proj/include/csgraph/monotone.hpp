#pragma once

#include "csgraph/calculus.hpp"
#include "csgraph/graph.hpp"
#include "csgraph/linalg.hpp"
#include "csgraph/nonlinearity.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace csgraph {

struct MonotoneOptions {
    /// K = b * lambda + K_margin; the scheme is monotone for K > b * lambda.
    double K_margin = 1.0;
    /// Sup-norm change between iterates below which the scheme is considered settled.
    double step_tolerance = 1e-12;
    std::size_t max_iterations = 100000;
    /// Non-existence is declared once mean(v_n) falls below this value.
    double divergence_floor = -1e6;
    /// A settled iterate is reported as converged only if its residual is below this bound
    /// (or below the rounding floor of the residual evaluation, whichever is larger).
    double residual_tolerance = 1e-9;
    LinearSolveOptions linear{};

    void validate() const
    {
        if (!(K_margin > 0.0)) {
            throw ValidationError("K_margin must be positive (the scheme requires K > b*lambda)");
        }
        if (!(step_tolerance > 0.0) || !(residual_tolerance > 0.0)) {
            throw ValidationError("step and residual tolerances must be positive");
        }
        if (max_iterations < 1) {
            throw ValidationError("max_iterations must be at least 1");
        }
        if (!(divergence_floor < 0.0)) {
            throw ValidationError("divergence_floor must be negative");
        }
        linear.validate();
    }
};

enum class SolveStatus { converged, diverged, inconclusive };

inline std::string_view to_string(SolveStatus s)
{
    switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::diverged: return "diverged";
    case SolveStatus::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

/// Outcome of a monotone or variational solve, with convergence diagnostics.
struct SolveReport {
    SolveStatus status = SolveStatus::inconclusive;
    /// Final iterate; a solution of the reduced equation when converged.
    VertexFunction v;
    std::size_t iterations = 0;
    double final_residual_sup = std::numeric_limits<double>::infinity();
    /// Steps that failed to decrease (monotone scheme) or to lower J (descent methods).
    std::size_t monotone_violations = 0;
    double min_u0_plus_v = 0.0;
    double max_u0_plus_v = 0.0;
    double lambda = 0.0;
    double shift_K = 0.0;
    /// Which test declared non-existence: "mean_floor" or "mass_certificate".
    std::string divergence_reason;
    double last_step_sup = std::numeric_limits<double>::infinity();
    /// Residual bound that was applied: max(residual_tolerance, rounding floor).
    double residual_threshold = 0.0;
};

/// Observer invoked with (n, v_n) after every iterate, v_0 included.
using IterationObserver = std::function<void(std::size_t, const VertexFunction&)>;

/// u0: mean-zero solution of Delta u0 = -4 pi N/|V| + 4 pi sum_j delta_{p_j}.
inline BackgroundField compute_u0(const FiniteGraph& g, const VortexSet& vortices,
                                  const LinearSolveOptions& opts = {})
{
    const double four_pi = 4.0 * std::numbers::pi;
    VertexFunction rhs = VertexFunction::Constant(static_cast<Eigen::Index>(g.size()),
                                                  -four_pi * static_cast<double>(vortices.count()) /
                                                      g.total_measure());
    for (auto p : vortices.points()) {
        rhs[static_cast<Eigen::Index>(p)] += four_pi / g.mu(p);
    }
    return BackgroundField{solve_poisson_mean_zero(g, rhs, opts)};
}

inline BackgroundField compute_u0(const Problem& problem, const LinearSolveOptions& opts = {})
{
    return compute_u0(problem.g(), problem.vortices, opts);
}

namespace detail {

inline void fill_bounds(SolveReport& report, const BackgroundField& bg)
{
    const VertexFunction u = bg.u0 + report.v;
    report.min_u0_plus_v = u.minCoeff();
    report.max_u0_plus_v = u.maxCoeff();
}

/**
 * Runs (Delta - K) v_n = lambda f(u0 + v_{n-1}) - K v_{n-1} + 4 pi N/|V| from the given start.
 *
 * The start must be an upper solution (v_0 = -u0 always is) so that the
 * iterates decrease. Besides the mean floor, non-existence is certified once
 * lambda * int e^{u0+v_n} dmu <= 4 pi N: every solution v satisfies
 * lambda * int e^{u0+v} dmu > 4 pi N and lies below every iterate.
 */
inline SolveReport run_scheme(const Problem& problem, const BackgroundField& bg, const MonotoneOptions& opts,
                              VertexFunction start, const IterationObserver& observer = {})
{
    problem.validate();
    opts.validate();
    const auto& g = problem.g();
    g.check_function(bg.u0, "u0");
    g.check_function(start, "start");

    const double shift = problem.b * problem.lambda + opts.K_margin;
    const ShiftedSolver solver(g, shift, opts.linear);
    const double source = problem.source_density();
    const double mass_threshold =
        4.0 * std::numbers::pi * static_cast<double>(problem.vortices.count()) * (1.0 - 1e-9);

    SolveReport report;
    report.lambda = problem.lambda;
    report.shift_K = shift;
    VertexFunction v = std::move(start);
    if (observer) {
        observer(0, v);
    }

    for (std::size_t n = 1; n <= opts.max_iterations; ++n) {
        const VertexFunction rhs = (nonlinear_term(problem, bg, v) - shift * v).array() + source;
        VertexFunction next = solver.solve(rhs);
        const VertexFunction step = next - v;
        const double step_sup = step.cwiseAbs().maxCoeff();
        if (step.maxCoeff() >= 0.0 && step_sup >= opts.step_tolerance) {
            ++report.monotone_violations;
        }
        v = std::move(next);
        report.iterations = n;
        report.last_step_sup = step_sup;
        if (observer) {
            observer(n, v);
        }

        if (mean(g, v) < opts.divergence_floor) {
            report.status = SolveStatus::diverged;
            report.divergence_reason = "mean_floor";
            break;
        }
        const double mass = problem.lambda * integrate(g, (bg.u0 + v).array().exp().matrix());
        if (mass <= mass_threshold) {
            report.status = SolveStatus::diverged;
            report.divergence_reason = "mass_certificate";
            break;
        }
        if (step_sup < opts.step_tolerance) {
            const double r = residual(problem, bg, v).cwiseAbs().maxCoeff();
            report.final_residual_sup = r;
            report.residual_threshold = std::max(opts.residual_tolerance, attainable_residual(problem, bg, v));
            if (r < report.residual_threshold) {
                report.status = SolveStatus::converged;
                break;
            }
        }
    }
    if (report.status != SolveStatus::diverged) {
        report.final_residual_sup = residual(problem, bg, v).cwiseAbs().maxCoeff();
    }
    report.v = std::move(v);
    fill_bounds(report, bg);
    return report;
}

} // namespace detail

/// Monotone scheme from v_0 = -u0; converges to the maximal solution whenever one exists.
inline SolveReport iterate_scheme(const Problem& problem, const BackgroundField& bg, const MonotoneOptions& opts = {},
                                  const IterationObserver& observer = {})
{
    return detail::run_scheme(problem, bg, opts, -bg.u0, observer);
}

struct CriticalSolveReport {
    SolveReport report;
    /// Offsets eps_k above lambda_c at which maximal solutions were computed.
    std::vector<double> offsets;
    /// Pointwise ordering failures v_{lambda_c+eps_k} > v_{lambda_c+eps_{k+1}}.
    std::size_t ordering_violations = 0;
    /// Residual (at lambda_c) of the polynomial extrapolation to eps = 0.
    double extrapolation_residual = std::numeric_limits<double>::infinity();
    /// True when the extrapolated limit was refined by the scheme run at lambda_c itself.
    bool refined = false;
};

/**
 * Solution at lambda = lambda_c as the limit of maximal solutions at
 * lambda_c + eps_k, eps_k = lambda_c * 2^{-k} / 100, k = 0..levels-1.
 *
 * The limit is extrapolated from the three smallest offsets. If its residual
 * misses the tolerance, the scheme is rerun at lambda_c starting from the
 * closest maximal solution, which is an upper solution there and dominates
 * the maximal solution at lambda_c.
 */
inline CriticalSolveReport solve_at_critical(const Problem& problem_at_lambda_c, const BackgroundField& bg,
                                             const MonotoneOptions& opts = {}, int levels = 9)
{
    if (levels < 3) {
        throw ValidationError("solve_at_critical needs at least three offsets");
    }
    const double lambda_c = problem_at_lambda_c.lambda;
    CriticalSolveReport out;
    std::vector<VertexFunction> solutions;
    for (int k = 0; k < levels; ++k) {
        const double eps = lambda_c * std::ldexp(1.0, -k) * 1e-2;
        SolveReport r = iterate_scheme(problem_at_lambda_c.with_lambda(lambda_c + eps), bg, opts);
        if (r.status != SolveStatus::converged) {
            throw SolverError("maximal solution at lambda_c + " + std::to_string(eps) + " is " +
                              std::string(to_string(r.status)) + "; the lambda_c estimate is too low");
        }
        if (!solutions.empty() && (solutions.back() - r.v).minCoeff() <= 0.0) {
            ++out.ordering_violations;
        }
        out.offsets.push_back(eps);
        solutions.push_back(std::move(r.v));
    }

    // Quadratic through the last three (eps, v) pairs, evaluated at eps = 0.
    const std::size_t m = solutions.size();
    const double e0 = out.offsets[m - 3], e1 = out.offsets[m - 2], e2 = out.offsets[m - 1];
    const double l0 = (e1 * e2) / ((e0 - e1) * (e0 - e2));
    const double l1 = (e0 * e2) / ((e1 - e0) * (e1 - e2));
    const double l2 = (e0 * e1) / ((e2 - e0) * (e2 - e1));
    VertexFunction limit = l0 * solutions[m - 3] + l1 * solutions[m - 2] + l2 * solutions[m - 1];
    out.extrapolation_residual = residual(problem_at_lambda_c, bg, limit).cwiseAbs().maxCoeff();

    if (out.extrapolation_residual < std::max(opts.residual_tolerance,
                                              attainable_residual(problem_at_lambda_c, bg, limit))) {
        SolveReport& rep = out.report;
        rep.status = SolveStatus::converged;
        rep.v = std::move(limit);
        rep.lambda = lambda_c;
        rep.final_residual_sup = out.extrapolation_residual;
        detail::fill_bounds(rep, bg);
        return out;
    }

    out.refined = true;
    out.report = detail::run_scheme(problem_at_lambda_c, bg, opts, solutions.back());
    return out;
}

/**
 * Discrete maximum principle as a checkable implication:
 * (Delta u - K u >= -tol everywhere) implies (u <= tol everywhere).
 */
inline bool verify_maximum_principle(const FiniteGraph& g, double shift, const VertexFunction& u, double tol = 1e-9)
{
    if (!(shift > 0.0)) {
        throw ValidationError("K must be positive");
    }
    const VertexFunction lhs = laplacian(g, u) - shift * u;
    const bool hypothesis = lhs.minCoeff() >= -tol;
    const bool conclusion = u.maxCoeff() <= tol;
    return !hypothesis || conclusion;
}

} // namespace csgraph
