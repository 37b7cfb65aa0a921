#pragma once

#include "csgraph/monotone.hpp"
#include "csgraph/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace csgraph {

struct OracleCall {
    double lambda;
    SolveStatus status;
    std::size_t iterations;
    /// "bracket", "lower_check", "geometric", "bisection" or "verification".
    std::string phase;
};

struct CriticalOptions {
    /// Absolute bisection width; when <= 0, relative_tolerance * hi is used, with hi the
    /// upper end after the geometric phase.
    double tolerance = 0.0;
    double relative_tolerance = 1e-4;
    /// Relative margin applied to the constructive upper bracket.
    double bracket_margin = 0.1;
    int bracket_retries = 6;
    /// Post-hoc oracle calls at lambda_c +- 10 * tolerance.
    bool verify = true;
    MonotoneOptions monotone{};
};

struct UpperBracket {
    double lambda_hi;
    /// The constant c with u0 - c < 0; v = -c is a strict lower solution at lambda_hi.
    double c;
    double margin;
    int retries;
    SolveReport verification;
};

/**
 * Constructive bracket: with c = max(u0) + 1 the constant -c is a lower
 * solution once lambda * min_x e^{u0-c}(1 - e^{b(u0-c)}) >= 4 pi N/|V|.
 * The margin doubles (at most opts.bracket_retries times) until one
 * monotone solve at lambda_hi converges.
 */
inline UpperBracket upper_bracket(const std::shared_ptr<const FiniteGraph>& graph, const VortexSet& vortices,
                                  double b, const BackgroundField& bg, const CriticalOptions& opts = {})
{
    const Problem probe{graph, vortices, 1.0, b};
    probe.validate();
    const double c = bg.u0.maxCoeff() + 1.0;
    double min_gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < bg.u0.size(); ++i) {
        min_gap = std::min(min_gap, -f_eval(b, bg.u0[i] - c));
    }
    if (!(min_gap > 0.0)) {
        throw SolverError("upper bracket: e^{u0-c}(1-e^{b(u0-c)}) underflowed; u0 range too large");
    }
    const double base = probe.source_density() / min_gap;
    double margin = opts.bracket_margin;
    for (int attempt = 0; attempt <= opts.bracket_retries; ++attempt) {
        const double lambda_hi = base * (1.0 + margin);
        SolveReport rep = iterate_scheme(probe.with_lambda(lambda_hi), bg, opts.monotone);
        if (rep.status == SolveStatus::converged) {
            return UpperBracket{lambda_hi, c, margin, attempt, std::move(rep)};
        }
        margin *= 2.0;
    }
    throw SolverError("upper bracket could not be verified after " + std::to_string(opts.bracket_retries) +
                      " margin doublings");
}

/// Bisection estimate of the critical coupling lambda_c with its full oracle transcript.
struct CriticalLambdaResult {
    /// Reported as the bracket's upper end, which is certified solvable.
    double lambda_c = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double tolerance = 0.0;
    std::size_t oracle_calls = 0;
    double lower_bound_derived = 0.0;
    double lower_bound_printed = 0.0;
    std::size_t inconclusive_count = 0;
    double bracket_c = 0.0;
    /// The constructive upper bracket before any narrowing.
    double bracket_hi = 0.0;
    std::vector<OracleCall> transcript;
    /// Post-hoc checks: solvable at lambda_c + 10 tol, unsolvable at lambda_c - 10 tol.
    bool verified_above = false;
    bool verified_below = false;

    [[nodiscard]] bool flagged() const noexcept { return inconclusive_count > 0; }
};

namespace detail {

class Oracle {
public:
    Oracle(const Problem& base, const BackgroundField& bg, const MonotoneOptions& opts, CriticalLambdaResult& out)
        : base_(base), bg_(bg), opts_(opts), out_(out)
    {
    }

    SolveStatus operator()(double lambda, const char* phase)
    {
        const SolveReport r = iterate_scheme(base_.with_lambda(lambda), bg_, opts_);
        ++out_.oracle_calls;
        out_.transcript.push_back({lambda, r.status, r.iterations, phase});
        if (r.status == SolveStatus::inconclusive) {
            ++out_.inconclusive_count;
        }
        check_up_set();
        return r.status;
    }

private:
    // Solvable lambdas form an up-set: no definite "diverged" may sit above a "converged".
    void check_up_set() const
    {
        double min_solvable = std::numeric_limits<double>::infinity();
        double max_unsolvable = -std::numeric_limits<double>::infinity();
        for (const auto& c : out_.transcript) {
            if (c.status == SolveStatus::converged) {
                min_solvable = std::min(min_solvable, c.lambda);
            } else if (c.status == SolveStatus::diverged) {
                max_unsolvable = std::max(max_unsolvable, c.lambda);
            }
        }
        if (max_unsolvable > min_solvable) {
            throw SolverError("up-set property violated: solvable at lambda=" + std::to_string(min_solvable) +
                              " but unsolvable at larger lambda=" + std::to_string(max_unsolvable));
        }
    }

    const Problem& base_;
    const BackgroundField& bg_;
    const MonotoneOptions& opts_;
    CriticalLambdaResult& out_;
};

} // namespace detail

/**
 * Bisection for lambda_c on [lambda_lower_bound, upper_bracket] using the
 * monotone scheme as existence oracle. Inconclusive oracle answers count as
 * unsolvable and flag the result.
 *
 * The constructive bracket can overshoot by orders of magnitude when u0 has a
 * wide range (a vortex at the end of a path gives hi/lo ~ 1e8), so the bracket
 * is first narrowed at geometric midpoints until hi <= 2 lo. The tolerance is
 * taken relative to hi after that phase.
 */
inline CriticalLambdaResult bisect(const std::shared_ptr<const FiniteGraph>& graph, const VortexSet& vortices, double b,
                                   const CriticalOptions& opts = {}, const BackgroundField* background = nullptr)
{
    const auto& g = *graph;
    const BackgroundField bg = background ? *background : compute_u0(g, vortices, opts.monotone.linear);
    const Problem base{graph, vortices, 1.0, b};
    base.validate();

    CriticalLambdaResult out;
    out.lower_bound_derived = lambda_lower_bound(g, vortices.count(), b);
    out.lower_bound_printed = lambda_lower_bound_printed(g, vortices.count(), b);

    UpperBracket ub = upper_bracket(graph, vortices, b, bg, opts);
    out.bracket_c = ub.c;
    out.bracket_hi = ub.lambda_hi;
    out.oracle_calls += static_cast<std::size_t>(ub.retries) + 1;
    out.transcript.push_back({ub.lambda_hi, ub.verification.status, ub.verification.iterations, "bracket"});

    detail::Oracle oracle(base, bg, opts.monotone, out);
    double lo = out.lower_bound_derived;
    double hi = ub.lambda_hi;
    if (oracle(lo, "lower_check") == SolveStatus::converged) {
        throw SolverError("invalid bracket: the oracle reports a solution at the necessary lower bound " +
                          std::to_string(lo));
    }
    while (hi > 2.0 * lo) {
        const double mid = std::sqrt(lo * hi);
        if (oracle(mid, "geometric") == SolveStatus::converged) {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    out.tolerance = opts.tolerance > 0.0 ? opts.tolerance : opts.relative_tolerance * hi;
    if (!(out.tolerance > 0.0)) {
        throw ValidationError("bisection tolerance must be positive");
    }
    while (hi - lo > out.tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (oracle(mid, "bisection") == SolveStatus::converged) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    out.lo = lo;
    out.hi = hi;
    out.lambda_c = hi;

    if (opts.verify) {
        out.verified_above = oracle(out.lambda_c + 10.0 * out.tolerance, "verification") == SolveStatus::converged;
        const double below = out.lambda_c - 10.0 * out.tolerance;
        out.verified_below = below <= 0.0 || oracle(below, "verification") == SolveStatus::diverged;
    }
    return out;
}

} // namespace csgraph
