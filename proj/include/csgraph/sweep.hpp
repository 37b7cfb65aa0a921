#pragma once

#include "csgraph/calculus.hpp"
#include "csgraph/monotone.hpp"
#include "csgraph/variational.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace csgraph {

/// One row of a lambda sweep; J and the ratio are NaN unless the solve converged.
struct SweepRow {
    double lambda = 0.0;
    SolveStatus status = SolveStatus::inconclusive;
    std::size_t iterations = 0;
    double mean_v = std::numeric_limits<double>::quiet_NaN();
    double J = std::numeric_limits<double>::quiet_NaN();
    /// ||grad v'||_2 / lambda, v' = v - mean(v); bounded in lambda by the a priori estimate.
    double grad_norm_ratio = std::numeric_limits<double>::quiet_NaN();
};

/// n equally spaced values from lo to hi inclusive (n = 1 gives lo).
inline std::vector<double> linear_grid(double lo, double hi, std::size_t n)
{
    if (n < 1) {
        throw ValidationError("a sweep needs at least one step");
    }
    if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi)) {
        throw ValidationError("sweep range must satisfy 0 < lambda_min <= lambda_max");
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return out;
}

inline SweepRow sweep_point(const Problem& problem, const BackgroundField& bg, const MonotoneOptions& opts)
{
    SweepRow row;
    row.lambda = problem.lambda;
    const SolveReport r = iterate_scheme(problem, bg, opts);
    row.status = r.status;
    row.iterations = r.iterations;
    if (r.status == SolveStatus::converged) {
        const auto& g = problem.g();
        row.mean_v = mean(g, r.v);
        row.J = functional_J(problem, bg, r.v);
        row.grad_norm_ratio = std::sqrt(dirichlet_energy(g, r.v)) / problem.lambda;
    }
    return row;
}

/**
 * Monotone solves at every lambda in the grid, spread over `jobs` worker
 * threads. Rows come back in grid order whatever the scheduling.
 */
inline std::vector<SweepRow> sweep(const Problem& base, const BackgroundField& bg, const std::vector<double>& lambdas,
                                   const MonotoneOptions& opts = {}, std::size_t jobs = 1)
{
    base.validate();
    opts.validate();
    for (double l : lambdas) {
        if (!(l > 0.0) || !std::isfinite(l)) {
            throw ValidationError("sweep lambdas must be positive and finite");
        }
    }
    std::vector<SweepRow> rows(lambdas.size());
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, lambdas.size()));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < lambdas.size(); i = next++) {
            try {
                rows[i] = sweep_point(base.with_lambda(lambdas[i]), bg, opts);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(jobs);
        for (std::size_t j = 0; j < jobs; ++j) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return rows;
}

/// Largest grad_norm_ratio over converged rows, NaN if none converged.
inline double max_grad_norm_ratio(const std::vector<SweepRow>& rows)
{
    double best = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : rows) {
        if (r.status == SolveStatus::converged && !(r.grad_norm_ratio <= best)) {
            best = r.grad_norm_ratio;
        }
    }
    return best;
}

} // namespace csgraph
