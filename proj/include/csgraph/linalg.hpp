#pragma once

#include "csgraph/calculus.hpp"
#include "csgraph/graph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>

namespace csgraph {

struct LinearSolveOptions {
    /// Bound on ||residual||_inf relative to max(1, ||rhs||_inf).
    double tolerance = 1e-12;
    /// Cap on conjugate-gradient iterations per solve (sparse path only).
    int max_iterations = 20000;
    /// Graphs with at most this many vertices use a dense Cholesky factorization.
    std::size_t dense_threshold = 512;

    void validate() const
    {
        if (!(tolerance > 0.0)) {
            throw ValidationError("linear solve tolerance must be positive");
        }
        if (max_iterations < 1) {
            throw ValidationError("linear solve max_iterations must be at least 1");
        }
    }
};

namespace detail {

inline double sup_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

inline constexpr int kRefinementPasses = 4;

} // namespace detail

/**
 * Reusable solver for (Delta - K) w = f.
 *
 * The operator is assembled in its symmetric form (L + K M) w = -M f, where
 * L is the graph stiffness matrix and M = diag(mu). The factorization is
 * computed once and is safe to share between threads for solving.
 * The graph must outlive the solver.
 */
class ShiftedSolver {
public:
    ShiftedSolver(const FiniteGraph& g, double shift, LinearSolveOptions opts = {})
        : graph_(&g), shift_(shift), opts_(opts)
    {
        opts_.validate();
        if (!(shift > 0.0) || !std::isfinite(shift)) {
            throw ValidationError("shift K must be positive and finite");
        }
        Eigen::SparseMatrix<double> a = g.stiffness();
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            a.coeffRef(i, i) += shift * g.mu()[i];
        }
        if (g.size() <= opts_.dense_threshold) {
            dense_.emplace(Eigen::MatrixXd(a));
            if (dense_->info() != Eigen::Success) {
                throw SolverError("Cholesky factorization of K - Delta failed");
            }
        } else {
            // The solver keeps a reference to the matrix, so it must outlive the local.
            matrix_ = std::make_shared<const Eigen::SparseMatrix<double>>(std::move(a));
            sparse_ = std::make_shared<Cg>();
            sparse_->setTolerance(std::max(opts_.tolerance * 1e-2, 1e-16));
            sparse_->setMaxIterations(opts_.max_iterations);
            sparse_->compute(*matrix_);
            if (sparse_->info() != Eigen::Success) {
                throw SolverError("conjugate-gradient setup for K - Delta failed");
            }
        }
    }

    [[nodiscard]] double shift() const noexcept { return shift_; }
    [[nodiscard]] bool is_dense() const noexcept { return dense_.has_value(); }

    /// (Delta - K) w
    [[nodiscard]] VertexFunction apply(const VertexFunction& w) const
    {
        return laplacian(*graph_, w) - shift_ * w;
    }

    [[nodiscard]] VertexFunction solve(const VertexFunction& f) const
    {
        graph_->check_function(f, "right-hand side");
        const double bound = opts_.tolerance * std::max(1.0, detail::sup_norm(f));
        VertexFunction w = raw_solve(f);
        VertexFunction r = f - apply(w);
        for (int pass = 0; pass < detail::kRefinementPasses && detail::sup_norm(r) > bound; ++pass) {
            w += raw_solve(r);
            r = f - apply(w);
        }
        if (!(detail::sup_norm(r) <= bound)) {
            throw SolverError("shifted solve did not reach tolerance: residual " +
                              std::to_string(detail::sup_norm(r)) + " > " + std::to_string(bound) +
                              " (max_iterations=" + std::to_string(opts_.max_iterations) + ")");
        }
        return w;
    }

private:
    using Cg = Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper>;

    [[nodiscard]] VertexFunction raw_solve(const VertexFunction& f) const
    {
        const VertexFunction b = -(graph_->mu().cwiseProduct(f));
        if (dense_) {
            return dense_->solve(b);
        }
        return sparse_->solve(b);
    }

    const FiniteGraph* graph_;
    double shift_;
    LinearSolveOptions opts_;
    std::optional<Eigen::LLT<Eigen::MatrixXd>> dense_;
    std::shared_ptr<const Eigen::SparseMatrix<double>> matrix_;
    std::shared_ptr<Cg> sparse_;
};

/// Solves (Delta - K) w = f for K > 0.
inline VertexFunction solve_shifted(const FiniteGraph& g, double shift, const VertexFunction& f,
                                    const LinearSolveOptions& opts = {})
{
    return ShiftedSolver(g, shift, opts).solve(f);
}

/**
 * Reusable solver for the mean-zero Poisson problem Delta w = f, int w dmu = 0.
 *
 * Dense path: the rank-one augmented system (L + m m^T / |V|) w = -M f with
 * m = M 1, whose unique solution is the mean-zero one. Sparse path: CG on the
 * singular but consistent system followed by projection onto mean zero.
 */
class PoissonSolver {
public:
    explicit PoissonSolver(const FiniteGraph& g, LinearSolveOptions opts = {}) : graph_(&g), opts_(opts)
    {
        opts_.validate();
        if (g.size() <= opts_.dense_threshold) {
            Eigen::MatrixXd a(g.stiffness());
            a += g.mu() * g.mu().transpose() / g.total_measure();
            dense_.emplace(a);
            if (dense_->info() != Eigen::Success) {
                throw SolverError("Cholesky factorization of the augmented Laplacian failed");
            }
        } else {
            sparse_ = std::make_shared<Cg>();
            sparse_->setTolerance(std::max(opts_.tolerance * 1e-2, 1e-16));
            sparse_->setMaxIterations(opts_.max_iterations);
            sparse_->compute(g.stiffness());
        }
    }

    /// Compatibility bound for int f dmu.
    [[nodiscard]] double compatibility_tolerance(const VertexFunction& f) const
    {
        return 1e-9 * detail::sup_norm(f) * graph_->total_measure();
    }

    [[nodiscard]] VertexFunction solve(const VertexFunction& f) const
    {
        const auto& g = *graph_;
        g.check_function(f, "right-hand side");
        const double total = integrate(g, f);
        if (std::abs(total) > compatibility_tolerance(f)) {
            throw ValidationError("Poisson data is incompatible: int f dmu = " + std::to_string(total) +
                                  " (must vanish on a connected graph)");
        }
        const VertexFunction fp = project(f);
        const double bound = opts_.tolerance * std::max(1.0, detail::sup_norm(f));
        VertexFunction w = project(raw_solve(fp));
        VertexFunction r = fp - laplacian(g, w);
        for (int pass = 0; pass < detail::kRefinementPasses && detail::sup_norm(r) > bound; ++pass) {
            w = project(w + raw_solve(project(r)));
            r = fp - laplacian(g, w);
        }
        if (!(detail::sup_norm(r) <= bound)) {
            throw SolverError("Poisson solve did not reach tolerance: residual " +
                              std::to_string(detail::sup_norm(r)) + " > " + std::to_string(bound));
        }
        return w;
    }

private:
    using Cg = Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper>;

    [[nodiscard]] VertexFunction project(const VertexFunction& f) const
    {
        return f.array() - mean(*graph_, f);
    }

    [[nodiscard]] VertexFunction raw_solve(const VertexFunction& f) const
    {
        const VertexFunction b = -(graph_->mu().cwiseProduct(f));
        if (dense_) {
            return dense_->solve(b);
        }
        return sparse_->solve(b);
    }

    const FiniteGraph* graph_;
    LinearSolveOptions opts_;
    std::optional<Eigen::LLT<Eigen::MatrixXd>> dense_;
    std::shared_ptr<Cg> sparse_;
};

/// Mean-zero solution of Delta w = f; requires int f dmu = 0 up to rounding.
inline VertexFunction solve_poisson_mean_zero(const FiniteGraph& g, const VertexFunction& f,
                                              const LinearSolveOptions& opts = {})
{
    return PoissonSolver(g, opts).solve(f);
}

/// Smallest nonzero eigenvalue of -Delta, self-adjoint in the mu-weighted inner product.
inline double spectral_gap(const FiniteGraph& g, const LinearSolveOptions& opts = {})
{
    opts.validate();
    if (g.size() < 2) {
        throw ValidationError("spectral gap is undefined for a single-vertex graph");
    }
    // M^{-1/2} L M^{-1/2} is symmetric and similar to -Delta.
    const Eigen::VectorXd scale = g.mu().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd s = scale.asDiagonal() * Eigen::MatrixXd(g.stiffness()) * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw SolverError("eigensolver did not converge while computing the spectral gap");
    }
    const double gap = es.eigenvalues()[1];
    if (!(gap > 0.0)) {
        throw SolverError("spectral gap is not positive; graph may be numerically disconnected");
    }
    return gap;
}

/// C = 1 / spectral_gap, so that int u^2 <= C int |grad u|^2 for mean-zero u.
inline double poincare_constant(const FiniteGraph& g, const LinearSolveOptions& opts = {})
{
    return 1.0 / spectral_gap(g, opts);
}

} // namespace csgraph
