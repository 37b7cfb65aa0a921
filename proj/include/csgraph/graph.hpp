#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace csgraph {

/// Raised for malformed or inconsistent inputs (bad graphs, unknown ids, size mismatches).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a numerical procedure cannot meet its contract.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Real-valued function on the vertices, aligned with FiniteGraph's canonical vertex order.
using VertexFunction = Eigen::VectorXd;

struct EdgeSpec {
    std::string u;
    std::string v;
    double weight = 1.0;
};

struct VertexSpec {
    std::string id;
    double mu = 1.0;
};

struct Neighbor {
    std::size_t index;
    double weight;
};

/**
 * Connected, undirected, positively weighted graph with a positive vertex measure.
 *
 * Vertices are stored in lexicographic id order; every VertexFunction indexes
 * into that order. Instances are immutable after construction.
 */
class FiniteGraph {
public:
    static FiniteGraph build(std::vector<VertexSpec> vertices, const std::vector<EdgeSpec>& edges)
    {
        if (vertices.empty()) {
            throw ValidationError("graph has no vertices");
        }
        std::sort(vertices.begin(), vertices.end(),
                  [](const VertexSpec& a, const VertexSpec& b) { return a.id < b.id; });

        FiniteGraph g;
        g.ids_.reserve(vertices.size());
        g.mu_.resize(static_cast<Eigen::Index>(vertices.size()));
        for (std::size_t i = 0; i < vertices.size(); ++i) {
            const auto& vs = vertices[i];
            if (i > 0 && vs.id == vertices[i - 1].id) {
                throw ValidationError("duplicate vertex id '" + vs.id + "'");
            }
            if (!(std::isfinite(vs.mu) && vs.mu > 0.0)) {
                throw ValidationError("vertex '" + vs.id + "' has nonpositive or non-finite measure mu");
            }
            g.ids_.push_back(vs.id);
            g.mu_[static_cast<Eigen::Index>(i)] = vs.mu;
            g.index_.emplace(vs.id, i);
        }

        g.adjacency_.assign(vertices.size(), {});
        std::map<std::pair<std::size_t, std::size_t>, bool> seen;
        for (const auto& e : edges) {
            const std::size_t a = g.require_index(e.u);
            const std::size_t b = g.require_index(e.v);
            if (a == b) {
                throw ValidationError("self-loop at vertex '" + e.u + "'");
            }
            if (!(std::isfinite(e.weight) && e.weight > 0.0)) {
                throw ValidationError("edge '" + e.u + "'-'" + e.v + "' has nonpositive or non-finite weight");
            }
            const auto key = std::minmax(a, b);
            if (!seen.emplace(std::pair{key.first, key.second}, true).second) {
                throw ValidationError("duplicate edge '" + e.u + "'-'" + e.v + "'");
            }
            g.adjacency_[a].push_back({b, e.weight});
            g.adjacency_[b].push_back({a, e.weight});
            g.edges_.push_back({key.first, key.second, e.weight});
        }
        for (auto& nbrs : g.adjacency_) {
            std::sort(nbrs.begin(), nbrs.end(),
                      [](const Neighbor& x, const Neighbor& y) { return x.index < y.index; });
        }
        std::sort(g.edges_.begin(), g.edges_.end(), [](const Edge& x, const Edge& y) {
            return std::tie(x.a, x.b) < std::tie(y.a, y.b);
        });

        g.check_connected();
        g.total_measure_ = g.mu_.sum();
        g.assemble_laplacian();
        return g;
    }

    struct Edge {
        std::size_t a;
        std::size_t b;
        double weight;
    };

    [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
    [[nodiscard]] const std::vector<std::string>& ids() const noexcept { return ids_; }
    [[nodiscard]] const std::string& id(std::size_t i) const { return ids_.at(i); }
    [[nodiscard]] const Eigen::VectorXd& mu() const noexcept { return mu_; }
    [[nodiscard]] double mu(std::size_t i) const { return mu_[static_cast<Eigen::Index>(i)]; }
    [[nodiscard]] const std::vector<Neighbor>& neighbors(std::size_t i) const { return adjacency_.at(i); }
    [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }

    /// |V| = sum of mu over all vertices.
    [[nodiscard]] double total_measure() const noexcept { return total_measure_; }

    /// Symmetric combinatorial Laplacian L = D - W, so that Delta = -M^{-1} L.
    [[nodiscard]] const Eigen::SparseMatrix<double>& stiffness() const noexcept { return stiffness_; }

    [[nodiscard]] bool contains(const std::string& id) const { return index_.count(id) != 0; }

    [[nodiscard]] std::size_t require_index(const std::string& id) const
    {
        auto it = index_.find(id);
        if (it == index_.end()) {
            throw ValidationError("unknown vertex id '" + id + "'");
        }
        return it->second;
    }

    void check_function(const VertexFunction& u, const char* what = "vertex function") const
    {
        if (static_cast<std::size_t>(u.size()) != size()) {
            throw ValidationError(std::string(what) + " has " + std::to_string(u.size()) +
                                  " entries but the graph has " + std::to_string(size()) + " vertices");
        }
    }

private:
    FiniteGraph() = default;

    void check_connected() const
    {
        std::vector<char> visited(size(), 0);
        std::vector<std::size_t> stack{0};
        visited[0] = 1;
        std::size_t count = 1;
        while (!stack.empty()) {
            const std::size_t x = stack.back();
            stack.pop_back();
            for (const auto& n : adjacency_[x]) {
                if (!visited[n.index]) {
                    visited[n.index] = 1;
                    ++count;
                    stack.push_back(n.index);
                }
            }
        }
        if (count != size()) {
            for (std::size_t i = 0; i < size(); ++i) {
                if (!visited[i]) {
                    throw ValidationError("graph is disconnected: vertex '" + ids_[i] +
                                          "' is not reachable from '" + ids_[0] + "'");
                }
            }
        }
    }

    void assemble_laplacian()
    {
        const auto n = static_cast<Eigen::Index>(size());
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(size() + 2 * edges_.size());
        Eigen::VectorXd degree = Eigen::VectorXd::Zero(n);
        for (const auto& e : edges_) {
            const auto a = static_cast<Eigen::Index>(e.a);
            const auto b = static_cast<Eigen::Index>(e.b);
            triplets.emplace_back(a, b, -e.weight);
            triplets.emplace_back(b, a, -e.weight);
            degree[a] += e.weight;
            degree[b] += e.weight;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            triplets.emplace_back(i, i, degree[i]);
        }
        stiffness_.resize(n, n);
        stiffness_.setFromTriplets(triplets.begin(), triplets.end());
        stiffness_.makeCompressed();
    }

    std::vector<std::string> ids_;
    Eigen::VectorXd mu_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::vector<Neighbor>> adjacency_;
    std::vector<Edge> edges_;
    Eigen::SparseMatrix<double> stiffness_;
    double total_measure_ = 0.0;
};

/**
 * Vortex points as a multiset of vertex indices. A vertex listed n times
 * carries n Dirac masses.
 */
class VortexSet {
public:
    static VortexSet build(const FiniteGraph& g, const std::vector<std::string>& ids, bool strict_distinct = false)
    {
        if (ids.empty()) {
            throw ValidationError("at least one vortex point is required");
        }
        VortexSet vs;
        for (const auto& id : ids) {
            vs.points_.push_back(g.require_index(id));
        }
        std::sort(vs.points_.begin(), vs.points_.end());
        if (strict_distinct && std::adjacent_find(vs.points_.begin(), vs.points_.end()) != vs.points_.end()) {
            throw ValidationError("vortex points must be distinct (--strict-distinct)");
        }
        return vs;
    }

    /// N, counted with multiplicity.
    [[nodiscard]] std::size_t count() const noexcept { return points_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& points() const noexcept { return points_; }

    /// Multiplicity n_j of each vertex (zero where no vortex sits).
    [[nodiscard]] std::vector<std::size_t> multiplicities(std::size_t vertex_count) const
    {
        std::vector<std::size_t> m(vertex_count, 0);
        for (auto p : points_) {
            ++m.at(p);
        }
        return m;
    }

private:
    std::vector<std::size_t> points_;
};

} // namespace csgraph
