#pragma once

#include "csgraph/graph.hpp"

#include <cmath>
#include <string>

namespace csgraph {

/// Delta u(x) = (1/mu(x)) * sum_{y~x} w_xy (u(y) - u(x)).
inline VertexFunction laplacian(const FiniteGraph& g, const VertexFunction& u)
{
    g.check_function(u);
    VertexFunction out(u.size());
    for (std::size_t x = 0; x < g.size(); ++x) {
        const double ux = u[static_cast<Eigen::Index>(x)];
        double acc = 0.0;
        for (const auto& n : g.neighbors(x)) {
            acc += n.weight * (u[static_cast<Eigen::Index>(n.index)] - ux);
        }
        out[static_cast<Eigen::Index>(x)] = acc / g.mu(x);
    }
    return out;
}

/// Gamma(u,v)(x) = (1/(2 mu(x))) * sum_{y~x} w_xy (u(y)-u(x)) (v(y)-v(x)).
inline VertexFunction gradient_form(const FiniteGraph& g, const VertexFunction& u, const VertexFunction& v)
{
    g.check_function(u, "u");
    g.check_function(v, "v");
    VertexFunction out(u.size());
    for (std::size_t x = 0; x < g.size(); ++x) {
        const auto xi = static_cast<Eigen::Index>(x);
        double acc = 0.0;
        for (const auto& n : g.neighbors(x)) {
            const auto yi = static_cast<Eigen::Index>(n.index);
            acc += n.weight * (u[yi] - u[xi]) * (v[yi] - v[xi]);
        }
        out[xi] = acc / (2.0 * g.mu(x));
    }
    return out;
}

/// |grad u|(x) = sqrt(Gamma(u,u)(x)).
inline VertexFunction grad_norm(const FiniteGraph& g, const VertexFunction& u)
{
    return gradient_form(g, u, u).array().sqrt().matrix();
}

/// Integral over V with respect to mu: sum_x mu(x) f(x).
inline double integrate(const FiniteGraph& g, const VertexFunction& f)
{
    g.check_function(f);
    return g.mu().dot(f);
}

/// int |grad u|^2 dmu, evaluated edge-wise as sum_{xy in E} w_xy (u(y)-u(x))^2.
inline double dirichlet_energy(const FiniteGraph& g, const VertexFunction& u)
{
    g.check_function(u);
    double acc = 0.0;
    for (const auto& e : g.edges()) {
        const double d = u[static_cast<Eigen::Index>(e.b)] - u[static_cast<Eigen::Index>(e.a)];
        acc += e.weight * d * d;
    }
    return acc;
}

/// Mean with respect to mu.
inline double mean(const FiniteGraph& g, const VertexFunction& f)
{
    return integrate(g, f) / g.total_measure();
}

/// Dirac mass normalized so that its integral is one: 1/mu(p) at p, zero elsewhere.
inline VertexFunction dirac_mass(const FiniteGraph& g, std::size_t p)
{
    if (p >= g.size()) {
        throw ValidationError("dirac_mass: vertex index " + std::to_string(p) + " out of range");
    }
    VertexFunction d = VertexFunction::Zero(static_cast<Eigen::Index>(g.size()));
    d[static_cast<Eigen::Index>(p)] = 1.0 / g.mu(p);
    return d;
}

inline VertexFunction dirac_mass(const FiniteGraph& g, const std::string& id)
{
    return dirac_mass(g, g.require_index(id));
}

} // namespace csgraph
