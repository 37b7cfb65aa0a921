#pragma once

#include "csgraph/io.hpp"

#include <memory>
#include <string>
#include <vector>

namespace support {

inline std::string fixture(const std::string& name)
{
    return std::string(CSGRAPH_FIXTURES) + "/" + name + ".json";
}

inline std::shared_ptr<const csgraph::FiniteGraph> load(const std::string& name)
{
    return csgraph::io::load_graph(fixture(name));
}

inline const std::vector<std::string>& fixture_names()
{
    static const std::vector<std::string> names{"k2",       "k2_weighted",       "p4",       "p4_weighted",
                                                "torus4x4", "torus4x4_weighted", "petersen", "petersen_weighted"};
    return names;
}

/// K2 with ids x1, x2, unit edge weight and the given masses.
inline std::shared_ptr<const csgraph::FiniteGraph> k2(double mu1 = 1.0, double mu2 = 1.0, double w = 1.0)
{
    return std::make_shared<const csgraph::FiniteGraph>(
        csgraph::FiniteGraph::build({{"x1", mu1}, {"x2", mu2}}, {{"x1", "x2", w}}));
}

inline csgraph::VertexFunction vec(std::initializer_list<double> xs)
{
    csgraph::VertexFunction v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) {
        v[i++] = x;
    }
    return v;
}

inline csgraph::Problem problem(const std::shared_ptr<const csgraph::FiniteGraph>& g,
                                const std::vector<std::string>& vortices, double lambda, double b)
{
    return csgraph::Problem{g, csgraph::VortexSet::build(*g, vortices), lambda, b};
}

} // namespace support
