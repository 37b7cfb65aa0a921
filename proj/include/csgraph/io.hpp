#pragma once

#include "csgraph/critical.hpp"
#include "csgraph/graph.hpp"
#include "csgraph/monotone.hpp"
#include "csgraph/variational.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>

namespace csgraph::io {

using Json = nlohmann::ordered_json;

inline Json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open '" + path + "'");
    }
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("malformed JSON in '" + path + "': " + e.what());
    }
}

/// Graph schema: {"vertices":[{"id":string,"mu":number}], "edges":[{"u":string,"v":string,"w":number}]}.
inline std::shared_ptr<const FiniteGraph> parse_graph(const Json& doc)
{
    if (!doc.is_object() || !doc.contains("vertices") || !doc.at("vertices").is_array()) {
        throw ValidationError("graph JSON needs a \"vertices\" array");
    }
    std::vector<VertexSpec> vertices;
    for (const auto& v : doc.at("vertices")) {
        if (!v.is_object() || !v.contains("id") || !v.at("id").is_string()) {
            throw ValidationError("each vertex needs a string \"id\"");
        }
        VertexSpec spec{v.at("id").get<std::string>(), 1.0};
        if (v.contains("mu")) {
            if (!v.at("mu").is_number()) {
                throw ValidationError("vertex '" + spec.id + "': \"mu\" must be a number");
            }
            spec.mu = v.at("mu").get<double>();
        }
        vertices.push_back(std::move(spec));
    }
    std::vector<EdgeSpec> edges;
    if (doc.contains("edges")) {
        if (!doc.at("edges").is_array()) {
            throw ValidationError("\"edges\" must be an array");
        }
        for (const auto& e : doc.at("edges")) {
            if (!e.is_object() || !e.contains("u") || !e.contains("v") || !e.at("u").is_string() ||
                !e.at("v").is_string()) {
                throw ValidationError("each edge needs string endpoints \"u\" and \"v\"");
            }
            EdgeSpec spec{e.at("u").get<std::string>(), e.at("v").get<std::string>(), 1.0};
            if (e.contains("w")) {
                if (!e.at("w").is_number()) {
                    throw ValidationError("edge '" + spec.u + "'-'" + spec.v + "': \"w\" must be a number");
                }
                spec.weight = e.at("w").get<double>();
            }
            edges.push_back(std::move(spec));
        }
    }
    return std::make_shared<const FiniteGraph>(FiniteGraph::build(std::move(vertices), edges));
}

inline std::shared_ptr<const FiniteGraph> load_graph(const std::string& path)
{
    return parse_graph(read_json_file(path));
}

inline Json graph_to_json(const FiniteGraph& g)
{
    Json doc;
    doc["vertices"] = Json::array();
    for (std::size_t i = 0; i < g.size(); ++i) {
        doc["vertices"].push_back({{"id", g.id(i)}, {"mu", g.mu(i)}});
    }
    doc["edges"] = Json::array();
    for (const auto& e : g.edges()) {
        doc["edges"].push_back({{"u", g.id(e.a)}, {"v", g.id(e.b)}, {"w", e.weight}});
    }
    return doc;
}

/// id -> value map in canonical vertex order.
inline Json function_to_json(const FiniteGraph& g, const VertexFunction& f)
{
    g.check_function(f);
    Json m = Json::object();
    for (std::size_t i = 0; i < g.size(); ++i) {
        m[g.id(i)] = f[static_cast<Eigen::Index>(i)];
    }
    return m;
}

/// Parses an id -> value map that must cover every vertex exactly once with finite numbers.
inline VertexFunction parse_solution(const FiniteGraph& g, const Json& doc)
{
    if (!doc.is_object()) {
        throw ValidationError("solution must be a JSON object mapping vertex id to value");
    }
    VertexFunction v(static_cast<Eigen::Index>(g.size()));
    std::vector<char> seen(g.size(), 0);
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (!g.contains(it.key())) {
            throw ValidationError("solution has extra vertex '" + it.key() + "' not in the graph");
        }
        if (!it.value().is_number()) {
            throw ValidationError("solution value for '" + it.key() + "' is not a finite number");
        }
        const double x = it.value().get<double>();
        if (!std::isfinite(x)) {
            throw ValidationError("solution value for '" + it.key() + "' is not a finite number");
        }
        const std::size_t i = g.require_index(it.key());
        seen[i] = 1;
        v[static_cast<Eigen::Index>(i)] = x;
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!seen[i]) {
            throw ValidationError("solution is missing vertex '" + g.id(i) + "'");
        }
    }
    return v;
}

inline VertexFunction load_solution(const FiniteGraph& g, const std::string& path)
{
    return parse_solution(g, read_json_file(path));
}

inline Json to_json(const FiniteGraph& g, const SolveReport& r)
{
    Json j;
    j["status"] = std::string(to_string(r.status));
    j["lambda"] = r.lambda;
    j["K"] = r.shift_K;
    j["iterations"] = r.iterations;
    j["final_residual_sup"] = std::isfinite(r.final_residual_sup) ? Json(r.final_residual_sup) : Json(nullptr);
    j["last_step_sup"] = std::isfinite(r.last_step_sup) ? Json(r.last_step_sup) : Json(nullptr);
    j["monotone_violations"] = r.monotone_violations;
    j["min_u0_plus_v"] = r.min_u0_plus_v;
    j["max_u0_plus_v"] = r.max_u0_plus_v;
    if (!r.divergence_reason.empty()) {
        j["divergence_reason"] = r.divergence_reason;
    }
    if (r.status == SolveStatus::converged) {
        j["v"] = function_to_json(g, r.v);
    }
    return j;
}

inline Json to_json(const CriticalLambdaResult& r)
{
    Json j;
    j["lambda_c"] = r.lambda_c;
    j["bracket"] = {r.lo, r.hi};
    j["tolerance"] = r.tolerance;
    j["oracle_calls"] = r.oracle_calls;
    j["lower_bound_derived"] = r.lower_bound_derived;
    j["lower_bound_printed"] = r.lower_bound_printed;
    j["inconclusive_count"] = r.inconclusive_count;
    j["flagged"] = r.flagged();
    j["bracket_c"] = r.bracket_c;
    j["bracket_hi"] = r.bracket_hi;
    j["verified_above"] = r.verified_above;
    j["verified_below"] = r.verified_below;
    Json t = Json::array();
    for (const auto& c : r.transcript) {
        t.push_back({{"lambda", c.lambda},
                     {"status", std::string(to_string(c.status))},
                     {"iterations", c.iterations},
                     {"phase", c.phase}});
    }
    j["transcript"] = std::move(t);
    return j;
}

inline Json to_json(const FiniteGraph& g, const MultiplicityResult& r)
{
    Json j;
    j["route"] = std::string(to_string(r.route));
    j["lambda_c"] = r.lambda_c;
    j["obstacle_from_bracket"] = r.obstacle_from_bracket;
    j["J_min"] = r.J_min;
    j["J_second"] = r.J_second;
    j["c0"] = r.c0 ? Json(*r.c0) : Json(nullptr);
    j["separation_sup"] = r.separation_sup;
    j["residual_minimizer"] = r.residual_minimizer;
    j["residual_second"] = r.residual_second;
    j["max_u0_plus_minimizer"] = r.max_u0_plus_minimizer;
    j["max_u0_plus_second"] = r.max_u0_plus_second;
    j["obstacle_gap"] = r.obstacle_gap;
    j["active_set_size"] = r.active_set_size;
    if (r.mountain) {
        j["mountain_pass"] = {{"tau0", r.mountain->tau0},
                              {"J_far_end", r.mountain->J_far_end},
                              {"deformations", r.mountain->deformations},
                              {"newton_steps", r.mountain->newton_steps},
                              {"deformation_gradient_sup", r.mountain->deformation_gradient_sup},
                              {"gradient_sup", r.mountain->gradient_sup}};
    }
    j["minimizer"] = function_to_json(g, r.minimizer);
    j["second"] = function_to_json(g, r.second);
    j["v_star"] = function_to_json(g, r.v_star);
    return j;
}

} // namespace csgraph::io
