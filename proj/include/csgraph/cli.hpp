#pragma once

#include "csgraph/critical.hpp"
#include "csgraph/io.hpp"
#include "csgraph/linalg.hpp"
#include "csgraph/monotone.hpp"
#include "csgraph/sweep.hpp"
#include "csgraph/variational.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace csgraph::cli {

enum class Command { solve, critical, multiplicity, verify, sweep, poincare };
enum class Format { json, tsv };

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation = 1;
inline constexpr int solver = 2;
inline constexpr int inconclusive = 3;
} // namespace exit_code

struct RunConfig {
    Command command = Command::solve;
    std::string graph_path;
    std::vector<std::string> vortices;
    bool strict_distinct = false;
    std::optional<double> lambda;
    double b = 1.0;
    /// multiplicity without --lambda runs at lambda_factor * lambda_c.
    double lambda_factor = 1.01;

    double step_tolerance = 1e-12;
    double residual_tolerance = 1e-9;
    std::size_t max_iterations = 100000;
    /// Absolute bisection width; 0 means relative_tolerance * hi.
    double critical_tolerance = 0.0;
    double relative_tolerance = 1e-4;

    /// Sweep grid; without bounds the sweep covers [lambda_c, 10 lambda_c].
    std::optional<double> lambda_min;
    std::optional<double> lambda_max;
    std::size_t steps = 20;
    std::size_t jobs = 1;

    Format format = Format::json;
    std::uint64_t seed = 1;
    /// Random mean-zero samples for the poincare self-check.
    std::size_t samples = 1000;

    std::string solution_path;
    std::string solution_out;

    [[nodiscard]] MonotoneOptions monotone() const
    {
        MonotoneOptions m;
        m.step_tolerance = step_tolerance;
        m.residual_tolerance = residual_tolerance;
        m.max_iterations = max_iterations;
        return m;
    }

    [[nodiscard]] CriticalOptions critical() const
    {
        CriticalOptions c;
        c.tolerance = critical_tolerance;
        c.relative_tolerance = relative_tolerance;
        c.monotone = monotone();
        return c;
    }

    void validate() const
    {
        if (graph_path.empty()) {
            throw ValidationError("--graph is required");
        }
        if (command != Command::poincare && vortices.empty()) {
            throw ValidationError("at least one --vortex is required");
        }
        if (!(b > 0.0) || !std::isfinite(b)) {
            throw ValidationError("--b must be positive");
        }
        if (lambda && (!(*lambda > 0.0) || !std::isfinite(*lambda))) {
            throw ValidationError("--lambda must be positive");
        }
        if ((command == Command::solve || command == Command::verify) && !lambda) {
            throw ValidationError("--lambda is required for this command");
        }
        if (command == Command::verify && solution_path.empty()) {
            throw ValidationError("verify needs --solution");
        }
        if (!(lambda_factor > 1.0)) {
            throw ValidationError("--lambda-factor must exceed 1");
        }
        if (lambda_min.has_value() != lambda_max.has_value()) {
            throw ValidationError("--lambda-min and --lambda-max must be given together");
        }
        if (jobs < 1) {
            throw ValidationError("--jobs must be at least 1");
        }
        monotone().validate();
    }
};

namespace detail {

inline std::string format_number(double x)
{
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, res.ptr};
}

// Flattens nested objects and arrays into dotted keys, one "key<TAB>value" line each.
inline void flatten(const io::Json& j, const std::string& prefix, std::ostream& out)
{
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
        }
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            flatten(j[i], prefix + "." + std::to_string(i), out);
        }
    } else if (j.is_number_float()) {
        out << prefix << '\t' << format_number(j.get<double>()) << '\n';
    } else if (j.is_null()) {
        out << prefix << "\tnan\n";
    } else if (j.is_string()) {
        out << prefix << '\t' << j.get<std::string>() << '\n';
    } else {
        out << prefix << '\t' << j.dump() << '\n';
    }
}

inline void emit(const io::Json& j, Format format, std::ostream& out)
{
    if (format == Format::json) {
        out << j.dump(2) << '\n';
    } else {
        flatten(j, "", out);
    }
}

inline void write_solution(const FiniteGraph& g, const VertexFunction& v, const std::string& path)
{
    std::ofstream f(path);
    if (!f) {
        throw ValidationError("cannot write '" + path + "'");
    }
    f << io::function_to_json(g, v).dump(2) << '\n';
}

struct Setup {
    std::shared_ptr<const FiniteGraph> graph;
    VortexSet vortices;
    BackgroundField bg;

    [[nodiscard]] Problem problem(double lambda, double b) const { return Problem{graph, vortices, lambda, b}; }
};

inline Setup load(const RunConfig& cfg)
{
    Setup s;
    s.graph = io::load_graph(cfg.graph_path);
    s.vortices = VortexSet::build(*s.graph, cfg.vortices, cfg.strict_distinct);
    s.bg = compute_u0(*s.graph, s.vortices, cfg.monotone().linear);
    return s;
}

inline int run_solve(const RunConfig& cfg, std::ostream& out)
{
    const Setup s = load(cfg);
    const Problem p = s.problem(*cfg.lambda, cfg.b);
    const SolveReport r = iterate_scheme(p, s.bg, cfg.monotone());
    io::Json j = io::to_json(*s.graph, r);
    j["b"] = cfg.b;
    j["lower_bound"] = lambda_lower_bound(*s.graph, s.vortices.count(), cfg.b);
    if (r.status == SolveStatus::converged) {
        j["J"] = functional_J(p, s.bg, r.v);
        if (!cfg.solution_out.empty()) {
            write_solution(*s.graph, r.v, cfg.solution_out);
        }
    }
    emit(j, cfg.format, out);
    return r.status == SolveStatus::inconclusive ? exit_code::solver : exit_code::ok;
}

inline int run_critical(const RunConfig& cfg, std::ostream& out)
{
    const Setup s = load(cfg);
    const CriticalLambdaResult r = bisect(s.graph, s.vortices, cfg.b, cfg.critical(), &s.bg);
    io::Json j = io::to_json(r);
    j["b"] = cfg.b;
    emit(j, cfg.format, out);
    if (r.flagged()) {
        return exit_code::inconclusive;
    }
    return r.verified_above && r.verified_below ? exit_code::ok : exit_code::solver;
}

inline int run_multiplicity(const RunConfig& cfg, std::ostream& out)
{
    const Setup s = load(cfg);
    const CriticalLambdaResult crit = bisect(s.graph, s.vortices, cfg.b, cfg.critical(), &s.bg);
    if (crit.flagged()) {
        throw SolverError("lambda_c estimate has inconclusive oracle calls; rerun with a larger --max-iterations");
    }
    const double lambda = cfg.lambda.value_or(cfg.lambda_factor * crit.lambda_c);
    MultiplicityOptions opts;
    opts.monotone = cfg.monotone();
    const MultiplicityResult r = find_two_solutions(s.problem(lambda, cfg.b), s.bg, crit, opts);
    io::Json j;
    j["lambda"] = lambda;
    j["b"] = cfg.b;
    const io::Json report = io::to_json(*s.graph, r);
    for (auto& [k, v] : report.items()) {
        j[k] = v;
    }
    if (!cfg.solution_out.empty()) {
        write_solution(*s.graph, r.second, cfg.solution_out);
    }
    emit(j, cfg.format, out);
    return exit_code::ok;
}

inline int run_verify(const RunConfig& cfg, std::ostream& out)
{
    const Setup s = load(cfg);
    const Problem p = s.problem(*cfg.lambda, cfg.b);
    const VertexFunction v = io::load_solution(*s.graph, cfg.solution_path);
    const VertexFunction r = residual(p, s.bg, v);
    const double tol = std::max(kClassificationTolerance, attainable_residual(p, s.bg, v));
    io::Json j;
    j["lambda"] = p.lambda;
    j["b"] = p.b;
    j["classification"] = std::string(to_string(classify_sub_super(p, s.bg, v, tol)));
    j["residual_sup"] = r.cwiseAbs().maxCoeff();
    j["residual_min"] = r.minCoeff();
    j["residual_max"] = r.maxCoeff();
    j["tolerance"] = tol;
    j["max_u0_plus_v"] = (s.bg.u0 + v).maxCoeff();
    j["J"] = functional_J(p, s.bg, v);
    emit(j, cfg.format, out);
    return exit_code::ok;
}

inline int run_sweep(const RunConfig& cfg, std::ostream& out)
{
    const Setup s = load(cfg);
    double lo = 0.0;
    double hi = 0.0;
    std::optional<double> lambda_c;
    if (cfg.lambda_min) {
        lo = *cfg.lambda_min;
        hi = *cfg.lambda_max;
    } else {
        const CriticalLambdaResult crit = bisect(s.graph, s.vortices, cfg.b, cfg.critical(), &s.bg);
        lambda_c = crit.lambda_c;
        lo = crit.lambda_c;
        hi = 10.0 * crit.lambda_c;
    }
    const std::vector<SweepRow> rows =
        sweep(s.problem(lo, cfg.b), s.bg, linear_grid(lo, hi, cfg.steps), cfg.monotone(), cfg.jobs);
    const double max_ratio = max_grad_norm_ratio(rows);

    if (cfg.format == Format::tsv) {
        out << "lambda\tstatus\titerations\tmean_v\tJ\tgrad_norm_ratio\n";
        for (const auto& r : rows) {
            out << format_number(r.lambda) << '\t' << to_string(r.status) << '\t' << r.iterations << '\t'
                << format_number(r.mean_v) << '\t' << format_number(r.J) << '\t'
                << format_number(r.grad_norm_ratio) << '\n';
        }
        out << "# max_grad_norm_ratio\t" << format_number(max_ratio) << '\n';
    } else {
        io::Json j;
        j["b"] = cfg.b;
        j["lambda_c"] = lambda_c ? io::Json(*lambda_c) : io::Json(nullptr);
        j["max_grad_norm_ratio"] = std::isfinite(max_ratio) ? io::Json(max_ratio) : io::Json(nullptr);
        io::Json arr = io::Json::array();
        const auto num = [](double x) { return std::isfinite(x) ? io::Json(x) : io::Json(nullptr); };
        for (const auto& r : rows) {
            arr.push_back({{"lambda", r.lambda},
                           {"status", std::string(to_string(r.status))},
                           {"iterations", r.iterations},
                           {"mean_v", num(r.mean_v)},
                           {"J", num(r.J)},
                           {"grad_norm_ratio", num(r.grad_norm_ratio)}});
        }
        j["rows"] = std::move(arr);
        out << j.dump(2) << '\n';
    }
    return exit_code::ok;
}

inline int run_poincare(const RunConfig& cfg, std::ostream& out)
{
    const auto g = io::load_graph(cfg.graph_path);
    const double gap = spectral_gap(*g);
    const double constant = 1.0 / gap;

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    std::size_t violations = 0;
    for (std::size_t k = 0; k < cfg.samples; ++k) {
        VertexFunction u(static_cast<Eigen::Index>(g->size()));
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            u[i] = normal(rng);
        }
        u.array() -= mean(*g, u);
        const double lhs = integrate(*g, u.cwiseProduct(u));
        const double rhs = dirichlet_energy(*g, u);
        worst = std::max(worst, lhs / rhs);
        if (lhs > constant * rhs * (1.0 + 1e-12)) {
            ++violations;
        }
    }
    io::Json j;
    j["spectral_gap"] = gap;
    j["poincare_constant"] = constant;
    j["samples"] = cfg.samples;
    j["seed"] = cfg.seed;
    j["max_sample_ratio"] = worst;
    j["violations"] = violations;
    emit(j, cfg.format, out);
    return violations == 0 ? exit_code::ok : exit_code::solver;
}

} // namespace detail

/// Runs one command; the report goes to `out`, a one-line diagnostic to `err` on failure.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    try {
        cfg.validate();
        switch (cfg.command) {
        case Command::solve: return detail::run_solve(cfg, out);
        case Command::critical: return detail::run_critical(cfg, out);
        case Command::multiplicity: return detail::run_multiplicity(cfg, out);
        case Command::verify: return detail::run_verify(cfg, out);
        case Command::sweep: return detail::run_sweep(cfg, out);
        case Command::poincare: return detail::run_poincare(cfg, out);
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::validation;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << '\n';
        return exit_code::solver;
    }
    return exit_code::validation;
}

/// Registers the subcommands and flags on `app`, writing parsed values into `cfg`.
inline void configure(CLI::App& app, RunConfig& cfg)
{
    app.require_subcommand(1);
    const std::map<std::string, Format> formats{{"json", Format::json}, {"tsv", Format::tsv}};

    const auto common = [&](CLI::App* sub, bool needs_vortex) {
        sub->add_option("--graph", cfg.graph_path, "Graph JSON file")->required()->check(CLI::ExistingFile);
        if (needs_vortex) {
            sub->add_option("--vortex", cfg.vortices, "Vortex vertex id (repeat for several)")->required();
            sub->add_flag("--strict-distinct", cfg.strict_distinct, "Reject repeated vortex ids");
            sub->add_option("--b", cfg.b, "Exponent b > 0")->capture_default_str();
            sub->add_option("--step-tolerance", cfg.step_tolerance, "Sup-norm step that ends the monotone scheme")
                ->capture_default_str();
            sub->add_option("--residual-tolerance", cfg.residual_tolerance, "Residual required for convergence")
                ->capture_default_str();
            sub->add_option("--max-iterations", cfg.max_iterations, "Monotone scheme iteration cap")
                ->capture_default_str();
        }
        sub->add_option("--format", cfg.format, "Report format")
            ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case))
            ->option_text("json|tsv [json]");
    };
    const auto critical_flags = [&](CLI::App* sub) {
        sub->add_option("--tolerance", cfg.critical_tolerance, "Absolute bisection width (0: relative)")
            ->capture_default_str();
        sub->add_option("--relative-tolerance", cfg.relative_tolerance, "Bisection width relative to the bracket")
            ->capture_default_str();
    };

    auto* solve = app.add_subcommand("solve", "Maximal solution by the monotone scheme");
    common(solve, true);
    solve->add_option("--lambda", cfg.lambda, "Coupling lambda > 0")->required();
    solve->add_option("--solution-out", cfg.solution_out, "Write the converged v as id->value JSON");
    solve->callback([&] { cfg.command = Command::solve; });

    auto* critical = app.add_subcommand("critical", "Critical coupling lambda_c by bisection");
    common(critical, true);
    critical_flags(critical);
    critical->callback([&] { cfg.command = Command::critical; });

    auto* multiplicity = app.add_subcommand("multiplicity", "Two distinct solutions above lambda_c");
    common(multiplicity, true);
    critical_flags(multiplicity);
    multiplicity->add_option("--lambda", cfg.lambda, "Coupling lambda > lambda_c");
    multiplicity->add_option("--lambda-factor", cfg.lambda_factor, "Without --lambda: run at factor * lambda_c")
        ->capture_default_str();
    multiplicity->add_option("--solution-out", cfg.solution_out, "Write the second solution as id->value JSON");
    multiplicity->callback([&] { cfg.command = Command::multiplicity; });

    auto* verify = app.add_subcommand("verify", "Residual and classification of a solution file");
    common(verify, true);
    verify->add_option("--lambda", cfg.lambda, "Coupling lambda > 0")->required();
    verify->add_option("--solution", cfg.solution_path, "id->value JSON map")->required()->check(CLI::ExistingFile);
    verify->callback([&] { cfg.command = Command::verify; });

    auto* sweep = app.add_subcommand("sweep", "Monotone solves over a lambda grid");
    common(sweep, true);
    critical_flags(sweep);
    sweep->add_option("--lambda-min", cfg.lambda_min, "Grid start (default lambda_c)");
    sweep->add_option("--lambda-max", cfg.lambda_max, "Grid end (default 10 lambda_c)");
    sweep->add_option("--steps", cfg.steps, "Grid points")->capture_default_str();
    sweep->add_option("--jobs", cfg.jobs, "Worker threads")->capture_default_str();
    sweep->callback([&] { cfg.command = Command::sweep; });

    auto* poincare = app.add_subcommand("poincare", "Spectral gap and Poincare constant, with a sampled check");
    common(poincare, false);
    poincare->add_option("--seed", cfg.seed, "Seed for the sampled check")->capture_default_str();
    poincare->add_option("--samples", cfg.samples, "Random mean-zero functions to test")->capture_default_str();
    poincare->callback([&] { cfg.command = Command::poincare; });
}

/// Parses argv and runs; CLI usage errors map to the validation exit code.
inline int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Solver for the generalized Chern-Simons equation on finite graphs", "csgraph"};
    RunConfig cfg;
    configure(app, cfg);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? exit_code::ok : exit_code::validation;
    }
    return run(cfg, out, err);
}

} // namespace csgraph::cli
