#pragma once

// Experiment configurations and drivers behind the command-line subcommands.

#include "hps/archive.hpp"
#include "hps/mesh_io.hpp"
#include "hps/timestepper.hpp"

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace hps {

struct ExperimentConfig {
    std::string experiment;
    std::string problem;
    ParameterSet params;
    int p = 9;
    std::optional<int> q;  ///< defaults to p - 1
    std::vector<int> n_values;
    std::vector<int> q_values;      ///< varcoef: order sweep at fixed n
    std::vector<int> n_ref_values;  ///< refinement sweep
    std::vector<double> h_values;   ///< lshape-corner coarse leaf sizes
    std::vector<double> k_values;   ///< parabolic step sizes
    double t_end = 0.1;
    Point target{0.5, 0.5};
    Rect domain{Interval(0.0, 1.0), Interval(0.0, 1.0)};
    std::optional<MeshDescription> mesh;
    OperatorMode mode = OperatorMode::Stored;
    int repetitions = 3;
    std::optional<Discretization> reference;
    std::string out;
    std::string save_operators;
    std::string trajectory_out;

    [[nodiscard]] int order() const { return q.value_or(p - 1); }
};

[[nodiscard]] inline std::vector<std::string> experiment_names() {
    return {"speed", "varcoef", "concentrated", "discontinuous", "lshape-corner", "parabolic"};
}

/// Desk-scale default setup of each experiment.
[[nodiscard]] inline ExperimentConfig default_config(const std::string& experiment) {
    ExperimentConfig c;
    c.experiment = experiment;
    if (experiment == "speed") {
        c.problem = "poisson_sine";
        c.p = 9;
        c.n_values = {8, 16, 32, 64, 128};
    } else if (experiment == "varcoef") {
        c.problem = "varcoef_helmholtz";
        c.n_values = {16};
        c.q_values = {4, 8, 12, 16};
        c.reference = Discretization{17, 16, 32, 0, {}};
        c.repetitions = 1;
    } else if (experiment == "concentrated") {
        c.problem = "concentrated_helmholtz";
        c.p = 17;
        c.n_values = {4, 8};
        c.n_ref_values = {0, 1, 2};
        c.reference = Discretization{17, 16, 32, 0, {}};
        c.repetitions = 1;
    } else if (experiment == "discontinuous") {
        c.problem = "indicator_poisson";
        c.p = 17;
        c.n_values = {4, 8, 16, 32};
        c.reference = Discretization{21, 20, 32, 0, {}};
        c.repetitions = 1;
    } else if (experiment == "lshape-corner") {
        c.problem = "lshape_corner";
        c.p = 17;
        c.h_values = {0.25, 0.125};
        c.n_ref_values = {0, 1, 2, 3, 4, 5, 6};
        c.target = {1.0, 1.0};
        c.repetitions = 1;
    } else if (experiment == "parabolic") {
        c.problem = "heat_sine";
        c.p = 17;
        c.n_values = {8};
        c.k_values = {1.0 / 40, 1.0 / 80, 1.0 / 160, 1.0 / 320};
        c.t_end = 0.1;
        c.repetitions = 1;
    } else {
        throw std::invalid_argument("unknown experiment '" + experiment + "'");
    }
    return c;
}

/// Overlays a JSON document on a configuration. Unknown keys are rejected.
inline void apply_json(ExperimentConfig& c, const Json& j) {
    static const std::vector<std::string> known = {
        "experiment", "problem", "params", "p", "q", "n", "n_values", "q_values", "n_ref", "n_ref_values",
        "h_values", "k_values", "t_end", "target", "domain", "mesh", "mode", "repetitions", "reference", "out",
        "save_operators", "trajectory_out"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("unknown configuration key '" + key + "'");
        }
    }
    if (j.contains("problem")) c.problem = j["problem"].get<std::string>();
    if (j.contains("params")) {
        for (const auto& [k, v] : j["params"].items()) c.params[k] = v.get<double>();
    }
    if (j.contains("p")) c.p = j["p"].get<int>();
    if (j.contains("q")) c.q = j["q"].get<int>();
    if (j.contains("n")) c.n_values = {j["n"].get<int>()};
    if (j.contains("n_values")) c.n_values = j["n_values"].get<std::vector<int>>();
    if (j.contains("q_values")) c.q_values = j["q_values"].get<std::vector<int>>();
    if (j.contains("n_ref")) c.n_ref_values = {j["n_ref"].get<int>()};
    if (j.contains("n_ref_values")) c.n_ref_values = j["n_ref_values"].get<std::vector<int>>();
    if (j.contains("h_values")) c.h_values = j["h_values"].get<std::vector<double>>();
    if (j.contains("k_values")) c.k_values = j["k_values"].get<std::vector<double>>();
    if (j.contains("t_end")) c.t_end = j["t_end"].get<double>();
    if (j.contains("target")) c.target = point_from_json(j["target"]);
    if (j.contains("domain")) c.domain = rect_from_json(j["domain"]);
    if (j.contains("mesh")) c.mesh = mesh_from_json(j["mesh"]);
    if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
    if (j.contains("repetitions")) c.repetitions = j["repetitions"].get<int>();
    if (j.contains("reference")) {
        const Json& r = j["reference"];
        Discretization d;
        d.n = r.value("n", 2 * (c.n_values.empty() ? 1 : c.n_values.back()));
        d.q = r.value("q", c.order());
        d.p = r.value("p", d.q + 1);
        c.reference = d;
    }
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    if (j.contains("save_operators")) c.save_operators = j["save_operators"].get<std::string>();
    if (j.contains("trajectory_out")) c.trajectory_out = j["trajectory_out"].get<std::string>();
}

inline void validate(const ExperimentConfig& c) {
    if (c.p < 3) throw std::invalid_argument("p must be >= 3");
    if (c.order() < 2 || c.order() > c.p - 1) throw std::invalid_argument("q must satisfy 2 <= q <= p - 1");
    if (c.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    for (int n : c.n_values) {
        if (!is_power_of_two(n)) throw std::invalid_argument("n must be a power of two");
    }
    for (int r : c.n_ref_values) {
        if (r < 0) throw std::invalid_argument("n_ref must be >= 0");
    }
    for (int q : c.q_values) {
        if (q < 2) throw std::invalid_argument("q values must be >= 2");
    }
    for (double k : c.k_values) {
        if (!(k > 0.0)) throw std::invalid_argument("time steps must be positive");
    }
}

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<std::string> failures;  ///< one diagnostic per failed row

    [[nodiscard]] bool ok() const { return failures.empty(); }
};

namespace harness_detail {

inline std::string describe(const Discretization& d) {
    return "p=" + std::to_string(d.p) + " q=" + std::to_string(d.q) + " n=" + std::to_string(d.n) +
           " n_ref=" + std::to_string(d.n_ref);
}

/// Runs one row; a hard solver error yields a NaN error entry and a diagnostic.
template <class Fn>
void run_row(ExperimentResult& result, ResultRow skeleton, const std::string& label, Fn&& fn) {
    try {
        result.rows.push_back(fn());
    } catch (const std::exception& e) {
        skeleton.linf_error = std::numeric_limits<double>::quiet_NaN();
        result.rows.push_back(skeleton);
        result.failures.push_back(label + ": " + e.what());
    }
}

inline ResultRow skeleton(const Discretization& d, OperatorMode mode) {
    ResultRow r;
    r.p = d.p;
    r.q = d.q;
    r.n = d.n;
    r.n_ref = d.n_ref;
    r.mode = mode;
    return r;
}

inline ReferenceSolution reference_for(const ExperimentConfig& c, const ProblemSpec& spec,
                                       const Discretization& widest) {
    if (spec.exact) return compute_reference(spec, widest, widest, c.domain, c.mode);
    Discretization ref = c.reference.value_or(Discretization{c.order() + 5, c.order() + 4, 2 * widest.n, 0, {}});
    return compute_reference(spec, widest, ref, c.domain, c.mode);
}

inline void maybe_save(const ExperimentConfig& c, const DomainTree& tree, const ProblemSpec& spec,
                       const Discretization& d) {
    if (c.save_operators.empty()) return;
    persist_operators(build_stage(tree, spec, d.p, d.q, BuildOptions{c.mode, {}}), c.save_operators);
}

inline ExperimentResult run_sweep(const ExperimentConfig& c, const std::vector<Discretization>& cases) {
    ExperimentResult result;
    const ProblemSpec spec = catalog(c.problem, c.params);
    Discretization widest = cases.front();
    for (const auto& d : cases) {
        if (d.n > widest.n) widest.n = d.n;
        if (d.q > widest.q) {
            widest.q = d.q;
            widest.p = d.p;
        }
    }
    std::optional<ReferenceSolution> ref;
    std::string ref_error;
    try {
        ref = reference_for(c, spec, widest);
    } catch (const std::exception& e) {
        ref_error = e.what();
    }
    for (const auto& d : cases) {
        const auto label = c.experiment + " " + describe(d);
        run_row(result, skeleton(d, c.mode), label, [&] {
            if (!ref) throw std::runtime_error("reference solution failed: " + ref_error);
            const DomainTree tree = c.mesh ? build_mesh(*c.mesh) : discretization_tree(d, c.domain);
            return measure(spec, tree, d, c.mode, c.repetitions, [&](Point x) { return (*ref)(x); });
        });
    }
    if (!c.save_operators.empty() && !cases.empty()) {
        const auto& d = cases.back();
        maybe_save(c, c.mesh ? build_mesh(*c.mesh) : discretization_tree(d, c.domain), spec, d);
    }
    return result;
}

inline std::vector<int> or_default(const std::vector<int>& v, int fallback) {
    return v.empty() ? std::vector<int>{fallback} : v;
}

}  // namespace harness_detail

[[nodiscard]] inline ExperimentResult run_speed(const ExperimentConfig& c) {
    std::vector<Discretization> cases;
    for (int n : harness_detail::or_default(c.n_values, 8)) {
        for (int r : harness_detail::or_default(c.n_ref_values, 0)) cases.push_back({c.p, c.order(), n, r, c.target});
    }
    return harness_detail::run_sweep(c, cases);
}

[[nodiscard]] inline ExperimentResult run_varcoef(const ExperimentConfig& c) {
    std::vector<Discretization> cases;
    const std::vector<int> qs = c.q_values.empty() ? std::vector<int>{c.order()} : c.q_values;
    for (int n : harness_detail::or_default(c.n_values, 16)) {
        for (int q : qs) cases.push_back({q + 1, q, n, 0, c.target});
    }
    return harness_detail::run_sweep(c, cases);
}

[[nodiscard]] inline ExperimentResult run_refinement_sweep(const ExperimentConfig& c) {
    std::vector<Discretization> cases;
    for (int n : harness_detail::or_default(c.n_values, 4)) {
        for (int r : harness_detail::or_default(c.n_ref_values, 0)) cases.push_back({c.p, c.order(), n, r, c.target});
    }
    return harness_detail::run_sweep(c, cases);
}

[[nodiscard]] inline ExperimentResult run_lshape(const ExperimentConfig& c) {
    ExperimentResult result;
    const ProblemSpec spec = catalog(c.problem, c.params);
    if (!spec.exact) throw std::invalid_argument("lshape-corner needs a problem with a closed-form solution");
    const auto exact = *spec.exact;
    const std::vector<double> hs = c.h_values.empty() ? std::vector<double>{0.25} : c.h_values;
    for (double h : hs) {
        for (int r : harness_detail::or_default(c.n_ref_values, 0)) {
            const Discretization d{c.p, c.order(), static_cast<int>(std::lround(1.0 / h)), r, {1.0, 1.0}};
            harness_detail::run_row(result, harness_detail::skeleton(d, c.mode),
                                    "lshape-corner h=" + std::to_string(h) + " " + harness_detail::describe(d), [&] {
                                        const DomainTree tree = build_mesh(lshape_mesh(h, r));
                                        return measure(spec, tree, d, c.mode, c.repetitions,
                                                       [&](Point x) { return exact(x, 0.0); });
                                    });
        }
    }
    if (!c.save_operators.empty()) {
        const Discretization d{c.p, c.order(), static_cast<int>(std::lround(1.0 / hs.back())),
                               harness_detail::or_default(c.n_ref_values, 0).back(), {1.0, 1.0}};
        harness_detail::maybe_save(c, build_mesh(lshape_mesh(hs.back(), d.n_ref)), spec, d);
    }
    return result;
}

/// One row per step size: solve_seconds is the mean step time and linf_error the error at t_end.
[[nodiscard]] inline ExperimentResult run_parabolic(const ExperimentConfig& c) {
    ExperimentResult result;
    const ParabolicProblem problem = parabolic_from_catalog(c.problem, c.params);
    if (!problem.exact) throw std::invalid_argument("parabolic experiment needs a closed-form solution");
    const std::vector<double> ks = c.k_values.empty() ? std::vector<double>{0.01} : c.k_values;
    const int n = harness_detail::or_default(c.n_values, 8).front();
    const Discretization d{c.p, c.order(), n, 0, c.target};
    const DomainTree tree = c.mesh ? build_mesh(*c.mesh) : discretization_tree(d, c.domain);
    for (double k : ks) {
        harness_detail::run_row(result, harness_detail::skeleton(d, c.mode),
                                "parabolic k=" + std::to_string(k), [&] {
                                    TimeStepConfig cfg{k, c.t_end, {0.0, c.t_end}};
                                    const Trajectory traj = cn_run(problem, tree, d.p, d.q, cfg, c.mode);
                                    if (traj.builds != 1) throw std::logic_error("time stepping rebuilt the solver");
                                    ResultRow row = harness_detail::skeleton(d, c.mode);
                                    row.N = chebyshev_dof_count(tree, d.p);
                                    row.build_seconds = traj.build_seconds;
                                    row.solve_seconds = traj.mean_step_seconds;
                                    row.memory_floats = traj.memory_floats;
                                    row.linf_error = snapshot_error(traj, traj.snapshots.back(), *problem.exact);
                                    if (!c.trajectory_out.empty() && k == ks.back()) {
                                        write_trajectory_csv(c.trajectory_out, traj);
                                    }
                                    return row;
                                });
    }
    if (!c.save_operators.empty()) {
        persist_operators(build_stage(tree, cn_elliptic_spec(problem, ks.back()), d.p, d.q, BuildOptions{c.mode, {}}),
                          c.save_operators);
    }
    return result;
}

[[nodiscard]] inline ExperimentResult run_experiment(const ExperimentConfig& c) {
    validate(c);
    if (c.experiment == "speed") return run_speed(c);
    if (c.experiment == "varcoef") return run_varcoef(c);
    if (c.experiment == "concentrated" || c.experiment == "discontinuous") return run_refinement_sweep(c);
    if (c.experiment == "lshape-corner") return run_lshape(c);
    if (c.experiment == "parabolic") return run_parabolic(c);
    throw std::invalid_argument("unknown experiment '" + c.experiment + "'");
}

}  // namespace hps
