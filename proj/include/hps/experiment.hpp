#pragma once

// Evaluation of computed solutions, reference solutions, the leaf-boundary
// error metric, experiment configuration and CSV result rows.

#include "hps/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

namespace hps {

/// Leaf ordinal of a leaf whose closed box contains x, or -1.
[[nodiscard]] inline int locate_leaf(const FactorizedSolver& solver, Point x, double tol = 1e-12) {
    const auto& tree = solver.tree();
    const double slack = tol * std::max(tree.extent().width(), tree.extent().height());
    std::vector<int> stack{tree.root()};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        const auto& nd = tree.node(id);
        if (!nd.bounds.contains(x, slack)) continue;
        if (nd.is_leaf) return solver.layout().leaf_ordinal[static_cast<std::size_t>(id)];
        stack.push_back(nd.children[1]);
        stack.push_back(nd.children[0]);
    }
    return -1;
}

/// Interpolates one leaf tabulation (tensor order) at x.
[[nodiscard]] inline double interpolate_leaf(const Vector& tab, int p, const Rect& box, Point x) {
    const auto cx = chebyshev_nodes(p, box.x1).nodes;
    const auto cy = chebyshev_nodes(p, box.x2).nodes;
    const double px[1] = {x.x1};
    const double py[1] = {x.x2};
    const Matrix lx = interp_matrix(cx, px);
    const Matrix ly = interp_matrix(cy, py);
    const Eigen::Map<const Matrix> u(tab.data(), p, p);
    return (lx * u * ly.transpose())(0, 0);
}

[[nodiscard]] inline double evaluate(const FactorizedSolver& solver, const SolveState& state, Point x) {
    const int o = locate_leaf(solver, x);
    if (o < 0) {
        throw std::out_of_range("point (" + std::to_string(x.x1) + ", " + std::to_string(x.x2) + ") is outside the domain");
    }
    return interpolate_leaf(state.leaf_solutions[static_cast<std::size_t>(o)], solver.p(), solver.leaf_box(o), x);
}

/// Either a closed-form solution or a finer discretization evaluated by interpolation.
class ReferenceSolution {
public:
    static ReferenceSolution analytic(std::function<double(Point)> u) {
        ReferenceSolution r;
        r.analytic_ = std::move(u);
        return r;
    }
    static ReferenceSolution discrete(std::shared_ptr<const FactorizedSolver> solver, SolveState state) {
        ReferenceSolution r;
        r.solver_ = std::move(solver);
        r.state_ = std::make_shared<const SolveState>(std::move(state));
        return r;
    }

    [[nodiscard]] bool is_analytic() const { return static_cast<bool>(analytic_); }
    [[nodiscard]] double operator()(Point x) const { return analytic_ ? analytic_(x) : evaluate(*solver_, *state_, x); }
    [[nodiscard]] const FactorizedSolver* solver() const { return solver_.get(); }

private:
    std::function<double(Point)> analytic_;
    std::shared_ptr<const FactorizedSolver> solver_;
    std::shared_ptr<const SolveState> state_;
};

[[nodiscard]] inline IndexList leaf_exterior_pattern(int p) {
    IndexList out;
    for (int j = 0; j < p; ++j) {
        for (int i = 0; i < p; ++i) {
            if (i == 0 || j == 0 || i == p - 1 || j == p - 1) out.push_back(i + static_cast<Index>(p) * j);
        }
    }
    return out;
}

/// Max deviation from the reference over all Chebyshev nodes on leaf boundaries.
[[nodiscard]] inline double leaf_boundary_error(int p, const std::vector<Rect>& boxes, const std::vector<Vector>& tabs,
                                                const std::function<double(Point)>& reference) {
    if (boxes.size() != tabs.size()) throw std::invalid_argument("leaf_boundary_error: leaf count mismatch");
    const IndexList ext = leaf_exterior_pattern(p);
    double err = 0.0;
    for (std::size_t o = 0; o < boxes.size(); ++o) {
        const auto pts = chebyshev_points(p, boxes[o]);
        const Vector& u = tabs[o];
        for (Index k : ext) {
            const double d = std::abs(u(k) - reference(pts[static_cast<std::size_t>(k)]));
            if (std::isnan(d)) return std::numeric_limits<double>::quiet_NaN();
            err = std::max(err, d);
        }
    }
    return err;
}

[[nodiscard]] inline std::vector<Rect> leaf_boxes(const FactorizedSolver& solver) {
    std::vector<Rect> out;
    for (std::size_t o = 0; o < solver.leaf_count(); ++o) out.push_back(solver.leaf_box(static_cast<int>(o)));
    return out;
}

[[nodiscard]] inline double linf_error(const FactorizedSolver& solver, const SolveState& state,
                                       const std::function<double(Point)>& reference) {
    return leaf_boundary_error(solver.p(), leaf_boxes(solver), state.leaf_solutions, reference);
}

[[nodiscard]] inline double linf_error(const FactorizedSolver& solver, const SolveState& state,
                                       const ReferenceSolution& reference) {
    return linf_error(solver, state, [&reference](Point x) { return reference(x); });
}

/// Mesh and discretization budget of one solve.
struct Discretization {
    int p = 9;
    int q = 8;
    int n = 4;
    int n_ref = 0;
    Point target{0.5, 0.5};
};

[[nodiscard]] inline DomainTree discretization_tree(const Discretization& d, const Rect& domain) {
    std::vector<RefinementSpec> refine;
    if (d.n_ref > 0) refine.push_back(RefinementSpec{d.target, d.n_ref, std::numbers::sqrt2});
    return build_mesh(rectangle_mesh(domain, d.n, refine));
}

/// Reference for a problem: analytic when available, otherwise a strictly finer solve.
[[nodiscard]] inline ReferenceSolution compute_reference(const ProblemSpec& spec, const Discretization& experiment,
                                                         const Discretization& reference, const Rect& domain,
                                                         OperatorMode mode = OperatorMode::Stored) {
    if (spec.exact) {
        auto u = *spec.exact;
        return ReferenceSolution::analytic([u](Point x) { return u(x, 0.0); });
    }
    const bool finer_mesh = reference.n >= 2 * experiment.n;
    const bool finer_order = reference.q >= experiment.q + 4;
    if (!finer_mesh && !finer_order) {
        throw std::invalid_argument("reference budget must exceed the experiment by at least 2x n or q + 4");
    }
    auto solver = std::make_shared<const FactorizedSolver>(
        build_stage(discretization_tree(reference, domain), spec, reference.p, reference.q, BuildOptions{mode, {}}));
    SolveState state = solver->solve();
    return ReferenceSolution::discrete(std::move(solver), std::move(state));
}

struct ResultRow {
    std::size_t N = 0;
    int p = 0;
    int q = 0;
    int n = 0;
    int n_ref = 0;
    double build_seconds = 0.0;
    double solve_seconds = 0.0;
    std::size_t memory_floats = 0;
    double linf_error = std::numeric_limits<double>::quiet_NaN();
    OperatorMode mode = OperatorMode::Stored;
};

inline const char* kCsvHeader = "N,p,q,n,n_ref,build_seconds,solve_seconds,memory_floats,linf_error,mode";

inline void write_csv_row(std::ostream& os, const ResultRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%d,%d,%d,%d,%.6e,%.6e,%zu,%.6e,%s", r.N, r.p, r.q, r.n, r.n_ref,
                  r.build_seconds, r.solve_seconds, r.memory_floats, r.linf_error, to_string(r.mode).c_str());
    os << buf << '\n';
}

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << kCsvHeader << '\n';
    for (const auto& r : rows) write_csv_row(os, r);
}

inline void write_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(out, rows);
}

[[nodiscard]] inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Least-squares slope of log(y) against log(x).
[[nodiscard]] inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Build and solve `repetitions` times; reports median stage times and the error of the last solve.
[[nodiscard]] inline ResultRow measure(const ProblemSpec& spec, const DomainTree& tree, const Discretization& d,
                                       OperatorMode mode, int repetitions,
                                       const std::function<double(Point)>& reference) {
    ResultRow row;
    row.p = d.p;
    row.q = d.q;
    row.n = d.n;
    row.n_ref = d.n_ref;
    row.mode = mode;
    row.N = chebyshev_dof_count(tree, d.p);
    std::vector<double> build, solve;
    for (int r = 0; r < std::max(1, repetitions); ++r) {
        FactorizedSolver s = build_stage(tree, spec, d.p, d.q, BuildOptions{mode, {}});
        build.push_back(s.build_seconds());
        SolveState st = s.solve();
        solve.push_back(st.solve_seconds);
        if (r + 1 == std::max(1, repetitions)) {
            row.memory_floats = s.memory_floats();
            if (reference) row.linf_error = linf_error(s, st, reference);
        }
    }
    row.build_seconds = median(build);
    row.solve_seconds = median(solve);
    return row;
}

}  // namespace hps
