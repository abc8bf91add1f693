#pragma once

// Crank-Nicolson for u_t = L u with one elliptic factorization reused every step:
//   (I/k - L/2) u_{n+1} = (I/k + L/2) u_n
// L is carried as a CoefficientField in the same layout as the elliptic operator,
// so the implicit operator has c_ij' = -c_ij / 2, c_i' = -c_i / 2, c' = 1/k - c/2.

#include "hps/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace hps {

struct TimeStepConfig {
    double k = 0.01;
    double t_end = 0.1;
    std::vector<double> record_times;
};

struct ParabolicProblem {
    std::string name;
    ParameterSet params;
    CoefficientField spatial;
    ScalarField initial = [](Point) { return 0.0; };
    BoundaryField dirichlet = [](Point, double) { return 0.0; };
    std::optional<std::function<double(Point, double)>> exact;
};

[[nodiscard]] inline ParabolicProblem parabolic_from_catalog(const std::string& name, const ParameterSet& params = {}) {
    const ProblemSpec spec = catalog(name, params);
    ParabolicProblem pp;
    pp.name = spec.name;
    pp.params = spec.params;
    pp.spatial = spec.coefficients;
    pp.initial = initial_condition(spec);
    pp.dirichlet = spec.dirichlet;
    pp.exact = spec.exact;
    return pp;
}

[[nodiscard]] inline ProblemSpec cn_elliptic_spec(const ParabolicProblem& problem, double k) {
    if (!(k > 0.0)) throw std::invalid_argument("cn_elliptic_spec: step size must be positive");
    const CoefficientField& a = problem.spatial;
    ProblemSpec spec;
    spec.name = "cn:" + problem.name;
    spec.params = problem.params;
    spec.params["k"] = k;
    spec.coefficients.c11 = [f = a.c11](Point x) { return -0.5 * f(x); };
    spec.coefficients.c12 = [f = a.c12](Point x) { return -0.5 * f(x); };
    spec.coefficients.c22 = [f = a.c22](Point x) { return -0.5 * f(x); };
    spec.coefficients.c1 = [f = a.c1](Point x) { return -0.5 * f(x); };
    spec.coefficients.c2 = [f = a.c2](Point x) { return -0.5 * f(x); };
    spec.coefficients.c = [f = a.c, k](Point x) { return 1.0 / k - 0.5 * f(x); };
    spec.dirichlet = problem.dirichlet;
    return spec;
}

/// Applies L leafwise on tensor grids using the 1D factors of the differentiation matrices.
class SpatialOperator {
public:
    SpatialOperator(const FactorizedSolver& solver, const CoefficientField& cf) : p_(solver.p()) {
        const std::size_t nl = solver.leaf_count();
        leaves_.resize(nl);
        for (std::size_t o = 0; o < nl; ++o) {
            const Rect& box = solver.leaf_box(static_cast<int>(o));
            auto& lf = leaves_[o];
            lf.dx = diff_matrix_1d(chebyshev_nodes(p_, box.x1));
            lf.dy = diff_matrix_1d(chebyshev_nodes(p_, box.x2));
            lf.dxx = lf.dx * lf.dx;
            lf.dyy = lf.dy * lf.dy;
            const auto pts = chebyshev_points(p_, box);
            const auto n = static_cast<Index>(pts.size());
            lf.coef = Matrix(n, 6);
            for (Index i = 0; i < n; ++i) {
                const Point x = pts[static_cast<std::size_t>(i)];
                lf.coef.row(i) << cf.c11(x), cf.c12(x), cf.c22(x), cf.c1(x), cf.c2(x), cf.c(x);
            }
        }
    }

    /// (L u) at every Chebyshev node of leaf `ordinal`.
    [[nodiscard]] Vector apply(std::size_t ordinal, const Vector& u) const {
        const auto& lf = leaves_.at(ordinal);
        const Eigen::Map<const Matrix> m(u.data(), p_, p_);  // m(i, j): x1 index i, x2 index j
        const Matrix u1 = lf.dx * m;
        const Matrix u2 = m * lf.dy.transpose();
        const Matrix u11 = lf.dxx * m;
        const Matrix u22 = m * lf.dyy.transpose();
        const Matrix u12 = u1 * lf.dy.transpose();
        auto flat = [](const Matrix& a) { return Eigen::Map<const Vector>(a.data(), a.size()); };
        return -lf.coef.col(0).cwiseProduct(flat(u11)) - 2.0 * lf.coef.col(1).cwiseProduct(flat(u12)) -
               lf.coef.col(2).cwiseProduct(flat(u22)) + lf.coef.col(3).cwiseProduct(flat(u1)) +
               lf.coef.col(4).cwiseProduct(flat(u2)) + lf.coef.col(5).cwiseProduct(u);
    }

    [[nodiscard]] std::size_t leaf_count() const { return leaves_.size(); }

private:
    struct Leaf {
        Matrix dx, dy, dxx, dyy;
        Matrix coef;  ///< p^2 x 6: c11 c12 c22 c1 c2 c
    };
    int p_;
    std::vector<Leaf> leaves_;
};

/// Interior load (I/k + L/2) u_n of every leaf.
[[nodiscard]] inline std::vector<Vector> cn_rhs(const SpatialOperator& op, const IndexList& interior, double k,
                                                const std::vector<Vector>& u_n) {
    if (u_n.size() != op.leaf_count()) throw std::invalid_argument("cn_rhs: missing leaf tabulation");
    std::vector<Vector> out(u_n.size());
    for (std::size_t o = 0; o < u_n.size(); ++o) {
        if (u_n[o].size() == 0) throw std::invalid_argument("cn_rhs: missing leaf tabulation");
        const Vector full = u_n[o] / k + 0.5 * op.apply(o, u_n[o]);
        out[o] = full(interior);
    }
    return out;
}

struct Snapshot {
    double time = 0.0;
    std::vector<Vector> leaf_solutions;
};

struct Trajectory {
    int p = 0;
    std::vector<Rect> leaf_boxes;
    std::vector<Snapshot> snapshots;
    long builds = 0;
    int steps = 0;
    double build_seconds = 0.0;
    double mean_step_seconds = 0.0;
    std::size_t memory_floats = 0;
};

/// Step index of each record time, snapped to the nearest multiple of k.
[[nodiscard]] inline std::vector<int> record_steps(const TimeStepConfig& cfg) {
    std::vector<int> out;
    for (double t : cfg.record_times) {
        if (t < 0.0 || t > cfg.t_end + 1e-12 * std::max(1.0, cfg.t_end)) {
            throw std::invalid_argument("record time " + std::to_string(t) + " lies outside [0, t_end]");
        }
        out.push_back(static_cast<int>(std::lround(t / cfg.k)));
    }
    return out;
}

[[nodiscard]] inline std::vector<Vector> tabulate_leaves(const FactorizedSolver& solver, const ScalarField& f) {
    std::vector<Vector> out(solver.leaf_count());
    for (std::size_t o = 0; o < out.size(); ++o) {
        const auto pts = chebyshev_points(solver.p(), solver.leaf_box(static_cast<int>(o)));
        Vector v(static_cast<Index>(pts.size()));
        for (std::size_t i = 0; i < pts.size(); ++i) v(static_cast<Index>(i)) = f(pts[i]);
        out[o] = std::move(v);
    }
    return out;
}

[[nodiscard]] inline Trajectory cn_run(const ParabolicProblem& problem, const DomainTree& tree, int p, int q,
                                       const TimeStepConfig& cfg, OperatorMode mode = OperatorMode::Stored) {
    if (!(cfg.k > 0.0) || !(cfg.t_end >= 0.0)) throw std::invalid_argument("cn_run: need k > 0 and t_end >= 0");
    const long builds_before = build_invocations();
    const ProblemSpec spec = cn_elliptic_spec(problem, cfg.k);
    const FactorizedSolver solver = build_stage(tree, spec, p, q, BuildOptions{mode, {}});
    const SpatialOperator op(solver, problem.spatial);
    const IndexList interior = solver.interior_pattern();

    const int steps = static_cast<int>(std::lround(cfg.t_end / cfg.k));
    const auto wanted = record_steps(cfg);
    Trajectory traj;
    traj.steps = steps;
    traj.p = p;
    traj.leaf_boxes = leaf_boxes(solver);
    traj.build_seconds = solver.build_seconds();
    traj.memory_floats = solver.memory_floats();

    std::vector<Vector> u = tabulate_leaves(solver, problem.initial);
    auto record = [&](int step) {
        for (int w : wanted) {
            if (w == step) traj.snapshots.push_back({step * cfg.k, u});
        }
    };
    record(0);
    double total = 0.0;
    for (int s = 1; s <= steps; ++s) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto g = cn_rhs(op, interior, cfg.k, u);
        const Vector f = solver.tabulate_boundary(s * cfg.k);
        u = solver.solve(f, g).leaf_solutions;
        total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        record(s);
    }
    traj.mean_step_seconds = steps > 0 ? total / steps : 0.0;
    traj.builds = build_invocations() - builds_before;
    return traj;
}

/// Leaf-boundary error of a snapshot against a space-time exact solution.
[[nodiscard]] inline double snapshot_error(const Trajectory& traj, const Snapshot& snap,
                                           const std::function<double(Point, double)>& exact) {
    const double t = snap.time;
    return leaf_boundary_error(traj.p, traj.leaf_boxes, snap.leaf_solutions, [&](Point x) { return exact(x, t); });
}

/// CSV snapshot dump: time, x1, x2, u over every leaf Chebyshev node.
inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "time,x1,x2,u\n";
    char buf[128];
    for (const auto& snap : traj.snapshots) {
        for (std::size_t o = 0; o < traj.leaf_boxes.size(); ++o) {
            const auto pts = chebyshev_points(traj.p, traj.leaf_boxes[o]);
            for (std::size_t i = 0; i < pts.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%.10g,%.17g,%.17g,%.17g\n", snap.time, pts[i].x1, pts[i].x2,
                              snap.leaf_solutions[o](static_cast<Index>(i)));
                out << buf;
            }
        }
    }
}

}  // namespace hps
