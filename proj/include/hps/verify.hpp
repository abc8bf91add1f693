#pragma once

// Invariant checks shared by the `verify` subcommand and the test suites.

#include "hps/archive.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace hps {

struct CheckResult {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string detail;
};

inline const Rect kUnitSquare{Interval(0.0, 1.0), Interval(0.0, 1.0)};

/// Analytic boundary fluxes on a rectangular domain: d/dx1 on vertical sides, d/dx2 on horizontal sides.
[[nodiscard]] inline Vector boundary_flux(const FactorizedSolver& solver, Point (*grad)(Point)) {
    const auto pts = solver.boundary_points();
    const Rect& ext = solver.tree().extent();
    Vector v(static_cast<Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Point x = pts[i];
        const double to_horizontal = std::min(std::abs(x.x2 - ext.x2.lo), std::abs(x.x2 - ext.x2.hi));
        const double to_vertical = std::min(std::abs(x.x1 - ext.x1.lo), std::abs(x.x1 - ext.x1.hi));
        const Point g = grad(x);
        v(static_cast<Index>(i)) = to_horizontal < to_vertical ? g.x2 : g.x1;
    }
    return v;
}

[[nodiscard]] inline double max_leaf_difference(const SolveState& a, const SolveState& b) {
    double d = 0.0;
    for (std::size_t o = 0; o < a.leaf_solutions.size(); ++o) {
        d = std::max(d, max_abs(a.leaf_solutions[o] - b.leaf_solutions.at(o)));
    }
    return d;
}

inline CheckResult make_check(std::string name, double value, double tol, std::string detail = {}) {
    return CheckResult{std::move(name), value, tol, value <= tol, std::move(detail)};
}

/// Manufactured polynomial of per-variable degree d on an n x n mesh.
[[nodiscard]] inline CheckResult check_polynomial_exactness(int p, int n, int degree) {
    const ProblemSpec spec = catalog("poisson_polynomial", {{"degree", static_cast<double>(degree)}});
    const FactorizedSolver s = build_stage(build_uniform_tree(kUnitSquare, n), spec, p, p - 1, {});
    const SolveState st = s.solve();
    const auto exact = *spec.exact;
    const double err = linf_error(s, st, [&](Point x) { return exact(x, 0.0); });
    return make_check("polynomial exactness p=" + std::to_string(p) + " n=" + std::to_string(n) + " degree=" +
                          std::to_string(degree),
                      err, 1e-9);
}

[[nodiscard]] inline CheckResult check_interpolators(int q) {
    const EdgeInterpolators e = build_edge_interpolators(q);
    const double id = max_abs(e.down * e.up - Matrix::Identity(q, q));
    return make_check("P_down P_up = I, q=" + std::to_string(q), id, 1e-12);
}

/// Boundary lift L_ce,ge reproduces Chebyshev traces of degree q-1 polynomials.
[[nodiscard]] inline CheckResult check_boundary_lift(int q) {
    const int p = q + 1;
    const Rect box{Interval(0.2, 0.7), Interval(-0.3, 0.4)};
    const LeafGeometryKit kit = make_geometry_kit(p, q, box);
    const LeafStencil st = make_leaf_stencil(p, q, box);
    auto poly = [q](Point x) { return std::pow(x.x1, q - 1) - 0.5 * std::pow(x.x2, q - 2) * x.x1 + x.x2 + 1.0; };
    Vector g(static_cast<Index>(st.gauss_edges.size()));
    for (std::size_t i = 0; i < st.gauss_edges.size(); ++i) g(static_cast<Index>(i)) = poly(st.gauss_edges[i]);
    const Vector ce = kit.lift * g;
    double err = 0.0;
    for (Index k = 0; k < ce.size(); ++k) {
        err = std::max(err, std::abs(ce(k) - poly(st.cheb2d[static_cast<std::size_t>(st.exterior[static_cast<std::size_t>(k)])])));
    }
    return make_check("boundary lift polynomial reproduction, q=" + std::to_string(q), err, 1e-12);
}

/// Merged DtN of two Laplace leaves against the analytic fluxes of x1^2 - x2^2.
[[nodiscard]] inline CheckResult check_two_leaf_dtn(int q) {
    DomainTree tree = DomainTree::single_box(kUnitSquare);
    (void)tree.split(tree.root(), true);
    const ProblemSpec spec = catalog("laplace");
    const FactorizedSolver s = build_stage(tree, spec, q + 1, q, {});
    const auto pts = s.boundary_points();
    Vector trace(static_cast<Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) trace(static_cast<Index>(i)) = pts[i].x1 * pts[i].x1 - pts[i].x2 * pts[i].x2;
    const Vector flux = boundary_flux(s, [](Point x) { return Point{2.0 * x.x1, -2.0 * x.x2}; });
    const double err = max_abs(s.root_dtn() * trace - flux);
    return make_check("two-leaf merged DtN vs analytic fluxes, q=" + std::to_string(q), err, 1e-9);
}

/// Random bottom-up build order against the default one.
[[nodiscard]] inline CheckResult check_shuffled_order(unsigned seed = 7) {
    const ProblemSpec spec = catalog("poisson_sine");
    const DomainTree tree = build_mesh(rectangle_mesh(kUnitSquare, 4, {RefinementSpec{{0.5, 0.375}, 2, std::numbers::sqrt2}}));
    const FactorizedSolver a = build_stage(tree, spec, 9, 8, {});
    // post-order emission from random starting nodes keeps children before parents
    std::vector<int> order(tree.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> depth_first;
    std::vector<char> done(tree.size(), 0);
    std::function<void(int)> emit = [&](int id) {
        if (done[static_cast<std::size_t>(id)]) return;
        for (int c : tree.node(id).children) emit(c);
        done[static_cast<std::size_t>(id)] = 1;
        depth_first.push_back(id);
    };
    for (int id : order) emit(id);
    const FactorizedSolver b = build_stage(tree, spec, 9, 8, BuildOptions{OperatorMode::Stored, depth_first});
    const double d = max_leaf_difference(a.solve(), b.solve());
    return make_check("shuffled merge order", d, 1e-13);
}

[[nodiscard]] inline CheckResult check_econ_equivalence() {
    const ProblemSpec spec = catalog("varcoef_helmholtz");
    const DomainTree tree = build_mesh(rectangle_mesh(kUnitSquare, 4, {RefinementSpec{{0.5, 0.375}, 1, std::numbers::sqrt2}}));
    const FactorizedSolver st = build_stage(tree, spec, 13, 12, {});
    const FactorizedSolver ec = build_stage(tree, spec, 13, 12, BuildOptions{OperatorMode::Econ, {}});
    const double d = max_leaf_difference(st.solve(), ec.solve());
    CheckResult r = make_check("economy mode matches stored mode", d, 1e-12);
    if (!(ec.memory_floats() < st.memory_floats()) || ec.memory().leaf != 0) {
        r.pass = false;
        r.detail = "economy memory is not strictly smaller";
    }
    return r;
}

[[nodiscard]] inline CheckResult check_linearity() {
    const ProblemSpec spec = catalog("helmholtz", {{"kappa", 10.0}});
    const FactorizedSolver s = build_stage(build_uniform_tree(kUnitSquare, 4), spec, 9, 8, {});
    ProblemSpec data = spec;
    data.dirichlet = [](Point x, double) { return std::cos(3.0 * x.x1) + x.x2; };
    const Vector f = s.tabulate_boundary(data, 0.0);
    const auto g = s.tabulate_load([](Point x) { return std::exp(x.x1 - x.x2); });
    const Vector zf = Vector::Zero(f.size());
    std::vector<Vector> zg;
    for (const auto& v : g) zg.push_back(Vector::Zero(v.size()));
    const SolveState full = s.solve(f, g);
    const SolveState a = s.solve(f, zg);
    const SolveState b = s.solve(zf, g);
    double d = 0.0, scale = 0.0;
    for (std::size_t o = 0; o < full.leaf_solutions.size(); ++o) {
        d = std::max(d, max_abs(full.leaf_solutions[o] - a.leaf_solutions[o] - b.leaf_solutions[o]));
        scale = std::max(scale, max_abs(full.leaf_solutions[o]));
    }
    return make_check("linearity in boundary data and load", d / scale, 1e-12);
}

[[nodiscard]] inline CheckResult check_archive_round_trip() {
    const ProblemSpec spec = catalog("poisson_sine");
    const DomainTree tree = build_mesh(rectangle_mesh(kUnitSquare, 2, {RefinementSpec{{0.5, 0.5}, 1, std::numbers::sqrt2}}));
    const FactorizedSolver s = build_stage(tree, spec, 9, 8, {});
    const auto path = (std::filesystem::temp_directory_path() / "hps_verify_archive.bin").string();
    persist_operators(s, path);
    const FactorizedSolver l = load_operators(path);
    std::filesystem::remove(path);
    return make_check("operator archive round trip", max_leaf_difference(s.solve(), l.solve()), 0.0);
}

[[nodiscard]] inline std::vector<CheckResult> run_invariant_suite() {
    std::vector<CheckResult> out;
    auto add = [&out](auto&& fn, const std::string& name) {
        try {
            out.push_back(fn());
        } catch (const std::exception& e) {
            out.push_back(CheckResult{name, std::numeric_limits<double>::quiet_NaN(), 0.0, false, e.what()});
        }
    };
    add([] { return check_polynomial_exactness(16, 2, 13); }, "polynomial exactness");
    add([] { return check_interpolators(8); }, "interpolators q=8");
    add([] { return check_interpolators(16); }, "interpolators q=16");
    add([] { return check_boundary_lift(8); }, "boundary lift q=8");
    add([] { return check_boundary_lift(16); }, "boundary lift q=16");
    add([] { return check_two_leaf_dtn(8); }, "two-leaf DtN");
    add([] { return check_shuffled_order(); }, "shuffled order");
    add([] { return check_econ_equivalence(); }, "economy mode");
    add([] { return check_linearity(); }, "linearity");
    add([] { return check_archive_round_trip(); }, "archive");
    return out;
}

}  // namespace hps
