// Acceptance suite: one PASS/FAIL line per criterion.

#include "hps/harness.hpp"
#include "hps/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace hps;

namespace {

struct Outcome {
    bool pass = false;
    std::string summary;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

/// u = sum a_ij x1^i x2^j with per-variable degree <= d, and its negative Laplacian.
ProblemSpec random_polynomial_problem(int d, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    auto a = std::make_shared<Matrix>(d + 1, d + 1);
    for (int i = 0; i <= d; ++i) {
        for (int j = 0; j <= d; ++j) (*a)(i, j) = coef(rng);
    }
    auto u = [a, d](Point x) {
        double s = 0.0;
        for (int i = 0; i <= d; ++i) {
            for (int j = 0; j <= d; ++j) s += (*a)(i, j) * std::pow(x.x1, i) * std::pow(x.x2, j);
        }
        return s;
    };
    auto lap = [a, d](Point x) {
        double s = 0.0;
        for (int i = 0; i <= d; ++i) {
            for (int j = 0; j <= d; ++j) {
                if (i >= 2) s += (*a)(i, j) * i * (i - 1) * std::pow(x.x1, i - 2) * std::pow(x.x2, j);
                if (j >= 2) s += (*a)(i, j) * j * (j - 1) * std::pow(x.x1, i) * std::pow(x.x2, j - 2);
            }
        }
        return s;
    };
    ProblemSpec spec = catalog("laplace");
    spec.name = "random_polynomial";
    spec.body_load = [lap](Point x) { return -lap(x); };
    spec.dirichlet = [u](Point x, double) { return u(x); };
    spec.exact = [u](Point x, double) { return u(x); };
    return spec;
}

double exact_error(const FactorizedSolver& s, const SolveState& st, const ProblemSpec& spec) {
    const auto u = *spec.exact;
    return linf_error(s, st, [&](Point x) { return u(x, 0.0); });
}

Outcome criterion_1() {
    const int p = 16;
    double worst = 0.0;
    std::string worst_case;
    auto run = [&](const ProblemSpec& spec, int n, const std::string& label) {
        const FactorizedSolver s = build_stage(build_uniform_tree(kUnitSquare, n), spec, p, p - 1, {});
        const double e = exact_error(s, s.solve(), spec);
        if (!(e <= worst)) {
            worst = e;
            worst_case = label + " n=" + std::to_string(n);
        }
    };
    for (int n : {1, 2, 4}) {
        run(catalog("harmonic_quadratic"), n, "harmonic quadratic");
        run(catalog("linear_x1"), n, "linear");
        for (int d : {2, 7, 13}) {
            run(catalog("poisson_polynomial", {{"degree", static_cast<double>(d)}}), n, "poisson degree " + std::to_string(d));
        }
        for (unsigned seed : {1u, 2u}) {
            run(random_polynomial_problem(p - 3, seed), n, "random degree 13 seed " + std::to_string(seed));
        }
    }
    return {worst <= 1e-9, fmt("max error %.2e (worst: %s), tolerance 1e-9", worst, worst_case.c_str())};
}

Outcome criterion_2() {
    const ProblemSpec spec = catalog("poisson_sine");
    std::vector<double> err;
    for (int n : {2, 4, 8}) {
        const FactorizedSolver s = build_stage(build_uniform_tree(kUnitSquare, n), spec, 9, 8, {});
        err.push_back(exact_error(s, s.solve(), spec));
    }
    bool ok = true;
    for (std::size_t i = 1; i < err.size(); ++i) ok = ok && (err[i - 1] / err[i] >= 100.0 || err[i] <= 1e-10);
    return {ok, fmt("errors n=2,4,8: %.2e, %.2e, %.2e; ratios %.0f, %.0f (need >= 100 or <= 1e-10)", err[0], err[1],
                    err[2], err[0] / err[1], err[1] / err[2])};
}

Outcome criterion_3() {
    const ProblemSpec spec = catalog("varcoef_helmholtz");
    const Discretization coarse{5, 4, 16, 0, {}};
    const Discretization fine{17, 16, 16, 0, {}};
    const ReferenceSolution ref = compute_reference(spec, fine, Discretization{17, 16, 32, 0, {}}, kUnitSquare);
    auto error_of = [&](const Discretization& d) {
        const FactorizedSolver s = build_stage(discretization_tree(d, kUnitSquare), spec, d.p, d.q, {});
        return linf_error(s, s.solve(), ref);
    };
    const double e4 = error_of(coarse);
    const double e16 = error_of(fine);
    double umax = 0.0;
    const FactorizedSolver& rs = *ref.solver();
    for (std::size_t o = 0; o < rs.leaf_count(); ++o) {
        const auto pts = chebyshev_points(rs.p(), rs.leaf_box(static_cast<int>(o)));
        for (const Point& x : pts) umax = std::max(umax, std::abs(ref(x)));
    }
    // thresholds 1e-1 and 1e-6 with the criterion's one-order-of-magnitude tolerance
    const bool ok = e4 > 1e-2 && e16 <= 1e-5;
    return {ok, fmt("q=4: %.2e (relative %.2f, need > 1e-1 within 10x); q=16: %.2e (need <= 1e-6 within 10x); "
                    "reference n=32 q=16, max|u| %.3e",
                    e4, e4 / umax, e16, umax)};
}

Outcome criterion_4() {
    const ProblemSpec spec = catalog("indicator_poisson");
    const ReferenceSolution ref =
        compute_reference(spec, Discretization{17, 16, 32, 0, {}}, Discretization{21, 20, 32, 0, {}}, kUnitSquare);
    std::string trail;
    double best = std::numeric_limits<double>::infinity();
    int reached = -1;
    for (int n : {4, 8, 16, 32}) {
        const FactorizedSolver s = build_stage(build_uniform_tree(kUnitSquare, n), spec, 17, 16, {});
        const double e = linf_error(s, s.solve(), ref);
        trail += fmt("%sn=%d %.2e", trail.empty() ? "" : ", ", n, e);
        best = std::min(best, e);
        if (e <= 1e-9 && reached < 0) reached = n;
    }
    return {reached > 0, fmt("%s; first n with error <= 1e-9: %d (reference n=32 q=20)", trail.c_str(), reached)};
}

Outcome criterion_5() {
    const ProblemSpec spec = catalog("concentrated_helmholtz");
    const Point center{0.5, 0.5};
    const ReferenceSolution ref =
        compute_reference(spec, Discretization{17, 16, 8, 0, center}, Discretization{17, 16, 32, 0, center}, kUnitSquare);
    auto error_of = [&](int n, int n_ref) {
        const Discretization d{17, 16, n, n_ref, center};
        const FactorizedSolver s = build_stage(discretization_tree(d, kUnitSquare), spec, d.p, d.q, {});
        return std::pair{linf_error(s, s.solve(), ref), s.leaf_count()};
    };
    const auto [e_ref, leaves_ref] = error_of(4, 1);
    const auto [e_uni, leaves_uni] = error_of(8, 0);
    const double ratio = e_ref / e_uni;
    return {ratio <= 10.0 && ratio >= 0.1,
            fmt("(n=4, n_ref=1): %.2e with %zu leaves; (n=8, n_ref=0): %.2e with %zu leaves; ratio %.2f (need within 10x)",
                e_ref, leaves_ref, e_uni, leaves_uni, ratio)};
}

Outcome criterion_6() {
    const ProblemSpec spec = catalog("poisson_sine");
    std::vector<double> n_pts, build, solve;
    for (int n : {16, 32, 64, 128}) {
        const Discretization d{9, 8, n, 0, {}};
        const ResultRow row = measure(spec, build_uniform_tree(kUnitSquare, n), d, OperatorMode::Stored, 3, {});
        n_pts.push_back(static_cast<double>(row.N));
        build.push_back(row.build_seconds);
        solve.push_back(row.solve_seconds);
    }
    const double sb = loglog_slope(n_pts, build);
    const double ss = loglog_slope(n_pts, solve);
    const bool ok = sb >= 1.2 && sb <= 1.8 && ss <= 1.25 && solve.back() <= 30.0;
    return {ok, fmt("N %.0f..%.0f: build slope %.3f (need [1.2, 1.8]), solve slope %.3f (need <= 1.25), "
                    "build %.2f s / solve %.3f s at N=%.0f",
                    n_pts.front(), n_pts.back(), sb, ss, build.back(), solve.back(), n_pts.back())};
}

Outcome criterion_7() {
    const ProblemSpec spec = catalog("varcoef_helmholtz");
    double worst = 0.0;
    bool memory_ok = true;
    std::string mem;
    for (int n_ref : {0, 2}) {
        const DomainTree tree = discretization_tree(Discretization{17, 16, 8, n_ref, {0.5, 0.375}}, kUnitSquare);
        const FactorizedSolver st = build_stage(tree, spec, 17, 16, {});
        const FactorizedSolver ec = build_stage(tree, spec, 17, 16, BuildOptions{OperatorMode::Econ, {}});
        worst = std::max(worst, max_leaf_difference(st.solve(), ec.solve()));
        memory_ok = memory_ok && ec.memory_floats() < st.memory_floats() && ec.memory().leaf == 0 && !ec.has_stored_leaves();
        mem += fmt("%sn_ref=%d stored %zu / econ %zu floats (econ leaf term %zu)", mem.empty() ? "" : "; ", n_ref,
                   st.memory_floats(), ec.memory_floats(), ec.memory().leaf);
    }
    return {worst <= 1e-12 && memory_ok, fmt("max difference %.2e (need <= 1e-12); %s", worst, mem.c_str())};
}

Outcome criterion_8() {
    const ParabolicProblem heat = parabolic_from_catalog("heat_sine");
    const DomainTree tree = build_uniform_tree(kUnitSquare, 8);
    const int p = 17, q = 16;
    std::vector<double> ks, errs;
    bool one_build = true;
    double step_ratio = 0.0;
    for (int m : {40, 80, 160, 320}) {
        const double k = 1.0 / m;
        const Trajectory traj = cn_run(heat, tree, p, q, TimeStepConfig{k, 0.1, {0.1}});
        one_build = one_build && traj.builds == 1;
        ks.push_back(k);
        errs.push_back(snapshot_error(traj, traj.snapshots.back(), *heat.exact));
        const FactorizedSolver s = build_stage(tree, cn_elliptic_spec(heat, k), p, q, {});
        std::vector<double> solo;
        const auto g = s.tabulate_load([](Point x) { return std::sin(x.x1 + x.x2); });
        const Vector f = s.tabulate_boundary(0.0);
        for (int r = 0; r < 15; ++r) solo.push_back(s.solve(f, g).solve_seconds);
        step_ratio = std::max(step_ratio, traj.mean_step_seconds / median(solo));
    }
    const double slope = loglog_slope(ks, errs);
    const bool ok = std::abs(slope - 2.0) <= 0.3 && one_build && step_ratio <= 3.0;
    return {ok, fmt("errors %.2e, %.2e, %.2e, %.2e; slope %.3f (need 2.0 +- 0.3); one build per run: %s; "
                    "worst step/solve time ratio %.2f (need <= 3)",
                    errs[0], errs[1], errs[2], errs[3], slope, one_build ? "yes" : "no", step_ratio)};
}

Outcome criterion_9() {
    double pp = 0.0;
    double lift = 0.0;
    double up = 0.0;
    for (int q : {8, 16}) {
        pp = std::max(pp, check_interpolators(q).value);
        lift = std::max(lift, check_boundary_lift(q).value);
        // P_up reproduces degree q-1 polynomials on the two half edges
        const EdgeInterpolators e = build_edge_interpolators(q);
        const auto coarse = gauss_nodes(q, Interval(-1.0, 1.0)).nodes;
        std::vector<double> fine = gauss_nodes(q, Interval(-1.0, 0.0)).nodes;
        const auto hi = gauss_nodes(q, Interval(0.0, 1.0)).nodes;
        fine.insert(fine.end(), hi.begin(), hi.end());
        auto poly = [q](double t) { return std::pow(t, q - 1) - 0.3 * std::pow(t, q / 2) + 0.7; };
        Vector c(q);
        for (int i = 0; i < q; ++i) c(i) = poly(coarse[static_cast<std::size_t>(i)]);
        const Vector f = e.up * c;
        for (int i = 0; i < 2 * q; ++i) up = std::max(up, std::abs(f(i) - poly(fine[static_cast<std::size_t>(i)])));
    }
    const bool ok = pp <= 1e-12 && lift <= 1e-12 && up <= 1e-12;
    return {ok, fmt("q in {8,16}: |P_down P_up - I| %.2e, lift trace reproduction %.2e, P_up reproduction %.2e "
                    "(tolerance 1e-12)",
                    pp, lift, up)};
}

Outcome criterion_10() {
    double dtn = 0.0;
    for (int q : {8, 16}) {
        DomainTree tree = DomainTree::single_box(kUnitSquare);
        (void)tree.split(tree.root(), true);
        const FactorizedSolver s = build_stage(tree, catalog("laplace"), q + 1, q, {});
        const auto pts = s.boundary_points();
        Vector quad(static_cast<Index>(pts.size()));
        Vector cubic(static_cast<Index>(pts.size()));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double x = pts[i].x1, y = pts[i].x2;
            quad(static_cast<Index>(i)) = x * x - y * y;
            cubic(static_cast<Index>(i)) = x * x * x - 3.0 * x * y * y;
        }
        const Vector fq = boundary_flux(s, [](Point x) { return Point{2.0 * x.x1, -2.0 * x.x2}; });
        const Vector fc = boundary_flux(
            s, [](Point x) { return Point{3.0 * x.x1 * x.x1 - 3.0 * x.x2 * x.x2, -6.0 * x.x1 * x.x2}; });
        dtn = std::max({dtn, max_abs(s.root_dtn() * quad - fq), max_abs(s.root_dtn() * cubic - fc)});
    }
    double shuffle = 0.0;
    for (unsigned seed : {3u, 11u, 29u}) shuffle = std::max(shuffle, check_shuffled_order(seed).value);
    return {dtn <= 1e-9 && shuffle <= 1e-13,
            fmt("two-leaf DtN flux error %.2e (need <= 1e-9); shuffled merge order difference %.2e (need <= 1e-13)",
                dtn, shuffle)};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_seconds;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "polynomial exactness", 10.0, criterion_1},
        {2, "manufactured smooth convergence", 30.0, criterion_2},
        {3, "variable-coefficient Helmholtz", 300.0, criterion_3},
        {4, "discontinuous aligned load", 300.0, criterion_4},
        {5, "refinement parity", 300.0, criterion_5},
        {6, "complexity trends", 1800.0, criterion_6},
        {7, "economy mode", 300.0, criterion_7},
        {8, "Crank-Nicolson order", 300.0, criterion_8},
        {9, "interpolator identities", 1.0, criterion_9},
        {10, "merge oracle", 10.0, criterion_10},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double t = seconds_since(t0);
        const bool in_time = t < c.budget_seconds;
        const bool pass = o.pass && in_time;
        std::printf("%s criterion %d (%s): %s; runtime %.2f s (budget %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.summary.c_str(), t, c.budget_seconds);
        std::fflush(stdout);
        failed += pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
