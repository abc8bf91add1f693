// Build once, solve twice: Poisson with a manufactured solution on a refined unit square.

#include "hps/experiment.hpp"

#include <cstdio>

int main() {
    using namespace hps;
    const Rect domain{Interval(0.0, 1.0), Interval(0.0, 1.0)};
    const DomainTree tree = build_mesh(rectangle_mesh(domain, 8, {RefinementSpec{{0.5, 0.5}, 2, std::numbers::sqrt2}}));
    const ProblemSpec spec = catalog("poisson_sine");

    const FactorizedSolver solver = build_stage(tree, spec, 13, 12);
    std::printf("%zu leaves, %zu Chebyshev nodes, build %.3f s, %zu stored floats\n", solver.leaf_count(),
                chebyshev_dof_count(tree, 13), solver.build_seconds(), solver.memory_floats());

    const SolveState st = solver.solve();
    const auto exact = *spec.exact;
    std::printf("solve %.4f s, max error on leaf boundaries %.2e\n", st.solve_seconds,
                linf_error(solver, st, [&](Point x) { return exact(x, 0.0); }));
    std::printf("u(0.3, 0.6) = %.12f (exact %.12f)\n", evaluate(solver, st, {0.3, 0.6}), exact({0.3, 0.6}, 0.0));

    // same factorization, new body load and boundary data
    ProblemSpec data = spec;
    data.dirichlet = [](Point x, double) { return x.x1 * x.x2; };
    const SolveState harmonic = solver.solve(solver.tabulate_boundary(data, 0.0),
                                             solver.tabulate_load([](Point) { return 0.0; }));
    std::printf("second solve with u = x1 x2 on the boundary: u(0.5, 0.5) = %.12f\n",
                evaluate(solver, harmonic, {0.5, 0.5}));

    const FactorizedSolver econ = build_stage(tree, spec, 13, 12, BuildOptions{OperatorMode::Econ, {}});
    std::printf("economy mode: %zu floats, max difference %.1e\n", econ.memory_floats(),
                max_abs(econ.solve().leaf_solutions[0] - st.leaf_solutions[0]));
    return 0;
}
