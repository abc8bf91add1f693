#include "hps/leaf.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace hps;

namespace {

const Rect kUnit{Interval(0.0, 1.0), Interval(0.0, 1.0)};

struct Grid {
    LeafStencil st;
    TensorDiffMatrices d;
};

Grid grid(int p, const Rect& box = kUnit) { return {make_leaf_stencil(p, p - 1, box), tensor_diff_matrices(p, box)}; }

Vector tabulate(const std::vector<Point>& pts, const std::function<double(Point)>& f) {
    Vector v(static_cast<Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) v(static_cast<Index>(i)) = f(pts[i]);
    return v;
}

}  // namespace

TEST(AssembleLeafMatrix, LaplaceOfQuadratic) {
    const Grid g = grid(10);
    const LeafMatrix a = assemble_leaf_matrix(catalog("laplace").coefficients, g.st, g.d);
    const Vector u = tabulate(g.st.cheb2d, [](Point x) { return x.x1 * x.x1 + x.x2 * x.x2; });
    EXPECT_LE(max_abs(a.a * u + 4.0 * Vector::Ones(u.size())), 1e-10);
}

TEST(AssembleLeafMatrix, ReactionOnlyIsIdentity) {
    CoefficientField cf;
    cf.c11 = cf.c22 = [](Point) { return 0.0; };
    cf.c = [](Point) { return 1.0; };
    const Grid g = grid(6);
    const LeafMatrix a = assemble_leaf_matrix(cf, g.st, g.d);
    EXPECT_EQ(max_abs(a.a - Matrix::Identity(36, 36)), 0.0);
}

TEST(AssembleLeafMatrix, HelmholtzAnnihilatesPlaneWave) {
    const double kappa = 10.0;
    const Grid g = grid(24);
    const LeafMatrix a = assemble_leaf_matrix(catalog("helmholtz", {{"kappa", kappa}}).coefficients, g.st, g.d);
    const Vector u = tabulate(g.st.cheb2d, [kappa](Point x) { return std::sin(kappa * x.x1); });
    EXPECT_LE(max_abs(a.a * u), 1e-8);
}

TEST(AssembleLeafMatrix, SignConventionOnQuadratics) {
    const Grid g = grid(8, Rect{Interval(-0.5, 0.25), Interval(0.1, 0.6)});
    const LeafMatrix a = assemble_leaf_matrix(catalog("laplace").coefficients, g.st, g.d);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> c(-2.0, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
        const double a11 = c(rng), a12 = c(rng), a22 = c(rng), b1 = c(rng), b2 = c(rng);
        const Vector u = tabulate(g.st.cheb2d, [&](Point x) {
            return a11 * x.x1 * x.x1 + a12 * x.x1 * x.x2 + a22 * x.x2 * x.x2 + b1 * x.x1 + b2 * x.x2;
        });
        const double lap = 2.0 * a11 + 2.0 * a22;
        EXPECT_LE(max_abs(a.a * u + lap * Vector::Ones(u.size())), 1e-11 * max_abs(a.a));
    }
}

TEST(AssembleLeafMatrix, MixedTermOrderOnlyAffectsRoundoff) {
    const Grid g = grid(16);
    const Matrix d21 = g.d.d2 * g.d.d1;
    EXPECT_LE(max_abs(g.d.d12 - d21), 1e-9 * max_abs(g.d.d12));
}

TEST(AssembleLeafMatrix, PartitionsInteriorAndExterior) {
    const Grid g = grid(7);
    const LeafMatrix a = assemble_leaf_matrix(catalog("varcoef_helmholtz").coefficients, g.st, g.d);
    EXPECT_EQ(a.a_ci_ci.rows(), 25);
    EXPECT_EQ(a.a_ci_ce.cols(), 24);
    EXPECT_EQ(a.a_ci_ci(3, 4), a.a(g.st.interior[3], g.st.interior[4]));
}

TEST(AssembleLeafMatrix, RejectsNonFiniteCoefficients) {
    CoefficientField cf;
    cf.c = [](Point x) { return x.x1 > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 0.0; };
    const Grid g = grid(5);
    EXPECT_THROW((void)assemble_leaf_matrix(cf, g.st, g.d), SolverError);
}

TEST(Catalog, LaplaceEntry) {
    const ProblemSpec s = catalog("laplace");
    const Point x{0.3, 0.8};
    EXPECT_EQ(s.coefficients.c11(x), 1.0);
    EXPECT_EQ(s.coefficients.c22(x), 1.0);
    EXPECT_EQ(s.coefficients.c12(x), 0.0);
    EXPECT_EQ(s.coefficients.c1(x), 0.0);
    EXPECT_EQ(s.coefficients.c2(x), 0.0);
    EXPECT_EQ(s.coefficients.c(x), 0.0);
    EXPECT_EQ(s.body_load(x), 0.0);
}

TEST(Catalog, ScatteringPotentialAtItsCentre) {
    const Point x2{7.0 / 20.0, 6.0 / 10.0};
    const Point x3{6.0 / 10.0, 9.0 / 20.0};
    const double d2 = (x2.x1 - x3.x1) * (x2.x1 - x3.x1) + (x2.x2 - x3.x2) * (x2.x2 - x3.x2);
    EXPECT_NEAR(scattering_potential(x2, {}), 0.5 + 0.5 * std::exp(-200.0 * d2), 1e-15);
    const ProblemSpec s = catalog("varcoef_helmholtz");
    EXPECT_NEAR(s.coefficients.c(x2), -1600.0 * (1.0 - scattering_potential(x2, {})), 1e-11);
}

TEST(Catalog, IndicatorSupport) {
    const ProblemSpec s = catalog("indicator_poisson");
    EXPECT_EQ(s.body_load({0.3, 0.3}), 1.0);
    EXPECT_EQ(s.body_load({0.6, 0.6}), 0.0);
}

TEST(Catalog, UnknownAndMissingParameters) {
    EXPECT_THROW((void)catalog("no_such_problem"), std::invalid_argument);
    EXPECT_THROW((void)catalog("helmholtz"), std::invalid_argument);
    EXPECT_THROW((void)catalog("poisson_polynomial"), std::invalid_argument);
}

TEST(Catalog, EveryEntryConstructsAndIsDeterministic) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const ParameterSet params{{"kappa", 5.0}, {"degree", 4.0}};
    for (const auto& name : catalog_names()) {
        const ProblemSpec a = catalog(name, params);
        const ProblemSpec b = catalog(name, params);
        for (int i = 0; i < 100; ++i) {
            const Point x{u(rng), u(rng)};
            EXPECT_EQ(a.coefficients.c(x), b.coefficients.c(x)) << name;
            EXPECT_EQ(a.body_load(x), b.body_load(x)) << name;
            EXPECT_EQ(a.dirichlet(x, 0.0), b.dirichlet(x, 0.0)) << name;
        }
    }
}

TEST(Catalog, ManufacturedLoadsMatchTheirSolutions) {
    // -Lap(u) = g checked by centred differences on every elliptic manufactured entry
    const double h = 1e-4;
    for (const std::string name : {"poisson_sine", "harmonic_quadratic", "linear_x1"}) {
        const ProblemSpec s = catalog(name);
        const auto u = [&](Point x) { return (*s.exact)(x, 0.0); };
        for (const Point x : {Point{0.3, 0.4}, Point{0.71, 0.13}}) {
            const double lap = (u({x.x1 + h, x.x2}) + u({x.x1 - h, x.x2}) + u({x.x1, x.x2 + h}) +
                                u({x.x1, x.x2 - h}) - 4.0 * u(x)) /
                               (h * h);
            EXPECT_NEAR(-lap, s.body_load(x), 1e-5) << name;
        }
    }
    const ProblemSpec poly = catalog("poisson_polynomial", {{"degree", 5.0}});
    const Point x{0.37, 0.61};
    const auto u = [&](Point y) { return (*poly.exact)(y, 0.0); };
    const double lap =
        (u({x.x1 + h, x.x2}) + u({x.x1 - h, x.x2}) + u({x.x1, x.x2 + h}) + u({x.x1, x.x2 - h}) - 4.0 * u(x)) / (h * h);
    EXPECT_NEAR(-lap, poly.body_load(x), 1e-5);
}

TEST(Catalog, LShapeCornerSolutionVanishesOnTheNotch) {
    EXPECT_NEAR(lshape_corner_solution({1.0, 1.5}), 0.0, 1e-15);
    EXPECT_NEAR(lshape_corner_solution({1.5, 1.0}), 0.0, 1e-15);
    EXPECT_GT(lshape_corner_solution({0.5, 0.5}), 0.0);
    // harmonic away from the corner
    const double h = 1e-4;
    const Point x{0.4, 1.3};
    const double lap = (lshape_corner_solution({x.x1 + h, x.x2}) + lshape_corner_solution({x.x1 - h, x.x2}) +
                        lshape_corner_solution({x.x1, x.x2 + h}) + lshape_corner_solution({x.x1, x.x2 - h}) -
                        4.0 * lshape_corner_solution(x)) /
                       (h * h);
    EXPECT_NEAR(lap, 0.0, 1e-5);
}

TEST(EvaluateBoundary, ZeroAndCoordinateData) {
    const std::vector<Point> pts{{0.0, 0.3}, {0.25, 0.0}, {1.0, 0.9}, {0.6, 1.0}};
    auto dist = [](Point x) { return std::min({x.x1, 1.0 - x.x1, x.x2, 1.0 - x.x2}); };
    ProblemSpec s = catalog("laplace");
    EXPECT_EQ(max_abs(evaluate_boundary(s, pts, dist, 1.0)), 0.0);
    s.dirichlet = [](Point x, double) { return x.x1; };
    const Vector v = evaluate_boundary(s, pts, dist, 1.0);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(v(static_cast<Index>(i)), pts[i].x1);
    s.dirichlet = [](Point x, double) { return std::sin(std::numbers::pi * x.x1) * std::sinh(std::numbers::pi * x.x2); };
    const Vector w = evaluate_boundary(s, pts, dist, 1.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_EQ(w(static_cast<Index>(i)),
                  std::sin(std::numbers::pi * pts[i].x1) * std::sinh(std::numbers::pi * pts[i].x2));
    }
    const std::vector<Point> inside{{0.5, 0.5}};
    EXPECT_THROW((void)evaluate_boundary(s, inside, dist, 1.0), std::invalid_argument);
}

TEST(Ellipticity, WarnsWithoutThrowing) {
    std::ostringstream warn;
    CoefficientField cf;
    cf.c22 = [](Point) { return -1.0; };
    EXPECT_FALSE(check_ellipticity(cf, {{0.5, 0.5}}, &warn));
    EXPECT_NE(warn.str().find("not elliptic"), std::string::npos);
    EXPECT_TRUE(check_ellipticity(catalog("helmholtz", {{"kappa", 40.0}}).coefficients, {{0.5, 0.5}}, nullptr));
}

TEST(Manufactured, LoadFromCoefficients) {
    CoefficientField cf;
    cf.c1 = [](Point) { return 2.0; };
    cf.c = [](Point x) { return x.x2; };
    ManufacturedSolution u;
    u.value = [](Point x, double) { return x.x1 * x.x1 * x.x2; };
    u.d1 = [](Point x, double) { return 2.0 * x.x1 * x.x2; };
    u.d2 = [](Point x, double) { return x.x1 * x.x1; };
    u.d11 = [](Point x, double) { return 2.0 * x.x2; };
    u.d12 = [](Point x, double) { return 2.0 * x.x1; };
    u.d22 = [](Point, double) { return 0.0; };
    const ProblemSpec s = make_manufactured("m", cf, u);
    const Point x{0.3, 0.7};
    EXPECT_NEAR(s.body_load(x), -2.0 * 0.7 + 2.0 * 2.0 * 0.3 * 0.7 + 0.7 * 0.09 * 0.7, 1e-15);
    EXPECT_EQ(s.dirichlet(x, 0.0), 0.09 * 0.7);
}
