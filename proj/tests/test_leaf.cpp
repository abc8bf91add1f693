#include "hps/leaf.hpp"

#include <gtest/gtest.h>

using namespace hps;

namespace {

struct Leaf {
    LeafGeometryKit kit;
    LeafStencil st;
    LeafMatrix a;
    LeafOperators ops;
};

Leaf make_leaf(const ProblemSpec& spec, int p, int q, const Rect& box) {
    Leaf l{make_geometry_kit(p, q, box), make_leaf_stencil(p, q, box), {}, {}};
    l.a = assemble_leaf(spec.coefficients, l.kit, box);
    l.ops = build_leaf_operators(l.a, l.kit, 0);
    return l;
}

Vector on_edges(const Leaf& l, const std::function<double(Point)>& f) {
    Vector v(static_cast<Index>(l.st.gauss_edges.size()));
    for (std::size_t i = 0; i < l.st.gauss_edges.size(); ++i) v(static_cast<Index>(i)) = f(l.st.gauss_edges[i]);
    return v;
}

Vector on_grid(const Leaf& l, const std::function<double(Point)>& f) {
    Vector v(static_cast<Index>(l.st.cheb2d.size()));
    for (std::size_t i = 0; i < l.st.cheb2d.size(); ++i) v(static_cast<Index>(i)) = f(l.st.cheb2d[i]);
    return v;
}

const Rect kUnit{Interval(0.0, 1.0), Interval(0.0, 1.0)};

}  // namespace

TEST(LeafOperators, Dimensions) {
    const Leaf l = make_leaf(catalog("laplace"), 9, 8, kUnit);
    EXPECT_EQ(l.ops.s.rows(), 81);
    EXPECT_EQ(l.ops.s.cols(), 32);
    EXPECT_EQ(l.ops.t.rows(), 32);
    EXPECT_EQ(l.ops.t.cols(), 32);
    EXPECT_EQ(l.ops.f.rows(), 81);
    EXPECT_EQ(l.ops.f.cols(), 49);
    EXPECT_EQ(l.ops.h.rows(), 32);
    EXPECT_EQ(l.ops.h.cols(), 49);
}

TEST(LeafOperators, SolutionOperatorReproducesLinearData) {
    const Leaf l = make_leaf(catalog("laplace"), 9, 8, kUnit);
    const Vector u = l.ops.s * on_edges(l, [](Point x) { return x.x1; });
    EXPECT_LE(max_abs(u - on_grid(l, [](Point x) { return x.x1; })), 1e-12);
}

TEST(LeafOperators, DtnOfLinearDataIsOutwardNormalDerivative) {
    const int q = 8;
    const Leaf l = make_leaf(catalog("laplace"), q + 1, q, kUnit);
    const Vector flux = l.ops.t * on_edges(l, [](Point x) { return x.x1; });
    // S, E, N, W blocks: d/dx2, d/dx1, d/dx2, d/dx1
    EXPECT_LE(max_abs(flux.segment(0, q)), 1e-11);
    EXPECT_LE(max_abs(flux.segment(q, q) - Vector::Ones(q)), 1e-11);
    EXPECT_LE(max_abs(flux.segment(2 * q, q)), 1e-11);
    EXPECT_LE(max_abs(flux.segment(3 * q, q) - Vector::Ones(q)), 1e-11);
}

TEST(LeafOperators, DtnOfHarmonicQuadratic) {
    const int q = 12;
    const Rect box{Interval(0.25, 0.5), Interval(-0.5, 0.0)};
    const Leaf l = make_leaf(catalog("laplace"), q + 1, q, box);
    const Vector flux = l.ops.t * on_edges(l, [](Point x) { return x.x1 * x.x1 - x.x2 * x.x2; });
    Vector expect(4 * q);
    for (int i = 0; i < 4 * q; ++i) {
        const Point x = l.st.gauss_edges[static_cast<std::size_t>(i)];
        const bool horizontal = i < q || (i >= 2 * q && i < 3 * q);
        expect(i) = horizontal ? -2.0 * x.x2 : 2.0 * x.x1;
    }
    EXPECT_LE(max_abs(flux - expect), 1e-10);
}

TEST(LeafOperators, ZeroLoadHasZeroParticularFlux) {
    const Leaf l = make_leaf(catalog("helmholtz", {{"kappa", 20.0}}), 12, 11, kUnit);
    const Vector g = Vector::Zero(l.ops.h.cols());
    EXPECT_EQ(max_abs(l.ops.h * g), 0.0);
    EXPECT_EQ(max_abs(l.ops.f * g), 0.0);
}

TEST(LeafOperators, ResidualsLaplace) {
    const Leaf l = make_leaf(catalog("laplace"), 16, 15, kUnit);
    const LeafResidualReport r = leaf_residual_check(l.ops, l.a, l.kit);
    EXPECT_LE(r.homogeneous, 1e-9 * r.scale);
    EXPECT_LE(r.particular, 1e-9);
    EXPECT_EQ(r.f_exterior, 0.0);
    EXPECT_EQ(r.s_exterior, 0.0);
}

TEST(LeafOperators, ResidualsHelmholtzSmallLeaf) {
    const Rect box{Interval(0.0, 1.0 / 16.0), Interval(0.0, 1.0 / 16.0)};
    const Leaf l = make_leaf(catalog("helmholtz", {{"kappa", 40.0}}), 16, 15, box);
    const LeafResidualReport r = leaf_residual_check(l.ops, l.a, l.kit);
    EXPECT_LE(r.homogeneous, 1e-9 * r.scale);
    EXPECT_LE(r.particular, 1e-9);
}

TEST(LeafOperators, ParticularSolveMatchesManufacturedLoad) {
    // u = x1 x2 (1 - x1)(1 - x2) vanishes on the unit square and is in the polynomial space
    const Leaf l = make_leaf(catalog("laplace"), 8, 7, kUnit);
    auto u = [](Point x) { return x.x1 * x.x2 * (1.0 - x.x1) * (1.0 - x.x2); };
    auto g = [](Point x) { return 2.0 * x.x2 * (1.0 - x.x2) + 2.0 * x.x1 * (1.0 - x.x1); };
    Vector gi(static_cast<Index>(l.kit.interior.size()));
    for (std::size_t k = 0; k < l.kit.interior.size(); ++k) {
        gi(static_cast<Index>(k)) = g(l.st.cheb2d[static_cast<std::size_t>(l.kit.interior[k])]);
    }
    EXPECT_LE(max_abs(l.ops.f * gi - on_grid(l, u)), 1e-12);
}

TEST(LeafOperators, RejectsSingularInterior) {
    const LeafGeometryKit kit = make_geometry_kit(5, 4, kUnit);
    LeafMatrix a = assemble_leaf(catalog("laplace").coefficients, kit, kUnit);
    a.a_ci_ci.row(2) = a.a_ci_ci.row(0);
    try {
        (void)build_leaf_operators(a, kit, 42);
        FAIL() << "expected SolverError";
    } catch (const SolverError& e) {
        EXPECT_NE(std::string(e.what()).find("leaf 42"), std::string::npos);
    }
}

TEST(LeafOperators, RequiresEnoughChebyshevPoints) {
    EXPECT_THROW((void)make_geometry_kit(8, 8, kUnit), std::invalid_argument);
}

TEST(GeometryKitCache, SharesKitsBySize) {
    GeometryKitCache cache(9, 8);
    const auto& a = cache.get(Rect{Interval(0.0, 0.25), Interval(0.5, 0.75)});
    const auto& b = cache.get(Rect{Interval(0.5, 0.75), Interval(0.0, 0.25)});
    const auto& c = cache.get(Rect{Interval(0.0, 0.125), Interval(0.0, 0.25)});
    EXPECT_EQ(&a, &b);
    EXPECT_NE(&a, &c);
}

TEST(GeometryKitCache, TranslationInvariantOperators) {
    const ProblemSpec spec = catalog("laplace");
    const Rect here{Interval(0.0, 0.25), Interval(0.0, 0.25)};
    const Rect there{Interval(0.5, 0.75), Interval(0.25, 0.5)};
    const Leaf a = make_leaf(spec, 9, 8, here);
    const Leaf b = make_leaf(spec, 9, 8, there);
    EXPECT_LE(max_abs(a.ops.t - b.ops.t), 1e-10 * max_abs(a.ops.t));
}
