#pragma once

// Leaf solution operators S, T, F, H.

#include "hps/problem.hpp"
#include "hps/tree.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>

namespace hps {

/// Size-dependent pieces of a leaf discretization. These do not depend on the
/// position of the leaf, so equal-sized leaves share one kit.
struct LeafGeometryKit {
    int p = 0;
    int q = 0;
    TensorDiffMatrices d;
    Matrix lift;  ///< L_ce,ge, 4(p-1) x 4q
    Matrix flux;  ///< D_ge,c, 4q x p^2
    IndexList exterior;
    IndexList interior;
};

[[nodiscard]] inline LeafGeometryKit make_geometry_kit(int p, int q, const Rect& box) {
    if (p < q + 1) throw std::invalid_argument("leaf discretization requires p >= q + 1");
    const LeafStencil st = make_leaf_stencil(p, q, box);
    LeafGeometryKit kit;
    kit.p = p;
    kit.q = q;
    kit.d = tensor_diff_matrices(p, box);
    kit.lift = build_boundary_lift(st);
    kit.flux = build_flux_extractor(st, kit.d.d1, kit.d.d2);
    kit.exterior = st.exterior;
    kit.interior = st.interior;
    return kit;
}

/// Memoizes geometry kits by leaf width and height.
class GeometryKitCache {
public:
    GeometryKitCache(int p, int q) : p_(p), q_(q) {}

    const LeafGeometryKit& get(const Rect& box) {
        const auto key = std::make_pair(box.width(), box.height());
        auto it = kits_.find(key);
        if (it == kits_.end()) {
            const Rect ref{Interval(0.0, box.width()), Interval(0.0, box.height())};
            it = kits_.emplace(key, std::make_unique<LeafGeometryKit>(make_geometry_kit(p_, q_, ref))).first;
        }
        return *it->second;
    }

    [[nodiscard]] int p() const { return p_; }
    [[nodiscard]] int q() const { return q_; }

private:
    int p_;
    int q_;
    std::map<std::pair<double, double>, std::unique_ptr<LeafGeometryKit>> kits_;
};

struct LeafOperators {
    Matrix s;  ///< p^2 x 4q
    Matrix t;  ///< 4q x 4q
    Matrix f;  ///< p^2 x (p-2)^2
    Matrix h;  ///< 4q x (p-2)^2
};

[[nodiscard]] inline std::vector<Point> chebyshev_points(int p, const Rect& box) {
    const auto cx = chebyshev_nodes(p, box.x1).nodes;
    const auto cy = chebyshev_nodes(p, box.x2).nodes;
    std::vector<Point> out;
    out.reserve(static_cast<std::size_t>(p * p));
    for (int j = 0; j < p; ++j) {
        for (int i = 0; i < p; ++i) out.push_back({cx[static_cast<std::size_t>(i)], cy[static_cast<std::size_t>(j)]});
    }
    return out;
}

/// Leaf collocation matrix for a positioned box using a cached kit.
[[nodiscard]] inline LeafMatrix assemble_leaf(const CoefficientField& cf, const LeafGeometryKit& kit, const Rect& box) {
    LeafStencil st;
    st.p = kit.p;
    st.q = kit.q;
    st.box = box;
    st.cheb2d = chebyshev_points(kit.p, box);
    st.exterior = kit.exterior;
    st.interior = kit.interior;
    return assemble_leaf_matrix(cf, st, kit.d);
}

inline constexpr double kMinReciprocalCondition = 1e-13;

/// Factorizes A_ci,ci, failing hard on (near) singularity.
[[nodiscard]] inline DenseLu factor_interior(const LeafMatrix& a, int leaf_id) {
    DenseLu lu(a.a_ci_ci);
    if (!(lu.rcond() >= kMinReciprocalCondition)) {
        throw SolverError("leaf " + std::to_string(leaf_id) +
                          ": interior collocation matrix is singular to working precision (rcond estimate " +
                          std::to_string(lu.rcond()) + ")");
    }
    return lu;
}

[[nodiscard]] inline LeafOperators build_leaf_operators(const LeafMatrix& a, const LeafGeometryKit& kit, int leaf_id = -1) {
    const DenseLu lu = factor_interior(a, leaf_id);
    const Index np = static_cast<Index>(kit.p) * kit.p;
    const auto ni = static_cast<Index>(kit.interior.size());
    const Matrix f_int = lu.solve(Matrix(Matrix::Identity(ni, ni)));
    const Matrix s_int = -lu.solve(Matrix(a.a_ci_ce * kit.lift));
    const Matrix flux_int = kit.flux(Eigen::all, kit.interior);
    LeafOperators ops;
    ops.f = Matrix::Zero(np, ni);
    ops.f(kit.interior, Eigen::all) = f_int;
    ops.s.resize(np, 4 * kit.q);
    ops.s(kit.exterior, Eigen::all) = kit.lift;
    ops.s(kit.interior, Eigen::all) = s_int;
    ops.t.noalias() = kit.flux(Eigen::all, kit.exterior) * kit.lift;
    ops.t.noalias() += flux_int * s_int;
    ops.h.noalias() = flux_int * f_int;
    return ops;
}

[[nodiscard]] inline LeafOperators build_leaf_operators(const BoxNode& leaf, const ProblemSpec& spec, int p, int q) {
    if (!leaf.is_leaf) throw std::invalid_argument("build_leaf_operators: node is not a leaf");
    const LeafGeometryKit kit = make_geometry_kit(p, q, leaf.bounds);
    return build_leaf_operators(assemble_leaf(spec.coefficients, kit, leaf.bounds), kit, leaf.id);
}

struct LeafResidualReport {
    double homogeneous = 0.0;  ///< |A(I_ci,:) S|_max
    double particular = 0.0;   ///< |A(I_ci,:) F - I|_max
    double f_exterior = 0.0;   ///< |F(I_ce,:)|_max
    double s_exterior = 0.0;   ///< |S(I_ce,:) - L_ce,ge|_max
    double scale = 1.0;        ///< |A|_max
};

[[nodiscard]] inline LeafResidualReport leaf_residual_check(const LeafOperators& ops, const LeafMatrix& a,
                                                            const LeafGeometryKit& kit) {
    LeafResidualReport r;
    const Matrix a_int = a.a(kit.interior, Eigen::all);
    const auto ni = static_cast<Index>(kit.interior.size());
    r.homogeneous = max_abs(a_int * ops.s);
    r.particular = max_abs(a_int * ops.f - Matrix::Identity(ni, ni));
    r.f_exterior = max_abs(ops.f(kit.exterior, Eigen::all));
    r.s_exterior = max_abs(ops.s(kit.exterior, Eigen::all) - kit.lift);
    r.scale = max_abs(a.a);
    return r;
}

}  // namespace hps
