#pragma once

// Spectral node sets and the dense operators built from them: differentiation
// matrices, barycentric interpolation, the Gauss-to-Chebyshev boundary lift, the
// Chebyshev-to-Gauss flux extractor and the 2:1 edge interpolators used on
// nonconforming interfaces.
//
// Conventions used throughout the library:
//   * 2D Chebyshev tensor grids are ordered column-major over (x1, x2): the node
//     (x1[i], x2[j]) has index i + p*j.
//   * Gauss edge data on a box is ordered by side S, E, N, W, each side ascending
//     in its running coordinate (x1 on S/N, x2 on E/W).
//   * Fluxes are d/dx1 on vertical sides and d/dx2 on horizontal sides, with the
//     same sign on opposite sides.

#include "hps/linalg.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace hps {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    Interval() = default;
    Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
        if (!(lo_ < hi_)) throw std::invalid_argument("Interval requires lo < hi");
    }
    [[nodiscard]] double length() const { return hi - lo; }
    [[nodiscard]] double mid() const { return 0.5 * (lo + hi); }
};

struct Point {
    double x1 = 0.0;
    double x2 = 0.0;
};

/// Axis-aligned rectangle [x1.lo, x1.hi] x [x2.lo, x2.hi].
struct Rect {
    Interval x1;
    Interval x2;

    [[nodiscard]] double width() const { return x1.length(); }
    [[nodiscard]] double height() const { return x2.length(); }
    [[nodiscard]] double area() const { return width() * height(); }

    /// Euclidean distance from a point to the closed rectangle (0 inside).
    [[nodiscard]] double distance_to(Point p) const {
        const double dx = std::max({x1.lo - p.x1, 0.0, p.x1 - x1.hi});
        const double dy = std::max({x2.lo - p.x2, 0.0, p.x2 - x2.hi});
        return std::hypot(dx, dy);
    }
    [[nodiscard]] bool contains(Point p, double tol = 0.0) const {
        return p.x1 >= x1.lo - tol && p.x1 <= x1.hi + tol && p.x2 >= x2.lo - tol &&
               p.x2 <= x2.hi + tol;
    }
};

enum class Side { South = 0, East = 1, North = 2, West = 3 };

inline constexpr std::array<Side, 4> kSides{Side::South, Side::East, Side::North, Side::West};

[[nodiscard]] inline bool is_vertical(Side s) { return s == Side::East || s == Side::West; }

struct ChebyshevGrid1D {
    int p = 0;
    Interval interval;
    std::vector<double> nodes;
};

struct GaussGrid1D {
    int q = 0;
    Interval interval;
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Chebyshev extreme points cos(k pi/(p-1)) mapped to the interval, ascending,
/// with both endpoints reproduced exactly.
[[nodiscard]] inline ChebyshevGrid1D chebyshev_nodes(int p, Interval interval) {
    if (p < 2) throw std::invalid_argument("chebyshev_nodes: p must be >= 2, got " + std::to_string(p));
    ChebyshevGrid1D grid{p, interval, std::vector<double>(static_cast<std::size_t>(p))};
    const int n = p - 1;
    const double half = 0.5 * interval.length();
    for (int k = 0; k <= n; ++k) {
        // sin form keeps the node set exactly symmetric about the midpoint
        const double t = std::sin(std::numbers::pi * (2.0 * k - n) / (2.0 * n));
        grid.nodes[static_cast<std::size_t>(k)] = interval.mid() + half * t;
    }
    grid.nodes.front() = interval.lo;
    grid.nodes.back() = interval.hi;
    return grid;
}

/// Gauss-Legendre nodes and weights by Newton iteration on P_q.
[[nodiscard]] inline GaussGrid1D gauss_nodes(int q, Interval interval) {
    if (q < 1) throw std::invalid_argument("gauss_nodes: q must be >= 1, got " + std::to_string(q));
    std::vector<double> ref(static_cast<std::size_t>(q));
    std::vector<double> wts(static_cast<std::size_t>(q));
    const int half_count = (q + 1) / 2;
    for (int i = 0; i < half_count; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= q; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            if (q == 1) {
                p1 = x;
                p0 = 1.0;
            }
            dp = q * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged node for the weight
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= q; ++k) {
            const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = pk;
        }
        dp = q * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        ref[static_cast<std::size_t>(i)] = -x;
        ref[static_cast<std::size_t>(q - 1 - i)] = x;
        wts[static_cast<std::size_t>(i)] = w;
        wts[static_cast<std::size_t>(q - 1 - i)] = w;
    }
    if (q % 2 == 1) ref[static_cast<std::size_t>(q / 2)] = 0.0;

    GaussGrid1D grid{q, interval, std::vector<double>(static_cast<std::size_t>(q)), wts};
    const double half = 0.5 * interval.length();
    for (int i = 0; i < q; ++i) {
        grid.nodes[static_cast<std::size_t>(i)] = interval.mid() + half * ref[static_cast<std::size_t>(i)];
        grid.weights[static_cast<std::size_t>(i)] *= half;
    }
    return grid;
}

/// Barycentric weights 1/prod_{k != j}(x_j - x_k), rescaled to unit max.
[[nodiscard]] inline std::vector<double> barycentric_weights(std::span<const double> nodes) {
    const std::size_t n = nodes.size();
    std::vector<double> w(n, 1.0);
    // scale by the hull length to avoid overflow at high order
    double lo = nodes.empty() ? 0.0 : nodes[0];
    double hi = lo;
    for (double x : nodes) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const double scale = n > 1 ? 4.0 / (hi - lo) : 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            if (k == j) continue;
            const double diff = nodes[j] - nodes[k];
            if (diff == 0.0) throw std::invalid_argument("barycentric_weights: duplicate nodes");
            w[j] /= diff * scale;
        }
    }
    double wmax = 0.0;
    for (double v : w) wmax = std::max(wmax, std::abs(v));
    for (double& v : w) v /= wmax;
    return w;
}

/// Lagrange interpolation matrix from src nodes to dst points (barycentric
/// second form). Extrapolation outside the src hull is permitted.
[[nodiscard]] inline Matrix interp_matrix(std::span<const double> src, std::span<const double> dst) {
    const auto w = barycentric_weights(src);
    const auto ns = static_cast<Index>(src.size());
    const auto nd = static_cast<Index>(dst.size());
    Matrix m = Matrix::Zero(nd, ns);
    for (Index i = 0; i < nd; ++i) {
        const double x = dst[static_cast<std::size_t>(i)];
        Index exact = -1;
        for (Index j = 0; j < ns; ++j) {
            if (x == src[static_cast<std::size_t>(j)]) {
                exact = j;
                break;
            }
        }
        if (exact >= 0) {
            m(i, exact) = 1.0;
            continue;
        }
        double denom = 0.0;
        for (Index j = 0; j < ns; ++j) {
            const double t = w[static_cast<std::size_t>(j)] / (x - src[static_cast<std::size_t>(j)]);
            m(i, j) = t;
            denom += t;
        }
        m.row(i) /= denom;
    }
    return m;
}

/// 1D differentiation matrix on arbitrary distinct nodes; exact for polynomials
/// of degree <= nodes-1. Diagonal by negative row sums.
[[nodiscard]] inline Matrix diff_matrix_1d(std::span<const double> nodes) {
    const auto w = barycentric_weights(nodes);
    const auto n = static_cast<Index>(nodes.size());
    Matrix d = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        double diag = 0.0;
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto ui = static_cast<std::size_t>(i);
            const auto uj = static_cast<std::size_t>(j);
            d(i, j) = (w[uj] / w[ui]) / (nodes[ui] - nodes[uj]);
            diag -= d(i, j);
        }
        d(i, i) = diag;
    }
    return d;
}

[[nodiscard]] inline Matrix diff_matrix_1d(const ChebyshevGrid1D& grid) {
    return diff_matrix_1d(std::span<const double>(grid.nodes));
}

/// Kronecker product kron(a, b).
[[nodiscard]] inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

struct TensorDiffMatrices {
    Matrix d1;   ///< d/dx1
    Matrix d2;   ///< d/dx2
    Matrix d11;  ///< (d/dx1)^2
    Matrix d22;  ///< (d/dx2)^2
    Matrix d12;  ///< d/dx1 d/dx2
};

/// p^2 x p^2 differentiation matrices on the Chebyshev tensor grid of a box,
/// constructed from the 1D factors via Kronecker products.
[[nodiscard]] inline TensorDiffMatrices tensor_diff_matrices(int p, const Rect& box) {
    if (!(box.width() > 0.0) || !(box.height() > 0.0)) {
        throw std::invalid_argument("tensor_diff_matrices: degenerate box");
    }
    const Matrix dx = diff_matrix_1d(chebyshev_nodes(p, box.x1));
    const Matrix dy = diff_matrix_1d(chebyshev_nodes(p, box.x2));
    const Matrix eye = Matrix::Identity(p, p);
    TensorDiffMatrices out;
    out.d1 = kron(eye, dx);
    out.d2 = kron(dy, eye);
    out.d11 = kron(eye, dx * dx);
    out.d22 = kron(dy * dy, eye);
    out.d12 = kron(dy, dx);
    return out;
}

/// Index bookkeeping for one leaf: Chebyshev tensor grid, Gauss edge nodes and
/// the exterior/interior/side partitions of the tensor grid.
struct LeafStencil {
    int p = 0;
    int q = 0;
    Rect box;
    std::vector<Point> cheb2d;
    std::vector<Point> gauss_edges;  ///< 4q points, S, E, N, W
    IndexList exterior;              ///< I_ce, ascending tensor index
    IndexList interior;              ///< I_ci, ascending tensor index
    std::array<IndexList, 4> side;   ///< I_s, I_e, I_n, I_w; each length p, ascending

    [[nodiscard]] Index tensor_index(int i, int j) const { return i + static_cast<Index>(p) * j; }
};

[[nodiscard]] inline LeafStencil make_leaf_stencil(int p, int q, const Rect& box) {
    if (p < 3) throw std::invalid_argument("make_leaf_stencil: p must be >= 3");
    if (q < 1) throw std::invalid_argument("make_leaf_stencil: q must be >= 1");
    LeafStencil st;
    st.p = p;
    st.q = q;
    st.box = box;
    const auto cx = chebyshev_nodes(p, box.x1);
    const auto cy = chebyshev_nodes(p, box.x2);
    st.cheb2d.resize(static_cast<std::size_t>(p) * static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
        for (int i = 0; i < p; ++i) {
            const auto k = static_cast<std::size_t>(st.tensor_index(i, j));
            st.cheb2d[k] = Point{cx.nodes[static_cast<std::size_t>(i)], cy.nodes[static_cast<std::size_t>(j)]};
            const bool ext = i == 0 || j == 0 || i == p - 1 || j == p - 1;
            (ext ? st.exterior : st.interior).push_back(static_cast<Index>(k));
        }
    }
    for (int t = 0; t < p; ++t) {
        st.side[0].push_back(st.tensor_index(t, 0));
        st.side[1].push_back(st.tensor_index(p - 1, t));
        st.side[2].push_back(st.tensor_index(t, p - 1));
        st.side[3].push_back(st.tensor_index(0, t));
    }
    const auto gx = gauss_nodes(q, box.x1);
    const auto gy = gauss_nodes(q, box.x2);
    for (double x : gx.nodes) st.gauss_edges.push_back({x, box.x2.lo});
    for (double y : gy.nodes) st.gauss_edges.push_back({box.x1.hi, y});
    for (double x : gx.nodes) st.gauss_edges.push_back({x, box.x2.hi});
    for (double y : gy.nodes) st.gauss_edges.push_back({box.x1.lo, y});
    return st;
}

/// L_ce,ge: Gauss edge data (S, E, N, W) to Chebyshev exterior data (rows in
/// stencil.exterior order). Non-corner rows interpolate along their own edge;
/// corner rows average the extrapolations from the two adjoining edges.
[[nodiscard]] inline Matrix build_boundary_lift(const LeafStencil& st) {
    const int p = st.p;
    const int q = st.q;
    if (p < 3 || q < 2) throw std::invalid_argument("build_boundary_lift: requires p >= 3 and q >= 2");
    const auto gx = gauss_nodes(q, st.box.x1).nodes;
    const auto gy = gauss_nodes(q, st.box.x2).nodes;
    const auto cx = chebyshev_nodes(p, st.box.x1).nodes;
    const auto cy = chebyshev_nodes(p, st.box.x2).nodes;
    const Matrix lx = interp_matrix(gx, cx);  // p x q along x1
    const Matrix ly = interp_matrix(gy, cy);  // p x q along x2

    Matrix lift = Matrix::Zero(static_cast<Index>(st.exterior.size()), 4 * q);
    for (std::size_t r = 0; r < st.exterior.size(); ++r) {
        const Index k = st.exterior[r];
        const int i = static_cast<int>(k % p);
        const int j = static_cast<int>(k / p);
        // contributions keyed by (side, 1D row weights)
        int hits = 0;
        auto add = [&](int side, const Matrix& interp, int pos) {
            lift.block(static_cast<Index>(r), side * q, 1, q) += interp.row(pos);
            ++hits;
        };
        if (j == 0) add(0, lx, i);
        if (i == p - 1) add(1, ly, j);
        if (j == p - 1) add(2, lx, i);
        if (i == 0) add(3, ly, j);
        if (hits == 2) lift.row(static_cast<Index>(r)) *= 0.5;
    }
    return lift;
}

/// D_ge,c: Chebyshev tensor tabulation to fluxes at the 4q Gauss edge nodes.
[[nodiscard]] inline Matrix build_flux_extractor(const LeafStencil& st, const Matrix& d1, const Matrix& d2) {
    const auto n = static_cast<Index>(st.cheb2d.size());
    if (d1.rows() != n || d1.cols() != n || d2.rows() != n || d2.cols() != n) {
        throw std::invalid_argument("build_flux_extractor: differentiation matrices do not match stencil");
    }
    const int q = st.q;
    const auto cx = chebyshev_nodes(st.p, st.box.x1).nodes;
    const auto cy = chebyshev_nodes(st.p, st.box.x2).nodes;
    const Matrix lx = interp_matrix(cx, gauss_nodes(q, st.box.x1).nodes);  // q x p
    const Matrix ly = interp_matrix(cy, gauss_nodes(q, st.box.x2).nodes);
    Matrix out(4 * q, n);
    out.middleRows(0 * q, q) = lx * d2(st.side[0], Eigen::all);
    out.middleRows(1 * q, q) = ly * d1(st.side[1], Eigen::all);
    out.middleRows(2 * q, q) = lx * d2(st.side[2], Eigen::all);
    out.middleRows(3 * q, q) = ly * d1(st.side[3], Eigen::all);
    return out;
}

/// Interpolators between one coarse edge with q Gauss nodes and the two fine
/// half-edges with q Gauss nodes each. Affine invariant, so built once on [-1, 1].
struct EdgeInterpolators {
    Matrix up;    ///< 2q x q: coarse -> (lower half fine; upper half fine)
    Matrix down;  ///< q x 2q: block diagonal, each coarse half from its fine half
};

[[nodiscard]] inline EdgeInterpolators build_edge_interpolators(int q) {
    if (q < 2 || q % 2 != 0) {
        throw std::invalid_argument("build_edge_interpolators: q must be even and >= 2 for 2:1 interfaces, got " +
                                    std::to_string(q));
    }
    const auto coarse = gauss_nodes(q, Interval(-1.0, 1.0)).nodes;
    const auto fine_lo = gauss_nodes(q, Interval(-1.0, 0.0)).nodes;
    const auto fine_hi = gauss_nodes(q, Interval(0.0, 1.0)).nodes;
    const int h = q / 2;
    EdgeInterpolators out;
    out.up.resize(2 * q, q);
    out.up.topRows(q) = interp_matrix(coarse, fine_lo);
    out.up.bottomRows(q) = interp_matrix(coarse, fine_hi);
    out.down = Matrix::Zero(q, 2 * q);
    const std::span<const double> coarse_span(coarse);
    out.down.block(0, 0, h, q) = interp_matrix(fine_lo, coarse_span.first(static_cast<std::size_t>(h)));
    out.down.block(h, q, h, q) = interp_matrix(fine_hi, coarse_span.last(static_cast<std::size_t>(h)));
    return out;
}

}  // namespace hps
