#pragma once

// Hierarchical build stage and two-pass solve stage.
//
// Build: children before parents. A leaf produces S, T, F, H; a parent eliminates
// the shared interface of its children and keeps
//   X = (T33a - T33b)^-1               (as an LU factorization)
//   S = X [-T31a | T32b] P_up
//   T = P_down (blkdiag(T11a, T22b) + [T13a; T23b] S_pre) P_up
// P_up / P_down are identity except on segments where two fine halves facing a
// coarse neighbour are collapsed onto the coarse Gauss nodes.
//
// Solve: the upward pass forms particular-solution fluxes h and interface
// corrections w; the downward pass propagates Dirichlet data to every leaf.

#include "hps/gauss_layout.hpp"
#include "hps/leaf.hpp"
#include "hps/tree.hpp"

#include <atomic>
#include <chrono>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hps {

enum class OperatorMode : std::uint8_t { Stored = 0, Econ = 1 };

[[nodiscard]] inline std::string to_string(OperatorMode m) { return m == OperatorMode::Stored ? "stored" : "econ"; }

[[nodiscard]] inline OperatorMode parse_mode(const std::string& s) {
    if (s == "stored") return OperatorMode::Stored;
    if (s == "econ") return OperatorMode::Econ;
    throw std::invalid_argument("unknown operator mode '" + s + "' (expected stored or econ)");
}

/// Row/column index sets of a sibling merge, as positions within each child's exterior.
struct MergePartition {
    IndexList a1;  ///< J1 within alpha
    IndexList a3;  ///< J3 within alpha
    IndexList b2;  ///< J2 within beta
    IndexList b3;  ///< J3 within beta, same node order as a3
};

/// For each segment of a wrapped exterior, its source positions in the unwrapped
/// (J1 ++ J2) ordering: {pos, -1} for a plain segment, {lo, hi} for a collapsed pair.
using WrapMap = std::vector<std::array<int, 2>>;

struct ParentOperators {
    DenseLu x;
    Matrix s;          ///< |J3| x |I_ge| (after wrap)
    Matrix t;          ///< |I_ge| x |I_ge| (after wrap); released once the parent itself is merged
    Matrix t_ext_int;  ///< [T13a; T23b], |J1|+|J2| x |J3|
    WrapMap wrap;      ///< empty when no segment is collapsed
};

/// Leaf data kept in stored mode. F is kept only on interior rows, since its exterior rows vanish.
struct StoredLeaf {
    Matrix s;
    Matrix f_interior;
    Matrix h;
};

[[nodiscard]] inline ParentOperators merge_siblings(const Matrix& ta, const Matrix& tb, const MergePartition& part,
                                                    int parent_id = -1) {
    if (part.a3.size() != part.b3.size() || part.a3.empty()) {
        throw std::invalid_argument("merge_siblings: interface index sets do not match");
    }
    ParentOperators out;
    const Matrix t33 = ta(part.a3, part.a3) - tb(part.b3, part.b3);
    out.x = DenseLu(t33);
    if (!(out.x.rcond() >= kMinReciprocalCondition)) {
        throw SolverError("box " + std::to_string(parent_id) +
                          ": interface matrix T33a - T33b is singular to working precision (rcond estimate " +
                          std::to_string(out.x.rcond()) + ")");
    }
    const auto n1 = static_cast<Index>(part.a1.size());
    const auto n2 = static_cast<Index>(part.b2.size());
    const auto n3 = static_cast<Index>(part.a3.size());
    Matrix rhs(n3, n1 + n2);
    rhs.leftCols(n1) = -ta(part.a3, part.a1);
    rhs.rightCols(n2) = tb(part.b3, part.b2);
    out.s = out.x.solve(rhs);
    out.t_ext_int.resize(n1 + n2, n3);
    out.t_ext_int.topRows(n1) = ta(part.a1, part.a3);
    out.t_ext_int.bottomRows(n2) = tb(part.b2, part.b3);
    out.t.noalias() = out.t_ext_int * out.s;
    out.t.topLeftCorner(n1, n1) += ta(part.a1, part.a1);
    out.t.bottomRightCorner(n2, n2) += tb(part.b2, part.b2);
    return out;
}

namespace detail {

/// Columns of m (segment blocks in unwrapped order) mapped to the wrapped ordering: m * P_up.
[[nodiscard]] inline Matrix wrap_columns(const Matrix& m, const WrapMap& map, const EdgeInterpolators& p, int q) {
    Matrix out(m.rows(), static_cast<Index>(map.size()) * q);
    for (std::size_t k = 0; k < map.size(); ++k) {
        const auto [lo, hi] = map[k];
        const Index col = static_cast<Index>(k) * q;
        if (hi < 0) {
            out.middleCols(col, q) = m.middleCols(static_cast<Index>(lo) * q, q);
        } else {
            out.middleCols(col, q).noalias() = m.middleCols(static_cast<Index>(lo) * q, q) * p.up.topRows(q);
            out.middleCols(col, q).noalias() += m.middleCols(static_cast<Index>(hi) * q, q) * p.up.bottomRows(q);
        }
    }
    return out;
}

/// Rows of m mapped to the wrapped ordering: P_down * m.
[[nodiscard]] inline Matrix wrap_rows(const Matrix& m, const WrapMap& map, const EdgeInterpolators& p, int q) {
    Matrix out(static_cast<Index>(map.size()) * q, m.cols());
    for (std::size_t k = 0; k < map.size(); ++k) {
        const auto [lo, hi] = map[k];
        const Index row = static_cast<Index>(k) * q;
        if (hi < 0) {
            out.middleRows(row, q) = m.middleRows(static_cast<Index>(lo) * q, q);
        } else {
            out.middleRows(row, q).noalias() = p.down.leftCols(q) * m.middleRows(static_cast<Index>(lo) * q, q);
            out.middleRows(row, q).noalias() += p.down.rightCols(q) * m.middleRows(static_cast<Index>(hi) * q, q);
        }
    }
    return out;
}

[[nodiscard]] inline IndexList expand_positions(const std::vector<int>& seg_positions, int q) {
    IndexList out;
    out.reserve(seg_positions.size() * static_cast<std::size_t>(q));
    for (int s : seg_positions) {
        for (int k = 0; k < q; ++k) out.push_back(static_cast<Index>(s) * q + k);
    }
    return out;
}

[[nodiscard]] inline std::unordered_map<int, int> position_map(const std::vector<int>& segs) {
    std::unordered_map<int, int> pos;
    for (std::size_t i = 0; i < segs.size(); ++i) pos.emplace(segs[i], static_cast<int>(i));
    return pos;
}

[[nodiscard]] inline std::atomic<long>& build_counter() {
    static std::atomic<long> counter{0};
    return counter;
}

}  // namespace detail

/// Number of build_stage invocations in this process.
[[nodiscard]] inline long build_invocations() { return detail::build_counter().load(); }

/// Partition of a parent's merge in terms of its children's exterior orderings.
[[nodiscard]] inline MergePartition merge_partition(const GaussLayout& lay, int alpha, int beta, int parent) {
    const auto pa = detail::position_map(lay.exterior[static_cast<std::size_t>(alpha)]);
    const auto pb = detail::position_map(lay.exterior[static_cast<std::size_t>(beta)]);
    std::vector<int> a1, a3, b2, b3;
    const auto up = static_cast<std::size_t>(parent);
    for (int s : lay.j1[up]) a1.push_back(pa.at(s));
    for (int s : lay.j2[up]) b2.push_back(pb.at(s));
    for (int s : lay.interface[up]) {
        a3.push_back(pa.at(s));
        b3.push_back(pb.at(s));
    }
    return {detail::expand_positions(a1, lay.q), detail::expand_positions(a3, lay.q),
            detail::expand_positions(b2, lay.q), detail::expand_positions(b3, lay.q)};
}

/// Wrapped-to-unwrapped segment map of a parent; empty if the parent has no wraps.
[[nodiscard]] inline WrapMap wrap_map(const GaussLayout& lay, int parent) {
    const auto up = static_cast<std::size_t>(parent);
    if (lay.wraps[up].empty()) return {};
    const auto pos = detail::position_map(lay.merged_exterior[up]);
    std::unordered_map<int, const WrapPair*> by_coarse;
    for (const auto& w : lay.wraps[up]) by_coarse.emplace(w.coarse, &w);
    WrapMap map;
    for (int s : lay.exterior[up]) {
        auto it = by_coarse.find(s);
        if (it != by_coarse.end() && !pos.count(s)) {
            map.push_back({pos.at(it->second->fine_lo), pos.at(it->second->fine_hi)});
        } else {
            map.push_back({pos.at(s), -1});
        }
    }
    return map;
}

/// Re-expresses a merged parent on the coarse neighbour grid: T <- P_down T P_up, S <- S P_up.
inline void wrap_nonconforming(ParentOperators& ops, const WrapMap& map, const EdgeInterpolators& p, int q) {
    if (map.empty()) return;
    ops.s = detail::wrap_columns(ops.s, map, p, q);
    ops.t = detail::wrap_rows(detail::wrap_columns(ops.t, map, p, q), map, p, q);
    ops.wrap = map;
}

struct BuildOptions {
    OperatorMode mode = OperatorMode::Stored;
    /// Processing order over all node ids; must place children before parents.
    std::optional<std::vector<int>> order;
};

struct MemoryReport {
    std::size_t leaf = 0;
    std::size_t parent = 0;
    std::size_t root = 0;
    std::size_t kits = 0;
    [[nodiscard]] std::size_t total() const { return leaf + parent + root + kits; }
};

struct UpwardResult {
    Vector w;                         ///< global; nonzero only on interface nodes
    std::vector<Vector> h;            ///< per node id; empty entries unless kept
    Vector root_h;
};

struct SolveState {
    Vector u;  ///< all Gauss nodes
    Vector w;
    Vector root_h;
    std::vector<Vector> h;  ///< per node id, only when requested
    std::vector<Vector> leaf_solutions;  ///< per leaf ordinal, p^2 tensor tabulation
    std::vector<Vector> g_tab;           ///< per leaf ordinal, interior load tabulation
    double solve_seconds = 0.0;
};

class FactorizedSolver;
struct ArchiveAccess;

[[nodiscard]] FactorizedSolver build_stage(const DomainTree& tree, const ProblemSpec& spec, int p, int q,
                                           const BuildOptions& options = {});

/// Result of the build stage. Immutable after construction; solves are const.
class FactorizedSolver {
public:
    [[nodiscard]] const DomainTree& tree() const { return tree_; }
    [[nodiscard]] const GaussLayout& layout() const { return layout_; }
    [[nodiscard]] const ProblemSpec& spec() const { return spec_; }
    [[nodiscard]] int p() const { return p_; }
    [[nodiscard]] int q() const { return q_; }
    [[nodiscard]] OperatorMode mode() const { return mode_; }
    [[nodiscard]] double build_seconds() const { return build_seconds_; }
    [[nodiscard]] const std::vector<int>& order() const { return order_; }

    /// Global DtN map of the whole domain on I_ge(root).
    [[nodiscard]] const Matrix& root_dtn() const { return root_t_; }
    [[nodiscard]] const ParentOperators& parent_ops(int id) const {
        const auto& p = parents_.at(static_cast<std::size_t>(id));
        if (!p) throw std::out_of_range("node " + std::to_string(id) + " has no parent operators");
        return *p;
    }
    [[nodiscard]] bool has_stored_leaves() const { return !leaves_.empty(); }
    [[nodiscard]] const StoredLeaf& stored_leaf(int ordinal) const { return leaves_.at(static_cast<std::size_t>(ordinal)); }

    [[nodiscard]] MemoryReport memory() const {
        MemoryReport r;
        for (const auto& l : leaves_) r.leaf += static_cast<std::size_t>(l.s.size() + l.f_interior.size() + l.h.size());
        for (const auto& p : parents_) {
            if (p) r.parent += p->x.element_count() + static_cast<std::size_t>(p->s.size() + p->t_ext_int.size());
        }
        r.root = static_cast<std::size_t>(root_t_.size());
        for (const auto& [key, kit] : kits_) {
            (void)key;
            r.kits += static_cast<std::size_t>(kit.d.d1.size() + kit.d.d2.size() + kit.d.d11.size() +
                                               kit.d.d22.size() + kit.d.d12.size() + kit.lift.size() +
                                               kit.flux.size());
        }
        return r;
    }
    [[nodiscard]] std::size_t memory_floats() const { return memory().total(); }

    [[nodiscard]] IndexList boundary_indices() const { return layout_.exterior_indices(tree_.root()); }

    [[nodiscard]] std::vector<Point> boundary_points() const {
        std::vector<Point> pts;
        for (Index i : boundary_indices()) pts.push_back(layout_.coordinates[static_cast<std::size_t>(i)]);
        return pts;
    }

    /// Euclidean distance from x to the domain boundary (union of root exterior segments).
    [[nodiscard]] double boundary_distance(Point x) const {
        double best = std::numeric_limits<double>::infinity();
        for (int s : layout_.exterior[static_cast<std::size_t>(tree_.root())]) {
            const auto& seg = layout_.segments[static_cast<std::size_t>(s)];
            const double along = seg.orientation == Orientation::Vertical ? x.x2 : x.x1;
            const double across = seg.orientation == Orientation::Vertical ? x.x1 : x.x2;
            const double d_along = std::max({seg.span.lo - along, 0.0, along - seg.span.hi});
            best = std::min(best, std::hypot(d_along, across - seg.line));
        }
        return best;
    }

    /// Dirichlet data of the spec at time t on I_ge(root).
    [[nodiscard]] Vector tabulate_boundary(double t = 0.0) const { return tabulate_boundary(spec_, t); }

    [[nodiscard]] Vector tabulate_boundary(const ProblemSpec& data, double t) const {
        const auto pts = boundary_points();
        const double width = std::max(tree_.extent().width(), tree_.extent().height());
        return evaluate_boundary(data, pts, [this](Point x) { return boundary_distance(x); }, width, t);
    }

    [[nodiscard]] const Rect& leaf_box(int ordinal) const {
        return tree_.node(layout_.leaf_ids[static_cast<std::size_t>(ordinal)]).bounds;
    }
    [[nodiscard]] std::size_t leaf_count() const { return layout_.leaf_ids.size(); }

    /// Body load tabulated at interior Chebyshev nodes of every leaf.
    [[nodiscard]] std::vector<Vector> tabulate_load(const ScalarField& g) const {
        std::vector<Vector> out(leaf_count());
        const IndexList interior = interior_pattern();
        for (std::size_t o = 0; o < leaf_count(); ++o) {
            const auto pts = chebyshev_points(p_, leaf_box(static_cast<int>(o)));
            Vector v(static_cast<Index>(interior.size()));
            for (std::size_t k = 0; k < interior.size(); ++k) v(static_cast<Index>(k)) = g(pts[static_cast<std::size_t>(interior[k])]);
            out[o] = std::move(v);
        }
        return out;
    }

    /// I_ci in tensor indexing, independent of the leaf.
    [[nodiscard]] IndexList interior_pattern() const {
        IndexList out;
        for (int j = 1; j < p_ - 1; ++j) {
            for (int i = 1; i < p_ - 1; ++i) out.push_back(i + static_cast<Index>(p_) * j);
        }
        return out;
    }
    [[nodiscard]] IndexList exterior_pattern() const {
        IndexList out;
        for (int j = 0; j < p_; ++j) {
            for (int i = 0; i < p_; ++i) {
                if (i == 0 || j == 0 || i == p_ - 1 || j == p_ - 1) out.push_back(i + static_cast<Index>(p_) * j);
            }
        }
        return out;
    }

    [[nodiscard]] UpwardResult upward_pass(const std::vector<Vector>& g_tab, bool keep_fluxes = false) const {
        check_load(g_tab);
        const std::size_t nn = tree_.size();
        UpwardResult up;
        up.w = Vector::Zero(static_cast<Index>(layout_.node_count()));
        up.h.assign(nn, Vector());
        for (int id : order_) {
            const auto uid = static_cast<std::size_t>(id);
            const auto& nd = tree_.node(id);
            if (nd.is_leaf) {
                const int o = layout_.leaf_ordinal[uid];
                const Vector& g = g_tab[static_cast<std::size_t>(o)];
                if (mode_ == OperatorMode::Stored) {
                    up.h[uid] = leaves_[static_cast<std::size_t>(o)].h * g;
                } else {
                    const auto& kit = kit_for(nd.bounds);
                    const LeafMatrix a = assemble_leaf(spec_.coefficients, kit, nd.bounds);
                    const DenseLu lu = factor_interior(a, id);
                    up.h[uid] = kit.flux(Eigen::all, kit.interior) * lu.solve(g);
                }
                continue;
            }
            const int a = nd.children[0];
            const int b = nd.children[1];
            const auto& ops = *parents_[uid];
            const auto& part = partitions_[uid];
            Vector& ha = up.h[static_cast<std::size_t>(a)];
            Vector& hb = up.h[static_cast<std::size_t>(b)];
            const Vector w = ops.x.solve(Vector(hb(part.b3) - ha(part.a3)));
            up.w(layout_.interior_indices(id)) = w;
            Vector h(static_cast<Index>(part.a1.size() + part.b2.size()));
            h.head(static_cast<Index>(part.a1.size())) = ha(part.a1);
            h.tail(static_cast<Index>(part.b2.size())) = hb(part.b2);
            h.noalias() += ops.t_ext_int * w;
            up.h[uid] = ops.wrap.empty() ? std::move(h) : Vector(detail::wrap_rows(h, ops.wrap, interp_, q_));
            if (!keep_fluxes) {
                ha.resize(0);
                hb.resize(0);
            }
        }
        up.root_h = up.h[static_cast<std::size_t>(tree_.root())];
        if (!keep_fluxes) up.h.clear();
        return up;
    }

    [[nodiscard]] SolveState downward_pass(const Vector& f_root, UpwardResult up, std::vector<Vector> g_tab) const {
        check_load(g_tab);
        const IndexList root_idx = boundary_indices();
        if (f_root.size() != static_cast<Index>(root_idx.size())) {
            throw std::invalid_argument("downward_pass: boundary data has " + std::to_string(f_root.size()) +
                                        " entries, expected " + std::to_string(root_idx.size()));
        }
        SolveState st;
        st.u = Vector::Zero(static_cast<Index>(layout_.node_count()));
        st.u(root_idx) = f_root;
        st.leaf_solutions.assign(leaf_count(), Vector());
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            const int id = *it;
            const auto uid = static_cast<std::size_t>(id);
            const auto& nd = tree_.node(id);
            const IndexList ext = layout_.exterior_indices(id);
            if (nd.is_leaf) {
                const int o = layout_.leaf_ordinal[uid];
                const Vector u_ge = st.u(ext);
                const Vector& g = g_tab[static_cast<std::size_t>(o)];
                Vector uc;
                if (mode_ == OperatorMode::Stored) {
                    const auto& lf = leaves_[static_cast<std::size_t>(o)];
                    uc = lf.s * u_ge;
                    const IndexList interior = interior_pattern();
                    uc(interior) += lf.f_interior * g;
                } else {
                    const auto& kit = kit_for(nd.bounds);
                    const LeafMatrix a = assemble_leaf(spec_.coefficients, kit, nd.bounds);
                    const DenseLu lu = factor_interior(a, id);
                    uc.resize(static_cast<Index>(p_) * p_);
                    const Vector u_ce = kit.lift * u_ge;
                    uc(kit.exterior) = u_ce;
                    uc(kit.interior) = lu.solve(Vector(g - a.a_ci_ce * u_ce));
                }
                st.leaf_solutions[static_cast<std::size_t>(o)] = std::move(uc);
                continue;
            }
            const auto& ops = *parents_[uid];
            const Vector u_ext = st.u(ext);
            for (const auto& wp : layout_.wraps[uid]) {
                const Vector uc = st.u(layout_.indices({wp.coarse}));
                st.u(layout_.indices({wp.fine_lo})) = interp_.up.topRows(q_) * uc;
                st.u(layout_.indices({wp.fine_hi})) = interp_.up.bottomRows(q_) * uc;
            }
            const IndexList gi = layout_.interior_indices(id);
            st.u(gi) = ops.s * u_ext + up.w(gi);
        }
        st.w = std::move(up.w);
        st.h = std::move(up.h);
        st.root_h = std::move(up.root_h);
        st.g_tab = std::move(g_tab);
        return st;
    }

    [[nodiscard]] SolveState solve(const Vector& f_root, const std::vector<Vector>& g_tab, bool keep_fluxes = false) const {
        const auto t0 = std::chrono::steady_clock::now();
        SolveState st = downward_pass(f_root, upward_pass(g_tab, keep_fluxes), g_tab);
        st.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return st;
    }

    /// Solve with the spec's own Dirichlet data and body load.
    [[nodiscard]] SolveState solve() const {
        const auto t0 = std::chrono::steady_clock::now();
        const Vector f = tabulate_boundary(0.0);
        auto g = tabulate_load(spec_.body_load);
        auto up = upward_pass(g);
        SolveState st = downward_pass(f, std::move(up), std::move(g));
        st.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return st;
    }

    [[nodiscard]] SolveState solve(const ScalarField& g, double t = 0.0) const {
        const auto t0 = std::chrono::steady_clock::now();
        const Vector f = tabulate_boundary(t);
        auto gt = tabulate_load(g);
        auto up = upward_pass(gt);
        SolveState st = downward_pass(f, std::move(up), std::move(gt));
        st.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return st;
    }

private:
    friend FactorizedSolver build_stage(const DomainTree&, const ProblemSpec&, int, int, const BuildOptions&);
    friend struct ArchiveAccess;

    FactorizedSolver() = default;

    void check_load(const std::vector<Vector>& g_tab) const {
        if (g_tab.size() != leaf_count()) {
            throw std::invalid_argument("body load tabulation has " + std::to_string(g_tab.size()) +
                                        " leaves, expected " + std::to_string(leaf_count()));
        }
        const auto ni = static_cast<Index>(p_ - 2) * (p_ - 2);
        for (const auto& g : g_tab) {
            if (g.size() != ni) throw std::invalid_argument("body load tabulation has the wrong interior size");
        }
    }

    const LeafGeometryKit& kit_for(const Rect& box) const {
        auto it = kits_.find({box.width(), box.height()});
        if (it == kits_.end()) throw std::logic_error("missing geometry kit for leaf size");
        return it->second;
    }

    void finalize_structure() {
        partitions_.assign(tree_.size(), MergePartition{});
        for (const auto& nd : tree_.nodes()) {
            if (!nd.is_leaf) partitions_[static_cast<std::size_t>(nd.id)] = merge_partition(layout_, nd.children[0], nd.children[1], nd.id);
        }
        if (q_ % 2 == 0 && q_ >= 2) interp_ = build_edge_interpolators(q_);
    }

    DomainTree tree_;
    GaussLayout layout_;
    ProblemSpec spec_;
    int p_ = 0;
    int q_ = 0;
    OperatorMode mode_ = OperatorMode::Stored;
    double build_seconds_ = 0.0;
    std::vector<int> order_;
    std::vector<StoredLeaf> leaves_;                       // stored mode only, per leaf ordinal
    std::vector<std::optional<ParentOperators>> parents_;  // per node id
    std::vector<MergePartition> partitions_;               // per node id, derived
    Matrix root_t_;
    EdgeInterpolators interp_;
    std::map<std::pair<double, double>, LeafGeometryKit> kits_;  // econ mode only
};

[[nodiscard]] inline std::vector<int> default_build_order(const DomainTree& tree) {
    std::vector<int> order(tree.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(order.size() - 1 - i);
    return order;
}

inline void validate_build_order(const DomainTree& tree, const std::vector<int>& order) {
    if (order.size() != tree.size()) throw std::invalid_argument("build order must list every node exactly once");
    std::vector<int> seen(tree.size(), -1);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const int id = order[i];
        if (id < 0 || static_cast<std::size_t>(id) >= tree.size() || seen[static_cast<std::size_t>(id)] >= 0) {
            throw std::invalid_argument("build order must list every node exactly once");
        }
        seen[static_cast<std::size_t>(id)] = static_cast<int>(i);
    }
    for (const auto& nd : tree.nodes()) {
        for (int c : nd.children) {
            if (seen[static_cast<std::size_t>(c)] > seen[static_cast<std::size_t>(nd.id)]) {
                throw std::invalid_argument("build order places node " + std::to_string(nd.id) +
                                            " before its child " + std::to_string(c));
            }
        }
    }
}

inline FactorizedSolver build_stage(const DomainTree& tree, const ProblemSpec& spec, int p, int q,
                                    const BuildOptions& options) {
    if (q < 2) throw std::invalid_argument("build_stage: q must be >= 2");
    if (p < q + 1) throw std::invalid_argument("build_stage: p must be >= q + 1");
    detail::build_counter().fetch_add(1);
    const auto t0 = std::chrono::steady_clock::now();

    FactorizedSolver sol;
    sol.tree_ = tree;
    sol.layout_ = enumerate_gauss_nodes(tree, q);
    sol.spec_ = spec;
    sol.p_ = p;
    sol.q_ = q;
    sol.mode_ = options.mode;
    sol.order_ = options.order ? *options.order : default_build_order(tree);
    validate_build_order(tree, sol.order_);
    sol.finalize_structure();
    const auto& lay = sol.layout_;
    for (const auto& nd : tree.nodes()) {
        if (!lay.wraps[static_cast<std::size_t>(nd.id)].empty() && sol.interp_.up.size() == 0) {
            throw SolverError("nonconforming interfaces need an even q >= 2, got q = " + std::to_string(q));
        }
    }

    GeometryKitCache cache(p, q);
    std::vector<Matrix> t_of(tree.size());
    sol.parents_.assign(tree.size(), std::nullopt);
    if (options.mode == OperatorMode::Stored) sol.leaves_.resize(lay.leaf_ids.size());

    for (int id : sol.order_) {
        const auto uid = static_cast<std::size_t>(id);
        const auto& nd = tree.node(id);
        if (nd.is_leaf) {
            const auto& kit = cache.get(nd.bounds);
            LeafOperators ops = build_leaf_operators(assemble_leaf(spec.coefficients, kit, nd.bounds), kit, id);
            t_of[uid] = std::move(ops.t);
            if (options.mode == OperatorMode::Stored) {
                auto& keep = sol.leaves_[static_cast<std::size_t>(lay.leaf_ordinal[uid])];
                keep.s = std::move(ops.s);
                keep.f_interior = ops.f(kit.interior, Eigen::all);
                keep.h = std::move(ops.h);
            }
            continue;
        }
        const int a = nd.children[0];
        const int b = nd.children[1];
        ParentOperators ops = merge_siblings(t_of[static_cast<std::size_t>(a)], t_of[static_cast<std::size_t>(b)],
                                             sol.partitions_[uid], id);
        t_of[static_cast<std::size_t>(a)].resize(0, 0);
        t_of[static_cast<std::size_t>(b)].resize(0, 0);
        wrap_nonconforming(ops, wrap_map(lay, id), sol.interp_, q);
        t_of[uid] = std::move(ops.t);
        ops.t.resize(0, 0);
        sol.parents_[uid] = std::move(ops);
    }
    sol.root_t_ = std::move(t_of[static_cast<std::size_t>(tree.root())]);
    if (options.mode == OperatorMode::Econ) {
        for (int leaf : lay.leaf_ids) {
            const Rect& b = tree.node(leaf).bounds;
            const std::pair<double, double> key{b.width(), b.height()};
            if (!sol.kits_.count(key)) sol.kits_.emplace(key, cache.get(b));
        }
    }
    sol.build_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

}  // namespace hps
