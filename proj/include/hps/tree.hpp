#pragma once

// Hierarchical box trees over rectangles and unions of rectangles.

#include "hps/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hps {

struct BoxNode {
    int id = 0;
    Rect bounds;  ///< bounding rectangle; equals the box itself when rectangular
    double area = 0.0;
    std::optional<int> parent;
    std::vector<int> children;  ///< empty or exactly two
    int level = 0;
    bool is_leaf = true;
    bool rectangular = true;
};

struct RefinementSpec {
    Point target;
    int levels = 0;
    double threshold = std::numbers::sqrt2;
};

/// One rectangle of a (possibly composite) domain with its own uniform grid and
/// refinement requests.
struct RectanglePiece {
    Rect domain;
    int n = 1;
    std::vector<RefinementSpec> refinements;
};

/// Serializable mesh description: the rectangles plus an ordered merge script.
/// Merge k glues pieces (a, b) into a new piece with label pieces.size() + k.
struct MeshDescription {
    std::vector<RectanglePiece> pieces;
    std::vector<std::pair<int, int>> merges;
};

/// Binary tree of boxes; nodes[i].id == i and a parent always precedes its children.
class DomainTree {
public:
    DomainTree() = default;

    [[nodiscard]] const std::vector<BoxNode>& nodes() const { return nodes_; }
    [[nodiscard]] const BoxNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    [[nodiscard]] std::size_t size() const { return nodes_.size(); }
    [[nodiscard]] int root() const { return 0; }
    [[nodiscard]] const std::vector<Rect>& pieces() const { return pieces_; }

    [[nodiscard]] std::vector<int> leaves() const {
        std::vector<int> out;
        for (const auto& n : nodes_) {
            if (n.is_leaf) out.push_back(n.id);
        }
        return out;
    }

    [[nodiscard]] int depth() const {
        int d = 0;
        for (const auto& n : nodes_) d = std::max(d, n.level);
        return d;
    }

    /// Bounding rectangle of the whole domain.
    [[nodiscard]] Rect extent() const { return nodes_.front().bounds; }

    // construction helpers used by the free functions below
    static DomainTree single_box(const Rect& box) {
        DomainTree t;
        t.pieces_ = {box};
        t.nodes_.push_back(BoxNode{0, box, box.area(), std::nullopt, {}, 0, true, true});
        return t;
    }

    /// Splits leaf `id` into two halves by a cut normal to x1 (vertical cut) or x2.
    std::pair<int, int> split(int id, bool vertical_cut) {
        auto& nd = nodes_.at(static_cast<std::size_t>(id));
        if (!nd.is_leaf) throw std::logic_error("DomainTree::split: node is not a leaf");
        const Rect b = nd.bounds;
        Rect lo = b;
        Rect hi = b;
        if (vertical_cut) {
            const double m = b.x1.mid();
            lo.x1 = Interval(b.x1.lo, m);
            hi.x1 = Interval(m, b.x1.hi);
        } else {
            const double m = b.x2.mid();
            lo.x2 = Interval(b.x2.lo, m);
            hi.x2 = Interval(m, b.x2.hi);
        }
        const int level = nd.level + 1;
        const int a = static_cast<int>(nodes_.size());
        nodes_.push_back(BoxNode{a, lo, lo.area(), id, {}, level, true, true});
        nodes_.push_back(BoxNode{a + 1, hi, hi.area(), id, {}, level, true, true});
        auto& parent = nodes_[static_cast<std::size_t>(id)];
        parent.children = {a, a + 1};
        parent.is_leaf = false;
        return {a, a + 1};
    }

    /// Rebuilds a tree from a node table, checking the structural invariants.
    static DomainTree from_nodes(std::vector<BoxNode> nodes, std::vector<Rect> pieces) {
        if (nodes.empty()) throw std::invalid_argument("DomainTree::from_nodes: empty node table");
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& n = nodes[i];
            const bool ok_children = n.is_leaf ? n.children.empty() : n.children.size() == 2;
            bool ok = n.id == static_cast<int>(i) && ok_children && (i == 0) == !n.parent.has_value();
            if (n.parent) ok = ok && *n.parent >= 0 && *n.parent < n.id;
            for (int c : n.children) {
                ok = ok && c > n.id && static_cast<std::size_t>(c) < nodes.size() &&
                     nodes[static_cast<std::size_t>(c)].parent == n.id;
            }
            if (!ok) throw std::invalid_argument("DomainTree::from_nodes: inconsistent node " + std::to_string(i));
        }
        DomainTree t;
        t.nodes_ = std::move(nodes);
        t.pieces_ = std::move(pieces);
        return t;
    }

    /// Glues several trees under the binary merge script and renumbers breadth-first.
    static DomainTree glue(const std::vector<DomainTree>& parts, const std::vector<std::pair<int, int>>& merges);

private:
    std::vector<BoxNode> nodes_;
    std::vector<Rect> pieces_;
};

[[nodiscard]] inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// n x n equal leaves obtained by alternating halvings (x1 cut first).
[[nodiscard]] inline DomainTree build_uniform_tree(const Rect& domain, int n) {
    if (!is_power_of_two(n)) {
        throw std::invalid_argument("build_uniform_tree: n must be a power of 2, got " + std::to_string(n));
    }
    DomainTree tree = DomainTree::single_box(domain);
    int levels = 0;
    for (int m = n; m > 1; m /= 2) levels += 2;
    std::vector<int> frontier{0};
    for (int l = 0; l < levels; ++l) {
        std::vector<int> next;
        next.reserve(frontier.size() * 2);
        for (int id : frontier) {
            const auto [a, b] = tree.split(id, l % 2 == 0);
            next.push_back(a);
            next.push_back(b);
        }
        frontier = std::move(next);
    }
    return tree;
}

/// Half the longer side of a box; the closeness scale of the refinement rule.
[[nodiscard]] inline double half_side(const Rect& r) { return 0.5 * std::max(r.width(), r.height()); }

/// n_ref rounds: every leaf with dist(target, leaf) <= t * l is split into 2x2.
[[nodiscard]] inline DomainTree refine_near_point(DomainTree tree, const RefinementSpec& spec) {
    if (spec.levels < 0) throw std::invalid_argument("refine_near_point: levels must be >= 0");
    if (!(spec.threshold > 0.0)) throw std::invalid_argument("refine_near_point: threshold must be > 0");
    for (int round = 0; round < spec.levels; ++round) {
        std::vector<int> marked;
        for (int id : tree.leaves()) {
            const Rect& b = tree.node(id).bounds;
            if (b.distance_to(spec.target) <= spec.threshold * half_side(b)) marked.push_back(id);
        }
        for (int id : marked) {
            const auto [west, east] = tree.split(id, true);
            (void)tree.split(west, false);
            (void)tree.split(east, false);
        }
    }
    return tree;
}

[[nodiscard]] inline DomainTree build_piece_tree(const RectanglePiece& piece) {
    DomainTree t = build_uniform_tree(piece.domain, piece.n);
    for (const auto& r : piece.refinements) t = refine_near_point(std::move(t), r);
    return t;
}

inline DomainTree DomainTree::glue(const std::vector<DomainTree>& parts,
                                   const std::vector<std::pair<int, int>>& merges) {
    if (parts.empty()) throw std::invalid_argument("DomainTree::glue: no pieces");
    if (merges.size() + 1 != parts.size()) {
        throw std::invalid_argument("DomainTree::glue: merge script must reduce all pieces to one root");
    }
    // staging arena with arbitrary ids, renumbered at the end
    std::vector<BoxNode> arena;
    std::vector<int> piece_root;
    std::vector<Rect> rects;
    for (const auto& part : parts) {
        const int offset = static_cast<int>(arena.size());
        for (BoxNode n : part.nodes_) {
            n.id += offset;
            if (n.parent) *n.parent += offset;
            for (int& c : n.children) c += offset;
            arena.push_back(n);
        }
        piece_root.push_back(offset);
        rects.insert(rects.end(), part.pieces_.begin(), part.pieces_.end());
    }
    std::vector<bool> used(piece_root.size(), false);
    for (const auto& [a, b] : merges) {
        const auto ua = static_cast<std::size_t>(a);
        const auto ub = static_cast<std::size_t>(b);
        if (a == b || ua >= piece_root.size() || ub >= piece_root.size() || used[ua] || used[ub]) {
            throw std::invalid_argument("DomainTree::glue: invalid merge (" + std::to_string(a) + ", " +
                                        std::to_string(b) + ")");
        }
        used[ua] = used[ub] = true;
        const int ra = piece_root[ua];
        const int rb = piece_root[ub];
        const Rect& ba = arena[static_cast<std::size_t>(ra)].bounds;
        const Rect& bb = arena[static_cast<std::size_t>(rb)].bounds;
        Rect box{Interval(std::min(ba.x1.lo, bb.x1.lo), std::max(ba.x1.hi, bb.x1.hi)),
                 Interval(std::min(ba.x2.lo, bb.x2.lo), std::max(ba.x2.hi, bb.x2.hi))};
        const double area = arena[static_cast<std::size_t>(ra)].area + arena[static_cast<std::size_t>(rb)].area;
        const int id = static_cast<int>(arena.size());
        const bool rect = std::abs(box.area() - area) <= 1e-12 * box.area();
        arena.push_back(BoxNode{id, box, area, std::nullopt, {ra, rb}, 0, false, rect});
        arena[static_cast<std::size_t>(ra)].parent = id;
        arena[static_cast<std::size_t>(rb)].parent = id;
        piece_root.push_back(id);
        used.push_back(false);
    }
    // breadth-first renumbering from the final root
    const int top = piece_root.back();
    std::vector<int> new_id(arena.size(), -1);
    std::vector<int> order;
    std::deque<int> queue{top};
    while (!queue.empty()) {
        const int cur = queue.front();
        queue.pop_front();
        new_id[static_cast<std::size_t>(cur)] = static_cast<int>(order.size());
        order.push_back(cur);
        for (int c : arena[static_cast<std::size_t>(cur)].children) queue.push_back(c);
    }
    DomainTree out;
    out.pieces_ = rects;
    out.nodes_.reserve(order.size());
    for (int old : order) {
        BoxNode n = arena[static_cast<std::size_t>(old)];
        n.id = new_id[static_cast<std::size_t>(old)];
        if (n.parent) n.parent = new_id[static_cast<std::size_t>(*n.parent)];
        for (int& c : n.children) c = new_id[static_cast<std::size_t>(c)];
        n.level = n.parent ? out.nodes_[static_cast<std::size_t>(*n.parent)].level + 1 : 0;
        out.nodes_.push_back(n);
    }
    return out;
}

[[nodiscard]] inline DomainTree build_mesh(const MeshDescription& mesh) {
    if (mesh.pieces.empty()) throw std::invalid_argument("build_mesh: no pieces");
    if (mesh.pieces.size() == 1 && mesh.merges.empty()) return build_piece_tree(mesh.pieces.front());
    std::vector<DomainTree> parts;
    for (const auto& piece : mesh.pieces) parts.push_back(build_piece_tree(piece));
    return DomainTree::glue(parts, mesh.merges);
}

/// Single rectangle with a uniform n x n grid and optional refinement.
[[nodiscard]] inline MeshDescription rectangle_mesh(const Rect& domain, int n,
                                                    std::vector<RefinementSpec> refinements = {}) {
    return MeshDescription{{RectanglePiece{domain, n, std::move(refinements)}}, {}};
}

/// L-shaped domain [0,2]^2 minus (1,2]^2 as three unit squares of leaf size h,
/// refined n_ref levels toward the re-entrant corner (1,1).
[[nodiscard]] inline MeshDescription lshape_mesh(double h, int n_ref) {
    const int n = static_cast<int>(std::lround(1.0 / h));
    std::vector<RefinementSpec> refine;
    if (n_ref > 0) refine.push_back(RefinementSpec{Point{1.0, 1.0}, n_ref, std::numbers::sqrt2});
    MeshDescription m;
    m.pieces.push_back({Rect{Interval(0.0, 1.0), Interval(0.0, 1.0)}, n, refine});
    m.pieces.push_back({Rect{Interval(1.0, 2.0), Interval(0.0, 1.0)}, n, refine});
    m.pieces.push_back({Rect{Interval(0.0, 1.0), Interval(1.0, 2.0)}, n, refine});
    m.merges = {{0, 1}, {3, 2}};
    return m;
}

}  // namespace hps
