#pragma once

// Global Gauss node enumeration and per-node index sets.
//
// Every leaf side maps to one edge segment carrying q Gauss nodes. Leaves that
// share a side of the same extent share the segment. A side that is one half of
// a larger neighbor's side is a "fine" segment: it keeps its own nodes and links
// to the neighbor's "coarse" segment. Once both fine halves of a coarse segment
// appear on the exterior of one box, that box is wrapped onto the coarse nodes.

#include "hps/tree.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

namespace hps {

enum class Orientation : std::uint8_t { Vertical = 0, Horizontal = 1 };

struct Segment {
    Orientation orientation = Orientation::Vertical;
    double line = 0.0;  ///< x1 for vertical segments, x2 for horizontal ones
    Interval span;      ///< extent in the running coordinate
    bool boundary = false;
    int coarse = -1;               ///< coarse segment this fine segment refines
    std::array<int, 2> fine{-1, -1};  ///< lower and upper fine halves of a coarse segment
};

/// Wrap of two fine exterior segments onto their coarse segment.
struct WrapPair {
    int coarse = -1;
    int fine_lo = -1;
    int fine_hi = -1;
};

enum class EdgeKind : std::uint8_t { Boundary, Conforming, Nonconforming };

struct EdgeReport {
    int box = 0;
    Side side = Side::South;
    EdgeKind kind = EdgeKind::Conforming;
    bool fine_side = false;  ///< the side carries fine nodes that need P interpolators
};

struct GaussLayout {
    int q = 0;
    std::vector<Segment> segments;
    std::vector<Point> coordinates;  ///< node of segment s, position k: s*q + k

    std::vector<int> leaf_ids;         ///< ascending node ids of leaves
    std::vector<int> leaf_ordinal;     ///< node id -> position in leaf_ids, -1 otherwise
    std::vector<std::array<int, 4>> leaf_sides;  ///< per leaf ordinal: segments S, E, N, W

    // per node id
    std::vector<std::vector<int>> exterior;         ///< segments of I_ge (after any wrap)
    std::vector<std::vector<int>> merged_exterior;  ///< J1 then J2 (parents only, before wrap)
    std::vector<std::vector<int>> interface;        ///< J3 segments, ie I_gi (parents only)
    std::vector<std::vector<int>> j1;
    std::vector<std::vector<int>> j2;
    std::vector<std::vector<WrapPair>> wraps;

    [[nodiscard]] std::size_t node_count() const { return coordinates.size(); }

    /// Concatenated global node indices of a segment list.
    [[nodiscard]] IndexList indices(const std::vector<int>& segs) const {
        IndexList out;
        out.reserve(segs.size() * static_cast<std::size_t>(q));
        for (int s : segs) {
            for (int k = 0; k < q; ++k) out.push_back(static_cast<Index>(s) * q + k);
        }
        return out;
    }
    [[nodiscard]] IndexList exterior_indices(int id) const { return indices(exterior[static_cast<std::size_t>(id)]); }
    [[nodiscard]] IndexList interior_indices(int id) const { return indices(interface[static_cast<std::size_t>(id)]); }

    [[nodiscard]] bool is_wrapped_fine(int seg) const { return segments[static_cast<std::size_t>(seg)].coarse >= 0; }
};

namespace detail {

/// Integer snapping of coordinates so that segment identity is exact.
struct Quantizer {
    double origin1 = 0.0;
    double origin2 = 0.0;
    double scale = 1.0;

    explicit Quantizer(const Rect& extent) {
        origin1 = extent.x1.lo;
        origin2 = extent.x2.lo;
        scale = std::ldexp(1.0, 40) / std::max(extent.width(), extent.height());
    }
    [[nodiscard]] std::int64_t q1(double v) const { return std::llround((v - origin1) * scale); }
    [[nodiscard]] std::int64_t q2(double v) const { return std::llround((v - origin2) * scale); }
};

struct SideRecord {
    int leaf = 0;
    Side side = Side::South;
    Orientation orientation = Orientation::Vertical;
    double line = 0.0;
    Interval span;
    std::int64_t qline = 0;
    std::int64_t qlo = 0;
    std::int64_t qhi = 0;
    bool negative = false;  ///< leaf lies on the low-coordinate side of the line
};

[[nodiscard]] inline SideRecord side_record(const Rect& b, int leaf, Side s, const Quantizer& qz) {
    SideRecord r;
    r.leaf = leaf;
    r.side = s;
    switch (s) {
        case Side::South:
            r = {leaf, s, Orientation::Horizontal, b.x2.lo, b.x1, qz.q2(b.x2.lo), qz.q1(b.x1.lo), qz.q1(b.x1.hi), false};
            break;
        case Side::North:
            r = {leaf, s, Orientation::Horizontal, b.x2.hi, b.x1, qz.q2(b.x2.hi), qz.q1(b.x1.lo), qz.q1(b.x1.hi), true};
            break;
        case Side::West:
            r = {leaf, s, Orientation::Vertical, b.x1.lo, b.x2, qz.q1(b.x1.lo), qz.q2(b.x2.lo), qz.q2(b.x2.hi), false};
            break;
        case Side::East:
            r = {leaf, s, Orientation::Vertical, b.x1.hi, b.x2, qz.q1(b.x1.hi), qz.q2(b.x2.lo), qz.q2(b.x2.hi), true};
            break;
    }
    return r;
}

using SegmentKey = std::tuple<int, std::int64_t, std::int64_t, std::int64_t>;

enum class SideClass : std::uint8_t { Boundary, Conforming, Fine, Coarse };

struct SideAnalysis {
    std::vector<SideRecord> records;   ///< per (leaf ordinal * 4 + side)
    std::vector<SideClass> classes;
    std::vector<int> coarse_partner;   ///< record index of the coarse opposite side for Fine
};

/// Classifies every leaf side against the leaves across its line.
[[nodiscard]] inline SideAnalysis analyze_sides(const DomainTree& tree, const std::vector<int>& leaves) {
    const Quantizer qz(tree.extent());
    SideAnalysis out;
    out.records.reserve(leaves.size() * 4);
    for (int leaf : leaves) {
        for (Side s : kSides) out.records.push_back(side_record(tree.node(leaf).bounds, leaf, s, qz));
    }
    std::map<std::pair<int, std::int64_t>, std::vector<int>> by_line;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        const auto& r = out.records[i];
        by_line[{static_cast<int>(r.orientation), r.qline}].push_back(static_cast<int>(i));
    }
    out.classes.assign(out.records.size(), SideClass::Boundary);
    out.coarse_partner.assign(out.records.size(), -1);
    for (const auto& [key, group] : by_line) {
        std::vector<int> lo_side;
        std::vector<int> hi_side;
        for (int i : group) (out.records[static_cast<std::size_t>(i)].negative ? lo_side : hi_side).push_back(i);
        auto by_start = [&](int a, int b) {
            return out.records[static_cast<std::size_t>(a)].qlo < out.records[static_cast<std::size_t>(b)].qlo;
        };
        std::sort(lo_side.begin(), lo_side.end(), by_start);
        std::sort(hi_side.begin(), hi_side.end(), by_start);
        auto classify = [&](const std::vector<int>& mine, const std::vector<int>& theirs) {
            for (int i : mine) {
                const auto& r = out.records[static_cast<std::size_t>(i)];
                std::vector<int> overlaps;
                // first opposite record that could overlap
                auto it = std::partition_point(theirs.begin(), theirs.end(), [&](int j) {
                    return out.records[static_cast<std::size_t>(j)].qhi <= r.qlo;
                });
                for (; it != theirs.end(); ++it) {
                    const auto& o = out.records[static_cast<std::size_t>(*it)];
                    if (o.qlo >= r.qhi) break;
                    if (o.qhi > r.qlo) overlaps.push_back(*it);
                }
                const auto idx = static_cast<std::size_t>(i);
                if (overlaps.empty()) {
                    out.classes[idx] = SideClass::Boundary;
                    continue;
                }
                std::int64_t covered = 0;
                for (int j : overlaps) {
                    const auto& o = out.records[static_cast<std::size_t>(j)];
                    covered += std::min(o.qhi, r.qhi) - std::max(o.qlo, r.qlo);
                }
                const std::int64_t len = r.qhi - r.qlo;
                if (overlaps.size() == 1) {
                    const auto& o = out.records[static_cast<std::size_t>(overlaps.front())];
                    if (o.qlo == r.qlo && o.qhi == r.qhi) {
                        out.classes[idx] = SideClass::Conforming;
                        continue;
                    }
                    if (o.qlo <= r.qlo && o.qhi >= r.qhi) {
                        const std::int64_t olen = o.qhi - o.qlo;
                        const bool half = olen == 2 * len && (o.qlo == r.qlo || o.qhi == r.qhi);
                        if (!half) {
                            throw SolverError("nonconforming interface with ratio other than 2:1 between leaves " +
                                              std::to_string(r.leaf) + " and " + std::to_string(o.leaf));
                        }
                        out.classes[idx] = SideClass::Fine;
                        out.coarse_partner[idx] = overlaps.front();
                        continue;
                    }
                }
                if (covered != len) {
                    throw SolverError("leaf " + std::to_string(r.leaf) +
                                      " has a side only partly covered by neighboring leaves");
                }
                // several smaller neighbors: this side is the coarse owner
                if (overlaps.size() != 2) {
                    throw SolverError("nonconforming interface with ratio other than 2:1 at leaf " +
                                      std::to_string(r.leaf));
                }
                for (int j : overlaps) {
                    const auto& o = out.records[static_cast<std::size_t>(j)];
                    if (2 * (o.qhi - o.qlo) != len) {
                        throw SolverError("nonconforming interface with ratio other than 2:1 at leaf " +
                                          std::to_string(r.leaf));
                    }
                }
                out.classes[idx] = SideClass::Coarse;
            }
        };
        classify(lo_side, hi_side);
        classify(hi_side, lo_side);
    }
    return out;
}

}  // namespace detail

/// Builds the global Gauss node array and all per-node index sets.
[[nodiscard]] inline GaussLayout enumerate_gauss_nodes(const DomainTree& tree, int q) {
    if (q < 1) throw std::invalid_argument("enumerate_gauss_nodes: q must be >= 1");
    GaussLayout lay;
    lay.q = q;
    lay.leaf_ids = tree.leaves();
    lay.leaf_ordinal.assign(tree.size(), -1);
    for (std::size_t i = 0; i < lay.leaf_ids.size(); ++i) {
        lay.leaf_ordinal[static_cast<std::size_t>(lay.leaf_ids[i])] = static_cast<int>(i);
    }
    const auto analysis = detail::analyze_sides(tree, lay.leaf_ids);

    std::map<detail::SegmentKey, int> seg_of_key;
    auto key_of = [](const detail::SideRecord& r) {
        return detail::SegmentKey{static_cast<int>(r.orientation), r.qline, r.qlo, r.qhi};
    };
    auto make_segment = [&](const detail::SideRecord& r, bool boundary) {
        const auto key = key_of(r);
        auto it = seg_of_key.find(key);
        if (it != seg_of_key.end()) return it->second;
        const int id = static_cast<int>(lay.segments.size());
        lay.segments.push_back(Segment{r.orientation, r.line, r.span, boundary, -1, {-1, -1}});
        seg_of_key.emplace(key, id);
        return id;
    };
    lay.leaf_sides.resize(lay.leaf_ids.size());
    for (std::size_t i = 0; i < analysis.records.size(); ++i) {
        const auto& r = analysis.records[i];
        const int seg = make_segment(r, analysis.classes[i] == detail::SideClass::Boundary);
        lay.leaf_sides[i / 4][i % 4] = seg;
    }
    for (std::size_t i = 0; i < analysis.records.size(); ++i) {
        if (analysis.classes[i] != detail::SideClass::Fine) continue;
        const int fine = lay.leaf_sides[i / 4][i % 4];
        const auto partner = static_cast<std::size_t>(analysis.coarse_partner[i]);
        const int coarse = lay.leaf_sides[partner / 4][partner % 4];
        auto& cs = lay.segments[static_cast<std::size_t>(coarse)];
        auto& fs = lay.segments[static_cast<std::size_t>(fine)];
        fs.coarse = coarse;
        const bool lower = std::abs(fs.span.lo - cs.span.lo) <= std::abs(fs.span.hi - cs.span.hi);
        cs.fine[lower ? 0 : 1] = fine;
    }

    lay.coordinates.resize(lay.segments.size() * static_cast<std::size_t>(q));
    for (std::size_t s = 0; s < lay.segments.size(); ++s) {
        const auto& seg = lay.segments[s];
        const auto g = gauss_nodes(q, seg.span);
        for (int k = 0; k < q; ++k) {
            const double t = g.nodes[static_cast<std::size_t>(k)];
            lay.coordinates[s * static_cast<std::size_t>(q) + static_cast<std::size_t>(k)] =
                seg.orientation == Orientation::Vertical ? Point{seg.line, t} : Point{t, seg.line};
        }
    }

    const std::size_t nn = tree.size();
    lay.exterior.assign(nn, {});
    lay.merged_exterior.assign(nn, {});
    lay.interface.assign(nn, {});
    lay.j1.assign(nn, {});
    lay.j2.assign(nn, {});
    lay.wraps.assign(nn, {});
    for (int id = static_cast<int>(nn) - 1; id >= 0; --id) {
        const auto uid = static_cast<std::size_t>(id);
        const auto& nd = tree.node(id);
        if (nd.is_leaf) {
            const auto& sides = lay.leaf_sides[static_cast<std::size_t>(lay.leaf_ordinal[uid])];
            lay.exterior[uid].assign(sides.begin(), sides.end());
            continue;
        }
        const auto& ea = lay.exterior[static_cast<std::size_t>(nd.children[0])];
        const auto& eb = lay.exterior[static_cast<std::size_t>(nd.children[1])];
        const std::unordered_set<int> in_b(eb.begin(), eb.end());
        std::unordered_set<int> shared;
        for (int s : ea) {
            if (in_b.count(s)) {
                lay.interface[uid].push_back(s);
                shared.insert(s);
            } else {
                lay.j1[uid].push_back(s);
            }
        }
        for (int s : eb) {
            if (!shared.count(s)) lay.j2[uid].push_back(s);
        }
        if (lay.interface[uid].empty()) {
            throw SolverError("children of box " + std::to_string(id) + " share no interface nodes");
        }
        auto& merged = lay.merged_exterior[uid];
        merged = lay.j1[uid];
        merged.insert(merged.end(), lay.j2[uid].begin(), lay.j2[uid].end());

        // wrap every fine pair whose two halves are both on this exterior
        const std::unordered_set<int> present(merged.begin(), merged.end());
        std::unordered_set<int> consumed;
        std::vector<int> wrapped_ext;
        for (int s : merged) {
            const auto& seg = lay.segments[static_cast<std::size_t>(s)];
            if (seg.coarse < 0) {
                wrapped_ext.push_back(s);
                continue;
            }
            if (consumed.count(s)) continue;
            const auto& cs = lay.segments[static_cast<std::size_t>(seg.coarse)];
            if (present.count(cs.fine[0]) && present.count(cs.fine[1])) {
                lay.wraps[uid].push_back(WrapPair{seg.coarse, cs.fine[0], cs.fine[1]});
                consumed.insert(cs.fine[0]);
                consumed.insert(cs.fine[1]);
                wrapped_ext.push_back(seg.coarse);
            } else {
                wrapped_ext.push_back(s);
            }
        }
        lay.exterior[uid] = std::move(wrapped_ext);
    }
    for (int s : lay.exterior[0]) {
        const auto& seg = lay.segments[static_cast<std::size_t>(s)];
        if (!seg.boundary) {
            throw SolverError("inconsistent tree: root exterior contains an interior interface segment");
        }
    }
    return lay;
}

/// Per-side classification of every rectangular box in the tree.
[[nodiscard]] inline std::vector<EdgeReport> classify_edges(const DomainTree& tree) {
    const auto leaves = tree.leaves();
    const auto analysis = detail::analyze_sides(tree, leaves);
    std::vector<int> ordinal(tree.size(), -1);
    for (std::size_t i = 0; i < leaves.size(); ++i) ordinal[static_cast<std::size_t>(leaves[i])] = static_cast<int>(i);

    // leaf side records touching each side of each box, gathered bottom-up
    std::vector<std::array<std::vector<int>, 4>> on_side(tree.size());
    for (int id = static_cast<int>(tree.size()) - 1; id >= 0; --id) {
        const auto& nd = tree.node(id);
        auto& mine = on_side[static_cast<std::size_t>(id)];
        if (nd.is_leaf) {
            for (int s = 0; s < 4; ++s) mine[static_cast<std::size_t>(s)] = {ordinal[static_cast<std::size_t>(id)] * 4 + s};
            continue;
        }
        for (int c : nd.children) {
            const auto& cb = tree.node(c).bounds;
            for (int s = 0; s < 4; ++s) {
                const bool on = (s == 0 && cb.x2.lo == nd.bounds.x2.lo) || (s == 1 && cb.x1.hi == nd.bounds.x1.hi) ||
                                (s == 2 && cb.x2.hi == nd.bounds.x2.hi) || (s == 3 && cb.x1.lo == nd.bounds.x1.lo);
                if (!on) continue;
                const auto& src = on_side[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)];
                mine[static_cast<std::size_t>(s)].insert(mine[static_cast<std::size_t>(s)].end(), src.begin(), src.end());
            }
        }
    }
    std::vector<EdgeReport> out;
    for (const auto& nd : tree.nodes()) {
        if (!nd.rectangular) continue;
        for (int s = 0; s < 4; ++s) {
            const auto& recs = on_side[static_cast<std::size_t>(nd.id)][static_cast<std::size_t>(s)];
            bool all_boundary = true;
            bool any_fine = false;
            bool any_coarse = false;
            for (int r : recs) {
                const auto c = analysis.classes[static_cast<std::size_t>(r)];
                all_boundary = all_boundary && c == detail::SideClass::Boundary;
                any_fine = any_fine || c == detail::SideClass::Fine;
                any_coarse = any_coarse || c == detail::SideClass::Coarse;
            }
            EdgeReport rep{nd.id, kSides[static_cast<std::size_t>(s)], EdgeKind::Conforming, any_fine};
            if (all_boundary) {
                rep.kind = EdgeKind::Boundary;
            } else if (any_fine || any_coarse) {
                rep.kind = EdgeKind::Nonconforming;
            }
            out.push_back(rep);
        }
    }
    return out;
}

/// Number of distinct Chebyshev collocation points over all leaves.
[[nodiscard]] inline std::size_t chebyshev_dof_count(const DomainTree& tree, int p) {
    const detail::Quantizer qz(tree.extent());
    struct PairHash {
        std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& v) const {
            return std::hash<std::int64_t>{}(v.first * 1000003 ^ v.second);
        }
    };
    std::unordered_set<std::pair<std::int64_t, std::int64_t>, PairHash> seen;
    for (int leaf : tree.leaves()) {
        const auto& b = tree.node(leaf).bounds;
        const auto cx = chebyshev_nodes(p, b.x1).nodes;
        const auto cy = chebyshev_nodes(p, b.x2).nodes;
        for (double y : cy) {
            for (double x : cx) seen.insert({qz.q1(x), qz.q2(y)});
        }
    }
    return seen.size();
}

}  // namespace hps
