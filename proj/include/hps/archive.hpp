#pragma once

// Binary operator archive.
//
//   file    := magic[8] version:u32 section*
//   section := tag:u32 length:u64 payload[length] crc32(payload):u32
//
// All integers and doubles are little-endian. Sections: HEAD, SPEC, TREE, ORDR,
// LEAF (stored mode only), PRNT, ROOT, END.

#include "hps/timestepper.hpp"

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

namespace hps {

class ArchiveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr char kArchiveMagic[8] = {'H', 'P', 'S', 'O', 'P', 'S', '\0', '\x1a'};
inline constexpr std::uint32_t kArchiveVersion = 1;

namespace archive_detail {

constexpr std::uint32_t tag(const char (&s)[5]) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(s[0])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[3])) << 24;
}

inline constexpr std::uint32_t kHead = tag("HEAD");
inline constexpr std::uint32_t kSpec = tag("SPEC");
inline constexpr std::uint32_t kTree = tag("TREE");
inline constexpr std::uint32_t kOrder = tag("ORDR");
inline constexpr std::uint32_t kLeaf = tag("LEAF");
inline constexpr std::uint32_t kParent = tag("PRNT");
inline constexpr std::uint32_t kRoot = tag("ROOT");
inline constexpr std::uint32_t kEnd = tag("END ");

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        buf_.append(s);
    }
    void matrix(const Matrix& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        const double* d = m.data();
        for (Index i = 0; i < m.size(); ++i) f64(d[i]);
    }
    void ints(const std::vector<int>& v) {
        u64(v.size());
        for (int x : v) i32(x);
    }
    void raw(const std::string& s) { buf_.append(s); }
    [[nodiscard]] const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(*take(1)); }
    std::uint32_t u32() {
        const auto* p = reinterpret_cast<const unsigned char*>(take(4));
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        const auto* p = reinterpret_cast<const unsigned char*>(take(8));
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::string bytes(std::size_t n) { return std::string(take(n), n); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint64_t n = count(1);
        return std::string(take(n), n);
    }
    Matrix matrix() {
        const std::uint64_t r = u64();
        const std::uint64_t c = u64();
        if (c != 0 && r > (size_ - pos_) / 8 / c) throw ArchiveError("archive matrix exceeds section size");
        Matrix m(static_cast<Index>(r), static_cast<Index>(c));
        double* d = m.data();
        for (Index i = 0; i < m.size(); ++i) d[i] = f64();
        return m;
    }
    std::vector<int> ints() {
        const std::uint64_t n = count(4);
        std::vector<int> v(n);
        for (auto& x : v) x = i32();
        return v;
    }
    [[nodiscard]] bool done() const { return pos_ == size_; }

private:
    std::uint64_t count(std::size_t elem) {
        const std::uint64_t n = u64();
        if (n > (size_ - pos_) / elem) throw ArchiveError("archive length field exceeds section size");
        return n;
    }
    const char* take(std::size_t n) {
        if (n > size_ - pos_) throw ArchiveError("archive section is truncated");
        const char* p = data_ + pos_;
        pos_ += n;
        return p;
    }
    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

inline std::uint32_t checksum(const std::string& s) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

inline void section(Writer& file, std::uint32_t t, const Writer& payload) {
    file.u32(t);
    file.u64(payload.bytes().size());
    file.raw(payload.bytes());
    file.u32(checksum(payload.bytes()));
}

}  // namespace archive_detail

/// Resolves a spec by name: catalog entries and "cn:<entry>" implicit-step operators.
[[nodiscard]] inline ProblemSpec resolve_spec(const std::string& name, const ParameterSet& params) {
    if (name.rfind("cn:", 0) == 0) {
        auto it = params.find("k");
        if (it == params.end()) throw ArchiveError("archived spec '" + name + "' lacks its step size");
        return cn_elliptic_spec(parabolic_from_catalog(name.substr(3), params), it->second);
    }
    ProblemSpec spec = catalog(name, params);
    spec.params = params;
    return spec;
}

struct ArchiveAccess {
    static void write(const FactorizedSolver& s, const std::string& path) {
        using namespace archive_detail;
        Writer file;
        for (char c : kArchiveMagic) file.u8(static_cast<std::uint8_t>(c));
        file.u32(kArchiveVersion);

        Writer head;
        head.u8(static_cast<std::uint8_t>(s.mode_));
        head.i32(s.p_);
        head.i32(s.q_);
        head.f64(s.build_seconds_);
        section(file, kHead, head);

        Writer spec;
        spec.str(s.spec_.name);
        spec.u64(s.spec_.params.size());
        for (const auto& [k, v] : s.spec_.params) {
            spec.str(k);
            spec.f64(v);
        }
        section(file, kSpec, spec);

        Writer tree;
        const auto& pieces = s.tree_.pieces();
        tree.u64(pieces.size());
        for (const auto& r : pieces) {
            tree.f64(r.x1.lo);
            tree.f64(r.x1.hi);
            tree.f64(r.x2.lo);
            tree.f64(r.x2.hi);
        }
        tree.u64(s.tree_.size());
        for (const auto& n : s.tree_.nodes()) {
            tree.i32(n.id);
            tree.f64(n.bounds.x1.lo);
            tree.f64(n.bounds.x1.hi);
            tree.f64(n.bounds.x2.lo);
            tree.f64(n.bounds.x2.hi);
            tree.f64(n.area);
            tree.i32(n.parent.value_or(-1));
            tree.ints(n.children);
            tree.i32(n.level);
            tree.u8(n.is_leaf ? 1 : 0);
            tree.u8(n.rectangular ? 1 : 0);
        }
        section(file, kTree, tree);

        Writer order;
        order.ints(s.order_);
        section(file, kOrder, order);

        if (s.mode_ == OperatorMode::Stored) {
            Writer leaf;
            leaf.u64(s.leaves_.size());
            for (const auto& l : s.leaves_) {
                leaf.matrix(l.s);
                leaf.matrix(l.f_interior);
                leaf.matrix(l.h);
            }
            section(file, kLeaf, leaf);
        }

        Writer parent;
        parent.u64(s.parents_.size());
        for (const auto& p : s.parents_) {
            parent.u8(p ? 1 : 0);
            if (!p) continue;
            parent.matrix(p->x.factors());
            parent.ints(p->x.permutation());
            parent.f64(p->x.rcond());
            parent.matrix(p->s);
            parent.matrix(p->t_ext_int);
            parent.u64(p->wrap.size());
            for (const auto& w : p->wrap) {
                parent.i32(w[0]);
                parent.i32(w[1]);
            }
        }
        section(file, kParent, parent);

        Writer root;
        root.matrix(s.root_t_);
        section(file, kRoot, root);
        section(file, kEnd, Writer{});

        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw ArchiveError("cannot open '" + path + "' for writing");
        out.write(file.bytes().data(), static_cast<std::streamsize>(file.bytes().size()));
        if (!out) throw ArchiveError("failed writing '" + path + "'");
    }

    static FactorizedSolver read(const std::string& path, const std::optional<ProblemSpec>& spec_override) {
        using namespace archive_detail;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ArchiveError("cannot open '" + path + "'");
        const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        Reader file(bytes.data(), bytes.size());
        try {
            for (char c : kArchiveMagic) {
                if (static_cast<char>(file.u8()) != c) throw ArchiveError("not an operator archive");
            }
        } catch (const ArchiveError&) {
            throw ArchiveError("'" + path + "' is not an operator archive");
        }
        const std::uint32_t version = file.u32();
        if (version != kArchiveVersion) {
            throw ArchiveError("unsupported archive version " + std::to_string(version));
        }

        std::vector<std::pair<std::uint32_t, std::string>> sections;
        for (;;) {
            std::uint32_t t = 0;
            std::uint64_t len = 0;
            std::string payload;
            try {
                t = file.u32();
                len = file.u64();
                if (len > bytes.size()) throw ArchiveError("truncated");
                payload = file.bytes(len);
                const std::uint32_t crc = file.u32();
                if (crc != checksum(payload)) throw ArchiveError("checksum mismatch in archive section");
            } catch (const ArchiveError& e) {
                const std::string what = e.what();
                if (what.find("checksum") != std::string::npos) throw;
                throw ArchiveError("archive is truncated (checksum of the final section cannot be verified)");
            }
            if (t == kEnd) break;
            sections.emplace_back(t, std::move(payload));
        }
        auto find = [&](std::uint32_t t) -> const std::string* {
            for (const auto& [k, v] : sections) {
                if (k == t) return &v;
            }
            return nullptr;
        };
        auto need = [&](std::uint32_t t, const char* name) -> const std::string& {
            const std::string* s = find(t);
            if (!s) throw ArchiveError(std::string("archive lacks the ") + name + " section");
            return *s;
        };

        FactorizedSolver s;
        {
            const auto& h = need(kHead, "HEAD");
            Reader r(h.data(), h.size());
            const std::uint8_t mode = r.u8();
            if (mode > 1) throw ArchiveError("unknown operator mode in archive");
            s.mode_ = static_cast<OperatorMode>(mode);
            s.p_ = r.i32();
            s.q_ = r.i32();
            s.build_seconds_ = r.f64();
        }
        {
            const auto& h = need(kSpec, "SPEC");
            Reader r(h.data(), h.size());
            const std::string name = r.str();
            ParameterSet params;
            const std::uint64_t np = r.u64();
            for (std::uint64_t i = 0; i < np; ++i) {
                std::string k = r.str();
                params[k] = r.f64();
            }
            if (spec_override) {
                s.spec_ = *spec_override;
            } else {
                try {
                    s.spec_ = resolve_spec(name, params);
                } catch (const std::invalid_argument& e) {
                    throw ArchiveError("cannot reconstruct problem '" + name + "': " + e.what());
                }
            }
        }
        {
            const auto& h = need(kTree, "TREE");
            Reader r(h.data(), h.size());
            std::vector<Rect> pieces(r.u64());
            for (auto& rc : pieces) {
                const double a = r.f64(), b = r.f64(), c = r.f64(), d = r.f64();
                rc = Rect{Interval(a, b), Interval(c, d)};
            }
            const std::uint64_t nn = r.u64();
            if (nn > h.size()) throw ArchiveError("corrupt tree section");
            std::vector<BoxNode> nodes(nn);
            for (auto& n : nodes) {
                n.id = r.i32();
                const double a = r.f64(), b = r.f64(), c = r.f64(), d = r.f64();
                n.bounds = Rect{Interval(a, b), Interval(c, d)};
                n.area = r.f64();
                const int parent = r.i32();
                if (parent >= 0) n.parent = parent;
                n.children = r.ints();
                n.level = r.i32();
                n.is_leaf = r.u8() != 0;
                n.rectangular = r.u8() != 0;
            }
            s.tree_ = DomainTree::from_nodes(std::move(nodes), std::move(pieces));
        }
        {
            const auto& h = need(kOrder, "ORDR");
            Reader r(h.data(), h.size());
            s.order_ = r.ints();
            validate_build_order(s.tree_, s.order_);
        }
        s.layout_ = enumerate_gauss_nodes(s.tree_, s.q_);
        s.finalize_structure();
        if (s.mode_ == OperatorMode::Stored) {
            const auto& h = need(kLeaf, "LEAF");
            Reader r(h.data(), h.size());
            s.leaves_.resize(r.u64());
            if (s.leaves_.size() != s.layout_.leaf_ids.size()) throw ArchiveError("leaf count does not match the tree");
            for (auto& l : s.leaves_) {
                l.s = r.matrix();
                l.f_interior = r.matrix();
                l.h = r.matrix();
            }
        } else if (find(kLeaf)) {
            throw ArchiveError("economy archive unexpectedly contains leaf operators");
        }
        {
            const auto& h = need(kParent, "PRNT");
            Reader r(h.data(), h.size());
            s.parents_.assign(r.u64(), std::nullopt);
            if (s.parents_.size() != s.tree_.size()) throw ArchiveError("parent table does not match the tree");
            for (std::size_t i = 0; i < s.parents_.size(); ++i) {
                if (!r.u8()) continue;
                ParentOperators p;
                Matrix f = r.matrix();
                std::vector<int> perm = r.ints();
                const double rc = r.f64();
                p.x = DenseLu(std::move(f), std::move(perm), rc);
                p.s = r.matrix();
                p.t_ext_int = r.matrix();
                p.wrap.resize(r.u64());
                for (auto& w : p.wrap) {
                    w[0] = r.i32();
                    w[1] = r.i32();
                }
                s.parents_[i] = std::move(p);
            }
        }
        {
            const auto& h = need(kRoot, "ROOT");
            Reader r(h.data(), h.size());
            s.root_t_ = r.matrix();
        }
        if (s.mode_ == OperatorMode::Econ) {
            GeometryKitCache cache(s.p_, s.q_);
            for (int leaf : s.layout_.leaf_ids) {
                const Rect& b = s.tree_.node(leaf).bounds;
                const std::pair<double, double> key{b.width(), b.height()};
                if (!s.kits_.count(key)) s.kits_.emplace(key, cache.get(b));
            }
        }
        return s;
    }
};

inline void persist_operators(const FactorizedSolver& solver, const std::string& path) {
    ArchiveAccess::write(solver, path);
}

/// Loads an archive. The problem is rebuilt from its archived name and parameters
/// unless an explicit spec is supplied.
[[nodiscard]] inline FactorizedSolver load_operators(const std::string& path,
                                                     const std::optional<ProblemSpec>& spec = std::nullopt) {
    return ArchiveAccess::read(path, spec);
}

}  // namespace hps
