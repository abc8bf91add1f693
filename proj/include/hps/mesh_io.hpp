#pragma once

// JSON form of mesh descriptions:
//
//   {"pieces": [{"domain": [x1_lo, x1_hi, x2_lo, x2_hi], "n": 4,
//                "refinements": [{"target": [x1, x2], "levels": 2, "threshold": 1.4142}]}],
//    "merges": [[0, 1], [3, 2]]}

#include "hps/tree.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>

namespace hps {

using Json = nlohmann::json;

[[nodiscard]] inline Json to_json(const Rect& r) { return Json::array({r.x1.lo, r.x1.hi, r.x2.lo, r.x2.hi}); }

[[nodiscard]] inline Rect rect_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 4) throw std::invalid_argument("rectangle must be [x1_lo, x1_hi, x2_lo, x2_hi]");
    return Rect{Interval(j[0].get<double>(), j[1].get<double>()), Interval(j[2].get<double>(), j[3].get<double>())};
}

[[nodiscard]] inline Point point_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("point must be [x1, x2]");
    return Point{j[0].get<double>(), j[1].get<double>()};
}

[[nodiscard]] inline Json to_json(const RefinementSpec& r) {
    return Json{{"target", {r.target.x1, r.target.x2}}, {"levels", r.levels}, {"threshold", r.threshold}};
}

[[nodiscard]] inline RefinementSpec refinement_from_json(const Json& j) {
    RefinementSpec r;
    r.target = point_from_json(j.at("target"));
    r.levels = j.value("levels", 0);
    r.threshold = j.value("threshold", r.threshold);
    if (r.levels < 0) throw std::invalid_argument("refinement levels must be >= 0");
    return r;
}

[[nodiscard]] inline Json to_json(const MeshDescription& m) {
    Json pieces = Json::array();
    for (const auto& p : m.pieces) {
        Json refs = Json::array();
        for (const auto& r : p.refinements) refs.push_back(to_json(r));
        pieces.push_back(Json{{"domain", to_json(p.domain)}, {"n", p.n}, {"refinements", refs}});
    }
    Json merges = Json::array();
    for (const auto& [a, b] : m.merges) merges.push_back({a, b});
    return Json{{"pieces", pieces}, {"merges", merges}};
}

[[nodiscard]] inline MeshDescription mesh_from_json(const Json& j) {
    MeshDescription m;
    for (const auto& pj : j.at("pieces")) {
        RectanglePiece piece;
        piece.domain = rect_from_json(pj.at("domain"));
        piece.n = pj.value("n", 1);
        if (pj.contains("refinements")) {
            for (const auto& rj : pj.at("refinements")) piece.refinements.push_back(refinement_from_json(rj));
        }
        m.pieces.push_back(std::move(piece));
    }
    if (j.contains("merges")) {
        for (const auto& mj : j.at("merges")) {
            if (!mj.is_array() || mj.size() != 2) throw std::invalid_argument("merge entries must be [a, b]");
            m.merges.emplace_back(mj[0].get<int>(), mj[1].get<int>());
        }
    }
    return m;
}

[[nodiscard]] inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    try {
        return Json::parse(in, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw std::runtime_error("'" + path + "': " + e.what());
    }
}

}  // namespace hps
