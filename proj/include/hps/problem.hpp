#pragma once

// Elliptic operator coefficients, loads, boundary data and the problem catalog.
//
//   [Au](x) = -c11 u_11 - 2 c12 u_12 - c22 u_22 + c1 u_1 + c2 u_2 + c u

#include "hps/spectral.hpp"

#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hps {

using ScalarField = std::function<double(Point)>;
using BoundaryField = std::function<double(Point, double)>;

struct CoefficientField {
    ScalarField c11 = [](Point) { return 1.0; };
    ScalarField c12 = [](Point) { return 0.0; };
    ScalarField c22 = [](Point) { return 1.0; };
    ScalarField c1 = [](Point) { return 0.0; };
    ScalarField c2 = [](Point) { return 0.0; };
    ScalarField c = [](Point) { return 0.0; };
};

/// Closed-form solution with the derivatives needed to manufacture loads.
struct ManufacturedSolution {
    std::function<double(Point, double)> value;
    std::function<double(Point, double)> d1;
    std::function<double(Point, double)> d2;
    std::function<double(Point, double)> d11;
    std::function<double(Point, double)> d12;
    std::function<double(Point, double)> d22;
};

using ParameterSet = std::map<std::string, double>;

struct ProblemSpec {
    std::string name;
    ParameterSet params;
    CoefficientField coefficients;
    ScalarField body_load = [](Point) { return 0.0; };
    BoundaryField dirichlet = [](Point, double) { return 0.0; };
    /// Exact solution when one is known (manufactured entries).
    std::optional<std::function<double(Point, double)>> exact;
};

struct LeafMatrix {
    Matrix a;
    Matrix a_ci_ci;
    Matrix a_ci_ce;
};

/// Collocation matrix of the operator on one leaf, plus its interior partitions.
[[nodiscard]] inline LeafMatrix assemble_leaf_matrix(const CoefficientField& cf, const LeafStencil& st,
                                                     const TensorDiffMatrices& d) {
    const auto n = static_cast<Index>(st.cheb2d.size());
    if (d.d1.rows() != n) throw std::invalid_argument("assemble_leaf_matrix: stencil/differentiation mismatch");
    Vector c11(n), c12(n), c22(n), c1(n), c2(n), c0(n);
    for (Index k = 0; k < n; ++k) {
        const Point x = st.cheb2d[static_cast<std::size_t>(k)];
        c11(k) = cf.c11(x);
        c12(k) = cf.c12(x);
        c22(k) = cf.c22(x);
        c1(k) = cf.c1(x);
        c2(k) = cf.c2(x);
        c0(k) = cf.c(x);
    }
    for (const Vector* v : {&c11, &c12, &c22, &c1, &c2, &c0}) {
        if (!v->allFinite()) throw SolverError("assemble_leaf_matrix: non-finite coefficient value");
    }
    LeafMatrix out;
    out.a = -(c11.asDiagonal() * d.d11) - 2.0 * (c12.asDiagonal() * d.d12) - c22.asDiagonal() * d.d22 +
            c1.asDiagonal() * d.d1 + c2.asDiagonal() * d.d2;
    out.a.diagonal() += c0;
    out.a_ci_ci = out.a(st.interior, st.interior);
    out.a_ci_ce = out.a(st.interior, st.exterior);
    return out;
}

/// Ellipticity probe at sample points; prints a warning, never throws.
inline bool check_ellipticity(const CoefficientField& cf, const std::vector<Point>& samples,
                              std::ostream* warn = &std::cerr) {
    for (const Point& x : samples) {
        const double a = cf.c11(x);
        const double b = cf.c12(x);
        const double c = cf.c22(x);
        if (!(a > 0.0 && c > 0.0 && a * c - b * b > 0.0)) {
            if (warn) *warn << "warning: operator is not elliptic at (" << x.x1 << ", " << x.x2 << ")\n";
            return false;
        }
    }
    return true;
}

/// Operator applied to a manufactured solution, giving the matching body load.
[[nodiscard]] inline ScalarField manufactured_load(const CoefficientField& cf, const ManufacturedSolution& u,
                                                   double t = 0.0) {
    return [cf, u, t](Point x) {
        return -cf.c11(x) * u.d11(x, t) - 2.0 * cf.c12(x) * u.d12(x, t) - cf.c22(x) * u.d22(x, t) +
               cf.c1(x) * u.d1(x, t) + cf.c2(x) * u.d2(x, t) + cf.c(x) * u.value(x, t);
    };
}

[[nodiscard]] inline ProblemSpec make_manufactured(std::string name, CoefficientField cf, ManufacturedSolution u,
                                                   ParameterSet params = {}) {
    ProblemSpec spec;
    spec.name = std::move(name);
    spec.params = std::move(params);
    spec.body_load = manufactured_load(cf, u);
    spec.coefficients = std::move(cf);
    spec.dirichlet = u.value;
    spec.exact = u.value;
    return spec;
}

namespace catalog_detail {

inline double param(const ParameterSet& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

inline double require(const ParameterSet& p, const std::string& key, const std::string& entry) {
    auto it = p.find(key);
    if (it == p.end()) throw std::invalid_argument("catalog entry '" + entry + "' needs parameter '" + key + "'");
    return it->second;
}

inline double gaussian(Point x, Point c, double alpha) {
    const double dx = x.x1 - c.x1;
    const double dy = x.x2 - c.x2;
    return std::exp(-alpha * (dx * dx + dy * dy));
}

inline CoefficientField laplacian() { return CoefficientField{}; }

}  // namespace catalog_detail

/// Scattering potential sum of two Gaussians used by the variable coefficient Helmholtz entry.
[[nodiscard]] inline double scattering_potential(Point x, const ParameterSet& p) {
    using catalog_detail::param;
    const Point c2{param(p, "x2_1", 7.0 / 20.0), param(p, "x2_2", 6.0 / 10.0)};
    const Point c3{param(p, "x3_1", 6.0 / 10.0), param(p, "x3_2", 9.0 / 20.0)};
    return 0.5 * catalog_detail::gaussian(x, c2, param(p, "alpha2", 200.0)) +
           0.5 * catalog_detail::gaussian(x, c3, param(p, "alpha3", 200.0));
}

/// Harmonic corner solution r^(2/3) sin(2 theta/3) for the L-shaped domain
/// [0,2]^2 minus (1,2]^2, vanishing on both edges of the notch at (1,1).
[[nodiscard]] inline double lshape_corner_solution(Point x) {
    const double dx = x.x1 - 1.0;
    const double dy = x.x2 - 1.0;
    const double r = std::hypot(dx, dy);
    if (r == 0.0) return 0.0;
    // angle measured from the notch edge x1 = 1, x2 > 1; the domain is [0, 3pi/2]
    double theta = std::atan2(dy, dx) - std::numbers::pi / 2.0;
    if (theta < 0.0) theta += 2.0 * std::numbers::pi;
    return std::pow(r, 2.0 / 3.0) * std::sin(2.0 * theta / 3.0);
}

[[nodiscard]] inline std::vector<std::string> catalog_names() {
    return {"laplace",
            "helmholtz",
            "varcoef_helmholtz",
            "concentrated_helmholtz",
            "indicator_poisson",
            "convection_diffusion",
            "poisson_sine",
            "poisson_polynomial",
            "harmonic_quadratic",
            "linear_x1",
            "lshape_corner",
            "heat_sine",
            "convection_diffusion_wave"};
}

/// Fixed problem catalog. Unknown names and missing required parameters throw.
[[nodiscard]] inline ProblemSpec catalog(const std::string& name, const ParameterSet& params = {}) {
    using namespace catalog_detail;
    const double pi = std::numbers::pi;
    ProblemSpec spec;
    spec.name = name;
    spec.params = params;
    if (name == "laplace") {
        return spec;
    }
    if (name == "helmholtz") {
        const double kappa = require(params, "kappa", name);
        spec.coefficients.c = [kappa](Point) { return -kappa * kappa; };
        return spec;
    }
    if (name == "varcoef_helmholtz") {
        // -Lap u - kappa^2 (1 - b(x)) u = g, b a sum of two Gaussians
        const double kappa = param(params, "kappa", 40.0);
        const double alpha = param(params, "alpha", 300.0);
        const Point center{param(params, "center_1", 0.25), param(params, "center_2", 0.75)};
        spec.params.try_emplace("kappa", kappa);
        spec.params.try_emplace("alpha", alpha);
        const ParameterSet p = spec.params;
        spec.coefficients.c = [kappa, p](Point x) { return -kappa * kappa * (1.0 - scattering_potential(x, p)); };
        spec.body_load = [center, alpha](Point x) { return gaussian(x, center, alpha); };
        return spec;
    }
    if (name == "concentrated_helmholtz") {
        const double kappa = param(params, "kappa", 20.0);
        const double alpha = param(params, "alpha", 3000.0);
        const Point center{param(params, "center_1", 0.5), param(params, "center_2", 0.5)};
        spec.params.try_emplace("kappa", kappa);
        spec.params.try_emplace("alpha", alpha);
        spec.coefficients.c = [kappa](Point) { return -kappa * kappa; };
        spec.body_load = [center, alpha](Point x) { return gaussian(x, center, alpha); };
        return spec;
    }
    if (name == "indicator_poisson") {
        spec.body_load = [](Point x) {
            return (x.x1 >= 0.25 && x.x1 <= 0.5 && x.x2 >= 0.25 && x.x2 <= 0.5) ? 1.0 : 0.0;
        };
        return spec;
    }
    if (name == "convection_diffusion") {
        // Spatial operator L = eps Lap - d/dx1 stored with the same coefficient layout
        // (c11 = c22 = -eps, c1 = -1); consumed by cn_elliptic_spec.
        const double eps = param(params, "epsilon", 1.0 / 200.0);
        const double alpha = param(params, "alpha", 50.0);
        const Point center{param(params, "center_1", 0.25), param(params, "center_2", 0.25)};
        spec.params.try_emplace("epsilon", eps);
        spec.params.try_emplace("alpha", alpha);
        spec.coefficients.c11 = [eps](Point) { return -eps; };
        spec.coefficients.c22 = [eps](Point) { return -eps; };
        spec.coefficients.c1 = [](Point) { return -1.0; };
        spec.exact.reset();
        spec.dirichlet = [](Point, double) { return 0.0; };
        spec.body_load = [](Point) { return 0.0; };
        spec.params.try_emplace("center_1", center.x1);
        spec.params.try_emplace("center_2", center.x2);
        return spec;
    }
    if (name == "poisson_sine") {
        ManufacturedSolution u;
        u.value = [pi](Point x, double) { return std::sin(pi * x.x1) * std::sin(pi * x.x2); };
        u.d1 = [pi](Point x, double) { return pi * std::cos(pi * x.x1) * std::sin(pi * x.x2); };
        u.d2 = [pi](Point x, double) { return pi * std::sin(pi * x.x1) * std::cos(pi * x.x2); };
        u.d11 = [pi](Point x, double) { return -pi * pi * std::sin(pi * x.x1) * std::sin(pi * x.x2); };
        u.d12 = [pi](Point x, double) { return pi * pi * std::cos(pi * x.x1) * std::cos(pi * x.x2); };
        u.d22 = u.d11;
        return make_manufactured(name, laplacian(), u, params);
    }
    if (name == "poisson_polynomial") {
        // u = (x1^d + 1)(x2^d - x2 + 2) with per-variable degree d
        const int d = static_cast<int>(require(params, "degree", name));
        if (d < 2) throw std::invalid_argument("poisson_polynomial: degree must be >= 2");
        const double dd = d;
        auto px = [d](double s) { return std::pow(s, d) + 1.0; };
        auto dpx = [d, dd](double s) { return dd * std::pow(s, d - 1); };
        auto ddpx = [d, dd](double s) { return dd * (dd - 1.0) * std::pow(s, d - 2); };
        auto py = [d](double s) { return std::pow(s, d) - s + 2.0; };
        auto dpy = [d, dd](double s) { return dd * std::pow(s, d - 1) - 1.0; };
        ManufacturedSolution u;
        u.value = [=](Point x, double) { return px(x.x1) * py(x.x2); };
        u.d1 = [=](Point x, double) { return dpx(x.x1) * py(x.x2); };
        u.d2 = [=](Point x, double) { return px(x.x1) * dpy(x.x2); };
        u.d11 = [=](Point x, double) { return ddpx(x.x1) * py(x.x2); };
        u.d12 = [=](Point x, double) { return dpx(x.x1) * dpy(x.x2); };
        u.d22 = [=](Point x, double) { return px(x.x1) * ddpx(x.x2); };
        return make_manufactured(name, laplacian(), u, params);
    }
    if (name == "harmonic_quadratic") {
        ManufacturedSolution u;
        u.value = [](Point x, double) { return x.x1 * x.x1 - x.x2 * x.x2; };
        u.d1 = [](Point x, double) { return 2.0 * x.x1; };
        u.d2 = [](Point x, double) { return -2.0 * x.x2; };
        u.d11 = [](Point, double) { return 2.0; };
        u.d12 = [](Point, double) { return 0.0; };
        u.d22 = [](Point, double) { return -2.0; };
        return make_manufactured(name, laplacian(), u, params);
    }
    if (name == "linear_x1") {
        ManufacturedSolution u;
        u.value = [](Point x, double) { return x.x1; };
        u.d1 = [](Point, double) { return 1.0; };
        u.d2 = [](Point, double) { return 0.0; };
        u.d11 = u.d12 = u.d22 = [](Point, double) { return 0.0; };
        return make_manufactured(name, laplacian(), u, params);
    }
    if (name == "lshape_corner") {
        spec.dirichlet = [](Point x, double) { return lshape_corner_solution(x); };
        spec.exact = [](Point x, double) { return lshape_corner_solution(x); };
        return spec;
    }
    if (name == "heat_sine") {
        // u_t = Lap u, u = exp(-2 pi^2 t) sin(pi x1) sin(pi x2); L = Lap stored as c11 = c22 = -1
        spec.coefficients.c11 = [](Point) { return -1.0; };
        spec.coefficients.c22 = [](Point) { return -1.0; };
        spec.exact = [pi](Point x, double t) {
            return std::exp(-2.0 * pi * pi * t) * std::sin(pi * x.x1) * std::sin(pi * x.x2);
        };
        spec.dirichlet = *spec.exact;
        return spec;
    }
    if (name == "convection_diffusion_wave") {
        // u_t = eps Lap u - u_1 with u = exp(-2 eps pi^2 t) sin(pi (x1 - t)) sin(pi x2)
        const double eps = param(params, "epsilon", 1.0 / 200.0);
        spec.params.try_emplace("epsilon", eps);
        spec.coefficients.c11 = [eps](Point) { return -eps; };
        spec.coefficients.c22 = [eps](Point) { return -eps; };
        spec.coefficients.c1 = [](Point) { return -1.0; };
        spec.exact = [eps, pi](Point x, double t) {
            return std::exp(-2.0 * eps * pi * pi * t) * std::sin(pi * (x.x1 - t)) * std::sin(pi * x.x2);
        };
        spec.dirichlet = *spec.exact;
        return spec;
    }
    throw std::invalid_argument("unknown catalog entry '" + name + "'");
}

/// Initial condition for the time-dependent catalog entries.
[[nodiscard]] inline ScalarField initial_condition(const ProblemSpec& spec) {
    if (spec.exact) {
        auto u = *spec.exact;
        return [u](Point x) { return u(x, 0.0); };
    }
    if (spec.name == "convection_diffusion") {
        const Point c{spec.params.at("center_1"), spec.params.at("center_2")};
        const double alpha = spec.params.at("alpha");
        return [c, alpha](Point x) { return catalog_detail::gaussian(x, c, alpha); };
    }
    return [](Point) { return 0.0; };
}

/// Tabulates Dirichlet data, rejecting points further than tol * width from the boundary.
template <typename BoundaryDistance>
[[nodiscard]] Vector evaluate_boundary(const ProblemSpec& spec, std::span<const Point> points,
                                       BoundaryDistance&& distance, double width, double t = 0.0) {
    Vector out(static_cast<Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Point x = points[i];
        if (distance(x) > 1e-12 * width) {
            throw std::invalid_argument("evaluate_boundary: point (" + std::to_string(x.x1) + ", " +
                                        std::to_string(x.x2) + ") is not on the domain boundary");
        }
        out(static_cast<Index>(i)) = spec.dirichlet(x, t);
    }
    return out;
}

}  // namespace hps
