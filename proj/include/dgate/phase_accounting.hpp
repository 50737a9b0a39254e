#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "core_dynamics.hpp"
#include "quadrature.hpp"

namespace dgate {

struct PhaseLedger {
    double phi_d = 0.0;
    double phi_g = 0.0;
    double phi_isol = 0.0;
    double phi_L = 0.0;
    double eta = 0.0;

    cplx phi_total() const { return {phi_isol + phi_L, eta}; }

    PhaseLedger& operator+=(const PhaseLedger& o) {
        phi_d += o.phi_d;
        phi_g += o.phi_g;
        phi_isol += o.phi_isol;
        phi_L += o.phi_L;
        eta += o.eta;
        return *this;
    }
    friend PhaseLedger operator+(PhaseLedger a, const PhaseLedger& b) { return a += b; }
};

struct DissipativeTerm {
    double phi_L;
    double eta;
};

namespace detail {

inline void need_zdot(const Path& p) {
    p.validate();
    require(p.has_zdot(), "phase integrals need zdot from the equation of motion");
}

inline void same_grid(const Path& a, const Path& b) {
    a.validate();
    b.validate();
    if (!(a.grid == b.grid)) throw InvalidInput("paths live on different time grids");
}

template <class F>
double integrate(const Path& p, F&& integrand) {
    std::vector<double> y(p.z.size());
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = integrand(k);
    return simpson(y, p.grid.h());
}

}  // namespace detail

// int Im(zdot z*) dt; the single-path piece that enters the isolated phase
inline double path_phase_integral(const Path& p) {
    detail::need_zdot(p);
    return detail::integrate(p, [&](std::size_t k) { return std::imag(p.zdot[k] * std::conj(p.z[k])); });
}

inline double dynamical_phase(const Path& p, const ModeParams& params) {
    detail::need_zdot(p);
    const double w = params.omega;
    return detail::integrate(p, [&](std::size_t k) {
        return 2.0 * std::imag(p.zdot[k] * std::conj(p.z[k])) - w * std::norm(p.z[k]);
    });
}

inline double geometric_phase(const Path& p, const ModeParams& params) {
    detail::need_zdot(p);
    const double w = params.omega;
    return detail::integrate(p, [&](std::size_t k) {
        return -std::imag(p.zdot[k] * std::conj(p.z[k])) + w * std::norm(p.z[k]);
    });
}

inline double isolated_phase(const Path& p0, const Path& p1) {
    detail::same_grid(p0, p1);
    return path_phase_integral(p0) - path_phase_integral(p1);
}

// Shoelace, closing edge z(T) -> z(0) included.
inline double enclosed_area(const Path& p) {
    p.validate();
    const auto& z = p.z;
    double a = 0.0;
    for (std::size_t k = 0; k + 1 < z.size(); ++k) a += std::imag(std::conj(z[k]) * z[k + 1]);
    a += std::imag(std::conj(z.back()) * z.front());
    return 0.5 * a;
}

// phi_L = 2 gamma int |z0||z1| sin(theta0 - theta1) dt, eta = gamma int |z1 - z0|^2 dt.
// |z0||z1| sin(arg(z0 z1*)) is just Im(z0 z1*), which also vanishes when either label is 0.
inline DissipativeTerm dissipative_term(const Path& p0, const Path& p1, double gamma) {
    detail::same_grid(p0, p1);
    require(std::isfinite(gamma) && gamma >= 0.0, "gamma must be non-negative");
    if (gamma == 0.0) return {0.0, 0.0};
    double phi = detail::integrate(p0, [&](std::size_t k) { return std::imag(p0.z[k] * std::conj(p1.z[k])); });
    double eta = detail::integrate(p0, [&](std::size_t k) { return std::norm(p1.z[k] - p0.z[k]); });
    return {2.0 * gamma * phi, gamma * std::max(eta, 0.0)};
}

inline PhaseLedger ledger(const Path& p0, const Path& p1, const ModeParams& params) {
    detail::same_grid(p0, p1);
    PhaseLedger L;
    L.phi_d = dynamical_phase(p0, params) - dynamical_phase(p1, params);
    L.phi_g = geometric_phase(p0, params) - geometric_phase(p1, params);
    L.phi_isol = L.phi_d + L.phi_g;
    auto x = dissipative_term(p0, p1, params.gamma);
    L.phi_L = x.phi_L;
    L.eta = x.eta;
    return L;
}

}  // namespace dgate
