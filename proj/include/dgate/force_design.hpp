#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "core_dynamics.hpp"
#include "phase_accounting.hpp"
#include "quadrature.hpp"

namespace dgate {

struct ConstraintSet {
    std::vector<std::string> names;
    std::vector<std::function<double(double)>> fns;

    std::size_t size() const { return fns.size(); }

    void add(std::string name, std::function<double(double)> f) {
        names.push_back(std::move(name));
        fns.push_back(std::move(f));
    }

    // e^{gamma t} sin(w t), e^{gamma t} cos(w t) for each listed frequency, plus the offset 1.
    static ConstraintSet for_modes(const std::vector<double>& omegas, double gamma, bool offset = true) {
        ConstraintSet c;
        for (double w : omegas) {
            c.add("exp*sin", [w, gamma](double t) { return std::exp(gamma * t) * std::sin(w * t); });
            c.add("exp*cos", [w, gamma](double t) { return std::exp(gamma * t) * std::cos(w * t); });
        }
        if (offset) c.add("1", [](double) { return 1.0; });
        return c;
    }
    static ConstraintSet single_mode(double omega, double gamma, bool offset = true) {
        return for_modes({omega}, gamma, offset);
    }
    static ConstraintSet two_mode(double omega_plus, double omega_minus, double gamma, bool offset = true) {
        return for_modes({omega_plus, omega_minus}, gamma, offset);
    }
};

// <g, h> = int_0^T g h dt by composite Simpson on `grid`.
struct InnerProductRule {
    TimeGrid grid;

    double operator()(const std::vector<double>& g, const std::vector<double>& h) const {
        require(g.size() == grid.size() && h.size() == grid.size(), "inner product: sample count mismatch");
        std::vector<double> y(g.size());
        for (std::size_t k = 0; k < y.size(); ++k) y[k] = g[k] * h[k];
        return simpson(y, grid.h());
    }
    std::vector<double> sample(const std::function<double(double)>& f) const {
        std::vector<double> v(grid.size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(grid.t(k));
        return v;
    }
};

struct GramSchmidtOptions {
    double condition_limit = 1e12;
    double degenerate_tol = 1e-8;  // residual norm relative to seed norm
};

inline double gram_condition(const ConstraintSet& c, const InnerProductRule& rule) {
    const std::size_t n = c.size();
    std::vector<std::vector<double>> s;
    for (auto& f : c.fns) s.push_back(rule.sample(f));
    Eigen::MatrixXd G(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) G(i, j) = G(j, i) = rule(s[i], s[j]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

// Seed minus its L2 projection onto span(constraints). The constraints are orthonormalized by
// modified Gram-Schmidt (two passes); the result is kept analytic: seed(t) - sum_j beta_j c_j(t).
inline ForceProfile gram_schmidt_force(const ForceProfile& seed, const ConstraintSet& constraints,
                                       const InnerProductRule& rule, const GramSchmidtOptions& opt = {}) {
    rule.grid.validate();
    const std::size_t n = constraints.size();
    if (n == 0) return seed;
    double cond = gram_condition(constraints, rule);
    if (!(cond <= opt.condition_limit))
        throw ConditioningError("constraint Gram matrix is ill-conditioned (cond = " + std::to_string(cond) + ")");

    const std::size_t m = rule.grid.size();
    std::vector<std::vector<double>> q;  // orthonormal samples
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);  // q_i = sum_j M(i,j) c_j
    for (std::size_t i = 0; i < n; ++i) {
        auto v = rule.sample(constraints.fns[i]);
        Eigen::VectorXd coef = Eigen::VectorXd::Zero(n);
        coef(i) = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < q.size(); ++j) {
                double a = rule(q[j], v);
                for (std::size_t k = 0; k < m; ++k) v[k] -= a * q[j][k];
                coef -= a * M.row(j).transpose();
            }
        }
        double nv = std::sqrt(std::max(rule(v, v), 0.0));
        if (!(nv > 0.0)) throw ConditioningError("constraint set is linearly dependent");
        for (auto& x : v) x /= nv;
        M.row(i) = (coef / nv).transpose();
        q.push_back(std::move(v));
    }

    auto r = seed.sample(rule.grid);
    const double seed_norm = std::sqrt(std::max(rule(r, r), 0.0));
    if (!(seed_norm > 0.0)) throw DegenerateSeed("seed function is identically zero on the grid");
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < n; ++j) {
            double a = rule(q[j], r);
            for (std::size_t k = 0; k < m; ++k) r[k] -= a * q[j][k];
            beta += a * M.row(j).transpose();
        }
    }
    double res = std::sqrt(std::max(rule(r, r), 0.0));
    if (res < opt.degenerate_tol * seed_norm)
        throw DegenerateSeed("seed lies in the span of the constraint set");

    std::vector<double> b(beta.data(), beta.data() + n);
    auto fns = constraints.fns;
    return ForceProfile("gram-schmidt", [seed, b, fns](double t) {
        double v = seed(t);
        for (std::size_t j = 0; j < b.size(); ++j) v -= b[j] * fns[j](t);
        return v;
    });
}

inline ForceProfile sine_seed(int k, double T) {
    require(k > 0, "sine seed order must be positive");
    const double w = k * std::numbers::pi / T;
    return ForceProfile("sine-seed", [w](double t) { return std::sin(w * t); });
}

// h0 + c1 h1 + c2 h2 with h(0) = h(T) = 0.
inline ForceProfile pin_endpoints(const ForceProfile& h0, const ForceProfile& h1, const ForceProfile& h2, double T) {
    Eigen::Matrix2d A;
    A << h1(0.0), h2(0.0), h1(T), h2(T);
    Eigen::Vector2d rhs(-h0(0.0), -h0(T));
    double scale = A.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
        if (rhs.norm() == 0.0) return h0;
        throw NoSolution("endpoint conditions cannot be met by this superposition");
    }
    if (std::abs(A.determinant()) < 1e-12 * scale * scale)
        throw NoSolution("endpoint conditions: singular 2x2 system");
    Eigen::Vector2d c = A.fullPivLu().solve(rhs);
    double c1 = c(0), c2 = c(1);
    return ForceProfile("gram-schmidt", [h0, h1, h2, c1, c2](double t) { return h0(t) + c1 * h1(t) + c2 * h2(t); });
}

// Seeds sin(k pi t / T) for k = k0, k0+1, k0+2, each projected, then superposed so f(0) = f(T) = 0.
inline ForceProfile gram_schmidt_family(int k0, const ConstraintSet& c, const InnerProductRule& rule,
                                        const GramSchmidtOptions& opt = {}) {
    const double T = rule.grid.duration;
    auto h0 = gram_schmidt_force(sine_seed(k0, T), c, rule, opt);
    auto h1 = gram_schmidt_force(sine_seed(k0 + 1, T), c, rule, opt);
    auto h2 = gram_schmidt_force(sine_seed(k0 + 2, T), c, rule, opt);
    return pin_endpoints(h0, h1, h2, T);
}

inline ForceProfile compensate_damping(const ForceProfile& force_nd, double gamma) {
    require(std::isfinite(gamma) && gamma >= 0.0, "gamma must be non-negative");
    if (gamma == 0.0) return force_nd;
    return force_nd.damped(gamma);
}

inline double kappa_from_phases(double achieved, double target) {
    require(std::isfinite(target), "target phase must be finite");
    if (!std::isfinite(achieved) || achieved == 0.0 || std::abs(achieved) < 1e-300)
        throw NoSolution("force produces no phase");
    if (target == 0.0) return 0.0;
    if ((achieved > 0) != (target > 0))
        throw NoSolution("achieved phase has the opposite sign of the target");
    return std::sqrt(target / achieved);
}

// Isolated phase of the driven path (partner at the origin) starting from z0 = 0.
inline double single_mode_phase(const ForceProfile& force, const ModeParams& params, const TimeGrid& grid) {
    auto p = propagate_closed_form(0.0, force, params, grid);
    return path_phase_integral(p);
}

inline double kappa_for_phase(const ForceProfile& force, const ModeParams& params, double target_phase,
                              std::size_t n_steps = 4096) {
    TimeGrid g(n_steps, params.duration);
    return kappa_from_phases(single_mode_phase(force, params, g), target_phase);
}

// int_0^T Re(e^{-i w t} z(t)) dt for the path from the origin.
inline double offset_sensitivity(const ForceProfile& force, const ModeParams& params, std::size_t n_steps = 4096) {
    TimeGrid g(n_steps, params.duration);
    auto p = propagate_closed_form(0.0, force, params, g);
    std::vector<double> y(g.size());
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = std::real(std::exp(-I * (params.omega * g.t(k))) * p.z[k]);
    return simpson(y, g.h());
}

// Exact first-order change of the single-path phase per unit constant offset of f.
// It adds the response of the path itself, -int f Re(e^{-iwt} u) with u the path of f = 1,
// to -offset_sensitivity. Both pieces vanish together for the projected forces.
inline double offset_phase_derivative(const ForceProfile& force, const ModeParams& params,
                                      std::size_t n_steps = 4096) {
    TimeGrid g(n_steps, params.duration);
    auto u = propagate_closed_form(0.0, ForceProfile::constant(1.0), params, g);
    std::vector<double> y(g.size());
    for (std::size_t k = 0; k < y.size(); ++k)
        y[k] = force(g.t(k)) * std::real(std::exp(-I * (params.omega * g.t(k))) * u.z[k]);
    return -offset_sensitivity(force, params, n_steps) - simpson(y, g.h());
}

}  // namespace dgate
