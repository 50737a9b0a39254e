#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"

namespace dgate {

using cplx = std::complex<double>;
inline constexpr cplx I{0.0, 1.0};

// Units: time in us, angular frequency in rad/us, hbar = 1.
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double default_omega = two_pi * 2.0;

struct TimeGrid {
    std::size_t n_steps = 4096;
    double duration = 1.0;

    TimeGrid() = default;
    TimeGrid(std::size_t n, double T) : n_steps(n), duration(T) { validate(); }

    void validate() const {
        require(n_steps > 0, "grid: n_steps must be positive");
        require(std::isfinite(duration) && duration > 0.0, "grid: duration must be positive");
    }
    double h() const { return duration / static_cast<double>(n_steps); }
    double t(std::size_t k) const {
        return k == n_steps ? duration : static_cast<double>(k) * h();
    }
    std::size_t size() const { return n_steps + 1; }
    bool operator==(const TimeGrid& o) const {
        return n_steps == o.n_steps && duration == o.duration;
    }
};

struct ModeParams {
    double omega = default_omega;
    double gamma = 0.0;
    double duration = 1.0;

    void validate() const {
        require(std::isfinite(omega) && omega > 0.0, "mode: omega must be positive");
        require(std::isfinite(gamma) && gamma >= 0.0, "mode: gamma must be non-negative");
        require(std::isfinite(duration) && duration > 0.0, "mode: duration must be positive");
    }
};

// Real drive f(t). Analytic families carry a closure; sampled tables interpolate linearly
// and refuse to be used outside their time span.
class ForceProfile {
public:
    using Fn = std::function<double(double)>;

    ForceProfile() : ForceProfile(zero()) {}
    ForceProfile(std::string family, Fn fn,
                 double t_lo = -std::numeric_limits<double>::infinity(),
                 double t_hi = std::numeric_limits<double>::infinity())
        : family_(std::move(family)),
          fn_(std::make_shared<const Fn>(std::move(fn))),
          lo_(t_lo),
          hi_(t_hi) {}

    static ForceProfile zero() {
        return ForceProfile("zero", [](double) { return 0.0; });
    }
    static ForceProfile constant(double c) {
        require(std::isfinite(c), "constant force must be finite");
        return ForceProfile("constant", [c](double) { return c; });
    }
    // A e^{-gamma t} sin(Omega t)
    static ForceProfile scaled_sine(double amplitude, double gamma, double Omega) {
        require(std::isfinite(amplitude) && std::isfinite(gamma) && std::isfinite(Omega),
                "scaled-sine parameters must be finite");
        return ForceProfile("scaled-sine", [=](double t) {
            return amplitude * std::exp(-gamma * t) * std::sin(Omega * t);
        });
    }
    static ForceProfile sine(double amplitude, double Omega, double phase = 0.0) {
        return ForceProfile("sine", [=](double t) { return amplitude * std::sin(Omega * t + phase); });
    }
    static ForceProfile sampled(std::vector<double> t, std::vector<double> f) {
        require(t.size() >= 2, "sampled force needs at least 2 samples");
        require(t.size() == f.size(), "sampled force: time and value columns differ in length");
        for (std::size_t k = 0; k < t.size(); ++k) {
            require(std::isfinite(t[k]) && std::isfinite(f[k]), "sampled force has non-finite entry");
            if (k > 0) require(t[k] > t[k - 1], "sampled force: time stamps must increase strictly");
        }
        auto tab = std::make_shared<std::pair<std::vector<double>, std::vector<double>>>(
            std::move(t), std::move(f));
        double lo = tab->first.front(), hi = tab->first.back();
        ForceProfile p("sampled", [tab](double x) {
            const auto& ts = tab->first;
            const auto& fs = tab->second;
            if (x <= ts.front()) return fs.front();
            if (x >= ts.back()) return fs.back();
            auto it = std::upper_bound(ts.begin(), ts.end(), x);
            std::size_t j = static_cast<std::size_t>(it - ts.begin());
            double w = (x - ts[j - 1]) / (ts[j] - ts[j - 1]);
            return fs[j - 1] + w * (fs[j] - fs[j - 1]);
        }, lo, hi);
        p.table_ = tab;
        return p;
    }

    double operator()(double t) const { return (*fn_)(t); }
    const std::string& family() const { return family_; }
    bool is_sampled() const { return static_cast<bool>(table_); }
    const std::vector<double>& sample_times() const { return table_->first; }
    const std::vector<double>& sample_values() const { return table_->second; }

    // small slack so a table ending at T - 1ulp still counts
    bool covers(double a, double b) const {
        double tol = 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
        return lo_ <= a + tol && hi_ >= b - tol;
    }

    ForceProfile scaled(double k) const {
        auto f = fn_;
        return ForceProfile(family_, [f, k](double t) { return k * (*f)(t); }, lo_, hi_);
    }
    ForceProfile damped(double gamma) const {
        auto f = fn_;
        return ForceProfile(family_, [f, gamma](double t) { return std::exp(-gamma * t) * (*f)(t); },
                            lo_, hi_);
    }
    friend ForceProfile operator+(const ForceProfile& a, const ForceProfile& b) {
        auto fa = a.fn_, fb = b.fn_;
        return ForceProfile(a.family_ + "+" + b.family_,
                            [fa, fb](double t) { return (*fa)(t) + (*fb)(t); },
                            std::max(a.lo_, b.lo_), std::min(a.hi_, b.hi_));
    }

    std::vector<double> sample(const TimeGrid& g) const {
        std::vector<double> v(g.size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = (*this)(g.t(k));
        return v;
    }

private:
    std::string family_;
    std::shared_ptr<const Fn> fn_;
    double lo_, hi_;
    std::shared_ptr<const std::pair<std::vector<double>, std::vector<double>>> table_;
};

// Interaction-picture drive f~(t), complex.
using ComplexDrive = std::function<cplx(double)>;

inline ComplexDrive interaction_drive(const ForceProfile& f, double omega) {
    return [f, omega](double t) { return f(t) * std::exp(I * (omega * t)); };
}

struct Path {
    TimeGrid grid;
    std::vector<cplx> z;
    std::vector<cplx> zdot;  // from the equation of motion; empty for noisy paths

    bool has_zdot() const { return zdot.size() == z.size(); }
    cplx front() const { return z.front(); }
    cplx back() const { return z.back(); }

    void validate() const {
        grid.validate();
        require(z.size() == grid.size(), "path: sample count does not match grid");
        for (auto& v : z) require(std::isfinite(v.real()) && std::isfinite(v.imag()), "path: non-finite sample");
    }
};

inline Path constant_path(const TimeGrid& g, cplx value = 0.0) {
    return Path{g, std::vector<cplx>(g.size(), value), std::vector<cplx>(g.size(), cplx{})};
}

namespace detail {

inline std::vector<cplx> sample_drive(const ComplexDrive& drive, const TimeGrid& g) {
    std::vector<cplx> v(g.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] = drive(g.t(k));
        if (!std::isfinite(v[k].real()) || !std::isfinite(v[k].imag()))
            throw InvalidInput("force is not finite at t = " + std::to_string(g.t(k)));
    }
    return v;
}

inline void check_setup(cplx z0, double gamma, const TimeGrid& g) {
    g.validate();
    require(std::isfinite(z0.real()) && std::isfinite(z0.imag()), "initial label must be finite");
    require(std::isfinite(gamma) && gamma >= 0.0, "gamma must be non-negative");
}

inline void check_force(const ForceProfile& f, const ModeParams& p, const TimeGrid& g) {
    p.validate();
    require(std::abs(g.duration - p.duration) <= 1e-12 * p.duration,
            "grid duration does not match protocol time");
    require(f.covers(0.0, p.duration), "force profile does not cover [0, T]");
}

}  // namespace detail

// z(t) = e^{-gamma t}[z0 + int_0^t -i f~(s) e^{gamma s} ds], running Simpson on the grid.
inline Path propagate_closed_form(cplx z0, const ComplexDrive& drive, double gamma, const TimeGrid& g) {
    detail::check_setup(z0, gamma, g);
    auto f = detail::sample_drive(drive, g);
    std::vector<cplx> integrand(g.size());
    for (std::size_t k = 0; k < f.size(); ++k) integrand[k] = -I * f[k] * std::exp(gamma * g.t(k));
    auto acc = cumulative_simpson(integrand, g.h());
    Path p{g, std::vector<cplx>(g.size()), std::vector<cplx>(g.size())};
    for (std::size_t k = 0; k < f.size(); ++k) {
        p.z[k] = std::exp(-gamma * g.t(k)) * (z0 + acc[k]);
        p.zdot[k] = -gamma * p.z[k] - I * f[k];
    }
    p.z[0] = z0;
    return p;
}

inline Path propagate_closed_form(cplx z0, const ForceProfile& force, const ModeParams& params,
                                  const TimeGrid& g) {
    detail::check_force(force, params, g);
    return propagate_closed_form(z0, interaction_drive(force, params.omega), params.gamma, g);
}

// Fixed-step RK4 on zdot = -gamma z - i f~(t).
inline Path propagate_ode(cplx z0, const ComplexDrive& drive, double gamma, const TimeGrid& g) {
    detail::check_setup(z0, gamma, g);
    const double h = g.h();
    auto rhs = [&](double t, cplx z) { return -gamma * z - I * drive(t); };
    Path p{g, std::vector<cplx>(g.size()), std::vector<cplx>(g.size())};
    cplx z = z0;
    p.z[0] = z;
    for (std::size_t k = 0; k < g.n_steps; ++k) {
        double t = g.t(k);
        cplx k1 = rhs(t, z);
        cplx k2 = rhs(t + 0.5 * h, z + 0.5 * h * k1);
        cplx k3 = rhs(t + 0.5 * h, z + 0.5 * h * k2);
        cplx k4 = rhs(t + h, z + h * k3);
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw InvalidInput("force is not finite near t = " + std::to_string(t));
        p.z[k + 1] = z;
    }
    for (std::size_t k = 0; k < g.size(); ++k) p.zdot[k] = rhs(g.t(k), p.z[k]);
    return p;
}

inline Path propagate_ode(cplx z0, const ForceProfile& force, const ModeParams& params, const TimeGrid& g) {
    detail::check_force(force, params, g);
    return propagate_ode(z0, interaction_drive(force, params.omega), params.gamma, g);
}

struct CyclicCheck {
    bool closed;
    double residual;
};

inline CyclicCheck check_cyclic(const Path& path, double tol = 1e-8) {
    require(!path.z.empty(), "check_cyclic: empty path");
    double r = std::abs(path.z.back() - path.z.front());
    return {r <= tol, r};
}

}  // namespace dgate
