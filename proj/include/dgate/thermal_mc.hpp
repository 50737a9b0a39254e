#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "core_dynamics.hpp"
#include "phase_accounting.hpp"
#include "quadrature.hpp"
#include "two_qubit_gate.hpp"

namespace dgate {

// ---- keyed noise --------------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t index, std::uint64_t mode) {
    std::uint64_t k = splitmix64(seed);
    k = splitmix64(k ^ (index * 0xD1B54A32D192ED03ULL));
    return splitmix64(k ^ ((mode + 1) * 0x8CB92BA72F3D8DD7ULL));
}

// Complex increments with Var(Re) = Var(Im) = dt/2, one independent stream per mode.
struct NoiseRealization {
    std::uint64_t seed = 0;
    std::uint64_t index = 0;
    TimeGrid grid;
    std::vector<std::vector<cplx>> dW;

    static NoiseRealization generate(std::uint64_t seed, std::uint64_t index, const TimeGrid& grid,
                                     std::size_t n_modes = 2) {
        grid.validate();
        NoiseRealization n{seed, index, grid, {}};
        const double sd = std::sqrt(0.5 * grid.h());
        for (std::size_t m = 0; m < n_modes; ++m) {
            std::mt19937_64 eng(stream_key(seed, index, m));
            std::normal_distribution<double> N(0.0, sd);
            std::vector<cplx> v(grid.n_steps);
            for (auto& x : v) {
                double re = N(eng);
                double im = N(eng);
                x = {re, im};
            }
            n.dW.push_back(std::move(v));
        }
        return n;
    }
};

enum class SdeScheme { Exponential, EulerMaruyama };

// z_{k+1} = e^{-g dt} z_k - i dt f~(t_k) e^{-g dt/2} - i sqrt(2 g nbar) dW_k   (exponential)
// z_{k+1} = z_k + dt(-g z_k - i f~(t_k))           - i sqrt(2 g nbar) dW_k   (Euler-Maruyama)
inline Path sample_noisy_path(cplx z0, const ComplexDrive& drive, double gamma, const std::vector<cplx>& dW,
                              const TimeGrid& grid, double nbar, SdeScheme scheme = SdeScheme::Exponential) {
    grid.validate();
    require(nbar >= 0.0 && std::isfinite(nbar), "nbar must be non-negative");
    require(gamma >= 0.0 && std::isfinite(gamma), "gamma must be non-negative");
    require(dW.size() == grid.n_steps, "noise realization does not match the time grid");
    const double h = grid.h();
    const double s = std::sqrt(2.0 * gamma * nbar);
    const double decay = std::exp(-gamma * h), half = std::exp(-0.5 * gamma * h);
    Path p{grid, std::vector<cplx>(grid.size()), {}};
    cplx z = z0;
    p.z[0] = z;
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        cplx f = drive(grid.t(k));
        if (scheme == SdeScheme::Exponential)
            z = decay * z - I * h * f * half - I * s * dW[k];
        else
            z = z + h * (-gamma * z - I * f) - I * s * dW[k];
        p.z[k + 1] = z;
    }
    p.validate();
    return p;
}

inline Path sample_noisy_path(cplx z0, const ForceProfile& force, const ModeParams& params,
                              const NoiseRealization& noise, std::size_t mode, double nbar,
                              SdeScheme scheme = SdeScheme::Exponential) {
    detail::check_force(force, params, noise.grid);
    require(mode < noise.dW.size(), "noise realization has no stream for this mode");
    return sample_noisy_path(z0, interaction_drive(force, params.omega), params.gamma, noise.dW[mode], noise.grid,
                             nbar, scheme);
}

// ---- fidelity per realization --------------------------------------------------------------------

// phase_total = phi + i Gamma as carried by the ledger; dphi = phi - target.
inline double fidelity_realization(const FinalLabels& z, cplx phase_total, double target) {
    return fidelity_realization(z, wrap_phase(phase_total.real() - target), phase_total.imag());
}

struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

struct MCOptions {
    unsigned threads = 0;  // 0 = hardware concurrency
};

// Deterministic parts of the gate precomputed once; realizations add the shared noise part
// w_m(t) of each mode on top of the zero-temperature labels a_jm(t).
class ThermalGate {
public:
    explicit ThermalGate(const GateConfig& cfg) : cfg_(cfg), out_(run_gate(cfg)) {
        const auto& g = cfg_.grid;
        for (std::size_t j = 0; j < 2; ++j) {
            auto c = j == 0 ? SpinCombo::UpUp : SpinCombo::UpDown;
            auto f = mode_forces(c, cfg_.drive, cfg_);
            for (std::size_t m = 0; m < 2; ++m) {
                const auto& drive = m == 0 ? f.plus : f.minus;
                a_[j][m] = out_.path(c, static_cast<ModeIndex>(m)).z;
                fs_[j][m].resize(g.size());
                for (std::size_t k = 0; k < g.size(); ++k) fs_[j][m][k] = drive(g.t(k));
            }
        }
    }

    const GateOutcome& deterministic() const { return out_; }
    const GateConfig& config() const { return cfg_; }

    double realization(const NoiseRealization& noise, double nbar) const {
        const auto& g = cfg_.grid;
        const double h = g.h(), gamma = cfg_.gamma;
        const double s = std::sqrt(2.0 * gamma * nbar);
        const double decay = std::exp(-gamma * h);
        double dI = 0.0;   // noise phase of P minus that of A
        double phiL = 0.0;
        std::array<cplx, 2> wT{};
        std::vector<cplx> w(g.size());
        std::vector<double> y(g.size()), yl(g.size());
        for (std::size_t m = 0; m < 2; ++m) {
            const auto& dW = noise.dW[m];
            w[0] = 0.0;
            for (std::size_t k = 0; k < g.n_steps; ++k) w[k + 1] = decay * w[k] - I * s * dW[k];
            wT[m] = w.back();
            for (std::size_t j = 0; j < 2; ++j) {
                const auto& a = a_[j][m];
                const auto& f = fs_[j][m];
                for (std::size_t k = 0; k < g.size(); ++k) y[k] = std::real(f[k] * std::conj(w[k]));
                double sum = 0.0;
                for (std::size_t k = 0; k < g.n_steps; ++k) sum += std::real(dW[k] * std::conj(0.5 * (a[k] + a[k + 1])));
                double d = -simpson(y, h) - s * sum;
                dI += j == 0 ? d : -d;
            }
            if (gamma != 0.0) {
                for (std::size_t k = 0; k < g.size(); ++k)
                    yl[k] = std::imag((a_[0][m][k] + w[k]) * std::conj(a_[1][m][k] + w[k]));
                phiL += 2.0 * gamma * simpson(yl, h);
            }
        }
        double phase = out_.ledger.phi_isol + dI + phiL;
        FinalLabels z{a_[0][0].back() + wT[0], a_[0][1].back() + wT[1], a_[1][0].back() + wT[0],
                      a_[1][1].back() + wT[1]};
        return fidelity_realization(z, cplx{phase, out_.ledger.eta}, cfg_.target_phase);
    }

private:
    GateConfig cfg_;
    GateOutcome out_;
    std::array<std::array<std::vector<cplx>, 2>, 2> a_;   // [P/A][plus/minus]
    std::array<std::array<std::vector<cplx>, 2>, 2> fs_;
};

namespace detail {

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex mu;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            try {
                for (std::size_t i; (i = next.fetch_add(1)) < n;) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!err) err = std::current_exception();
                next = n;
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace detail

inline MCEstimate summarize(const std::vector<double>& x, std::uint64_t seed) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;  // index order, independent of thread count
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    double var = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n)), n, seed};
}

inline std::vector<double> realization_values(const ThermalGate& tg, double nbar, std::size_t n_samples,
                                              std::uint64_t seed, const MCOptions& opt = {}) {
    std::vector<double> vals(n_samples);
    detail::parallel_for(n_samples, opt.threads, [&](std::size_t i) {
        auto noise = NoiseRealization::generate(seed, i, tg.config().grid, 2);
        vals[i] = tg.realization(noise, nbar);
    });
    return vals;
}

inline MCEstimate monte_carlo_fidelity(const ThermalGate& tg, double nbar, std::size_t n_samples, std::uint64_t seed,
                                       const MCOptions& opt = {}) {
    require(n_samples >= 2, "monte carlo: need at least 2 samples");
    require(nbar >= 0.0 && std::isfinite(nbar), "monte carlo: nbar must be non-negative");
    if (nbar == 0.0 || tg.config().gamma == 0.0) {
        return {tg.deterministic().fidelity, 0.0, n_samples, seed};
    }
    return summarize(realization_values(tg, nbar, n_samples, seed, opt), seed);
}

inline MCEstimate monte_carlo_fidelity(const GateConfig& cfg, std::size_t n_samples, std::uint64_t seed,
                                       const MCOptions& opt = {}) {
    ThermalGate tg(cfg);
    return monte_carlo_fidelity(tg, cfg.nbar, n_samples, seed, opt);
}

// ---- cumulant approximation -----------------------------------------------------------------------

struct CumulantResult {
    double linearized = 1.0;    // the closed first-order-in (nbar gamma T) expression
    double unlinearized = 1.0;  // second-order cumulant with full gamma dependence
};

namespace detail {

// int_0^T dt1 x(t1) int_0^{t1} y(t2) dt2
inline cplx triangle(const std::vector<cplx>& x, const std::vector<cplx>& y, double h) {
    auto inner = cumulative_simpson(y, h);
    std::vector<cplx> v(x.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = x[k] * inner[k];
    return simpson(v, h);
}

// u -> int_u^T x(t) e^{-gamma (t-u)} dt
inline std::vector<cplx> tail_integral(const std::vector<cplx>& x, double gamma, const TimeGrid& g) {
    std::vector<cplx> y(x.size());
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[k] * std::exp(-gamma * g.t(k));
    auto J = cumulative_simpson(y, g.h());
    std::vector<cplx> out(x.size());
    for (std::size_t k = 0; k < y.size(); ++k) out[k] = std::exp(gamma * g.t(k)) * (J.back() - J[k]);
    return out;
}

}  // namespace detail

inline CumulantResult cumulant_fidelity(const GateOutcome& det, const GateConfig& cfg) {
    const auto& g = cfg.grid;
    const double h = g.h(), gamma = cfg.gamma, nbar = cfg.nbar, T = cfg.duration;
    const double sig2 = nbar * (1.0 - std::exp(-2.0 * gamma * T));
    const double s = std::sqrt(2.0 * gamma * nbar);
    const Path* a[2][2] = {{&det.path(SpinCombo::UpUp, ModeIndex::Plus), &det.path(SpinCombo::UpUp, ModeIndex::Minus)},
                           {&det.path(SpinCombo::UpDown, ModeIndex::Plus), &det.path(SpinCombo::UpDown, ModeIndex::Minus)}};
    std::vector<cplx> fs[2][2];
    for (std::size_t j = 0; j < 2; ++j) {
        auto f = mode_forces(j == 0 ? SpinCombo::UpUp : SpinCombo::UpDown, cfg.drive, cfg);
        for (std::size_t m = 0; m < 2; ++m) {
            fs[j][m].resize(g.size());
            for (std::size_t k = 0; k < g.size(); ++k) fs[j][m][k] = (m == 0 ? f.plus : f.minus)(g.t(k));
        }
    }
    const double Gamma = det.ledger.eta;
    const double dphi = det.delta_phi;

    CumulantResult r;
    // unlinearized: diagonal terms from the mean and variance of -|a + w|^2 per mode
    double diag[2] = {0.0, 0.0};
    for (std::size_t j = 0; j < 2; ++j) {
        double e = 0.0;
        for (std::size_t m = 0; m < 2; ++m)
            e += -sig2 - std::norm(a[j][m]->back()) * (1.0 - sig2) + 0.5 * sig2 * sig2;
        diag[j] = std::exp(e);
    }
    // cross term: kernels g, h of the linear noise functional L = int g zeta + h zeta* du,
    // <L^2> = 2 int g h du
    cplx lnX = cplx{-Gamma, -dphi};
    for (std::size_t m = 0; m < 2; ++m) {
        lnX -= 0.5 * (std::norm(a[0][m]->back()) + std::norm(a[1][m]->back()));
        if (s == 0.0) continue;
        cplx S = a[0][m]->back() + a[1][m]->back();
        std::vector<cplx> df(g.size()), da(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            df[k] = fs[0][m][k] - fs[1][m][k];
            da[k] = a[0][m]->z[k] - a[1][m]->z[k];
        }
        auto K = detail::tail_integral(df, gamma, g);
        auto C = detail::tail_integral(da, gamma, g);
        std::vector<cplx> gh(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            double e = std::exp(-gamma * (T - g.t(k)));
            cplx gk = I * (s / 2) * std::conj(S) * e + (s / 2) * std::conj(K[k]) + I * (s / 2) * std::conj(da[k])
                      - I * gamma * s * std::conj(C[k]);
            cplx hk = -I * (s / 2) * S * e - (s / 2) * K[k] + I * (s / 2) * da[k] - I * gamma * s * C[k];
            gh[k] = gk * hk;
        }
        lnX += -sig2 + 0.5 * sig2 * sig2 + simpson(gh, h);
    }
    r.unlinearized = 0.25 * (diag[0] + diag[1] + 2.0 * std::real(std::exp(lnX)));

    // linearized: literal transcription of the closed first-order expression. The driven paths
    // are the COM label of P and the stretch label of A; the rest vanish from the ground state.
    const double x = nbar * gamma * T;
    const auto& zP = a[0][1]->z;
    const auto& zA = a[1][0]->z;
    const auto& fP = fs[0][1];
    const auto& fA = fs[1][0];
    const double nPT = std::norm(zP.back()), nAT = std::norm(zA.back());
    double lin_diag = 0.25 * (std::exp(-4.0 * x - nPT * (1.0 - 2.0 * x)) + std::exp(-4.0 * x - nAT * (1.0 - 2.0 * x)));
    std::vector<cplx> zPc(g.size()), zAc(g.size()), fPc(g.size()), fAc(g.size()), ts(g.size());
    std::vector<double> nz(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        double t = g.t(k);
        zPc[k] = std::conj(zP[k]);
        zAc[k] = std::conj(zA[k]);
        fPc[k] = std::conj(fP[k]) * t;
        fAc[k] = std::conj(fA[k]) * t;
        nz[k] = std::norm(zP[k]) + std::norm(zA[k]);
        ts[k] = (zP.back() * fP[k] - zA.back() * fA[k]) * t;
    }
    cplx E = cplx{-Gamma, -dphi} - 4.0 * x;
    E += -0.5 * gamma * nbar * simpson(nz, h);
    E += gamma * nbar * std::imag(detail::triangle(fA, zAc, h) + detail::triangle(fP, zPc, h));
    E += I * gamma * nbar * std::real(simpson(ts, h));
    E += -gamma * nbar * std::real(detail::triangle(fP, fPc, h) + detail::triangle(fA, fAc, h));
    E += -0.5 * (nPT + nAT) * (1.0 - 2.0 * x);
    r.linearized = lin_diag + 0.5 * std::real(std::exp(E));
    return r;
}

inline CumulantResult cumulant_fidelity(const GateConfig& cfg) {
    return cumulant_fidelity(run_gate(cfg), cfg);
}

}  // namespace dgate
