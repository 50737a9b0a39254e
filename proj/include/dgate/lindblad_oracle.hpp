#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core_dynamics.hpp"
#include "two_qubit_gate.hpp"

namespace dgate {

using MatC = Eigen::MatrixXcd;

struct DensityMatrix {
    MatC rho;

    DensityMatrix() = default;
    explicit DensityMatrix(MatC m) : rho(std::move(m)) {}

    Eigen::Index dim() const { return rho.rows(); }
    cplx trace() const { return rho.trace(); }
    double hermiticity_error() const { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }
    double purity() const { return std::real((rho * rho).trace()); }
    double min_eigenvalue() const {
        MatC h = 0.5 * (rho + rho.adjoint());
        Eigen::SelfAdjointEigenSolver<MatC> es(h, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }
    void validate(double herm_tol = 1e-12, double trace_tol = 1e-10, double eig_tol = 1e-8) const {
        require(rho.rows() == rho.cols() && rho.rows() > 0, "density matrix must be square and nonempty");
        require(hermiticity_error() <= herm_tol, "density matrix is not Hermitian");
        require(std::abs(trace() - 1.0) <= trace_tol, "density matrix trace differs from 1");
        require(min_eigenvalue() >= -eig_tol, "density matrix has negative eigenvalues");
    }
};

struct TruncationPolicy {
    int n_max = 32;
    double tail_threshold = 1e-8;
    int n_max_cap = 256;

    void validate() const {
        require(n_max >= 4, "truncation: n_max must be at least 4");
        require(tail_threshold > 0.0 && tail_threshold < 1.0, "truncation: tail_threshold must be in (0, 1)");
        require(n_max_cap >= n_max, "truncation: cap below n_max");
    }
    static TruncationPolicy for_nbar(double nbar) { return {nbar > 0.0 ? 64 : 32, 1e-8, 256}; }
};

// ---- Fock-space helpers ----------------------------------------------------------------------

inline MatC annihilation(int n_max) {
    const int n = n_max + 1;
    MatC a = MatC::Zero(n, n);
    for (int m = 1; m < n; ++m) a(m - 1, m) = std::sqrt(static_cast<double>(m));
    return a;
}

inline Eigen::VectorXcd coherent_vector(cplx z, int n_max) {
    Eigen::VectorXcd v(n_max + 1);
    cplx c = std::exp(-0.5 * std::norm(z));
    v(0) = c;
    for (int m = 1; m <= n_max; ++m) v(m) = v(m - 1) * z / std::sqrt(static_cast<double>(m));
    return v;
}

inline DensityMatrix coherent_state(cplx z, int n_max) {
    auto v = coherent_vector(z, n_max);
    return DensityMatrix(v * v.adjoint());
}

inline DensityMatrix fock_state(int k, int n_max) {
    require(k >= 0 && k <= n_max, "fock state outside truncation");
    MatC r = MatC::Zero(n_max + 1, n_max + 1);
    r(k, k) = 1.0;
    return DensityMatrix(r);
}

inline DensityMatrix thermal_state(double nbar, int n_max) {
    MatC r = MatC::Zero(n_max + 1, n_max + 1);
    double q = nbar / (1.0 + nbar);
    for (int m = 0; m <= n_max; ++m) r(m, m) = std::pow(q, m) / (1.0 + nbar);
    return DensityMatrix(r);
}

inline double tail_population(const MatC& r) {
    const Eigen::Index n = r.rows();
    double t = std::abs(std::real(r(n - 1, n - 1)));
    if (n >= 2) t += std::abs(std::real(r(n - 2, n - 2)));
    return t;
}

// ---- generic dense route -----------------------------------------------------------------------

// One damping channel: rate * (2 L rho L^+ - L^+ L rho - rho L^+ L).
struct LindbladTerm {
    MatC op;
    double rate = 1.0;
};

using HamiltonianFn = std::function<MatC(double)>;

inline MatC liouvillian(const MatC& rho, const MatC& H, const std::vector<LindbladTerm>& ops) {
    MatC out = -I * (H * rho - rho * H);
    for (const auto& L : ops) {
        MatC Ld = L.op.adjoint();
        MatC LdL = Ld * L.op;
        out += L.rate * (2.0 * L.op * rho * Ld - LdL * rho - rho * LdL);
    }
    return out;
}

struct StepLog {
    double max_trace_drift = 0.0;
    std::size_t steps = 0;
};

// One RK4 step. The trace is not renormalized; drift is recorded and too much of it throws.
// RK4 keeps the trace even when unstable, so purity above Tr^2 is also treated as a step-size failure.
inline DensityMatrix step_master_equation(const DensityMatrix& rho, const HamiltonianFn& H, double t,
                                          const std::vector<LindbladTerm>& ops, double dt,
                                          StepLog* log = nullptr) {
    require(dt > 0.0 && std::isfinite(dt), "step: dt must be positive");
    const MatC& r = rho.rho;
    MatC Ht = H(t), Hm = H(t + 0.5 * dt), He = H(t + dt);
    MatC k1 = liouvillian(r, Ht, ops);
    MatC k2 = liouvillian(r + 0.5 * dt * k1, Hm, ops);
    MatC k3 = liouvillian(r + 0.5 * dt * k2, Hm, ops);
    MatC k4 = liouvillian(r + dt * k3, He, ops);
    DensityMatrix out(r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    double drift = std::abs(out.trace() - rho.trace());
    if (log) {
        log->max_trace_drift = std::max(log->max_trace_drift, drift);
        ++log->steps;
    }
    if (!(drift <= 1e-6)) throw StepSizeError("master equation step: trace drift " + std::to_string(drift));
    double tr = std::abs(out.trace());
    if (!(out.rho.squaredNorm() <= tr * tr * (1.0 + 1e-6)))
        throw StepSizeError("master equation step: purity exceeds one, step too large");
    return out;
}

// ---- block route ---------------------------------------------------------------------------------
// A spin block X_jk of a single mode evolves as
//   X' = -i (H_j X - X H_k) + g(n+1)(2aXa^+ - a^+aX - Xa^+a) + g n(2a^+Xa - aa^+X - Xaa^+)
// with H_j = conj(f_j) a + f_j a^+. Operators are applied through ladder shifts of the
// truncated matrices, O(n^2) per application.

namespace detail {

struct Ladder {
    int n;
    std::vector<double> s;    // s[m] = sqrt(m)
    std::vector<double> aad;  // diag of a a^+ in the truncated space

    explicit Ladder(int n_max) : n(n_max + 1), s(n_max + 2), aad(n_max + 1) {
        for (int m = 0; m <= n_max + 1; ++m) s[m] = std::sqrt(static_cast<double>(m));
        for (int m = 0; m <= n_max; ++m) aad[m] = (m < n_max) ? m + 1.0 : 0.0;
    }
};

inline void block_rhs(const Ladder& L, const MatC& X, cplx fj, cplx fk, double gamma, double nbar, MatC& out) {
    const int n = L.n;
    const auto& s = L.s;
    const double gd = gamma * (nbar + 1.0), gu = gamma * nbar;
    const cplx cfj = std::conj(fj), cfk = std::conj(fk);
    for (int c = 0; c < n; ++c) {
        for (int r = 0; r < n; ++r) {
            const cplx x = X(r, c);
            // (a X)(r,c) = s[r+1] X(r+1,c); (a^+ X)(r,c) = s[r] X(r-1,c)
            cplx aX = (r + 1 < n) ? s[r + 1] * X(r + 1, c) : cplx{};
            cplx adX = (r >= 1) ? s[r] * X(r - 1, c) : cplx{};
            // (X a)(r,c) = X(r,c-1) s[c]; (X a^+)(r,c) = X(r,c+1) s[c+1]
            cplx Xa = (c >= 1) ? X(r, c - 1) * s[c] : cplx{};
            cplx Xad = (c + 1 < n) ? X(r, c + 1) * s[c + 1] : cplx{};
            cplx v = -I * (cfj * aX + fj * adX - Xa * cfk - Xad * fk);
            if (gamma != 0.0) {
                cplx aXad = (r + 1 < n && c + 1 < n) ? s[r + 1] * s[c + 1] * X(r + 1, c + 1) : cplx{};
                v += gd * (2.0 * aXad - (static_cast<double>(r) + static_cast<double>(c)) * x);
                if (nbar != 0.0) {
                    cplx adXa = (r >= 1 && c >= 1) ? s[r] * s[c] * X(r - 1, c - 1) : cplx{};
                    v += gu * (2.0 * adXa - (L.aad[r] + L.aad[c]) * x);
                }
            }
            out(r, c) = v;
        }
    }
}

}  // namespace detail

struct BlockDrive {
    ComplexDrive row;  // f_j
    ComplexDrive col;  // f_k
};

struct BlockRunOptions {
    double max_lambda_dt = 0.05;  // RK4 substep bound on (Liouvillian scale) * dt
    std::function<void(std::size_t, const MatC&)> observe;  // called at every grid point
};

// Evolves X on `grid`, returns X(T). Substeps per grid interval follow a crude spectral bound.
inline MatC evolve_block(MatC X, const BlockDrive& d, double gamma, double nbar, const TimeGrid& grid,
                         const BlockRunOptions& opt = {}) {
    const int n = static_cast<int>(X.rows());
    detail::Ladder L(n - 1);
    double fmax = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        double t = grid.t(k);
        fmax = std::max({fmax, std::abs(d.row(t)), std::abs(d.col(t))});
    }
    const double h = grid.h();
    double lam = 2.0 * fmax * std::sqrt(static_cast<double>(n)) + 2.0 * gamma * (2.0 * nbar + 1.0) * n;
    std::size_t sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(lam * h / opt.max_lambda_dt)));
    const double dt = h / static_cast<double>(sub);
    MatC k1(n, n), k2(n, n), k3(n, n), k4(n, n), tmp(n, n);
    if (opt.observe) opt.observe(0, X);
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        for (std::size_t j = 0; j < sub; ++j) {
            double t = grid.t(k) + static_cast<double>(j) * dt;
            cplx a0 = d.row(t), b0 = d.col(t);
            cplx a1 = d.row(t + 0.5 * dt), b1 = d.col(t + 0.5 * dt);
            cplx a2 = d.row(t + dt), b2 = d.col(t + dt);
            detail::block_rhs(L, X, a0, b0, gamma, nbar, k1);
            tmp = X + 0.5 * dt * k1;
            detail::block_rhs(L, tmp, a1, b1, gamma, nbar, k2);
            tmp = X + 0.5 * dt * k2;
            detail::block_rhs(L, tmp, a1, b1, gamma, nbar, k3);
            tmp = X + dt * k3;
            detail::block_rhs(L, tmp, a2, b2, gamma, nbar, k4);
            X += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (opt.observe) opt.observe(k + 1, X);
    }
    return X;
}

inline MatC embed(const MatC& m, int n_max) {
    const Eigen::Index n = n_max + 1;
    require(m.rows() <= n, "cannot embed into a smaller truncation");
    MatC out = MatC::Zero(n, n);
    out.topLeftCorner(m.rows(), m.cols()) = m;
    return out;
}

using InitialState = std::function<DensityMatrix(int n_max)>;

inline InitialState fixed_initial(const DensityMatrix& rho) {
    return [rho](int n_max) { return DensityMatrix(embed(rho.rho, n_max)); };
}

// ---- single mode --------------------------------------------------------------------------------

struct SingleModeRun {
    TimeGrid grid;
    std::vector<cplx> mean_a;
    std::vector<double> mean_n;
    std::vector<double> trace_error;
    double max_tail = 0.0;
    int n_max_used = 0;
    DensityMatrix final_state;
};

namespace detail {

inline SingleModeRun single_mode_once(const ComplexDrive& f, double gamma, double nbar, const TimeGrid& g,
                                      const MatC& rho0, int n_max, double max_lambda_dt) {
    SingleModeRun run;
    run.grid = g;
    run.n_max_used = n_max;
    run.mean_a.resize(g.size());
    run.mean_n.resize(g.size());
    run.trace_error.resize(g.size());
    BlockRunOptions opt;
    opt.max_lambda_dt = max_lambda_dt;
    opt.observe = [&](std::size_t k, const MatC& X) {
        cplx ea = 0.0;
        double en = 0.0;
        for (int m = 1; m <= n_max; ++m) {
            ea += std::sqrt(static_cast<double>(m)) * X(m, m - 1);
            en += m * std::real(X(m, m));
        }
        run.mean_a[k] = ea;
        run.mean_n[k] = en;
        run.trace_error[k] = std::abs(X.trace() - 1.0);
        run.max_tail = std::max(run.max_tail, tail_population(X));
    };
    run.final_state = DensityMatrix(evolve_block(rho0, {f, f}, gamma, nbar, g, opt));
    return run;
}

}  // namespace detail

struct OracleOptions {
    double max_lambda_dt = 0.05;
};

// Runs, then doubles n_max until the top-two-level population stays under the threshold.
inline SingleModeRun solve_single_mode(const ComplexDrive& f, double gamma, double nbar, const TimeGrid& grid,
                                       const TruncationPolicy& policy, const InitialState& initial,
                                       const OracleOptions& opt = {}) {
    policy.validate();
    grid.validate();
    require(nbar >= 0.0 && std::isfinite(nbar), "oracle: nbar must be non-negative");
    for (int n_max = policy.n_max;; n_max *= 2) {
        if (n_max > policy.n_max_cap)
            throw TruncationError("oracle: truncation cap " + std::to_string(policy.n_max_cap) + " exceeded");
        auto rho0 = initial(n_max);
        require(rho0.dim() == n_max + 1, "oracle: initial state has the wrong dimension");
        if (tail_population(rho0.rho) > policy.tail_threshold) continue;
        auto run = detail::single_mode_once(f, gamma, nbar, grid, rho0.rho, n_max, opt.max_lambda_dt);
        if (run.max_tail <= policy.tail_threshold) return run;
    }
}

inline SingleModeRun solve_single_mode(const ForceProfile& force, const ModeParams& params, double nbar,
                                       const TruncationPolicy& policy, const InitialState& initial,
                                       std::size_t n_steps = 4096, const OracleOptions& opt = {}) {
    params.validate();
    TimeGrid g(n_steps, params.duration);
    return solve_single_mode(interaction_drive(force, params.omega), params.gamma, nbar, g, policy, initial, opt);
}

// ---- spin-tensored runs ---------------------------------------------------------------------------
// Internal states j carry amplitudes c_j and per-mode drives. Modes never couple, so each block
// X_jk is a product over modes of single-mode blocks started from that mode's initial state.

struct SpinLabel {
    cplx amplitude;
    std::vector<ComplexDrive> drives;  // one per mode
};

struct SpinOracleResult {
    MatC spin;         // Tr over motion
    MatC spin_vacuum;  // <0..0| X |0..0>
    int n_max_used = 0;
    double max_tail = 0.0;
};

inline SpinOracleResult solve_spin_modes(const std::vector<SpinLabel>& labels, double gamma, double nbar,
                                         const TimeGrid& grid, const TruncationPolicy& policy,
                                         const std::vector<InitialState>& initial, const OracleOptions& opt = {}) {
    policy.validate();
    grid.validate();
    require(!labels.empty(), "oracle: no spin labels");
    const std::size_t modes = initial.size();
    for (auto& l : labels) require(l.drives.size() == modes, "oracle: drive count differs from mode count");
    const std::size_t J = labels.size();
    for (int n_max = policy.n_max;; n_max *= 2) {
        if (n_max > policy.n_max_cap)
            throw TruncationError("oracle: truncation cap " + std::to_string(policy.n_max_cap) + " exceeded");
        SpinOracleResult res;
        res.n_max_used = n_max;
        res.spin = MatC::Zero(J, J);
        res.spin_vacuum = MatC::Zero(J, J);
        bool ok = true;
        for (std::size_t j = 0; j < J && ok; ++j) {
            for (std::size_t k = j; k < J && ok; ++k) {
                cplx tr = labels[j].amplitude * std::conj(labels[k].amplitude), vac = tr;
                for (std::size_t m = 0; m < modes; ++m) {
                    auto rho0 = initial[m](n_max);
                    double tail = 0.0;
                    BlockRunOptions o;
                    o.max_lambda_dt = opt.max_lambda_dt;
                    if (j == k) o.observe = [&](std::size_t, const MatC& X) { tail = std::max(tail, tail_population(X)); };
                    MatC X = evolve_block(rho0.rho, {labels[j].drives[m], labels[k].drives[m]}, gamma, nbar, grid, o);
                    res.max_tail = std::max(res.max_tail, tail);
                    if (tail > policy.tail_threshold || tail_population(rho0.rho) > policy.tail_threshold) {
                        ok = false;
                        break;
                    }
                    tr *= X.trace();
                    vac *= X(0, 0);
                }
                res.spin(j, k) = tr;
                res.spin(k, j) = std::conj(tr);
                res.spin_vacuum(j, k) = vac;
                res.spin_vacuum(k, j) = std::conj(vac);
            }
        }
        if (ok) return res;
    }
}

// Two-mode gate from the motional ground state (or a thermal state at nbar when thermal_start).
// Basis: P (upup) and A (updown) with amplitudes 1/sqrt(2), or all four combinations with 1/2.
struct GateOracleResult {
    std::vector<SpinCombo> labels;
    MatC spin;
    MatC spin_vacuum;
    double fidelity = 0.0;  // overlap with the ideal spin state times motional vacuum
    int n_max_used = 0;
};

inline GateOracleResult solve_two_mode_gate(const GateConfig& cfg, const TruncationPolicy& policy,
                                            bool four_combos = false, const OracleOptions& opt = {}) {
    cfg.validate();
    std::vector<SpinCombo> combos = four_combos
        ? std::vector<SpinCombo>(all_combos.begin(), all_combos.end())
        : std::vector<SpinCombo>{SpinCombo::UpUp, SpinCombo::UpDown};
    const double amp = 1.0 / std::sqrt(static_cast<double>(combos.size()));
    std::vector<SpinLabel> labels;
    for (auto c : combos) {
        auto f = mode_forces(c, cfg.drive, cfg);
        labels.push_back({amp, {f.plus, f.minus}});
    }
    InitialState vac = [](int n) { return fock_state(0, n); };
    auto r = solve_spin_modes(labels, cfg.gamma, cfg.nbar, cfg.grid, policy, {vac, vac}, opt);
    GateOracleResult out;
    out.labels = combos;
    out.spin = r.spin;
    out.spin_vacuum = r.spin_vacuum;
    out.n_max_used = r.n_max_used;
    Eigen::VectorXcd ideal(combos.size());
    for (std::size_t j = 0; j < combos.size(); ++j)
        ideal(j) = amp * (is_parallel(combos[j]) ? std::exp(I * cfg.target_phase) : cplx{1.0});
    out.fidelity = std::real(ideal.dot(r.spin_vacuum * ideal));
    return out;
}

// ---- binary snapshot ------------------------------------------------------------------------------
// 16-byte header: 8-byte magic, uint64 dim; then dim*dim (re, im) doubles row-major, little-endian.

inline constexpr char dump_magic[8] = {'D', 'G', 'R', 'H', 'O', '0', '0', '1'};

inline void write_density_matrix(const std::string& path, const DensityMatrix& rho) {
    static_assert(std::endian::native == std::endian::little, "snapshot writer assumes a little-endian host");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("cannot open " + path + " for writing");
    std::uint64_t dim = static_cast<std::uint64_t>(rho.dim());
    os.write(dump_magic, 8);
    os.write(reinterpret_cast<const char*>(&dim), 8);
    for (Eigen::Index r = 0; r < rho.dim(); ++r)
        for (Eigen::Index c = 0; c < rho.dim(); ++c) {
            double v[2] = {rho.rho(r, c).real(), rho.rho(r, c).imag()};
            os.write(reinterpret_cast<const char*>(v), 16);
        }
    if (!os) throw InvalidInput("write failed: " + path);
}

inline DensityMatrix read_density_matrix(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInput("cannot open " + path);
    char magic[8];
    std::uint64_t dim = 0;
    is.read(magic, 8);
    is.read(reinterpret_cast<char*>(&dim), 8);
    if (!is || std::memcmp(magic, dump_magic, 8) != 0) throw InvalidInput("not a density-matrix snapshot: " + path);
    require(dim > 0 && dim < (1u << 16), "snapshot dimension out of range");
    MatC m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            double v[2];
            is.read(reinterpret_cast<char*>(v), 16);
            m(r, c) = {v[0], v[1]};
        }
    if (!is) throw InvalidInput("truncated snapshot: " + path);
    return DensityMatrix(m);
}

}  // namespace dgate

namespace dgate {

inline double trace_distance(const MatC& a, const MatC& b) {
    MatC d = a - b;
    d = 0.5 * (d + d.adjoint());
    Eigen::SelfAdjointEigenSolver<MatC> es(d, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline MatC to_matrix(const std::array<std::array<cplx, 2>, 2>& m) {
    MatC r(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r(i, j) = m[i][j];
    return r;
}

}  // namespace dgate
