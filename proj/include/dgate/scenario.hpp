#pragma once

// Declarative scenario runner behind the command line tool.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgate.hpp"

namespace dgate::scenario {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

// ---- config reading ---------------------------------------------------------------------------

// Reads fields from one JSON object and remembers which keys were consumed, so leftovers
// can be reported as unknown.
class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw InvalidInput(where_ + ": expected an object");
    }

    bool has(const std::string& k) const { return j_.contains(k); }

    double num(const std::string& k) {
        seen_.insert(k);
        if (!j_.contains(k)) throw InvalidInput(field(k) + ": required field missing");
        const auto& v = j_.at(k);
        if (!v.is_number()) throw InvalidInput(field(k) + ": expected a number");
        double x = v.get<double>();
        if (!std::isfinite(x)) throw InvalidInput(field(k) + ": must be finite");
        return x;
    }
    double num(const std::string& k, double fallback) { return has(k) ? num(k) : (seen_.insert(k), fallback); }

    long long integer(const std::string& k) {
        seen_.insert(k);
        if (!j_.contains(k)) throw InvalidInput(field(k) + ": required field missing");
        const auto& v = j_.at(k);
        if (!v.is_number_integer()) throw InvalidInput(field(k) + ": expected an integer");
        return v.get<long long>();
    }
    long long integer(const std::string& k, long long fallback) {
        return has(k) ? integer(k) : (seen_.insert(k), fallback);
    }

    std::string str(const std::string& k) {
        seen_.insert(k);
        if (!j_.contains(k)) throw InvalidInput(field(k) + ": required field missing");
        if (!j_.at(k).is_string()) throw InvalidInput(field(k) + ": expected a string");
        return j_.at(k).get<std::string>();
    }
    std::string str(const std::string& k, const std::string& fallback) {
        return has(k) ? str(k) : (seen_.insert(k), fallback);
    }

    bool boolean(const std::string& k, bool fallback) {
        seen_.insert(k);
        if (!j_.contains(k)) return fallback;
        if (!j_.at(k).is_boolean()) throw InvalidInput(field(k) + ": expected true or false");
        return j_.at(k).get<bool>();
    }

    std::vector<double> numbers(const std::string& k) {
        seen_.insert(k);
        if (!j_.contains(k)) throw InvalidInput(field(k) + ": required field missing");
        const auto& v = j_.at(k);
        if (!v.is_array() || v.empty()) throw InvalidInput(field(k) + ": expected a nonempty array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw InvalidInput(field(k) + ": expected a nonempty array of numbers");
            out.push_back(e.get<double>());
            if (!std::isfinite(out.back())) throw InvalidInput(field(k) + ": entries must be finite");
        }
        return out;
    }

    std::vector<std::string> strings(const std::string& k, std::vector<std::string> fallback) {
        seen_.insert(k);
        if (!j_.contains(k)) return fallback;
        const auto& v = j_.at(k);
        if (!v.is_array()) throw InvalidInput(field(k) + ": expected an array of strings");
        std::vector<std::string> out;
        for (const auto& e : v) {
            if (!e.is_string()) throw InvalidInput(field(k) + ": expected an array of strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    Reader object(const std::string& k) {
        seen_.insert(k);
        if (!j_.contains(k)) throw InvalidInput(field(k) + ": required section missing");
        return Reader(j_.at(k), field(k));
    }
    std::optional<Reader> maybe_object(const std::string& k) {
        seen_.insert(k);
        if (!j_.contains(k)) return std::nullopt;
        return Reader(j_.at(k), field(k));
    }

    // exactly one of two alternative spellings
    void one_of(const std::string& a, const std::string& b) const {
        if (has(a) && has(b)) throw InvalidInput(where_ + ": give either '" + a + "' or '" + b + "', not both");
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw InvalidInput(field(it.key()) + ": unknown key");
    }

    std::string field(const std::string& k) const { return where_ + "." + k; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

struct Physics {
    double omega = default_omega;
    double gamma = 0.0;
    std::optional<double> gamma_over_omega;
    double nbar = 0.0;
    double T = 0.8;
    double mass_scale = 1.0;
    double target_phase = std::numbers::pi / 2;
    std::size_t n_steps = 4096;
};

inline double read_omega(Reader& r) {
    r.one_of("omega", "omega_2pi_MHz");
    double w = r.has("omega_2pi_MHz") ? two_pi * r.num("omega_2pi_MHz") : r.num("omega", default_omega);
    if (!(w > 0.0)) throw InvalidInput(r.field("omega") + ": must be positive");
    return w;
}

inline Physics read_physics(Reader r, bool need_T = true) {
    Physics p;
    p.omega = read_omega(r);
    r.one_of("gamma", "gamma_over_omega");
    if (r.has("gamma_over_omega")) {
        p.gamma_over_omega = r.num("gamma_over_omega");
        p.gamma = *p.gamma_over_omega * p.omega;
    } else {
        p.gamma = r.num("gamma", 0.0);
    }
    if (!(p.gamma >= 0.0)) throw InvalidInput(r.field("gamma") + ": must be non-negative");
    p.T = need_T ? r.num("T_us") : r.num("T_us", 0.8);
    if (!(p.T > 0.0)) throw InvalidInput(r.field("T_us") + ": must be positive");
    r.one_of("nbar", "gamma_nbar_T");
    if (r.has("gamma_nbar_T")) {
        double x = r.num("gamma_nbar_T");
        if (x != 0.0 && p.gamma == 0.0) throw InvalidInput(r.field("gamma_nbar_T") + ": needs gamma > 0");
        p.nbar = x == 0.0 ? 0.0 : x / (p.gamma * p.T);
    } else {
        p.nbar = r.num("nbar", 0.0);
    }
    if (!(p.nbar >= 0.0)) throw InvalidInput(r.field("nbar") + ": must be non-negative");
    p.mass_scale = r.num("mass_scale", 1.0);
    if (!(p.mass_scale > 0.0)) throw InvalidInput(r.field("mass_scale") + ": must be positive");
    p.target_phase = r.num("target_phase", std::numbers::pi / 2);
    long long n = r.integer("n_steps", 4096);
    if (n < 4 || n > 10'000'000) throw InvalidInput(r.field("n_steps") + ": out of range [4, 1e7]");
    p.n_steps = static_cast<std::size_t>(n);
    r.finish();
    return p;
}

// ---- force specs --------------------------------------------------------------------------------

struct ForceSpec {
    std::string family = "gram-schmidt";
    double amplitude = 1.0;
    double gamma = 0.0;
    double Omega = 1.0;
    double phase = 0.0;
    int k0 = 6;
    bool offset_constraint = true;
    std::string file;
    bool compensate = true;
};

inline ForceSpec read_force(Reader r, const std::filesystem::path& base_dir) {
    ForceSpec f;
    f.family = r.str("family");
    if (f.family == "scaled-sine") {
        f.amplitude = r.num("amplitude", 1.0);
        f.gamma = r.num("gamma", 0.0);
        f.Omega = r.num("Omega");
    } else if (f.family == "sine") {
        f.amplitude = r.num("amplitude", 1.0);
        f.Omega = r.num("Omega");
        f.phase = r.num("phase", 0.0);
    } else if (f.family == "gram-schmidt") {
        long long k = r.integer("k0", 6);
        if (k < 1 || k > 1000) throw InvalidInput(r.field("k0") + ": must be in [1, 1000]");
        f.k0 = static_cast<int>(k);
        f.offset_constraint = r.boolean("offset_constraint", true);
    } else if (f.family == "sampled") {
        auto p = std::filesystem::path(r.str("file"));
        f.file = (p.is_absolute() ? p : base_dir / p).string();
    } else {
        throw InvalidInput(r.field("family") + ": unknown force family '" + f.family +
                           "' (scaled-sine, sine, gram-schmidt, sampled)");
    }
    f.compensate = r.boolean("compensate", true);
    r.finish();
    return f;
}

// Two numeric columns t, f; blank lines, '#' comments and one non-numeric header line are skipped.
inline ForceProfile load_sampled(const std::string& file) {
    std::ifstream is(file);
    if (!is) throw InvalidInput("cannot read sampled force file " + file);
    std::vector<double> t, f;
    std::string line;
    std::size_t lineno = 0;
    bool header_skipped = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        for (auto& c : line)
            if (c == ',' || c == ';' || c == '\t') c = ' ';
        std::istringstream ss(line);
        double a, b;
        if (!(ss >> a >> b)) {
            if (!header_skipped && t.empty()) {
                header_skipped = true;
                continue;
            }
            throw InvalidInput(file + ":" + std::to_string(lineno) + ": expected two numbers");
        }
        t.push_back(a);
        f.push_back(b);
    }
    return ForceProfile::sampled(std::move(t), std::move(f));
}

// Non-damped base shape for the gate kinds on [0, T].
inline ForceProfile gate_shape(const ForceSpec& f, const GateConfig& cfg) {
    if (f.family == "gram-schmidt") {
        InnerProductRule rule{cfg.grid};
        auto C = ConstraintSet::two_mode(cfg.omega_plus(), cfg.omega_minus(), 0.0, f.offset_constraint);
        return gram_schmidt_family(f.k0, C, rule);
    }
    if (f.family == "scaled-sine") return ForceProfile::scaled_sine(f.amplitude, f.gamma, f.Omega);
    if (f.family == "sine") return ForceProfile::sine(f.amplitude, f.Omega, f.phase);
    return load_sampled(f.file);
}

inline ForceProfile single_mode_force(const ForceSpec& f) {
    if (f.family == "scaled-sine") return ForceProfile::scaled_sine(f.amplitude, f.gamma, f.Omega);
    if (f.family == "sine") return ForceProfile::sine(f.amplitude, f.Omega, f.phase);
    if (f.family == "sampled") return load_sampled(f.file);
    throw InvalidInput("force.family: gram-schmidt needs a mode frequency; build it through a gate scenario");
}

// ---- output -------------------------------------------------------------------------------------

inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline json jnum(double x) {
    if (std::isfinite(x)) return x;
    return nullptr;
}

class Csv {
public:
    explicit Csv(std::vector<std::string> cols) : cols_(std::move(cols)) {}
    void row(const std::vector<double>& v) {
        if (v.size() != cols_.size()) throw std::logic_error("csv row width");
        rows_.push_back(v);
    }
    void write(const std::filesystem::path& p) const {
        std::ofstream os(p, std::ios::binary);
        if (!os) throw InvalidInput("cannot write " + p.string());
        for (std::size_t i = 0; i < cols_.size(); ++i) os << (i ? "," : "") << cols_[i];
        os << "\n";
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << fmt(r[i]);
            os << "\n";
        }
        if (!os) throw InvalidInput("write failed: " + p.string());
    }
    json as_json() const {
        json arr = json::array();
        for (const auto& r : rows_) {
            json o = json::object();
            for (std::size_t i = 0; i < r.size(); ++i) o[cols_[i]] = jnum(r[i]);
            arr.push_back(o);
        }
        return arr;
    }

private:
    std::vector<std::string> cols_;
    std::vector<std::vector<double>> rows_;
};

struct Overrides {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::optional<unsigned> threads;
};

struct Context {
    std::filesystem::path out_dir;
    std::string name;
    std::vector<std::string> files;
    json results = json::object();

    std::filesystem::path file(const std::string& suffix) {
        auto p = out_dir / (name + suffix);
        files.push_back(p.filename().string());
        return p;
    }
};

inline json ledger_json(const PhaseLedger& L) {
    return {{"phi_d", jnum(L.phi_d)}, {"phi_g", jnum(L.phi_g)}, {"phi_isol", jnum(L.phi_isol)},
            {"phi_L", jnum(L.phi_L)}, {"eta", jnum(L.eta)}};
}

// ---- gate helpers ---------------------------------------------------------------------------------

inline GateConfig make_gate_config(const Physics& p) {
    GateConfig c;
    c.omega = p.omega;
    c.gamma = p.gamma;
    c.nbar = p.nbar;
    c.duration = p.T;
    c.grid = TimeGrid(p.n_steps, p.T);
    c.mass_scale = p.mass_scale;
    c.target_phase = p.target_phase;
    c.drive = ForceProfile::zero();
    return c;
}

struct DesignedGate {
    GateConfig cfg;
    GateDrive drive;
};

inline DesignedGate design(const GateConfig& base, const ForceProfile& shape, bool compensate) {
    DesignedGate d{base, design_gate_drive(base, shape, compensate ? DriveKind::Compensated : DriveKind::Uncompensated)};
    d.cfg.drive = d.drive.force;
    d.cfg.target_phase = d.drive.target;
    return d;
}

inline json gate_json(const GateOutcome& o, const DesignedGate& d) {
    return {{"ledger", ledger_json(o.ledger)},
            {"phi_total_re", jnum(o.ledger.phi_total().real())},
            {"phi_total_im", jnum(o.ledger.phi_total().imag())},
            {"Gamma", jnum(o.Gamma)},
            {"delta_phi", jnum(o.delta_phi)},
            {"fidelity", jnum(o.fidelity)},
            {"fidelity_bound", jnum(o.fidelity_bound)},
            {"closure_residual_max", jnum(o.closure_residual_max)},
            {"kappa0", jnum(d.drive.kappa0)},
            {"kappa", jnum(d.drive.kappa)},
            {"target_phase", jnum(d.drive.target)}};
}

// ---- scenario kinds ---------------------------------------------------------------------------------

inline void run_trajectory(Reader& root, Context& ctx, const std::filesystem::path& base) {
    auto m = root.object("mode");
    ModeParams mp;
    mp.omega = read_omega(m);
    mp.gamma = m.num("gamma", 0.0);
    mp.duration = m.num("T_us");
    long long n = m.integer("n_steps", 4096);
    if (n < 4) throw InvalidInput(m.field("n_steps") + ": must be at least 4");
    m.finish();
    mp.validate();
    auto fs = read_force(root.object("force"), base);
    std::optional<double> target;
    if (root.has("target_phase")) target = root.num("target_phase");
    cplx z0 = 0.0;
    if (root.has("z0")) {
        auto v = root.numbers("z0");
        if (v.size() != 2) throw InvalidInput("z0: expected [re, im]");
        z0 = {v[0], v[1]};
    }
    root.finish();

    TimeGrid g(static_cast<std::size_t>(n), mp.duration);
    auto force = single_mode_force(fs);
    double kappa = 1.0;
    if (target) {
        double achieved = single_mode_phase(force, mp, g);
        double t = *target;
        if (achieved != 0.0 && (achieved > 0) != (t > 0)) t = -t;
        kappa = kappa_from_phases(achieved, t);
        force = force.scaled(kappa);
    }
    auto path = propagate_closed_form(z0, force, mp, g);
    auto origin = constant_path(g, 0.0);
    auto L = ledger(path, origin, mp);
    auto cyc = check_cyclic(path);

    Csv csv({"t_us", "re_z", "im_z", "force"});
    for (std::size_t k = 0; k < g.size(); ++k) csv.row({g.t(k), path.z[k].real(), path.z[k].imag(), force(g.t(k))});
    csv.write(ctx.file("_path.csv"));
    ctx.results = {{"ledger", ledger_json(L)},
                   {"kappa", jnum(kappa)},
                   {"enclosed_area", jnum(enclosed_area(path))},
                   {"closure_residual", jnum(cyc.residual)},
                   {"offset_sensitivity", jnum(offset_sensitivity(force, mp, g.n_steps))},
                   {"z_T_re", jnum(path.back().real())},
                   {"z_T_im", jnum(path.back().imag())}};
}

inline void run_gate_kind(Reader& root, Context& ctx, const std::filesystem::path& base) {
    auto p = read_physics(root.object("physics"));
    auto fs = read_force(root.object("force"), base);
    root.finish();
    auto cfg = make_gate_config(p);
    auto shape = gate_shape(fs, cfg);
    auto d = design(cfg, shape, fs.compensate);
    auto o = run_gate(d.cfg);
    const auto& g = d.cfg.grid;
    Csv csv({"t_us", "force", "re_zplus_updown", "im_zplus_updown", "re_zminus_upup", "im_zminus_upup",
             "re_zplus_upup", "im_zplus_upup", "re_zminus_updown", "im_zminus_updown", "re_zplus_updown_S",
             "im_zplus_updown_S", "re_zminus_upup_S", "im_zminus_upup_S"});
    const auto& A = o.path(SpinCombo::UpDown, ModeIndex::Plus);
    const auto& P = o.path(SpinCombo::UpUp, ModeIndex::Minus);
    const auto& Pp = o.path(SpinCombo::UpUp, ModeIndex::Plus);
    const auto& Am = o.path(SpinCombo::UpDown, ModeIndex::Minus);
    for (std::size_t k = 0; k < g.size(); ++k) {
        double t = g.t(k);
        cplx aS = std::exp(-I * (d.cfg.omega_plus() * t)) * A.z[k];
        cplx pS = std::exp(-I * (d.cfg.omega_minus() * t)) * P.z[k];
        csv.row({t, d.cfg.drive(t), A.z[k].real(), A.z[k].imag(), P.z[k].real(), P.z[k].imag(), Pp.z[k].real(),
                 Pp.z[k].imag(), Am.z[k].real(), Am.z[k].imag(), aS.real(), aS.imag(), pS.real(), pS.imag()});
    }
    csv.write(ctx.file("_paths.csv"));
    ctx.results = gate_json(o, d);
    ctx.results["variant"] = fs.compensate ? "compensated" : "uncompensated";
    ctx.results["enclosed_area_zplus_updown"] = jnum(enclosed_area(A));
    ctx.results["enclosed_area_zminus_upup"] = jnum(enclosed_area(P));
}

inline const std::vector<std::string>& sweep_columns() {
    static const std::vector<std::string> c{"gamma_over_omega", "T_us", "nbar", "Gamma", "delta_phi_rad", "fidelity",
                                            "closure_residual_max"};
    return c;
}

inline void run_sweep(Reader& root, Context& ctx, const std::filesystem::path& base, bool over_gamma) {
    auto physics = root.object("physics");
    auto sweep = root.object("sweep");
    auto fs = read_force(root.object("force"), base);
    auto variants = root.strings("variants", {"compensated", "uncompensated"});
    for (auto& v : variants)
        if (v != "compensated" && v != "uncompensated")
            throw InvalidInput("variants: unknown variant '" + v + "'");
    std::vector<double> values = over_gamma ? sweep.numbers("gamma_over_omega") : sweep.numbers("T_us");
    sweep.finish();
    // the swept quantity may be absent from physics; a placeholder is validated instead
    Physics p = read_physics(physics, over_gamma);
    root.finish();
    for (double v : values) {
        if (over_gamma && !(v >= 0.0)) throw InvalidInput("sweep.gamma_over_omega: entries must be non-negative");
        if (!over_gamma && !(v > 0.0)) throw InvalidInput("sweep.T_us: entries must be positive");
    }
    double goo = p.gamma_over_omega ? *p.gamma_over_omega : p.gamma / p.omega;

    json failures = json::array();
    for (const auto& variant : variants) {
        Csv csv(sweep_columns());
        std::optional<ForceProfile> shape;
        for (double v : values) {
            Physics q = p;
            if (over_gamma) {
                q.gamma = v * q.omega;
            } else {
                q.T = v;
                q.gamma = goo * q.omega;
            }
            double ratio = q.gamma / q.omega;
            try {
                auto base_cfg = make_gate_config(q);
                if (!over_gamma || !shape) shape = gate_shape(fs, base_cfg);
                auto d = design(base_cfg, *shape, variant == "compensated");
                auto o = run_gate(d.cfg);
                csv.row({ratio, q.T, q.nbar, o.Gamma, o.delta_phi, o.fidelity, o.closure_residual_max});
            } catch (const NumericalError& e) {
                double nan = std::nan("");
                csv.row({ratio, q.T, q.nbar, nan, nan, nan, nan});
                failures.push_back({{"variant", variant}, {over_gamma ? "gamma_over_omega" : "T_us", v},
                                    {"error", e.what()}});
            }
        }
        csv.write(ctx.file("_" + variant + ".csv"));
        ctx.results[variant] = csv.as_json();
    }
    ctx.results["failed_points"] = failures;
}

struct ThermalSetup {
    Physics p;
    ForceSpec fs;
    std::vector<double> nbars;
    std::vector<double> xs;  // gamma nbar T
};

inline ThermalSetup read_thermal(Reader& root, const std::filesystem::path& base) {
    ThermalSetup s;
    s.p = read_physics(root.object("physics"));
    s.fs = read_force(root.object("force"), base);
    auto sw = root.object("sweep");
    sw.one_of("nbar", "gamma_nbar_T");
    double gT = s.p.gamma * s.p.T;
    if (sw.has("nbar")) {
        s.nbars = sw.numbers("nbar");
        for (double n : s.nbars) s.xs.push_back(n * gT);
    } else {
        s.xs = sw.numbers("gamma_nbar_T");
        for (double x : s.xs) {
            if (x != 0.0 && gT == 0.0) throw InvalidInput("sweep.gamma_nbar_T: needs gamma > 0");
            s.nbars.push_back(x == 0.0 ? 0.0 : x / gT);
        }
    }
    sw.finish();
    for (double n : s.nbars)
        if (!(n >= 0.0)) throw InvalidInput("sweep: nbar must be non-negative");
    return s;
}

inline void run_thermal_mc(Reader& root, Context& ctx, const std::filesystem::path& base, const Overrides& ov) {
    auto s = read_thermal(root, base);
    std::size_t n_samples = 5000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    if (auto mc = root.maybe_object("mc")) {
        long long n = mc->integer("n_samples", 5000);
        if (n < 2) throw InvalidInput(mc->field("n_samples") + ": must be at least 2");
        n_samples = static_cast<std::size_t>(n);
        long long sd = mc->integer("seed", 1);
        if (sd < 0) throw InvalidInput(mc->field("seed") + ": must be non-negative");
        seed = static_cast<std::uint64_t>(sd);
        long long th = mc->integer("threads", 0);
        if (th < 0) throw InvalidInput(mc->field("threads") + ": must be non-negative");
        threads = static_cast<unsigned>(th);
        mc->finish();
    }
    std::optional<double> path_x;
    std::uint64_t path_index = 0;
    if (auto pp = root.maybe_object("paths")) {
        path_x = pp->num("gamma_nbar_T");
        long long idx = pp->integer("realization", 0);
        if (idx < 0) throw InvalidInput(pp->field("realization") + ": must be non-negative");
        path_index = static_cast<std::uint64_t>(idx);
        pp->finish();
    }
    root.finish();
    if (ov.samples) n_samples = *ov.samples;
    if (ov.seed) seed = *ov.seed;
    if (ov.threads) threads = *ov.threads;
    require(n_samples >= 2, "samples: must be at least 2");

    auto cfg = make_gate_config(s.p);
    auto d = design(cfg, gate_shape(s.fs, cfg), s.fs.compensate);
    ThermalGate tg(d.cfg);
    Csv csv({"nbar", "gamma_nbar_T", "mean_F", "std_error", "n_samples", "seed"});
    for (std::size_t i = 0; i < s.nbars.size(); ++i) {
        auto e = monte_carlo_fidelity(tg, s.nbars[i], n_samples, seed, MCOptions{threads});
        csv.row({s.nbars[i], s.xs[i], e.mean, e.std_error, static_cast<double>(e.n_samples), static_cast<double>(seed)});
    }
    csv.write(ctx.file("_mc.csv"));
    ctx.results = {{"zero_temperature", gate_json(tg.deterministic(), d)}, {"mc", csv.as_json()}};

    if (path_x) {
        double gT = d.cfg.gamma * d.cfg.duration;
        require(*path_x == 0.0 || gT > 0.0, "paths.gamma_nbar_T: needs gamma > 0");
        double nbar = *path_x == 0.0 ? 0.0 : *path_x / gT;
        const auto& g = d.cfg.grid;
        auto noise = NoiseRealization::generate(seed, path_index, g, 2);
        std::vector<std::string> cols{"t_us"};
        std::vector<Path> noisy, clean;
        for (auto c : {SpinCombo::UpUp, SpinCombo::UpDown}) {
            auto f = mode_forces(c, d.cfg.drive, d.cfg);
            for (std::size_t m = 0; m < 2; ++m) {
                std::string lab = std::string(m == 0 ? "zplus_" : "zminus_") + to_string(c);
                noisy.push_back(sample_noisy_path(0.0, m == 0 ? f.plus : f.minus, d.cfg.gamma, noise.dW[m], g, nbar));
                clean.push_back(tg.deterministic().path(c, static_cast<ModeIndex>(m)));
                for (auto pre : {"re_", "im_"}) cols.push_back(pre + lab);
                for (auto pre : {"re_", "im_"}) cols.push_back(std::string(pre) + lab + "_T0");
            }
        }
        Csv pc(cols);
        for (std::size_t k = 0; k < g.size(); ++k) {
            std::vector<double> row{g.t(k)};
            for (std::size_t i = 0; i < noisy.size(); ++i) {
                row.push_back(noisy[i].z[k].real());
                row.push_back(noisy[i].z[k].imag());
                row.push_back(clean[i].z[k].real());
                row.push_back(clean[i].z[k].imag());
            }
            pc.row(row);
        }
        pc.write(ctx.file("_noisy_paths.csv"));
        ctx.results["noisy_paths"] = {{"gamma_nbar_T", *path_x}, {"nbar", nbar}, {"realization", path_index}};
    }
}

inline void run_cumulant(Reader& root, Context& ctx, const std::filesystem::path& base) {
    auto s = read_thermal(root, base);
    root.finish();
    auto cfg = make_gate_config(s.p);
    auto d = design(cfg, gate_shape(s.fs, cfg), s.fs.compensate);
    auto det = run_gate(d.cfg);
    Csv csv({"nbar", "gamma_nbar_T", "F_cumulant", "F_cumulant_unlinearized"});
    for (std::size_t i = 0; i < s.nbars.size(); ++i) {
        auto c = d.cfg;
        c.nbar = s.nbars[i];
        auto r = cumulant_fidelity(det, c);
        csv.row({s.nbars[i], s.xs[i], r.linearized, r.unlinearized});
    }
    csv.write(ctx.file("_cumulant.csv"));
    ctx.results = {{"zero_temperature", gate_json(det, d)}, {"cumulant", csv.as_json()}};
}

inline void run_oracle_check(Reader& root, Context& ctx, const std::filesystem::path& base) {
    auto p = read_physics(root.object("physics"));
    auto fs = read_force(root.object("force"), base);
    TruncationPolicy pol = TruncationPolicy::for_nbar(p.nbar);
    bool dump = false;
    if (auto o = root.maybe_object("oracle")) {
        pol.n_max = static_cast<int>(o->integer("n_max", pol.n_max));
        pol.tail_threshold = o->num("tail_threshold", pol.tail_threshold);
        pol.n_max_cap = static_cast<int>(o->integer("n_max_cap", pol.n_max_cap));
        dump = o->boolean("dump_rho", false);
        o->finish();
    }
    root.finish();
    pol.validate();
    auto cfg = make_gate_config(p);
    auto d = design(cfg, gate_shape(fs, cfg), fs.compensate);
    auto o = run_gate(d.cfg);

    // <a>(t) of each driven label against its path
    double dev = 0.0;
    int n_used = 0;
    std::optional<DensityMatrix> snapshot;
    for (auto c : {SpinCombo::UpUp, SpinCombo::UpDown}) {
        auto f = mode_forces(c, d.cfg.drive, d.cfg);
        for (std::size_t m = 0; m < 2; ++m) {
            auto run = solve_single_mode(m == 0 ? f.plus : f.minus, d.cfg.gamma, d.cfg.nbar, d.cfg.grid, pol,
                                         [](int n) { return fock_state(0, n); });
            const auto& path = o.path(c, static_cast<ModeIndex>(m));
            for (std::size_t k = 0; k < path.z.size(); ++k) dev = std::max(dev, std::abs(run.mean_a[k] - path.z[k]));
            n_used = std::max(n_used, run.n_max_used);
            if (c == SpinCombo::UpUp && m == 1) snapshot = run.final_state;
        }
    }
    auto go = solve_two_mode_gate(d.cfg, pol);
    double td = trace_distance(go.spin, to_matrix(ledger_spin_state(o)));
    Csv csv({"quantity", "ansatz", "oracle", "abs_diff"});
    csv.row({0, o.fidelity, go.fidelity, std::abs(o.fidelity - go.fidelity)});
    csv.row({1, 0.0, dev, dev});
    csv.row({2, 0.0, td, td});
    csv.write(ctx.file("_oracle.csv"));
    ctx.results = gate_json(o, d);
    ctx.results["oracle"] = {{"fidelity", jnum(go.fidelity)},
                             {"max_mean_a_deviation", jnum(dev)},
                             {"spin_trace_distance", jnum(td)},
                             {"n_max_used", std::max(n_used, go.n_max_used)},
                             {"csv_quantity_codes", {{"0", "fidelity"}, {"1", "max |<a> - z|"}, {"2", "spin trace distance"}}}};
    if (dump && snapshot) {
        write_density_matrix(ctx.file("_rho_com_upup.bin").string(), *snapshot);
    }
}

// ---- entry points ---------------------------------------------------------------------------------

struct RunResult {
    int exit_code = 0;
    std::string message;
    std::vector<std::string> files;
};

inline std::filesystem::path default_out_dir() {
    if (const char* e = std::getenv("DGATE_OUT_DIR"); e && *e) return e;
    return "out";
}

// Runs one scenario document. Errors are mapped to exit codes (2 input, 3 numerical).
inline RunResult run_config(const json& config, const Overrides& ov = {},
                            const std::filesystem::path& base_dir = ".") {
    RunResult res;
    try {
        Reader root(config, "config");
        long long ver = root.integer("schema_version");
        if (ver != schema_version)
            throw InvalidInput("config.schema_version: unsupported version " + std::to_string(ver));
        std::string kind = root.str("kind");
        Context ctx;
        ctx.name = root.str("name", kind);
        for (char c : ctx.name)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'))
                throw InvalidInput("config.name: only letters, digits, '-' and '_' are allowed");
        std::string desc = root.str("description", "");
        (void)desc;
        ctx.out_dir = ov.out_dir ? std::filesystem::path(*ov.out_dir) : default_out_dir();
        std::filesystem::create_directories(ctx.out_dir);

        if (kind == "trajectory") run_trajectory(root, ctx, base_dir);
        else if (kind == "gate") run_gate_kind(root, ctx, base_dir);
        else if (kind == "sweep-gamma") run_sweep(root, ctx, base_dir, true);
        else if (kind == "sweep-T") run_sweep(root, ctx, base_dir, false);
        else if (kind == "thermal-mc") run_thermal_mc(root, ctx, base_dir, ov);
        else if (kind == "cumulant") run_cumulant(root, ctx, base_dir);
        else if (kind == "oracle-check") run_oracle_check(root, ctx, base_dir);
        else throw InvalidInput("config.kind: unknown scenario kind '" + kind + "'");

        json summary = {{"name", ctx.name}, {"kind", kind}, {"schema_version", schema_version},
                        {"config", config}, {"results", ctx.results}};
        auto sp = ctx.out_dir / (ctx.name + "_summary.json");
        std::ofstream os(sp, std::ios::binary);
        if (!os) throw InvalidInput("cannot write " + sp.string());
        os << summary.dump(2) << "\n";
        ctx.files.push_back(sp.filename().string());
        res.files = ctx.files;
        res.message = "ok";
    } catch (const InvalidInput& e) {
        res.exit_code = 2;
        res.message = std::string("validation error: ") + e.what();
    } catch (const json::exception& e) {
        res.exit_code = 2;
        res.message = std::string("validation error: ") + e.what();
    } catch (const std::filesystem::filesystem_error& e) {
        res.exit_code = 2;
        res.message = std::string("validation error: ") + e.what();
    } catch (const std::exception& e) {
        res.exit_code = 3;
        res.message = std::string("numerical error: ") + e.what();
    }
    return res;
}

inline RunResult run_file(const std::string& path, const Overrides& ov = {}) {
    std::ifstream is(path);
    if (!is) return {2, "validation error: cannot read config " + path, {}};
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        return {2, std::string("validation error: ") + path + ": " + e.what(), {}};
    }
    auto base = std::filesystem::path(path).parent_path();
    return run_config(j, ov, base.empty() ? "." : base);
}

// ---- presets ----------------------------------------------------------------------------------------

inline std::vector<json> preset(const std::string& name) {
    const double pi = std::numbers::pi;
    std::vector<json> out;
    auto gs = json{{"family", "gram-schmidt"}, {"k0", 6}};
    if (name == "fig2") {
        // drive Omega = 2 rad/us, trap at 2 Omega or 4 Omega, gamma/Omega in {0, 0.2}, phase pi
        const double Om = 2.0;
        const char* tag[] = {"a", "b", "c", "d"};
        int i = 0;
        for (double g : {0.0, 0.2 * Om})
            for (double w : {2 * Om, 4 * Om}) {
                out.push_back({{"schema_version", 1},
                               {"kind", "trajectory"},
                               {"name", std::string("fig2") + tag[i++]},
                               {"mode", {{"omega", w}, {"gamma", g}, {"T_us", 2 * pi / Om}, {"n_steps", 4096}}},
                               {"force", {{"family", "scaled-sine"}, {"amplitude", 1.0}, {"gamma", g}, {"Omega", Om}}},
                               {"target_phase", pi}});
            }
    } else if (name == "fig3") {
        auto gate = [&](const char* n, double goo, double T, bool comp) {
            json f = gs;
            f["compensate"] = comp;
            return json{{"schema_version", 1},
                        {"kind", "gate"},
                        {"name", n},
                        {"physics", {{"omega_2pi_MHz", 2.0}, {"gamma_over_omega", goo}, {"T_us", T}}},
                        {"force", f}};
        };
        out.push_back(gate("fig3a", 0.0, 0.8, true));
        out.push_back(gate("fig3b", 0.1, 0.8, false));
        out.push_back(gate("fig3c", 0.1, 0.8, true));
        out.push_back(gate("fig3d", 0.0, 0.3, true));
    } else if (name == "fig4") {
        std::vector<double> goo;
        for (int e = -4; e <= 0; ++e)
            for (double m : {1.0, 2.0, 5.0})
                if (e < 0 || m == 1.0) goo.push_back(m * std::pow(10.0, e));
        std::vector<double> Ts;
        for (int k = 0; k <= 14; ++k) Ts.push_back(0.3 + 0.05 * k);
        out.push_back({{"schema_version", 1},
                       {"kind", "sweep-gamma"},
                       {"name", "fig4_gamma"},
                       {"physics", {{"omega_2pi_MHz", 2.0}, {"T_us", 0.8}}},
                       {"force", gs},
                       {"sweep", {{"gamma_over_omega", goo}}}});
        out.push_back({{"schema_version", 1},
                       {"kind", "sweep-T"},
                       {"name", "fig4_T"},
                       {"physics", {{"omega_2pi_MHz", 2.0}, {"gamma_over_omega", 1e-4}, {"T_us", 0.8}}},
                       {"force", gs},
                       {"sweep", {{"T_us", Ts}}}});
    } else if (name == "fig5") {
        out.push_back({{"schema_version", 1},
                       {"kind", "thermal-mc"},
                       {"name", "fig5"},
                       {"physics", {{"omega_2pi_MHz", 2.0}, {"gamma_over_omega", 0.1}, {"T_us", 0.8}}},
                       {"force", gs},
                       {"sweep", {{"gamma_nbar_T", {0.03}}}},
                       {"mc", {{"n_samples", 5000}, {"seed", 1}}},
                       {"paths", {{"gamma_nbar_T", 0.03}, {"realization", 0}}}});
    } else if (name == "fig6") {
        std::vector<double> xs;
        for (int k = 0; k <= 10; ++k) xs.push_back(0.01 * k);
        json phys = {{"omega_2pi_MHz", 2.0}, {"gamma_over_omega", 0.2}, {"T_us", 0.3}};
        out.push_back({{"schema_version", 1},
                       {"kind", "thermal-mc"},
                       {"name", "fig6_mc"},
                       {"physics", phys},
                       {"force", gs},
                       {"sweep", {{"gamma_nbar_T", xs}}},
                       {"mc", {{"n_samples", 5000}, {"seed", 1}}}});
        out.push_back({{"schema_version", 1},
                       {"kind", "cumulant"},
                       {"name", "fig6_cumulant"},
                       {"physics", phys},
                       {"force", gs},
                       {"sweep", {{"gamma_nbar_T", xs}}}});
    } else {
        throw InvalidInput("unknown preset '" + name + "' (fig2, fig3, fig4, fig5, fig6)");
    }
    return out;
}

}  // namespace dgate::scenario
