#include "nmcool/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "nmcool/constants.hpp"
#include "nmcool/errors.hpp"

namespace nmcool {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::params: return "params";
        case RunMode::dispersion: return "dispersion";
        case RunMode::cool: return "cool";
        case RunMode::steady: return "steady";
        case RunMode::sweep: return "sweep";
        case RunMode::qswitch: return "qswitch";
    }
    return "?";
}

namespace {

// ---------------------------------------------------------------------------
// Schema reading

// A JSON object being read at a key path; every key must be consumed.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* get(const std::string& key) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    std::optional<double> quantity(const std::string& key, Dimension dim) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        return parse_quantity(*v, dim, key_path(key));
    }

    double quantity_or(const std::string& key, Dimension dim, double fallback) {
        return quantity(key, dim).value_or(fallback);
    }

    std::optional<int> integer(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
        return v->get<int>();
    }

    std::optional<std::string> string(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) throw ConfigError(key_path(key), "expected a string");
        return v->get<std::string>();
    }

    std::optional<ObjectReader> object(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        return ObjectReader(*v, key_path(key));
    }

    void finish() const {
        for (const auto& [k, v] : obj_.items())
            if (!seen_.count(k)) throw ConfigError(key_path(k), "unknown key");
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

double require(std::optional<double> v, const std::string& path) {
    if (!v) throw ConfigError(path, "required");
    return *v;
}

PhysicalConfig parse_physical(ObjectReader r, std::optional<double>& n_0_ref) {
    PhysicalConfig p;
    bool preset = false;
    if (auto name = r.string("preset")) {
        if (*name != "gaas_baseline")
            throw ConfigError(r.key_path("preset"), "unknown preset \"" + *name + "\" (known: gaas_baseline)");
        p = gaas_baseline();
        preset = true;
    }
    auto field = [&](const char* key, Dimension dim, double& target) {
        if (auto v = r.quantity(key, dim))
            target = *v;
        else if (!preset)
            throw ConfigError(r.key_path(key), "required unless a preset is given");
    };
    field("gamma_n", Dimension::gyromagnetic, p.gamma_n);
    field("B_field", Dimension::magnetic_field, p.B_field);
    field("J_exchange", Dimension::rate, p.J_exchange);
    field("spin_I", Dimension::dimensionless, p.spin_I);
    field("lattice_constant", Dimension::length, p.lattice_constant);
    field("rho_n", Dimension::density, p.rho_n);
    field("g_onq", Dimension::onq_response, p.g_onq);
    field("E_pump", Dimension::electric_field, p.E_pump);
    field("omega_h", Dimension::rate, p.omega_h);
    field("Q_h", Dimension::dimensionless, p.Q_h);
    field("temperature", Dimension::temperature, p.temperature);
    if (auto lat = r.string("lattice")) {
        if (*lat == "fcc")
            p.lattice = Lattice::fcc;
        else if (*lat == "simple_cubic")
            p.lattice = Lattice::simple_cubic;
        else
            throw ConfigError(r.key_path("lattice"), "expected \"fcc\" or \"simple_cubic\"");
    } else if (!preset) {
        throw ConfigError(r.key_path("lattice"), "required unless a preset is given");
    }
    p.N_spins = r.quantity("N_spins", Dimension::dimensionless);
    p.V_h = r.quantity("V_h", Dimension::volume);
    n_0_ref = r.quantity("n_0_ref", Dimension::dimensionless);
    r.finish();
    return p;
}

EffectiveOverrides parse_effective(ObjectReader r) {
    EffectiveOverrides e;
    e.omega_0 = r.quantity("omega_0", Dimension::rate);
    e.detuning = r.quantity("detuning", Dimension::rate);
    e.G_h = r.quantity("G_h", Dimension::rate);
    e.kappa_0 = r.quantity("kappa_0", Dimension::rate);
    e.kappa_h = r.quantity("kappa_h", Dimension::rate);
    e.n_th = r.quantity("n_th", Dimension::dimensionless);
    r.finish();
    return e;
}

Dimension axis_dimension(SweepAxisName a) {
    return a == SweepAxisName::n_th ? Dimension::dimensionless : Dimension::rate;
}

SweepAxis parse_axis(ObjectReader r) {
    const auto name = r.string("name");
    if (!name) throw ConfigError(r.key_path("name"), "required");
    const auto axis = parse_sweep_axis(*name);
    if (!axis) throw ConfigError(r.key_path("name"), "unknown axis \"" + *name + "\" (known: G_h, kappa_0, kappa_h, n_th, detuning)");
    SweepAxis out{*axis, {}};
    const Dimension dim = axis_dimension(*axis);
    if (const json* vals = r.get("values")) {
        if (!vals->is_array() || vals->empty()) throw ConfigError(r.key_path("values"), "expected a non-empty array");
        for (std::size_t k = 0; k < vals->size(); ++k)
            out.values.push_back(parse_quantity((*vals)[k], dim, r.key_path("values") + "[" + std::to_string(k) + "]"));
        for (const char* k : {"from", "to", "count", "spacing"})
            if (r.get(k)) throw ConfigError(r.key_path(k), "not allowed together with values");
    } else {
        const double from = require(r.quantity("from", dim), r.key_path("from"));
        const double to = require(r.quantity("to", dim), r.key_path("to"));
        const int count = r.integer("count").value_or(0);
        if (count < 1) throw ConfigError(r.key_path("count"), "required, >= 1");
        const std::string spacing = r.string("spacing").value_or("log");
        if (count == 1) {
            out.values = {from};
        } else if (spacing == "log") {
            if (!(from > 0) || !(to > from)) throw ConfigError(r.key_path("from"), "log spacing needs 0 < from < to");
            out.values = log_space(from, to, count);
        } else if (spacing == "linear") {
            if (!(to > from)) throw ConfigError(r.key_path("from"), "linear spacing needs from < to");
            for (int k = 0; k < count; ++k) out.values.push_back(from + (to - from) * k / (count - 1));
            out.values.back() = to;
        } else {
            throw ConfigError(r.key_path("spacing"), "expected \"log\" or \"linear\"");
        }
    }
    for (std::size_t k = 1; k < out.values.size(); ++k)
        if (!(out.values[k] > out.values[k - 1])) throw ConfigError(r.key_path("values"), "must increase strictly");
    r.finish();
    return out;
}

bool has_required_effective(const EffectiveOverrides& e) { return e.G_h && e.kappa_0 && e.kappa_h && e.n_th; }

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::string& default_name) {
    ObjectReader r(doc, "");
    ExperimentConfig cfg;
    cfg.name = r.string("name").value_or(default_name);

    const auto mode = r.string("mode");
    if (!mode) throw ConfigError("mode", "required");
    bool found = false;
    for (auto m : {RunMode::params, RunMode::dispersion, RunMode::cool, RunMode::steady, RunMode::sweep,
                   RunMode::qswitch})
        if (*mode == to_string(m)) {
            cfg.mode = m;
            found = true;
        }
    if (!found) throw ConfigError("mode", "unknown mode \"" + *mode + "\" (known: params, dispersion, cool, steady, sweep, qswitch)");

    if (auto p = r.object("physical")) cfg.physical = parse_physical(*p, cfg.n_0_ref);
    if (auto e = r.object("effective")) cfg.effective = parse_effective(*e);

    if (const json* runs = r.get("runs")) {
        if (!runs->is_array()) throw ConfigError("runs", "expected an array");
        std::set<std::string> labels;
        for (std::size_t k = 0; k < runs->size(); ++k) {
            ObjectReader rr((*runs)[k], "runs[" + std::to_string(k) + "]");
            RunSpec spec;
            const auto label = rr.string("label");
            if (!label || label->empty()) throw ConfigError(rr.key_path("label"), "required");
            for (char ch : *label)
                if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-'))
                    throw ConfigError(rr.key_path("label"), "only letters, digits, '_' and '-' are allowed");
            if (!labels.insert(*label).second) throw ConfigError(rr.key_path("label"), "duplicate label");
            spec.label = *label;
            if (auto e = rr.object("effective")) spec.effective = parse_effective(*e);
            spec.t_end = rr.quantity("t_end", Dimension::time);
            rr.finish();
            cfg.runs.push_back(std::move(spec));
        }
    }

    if (auto s = r.object("space")) {
        cfg.dim_magnon = s->integer("dim_magnon").value_or(cfg.dim_magnon);
        cfg.dim_photon = s->integer("dim_photon").value_or(cfg.dim_photon);
        s->finish();
    }
    if (auto f = r.string("frame")) {
        if (*f == "co_rotating")
            cfg.frame = Frame::co_rotating;
        else if (*f == "pump")
            cfg.frame = Frame::pump;
        else
            throw ConfigError("frame", "expected \"co_rotating\" or \"pump\"");
    }
    if (auto t = r.object("time")) {
        cfg.time.t_end = t->quantity("t_end", Dimension::time);
        cfg.time.t_end_factor = t->quantity_or("t_end_factor", Dimension::dimensionless, cfg.time.t_end_factor);
        cfg.time.samples = t->integer("samples").value_or(cfg.time.samples);
        t->finish();
        if (cfg.time.samples < 2) throw ConfigError("time.samples", "must be >= 2");
        if (cfg.time.t_end && !(*cfg.time.t_end > 0)) throw ConfigError("time.t_end", "must be > 0");
        if (!(cfg.time.t_end_factor > 0)) throw ConfigError("time.t_end_factor", "must be > 0");
    }
    if (auto s = r.object("sweep")) {
        const json* axes = s->get("axes");
        if (!axes || !axes->is_array() || axes->empty() || axes->size() > 3)
            throw ConfigError(s->key_path("axes"), "expected an array of 1 to 3 axes");
        for (std::size_t k = 0; k < axes->size(); ++k)
            cfg.sweep_axes.push_back(parse_axis(ObjectReader((*axes)[k], s->key_path("axes") + "[" + std::to_string(k) + "]")));
        s->finish();
        for (std::size_t a = 0; a < cfg.sweep_axes.size(); ++a)
            for (std::size_t b = a + 1; b < cfg.sweep_axes.size(); ++b)
                if (cfg.sweep_axes[a].name == cfg.sweep_axes[b].name) throw ConfigError("sweep.axes", "duplicate axis");
    }
    if (auto q = r.object("qswitch")) {
        cfg.qswitch.kappa_low = q->quantity_or("kappa_low", Dimension::rate, 0.0);
        cfg.qswitch.kappa_high = q->quantity("kappa_high", Dimension::rate);
        cfg.qswitch.hold_time = q->quantity("hold_time", Dimension::time);
        cfg.qswitch.dump_time = q->quantity("dump_time", Dimension::time);
        cfg.qswitch.cycles = q->integer("cycles").value_or(1);
        q->finish();
        if (cfg.qswitch.cycles < 1) throw ConfigError("qswitch.cycles", "must be >= 1");
    }
    if (auto d = r.object("dispersion")) {
        cfg.dispersion.points = d->integer("points").value_or(cfg.dispersion.points);
        if (const json* k = d->get("k_end")) {
            if (!k->is_array() || k->size() != 3) throw ConfigError(d->key_path("k_end"), "expected [kx, ky, kz] in 1/m");
            for (int i = 0; i < 3; ++i) {
                if (!(*k)[i].is_number()) throw ConfigError(d->key_path("k_end"), "expected numbers in 1/m");
                cfg.dispersion.k_end(i) = (*k)[i].get<double>();
            }
        }
        d->finish();
        if (cfg.dispersion.points < 2) throw ConfigError("dispersion.points", "must be >= 2");
    }
    if (auto s = r.object("solver")) {
        cfg.integrator.rtol = s->quantity_or("rtol", Dimension::dimensionless, cfg.integrator.rtol);
        cfg.integrator.atol = s->quantity_or("atol", Dimension::dimensionless, cfg.integrator.atol);
        cfg.integrator.max_trace_drift =
            s->quantity_or("max_trace_drift", Dimension::dimensionless, cfg.integrator.max_trace_drift);
        if (auto d = s->integer("dense_limit")) cfg.dense_limit = *d;
        s->finish();
        if (!(cfg.integrator.rtol > 0) || !(cfg.integrator.atol > 0)) throw ConfigError("solver", "tolerances must be > 0");
    }
    if (auto o = r.object("output")) {
        cfg.output_prefix = o->string("prefix").value_or("");
        o->finish();
    }
    if (cfg.output_prefix.empty()) cfg.output_prefix = cfg.name;
    r.finish();

    if (cfg.dim_magnon < 2) throw ConfigError("space.dim_magnon", "must be >= 2");
    if (cfg.dim_photon < 2) throw ConfigError("space.dim_photon", "must be >= 2");

    const bool needs_effective = cfg.mode != RunMode::dispersion;
    if (needs_effective && !cfg.physical) {
        auto check = [](const EffectiveOverrides& e, const std::string& where) {
            if (!e.G_h) throw ConfigError(where + ".G_h", "required when there is no physical block");
            if (!e.kappa_0) throw ConfigError(where + ".kappa_0", "required when there is no physical block");
            if (!e.kappa_h) throw ConfigError(where + ".kappa_h", "required when there is no physical block");
            if (!e.n_th) throw ConfigError(where + ".n_th", "required when there is no physical block");
        };
        if (cfg.runs.empty()) {
            check(cfg.effective, "effective");
        } else {
            for (std::size_t k = 0; k < cfg.runs.size(); ++k) {
                EffectiveOverrides merged = cfg.effective;
                const auto& o = cfg.runs[k].effective;
                for (auto [dst, src] : {std::pair{&merged.G_h, &o.G_h}, {&merged.kappa_0, &o.kappa_0},
                                        {&merged.kappa_h, &o.kappa_h}, {&merged.n_th, &o.n_th}})
                    if (*src) *dst = *src;
                if (!has_required_effective(merged)) check(merged, "runs[" + std::to_string(k) + "].effective");
            }
        }
    }
    if (cfg.mode == RunMode::dispersion && !cfg.physical) throw ConfigError("physical", "required for mode dispersion");
    if (cfg.mode == RunMode::sweep && cfg.sweep_axes.empty()) throw ConfigError("sweep.axes", "required for mode sweep");
    if (cfg.frame == Frame::pump && !cfg.physical && !cfg.effective.omega_0)
        throw ConfigError("effective.omega_0", "required in the pump frame when there is no physical block");
    return cfg;
}

// ---------------------------------------------------------------------------
// Parameter resolution and validation

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open " + path);
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(doc, fs::path(path).stem().string());
}

namespace {

void apply(const EffectiveOverrides& o, ResolvedParams& r) {
    auto set = [&](const std::optional<double>& v, double& target, const char* name) {
        if (v) {
            target = *v;
            r.source[name] = "override";
        }
    };
    set(o.omega_0, r.params.omega_0, "omega_0");
    set(o.detuning, r.params.detuning, "detuning");
    set(o.G_h, r.params.G_h, "G_h");
    set(o.kappa_0, r.params.kappa_0, "kappa_0");
    set(o.kappa_h, r.params.kappa_h, "kappa_h");
    set(o.n_th, r.params.n_th, "n_th");
}

json effective_json(const EffectiveParams& p) {
    return json{{"omega_0", p.omega_0}, {"detuning", p.detuning}, {"G_h", p.G_h},
                {"kappa_0", p.kappa_0}, {"kappa_h", p.kappa_h}, {"n_th", p.n_th}};
}

json overrides_json(const EffectiveOverrides& o) {
    json j = json::object();
    if (o.omega_0) j["omega_0"] = *o.omega_0;
    if (o.detuning) j["detuning"] = *o.detuning;
    if (o.G_h) j["G_h"] = *o.G_h;
    if (o.kappa_0) j["kappa_0"] = *o.kappa_0;
    if (o.kappa_h) j["kappa_h"] = *o.kappa_h;
    if (o.n_th) j["n_th"] = *o.n_th;
    return j;
}

json physical_json(const PhysicalConfig& p, std::optional<double> n_0_ref) {
    json j{{"gamma_n", p.gamma_n},
           {"B_field", p.B_field},
           {"J_exchange", p.J_exchange},
           {"spin_I", p.spin_I},
           {"lattice", to_string(p.lattice)},
           {"lattice_constant", p.lattice_constant},
           {"rho_n", p.rho_n},
           {"g_onq", p.g_onq},
           {"E_pump", p.E_pump},
           {"omega_h", p.omega_h},
           {"Q_h", p.Q_h},
           {"temperature", p.temperature}};
    if (p.N_spins) j["N_spins"] = *p.N_spins;
    if (p.V_h) j["V_h"] = *p.V_h;
    if (n_0_ref) j["n_0_ref"] = *n_0_ref;
    return j;
}

struct ResolvedRun {
    std::string label;
    std::string key_path;  // where its overrides live, for error messages
    ResolvedParams resolved;
};

std::vector<ResolvedRun> resolved_runs(const ExperimentConfig& cfg) {
    std::vector<ResolvedRun> out;
    if (cfg.runs.empty()) {
        out.push_back({"", "effective", resolve_params(cfg)});
    } else {
        for (std::size_t k = 0; k < cfg.runs.size(); ++k)
            out.push_back({cfg.runs[k].label, "runs[" + std::to_string(k) + "].effective",
                           resolve_params(cfg, cfg.runs[k].effective)});
    }
    return out;
}

double run_t_end(const ExperimentConfig& cfg, std::size_t run_index, const EffectiveParams& p) {
    if (run_index < cfg.runs.size() && cfg.runs[run_index].t_end) return *cfg.runs[run_index].t_end;
    if (cfg.time.t_end) return *cfg.time.t_end;
    const double rate = slowest_relaxation_rate(p);
    if (!(rate > 0)) throw ConfigError("time.t_end", "required when the populations do not relax");
    return cfg.time.t_end_factor / rate;
}

Eigen::Vector3d dispersion_end(const ExperimentConfig& cfg) {
    if (cfg.dispersion.k_end.norm() > 0) return cfg.dispersion.k_end;
    // X point: 2 pi/a along x for the fcc cubic cell, pi/a for simple cubic
    const double a = cfg.physical->lattice_constant;
    const double kx = cfg.physical->lattice == Lattice::fcc ? constants::two_pi / a : constants::pi / a;
    return {kx, 0, 0};
}

Eigen::Index dense_limit(const ExperimentConfig& cfg) {
    if (cfg.dense_limit) return *cfg.dense_limit;
    return (cfg.mode == RunMode::sweep || cfg.mode == RunMode::qswitch) ? 0 : 3000;
}

QSwitchSchedule make_schedule(const QSwitchSpec& spec, const EffectiveParams& p) {
    QSwitchSchedule s;
    s.kappa_low = spec.kappa_low;
    s.kappa_high = spec.kappa_high.value_or(fast_dump_rate(p));
    s.hold_time = spec.hold_time ? *spec.hold_time : (p.G_h > 0 ? constants::pi / (2 * p.G_h) : 0.0);
    s.dump_time = spec.dump_time ? *spec.dump_time : (s.kappa_high > 0 ? 5 / s.kappa_high : 0.0);
    s.cycles = spec.cycles;
    return s;
}

std::string split_key(const std::string& violation, std::string& message) {
    const auto pos = violation.find(": ");
    if (pos == std::string::npos) {
        message = violation;
        return "<config>";
    }
    message = violation.substr(pos + 2);
    return violation.substr(0, pos);
}

}  // namespace

ResolvedParams resolve_params(const ExperimentConfig& cfg, const EffectiveOverrides& run) {
    ResolvedParams r;
    for (const char* f : {"omega_0", "detuning", "G_h", "kappa_0", "kappa_h", "n_th"}) r.source[f] = "default";
    if (cfg.physical) {
        if (const auto v = cfg.physical->violations(); !v.empty()) {
            std::string msg;
            const std::string key = split_key(v.front(), msg);
            throw ConfigError("physical." + key, msg);
        }
        r.params = derive_effective_params(*cfg.physical, cfg.n_0_ref);
        for (auto& [k, v] : r.source) v = "derived";
    }
    apply(cfg.effective, r);
    apply(run, r);
    return r;
}

ValidationReport validate_experiment(const ExperimentConfig& cfg) {
    ValidationReport rep;
    if (cfg.physical)
        for (const auto& v : cfg.physical->violations()) rep.violations.push_back("physical." + v);
    if (!rep.violations.empty() || cfg.mode == RunMode::dispersion) return rep;

    std::vector<ResolvedRun> runs;
    try {
        runs = resolved_runs(cfg);
    } catch (const std::exception& e) {
        rep.violations.push_back(e.what());
        return rep;
    }
    for (const auto& run : runs) {
        const EffectiveParams& p = run.resolved.params;
        for (const auto& v : p.violations()) rep.violations.push_back(run.key_path + "." + v);
        if (cfg.mode == RunMode::steady && p.kappa_0 == 0 && p.kappa_h == 0)
            rep.violations.push_back(run.key_path + ": steady state needs kappa_0 > 0 or kappa_h > 0");
        const double need = 6 * p.n_th;
        const std::string who = run.label.empty() ? "" : " (run " + run.label + ")";
        if (!(need < cfg.dim_magnon))
            rep.warnings.push_back("space.dim_magnon: truncation may be inadequate, 6 n_th = " + format_double(need) +
                                   " >= " + std::to_string(cfg.dim_magnon) + who);
        if (!(need < cfg.dim_photon))
            rep.warnings.push_back("space.dim_photon: truncation may be inadequate, 6 n_th = " + format_double(need) +
                                   " >= " + std::to_string(cfg.dim_photon) + who);
    }
    if (cfg.mode == RunMode::qswitch) {
        for (const auto& run : runs) {
            const QSwitchSchedule s = make_schedule(cfg.qswitch, run.resolved.params);
            if (cfg.sweep_axes.empty()) {
                try {
                    s.validate();
                } catch (const DomainError& e) {
                    rep.violations.push_back(std::string("qswitch: ") + e.what());
                }
            }
        }
    }
    return rep;
}

ValidationReport validate_config_file(const std::string& path) {
    try {
        return validate_experiment(load_config(path));
    } catch (const ConfigError& e) {
        ValidationReport rep;
        rep.violations.push_back(e.what());
        return rep;
    }
}

json describe_params(const ExperimentConfig& cfg) {
    json out;
    out["name"] = cfg.name;
    out["mode"] = to_string(cfg.mode);
    out["unit_convention"] = unit_convention();
    if (cfg.physical) {
        const PhysicalConfig& p = *cfg.physical;
        out["physical"] = physical_json(p, cfg.n_0_ref);
        if (p.violations().empty()) {
            json d;
            const double G = collective_coupling(p);
            d["omega_0"] = p.gamma_n * p.B_field;
            d["n_th"] = thermal_occupation(p.gamma_n * p.B_field, p.temperature);
            d["kappa_h"] = p.omega_h / p.Q_h;
            d["G_h"] = G;
            d["zero_point_field_V_per_m_at_1_m3"] = zero_point_field(p.omega_h, 1.0);
            d["spin_density"] = spin_density(p);
            d["four_magnon_prefactor"] = four_magnon_prefactor();
            if (p.E_pump > 0) d["G_h_per_E_pump_kHz_per_MV_per_m"] = G / constants::hz(1e3) / (p.E_pump / 1e6);
            d["G_h_kHz"] = G / constants::hz(1e3);
            out["derived"] = d;
        }
    }
    json runs = json::array();
    for (const auto& run : resolved_runs(cfg)) {
        json j;
        j["label"] = run.label;
        j["effective"] = effective_json(run.resolved.params);
        j["source"] = run.resolved.source;
        const EffectiveParams& p = run.resolved.params;
        j["effective_kHz"] = json{{"omega_0", p.omega_0 / constants::hz(1e3)},
                                  {"detuning", p.detuning / constants::hz(1e3)},
                                  {"G_h", p.G_h / constants::hz(1e3)},
                                  {"kappa_0", p.kappa_0 / constants::hz(1e3)},
                                  {"kappa_h", p.kappa_h / constants::hz(1e3)}};
        runs.push_back(j);
    }
    out["runs"] = runs;
    out["precedence"] = "run effective overrides > base effective overrides > derived from physical > defaults (0)";
    return out;
}

json resolved_config(const ExperimentConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    j["mode"] = to_string(cfg.mode);
    if (cfg.physical) j["physical"] = physical_json(*cfg.physical, cfg.n_0_ref);
    const bool uses_time = cfg.mode == RunMode::cool;
    if (cfg.mode != RunMode::dispersion) {
        const auto runs = resolved_runs(cfg);
        if (cfg.runs.empty()) {
            j["effective"] = effective_json(runs.front().resolved.params);
        } else {
            j["effective"] = overrides_json(cfg.effective);
            json arr = json::array();
            for (std::size_t k = 0; k < runs.size(); ++k) {
                json r{{"label", runs[k].label}, {"effective", effective_json(runs[k].resolved.params)}};
                if (uses_time) r["t_end"] = run_t_end(cfg, k, runs[k].resolved.params);
                arr.push_back(r);
            }
            j["runs"] = arr;
        }
    }
    j["space"] = json{{"dim_magnon", cfg.dim_magnon}, {"dim_photon", cfg.dim_photon}};
    j["frame"] = cfg.frame == Frame::pump ? "pump" : "co_rotating";
    json time{{"samples", cfg.time.samples}, {"t_end_factor", cfg.time.t_end_factor}};
    if (cfg.time.t_end)
        time["t_end"] = *cfg.time.t_end;
    else if (uses_time && cfg.runs.empty())
        time["t_end"] = run_t_end(cfg, 0, resolve_params(cfg).params);
    j["time"] = time;
    if (!cfg.sweep_axes.empty()) {
        json axes = json::array();
        for (const auto& a : cfg.sweep_axes) axes.push_back(json{{"name", to_string(a.name)}, {"values", a.values}});
        j["sweep"] = json{{"axes", axes}};
    }
    if (cfg.mode == RunMode::qswitch) {
        json q{{"kappa_low", cfg.qswitch.kappa_low}, {"cycles", cfg.qswitch.cycles}};
        if (cfg.qswitch.kappa_high) q["kappa_high"] = *cfg.qswitch.kappa_high;
        if (cfg.qswitch.hold_time) q["hold_time"] = *cfg.qswitch.hold_time;
        if (cfg.qswitch.dump_time) q["dump_time"] = *cfg.qswitch.dump_time;
        j["qswitch"] = q;
    }
    if (cfg.mode == RunMode::dispersion) {
        const Eigen::Vector3d k = dispersion_end(cfg);
        j["dispersion"] = json{{"points", cfg.dispersion.points}, {"k_end", {k(0), k(1), k(2)}}};
    }
    j["solver"] = json{{"rtol", cfg.integrator.rtol},
                       {"atol", cfg.integrator.atol},
                       {"max_trace_drift", cfg.integrator.max_trace_drift},
                       {"dense_limit", dense_limit(cfg)}};
    j["output"] = json{{"prefix", cfg.output_prefix}};
    return j;
}

// ---------------------------------------------------------------------------
// Output

std::string csv_row(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t k = 0; k < fields.size(); ++k) {
        if (k) line += ',';
        const std::string& f = fields[k];
        if (f.find_first_of(",\"\n") == std::string::npos) {
            line += f;
        } else {
            line += '"';
            for (char ch : f) {
                if (ch == '"') line += '"';
                line += ch == '\n' ? ' ' : ch;
            }
            line += '"';
        }
    }
    line += '\n';
    return line;
}

namespace {

std::string num(double x) { return format_double(x); }
std::string num(const std::optional<double>& x) { return x ? format_double(*x) : ""; }

class CsvFile {
public:
    CsvFile(const fs::path& path, const std::vector<std::string>& header) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        out_ << csv_row(header);
    }
    void row(const std::vector<std::string>& fields) { out_ << csv_row(fields); }
    std::string close() {
        out_.close();
        if (!out_) throw std::runtime_error("error writing " + path_.string());
        return path_.string();
    }

private:
    fs::path path_;
    std::ofstream out_;
};

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string write_trajectory(const fs::path& path, const TrajectoryRecord& tr) {
    CsvFile f(path, {"t", "n_magnon", "n_photon", "entropy_magnon", "trace_error"});
    for (std::size_t k = 0; k < tr.size(); ++k)
        f.row({num(tr.times[k]), num(tr.n_magnon[k]), num(tr.n_photon[k]), num(tr.entropy_magnon[k]),
               num(tr.trace_error[k])});
    return f.close();
}

json trajectory_diagnostics(const TrajectoryRecord& tr) {
    return json{{"samples", tr.size()},
                {"accepted_steps", tr.accepted_steps},
                {"rejected_steps", tr.rejected_steps},
                {"max_trace_error", *std::max_element(tr.trace_error.begin(), tr.trace_error.end())},
                {"min_eigenvalue", *std::min_element(tr.min_eigenvalue.begin(), tr.min_eigenvalue.end())},
                {"max_hermiticity_defect_before_symmetrization", tr.max_hermiticity_defect}};
}

double closed_form_or_nan(const EffectiveParams& p) {
    try {
        return weak_coupling_steady(p.n_th, p.G_h, p.kappa_0, p.kappa_h);
    } catch (const DomainError&) {
        return std::nan("");
    }
}

double floor_or_nan(const EffectiveParams& p) {
    return p.kappa_h > 0 ? backheating_floor(p.n_th, p.kappa_0, p.kappa_h) : std::nan("");
}

std::string file_stem(const ExperimentConfig& cfg, const std::string& label, const std::string& fallback) {
    return cfg.output_prefix + "_" + (label.empty() ? fallback : label);
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
    const ValidationReport rep = validate_experiment(cfg);
    for (const auto& w : rep.warnings) log << "warning: " << w << '\n';
    if (!rep.violations.empty()) {
        std::string msg;
        const std::string key = split_key(rep.violations.front(), msg);
        throw ConfigError(key, msg);
    }
    if (!cfg.runs.empty() && (cfg.mode == RunMode::sweep || (cfg.mode == RunMode::qswitch && !cfg.sweep_axes.empty())))
        throw ConfigError("runs", std::string("not supported together with sweep axes"));

    const fs::path dir(opts.out_dir);
    fs::create_directories(dir);
    const FockSpace space = cfg.space();
    RunResult result;
    json results = json::array();

    CoolingOptions cooling;
    cooling.samples = cfg.time.samples;
    cooling.frame = cfg.frame;
    cooling.integrator = cfg.integrator;
    SteadyStateOptions steady_opts;
    steady_opts.dense_limit = dense_limit(cfg);

    switch (cfg.mode) {
        case RunMode::params: {
            const json d = describe_params(cfg);
            log << d.dump(2) << '\n';
            CsvFile f(dir / (cfg.output_prefix + "_params.csv"), {"label", "name", "value", "source"});
            for (const auto& run : resolved_runs(cfg)) {
                const json e = effective_json(run.resolved.params);
                for (const char* k : {"omega_0", "detuning", "G_h", "kappa_0", "kappa_h", "n_th"})
                    f.row({run.label, k, num(e[k].get<double>()), run.resolved.source.at(k)});
            }
            result.files.push_back(f.close());
            results.push_back(d);
            break;
        }
        case RunMode::dispersion: {
            const Eigen::Vector3d k_end = dispersion_end(cfg);
            CsvFile f(dir / (cfg.output_prefix + "_dispersion.csv"), {"s", "kx", "ky", "kz", "omega_k"});
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (int i = 0; i < cfg.dispersion.points; ++i) {
                const double s = static_cast<double>(i) / (cfg.dispersion.points - 1);
                const Eigen::Vector3d k = s * k_end;
                const double w = magnon_dispersion(k, *cfg.physical);
                lo = std::min(lo, w);
                hi = std::max(hi, w);
                f.row({num(s), num(k(0)), num(k(1)), num(k(2)), num(w)});
            }
            result.files.push_back(f.close());
            const double n_ref = cfg.n_0_ref.value_or(
                thermal_occupation(cfg.physical->gamma_n * cfg.physical->B_field, cfg.physical->temperature));
            results.push_back(json{{"omega_min", lo},
                                   {"omega_max", hi},
                                   {"bandwidth", hi - lo},
                                   {"n_0_ref", n_ref},
                                   {"kappa_4", four_magnon_rate(*cfg.physical, n_ref)}});
            log << "dispersion: bandwidth " << format_double((hi - lo) / constants::hz(1e3)) << " kHz\n";
            break;
        }
        case RunMode::cool: {
            const auto runs = resolved_runs(cfg);
            CsvFile summary(dir / (cfg.output_prefix + "_summary.csv"),
                            {"label", "G_h", "kappa_0", "kappa_h", "n_th", "t_end", "n0_steady", "n0_closed_form",
                             "n0_floor", "entropy_steady", "entropy_thermal_ref", "swap_frequency", "envelope_rate"});
            for (std::size_t k = 0; k < runs.size(); ++k) {
                const EffectiveParams& p = runs[k].resolved.params;
                const double t_end = run_t_end(cfg, k, p);
                log << "cool " << (runs[k].label.empty() ? cfg.name : runs[k].label) << ": t_end "
                    << format_double(t_end) << " s\n";
                const CoolingOutcome o = run_cooling(p, space, t_end, cooling);
                result.files.push_back(write_trajectory(dir / (file_stem(cfg, runs[k].label, "trajectory") + ".csv"),
                                                        o.trajectory));
                summary.row({runs[k].label, num(p.G_h), num(p.kappa_0), num(p.kappa_h), num(p.n_th), num(t_end),
                             num(o.n0_steady), num(closed_form_or_nan(p)), num(floor_or_nan(p)),
                             num(o.entropy_steady), num(o.entropy_thermal_ref), num(o.swap_frequency),
                             num(o.envelope_rate)});
                json r{{"label", runs[k].label},
                       {"n0_steady", o.n0_steady},
                       {"diagnostics", trajectory_diagnostics(o.trajectory)}};
                if (o.envelope_fit_failed) r["envelope_fit_failed"] = true;
                results.push_back(r);
                log << "  n0_steady " << format_double(o.n0_steady) << '\n';
            }
            result.files.push_back(summary.close());
            break;
        }
        case RunMode::steady: {
            const auto runs = resolved_runs(cfg);
            CsvFile f(dir / (cfg.output_prefix + "_steady.csv"),
                      {"label", "n_magnon", "n_photon", "entropy_magnon", "entropy_thermal_ref", "n0_closed_form",
                       "n0_floor", "min_eigenvalue", "top_level_magnon", "top_level_photon"});
            for (const auto& run : runs) {
                const EffectiveParams& p = run.resolved.params;
                const DensityMatrix rho = steady_state(build_generator(p, space, cfg.frame), steady_opts);
                const double n0 = mode_population(rho, space, Mode::magnon);
                const double s = von_neumann_entropy(partial_trace(rho, space, Mode::magnon));
                const StateDiagnostics d = validate_state(rho, space);
                if (d.truncation_warning)
                    log << "warning: " << (run.label.empty() ? cfg.name : run.label)
                        << ": more than 1% population in the top Fock level\n";
                f.row({run.label, num(n0), num(mode_population(rho, space, Mode::photon)), num(s),
                       num(thermal_entropy(std::max(0.0, n0))), num(closed_form_or_nan(p)), num(floor_or_nan(p)),
                       num(d.min_eigenvalue), num(d.top_level_magnon), num(d.top_level_photon)});
                log << "steady " << (run.label.empty() ? cfg.name : run.label) << ": n0 " << format_double(n0) << '\n';
                results.push_back(json{{"label", run.label}, {"n_magnon", n0}});
            }
            result.files.push_back(f.close());
            break;
        }
        case RunMode::sweep:
        case RunMode::qswitch: {
            const EffectiveParams base = resolve_params(cfg).params;
            if (cfg.sweep_axes.empty()) {
                // single Q-switched trajectory per run
                const auto runs = resolved_runs(cfg);
                CsvFile summary(dir / (cfg.output_prefix + "_summary.csv"),
                                {"label", "kappa_low", "kappa_high", "hold_time", "dump_time", "cycles", "n0_final",
                                 "n0_floor", "entropy_final"});
                for (const auto& run : runs) {
                    const EffectiveParams& p = run.resolved.params;
                    const QSwitchSchedule s = make_schedule(cfg.qswitch, p);
                    const CoolingOutcome o = run_q_switched(p, space, s, cooling);
                    result.files.push_back(
                        write_trajectory(dir / (file_stem(cfg, run.label, "trajectory") + ".csv"), o.trajectory));
                    summary.row({run.label, num(s.kappa_low), num(s.kappa_high), num(s.hold_time), num(s.dump_time),
                                 std::to_string(s.cycles), num(o.n0_steady), num(floor_or_nan(p)),
                                 num(o.entropy_steady)});
                    results.push_back(json{{"label", run.label},
                                           {"n0_final", o.n0_steady},
                                           {"diagnostics", trajectory_diagnostics(o.trajectory)}});
                    log << "qswitch " << (run.label.empty() ? cfg.name : run.label) << ": final n0 "
                        << format_double(o.n0_steady) << '\n';
                }
                result.files.push_back(summary.close());
                break;
            }
            SweepOptions so;
            so.jobs = opts.jobs;
            so.steady = steady_opts;
            const bool q = cfg.mode == RunMode::qswitch;
            if (q) {
                const QSwitchSpec spec = cfg.qswitch;
                so.q_switch = [spec](const EffectiveParams& p) { return make_schedule(spec, p); };
                so.q_switch_cooling = cooling;
            }
            const SweepResult sr = sweep_steady(base, space, cfg.sweep_axes, so);
            std::vector<std::string> header;
            for (const auto& a : sr.axes) header.push_back(to_string(a.name));
            if (q) {
                for (const char* h : {"n0_continuous", "n0_closed_form", "n0_floor", "n0_q_switched", "status"})
                    header.push_back(h);
            } else {
                for (const char* h : {"n0_numeric", "n0_closed_form", "status"}) header.push_back(h);
            }
            CsvFile f(dir / (cfg.output_prefix + (q ? "_qswitch.csv" : "_sweep.csv")), header);
            for (const auto& pt : sr.points) {
                std::vector<std::string> row;
                EffectiveParams p = base;
                for (std::size_t a = 0; a < pt.coords.size(); ++a) {
                    row.push_back(num(pt.coords[a]));
                    p = with_axis_value(p, sr.axes[a].name, pt.coords[a]);
                }
                row.push_back(pt.n0_numeric ? num(*pt.n0_numeric) : "nan");
                row.push_back(num(pt.n0_closed_form));
                if (q) {
                    row.push_back(num(floor_or_nan(p)));
                    row.push_back(pt.n0_q_switched ? num(*pt.n0_q_switched) : "nan");
                }
                row.push_back(pt.status);
                if (pt.status != "ok") ++result.failed_points;
                f.row(row);
            }
            result.files.push_back(f.close());
            results.push_back(json{{"points", sr.points.size()}, {"failed_points", result.failed_points}});
            log << (q ? "qswitch" : "sweep") << ": " << sr.points.size() << " points, " << result.failed_points
                << " failed\n";
            break;
        }
    }

    json meta;
    meta["artifact"] = "nmcool";
    meta["version"] = kVersion;
    meta["generated_at"] = utc_timestamp();
    meta["config_path"] = opts.config_path;
    meta["mode"] = to_string(cfg.mode);
    meta["unit_convention"] = unit_convention();
    meta["space"] = json{{"dim_magnon", cfg.dim_magnon}, {"dim_photon", cfg.dim_photon}, {"ordering", "magnon-major"}};
    meta["solver"] = json{{"integrator", "Dormand-Prince 5(4), adaptive"},
                          {"rtol", cfg.integrator.rtol},
                          {"atol", cfg.integrator.atol},
                          {"max_trace_drift", cfg.integrator.max_trace_drift},
                          {"steady_state", "excitation-sector vectorization, trace row replacement"},
                          {"dense_limit", dense_limit(cfg)}};
    meta["precedence"] = "run effective overrides > base effective overrides > derived from physical > defaults (0)";
    if (cfg.mode != RunMode::dispersion) {
        json runs = json::array();
        for (const auto& run : resolved_runs(cfg))
            runs.push_back(json{{"label", run.label},
                                {"effective", effective_json(run.resolved.params)},
                                {"source", run.resolved.source}});
        meta["resolved_params"] = runs;
    }
    meta["resolved_config"] = resolved_config(cfg);
    meta["warnings"] = rep.warnings;
    meta["results"] = results;
    json files = json::array();
    for (const auto& f : result.files) files.push_back(fs::path(f).filename().string());
    meta["outputs"] = files;
    const fs::path meta_path = dir / (cfg.output_prefix + "_metadata.json");
    std::ofstream mf(meta_path, std::ios::binary);
    mf << meta.dump(2) << '\n';
    if (!mf) throw std::runtime_error("cannot write " + meta_path.string());
    result.files.push_back(meta_path.string());
    return result;
}

}  // namespace nmcool
