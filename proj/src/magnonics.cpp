#include "nmcool/magnonics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nmcool/constants.hpp"
#include "nmcool/errors.hpp"

namespace nmcool {

namespace c = constants;

const char* to_string(Lattice l) { return l == Lattice::simple_cubic ? "simple_cubic" : "fcc"; }

int coordination_number(Lattice l) { return l == Lattice::simple_cubic ? 6 : 12; }

std::vector<Eigen::Vector3d> neighbour_vectors(Lattice l, double a) {
    std::vector<Eigen::Vector3d> out;
    if (l == Lattice::simple_cubic) {
        for (int axis = 0; axis < 3; ++axis)
            for (double s : {-1.0, 1.0}) {
                Eigen::Vector3d d = Eigen::Vector3d::Zero();
                d(axis) = s * a;
                out.push_back(d);
            }
        return out;
    }
    // fcc: (a/2)(±1, ±1, 0) and permutations
    for (int zero_axis = 0; zero_axis < 3; ++zero_axis)
        for (double s1 : {-1.0, 1.0})
            for (double s2 : {-1.0, 1.0}) {
                Eigen::Vector3d d;
                int k = 0;
                for (int axis = 0; axis < 3; ++axis) d(axis) = axis == zero_axis ? 0.0 : (k++ == 0 ? s1 : s2) * a / 2;
                out.push_back(d);
            }
    return out;
}

std::vector<std::string> PhysicalConfig::violations() const {
    std::vector<std::string> v;
    auto positive = [&v](double x, const char* name) {
        if (!(x > 0)) v.push_back(std::string(name) + ": must be > 0");
    };
    positive(gamma_n, "gamma_n");
    positive(B_field, "B_field");
    positive(J_exchange, "J_exchange");
    positive(lattice_constant, "lattice_constant");
    positive(rho_n, "rho_n");
    positive(omega_h, "omega_h");
    positive(Q_h, "Q_h");
    if (g_onq < 0) v.push_back("g_onq: must be >= 0");
    if (E_pump < 0) v.push_back("E_pump: must be >= 0");
    if (temperature < 0) v.push_back("temperature: must be >= 0");
    const double twice = 2 * spin_I;
    if (!(spin_I >= 0.5) || std::abs(twice - std::round(twice)) > 1e-12)
        v.push_back("spin_I: must be a positive half-integer");
    if (N_spins && !(*N_spins > 0)) v.push_back("N_spins: must be > 0");
    if (V_h && !(*V_h > 0)) v.push_back("V_h: must be > 0");
    return v;
}

std::vector<std::string> EffectiveParams::violations() const {
    std::vector<std::string> v;
    if (G_h < 0) v.push_back("G_h: must be >= 0");
    if (kappa_0 < 0) v.push_back("kappa_0: must be >= 0");
    if (kappa_h < 0) v.push_back("kappa_h: must be >= 0");
    if (n_th < 0) v.push_back("n_th: must be >= 0");
    if (omega_0 < 0) v.push_back("omega_0: must be >= 0");
    return v;
}

PhysicalConfig gaas_baseline() {
    PhysicalConfig cfg;
    cfg.gamma_n = c::two_pi * 7.3148e6;  // 75As
    cfg.B_field = 1.0;
    cfg.spin_I = 1.5;
    cfg.J_exchange = c::hz(1e3) / cfg.spin_I;  // J I = 1 kHz
    cfg.lattice = Lattice::fcc;
    cfg.lattice_constant = 5.653e-10;
    cfg.rho_n = 1e28;
    cfg.g_onq = c::hz(0.2) / 1e12;  // 0.2 x 2pi Hz/(MV/m)^2
    cfg.E_pump = 1e6;
    cfg.omega_h = c::ev_to_rad_per_s(1.0);
    cfg.Q_h = 1e10;
    // hbar omega_0 / k_B T = ln 2, i.e. n_th = 1
    cfg.temperature = c::hbar * cfg.gamma_n * cfg.B_field / (c::k_boltzmann * std::log(2.0));
    return cfg;
}

double structure_sum(const Eigen::Vector3d& k, Lattice l, double a) {
    double z = 0;
    for (const auto& d : neighbour_vectors(l, a)) z += std::cos(k.dot(d));
    return z;
}

double magnon_dispersion(const Eigen::Vector3d& k, const PhysicalConfig& cfg) {
    const double zc = coordination_number(cfg.lattice);
    const double band = zc - structure_sum(k, cfg.lattice, cfg.lattice_constant);
    return cfg.gamma_n * cfg.B_field + cfg.J_exchange * cfg.spin_I * band;
}

double four_magnon_prefactor() { return c::pi / 2 * std::pow(3.0 / (4.0 * c::pi), 4.0 / 3.0); }

double four_magnon_rate(const PhysicalConfig& cfg, double n_0) {
    if (n_0 < 0) throw DomainError("four_magnon_rate: n_0 must be >= 0");
    if (!(cfg.J_exchange > 0) || !(cfg.spin_I > 0)) throw DomainError("four_magnon_rate: J and I must be positive");
    return four_magnon_prefactor() * (cfg.J_exchange / cfg.spin_I) * n_0 * (n_0 + 1);
}

double thermal_occupation(double omega_0, double temperature) {
    if (temperature < 0) throw DomainError("thermal_occupation: temperature must be >= 0");
    if (temperature == 0) return 0;
    if (!(omega_0 > 0))
        throw DomainError("thermal_occupation: omega_0 must be > 0 (the Bose factor diverges at zero frequency)");
    const double x = c::hbar * omega_0 / (c::k_boltzmann * temperature);
    return 1.0 / std::expm1(x);
}

double zero_point_field(double omega_h, double V_h) {
    if (!(omega_h > 0) || !(V_h > 0)) throw DomainError("zero_point_field: omega_h and V_h must be > 0");
    return std::sqrt(c::hbar * omega_h / (2 * c::epsilon_0 * V_h));
}

double spin_density(const PhysicalConfig& cfg) {
    if (cfg.N_spins && cfg.V_h) return *cfg.N_spins / *cfg.V_h;
    if (!(cfg.rho_n > 0)) throw DomainError("spin density: rho_n must be > 0 unless N_spins and V_h are both given");
    return cfg.rho_n;
}

double collective_coupling(const PhysicalConfig& cfg) {
    // sqrt(N) * E_zpf(V_h) = sqrt(N/V_h) * E_zpf(1 m^3)
    const double density = spin_density(cfg);
    return cfg.g_onq * cfg.E_pump * std::sqrt(density) * zero_point_field(cfg.omega_h, 1.0);
}

double onq_estimate(double spin_I, double q, double E_g, double omega_p) {
    if (!(spin_I > 0.5)) throw DomainError("onq_estimate: quadrupole coupling needs I > 1/2");
    if (!(omega_p < E_g)) throw DomainError("onq_estimate: omega_p must lie below the gap (resonant regime excluded)");
    constexpr double g_spin = 2.0;
    const double e4 = std::pow(c::e_charge, 4);
    const double energy_product = c::hbar * E_g * c::hbar * (E_g - omega_p);  // J^2
    const double d_energy = g_spin / (2 * spin_I * (2 * spin_I - 1)) * e4 * q /
                            (4 * c::pi * c::epsilon_0 * c::bohr_radius) / energy_product;  // J per (V/m)^2
    return d_energy / c::hbar;
}

ElectronicToyModel ElectronicToyModel::zeros(int n_levels) {
    ElectronicToyModel m;
    m.levels.resize(n_levels);
    for (auto& r : m.position) r = Eigen::MatrixXcd::Zero(n_levels, n_levels);
    for (auto& row : m.efg)
        for (auto& v : row) v = Eigen::MatrixXcd::Zero(n_levels, n_levels);
    return m;
}

void ElectronicToyModel::validate() const {
    const auto n = static_cast<Eigen::Index>(levels.size());
    for (const auto& lvl : levels)
        if (lvl.occupation < 0 || lvl.occupation > 1) throw DomainError("ElectronicToyModel: occupation outside [0,1]");
    auto check = [n](const Eigen::MatrixXcd& m, const std::string& name) {
        if (m.rows() != n || m.cols() != n) throw DomainError("ElectronicToyModel: " + name + " has wrong shape");
        if (n > 0 && (m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
            throw DomainError("ElectronicToyModel: " + name + " is not hermitian");
    };
    for (int p = 0; p < 3; ++p) check(position[p], "position[" + std::to_string(p) + "]");
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) check(efg[i][j], "efg[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    if (!(spin_I > 0.5)) throw DomainError("ElectronicToyModel: quadrupole coupling needs I > 1/2");
}

std::complex<double> onq_sum_over_states(const ElectronicToyModel& model, double omega_p, double omega_q, int i, int j,
                                         int p, int q, const SumOverStatesOptions& opts) {
    for (int idx : {i, j, p, q})
        if (idx < 0 || idx > 2) throw DomainError("onq_sum_over_states: Cartesian index outside 0..2");
    model.validate();
    const int n_levels = static_cast<int>(model.levels.size());
    if (n_levels == 0) return 0.0;

    double smallest_gap = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_levels; ++a)
        for (int b = 0; b < n_levels; ++b) {
            const double gap = std::abs(model.levels[a].energy - model.levels[b].energy);
            if (gap > 0) smallest_gap = std::min(smallest_gap, gap);
        }
    const double tol = opts.resonance_tolerance * (std::isfinite(smallest_gap) ? smallest_gap : 1.0);

    const auto& E = model.levels;
    const Eigen::MatrixXcd& V = model.efg[i][j];

    auto guard = [&](double denom, int m, int n, int l) {
        if (std::abs(denom) <= tol)
            throw ResonanceError("onq_sum_over_states: resonant denominator at (m, n, l) = (" + std::to_string(m) + ", " +
                                     std::to_string(n) + ", " + std::to_string(l) + ")",
                                 m, n, l);
    };

    // One ordering of the two fields: field `a` at signed frequency wa, field `b` at wb.
    auto branch = [&](int a, double wa, int b, double wb) {
        const Eigen::MatrixXcd& ra = model.position[a];
        const Eigen::MatrixXcd& rb = model.position[b];
        std::complex<double> sum = 0;
        for (int m = 0; m < n_levels; ++m)
            for (int n = 0; n < n_levels; ++n) {
                const std::complex<double> v = V(m, n);
                if (v == 0.0) continue;
                const double outer = E[m].energy - E[n].energy - (wa + wb);
                for (int l = 0; l < n_levels; ++l) {
                    const double f_lm = E[l].occupation - E[m].occupation;
                    const double f_nl = E[n].occupation - E[l].occupation;
                    const std::complex<double> num1 = f_lm * ra(n, l) * rb(l, m);
                    const std::complex<double> num2 = f_nl * rb(n, l) * ra(l, m);
                    if (num1 != 0.0) {
                        const double inner = E[m].energy - E[l].energy - wa;
                        guard(outer, m, n, l);
                        guard(inner, m, n, l);
                        sum += v * num1 / (outer * inner);
                    }
                    if (num2 != 0.0) {
                        const double inner = E[l].energy - E[n].energy - wa;
                        guard(outer, m, n, l);
                        guard(inner, m, n, l);
                        sum -= v * num2 / (outer * inner);
                    }
                }
            }
        return sum;
    };

    const std::complex<double> total = branch(p, omega_p, q, -omega_q) + branch(q, -omega_q, p, omega_p);
    const double I = model.spin_I;
    // Denominators are in rad/s: two factors of hbar convert them to energy,
    // a third turns the resulting energy into an angular rate.
    const double prefactor = std::pow(c::e_charge, 3) * model.quadrupole_moment / (2 * I * (2 * I - 1)) /
                             (c::hbar * c::hbar * c::hbar);
    return prefactor * total;
}

EffectiveParams derive_effective_params(const PhysicalConfig& cfg, std::optional<double> n_0_ref) {
    EffectiveParams p;
    p.omega_0 = cfg.gamma_n * cfg.B_field;
    p.n_th = thermal_occupation(p.omega_0, cfg.temperature);
    if (!(cfg.Q_h > 0)) throw DomainError("derive_effective_params: Q_h must be > 0");
    p.kappa_h = cfg.omega_h / cfg.Q_h;
    p.kappa_0 = four_magnon_rate(cfg, n_0_ref.value_or(p.n_th));
    p.G_h = collective_coupling(cfg);
    p.detuning = 0;
    return p;
}

}  // namespace nmcool
