#pragma once

// Physics-to-parameters pipeline: nuclear-magnon dispersion and relaxation,
// thermal occupation, ONQ response and the collective cavity coupling.
//
// Unit convention: every frequency or rate is an angular rate in rad/s.
// A value quoted as "x kHz" means 2*pi*x*1e3 rad/s. Energies of electronic
// levels and photons are likewise stored as E/hbar in rad/s.

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace nmcool {

enum class Lattice { simple_cubic, fcc };

const char* to_string(Lattice l);

/// Coordination number z_c.
int coordination_number(Lattice l);

/// Nearest-neighbour vectors for lattice constant `a` (m).
std::vector<Eigen::Vector3d> neighbour_vectors(Lattice l, double a);

struct PhysicalConfig {
    double gamma_n = 0;      // rad s^-1 T^-1
    double B_field = 0;      // T
    double J_exchange = 0;   // rad/s
    double spin_I = 1.5;
    Lattice lattice = Lattice::fcc;
    double lattice_constant = 0;  // m
    double rho_n = 0;        // m^-3
    double g_onq = 0;        // rad s^-1 per (V/m)^2
    double E_pump = 0;       // V/m
    double omega_h = 0;      // rad/s
    double Q_h = 0;
    double temperature = 0;  // K
    std::optional<double> N_spins;
    std::optional<double> V_h;  // m^3

    /// Violated invariants as "field: reason" strings; empty when valid.
    std::vector<std::string> violations() const;
};

/// 75As in zinc-blende GaAs at 1 T, pumped at 1 MV/m into a 1 eV cavity.
PhysicalConfig gaas_baseline();

struct EffectiveParams {
    double omega_0 = 0;   // magnon frequency
    double detuning = 0;  // (omega_h - omega_p) - omega_0
    double G_h = 0;
    double kappa_0 = 0;
    double kappa_h = 0;
    double n_th = 0;

    std::vector<std::string> violations() const;
};

/// Z(k) = sum over nearest neighbours of cos(k . delta).
double structure_sum(const Eigen::Vector3d& k, Lattice l, double a);

/// omega_k = gamma_n B + J I [z_c - Z(k)].
double magnon_dispersion(const Eigen::Vector3d& k, const PhysicalConfig& cfg);

/// (pi/2) (3/(4 pi))^(4/3), the numeric factor of the four-magnon rate.
double four_magnon_prefactor();

/// Four-magnon relaxation rate at occupation n0 (J already in rad/s).
double four_magnon_rate(const PhysicalConfig& cfg, double n_0);

/// Bose factor [exp(hbar omega_0 / k_B T) - 1]^-1; 0 at T = 0.
double thermal_occupation(double omega_0, double temperature);

/// Vacuum field amplitude sqrt(hbar omega_h / (2 eps0 V_h)) in V/m.
double zero_point_field(double omega_h, double V_h);

/// N / V_h, taken from N_spins and V_h when both are given, else rho_n.
double spin_density(const PhysicalConfig& cfg);

/// G_h = g sqrt(N) E_p E_zpf, which depends on N and V_h only through N/V_h.
double collective_coupling(const PhysicalConfig& cfg);

/// Two-band order-of-magnitude estimate of the ONQ response (rad/s per (V/m)^2).
/// `q` in m^2; `E_g` and `omega_p` in rad/s. Requires omega_p < E_g.
double onq_estimate(double spin_I, double q, double E_g, double omega_p);

struct ElectronicLevel {
    double energy = 0;      // E/hbar, rad/s
    double occupation = 0;  // in [0, 1]
};

/// Single-particle electronic data for the sum-over-states ONQ response.
/// Matrix elements are indexed by level: position[p](m, n) = <m|r_p|n> (m),
/// efg[i][j](m, n) = [V_ij]_mn (V/m^2).
struct ElectronicToyModel {
    std::vector<ElectronicLevel> levels;
    std::array<Eigen::MatrixXcd, 3> position;
    std::array<std::array<Eigen::MatrixXcd, 3>, 3> efg;
    double quadrupole_moment = 0;  // m^2
    double spin_I = 1.5;

    /// Model with n levels and all matrix elements zero.
    static ElectronicToyModel zeros(int n_levels);

    void validate() const;
};

struct SumOverStatesOptions {
    /// Denominators below this fraction of the smallest level gap are resonant.
    double resonance_tolerance = 1e-6;
};

/// D_ij^pq(omega_p - omega_q; omega_p, -omega_q) in rad/s per (V/m)^2,
/// including the (p,omega_p) <-> (q,-omega_q) symmetrization.
/// Throws ResonanceError naming the offending (m, n, l).
std::complex<double> onq_sum_over_states(const ElectronicToyModel& model, double omega_p, double omega_q, int i, int j,
                                         int p, int q, const SumOverStatesOptions& opts = {});

/// omega_0 = gamma_n B, kappa_h = omega_h/Q_h, kappa_0 from the four-magnon rate at
/// n_0_ref (default: n_th), G_h from the collective coupling, zero detuning.
EffectiveParams derive_effective_params(const PhysicalConfig& cfg, std::optional<double> n_0_ref = std::nullopt);

}  // namespace nmcool
