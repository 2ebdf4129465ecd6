#pragma once

#include <numbers>

// CODATA 2018, SI.
namespace nmcool::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double k_boltzmann = 1.380649e-23;      // J / K
inline constexpr double epsilon_0 = 8.8541878128e-12;    // F / m
inline constexpr double e_charge = 1.602176634e-19;      // C
inline constexpr double bohr_radius = 5.29177210903e-11; // m
inline constexpr double electron_volt = 1.602176634e-19; // J
inline constexpr double barn = 1e-28;                    // m^2

/// Angular rate (rad/s) of a photon/level with the given energy in eV.
inline constexpr double ev_to_rad_per_s(double ev) { return ev * electron_volt / hbar; }

/// Ordinary frequency in Hz expressed as an angular rate.
inline constexpr double hz(double f) { return two_pi * f; }

}  // namespace nmcool::constants
