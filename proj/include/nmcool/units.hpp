#pragma once

// Unit-suffixed config values and round-trip number formatting.
//
// A config value is either a bare number, already in internal units, or a
// string "<number> <unit>". Internal units: rates and energies in rad/s,
// fields in V/m, B in T, temperature in K, time in s, lengths in m.
// Frequencies quoted in Hz/kHz/MHz/GHz are multiplied by 2 pi.

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace nmcool {

/// Schema or unit violation at a config key path such as "physical.Q_h".
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key_path, const std::string& message)
        : std::runtime_error(key_path + ": " + message), key_path_(key_path) {}
    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

enum class Dimension {
    dimensionless,
    rate,            // rad/s; also photon energies
    electric_field,  // V/m
    magnetic_field,  // T
    temperature,     // K
    time,            // s
    length,          // m
    area,            // m^2
    density,         // m^-3
    volume,          // m^3
    gyromagnetic,    // rad s^-1 T^-1
    onq_response,    // rad s^-1 (V/m)^-2
};

const char* to_string(Dimension d);

/// Unit suffixes accepted for a dimension, with their factor to internal units.
const std::vector<std::pair<std::string, double>>& units_for(Dimension d);

/// Converts "<number> <unit>" or a bare number to internal units.
double parse_quantity(const nlohmann::json& value, Dimension dim, const std::string& key_path);

/// Shortest representation that parses back to the same double ("nan", "inf", "-inf" for non-finite).
std::string format_double(double x);

/// Text describing the unit normalization, recorded in output metadata.
nlohmann::json unit_convention();

}  // namespace nmcool
