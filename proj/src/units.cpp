#include "nmcool/units.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "nmcool/constants.hpp"

namespace nmcool {

namespace c = constants;

const char* to_string(Dimension d) {
    switch (d) {
        case Dimension::dimensionless: return "dimensionless";
        case Dimension::rate: return "rate";
        case Dimension::electric_field: return "electric field";
        case Dimension::magnetic_field: return "magnetic field";
        case Dimension::temperature: return "temperature";
        case Dimension::time: return "time";
        case Dimension::length: return "length";
        case Dimension::area: return "area";
        case Dimension::density: return "number density";
        case Dimension::volume: return "volume";
        case Dimension::gyromagnetic: return "gyromagnetic ratio";
        case Dimension::onq_response: return "ONQ response";
    }
    return "?";
}

const std::vector<std::pair<std::string, double>>& units_for(Dimension d) {
    using Table = std::vector<std::pair<std::string, double>>;
    static const Table none{};
    static const Table rate{{"rad/s", 1.0},
                            {"Hz", c::hz(1.0)},
                            {"kHz", c::hz(1e3)},
                            {"MHz", c::hz(1e6)},
                            {"GHz", c::hz(1e9)},
                            {"eV", c::ev_to_rad_per_s(1.0)},
                            {"meV", c::ev_to_rad_per_s(1e-3)}};
    static const Table field{{"V/m", 1.0}, {"kV/m", 1e3}, {"MV/m", 1e6}};
    static const Table magnetic{{"T", 1.0}, {"mT", 1e-3}};
    static const Table temperature{{"K", 1.0}, {"mK", 1e-3}, {"uK", 1e-6}};
    static const Table time{{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}};
    static const Table length{{"m", 1.0}, {"nm", 1e-9}, {"Angstrom", 1e-10}};
    static const Table area{{"m^2", 1.0}, {"barn", c::barn}};
    static const Table density{{"m^-3", 1.0}, {"cm^-3", 1e6}};
    static const Table volume{{"m^3", 1.0}, {"um^3", 1e-18}};
    static const Table gyro{{"rad/s/T", 1.0}, {"Hz/T", c::hz(1.0)}, {"kHz/T", c::hz(1e3)}, {"MHz/T", c::hz(1e6)}};
    static const Table onq{{"rad/s/(V/m)^2", 1.0}, {"Hz/(MV/m)^2", c::hz(1.0) / 1e12}};
    switch (d) {
        case Dimension::dimensionless: return none;
        case Dimension::rate: return rate;
        case Dimension::electric_field: return field;
        case Dimension::magnetic_field: return magnetic;
        case Dimension::temperature: return temperature;
        case Dimension::time: return time;
        case Dimension::length: return length;
        case Dimension::area: return area;
        case Dimension::density: return density;
        case Dimension::volume: return volume;
        case Dimension::gyromagnetic: return gyro;
        case Dimension::onq_response: return onq;
    }
    return none;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string accepted_units(Dimension dim) {
    std::string out;
    for (const auto& [name, f] : units_for(dim)) out += (out.empty() ? "" : ", ") + name;
    return out.empty() ? "none" : out;
}

}  // namespace

double parse_quantity(const nlohmann::json& value, Dimension dim, const std::string& key_path) {
    if (value.is_number()) return value.get<double>();
    if (!value.is_string()) throw ConfigError(key_path, "expected a number or a \"<number> <unit>\" string");

    const std::string text = trim(value.get<std::string>());
    double x = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, x);
    if (ec != std::errc() || ptr == first) throw ConfigError(key_path, "cannot parse a number from \"" + text + "\"");
    const std::string unit = trim(std::string(ptr, last));
    if (unit.empty()) return x;
    for (const auto& [name, factor] : units_for(dim))
        if (name == unit) return x * factor;
    throw ConfigError(key_path, "unit \"" + unit + "\" is not a " + to_string(dim) + " unit (accepted: " +
                                    accepted_units(dim) + ")");
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ec == std::errc() ? ptr : buf);
}

nlohmann::json unit_convention() {
    nlohmann::json j;
    j["rates"] = "angular, rad/s; an input of x Hz is stored as 2*pi*x rad/s";
    j["energies"] = "E/hbar in rad/s; 1 eV = " + format_double(c::ev_to_rad_per_s(1.0)) + " rad/s";
    j["electric_field"] = "V/m";
    j["magnetic_field"] = "T";
    j["temperature"] = "K";
    j["time"] = "s";
    j["lengths"] = "m";
    j["onq_response"] = "rad/s per (V/m)^2; 1 Hz/(MV/m)^2 = 2*pi*1e-12 rad/s/(V/m)^2";
    j["entropy"] = "nats";
    return j;
}

}  // namespace nmcool
