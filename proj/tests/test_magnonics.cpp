#include <doctest.h>

#include <cmath>
#include <random>

#include "nmcool/constants.hpp"
#include "nmcool/errors.hpp"
#include "nmcool/magnonics.hpp"

using namespace nmcool;
namespace c = nmcool::constants;

TEST_CASE("lattice geometry") {
    CHECK(coordination_number(Lattice::simple_cubic) == 6);
    CHECK(coordination_number(Lattice::fcc) == 12);
    const double a = 4e-10;
    for (auto l : {Lattice::simple_cubic, Lattice::fcc}) {
        const auto nn = neighbour_vectors(l, a);
        CHECK(int(nn.size()) == coordination_number(l));
        const double len = l == Lattice::fcc ? a / std::sqrt(2.0) : a;
        Eigen::Vector3d sum = Eigen::Vector3d::Zero();
        for (const auto& d : nn) {
            CHECK(d.norm() == doctest::Approx(len).epsilon(1e-14));
            sum += d;
        }
        CHECK(sum.norm() < 1e-24);
        CHECK(structure_sum(Eigen::Vector3d::Zero(), l, a) == double(coordination_number(l)));
    }
}

TEST_CASE("magnon dispersion") {
    PhysicalConfig cfg = gaas_baseline();
    CHECK(magnon_dispersion(Eigen::Vector3d::Zero(), cfg) == cfg.gamma_n * cfg.B_field);

    // simple cubic zone corner: Z = -6
    cfg.lattice = Lattice::simple_cubic;
    const double a = cfg.lattice_constant;
    const Eigen::Vector3d corner(c::pi / a, c::pi / a, c::pi / a);
    CHECK(structure_sum(corner, Lattice::simple_cubic, a) == doctest::Approx(-6.0).epsilon(1e-12));
    CHECK(magnon_dispersion(corner, cfg) ==
          doctest::Approx(cfg.gamma_n * cfg.B_field + 12 * cfg.J_exchange * cfg.spin_I).epsilon(1e-14));

    // narrow band: max - min over a k grid is tens of kHz against tens of MHz
    cfg = gaas_baseline();
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i <= 8; ++i)
        for (int j = 0; j <= 8; ++j)
            for (int k = 0; k <= 8; ++k) {
                const Eigen::Vector3d q = (c::two_pi / cfg.lattice_constant / 8) * Eigen::Vector3d(i, j, k);
                const double w = magnon_dispersion(q, cfg);
                lo = std::min(lo, w);
                hi = std::max(hi, w);
            }
    CHECK(lo == doctest::Approx(cfg.gamma_n * cfg.B_field));
    CHECK((hi - lo) / lo < 1e-2);
    CHECK(hi - lo <= 2.0 * coordination_number(cfg.lattice) * cfg.J_exchange * cfg.spin_I);
}

TEST_CASE("four-magnon relaxation") {
    // independent evaluation of (pi/2)(3/(4 pi))^(4/3)
    const double oracle = std::acos(-1.0) / 2 * std::exp(4.0 / 3.0 * std::log(0.75 / std::acos(-1.0)));
    CHECK(four_magnon_prefactor() == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(four_magnon_prefactor() == doctest::Approx(0.2326).epsilon(1e-4));

    PhysicalConfig cfg = gaas_baseline();
    CHECK(four_magnon_rate(cfg, 0.0) == 0.0);
    CHECK_THROWS_AS(four_magnon_rate(cfg, -1.0), DomainError);
    CHECK(four_magnon_rate(cfg, 2.0) / four_magnon_rate(cfg, 1.0) == doctest::Approx(3.0));

    // J I = 1 kHz, I = 3/2, n0 = 1: 0.2326 * (2 pi 1e3 / 2.25) * 2
    const double k1 = four_magnon_rate(cfg, 1.0) / c::hz(1e3);
    CHECK(k1 == doctest::Approx(oracle * 2 / 2.25).epsilon(1e-12));
    CHECK(k1 > 0.1);
    CHECK(k1 < 1.0);
}

TEST_CASE("thermal occupation") {
    CHECK(thermal_occupation(c::hz(1e7), 0.0) == 0.0);
    CHECK_THROWS_AS(thermal_occupation(0.0, 1e-3), DomainError);
    CHECK_THROWS_AS(thermal_occupation(c::hz(1e7), -1.0), DomainError);

    const long double x = 1.054571817e-34L * 2 * 3.14159265358979323846L * 1e7L / (1.380649e-23L * 1e-3L);
    const double oracle = double(1 / (std::exp(x) - 1));
    CHECK(thermal_occupation(c::hz(1e7), 1e-3) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(thermal_occupation(c::hz(1e7), 1e-3) == doctest::Approx(1.624).epsilon(1e-3));

    const PhysicalConfig g = gaas_baseline();
    CHECK(thermal_occupation(g.gamma_n * g.B_field, g.temperature) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero-point field and collective coupling") {
    const double w = c::ev_to_rad_per_s(1.0);
    CHECK(zero_point_field(w, 1e-18) == doctest::Approx(std::sqrt(1.602176634e-19 / (2 * 8.8541878128e-12 * 1e-18))));
    CHECK(zero_point_field(w, 1.0) == doctest::Approx(9.5119e-5).epsilon(1e-4));
    CHECK_THROWS_AS(zero_point_field(w, 0.0), DomainError);

    PhysicalConfig cfg = gaas_baseline();
    const double g_ratio = collective_coupling(cfg) / c::hz(1e3) / (cfg.E_pump / 1e6);
    CHECK(g_ratio == doctest::Approx(1.9).epsilon(0.03));

    // depends on N and V_h only through N/V_h
    cfg.N_spins = 1e10;
    cfg.V_h = 1e-18;
    const double g1 = collective_coupling(cfg);
    cfg.N_spins = 4e10;
    cfg.V_h = 4e-18;
    CHECK(collective_coupling(cfg) == doctest::Approx(g1).epsilon(1e-14));
    cfg.N_spins = 4e10;
    cfg.V_h = 1e-18;
    CHECK(collective_coupling(cfg) == doctest::Approx(2 * g1).epsilon(1e-14));

    // linear in the pump field
    PhysicalConfig p2 = gaas_baseline();
    p2.E_pump *= 3;
    CHECK(collective_coupling(p2) == doctest::Approx(3 * collective_coupling(gaas_baseline())).epsilon(1e-14));
}

TEST_CASE("ONQ estimate") {
    const double q = 0.314 * c::barn;
    const double Eg = c::ev_to_rad_per_s(1.42);
    const double wp = c::ev_to_rad_per_s(1.22);
    const double d = onq_estimate(1.5, q, Eg, wp);
    const double in_hz_per_mv2 = d / (c::hz(1.0) / 1e12);  // 2 pi Hz/(MV/m)^2
    CHECK(in_hz_per_mv2 == doctest::Approx(0.24).epsilon(0.10));

    // scaling: 1/(E_g (E_g - omega_p)) and linear in q
    CHECK(onq_estimate(1.5, 2 * q, Eg, wp) == doctest::Approx(2 * d).epsilon(1e-14));
    const double wp2 = c::ev_to_rad_per_s(1.32);
    CHECK(onq_estimate(1.5, q, Eg, wp2) / d == doctest::Approx(0.2 / 0.1).epsilon(1e-10));
    // 1/(2I(2I-1)): I = 3/2 -> 1/6, I = 5/2 -> 1/20
    CHECK(onq_estimate(2.5, q, Eg, wp) / d == doctest::Approx(6.0 / 20.0).epsilon(1e-14));

    CHECK_THROWS_AS(onq_estimate(0.5, q, Eg, wp), DomainError);
    CHECK_THROWS_AS(onq_estimate(1.5, q, Eg, Eg), DomainError);
}

namespace {

// Ladder 0 -> 1 -> 2 with only x matrix elements, ground state filled, and an
// EFG element V_xx connecting 0 and 2.
ElectronicToyModel ladder(double d1, double d2, double x1, double x2, double v) {
    ElectronicToyModel m = ElectronicToyModel::zeros(3);
    m.levels = {{0.0, 1.0}, {d1, 0.0}, {d2, 0.0}};
    m.position[0](0, 1) = m.position[0](1, 0) = x1;
    m.position[0](1, 2) = m.position[0](2, 1) = x2;
    m.efg[0][0](0, 2) = m.efg[0][0](2, 0) = v;
    m.quadrupole_moment = 0.314 * c::barn;
    m.spin_I = 1.5;
    return m;
}

// Closed form of the triple sum for the ladder, worked out by hand: only
// (m, n, l) = (0, 2, 1) and (2, 0, 1) survive.
double ladder_oracle(double d1, double d2, double x1, double x2, double v, double wp, double wq) {
    const double W = wp - wq;
    auto branch = [&](double wa) {
        return -v * x1 * x2 * (1 / ((d2 + W) * (d1 + wa)) + 1 / ((d2 - W) * (d1 - wa)));
    };
    const double hbar = 1.054571817e-34, e = 1.602176634e-19;
    const double pref = e * e * e * 0.314e-28 / (2 * 1.5 * 2.0) / (hbar * hbar * hbar);
    return pref * (branch(wp) + branch(-wq));
}

}  // namespace

TEST_CASE("sum-over-states response: three-level closed form") {
    const double d1 = c::ev_to_rad_per_s(1.5), d2 = c::ev_to_rad_per_s(2.3);
    const double x1 = 2e-10, x2 = 1.3e-10, v = 3e21;
    for (auto [wp, wq] : {std::pair{0.9, 0.85}, {1.2, 0.3}, {0.4, 0.41}}) {
        const double p = c::ev_to_rad_per_s(wp), q = c::ev_to_rad_per_s(wq);
        const auto got = onq_sum_over_states(ladder(d1, d2, x1, x2, v), p, q, 0, 0, 0, 0);
        const double want = ladder_oracle(d1, d2, x1, x2, v, p, q);
        CHECK(got.real() == doctest::Approx(want).epsilon(1e-12));
        CHECK(std::abs(got.imag()) <= 1e-12 * std::abs(want));
    }
    // other tensor components vanish for this model
    CHECK(std::abs(onq_sum_over_states(ladder(d1, d2, x1, x2, v), 1e15, 0.9e15, 0, 1, 0, 0)) == 0.0);
    CHECK(std::abs(onq_sum_over_states(ladder(d1, d2, x1, x2, v), 1e15, 0.9e15, 0, 0, 1, 0)) == 0.0);
}

TEST_CASE("sum-over-states response: resonances and symmetry") {
    const double d1 = c::ev_to_rad_per_s(1.5), d2 = c::ev_to_rad_per_s(2.3);
    const ElectronicToyModel m = ladder(d1, d2, 2e-10, 1.3e-10, 3e21);
    try {
        onq_sum_over_states(m, d1, 0.5 * d1, 0, 0, 0, 0);
        FAIL("expected a resonance");
    } catch (const ResonanceError& e) {
        CHECK(e.l() == 1);
        CHECK(((e.m() == 2 && e.n() == 0) || (e.m() == 0 && e.n() == 2)));
    }
    // a looser tolerance turns a near-resonance into an error
    const double near = d1 * (1 + 1e-4);
    CHECK_NOTHROW(onq_sum_over_states(m, near, 0.5 * d1, 0, 0, 0, 0));
    SumOverStatesOptions loose;
    loose.resonance_tolerance = 1e-2;
    CHECK_THROWS_AS(onq_sum_over_states(m, near, 0.5 * d1, 0, 0, 0, 0, loose), ResonanceError);

    // random four-level model: swapping (p, omega_p) with (q, -omega_q) leaves D unchanged
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    ElectronicToyModel r = ElectronicToyModel::zeros(4);
    r.levels = {{0.0, 1.0}, {c::ev_to_rad_per_s(0.1), 1.0}, {c::ev_to_rad_per_s(1.7), 0.0}, {c::ev_to_rad_per_s(2.6), 0.0}};
    auto random_hermitian = [&](double scale) {
        Eigen::MatrixXcd h(4, 4);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) h(a, b) = {u(rng), u(rng)};
        return Eigen::MatrixXcd(scale * (h + h.adjoint()) / 2.0);
    };
    for (auto& p : r.position) p = random_hermitian(1e-10);
    for (auto& row : r.efg)
        for (auto& e : row) e = random_hermitian(1e21);
    r.quadrupole_moment = 0.3 * c::barn;
    const double wp = c::ev_to_rad_per_s(0.8), wq = c::ev_to_rad_per_s(0.65);
    const auto a = onq_sum_over_states(r, wp, wq, 0, 1, 2, 1);
    const auto b = onq_sum_over_states(r, -wq, -wp, 0, 1, 1, 2);
    CHECK(std::abs(a - b) <= 1e-12 * std::abs(a));
    CHECK(std::abs(a) > 0);

    ElectronicToyModel bad = r;
    bad.levels[0].occupation = 1.5;
    CHECK_THROWS_AS(onq_sum_over_states(bad, wp, wq, 0, 0, 0, 0), DomainError);
    CHECK_THROWS_AS(onq_sum_over_states(r, wp, wq, 3, 0, 0, 0), DomainError);
}

TEST_CASE("effective parameters from the physical pipeline") {
    const PhysicalConfig cfg = gaas_baseline();
    CHECK(cfg.violations().empty());
    const EffectiveParams p = derive_effective_params(cfg);
    CHECK(p.omega_0 == cfg.gamma_n * cfg.B_field);
    CHECK(p.kappa_h == doctest::Approx(cfg.omega_h / cfg.Q_h).epsilon(1e-15));
    CHECK(p.kappa_h / c::hz(1.0) == doctest::Approx(2.418e4).epsilon(1e-3));
    CHECK(p.n_th == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.kappa_0 == doctest::Approx(four_magnon_rate(cfg, 1.0)).epsilon(1e-14));
    CHECK(p.G_h == doctest::Approx(collective_coupling(cfg)).epsilon(1e-14));
    CHECK(p.detuning == 0.0);
    CHECK(p.violations().empty());

    CHECK(derive_effective_params(cfg, 0.5).kappa_0 == doctest::Approx(four_magnon_rate(cfg, 0.5)));

    // cavity Q giving kappa_h = 2 pi x 1 MHz at 1 eV under the angular convention
    PhysicalConfig q = cfg;
    q.Q_h = cfg.omega_h / c::hz(1e6);
    CHECK(q.Q_h == doctest::Approx(2.418e8).epsilon(1e-3));
    CHECK(derive_effective_params(q).kappa_h == doctest::Approx(c::hz(1e6)).epsilon(1e-14));

    PhysicalConfig bad = cfg;
    bad.Q_h = -5;
    bad.spin_I = 1.2;
    const auto v = bad.violations();
    REQUIRE(v.size() == 2);
    CHECK(v[0].rfind("Q_h", 0) == 0);
    CHECK(v[1].rfind("spin_I", 0) == 0);
}
