#include <doctest.h>

#include <cmath>

#include "nmcool/constants.hpp"
#include "nmcool/errors.hpp"
#include "nmcool/protocols.hpp"

using namespace nmcool;
namespace c = nmcool::constants;

namespace {

EffectiveParams params(double G, double k0, double kh, double nth, double delta = 0) {
    EffectiveParams p;
    p.omega_0 = 10.0;
    p.detuning = delta;
    p.G_h = G;
    p.kappa_0 = k0;
    p.kappa_h = kh;
    p.n_th = nth;
    return p;
}

}  // namespace

TEST_CASE("closed-form benchmarks") {
    const double k0 = c::hz(100), kh = c::hz(1e6);
    CHECK(weak_coupling_steady(1.0, c::hz(1e4), k0, kh) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(weak_coupling_steady(1.0, c::hz(3e4), k0, kh) == doctest::Approx(1.0 / 37).epsilon(1e-12));
    CHECK(weak_coupling_steady(1.0, 0.0, k0, kh) == 1.0);
    CHECK(backheating_floor(1.0, k0, kh) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK_THROWS_AS(weak_coupling_steady(-1, 1, 1, 1), DomainError);
    CHECK_THROWS_AS(weak_coupling_steady(1, 0, 0, 1), DomainError);
    CHECK_THROWS_AS(backheating_floor(1, 1, 0), DomainError);

    // decreasing in G toward zero, always above the floor
    double prev = 2;
    for (double g = 1e2; g < 1e8; g *= 3) {
        const double n = weak_coupling_steady(1.0, c::hz(g), k0, kh);
        CHECK(n < prev);
        CHECK(n > 0);
        prev = n;
    }
}

TEST_CASE("slowest relaxation rate") {
    const double k0 = 0.01, kh = 1.0;
    CHECK(slowest_relaxation_rate(params(1e-3, k0, kh, 0)) == doctest::Approx(k0 + 4e-6 / kh).epsilon(1e-4));
    CHECK(slowest_relaxation_rate(params(10, k0, kh, 0)) == doctest::Approx((k0 + kh) / 2).epsilon(1e-12));
    CHECK(slowest_relaxation_rate(params(0, k0, kh, 0)) == doctest::Approx(k0).epsilon(1e-12));
    // exceptional point G = (kh - k0)/4 joins the two branches
    CHECK(slowest_relaxation_rate(params((kh - k0) / 4, k0, kh, 0)) == doctest::Approx((k0 + kh) / 2).epsilon(1e-6));
}

TEST_CASE("signal analysis helpers") {
    const std::vector<double> t = uniform_grid(20.0, 2001);
    CHECK(t.size() == 2001);
    CHECK(t.front() == 0.0);
    CHECK(t.back() == 20.0);
    CHECK_THROWS_AS(uniform_grid(0.0, 5), DomainError);
    CHECK_THROWS_AS(uniform_grid(1.0, 1), DomainError);

    std::vector<double> x(t.size()), flat(t.size(), 3.0), y(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        x[k] = 0.7 + std::exp(-0.1 * t[k]) * std::cos(4.321 * t[k]);
        y[k] = 2.5 * std::exp(-0.37 * t[k]);
    }
    const auto w = dominant_frequency(t, x);
    REQUIRE(w.has_value());
    CHECK(*w == doctest::Approx(4.321).epsilon(2e-3));
    CHECK_FALSE(dominant_frequency(t, flat).has_value());

    const auto g = fit_decay_rate(t, y);
    REQUIRE(g.has_value());
    CHECK(*g == doctest::Approx(0.37).epsilon(1e-10));
    CHECK_FALSE(fit_decay_rate({0.0, 1.0}, {1.0, 0.5}).has_value());
    CHECK_FALSE(fit_decay_rate({0.0, 1.0, 2.0}, {1.0, -0.5, 0.2}).has_value());

    const auto ls = log_space(1e-2, 1e2, 5);
    REQUIRE(ls.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) CHECK(ls[k] == doctest::Approx(std::pow(10.0, -2.0 + double(k))).epsilon(1e-14));
    CHECK_THROWS_AS(log_space(0, 1, 3), DomainError);
}

TEST_CASE("continuous cooling at weak coupling") {
    const FockSpace s = make_space(10, 6);
    const EffectiveParams p = params(0.1, 0.01, 1.0, 0.5);
    const double t_end = 20 / slowest_relaxation_rate(p);
    CoolingOptions opts;
    opts.samples = 401;
    const CoolingOutcome out = run_cooling(p, s, t_end, opts);
    const double closed = weak_coupling_steady(p.n_th, p.G_h, p.kappa_0, p.kappa_h);
    const double numeric = mode_population(steady_state(build_generator(p, s)), s, Mode::magnon);
    CHECK(numeric == doctest::Approx(closed).epsilon(0.02));
    CHECK(out.n0_steady == doctest::Approx(numeric).epsilon(1e-3));
    CHECK(out.entropy_thermal_ref == doctest::Approx(thermal_entropy(out.n0_steady)));
    CHECK(std::abs(out.entropy_steady - out.entropy_thermal_ref) < 0.05);
    CHECK_FALSE(out.swap_frequency.has_value());
    CHECK_FALSE(out.envelope_rate.has_value());
    CHECK(out.trajectory.n_magnon.front() == doctest::Approx(mode_population(thermal_state(s, 0.5, 0.0), s, Mode::magnon)));

    // no exchange: the magnon stays at its thermal occupation
    const CoolingOutcome idle = run_cooling(params(0, 0.01, 1.0, 0.5), s, 100.0, opts);
    for (double n : idle.trajectory.n_magnon) CHECK(n == doctest::Approx(idle.trajectory.n_magnon.front()).epsilon(1e-6));
}

TEST_CASE("continuous cooling at strong coupling") {
    const FockSpace s = make_space(10, 10);
    const EffectiveParams p = params(5.0, 0.01, 1.0, 0.5);
    const double kbar = (p.kappa_0 + p.kappa_h) / 2;
    CoolingOptions opts;
    opts.samples = 4001;
    const CoolingOutcome out = run_cooling(p, s, 20 / kbar, opts);
    REQUIRE(out.swap_frequency.has_value());
    CHECK(*out.swap_frequency == doctest::Approx(2 * p.G_h).epsilon(0.05));
    REQUIRE(out.envelope_rate.has_value());
    CHECK(*out.envelope_rate == doctest::Approx(kbar).epsilon(0.15));
}

TEST_CASE("Q-switch schedules") {
    const EffectiveParams p = params(2.0, 0.01, 1.0, 0.5);
    const QSwitchSchedule q = QSwitchSchedule::with_defaults(p, 0.0, 50.0, 2);
    CHECK(q.hold_time == doctest::Approx(c::pi / 4));
    CHECK(q.dump_time == doctest::Approx(0.1));
    CHECK(q.period() == doctest::Approx(c::pi / 4 + 0.1));
    const RateSchedule r = q.cavity_schedule();
    CHECK_NOTHROW(r.validate());
    REQUIRE(r.switch_times.size() == 3);
    CHECK(r.switch_times[0] == doctest::Approx(q.hold_time));
    CHECK(r.switch_times[1] == doctest::Approx(q.period()));
    CHECK(r.switch_times[2] == doctest::Approx(q.period() + q.hold_time));
    CHECK(r.rates == std::vector<double>{0.0, 50.0, 0.0, 50.0});

    QSwitchSchedule bad = q;
    bad.kappa_low = 60;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = q;
    bad.cycles = 0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = q;
    bad.dump_time = 0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    CHECK_THROWS_AS(QSwitchSchedule::with_defaults(params(0, 1, 1, 1), 0, 1), DomainError);

    CHECK(fast_dump_rate(params(2.0, 0.01, 1.0, 0.5)) == 20.0);
    CHECK(fast_dump_rate(params(0.2, 0.01, 1.0, 0.5)) == 10.0);
}

TEST_CASE("Q-switched cooling against the beam-splitter map") {
    // kappa_0 = 0, closed cavity during the hold: n0 -> n0 cos^2(G t_hold), then the dump
    // drains the photon while the strong damping holds the magnon in place.
    const FockSpace s = make_space(12, 12);
    const EffectiveParams p = params(1.0, 0.0, 1.0, 0.5);
    QSwitchSchedule q;
    q.kappa_low = 0;
    q.kappa_high = 2000;
    q.hold_time = c::pi / 3;
    q.dump_time = 5 / q.kappa_high;
    q.cycles = 1;
    CoolingOptions opts;
    opts.samples = 201;
    const CoolingOutcome out = run_q_switched(p, s, q, opts);
    const double n_init = out.trajectory.n_magnon.front();
    CHECK(out.n0_steady == doctest::Approx(n_init * 0.25).epsilon(1e-3));
    // a dump of 5/kappa_high leaves e^-5 of the photon
    CHECK(out.trajectory.n_photon.back() == doctest::Approx(0.75 * n_init * std::exp(-5.0)).epsilon(2e-3));

    // two full swaps: the first empties the magnon, the second brings back the photon residue
    q.hold_time = c::pi / 2;
    q.cycles = 2;
    const CoolingOutcome two = run_q_switched(p, s, q, opts);
    CHECK(two.n0_steady == doctest::Approx(n_init * std::exp(-5.0)).epsilon(2e-3));
}

TEST_CASE("sweep axes") {
    for (auto a : {SweepAxisName::G_h, SweepAxisName::kappa_0, SweepAxisName::kappa_h, SweepAxisName::n_th,
                   SweepAxisName::detuning}) {
        const auto back = parse_sweep_axis(to_string(a));
        REQUIRE(back.has_value());
        CHECK(*back == a);
    }
    CHECK_FALSE(parse_sweep_axis("omega").has_value());
    const EffectiveParams p = params(1, 2, 3, 4, 5);
    CHECK(with_axis_value(p, SweepAxisName::G_h, 9).G_h == 9);
    CHECK(with_axis_value(p, SweepAxisName::kappa_0, 9).kappa_0 == 9);
    CHECK(with_axis_value(p, SweepAxisName::kappa_h, 9).kappa_h == 9);
    CHECK(with_axis_value(p, SweepAxisName::n_th, 9).n_th == 9);
    CHECK(with_axis_value(p, SweepAxisName::detuning, 9).detuning == 9);
}

TEST_CASE("steady-state sweeps") {
    const FockSpace s = make_space(8, 4);
    const EffectiveParams base = params(0.05, 0.01, 1.0, 0.3);
    const std::vector<SweepAxis> axes{{SweepAxisName::G_h, log_space(0.01, 0.2, 4)},
                                      {SweepAxisName::kappa_h, log_space(0.5, 2.0, 3)}};
    SweepOptions one;
    const SweepResult a = sweep_steady(base, s, axes, one);
    REQUIRE(a.points.size() == 12);
    // first axis slowest
    CHECK(a.points[1].coords[0] == a.points[0].coords[0]);
    CHECK(a.points[3].coords[0] == axes[0].values[1]);
    for (const auto& pt : a.points) {
        CHECK(pt.status == "ok");
        REQUIRE(pt.n0_numeric.has_value());
        CHECK(*pt.n0_numeric == doctest::Approx(pt.n0_closed_form).epsilon(0.02));
    }
    // single point against a direct solve
    EffectiveParams p5 = with_axis_value(with_axis_value(base, SweepAxisName::G_h, a.points[5].coords[0]),
                                         SweepAxisName::kappa_h, a.points[5].coords[1]);
    CHECK(*a.points[5].n0_numeric ==
          doctest::Approx(mode_population(steady_state(build_generator(p5, s)), s, Mode::magnon)).epsilon(1e-10));

    SweepOptions three;
    three.jobs = 3;
    const SweepResult b = sweep_steady(base, s, axes, three);
    for (std::size_t k = 0; k < a.points.size(); ++k) {
        CHECK(*a.points[k].n0_numeric == *b.points[k].n0_numeric);
        CHECK(a.points[k].coords == b.points[k].coords);
    }

    // a point without magnon damping or exchange fails, the rest of the sweep completes
    const EffectiveParams still = params(0.0, 0.01, 1.0, 0.3);
    const SweepResult f = sweep_steady(still, s, {{SweepAxisName::kappa_0, {0.0, 0.01, 0.1}}}, three);
    REQUIRE(f.points.size() == 3);
    CHECK(f.points[0].status.rfind("steady:", 0) == 0);
    CHECK_FALSE(f.points[0].n0_numeric.has_value());
    CHECK(f.points[1].status == "ok");
    CHECK(f.points[2].status == "ok");

    CHECK_THROWS_AS(sweep_steady(base, s, {}), DomainError);
    CHECK_THROWS_AS(sweep_steady(base, s, {{SweepAxisName::G_h, {2.0, 1.0}}}), DomainError);
    CHECK_THROWS_AS(sweep_steady(base, s, {{SweepAxisName::G_h, {1.0}}, {SweepAxisName::G_h, {2.0}}}), DomainError);

    // the Q-switched protocol can ride along each point
    SweepOptions qs;
    qs.q_switch = [](const EffectiveParams& p) { return QSwitchSchedule::with_defaults(p, 0.0, p.kappa_h, 2); };
    qs.q_switch_cooling.samples = 11;
    const SweepResult r = sweep_steady(base, s, {{SweepAxisName::G_h, {0.5, 1.0}}}, qs);
    for (const auto& pt : r.points) {
        REQUIRE(pt.n0_q_switched.has_value());
        CHECK(*pt.n0_q_switched < base.n_th);
    }
}
