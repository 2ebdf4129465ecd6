#include "nmcool/protocols.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <exception>
#include <numeric>
#include <thread>

#include "nmcool/constants.hpp"
#include "nmcool/errors.hpp"

namespace nmcool {

double weak_coupling_steady(double n_th, double G_h, double kappa_0, double kappa_h) {
    if (n_th < 0 || G_h < 0 || kappa_0 < 0 || kappa_h < 0)
        throw DomainError("weak_coupling_steady: arguments must be >= 0");
    const double den = 4 * G_h * G_h + kappa_0 * kappa_h;
    if (!(den > 0)) throw DomainError("weak_coupling_steady: 4 G_h^2 + kappa_0 kappa_h must be positive");
    return n_th * kappa_0 * kappa_h / den;
}

double backheating_floor(double n_th, double kappa_0, double kappa_h) {
    if (!(kappa_h > 0)) throw DomainError("backheating_floor: kappa_h must be positive");
    if (n_th < 0 || kappa_0 < 0) throw DomainError("backheating_floor: arguments must be >= 0");
    return n_th * kappa_0 / kappa_h;
}

double slowest_relaxation_rate(const EffectiveParams& p) {
    Eigen::Matrix2cd a;
    const std::complex<double> i{0, 1};
    a << -p.kappa_0 / 2, -i * p.G_h, -i * p.G_h, -p.kappa_h / 2 - i * p.detuning;
    const Eigen::Vector2cd ev = a.eigenvalues();
    return 2 * std::min(std::abs(ev(0).real()), std::abs(ev(1).real()));
}

std::vector<double> uniform_grid(double t_end, int samples) {
    if (!(t_end > 0)) throw DomainError("uniform_grid: t_end must be positive");
    if (samples < 2) throw DomainError("uniform_grid: need at least 2 samples");
    std::vector<double> t(static_cast<std::size_t>(samples));
    for (int k = 0; k < samples; ++k) t[k] = t_end * k / (samples - 1);
    t.back() = t_end;
    return t;
}

namespace {

double tail_mean(const std::vector<double>& x) {
    const std::size_t n = x.size();
    const std::size_t start = n - std::max<std::size_t>(1, n / 10);
    return std::accumulate(x.begin() + static_cast<long>(start), x.end(), 0.0) / static_cast<double>(n - start);
}

DensityMatrix initial_state(const EffectiveParams& params, const FockSpace& space) {
    return thermal_state(space, params.n_th, 0.0);
}

}  // namespace

std::optional<double> dominant_frequency(const std::vector<double>& t, const std::vector<double>& x) {
    const std::size_t n = t.size();
    if (n < 8 || x.size() != n) return std::nullopt;
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    std::vector<double> y(n);
    double energy = 0;
    for (std::size_t k = 0; k < n; ++k) {
        y[k] = x[k] - mean;
        energy += y[k] * y[k];
    }
    if (!(energy > 0)) return std::nullopt;

    const double span = t.back() - t.front();
    const double dt = span / static_cast<double>(n - 1);
    auto magnitude = [&](double w) {
        const std::complex<double> rot = std::polar(1.0, -w * dt);
        std::complex<double> z = 1.0, acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            acc += y[k] * z;
            z *= rot;
        }
        return std::abs(acc);
    };

    const double w_lo = constants::two_pi / span;
    const double w_hi = constants::pi / dt;
    const double step = constants::two_pi / (8 * span);
    double best_w = 0, best = -1;
    for (double w = w_lo; w <= w_hi; w += step) {
        const double m = magnitude(w);
        if (m > best) {
            best = m;
            best_w = w;
        }
    }
    if (best <= 0) return std::nullopt;

    // golden-section refinement within one scan step
    double a = std::max(w_lo, best_w - step), b = std::min(w_hi, best_w + step);
    const double r = (std::sqrt(5.0) - 1) / 2;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = magnitude(c), fd = magnitude(d);
    for (int it = 0; it < 60 && b - a > 1e-12 * best_w; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = magnitude(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = magnitude(d);
        }
    }
    return 0.5 * (a + b);
}

std::optional<double> fit_decay_rate(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size() || t.size() < 3) return std::nullopt;
    double st = 0, sl = 0, stt = 0, stl = 0;
    const double n = static_cast<double>(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!(y[k] > 0)) return std::nullopt;
        const double l = std::log(y[k]);
        st += t[k];
        sl += l;
        stt += t[k] * t[k];
        stl += t[k] * l;
    }
    const double den = n * stt - st * st;
    if (!(den > 0)) return std::nullopt;
    return -(n * stl - st * sl) / den;
}

CoolingOutcome run_cooling(const EffectiveParams& params, const FockSpace& space, double t_end,
                           const CoolingOptions& opts) {
    if (!(t_end > 0)) throw DomainError("run_cooling: t_end must be positive");
    const LindbladGenerator gen = build_generator(params, space, opts.frame);
    CoolingOutcome out;
    out.trajectory = propagate(gen, initial_state(params, space), uniform_grid(t_end, opts.samples), opts.integrator);
    const TrajectoryRecord& tr = out.trajectory;

    out.n0_steady = std::max(0.0, tail_mean(tr.n_magnon));
    out.entropy_steady = std::max(0.0, tail_mean(tr.entropy_magnon));
    out.entropy_thermal_ref = thermal_entropy(out.n0_steady);

    if (params.G_h >= params.kappa_h && params.G_h > 0) {
        // Oscillating part of n0: the total n0 + n_h only decays.
        std::vector<double> swing(tr.size());
        for (std::size_t k = 0; k < tr.size(); ++k) swing[k] = 0.5 * (tr.n_magnon[k] - tr.n_photon[k]);
        out.swap_frequency = dominant_frequency(tr.times, swing);

        // n0 + n_h steps down whenever the photon is populated; its upper corners are the
        // photon-empty instants, i.e. the local maxima of n0.
        const double floor = 10 * tail_mean(tr.n_magnon);
        std::vector<double> tm, ym;
        for (std::size_t k = 1; k + 1 < tr.size(); ++k) {
            const double n0 = tr.n_magnon[k];
            if (n0 >= tr.n_magnon[k - 1] && n0 > tr.n_magnon[k + 1]) {
                const double total = n0 + tr.n_photon[k];
                if (total > floor) {
                    tm.push_back(tr.times[k]);
                    ym.push_back(total);
                }
            }
        }
        out.envelope_rate = fit_decay_rate(tm, ym);
        out.envelope_fit_failed = !out.envelope_rate.has_value();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Q-switching

QSwitchSchedule QSwitchSchedule::with_defaults(const EffectiveParams& params, double kappa_low, double kappa_high,
                                               int cycles) {
    if (!(params.G_h > 0)) throw DomainError("QSwitchSchedule: default hold time needs G_h > 0");
    if (!(kappa_high > 0)) throw DomainError("QSwitchSchedule: kappa_high must be positive");
    QSwitchSchedule s;
    s.kappa_low = kappa_low;
    s.kappa_high = kappa_high;
    s.hold_time = constants::pi / (2 * params.G_h);
    s.dump_time = 5 / kappa_high;
    s.cycles = cycles;
    return s;
}

void QSwitchSchedule::validate() const {
    if (!(kappa_low >= 0)) throw DomainError("QSwitchSchedule: kappa_low must be >= 0");
    if (!(kappa_low < kappa_high)) throw DomainError("QSwitchSchedule: kappa_low must be below kappa_high");
    if (!(hold_time > 0) || !(dump_time > 0)) throw DomainError("QSwitchSchedule: durations must be positive");
    if (cycles < 1) throw DomainError("QSwitchSchedule: cycles must be >= 1");
}

double fast_dump_rate(const EffectiveParams& params) { return 10 * std::max(params.G_h, params.kappa_h); }

RateSchedule QSwitchSchedule::cavity_schedule() const {
    RateSchedule r;
    r.rates.push_back(kappa_low);
    for (int c = 0; c < cycles; ++c) {
        const double start = c * period();
        r.switch_times.push_back(start + hold_time);
        r.rates.push_back(kappa_high);
        if (c + 1 < cycles) {
            r.switch_times.push_back(start + period());
            r.rates.push_back(kappa_low);
        }
    }
    return r;
}

CoolingOutcome run_q_switched(const EffectiveParams& params, const FockSpace& space, const QSwitchSchedule& schedule,
                              const CoolingOptions& opts) {
    schedule.validate();
    LindbladGenerator gen = build_generator(params, space, opts.frame);
    gen.set_schedule("cavity", schedule.cavity_schedule());
    const double t_end = schedule.cycles * schedule.period();

    CoolingOutcome out;
    out.trajectory = propagate(gen, initial_state(params, space), uniform_grid(t_end, opts.samples), opts.integrator);
    const TrajectoryRecord& tr = out.trajectory;
    out.n0_steady = std::max(0.0, tr.n_magnon.back());
    out.entropy_steady = std::max(0.0, tr.entropy_magnon.back());
    out.entropy_thermal_ref = thermal_entropy(out.n0_steady);
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

const char* to_string(SweepAxisName a) {
    switch (a) {
        case SweepAxisName::G_h: return "G_h";
        case SweepAxisName::kappa_0: return "kappa_0";
        case SweepAxisName::kappa_h: return "kappa_h";
        case SweepAxisName::n_th: return "n_th";
        case SweepAxisName::detuning: return "detuning";
    }
    return "?";
}

std::optional<SweepAxisName> parse_sweep_axis(const std::string& name) {
    for (auto a : {SweepAxisName::G_h, SweepAxisName::kappa_0, SweepAxisName::kappa_h, SweepAxisName::n_th,
                   SweepAxisName::detuning})
        if (name == to_string(a)) return a;
    return std::nullopt;
}

std::vector<double> log_space(double lo, double hi, int count) {
    if (!(lo > 0) || !(hi > lo)) throw DomainError("log_space: need 0 < lo < hi");
    if (count < 2) throw DomainError("log_space: need at least 2 points");
    std::vector<double> v(static_cast<std::size_t>(count));
    const double a = std::log(lo), b = std::log(hi);
    for (int k = 0; k < count; ++k) v[k] = std::exp(a + (b - a) * k / (count - 1));
    v.front() = lo;
    v.back() = hi;
    return v;
}

EffectiveParams with_axis_value(EffectiveParams p, SweepAxisName axis, double value) {
    switch (axis) {
        case SweepAxisName::G_h: p.G_h = value; break;
        case SweepAxisName::kappa_0: p.kappa_0 = value; break;
        case SweepAxisName::kappa_h: p.kappa_h = value; break;
        case SweepAxisName::n_th: p.n_th = value; break;
        case SweepAxisName::detuning: p.detuning = value; break;
    }
    return p;
}

SweepResult sweep_steady(const EffectiveParams& base, const FockSpace& space, const std::vector<SweepAxis>& axes,
                         const SweepOptions& opts) {
    if (axes.empty() || axes.size() > 3) throw DomainError("sweep_steady: need 1 to 3 axes");
    std::size_t total = 1;
    for (const auto& ax : axes) {
        if (ax.values.empty()) throw DomainError(std::string("sweep_steady: axis ") + to_string(ax.name) + " is empty");
        for (std::size_t k = 1; k < ax.values.size(); ++k)
            if (!(ax.values[k] > ax.values[k - 1]))
                throw DomainError(std::string("sweep_steady: axis ") + to_string(ax.name) + " must increase strictly");
        total *= ax.values.size();
    }
    for (std::size_t a = 0; a < axes.size(); ++a)
        for (std::size_t b = a + 1; b < axes.size(); ++b)
            if (axes[a].name == axes[b].name) throw DomainError("sweep_steady: duplicate axis");

    SweepResult result;
    result.axes = axes;
    result.points.resize(total);

    auto evaluate = [&](std::size_t index) {
        SweepPoint& pt = result.points[index];
        EffectiveParams p = base;
        std::size_t rem = index;
        pt.coords.assign(axes.size(), 0.0);
        for (std::size_t a = axes.size(); a-- > 0;) {
            const std::size_t n = axes[a].values.size();
            pt.coords[a] = axes[a].values[rem % n];
            rem /= n;
        }
        for (std::size_t a = 0; a < axes.size(); ++a) p = with_axis_value(p, axes[a].name, pt.coords[a]);
        try {
            pt.n0_closed_form = weak_coupling_steady(p.n_th, p.G_h, p.kappa_0, p.kappa_h);
        } catch (const DomainError&) {
            pt.n0_closed_form = std::nan("");
        }
        std::vector<std::string> failures;
        try {
            const DensityMatrix rho = steady_state(build_generator(p, space), opts.steady);
            pt.n0_numeric = mode_population(rho, space, Mode::magnon);
        } catch (const std::exception& e) {
            failures.push_back(std::string("steady: ") + e.what());
        }
        if (opts.q_switch) {
            try {
                pt.n0_q_switched = run_q_switched(p, space, opts.q_switch(p), opts.q_switch_cooling).n0_steady;
            } catch (const std::exception& e) {
                failures.push_back(std::string("qswitch: ") + e.what());
            }
        }
        if (!failures.empty()) {
            pt.status.clear();
            for (const auto& f : failures) pt.status += (pt.status.empty() ? "" : "; ") + f;
        }
    };

    const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(total)));
    if (jobs == 1) {
        for (std::size_t i = 0; i < total; ++i) evaluate(i);
        return result;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w)
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < total; i = next++) evaluate(i);
        });
    for (auto& w : workers) w.join();
    return result;
}

}  // namespace nmcool
