#pragma once

// Cooling experiments built on the Lindblad solver: closed-form benchmarks,
// continuous cooling runs, the Q-switched protocol and steady-state sweeps.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nmcool/liouvillian.hpp"

namespace nmcool {

/// n_th kappa_0 kappa_h / (4 G^2 + kappa_0 kappa_h).
double weak_coupling_steady(double n_th, double G_h, double kappa_0, double kappa_h);

/// n_th kappa_0 / kappa_h.
double backheating_floor(double n_th, double kappa_0, double kappa_h);

/// Slowest decay rate of the mean occupations, 2 min|Re lambda| over the eigenvalues of
/// the amplitude drift matrix [[-kappa_0/2, -i G], [-i G, -kappa_h/2]] (detuning included).
/// Reduces to kappa_0 + 4 G^2/kappa_h at weak coupling and (kappa_0 + kappa_h)/2 at strong coupling.
double slowest_relaxation_rate(const EffectiveParams& params);

struct CoolingOutcome {
    double n0_steady = 0;
    double entropy_steady = 0;
    double entropy_thermal_ref = 0;  // thermal_entropy(n0_steady)
    std::optional<double> swap_frequency;
    std::optional<double> envelope_rate;
    bool envelope_fit_failed = false;
    TrajectoryRecord trajectory;
};

struct CoolingOptions {
    int samples = 2001;
    Frame frame = Frame::co_rotating;
    IntegratorOptions integrator;
};

/// `samples` equally spaced times on [0, t_end].
std::vector<double> uniform_grid(double t_end, int samples);

/// Starts from thermal(n_th) x vacuum and propagates to t_end. Steady metrics are
/// tail means over the last 10% of the grid; swap frequency and envelope rate are
/// extracted when G_h >= kappa_h.
CoolingOutcome run_cooling(const EffectiveParams& params, const FockSpace& space, double t_end,
                           const CoolingOptions& opts = {});

/// Dominant nonzero frequency (rad/s) of a uniformly sampled signal, from a finely
/// scanned discrete-time Fourier transform. Empty when the signal has no oscillation.
std::optional<double> dominant_frequency(const std::vector<double>& t, const std::vector<double>& x);

/// Decay rate from a log-linear least-squares fit; needs at least 3 points.
std::optional<double> fit_decay_rate(const std::vector<double>& t, const std::vector<double>& y);

struct QSwitchSchedule {
    double kappa_low = 0;
    double kappa_high = 0;
    double hold_time = 0;
    double dump_time = 0;
    int cycles = 1;

    /// Half-swap hold pi/(2 G_h) and a dump of 5/kappa_high.
    static QSwitchSchedule with_defaults(const EffectiveParams& params, double kappa_low, double kappa_high,
                                         int cycles = 1);
    double period() const { return hold_time + dump_time; }
    void validate() const;
    /// Cavity rate schedule: hold at kappa_low, then dump at kappa_high, repeated.
    RateSchedule cavity_schedule() const;
};

/// Dump rate 10 max(G_h, kappa_h): fast against the exchange, so the photon is
/// drained before it swaps back into the magnon.
double fast_dump_rate(const EffectiveParams& params);

/// Runs the schedule from thermal(n_th) x vacuum. n0_steady holds n0 at the end of the last dump.
CoolingOutcome run_q_switched(const EffectiveParams& params, const FockSpace& space, const QSwitchSchedule& schedule,
                              const CoolingOptions& opts = {});

enum class SweepAxisName { G_h, kappa_0, kappa_h, n_th, detuning };

const char* to_string(SweepAxisName a);
std::optional<SweepAxisName> parse_sweep_axis(const std::string& name);

struct SweepAxis {
    SweepAxisName name;
    std::vector<double> values;
};

/// `count` log-spaced values from lo to hi inclusive.
std::vector<double> log_space(double lo, double hi, int count);

struct SweepPoint {
    std::vector<double> coords;  // one per axis
    std::optional<double> n0_numeric;
    double n0_closed_form = 0;
    std::optional<double> n0_q_switched;
    std::string status = "ok";
};

struct SweepOptions {
    int jobs = 1;
    SteadyStateOptions steady;
    /// When set, each point also runs the Q-switched protocol built from its parameters.
    std::function<QSwitchSchedule(const EffectiveParams&)> q_switch;
    CoolingOptions q_switch_cooling;
};

struct SweepResult {
    std::vector<SweepAxis> axes;
    std::vector<SweepPoint> points;  // first axis varies slowest
};

EffectiveParams with_axis_value(EffectiveParams p, SweepAxisName axis, double value);

/// Steady-state magnon population over the grid spanned by up to three axes.
/// Per-point failures are recorded in `status` and the sweep continues.
SweepResult sweep_steady(const EffectiveParams& base, const FockSpace& space, const std::vector<SweepAxis>& axes,
                         const SweepOptions& opts = {});

}  // namespace nmcool
