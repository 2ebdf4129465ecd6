#pragma once

// Rotating-frame Hamiltonian, Lindblad generator, time propagation and
// steady-state solve for the magnon + cavity-photon system.
//
//   d rho/dt = i[rho, H] + sum_k rate_k (J rho J^† - {J^† J, rho}/2)

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "nmcool/hilbert.hpp"
#include "nmcool/magnonics.hpp"

namespace nmcool {

using SparseOperator = Eigen::SparseMatrix<std::complex<double>>;

/// pump: the frame rotating at the pump frequency (H contains omega_0 a^†a + (omega_0+Delta) b^†b).
/// co_rotating: additionally rotating both modes at omega_0; the common term omega_0 (a^†a + b^†b)
/// commutes with every jump and observable, so populations and entropies are unchanged.
enum class Frame { pump, co_rotating };

/// Piecewise-constant rate: rates[0] before switch_times[0], rates[k] on
/// [switch_times[k-1], switch_times[k]), rates.back() afterwards.
struct RateSchedule {
    std::vector<double> switch_times;
    std::vector<double> rates;

    double rate_at(double t) const;
    void validate() const;
};

struct Dissipator {
    std::string label;
    double rate = 0;
    SparseOperator jump;
    std::optional<RateSchedule> schedule;

    double rate_at(double t) const { return schedule ? schedule->rate_at(t) : rate; }
};

class LindbladGenerator {
public:
    LindbladGenerator(FockSpace space, OperatorMatrix hamiltonian, std::vector<Dissipator> dissipators);

    const FockSpace& space() const noexcept { return space_; }
    const OperatorMatrix& hamiltonian() const noexcept { return hamiltonian_; }
    const std::vector<Dissipator>& dissipators() const noexcept { return dissipators_; }

    /// Attaches a rate schedule to the dissipator with the given label.
    void set_schedule(const std::string& label, RateSchedule schedule);

    bool time_independent() const;
    std::vector<double> rates_at(double t) const;
    /// Sorted, de-duplicated switch times of every schedule.
    std::vector<double> switch_times() const;
    /// Largest |rate| or |H entry|; sets the scale of the generator.
    double scale() const;

    /// Direct matrix form of the generator applied to rho at time t.
    OperatorMatrix apply(const OperatorMatrix& rho, double t = 0) const;

private:
    FockSpace space_;
    OperatorMatrix hamiltonian_;
    std::vector<Dissipator> dissipators_;
};

OperatorMatrix build_hamiltonian(const EffectiveParams& params, const FockSpace& space,
                                 Frame frame = Frame::co_rotating);

/// Dissipators labelled "cavity" (kappa_h, b_h), "magnon_decay" (kappa_0 (n_th+1), a_0)
/// and "magnon_heating" (kappa_0 n_th, a_0^†). Cavity thermal photons are neglected.
LindbladGenerator build_generator(const EffectiveParams& params, const FockSpace& space,
                                  Frame frame = Frame::co_rotating);

/// Set of matrix units |i><j| spanning the vectorized operator space.
class OperatorBasis {
public:
    /// All d^2 entries.
    static OperatorBasis full(const FockSpace& space);
    /// Entries with equal total excitation number on both sides.
    static OperatorBasis charge_diagonal(const FockSpace& space);

    const FockSpace& space() const noexcept { return space_; }
    Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(entries_.size()); }
    bool is_charge_diagonal() const noexcept { return charge_diagonal_; }
    const std::vector<std::pair<int, int>>& entries() const noexcept { return entries_; }
    /// Basis position of |i><j|, or -1 when outside the basis.
    int find(int i, int j) const noexcept { return lookup_[static_cast<std::size_t>(i) * d_ + j]; }
    /// Position of the adjoint entry |j><i|.
    int adjoint_of(int k) const noexcept { return adjoint_[k]; }
    /// Positions of the diagonal entries |i><i|, in joint-index order.
    const std::vector<int>& diagonal() const noexcept { return diagonal_; }

    Eigen::VectorXcd pack(const OperatorMatrix& m) const;
    OperatorMatrix unpack(const Eigen::VectorXcd& v) const;
    /// Largest |entry| of m outside the basis.
    double leakage(const OperatorMatrix& m) const;

private:
    OperatorBasis(FockSpace space, bool charge_diagonal);

    FockSpace space_;
    int d_;
    bool charge_diagonal_;
    std::vector<std::pair<int, int>> entries_;
    std::vector<int> lookup_;
    std::vector<int> adjoint_;
    std::vector<int> diagonal_;
};

/// True when H conserves the total excitation number and every jump changes it by a fixed amount,
/// so the generator maps the charge-diagonal sector into itself.
bool conserves_excitation_sectors(const LindbladGenerator& gen);

/// Generator as sparse matrices on an operator basis, split into the Hamiltonian part
/// and one unit-rate part per dissipator.
class VectorizedGenerator {
public:
    VectorizedGenerator(const LindbladGenerator& gen, OperatorBasis basis);

    const OperatorBasis& basis() const noexcept { return basis_; }
    Eigen::SparseMatrix<std::complex<double>> assemble(const std::vector<double>& rates) const;

private:
    OperatorBasis basis_;
    Eigen::SparseMatrix<std::complex<double>> hamiltonian_part_;
    std::vector<Eigen::SparseMatrix<std::complex<double>>> dissipator_parts_;
};

/// Basis used by the solvers: the charge-diagonal sector when the generator and
/// state allow it, otherwise the full operator space.
OperatorBasis solver_basis(const LindbladGenerator& gen, const OperatorMatrix* state = nullptr);

struct IntegratorOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double max_trace_drift = 1e-6;
    long max_steps = 50'000'000;
};

struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<double> n_magnon;
    std::vector<double> n_photon;
    std::vector<double> entropy_magnon;
    std::vector<double> trace_error;
    std::vector<double> min_eigenvalue;
    double max_hermiticity_defect = 0;  // over every accepted step, before re-symmetrization
    long accepted_steps = 0;
    long rejected_steps = 0;
    DensityMatrix final_state = DensityMatrix::unchecked(OperatorMatrix::Zero(1, 1));

    std::size_t size() const noexcept { return times.size(); }
};

/// Integrates the master equation with adaptive Dormand-Prince 5(4), re-symmetrizing
/// rho after each accepted step and stopping exactly at grid points and rate switches.
/// t_grid must start at 0 and increase strictly.
TrajectoryRecord propagate(const LindbladGenerator& gen, const DensityMatrix& rho0, const std::vector<double>& t_grid,
                           const IntegratorOptions& opts = {});

struct SteadyStateOptions {
    /// Constrained systems up to this many unknowns use dense LU, larger ones sparse LU.
    Eigen::Index dense_limit = 3000;
    /// Reciprocal condition number below which the steady state is declared non-unique.
    double min_rcond = 1e-13;
    /// Force the full d^2 operator space even when the sector reduction applies.
    bool full_space = false;
};

/// Solves L rho = 0 with Tr rho = 1 (one equation replaced by the trace constraint).
DensityMatrix steady_state(const LindbladGenerator& gen, const SteadyStateOptions& opts = {});

struct StateDiagnostics {
    double hermiticity_defect = 0;
    double trace_defect = 0;
    double min_eigenvalue = 0;
    double top_level_magnon = 0;  // population of the highest retained Fock level
    double top_level_photon = 0;
    bool truncation_warning = false;
};

StateDiagnostics validate_state(const OperatorMatrix& rho, const FockSpace& space, double truncation_threshold = 0.01);
inline StateDiagnostics validate_state(const DensityMatrix& rho, const FockSpace& space,
                                       double truncation_threshold = 0.01) {
    return validate_state(rho.matrix(), space, truncation_threshold);
}

}  // namespace nmcool
