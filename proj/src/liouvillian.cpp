#include "nmcool/liouvillian.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "nmcool/errors.hpp"

namespace nmcool {

using Complex = std::complex<double>;
using SparseComplex = Eigen::SparseMatrix<Complex>;
using Triplet = Eigen::Triplet<Complex>;

namespace {

constexpr Complex kI{0.0, 1.0};

SparseOperator to_sparse(const OperatorMatrix& m) {
    SparseOperator s = m.sparseView();
    s.makeCompressed();
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// RateSchedule

double RateSchedule::rate_at(double t) const {
    const auto it = std::upper_bound(switch_times.begin(), switch_times.end(), t);
    return rates[static_cast<std::size_t>(it - switch_times.begin())];
}

void RateSchedule::validate() const {
    if (rates.size() != switch_times.size() + 1)
        throw DomainError("RateSchedule: need exactly one more rate than switch times");
    for (double r : rates)
        if (!(r >= 0)) throw DomainError("RateSchedule: rates must be >= 0");
    for (std::size_t k = 1; k < switch_times.size(); ++k)
        if (!(switch_times[k] > switch_times[k - 1]))
            throw DomainError("RateSchedule: switch times must increase strictly");
}

// ---------------------------------------------------------------------------
// LindbladGenerator

LindbladGenerator::LindbladGenerator(FockSpace space, OperatorMatrix hamiltonian, std::vector<Dissipator> dissipators)
    : space_(space), hamiltonian_(std::move(hamiltonian)), dissipators_(std::move(dissipators)) {
    const int d = space_.joint_dim();
    if (hamiltonian_.rows() != d || hamiltonian_.cols() != d)
        throw DomainError("LindbladGenerator: Hamiltonian does not match the space");
    for (const auto& dis : dissipators_) {
        if (dis.jump.rows() != d || dis.jump.cols() != d)
            throw DomainError("LindbladGenerator: jump operator '" + dis.label + "' does not match the space");
        if (!(dis.rate >= 0)) throw DomainError("LindbladGenerator: rate of '" + dis.label + "' must be >= 0");
        if (dis.schedule) dis.schedule->validate();
    }
}

void LindbladGenerator::set_schedule(const std::string& label, RateSchedule schedule) {
    schedule.validate();
    for (auto& dis : dissipators_)
        if (dis.label == label) {
            dis.schedule = std::move(schedule);
            return;
        }
    throw DomainError("LindbladGenerator: no dissipator labelled '" + label + "'");
}

bool LindbladGenerator::time_independent() const {
    return std::none_of(dissipators_.begin(), dissipators_.end(), [](const Dissipator& d) { return d.schedule.has_value(); });
}

std::vector<double> LindbladGenerator::rates_at(double t) const {
    std::vector<double> r;
    r.reserve(dissipators_.size());
    for (const auto& d : dissipators_) r.push_back(d.rate_at(t));
    return r;
}

std::vector<double> LindbladGenerator::switch_times() const {
    std::set<double> s;
    for (const auto& d : dissipators_)
        if (d.schedule) s.insert(d.schedule->switch_times.begin(), d.schedule->switch_times.end());
    return {s.begin(), s.end()};
}

double LindbladGenerator::scale() const {
    double s = hamiltonian_.size() ? hamiltonian_.cwiseAbs().maxCoeff() : 0.0;
    for (const auto& d : dissipators_) {
        s = std::max(s, d.rate);
        if (d.schedule)
            for (double r : d.schedule->rates) s = std::max(s, r);
    }
    return s;
}

OperatorMatrix LindbladGenerator::apply(const OperatorMatrix& rho, double t) const {
    OperatorMatrix out = kI * (rho * hamiltonian_ - hamiltonian_ * rho);
    for (const auto& d : dissipators_) {
        const double r = d.rate_at(t);
        if (r == 0) continue;
        const OperatorMatrix jr = d.jump * rho;
        const SparseOperator jd = d.jump.adjoint();
        const OperatorMatrix jdj = OperatorMatrix(jd * d.jump);
        out += r * (jr * OperatorMatrix(jd) - 0.5 * (jdj * rho + rho * jdj));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Builders

OperatorMatrix build_hamiltonian(const EffectiveParams& params, const FockSpace& space, Frame frame) {
    const OperatorMatrix a = annihilation(space, Mode::magnon);
    const OperatorMatrix b = annihilation(space, Mode::photon);
    const OperatorMatrix na = number_operator(space, Mode::magnon);
    const OperatorMatrix nb = number_operator(space, Mode::photon);
    const double common = frame == Frame::pump ? params.omega_0 : 0.0;
    OperatorMatrix h = common * na + (common + params.detuning) * nb;
    const OperatorMatrix exchange = b.adjoint() * a;
    h += params.G_h * (exchange + exchange.adjoint());
    return h;
}

LindbladGenerator build_generator(const EffectiveParams& params, const FockSpace& space, Frame frame) {
    if (const auto v = params.violations(); !v.empty()) throw DomainError("build_generator: " + v.front());
    const OperatorMatrix a = annihilation(space, Mode::magnon);
    const OperatorMatrix b = annihilation(space, Mode::photon);
    std::vector<Dissipator> dis;
    dis.push_back({"cavity", params.kappa_h, to_sparse(b), std::nullopt});
    dis.push_back({"magnon_decay", params.kappa_0 * (params.n_th + 1), to_sparse(a), std::nullopt});
    dis.push_back({"magnon_heating", params.kappa_0 * params.n_th, to_sparse(a.adjoint()), std::nullopt});
    return LindbladGenerator(space, build_hamiltonian(params, space, frame), std::move(dis));
}

// ---------------------------------------------------------------------------
// OperatorBasis

OperatorBasis::OperatorBasis(FockSpace space, bool charge_diagonal)
    : space_(space), d_(space.joint_dim()), charge_diagonal_(charge_diagonal) {
    lookup_.assign(static_cast<std::size_t>(d_) * d_, -1);
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) {
            if (charge_diagonal && space_.excitations(i) != space_.excitations(j)) continue;
            lookup_[static_cast<std::size_t>(i) * d_ + j] = static_cast<int>(entries_.size());
            entries_.emplace_back(i, j);
        }
    adjoint_.resize(entries_.size());
    for (std::size_t k = 0; k < entries_.size(); ++k) adjoint_[k] = find(entries_[k].second, entries_[k].first);
    for (int i = 0; i < d_; ++i) diagonal_.push_back(find(i, i));
}

OperatorBasis OperatorBasis::full(const FockSpace& space) { return OperatorBasis(space, false); }
OperatorBasis OperatorBasis::charge_diagonal(const FockSpace& space) { return OperatorBasis(space, true); }

Eigen::VectorXcd OperatorBasis::pack(const OperatorMatrix& m) const {
    Eigen::VectorXcd v(size());
    for (std::size_t k = 0; k < entries_.size(); ++k) v(static_cast<Eigen::Index>(k)) = m(entries_[k].first, entries_[k].second);
    return v;
}

OperatorMatrix OperatorBasis::unpack(const Eigen::VectorXcd& v) const {
    OperatorMatrix m = OperatorMatrix::Zero(d_, d_);
    for (std::size_t k = 0; k < entries_.size(); ++k) m(entries_[k].first, entries_[k].second) = v(static_cast<Eigen::Index>(k));
    return m;
}

double OperatorBasis::leakage(const OperatorMatrix& m) const {
    double worst = 0;
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j)
            if (find(i, j) < 0) worst = std::max(worst, std::abs(m(i, j)));
    return worst;
}

// ---------------------------------------------------------------------------
// Vectorization

namespace {

// Set of excitation-number shifts q(row) - q(col) over the nonzeros of an operator.
template <typename Visit>
std::set<int> charge_shifts(const FockSpace& space, Visit&& for_each_nonzero) {
    std::set<int> shifts;
    for_each_nonzero([&](int r, int c) { shifts.insert(space.excitations(r) - space.excitations(c)); });
    return shifts;
}

}  // namespace

bool conserves_excitation_sectors(const LindbladGenerator& gen) {
    const FockSpace& space = gen.space();
    const OperatorMatrix& h = gen.hamiltonian();
    const auto hs = charge_shifts(space, [&](auto&& f) {
        for (int r = 0; r < h.rows(); ++r)
            for (int c = 0; c < h.cols(); ++c)
                if (h(r, c) != 0.0) f(r, c);
    });
    if (hs.size() > 1 || (hs.size() == 1 && *hs.begin() != 0)) return false;
    for (const auto& d : gen.dissipators()) {
        const auto js = charge_shifts(space, [&](auto&& f) {
            for (int c = 0; c < d.jump.outerSize(); ++c)
                for (SparseOperator::InnerIterator it(d.jump, c); it; ++it)
                    if (it.value() != 0.0) f(static_cast<int>(it.row()), c);
        });
        if (js.size() > 1) return false;
    }
    return true;
}

OperatorBasis solver_basis(const LindbladGenerator& gen, const OperatorMatrix* state) {
    if (!conserves_excitation_sectors(gen)) return OperatorBasis::full(gen.space());
    OperatorBasis sector = OperatorBasis::charge_diagonal(gen.space());
    if (state) {
        const double norm = state->cwiseAbs().maxCoeff();
        if (sector.leakage(*state) > 1e-15 * norm) return OperatorBasis::full(gen.space());
    }
    return sector;
}

namespace {

// Accumulates the columns of a superoperator, one basis element |i><j| at a time.
class SuperBuilder {
public:
    explicit SuperBuilder(const OperatorBasis& basis) : basis_(basis) {}

    void add(int row_i, int row_j, int col, Complex v) {
        if (v == 0.0) return;
        const int row = basis_.find(row_i, row_j);
        if (row < 0) {
            leaked_ = true;
            return;
        }
        triplets_.emplace_back(row, col, v);
    }

    SparseComplex finish() {
        if (leaked_) throw SolverError("vectorization: generator maps the operator basis outside itself");
        SparseComplex m(basis_.size(), basis_.size());
        m.setFromTriplets(triplets_.begin(), triplets_.end());
        m.makeCompressed();
        return m;
    }

private:
    const OperatorBasis& basis_;
    std::vector<Triplet> triplets_;
    bool leaked_ = false;
};

}  // namespace

VectorizedGenerator::VectorizedGenerator(const LindbladGenerator& gen, OperatorBasis basis) : basis_(std::move(basis)) {
    const SparseOperator h = to_sparse(gen.hamiltonian());
    const SparseOperator h_adj = h.adjoint();
    const auto& entries = basis_.entries();

    {
        // -i (H |i><j| - |i><j| H)
        SuperBuilder sb(basis_);
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const auto [i, j] = entries[k];
            const int col = static_cast<int>(k);
            for (SparseOperator::InnerIterator it(h, i); it; ++it) sb.add(static_cast<int>(it.row()), j, col, -kI * it.value());
            // (|i><j| H)_{i,m} = H_{j,m} = conj(H^dagger_{m,j})
            for (SparseOperator::InnerIterator it(h_adj, j); it; ++it)
                sb.add(i, static_cast<int>(it.row()), col, kI * std::conj(it.value()));
        }
        hamiltonian_part_ = sb.finish();
    }

    for (const auto& dis : gen.dissipators()) {
        const SparseOperator& jump = dis.jump;
        const SparseOperator jdj = SparseOperator(jump.adjoint()) * jump;  // hermitian
        SuperBuilder sb(basis_);
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const auto [i, j] = entries[k];
            const int col = static_cast<int>(k);
            // J |i><j| J^dagger = sum_{a,b} J_{a i} conj(J_{b j}) |a><b|
            for (SparseOperator::InnerIterator ia(jump, i); ia; ++ia)
                for (SparseOperator::InnerIterator ib(jump, j); ib; ++ib)
                    sb.add(static_cast<int>(ia.row()), static_cast<int>(ib.row()), col, ia.value() * std::conj(ib.value()));
            // -1/2 (K |i><j| + |i><j| K), K = J^dagger J hermitian so K_{j,m} = conj(K_{m,j})
            for (SparseOperator::InnerIterator it(jdj, i); it; ++it) sb.add(static_cast<int>(it.row()), j, col, -0.5 * it.value());
            for (SparseOperator::InnerIterator it(jdj, j); it; ++it)
                sb.add(i, static_cast<int>(it.row()), col, -0.5 * std::conj(it.value()));
        }
        dissipator_parts_.push_back(sb.finish());
    }
}

SparseComplex VectorizedGenerator::assemble(const std::vector<double>& rates) const {
    if (rates.size() != dissipator_parts_.size()) throw DomainError("assemble: one rate per dissipator required");
    SparseComplex m = hamiltonian_part_;
    for (std::size_t k = 0; k < rates.size(); ++k)
        if (rates[k] != 0) m += rates[k] * dissipator_parts_[k];
    m.makeCompressed();
    return m;
}

// ---------------------------------------------------------------------------
// Propagation

namespace {

struct Observables {
    double n_magnon, n_photon, entropy, trace_error, min_eigenvalue;
};

double min_eigenvalue_of(const OperatorMatrix& rho, const OperatorBasis& basis) {
    const FockSpace& space = basis.space();
    const OperatorMatrix h = (rho + rho.adjoint()) / 2.0;
    if (!basis.is_charge_diagonal()) {
        Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(h, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }
    // block diagonal in total excitation number
    std::map<int, std::vector<int>> blocks;
    for (int i = 0; i < space.joint_dim(); ++i) blocks[space.excitations(i)].push_back(i);
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& [n, idx] : blocks) {
        const auto m = static_cast<Eigen::Index>(idx.size());
        OperatorMatrix sub(m, m);
        for (Eigen::Index r = 0; r < m; ++r)
            for (Eigen::Index c = 0; c < m; ++c) sub(r, c) = h(idx[r], idx[c]);
        Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(sub, Eigen::EigenvaluesOnly);
        lo = std::min(lo, es.eigenvalues().minCoeff());
    }
    return lo;
}

Observables observe(const Eigen::VectorXcd& y, const OperatorBasis& basis) {
    const FockSpace& space = basis.space();
    const DensityMatrix rho = DensityMatrix::unchecked(basis.unpack(y));
    Observables o{};
    o.n_magnon = mode_population(rho, space, Mode::magnon);
    o.n_photon = mode_population(rho, space, Mode::photon);
    o.entropy = von_neumann_entropy(partial_trace(rho, space, Mode::magnon));
    o.trace_error = std::abs(rho.matrix().trace() - 1.0);
    o.min_eigenvalue = min_eigenvalue_of(rho.matrix(), basis);
    return o;
}

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

class DormandPrince {
public:
    DormandPrince(const OperatorBasis& basis, const IntegratorOptions& opts) : basis_(basis), opts_(opts) {}

    void set_generator(const SparseComplex& l) { l_ = l; }

    // Advances y from t to t_end exactly; h carries the step-size proposal across calls.
    void advance(Eigen::VectorXcd& y, double t, double t_end, double& h, TrajectoryRecord& rec) {
        k1_ = l_ * y;
        if (h <= 0) h = initial_step(y, t_end - t);
        while (t < t_end) {
            if (rec.accepted_steps + rec.rejected_steps >= opts_.max_steps)
                throw IntegrationError("propagate: step budget exhausted at t = " + std::to_string(t), t);
            const double remaining = t_end - t;
            const bool last = h >= remaining * (1 - 1e-12);
            const double step = last ? remaining : h;

            tmp_ = y + step * (a21 * k1_);
            k2_.noalias() = l_ * tmp_;
            tmp_ = y + step * (a31 * k1_ + a32 * k2_);
            k3_.noalias() = l_ * tmp_;
            tmp_ = y + step * (a41 * k1_ + a42 * k2_ + a43 * k3_);
            k4_.noalias() = l_ * tmp_;
            tmp_ = y + step * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
            k5_.noalias() = l_ * tmp_;
            tmp_ = y + step * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
            k6_.noalias() = l_ * tmp_;
            y_new_ = y + step * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
            k7_.noalias() = l_ * y_new_;
            err_ = step * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

            double acc = 0;
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                const double mag = std::sqrt(std::max(std::norm(y(i)), std::norm(y_new_(i))));
                const double sc = opts_.atol + opts_.rtol * mag;
                acc += std::norm(err_(i) / sc);
            }
            const double err = std::sqrt(acc / static_cast<double>(y.size()));

            if (err <= 1.0) {
                t = last ? t_end : t + step;
                y.swap(y_new_);
                k1_.swap(k7_);
                rec.max_hermiticity_defect = std::max(rec.max_hermiticity_defect, symmetrize(y));
                symmetrize(k1_);  // the generator commutes with the adjoint, so f(sym y) = sym f(y)
                ++rec.accepted_steps;
                check_trace(y, t);
                const double fac = err == 0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
                if (!last || step * fac > h) h = step * fac;
            } else {
                ++rec.rejected_steps;
                h = step * std::max(0.2, 0.9 * std::pow(err, -0.2));
            }
            if (!(h >= 1e-14 * std::max(std::abs(t), std::abs(t_end))) || !(h >= std::numeric_limits<double>::min()))
                throw IntegrationError("propagate: step size underflow at t = " + std::to_string(t), t);
        }
    }

private:
    double initial_step(const Eigen::VectorXcd& y, double span) const {
        double d0 = 0, d1 = 0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double sc = opts_.atol + opts_.rtol * std::abs(y(i));
            d0 += std::norm(y(i) / sc);
            d1 += std::norm(k1_(i) / sc);
        }
        const double h = (d0 < 1e-10 || d1 < 1e-10 || !std::isfinite(d0 / d1)) ? 1e-6 * span : 0.01 * std::sqrt(d0 / d1);
        return std::min(h, span);
    }

    // rho <- (rho + rho^dagger)/2 on the packed vector; returns the defect removed.
    double symmetrize(Eigen::VectorXcd& v) const {
        double defect = 0;
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            const int a = basis_.adjoint_of(static_cast<int>(k));
            if (a < k) continue;
            const Complex x = v(k), xa = v(a);
            defect = std::max(defect, std::abs(x - std::conj(xa)));
            const Complex avg = 0.5 * (x + std::conj(xa));
            v(k) = avg;
            v(a) = std::conj(avg);
        }
        return defect;
    }

    void check_trace(const Eigen::VectorXcd& y, double t) const {
        Complex tr = 0;
        for (int k : basis_.diagonal()) tr += y(k);
        const double drift = std::abs(tr - 1.0);
        if (!(drift <= opts_.max_trace_drift)) {
            std::ostringstream os;
            os << "propagate: trace drift " << drift << " exceeds " << opts_.max_trace_drift << " at t = " << t;
            throw IntegrationError(os.str(), t);
        }
    }

    const OperatorBasis& basis_;
    IntegratorOptions opts_;
    Eigen::SparseMatrix<Complex, Eigen::RowMajor> l_;
    Eigen::VectorXcd k1_, k2_, k3_, k4_, k5_, k6_, k7_, y_new_, err_, tmp_;
};

}  // namespace

TrajectoryRecord propagate(const LindbladGenerator& gen, const DensityMatrix& rho0, const std::vector<double>& t_grid,
                           const IntegratorOptions& opts) {
    if (t_grid.empty() || t_grid.front() != 0.0) throw DomainError("propagate: time grid must start at 0");
    for (std::size_t k = 1; k < t_grid.size(); ++k)
        if (!(t_grid[k] > t_grid[k - 1])) throw DomainError("propagate: time grid must increase strictly");
    if (rho0.dim() != gen.space().joint_dim()) throw DomainError("propagate: state does not match the space");
    {
        const DensityDefects d = density_defects<double>(rho0.matrix());
        if (d.hermiticity > 1e-10 || d.trace > 1e-10 || d.min_eigenvalue < -1e-8)
            throw DomainError("propagate: initial state is not a valid density matrix");
    }

    const OperatorBasis basis = solver_basis(gen, &rho0.matrix());
    const VectorizedGenerator vg(gen, basis);

    // Breakpoints: grid points plus rate switches strictly inside the grid span.
    std::vector<double> stops(t_grid.begin(), t_grid.end());
    for (double s : gen.switch_times())
        if (s > 0 && s < t_grid.back()) stops.push_back(s);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    TrajectoryRecord rec;
    auto record = [&](double t, const Eigen::VectorXcd& y) {
        const Observables o = observe(y, basis);
        rec.times.push_back(t);
        rec.n_magnon.push_back(o.n_magnon);
        rec.n_photon.push_back(o.n_photon);
        rec.entropy_magnon.push_back(o.entropy);
        rec.trace_error.push_back(o.trace_error);
        rec.min_eigenvalue.push_back(o.min_eigenvalue);
    };

    Eigen::VectorXcd y = basis.pack(rho0.matrix());
    record(0.0, y);

    DormandPrince dp(basis, opts);
    std::vector<double> current_rates;
    double h = 0;
    std::size_t next_grid = 1;
    for (std::size_t s = 1; s < stops.size(); ++s) {
        const double ta = stops[s - 1], tb = stops[s];
        const std::vector<double> rates = gen.rates_at(0.5 * (ta + tb));
        if (rates != current_rates) {
            dp.set_generator(vg.assemble(rates));
            current_rates = rates;
        }
        dp.advance(y, ta, tb, h, rec);
        if (next_grid < t_grid.size() && t_grid[next_grid] == tb) {
            record(tb, y);
            ++next_grid;
        }
    }

    OperatorMatrix final_rho = basis.unpack(y);
    final_rho = (final_rho + final_rho.adjoint()) / 2.0;
    rec.final_state = DensityMatrix::unchecked(std::move(final_rho));
    return rec;
}

// ---------------------------------------------------------------------------
// Steady state

DensityMatrix steady_state(const LindbladGenerator& gen, const SteadyStateOptions& opts) {
    if (!gen.time_independent()) throw DomainError("steady_state: generator has time-dependent rates");
    const auto rates = gen.rates_at(0.0);
    if (std::none_of(rates.begin(), rates.end(), [](double r) { return r > 0; }))
        throw DomainError("steady_state: at least one dissipation rate must be positive");

    const OperatorBasis basis = opts.full_space ? OperatorBasis::full(gen.space()) : solver_basis(gen);
    const VectorizedGenerator vg(gen, basis);
    SparseComplex l = vg.assemble(rates);

    const double scale = gen.scale();
    const int constraint_row = basis.diagonal().front();
    const Eigen::Index n = basis.size();
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
    rhs(constraint_row) = scale;

    Eigen::VectorXcd x;
    if (n <= opts.dense_limit) {
        Eigen::MatrixXcd a = Eigen::MatrixXcd(l);
        a.row(constraint_row).setZero();
        for (int k : basis.diagonal()) a(constraint_row, k) = scale;
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
        // the estimator can miss exact zero pivots, so check them directly as well
        const Eigen::VectorXd piv = lu.matrixLU().diagonal().cwiseAbs();
        const double rc = std::min(lu.rcond(), piv.minCoeff() / piv.maxCoeff());
        if (!(rc >= opts.min_rcond)) {
            std::ostringstream os;
            os << "steady_state: constrained system is singular (rcond " << rc
               << "); the steady state is not unique";
            throw NonUniqueSteadyState(os.str());
        }
        x = lu.solve(rhs);
    } else {
        // zero the constraint row, then write the trace row
        for (int c = 0; c < l.outerSize(); ++c)
            for (SparseComplex::InnerIterator it(l, c); it; ++it)
                if (it.row() == constraint_row) it.valueRef() = 0.0;
        std::vector<Triplet> trace_row;
        for (int k : basis.diagonal()) trace_row.emplace_back(constraint_row, k, scale);
        SparseComplex tr(n, n);
        tr.setFromTriplets(trace_row.begin(), trace_row.end());
        SparseComplex a = l + tr;
        a.prune(Complex(0.0));
        a.makeCompressed();
        Eigen::SparseLU<SparseComplex, Eigen::COLAMDOrdering<int>> lu;
        lu.analyzePattern(a);
        lu.factorize(a);
        if (lu.info() != Eigen::Success)
            throw NonUniqueSteadyState("steady_state: sparse factorization failed; the steady state is not unique");
        x = lu.solve(rhs);
        const double resid = (a * x - rhs).norm() / rhs.norm();
        if (!(resid < 1e-8))
            throw NonUniqueSteadyState("steady_state: residual " + std::to_string(resid) +
                                       " after sparse solve; the steady state is not unique");
    }

    OperatorMatrix rho = basis.unpack(x);
    rho = (rho + rho.adjoint()) / 2.0;
    const Complex tr = rho.trace();
    if (!(std::abs(tr - 1.0) < 1e-6)) throw SolverError("steady_state: trace constraint violated after solve");
    rho /= tr.real();
    try {
        return DensityMatrix(std::move(rho));
    } catch (const DomainError& e) {
        throw SolverError(std::string("steady_state: result failed validation: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Diagnostics

StateDiagnostics validate_state(const OperatorMatrix& rho, const FockSpace& space, double truncation_threshold) {
    if (rho.rows() != space.joint_dim() || rho.cols() != space.joint_dim())
        throw DomainError("validate_state: matrix does not match the space");
    StateDiagnostics d;
    const DensityDefects def = density_defects<double>(rho);
    d.hermiticity_defect = def.hermiticity;
    d.trace_defect = def.trace;
    d.min_eigenvalue = def.min_eigenvalue;
    for (int i = 0; i < space.joint_dim(); ++i) {
        const double p = rho(i, i).real();
        if (space.occupation(i, Mode::magnon) == space.dim_magnon() - 1) d.top_level_magnon += p;
        if (space.occupation(i, Mode::photon) == space.dim_photon() - 1) d.top_level_photon += p;
    }
    d.truncation_warning = d.top_level_magnon > truncation_threshold || d.top_level_photon > truncation_threshold;
    return d;
}

}  // namespace nmcool
