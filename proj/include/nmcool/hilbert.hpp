#pragma once

// Truncated two-mode bosonic algebra: magnon mode a0 and cavity mode b_h.
//
// Joint basis ordering is magnon-major: |n_a, n_b> has joint index
// n_a * dim_photon + n_b. Every partial trace and embedding below assumes it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "nmcool/errors.hpp"

namespace nmcool {

enum class Mode { magnon, photon };

inline const char* to_string(Mode m) { return m == Mode::magnon ? "magnon" : "photon"; }

class FockSpace {
public:
    FockSpace(int dim_magnon, int dim_photon) : dim_magnon_(dim_magnon), dim_photon_(dim_photon) {
        if (dim_magnon < 2 || dim_photon < 2)
            throw DomainError("FockSpace: both truncations must be >= 2 (got " +
                              std::to_string(dim_magnon) + ", " + std::to_string(dim_photon) + ")");
    }

    int dim_magnon() const noexcept { return dim_magnon_; }
    int dim_photon() const noexcept { return dim_photon_; }
    int dim(Mode m) const noexcept { return m == Mode::magnon ? dim_magnon_ : dim_photon_; }
    int joint_dim() const noexcept { return dim_magnon_ * dim_photon_; }

    int index(int n_magnon, int n_photon) const noexcept { return n_magnon * dim_photon_ + n_photon; }
    int occupation(int joint, Mode m) const noexcept {
        return m == Mode::magnon ? joint / dim_photon_ : joint % dim_photon_;
    }
    /// Total excitation number n_a + n_b of a joint basis state.
    int excitations(int joint) const noexcept { return joint / dim_photon_ + joint % dim_photon_; }

    friend bool operator==(const FockSpace&, const FockSpace&) = default;

private:
    int dim_magnon_;
    int dim_photon_;
};

inline FockSpace make_space(int dim_magnon, int dim_photon) { return FockSpace(dim_magnon, dim_photon); }

template <typename Real>
using ComplexMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using RealVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using OperatorMatrix = ComplexMatrix<double>;

template <typename Real>
ComplexMatrix<Real> kron(const ComplexMatrix<Real>& a, const ComplexMatrix<Real>& b) {
    ComplexMatrix<Real> out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Lowering operator on a single truncated mode: entry (n-1, n) = sqrt(n).
template <typename Real = double>
ComplexMatrix<Real> single_mode_annihilation(int dim) {
    ComplexMatrix<Real> a = ComplexMatrix<Real>::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<Real>(n));
    return a;
}

/// Lifts a single-mode operator into the joint space (identity on the other mode).
template <typename Real = double>
ComplexMatrix<Real> embed(const FockSpace& space, Mode mode, const ComplexMatrix<Real>& local) {
    const int other = space.dim(mode == Mode::magnon ? Mode::photon : Mode::magnon);
    const ComplexMatrix<Real> id = ComplexMatrix<Real>::Identity(other, other);
    return mode == Mode::magnon ? kron<Real>(local, id) : kron<Real>(id, local);
}

template <typename Real = double>
ComplexMatrix<Real> annihilation(const FockSpace& space, Mode mode) {
    return embed<Real>(space, mode, single_mode_annihilation<Real>(space.dim(mode)));
}

template <typename Real = double>
ComplexMatrix<Real> creation(const FockSpace& space, Mode mode) {
    return annihilation<Real>(space, mode).adjoint();
}

template <typename Real = double>
ComplexMatrix<Real> number_operator(const FockSpace& space, Mode mode) {
    ComplexMatrix<Real> n = ComplexMatrix<Real>::Zero(space.joint_dim(), space.joint_dim());
    for (int i = 0; i < space.joint_dim(); ++i) n(i, i) = static_cast<Real>(space.occupation(i, mode));
    return n;
}

/// Bose-Einstein populations p_k ∝ (n/(n+1))^k on `dim` levels, renormalized
/// after truncation (so the mean falls short of n when dim is small).
template <typename Real = double>
RealVector<Real> thermal_weights(int dim, Real n) {
    if (!(n >= 0)) throw DomainError("thermal occupation must be >= 0");
    RealVector<Real> w = RealVector<Real>::Zero(dim);
    if (n == 0) {
        w(0) = 1;
        return w;
    }
    const Real ratio = n / (n + 1);
    Real p = 1;
    for (int k = 0; k < dim; ++k, p *= ratio) w(k) = p;
    return w / w.sum();
}

struct DensityDefects {
    double hermiticity = 0;    // max |rho - rho^dagger| entry
    double trace = 0;          // |Tr rho - 1|
    double min_eigenvalue = 0;
};

template <typename Real>
DensityDefects density_defects(const ComplexMatrix<Real>& m) {
    DensityDefects d;
    d.hermiticity = static_cast<double>((m - m.adjoint()).cwiseAbs().maxCoeff());
    d.trace = static_cast<double>(std::abs(m.trace() - std::complex<Real>(1)));
    const ComplexMatrix<Real> h = (m + m.adjoint()) / Real(2);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix<Real>> es(h, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = static_cast<double>(es.eigenvalues().minCoeff());
    return d;
}

struct DensityTolerances {
    double hermiticity = 1e-10;
    double trace = 1e-10;
    double min_eigenvalue = -1e-8;
};

/// Hermitian, unit-trace, positive semidefinite matrix. The checked
/// constructor throws DomainError naming the first violated invariant.
template <typename Real = double>
class BasicDensityMatrix {
public:
    using Matrix = ComplexMatrix<Real>;

    explicit BasicDensityMatrix(Matrix m, const DensityTolerances& tol = {}) : m_(std::move(m)) {
        if (m_.rows() != m_.cols() || m_.rows() == 0) throw DomainError("density matrix must be square and non-empty");
        const DensityDefects d = density_defects<Real>(m_);
        if (d.hermiticity > tol.hermiticity)
            throw DomainError("density matrix not hermitian (defect " + std::to_string(d.hermiticity) + ")");
        if (d.trace > tol.trace) throw DomainError("density matrix trace defect " + std::to_string(d.trace));
        if (d.min_eigenvalue < tol.min_eigenvalue)
            throw DomainError("density matrix not positive (min eigenvalue " + std::to_string(d.min_eigenvalue) + ")");
    }

    static BasicDensityMatrix unchecked(Matrix m) { return BasicDensityMatrix(std::move(m), Unchecked{}); }

    const Matrix& matrix() const noexcept { return m_; }
    Eigen::Index dim() const noexcept { return m_.rows(); }
    std::complex<Real> operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
    struct Unchecked {};
    BasicDensityMatrix(Matrix m, Unchecked) : m_(std::move(m)) {}
    Matrix m_;
};

using DensityMatrix = BasicDensityMatrix<double>;

template <typename Real = double>
BasicDensityMatrix<Real> thermal_state(const FockSpace& space, Real n_magnon, Real n_photon) {
    if (n_magnon < 0 || n_photon < 0) throw DomainError("thermal_state: occupations must be >= 0");
    const RealVector<Real> wa = thermal_weights<Real>(space.dim_magnon(), n_magnon);
    const RealVector<Real> wb = thermal_weights<Real>(space.dim_photon(), n_photon);
    ComplexMatrix<Real> rho = ComplexMatrix<Real>::Zero(space.joint_dim(), space.joint_dim());
    for (int na = 0; na < space.dim_magnon(); ++na)
        for (int nb = 0; nb < space.dim_photon(); ++nb) {
            const int i = space.index(na, nb);
            rho(i, i) = wa(na) * wb(nb);
        }
    return BasicDensityMatrix<Real>::unchecked(std::move(rho));
}

template <typename Real = double>
BasicDensityMatrix<Real> fock_state(const FockSpace& space, int n_magnon, int n_photon) {
    if (n_magnon < 0 || n_magnon >= space.dim_magnon() || n_photon < 0 || n_photon >= space.dim_photon())
        throw DomainError("fock_state: level outside truncation");
    ComplexMatrix<Real> rho = ComplexMatrix<Real>::Zero(space.joint_dim(), space.joint_dim());
    const int i = space.index(n_magnon, n_photon);
    rho(i, i) = 1;
    return BasicDensityMatrix<Real>::unchecked(std::move(rho));
}

/// Joint state rho_magnon ⊗ rho_photon.
template <typename Real = double>
BasicDensityMatrix<Real> product_state(const BasicDensityMatrix<Real>& magnon, const BasicDensityMatrix<Real>& photon) {
    return BasicDensityMatrix<Real>::unchecked(kron<Real>(magnon.matrix(), photon.matrix()));
}

/// Tr(rho a^dagger a) for the named mode.
template <typename Real = double>
Real mode_population(const BasicDensityMatrix<Real>& rho, const FockSpace& space, Mode mode) {
    Real n = 0;
    for (int i = 0; i < space.joint_dim(); ++i) n += rho(i, i).real() * static_cast<Real>(space.occupation(i, mode));
    return n;
}

/// Reduced state of the kept mode.
template <typename Real = double>
BasicDensityMatrix<Real> partial_trace(const BasicDensityMatrix<Real>& rho, const FockSpace& space, Mode keep) {
    const Mode traced = keep == Mode::magnon ? Mode::photon : Mode::magnon;
    const int dk = space.dim(keep), dt = space.dim(traced);
    ComplexMatrix<Real> out = ComplexMatrix<Real>::Zero(dk, dk);
    auto joint = [&](int kept, int other) {
        return keep == Mode::magnon ? space.index(kept, other) : space.index(other, kept);
    };
    for (int r = 0; r < dk; ++r)
        for (int c = 0; c < dk; ++c) {
            std::complex<Real> s = 0;
            for (int t = 0; t < dt; ++t) s += rho(joint(r, t), joint(c, t));
            out(r, c) = s;
        }
    return BasicDensityMatrix<Real>::unchecked(std::move(out));
}

/// -sum lambda ln lambda in nats; eigenvalues below 1e-14 count as zero.
template <typename Real = double>
Real von_neumann_entropy(const BasicDensityMatrix<Real>& rho) {
    const ComplexMatrix<Real> h = (rho.matrix() + rho.matrix().adjoint()) / Real(2);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix<Real>> es(h, Eigen::EigenvaluesOnly);
    Real s = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const Real l = es.eigenvalues()(i);
        if (l > Real(1e-14)) s -= l * std::log(l);
    }
    return s;
}

/// Entropy of an untruncated Bose-Einstein state with mean occupation n.
template <typename Real = double>
Real thermal_entropy(Real n) {
    if (n < 0) throw DomainError("thermal_entropy: n must be >= 0");
    if (n == 0) return 0;
    return (n + 1) * std::log1p(n) - n * std::log(n);
}

}  // namespace nmcool
