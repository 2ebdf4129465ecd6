#include <doctest.h>

#include <cmath>
#include <random>

#include "nmcool/errors.hpp"
#include "nmcool/hilbert.hpp"

using namespace nmcool;

namespace {

// Random valid density matrix A A^dagger / Tr(A A^dagger).
DensityMatrix random_state(int d, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g;
    OperatorMatrix a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = {g(rng), g(rng)};
    OperatorMatrix rho = a * a.adjoint();
    rho /= rho.trace().real();
    rho = (rho + rho.adjoint()) / 2.0;
    return DensityMatrix(rho);
}

// Mean of the truncated geometric distribution p_k ∝ r^k, k < d, by its closed form.
double truncated_geometric_mean(double n, int d) {
    const double r = n / (n + 1);
    return r / (1 - r) - d * std::pow(r, d) / (1 - std::pow(r, d));
}

}  // namespace

TEST_CASE("make_space dimensions and ordering") {
    CHECK(make_space(12, 12).joint_dim() == 144);
    CHECK(make_space(2, 2).joint_dim() == 4);
    CHECK_THROWS_AS(make_space(1, 5), DomainError);
    CHECK_THROWS_AS(make_space(5, 1), DomainError);

    const FockSpace s = make_space(3, 4);
    // magnon index varies slower
    CHECK(s.index(0, 1) == 1);
    CHECK(s.index(1, 0) == 4);
    CHECK(s.occupation(7, Mode::magnon) == 1);
    CHECK(s.occupation(7, Mode::photon) == 3);
    CHECK(s.excitations(7) == 4);
}

TEST_CASE("single-mode lowering operator") {
    const OperatorMatrix a2 = single_mode_annihilation(2);
    CHECK(std::abs(a2(0, 1) - 1.0) == 0.0);
    CHECK(std::abs(a2(0, 0)) == 0.0);
    CHECK(std::abs(a2(1, 0)) == 0.0);
    CHECK(std::abs(a2(1, 1)) == 0.0);

    const int d = 7;
    const OperatorMatrix a = single_mode_annihilation(d);
    for (int n = 1; n < d; ++n) {
        Eigen::VectorXcd ket = Eigen::VectorXcd::Zero(d);
        ket(n) = 1;
        const Eigen::VectorXcd out = a * ket;
        CHECK(std::abs(out(n - 1) - std::sqrt(double(n))) < 1e-15);
        CHECK(out.norm() == doctest::Approx(std::sqrt(double(n))));
    }
}

TEST_CASE("number operator spectrum and truncated commutator") {
    const FockSpace s = make_space(5, 3);
    for (Mode m : {Mode::magnon, Mode::photon}) {
        const OperatorMatrix a = annihilation(s, m);
        const OperatorMatrix n = creation(s, m) * a;
        Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(n);
        std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
        const int d = s.dim(m);
        const int other = s.joint_dim() / d;
        // each level 0..d-1 appears `other` times
        for (int k = 0; k < d; ++k)
            for (int r = 0; r < other; ++r) CHECK(ev[k * other + r] == doctest::Approx(k).epsilon(1e-12));
        CHECK((n - number_operator(s, m)).cwiseAbs().maxCoeff() < 1e-14);
    }

    for (int d : {2, 5, 12}) {
        const OperatorMatrix a = single_mode_annihilation(d);
        const OperatorMatrix defect = a * a.adjoint() - a.adjoint() * a - OperatorMatrix::Identity(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                const double expected = (i == d - 1 && j == d - 1) ? -double(d) : 0.0;
                CHECK(std::abs(defect(i, j) - expected) < 1e-12);
            }
    }
}

TEST_CASE("thermal states") {
    const FockSpace s = make_space(12, 12);
    const DensityMatrix vac = thermal_state(s, 0.0, 0.0);
    CHECK(std::abs(vac(0, 0) - 1.0) < 1e-15);
    CHECK(mode_population(vac, s, Mode::magnon) == 0.0);

    const DensityMatrix th = thermal_state(s, 1.0, 0.0);
    // weights ∝ (1/2)^k on the magnon ladder
    for (int k = 1; k < 12; ++k) CHECK(th(s.index(k, 0), s.index(k, 0)).real() / th(s.index(k - 1, 0), s.index(k - 1, 0)).real() ==
                                       doctest::Approx(0.5).epsilon(1e-12));
    const double n12 = mode_population(th, s, Mode::magnon);
    CHECK(n12 == doctest::Approx(truncated_geometric_mean(1.0, 12)).epsilon(1e-12));
    // 1 - 12 * 2^-12 / (1 - 2^-12)
    CHECK(n12 == doctest::Approx(0.997070).epsilon(1e-6));
    CHECK(std::abs(n12 - 1) < 0.01);

    // two-level truncation keeps weights 2/3, 1/3
    const FockSpace s2 = make_space(2, 2);
    CHECK(mode_population(thermal_state(s2, 1.0, 0.0), s2, Mode::magnon) == doctest::Approx(1.0 / 3).epsilon(1e-14));

    CHECK_THROWS_AS(thermal_state(s, -0.1, 0.0), DomainError);

    // doubling the truncation from 12: < 0.1% change up to n = 0.5, the 0.29% renormalization bias at n = 1
    for (double n : {0.25, 0.5, 1.0}) {
        const double a = mode_population(thermal_state(make_space(12, 2), n, 0.0), make_space(12, 2), Mode::magnon);
        const double b = mode_population(thermal_state(make_space(24, 2), n, 0.0), make_space(24, 2), Mode::magnon);
        CHECK(std::abs(a - b) / b < (n <= 0.5 ? 1e-3 : 3e-3));
        CHECK(a == doctest::Approx(truncated_geometric_mean(n, 12)).epsilon(1e-12));
    }

    // a valid density matrix by the checked constructor
    CHECK_NOTHROW(DensityMatrix(thermal_state(s, 1.0, 0.5).matrix()));
}

TEST_CASE("mode populations of Fock states") {
    const FockSpace s = make_space(6, 5);
    CHECK(mode_population(fock_state(s, 3, 0), s, Mode::magnon) == 3.0);
    CHECK(mode_population(fock_state(s, 3, 2), s, Mode::photon) == 2.0);
    CHECK_THROWS_AS(fock_state(s, 6, 0), DomainError);
}

TEST_CASE("partial trace") {
    const FockSpace s = make_space(3, 4);
    const FockSpace sa = make_space(3, 2), sb = make_space(2, 4);
    // factors taken from single-mode reductions of random states
    const DensityMatrix ra = partial_trace(random_state(6, 1), sa, Mode::magnon);
    const DensityMatrix rb = partial_trace(random_state(8, 2), sb, Mode::photon);
    const DensityMatrix joint = product_state(ra, rb);
    CHECK((partial_trace(joint, s, Mode::magnon).matrix() - ra.matrix()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((partial_trace(joint, s, Mode::photon).matrix() - rb.matrix()).cwiseAbs().maxCoeff() < 1e-14);

    // (|00> + |11>)/sqrt(2) reduces to the maximally mixed qubit
    const FockSpace q = make_space(2, 2);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(4);
    psi(q.index(0, 0)) = psi(q.index(1, 1)) = 1 / std::sqrt(2.0);
    const DensityMatrix bell(psi * psi.adjoint());
    const DensityMatrix red = partial_trace(bell, q, Mode::magnon);
    CHECK((red.matrix() - 0.5 * OperatorMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);

    for (unsigned seed = 10; seed < 15; ++seed) {
        const DensityMatrix r = random_state(12, seed);
        for (Mode m : {Mode::magnon, Mode::photon}) {
            const DensityMatrix p = partial_trace(r, s, m);
            CHECK(std::abs(p.matrix().trace() - 1.0) < 1e-12);
            CHECK_NOTHROW(DensityMatrix(p.matrix()));
        }
    }
}

TEST_CASE("entropies") {
    const FockSpace s = make_space(4, 4);
    CHECK(std::abs(von_neumann_entropy(fock_state(s, 2, 1))) < 1e-12);
    for (int d : {2, 5, 9}) {
        const DensityMatrix mixed(OperatorMatrix::Identity(d, d) / double(d));
        CHECK(von_neumann_entropy(mixed) == doctest::Approx(std::log(double(d))).epsilon(1e-12));
    }

    CHECK(thermal_entropy(0.0) == 0.0);
    CHECK(thermal_entropy(1.0) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-14));
    CHECK(thermal_entropy(1.0) == doctest::Approx(1.3863).epsilon(1e-4));
    CHECK_THROWS_AS(thermal_entropy(-1.0), DomainError);
    double prev = 0;
    for (double n = 0.01; n < 20; n *= 1.3) {
        const double h = thermal_entropy(n);
        CHECK(h > prev);
        prev = h;
    }

    const FockSpace big = make_space(12, 2);
    for (double n : {0.1, 0.5, 1.0}) {
        const DensityMatrix red = partial_trace(thermal_state(big, n, 0.0), big, Mode::magnon);
        CHECK(std::abs(von_neumann_entropy(red) - thermal_entropy(n)) < (n <= 0.5 ? 1e-3 : 2.5e-3));
    }
}

TEST_CASE("density matrix validation") {
    OperatorMatrix m = OperatorMatrix::Identity(3, 3);
    CHECK_THROWS_AS(DensityMatrix{m}, DomainError);  // trace 3
    m /= 3.0;
    CHECK_NOTHROW(DensityMatrix{m});
    m(0, 1) = 0.1;  // not hermitian
    CHECK_THROWS_AS(DensityMatrix{m}, DomainError);
    OperatorMatrix neg = OperatorMatrix::Zero(2, 2);
    neg(0, 0) = 1.5;
    neg(1, 1) = -0.5;
    CHECK_THROWS_AS(DensityMatrix{neg}, DomainError);
}

TEST_CASE("scalar templating") {
    const FockSpace s = make_space(12, 3);
    const auto rho = thermal_state<long double>(s, 1.0L, 0.0L);
    CHECK(double(mode_population(rho, s, Mode::magnon)) == doctest::Approx(truncated_geometric_mean(1.0, 12)).epsilon(1e-14));
    const auto red = partial_trace(rho, s, Mode::magnon);
    CHECK(std::abs(double(von_neumann_entropy(red)) - thermal_entropy(1.0)) < 2.5e-3);
}
