#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "qlimits/hilbert.hpp"
#include "qlimits/random.hpp"

using namespace qlimits;

namespace {

HermitianOperator random_hermitian(Index dim, std::uint64_t seed, double scale = 1.0) {
    Rng rng = make_rng(seed, Stream::probe);
    return sample_gue(dim, scale, rng);
}

ComplexMatrix pauli_x() {
    ComplexMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

}  // namespace

TEST(HermitianOperator, RejectsNonHermitian) {
    ComplexMatrix m(2, 2);
    m << 0, 1, 0, 0;
    EXPECT_THROW(HermitianOperator{m}, HermiticityError);
}

TEST(HermitianOperator, SymmetrizesWithinTolerance) {
    ComplexMatrix m = pauli_x();
    m(0, 1) += 1e-13;
    const HermitianOperator h(m);
    EXPECT_EQ(h.matrix()(0, 1), h.matrix()(1, 0));
    EXPECT_NEAR(h.matrix()(0, 1).real(), 1.0 + 0.5e-13, 1e-16);
}

TEST(HermitianOperator, RejectsNonSquareAndNonFinite) {
    EXPECT_THROW(HermitianOperator{ComplexMatrix::Zero(2, 3)}, DimensionError);
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(HermitianOperator{m}, InputError);
}

TEST(StateVector, ZeroVectorRejected) {
    EXPECT_THROW(StateVector{ComplexVector::Zero(3)}, InputError);
}

TEST(StateVector, NormalizedFlag) {
    ComplexVector v(2);
    v << 3.0, Complex(0.0, 4.0);
    const StateVector psi(v);
    EXPECT_FALSE(psi.is_normalized());
    EXPECT_TRUE(psi.normalized().is_normalized());
    EXPECT_NEAR(psi.normalized().norm(), 1.0, 1e-15);
}

TEST(SpectralDecompose, DiagonalSortsAscending) {
    RealVector diag(3);
    diag << 3, 1, 2;
    const auto dec = spectral_decompose(HermitianOperator::diagonal(diag));
    EXPECT_DOUBLE_EQ(dec.eigenvalues()(0), 1.0);
    EXPECT_DOUBLE_EQ(dec.eigenvalues()(1), 2.0);
    EXPECT_DOUBLE_EQ(dec.eigenvalues()(2), 3.0);
    // eigenvectors are a permutation of the basis (up to phase)
    const RealMatrix mags = dec.eigenvectors().cwiseAbs();
    EXPECT_NEAR(mags(1, 0), 1.0, 1e-15);
    EXPECT_NEAR(mags(2, 1), 1.0, 1e-15);
    EXPECT_NEAR(mags(0, 2), 1.0, 1e-15);
}

TEST(SpectralDecompose, PauliX) {
    const auto dec = spectral_decompose(HermitianOperator(pauli_x()));
    EXPECT_NEAR(dec.eigenvalues()(0), -1.0, 1e-15);
    EXPECT_NEAR(dec.eigenvalues()(1), 1.0, 1e-15);
}

TEST(SpectralDecompose, MatchesBisectionOracle) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const HermitianOperator h = random_hermitian(8, seed);
        const auto dec = spectral_decompose(h);
        const auto expected = oracle::bisection_eigenvalues(h.matrix());
        for (Index k = 0; k < 8; ++k) {
            EXPECT_NEAR(dec.eigenvalues()(k), expected[static_cast<std::size_t>(k)], 1e-8);
            const ComplexVector v = dec.eigenvectors().col(k);
            EXPECT_LT((h.matrix() * v - dec.eigenvalues()(k) * v).norm(), 1e-8);
        }
        EXPECT_LT((dec.reconstruct() - h.matrix()).norm(), 1e-10 * h.matrix().norm());
        EXPECT_LT((dec.eigenvectors().adjoint() * dec.eigenvectors() - ComplexMatrix::Identity(8, 8)).norm(), 1e-10);
    }
}

TEST(OperatorNorm, Identity) { EXPECT_NEAR(operator_norm(ComplexMatrix::Identity(4, 4)), 1.0, 1e-15); }

TEST(OperatorNorm, Diagonal) {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = -3.0;
    EXPECT_NEAR(operator_norm(m), 3.0, 1e-15);
}

TEST(OperatorNorm, DominatesSampledQuadraticForm) {
    Rng rng = make_rng(7, Stream::probe);
    ComplexMatrix b(8, 8);
    for (Index j = 0; j < 8; ++j)
        for (Index i = 0; i < 8; ++i) b(i, j) = complex_gaussian(rng);
    const double norm = operator_norm(b);
    std::mt19937_64 sampler(12345);
    const double sampled = oracle::sampled_quadratic_sup(b, 100000, sampler);
    // |<psi|B|psi>| never exceeds the spectral norm
    EXPECT_LE(sampled, norm + 1e-12);
    EXPECT_GT(sampled, 0.0);
}

TEST(OperatorNorm, HermitianMatchesMonteCarloSup) {
    for (std::uint64_t seed = 11; seed <= 13; ++seed) {
        const HermitianOperator h = random_hermitian(8, seed);
        std::mt19937_64 sampler(seed * 7919);
        const double sampled = oracle::refined_quadratic_sup(h.matrix(), 50000, 20000, sampler);
        const double norm = operator_norm(h.matrix());
        EXPECT_LE(sampled, norm + 1e-12);
        EXPECT_GE(sampled, norm - 1e-2);
    }
}

TEST(OperatorNorm, RejectsNonFinite) {
    ComplexMatrix m = ComplexMatrix::Identity(2, 2);
    m(1, 0) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(operator_norm(m), InputError);
}

TEST(Evolve, ZeroHamiltonianIsIdentity) {
    const ComplexMatrix u = evolve(HermitianOperator::zero(5), 3.7);
    EXPECT_LT((u - ComplexMatrix::Identity(5, 5)).norm(), 1e-15);
}

TEST(Evolve, DiagonalPhases) {
    RealVector e(3);
    e << -1.0, 0.5, 2.0;
    const double t = 0.9;
    const ComplexMatrix u = evolve(HermitianOperator::diagonal(e), t);
    for (Index k = 0; k < 3; ++k) EXPECT_LT(std::abs(u(k, k) - std::polar(1.0, e(k) * t)), 1e-15);
    const ComplexMatrix back = evolve(HermitianOperator::diagonal(e), t, PhaseSign::negative);
    EXPECT_LT(std::abs(back(2, 2) - std::polar(1.0, -e(2) * t)), 1e-15);
}

TEST(Evolve, MatchesTaylorOracle) {
    const HermitianOperator h(pauli_x());
    const ComplexMatrix u = evolve(h, 0.7);
    const ComplexMatrix expected = oracle::taylor_expm(h.matrix(), Complex(0.0, 0.7));
    EXPECT_LT(detail::max_abs_entry(u - expected), 1e-12);
    // closed form: cos t I + i sin t X
    EXPECT_NEAR(u(0, 0).real(), std::cos(0.7), 1e-15);
    EXPECT_NEAR(u(0, 1).imag(), std::sin(0.7), 1e-15);
}

TEST(Evolve, RandomMatchesTaylorOracle) {
    const HermitianOperator h = random_hermitian(12, 3);
    for (double t : {-2.0, 0.3, 5.0}) {
        const ComplexMatrix u = evolve(h, t);
        EXPECT_LT(detail::max_abs_entry(u - oracle::taylor_expm(h.matrix(), Complex(0.0, t))), 1e-10);
    }
}

TEST(EvolveProperties, UnitarityGroupLawSmoothness) {
    const double delta = 1e-3;
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const Index dim = 2 + static_cast<Index>((seed * 37) % 60);
        const HermitianOperator h = random_hermitian(dim, seed, 0.5 + 0.1 * static_cast<double>(seed));
        const auto dec = spectral_decompose(h);
        const double t1 = -10.0 + 1.6 * static_cast<double>(seed);
        const double t2 = 0.37 * static_cast<double>(seed);
        const ComplexMatrix u1 = evolve(dec, t1);
        EXPECT_LE(unitarity_defect(u1), 1e-10) << "seed " << seed;
        EXPECT_LE(operator_norm(evolve(dec, t1 + t2) - u1 * evolve(dec, t2)), 1e-9) << "seed " << seed;
        const double hn = operator_norm(h.matrix());
        EXPECT_LE(operator_norm(evolve(dec, t1 + delta) - u1), delta * hn + delta * delta * hn * hn)
            << "seed " << seed;
    }
}

TEST(Heisenberg, CommutingIsStationary) {
    RealVector e(3), a(3);
    e << 0.1, 0.7, 1.3;
    a << 2.0, -1.0, 0.5;
    const auto h = HermitianOperator::diagonal(e, OperatorRole::hamiltonian);
    const auto a0 = HermitianOperator::diagonal(a);
    for (double t : {0.0, 1.0, 17.5})
        EXPECT_LT(detail::max_abs_entry(heisenberg_observable(a0, h, t).matrix() - a0.matrix()), 1e-14);
}

TEST(Heisenberg, TimeZero) {
    const auto h = random_hermitian(6, 1);
    const auto a0 = random_hermitian(6, 2);
    EXPECT_LT(detail::max_abs_entry(heisenberg_observable(a0, h, 0.0).matrix() - a0.matrix()), 1e-13);
}

TEST(Heisenberg, TwoLevelPhaseRotation) {
    RealVector e(2);
    e << 0.0, 1.0;
    const auto h = HermitianOperator::diagonal(e, OperatorRole::hamiltonian);
    const HermitianOperator a0(pauli_x());
    const double t = 0.8;
    const ComplexMatrix at = heisenberg_observable(a0, h, t).matrix();
    const ComplexMatrix u = oracle::taylor_expm(h.matrix(), Complex(0.0, t));
    const ComplexMatrix direct = u.adjoint() * a0.matrix() * u;
    EXPECT_LT(detail::max_abs_entry(at - direct), 1e-12);
    // A(t)_01 = e^{-i 0 t} * 1 * e^{i 1 t} = e^{it}; A(t)_10 = e^{-it}
    EXPECT_LT(std::abs(at(0, 1) - std::polar(1.0, t)), 1e-12);
    EXPECT_LT(std::abs(at(1, 0) - std::polar(1.0, -t)), 1e-12);
}

TEST(Heisenberg, IsospectralAndHermitian) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto h = random_hermitian(16, seed);
        const auto a0 = random_hermitian(16, seed + 100);
        const auto at = heisenberg_observable(a0, h, 2.5 * static_cast<double>(seed));
        EXPECT_LE(detail::hermitian_deviation(at.matrix()), 1e-10);
        const auto ev0 = spectral_decompose(a0).eigenvalues();
        const auto evt = spectral_decompose(at).eigenvalues();
        EXPECT_LT((ev0 - evt).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Heisenberg, DimensionMismatch) {
    EXPECT_THROW(heisenberg_observable(random_hermitian(3, 1), random_hermitian(4, 1), 1.0), DimensionError);
}

TEST(Expectation, BasisVectorPicksDiagonal) {
    RealVector a(4);
    a << 1.5, -2.0, 0.25, 7.0;
    const auto op = HermitianOperator::diagonal(a);
    for (Index k = 0; k < 4; ++k)
        EXPECT_NEAR(expectation(StateVector::basis(4, k), op.matrix()).real(), a(k), 1e-15);
}

TEST(Expectation, ScaleInvariant) {
    Rng rng = make_rng(3, Stream::state);
    const StateVector psi(complex_gaussian_vector(6, rng));
    const auto a = random_hermitian(6, 4);
    const Complex base = expectation(psi, a.matrix());
    const StateVector scaled(psi.amplitudes() * Complex(-2.5, 0.75));
    EXPECT_LT(std::abs(expectation(scaled, a.matrix()) - base), 1e-13);
}

TEST(Expectation, MatchesDoubleSum) {
    Rng rng = make_rng(5, Stream::state);
    const StateVector psi(complex_gaussian_vector(6, rng));
    const auto a = random_hermitian(6, 6);
    const Complex got = expectation(psi, a.matrix());
    const Complex expected = oracle::double_sum_expectation(psi.amplitudes(), a.matrix());
    EXPECT_LT(std::abs(got - expected), 1e-12);
    EXPECT_LT(std::abs(got.imag()), 1e-12);
}

TEST(Expectation, DimensionMismatch) {
    EXPECT_THROW(expectation(StateVector::basis(3, 0), ComplexMatrix::Identity(4, 4)), DimensionError);
}

TEST(TimeGrid, UniformIncludesEndpoints) {
    const auto g = TimeGrid::uniform(2.0, 5);
    ASSERT_EQ(g.size(), 5u);
    EXPECT_EQ(g[0], 0.0);
    EXPECT_EQ(g[4], 2.0);
    for (std::size_t k = 1; k < g.size(); ++k) EXPECT_GT(g[k], g[k - 1]);
    EXPECT_THROW(TimeGrid::uniform(1.0, 1), RangeError);
    EXPECT_THROW(TimeGrid::uniform(0.0, 5), RangeError);
}

TEST(TimeGrid, RefinedKeepsOriginalPoints) {
    const auto g = TimeGrid::uniform(1.0, 11);
    const auto fine = g.refined(10);
    EXPECT_EQ(fine.size(), 101u);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(fine[10 * k], g[k], 1e-15);
    EXPECT_THROW(TimeGrid::from_points({0.0, 0.0}), RangeError);
    EXPECT_EQ(TimeGrid::from_points({0.0}).size(), 1u);
}
