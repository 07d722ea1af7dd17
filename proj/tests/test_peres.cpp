#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "qlimits/peres.hpp"

using namespace qlimits;

namespace {

StateVector seeded_state(Index dim, std::uint64_t seed) {
    Rng rng = make_rng(seed, Stream::state);
    return random_state(dim, rng);
}

// Echo on a uniform grid by repeated application of Taylor one-step propagators.
std::vector<double> stepped_echo(const ComplexMatrix& h, const ComplexMatrix& dh, const ComplexVector& psi0,
                                 const TimeGrid& grid) {
    const double dt = grid[1] - grid[0];
    const ComplexMatrix step_nominal = oracle::taylor_expm(h, Complex(0.0, dt), 30);
    const ComplexMatrix step_perturbed = oracle::taylor_expm(h + dh, Complex(0.0, dt), 30);
    ComplexVector a = psi0, b = psi0;
    std::vector<double> out;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (k > 0) {
            a = step_nominal * a;
            b = step_perturbed * b;
        }
        out.push_back(std::norm(a.dot(b)));
    }
    return out;
}

}  // namespace

TEST(SampleGue, ZeroScaleAndDeterminism) {
    EXPECT_EQ(detail::max_abs_entry(sample_gue(5, 0.0, 1).matrix()), 0.0);
    EXPECT_EQ(sample_gue(12, 1.0, 42).matrix(), sample_gue(12, 1.0, 42).matrix());
    EXPECT_NE(sample_gue(12, 1.0, 42).matrix(), sample_gue(12, 1.0, 43).matrix());
    const auto h = sample_gue(7, 2.0, 9);
    for (Index k = 0; k < 7; ++k) EXPECT_EQ(h.matrix()(k, k).imag(), 0.0);
    EXPECT_EQ(detail::hermitian_deviation(h.matrix()), 0.0);
}

TEST(SampleGue, SpacingRatioMatchesGue) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const RealVector ev = spectral_decompose(sample_gue(64, 1.0, seed)).eigenvalues();
        for (Index k = 1; k + 1 < ev.size(); ++k) {
            const double s0 = ev(k) - ev(k - 1), s1 = ev(k + 1) - ev(k);
            total += std::min(s0, s1) / std::max(s0, s1);
            ++count;
        }
    }
    const double mean = total / static_cast<double>(count);
    EXPECT_NEAR(mean, 0.60, 0.05);
    // Poisson statistics would give 2 ln 2 - 1 = 0.386
    EXPECT_GT(mean, 0.5);
}

TEST(EchoExperiment, UnperturbedIsExactReversal) {
    const auto h = sample_gue(16, 1.0, 1);
    const auto c = echo_experiment(h, HermitianOperator::zero(16), seeded_state(16, 1), TimeGrid::uniform(20.0, 51));
    for (double e : c.mean) EXPECT_NEAR(e, 1.0, 1e-10);
}

TEST(EchoExperiment, TimeZeroIsOne) {
    const auto c = echo_experiment(sample_gue(8, 1.0, 2), sample_gue(8, 0.3, 3), seeded_state(8, 2),
                                   TimeGrid::uniform(1.0, 3));
    EXPECT_EQ(c.mean.front(), 1.0);
    EXPECT_EQ(c.members.front().front(), 1.0);
}

TEST(EchoExperiment, CommutingPhaseOnlyPerturbation) {
    RealVector e(6), de(6);
    e << -1.0, 0.2, 0.5, 1.1, 2.0, 3.3;
    de << 0.4, -0.3, 0.9, 0.1, 0.0, 0.7;
    const auto c = echo_experiment(HermitianOperator::diagonal(e), HermitianOperator::diagonal(de),
                                   StateVector::basis(6, 2), TimeGrid::uniform(30.0, 61));
    for (double v : c.mean) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(EchoExperiment, OrderingsAgreeForThisObservable) {
    // |<a|b>|^2 = |<b|a>|^2, so both orderings give the same echo
    const auto h = sample_gue(10, 1.0, 4);
    const auto dh = sample_gue(10, 0.2, 5);
    const auto psi = seeded_state(10, 4);
    const auto grid = TimeGrid::uniform(5.0, 21);
    const auto a = echo_experiment(h, dh, psi, grid, EchoOrdering::forward_perturbed);
    const auto b = echo_experiment(h, dh, psi, grid, EchoOrdering::forward_nominal);
    for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_NEAR(a.mean[k], b.mean[k], 1e-12);
}

TEST(EchoExperiment, RejectsBadInput) {
    ComplexVector v(3);
    v << 1.0, 1.0, 0.0;
    EXPECT_THROW(echo_experiment(HermitianOperator::zero(3), HermitianOperator::zero(3), StateVector(v),
                                 TimeGrid::uniform(1.0, 3)),
                 InputError);
    EXPECT_THROW(echo_experiment(HermitianOperator::zero(3), HermitianOperator::zero(4), StateVector::basis(3, 0),
                                 TimeGrid::uniform(1.0, 3)),
                 DimensionError);
}

TEST(EnsembleEcho, ZeroDeltaIsOne) {
    EnsembleSpec spec;
    spec.dim = 16;
    spec.members = 5;
    spec.delta = 0.0;
    const auto c = ensemble_echo(spec, seeded_state(16, 6), TimeGrid::uniform(10.0, 21));
    for (double v : c.mean) EXPECT_NEAR(v, 1.0, 1e-10);
    for (double v : c.stddev) EXPECT_NEAR(v, 0.0, 1e-10);
}

TEST(EnsembleEcho, SingleMemberEqualsExperiment) {
    EnsembleSpec spec;
    spec.dim = 12;
    spec.members = 1;
    spec.delta = 0.5;
    spec.seed = 7;
    const auto psi = seeded_state(12, 7);
    const auto grid = TimeGrid::uniform(4.0, 17);
    const auto ens = ensemble_echo(spec, psi, grid);
    const auto single = echo_experiment(ensemble_base(spec), ensemble_perturbation(spec, 0), psi, grid);
    EXPECT_EQ(ens.mean, single.mean);
    EXPECT_EQ(ens.stddev, std::vector<double>(grid.size(), 0.0));
}

TEST(EnsembleEcho, PerturbationNormIsDelta) {
    EnsembleSpec spec;
    spec.dim = 20;
    spec.delta = 0.37;
    for (std::size_t m = 0; m < 5; ++m)
        EXPECT_NEAR(operator_norm(ensemble_perturbation(spec, m).matrix()), 0.37, 1e-12);
}

TEST(EnsembleEcho, DecaysAndMatchesSteppedReimplementation) {
    EnsembleSpec spec;
    spec.dim = 64;
    spec.members = 50;
    spec.seed = 3;
    const auto h = ensemble_base(spec);
    spec.delta = 0.1 * operator_norm(h.matrix());
    const auto psi = seeded_state(64, 3);
    const auto grid = TimeGrid::uniform(5.0, 101);
    const auto curve = ensemble_echo(spec, psi, grid);
    EXPECT_LT(curve.mean.back(), 0.9 * curve.mean.front());

    std::vector<double> mean(grid.size(), 0.0);
    for (std::size_t m = 0; m < spec.members; ++m) {
        const auto member =
            stepped_echo(h.matrix(), ensemble_perturbation(spec, m).matrix(), psi.amplitudes(), grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            EXPECT_NEAR(curve.members[m][k], member[k], 1e-9) << "member " << m << " k " << k;
            mean[k] += member[k] / static_cast<double>(spec.members);
        }
    }
    for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_NEAR(curve.mean[k], mean[k], 1e-9);
}

TEST(EnsembleEcho, BoundsAndSummaryConsistency) {
    EnsembleSpec spec;
    spec.dim = 24;
    spec.members = 12;
    spec.delta = 1.0;
    spec.seed = 11;
    const auto c = ensemble_echo(spec, seeded_state(24, 11), TimeGrid::uniform(8.0, 41));
    EXPECT_EQ(c.mean.front(), 1.0);
    for (std::size_t k = 0; k < c.times.size(); ++k) {
        EXPECT_GE(c.min[k], 0.0);
        EXPECT_LE(c.max[k], 1.0 + 1e-10);
        EXPECT_LE(c.min[k], c.mean[k] + 1e-15);
        EXPECT_GE(c.max[k], c.mean[k] - 1e-15);
    }
}

TEST(EnsembleEcho, DeltaLadderNonIncreasing) {
    EnsembleSpec spec;
    spec.dim = 64;
    spec.members = 50;
    spec.seed = 5;
    const double hn = operator_norm(ensemble_base(spec).matrix());
    const auto psi = seeded_state(64, 5);
    const auto grid = TimeGrid::uniform(5.0, 51);
    double previous = 2.0;
    for (double frac : {0.0, 0.05, 0.1, 0.2, 0.4}) {
        spec.delta = frac * hn;
        const double avg = time_averaged_echo(ensemble_echo(spec, psi, grid));
        EXPECT_LE(avg, previous) << "delta fraction " << frac;
        previous = avg;
    }
}

TEST(EnsembleEcho, WorkerCountDoesNotChangeBits) {
    EnsembleSpec spec;
    spec.dim = 32;
    spec.members = 9;
    spec.delta = 0.8;
    spec.seed = 12;
    const auto psi = seeded_state(32, 12);
    const auto grid = TimeGrid::uniform(6.0, 31);
    const auto one = ensemble_echo(spec, psi, grid, 1);
    for (unsigned w : {2u, 8u}) {
        const auto many = ensemble_echo(spec, psi, grid, w);
        EXPECT_EQ(one.members, many.members);
        EXPECT_EQ(one.mean, many.mean);
        EXPECT_EQ(one.stddev, many.stddev);
    }
}

TEST(EnsembleSpec, Validation) {
    EnsembleSpec spec;
    spec.members = 0;
    EXPECT_THROW(spec.validate(), RangeError);
    spec.members = 1;
    spec.delta = -1.0;
    EXPECT_THROW(spec.validate(), RangeError);
}
