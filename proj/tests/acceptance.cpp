// Acceptance run: one PASS/FAIL line per criterion at the contract tolerances.
// Exit status is nonzero when any criterion fails.

#include <Eigen/LU>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "qlimits/cli/io.hpp"
#include "qlimits/fidelity.hpp"
#include "qlimits/peres.hpp"
#include "qlimits/truncation.hpp"

using namespace qlimits;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

std::string num(double x) {
    std::ostringstream os;
    os.precision(3);
    os << x;
    return os.str();
}

CompositeModel random_model(Index dim, Index n, std::uint64_t seed) {
    CompositeModelSpec spec;
    spec.dim = dim;
    spec.apparatus_states = n;
    return sample_composite_model(spec, seed);
}

MeasurementDevice seeded_device(Index channels, Index dim, std::uint64_t seed) {
    Rng rng = make_rng(seed, Stream::device);
    return random_device(channels, dim, rng);
}

StateVector seeded_state(Index dim, std::uint64_t seed) {
    Rng rng = make_rng(seed, Stream::state);
    return random_state(dim, rng);
}

// ---------------------------------------------------------------- 1
Verdict unitarity_and_smoothness() {
    const double delta = 1e-3;
    double worst_defect = 0.0, worst_ratio = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const HermitianOperator h = sample_gue(128, 1.0, seed);
        const SpectralDecomposition dec = spectral_decompose(h);
        const double hn = operator_norm(h.matrix());
        const double t = 0.2 * static_cast<double>(seed);
        const ComplexMatrix u = evolve(dec, t);
        worst_defect = std::max(worst_defect, unitarity_defect(u));
        const double step = operator_norm(evolve(dec, t + delta) - u);
        worst_ratio = std::max(worst_ratio, step / (delta * hn + delta * delta * hn * hn));
    }
    return {worst_defect <= 1e-10 && worst_ratio <= 1.0,
            "max ||U^dag U - I|| = " + num(worst_defect) + ", max step / bound = " + num(worst_ratio)};
}

// ---------------------------------------------------------------- 2
Verdict minimal_rank() {
    const Index dim = 256;
    const double eps = 1e-3;
    const TimeGrid grid = TimeGrid::uniform(2.0, 101);
    bool ok = true;
    double worst_full = 0.0, worst_at_rank = 0.0;
    Index smallest = dim, largest = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const HermitianOperator h = sample_gue(dim, 1.0, seed);
        Rng a_rng = make_rng(seed, Stream::observable);
        const HermitianOperator a0 = sample_gue(dim, 1.0, a_rng, OperatorRole::observable);
        const SpectralDecomposition dec = spectral_decompose(h);
        // odd seeds: Haar-random state; even seeds: weights decaying like (k+1)^-3 over the energy eigenbasis
        StateVector psi = seeded_state(dim, seed);
        if (seed % 2 == 0) {
            ComplexVector coeff(dim);
            for (Index k = 0; k < dim; ++k)
                coeff(k) = psi.amplitudes()(k) / std::abs(psi.amplitudes()(k)) * std::pow(k + 1.0, -3.0);
            psi = StateVector(dec.eigenvectors() * coeff).normalized();
        }
        const RankSearchResult r = minimal_rank_for_epsilon(psi, a0, h, grid, eps);
        const double verified = truncation_error(psi, a0, dec, make_truncation(dec, r.rank), grid).max_error;
        const double full = truncation_error(psi, a0, dec, make_truncation(dec, dim), grid).max_error;
        ok = ok && r.rank <= dim && verified <= eps && full <= 1e-12;
        if (r.rank > 0) ok = ok && r.error_below > eps;
        worst_at_rank = std::max(worst_at_rank, verified);
        worst_full = std::max(worst_full, full);
        smallest = std::min(smallest, r.rank);
        largest = std::max(largest, r.rank);
    }
    return {ok, "ranks in [" + std::to_string(smallest) + ", " + std::to_string(largest) +
                    "], max verified error = " + num(worst_at_rank) + ", max error at n = D = " + num(worst_full)};
}

// ---------------------------------------------------------------- 3
Verdict determinant_zero() {
    const Index dim = 64;
    bool ok = true;
    double worst_det = 0.0;
    std::size_t cases = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const HermitianOperator h = sample_gue(dim, 1.0, seed);
        const SpectralDecomposition dec = spectral_decompose(h);
        const double t = 0.9 * static_cast<double>(seed);
        const ComplexMatrix u = evolve(dec, t);
        worst_det = std::max(worst_det, std::abs(std::abs(u.partialPivLu().determinant()) - 1.0));
        for (Index n : {Index{0}, Index{1}, Index{8}, Index{32}, dim - 1}) {
            for (bool energy : {true, false}) {
                const TruncationPair pair = energy ? make_truncation(dec, n) : make_truncation(dim, n);
                const ComplexMatrix pup = pair.P() * u * pair.P();
                const Eigen::VectorXd sv = Eigen::BDCSVD<ComplexMatrix>(pup).singularValues();
                const double cut = 1e-10 * (sv.size() > 0 ? std::max(sv(0), 1.0) : 1.0);
                const auto small = (sv.array() <= cut).count();
                ok = ok && small >= dim - n;
                ++cases;
            }
        }
    }
    ok = ok && worst_det <= 1e-10;
    return {ok, std::to_string(cases) + " truncations with >= D - n vanishing singular values; max ||det U| - 1| = " +
                    num(worst_det)};
}

// ---------------------------------------------------------------- 4
Verdict readout_correctness() {
    double worst_oracle = 0.0, worst_imag = 0.0, worst_q_free = 0.0, worst_q_zero = 0.0;
    const TimeGrid grid = TimeGrid::uniform(4.0, 33);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const CompositeModel m = random_model(8, 3, seed);
        const MeasurementDevice dev = seeded_device(3, 8, seed);
        const ReadoutCurve inter = interacting_readout(m, dev, grid);
        const ReadoutCurve free = free_readout(m, dev, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const auto sums = oracle::readout_by_terms(m.c(), m.d(), m.energies(), m.interaction().matrix(),
                                                       dev.weights(), grid[k], 8, false);
            for (Index a = 0; a < dev.channels(); ++a) {
                const auto col = static_cast<Index>(k);
                const auto slot = static_cast<std::size_t>(a);
                worst_oracle = std::max({worst_oracle, std::abs(inter.probability(a, col) - sums.interacting[slot].real()),
                                         std::abs(free.probability(a, col) - sums.free[slot])});
                worst_imag = std::max(worst_imag, std::abs(sums.interacting[slot].imag()));
            }
        }
        worst_imag = std::max(worst_imag, inter.max_imaginary());
        const CompositeModel uncoupled = m.with_interaction(HermitianOperator::zero(8, OperatorRole::interaction));
        worst_q_free = std::max(worst_q_free, quality(interacting_readout(uncoupled, dev, grid),
                                                      free_readout(uncoupled, dev, grid)).aggregate);
        const TimeGrid origin = TimeGrid::from_points({0.0});
        worst_q_zero = std::max(worst_q_zero,
                                quality(interacting_readout(m, dev, origin), free_readout(m, dev, origin)).aggregate);
    }
    return {worst_oracle <= 1e-12 && worst_imag <= 1e-12 && worst_q_free <= 1e-15 && worst_q_zero <= 1e-15,
            "oracle gap = " + num(worst_oracle) + ", max |Im P| = " + num(worst_imag) + ", Q(V = 0) = " +
                num(worst_q_free) + ", Q(grid {0}) = " + num(worst_q_zero)};
}

// ---------------------------------------------------------------- 5
Verdict factorization_audit() {
    double commuting = 0.0, general = 0.0;
    const TimeGrid grid = TimeGrid::uniform(10.0, 101);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const CompositeModel m = random_model(8, 3, seed);
        const MeasurementDevice dev = seeded_device(3, 8, seed);
        Rng rng = make_rng(seed, Stream::probe);
        std::normal_distribution<double> normal;
        RealVector diag(8);
        for (Index k = 0; k < 8; ++k) diag(k) = normal(rng);
        const CompositeModel diagonal = m.with_interaction(HermitianOperator::diagonal(diag, OperatorRole::interaction));
        commuting = std::max(commuting, exact_oracle_readout(diagonal, dev, grid).max_deviation);
        general = std::max(general, exact_oracle_readout(m, dev, grid).max_deviation);
    }
    return {commuting <= 1e-10,
            "commuting deviation = " + num(commuting) + "; non-commuting deviation (reported) = " + num(general)};
}

// ---------------------------------------------------------------- 6
Verdict fidelity_bound() {
    double worst_a = 0.0;
    std::size_t points = 0, satisfied = 0, chain_checks = 0, chain_bad = 0, models_bad = 0, unordered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const CompositeModel m = random_model(64, 4, seed);
        const MeasurementDevice dev = seeded_device(3, 64, seed);
        const CoarseningSpec spec(m, 16);
        const double t0 = characteristic_time(m, spec).t0;
        const BoundFit fit = fit_bound_constant(m, dev, TimeGrid::uniform(1.5 * t0, 151), spec);
        worst_a = std::max(worst_a, fit.fitted_a);
        points += fit.points.size();
        satisfied += fit.satisfied;
        chain_checks += fit.chain_checks;
        chain_bad += fit.admissible_chain_violations;
        models_bad += fit.admissible_chain_violations > 0 ? 1 : 0;
        unordered += fit.gap.ordering_holds ? 0 : 1;
    }
    const double fraction = static_cast<double>(satisfied) / static_cast<double>(points);
    const bool fit_ok = fraction >= 0.95 && worst_a <= 1e3;
    const bool chain_ok = chain_bad == 0;
    return {fit_ok && chain_ok,
            std::string("fit ") + (fit_ok ? "ok" : "FAILS") + ": max A_fitted = " + num(worst_a) + ", " +
                num(100.0 * fraction) + "% of " + std::to_string(points) + " points within A t eps; chain " +
                (chain_ok ? "ok" : "FAILS") + ": " + std::to_string(chain_bad) + " of " +
                std::to_string(chain_checks) + " admissible checks violated in " + std::to_string(models_bad) +
                "/100 models; Q < Qt in " + std::to_string(unordered) + "/100 models (reported)"};
}

// ---------------------------------------------------------------- 7
Verdict characteristic_time_checks() {
    bool ok = true;
    double worst = 0.0;
    // direct substitution: single known entry in the block
    const Index dim = 6;
    ComplexMatrix v = ComplexMatrix::Zero(dim, dim);
    v(1, 4) = Complex(0.0, std::numbers::pi / 2.0);
    v(4, 1) = std::conj(v(1, 4));
    v(0, 2) = 5.0;  // outside the block for N1 = 4
    v(2, 0) = 5.0;
    ComplexVector c(2), d(4);
    c << 0.6, 0.0;
    d << 0.8, 0.0, 0.0, 0.0;
    const CompositeModel fixed(c, d, RealVector::Zero(dim), HermitianOperator(v, OperatorRole::interaction));
    worst = std::max(worst, std::abs(characteristic_time(fixed, CoarseningSpec(fixed, 4)).t0 - 1.0));

    std::size_t excluded = 0, flagged = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const CompositeModel m = random_model(16, 3, seed);
        const CoarseningSpec spec(m, 7);
        const double t0 = characteristic_time(m, spec).t0;
        double block = 0.0;
        for (Index i = 0; i < 3; ++i)
            for (Index j = 6; j < 16; ++j) block = std::max(block, std::abs(m.interaction().matrix()(i, j)));
        worst = std::max(worst, std::abs(t0 - std::numbers::pi / 2.0 / block) / t0);
        for (double kappa : {0.25, 3.0, 11.0}) {
            const double scaled = characteristic_time(m.with_interaction(m.interaction().scaled(kappa)), spec).t0;
            worst = std::max(worst, std::abs(scaled * kappa - t0) / t0);
        }
        const TimeGrid grid = TimeGrid::uniform(2.0 * t0, 41);
        const BoundFit fit = fit_bound_constant(m, seeded_device(2, 16, seed), grid, spec);
        for (std::size_t k : fit.excluded) ok = ok && grid[k] >= t0;
        for (std::size_t k : fit.admissible) ok = ok && grid[k] > 0.0 && grid[k] < t0;
        for (const auto& p : fit.points) ok = ok && p.t < t0;
        for (const auto& cv : fit.chain_violations) {
            ok = ok && cv.admissible == (cv.t < t0);
            flagged += cv.admissible ? 0 : 1;
        }
        ok = ok && fit.admissible.size() + fit.excluded.size() + 1 == grid.size();
        excluded += fit.excluded.size();
        try {
            (void)bound_chain_rhs(m, seeded_device(2, 16, seed), spec, t0);
            ok = false;
        } catch (const RegimeError&) {
        }
    }
    ok = ok && worst <= 1e-12;
    return {ok, "max relative error = " + num(worst) + ", " + std::to_string(excluded) +
                    " grid points beyond t0 excluded, " + std::to_string(flagged) + " chain results flagged there"};
}

// ---------------------------------------------------------------- 8
Verdict peres_condition() {
    double worst = 0.0;
    const CompositeModel m = random_model(256, 4, 8);
    const TimeGrid grid = TimeGrid::uniform(2.0, 21);
    const PeresProfile decaying = peres_condition_check(m, grid);
    for (std::size_t c = 0; c < decaying.cutoffs.size(); c += 5)
        for (std::size_t k = 0; k < grid.size(); ++k)
            worst = std::max(worst, std::abs(decaying.epsilon(static_cast<Index>(c), static_cast<Index>(k)) -
                                             oracle::tail_epsilon(m.c(), m.d(), m.energies(), grid[k],
                                                                  decaying.cutoffs[c])));

    const Index n = 2, dim = 20;
    ComplexVector c(n), d = ComplexVector::Constant(dim - n, 1.0);
    c << 1.0, 1.0;
    const double norm = std::sqrt(c.squaredNorm() + d.squaredNorm());
    const CompositeModel aligned(c / norm, d / norm, RealVector::LinSpaced(dim, 0.0, 3.0), HermitianOperator::zero(dim));
    const TimeGrid origin = TimeGrid::from_points({0.0});
    const PeresProfile constant = peres_condition_check(aligned, origin);
    for (std::size_t k = 0; k < constant.cutoffs.size(); ++k)
        worst = std::max(worst, std::abs(constant.epsilon_max[k] - oracle::tail_epsilon(aligned.c(), aligned.d(),
                                                                                        aligned.energies(), 0.0,
                                                                                        constant.cutoffs[k])));
    const bool ok = worst <= 1e-12 && decaying.condition_holds && !constant.condition_holds;
    return {ok, "decaying tail (D = 256): condition " + std::string(decaying.condition_holds ? "holds" : "fails") +
                    " from N1 = " + std::to_string(decaying.decay_cutoff) + "; constant aligned tail: condition " +
                    (constant.condition_holds ? "holds" : "fails") + "; max oracle gap = " + num(worst)};
}

// ---------------------------------------------------------------- 9
std::string serialize(const EchoCurve& c) {
    std::string out;
    for (std::size_t k = 0; k < c.times.size(); ++k)
        out += qlimits::cli::format_double(c.mean[k]) + "," + qlimits::cli::format_double(c.stddev[k]) + "\n";
    return out;
}

Verdict peres_echo() {
    const TimeGrid grid = TimeGrid::uniform(5.0, 101);
    EnsembleSpec spec;
    spec.dim = 64;
    spec.members = 50;
    bool ok = true;
    double worst_unperturbed = 0.0;
    std::string ladders;
    for (std::uint64_t seed : {3u, 5u}) {
        spec.seed = seed;
        const StateVector psi = seeded_state(64, seed);
        const double hn = operator_norm(ensemble_base(spec).matrix());
        double previous = 2.0;
        ladders += ladders.empty() ? "" : "; ";
        ladders += "seed " + std::to_string(seed) + ":";
        for (double frac : {0.0, 0.05, 0.1, 0.2, 0.4}) {
            spec.delta = frac * hn;
            const EchoCurve curve = ensemble_echo(spec, psi, grid);
            if (frac == 0.0)
                for (double e : curve.mean) worst_unperturbed = std::max(worst_unperturbed, std::abs(e - 1.0));
            if (frac == 0.1) ok = ok && serialize(curve) == serialize(ensemble_echo(spec, psi, grid));
            const double avg = time_averaged_echo(curve);
            ok = ok && avg <= previous;
            previous = avg;
            ladders += " " + num(avg);
        }
    }
    ok = ok && worst_unperturbed <= 1e-10;
    return {ok, "delta = 0 deviation = " + num(worst_unperturbed) + "; time-averaged echo along ladder " + ladders};
}

// ---------------------------------------------------------------- 10
Verdict speed_limit() {
    bool ok = true;
    std::size_t checked = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const HermitianOperator h = sample_gue(16, 1.0, seed);
        const StateVector psi = seeded_state(16, seed);
        const SpectralDecomposition dec = spectral_decompose(h);
        const ComplexVector coeff = dec.eigenvectors().adjoint() * psi.amplitudes();
        const RealVector w = coeff.cwiseAbs2();
        const double spread = std::sqrt(w.dot(dec.eigenvalues().cwiseAbs2()) - std::pow(w.dot(dec.eigenvalues()), 2));
        const SpeedLimitResult r = speed_limit_check(h, psi, TimeGrid::uniform(std::numbers::pi / spread, 201));
        ok = ok && r.holds && r.checked > 0;
        checked += r.checked;
        min_margin = std::min(min_margin, r.min_margin);
    }
    const double omega = 1.7;
    RealVector e(2);
    e << -0.3, -0.3 + omega;
    ComplexVector v(2);
    v << 1.0, 1.0;
    const TimeGrid grid = TimeGrid::uniform(std::numbers::pi / omega, 41);
    const SpeedLimitResult two = speed_limit_check(HermitianOperator::diagonal(e), StateVector(v).normalized(), grid);
    double worst = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k)
        worst = std::max(worst, std::abs(two.survival[k] - std::pow(std::cos(omega * grid[k] / 2.0), 2)));
    ok = ok && worst <= 1e-10;
    return {ok, std::to_string(checked) + " points checked, min S - cos^2 = " + num(min_margin) +
                    ", two-level closed-form gap = " + num(worst)};
}

// ---------------------------------------------------------------- 11
Verdict determinism() {
    const fs::path root = fs::temp_directory_path() / ("qlimits_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    bool ok = true;
    std::size_t compared = 0;
    std::string failures;
    for (const char* name : {"truncate-sweep", "readout", "fidelity", "peres-condition", "peres-echo", "speed-limit"}) {
        const std::string config = std::string(QLIMITS_SOURCE_DIR) + "/configs/" + name + ".toml";
        std::vector<fs::path> dirs;
        for (const char* threads : {"1", "2", "8"}) {
            const fs::path out = root / (std::string(name) + "_" + threads);
            const std::string cmd = std::string(QLIMITS_TOOL_PATH) + " " + name + " --config " + config +
                                    " --threads " + threads + " --out " + out.string() + " > /dev/null 2>&1";
            const int status = std::system(cmd.c_str());
            if (status != 0) {
                ok = false;
                failures += std::string(" ") + name + " exited " + std::to_string(status);
            }
            dirs.push_back(out);
        }
        for (const auto& entry : fs::directory_iterator(dirs.front())) {
            const std::string file = entry.path().filename().string();
            if (file == "manifest.json") continue;
            for (std::size_t k = 1; k < dirs.size(); ++k) {
                ++compared;
                if (!fs::exists(dirs[k] / file) ||
                    qlimits::cli::read_file(dirs[k] / file) != qlimits::cli::read_file(entry.path())) {
                    ok = false;
                    failures += " " + (dirs[k] / file).string();
                }
            }
        }
    }
    fs::remove_all(root);
    return {ok && compared > 0, std::to_string(compared) + " file comparisons across 1, 2 and 8 workers" +
                                    (failures.empty() ? "" : "; differing:" + failures)};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        double budget_seconds;
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "unitarity and smoothness (D = 128)", 30.0, unitarity_and_smoothness},
        {2, "minimal truncation rank (D = 256)", 120.0, minimal_rank},
        {3, "truncated evolution has zero determinant", 0.0, determinant_zero},
        {4, "readout correctness (D = 8)", 0.0, readout_correctness},
        {5, "factorization audit", 0.0, factorization_audit},
        {6, "fidelity bound at desk scale (100 models)", 300.0, fidelity_bound},
        {7, "characteristic time", 0.0, characteristic_time_checks},
        {8, "tail-decay condition", 0.0, peres_condition},
        {9, "echo ensemble (D = 64, M = 50)", 120.0, peres_echo},
        {10, "speed limit", 0.0, speed_limit},
        {11, "determinism across worker counts", 0.0, determinism},
    };
    std::vector<int> failed;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_seconds > 0.0 && seconds > c.budget_seconds) {
            v.pass = false;
            v.detail += "; over the " + num(c.budget_seconds) + " s budget";
        }
        if (!v.pass) failed.push_back(c.id);
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.title << " -- " << v.detail
                  << " [" << num(seconds) << " s]" << std::endl;
    }
    if (failed.empty()) {
        std::cout << "all criteria pass" << std::endl;
        return 0;
    }
    std::cout << "failing criteria:";
    for (int id : failed) std::cout << ' ' << id;
    std::cout << std::endl;
    return 1;
}
