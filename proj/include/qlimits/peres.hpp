#pragma once

// Loschmidt echo under an imperfectly known Hamiltonian: evolve forward with
// H + dH, reverse with H, and average the return probability over an
// ensemble of perturbations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "qlimits/hilbert.hpp"
#include "qlimits/parallel.hpp"
#include "qlimits/random.hpp"

namespace qlimits {

enum class EchoOrdering {
    forward_perturbed,  ///< <psi0| exp(-iHt) exp(i(H+dH)t) |psi0>
    forward_nominal,    ///< <psi0| exp(-i(H+dH)t) exp(iHt) |psi0>
};

struct EchoCurve {
    std::vector<double> times;
    std::vector<double> mean;
    std::vector<double> stddev;  ///< population standard deviation over members
    std::vector<double> min;
    std::vector<double> max;
    std::vector<std::vector<double>> members;  ///< members[m][k]
};

namespace detail {

inline std::vector<double> echo_values(const SpectralDecomposition& nominal, const SpectralDecomposition& perturbed,
                                       const ComplexVector& psi0, const TimeGrid& grid, EchoOrdering ordering) {
    std::vector<double> out(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        Complex overlap;
        if (ordering == EchoOrdering::forward_perturbed) {
            overlap = nominal.propagate(psi0, t).dot(perturbed.propagate(psi0, t));
        } else {
            overlap = perturbed.propagate(psi0, t).dot(nominal.propagate(psi0, t));
        }
        out[k] = t == 0.0 ? 1.0 : std::norm(overlap / psi0.squaredNorm());
    }
    return out;
}

inline EchoCurve summarize(const TimeGrid& grid, std::vector<std::vector<double>> members) {
    EchoCurve curve;
    curve.times.assign(grid.points().begin(), grid.points().end());
    const std::size_t n_t = grid.size();
    curve.mean.assign(n_t, 0.0);
    curve.stddev.assign(n_t, 0.0);
    curve.min.assign(n_t, std::numeric_limits<double>::infinity());
    curve.max.assign(n_t, -std::numeric_limits<double>::infinity());
    const auto m = static_cast<double>(members.size());
    for (std::size_t k = 0; k < n_t; ++k) {
        double sum = 0.0;
        for (const auto& member : members) {
            sum += member[k];
            curve.min[k] = std::min(curve.min[k], member[k]);
            curve.max[k] = std::max(curve.max[k], member[k]);
        }
        curve.mean[k] = sum / m;
        double var = 0.0;
        for (const auto& member : members) var += (member[k] - curve.mean[k]) * (member[k] - curve.mean[k]);
        curve.stddev[k] = std::sqrt(var / m);
    }
    curve.members = std::move(members);
    return curve;
}

}  // namespace detail

/// Single-member echo |<psi0| U(H, -t) U(H + dH, t) |psi0>|^2.
inline EchoCurve echo_experiment(const HermitianOperator& h, const HermitianOperator& delta_h, const StateVector& psi0,
                                 const TimeGrid& grid, EchoOrdering ordering = EchoOrdering::forward_perturbed) {
    detail::require_same_dim(h.dim(), delta_h.dim(), "echo_experiment");
    detail::require_same_dim(h.dim(), psi0.dim(), "echo_experiment");
    if (!psi0.is_normalized()) throw InputError("echo_experiment: initial state must be normalized");
    const SpectralDecomposition nominal = spectral_decompose(h);
    const SpectralDecomposition perturbed = spectral_decompose(h + delta_h);
    std::vector<std::vector<double>> members{
        detail::echo_values(nominal, perturbed, psi0.amplitudes(), grid, ordering)};
    return detail::summarize(grid, std::move(members));
}

struct EnsembleSpec {
    Index dim = 64;
    std::size_t members = 50;
    double delta = 0.0;  ///< spectral norm of every perturbation, energy units
    std::uint64_t seed = 0;
    std::optional<HermitianOperator> base;  ///< explicit H; GUE-sampled from the seed when empty
    double base_scale = 1.0;                ///< GUE scale when sampling the base
    EchoOrdering ordering = EchoOrdering::forward_perturbed;

    void validate() const {
        if (dim < 1) throw RangeError("EnsembleSpec: dim must be >= 1");
        if (members < 1) throw RangeError("EnsembleSpec: members must be >= 1");
        if (!(delta >= 0.0) || !std::isfinite(delta)) throw RangeError("EnsembleSpec: delta must be finite and >= 0");
        if (base && base->dim() != dim) throw DimensionError("EnsembleSpec: base Hamiltonian dimension mismatch");
    }
};

inline HermitianOperator ensemble_base(const EnsembleSpec& spec) {
    if (spec.base) return *spec.base;
    Rng rng = make_rng(spec.seed, Stream::hamiltonian);
    return sample_gue(spec.dim, spec.base_scale, rng);
}

/// Member m's perturbation: delta * G / ||G|| with G drawn from stream (seed, m).
inline HermitianOperator ensemble_perturbation(const EnsembleSpec& spec, std::size_t member) {
    Rng rng = make_rng(spec.seed, Stream::echo_member, member);
    const HermitianOperator g = sample_gue(spec.dim, 1.0, rng);
    const double norm = operator_norm(g.matrix());
    if (spec.delta == 0.0 || norm == 0.0) return HermitianOperator::zero(spec.dim, OperatorRole::hamiltonian);
    return g.scaled(spec.delta / norm);
}

inline EchoCurve ensemble_echo(const EnsembleSpec& spec, const StateVector& psi0, const TimeGrid& grid,
                               unsigned workers = 1) {
    spec.validate();
    detail::require_same_dim(spec.dim, psi0.dim(), "ensemble_echo");
    if (!psi0.is_normalized()) throw InputError("ensemble_echo: initial state must be normalized");
    const HermitianOperator h = ensemble_base(spec);
    const SpectralDecomposition nominal = spectral_decompose(h);
    std::vector<std::vector<double>> members(spec.members);
    parallel_for(spec.members, workers, [&](std::size_t m) {
        const SpectralDecomposition perturbed = spectral_decompose(h + ensemble_perturbation(spec, m));
        members[m] = detail::echo_values(nominal, perturbed, psi0.amplitudes(), grid, spec.ordering);
    });
    return detail::summarize(grid, std::move(members));
}

/// Mean of the mean echo over the grid.
inline double time_averaged_echo(const EchoCurve& curve) {
    double sum = 0.0;
    for (double v : curve.mean) sum += v;
    return sum / static_cast<double>(curve.mean.size());
}

}  // namespace qlimits
