#pragma once

// Seeded sampling. Every random object is drawn from its own generator,
// derived from (master seed, stream tag, index) through std::seed_seq, so a
// result never depends on the order in which objects are sampled or on how
// work is split across threads.

#include <cstdint>
#include <random>

#include "qlimits/hilbert.hpp"

namespace qlimits {

enum class Stream : std::uint64_t {
    hamiltonian = 1,
    observable = 2,
    state = 3,
    interaction = 4,
    energies = 5,
    amplitudes = 6,
    device = 7,
    echo_member = 8,
    phases = 9,
    probe = 10,
};

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
    const auto tag = static_cast<std::uint64_t>(stream);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

/// Standard complex Gaussian: real and imaginary parts independent N(0, 1).
inline Complex complex_gaussian(Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double re = normal(rng);
    const double im = normal(rng);
    return {re, im};
}

inline ComplexVector complex_gaussian_vector(Index dim, Rng& rng) {
    ComplexVector v(dim);
    for (Index k = 0; k < dim; ++k) v(k) = complex_gaussian(rng);
    return v;
}

/// Haar-random normalized state.
inline StateVector random_state(Index dim, Rng& rng) {
    return StateVector(complex_gaussian_vector(dim, rng)).normalized();
}

/// scale * (G + G^dagger) / 2 with G an i.i.d. complex Gaussian matrix; the
/// diagonal is real by construction.
inline HermitianOperator sample_gue(Index dim, double scale, Rng& rng,
                                    OperatorRole role = OperatorRole::hamiltonian) {
    if (dim < 1) throw RangeError("sample_gue: dim must be >= 1");
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw RangeError("sample_gue: scale must be finite and >= 0");
    ComplexMatrix g(dim, dim);
    for (Index j = 0; j < dim; ++j)
        for (Index i = 0; i < dim; ++i) g(i, j) = complex_gaussian(rng);
    ComplexMatrix h = (g + g.adjoint()) * (0.5 * scale);
    for (Index k = 0; k < dim; ++k) h(k, k) = Complex(h(k, k).real(), 0.0);
    return HermitianOperator(std::move(h), role);
}

inline HermitianOperator sample_gue(Index dim, double scale, std::uint64_t seed,
                                    OperatorRole role = OperatorRole::hamiltonian) {
    Rng rng = make_rng(seed, Stream::hamiltonian);
    return sample_gue(dim, scale, rng, role);
}

}  // namespace qlimits
