#pragma once

// Measurement devices built from per-basis-state channel weights, the
// apparatus + particle composite state, readout probabilities with and
// without apparatus-particle contact, and the Kolmogorov-Smirnov style
// quality of a measurement.
//
// Basis: psi_k(0) is the k-th computational basis vector, the eigenbasis of
// the unperturbed Hamiltonian diag(E). Indices 0..N-1 are apparatus states,
// N..D-1 particle states.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "qlimits/hilbert.hpp"
#include "qlimits/parallel.hpp"
#include "qlimits/random.hpp"

namespace qlimits {

inline constexpr double kDeviceSumTolerance = 1e-9;
inline constexpr double kModelNormTolerance = 1e-12;

/// Channel weights rho(alpha, k) over all D basis states; every column sums to one.
class MeasurementDevice {
public:
    explicit MeasurementDevice(RealMatrix weights) : rho_(std::move(weights)) {
        if (rho_.rows() < 1 || rho_.cols() < 1) throw DimensionError("MeasurementDevice: needs >= 1 channel and state");
        for (Index k = 0; k < rho_.cols(); ++k) {
            double sum = 0.0;
            for (Index a = 0; a < rho_.rows(); ++a) {
                const double w = rho_(a, k);
                if (!std::isfinite(w)) throw InputError("MeasurementDevice: non-finite weight");
                if (w < 0.0) {
                    std::ostringstream os;
                    os << "MeasurementDevice: negative weight rho(" << a << ", " << k << ") = " << w;
                    throw InputError(os.str());
                }
                sum += w;
            }
            if (std::abs(sum - 1.0) > kDeviceSumTolerance) {
                std::ostringstream os;
                os << "MeasurementDevice: weights of basis state " << k << " sum to " << sum << ", not 1";
                throw NormalizationError(os.str());
            }
        }
    }

    static MeasurementDevice uniform(Index channels, Index dim) {
        return MeasurementDevice(RealMatrix::Constant(channels, dim, 1.0 / static_cast<double>(channels)));
    }

    [[nodiscard]] Index channels() const { return rho_.rows(); }
    [[nodiscard]] Index dim() const { return rho_.cols(); }
    [[nodiscard]] double weight(Index alpha, Index k) const { return rho_(alpha, k); }
    [[nodiscard]] const RealMatrix& weights() const { return rho_; }

private:
    RealMatrix rho_;
};

inline MeasurementDevice build_device(RealMatrix weights) { return MeasurementDevice(std::move(weights)); }

/// Columns drawn uniformly on the probability simplex.
inline MeasurementDevice random_device(Index channels, Index dim, Rng& rng) {
    std::exponential_distribution<double> expo(1.0);
    RealMatrix w(channels, dim);
    for (Index k = 0; k < dim; ++k) {
        double sum = 0.0;
        for (Index a = 0; a < channels; ++a) sum += (w(a, k) = expo(rng));
        w.col(k) /= sum;
    }
    return MeasurementDevice(std::move(w));
}

/// Apparatus amplitudes c (N), particle amplitudes d (D - N), unperturbed
/// energies E (D) and interaction V (D x D).
class CompositeModel {
public:
    CompositeModel(ComplexVector c, ComplexVector d, RealVector energies, HermitianOperator interaction)
        : c_(std::move(c)), d_(std::move(d)), e_(std::move(energies)), v_(std::move(interaction)) {
        const Index n = c_.size();
        const Index dim = n + d_.size();
        if (n < 1 || d_.size() < 1) throw RangeError("CompositeModel: need 1 <= N < D");
        detail::require_same_dim(e_.size(), dim, "CompositeModel energies");
        detail::require_same_dim(v_.dim(), dim, "CompositeModel interaction");
        if (!detail::all_finite(c_) || !detail::all_finite(d_) || !e_.allFinite())
            throw InputError("CompositeModel: non-finite input");
        const double norm2 = c_.squaredNorm() + d_.squaredNorm();
        if (std::abs(norm2 - 1.0) > kModelNormTolerance) {
            std::ostringstream os;
            os << "CompositeModel: sum |c|^2 + sum |d|^2 = " << norm2 << ", expected 1";
            throw NormalizationError(os.str());
        }
    }

    [[nodiscard]] Index dim() const { return e_.size(); }
    [[nodiscard]] Index apparatus_states() const { return c_.size(); }
    [[nodiscard]] const ComplexVector& c() const { return c_; }
    [[nodiscard]] const ComplexVector& d() const { return d_; }
    [[nodiscard]] const RealVector& energies() const { return e_; }
    [[nodiscard]] const HermitianOperator& interaction() const { return v_; }

    /// Coefficient of basis state k in the composite state.
    [[nodiscard]] Complex amplitude(Index k) const {
        return k < apparatus_states() ? c_(k) : d_(k - apparatus_states());
    }

    [[nodiscard]] ComplexVector amplitudes() const {
        ComplexVector all(dim());
        all << c_, d_;
        return all;
    }

    [[nodiscard]] CompositeModel with_interaction(HermitianOperator v) const {
        return CompositeModel(c_, d_, e_, std::move(v));
    }

private:
    ComplexVector c_;
    ComplexVector d_;
    RealVector e_;
    HermitianOperator v_;
};

struct AmplitudeSplit {
    ComplexVector c;  ///< apparatus, N entries
    ComplexVector d;  ///< particle, D - N entries
};

/// Complex Gaussian apparatus amplitudes and particle amplitudes with
/// |d_j| proportional to j^(-tail_exponent) (1-based j), with uniformly random
/// phases or all phases zero. particle_weight of the norm goes to the particle.
inline AmplitudeSplit sample_amplitudes(Index dim, Index apparatus_states, double tail_exponent,
                                        double particle_weight, bool random_phases, std::uint64_t seed,
                                        std::uint64_t index = 0) {
    const Index n = apparatus_states;
    if (n < 1 || n >= dim) throw RangeError("sample_amplitudes: need 1 <= N < D");
    if (!(particle_weight > 0.0 && particle_weight < 1.0))
        throw RangeError("sample_amplitudes: particle_weight must lie in (0, 1)");
    Rng amp_rng = make_rng(seed, Stream::amplitudes, index);
    Rng phase_rng = make_rng(seed, Stream::phases, index);

    ComplexVector c = complex_gaussian_vector(n, amp_rng);
    c *= std::sqrt(1.0 - particle_weight) / c.norm();

    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    ComplexVector d(dim - n);
    for (Index j = 0; j < d.size(); ++j) {
        const double one_based = static_cast<double>(n + j + 1);
        const double phase = random_phases ? angle(phase_rng) : 0.0;
        d(j) = std::polar(std::pow(one_based, -tail_exponent), phase);
    }
    d *= std::sqrt(particle_weight) / d.norm();

    // Fix the total norm after the two independent rescalings.
    const double total = std::sqrt(c.squaredNorm() + d.squaredNorm());
    return {c / total, d / total};
}

/// Sorted uniform levels in [0, span).
inline RealVector sample_energies(Index dim, double span, std::uint64_t seed, std::uint64_t index = 0) {
    if (!(span >= 0.0) || !std::isfinite(span)) throw RangeError("sample_energies: span must be finite and >= 0");
    Rng rng = make_rng(seed, Stream::energies, index);
    std::uniform_real_distribution<double> level(0.0, span);
    RealVector e(dim);
    for (Index k = 0; k < dim; ++k) e(k) = span > 0.0 ? level(rng) : 0.0;
    std::sort(e.data(), e.data() + e.size());
    return e;
}

/// Recipe for a seeded random composite model with a GUE interaction.
struct CompositeModelSpec {
    Index dim = 8;
    Index apparatus_states = 3;
    double tail_exponent = 2.0;
    double particle_weight = 0.5;
    double interaction_scale = 1.0;
    double energy_span = 8.0;
    bool random_phases = true;
};

inline CompositeModel sample_composite_model(const CompositeModelSpec& spec, std::uint64_t seed,
                                             std::uint64_t index = 0) {
    AmplitudeSplit amps = sample_amplitudes(spec.dim, spec.apparatus_states, spec.tail_exponent,
                                            spec.particle_weight, spec.random_phases, seed, index);
    Rng v_rng = make_rng(seed, Stream::interaction, index);
    HermitianOperator v = sample_gue(spec.dim, spec.interaction_scale, v_rng, OperatorRole::interaction);
    return CompositeModel(std::move(amps.c), std::move(amps.d), sample_energies(spec.dim, spec.energy_span, seed, index),
                          std::move(v));
}

/// gamma_ij(t) = exp(i (E_i - E_j) t / hbar); gamma_ji = conj(gamma_ij).
inline Complex gamma_phase(double e_i, double e_j, double t, double hbar = 1.0) {
    return std::polar(1.0, (e_i - e_j) * t / hbar);
}

/// Which matrix element weights the second cross-term family.
enum class CrossTermOrder {
    symmetric,   ///< |<psi_i|W|psi_j>|^2 in both families; families are exact conjugates
    transposed,  ///< |<psi_j|W|psi_i>|^2 in the second family; real only for real-symmetric V
};

enum class ReadoutKind { interacting, free, exact_oracle };

struct ReadoutOptions {
    CrossTermOrder order = CrossTermOrder::symmetric;
    double hbar = 1.0;
    unsigned workers = 1;
};

/// P_alpha(t) for every channel and grid time.
struct ReadoutCurve {
    ReadoutKind kind = ReadoutKind::interacting;
    std::vector<double> times;
    Index cutoff = 0;
    RealMatrix probability;      ///< channels x times, real part
    RealMatrix imaginary_part;   ///< channels x times; nonzero only if the cross terms fail to pair up

    [[nodiscard]] Index channels() const { return probability.rows(); }
    [[nodiscard]] double max_imaginary() const {
        return imaginary_part.size() == 0 ? 0.0 : imaginary_part.cwiseAbs().maxCoeff();
    }
};

/// Per-channel pieces of the readout at one time. W = exp(i V t / hbar).
struct ReadoutTerms {
    RealVector apparatus_diagonal;  ///< sum_i |c_i|^2 rho_ai |W_ii|^2
    RealVector particle_diagonal;   ///< sum_j |d_j|^2 rho_aj |W_jj|^2
    ComplexVector cross_first;      ///< sum_ij c_i conj(d_j) gamma_ij rho_ai |W_ij|^2
    ComplexVector cross_second;     ///< sum_ij conj(c_i) d_j gamma_ji rho_ai |W_ij|^2 (or |W_ji|^2)
};

namespace detail {

inline void check_model_device(const CompositeModel& model, const MeasurementDevice& device) {
    require_same_dim(device.dim(), model.dim(), "device/model");
}

/// Cross terms restricted to particle indices j in [j_begin, j_end).
inline ReadoutTerms readout_terms(const CompositeModel& model, const MeasurementDevice& device,
                                  const ComplexMatrix& w, double t, Index j_begin, Index j_end,
                                  CrossTermOrder order, double hbar) {
    const Index n = model.apparatus_states();
    const Index dim = model.dim();
    const Index channels = device.channels();
    const RealVector& e = model.energies();
    ReadoutTerms terms{RealVector::Zero(channels), RealVector::Zero(channels), ComplexVector::Zero(channels),
                       ComplexVector::Zero(channels)};
    for (Index i = 0; i < n; ++i) {
        const double base = std::norm(model.c()(i)) * std::norm(w(i, i));
        for (Index a = 0; a < channels; ++a) terms.apparatus_diagonal(a) += base * device.weight(a, i);
    }
    for (Index j = n; j < dim; ++j) {
        const double base = std::norm(model.amplitude(j)) * std::norm(w(j, j));
        for (Index a = 0; a < channels; ++a) terms.particle_diagonal(a) += base * device.weight(a, j);
    }
    for (Index i = 0; i < n; ++i) {
        const Complex ci = model.c()(i);
        Complex first{}, second{};
        for (Index j = j_begin; j < j_end; ++j) {
            const Complex dj = model.amplitude(j);
            const Complex g = gamma_phase(e(i), e(j), t, hbar);
            const double w_ij = std::norm(w(i, j));
            const double w_second = order == CrossTermOrder::symmetric ? w_ij : std::norm(w(j, i));
            first += ci * std::conj(dj) * g * w_ij;
            second += std::conj(ci) * dj * std::conj(g) * w_second;
        }
        for (Index a = 0; a < channels; ++a) {
            terms.cross_first(a) += device.weight(a, i) * first;
            terms.cross_second(a) += device.weight(a, i) * second;
        }
    }
    return terms;
}

inline void check_cutoff(const CompositeModel& model, Index cutoff) {
    if (cutoff < model.apparatus_states() || cutoff > model.dim()) {
        std::ostringstream os;
        os << "cutoff " << cutoff << " outside [" << model.apparatus_states() << ", " << model.dim() << "]";
        throw RangeError(os.str());
    }
}

template <typename Fill>
ReadoutCurve evaluate_readout(const CompositeModel& model, const MeasurementDevice& device, const TimeGrid& grid,
                              ReadoutKind kind, Index cutoff, const ReadoutOptions& options, Fill&& fill) {
    check_model_device(model, device);
    const SpectralDecomposition v_dec = spectral_decompose(model.interaction());
    ReadoutCurve curve;
    curve.kind = kind;
    curve.cutoff = cutoff;
    curve.times.assign(grid.points().begin(), grid.points().end());
    curve.probability = RealMatrix::Zero(device.channels(), static_cast<Index>(grid.size()));
    curve.imaginary_part = RealMatrix::Zero(device.channels(), static_cast<Index>(grid.size()));
    parallel_for(grid.size(), options.workers, [&](std::size_t k) {
        const double t = grid[k];
        const ComplexMatrix w = evolve(v_dec, t / options.hbar);
        const ReadoutTerms terms =
            readout_terms(model, device, w, t, model.apparatus_states(), cutoff, options.order, options.hbar);
        for (Index a = 0; a < device.channels(); ++a) {
            const Complex p = fill(terms, a);
            curve.probability(a, static_cast<Index>(k)) = p.real();
            curve.imaginary_part(a, static_cast<Index>(k)) = p.imag();
        }
    });
    return curve;
}

}  // namespace detail

/// Readout with apparatus-particle contact. Particle indices of the cross
/// terms run over [N, cutoff); cutoff = D is the perfect device.
inline ReadoutCurve interacting_readout(const CompositeModel& model, const MeasurementDevice& device,
                                        const TimeGrid& grid, std::optional<Index> cutoff = std::nullopt,
                                        const ReadoutOptions& options = {}) {
    const Index cut = cutoff.value_or(model.dim());
    detail::check_cutoff(model, cut);
    return detail::evaluate_readout(model, device, grid, ReadoutKind::interacting, cut, options,
                                    [](const ReadoutTerms& r, Index a) {
                                        return Complex(r.apparatus_diagonal(a) + r.particle_diagonal(a)) +
                                               r.cross_first(a) + r.cross_second(a);
                                    });
}

/// Readout of an apparatus never brought into contact: diagonal terms only.
inline ReadoutCurve free_readout(const CompositeModel& model, const MeasurementDevice& device, const TimeGrid& grid,
                                 const ReadoutOptions& options = {}) {
    return detail::evaluate_readout(model, device, grid, ReadoutKind::free, model.apparatus_states(), options,
                                    [](const ReadoutTerms& r, Index a) {
                                        return Complex(r.apparatus_diagonal(a) + r.particle_diagonal(a));
                                    });
}

struct ExactReadout {
    ReadoutCurve curve;                   ///< sum_k rho_ak |<psi_k| exp(i(H0+V)t) |Psi(0)>|^2
    std::vector<double> deviation;        ///< per time: max over channels of |exact - interacting|
    double max_deviation = 0.0;
};

/// Born probabilities under the exact composite evolution exp(i (diag(E) + V) t),
/// compared against interacting_readout with the perfect device.
inline ExactReadout exact_oracle_readout(const CompositeModel& model, const MeasurementDevice& device,
                                         const TimeGrid& grid, const ReadoutOptions& options = {}) {
    detail::check_model_device(model, device);
    const HermitianOperator total =
        HermitianOperator::diagonal(model.energies(), OperatorRole::hamiltonian) + model.interaction();
    const SpectralDecomposition dec = spectral_decompose(total);
    const ComplexVector psi0 = model.amplitudes();

    ExactReadout out;
    out.curve.kind = ReadoutKind::exact_oracle;
    out.curve.cutoff = model.dim();
    out.curve.times.assign(grid.points().begin(), grid.points().end());
    out.curve.probability = RealMatrix::Zero(device.channels(), static_cast<Index>(grid.size()));
    out.curve.imaginary_part = RealMatrix::Zero(device.channels(), static_cast<Index>(grid.size()));
    parallel_for(grid.size(), options.workers, [&](std::size_t k) {
        const ComplexVector psi_t = dec.propagate(psi0, grid[k] / options.hbar);
        const RealVector pops = psi_t.cwiseAbs2();
        out.curve.probability.col(static_cast<Index>(k)) = device.weights() * pops;
    });

    const ReadoutCurve reference = interacting_readout(model, device, grid, std::nullopt, options);
    out.deviation.resize(grid.size(), 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto col = static_cast<Index>(k);
        out.deviation[k] = (out.curve.probability.col(col) - reference.probability.col(col)).cwiseAbs().maxCoeff();
        out.max_deviation = std::max(out.max_deviation, out.deviation[k]);
    }
    return out;
}

struct ChannelQuality {
    Index alpha = 0;
    double value = 0.0;        ///< max_t |P_alpha(t) - P'_alpha(t)|
    double argmax_time = 0.0;
    std::size_t argmax_index = 0;
};

struct QualityReport {
    std::vector<ChannelQuality> channels;
    double aggregate = 0.0;    ///< max over channels
};

/// Q_alpha = max over the grid of |P_alpha(t) - P'_alpha(t)|.
inline QualityReport quality(const ReadoutCurve& interacting, const ReadoutCurve& free) {
    if (interacting.times != free.times) throw DimensionError("quality: readouts use different time grids");
    if (interacting.channels() != free.channels()) throw DimensionError("quality: readouts use different devices");
    QualityReport report;
    for (Index a = 0; a < interacting.channels(); ++a) {
        ChannelQuality cq;
        cq.alpha = a;
        for (std::size_t k = 0; k < interacting.times.size(); ++k) {
            const auto col = static_cast<Index>(k);
            const double diff = std::abs(interacting.probability(a, col) - free.probability(a, col));
            if (diff > cq.value) {
                cq.value = diff;
                cq.argmax_index = k;
                cq.argmax_time = interacting.times[k];
            }
        }
        report.aggregate = std::max(report.aggregate, cq.value);
        report.channels.push_back(cq);
    }
    return report;
}

}  // namespace qlimits
