#pragma once

// Perfect versus coarse measurement devices: quality with a particle cutoff,
// the fidelity gap F, the tail-sum (Peres) condition on M_ij = c_i conj(d_j)
// gamma_ij, the characteristic time t0, the linear bound F <= A t eps with a
// fitted A, the sin-form bound chain, and the Mandelstam-Tamm speed limit.
//
// Index conventions (0-based in code): the coarse device with cutoff N1 keeps
// particle states [N, N1); its tail is [N1, D). t0 maximizes |V_ij| over
// apparatus i in [0, N) and particle j in [N1 - 1, D).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "qlimits/hilbert.hpp"
#include "qlimits/measurement.hpp"
#include "qlimits/parallel.hpp"

namespace qlimits {

/// Cutoff N1 of the coarse device, N < N1 <= D.
class CoarseningSpec {
public:
    CoarseningSpec(const CompositeModel& model, Index n1) : n1_(n1) {
        if (n1 <= model.apparatus_states() || n1 > model.dim()) {
            std::ostringstream os;
            os << "CoarseningSpec: N1 = " << n1 << " must satisfy N = " << model.apparatus_states()
               << " < N1 <= D = " << model.dim();
            throw RangeError(os.str());
        }
    }
    [[nodiscard]] Index n1() const { return n1_; }

private:
    Index n1_;
};

/// M_ij(t) = c_i conj(d_j) gamma_ij(t) for apparatus i and all particle j.
class MixingMatrix {
public:
    MixingMatrix(const CompositeModel& model, double t, double hbar = 1.0) : t_(t) {
        const Index n = model.apparatus_states();
        m_.resize(n, model.dim() - n);
        for (Index i = 0; i < n; ++i)
            for (Index j = n; j < model.dim(); ++j)
                m_(i, j - n) = model.c()(i) * std::conj(model.d()(j - n)) *
                               gamma_phase(model.energies()(i), model.energies()(j), t, hbar);
    }

    [[nodiscard]] double time() const { return t_; }
    /// Columns are particle states N..D-1.
    [[nodiscard]] const ComplexMatrix& matrix() const { return m_; }

private:
    double t_;
    ComplexMatrix m_;
};

/// Tail measure eps = max_i max(|sum_{j >= tail_begin} Re M_ij|, |sum Im M_ij|).
inline double tail_measure(const CompositeModel& model, const MixingMatrix& mixing, Index tail_begin) {
    const Index n = model.apparatus_states();
    double eps = 0.0;
    for (Index i = 0; i < n; ++i) {
        double re = 0.0, im = 0.0;
        for (Index j = tail_begin; j < model.dim(); ++j) {
            re += mixing.matrix()(i, j - n).real();
            im += mixing.matrix()(i, j - n).imag();
        }
        eps = std::max({eps, std::abs(re), std::abs(im)});
    }
    return eps;
}

inline QualityReport quality_with_cutoff(const CompositeModel& model, const MeasurementDevice& device,
                                         const TimeGrid& grid, Index cutoff, const ReadoutOptions& options = {}) {
    return quality(interacting_readout(model, device, grid, cutoff, options), free_readout(model, device, grid, options));
}

/// q(t) for the perfect and coarse devices, per channel.
struct CrossCurves {
    std::vector<double> times;
    RealMatrix perfect;  ///< channels x times
    RealMatrix coarse;   ///< channels x times
};

inline CrossCurves cross_curves(const CompositeModel& model, const MeasurementDevice& device, const TimeGrid& grid,
                                Index n1, const ReadoutOptions& options = {}) {
    detail::check_model_device(model, device);
    detail::check_cutoff(model, n1);
    const SpectralDecomposition v_dec = spectral_decompose(model.interaction());
    const Index channels = device.channels();
    CrossCurves out;
    out.times.assign(grid.points().begin(), grid.points().end());
    out.perfect = RealMatrix::Zero(channels, static_cast<Index>(grid.size()));
    out.coarse = RealMatrix::Zero(channels, static_cast<Index>(grid.size()));
    const Index n = model.apparatus_states();
    parallel_for(grid.size(), options.workers, [&](std::size_t k) {
        const double t = grid[k];
        const ComplexMatrix w = evolve(v_dec, t / options.hbar);
        const ReadoutTerms kept = detail::readout_terms(model, device, w, t, n, n1, options.order, options.hbar);
        const ReadoutTerms tail =
            detail::readout_terms(model, device, w, t, n1, model.dim(), options.order, options.hbar);
        for (Index a = 0; a < channels; ++a) {
            const Complex q_coarse = kept.cross_first(a) + kept.cross_second(a);
            const Complex q_tail = tail.cross_first(a) + tail.cross_second(a);
            out.coarse(a, static_cast<Index>(k)) = q_coarse.real();
            out.perfect(a, static_cast<Index>(k)) = (q_coarse + q_tail).real();
        }
    });
    return out;
}

struct ChannelGap {
    Index alpha = 0;
    double q_perfect = 0.0;      ///< Q = max_t |q(t)|
    double q_coarse = 0.0;       ///< Q~ = max_t |q~(t)|
    double gap = 0.0;            ///< F = |Q| - |Q~|
    double triangle_bound = 0.0; ///< max_t |q(t) - q~(t)|
    bool ordered = true;         ///< Q >= Q~ >= 0
};

struct FidelityGap {
    std::vector<ChannelGap> channels;
    double aggregate_gap = 0.0;  ///< max over channels of F
    bool triangle_holds = true;  ///< |F| <= triangle bound for every channel
    bool ordering_holds = true;  ///< Q >= Q~ for every channel
};

inline constexpr double kBoundSlack = 1e-12;

inline FidelityGap fidelity_gap(const CrossCurves& curves) {
    FidelityGap out;
    out.aggregate_gap = -std::numeric_limits<double>::infinity();
    for (Index a = 0; a < curves.perfect.rows(); ++a) {
        ChannelGap g;
        g.alpha = a;
        g.q_perfect = curves.perfect.row(a).cwiseAbs().maxCoeff();
        g.q_coarse = curves.coarse.row(a).cwiseAbs().maxCoeff();
        g.gap = std::abs(g.q_perfect) - std::abs(g.q_coarse);
        g.triangle_bound = (curves.perfect.row(a) - curves.coarse.row(a)).cwiseAbs().maxCoeff();
        g.ordered = g.q_perfect >= g.q_coarse;
        out.triangle_holds = out.triangle_holds && std::abs(g.gap) <= g.triangle_bound + kBoundSlack;
        out.ordering_holds = out.ordering_holds && g.ordered;
        out.aggregate_gap = std::max(out.aggregate_gap, g.gap);
        out.channels.push_back(g);
    }
    return out;
}

inline FidelityGap fidelity_gap(const CompositeModel& model, const MeasurementDevice& device, const TimeGrid& grid,
                                const CoarseningSpec& spec, const ReadoutOptions& options = {}) {
    return fidelity_gap(cross_curves(model, device, grid, spec.n1(), options));
}

struct PeresThresholds {
    double epsilon = 1e-3;           ///< eps(N1) must fall below this before N1 = D
    double plateau_tolerance = 0.05; ///< relative V tail considered converged below this
};

struct PeresProfile {
    std::vector<Index> cutoffs;               ///< N1 = N+1 .. D
    RealMatrix epsilon;                       ///< cutoffs x times
    std::vector<double> epsilon_max;          ///< max over times, per cutoff
    std::vector<double> interaction_tail;     ///< max_i sum_{j>=N1}|V_ij| / sum_{j>=N}|V_ij|
    Index decay_cutoff = -1;                  ///< smallest N1 < D from which eps_max stays <= threshold; -1 if none
    Index plateau_cutoff = -1;                ///< smallest N1 with interaction_tail <= plateau tolerance; -1 if none
    bool condition_holds = false;
    bool interaction_converges = false;
};

inline PeresProfile peres_condition_check(const CompositeModel& model, const TimeGrid& grid,
                                          const PeresThresholds& thresholds = {}, double hbar = 1.0) {
    const Index n = model.apparatus_states();
    const Index dim = model.dim();
    PeresProfile out;
    for (Index n1 = n + 1; n1 <= dim; ++n1) out.cutoffs.push_back(n1);
    const auto n_cut = static_cast<Index>(out.cutoffs.size());
    out.epsilon = RealMatrix::Zero(n_cut, static_cast<Index>(grid.size()));

    for (std::size_t k = 0; k < grid.size(); ++k) {
        const MixingMatrix mixing(model, grid[k], hbar);
        // Suffix sums over particle columns give every cutoff in one pass.
        const Index cols = dim - n;
        ComplexMatrix suffix = ComplexMatrix::Zero(n, cols + 1);
        for (Index j = cols - 1; j >= 0; --j) suffix.col(j) = suffix.col(j + 1) + mixing.matrix().col(j);
        for (Index c = 0; c < n_cut; ++c) {
            const Index tail_col = out.cutoffs[static_cast<std::size_t>(c)] - n;
            double eps = 0.0;
            for (Index i = 0; i < n; ++i)
                eps = std::max({eps, std::abs(suffix(i, tail_col).real()), std::abs(suffix(i, tail_col).imag())});
            out.epsilon(c, static_cast<Index>(k)) = eps;
        }
    }

    const ComplexMatrix& v = model.interaction().matrix();
    for (Index c = 0; c < n_cut; ++c) {
        out.epsilon_max.push_back(out.epsilon.row(c).maxCoeff());
        const Index n1 = out.cutoffs[static_cast<std::size_t>(c)];
        double rel = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double total = v.row(i).segment(n, dim - n).cwiseAbs().sum();
            const double tail = v.row(i).segment(n1, dim - n1).cwiseAbs().sum();
            rel = std::max(rel, total > 0.0 ? tail / total : 0.0);
        }
        out.interaction_tail.push_back(rel);
    }

    for (Index c = n_cut - 1; c >= 0; --c) {
        if (out.epsilon_max[static_cast<std::size_t>(c)] > thresholds.epsilon) break;
        out.decay_cutoff = out.cutoffs[static_cast<std::size_t>(c)];
    }
    out.condition_holds = out.decay_cutoff != -1 && out.decay_cutoff < dim;
    for (Index c = 0; c < n_cut; ++c) {
        if (out.interaction_tail[static_cast<std::size_t>(c)] <= thresholds.plateau_tolerance) {
            out.plateau_cutoff = out.cutoffs[static_cast<std::size_t>(c)];
            break;
        }
    }
    out.interaction_converges = out.plateau_cutoff != -1 && out.plateau_cutoff < dim;
    return out;
}

struct CharacteristicTime {
    double t0 = std::numeric_limits<double>::infinity();
    bool bounded = false;       ///< false when the coupling block vanishes
    double max_coupling = 0.0;  ///< max |V_ij| over the block
    Index argmax_i = -1;
    Index argmax_j = -1;
};

/// t0 = (pi/2) hbar / max |<psi_i|V|psi_j>| over apparatus i and particle j >= N1 - 1.
inline CharacteristicTime characteristic_time(const CompositeModel& model, const CoarseningSpec& spec,
                                              double hbar = 1.0) {
    CharacteristicTime out;
    const ComplexMatrix& v = model.interaction().matrix();
    for (Index i = 0; i < model.apparatus_states(); ++i)
        for (Index j = spec.n1() - 1; j < model.dim(); ++j)
            if (std::abs(v(i, j)) > out.max_coupling) {
                out.max_coupling = std::abs(v(i, j));
                out.argmax_i = i;
                out.argmax_j = j;
            }
    if (out.max_coupling > 0.0) {
        out.bounded = true;
        out.t0 = 0.5 * std::numbers::pi * hbar / out.max_coupling;
    }
    return out;
}

/// Per (channel, apparatus state) terms of the sin-form bound chain at one time.
struct BoundChainTerms {
    double t = 0.0;
    RealMatrix sin_form;      ///< channels x N: rho |sum_j (M + conj M) <i|sin(Vt)|j>|
    RealMatrix sin_abs_form;  ///< K rho |sum_j (M + conj M) sin(2 |V_ij| t)|
    RealMatrix linear_form;   ///< 8 K rho |sum_j Re M_ij |V_ij| t|
    RealMatrix tail_sum;      ///< rho |sum_j (M + conj M) |W_ij|^2|, the per-state fidelity f_i

    [[nodiscard]] bool chain_holds(double slack = kBoundSlack) const {
        for (Index a = 0; a < sin_form.rows(); ++a)
            for (Index i = 0; i < sin_form.cols(); ++i) {
                if (sin_form(a, i) > sin_abs_form(a, i) * (1.0 + slack) + slack) return false;
                if (sin_abs_form(a, i) > linear_form(a, i) * (1.0 + slack) + slack) return false;
            }
        return true;
    }
};

struct BoundChainOptions {
    double k_constant = 1.0;
    double hbar = 1.0;
};

namespace detail {

inline BoundChainTerms bound_chain_terms(const CompositeModel& model, const MeasurementDevice& device,
                                         const SpectralDecomposition& v_dec, const CoarseningSpec& spec, double t,
                                         const BoundChainOptions& options) {
    const Index n = model.apparatus_states();
    const Index channels = device.channels();
    const double tau = t / options.hbar;
    const ComplexMatrix sin_v = v_dec.apply([tau](double lambda) { return std::sin(lambda * tau); });
    const ComplexMatrix w = evolve(v_dec, tau);
    const ComplexMatrix& v = model.interaction().matrix();
    const MixingMatrix mixing(model, t, options.hbar);

    BoundChainTerms out;
    out.t = t;
    out.sin_form = RealMatrix::Zero(channels, n);
    out.sin_abs_form = RealMatrix::Zero(channels, n);
    out.linear_form = RealMatrix::Zero(channels, n);
    out.tail_sum = RealMatrix::Zero(channels, n);
    for (Index i = 0; i < n; ++i) {
        Complex sin_sum{};
        double abs_sum = 0.0, linear_sum = 0.0, fid_sum = 0.0;
        for (Index j = spec.n1(); j < model.dim(); ++j) {
            const Complex m = mixing.matrix()(i, j - n);
            const double coupling = std::abs(v(i, j));
            sin_sum += m * sin_v(i, j) + std::conj(m) * sin_v(i, j);
            abs_sum += 2.0 * m.real() * std::sin(2.0 * coupling * tau);
            linear_sum += m.real() * coupling * tau;
            fid_sum += 2.0 * m.real() * std::norm(w(i, j));
        }
        for (Index a = 0; a < channels; ++a) {
            const double rho = device.weight(a, i);
            out.sin_form(a, i) = rho * std::abs(sin_sum);
            out.sin_abs_form(a, i) = options.k_constant * rho * std::abs(abs_sum);
            out.linear_form(a, i) = 8.0 * options.k_constant * rho * std::abs(linear_sum);
            out.tail_sum(a, i) = rho * std::abs(fid_sum);
        }
    }
    return out;
}

}  // namespace detail

/// The three bound-chain forms at time t < t0.
inline BoundChainTerms bound_chain_rhs(const CompositeModel& model, const MeasurementDevice& device,
                                       const CoarseningSpec& spec, double t, const BoundChainOptions& options = {}) {
    detail::check_model_device(model, device);
    const CharacteristicTime t0 = characteristic_time(model, spec, options.hbar);
    if (!(t < t0.t0)) {
        std::ostringstream os;
        os << "bound_chain_rhs: t = " << t << " is not below t0 = " << t0.t0;
        throw RegimeError(os.str());
    }
    return detail::bound_chain_terms(model, device, spectral_decompose(model.interaction()), spec, t, options);
}

struct BoundPoint {
    std::size_t time_index = 0;
    double t = 0.0;
    Index alpha = 0;
    double gap = 0.0;        ///< F(t) = ||q(t)| - |q~(t)||
    double epsilon = 0.0;    ///< eps(N1) at t
    double bound = 0.0;      ///< A_used * t * eps
    bool satisfied = true;
};

struct ChainViolation {
    double t = 0.0;
    Index alpha = 0;
    Index state = 0;
    bool admissible = true;  ///< t < t0; violations beyond t0 are expected and only flagged
};

struct BoundFitOptions {
    double k_constant = 1.0;
    double ceiling = 1e3;
    double hbar = 1.0;
    unsigned workers = 1;
    CrossTermOrder order = CrossTermOrder::symmetric;
};

struct BoundFit {
    CharacteristicTime t0;
    std::vector<std::size_t> admissible;       ///< grid indices with 0 < t < t0
    std::vector<std::size_t> excluded;         ///< grid indices with t >= t0
    double fitted_a = 0.0;                     ///< min slope with F <= A t eps on admissible points
    double used_a = 0.0;                       ///< min(fitted_a, ceiling)
    bool finite_a = true;                      ///< fitted_a <= ceiling
    std::vector<BoundPoint> points;            ///< admissible (t, channel) points
    std::size_t satisfied = 0;
    std::vector<double> epsilon;               ///< eps(N1) per grid time
    RealMatrix gap_curve;                      ///< channels x times, F(t)
    std::vector<ChainViolation> chain_violations;
    std::size_t chain_checks = 0;              ///< admissible (t, alpha, i) triples checked
    std::size_t admissible_chain_violations = 0;
    RealVector a6_sum_max;                     ///< per channel, max_t sum_i f_i
    double fitted_c = 0.0;                     ///< max linear_form / (eps t/hbar sum_j |V_ij|)
    double fitted_c_tilde = 0.0;               ///< max linear_form / (eps t/hbar)
    FidelityGap gap;

    [[nodiscard]] double satisfied_fraction() const {
        return points.empty() ? 1.0 : static_cast<double>(satisfied) / static_cast<double>(points.size());
    }
};

/// Fits the least A with F(t) <= A t eps(N1, t) over the admissible grid and
/// evaluates the bound chain at every grid time.
inline BoundFit fit_bound_constant(const CompositeModel& model, const MeasurementDevice& device,
                                     const TimeGrid& grid, const CoarseningSpec& spec,
                                     const BoundFitOptions& options = {}) {
    BoundFit out;
    out.t0 = characteristic_time(model, spec, options.hbar);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] >= out.t0.t0) out.excluded.push_back(k);
        else if (grid[k] > 0.0) out.admissible.push_back(k);
    }
    if (out.admissible.empty()) {
        std::ostringstream os;
        os << "no admissible times: t0 = " << out.t0.t0 << " and no grid point lies in (0, t0)";
        throw RegimeError(os.str());
    }

    ReadoutOptions ro;
    ro.order = options.order;
    ro.hbar = options.hbar;
    ro.workers = options.workers;
    const CrossCurves curves = cross_curves(model, device, grid, spec.n1(), ro);
    out.gap = fidelity_gap(curves);

    const Index channels = device.channels();
    out.gap_curve = (curves.perfect.cwiseAbs() - curves.coarse.cwiseAbs()).cwiseAbs();
    out.epsilon.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        out.epsilon[k] = tail_measure(model, MixingMatrix(model, grid[k], options.hbar), spec.n1());

    double fitted = 0.0;
    for (std::size_t k : out.admissible) {
        const double t = grid[k];
        for (Index a = 0; a < channels; ++a) {
            const double f = out.gap_curve(a, static_cast<Index>(k));
            const double denom = t * out.epsilon[k];
            const double ratio = f == 0.0 ? 0.0 : (denom > 0.0 ? f / denom : std::numeric_limits<double>::infinity());
            fitted = std::max(fitted, ratio);
        }
    }
    out.fitted_a = fitted;
    out.finite_a = fitted <= options.ceiling;
    out.used_a = std::min(fitted, options.ceiling);
    for (std::size_t k : out.admissible) {
        for (Index a = 0; a < channels; ++a) {
            BoundPoint p;
            p.time_index = k;
            p.t = grid[k];
            p.alpha = a;
            p.gap = out.gap_curve(a, static_cast<Index>(k));
            p.epsilon = out.epsilon[k];
            p.bound = out.used_a * p.t * p.epsilon;
            p.satisfied = p.gap <= p.bound * (1.0 + kBoundSlack) + std::numeric_limits<double>::min();
            out.satisfied += p.satisfied ? 1 : 0;
            out.points.push_back(p);
        }
    }

    const SpectralDecomposition v_dec = spectral_decompose(model.interaction());
    const BoundChainOptions chain_opts{options.k_constant, options.hbar};
    std::vector<BoundChainTerms> chains(grid.size());
    parallel_for(grid.size(), options.workers, [&](std::size_t k) {
        chains[k] = detail::bound_chain_terms(model, device, v_dec, spec, grid[k], chain_opts);
    });
    const ComplexMatrix& v = model.interaction().matrix();
    out.a6_sum_max = RealVector::Zero(channels);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const BoundChainTerms& ch = chains[k];
        const bool admissible = grid[k] < out.t0.t0;
        for (Index a = 0; a < channels; ++a) {
            out.a6_sum_max(a) = std::max(out.a6_sum_max(a), ch.tail_sum.row(a).sum());
            for (Index i = 0; i < model.apparatus_states(); ++i) {
                const bool ok = ch.sin_form(a, i) <= ch.sin_abs_form(a, i) * (1.0 + kBoundSlack) + kBoundSlack &&
                                ch.sin_abs_form(a, i) <= ch.linear_form(a, i) * (1.0 + kBoundSlack) + kBoundSlack;
                if (admissible) ++out.chain_checks;
                if (!ok) {
                    out.chain_violations.push_back({grid[k], a, i, admissible});
                    if (admissible) ++out.admissible_chain_violations;
                }
                if (admissible && grid[k] > 0.0 && out.epsilon[k] > 0.0) {
                    const double scaled_t = grid[k] / options.hbar;
                    const double coupling_tail = v.row(i).segment(spec.n1(), model.dim() - spec.n1()).cwiseAbs().sum();
                    const double base = out.epsilon[k] * scaled_t;
                    out.fitted_c_tilde = std::max(out.fitted_c_tilde, ch.linear_form(a, i) / base);
                    if (coupling_tail > 0.0)
                        out.fitted_c = std::max(out.fitted_c, ch.linear_form(a, i) / (base * coupling_tail));
                }
            }
        }
    }
    return out;
}

struct SpeedLimitResult {
    std::vector<double> times;
    std::vector<double> survival;  ///< |<psi|U(t)|psi>|^2
    std::vector<double> bound;     ///< cos^2(dE t / hbar) where dE t / hbar <= pi/2, else NaN
    double energy_spread = 0.0;    ///< standard deviation of H in psi
    double min_margin = std::numeric_limits<double>::infinity();  ///< min S - bound over the window
    std::size_t checked = 0;
    bool holds = true;
};

inline constexpr double kSpeedLimitSlack = 1e-12;

/// Checks S(t) >= cos^2(dE t / hbar) for every grid time with dE t / hbar <= pi/2.
inline SpeedLimitResult speed_limit_check(const HermitianOperator& h, const StateVector& psi, const TimeGrid& grid,
                                          double hbar = 1.0) {
    detail::require_same_dim(h.dim(), psi.dim(), "speed_limit_check");
    if (!psi.is_normalized()) throw InputError("speed_limit_check: state must be normalized");
    const SpectralDecomposition dec = spectral_decompose(h);
    const ComplexVector coeff = dec.eigenvectors().adjoint() * psi.amplitudes();
    const RealVector weights = coeff.cwiseAbs2();
    const double mean = weights.dot(dec.eigenvalues());
    const double second = weights.dot(dec.eigenvalues().cwiseAbs2());

    SpeedLimitResult out;
    out.energy_spread = std::sqrt(std::max(0.0, second - mean * mean));
    for (double t : grid.points()) {
        Complex amp{};
        for (Index k = 0; k < dec.dim(); ++k) amp += weights(k) * std::polar(1.0, dec.eigenvalues()(k) * t / hbar);
        const double s = std::norm(amp);
        const double angle = out.energy_spread * t / hbar;
        out.times.push_back(t);
        out.survival.push_back(s);
        if (angle <= 0.5 * std::numbers::pi) {
            const double b = std::cos(angle) * std::cos(angle);
            out.bound.push_back(b);
            out.min_margin = std::min(out.min_margin, s - b);
            ++out.checked;
            if (s < b - kSpeedLimitSlack) out.holds = false;
        } else {
            out.bound.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return out;
}

}  // namespace qlimits
