#pragma once

// Projector truncations P_n / Q_n of observables and evolution operators,
// the truncation error of expectation values, and the rank certificate for
// truncated evolution operators.

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "qlimits/hilbert.hpp"
#include "qlimits/parallel.hpp"

namespace qlimits {

inline constexpr double kProjectorTolerance = 1e-12;
inline constexpr double kRankTolerance = 1e-10;

/// P projects onto the first `rank` columns of an ordered orthonormal basis,
/// Q = I - P onto the rest.
class TruncationPair {
public:
    TruncationPair(const ComplexMatrix& basis, Index rank) : basis_(basis), rank_(rank) {
        detail::require_square(basis_, "TruncationPair");
        const Index d = basis_.rows();
        if (rank < 0 || rank > d) {
            std::ostringstream os;
            os << "TruncationPair: rank " << rank << " outside [0, " << d << "]";
            throw RangeError(os.str());
        }
        if (rank == d) {
            // The full basis resolves the identity; keep it exact so n = D is a no-op.
            p_ = ComplexMatrix::Identity(d, d);
            q_ = ComplexMatrix::Zero(d, d);
        } else {
            const auto kept = basis_.leftCols(rank);
            p_ = kept * kept.adjoint();
            q_ = ComplexMatrix::Identity(d, d) - p_;
        }
        check_invariants();
    }

    [[nodiscard]] Index dim() const { return basis_.rows(); }
    [[nodiscard]] Index rank() const { return rank_; }
    [[nodiscard]] const ComplexMatrix& basis() const { return basis_; }
    [[nodiscard]] const ComplexMatrix& P() const { return p_; }
    [[nodiscard]] const ComplexMatrix& Q() const { return q_; }

private:
    void check_invariants() const {
        const Index d = dim();
        const ComplexMatrix id = ComplexMatrix::Identity(d, d);
        const double worst = std::max({detail::max_abs_entry(p_ * p_ - p_), detail::max_abs_entry(q_ * q_ - q_),
                                       detail::max_abs_entry(p_ - p_.adjoint()), detail::max_abs_entry(p_ * q_),
                                       detail::max_abs_entry(p_ + q_ - id),
                                       std::abs(p_.trace() - Complex(static_cast<double>(rank_)))});
        if (worst > kProjectorTolerance) {
            std::ostringstream os;
            os << "TruncationPair: projector algebra violated by " << worst
               << " (is the basis orthonormal?)";
            throw NumericalError(os.str());
        }
    }

    ComplexMatrix basis_;
    Index rank_;
    ComplexMatrix p_;
    ComplexMatrix q_;
};

/// Truncation to the `n` lowest-energy eigenvectors.
inline TruncationPair make_truncation(const SpectralDecomposition& basis, Index n) {
    return TruncationPair(basis.eigenvectors(), n);
}

/// Truncation in the computational basis.
inline TruncationPair make_truncation(Index dim, Index n) {
    return TruncationPair(ComplexMatrix::Identity(dim, dim), n);
}

/// P_left A P_right, embedded in the full space.
inline ComplexMatrix truncate_operator(const ComplexMatrix& a, const TruncationPair& left,
                                       const TruncationPair& right) {
    detail::require_square(a, "truncate_operator");
    detail::require_same_dim(a.rows(), left.dim(), "truncate_operator");
    detail::require_same_dim(a.rows(), right.dim(), "truncate_operator");
    return left.P() * a * right.P();
}

inline ComplexMatrix truncate_operator(const ComplexMatrix& a, const TruncationPair& pair) {
    return truncate_operator(a, pair, pair);
}

struct TruncationSample {
    double t = 0.0;
    double error = 0.0;         ///< |<psi|A(t) - P A(t) P|psi>| / |<psi|psi>|
    Complex difference{};       ///< <psi|A(t) - P A(t) P|psi> / <psi|psi>
    Complex term_qq{};          ///< <psi|Q A(t) Q|psi> / <psi|psi>
    Complex term_cross{};       ///< <psi|Q A(t) P + P A(t) Q|psi> / <psi|psi>
    Complex term_commutator{};  ///< commutator term; zero when both sides share one projector
};

struct TruncationReport {
    Index rank = 0;
    double max_error = 0.0;
    std::vector<TruncationSample> samples;
};

/// Error of the truncated expectation value at every grid time, with the split
/// A - PAP = QAQ + (QAP + PAQ) evaluated term by term.
inline TruncationReport truncation_error(const StateVector& psi, const HermitianOperator& a0,
                                         const SpectralDecomposition& h, const TruncationPair& pair,
                                         const TimeGrid& grid, unsigned workers = 1) {
    const Index d = psi.dim();
    detail::require_same_dim(a0.dim(), d, "truncation_error");
    detail::require_same_dim(h.dim(), d, "truncation_error");
    detail::require_same_dim(pair.dim(), d, "truncation_error");

    const ComplexVector& v = psi.amplitudes();
    const double norm2 = v.squaredNorm();
    const ComplexMatrix& s = h.eigenvectors();
    const ComplexVector coeff_p = s.adjoint() * (pair.P() * v);
    const ComplexVector coeff_q = s.adjoint() * (pair.Q() * v);

    TruncationReport report;
    report.rank = pair.rank();
    report.samples.resize(grid.size());
    parallel_for(grid.size(), workers, [&](std::size_t k) {
        const double t = grid[k];
        const ComplexVector ph = h.phases(t);
        // A(t) = U^dagger A0 U with U = exp(iHt), so <x|A(t)|y> = (Ux)^dagger A0 (Uy).
        const ComplexVector up = s * (ph.array() * coeff_p.array()).matrix();
        const ComplexVector uq = s * (ph.array() * coeff_q.array()).matrix();
        const ComplexVector a_up = a0.matrix() * up;
        const ComplexVector a_uq = a0.matrix() * uq;

        TruncationSample& out = report.samples[k];
        out.t = t;
        out.term_qq = uq.dot(a_uq) / norm2;
        out.term_cross = (uq.dot(a_up) + up.dot(a_uq)) / norm2;
        out.term_commutator = Complex(0.0, 0.0);
        const ComplexVector u_full = up + uq;
        const Complex full = u_full.dot(a0.matrix() * u_full);
        const Complex truncated = up.dot(a_up);
        out.difference = (full - truncated) / norm2;
        out.error = std::abs(out.difference);
    });
    for (const auto& sample : report.samples) report.max_error = std::max(report.max_error, sample.error);
    return report;
}

inline TruncationReport truncation_error(const StateVector& psi, const HermitianOperator& a0,
                                         const HermitianOperator& h, const TruncationPair& pair,
                                         const TimeGrid& grid, unsigned workers = 1) {
    return truncation_error(psi, a0, spectral_decompose(h), pair, grid, workers);
}

struct RankSearchResult {
    Index rank = 0;
    double error_at_rank = 0.0;  ///< verified by truncation_error
    /// max-over-grid error of rank - 1 (NaN when rank == 0)
    double error_below = std::numeric_limits<double>::quiet_NaN();
    /// max-over-grid error for every n in [0, D], from the eigenbasis scan
    std::vector<double> max_error_by_rank;
};

/// Max-over-grid truncation error for every rank n = 0..D in the energy
/// eigenbasis. In that basis the truncated expectation is a running sum over
/// eigen-coefficients, so the whole profile costs O(D^2) per time.
inline std::vector<double> truncation_error_profile(const StateVector& psi, const HermitianOperator& a0,
                                                    const SpectralDecomposition& h, const TimeGrid& grid,
                                                    unsigned workers = 1) {
    const Index d = psi.dim();
    detail::require_same_dim(a0.dim(), d, "truncation_error_profile");
    detail::require_same_dim(h.dim(), d, "truncation_error_profile");
    const ComplexMatrix& s = h.eigenvectors();
    const ComplexMatrix a_eig = s.adjoint() * a0.matrix() * s;
    const ComplexVector coeff = s.adjoint() * psi.amplitudes();
    const double norm2 = psi.amplitudes().squaredNorm();

    std::vector<std::vector<double>> per_time(grid.size());
    parallel_for(grid.size(), workers, [&](std::size_t k) {
        const ComplexVector b = (h.phases(grid[k]).array() * coeff.array()).matrix();
        std::vector<double> truncated(static_cast<std::size_t>(d) + 1, 0.0);
        double running = 0.0;
        for (Index m = 0; m < d; ++m) {
            const Complex lower = m > 0 ? (a_eig.row(m).head(m) * b.head(m)).value() : Complex(0.0);
            // conj(b_m) * sum_{l<m} A_ml b_l appears together with its conjugate.
            running += 2.0 * std::real(std::conj(b(m)) * lower) + std::real(a_eig(m, m)) * std::norm(b(m));
            truncated[static_cast<std::size_t>(m) + 1] = running;
        }
        const double full = truncated.back();
        std::vector<double>& errs = per_time[k];
        errs.resize(truncated.size());
        for (std::size_t n = 0; n < truncated.size(); ++n) errs[n] = std::abs(full - truncated[n]) / norm2;
    });

    std::vector<double> worst(static_cast<std::size_t>(d) + 1, 0.0);
    for (const auto& errs : per_time)
        for (std::size_t n = 0; n < errs.size(); ++n) worst[n] = std::max(worst[n], errs[n]);
    return worst;
}

/// Smallest eigenbasis rank whose truncation error stays <= epsilon on the
/// whole grid. Candidates from the scan are confirmed with truncation_error;
/// the error is not assumed monotone in n.
inline RankSearchResult minimal_rank_for_epsilon(const StateVector& psi, const HermitianOperator& a0,
                                                 const HermitianOperator& h, const TimeGrid& grid,
                                                 double epsilon, unsigned workers = 1) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw RangeError("minimal_rank_for_epsilon: epsilon must be finite and > 0");
    const SpectralDecomposition dec = spectral_decompose(h);
    RankSearchResult result;
    result.max_error_by_rank = truncation_error_profile(psi, a0, dec, grid, workers);
    const Index d = psi.dim();
    for (Index n = 0; n <= d; ++n) {
        if (result.max_error_by_rank[static_cast<std::size_t>(n)] > epsilon && n < d) continue;
        const TruncationReport check = truncation_error(psi, a0, dec, make_truncation(dec, n), grid, workers);
        if (check.max_error > epsilon && n < d) continue;
        result.rank = n;
        result.error_at_rank = check.max_error;
        if (n > 0) result.error_below = result.max_error_by_rank[static_cast<std::size_t>(n) - 1];
        return result;
    }
    // unreachable: n = D always returns
    throw NumericalError("minimal_rank_for_epsilon: no rank accepted");
}

struct TruncatedEvolution {
    ComplexMatrix matrix;            ///< P U P embedded in dimension D
    RealVector singular_values;      ///< descending
    double threshold = 0.0;          ///< 1e-10 * ||U||
    Index near_zero_count = 0;       ///< singular values <= threshold
    Index numerical_rank = 0;
    bool determinant_zero = false;   ///< near_zero_count >= D - n and n < D
    double abs_determinant = 0.0;    ///< product of singular values
    bool no_op = false;              ///< n == D, nothing was truncated
    std::optional<double> expectation_gap;  ///< |<psi|U - P U P|psi>| / <psi|psi>
};

/// U_n = P U P for U = exp(iHt) with a rank certificate from singular values.
inline TruncatedEvolution truncated_evolution(const SpectralDecomposition& h, double t, const TruncationPair& pair,
                                              const StateVector* psi = nullptr) {
    detail::require_same_dim(h.dim(), pair.dim(), "truncated_evolution");
    const Index d = h.dim();
    const ComplexMatrix u = evolve(h, t);
    TruncatedEvolution out;
    out.no_op = pair.rank() == d;
    out.matrix = truncate_operator(u, pair);

    Eigen::BDCSVD<ComplexMatrix> svd(out.matrix);
    out.singular_values = svd.singularValues();
    out.threshold = kRankTolerance * operator_norm(u);
    double log_det = 0.0;
    for (Index k = 0; k < d; ++k) {
        const double sv = out.singular_values(k);
        if (sv <= out.threshold) ++out.near_zero_count;
        log_det += sv > 0.0 ? std::log(sv) : -std::numeric_limits<double>::infinity();
    }
    out.numerical_rank = d - out.near_zero_count;
    out.abs_determinant = std::exp(log_det);
    out.determinant_zero = !out.no_op && out.near_zero_count >= d - pair.rank();

    if (psi != nullptr) {
        detail::require_same_dim(psi->dim(), d, "truncated_evolution");
        out.expectation_gap = std::abs(expectation(*psi, u - out.matrix));
    }
    return out;
}

inline TruncatedEvolution truncated_evolution(const HermitianOperator& h, double t, const TruncationPair& pair,
                                              const StateVector* psi = nullptr) {
    return truncated_evolution(spectral_decompose(h), t, pair, psi);
}

}  // namespace qlimits
