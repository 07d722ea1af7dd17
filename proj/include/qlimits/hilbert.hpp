#pragma once

// Dense linear algebra on a finite proxy Hilbert space: states, Hermitian
// operators, spectral decomposition, unitary evolution and operator norms.
//
// Conventions: hbar = 1 throughout the library; the evolution operator is
// U(t) = exp(+i H t) unless a negative PhaseSign is requested.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qlimits/errors.hpp"

namespace qlimits {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kNormalizedTolerance = 1e-12;
inline constexpr double kDecompositionTolerance = 1e-10;

enum class OperatorRole { hamiltonian, observable, interaction };

/// Sign of the exponent in exp(sign * i * H * t).
enum class PhaseSign : int { positive = 1, negative = -1 };

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i)
            if (!std::isfinite(std::real(m(i, j))) || !std::isfinite(std::imag(m(i, j))))
                return false;
    return true;
}

template <typename Derived>
double max_abs_entry(const Eigen::MatrixBase<Derived>& m) {
    // eval() first: coefficient access on a lazy product re-runs the product.
    const auto dense = m.eval();
    if (dense.size() == 0) return 0.0;
    return dense.cwiseAbs().maxCoeff();
}

inline void require_square(const ComplexMatrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        std::ostringstream os;
        os << what << ": expected a non-empty square matrix, got " << m.rows() << "x" << m.cols();
        throw DimensionError(os.str());
    }
}

inline void require_same_dim(Index a, Index b, const char* what) {
    if (a != b) {
        std::ostringstream os;
        os << what << ": dimension mismatch (" << a << " vs " << b << ")";
        throw DimensionError(os.str());
    }
}

inline double hermitian_deviation(const ComplexMatrix& m) {
    return max_abs_entry(m - m.adjoint());
}

}  // namespace detail

/// Hermitian matrix with a role tag. Construction rejects matrices whose
/// max-entry deviation |A - A^dagger| exceeds the tolerance and symmetrizes
/// the rest.
class HermitianOperator {
public:
    explicit HermitianOperator(ComplexMatrix m, OperatorRole role = OperatorRole::observable,
                               double tolerance = kHermitianTolerance)
        : role_(role) {
        detail::require_square(m, "HermitianOperator");
        if (!detail::all_finite(m)) throw InputError("HermitianOperator: non-finite entry");
        const double dev = detail::hermitian_deviation(m);
        if (dev > tolerance) {
            std::ostringstream os;
            os << "HermitianOperator: max |A - A^dagger| = " << dev << " exceeds tolerance " << tolerance;
            throw HermiticityError(os.str());
        }
        m_ = (m + m.adjoint()) * 0.5;
    }

    /// For results of floating-point products such as U^dagger A U, where the
    /// rounding error scales with the entry magnitude.
    static HermitianOperator from_computed(const ComplexMatrix& m, OperatorRole role,
                                           double relative_tolerance = kDecompositionTolerance) {
        detail::require_square(m, "HermitianOperator");
        const double scale = std::max(1.0, detail::max_abs_entry(m));
        return HermitianOperator(m, role, relative_tolerance * scale);
    }

    static HermitianOperator zero(Index dim, OperatorRole role = OperatorRole::observable) {
        return HermitianOperator(ComplexMatrix::Zero(dim, dim), role);
    }

    static HermitianOperator diagonal(const RealVector& values,
                                      OperatorRole role = OperatorRole::observable) {
        return HermitianOperator(values.cast<Complex>().asDiagonal().toDenseMatrix(), role);
    }

    [[nodiscard]] Index dim() const { return m_.rows(); }
    [[nodiscard]] const ComplexMatrix& matrix() const { return m_; }
    [[nodiscard]] OperatorRole role() const { return role_; }

    [[nodiscard]] HermitianOperator scaled(double factor) const {
        return HermitianOperator(m_ * factor, role_, kHermitianTolerance * std::max(1.0, std::abs(factor)));
    }

    [[nodiscard]] HermitianOperator with_role(OperatorRole role) const {
        HermitianOperator copy = *this;
        copy.role_ = role;
        return copy;
    }

    friend HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b) {
        detail::require_same_dim(a.dim(), b.dim(), "HermitianOperator sum");
        return HermitianOperator::from_computed(a.m_ + b.m_, a.role_);
    }

private:
    ComplexMatrix m_;
    OperatorRole role_;
};

/// Complex amplitude vector. The normalized flag is set when | |psi| - 1 | <= 1e-12.
class StateVector {
public:
    explicit StateVector(ComplexVector amplitudes) : a_(std::move(amplitudes)) {
        if (a_.size() == 0) throw DimensionError("StateVector: empty amplitude vector");
        if (!detail::all_finite(a_)) throw InputError("StateVector: non-finite amplitude");
        norm_ = a_.norm();
        if (!(norm_ > 0.0)) throw InputError("StateVector: zero vector is not a state");
        normalized_ = std::abs(norm_ - 1.0) <= kNormalizedTolerance;
    }

    static StateVector basis(Index dim, Index k) {
        if (k < 0 || k >= dim) throw RangeError("StateVector::basis: index out of range");
        ComplexVector v = ComplexVector::Zero(dim);
        v(k) = 1.0;
        return StateVector(std::move(v));
    }

    [[nodiscard]] Index dim() const { return a_.size(); }
    [[nodiscard]] const ComplexVector& amplitudes() const { return a_; }
    [[nodiscard]] double norm() const { return norm_; }
    [[nodiscard]] bool is_normalized() const { return normalized_; }

    [[nodiscard]] StateVector normalized() const { return StateVector(a_ / norm_); }

private:
    ComplexVector a_;
    double norm_ = 0.0;
    bool normalized_ = false;
};

/// A = S diag(lambda) S^dagger with ascending eigenvalues and unitary S.
class SpectralDecomposition {
public:
    SpectralDecomposition(RealVector eigenvalues, ComplexMatrix eigenvectors)
        : values_(std::move(eigenvalues)), vectors_(std::move(eigenvectors)) {
        if (vectors_.rows() != vectors_.cols() || vectors_.cols() != values_.size())
            throw DimensionError("SpectralDecomposition: inconsistent shapes");
    }

    [[nodiscard]] Index dim() const { return values_.size(); }
    [[nodiscard]] const RealVector& eigenvalues() const { return values_; }
    [[nodiscard]] const ComplexMatrix& eigenvectors() const { return vectors_; }

    /// S f(Lambda) S^dagger for a scalar function f: double -> Complex.
    template <typename F>
    [[nodiscard]] ComplexMatrix apply(F&& f) const {
        ComplexVector fl(dim());
        for (Index k = 0; k < dim(); ++k) fl(k) = Complex(f(values_(k)));
        return vectors_ * fl.asDiagonal() * vectors_.adjoint();
    }

    [[nodiscard]] ComplexMatrix reconstruct() const {
        return apply([](double x) { return Complex(x); });
    }

    /// Phases exp(sign * i * lambda_k * t) in the eigenbasis.
    [[nodiscard]] ComplexVector phases(double t, PhaseSign sign = PhaseSign::positive) const {
        const double s = static_cast<double>(static_cast<int>(sign));
        ComplexVector ph(dim());
        for (Index k = 0; k < dim(); ++k) ph(k) = std::polar(1.0, s * values_(k) * t);
        return ph;
    }

    /// exp(sign i A t) v without forming the full matrix.
    [[nodiscard]] ComplexVector propagate(const ComplexVector& v, double t,
                                          PhaseSign sign = PhaseSign::positive) const {
        detail::require_same_dim(v.size(), dim(), "propagate");
        if (t == 0.0) return v;
        ComplexVector coeffs = vectors_.adjoint() * v;
        coeffs.array() *= phases(t, sign).array();
        return vectors_ * coeffs;
    }

private:
    RealVector values_;
    ComplexMatrix vectors_;
};

/// Largest singular value.
inline double operator_norm(const ComplexMatrix& b) {
    detail::require_square(b, "operator_norm");
    if (!detail::all_finite(b)) throw InputError("operator_norm: non-finite entry");
    if (b.rows() <= 16) {
        Eigen::JacobiSVD<ComplexMatrix> svd(b);
        return svd.singularValues()(0);
    }
    Eigen::BDCSVD<ComplexMatrix> svd(b);
    return svd.singularValues()(0);
}

inline SpectralDecomposition spectral_decompose(const HermitianOperator& a) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(a.matrix());
    if (solver.info() != Eigen::Success) {
        std::ostringstream os;
        os << "spectral_decompose: eigensolver did not converge (dim " << a.dim() << ", info "
           << static_cast<int>(solver.info()) << ")";
        throw NumericalError(os.str());
    }
    SpectralDecomposition dec(solver.eigenvalues(), solver.eigenvectors());

    // Frobenius norms bound the spectral norms from above.
    const Index d = a.dim();
    const double scale = std::max(a.matrix().norm(), 1e-300);
    const double recon = (a.matrix() - dec.reconstruct()).norm();
    const double orth =
        (dec.eigenvectors().adjoint() * dec.eigenvectors() - ComplexMatrix::Identity(d, d)).norm();
    if (recon > kDecompositionTolerance * scale || orth > kDecompositionTolerance) {
        std::ostringstream os;
        os << "spectral_decompose: decomposition outside tolerance (reconstruction " << recon
           << " vs scale " << scale << ", orthogonality " << orth << ")";
        throw NumericalError(os.str());
    }
    return dec;
}

inline ComplexMatrix evolve(const SpectralDecomposition& dec, double t,
                            PhaseSign sign = PhaseSign::positive) {
    if (!std::isfinite(t)) throw InputError("evolve: non-finite time");
    if (t == 0.0) return ComplexMatrix::Identity(dec.dim(), dec.dim());
    const ComplexVector ph = dec.phases(t, sign);
    return dec.eigenvectors() * ph.asDiagonal() * dec.eigenvectors().adjoint();
}

/// U = exp(sign * i * H * t), computed spectrally.
inline ComplexMatrix evolve(const HermitianOperator& h, double t, PhaseSign sign = PhaseSign::positive) {
    if (!std::isfinite(t)) throw InputError("evolve: non-finite time");
    return evolve(spectral_decompose(h), t, sign);
}

/// A(t) = exp(-iHt) A0 exp(iHt).
inline HermitianOperator heisenberg_observable(const HermitianOperator& a0, const SpectralDecomposition& h,
                                               double t) {
    detail::require_same_dim(a0.dim(), h.dim(), "heisenberg_observable");
    const ComplexMatrix u = evolve(h, t, PhaseSign::positive);
    return HermitianOperator::from_computed(u.adjoint() * a0.matrix() * u, a0.role());
}

inline HermitianOperator heisenberg_observable(const HermitianOperator& a0, const HermitianOperator& h,
                                               double t) {
    detail::require_same_dim(a0.dim(), h.dim(), "heisenberg_observable");
    return heisenberg_observable(a0, spectral_decompose(h), t);
}

/// <psi|A|psi> / <psi|psi>.
inline Complex expectation(const StateVector& psi, const ComplexMatrix& a) {
    detail::require_square(a, "expectation");
    detail::require_same_dim(psi.dim(), a.rows(), "expectation");
    const ComplexVector& v = psi.amplitudes();
    return v.dot(a * v) / v.squaredNorm();
}

/// || U^dagger U - I ||.
inline double unitarity_defect(const ComplexMatrix& u) {
    detail::require_square(u, "unitarity_defect");
    return operator_norm(u.adjoint() * u - ComplexMatrix::Identity(u.rows(), u.cols()));
}

/// Uniform or explicit sample of times in [0, t_max].
class TimeGrid {
public:
    static TimeGrid uniform(double t_max, int steps) {
        if (!(t_max > 0.0) || !std::isfinite(t_max)) throw RangeError("TimeGrid: t_max must be finite and > 0");
        if (steps < 2) throw RangeError("TimeGrid: steps must be >= 2");
        std::vector<double> pts(static_cast<std::size_t>(steps));
        for (int k = 0; k < steps; ++k) pts[static_cast<std::size_t>(k)] = t_max * k / (steps - 1);
        pts.back() = t_max;
        return TimeGrid(std::move(pts), true);
    }

    /// Arbitrary strictly increasing non-negative times; a single point is allowed.
    static TimeGrid from_points(std::vector<double> pts) {
        if (pts.empty()) throw RangeError("TimeGrid: no points");
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (!std::isfinite(pts[k]) || pts[k] < 0.0) throw RangeError("TimeGrid: times must be finite and >= 0");
            if (k > 0 && !(pts[k] > pts[k - 1])) throw RangeError("TimeGrid: times must be strictly increasing");
        }
        return TimeGrid(std::move(pts), false);
    }

    [[nodiscard]] std::span<const double> points() const { return pts_; }
    [[nodiscard]] std::size_t size() const { return pts_.size(); }
    [[nodiscard]] double operator[](std::size_t k) const { return pts_[k]; }
    [[nodiscard]] double t_max() const { return pts_.back(); }
    [[nodiscard]] bool is_uniform() const { return uniform_; }

    /// Inserts factor - 1 equally spaced points into every interval.
    [[nodiscard]] TimeGrid refined(int factor) const {
        if (factor < 1) throw RangeError("TimeGrid::refined: factor must be >= 1");
        if (pts_.size() == 1) return *this;
        std::vector<double> out;
        out.reserve((pts_.size() - 1) * static_cast<std::size_t>(factor) + 1);
        for (std::size_t k = 0; k + 1 < pts_.size(); ++k)
            for (int s = 0; s < factor; ++s) out.push_back(pts_[k] + (pts_[k + 1] - pts_[k]) * s / factor);
        out.push_back(pts_.back());
        return TimeGrid(std::move(out), uniform_);
    }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) { return a.pts_ == b.pts_; }

private:
    TimeGrid(std::vector<double> pts, bool uniform) : pts_(std::move(pts)), uniform_(uniform) {}

    std::vector<double> pts_;
    bool uniform_;
};

}  // namespace qlimits
