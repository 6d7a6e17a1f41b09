// Dense linear-algebra kernels with pinned conventions.
//
// Every routine here is a pure function of its arguments. Triangular factors
// always come back with a non-negative diagonal so that downstream code can
// take log-determinants as sums of log(diagonal).

#ifndef GMSMOOTH_LINALG_HPP
#define GMSMOOTH_LINALG_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace gmsmooth {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative cut-off used wherever a numerical rank has to be decided.
struct RankTolerance {
    double relative_threshold = 1e-10;

    RankTolerance() = default;
    explicit RankTolerance(double threshold);
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cholesky hit a non-positive pivot.
class FactorizationError : public NumericError {
public:
    FactorizationError(std::size_t pivot, const std::string& what);
    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

class NotPsdError : public NumericError {
public:
    using NumericError::NumericError;
};

class OffSupportError : public NumericError {
public:
    using NumericError::NumericError;
};

struct QrFactors {
    Matrix q;      // m x r, orthonormal columns, r = min(m, k)
    Matrix upper;  // r x k, upper-triangular (trapezoidal when r < k)
};

/// Thin QR of `a` with the diagonal of the upper factor forced non-negative.
QrFactors qr_upper(const Matrix& a);

/// Upper factor only. For the array algorithms this is all that is needed.
Matrix qr_upper_factor(const Matrix& a);

struct QrApplied {
    Matrix upper;  // r x k
    Matrix qt_b;   // m x p, equal to Q_fullᵀ b with the sign convention of `upper`
};

/// Householder QR of `a` (m x k) applied to `b` (m x p): returns the upper
/// factor and the full orthogonal transform of `b`. Rows r..m-1 of `qt_b` are
/// the components of `b` orthogonal to range(a).
QrApplied qr_upper_apply(const Matrix& a, const Matrix& b);

/// Lower Cholesky factor. Throws FactorizationError naming the failing pivot.
Matrix chol_lower(const Matrix& s);

/// Lower-triangular L with L Lᵀ = s for symmetric PSD (possibly singular) s.
Matrix psd_factor_lower(const Matrix& s, RankTolerance tol = {});

enum class Triangle { Lower, Upper };
enum class Side { Left, Right };
enum class Op { None, Transpose };

/// Solves op(t) X = b (Side::Left) or X op(t) = b (Side::Right).
Matrix solve_triangular(const Matrix& t, const Matrix& b, Triangle tri,
                        Side side = Side::Left, Op op = Op::None);

struct PseudoInverse {
    Matrix value;
    std::size_t rank = 0;
};

PseudoInverse pseudo_inverse(const Matrix& a, RankTolerance tol = {});

/// Orthonormal basis (columns) of the row space of `a`.
Matrix row_space_basis(const Matrix& a, RankTolerance tol = {});

struct PseudoLogDet {
    double value = 0.0;
    std::size_t rank = 0;
};

/// Sum of log-eigenvalues above the rank cut-off.
PseudoLogDet pseudo_logdet(const Matrix& s, RankTolerance tol = {});

double gaussian_logpdf(const Vector& x, const Vector& mean, const Matrix& cov);

/// Log-density of a Gaussian restricted to its affine support mean + range(cov),
/// normalized by the pseudo-determinant. Throws OffSupportError when x - mean
/// leaks out of range(cov) by more than `leakage` (relative to max(1, |x - mean|)).
double support_logpdf(const Vector& x, const Vector& mean, const Matrix& cov,
                      RankTolerance tol = {}, double leakage = 1e-6);

Matrix symmetrize(const Matrix& s);

/// Symmetrizes and clamps negative eigenvalues to zero.
Matrix clamp_psd(const Matrix& s);

/// Sum of log of the diagonal of a triangular factor with positive diagonal.
double log_diag_sum(const Matrix& triangular);

bool all_finite(const Matrix& a);

}  // namespace gmsmooth

#endif  // GMSMOOTH_LINALG_HPP
