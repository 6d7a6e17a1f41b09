#include "gmsmooth/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace gmsmooth {

RankTolerance::RankTolerance(double threshold) : relative_threshold(threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw std::invalid_argument("rank tolerance must lie in (0, 1)");
    }
}

FactorizationError::FactorizationError(std::size_t pivot, const std::string& what)
    : NumericError(what), pivot_(pivot) {}

bool all_finite(const Matrix& a) {
    return a.size() == 0 || a.allFinite();
}

namespace {

void require_finite(const Matrix& a, const char* who) {
    if (!all_finite(a)) {
        throw NumericError(std::string(who) + ": non-finite input entry");
    }
}

// Negates row i of `upper` (and the matching column of q / row of qt_b) when
// the diagonal entry is negative.
template <typename Fn>
void force_nonnegative_diagonal(Matrix& upper, Fn&& flip) {
    const Eigen::Index r = std::min(upper.rows(), upper.cols());
    for (Eigen::Index i = 0; i < r; ++i) {
        if (upper(i, i) < 0.0) {
            upper.row(i) *= -1.0;
            flip(i);
        }
    }
}

Matrix extract_upper(const Eigen::HouseholderQR<Matrix>& qr, Eigen::Index r, Eigen::Index k) {
    Matrix upper = qr.matrixQR().topRows(r);
    for (Eigen::Index j = 0; j < k; ++j) {
        for (Eigen::Index i = j + 1; i < r; ++i) {
            upper(i, j) = 0.0;
        }
    }
    return upper;
}

}  // namespace

QrFactors qr_upper(const Matrix& a) {
    if (a.rows() < 1) {
        throw std::invalid_argument("qr_upper: matrix needs at least one row");
    }
    require_finite(a, "qr_upper");
    const Eigen::Index m = a.rows();
    const Eigen::Index k = a.cols();
    const Eigen::Index r = std::min(m, k);
    Eigen::HouseholderQR<Matrix> qr(a);
    QrFactors out;
    out.upper = extract_upper(qr, r, k);
    out.q = qr.householderQ() * Matrix::Identity(m, r);
    force_nonnegative_diagonal(out.upper, [&](Eigen::Index i) { out.q.col(i) *= -1.0; });
    return out;
}

Matrix qr_upper_factor(const Matrix& a) {
    if (a.rows() < 1) {
        throw std::invalid_argument("qr_upper_factor: matrix needs at least one row");
    }
    require_finite(a, "qr_upper_factor");
    const Eigen::Index r = std::min(a.rows(), a.cols());
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix upper = extract_upper(qr, r, a.cols());
    force_nonnegative_diagonal(upper, [](Eigen::Index) {});
    return upper;
}

QrApplied qr_upper_apply(const Matrix& a, const Matrix& b) {
    if (a.rows() < 1) {
        throw std::invalid_argument("qr_upper_apply: matrix needs at least one row");
    }
    if (b.rows() != a.rows()) {
        throw std::invalid_argument("qr_upper_apply: row mismatch");
    }
    require_finite(a, "qr_upper_apply");
    require_finite(b, "qr_upper_apply");
    const Eigen::Index r = std::min(a.rows(), a.cols());
    Eigen::HouseholderQR<Matrix> qr(a);
    QrApplied out;
    out.upper = extract_upper(qr, r, a.cols());
    out.qt_b = qr.householderQ().transpose() * b;
    force_nonnegative_diagonal(out.upper, [&](Eigen::Index i) { out.qt_b.row(i) *= -1.0; });
    return out;
}

Matrix chol_lower(const Matrix& s) {
    if (s.rows() != s.cols()) {
        throw std::invalid_argument("chol_lower: matrix must be square");
    }
    require_finite(s, "chol_lower");
    const Eigen::Index n = s.rows();
    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double pivot = s(j, j) - l.row(j).head(j).squaredNorm();
        if (!(pivot > 0.0)) {
            throw FactorizationError(static_cast<std::size_t>(j),
                                     "chol_lower: non-positive pivot at index " + std::to_string(j));
        }
        const double d = std::sqrt(pivot);
        l(j, j) = d;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            l(i, j) = (s(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / d;
        }
    }
    return l;
}

Matrix psd_factor_lower(const Matrix& s, RankTolerance tol) {
    if (s.rows() != s.cols()) {
        throw std::invalid_argument("psd_factor_lower: matrix must be square");
    }
    const Eigen::Index n = s.rows();
    if (n == 0) {
        return Matrix(0, 0);
    }
    require_finite(s, "psd_factor_lower");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(s));
    Vector lambda = eig.eigenvalues();
    const double scale = lambda.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
        return Matrix::Zero(n, n);
    }
    if (lambda.minCoeff() < -tol.relative_threshold * scale) {
        throw NotPsdError("psd_factor_lower: matrix has a significantly negative eigenvalue");
    }
    lambda = lambda.cwiseMax(0.0);
    const Matrix root = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
    return qr_upper_factor(root.transpose()).transpose();
}

Matrix solve_triangular(const Matrix& t, const Matrix& b, Triangle tri, Side side, Op op) {
    if (t.rows() != t.cols()) {
        throw std::invalid_argument("solve_triangular: factor must be square");
    }
    const bool left = side == Side::Left;
    if ((left && b.rows() != t.rows()) || (!left && b.cols() != t.cols())) {
        throw std::invalid_argument("solve_triangular: dimension mismatch");
    }
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
        if (t(i, i) == 0.0) {
            throw NumericError("solve_triangular: zero diagonal element at index " + std::to_string(i));
        }
    }
    Matrix x = b;
    if (t.rows() == 0) {
        return x;
    }
    // op(t) for a lower factor is lower when not transposed, upper when transposed.
    const bool effective_lower = (tri == Triangle::Lower) == (op == Op::None);
    const Matrix lhs = op == Op::None ? t : Matrix(t.transpose());
    if (effective_lower) {
        if (left) {
            lhs.triangularView<Eigen::Lower>().solveInPlace(x);
        } else {
            lhs.triangularView<Eigen::Lower>().solveInPlace<Eigen::OnTheRight>(x);
        }
    } else {
        if (left) {
            lhs.triangularView<Eigen::Upper>().solveInPlace(x);
        } else {
            lhs.triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(x);
        }
    }
    return x;
}

PseudoInverse pseudo_inverse(const Matrix& a, RankTolerance tol) {
    require_finite(a, "pseudo_inverse");
    PseudoInverse out;
    out.value = Matrix::Zero(a.cols(), a.rows());
    if (a.size() == 0) {
        return out;
    }
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sigma = svd.singularValues();
    const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
    if (sigma_max == 0.0) {
        return out;
    }
    const double cut = tol.relative_threshold * sigma_max;
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma(i) > cut) {
            out.value.noalias() += svd.matrixV().col(i) * (svd.matrixU().col(i).transpose() / sigma(i));
            ++out.rank;
        }
    }
    return out;
}

Matrix row_space_basis(const Matrix& a, RankTolerance tol) {
    require_finite(a, "row_space_basis");
    if (a.rows() == 0 || a.cols() == 0) {
        return Matrix(a.cols(), 0);
    }
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
    const Vector& sigma = svd.singularValues();
    const double sigma_max = sigma(0);
    Eigen::Index rank = 0;
    if (sigma_max > 0.0) {
        const double cut = tol.relative_threshold * sigma_max;
        while (rank < sigma.size() && sigma(rank) > cut) {
            ++rank;
        }
    }
    return svd.matrixV().leftCols(rank);
}

PseudoLogDet pseudo_logdet(const Matrix& s, RankTolerance tol) {
    if (s.rows() != s.cols()) {
        throw std::invalid_argument("pseudo_logdet: matrix must be square");
    }
    require_finite(s, "pseudo_logdet");
    PseudoLogDet out;
    if (s.rows() == 0) {
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(s), Eigen::EigenvaluesOnly);
    const Vector& lambda = eig.eigenvalues();
    const double scale = lambda.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
        return out;
    }
    if (lambda.minCoeff() < -tol.relative_threshold * scale) {
        throw NotPsdError("pseudo_logdet: matrix is not positive semi-definite");
    }
    const double cut = tol.relative_threshold * scale;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda(i) > cut) {
            out.value += std::log(lambda(i));
            ++out.rank;
        }
    }
    return out;
}

double gaussian_logpdf(const Vector& x, const Vector& mean, const Matrix& cov) {
    if (x.size() != mean.size() || cov.rows() != x.size() || cov.cols() != x.size()) {
        throw std::invalid_argument("gaussian_logpdf: dimension mismatch");
    }
    const Matrix l = chol_lower(cov);
    const Vector z = solve_triangular(l, x - mean, Triangle::Lower);
    const double k = static_cast<double>(x.size());
    return -0.5 * k * std::log(2.0 * std::numbers::pi) - log_diag_sum(l) - 0.5 * z.squaredNorm();
}

double support_logpdf(const Vector& x, const Vector& mean, const Matrix& cov, RankTolerance tol,
                      double leakage) {
    if (x.size() != mean.size() || cov.rows() != x.size() || cov.cols() != x.size()) {
        throw std::invalid_argument("support_logpdf: dimension mismatch");
    }
    const Vector d = x - mean;
    if (x.size() == 0) {
        return 0.0;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(cov));
    const Vector& lambda = eig.eigenvalues();
    const double scale = lambda.cwiseAbs().maxCoeff();
    if (scale > 0.0 && lambda.minCoeff() < -tol.relative_threshold * scale) {
        throw NotPsdError("support_logpdf: covariance is not positive semi-definite");
    }
    const double cut = tol.relative_threshold * scale;
    double quad = 0.0;
    double logdet = 0.0;
    std::size_t rank = 0;
    Vector in_range = Vector::Zero(d.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (scale > 0.0 && lambda(i) > cut) {
            const auto v = eig.eigenvectors().col(i);
            const double proj = v.dot(d);
            in_range += proj * v;
            quad += proj * proj / lambda(i);
            logdet += std::log(lambda(i));
            ++rank;
        }
    }
    if ((d - in_range).norm() > leakage * std::max(1.0, d.norm())) {
        throw OffSupportError("support_logpdf: point lies outside the affine support");
    }
    return -0.5 * static_cast<double>(rank) * std::log(2.0 * std::numbers::pi) - 0.5 * logdet - 0.5 * quad;
}

Matrix symmetrize(const Matrix& s) {
    return 0.5 * (s + s.transpose());
}

Matrix clamp_psd(const Matrix& s) {
    Matrix sym = symmetrize(s);
    if (sym.rows() == 0) {
        return sym;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    if (eig.eigenvalues().minCoeff() >= 0.0) {
        return sym;
    }
    const Vector clamped = eig.eigenvalues().cwiseMax(0.0);
    return symmetrize(eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose());
}

double log_diag_sum(const Matrix& triangular) {
    return triangular.diagonal().array().log().sum();
}

}  // namespace gmsmooth
