#ifndef GMSMOOTH_GAUSSIAN_HPP
#define GMSMOOTH_GAUSSIAN_HPP

#include <cstddef>
#include <optional>

#include "gmsmooth/linalg.hpp"

namespace gmsmooth {

/// Mean/covariance pair, optionally carrying a lower-triangular covariance factor.
struct GaussianMarginal {
    Vector mean;
    Matrix cov;
    std::optional<Matrix> cov_chol;
};

/// Gaussian living on the affine set mean + range(cov). `mean` is the
/// minimum-norm representative and `support_basis` has orthonormal columns.
struct DegenerateGaussian {
    Vector mean;
    Matrix cov;
    std::size_t rank = 0;
    Matrix support_basis;
};

}  // namespace gmsmooth

#endif  // GMSMOOTH_GAUSSIAN_HPP
