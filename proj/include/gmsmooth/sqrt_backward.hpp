// Square-root form of the backward-forward smoother. Covariances only ever
// enter through lower-triangular factors; every update is one QR of a
// block pre-array.

#ifndef GMSMOOTH_SQRT_BACKWARD_HPP
#define GMSMOOTH_SQRT_BACKWARD_HPP

#include "gmsmooth/forward.hpp"
#include "gmsmooth/gaussian.hpp"
#include "gmsmooth/likelihood.hpp"
#include "gmsmooth/model.hpp"

namespace gmsmooth {

/// Read-out of the post-array
///
///   [ I          0    ]      [ R_hatᵀ/²  K_hatᵀ     ]
///   [ Fᵀ C_barᵀ  Fᵀ   ]  ->  [ 0         Q_postᵀ/²  ]
///
/// with F the lower factor of the process noise. All three are stored
/// lower-triangular / untransposed.
struct ArrayPredictResult {
    Matrix r_hat_chol;   // m_bar x m_bar
    Matrix gain_hat;     // n x m_bar
    Matrix q_post_chol;  // n x n
};

class MissingFactorError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

ArrayPredictResult array_predict_factors(const LogQuadLikelihood& lik, const Transition& trans);

/// Same outputs as predict_backward, but computed from the array. The
/// returned transition carries cov_post_chol.
BackwardPrediction array_predict_backward(const LogQuadLikelihood& lik, const Transition& trans);

BackwardPassResult sqrt_backward_pass(const GaussMarkovModel& model);

struct SqrtInitialFusion {
    GaussianMarginal posterior;  // with cov_chol
    double log_likelihood = 0.0;
};

SqrtInitialFusion sqrt_fuse_initial(const LogQuadLikelihood& lik0, const ProperPrior& prior);

GaussianMarginal sqrt_propagate_marginal(const GaussianMarginal& prev, const PosteriorTransition& trans_post);

/// Full smoother on factors. Flat priors take their t = 0 moments from the
/// likelihood and factor the resulting covariance once.
SmoothingResult sqrt_smooth(const GaussMarkovModel& model, RankTolerance tol = {});

}  // namespace gmsmooth

#endif  // GMSMOOTH_SQRT_BACKWARD_HPP
