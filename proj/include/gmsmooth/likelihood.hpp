// Backward recursion over log-quadratic likelihoods
//
//   h(x) = exp(log_c - 0.5 |y_bar - c_bar x|^2),
//
// with c_bar having at most n rows. Each step alternates a prediction through
// the transition (which also yields the forward posterior kernel) with the
// fusion of the observation at the earlier time.

#ifndef GMSMOOTH_LIKELIHOOD_HPP
#define GMSMOOTH_LIKELIHOOD_HPP

#include <cstddef>
#include <optional>
#include <vector>

#include "gmsmooth/gaussian.hpp"
#include "gmsmooth/linalg.hpp"
#include "gmsmooth/model.hpp"

namespace gmsmooth {

struct LogQuadLikelihood {
    double log_c = 0.0;
    Vector y_bar;  // m_bar
    Matrix c_bar;  // m_bar x n

    /// h = 1 over R^n.
    static LogQuadLikelihood empty(std::size_t state_dim);

    std::size_t rows() const { return static_cast<std::size_t>(c_bar.rows()); }
    std::size_t state_dim() const { return static_cast<std::size_t>(c_bar.cols()); }
    bool is_empty() const { return c_bar.rows() == 0; }

    double log_value(const Vector& x) const;
};

/// Forward kernel x_t | x_{t-1} ~ N(phi x_{t-1} + offset, cov) of the smoothing distribution.
struct PosteriorTransition {
    Matrix phi;
    Vector offset;
    Matrix cov;
    std::optional<Matrix> cov_chol;

    /// Log-density on the affine support; throws OffSupportError off it.
    double log_density(const Vector& next, const Vector& prev, RankTolerance tol = {}) const;
};

struct BackwardPrediction {
    LogQuadLikelihood likelihood;  // over x_{t-1}
    PosteriorTransition transition;
};

/// Index t-1 of every list refers to time t.
struct BackwardPassResult {
    std::vector<LogQuadLikelihood> given_current;   // h_{t:T|t}
    std::vector<LogQuadLikelihood> given_previous;  // h_{t:T|t-1}
    std::vector<PosteriorTransition> transitions;   // pi^{t:T}_{t|t-1}

    std::size_t horizon() const { return given_current.size(); }
    /// h_{1:T|0}, the likelihood of all data as a function of x_0.
    const LogQuadLikelihood& initial_likelihood() const { return given_previous.front(); }
};

/// Whitened single-observation likelihood; the empty likelihood when missing.
LogQuadLikelihood terminal_init(const ObservationRecord& obs, std::size_t state_dim);

BackwardPrediction predict_backward(const LogQuadLikelihood& lik, const Transition& trans);

/// Product of two likelihoods over the same state. Rows of `obs_lik` go below
/// those of `lik_prev`; the stack is QR-compressed to n rows once it exceeds n.
LogQuadLikelihood fuse_observation(const LogQuadLikelihood& lik_prev, const LogQuadLikelihood& obs_lik);

BackwardPassResult backward_pass(const GaussMarkovModel& model);

struct InformationForm {
    Vector xi;
    Matrix lambda;
};

InformationForm to_information(const LogQuadLikelihood& lik);

/// Minimum-norm maximizer of h together with the pseudo-inverse of c_barᵀ c_bar.
DegenerateGaussian likelihood_moments(const LogQuadLikelihood& lik, RankTolerance tol = {});

}  // namespace gmsmooth

#endif  // GMSMOOTH_LIKELIHOOD_HPP
