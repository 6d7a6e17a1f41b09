// Reference implementations used to check the backward-forward smoother.
//
// The dense oracle works on the joint Gaussian of x_{0:T}, built by linear
// propagation alone, and conditions it on all observations in one step. It
// never calls into the backward recursion. The classical filters and the
// RTS smoother are included so the smoother can be compared three ways.

#ifndef GMSMOOTH_ORACLE_HPP
#define GMSMOOTH_ORACLE_HPP

#include <optional>
#include <vector>

#include "gmsmooth/gaussian.hpp"
#include "gmsmooth/likelihood.hpp"
#include "gmsmooth/model.hpp"

namespace gmsmooth {

struct JointGaussian {
    std::size_t state_dim = 0;
    std::size_t horizon = 0;
    Vector mean;  // n (T + 1), block t holds x_t
    Matrix cov;
};

/// Prior joint of x_{0:T}. `substitute` replaces a flat initial distribution.
JointGaussian build_joint(const GaussMarkovModel& model,
                          const std::optional<ProperPrior>& substitute = std::nullopt);

struct JointPosterior {
    std::size_t state_dim = 0;
    Vector mean;
    Matrix cov;
    double log_evidence = 0.0;

    GaussianMarginal marginal(std::size_t t) const;
    /// Joint of (x_{t-1}, x_t), 2n-dimensional.
    GaussianMarginal pair(std::size_t t) const;
};

JointPosterior condition_joint(const JointGaussian& joint, const GaussMarkovModel& model);

struct FilterResult {
    std::vector<GaussianMarginal> filtered;   // t = 0..T, entry 0 is the prior
    std::vector<GaussianMarginal> predicted;  // t = 0..T, entry 0 is the prior
    double log_likelihood = 0.0;
};

FilterResult kalman_filter(const GaussMarkovModel& model);

/// Square-root Kalman filter; every marginal carries cov_chol.
FilterResult sqrt_kalman_filter(const GaussMarkovModel& model);

std::vector<GaussianMarginal> rts_smoother(const FilterResult& filter, const GaussMarkovModel& model,
                                           RankTolerance tol = {});

/// Kalman update of a filtering marginal against the pseudo-observation
/// (y_bar, c_bar, I) carried by a likelihood of the future.
GaussianMarginal two_filter_combine(const GaussianMarginal& filter_marginal,
                                    const LogQuadLikelihood& future_lik);

/// Array form of two_filter_combine; needs filter_marginal.cov_chol.
GaussianMarginal two_filter_combine_sqrt(const GaussianMarginal& filter_marginal,
                                         const LogQuadLikelihood& future_lik);

/// Smoothing marginals t = 0..T as filter(t) x h_{t+1:T|t}.
std::vector<GaussianMarginal> two_filter_smoother(const GaussMarkovModel& model, bool square_root = false);

/// Maximum-likelihood estimate of x_t from y_{t:T} (t = 0 uses h_{1:T|0}).
DegenerateGaussian stacked_mle(const BackwardPassResult& backward, std::size_t t, RankTolerance tol = {});
DegenerateGaussian stacked_mle(const GaussMarkovModel& model, std::size_t t, RankTolerance tol = {});

/// log p(y_{first..T} | x_s = x) as an explicit regression
///   y_stack = G x + b + noise,  noise ~ N(0, S),
/// with G, b, S built by propagating the model forward from time s.
class FutureLikelihood {
public:
    FutureLikelihood(const GaussMarkovModel& model, std::size_t s, std::size_t first);

    double log_value(const Vector& x) const;
    std::size_t observation_rows() const { return static_cast<std::size_t>(design_.rows()); }

    const Matrix& design() const { return design_; }
    const Vector& offset() const { return offset_; }
    const Vector& data() const { return data_; }
    const Matrix& noise_chol() const { return noise_chol_; }

private:
    Matrix design_;
    Vector offset_;
    Vector data_;
    Matrix noise_chol_;
};

/// Minimum-norm weighted least squares for x_t on the stacked future data.
DegenerateGaussian stacked_regression_mle(const GaussMarkovModel& model, std::size_t t, RankTolerance tol = {});

}  // namespace gmsmooth

#endif  // GMSMOOTH_ORACLE_HPP
