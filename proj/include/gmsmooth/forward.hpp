// Forward half of the backward-forward smoother: Bayes' rule at t = 0 against
// h_{1:T|0}, then propagation of the smoothing marginals through the
// posterior transition kernels.

#ifndef GMSMOOTH_FORWARD_HPP
#define GMSMOOTH_FORWARD_HPP

#include <optional>
#include <span>
#include <vector>

#include "gmsmooth/gaussian.hpp"
#include "gmsmooth/likelihood.hpp"
#include "gmsmooth/model.hpp"

namespace gmsmooth {

enum class PosteriorKind { Proper, DegenerateOnSupport };

/// log L_{1:T}. `infinite` is set for a prior that is flat on all of R^n.
struct LogEvidence {
    double value = 0.0;
    bool infinite = false;
};

struct InitialPosterior {
    PosteriorKind kind = PosteriorKind::Proper;
    GaussianMarginal marginal;
    std::optional<DegenerateGaussian> support;  // set for the flat priors
    LogEvidence log_likelihood;
    LogQuadLikelihood x0_likelihood;            // h_{1:T|0}
};

struct SmoothingResult {
    std::vector<GaussianMarginal> marginals;       // t = 0..T
    std::vector<PosteriorTransition> transitions;  // t = 1..T
    LogEvidence log_likelihood;
    PosteriorKind initial_kind = PosteriorKind::Proper;
    std::optional<DegenerateGaussian> initial_support;
};

InitialPosterior fuse_initial(const LogQuadLikelihood& lik0, const InitialDistribution& initial,
                              RankTolerance tol = {});

SmoothingResult propagate_marginals(const InitialPosterior& posterior0,
                                    std::vector<PosteriorTransition> transitions);

/// backward_pass + fuse_initial + propagate_marginals.
SmoothingResult smooth(const GaussMarkovModel& model, RankTolerance tol = {});

/// log pi^{1:T}_{0:T}(path). Degenerate pieces are evaluated on their support.
double log_path_posterior(const SmoothingResult& result, std::span<const Vector> path,
                          const GaussMarkovModel& model, RankTolerance tol = {});

}  // namespace gmsmooth

#endif  // GMSMOOTH_FORWARD_HPP
