#include "gmsmooth/forward.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace gmsmooth {

namespace {

InitialPosterior fuse_proper(const LogQuadLikelihood& lik0, const ProperPrior& prior) {
    InitialPosterior out;
    out.kind = PosteriorKind::Proper;
    out.x0_likelihood = lik0;
    if (lik0.is_empty()) {
        out.marginal = GaussianMarginal{prior.mean, prior.cov, prior.chol};
        out.log_likelihood.value = lik0.log_c;
        return out;
    }
    const Matrix& c = lik0.c_bar;
    const Eigen::Index mbar = c.rows();
    const Matrix c_sigma = c * prior.cov;
    const Matrix s0 = symmetrize(c_sigma * c.transpose() + Matrix::Identity(mbar, mbar));
    const Matrix s_chol = chol_lower(s0);
    const Matrix half = solve_triangular(s_chol, c_sigma, Triangle::Lower);
    const Matrix gain = solve_triangular(s_chol, half, Triangle::Lower, Side::Left, Op::Transpose).transpose();

    const Vector predicted = c * prior.mean;
    out.marginal.mean = prior.mean + gain * (lik0.y_bar - predicted);
    out.marginal.cov = clamp_psd(prior.cov - gain * c_sigma);
    out.log_likelihood.value = lik0.log_c + 0.5 * static_cast<double>(mbar) * std::log(2.0 * std::numbers::pi) +
                               gaussian_logpdf(lik0.y_bar, predicted, s0);
    return out;
}

InitialPosterior fuse_flat(const LogQuadLikelihood& lik0, bool everywhere, RankTolerance tol) {
    InitialPosterior out;
    out.kind = PosteriorKind::DegenerateOnSupport;
    out.x0_likelihood = lik0;
    DegenerateGaussian moments = likelihood_moments(lik0, tol);
    out.marginal = GaussianMarginal{moments.mean, moments.cov, std::nullopt};
    if (everywhere) {
        out.log_likelihood = LogEvidence{std::numeric_limits<double>::infinity(), true};
    } else {
        out.log_likelihood.value =
            lik0.log_c + 0.5 * pseudo_logdet(2.0 * std::numbers::pi * moments.cov, tol).value;
    }
    out.support = std::move(moments);
    return out;
}

}  // namespace

InitialPosterior fuse_initial(const LogQuadLikelihood& lik0, const InitialDistribution& initial,
                              RankTolerance tol) {
    if (const auto* prior = std::get_if<ProperPrior>(&initial)) {
        if (prior->mean.size() != lik0.c_bar.cols()) {
            throw std::invalid_argument("fuse_initial: prior dimension mismatch");
        }
        return fuse_proper(lik0, *prior);
    }
    return fuse_flat(lik0, std::holds_alternative<FlatEverywhere>(initial), tol);
}

SmoothingResult propagate_marginals(const InitialPosterior& posterior0,
                                    std::vector<PosteriorTransition> transitions) {
    SmoothingResult out;
    out.log_likelihood = posterior0.log_likelihood;
    out.initial_kind = posterior0.kind;
    out.initial_support = posterior0.support;
    out.marginals.reserve(transitions.size() + 1);
    out.marginals.push_back(posterior0.marginal);
    for (const PosteriorTransition& tr : transitions) {
        const GaussianMarginal& prev = out.marginals.back();
        if (tr.phi.cols() != prev.mean.size()) {
            throw std::invalid_argument("propagate_marginals: dimension mismatch");
        }
        GaussianMarginal next;
        next.mean = tr.phi * prev.mean + tr.offset;
        next.cov = symmetrize(tr.phi * prev.cov * tr.phi.transpose() + tr.cov);
        out.marginals.push_back(std::move(next));
    }
    out.transitions = std::move(transitions);
    return out;
}

SmoothingResult smooth(const GaussMarkovModel& model, RankTolerance tol) {
    BackwardPassResult backward = backward_pass(model);
    const InitialPosterior posterior0 = fuse_initial(backward.initial_likelihood(), model.initial, tol);
    return propagate_marginals(posterior0, std::move(backward.transitions));
}

double log_path_posterior(const SmoothingResult& result, std::span<const Vector> path,
                          const GaussMarkovModel& model, RankTolerance tol) {
    if (path.size() != result.marginals.size() || path.size() != model.horizon + 1) {
        throw std::invalid_argument("log_path_posterior: path length must be T+1");
    }
    const GaussianMarginal& first = result.marginals.front();
    double total = support_logpdf(path[0], first.mean, first.cov, tol);
    for (std::size_t t = 1; t < path.size(); ++t) {
        total += result.transitions[t - 1].log_density(path[t], path[t - 1], tol);
    }
    return total;
}

}  // namespace gmsmooth
