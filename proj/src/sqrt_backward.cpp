#include "gmsmooth/sqrt_backward.hpp"

namespace gmsmooth {

namespace {

struct ArrayFactors {
    Matrix top_lower;     // m x m
    Matrix gain_hat;      // n x m
    Matrix bottom_lower;  // n x n
};

// QR of [[I, 0], [Fᵀ Cᵀ, Fᵀ]] for an m x n matrix C and a square factor F.
ArrayFactors whitened_array(const Matrix& c, const Matrix& factor) {
    const Eigen::Index m = c.rows();
    const Eigen::Index n = c.cols();
    Matrix pre = Matrix::Zero(m + n, m + n);
    pre.topLeftCorner(m, m).setIdentity();
    pre.bottomLeftCorner(n, m) = factor.transpose() * c.transpose();
    pre.bottomRightCorner(n, n) = factor.transpose();
    const Matrix post = qr_upper_factor(pre);
    return {post.topLeftCorner(m, m).transpose(), post.topRightCorner(m, n).transpose(),
            post.bottomRightCorner(n, n).transpose()};
}

const Matrix& require_factor(const std::optional<Matrix>& f, const char* who) {
    if (!f) {
        throw MissingFactorError(std::string(who) + ": covariance factor required");
    }
    return *f;
}

}  // namespace

ArrayPredictResult array_predict_factors(const LogQuadLikelihood& lik, const Transition& trans) {
    const Matrix& factor = require_factor(trans.noise_chol, "array_predict_factors");
    if (lik.c_bar.cols() != trans.phi.rows() || factor.rows() != trans.phi.rows()) {
        throw std::invalid_argument("array_predict_factors: dimension mismatch");
    }
    if (lik.is_empty()) {
        const Eigen::Index n = trans.phi.rows();
        return {Matrix(0, 0), Matrix(n, 0), factor};
    }
    ArrayFactors a = whitened_array(lik.c_bar, factor);
    return {std::move(a.top_lower), std::move(a.gain_hat), std::move(a.bottom_lower)};
}

BackwardPrediction array_predict_backward(const LogQuadLikelihood& lik, const Transition& trans) {
    const ArrayPredictResult f = array_predict_factors(lik, trans);
    const Eigen::Index n = trans.phi.rows();
    if (lik.is_empty()) {
        return {LogQuadLikelihood{lik.log_c, Vector(0), Matrix(0, n)},
                PosteriorTransition{trans.phi, trans.offset, trans.noise_cov, f.q_post_chol}};
    }
    BackwardPrediction out;
    out.likelihood.y_bar =
        solve_triangular(f.r_hat_chol, lik.y_bar - lik.c_bar * trans.offset, Triangle::Lower);
    out.likelihood.c_bar = solve_triangular(f.r_hat_chol, lik.c_bar * trans.phi, Triangle::Lower);
    out.likelihood.log_c = lik.log_c - log_diag_sum(f.r_hat_chol);

    // the gain multiplies the already-whitened quantities at t-1
    out.transition.phi = trans.phi - f.gain_hat * out.likelihood.c_bar;
    out.transition.offset = trans.offset + f.gain_hat * out.likelihood.y_bar;
    out.transition.cov = f.q_post_chol * f.q_post_chol.transpose();
    out.transition.cov_chol = f.q_post_chol;
    return out;
}

BackwardPassResult sqrt_backward_pass(const GaussMarkovModel& model) {
    const std::size_t horizon = model.horizon;
    if (horizon == 0 || model.transitions.size() != horizon || model.observations.size() != horizon) {
        throw std::invalid_argument("sqrt_backward_pass: model needs horizon >= 1 and matching step lists");
    }
    const std::size_t n = model.state_dim;
    BackwardPassResult out;
    out.given_current.resize(horizon);
    out.given_previous.resize(horizon);
    out.transitions.resize(horizon);

    out.given_current[horizon - 1] = terminal_init(model.observation(horizon), n);
    for (std::size_t t = horizon; t >= 1; --t) {
        BackwardPrediction step = array_predict_backward(out.given_current[t - 1], model.transition(t));
        out.given_previous[t - 1] = std::move(step.likelihood);
        out.transitions[t - 1] = std::move(step.transition);
        if (t > 1) {
            out.given_current[t - 2] =
                fuse_observation(out.given_previous[t - 1], terminal_init(model.observation(t - 1), n));
        }
    }
    return out;
}

SqrtInitialFusion sqrt_fuse_initial(const LogQuadLikelihood& lik0, const ProperPrior& prior) {
    const Matrix& factor = require_factor(prior.chol, "sqrt_fuse_initial");
    if (lik0.c_bar.cols() != prior.mean.size()) {
        throw std::invalid_argument("sqrt_fuse_initial: dimension mismatch");
    }
    SqrtInitialFusion out;
    if (lik0.is_empty()) {
        out.posterior = GaussianMarginal{prior.mean, prior.cov, factor};
        out.log_likelihood = lik0.log_c;
        return out;
    }
    const ArrayFactors a = whitened_array(lik0.c_bar, factor);
    const Vector white = solve_triangular(a.top_lower, lik0.y_bar - lik0.c_bar * prior.mean, Triangle::Lower);
    out.posterior.mean = prior.mean + a.gain_hat * white;
    out.posterior.cov = a.bottom_lower * a.bottom_lower.transpose();
    out.posterior.cov_chol = a.bottom_lower;
    // log_c + (m/2) log 2pi + log N(y; C mu, S) with the 2pi terms cancelling
    out.log_likelihood = lik0.log_c - log_diag_sum(a.top_lower) - 0.5 * white.squaredNorm();
    return out;
}

GaussianMarginal sqrt_propagate_marginal(const GaussianMarginal& prev, const PosteriorTransition& trans_post) {
    const Matrix& prev_factor = require_factor(prev.cov_chol, "sqrt_propagate_marginal");
    const Matrix& q_factor = require_factor(trans_post.cov_chol, "sqrt_propagate_marginal");
    const Eigen::Index n = trans_post.phi.rows();
    Matrix pre(prev_factor.cols() + q_factor.cols(), n);
    pre << (trans_post.phi * prev_factor).transpose(), q_factor.transpose();
    const Matrix upper = qr_upper_factor(pre);
    GaussianMarginal out;
    out.mean = trans_post.phi * prev.mean + trans_post.offset;
    out.cov_chol = Matrix(upper.topRows(n).transpose());
    out.cov = *out.cov_chol * out.cov_chol->transpose();
    return out;
}

SmoothingResult sqrt_smooth(const GaussMarkovModel& model, RankTolerance tol) {
    BackwardPassResult backward = sqrt_backward_pass(model);
    InitialPosterior posterior0;
    if (const auto* prior = std::get_if<ProperPrior>(&model.initial)) {
        const SqrtInitialFusion fused = sqrt_fuse_initial(backward.initial_likelihood(), *prior);
        posterior0.kind = PosteriorKind::Proper;
        posterior0.marginal = fused.posterior;
        posterior0.log_likelihood.value = fused.log_likelihood;
        posterior0.x0_likelihood = backward.initial_likelihood();
    } else {
        posterior0 = fuse_initial(backward.initial_likelihood(), model.initial, tol);
        posterior0.marginal.cov_chol = psd_factor_lower(posterior0.marginal.cov, tol);
    }

    SmoothingResult out;
    out.log_likelihood = posterior0.log_likelihood;
    out.initial_kind = posterior0.kind;
    out.initial_support = posterior0.support;
    out.marginals.reserve(model.horizon + 1);
    out.marginals.push_back(posterior0.marginal);
    for (const PosteriorTransition& tr : backward.transitions) {
        out.marginals.push_back(sqrt_propagate_marginal(out.marginals.back(), tr));
    }
    out.transitions = std::move(backward.transitions);
    return out;
}

}  // namespace gmsmooth
