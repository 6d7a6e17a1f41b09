#include "gmsmooth/likelihood.hpp"

#include <cmath>
#include <numbers>

namespace gmsmooth {

LogQuadLikelihood LogQuadLikelihood::empty(std::size_t state_dim) {
    return LogQuadLikelihood{0.0, Vector(0), Matrix(0, static_cast<Eigen::Index>(state_dim))};
}

double LogQuadLikelihood::log_value(const Vector& x) const {
    if (x.size() != c_bar.cols()) {
        throw std::invalid_argument("LogQuadLikelihood::log_value: dimension mismatch");
    }
    if (is_empty()) {
        return log_c;
    }
    return log_c - 0.5 * (y_bar - c_bar * x).squaredNorm();
}

double PosteriorTransition::log_density(const Vector& next, const Vector& prev, RankTolerance tol) const {
    return support_logpdf(next, phi * prev + offset, cov, tol);
}

LogQuadLikelihood terminal_init(const ObservationRecord& obs, std::size_t state_dim) {
    if (obs.missing()) {
        return LogQuadLikelihood::empty(state_dim);
    }
    const ObservationModel& om = obs.model;
    if (om.c.cols() != static_cast<Eigen::Index>(state_dim) || obs.value->size() != om.c.rows()) {
        throw std::invalid_argument("terminal_init: dimension mismatch at t=" + std::to_string(obs.time_index));
    }
    const Matrix chol = om.noise_chol.size() > 0 ? om.noise_chol : chol_lower(om.noise_cov);
    const double m = static_cast<double>(om.c.rows());
    LogQuadLikelihood out;
    // -0.5 log|2 pi R| with |R| = prod(diag(chol))^2
    out.log_c = -0.5 * m * std::log(2.0 * std::numbers::pi) - log_diag_sum(chol);
    out.y_bar = solve_triangular(chol, *obs.value, Triangle::Lower);
    out.c_bar = solve_triangular(chol, om.c, Triangle::Lower);
    return out;
}

BackwardPrediction predict_backward(const LogQuadLikelihood& lik, const Transition& trans) {
    const Eigen::Index n = trans.phi.rows();
    if (lik.c_bar.cols() != n || trans.offset.size() != n || trans.noise_cov.rows() != n) {
        throw std::invalid_argument("predict_backward: dimension mismatch");
    }
    if (lik.is_empty()) {
        return {LogQuadLikelihood{lik.log_c, Vector(0), Matrix(0, n)},
                PosteriorTransition{trans.phi, trans.offset, trans.noise_cov, trans.noise_chol}};
    }

    const Matrix& q = trans.noise_cov;
    const Matrix cq = lik.c_bar * q;  // C Q
    const Eigen::Index mbar = lik.c_bar.rows();
    const Matrix r_hat = symmetrize(Matrix::Identity(mbar, mbar) + cq * lik.c_bar.transpose());
    Matrix r_chol;
    try {
        r_chol = chol_lower(r_hat);
    } catch (const FactorizationError& e) {
        throw NumericError(std::string("predict_backward: internal error, I + C Q Cᵀ not PD: ") + e.what());
    }

    const Vector innovation = lik.y_bar - lik.c_bar * trans.offset;
    const Matrix c_phi = lik.c_bar * trans.phi;

    BackwardPrediction out;
    out.likelihood.y_bar = solve_triangular(r_chol, innovation, Triangle::Lower);
    out.likelihood.c_bar = solve_triangular(r_chol, c_phi, Triangle::Lower);
    out.likelihood.log_c = lik.log_c - log_diag_sum(r_chol);

    // gain = Q Cᵀ R_hat^{-1}, obtained from R_hat gainᵀ = C Q
    const Matrix half = solve_triangular(r_chol, cq, Triangle::Lower);
    const Matrix gain_t = solve_triangular(r_chol, half, Triangle::Lower, Side::Left, Op::Transpose);
    const Matrix gain = gain_t.transpose();

    out.transition.phi = trans.phi - gain * c_phi;
    out.transition.offset = trans.offset + gain * innovation;
    out.transition.cov = clamp_psd(q - gain * cq);
    return out;
}

LogQuadLikelihood fuse_observation(const LogQuadLikelihood& lik_prev, const LogQuadLikelihood& obs_lik) {
    const Eigen::Index n = lik_prev.c_bar.cols();
    if (obs_lik.c_bar.cols() != n) {
        throw std::invalid_argument("fuse_observation: state dimension mismatch");
    }
    if (lik_prev.y_bar.size() != lik_prev.c_bar.rows() || obs_lik.y_bar.size() != obs_lik.c_bar.rows()) {
        throw std::invalid_argument("fuse_observation: inconsistent likelihood shapes");
    }
    const double log_c = lik_prev.log_c + obs_lik.log_c;
    if (lik_prev.is_empty()) {
        return LogQuadLikelihood{log_c, obs_lik.y_bar, obs_lik.c_bar};
    }
    if (obs_lik.is_empty()) {
        return LogQuadLikelihood{log_c, lik_prev.y_bar, lik_prev.c_bar};
    }

    const Eigen::Index stacked = lik_prev.c_bar.rows() + obs_lik.c_bar.rows();
    Matrix c_hat(stacked, n);
    c_hat << lik_prev.c_bar, obs_lik.c_bar;
    Vector y_hat(stacked);
    y_hat << lik_prev.y_bar, obs_lik.y_bar;
    if (stacked <= n) {
        return LogQuadLikelihood{log_c, std::move(y_hat), std::move(c_hat)};
    }

    const QrApplied qr = qr_upper_apply(c_hat, y_hat);
    const Vector rotated = qr.qt_b.col(0);
    LogQuadLikelihood out;
    out.c_bar = qr.upper;
    out.y_bar = rotated.head(n);
    out.log_c = log_c - 0.5 * rotated.tail(stacked - n).squaredNorm();
    return out;
}

BackwardPassResult backward_pass(const GaussMarkovModel& model) {
    const std::size_t horizon = model.horizon;
    if (horizon == 0 || model.transitions.size() != horizon || model.observations.size() != horizon) {
        throw std::invalid_argument("backward_pass: model needs horizon >= 1 and matching step lists");
    }
    const std::size_t n = model.state_dim;
    BackwardPassResult out;
    out.given_current.resize(horizon);
    out.given_previous.resize(horizon);
    out.transitions.resize(horizon);

    out.given_current[horizon - 1] = terminal_init(model.observation(horizon), n);
    for (std::size_t t = horizon; t >= 1; --t) {
        BackwardPrediction step = predict_backward(out.given_current[t - 1], model.transition(t));
        out.given_previous[t - 1] = std::move(step.likelihood);
        out.transitions[t - 1] = std::move(step.transition);
        if (t > 1) {
            out.given_current[t - 2] =
                fuse_observation(out.given_previous[t - 1], terminal_init(model.observation(t - 1), n));
        }
    }
    return out;
}

InformationForm to_information(const LogQuadLikelihood& lik) {
    const Eigen::Index n = lik.c_bar.cols();
    if (lik.is_empty()) {
        return {Vector::Zero(n), Matrix::Zero(n, n)};
    }
    return {lik.c_bar.transpose() * lik.y_bar, lik.c_bar.transpose() * lik.c_bar};
}

DegenerateGaussian likelihood_moments(const LogQuadLikelihood& lik, RankTolerance tol) {
    const Eigen::Index n = lik.c_bar.cols();
    DegenerateGaussian out;
    if (lik.is_empty()) {
        out.mean = Vector::Zero(n);
        out.cov = Matrix::Zero(n, n);
        out.support_basis = Matrix(n, 0);
        return out;
    }
    const PseudoInverse pinv = pseudo_inverse(lik.c_bar, tol);
    out.mean = pinv.value * lik.y_bar;
    // (CᵀC)^+ = C^+ (C^+)ᵀ
    out.cov = symmetrize(pinv.value * pinv.value.transpose());
    out.rank = pinv.rank;
    out.support_basis = row_space_basis(lik.c_bar, tol);
    return out;
}

}  // namespace gmsmooth
