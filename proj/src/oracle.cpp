#include "gmsmooth/oracle.hpp"

#include <cmath>
#include <numbers>

namespace gmsmooth {

namespace {

const ProperPrior& require_proper(const GaussMarkovModel& model, const char* who) {
    const auto* prior = std::get_if<ProperPrior>(&model.initial);
    if (!prior) {
        throw ModelError(std::string(who) + ": needs a proper initial distribution");
    }
    return *prior;
}

struct StackedObservations {
    Matrix selector;  // M x n(T + 1 - s)
    Matrix noise;     // M x M block diagonal
    Vector values;    // M
};

// Rows for every non-missing observation at times first..T, with state blocks
// counted from time s.
StackedObservations stack_observations(const GaussMarkovModel& model, std::size_t s, std::size_t first) {
    const auto n = static_cast<Eigen::Index>(model.state_dim);
    const auto blocks = static_cast<Eigen::Index>(model.horizon + 1 - s);
    Eigen::Index rows = 0;
    for (std::size_t t = std::max<std::size_t>(first, 1); t <= model.horizon; ++t) {
        if (!model.observation(t).missing()) {
            rows += model.observation(t).model.c.rows();
        }
    }
    StackedObservations out{Matrix::Zero(rows, n * blocks), Matrix::Zero(rows, rows), Vector(rows)};
    Eigen::Index row = 0;
    for (std::size_t t = std::max<std::size_t>(first, 1); t <= model.horizon; ++t) {
        const ObservationRecord& rec = model.observation(t);
        if (rec.missing()) {
            continue;
        }
        const Eigen::Index m = rec.model.c.rows();
        out.selector.block(row, n * static_cast<Eigen::Index>(t - s), m, n) = rec.model.c;
        out.noise.block(row, row, m, m) = rec.model.noise_cov;
        out.values.segment(row, m) = *rec.value;
        row += m;
    }
    return out;
}

// Mean and covariance of x_{s..T} started from N(mean0, cov0) at time s.
void propagate_joint(const GaussMarkovModel& model, std::size_t s, const Vector& mean0, const Matrix& cov0,
                     Vector& mean, Matrix& cov) {
    const auto n = static_cast<Eigen::Index>(model.state_dim);
    const auto blocks = static_cast<Eigen::Index>(model.horizon + 1 - s);
    mean = Vector::Zero(n * blocks);
    cov = Matrix::Zero(n * blocks, n * blocks);
    mean.head(n) = mean0;
    cov.topLeftCorner(n, n) = cov0;
    for (Eigen::Index k = 1; k < blocks; ++k) {
        const Transition& tr = model.transition(s + static_cast<std::size_t>(k));
        mean.segment(n * k, n) = tr.phi * mean.segment(n * (k - 1), n) + tr.offset;
        // Cov(x_j, x_k) = Cov(x_j, x_{k-1}) phiᵀ for j < k
        for (Eigen::Index j = 0; j < k; ++j) {
            cov.block(n * j, n * k, n, n) = cov.block(n * j, n * (k - 1), n, n) * tr.phi.transpose();
            cov.block(n * k, n * j, n, n) = cov.block(n * j, n * k, n, n).transpose();
        }
        cov.block(n * k, n * k, n, n) =
            symmetrize(tr.phi * cov.block(n * (k - 1), n * (k - 1), n, n) * tr.phi.transpose() + tr.noise_cov);
    }
}

struct ArrayOut {
    Matrix top_lower;
    Matrix gain_hat;
    Matrix bottom_lower;
};

// QR of [[Aᵀ, 0], [Fᵀ Cᵀ, Fᵀ]] with A the lower factor of the observation noise.
ArrayOut measurement_array(const Matrix& obs_factor, const Matrix& c, const Matrix& factor) {
    const Eigen::Index m = c.rows();
    const Eigen::Index n = c.cols();
    Matrix pre = Matrix::Zero(m + n, m + n);
    pre.topLeftCorner(m, m) = obs_factor.transpose();
    pre.bottomLeftCorner(n, m) = factor.transpose() * c.transpose();
    pre.bottomRightCorner(n, n) = factor.transpose();
    const Matrix post = qr_upper_factor(pre);
    return {post.topLeftCorner(m, m).transpose(), post.topRightCorner(m, n).transpose(),
            post.bottomRightCorner(n, n).transpose()};
}

Matrix stacked_factor(const Matrix& a, const Matrix& b) {
    Matrix pre(a.cols() + b.cols(), a.rows());
    pre << a.transpose(), b.transpose();
    return qr_upper_factor(pre).topRows(a.rows()).transpose();
}

}  // namespace

JointGaussian build_joint(const GaussMarkovModel& model, const std::optional<ProperPrior>& substitute) {
    const ProperPrior* prior = substitute ? &*substitute : std::get_if<ProperPrior>(&model.initial);
    if (!prior) {
        throw ModelError("build_joint: flat initial distribution needs a substitute prior");
    }
    JointGaussian out;
    out.state_dim = model.state_dim;
    out.horizon = model.horizon;
    propagate_joint(model, 0, prior->mean, prior->cov, out.mean, out.cov);
    return out;
}

GaussianMarginal JointPosterior::marginal(std::size_t t) const {
    const auto n = static_cast<Eigen::Index>(state_dim);
    const auto k = static_cast<Eigen::Index>(t);
    return GaussianMarginal{mean.segment(n * k, n), cov.block(n * k, n * k, n, n), std::nullopt};
}

GaussianMarginal JointPosterior::pair(std::size_t t) const {
    const auto n = static_cast<Eigen::Index>(state_dim);
    const auto k = static_cast<Eigen::Index>(t - 1);
    return GaussianMarginal{mean.segment(n * k, 2 * n), cov.block(n * k, n * k, 2 * n, 2 * n), std::nullopt};
}

JointPosterior condition_joint(const JointGaussian& joint, const GaussMarkovModel& model) {
    JointPosterior out;
    out.state_dim = joint.state_dim;
    out.mean = joint.mean;
    out.cov = joint.cov;
    const StackedObservations obs = stack_observations(model, 0, 1);
    if (obs.values.size() == 0) {
        return out;
    }
    const Matrix& h = obs.selector;
    const Matrix ph = joint.cov * h.transpose();
    const Matrix s = symmetrize(h * ph + obs.noise);
    const Matrix l = chol_lower(s);
    const Vector predicted = h * joint.mean;
    const Matrix half = solve_triangular(l, ph.transpose(), Triangle::Lower);
    const Matrix gain = solve_triangular(l, half, Triangle::Lower, Side::Left, Op::Transpose).transpose();
    out.mean = joint.mean + gain * (obs.values - predicted);
    out.cov = symmetrize(joint.cov - gain * ph.transpose());
    out.log_evidence = gaussian_logpdf(obs.values, predicted, s);
    return out;
}

FilterResult kalman_filter(const GaussMarkovModel& model) {
    const ProperPrior& prior = require_proper(model, "kalman_filter");
    FilterResult out;
    out.filtered.push_back({prior.mean, prior.cov, std::nullopt});
    out.predicted.push_back(out.filtered.back());
    for (std::size_t t = 1; t <= model.horizon; ++t) {
        const Transition& tr = model.transition(t);
        const GaussianMarginal& prev = out.filtered.back();
        GaussianMarginal pred{tr.phi * prev.mean + tr.offset,
                              symmetrize(tr.phi * prev.cov * tr.phi.transpose() + tr.noise_cov), std::nullopt};
        out.predicted.push_back(pred);

        const ObservationRecord& rec = model.observation(t);
        if (rec.missing()) {
            out.filtered.push_back(std::move(pred));
            continue;
        }
        const Matrix& c = rec.model.c;
        const Matrix pc = pred.cov * c.transpose();
        const Matrix s = symmetrize(c * pc + rec.model.noise_cov);
        const Matrix l = chol_lower(s);
        const Vector y_pred = c * pred.mean;
        const Matrix half = solve_triangular(l, pc.transpose(), Triangle::Lower);
        const Matrix gain = solve_triangular(l, half, Triangle::Lower, Side::Left, Op::Transpose).transpose();
        out.log_likelihood += gaussian_logpdf(*rec.value, y_pred, s);
        out.filtered.push_back({pred.mean + gain * (*rec.value - y_pred),
                                symmetrize(pred.cov - gain * pc.transpose()), std::nullopt});
    }
    return out;
}

FilterResult sqrt_kalman_filter(const GaussMarkovModel& model) {
    const ProperPrior& prior = require_proper(model, "sqrt_kalman_filter");
    const Matrix prior_factor = prior.chol ? *prior.chol : psd_factor_lower(prior.cov);
    FilterResult out;
    out.filtered.push_back({prior.mean, prior_factor * prior_factor.transpose(), prior_factor});
    out.predicted.push_back(out.filtered.back());
    for (std::size_t t = 1; t <= model.horizon; ++t) {
        const Transition& tr = model.transition(t);
        const GaussianMarginal& prev = out.filtered.back();
        const Matrix q_factor = tr.noise_chol ? *tr.noise_chol : psd_factor_lower(tr.noise_cov);
        const Matrix pred_factor = stacked_factor(tr.phi * *prev.cov_chol, q_factor);
        GaussianMarginal pred{tr.phi * prev.mean + tr.offset, pred_factor * pred_factor.transpose(), pred_factor};
        out.predicted.push_back(pred);

        const ObservationRecord& rec = model.observation(t);
        if (rec.missing()) {
            out.filtered.push_back(std::move(pred));
            continue;
        }
        const Matrix r_factor = rec.model.noise_chol.size() > 0 ? rec.model.noise_chol : chol_lower(rec.model.noise_cov);
        const ArrayOut a = measurement_array(r_factor, rec.model.c, pred_factor);
        const Vector white = solve_triangular(a.top_lower, *rec.value - rec.model.c * pred.mean, Triangle::Lower);
        out.log_likelihood += -0.5 * static_cast<double>(white.size()) * std::log(2.0 * std::numbers::pi) -
                              log_diag_sum(a.top_lower) - 0.5 * white.squaredNorm();
        out.filtered.push_back({pred.mean + a.gain_hat * white, a.bottom_lower * a.bottom_lower.transpose(),
                                a.bottom_lower});
    }
    return out;
}

std::vector<GaussianMarginal> rts_smoother(const FilterResult& filter, const GaussMarkovModel& model,
                                           RankTolerance tol) {
    const std::size_t horizon = model.horizon;
    if (filter.filtered.size() != horizon + 1 || filter.predicted.size() != horizon + 1) {
        throw std::invalid_argument("rts_smoother: filter output does not match the model horizon");
    }
    std::vector<GaussianMarginal> out(horizon + 1);
    out[horizon] = {filter.filtered[horizon].mean, filter.filtered[horizon].cov, std::nullopt};
    for (std::size_t t = horizon; t-- > 0;) {
        const Transition& tr = model.transition(t + 1);
        const GaussianMarginal& f = filter.filtered[t];
        const GaussianMarginal& pred = filter.predicted[t + 1];
        const Matrix gain = f.cov * tr.phi.transpose() * pseudo_inverse(pred.cov, tol).value;
        out[t].mean = f.mean + gain * (out[t + 1].mean - pred.mean);
        out[t].cov = symmetrize(f.cov + gain * (out[t + 1].cov - pred.cov) * gain.transpose());
    }
    return out;
}

GaussianMarginal two_filter_combine(const GaussianMarginal& filter_marginal, const LogQuadLikelihood& future_lik) {
    if (future_lik.c_bar.cols() != filter_marginal.mean.size()) {
        throw std::invalid_argument("two_filter_combine: dimension mismatch");
    }
    if (future_lik.is_empty()) {
        return filter_marginal;
    }
    const Matrix& c = future_lik.c_bar;
    const Matrix pc = filter_marginal.cov * c.transpose();
    const Matrix s = symmetrize(c * pc + Matrix::Identity(c.rows(), c.rows()));
    const Matrix l = chol_lower(s);
    const Matrix half = solve_triangular(l, pc.transpose(), Triangle::Lower);
    const Matrix gain = solve_triangular(l, half, Triangle::Lower, Side::Left, Op::Transpose).transpose();
    return {filter_marginal.mean + gain * (future_lik.y_bar - c * filter_marginal.mean),
            symmetrize(filter_marginal.cov - gain * pc.transpose()), std::nullopt};
}

GaussianMarginal two_filter_combine_sqrt(const GaussianMarginal& filter_marginal,
                                         const LogQuadLikelihood& future_lik) {
    if (!filter_marginal.cov_chol) {
        throw std::invalid_argument("two_filter_combine_sqrt: covariance factor required");
    }
    if (future_lik.c_bar.cols() != filter_marginal.mean.size()) {
        throw std::invalid_argument("two_filter_combine_sqrt: dimension mismatch");
    }
    if (future_lik.is_empty()) {
        return filter_marginal;
    }
    const Eigen::Index m = future_lik.c_bar.rows();
    const ArrayOut a = measurement_array(Matrix::Identity(m, m), future_lik.c_bar, *filter_marginal.cov_chol);
    const Vector white = solve_triangular(a.top_lower, future_lik.y_bar - future_lik.c_bar * filter_marginal.mean,
                                          Triangle::Lower);
    return {filter_marginal.mean + a.gain_hat * white, a.bottom_lower * a.bottom_lower.transpose(), a.bottom_lower};
}

std::vector<GaussianMarginal> two_filter_smoother(const GaussMarkovModel& model, bool square_root) {
    const FilterResult filter = square_root ? sqrt_kalman_filter(model) : kalman_filter(model);
    const BackwardPassResult backward = backward_pass(model);
    std::vector<GaussianMarginal> out;
    out.reserve(model.horizon + 1);
    for (std::size_t t = 0; t <= model.horizon; ++t) {
        const LogQuadLikelihood future =
            t < model.horizon ? backward.given_previous[t] : LogQuadLikelihood::empty(model.state_dim);
        out.push_back(square_root ? two_filter_combine_sqrt(filter.filtered[t], future)
                                  : two_filter_combine(filter.filtered[t], future));
    }
    return out;
}

DegenerateGaussian stacked_mle(const BackwardPassResult& backward, std::size_t t, RankTolerance tol) {
    if (t > backward.horizon()) {
        throw std::out_of_range("stacked_mle: time index beyond horizon");
    }
    return likelihood_moments(t == 0 ? backward.initial_likelihood() : backward.given_current[t - 1], tol);
}

DegenerateGaussian stacked_mle(const GaussMarkovModel& model, std::size_t t, RankTolerance tol) {
    return stacked_mle(backward_pass(model), t, tol);
}

FutureLikelihood::FutureLikelihood(const GaussMarkovModel& model, std::size_t s, std::size_t first) {
    if (s > model.horizon || first < s || first > s + 1) {
        throw std::invalid_argument("FutureLikelihood: need s <= T and first in {s, s+1}");
    }
    const auto n = static_cast<Eigen::Index>(model.state_dim);
    const auto blocks = static_cast<Eigen::Index>(model.horizon + 1 - s);

    // noise part: x_s fixed, so start from a zero covariance
    Vector unused_mean;
    Matrix noise_cov;
    propagate_joint(model, s, Vector::Zero(n), Matrix::Zero(n, n), unused_mean, noise_cov);

    // x_k = A_k x_s + b_k + noise
    Matrix transfer(n * blocks, n);
    Vector shift(n * blocks);
    transfer.topRows(n).setIdentity();
    shift.head(n).setZero();
    for (Eigen::Index k = 1; k < blocks; ++k) {
        const Transition& tr = model.transition(s + static_cast<std::size_t>(k));
        transfer.middleRows(n * k, n) = tr.phi * transfer.middleRows(n * (k - 1), n);
        shift.segment(n * k, n) = tr.phi * shift.segment(n * (k - 1), n) + tr.offset;
    }

    const StackedObservations obs = stack_observations(model, s, first);
    design_ = obs.selector * transfer;
    offset_ = obs.selector * shift;
    data_ = obs.values;
    if (data_.size() > 0) {
        noise_chol_ = chol_lower(symmetrize(obs.selector * noise_cov * obs.selector.transpose() + obs.noise));
    }
}

double FutureLikelihood::log_value(const Vector& x) const {
    if (data_.size() == 0) {
        return 0.0;
    }
    const Vector z = solve_triangular(noise_chol_, data_ - design_ * x - offset_, Triangle::Lower);
    return -0.5 * static_cast<double>(data_.size()) * std::log(2.0 * std::numbers::pi) - log_diag_sum(noise_chol_) -
           0.5 * z.squaredNorm();
}

DegenerateGaussian stacked_regression_mle(const GaussMarkovModel& model, std::size_t t, RankTolerance tol) {
    const FutureLikelihood future(model, t, t == 0 ? 1 : t);
    const auto n = static_cast<Eigen::Index>(model.state_dim);
    DegenerateGaussian out;
    if (future.observation_rows() == 0) {
        out.mean = Vector::Zero(n);
        out.cov = Matrix::Zero(n, n);
        out.support_basis = Matrix(n, 0);
        return out;
    }
    const Matrix white_design = solve_triangular(future.noise_chol(), future.design(), Triangle::Lower);
    const Vector white_data =
        solve_triangular(future.noise_chol(), future.data() - future.offset(), Triangle::Lower);
    const PseudoInverse pinv = pseudo_inverse(white_design, tol);
    out.mean = pinv.value * white_data;
    out.cov = symmetrize(pinv.value * pinv.value.transpose());
    out.rank = pinv.rank;
    out.support_basis = row_space_basis(white_design, tol);
    return out;
}

}  // namespace gmsmooth
