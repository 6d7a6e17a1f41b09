#include "gmsmooth/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace gmsmooth {

namespace {

constexpr double kTol = 1e-10;

bool same(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same(const Vector& a, const Vector& b) {
    return a.size() == b.size() && a == b;
}

bool same(const std::optional<Matrix>& a, const std::optional<Matrix>& b) {
    if (a.has_value() != b.has_value()) {
        return false;
    }
    return !a || same(*a, *b);
}

double scale_of(const Matrix& a) {
    return a.size() == 0 ? 1.0 : std::max(1.0, a.cwiseAbs().maxCoeff());
}

bool is_symmetric(const Matrix& a) {
    return a.rows() == a.cols() && (a - a.transpose()).cwiseAbs().maxCoeff() <= kTol * scale_of(a);
}

bool is_psd(const Matrix& a) {
    if (a.rows() == 0) {
        return true;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(a), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff() >= -kTol * scale_of(a);
}

bool is_lower_triangular(const Matrix& a) {
    return a.isLowerTriangular(0.0);
}

std::optional<Matrix> try_chol(const Matrix& s) {
    try {
        return chol_lower(s);
    } catch (const NumericError&) {
        return std::nullopt;
    }
}

}  // namespace

Transition Transition::make(Matrix phi, Vector offset, Matrix noise_cov) {
    Transition t{std::move(phi), std::move(offset), std::move(noise_cov), std::nullopt};
    if (t.noise_cov.rows() == t.noise_cov.cols() && all_finite(t.noise_cov)) {
        try {
            t.noise_chol = psd_factor_lower(t.noise_cov);
        } catch (const NumericError&) {
            // left unset; validate() reports the bad covariance
        }
    }
    return t;
}

Transition Transition::from_factor(Matrix phi, Vector offset, Matrix noise_chol) {
    Matrix cov = noise_chol * noise_chol.transpose();
    return Transition{std::move(phi), std::move(offset), std::move(cov), std::move(noise_chol)};
}

bool Transition::operator==(const Transition& o) const {
    return same(phi, o.phi) && same(offset, o.offset) && same(noise_cov, o.noise_cov) &&
           same(noise_chol, o.noise_chol);
}

ObservationModel ObservationModel::make(Matrix c, Matrix noise_cov) {
    ObservationModel m{std::move(c), std::move(noise_cov), Matrix(0, 0)};
    if (m.noise_cov.rows() == m.noise_cov.cols() && all_finite(m.noise_cov)) {
        if (auto l = try_chol(m.noise_cov)) {
            m.noise_chol = std::move(*l);
        }
    }
    return m;
}

bool ObservationModel::operator==(const ObservationModel& o) const {
    return same(c, o.c) && same(noise_cov, o.noise_cov) && same(noise_chol, o.noise_chol);
}

bool ObservationRecord::operator==(const ObservationRecord& o) const {
    if (time_index != o.time_index || !(model == o.model) || value.has_value() != o.value.has_value()) {
        return false;
    }
    return !value || same(*value, *o.value);
}

ProperPrior ProperPrior::make(Vector mean, Matrix cov) {
    ProperPrior p{std::move(mean), std::move(cov), std::nullopt};
    if (p.cov.rows() == p.cov.cols() && all_finite(p.cov)) {
        try {
            p.chol = psd_factor_lower(p.cov);
        } catch (const NumericError&) {
        }
    }
    return p;
}

bool ProperPrior::operator==(const ProperPrior& o) const {
    return same(mean, o.mean) && same(cov, o.cov) && same(chol, o.chol);
}

bool GaussMarkovModel::operator==(const GaussMarkovModel& o) const {
    return state_dim == o.state_dim && horizon == o.horizon && transitions == o.transitions &&
           observations == o.observations && initial == o.initial;
}

std::vector<Violation> validate(const GaussMarkovModel& model) {
    std::vector<Violation> out;
    const auto n = static_cast<Eigen::Index>(model.state_dim);
    auto add = [&](std::optional<std::size_t> t, std::string what) {
        if (t) {
            what += " at t=" + std::to_string(*t);
        }
        out.push_back({t, std::move(what)});
    };

    if (model.state_dim == 0) {
        add(std::nullopt, "state dimension must be positive");
    }
    if (model.transitions.size() != model.horizon) {
        add(std::nullopt, "expected " + std::to_string(model.horizon) + " transitions, got " +
                              std::to_string(model.transitions.size()));
    }
    if (model.observations.size() != model.horizon) {
        add(std::nullopt, "expected " + std::to_string(model.horizon) + " observation records, got " +
                              std::to_string(model.observations.size()));
    }

    for (std::size_t i = 0; i < model.transitions.size(); ++i) {
        const std::size_t t = i + 1;
        const Transition& tr = model.transitions[i];
        if (tr.phi.rows() != n || tr.phi.cols() != n) {
            add(t, "transition matrix has wrong shape");
        } else if (!all_finite(tr.phi)) {
            add(t, "transition matrix has non-finite entries");
        }
        if (tr.offset.size() != n) {
            add(t, "transition offset has wrong length");
        } else if (!all_finite(tr.offset)) {
            add(t, "transition offset has non-finite entries");
        }
        if (tr.noise_cov.rows() != n || tr.noise_cov.cols() != n) {
            add(t, "process noise covariance has wrong shape");
            continue;
        }
        if (!all_finite(tr.noise_cov)) {
            add(t, "process noise covariance has non-finite entries");
            continue;
        }
        if (!is_symmetric(tr.noise_cov)) {
            add(t, "process noise covariance not symmetric");
        } else if (!is_psd(tr.noise_cov)) {
            add(t, "process noise covariance not PSD");
        }
        if (tr.noise_chol) {
            const Matrix& l = *tr.noise_chol;
            if (l.rows() != n || l.cols() != n || !is_lower_triangular(l)) {
                add(t, "process noise factor is not lower-triangular n x n");
            } else if ((l * l.transpose() - tr.noise_cov).cwiseAbs().maxCoeff() >
                       kTol * scale_of(tr.noise_cov)) {
                add(t, "process noise factor does not reproduce the covariance");
            }
        }
    }

    std::size_t present = 0;
    for (std::size_t i = 0; i < model.observations.size(); ++i) {
        const std::size_t t = i + 1;
        const ObservationRecord& rec = model.observations[i];
        const ObservationModel& om = rec.model;
        if (rec.time_index != t) {
            add(t, "observation record carries time index " + std::to_string(rec.time_index));
        }
        const Eigen::Index m = om.c.rows();
        if (om.c.cols() != n) {
            add(t, "observation matrix has wrong width");
        }
        if (m < 1 || m > n) {
            add(t, "observation dimension must satisfy 1 <= m <= n");
        }
        if (!all_finite(om.c)) {
            add(t, "observation matrix has non-finite entries");
        }
        if (om.noise_cov.rows() != m || om.noise_cov.cols() != m) {
            add(t, "observation covariance has wrong shape");
        } else if (!all_finite(om.noise_cov) || !is_symmetric(om.noise_cov) || !try_chol(om.noise_cov)) {
            add(t, "observation covariance not PD");
        } else if (om.noise_chol.rows() != m || om.noise_chol.cols() != m ||
                   !is_lower_triangular(om.noise_chol) ||
                   (om.noise_chol * om.noise_chol.transpose() - om.noise_cov).cwiseAbs().maxCoeff() >
                       kTol * scale_of(om.noise_cov)) {
            add(t, "observation noise factor does not reproduce the covariance");
        }
        if (rec.value) {
            ++present;
            if (rec.value->size() != m) {
                add(t, "observation value has wrong length");
            } else if (!all_finite(*rec.value)) {
                add(t, "observation value has non-finite entries");
            }
        }
    }
    if (present == 0) {
        add(std::nullopt, "model has no observations");
    }

    if (const auto* prior = std::get_if<ProperPrior>(&model.initial)) {
        if (prior->mean.size() != n) {
            add(std::nullopt, "initial mean has wrong length");
        }
        if (prior->cov.rows() != n || prior->cov.cols() != n) {
            add(std::nullopt, "initial covariance has wrong shape");
        } else if (!all_finite(prior->cov) || !is_symmetric(prior->cov) || !is_psd(prior->cov)) {
            add(std::nullopt, "initial covariance not symmetric PSD");
        }
    }
    return out;
}

void require_valid(const GaussMarkovModel& model) {
    const auto violations = validate(model);
    if (violations.empty()) {
        return;
    }
    std::ostringstream msg;
    msg << "invalid model:";
    for (const auto& v : violations) {
        msg << "\n  " << v.description;
    }
    throw ModelError(msg.str());
}

namespace {

Vector standard_normal(std::mt19937_64& rng, Eigen::Index k) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Vector w(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        w(i) = dist(rng);
    }
    return w;
}

Simulation run_forward(const GaussMarkovModel& model, const Vector& x0, std::mt19937_64& rng) {
    Simulation sim;
    sim.states.reserve(model.horizon + 1);
    sim.observations.reserve(model.horizon);
    sim.states.push_back(x0);
    for (std::size_t t = 1; t <= model.horizon; ++t) {
        const Transition& tr = model.transition(t);
        const Matrix factor = tr.noise_chol ? *tr.noise_chol : psd_factor_lower(tr.noise_cov);
        const Vector w = standard_normal(rng, tr.phi.rows());
        sim.states.push_back(tr.phi * sim.states.back() + tr.offset + factor * w);

        const ObservationRecord& rec = model.observation(t);
        if (rec.missing()) {
            sim.observations.emplace_back(std::nullopt);
            continue;
        }
        const ObservationModel& om = rec.model;
        const Matrix rfac = om.noise_chol.size() > 0 ? om.noise_chol : psd_factor_lower(om.noise_cov);
        const Vector v = standard_normal(rng, om.c.rows());
        sim.observations.emplace_back(om.c * sim.states.back() + rfac * v);
    }
    return sim;
}

}  // namespace

Simulation simulate(const GaussMarkovModel& model, std::uint64_t seed) {
    const auto* prior = std::get_if<ProperPrior>(&model.initial);
    if (!prior) {
        throw ModelError("simulate: flat initial distributions cannot be sampled");
    }
    std::mt19937_64 rng(seed);
    const Matrix factor = prior->chol ? *prior->chol : psd_factor_lower(prior->cov);
    const Vector x0 = prior->mean + factor * standard_normal(rng, prior->mean.size());
    return run_forward(model, x0, rng);
}

Simulation simulate_from(const GaussMarkovModel& model, const Vector& x0, std::uint64_t seed) {
    if (x0.size() != static_cast<Eigen::Index>(model.state_dim)) {
        throw std::invalid_argument("simulate_from: initial state has wrong length");
    }
    std::mt19937_64 rng(seed);
    return run_forward(model, x0, rng);
}

GaussMarkovModel with_observations(GaussMarkovModel model,
                                   const std::vector<std::optional<Vector>>& values) {
    if (values.size() != model.observations.size()) {
        throw std::invalid_argument("with_observations: length mismatch");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        model.observations[i].value = values[i];
    }
    return model;
}

Matrix wiener_axis_transition(double dt) {
    Matrix phi(3, 3);
    phi << 1.0, dt, 0.5 * dt * dt,
           0.0, 1.0, dt,
           0.0, 0.0, 1.0;
    return phi;
}

Matrix wiener_axis_noise(double dt, double sigma) {
    const double dt2 = dt * dt;
    const double dt3 = dt2 * dt;
    const double dt4 = dt3 * dt;
    const double dt5 = dt4 * dt;
    Matrix q(3, 3);
    q << dt5 / 20.0, dt4 / 8.0, dt3 / 6.0,
         dt4 / 8.0,  dt3 / 3.0, dt2 / 2.0,
         dt3 / 6.0,  dt2 / 2.0, dt;
    return sigma * sigma * q;
}

GaussMarkovModel wiener_acceleration_model(double dt, const Vector& sigmas, const Vector& lambdas,
                                           std::size_t horizon, std::size_t first_obs_index) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("wiener_acceleration_model: dt must be positive");
    }
    if (sigmas.size() != 2 || lambdas.size() != 2) {
        throw std::invalid_argument("wiener_acceleration_model: need two sigmas and two lambdas");
    }
    if (!(sigmas.array() >= 0.0).all() || !(lambdas.array() > 0.0).all() || !sigmas.allFinite() ||
        !lambdas.allFinite()) {
        throw std::invalid_argument(
            "wiener_acceleration_model: sigmas must be non-negative and lambdas positive");
    }
    if (horizon < 1 || first_obs_index < 1 || first_obs_index > horizon) {
        throw std::invalid_argument("wiener_acceleration_model: need 1 <= first_obs_index <= horizon");
    }

    Matrix phi = Matrix::Zero(6, 6);
    Matrix q = Matrix::Zero(6, 6);
    for (int axis = 0; axis < 2; ++axis) {
        phi.block(3 * axis, 3 * axis, 3, 3) = wiener_axis_transition(dt);
        q.block(3 * axis, 3 * axis, 3, 3) = wiener_axis_noise(dt, sigmas(axis));
    }
    Matrix c = Matrix::Zero(2, 6);
    c(0, 0) = 1.0;
    c(1, 3) = 1.0;
    const Matrix r = lambdas.asDiagonal();

    const Transition step = Transition::make(phi, Vector::Zero(6), q);
    const ObservationModel om = ObservationModel::make(c, r);

    GaussMarkovModel model;
    model.state_dim = 6;
    model.horizon = horizon;
    model.transitions.assign(horizon, step);
    model.observations.reserve(horizon);
    for (std::size_t t = 1; t <= horizon; ++t) {
        ObservationRecord rec{t, om, std::nullopt};
        if (t >= first_obs_index) {
            rec.value = Vector::Zero(2);
        }
        model.observations.push_back(std::move(rec));
    }
    model.initial = FlatEverywhere{};
    return model;
}

}  // namespace gmsmooth
