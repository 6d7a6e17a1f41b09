#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "battery.hpp"
#include "gmsmooth/model.hpp"

using namespace gmsmooth;

namespace {

GaussMarkovModel scalar_walk(std::size_t horizon, double r = 1.0) {
    GaussMarkovModel m;
    m.state_dim = 1;
    m.horizon = horizon;
    for (std::size_t t = 1; t <= horizon; ++t) {
        m.transitions.push_back(Transition::make(Matrix::Identity(1, 1), Vector::Zero(1), Matrix::Identity(1, 1)));
        m.observations.push_back({t, ObservationModel::make(Matrix::Identity(1, 1), Matrix::Constant(1, 1, r)),
                                  Vector::Constant(1, 0.5 * static_cast<double>(t))});
    }
    m.initial = ProperPrior::make(Vector::Zero(1), Matrix::Identity(1, 1));
    return m;
}

bool mentions(const std::vector<Violation>& v, const std::string& text) {
    for (const auto& x : v) {
        if (x.description.find(text) != std::string::npos) {
            return true;
        }
    }
    return false;
}

Matrix drift() {
    Matrix a = Matrix::Zero(3, 3);
    a(0, 1) = 1.0;
    a(1, 2) = 1.0;
    return a;
}

// scaling and squaring with a truncated Taylor series
Matrix expm_oracle(const Matrix& a) {
    int squarings = 0;
    double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    while (norm > 0.5) {
        norm /= 2.0;
        ++squarings;
    }
    const Matrix scaled = a / std::pow(2.0, squarings);
    Matrix term = Matrix::Identity(a.rows(), a.cols());
    Matrix sum = term;
    for (int k = 1; k <= 20; ++k) {
        term = term * scaled / k;
        sum += term;
    }
    for (int i = 0; i < squarings; ++i) {
        sum = sum * sum;
    }
    return sum;
}

// composite Simpson on s -> e^{A s} G Gᵀ e^{A s}ᵀ
Matrix noise_quadrature(double dt, double sigma) {
    const int panels = 2000;
    const double h = dt / panels;
    Vector g = Vector::Zero(3);
    g(2) = sigma;
    Matrix acc = Matrix::Zero(3, 3);
    for (int i = 0; i <= panels; ++i) {
        const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        const Vector v = expm_oracle(drift() * (h * i)) * g;
        acc += w * v * v.transpose();
    }
    return acc * h / 3.0;
}

}  // namespace

TEST_CASE("validate accepts a well-formed scalar random walk") {
    CHECK(validate(scalar_walk(3)).empty());
    CHECK_NOTHROW(require_valid(scalar_walk(3)));
}

TEST_CASE("validate reports a singular observation covariance with its time index") {
    GaussMarkovModel m = scalar_walk(3);
    m.observations[1].model = ObservationModel::make(Matrix::Identity(1, 1), Matrix::Zero(1, 1));
    const auto v = validate(m);
    REQUIRE(v.size() == 1);
    CHECK(v[0].time_index == 2u);
    CHECK(v[0].description == "observation covariance not PD at t=2");
    CHECK_THROWS_AS(require_valid(m), ModelError);
}

TEST_CASE("validate reports a wrong-width observation matrix") {
    GaussMarkovModel m = scalar_walk(3);
    m.observations[2].model = ObservationModel::make(Matrix::Identity(1, 2), Matrix::Identity(1, 1));
    const auto v = validate(m);
    REQUIRE_FALSE(v.empty());
    CHECK(v[0].time_index == 3u);
    CHECK(mentions(v, "observation matrix has wrong width at t=3"));
}

TEST_CASE("validate collects several problems at once") {
    GaussMarkovModel m = scalar_walk(2);
    m.transitions[0].noise_cov(0, 0) = -1.0;
    m.transitions[0].noise_chol.reset();
    m.observations[1].value = Vector::Zero(2);
    const auto v = validate(m);
    CHECK(mentions(v, "process noise covariance not PSD at t=1"));
    CHECK(mentions(v, "observation value has wrong length at t=2"));

    GaussMarkovModel none = scalar_walk(2);
    for (auto& rec : none.observations) {
        rec.value.reset();
    }
    CHECK(mentions(validate(none), "model has no observations"));
}

TEST_CASE("simulate is deterministic and honors the missing pattern") {
    GaussMarkovModel m = scalar_walk(5);
    m.observations[1].value.reset();
    m.observations[3].value.reset();
    const Simulation a = simulate(m, 42);
    const Simulation b = simulate(m, 42);
    REQUIRE(a.states.size() == 6);
    REQUIRE(a.observations.size() == 5);
    for (std::size_t i = 0; i < a.states.size(); ++i) {
        CHECK(a.states[i] == b.states[i]);
    }
    for (std::size_t t = 0; t < 5; ++t) {
        CHECK(a.observations[t].has_value() == !m.observations[t].missing());
        if (a.observations[t]) {
            CHECK(*a.observations[t] == *b.observations[t]);
        }
    }
    const Simulation c = simulate(m, 43);
    CHECK(c.states[1] != a.states[1]);
}

TEST_CASE("simulate with zero noise stays at the prior mean") {
    GaussMarkovModel m;
    m.state_dim = 2;
    m.horizon = 4;
    for (std::size_t t = 1; t <= 4; ++t) {
        m.transitions.push_back(Transition::make(Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Zero(2, 2)));
        m.observations.push_back({t, ObservationModel::make(Matrix::Identity(1, 2), Matrix::Identity(1, 1)),
                                  Vector::Zero(1)});
    }
    Vector mu(2);
    mu << 1.5, -2.0;
    m.initial = ProperPrior::make(mu, Matrix::Zero(2, 2));
    const Simulation s = simulate(m, 3);
    for (const Vector& x : s.states) {
        CHECK(x == mu);
    }
}

TEST_CASE("simulate matches the one-step covariance in distribution") {
    GaussMarkovModel m = scalar_walk(1);
    const double phi = 0.7, q = 0.3, s0 = 2.0;
    m.transitions[0] = Transition::make(Matrix::Constant(1, 1, phi), Vector::Zero(1), Matrix::Constant(1, 1, q));
    m.initial = ProperPrior::make(Vector::Zero(1), Matrix::Constant(1, 1, s0));
    const int draws = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double x1 = simulate(m, static_cast<std::uint64_t>(i)).states[1](0);
        sum += x1;
        sum2 += x1 * x1;
    }
    const double var_true = phi * phi * s0 + q;
    const double var_hat = sum2 / draws - (sum / draws) * (sum / draws);
    // standard error of a Gaussian sample variance
    const double se = var_true * std::sqrt(2.0 / (draws - 1));
    CHECK(std::abs(var_hat - var_true) < 3.0 * se);
}

TEST_CASE("simulate refuses flat priors but simulate_from works") {
    GaussMarkovModel m = scalar_walk(2);
    m.initial = FlatEverywhere{};
    CHECK_THROWS_AS(simulate(m, 1), ModelError);
    const Simulation s = simulate_from(m, Vector::Constant(1, 3.0), 1);
    CHECK(s.states[0](0) == 3.0);
    m.initial = FlatOnSupport{};
    CHECK_THROWS_AS(simulate(m, 1), ModelError);
}

TEST_CASE("Wiener acceleration blocks at dt = 1") {
    Matrix phi_expected(3, 3);
    phi_expected << 1, 1, 0.5, 0, 1, 1, 0, 0, 1;
    CHECK((wiener_axis_transition(1.0) - phi_expected).norm() < 1e-15);
    CHECK((wiener_axis_transition(1.0) - expm_oracle(drift())).cwiseAbs().maxCoeff() < 1e-13);

    Matrix q_expected(3, 3);
    q_expected << 1.0 / 20, 1.0 / 8, 1.0 / 6, 1.0 / 8, 1.0 / 3, 1.0 / 2, 1.0 / 6, 1.0 / 2, 1.0;
    CHECK((wiener_axis_noise(1.0, 1.0) - q_expected).norm() < 1e-15);
    CHECK((wiener_axis_noise(1.0, 1.0) - noise_quadrature(1.0, 1.0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Wiener blocks agree with the oracles across step sizes") {
    for (double dt : {0.01, 0.3, 1.0, 2.5, 7.0}) {
        for (double sigma : {0.5, 1.0, 3.0}) {
            const Matrix q = wiener_axis_noise(dt, sigma);
            const Matrix oracle = noise_quadrature(dt, sigma);
            CHECK((q - oracle).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
        }
        CHECK((wiener_axis_transition(dt) - expm_oracle(drift() * dt)).cwiseAbs().maxCoeff() < 1e-12 * dt * dt);
    }
}

TEST_CASE("Wiener blocks degenerate as dt shrinks") {
    CHECK((wiener_axis_transition(1e-9) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(wiener_axis_noise(1e-9, 1.0).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("Wiener process noise is PSD for every step size") {
    for (double dt = 1e-3; dt < 100.0; dt *= 1.7) {
        const Matrix q = wiener_axis_noise(dt, 1.0);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(q);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
        CHECK_NOTHROW(chol_lower(q + 1e-14 * Matrix::Identity(3, 3)));
    }
}

TEST_CASE("planar model structure") {
    Vector sigmas(2), lambdas(2);
    sigmas << 1.0, 2.0;
    lambdas << 0.5, 3.0;
    const GaussMarkovModel m = wiener_acceleration_model(0.5, sigmas, lambdas, 20, 7);
    CHECK(m.state_dim == 6);
    CHECK(m.horizon == 20);
    CHECK(std::holds_alternative<FlatEverywhere>(m.initial));
    CHECK(validate(m).empty());
    for (std::size_t t = 1; t <= 20; ++t) {
        const Transition& tr = m.transition(t);
        // the two axes never couple
        CHECK(tr.phi.block(0, 3, 3, 3).isZero(0.0));
        CHECK(tr.phi.block(3, 0, 3, 3).isZero(0.0));
        CHECK(tr.noise_cov.block(0, 3, 3, 3).isZero(0.0));
        CHECK(tr.noise_cov.block(3, 0, 3, 3).isZero(0.0));
        CHECK((tr.noise_cov.block(3, 3, 3, 3) - wiener_axis_noise(0.5, 2.0)).norm() < 1e-15);
        const ObservationRecord& obs = m.observation(t);
        CHECK(obs.missing() == (t < 7));
        CHECK(obs.model.c(0, 0) == 1.0);
        CHECK(obs.model.c(1, 3) == 1.0);
        CHECK(obs.model.c.sum() == 2.0);
        CHECK(obs.model.noise_cov(1, 1) == 3.0);
    }
    CHECK_THROWS(wiener_acceleration_model(0.0, sigmas, lambdas, 20, 7));
    CHECK_THROWS(wiener_acceleration_model(1.0, sigmas, lambdas, 20, 21));
    CHECK_THROWS(wiener_acceleration_model(1.0, sigmas, -lambdas, 20, 1));
}

TEST_CASE("with_observations replaces values") {
    GaussMarkovModel m = scalar_walk(2);
    const GaussMarkovModel m2 = with_observations(m, {std::nullopt, Vector::Constant(1, 9.0)});
    CHECK(m2.observation(1).missing());
    CHECK((*m2.observation(2).value)(0) == 9.0);
    CHECK_THROWS(with_observations(m, {std::nullopt}));
}
