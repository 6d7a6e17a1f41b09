// Partially observed Gauss-Markov models:
//
//   x_0 ~ pi_0
//   x_t | x_{t-1} ~ N(phi_t x_{t-1} + u_t, Q_t),   t = 1..T
//   y_t | x_t     ~ N(C_t x_t, R_t),               t = 1..T (possibly missing)

#ifndef GMSMOOTH_MODEL_HPP
#define GMSMOOTH_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gmsmooth/linalg.hpp"

namespace gmsmooth {

struct Transition {
    Matrix phi;
    Vector offset;
    Matrix noise_cov;
    std::optional<Matrix> noise_chol;

    /// Builds a transition and attaches a lower factor of the (PSD) noise covariance.
    static Transition make(Matrix phi, Vector offset, Matrix noise_cov);
    /// Same, with a caller-supplied factor; noise_cov is formed as chol * cholᵀ.
    static Transition from_factor(Matrix phi, Vector offset, Matrix noise_chol);

    std::size_t state_dim() const { return static_cast<std::size_t>(phi.rows()); }
    bool operator==(const Transition&) const;
};

struct ObservationModel {
    Matrix c;
    Matrix noise_cov;
    Matrix noise_chol;  // empty (0x0) when noise_cov is not positive definite

    static ObservationModel make(Matrix c, Matrix noise_cov);

    std::size_t obs_dim() const { return static_cast<std::size_t>(c.rows()); }
    bool operator==(const ObservationModel&) const;
};

struct ObservationRecord {
    std::size_t time_index = 0;
    ObservationModel model;
    std::optional<Vector> value;

    bool missing() const { return !value.has_value(); }
    bool operator==(const ObservationRecord&) const;
};

struct ProperPrior {
    Vector mean;
    Matrix cov;
    std::optional<Matrix> chol;

    static ProperPrior make(Vector mean, Matrix cov);
    bool operator==(const ProperPrior&) const;
};

/// Indicator of the affine support of h_{1:T|0}.
struct FlatOnSupport {
    bool operator==(const FlatOnSupport&) const = default;
};

/// Lebesgue measure on all of R^n.
struct FlatEverywhere {
    bool operator==(const FlatEverywhere&) const = default;
};

using InitialDistribution = std::variant<ProperPrior, FlatOnSupport, FlatEverywhere>;

struct GaussMarkovModel {
    std::size_t state_dim = 0;
    std::size_t horizon = 0;
    std::vector<Transition> transitions;         // index t-1 holds step t
    std::vector<ObservationRecord> observations;  // index t-1 holds time t
    InitialDistribution initial;

    const Transition& transition(std::size_t t) const { return transitions.at(t - 1); }
    const ObservationRecord& observation(std::size_t t) const { return observations.at(t - 1); }
    bool operator==(const GaussMarkovModel&) const;
};

struct Violation {
    std::optional<std::size_t> time_index;
    std::string description;
};

/// Every dimension / symmetry / definiteness problem found in the model.
std::vector<Violation> validate(const GaussMarkovModel& model);

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws ModelError listing the violations, if any.
void require_valid(const GaussMarkovModel& model);

struct Simulation {
    std::vector<Vector> states;                      // x_0..x_T
    std::vector<std::optional<Vector>> observations;  // y_1..y_T
};

/// Draws x_0 from the proper initial distribution, then runs the model forward.
Simulation simulate(const GaussMarkovModel& model, std::uint64_t seed);

/// Runs the model forward from a fixed initial state. Works for any prior.
Simulation simulate_from(const GaussMarkovModel& model, const Vector& x0, std::uint64_t seed);

/// Copies `model` with its observation values replaced (nullopt = missing).
GaussMarkovModel with_observations(GaussMarkovModel model,
                                   const std::vector<std::optional<Vector>>& values);

/// Per-axis drift for a thrice-integrated white noise (position, velocity, acceleration).
Matrix wiener_axis_transition(double dt);
/// Per-axis discretized process noise for intensity sigma.
Matrix wiener_axis_noise(double dt, double sigma);

/// Planar object with Wiener-process acceleration, state (p1, v1, a1, p2, v2, a2),
/// positions observed with noise diag(lambda1, lambda2) from first_obs_index on,
/// and a flat prior over R^6.
GaussMarkovModel wiener_acceleration_model(double dt, const Vector& sigmas, const Vector& lambdas,
                                           std::size_t horizon, std::size_t first_obs_index);

}  // namespace gmsmooth

#endif  // GMSMOOTH_MODEL_HPP
