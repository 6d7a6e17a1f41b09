#include <doctest.h>

#include <cmath>
#include <random>

#include "battery.hpp"
#include "gmsmooth/forward.hpp"
#include "gmsmooth/oracle.hpp"

using namespace gmsmooth;
using gmsmooth::testing::random_model;
using gmsmooth::testing::random_vector;
using gmsmooth::testing::scaled_error;

namespace {

GaussMarkovModel scalar_walk_one(std::optional<double> y) {
    GaussMarkovModel m;
    m.state_dim = 1;
    m.horizon = 1;
    m.transitions.push_back(Transition::make(Matrix::Ones(1, 1), Vector::Zero(1), Matrix::Ones(1, 1)));
    std::optional<Vector> value;
    if (y) {
        value = Vector::Constant(1, *y);
    }
    m.observations.push_back({1, ObservationModel::make(Matrix::Ones(1, 1), Matrix::Ones(1, 1)), value});
    m.initial = ProperPrior::make(Vector::Zero(1), Matrix::Ones(1, 1));
    return m;
}

}  // namespace

TEST_CASE("build_joint by hand") {
    const JointGaussian j = build_joint(scalar_walk_one(1.0));
    Matrix expected(2, 2);
    expected << 1, 1, 1, 2;
    CHECK((j.cov - expected).norm() < 1e-15);
    CHECK(j.mean.isZero(0.0));

    GaussMarkovModel flat = scalar_walk_one(1.0);
    flat.initial = FlatEverywhere{};
    CHECK_THROWS(build_joint(flat));
    const JointGaussian sub = build_joint(flat, ProperPrior::make(Vector::Zero(1), Matrix::Constant(1, 1, 4.0)));
    CHECK(sub.cov(1, 1) == doctest::Approx(5.0));
}

TEST_CASE("zero-noise joint has the rank of the prior") {
    GaussMarkovModel m;
    m.state_dim = 2;
    m.horizon = 4;
    for (std::size_t t = 1; t <= 4; ++t) {
        m.transitions.push_back(Transition::make(Matrix::Identity(2, 2) * 0.9, Vector::Zero(2), Matrix::Zero(2, 2)));
        m.observations.push_back({t, ObservationModel::make(Matrix::Identity(1, 2), Matrix::Ones(1, 1)), Vector::Zero(1)});
    }
    m.initial = ProperPrior::make(Vector::Zero(2), Matrix::Identity(2, 2));
    CHECK(pseudo_logdet(build_joint(m).cov).rank == 2);
}

TEST_CASE("condition_joint by hand") {
    const GaussMarkovModel m = scalar_walk_one(1.0);
    const JointPosterior p = condition_joint(build_joint(m), m);
    CHECK(p.marginal(1).mean(0) == doctest::Approx(2.0 / 3.0));
    CHECK(p.marginal(1).cov(0, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(p.marginal(0).mean(0) == doctest::Approx(1.0 / 3.0));
    CHECK(p.marginal(0).cov(0, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(p.log_evidence ==
          doctest::Approx(gaussian_logpdf(Vector::Ones(1), Vector::Zero(1), Matrix::Constant(1, 1, 3.0))));
    CHECK(p.pair(1).mean.size() == 2);

    const GaussMarkovModel none = scalar_walk_one(std::nullopt);
    const JointPosterior q = condition_joint(build_joint(none), none);
    CHECK(q.log_evidence == 0.0);
    CHECK(q.marginal(1).cov(0, 0) == doctest::Approx(2.0));

    // zero innovation leaves the mean alone
    const GaussMarkovModel z = scalar_walk_one(0.0);
    CHECK(condition_joint(build_joint(z), z).mean.isZero(1e-15));
}

TEST_CASE("Kalman filter examples") {
    const GaussMarkovModel m = scalar_walk_one(1.0);
    const FilterResult f = kalman_filter(m);
    REQUIRE(f.filtered.size() == 2);
    CHECK(f.filtered[1].mean(0) == doctest::Approx(2.0 / 3.0));
    CHECK(f.filtered[1].cov(0, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(f.predicted[1].cov(0, 0) == doctest::Approx(2.0));

    const FilterResult none = kalman_filter(scalar_walk_one(std::nullopt));
    CHECK(none.filtered[1].cov(0, 0) == doctest::Approx(2.0));
    CHECK(none.log_likelihood == 0.0);
}

TEST_CASE("filters agree with the oracle evidence") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        const GaussMarkovModel m = random_model(rng);
        const double oracle = condition_joint(build_joint(m), m).log_evidence;
        const FilterResult plain = kalman_filter(m);
        const FilterResult root = sqrt_kalman_filter(m);
        CHECK(std::abs(plain.log_likelihood - oracle) < 1e-8 * std::max(1.0, std::abs(oracle)));
        CHECK(std::abs(root.log_likelihood - oracle) < 1e-8 * std::max(1.0, std::abs(oracle)));
        for (std::size_t t = 0; t <= m.horizon; ++t) {
            CHECK(scaled_error(root.filtered[t].mean, plain.filtered[t].mean) < 1e-8);
            CHECK(scaled_error(root.filtered[t].cov, plain.filtered[t].cov) < 1e-8);
            REQUIRE(root.filtered[t].cov_chol.has_value());
        }
    }
}

TEST_CASE("RTS with a single final observation leaves the last marginal alone") {
    GaussMarkovModel m = scalar_walk_one(1.0);
    m.horizon = 3;
    m.transitions.assign(3, m.transitions[0]);
    m.observations = {{1, m.observations[0].model, std::nullopt},
                      {2, m.observations[0].model, std::nullopt},
                      {3, m.observations[0].model, Vector::Constant(1, 1.5)}};
    const FilterResult f = kalman_filter(m);
    const auto s = rts_smoother(f, m);
    CHECK(s[3].mean(0) == doctest::Approx(f.filtered[3].mean(0)));
    CHECK(s[3].cov(0, 0) == doctest::Approx(f.filtered[3].cov(0, 0)));
}

TEST_CASE("two_filter_combine examples") {
    const GaussianMarginal prior{Vector::Zero(1), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
    const GaussianMarginal same = two_filter_combine(prior, LogQuadLikelihood::empty(1));
    CHECK(same.mean == prior.mean);
    CHECK(same.cov == prior.cov);
    const LogQuadLikelihood future{0.0, Vector::Constant(1, 2.0), Matrix::Ones(1, 1)};
    const GaussianMarginal a = two_filter_combine(prior, future);
    CHECK(a.mean(0) == doctest::Approx(1.0));
    CHECK(a.cov(0, 0) == doctest::Approx(0.5));
    const GaussianMarginal b = two_filter_combine_sqrt(prior, future);
    CHECK(b.mean(0) == doctest::Approx(1.0));
    CHECK(b.cov(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("three-way smoothing agreement") {
    std::mt19937_64 rng(62);
    for (int trial = 0; trial < 50; ++trial) {
        const GaussMarkovModel m = random_model(rng);
        const SmoothingResult bf = smooth(m);
        const auto tf = two_filter_smoother(m);
        const auto tfs = two_filter_smoother(m, true);
        const auto rts = rts_smoother(kalman_filter(m), m);
        const JointPosterior oracle = condition_joint(build_joint(m), m);
        for (std::size_t t = 0; t <= m.horizon; ++t) {
            const GaussianMarginal o = oracle.marginal(t);
            for (const GaussianMarginal* g : {&bf.marginals[t], &tf[t], &tfs[t], &rts[t]}) {
                CHECK(scaled_error(g->mean, o.mean) < 1e-8);
                CHECK(scaled_error(g->cov, o.cov) < 1e-8);
            }
        }
    }
}

TEST_CASE("posterior kernels reproduce the oracle pairwise joints") {
    std::mt19937_64 rng(63);
    for (int trial = 0; trial < 30; ++trial) {
        const GaussMarkovModel m = random_model(rng);
        const auto n = static_cast<Eigen::Index>(m.state_dim);
        const BackwardPassResult b = backward_pass(m);
        const JointPosterior oracle = condition_joint(build_joint(m), m);
        for (std::size_t t = 1; t <= m.horizon; ++t) {
            const GaussianMarginal prev = oracle.marginal(t - 1);
            const GaussianMarginal pair = oracle.pair(t);
            const PosteriorTransition& k = b.transitions[t - 1];
            Vector mean(2 * n);
            mean << prev.mean, k.phi * prev.mean + k.offset;
            Matrix cov(2 * n, 2 * n);
            cov << prev.cov, prev.cov * k.phi.transpose(), k.phi * prev.cov, k.phi * prev.cov * k.phi.transpose() + k.cov;
            CHECK(scaled_error(mean, pair.mean) < 1e-8);
            CHECK(scaled_error(cov, pair.cov) < 1e-8);
        }
    }
}

TEST_CASE("stacked MLE examples") {
    // t = T, C = I: the whitened solve recovers y_T
    GaussMarkovModel m = scalar_walk_one(1.7);
    m.observations[0].model = ObservationModel::make(Matrix::Ones(1, 1), Matrix::Constant(1, 1, 4.0));
    const DegenerateGaussian g = stacked_mle(m, 1);
    CHECK(g.mean(0) == doctest::Approx(1.7));
    CHECK(g.cov(0, 0) == doctest::Approx(4.0));
    CHECK(g.rank == 1);

    // one scalar observation of a two-dimensional state
    GaussMarkovModel two;
    two.state_dim = 2;
    two.horizon = 1;
    two.transitions.push_back(Transition::make(Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Identity(2, 2)));
    Matrix c(1, 2);
    c << 1, 1;
    two.observations.push_back({1, ObservationModel::make(c, Matrix::Ones(1, 1)), Vector::Ones(1)});
    two.initial = FlatEverywhere{};
    CHECK(stacked_mle(two, 1).rank == 1);
    CHECK(stacked_mle(two, 0).rank == 1);
}

TEST_CASE("stacked MLE matches the explicit regression") {
    std::mt19937_64 rng(64);
    for (int trial = 0; trial < 50; ++trial) {
        const GaussMarkovModel m = random_model(rng);
        const BackwardPassResult b = backward_pass(m);
        for (std::size_t t = 0; t <= m.horizon; ++t) {
            const DegenerateGaussian fast = stacked_mle(b, t);
            const DegenerateGaussian slow = stacked_regression_mle(m, t);
            CHECK(fast.rank == slow.rank);
            CHECK(scaled_error(fast.mean, slow.mean) < 1e-8);
            CHECK(scaled_error(fast.cov, slow.cov) < 1e-8);
        }
    }
}

TEST_CASE("FutureLikelihood of a single observation") {
    const GaussMarkovModel m = scalar_walk_one(1.0);
    const FutureLikelihood f(m, 0, 1);
    CHECK(f.observation_rows() == 1);
    // y_1 | x_0 ~ N(x_0, 2)
    for (double x : {-1.0, 0.0, 2.0}) {
        CHECK(f.log_value(Vector::Constant(1, x)) ==
              doctest::Approx(gaussian_logpdf(Vector::Ones(1), Vector::Constant(1, x), Matrix::Constant(1, 1, 2.0))));
    }
    CHECK(FutureLikelihood(m, 1, 2).observation_rows() == 0);
}
