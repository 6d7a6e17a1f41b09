#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gmsmooth/demo.hpp"
#include "gmsmooth/forward.hpp"
#include "gmsmooth/oracle.hpp"

using namespace gmsmooth;

namespace {

DemoConfig small_config() {
    DemoConfig c;
    c.horizon = 40;
    c.first_obs_index = 20;
    return c;
}

std::string csv_of(const ReplicationResult& r) {
    std::ostringstream out;
    write_demo_csv(out, r);
    return out.str();
}

}  // namespace

TEST_CASE("estimator names") {
    CHECK(parse_estimator("smoother") == Estimator::Smoother);
    CHECK(parse_estimator("mle") == Estimator::Mle);
    CHECK(parse_estimator("both") == Estimator::Both);
    CHECK_THROWS(parse_estimator("kalman"));
    CHECK(to_string(Estimator::Mle) == "mle");
}

TEST_CASE("config validation") {
    DemoConfig c;
    CHECK_NOTHROW(validate_config(c));
    c.first_obs_index = 0;
    CHECK_THROWS(validate_config(c));
    c = DemoConfig{};
    c.first_obs_index = 300;
    CHECK_THROWS(validate_config(c));
    c = DemoConfig{};
    c.dt = -1.0;
    CHECK_THROWS(validate_config(c));
    c = DemoConfig{};
    c.replications = 0;
    CHECK_THROWS(validate_config(c));
    c = DemoConfig{};
    c.reference_initial_state = Vector::Zero(3);
    CHECK_THROWS(validate_config(c));
}

TEST_CASE("demo model geometry") {
    const GaussMarkovModel m = demo_model(DemoConfig{});
    CHECK(m.horizon == 256);
    CHECK(m.state_dim == 6);
    CHECK(m.observation(126).missing());
    CHECK_FALSE(m.observation(127).missing());
    CHECK(std::holds_alternative<FlatEverywhere>(m.initial));
}

TEST_CASE("replications are deterministic") {
    const DemoConfig c = small_config();
    const ReplicationResult a = run_replication(c, 5);
    const ReplicationResult b = run_replication(c, 5);
    CHECK(csv_of(a) == csv_of(b));
    CHECK(csv_of(a) != csv_of(run_replication(c, 6)));
}

TEST_CASE("CSV layout") {
    const DemoConfig c = small_config();
    const std::string text = csv_of(run_replication(c, 1));
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line ==
          "t,true_p1,true_p2,obs_p1,obs_p2,smooth_p1,smooth_p2,smooth_2sd_p1,smooth_2sd_p2,mle_p1,mle_p2,mle_2sd_p1,"
          "mle_2sd_p2");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 12);
        if (rows == 0) {
            // no observation at t = 0
            CHECK(line.find(",,,") != std::string::npos);
        }
        ++rows;
    }
    CHECK(rows == c.horizon + 1);
}

TEST_CASE("serial and parallel replications are identical") {
    DemoConfig c = small_config();
    c.replications = 12;
    c.seed = 100;
    const auto serial = run_replications_serial(c);
    const auto parallel = run_replications_parallel(c);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].seed == 100 + i);
        CHECK(parallel[i].seed == serial[i].seed);
        CHECK(csv_of(serial[i]) == csv_of(parallel[i]));
        CHECK(serial[i].smoother_rmse_prefix == parallel[i].smoother_rmse_prefix);
    }
}

TEST_CASE("noiseless limit recovers the true positions") {
    DemoConfig c = small_config();
    c.sigma1 = c.sigma2 = 0.0;
    c.lambda1 = c.lambda2 = 1e-14;
    const ReplicationResult r = run_replication(c, 3);
    for (const DemoRow& row : r.rows) {
        REQUIRE(row.smoothed.has_value());
        CHECK(std::abs(row.smoothed->p1 - row.truth.p1) < 1e-6);
        CHECK(std::abs(row.smoothed->p2 - row.truth.p2) < 1e-6);
    }
}

TEST_CASE("the unobserved prefix is less certain than the observed suffix") {
    const ReplicationResult r = run_replication(DemoConfig{}, 0);
    CHECK(r.prefix_variance_mean > r.suffix_variance_mean);
    CHECK(r.smoother_checked == 2 * 257);
}

TEST_CASE("estimator selection leaves the other columns empty") {
    DemoConfig c = small_config();
    c.estimator = Estimator::Smoother;
    const ReplicationResult s = run_replication(c, 2);
    CHECK_FALSE(s.rows[0].mle.has_value());
    CHECK(std::isnan(s.mle_rmse_prefix));
    c.estimator = Estimator::Mle;
    const ReplicationResult m = run_replication(c, 2);
    CHECK_FALSE(m.rows[0].smoothed.has_value());
    CHECK(m.rows[0].mle.has_value());
}

TEST_CASE("smoother and MLE coincide on a full-rank scalar fixture") {
    // flat prior, every step observed: h_{t:T|t} and the smoothing posterior at t = 0
    // carry the same moments
    GaussMarkovModel m;
    m.state_dim = 1;
    m.horizon = 4;
    for (std::size_t t = 1; t <= 4; ++t) {
        m.transitions.push_back(Transition::make(Matrix::Constant(1, 1, 0.8), Vector::Zero(1), Matrix::Ones(1, 1)));
        m.observations.push_back({t, ObservationModel::make(Matrix::Ones(1, 1), Matrix::Ones(1, 1)),
                                  Vector::Constant(1, 0.3 * static_cast<double>(t))});
    }
    m.initial = FlatEverywhere{};
    const SmoothingResult s = smooth(m);
    const DegenerateGaussian mle = stacked_mle(m, 0);
    CHECK(std::abs(s.marginals[0].mean(0) - mle.mean(0)) < 1e-6);
    CHECK(std::abs(s.marginals[0].cov(0, 0) - mle.cov(0, 0)) < 1e-6);
}

TEST_CASE("summary and number formatting") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(-2.5e-300) == "-2.5e-300");
    CHECK(format_number(std::nan("")) == "nan");
    DemoConfig c = small_config();
    c.replications = 3;
    const auto results = run_replications_serial(c);
    const DemoSummary s = summarize(results);
    CHECK(s.replications == 3);
    CHECK(s.coverage > 0.0);
    CHECK(s.coverage <= 1.0);
    const nlohmann::json j = summary_to_json(c, s);
    CHECK(j.contains("coverage_2sd"));
    CHECK(j.dump().find("reference_initial_state") != std::string::npos);
}
