// Planar tracking with an unobserved prefix: the object moves from t = 0 but
// its position is only measured from first_obs_index on. Each replication
// simulates a track, then estimates the early positions two ways:
//   - the full smoother with x_0 flat over R^6,
//   - per-time maximum likelihood from the data at or after t.

#ifndef GMSMOOTH_DEMO_HPP
#define GMSMOOTH_DEMO_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmsmooth/linalg.hpp"
#include "gmsmooth/model.hpp"

namespace gmsmooth {

enum class Estimator { Smoother, Mle, Both };

Estimator parse_estimator(const std::string& name);
std::string to_string(Estimator e);

struct DemoConfig {
    double dt = 1.0;
    std::size_t horizon = 256;
    std::size_t first_obs_index = 127;
    double sigma1 = 1.0;
    double sigma2 = 1.0;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    std::uint64_t seed = 0;
    // the true x_0 used for simulation: unit diagonal velocity
    Vector reference_initial_state = (Vector(6) << 0.0, 1.0, 0.0, 0.0, 1.0, 0.0).finished();
    Estimator estimator = Estimator::Both;
    std::size_t replications = 1;
};

/// Throws std::invalid_argument on a bad configuration.
void validate_config(const DemoConfig& config);

GaussMarkovModel demo_model(const DemoConfig& config);

struct AxisEstimate {
    double p1 = 0.0;
    double p2 = 0.0;
};

struct DemoRow {
    std::size_t t = 0;
    AxisEstimate truth;
    std::optional<AxisEstimate> observation;
    std::optional<AxisEstimate> smoothed;
    std::optional<AxisEstimate> smoothed_2sd;
    std::optional<AxisEstimate> mle;
    std::optional<AxisEstimate> mle_2sd;
};

struct ReplicationResult {
    std::uint64_t seed = 0;
    std::vector<DemoRow> rows;
    // position RMSE over t < first_obs_index and over all t; NaN when not computed
    double smoother_rmse_prefix = 0.0;
    double mle_rmse_prefix = 0.0;
    double smoother_rmse_all = 0.0;
    double mle_rmse_all = 0.0;
    std::size_t smoother_covered = 0;  // (t, axis) pairs inside the +-2 sd band
    std::size_t smoother_checked = 0;
    double prefix_variance_mean = 0.0;  // smoothed position variance, t < first_obs_index
    double suffix_variance_mean = 0.0;
};

ReplicationResult run_replication(const DemoConfig& config, std::uint64_t seed);

/// Replications seed, seed + 1, ... one after another.
std::vector<ReplicationResult> run_replications_serial(const DemoConfig& config);
/// Same results as the serial version, with replications spread over OpenMP threads.
std::vector<ReplicationResult> run_replications_parallel(const DemoConfig& config);

struct DemoSummary {
    std::size_t replications = 0;
    std::size_t smoother_not_worse = 0;  // prefix RMSE comparison
    double smoother_not_worse_fraction = 0.0;
    double coverage = 0.0;
    double mean_smoother_rmse_prefix = 0.0;
    double mean_mle_rmse_prefix = 0.0;
    double mean_smoother_rmse_all = 0.0;
    double mean_mle_rmse_all = 0.0;
    double max_prefix_rmse_gap = 0.0;  // max of (smoother - mle) / mle over replications
};

/// Relative slack used when comparing prefix RMSEs: over the unobserved
/// prefix the two estimators agree in exact arithmetic.
inline constexpr double kRmseComparisonSlack = 1e-6;

DemoSummary summarize(const std::vector<ReplicationResult>& results);

/// t, true_p1, true_p2, obs_p1, obs_p2, smooth_p1, smooth_p2, smooth_2sd_p1,
/// smooth_2sd_p2, mle_p1, mle_p2, mle_2sd_p1, mle_2sd_p2
void write_demo_csv(std::ostream& out, const ReplicationResult& result);

nlohmann::json summary_to_json(const DemoConfig& config, const DemoSummary& summary);

/// Shortest round-trip decimal form of a double.
std::string format_number(double value);

}  // namespace gmsmooth

#endif  // GMSMOOTH_DEMO_HPP
