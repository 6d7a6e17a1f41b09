#include "gmsmooth/demo.hpp"

#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "gmsmooth/forward.hpp"
#include "gmsmooth/likelihood.hpp"
#include "gmsmooth/oracle.hpp"

namespace gmsmooth {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr Eigen::Index kP1 = 0;
constexpr Eigen::Index kP2 = 3;

AxisEstimate positions(const Vector& x) {
    return {x(kP1), x(kP2)};
}

AxisEstimate two_sd(const Matrix& cov) {
    return {2.0 * std::sqrt(std::max(0.0, cov(kP1, kP1))), 2.0 * std::sqrt(std::max(0.0, cov(kP2, kP2)))};
}

double squared_error(const AxisEstimate& a, const AxisEstimate& b) {
    return (a.p1 - b.p1) * (a.p1 - b.p1) + (a.p2 - b.p2) * (a.p2 - b.p2);
}

}  // namespace

Estimator parse_estimator(const std::string& name) {
    if (name == "smoother") {
        return Estimator::Smoother;
    }
    if (name == "mle") {
        return Estimator::Mle;
    }
    if (name == "both") {
        return Estimator::Both;
    }
    throw std::invalid_argument("unknown estimator \"" + name + "\" (expected smoother, mle or both)");
}

std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::Smoother:
            return "smoother";
        case Estimator::Mle:
            return "mle";
        case Estimator::Both:
            return "both";
    }
    return "both";
}

void validate_config(const DemoConfig& c) {
    if (!(c.dt > 0.0) || !std::isfinite(c.dt)) {
        throw std::invalid_argument("dt must be positive");
    }
    if (c.horizon < 1 || c.first_obs_index < 1 || c.first_obs_index > c.horizon) {
        throw std::invalid_argument("need 1 <= first-obs-index <= horizon");
    }
    if (!(c.sigma1 >= 0.0) || !(c.sigma2 >= 0.0) || !std::isfinite(c.sigma1) || !std::isfinite(c.sigma2)) {
        throw std::invalid_argument("process intensities must be finite and non-negative");
    }
    if (!(c.lambda1 > 0.0) || !(c.lambda2 > 0.0) || !std::isfinite(c.lambda1) || !std::isfinite(c.lambda2)) {
        throw std::invalid_argument("measurement variances must be finite and positive");
    }
    if (c.reference_initial_state.size() != 6 || !c.reference_initial_state.allFinite()) {
        throw std::invalid_argument("reference initial state must have 6 finite entries");
    }
    if (c.replications < 1) {
        throw std::invalid_argument("replications must be at least 1");
    }
}

GaussMarkovModel demo_model(const DemoConfig& c) {
    return wiener_acceleration_model(c.dt, (Vector(2) << c.sigma1, c.sigma2).finished(),
                                     (Vector(2) << c.lambda1, c.lambda2).finished(), c.horizon,
                                     c.first_obs_index);
}

ReplicationResult run_replication(const DemoConfig& config, std::uint64_t seed) {
    validate_config(config);
    const GaussMarkovModel base = demo_model(config);
    const Simulation sim = simulate_from(base, config.reference_initial_state, seed);
    const GaussMarkovModel model = with_observations(base, sim.observations);
    BackwardPassResult backward = backward_pass(model);

    const bool want_smoother = config.estimator != Estimator::Mle;
    const bool want_mle = config.estimator != Estimator::Smoother;

    std::optional<SmoothingResult> smoothed;
    if (want_smoother) {
        const InitialPosterior posterior0 = fuse_initial(backward.initial_likelihood(), FlatEverywhere{});
        smoothed = propagate_marginals(posterior0, backward.transitions);
    }

    ReplicationResult out;
    out.seed = seed;
    out.rows.reserve(config.horizon + 1);
    for (std::size_t t = 0; t <= config.horizon; ++t) {
        DemoRow row;
        row.t = t;
        row.truth = positions(sim.states[t]);
        if (t >= 1 && sim.observations[t - 1]) {
            row.observation = AxisEstimate{(*sim.observations[t - 1])(0), (*sim.observations[t - 1])(1)};
        }
        if (smoothed) {
            const GaussianMarginal& g = smoothed->marginals[t];
            row.smoothed = positions(g.mean);
            row.smoothed_2sd = two_sd(g.cov);
        }
        if (want_mle) {
            const DegenerateGaussian mle = stacked_mle(backward, t);
            row.mle = positions(mle.mean);
            row.mle_2sd = two_sd(mle.cov);
        }
        out.rows.push_back(std::move(row));
    }

    const std::size_t k0 = config.first_obs_index;
    auto rmse = [&](auto&& pick, std::size_t end) {
        double sum = 0.0;
        for (std::size_t t = 0; t < end; ++t) {
            sum += squared_error(*pick(out.rows[t]), out.rows[t].truth);
        }
        return std::sqrt(sum / (2.0 * static_cast<double>(end)));
    };
    auto smooth_of = [](const DemoRow& r) { return r.smoothed; };
    auto mle_of = [](const DemoRow& r) { return r.mle; };

    out.smoother_rmse_prefix = want_smoother ? rmse(smooth_of, k0) : kNaN;
    out.smoother_rmse_all = want_smoother ? rmse(smooth_of, out.rows.size()) : kNaN;
    out.mle_rmse_prefix = want_mle ? rmse(mle_of, k0) : kNaN;
    out.mle_rmse_all = want_mle ? rmse(mle_of, out.rows.size()) : kNaN;

    if (smoothed) {
        double prefix_var = 0.0;
        double suffix_var = 0.0;
        for (const DemoRow& r : out.rows) {
            const AxisEstimate& m = *r.smoothed;
            const AxisEstimate& band = *r.smoothed_2sd;
            out.smoother_covered += std::abs(r.truth.p1 - m.p1) <= band.p1;
            out.smoother_covered += std::abs(r.truth.p2 - m.p2) <= band.p2;
            out.smoother_checked += 2;
            const double var = 0.125 * (band.p1 * band.p1 + band.p2 * band.p2);  // mean of the two variances
            (r.t < k0 ? prefix_var : suffix_var) += var;
        }
        out.prefix_variance_mean = prefix_var / static_cast<double>(k0);
        out.suffix_variance_mean = suffix_var / static_cast<double>(out.rows.size() - k0);
    }
    return out;
}

std::vector<ReplicationResult> run_replications_serial(const DemoConfig& config) {
    validate_config(config);
    std::vector<ReplicationResult> out;
    out.reserve(config.replications);
    for (std::size_t r = 0; r < config.replications; ++r) {
        out.push_back(run_replication(config, config.seed + r));
    }
    return out;
}

std::vector<ReplicationResult> run_replications_parallel(const DemoConfig& config) {
    validate_config(config);
    std::vector<ReplicationResult> out(config.replications);
    std::exception_ptr failure;
    const auto count = static_cast<std::ptrdiff_t>(config.replications);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t r = 0; r < count; ++r) {
        try {
            out[static_cast<std::size_t>(r)] = run_replication(config, config.seed + static_cast<std::uint64_t>(r));
        } catch (...) {
#pragma omp critical(gmsmooth_demo_failure)
            if (!failure) {
                failure = std::current_exception();
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return out;
}

DemoSummary summarize(const std::vector<ReplicationResult>& results) {
    DemoSummary s;
    s.replications = results.size();
    if (results.empty()) {
        return s;
    }
    std::size_t covered = 0;
    std::size_t checked = 0;
    s.max_prefix_rmse_gap = -std::numeric_limits<double>::infinity();
    for (const ReplicationResult& r : results) {
        const double gap = (r.smoother_rmse_prefix - r.mle_rmse_prefix) / r.mle_rmse_prefix;
        s.smoother_not_worse += gap <= kRmseComparisonSlack;
        s.max_prefix_rmse_gap = std::max(s.max_prefix_rmse_gap, gap);
        covered += r.smoother_covered;
        checked += r.smoother_checked;
        s.mean_smoother_rmse_prefix += r.smoother_rmse_prefix;
        s.mean_mle_rmse_prefix += r.mle_rmse_prefix;
        s.mean_smoother_rmse_all += r.smoother_rmse_all;
        s.mean_mle_rmse_all += r.mle_rmse_all;
    }
    const auto n = static_cast<double>(results.size());
    s.smoother_not_worse_fraction = static_cast<double>(s.smoother_not_worse) / n;
    s.coverage = checked > 0 ? static_cast<double>(covered) / static_cast<double>(checked) : kNaN;
    s.mean_smoother_rmse_prefix /= n;
    s.mean_mle_rmse_prefix /= n;
    s.mean_smoother_rmse_all /= n;
    s.mean_mle_rmse_all /= n;
    return s;
}

std::string format_number(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

void write_demo_csv(std::ostream& out, const ReplicationResult& result) {
    out << "t,true_p1,true_p2,obs_p1,obs_p2,smooth_p1,smooth_p2,smooth_2sd_p1,smooth_2sd_p2,"
           "mle_p1,mle_p2,mle_2sd_p1,mle_2sd_p2\n";
    auto pair = [&](const std::optional<AxisEstimate>& v) {
        if (v) {
            out << ',' << format_number(v->p1) << ',' << format_number(v->p2);
        } else {
            out << ",,";
        }
    };
    for (const DemoRow& r : result.rows) {
        out << r.t;
        pair(r.truth);
        pair(r.observation);
        pair(r.smoothed);
        pair(r.smoothed_2sd);
        pair(r.mle);
        pair(r.mle_2sd);
        out << '\n';
    }
}

nlohmann::json summary_to_json(const DemoConfig& c, const DemoSummary& s) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    nlohmann::json ref = nlohmann::json::array();
    for (Eigen::Index i = 0; i < c.reference_initial_state.size(); ++i) {
        ref.push_back(c.reference_initial_state(i));
    }
    return nlohmann::json{
        {"config",
         {{"dt", c.dt},
          {"horizon", c.horizon},
          {"first_obs_index", c.first_obs_index},
          {"sigma", {c.sigma1, c.sigma2}},
          {"lambda", {c.lambda1, c.lambda2}},
          {"seed", c.seed},
          {"reference_initial_state", ref},
          {"estimator", to_string(c.estimator)},
          {"replications", c.replications}}},
        {"replications", s.replications},
        {"smoother_not_worse", s.smoother_not_worse},
        {"smoother_not_worse_fraction", num(s.smoother_not_worse_fraction)},
        {"max_prefix_rmse_gap", num(s.max_prefix_rmse_gap)},
        {"coverage_2sd", num(s.coverage)},
        {"mean_rmse_prefix", {{"smoother", num(s.mean_smoother_rmse_prefix)}, {"mle", num(s.mean_mle_rmse_prefix)}}},
        {"mean_rmse_all", {{"smoother", num(s.mean_smoother_rmse_all)}, {"mle", num(s.mean_mle_rmse_all)}}},
    };
}

}  // namespace gmsmooth
