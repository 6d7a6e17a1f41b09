// Batch runs over a model file: one estimator, one marginals CSV, one JSON summary.
//
// Summary schema:
//   {
//     "pipeline": "smoother",
//     "state_dim": 2, "horizon": 10, "observed_steps": 8,
//     "log_likelihood": -12.3 | "infinite" | null,
//     "initial_posterior_kind": "proper" | "degenerate-on-support" | null,
//     "initial_rank": 2 | null
//   }

#ifndef GMSMOOTH_PIPELINE_HPP
#define GMSMOOTH_PIPELINE_HPP

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "gmsmooth/model.hpp"

namespace gmsmooth {

enum class Pipeline { Filter, Smoother, SqrtSmoother, TwoFilter, BackwardOnly, Evidence };

Pipeline parse_pipeline(const std::string& name);
std::string to_string(Pipeline p);

struct PipelineOutput {
    std::string csv;  // empty for Pipeline::Evidence
    nlohmann::json summary;
};

/// Marginal pipelines write  t, mean_1..mean_n, cov_1_1..cov_n_n  (row-major).
/// BackwardOnly writes  t, m_bar, log_c, rank, mle_1..mle_n  for h_{t:T|t}
/// (t = 0 holds h_{1:T|0}).
PipelineOutput run_pipeline(const GaussMarkovModel& model, Pipeline pipeline);

/// Loads, validates, runs, and writes the requested files.
PipelineOutput run_model_file(const std::filesystem::path& model_path, Pipeline pipeline,
                              const std::optional<std::filesystem::path>& csv_path,
                              const std::optional<std::filesystem::path>& summary_path);

}  // namespace gmsmooth

#endif  // GMSMOOTH_PIPELINE_HPP
