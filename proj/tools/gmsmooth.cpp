// gmsmooth: command-line front end.
//
//   gmsmooth demo [--replications N --seed S --output track.csv --summary summary.json ...]
//   gmsmooth run MODEL.json --pipeline smoother --output marginals.csv --summary summary.json
//   gmsmooth validate MODEL.json

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gmsmooth/demo.hpp"
#include "gmsmooth/model_json.hpp"
#include "gmsmooth/pipeline.hpp"

namespace {

using namespace gmsmooth;

int run_demo(const DemoConfig& config, const std::string& output, const std::string& summary_path, bool serial) {
    const auto results = serial ? run_replications_serial(config) : run_replications_parallel(config);
    if (!output.empty()) {
        std::ofstream csv(output, std::ios::binary);
        if (!csv) {
            throw std::runtime_error("cannot open " + output);
        }
        write_demo_csv(csv, results.front());
    }
    const DemoSummary s = summarize(results);
    if (!summary_path.empty()) {
        std::ofstream js(summary_path, std::ios::binary);
        if (!js) {
            throw std::runtime_error("cannot open " + summary_path);
        }
        js << summary_to_json(config, s).dump(2) << '\n';
    }

    const std::string k0 = std::to_string(config.first_obs_index - 1);
    if (config.estimator != Estimator::Mle) {
        std::printf("smoother  RMSE t=0..%s: %.6g   overall: %.6g\n", k0.c_str(), s.mean_smoother_rmse_prefix,
                    s.mean_smoother_rmse_all);
    }
    if (config.estimator != Estimator::Smoother) {
        std::printf("mle       RMSE t=0..%s: %.6g   overall: %.6g\n", k0.c_str(), s.mean_mle_rmse_prefix,
                    s.mean_mle_rmse_all);
    }
    if (config.estimator == Estimator::Both) {
        std::printf("smoother not worse on prefix: %zu / %zu replications\n", s.smoother_not_worse, s.replications);
    }
    if (config.estimator != Estimator::Mle) {
        std::printf("smoother +-2sd coverage: %.4f\n", s.coverage);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Backward-forward smoothing for partially observed Gauss-Markov models"};
    app.require_subcommand(1);

    DemoConfig config;
    std::vector<double> reference;
    std::string estimator = "both";
    std::string demo_output;
    std::string demo_summary;
    bool serial = false;
    auto* demo = app.add_subcommand("demo", "Planar tracking with an unobserved prefix");
    demo->add_option("--dt", config.dt, "Sampling interval")->capture_default_str();
    demo->add_option("--horizon", config.horizon, "Last time index T")->capture_default_str();
    demo->add_option("--first-obs-index", config.first_obs_index, "First observed time index")->capture_default_str();
    demo->add_option("--sigma1", config.sigma1, "Process intensity, axis 1")->capture_default_str();
    demo->add_option("--sigma2", config.sigma2, "Process intensity, axis 2")->capture_default_str();
    demo->add_option("--lambda1", config.lambda1, "Measurement variance, axis 1")->capture_default_str();
    demo->add_option("--lambda2", config.lambda2, "Measurement variance, axis 2")->capture_default_str();
    demo->add_option("--seed", config.seed, "Seed of the first replication")->capture_default_str();
    demo->add_option("--reference-state", reference, "True x0 as p1 v1 a1 p2 v2 a2")->expected(6);
    demo->add_option("--estimator", estimator, "smoother, mle or both")->capture_default_str();
    demo->add_option("--replications", config.replications, "Number of replications")->capture_default_str();
    demo->add_option("--output", demo_output, "CSV for the first replication");
    demo->add_option("--summary", demo_summary, "JSON summary over all replications");
    demo->add_flag("--serial", serial, "Run replications on one thread");

    std::string model_path;
    std::string pipeline = "smoother";
    std::string run_output;
    std::string run_summary;
    auto* run = app.add_subcommand("run", "Run a pipeline on a JSON model file");
    run->add_option("model", model_path, "Model file")->required();
    run->add_option("--pipeline", pipeline, "filter | smoother | sqrt-smoother | two-filter | backward-only | evidence")
        ->capture_default_str();
    run->add_option("--output", run_output, "CSV output");
    run->add_option("--summary", run_summary, "JSON summary (printed to stdout when omitted)");

    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "Check a JSON model file");
    validate_cmd->add_option("model", validate_path, "Model file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*demo) {
            config.estimator = parse_estimator(estimator);
            if (!reference.empty()) {
                config.reference_initial_state = Eigen::Map<const Vector>(reference.data(), 6);
            }
            validate_config(config);
            return run_demo(config, demo_output, demo_summary, serial);
        }
        if (*run) {
            const Pipeline p = parse_pipeline(pipeline);
            std::optional<std::filesystem::path> csv;
            std::optional<std::filesystem::path> summary;
            if (!run_output.empty()) csv = run_output;
            if (!run_summary.empty()) summary = run_summary;
            const PipelineOutput out = run_model_file(model_path, p, csv, summary);
            if (!summary) {
                std::cout << out.summary.dump(2) << '\n';
            }
            return 0;
        }
        if (*validate_cmd) {
            const auto violations = validate(load_model(validate_path));
            for (const auto& v : violations) {
                std::cerr << v.description << '\n';
            }
            if (violations.empty()) {
                std::cout << "ok\n";
            }
            return violations.empty() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
