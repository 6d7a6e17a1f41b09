#include "gmsmooth/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "gmsmooth/demo.hpp"
#include "gmsmooth/forward.hpp"
#include "gmsmooth/likelihood.hpp"
#include "gmsmooth/model_json.hpp"
#include "gmsmooth/oracle.hpp"
#include "gmsmooth/sqrt_backward.hpp"

namespace gmsmooth {

namespace {

using nlohmann::json;

std::string marginals_csv(const std::vector<GaussianMarginal>& marginals, std::size_t n) {
    std::ostringstream out;
    out << 't';
    for (std::size_t i = 1; i <= n; ++i) {
        out << ",mean_" << i;
    }
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            out << ",cov_" << i << '_' << j;
        }
    }
    out << '\n';
    for (std::size_t t = 0; t < marginals.size(); ++t) {
        const GaussianMarginal& g = marginals[t];
        out << t;
        for (Eigen::Index i = 0; i < g.mean.size(); ++i) {
            out << ',' << format_number(g.mean(i));
        }
        for (Eigen::Index i = 0; i < g.cov.rows(); ++i) {
            for (Eigen::Index j = 0; j < g.cov.cols(); ++j) {
                out << ',' << format_number(g.cov(i, j));
            }
        }
        out << '\n';
    }
    return out.str();
}

std::string backward_csv(const BackwardPassResult& backward, std::size_t n) {
    std::ostringstream out;
    out << "t,m_bar,log_c,rank";
    for (std::size_t i = 1; i <= n; ++i) {
        out << ",mle_" << i;
    }
    out << '\n';
    for (std::size_t t = 0; t <= backward.horizon(); ++t) {
        const LogQuadLikelihood& lik = t == 0 ? backward.initial_likelihood() : backward.given_current[t - 1];
        const DegenerateGaussian mle = likelihood_moments(lik);
        out << t << ',' << lik.rows() << ',' << format_number(lik.log_c) << ',' << mle.rank;
        for (Eigen::Index i = 0; i < mle.mean.size(); ++i) {
            out << ',' << format_number(mle.mean(i));
        }
        out << '\n';
    }
    return out.str();
}

json evidence_json(const LogEvidence& e) {
    return e.infinite ? json("infinite") : json(e.value);
}

std::string kind_name(PosteriorKind k) {
    return k == PosteriorKind::Proper ? "proper" : "degenerate-on-support";
}

}  // namespace

Pipeline parse_pipeline(const std::string& name) {
    if (name == "filter") return Pipeline::Filter;
    if (name == "smoother") return Pipeline::Smoother;
    if (name == "sqrt-smoother") return Pipeline::SqrtSmoother;
    if (name == "two-filter") return Pipeline::TwoFilter;
    if (name == "backward-only") return Pipeline::BackwardOnly;
    if (name == "evidence") return Pipeline::Evidence;
    throw std::invalid_argument("unknown pipeline \"" + name + "\"");
}

std::string to_string(Pipeline p) {
    switch (p) {
        case Pipeline::Filter: return "filter";
        case Pipeline::Smoother: return "smoother";
        case Pipeline::SqrtSmoother: return "sqrt-smoother";
        case Pipeline::TwoFilter: return "two-filter";
        case Pipeline::BackwardOnly: return "backward-only";
        case Pipeline::Evidence: return "evidence";
    }
    return "smoother";
}

PipelineOutput run_pipeline(const GaussMarkovModel& model, Pipeline pipeline) {
    require_valid(model);
    std::size_t observed = 0;
    for (const auto& rec : model.observations) {
        observed += !rec.missing();
    }
    PipelineOutput out;
    out.summary = json{{"pipeline", to_string(pipeline)},
                       {"state_dim", model.state_dim},
                       {"horizon", model.horizon},
                       {"observed_steps", observed},
                       {"log_likelihood", nullptr},
                       {"initial_posterior_kind", nullptr},
                       {"initial_rank", nullptr}};
    const std::size_t n = model.state_dim;

    switch (pipeline) {
        case Pipeline::Filter: {
            const FilterResult f = kalman_filter(model);
            out.csv = marginals_csv(f.filtered, n);
            out.summary["log_likelihood"] = f.log_likelihood;
            break;
        }
        case Pipeline::TwoFilter: {
            out.csv = marginals_csv(two_filter_smoother(model), n);
            out.summary["log_likelihood"] = kalman_filter(model).log_likelihood;
            break;
        }
        case Pipeline::Smoother:
        case Pipeline::SqrtSmoother: {
            const SmoothingResult r = pipeline == Pipeline::Smoother ? smooth(model) : sqrt_smooth(model);
            out.csv = marginals_csv(r.marginals, n);
            out.summary["log_likelihood"] = evidence_json(r.log_likelihood);
            out.summary["initial_posterior_kind"] = kind_name(r.initial_kind);
            if (r.initial_support) {
                out.summary["initial_rank"] = r.initial_support->rank;
            }
            break;
        }
        case Pipeline::BackwardOnly: {
            const BackwardPassResult backward = backward_pass(model);
            out.csv = backward_csv(backward, n);
            out.summary["x0_log_c"] = backward.initial_likelihood().log_c;
            break;
        }
        case Pipeline::Evidence: {
            const BackwardPassResult backward = backward_pass(model);
            const InitialPosterior p = fuse_initial(backward.initial_likelihood(), model.initial);
            out.summary["log_likelihood"] = evidence_json(p.log_likelihood);
            out.summary["initial_posterior_kind"] = kind_name(p.kind);
            if (p.support) {
                out.summary["initial_rank"] = p.support->rank;
            }
            break;
        }
    }
    return out;
}

PipelineOutput run_model_file(const std::filesystem::path& model_path, Pipeline pipeline,
                              const std::optional<std::filesystem::path>& csv_path,
                              const std::optional<std::filesystem::path>& summary_path) {
    const GaussMarkovModel model = load_model(model_path);
    PipelineOutput out = run_pipeline(model, pipeline);
    if (csv_path && !out.csv.empty()) {
        std::ofstream f(*csv_path, std::ios::binary);
        if (!(f << out.csv)) {
            throw std::runtime_error("cannot write " + csv_path->string());
        }
    }
    if (summary_path) {
        std::ofstream f(*summary_path, std::ios::binary);
        if (!(f << out.summary.dump(2) << '\n')) {
            throw std::runtime_error("cannot write " + summary_path->string());
        }
    }
    return out;
}

}  // namespace gmsmooth
