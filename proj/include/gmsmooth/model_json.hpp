// JSON model files.
//
//   {
//     "state_dim": 1,
//     "horizon": 3,
//     "transition": {"phi": [[1]], "offset": [0], "noise_cov": [[1]]},
//     "observation_model": {"c": [[1]], "noise_cov": [[1]]},
//     "observations": [[0.5], null, [1.2]],
//     "initial": {"type": "proper", "mean": [0], "cov": [[1]]}
//   }
//
// "transition" / "observation_model" repeat one entry for every step; the
// per-step forms are "transitions" / "observation_models" (arrays of length
// horizon). Matrices are arrays of rows. A transition may carry an explicit
// lower-triangular "noise_chol"; a proper prior may carry "chol". Initial
// types: "proper", "flat_on_support", "flat_everywhere".

#ifndef GMSMOOTH_MODEL_JSON_HPP
#define GMSMOOTH_MODEL_JSON_HPP

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "gmsmooth/model.hpp"

namespace gmsmooth {

class ModelParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

GaussMarkovModel parse_model(std::string_view text);
GaussMarkovModel load_model(const std::filesystem::path& path);

nlohmann::json model_to_json(const GaussMarkovModel& model);
std::string serialize_model(const GaussMarkovModel& model);

}  // namespace gmsmooth

#endif  // GMSMOOTH_MODEL_JSON_HPP
