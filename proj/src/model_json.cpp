#include "gmsmooth/model_json.hpp"

#include <fstream>
#include <sstream>

namespace gmsmooth {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ModelParseError(where + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) {
        fail(where, "expected an object");
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
        fail(where, std::string("missing field \"") + key + "\"");
    }
    return *it;
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) {
        fail(where, "expected a number");
    }
    return j.get<double>();
}

std::size_t count(const json& j, const std::string& where) {
    if (!j.is_number_integer() || j.get<long long>() < 0) {
        fail(where, "expected a non-negative integer");
    }
    return j.get<std::size_t>();
}

Vector vector_from(const json& j, const std::string& where) {
    if (!j.is_array()) {
        fail(where, "expected an array of numbers");
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = number(j[i], where + "/" + std::to_string(i));
    }
    return v;
}

Matrix matrix_from(const json& j, const std::string& where) {
    if (!j.is_array()) {
        fail(where, "expected an array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) {
        return Matrix(0, 0);
    }
    if (!j[0].is_array()) {
        fail(where + "/0", "expected a row array");
    }
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::string row_where = where + "/" + std::to_string(r);
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            fail(row_where, "ragged matrix row");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = number(row[static_cast<std::size_t>(c)], row_where + "/" + std::to_string(c));
        }
    }
    return m;
}

json to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

json to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        out.push_back(std::move(row));
    }
    return out;
}

Transition transition_from(const json& j, const std::string& where) {
    Matrix phi = matrix_from(field(j, "phi", where), where + "/phi");
    Vector offset = j.contains("offset") ? vector_from(j["offset"], where + "/offset")
                                         : Vector::Zero(phi.rows());
    if (j.contains("noise_chol")) {
        Matrix chol = matrix_from(j["noise_chol"], where + "/noise_chol");
        if (j.contains("noise_cov")) {
            return Transition{std::move(phi), std::move(offset),
                              matrix_from(j["noise_cov"], where + "/noise_cov"), std::move(chol)};
        }
        return Transition::from_factor(std::move(phi), std::move(offset), std::move(chol));
    }
    return Transition::make(std::move(phi), std::move(offset),
                            matrix_from(field(j, "noise_cov", where), where + "/noise_cov"));
}

ObservationModel observation_model_from(const json& j, const std::string& where) {
    return ObservationModel::make(matrix_from(field(j, "c", where), where + "/c"),
                                  matrix_from(field(j, "noise_cov", where), where + "/noise_cov"));
}

json to_json(const Transition& t) {
    json out{{"phi", to_json(t.phi)}, {"offset", to_json(t.offset)}, {"noise_cov", to_json(t.noise_cov)}};
    if (t.noise_chol) {
        out["noise_chol"] = to_json(*t.noise_chol);
    }
    return out;
}

json to_json(const ObservationModel& m) {
    return json{{"c", to_json(m.c)}, {"noise_cov", to_json(m.noise_cov)}};
}

InitialDistribution initial_from(const json& j, const std::string& where) {
    const json& type = field(j, "type", where);
    if (!type.is_string()) {
        fail(where + "/type", "expected a string");
    }
    const auto tag = type.get<std::string>();
    if (tag == "flat_on_support") {
        return FlatOnSupport{};
    }
    if (tag == "flat_everywhere") {
        return FlatEverywhere{};
    }
    if (tag != "proper") {
        fail(where + "/type", "unknown initial distribution \"" + tag + "\"");
    }
    Vector mean = vector_from(field(j, "mean", where), where + "/mean");
    Matrix cov = matrix_from(field(j, "cov", where), where + "/cov");
    if (j.contains("chol")) {
        return ProperPrior{std::move(mean), std::move(cov), matrix_from(j["chol"], where + "/chol")};
    }
    return ProperPrior::make(std::move(mean), std::move(cov));
}

json to_json(const InitialDistribution& init) {
    if (std::holds_alternative<FlatOnSupport>(init)) {
        return json{{"type", "flat_on_support"}};
    }
    if (std::holds_alternative<FlatEverywhere>(init)) {
        return json{{"type", "flat_everywhere"}};
    }
    const auto& p = std::get<ProperPrior>(init);
    json out{{"type", "proper"}, {"mean", to_json(p.mean)}, {"cov", to_json(p.cov)}};
    if (p.chol) {
        out["chol"] = to_json(*p.chol);
    }
    return out;
}

template <typename T, typename Parse>
std::vector<T> per_step(const json& root, const char* shorthand, const char* list, std::size_t horizon,
                        Parse&& parse) {
    const bool has_short = root.contains(shorthand);
    const bool has_list = root.contains(list);
    if (has_short == has_list) {
        fail("/", std::string("exactly one of \"") + shorthand + "\" or \"" + list + "\" is required");
    }
    if (has_short) {
        return std::vector<T>(horizon, parse(root[shorthand], std::string("/") + shorthand));
    }
    const json& arr = root[list];
    if (!arr.is_array() || arr.size() != horizon) {
        fail(std::string("/") + list, "expected an array of length horizon");
    }
    std::vector<T> out;
    out.reserve(horizon);
    for (std::size_t i = 0; i < horizon; ++i) {
        out.push_back(parse(arr[i], std::string("/") + list + "/" + std::to_string(i)));
    }
    return out;
}

std::string line_context(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

GaussMarkovModel parse_model(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ModelParseError("malformed JSON at " + line_context(text, e.byte > 0 ? e.byte - 1 : 0) +
                              ": " + e.what());
    }
    if (!root.is_object()) {
        fail("/", "expected a JSON object");
    }

    GaussMarkovModel model;
    model.state_dim = count(field(root, "state_dim", "/"), "/state_dim");
    model.horizon = count(field(root, "horizon", "/"), "/horizon");
    model.transitions = per_step<Transition>(root, "transition", "transitions", model.horizon,
                                             transition_from);
    const auto models = per_step<ObservationModel>(root, "observation_model", "observation_models",
                                                   model.horizon, observation_model_from);

    const json& obs = field(root, "observations", "/");
    if (!obs.is_array() || obs.size() != model.horizon) {
        fail("/observations", "expected an array of length horizon (null marks a missing value)");
    }
    for (std::size_t i = 0; i < model.horizon; ++i) {
        ObservationRecord rec{i + 1, models[i], std::nullopt};
        if (!obs[i].is_null()) {
            rec.value = vector_from(obs[i], "/observations/" + std::to_string(i));
        }
        model.observations.push_back(std::move(rec));
    }
    model.initial = initial_from(field(root, "initial", "/"), "/initial");
    return model;
}

GaussMarkovModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ModelParseError("cannot open model file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

json model_to_json(const GaussMarkovModel& model) {
    json out;
    out["state_dim"] = model.state_dim;
    out["horizon"] = model.horizon;

    auto all_equal = [](const auto& items, auto&& get) {
        for (std::size_t i = 1; i < items.size(); ++i) {
            if (!(get(items[i]) == get(items[0]))) {
                return false;
            }
        }
        return !items.empty();
    };

    if (all_equal(model.transitions, [](const Transition& t) -> const Transition& { return t; })) {
        out["transition"] = to_json(model.transitions.front());
    } else {
        json arr = json::array();
        for (const auto& t : model.transitions) {
            arr.push_back(to_json(t));
        }
        out["transitions"] = std::move(arr);
    }

    auto model_of = [](const ObservationRecord& r) -> const ObservationModel& { return r.model; };
    if (all_equal(model.observations, model_of)) {
        out["observation_model"] = to_json(model.observations.front().model);
    } else {
        json arr = json::array();
        for (const auto& r : model.observations) {
            arr.push_back(to_json(r.model));
        }
        out["observation_models"] = std::move(arr);
    }

    json obs = json::array();
    for (const auto& r : model.observations) {
        obs.push_back(r.value ? to_json(*r.value) : json(nullptr));
    }
    out["observations"] = std::move(obs);
    out["initial"] = to_json(model.initial);
    return out;
}

std::string serialize_model(const GaussMarkovModel& model) {
    return model_to_json(model).dump(2);
}

}  // namespace gmsmooth
