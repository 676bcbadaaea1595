#include "lcs/serialization.hpp"

#include <fstream>

#include "lcs/error.hpp"

namespace lcs {

using nlohmann::json;

namespace {

json to_array(const Eigen::VectorXd& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd from_array(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

json forest_to_json(const Forest& forest)
{
    json trees = json::array();
    for (const auto& tree : forest.trees) {
        std::vector<std::int32_t> feature, left, right;
        std::vector<double> threshold, value;
        std::vector<std::uint32_t> size;
        for (const auto& node : tree.nodes) {
            feature.push_back(node.feature);
            threshold.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            value.push_back(node.value);
            size.push_back(node.size);
        }
        trees.push_back({{"feature", feature},
                         {"threshold", threshold},
                         {"left", left},
                         {"right", right},
                         {"value", value},
                         {"size", size}});
    }
    return {{"config",
             {{"n_tree", forest.config.n_tree},
              {"m_try", forest.config.m_try},
              {"min_node_size", forest.config.min_node_size},
              {"seed", forest.config.seed}}},
            {"n_features", forest.n_features},
            {"y_min", forest.y_min},
            {"y_max", forest.y_max},
            {"trees", trees}};
}

Forest forest_from_json(const json& j)
{
    try {
        Forest f;
        const auto& c = j.at("config");
        f.config.n_tree = c.at("n_tree").get<std::size_t>();
        f.config.m_try = c.at("m_try").get<std::size_t>();
        f.config.min_node_size = c.at("min_node_size").get<std::size_t>();
        f.config.seed = c.at("seed").get<std::uint64_t>();
        f.n_features = j.at("n_features").get<std::size_t>();
        f.y_min = j.at("y_min").get<double>();
        f.y_max = j.at("y_max").get<double>();
        for (const auto& t : j.at("trees")) {
            const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
            const auto threshold = t.at("threshold").get<std::vector<double>>();
            const auto left = t.at("left").get<std::vector<std::int32_t>>();
            const auto right = t.at("right").get<std::vector<std::int32_t>>();
            const auto value = t.at("value").get<std::vector<double>>();
            const auto size = t.at("size").get<std::vector<std::uint32_t>>();
            const auto n = feature.size();
            if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n ||
                size.size() != n || n == 0)
                throw DataError("forest JSON: inconsistent node arrays");
            RegressionTree tree;
            tree.nodes.resize(n);
            for (std::size_t k = 0; k < n; ++k) {
                tree.nodes[k] = {feature[k], threshold[k], left[k], right[k], value[k], size[k]};
                const bool leaf = feature[k] < 0;
                if (!leaf && (feature[k] >= static_cast<std::int32_t>(f.n_features) || left[k] <= 0 ||
                              right[k] <= 0 || static_cast<std::size_t>(left[k]) >= n ||
                              static_cast<std::size_t>(right[k]) >= n))
                    throw DataError("forest JSON: node " + std::to_string(k) + " has invalid links");
            }
            f.trees.push_back(std::move(tree));
        }
        return f;
    } catch (const json::exception& e) {
        throw DataError(std::string("forest JSON: ") + e.what());
    }
}

json model_to_json(const CorrectionModel& model)
{
    json j;
    j["model_id"] = model.id.name();
    j["terms"] = model.terms;
    json coefficients = json::array();
    for (const auto& [name, value] : model.coefficients())
        coefficients.push_back({{"term", name}, {"value", value}});
    j["coefficients"] = coefficients;
    if (model.slope_se.size() > 0) {
        j["slope_se"] = to_array(model.slope_se);
        j["intercept_se"] = model.intercept_se;
    }
    j["training_window"] = to_string(model.training_window);
    j["device_id"] = model.training_device;
    j["n"] = model.n;
    if (model.training_metrics) {
        j["training_r"] = model.training_metrics->r ? json(*model.training_metrics->r) : json(nullptr);
        j["training_rmse"] = model.training_metrics->rmse;
    }
    if (model.oob_pseudo_r2)
        j["oob_pseudo_r2"] = *model.oob_pseudo_r2;
    if (model.forest)
        j["forest"] = forest_to_json(*model.forest);
    return j;
}

CorrectionModel model_from_json(const json& j)
{
    try {
        CorrectionModel m;
        const auto id = ModelId::parse(j.at("model_id").get<std::string>());
        if (!id)
            throw DataError("model JSON: unknown model_id " + j.at("model_id").dump());
        m.id = *id;
        m.terms = j.at("terms").get<std::vector<std::string>>();
        const auto& coefficients = j.at("coefficients");
        if (!coefficients.empty()) {
            if (coefficients.size() != m.terms.size() + 1)
                throw DataError("model JSON: expected " + std::to_string(m.terms.size() + 1) + " coefficients, found " +
                                std::to_string(coefficients.size()));
            m.slopes.resize(static_cast<Eigen::Index>(m.terms.size()));
            for (std::size_t k = 0; k < m.terms.size(); ++k) {
                if (coefficients[k].at("term").get<std::string>() != m.terms[k])
                    throw DataError("model JSON: coefficient " + std::to_string(k) + " does not match term '" +
                                    m.terms[k] + "'");
                m.slopes(static_cast<Eigen::Index>(k)) = coefficients[k].at("value").get<double>();
            }
            m.intercept = coefficients.back().at("value").get<double>();
        }
        if (j.contains("slope_se")) {
            m.slope_se = from_array(j.at("slope_se"));
            m.intercept_se = j.at("intercept_se").get<double>();
        }
        const auto window = parse_window(j.at("training_window").get<std::string>());
        if (!window)
            throw DataError("model JSON: unknown training_window");
        m.training_window = *window;
        m.training_device = j.at("device_id").get<std::string>();
        m.n = j.at("n").get<std::size_t>();
        if (j.contains("training_rmse")) {
            MetricPair mp;
            mp.n = m.n;
            mp.rmse = j.at("training_rmse").get<double>();
            if (!j.at("training_r").is_null())
                mp.r = j.at("training_r").get<double>();
            m.training_metrics = mp;
        }
        if (j.contains("oob_pseudo_r2"))
            m.oob_pseudo_r2 = j.at("oob_pseudo_r2").get<double>();
        if (j.contains("forest"))
            m.forest = forest_from_json(j.at("forest"));
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("model JSON: ") + e.what());
    }
}

CorrectionModel load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open model file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    return model_from_json(j);
}

} // namespace lcs
