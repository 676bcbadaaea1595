#ifndef LCS_SERIALIZATION_HPP
#define LCS_SERIALIZATION_HPP

#include <string>

#include "json.hpp"

#include "lcs/calibration.hpp"
#include "lcs/forest.hpp"

namespace lcs {

// Doubles are written in shortest round-trip form, so parse(serialize(x)) is exact.

nlohmann::json forest_to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const CorrectionModel& model);
CorrectionModel model_from_json(const nlohmann::json& j);

CorrectionModel load_model(const std::string& path);

} // namespace lcs

#endif // LCS_SERIALIZATION_HPP
