#pragma once

#include <json.hpp>

#include "replay/replay_core.hpp"

namespace replay {

// {"theta":[...],"used":int,"skipped":int,"cond_flag":bool}
void to_json(nlohmann::json& j, const ThetaEstimate& est);
void from_json(const nlohmann::json& j, ThetaEstimate& est);

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);  // array of rows
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace replay
