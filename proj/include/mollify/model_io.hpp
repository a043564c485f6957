#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "mollify/models.hpp"

namespace mollify {

// Model file format:
//   {"layer_dims": [...], "activation": "relu"|"tanh",
//    "weights": [[row-major layer 0], ...], "biases": [[layer 0], ...]}
// An optional "target" selects the scored output coordinate.

nlohmann::json model_to_json(const MlpModel& model);
/// Throws ConfigInvalid on schema errors and DimensionError on shape errors.
MlpModel model_from_json(const nlohmann::json& j);

MlpModel load_model(const std::filesystem::path& path);
void save_model(const MlpModel& model, const std::filesystem::path& path);

/// Reads a JSON array of numbers.
Vector load_vector(const std::filesystem::path& path);

/// Reads a whole file; throws Error when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mollify
