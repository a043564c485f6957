#include "mollify/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mollify/error.hpp"

namespace mollify {

using nlohmann::json;

json model_to_json(const MlpModel& model) {
  json j;
  j["layer_dims"] = model.layer_dims();
  j["activation"] = std::string(activation_name(model.activation()));
  j["weights"] = model.weights();
  j["biases"] = model.biases();
  if (model.target() != 0) j["target"] = model.target();
  return j;
}

MlpModel model_from_json(const json& j) {
  try {
    if (!j.is_object()) throw ConfigInvalid("model JSON must be an object");
    for (const char* key : {"layer_dims", "activation", "weights", "biases"}) {
      if (!j.contains(key)) throw ConfigInvalid(std::string("model JSON is missing '") + key + "'");
    }
    auto dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    auto act = parse_activation(j.at("activation").get<std::string>());
    auto weights = j.at("weights").get<std::vector<Vector>>();
    auto biases = j.at("biases").get<std::vector<Vector>>();
    const std::size_t target = j.value("target", std::size_t{0});
    for (const auto* group : {&weights, &biases}) {
      for (const Vector& v : *group) {
        for (double x : v) {
          if (!std::isfinite(x)) throw ConfigInvalid("model parameters must be finite");
        }
      }
    }
    return MlpModel(std::move(dims), act, std::move(weights), std::move(biases), target);
  } catch (const json::exception& e) {
    throw ConfigInvalid(std::string("malformed model JSON: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

MlpModel load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigInvalid("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << model_to_json(model).dump(1) << '\n';
}

Vector load_vector(const std::filesystem::path& path) {
  try {
    const json j = json::parse(read_text_file(path));
    if (!j.is_array()) throw ConfigInvalid("input file must hold a JSON array of numbers");
    Vector v = j.get<Vector>();
    for (double x : v) {
      if (!std::isfinite(x)) throw ConfigInvalid("input values must be finite");
    }
    return v;
  } catch (const json::exception& e) {
    throw ConfigInvalid("'" + path.string() + "' is not a JSON array of numbers: " + e.what());
  }
}

}  // namespace mollify
