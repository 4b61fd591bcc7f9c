#pragma once

#include "sidlab/engine.hpp"
#include "sidlab/exits.hpp"
#include "sidlab/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace sidlab {

using Json = nlohmann::json;

Json to_json(const ModelConfig& c);
// `path` prefixes key diagnostics, e.g. "model"
ModelConfig model_from_json(const Json& j, const std::string& path = "model");

Json to_json(const IntegratorSettings& s);
IntegratorSettings settings_from_json(const Json& j, const std::string& path = "integrator");

Json to_json(const Domain& d);
Domain domain_from_json(const Json& j, const std::string& path = "domain");

Json matrix_to_json(const Matrix& m);
Json vector_to_json(const Vector& v);
Matrix matrix_from_json(const Json& j, const std::string& path);
Vector vector_from_json(const Json& j, const std::string& path);

// FNV-1a over the canonical model JSON, sigma and name excluded
std::uint64_t model_hash(const ModelConfig& c);
std::string hex64(std::uint64_t h);

// field-by-field equality, exact
bool equivalent(const ModelConfig& a, const ModelConfig& b);

// "a.b.c=value"; value is parsed as JSON, falling back to a plain string
void apply_override(Json& root, const std::string& assignment);

}  // namespace sidlab
