#pragma once

#include <memory>
#include <string>

#include "model.hpp"

namespace gmnmlab {

// Parameter snapshots: one JSON object with the model kind, its config and
// every named tensor. Floats are written as C99 hex literals so a
// save/load round trip is bit-exact.
void snapshot_save(Model& model, const std::string& path);
std::unique_ptr<Model> snapshot_load(const std::string& path);

std::string snapshot_string(Model& model);
std::unique_ptr<Model> snapshot_from_string(const std::string& text);

}  // namespace gmnmlab
