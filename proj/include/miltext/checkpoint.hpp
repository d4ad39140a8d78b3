#pragma once

#include <string>

#include "miltext/params.hpp"

namespace miltext {

// Flat binary parameter container, format "MTCP" version 1 (see README for
// the byte layout). Writes are atomic: a temp file is renamed into place.
void save_params(const std::string& path, const ModelParams& params);
ModelParams load_params(const std::string& path);

}  // namespace miltext
