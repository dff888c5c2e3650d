#pragma once

#include <json.hpp>

#include <string>

#include "sketchloom/training.hpp"

namespace sketchloom {

// Full default configuration, desk scale: 64x64 images, depth-6 generator.
// Every key the resolver accepts appears here; it doubles as the schema.
nlohmann::json default_config_json();

// Deep-merges user values over the defaults. Unknown keys anywhere in the
// tree and type mismatches are ConfigErrors naming the dotted path.
nlohmann::json resolve_config(const nlohmann::json& user);

// Applies one `a.b.c = value` override to an already-resolved config. The
// path must exist; value_text is parsed as JSON, falling back to a string.
void apply_dotted_override(nlohmann::json& cfg, const std::string& dotted_key,
                           const std::string& value_text);

// Materializes the run setup (train, augment, model, eval sections) and
// validates every component.
TrainSetup setup_from_config(const nlohmann::json& resolved);

}  // namespace sketchloom
