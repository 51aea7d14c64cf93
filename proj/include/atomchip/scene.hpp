#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "atomchip/field.hpp"
#include "atomchip/waveforms.hpp"

namespace atomchip {

/// Run settings that are not part of the field landscape.
struct SimulationSettings {
    double dt = 0.0;  // s; 0 picks 1 / (40 nu_fastest)
    std::size_t N = 2000;
    std::uint64_t seed = 1;
    bool gravity = true;  // dynamics only; landscapes follow ChipScene::include_gravity
    double T0 = 30e-6;    // K
    double table_spacing = 5e-6;
};

/// Everything a scene file describes.
struct Scene {
    std::string name;
    /// Set when the layout comes from the built-in conveyor pattern.
    std::optional<LayoutParams> layout_params;
    ChipScene chip;
    DriveConfig drive;
    PhaseProfile profile = PhaseProfile::linear(kTwoPi / 0.150, 0.150);
    SimulationSettings sim;
};

/// Parses a scene document. Errors are SceneError with kind "syntax"
/// (with line and column), "schema" (key path), "unit" (field name) or
/// "constraint" (violated invariant). `origin` names the source in messages.
Scene parse_scene(const std::string& text, const std::string& origin = "<scene>");

/// Loads a preset by name or a scene file by path.
Scene load_scene(const std::string& preset_or_path);

/// Fully resolved document (pretty-printed JSON) with every default written
/// out; parse_scene of the result reproduces the scene.
std::string scene_to_json(const Scene& scene);

std::vector<std::string> preset_names();
/// Scene document of a shipped preset; throws SceneError for unknown names.
std::string preset_text(const std::string& name);

/// Stable 64-bit FNV-1a hash of the canonical scene document, as hex.
std::string scene_hash(const Scene& scene);

}  // namespace atomchip
