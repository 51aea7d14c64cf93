#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "atomchip/io.hpp"
#include "atomchip/scene.hpp"

namespace atomchip::cli {

/// Exit codes of the tool.
enum ExitCode : int { kOk = 0, kUsage = 2, kSceneError = 3, kPhysicsError = 4 };

/// Flags shared by every subcommand that writes files.
struct Common {
    std::string scene;
    std::string out = "out";
    int threads = 0;
    bool plot = false;
};

void add_common(CLI::App& sub, Common& c, const std::string& default_scene);

/// Number with a mandatory unit suffix, e.g. "0.5cm_s" -> 0.005 with
/// units {{"cm_s", 1e-2}, ...}. Throws CLI::ValidationError.
double parse_quantity(const std::string& text, const std::map<std::string, double>& units,
                      const std::string& what);

/// Comma-separated list sharing a unit suffix on the last element or given
/// per element, e.g. "0.25,0.5,1cm_s".
std::vector<double> parse_quantity_list(const std::string& text, const std::map<std::string, double>& units,
                                        const std::string& what);

/// "x,y,z" in micrometres -> metres.
Vec3 parse_um_triple(const std::string& text, const std::string& what);

std::vector<std::string> split(const std::string& text, char sep);

/// Loaded scene plus bookkeeping for one run's outputs.
class Run {
public:
    Run(const std::string& command, const Common& common, const CLI::App& sub);

    [[nodiscard]] const Scene& scene() const { return scene_; }
    [[nodiscard]] Scene& scene() { return scene_; }
    [[nodiscard]] int threads() const { return common_.threads; }
    [[nodiscard]] bool plot() const { return common_.plot; }
    [[nodiscard]] const std::string& manifest_name() const { return manifest_.name; }

    void set_seed(std::uint64_t seed) { manifest_.seed = seed; }
    void note(const std::string& key, const std::string& value) { manifest_.parameters[key] = value; }

    /// Path for an output file; registers it in the manifest.
    std::filesystem::path output(const std::string& file);
    CsvWriter csv(const std::string& file, const std::vector<std::string>& header);
    void svg(const std::string& file, const std::string& document);

    /// Writes the manifest and lists the outputs on stdout.
    void finish();

private:
    std::string command_;
    Common common_;
    Scene scene_;
    RunManifest manifest_;
};

/// Runs without a scene (plot).
RunManifest bare_manifest(const std::string& command, const CLI::App& sub);

/// Echo of every option of a subcommand (value or default).
std::map<std::string, std::string> option_echo(const CLI::App& sub);

}  // namespace atomchip::cli
