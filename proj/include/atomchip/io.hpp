#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

namespace atomchip {

inline constexpr const char* kToolVersion = "0.1.0";

/// Replay record written next to every set of outputs.
struct RunManifest {
    std::string name;  // file name, e.g. "transport_sweep.manifest.json"
    std::string command;
    std::string scene_name;
    std::string scene_hash;
    std::string scene_document;  // resolved scene JSON
    std::map<std::string, std::string> parameters;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string started_utc;
    std::string finished_utc;
    std::vector<std::string> outputs;

    [[nodiscard]] std::string to_json() const;
    void write(const std::filesystem::path& dir) const;
};

/// Current UTC time as ISO 8601.
std::string utc_now();

/// Shortest round-trip decimal text of a double ("nan" and "inf" spelled out).
std::string format_number(double v);

/// Comma-separated output with LF endings. The first line names the
/// manifest as a comment, then the header row.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& manifest_name,
              const std::vector<std::string>& header);

    CsvWriter& cell(double v);
    CsvWriter& cell(long long v);
    CsvWriter& cell(const std::string& v);
    /// Empty cell.
    CsvWriter& blank();
    void end_row();
    void row(std::initializer_list<double> values);

private:
    void sep();
    std::ofstream out_;
    std::size_t columns_;
    std::size_t filled_ = 0;
};

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool markers = false;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
};

/// Static SVG 1.1 line plot.
std::string render_svg(const LinePlot& plot);

struct HeatMap {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::string value_label;
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 1.0;
    std::size_t nx = 0, ny = 0;
    std::vector<double> values;  // row-major, row j at y_min + j dy
};

std::string render_svg(const HeatMap& map);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace atomchip
