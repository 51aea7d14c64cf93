#include "atomchip/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <sstream>

#include "atomchip/errors.hpp"
#include "json.hpp"

namespace atomchip {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // no "-0"
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "atomchip";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["scene_name"] = scene_name;
    j["scene_hash"] = scene_hash;
    j["parameters"] = parameters;
    j["seed"] = seed;
    j["threads"] = threads;
    j["started_utc"] = started_utc;
    j["finished_utc"] = finished_utc;
    j["outputs"] = outputs;
    j["scene"] = scene_document.empty() ? nlohmann::ordered_json(nullptr)
                                        : nlohmann::ordered_json::parse(scene_document);
    return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& dir) const { write_text(dir / name, to_json()); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& manifest_name,
                     const std::vector<std::string>& header)
    : columns_(header.size()) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary);
    if (!out_) throw Error("cannot write " + path.string());
    out_ << "# manifest: " << manifest_name << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
}

void CsvWriter::sep() {
    if (filled_ >= columns_) throw Error("CsvWriter: too many cells in row");
    if (filled_++) out_ << ',';
}

CsvWriter& CsvWriter::cell(double v) {
    sep();
    out_ << format_number(v);
    return *this;
}

CsvWriter& CsvWriter::cell(long long v) {
    sep();
    out_ << v;
    return *this;
}

CsvWriter& CsvWriter::cell(const std::string& v) {
    sep();
    if (v.find_first_of(",\"\n") == std::string::npos) {
        out_ << v;
    } else {
        out_ << '"';
        for (char c : v) out_ << (c == '"' ? "\"\"" : std::string(1, c));
        out_ << '"';
    }
    return *this;
}

CsvWriter& CsvWriter::blank() {
    sep();
    return *this;
}

void CsvWriter::end_row() {
    if (filled_ != columns_) throw Error("CsvWriter: row has " + std::to_string(filled_) + " of " +
                                         std::to_string(columns_) + " cells");
    out_ << '\n';
    filled_ = 0;
}

void CsvWriter::row(std::initializer_list<double> values) {
    for (double v : values) cell(v);
    end_row();
}

namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 80, kRight = 30, kTop = 40, kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

std::vector<double> nice_ticks(double lo, double hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> t;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(v);
    return t;
}

struct Frame {
    double x0, x1, y0, y1;
    [[nodiscard]] double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    [[nodiscard]] double py(double y) const {
        return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
    }
};

void widen(double& lo, double& hi) {
    if (!(hi > lo)) {
        const double d = lo == 0.0 ? 1.0 : 0.05 * std::abs(lo);
        lo -= d;
        hi += d;
    }
}

void axes(std::ostringstream& s, const Frame& f, const std::string& title, const std::string& xl,
          const std::string& yl) {
    s << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << esc(title)
      << "</text>\n";
    s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
      << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : nice_ticks(f.x0, f.x1)) {
        const double x = f.px(t);
        s << "<line x1=\"" << num(x) << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << num(x) << "\" y2=\""
          << kHeight - kBottom + 5 << "\" stroke=\"black\"/>";
        s << "<text x=\"" << num(x) << "\" y=\"" << kHeight - kBottom + 20
          << "\" text-anchor=\"middle\" font-size=\"12\">" << tick_label(t) << "</text>\n";
    }
    for (double t : nice_ticks(f.y0, f.y1)) {
        const double y = f.py(t);
        s << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(y) << "\" x2=\"" << kLeft << "\" y2=\"" << num(y)
          << "\" stroke=\"black\"/>";
        s << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\" font-size=\"12\">"
          << tick_label(t) << "</text>\n";
    }
    s << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\" font-size=\"14\">" << esc(xl) << "</text>\n";
    s << "<text transform=\"translate(20," << num((kTop + kHeight - kBottom) / 2)
      << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"14\">" << esc(yl) << "</text>\n";
}

std::string header() {
    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return s.str();
}

}  // namespace

std::string render_svg(const LinePlot& plot) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& sr : plot.series) {
        if (sr.x.size() != sr.y.size()) throw DomainError("render_svg: series '" + sr.label + "' has x/y mismatch");
        for (std::size_t i = 0; i < sr.x.size(); ++i) {
            if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) continue;
            x0 = std::min(x0, sr.x[i]);
            x1 = std::max(x1, sr.x[i]);
            y0 = std::min(y0, sr.y[i]);
            y1 = std::max(y1, sr.y[i]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    widen(x0, x1);
    widen(y0, y1);
    const double pad = 0.05 * (y1 - y0);
    const Frame f{x0, x1, y0 - pad, y1 + pad};

    std::ostringstream s;
    s << header();
    axes(s, f, plot.title, plot.x_label, plot.y_label);
    for (std::size_t k = 0; k < plot.series.size(); ++k) {
        const auto& sr = plot.series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < sr.x.size(); ++i) {
            if (std::isfinite(sr.x[i]) && std::isfinite(sr.y[i])) s << num(f.px(sr.x[i])) << ',' << num(f.py(sr.y[i])) << ' ';
        }
        s << "\"/>\n";
        if (sr.markers) {
            for (std::size_t i = 0; i < sr.x.size(); ++i) {
                if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) continue;
                s << "<circle cx=\"" << num(f.px(sr.x[i])) << "\" cy=\"" << num(f.py(sr.y[i])) << "\" r=\"3\" fill=\""
                  << color << "\"/>\n";
            }
        }
        if (!sr.label.empty()) {
            const double ly = kTop + 18 + 18 * static_cast<double>(k);
            s << "<line x1=\"" << kWidth - kRight - 150 << "\" y1=\"" << num(ly - 4) << "\" x2=\""
              << kWidth - kRight - 125 << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
              << "\" stroke-width=\"2\"/><text x=\"" << kWidth - kRight - 118 << "\" y=\"" << num(ly)
              << "\" font-size=\"12\">" << esc(sr.label) << "</text>\n";
        }
    }
    s << "</svg>\n";
    return s.str();
}

std::string render_svg(const HeatMap& map) {
    if (map.nx == 0 || map.ny == 0 || map.values.size() != map.nx * map.ny) {
        throw DomainError("render_svg: heat map needs nx * ny values");
    }
    double v0 = INFINITY, v1 = -INFINITY;
    for (double v : map.values) {
        if (!std::isfinite(v)) continue;
        v0 = std::min(v0, v);
        v1 = std::max(v1, v);
    }
    if (!std::isfinite(v0)) v0 = 0, v1 = 1;
    widen(v0, v1);
    double x0 = map.x_min, x1 = map.x_max, y0 = map.y_min, y1 = map.y_max;
    widen(x0, x1);
    widen(y0, y1);
    const Frame f{x0, x1, y0, y1};
    const double dx = (x1 - x0) / static_cast<double>(map.nx);
    const double dy = (y1 - y0) / static_cast<double>(map.ny);

    // perceptually ordered dark-blue -> yellow ramp
    auto color = [&](double v) {
        if (!std::isfinite(v)) return std::string("#888888");
        const double u = std::clamp((v - v0) / (v1 - v0), 0.0, 1.0);
        const int r = static_cast<int>(std::lround(255 * std::clamp(1.6 * u - 0.4, 0.0, 1.0)));
        const int g = static_cast<int>(std::lround(255 * std::clamp(0.1 + 0.85 * u, 0.0, 1.0)));
        const int b = static_cast<int>(std::lround(255 * std::clamp(0.55 - 0.5 * u, 0.0, 1.0)));
        char buf[8];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
        return std::string(buf);
    };

    std::ostringstream s;
    s << header();
    const double cw = (kWidth - kLeft - kRight) / static_cast<double>(map.nx);
    const double ch = (kHeight - kTop - kBottom) / static_cast<double>(map.ny);
    for (std::size_t j = 0; j < map.ny; ++j) {
        for (std::size_t i = 0; i < map.nx; ++i) {
            const double xl = x0 + dx * static_cast<double>(i);
            const double yt = y0 + dy * static_cast<double>(j + 1);
            s << "<rect x=\"" << num(f.px(xl)) << "\" y=\"" << num(f.py(yt)) << "\" width=\"" << num(cw + 0.5)
              << "\" height=\"" << num(ch + 0.5) << "\" fill=\"" << color(map.values[j * map.nx + i]) << "\"/>\n";
        }
    }
    axes(s, f, map.title + "  [" + map.value_label + ": " + tick_label(v0) + " to " + tick_label(v1) + "]",
         map.x_label, map.y_label);
    s << "</svg>\n";
    return s.str();
}

}  // namespace atomchip
