#include "cli_util.hpp"

#include <charconv>
#include <iostream>

#include "atomchip/parallel.hpp"

namespace atomchip::cli {

void add_common(CLI::App& sub, Common& c, const std::string& default_scene) {
    c.scene = default_scene;
    sub.add_option("--scene", c.scene, "Preset name or scene file")->capture_default_str();
    sub.add_option("--out", c.out, "Output directory")->capture_default_str();
    sub.add_option("--threads", c.threads, "Worker threads (0: ATOMCHIP_THREADS or all cores)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub.add_flag("--plot", c.plot, "Also write SVG plots");
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        out.push_back(text.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

namespace {

// Splits "1.5cm_s" into the number and the suffix.
std::pair<double, std::string> number_and_suffix(const std::string& text, const std::string& what) {
    double v = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    while (begin < end && *begin == ' ') ++begin;
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr == begin) {
        throw CLI::ValidationError(what, "'" + text + "' is not a number");
    }
    std::string suffix(res.ptr, end);
    while (!suffix.empty() && suffix.back() == ' ') suffix.pop_back();
    return {v, suffix};
}

std::string unit_list(const std::map<std::string, double>& units) {
    std::string s;
    for (const auto& [k, v] : units) s += (s.empty() ? "" : ", ") + k;
    return s;
}

}  // namespace

double parse_quantity(const std::string& text, const std::map<std::string, double>& units, const std::string& what) {
    const auto [v, suffix] = number_and_suffix(text, what);
    const auto it = units.find(suffix);
    if (it == units.end()) {
        throw CLI::ValidationError(what, "'" + text + "' needs one of the units " + unit_list(units));
    }
    return v * it->second;
}

std::vector<double> parse_quantity_list(const std::string& text, const std::map<std::string, double>& units,
                                        const std::string& what) {
    const auto parts = split(text, ',');
    std::vector<std::pair<double, std::string>> raw;
    for (const auto& p : parts) raw.push_back(number_and_suffix(p, what));
    const std::string shared = raw.back().second;
    std::vector<double> out;
    for (const auto& [v, suffix] : raw) {
        const std::string u = suffix.empty() ? shared : suffix;
        const auto it = units.find(u);
        if (it == units.end()) {
            throw CLI::ValidationError(what, "'" + text + "' needs one of the units " + unit_list(units));
        }
        out.push_back(v * it->second);
    }
    return out;
}

Vec3 parse_um_triple(const std::string& text, const std::string& what) {
    const auto parts = split(text, ',');
    if (parts.size() != 3) throw CLI::ValidationError(what, "expected x,y,z in um, got '" + text + "'");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        const auto [x, suffix] = number_and_suffix(parts[static_cast<std::size_t>(i)], what);
        if (!suffix.empty()) throw CLI::ValidationError(what, "expected plain numbers in um, got '" + text + "'");
        v[i] = units::um_to_m(x);
    }
    return v;
}

std::map<std::string, std::string> option_echo(const CLI::App& sub) {
    std::map<std::string, std::string> out;
    for (const CLI::Option* o : sub.get_options()) {
        const std::string name = o->get_name();
        if (name == "--help" || name.empty()) continue;
        std::string v;
        for (const auto& r : o->results()) v += (v.empty() ? "" : " ") + r;
        if (v.empty()) v = o->get_default_str();
        out[name] = v;
    }
    return out;
}

namespace {

std::string manifest_file(const std::string& command) {
    std::string s = command;
    for (char& c : s) {
        if (c == ' ' || c == '-') c = '_';
    }
    return s + ".manifest.json";
}

}  // namespace

RunManifest bare_manifest(const std::string& command, const CLI::App& sub) {
    RunManifest m;
    m.name = manifest_file(command);
    m.command = command;
    m.parameters = option_echo(sub);
    m.threads = default_thread_count();
    m.started_utc = utc_now();
    return m;
}

Run::Run(const std::string& command, const Common& common, const CLI::App& sub)
    : command_(command), common_(common), scene_(load_scene(common.scene)) {
    manifest_ = bare_manifest(command, sub);
    manifest_.threads = common.threads > 0 ? common.threads : default_thread_count();
    manifest_.scene_name = scene_.name;
    manifest_.scene_hash = scene_hash(scene_);
    manifest_.scene_document = scene_to_json(scene_);
    manifest_.seed = scene_.sim.seed;
}

std::filesystem::path Run::output(const std::string& file) {
    manifest_.outputs.push_back(file);
    return std::filesystem::path(common_.out) / file;
}

CsvWriter Run::csv(const std::string& file, const std::vector<std::string>& header) {
    return CsvWriter(output(file), manifest_.name, header);
}

void Run::svg(const std::string& file, const std::string& document) {
    // name the manifest right after the XML declaration
    std::string doc = document;
    const auto eol = doc.find('\n');
    doc.insert(eol + 1, "<!-- manifest: " + manifest_.name + " -->\n");
    write_text(output(file), doc);
}

void Run::finish() {
    manifest_.finished_utc = utc_now();
    manifest_.write(common_.out);
    for (const auto& f : manifest_.outputs) std::cout << "wrote " << (std::filesystem::path(common_.out) / f).string() << "\n";
    std::cout << "wrote " << (std::filesystem::path(common_.out) / manifest_.name).string() << "\n";
}

}  // namespace atomchip::cli
