#include "atomchip/scene.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "atomchip/errors.hpp"
#include "json.hpp"

namespace atomchip {

using nlohmann::json;

namespace {

const std::set<std::string> kUnitSuffixes = {"um", "mm", "m", "G", "T", "A", "s", "ms", "rad", "deg",
                                             "uK", "K", "kg", "rad_s", "Hz", "s_rad"};

// Splits "name_unit" into ("name", "unit") when the tail is a unit suffix.
std::pair<std::string, std::string> split_unit(const std::string& key) {
    for (const auto& u : {"rad_s", "s_rad"}) {
        const std::string tail = std::string("_") + u;
        if (key.size() > tail.size() && key.compare(key.size() - tail.size(), tail.size(), tail) == 0) {
            return {key.substr(0, key.size() - tail.size()), u};
        }
    }
    const auto pos = key.rfind('_');
    if (pos == std::string::npos) return {key, ""};
    const std::string tail = key.substr(pos + 1);
    if (kUnitSuffixes.count(tail)) return {key.substr(0, pos), tail};
    return {key, ""};
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Strict reader over one JSON object: every key must be consumed.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw SceneError("schema", at() + "expected an object");
    }

    bool has(const std::string& key) {
        known_.insert(key);
        return j_.contains(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        return as_number(j_.at(key), key);
    }
    double number(const std::string& key) {
        require(key);
        return as_number(j_.at(key), key);
    }
    long long integer(const std::string& key, long long fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) throw SceneError("schema", join(path_, key) + ": expected an integer");
        return v.get<long long>();
    }
    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw SceneError("schema", join(path_, key) + ": expected true or false");
        return v.get<bool>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_string()) throw SceneError("schema", join(path_, key) + ": expected a string");
        return v.get<std::string>();
    }
    Vec3 vec3(const std::string& key, const Vec3& fallback) {
        if (!has(key)) return fallback;
        return as_vec3(j_.at(key), key);
    }
    Vec3 vec3(const std::string& key) {
        require(key);
        return as_vec3(j_.at(key), key);
    }
    const json& raw(const std::string& key) {
        require(key);
        return j_.at(key);
    }
    std::string path(const std::string& key) const { return join(path_, key); }

    /// Rejects keys nobody asked for, telling unit mistakes apart.
    void finish() const {
        std::map<std::string, std::string> bases;
        for (const auto& k : known_) {
            const auto [base, unit] = split_unit(k);
            if (!unit.empty()) bases[base] = k;
        }
        for (const auto& item : j_.items()) {
            if (known_.count(item.key())) continue;
            // any trailing "_suffix" counts as a unit here, e.g. "I0_mA"
            const auto pos = item.key().rfind('_');
            const auto it = pos == std::string::npos ? bases.end() : bases.find(item.key().substr(0, pos));
            if (it != bases.end()) {
                throw SceneError("unit", join(path_, item.key()) + ": wrong unit, expected '" + it->second + "'");
            }
            throw SceneError("schema", join(path_, item.key()) + ": unknown key");
        }
    }

private:
    std::string at() const { return path_.empty() ? "" : path_ + ": "; }
    void require(const std::string& key) {
        if (!has(key)) {
            // a present key with another unit is a unit error, not a missing key
            const auto [base, unit] = split_unit(key);
            for (const auto& item : j_.items()) {
                const auto [b, u] = split_unit(item.key());
                if (!unit.empty() && b == base) {
                    throw SceneError("unit", join(path_, item.key()) + ": wrong unit, expected '" + key + "'");
                }
            }
            throw SceneError("schema", join(path_, key) + ": required key missing");
        }
    }
    double as_number(const json& v, const std::string& key) const {
        if (!v.is_number()) throw SceneError("schema", join(path_, key) + ": expected a number");
        return v.get<double>();
    }
    Vec3 as_vec3(const json& v, const std::string& key) const {
        if (!v.is_array() || v.size() != 3) throw SceneError("schema", join(path_, key) + ": expected [x, y, z]");
        Vec3 out;
        for (int a = 0; a < 3; ++a) out[a] = as_number(v.at(static_cast<std::size_t>(a)), key);
        return out;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> known_;
};

Vec3 um_vec(const Vec3& v) { return v.unaryExpr([](double x) { return units::um_to_m(x); }); }
json um_json(const Vec3& v) { return json::array({units::m_to_um(v.x()), units::m_to_um(v.y()), units::m_to_um(v.z())}); }

LayoutParams read_layout_params(Obj& o) {
    LayoutParams p;
    p.modulation_period = units::um_to_m(o.number("modulation_period_um", units::m_to_um(p.modulation_period)));
    p.n_periods = static_cast<int>(o.integer("n_periods", p.n_periods));
    p.wire_width = units::um_to_m(o.number("wire_width_um", units::m_to_um(p.wire_width)));
    p.thickness = units::um_to_m(o.number("thickness_um", units::m_to_um(p.thickness)));
    p.center_wire_length = units::um_to_m(o.number("center_wire_length_um", units::m_to_um(p.center_wire_length)));
    p.modulation_wire_length =
        units::um_to_m(o.number("modulation_wire_length_um", units::m_to_um(p.modulation_wire_length)));
    p.pattern_center_x = units::um_to_m(o.number("pattern_center_x_um", units::m_to_um(p.pattern_center_x)));
    p.h2_offset = units::um_to_m(o.number("h2_offset_um", units::m_to_um(p.h2_offset)));
    p.end_wire_length = units::um_to_m(o.number("end_wire_length_um", units::m_to_um(p.end_wire_length)));
    return p;
}

ChipLayout read_custom_layout(Obj& o) {
    ChipLayout l;
    l.modulation_period = units::um_to_m(o.number("modulation_period_um"));
    l.center_wire_length = units::um_to_m(o.number("center_wire_length_um", units::m_to_um(l.center_wire_length)));
    const json& cs = o.raw("conductors");
    if (!cs.is_array()) throw SceneError("schema", o.path("conductors") + ": expected an array");
    for (std::size_t i = 0; i < cs.size(); ++i) {
        Obj c(cs[i], o.path("conductors") + "[" + std::to_string(i) + "]");
        Conductor cond;
        cond.id = c.string("id", "conductor" + std::to_string(i));
        try {
            cond.channel = channel_from_string(c.string("channel", "constant"));
        } catch (const DomainError& e) {
            throw SceneError("schema", c.path("channel") + ": " + e.what());
        }
        const json& segs = c.raw("segments");
        if (!segs.is_array()) throw SceneError("schema", c.path("segments") + ": expected an array");
        for (std::size_t k = 0; k < segs.size(); ++k) {
            Obj s(segs[k], c.path("segments") + "[" + std::to_string(k) + "]");
            RibbonSegment seg;
            seg.start = um_vec(s.vec3("start_um"));
            seg.end = um_vec(s.vec3("end_um"));
            seg.width = units::um_to_m(s.number("width_um", 50.0));
            seg.thickness = units::um_to_m(s.number("thickness_um", 7.0));
            seg.conductor_id = cond.id;
            s.finish();
            cond.path.push_back(seg);
        }
        c.finish();
        l.conductors.push_back(std::move(cond));
    }
    return l;
}

PhaseProfile read_profile(Obj& o) {
    const std::string kind = o.string("kind", "linear");
    if (kind == "linear") {
        return PhaseProfile::linear(o.number("omega_rad_s"), o.number("duration_s"));
    }
    if (kind == "smoothstep") {
        return PhaseProfile::smoothstep(o.number("total_phase_rad"), o.number("duration_s"));
    }
    if (kind == "piecewise") {
        const json& k = o.raw("knots_s_rad");
        if (!k.is_array()) throw SceneError("schema", o.path("knots_s_rad") + ": expected [[t, phase], ...]");
        std::vector<std::pair<double, double>> knots;
        for (const auto& e : k) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
                throw SceneError("schema", o.path("knots_s_rad") + ": expected [[t, phase], ...]");
            }
            knots.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
        return PhaseProfile::piecewise(std::move(knots));
    }
    throw SceneError("schema", o.path("kind") + ": unknown profile kind '" + kind + "'");
}

std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

Scene build_scene(const json& doc) {
    Obj top(doc, "");
    Scene s;
    s.name = top.string("name", "scene");

    if (top.has("layout")) {
        Obj lo(top.raw("layout"), "layout");
        const std::string preset = lo.string("preset", "conveyor");
        if (preset == "conveyor") {
            s.layout_params = read_layout_params(lo);
        } else if (preset == "custom") {
            s.chip.layout = read_custom_layout(lo);
        } else {
            throw SceneError("schema", "layout.preset: unknown layout preset '" + preset + "'");
        }
        lo.finish();
    } else {
        s.layout_params = LayoutParams{};
    }

    const Vec3 bias = top.vec3("bias_G", Vec3::Zero());
    s.chip.bias = BiasField::from_gauss(bias.x(), bias.y(), bias.z());

    if (top.has("atom")) {
        Obj a(top.raw("atom"), "atom");
        s.chip.atom.gf_mf = a.number("gF_mF", s.chip.atom.gf_mf);
        s.chip.atom.mass = a.number("mass_kg", s.chip.atom.mass);
        a.finish();
    }
    if (top.has("field")) {
        Obj f(top.raw("field"), "field");
        s.chip.n_filaments = static_cast<int>(f.integer("n_filaments", s.chip.n_filaments));
        s.chip.fd_step = units::um_to_m(f.number("fd_step_um", units::m_to_um(s.chip.fd_step)));
        s.chip.include_gravity = f.boolean("gravity", s.chip.include_gravity);
        f.finish();
    }
    if (top.has("drive")) {
        Obj d(top.raw("drive"), "drive");
        s.drive.I0 = d.number("I0_A", s.drive.I0);
        s.drive.IM_amplitude = d.number("IM_amplitude_A", s.drive.IM_amplitude);
        s.drive.h2_enabled = d.boolean("h2_enabled", s.drive.h2_enabled);
        if (d.has("h2")) {
            Obj h(d.raw("h2"), "drive.h2");
            auto& c = s.drive.h2;
            c.c0 = h.number("c0_A", c.c0);
            c.c1 = h.number("c1_A", c.c1);
            c.p1 = h.number("p1_rad", c.p1);
            c.c2 = h.number("c2_A", c.c2);
            c.p2 = h.number("p2_rad", c.p2);
            h.finish();
        }
        d.finish();
    }
    if (top.has("profile")) {
        Obj p(top.raw("profile"), "profile");
        s.profile = read_profile(p);
        p.finish();
    }
    if (top.has("simulation")) {
        Obj m(top.raw("simulation"), "simulation");
        s.sim.dt = m.number("dt_s", s.sim.dt);
        const long long n = m.integer("N", static_cast<long long>(s.sim.N));
        if (n < 1) throw SceneError("constraint", "simulation.N must be at least 1");
        s.sim.N = static_cast<std::size_t>(n);
        const long long seed = m.integer("seed", static_cast<long long>(s.sim.seed));
        if (seed < 0) throw SceneError("constraint", "simulation.seed must be non-negative");
        s.sim.seed = static_cast<std::uint64_t>(seed);
        s.sim.gravity = m.boolean("gravity", s.sim.gravity);
        s.sim.T0 = units::uK_to_K(m.number("T0_uK", units::K_to_uK(s.sim.T0)));
        s.sim.table_spacing = units::um_to_m(m.number("table_spacing_um", units::m_to_um(s.sim.table_spacing)));
        m.finish();
    }
    top.finish();

    if (s.layout_params) {
        s.layout_params->validate();
        s.chip.layout = conveyor_layout(*s.layout_params);
    }
    s.chip.validate();
    s.drive.validate();
    s.profile.validate();
    if (!(s.sim.T0 > 0.0)) throw DomainError("simulation.T0_uK must be positive");
    if (!(s.sim.dt >= 0.0)) throw DomainError("simulation.dt_s must be non-negative");
    if (!(s.sim.table_spacing > 0.0)) throw DomainError("simulation.table_spacing_um must be positive");
    return s;
}

const std::map<std::string, std::string>& presets() {
    static const std::map<std::string, std::string> p = {
        {"fig2_conveyor", R"({
  "name": "fig2_conveyor",
  "layout": {"preset": "conveyor"},
  "bias_G": [7.0, 16.0, 0.0],
  "drive": {"I0_A": 2.0, "IM_amplitude_A": 1.0, "h2_enabled": false},
  "profile": {"kind": "linear", "omega_rad_s": 41.887902047863909, "duration_s": 0.150},
  "simulation": {"N": 2000, "seed": 1, "gravity": true, "T0_uK": 30.0}
})"},
        {"guide_example", R"({
  "name": "guide_example",
  "layout": {"preset": "conveyor"},
  "bias_G": [0.42, 80.0, 0.0],
  "drive": {"I0_A": 2.0, "IM_amplitude_A": 0.0, "h2_enabled": false},
  "simulation": {"gravity": false}
})"},
        {"fig5_merge", R"({
  "name": "fig5_merge",
  "layout": {"preset": "conveyor"},
  "bias_G": [7.0, 16.0, 0.0],
  "drive": {"I0_A": 2.0, "IM_amplitude_A": 1.0, "h2_enabled": true},
  "profile": {"kind": "linear", "omega_rad_s": 10.471975511965977, "duration_s": 0.600},
  "simulation": {"N": 1000, "seed": 1, "gravity": true, "T0_uK": 30.0}
})"},
    };
    return p;
}

}  // namespace

Scene parse_scene(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        // drop the library's "[json.exception...] parse error at ...:" prefix
        std::string msg = e.what();
        if (const auto pos = msg.find(": "); pos != std::string::npos) msg = msg.substr(pos + 2);
        throw SceneError("syntax", origin + ": " + line_col(text, e.byte) + ": " + msg);
    }
    try {
        return build_scene(doc);
    } catch (const SceneError& e) {
        throw SceneError(e.kind(), origin + ": " + e.detail());
    } catch (const DomainError& e) {
        throw SceneError("constraint", origin + ": " + e.what());
    } catch (const json::exception& e) {
        throw SceneError("schema", origin + ": " + e.what());
    }
}

Scene load_scene(const std::string& name) {
    const auto& p = presets();
    if (const auto it = p.find(name); it != p.end()) return parse_scene(it->second, name);
    std::ifstream in(name);
    if (!in) throw SceneError("syntax", name + ": not a preset and cannot open the file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scene(ss.str(), name);
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : presets()) out.push_back(k);
    return out;
}

std::string preset_text(const std::string& name) {
    const auto& p = presets();
    const auto it = p.find(name);
    if (it == p.end()) throw SceneError("schema", "unknown preset '" + name + "'");
    return it->second;
}

namespace {

// Unit conversions leave noise like 0.049999999999999996; 12 digits is plenty.
void tidy_numbers(json& j) {
    if (j.is_number_float()) {
        std::ostringstream os;
        os << std::setprecision(12) << j.get<double>();
        j = std::stod(os.str());
    } else if (j.is_structured()) {
        for (auto& v : j) tidy_numbers(v);
    }
}

}  // namespace

std::string scene_to_json(const Scene& s) {
    json doc;
    doc["name"] = s.name;
    json lo;
    if (s.layout_params) {
        const auto& p = *s.layout_params;
        lo["preset"] = "conveyor";
        lo["modulation_period_um"] = units::m_to_um(p.modulation_period);
        lo["n_periods"] = p.n_periods;
        lo["wire_width_um"] = units::m_to_um(p.wire_width);
        lo["thickness_um"] = units::m_to_um(p.thickness);
        lo["center_wire_length_um"] = units::m_to_um(p.center_wire_length);
        lo["modulation_wire_length_um"] = units::m_to_um(p.modulation_wire_length);
        lo["pattern_center_x_um"] = units::m_to_um(p.pattern_center_x);
        lo["h2_offset_um"] = units::m_to_um(p.h2_offset);
        lo["end_wire_length_um"] = units::m_to_um(p.end_wire_length);
    } else {
        lo["preset"] = "custom";
        lo["modulation_period_um"] = units::m_to_um(s.chip.layout.modulation_period);
        lo["center_wire_length_um"] = units::m_to_um(s.chip.layout.center_wire_length);
        json cs = json::array();
        for (const auto& c : s.chip.layout.conductors) {
            json segs = json::array();
            for (const auto& g : c.path) {
                segs.push_back({{"start_um", um_json(g.start)},
                                {"end_um", um_json(g.end)},
                                {"width_um", units::m_to_um(g.width)},
                                {"thickness_um", units::m_to_um(g.thickness)}});
            }
            cs.push_back({{"id", c.id}, {"channel", to_string(c.channel)}, {"segments", segs}});
        }
        lo["conductors"] = cs;
    }
    doc["layout"] = lo;
    const Vec3 b = s.chip.bias.vector();
    doc["bias_G"] = json::array({units::tesla_to_gauss(b.x()), units::tesla_to_gauss(b.y()), units::tesla_to_gauss(b.z())});
    doc["atom"] = {{"gF_mF", s.chip.atom.gf_mf}, {"mass_kg", s.chip.atom.mass}};
    doc["field"] = {{"n_filaments", s.chip.n_filaments},
                    {"fd_step_um", units::m_to_um(s.chip.fd_step)},
                    {"gravity", s.chip.include_gravity}};
    const auto& h = s.drive.h2;
    doc["drive"] = {{"I0_A", s.drive.I0},
                    {"IM_amplitude_A", s.drive.IM_amplitude},
                    {"h2_enabled", s.drive.h2_enabled},
                    {"h2", {{"c0_A", h.c0}, {"c1_A", h.c1}, {"p1_rad", h.p1}, {"c2_A", h.c2}, {"p2_rad", h.p2}}}};
    json pr;
    pr["kind"] = to_string(s.profile.kind);
    switch (s.profile.kind) {
        case PhaseProfile::Kind::Linear:
            pr["omega_rad_s"] = s.profile.omega;
            pr["duration_s"] = s.profile.duration;
            break;
        case PhaseProfile::Kind::Smoothstep:
            pr["total_phase_rad"] = s.profile.total_phase;
            pr["duration_s"] = s.profile.duration;
            break;
        case PhaseProfile::Kind::Piecewise: {
            json k = json::array();
            for (const auto& [t, p] : s.profile.knots) k.push_back({t, p});
            pr["knots_s_rad"] = k;
            break;
        }
    }
    doc["profile"] = pr;
    doc["simulation"] = {{"dt_s", s.sim.dt},
                         {"N", s.sim.N},
                         {"seed", s.sim.seed},
                         {"gravity", s.sim.gravity},
                         {"T0_uK", units::K_to_uK(s.sim.T0)},
                         {"table_spacing_um", units::m_to_um(s.sim.table_spacing)}};
    tidy_numbers(doc);
    return doc.dump(2) + "\n";
}

std::string scene_hash(const Scene& s) {
    const std::string text = scene_to_json(s);
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace atomchip
