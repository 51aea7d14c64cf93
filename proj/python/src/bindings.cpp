#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "atomchip/calibration.hpp"
#include "atomchip/dynamics.hpp"
#include "atomchip/errors.hpp"
#include "atomchip/field.hpp"
#include "atomchip/landscape.hpp"
#include "atomchip/merge.hpp"
#include "atomchip/scene.hpp"
#include "atomchip/trap.hpp"
#include "commands.hpp"

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
using namespace atomchip;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> to_points(const Points& pts) {
    if (pts.ndim() == 1 && pts.shape(0) == 3) {
        return {Vec3(pts.at(0), pts.at(1), pts.at(2))};
    }
    if (pts.ndim() != 2 || pts.shape(1) != 3) throw py::value_error("points must have shape (3,) or (n, 3)");
    std::vector<Vec3> out(static_cast<std::size_t>(pts.shape(0)));
    auto r = pts.unchecked<2>();
    for (py::ssize_t i = 0; i < pts.shape(0); ++i) out[static_cast<std::size_t>(i)] = Vec3(r(i, 0), r(i, 1), r(i, 2));
    return out;
}

py::dict trap_dict(const TrapCharacterization& t) {
    py::dict d;
    d["position"] = t.position;
    d["energy"] = t.energy;
    d["Bmin"] = t.Bmin;
    d["frequencies"] = t.frequencies;
    d["axes"] = t.hessian_eigvecs;
    d["depth"] = t.depth_to_saddle ? py::cast(*t.depth_to_saddle) : py::none();
    d["phase"] = t.phase;
    return d;
}

py::dict psd_dict(const PsdReport& p) {
    py::dict d;
    d["N"] = p.N;
    d["T"] = p.T;
    d["frequencies"] = p.frequencies;
    d["psd"] = p.psd;
    return d;
}

/// Field, potential or exclusion test over a batch of points at one phase.
class PyFieldEngine {
public:
    explicit PyFieldEngine(const Scene& scene) : scene_(scene), engine_(scene.chip) {}

    py::array_t<double> field(const Points& pts, double phase) const {
        const auto p = to_points(pts);
        const CurrentSet cur = scene_.drive.currents(phase);
        py::array_t<double> out({static_cast<py::ssize_t>(p.size()), py::ssize_t{3}});
        auto w = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const Vec3 B = engine_.total_field(cur, p[i]).B;
            for (py::ssize_t k = 0; k < 3; ++k) w(static_cast<py::ssize_t>(i), k) = B[k];
        }
        return out;
    }

    py::array_t<double> potential(const Points& pts, double phase) const {
        const auto p = to_points(pts);
        const CurrentSet cur = scene_.drive.currents(phase);
        py::array_t<double> out(static_cast<py::ssize_t>(p.size()));
        auto w = out.mutable_unchecked<1>();
        for (std::size_t i = 0; i < p.size(); ++i) w(static_cast<py::ssize_t>(i)) = engine_.potential(cur, p[i]);
        return out;
    }

    bool in_exclusion(const Vec3& p) const { return engine_.in_exclusion(p); }
    std::size_t filament_count() const { return engine_.filament_count(); }

private:
    Scene scene_;
    FieldEngine engine_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Field, trap and transport modelling of atom-chip magnetic conveyors";

    // translators run newest first, so the base class goes in before SceneError
    py::register_exception<Error>(m, "PhysicsError", PyExc_RuntimeError);
    py::register_exception<SceneError>(m, "SceneError", PyExc_ValueError);

    py::class_<Scene>(m, "Scene")
        .def_static("load", &load_scene, py::arg("preset_or_path"), "Load a preset by name or a JSON scene file")
        .def_static("parse", &parse_scene, py::arg("text"), py::arg("origin") = "<scene>")
        .def_readonly("name", &Scene::name)
        .def_property_readonly("modulation_period", [](const Scene& s) { return s.chip.layout.modulation_period; })
        .def_property_readonly("I0", [](const Scene& s) { return s.drive.I0; })
        .def_property_readonly("IM_amplitude", [](const Scene& s) { return s.drive.IM_amplitude; })
        .def_property_readonly("bias", [](const Scene& s) {
            return Vec3(s.chip.bias.x, s.chip.bias.y, s.chip.bias.z);
        })
        .def("hash", &scene_hash)
        .def("to_json", &scene_to_json)
        .def("__repr__", [](const Scene& s) { return "<Scene " + s.name + " " + scene_hash(s) + ">"; });

    m.def("preset_names", &preset_names);

    py::class_<PyFieldEngine>(m, "FieldEngine")
        .def(py::init<const Scene&>(), py::arg("scene"))
        .def("field", &PyFieldEngine::field, py::arg("points"), py::arg("phase") = 0.0,
             "B (T) at points of shape (3,) or (n, 3) in metres")
        .def("potential", &PyFieldEngine::potential, py::arg("points"), py::arg("phase") = 0.0,
             "Trapping plus gravitational energy (J)")
        .def("in_exclusion", &PyFieldEngine::in_exclusion, py::arg("point"))
        .def_property_readonly("filament_count", &PyFieldEngine::filament_count);

    m.def(
        "guide_estimates",
        [](double I0, double B0y, double B0x) {
            const GuideEstimate g = guide_estimates(I0, B0y, B0x);
            py::dict d;
            d["r0"] = g.r0;
            d["Bmin"] = g.Bmin;
            return d;
        },
        py::arg("I0"), py::arg("B0y"), py::arg("B0x"));

    m.def(
        "find_minimum",
        [](const Scene& s, std::optional<Vec3> seed, double phase) {
            const FieldEngine engine(s.chip);
            const SceneLandscape land(engine, s.drive.currents(phase));
            TrapCharacterization t = find_minimum(land, seed ? *seed : central_seed(s.chip, s.drive.I0));
            t.phase = phase;
            return trap_dict(t);
        },
        py::arg("scene"), py::arg("seed") = py::none(), py::arg("phase") = 0.0,
        "3D trap minimum from a seed (default: the central conveyor seed)");

    m.def(
        "survey_conveyor",
        [](const Scene& s, int n_phases, int threads) {
            const FieldEngine engine(s.chip);
            SurveyOptions o;
            o.n_phases = n_phases;
            o.threads = threads;
            ConveyorSurvey r;
            {
                py::gil_scoped_release release;
                r = survey_conveyor(engine, s.drive, o);
            }
            py::list wells;
            for (const auto& w : r.wells) wells.append(trap_dict(w));
            py::dict d;
            d["wells"] = wells;
            d["mean_depth"] = r.mean_depth;
            d["min_depth"] = r.min_depth;
            d["max_depth"] = r.max_depth;
            return d;
        },
        py::arg("scene"), py::arg("n_phases") = 12, py::arg("threads") = 0);

    m.def(
        "transport",
        [](const Scene& s, double v_max, std::optional<std::size_t> N, std::optional<double> T0,
           std::optional<std::uint64_t> seed, double periods, double hold_periods, int threads) {
            TransportReport r;
            {
                py::gil_scoped_release release;
                const FieldEngine engine(s.chip);
                RigOptions ro;
                ro.spacing = s.sim.table_spacing;
                ro.gravity = s.sim.gravity;
                ro.threads = threads;
                const TransportRig rig = make_transport_rig(engine, s.drive, central_seed(s.chip, s.drive.I0),
                                                            periods * s.chip.layout.modulation_period, ro);
                TransportOptions o;
                o.hold_periods = hold_periods;
                o.dt = s.sim.dt;
                o.threads = threads;
                r = transport_experiment(rig, v_max, T0.value_or(s.sim.T0), N.value_or(s.sim.N),
                                         seed.value_or(s.sim.seed), o);
            }
            py::dict d;
            d["v_max"] = r.v_max;
            d["T_initial"] = r.T_initial;
            d["T_initial_all"] = r.T_initial_all;
            d["T_final"] = r.T_final;
            d["deltaT"] = r.deltaT;
            d["survival_fraction"] = r.survival_fraction;
            d["temperature_trace"] = r.temperature_trace;
            return d;
        },
        py::arg("scene"), py::arg("v_max"), py::arg("N") = py::none(), py::arg("T0") = py::none(),
        py::arg("seed") = py::none(), py::arg("periods") = 1.0, py::arg("hold_periods") = 15.0,
        py::arg("threads") = 0, "Move one well by `periods` modulation periods at peak speed v_max (m/s)");

    m.def(
        "merge",
        [](const Scene& s, const std::string& populate, std::optional<std::size_t> N, std::optional<double> T0,
           std::optional<std::uint64_t> seed, double map_step_deg, int threads) {
            const Populate pop = populate_from_string(populate);
            if (s.profile.kind != PhaseProfile::Kind::Linear || !(s.profile.omega > 0.0)) {
                throw SceneError("constraint", "merge needs a linear profile with positive omega");
            }
            MergeSimReport r;
            {
                py::gil_scoped_release release;
                const FieldEngine engine(s.chip);
                MergeSimOptions o;
                o.cycle_duration = kTwoPi / s.profile.omega;
                o.spacing = s.sim.table_spacing;
                o.gravity = s.sim.gravity;
                o.dt = s.sim.dt;
                o.map_step_deg = map_step_deg;
                o.threads = threads;
                r = merge_simulate(engine, s.drive, pop, N.value_or(s.sim.N), T0.value_or(s.sim.T0),
                                   seed.value_or(s.sim.seed), o);
            }
            py::dict d;
            d["before"] = psd_dict(r.before);
            d["after"] = psd_dict(r.after);
            d["psd_ratio"] = r.psd_ratio;
            d["T_ratio"] = r.T_ratio;
            d["survival_fraction"] = r.survival_fraction;
            d["predicted_psd_ratio"] = r.prediction.psd_ratio;
            return d;
        },
        py::arg("scene"), py::arg("populate") = "left_only", py::arg("N") = py::none(), py::arg("T0") = py::none(),
        py::arg("seed") = py::none(), py::arg("map_step_deg") = 10.0, py::arg("threads") = 0,
        "Merge a conveyor well into the stationary trap over one drive period");

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "atomchip");
            std::vector<char*> argv;
            for (auto& a : args) argv.push_back(a.data());
            py::gil_scoped_release release;
            return cli::run_cli(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"), "Run the command-line tool in-process; returns its exit code");

#ifdef VERSION_INFO
    m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
    m.attr("__version__") = "dev";
#endif
}
