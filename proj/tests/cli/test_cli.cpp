#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "atomchip");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    Result r;
    r.code = atomchip::cli::run_cli(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("atomchip_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

const std::string kGuideScene = R"({
  "name": "tiny_guide",
  "layout": {"preset": "conveyor", "wire_width_um": 0},
  "drive": {"I0_A": 1.0, "IM_amplitude_A": 0.0},
  "bias_G": [0.42, 40.0, 0.0]
})";

}  // namespace

TEST_CASE("help lists every flag of every subcommand") {
    const std::vector<std::string> common{"--scene", "--out", "--threads", "--plot"};
    const std::map<std::string, std::vector<std::string>> flags{
        {"field sample", {"--phase-deg", "--phase", "--from", "--to", "--n"}},
        {"trap analyze", {"--phase-deg", "--seed-um", "--x-um"}},
        {"trap scan-phase", {"--step-deg"}},
        {"transport simulate",
         {"--vmax", "--N", "--seed", "--seeds", "--periods", "--T0-uK", "--hold-periods", "--trajectory"}},
        {"transport sweep", {"--vmax", "--N", "--seed", "--seeds", "--periods", "--T0-uK", "--hold-periods"}},
        {"merge map", {"--step-deg"}},
        {"merge simulate", {"--populate", "--N", "--seed", "--T0-uK", "--map-step-deg"}},
        {"calibrate period", {"--target", "--min", "--max", "--tol-um"}},
        {"waveform export", {"--dt-s"}},
    };
    for (const auto& [cmd, names] : flags) {
        CAPTURE(cmd);
        std::vector<std::string> args;
        std::istringstream ss(cmd);
        for (std::string w; ss >> w;) args.push_back(w);
        args.push_back("--help");
        const Result r = run(args);
        CHECK(r.code == 0);
        for (const auto& n : common) CHECK_MESSAGE(r.out.find(n) != std::string::npos, n);
        for (const auto& n : names) CHECK_MESSAGE(r.out.find(n) != std::string::npos, n);
    }
    const Result plot = run({"plot", "--help"});
    for (const std::string n : {"--csv", "--x", "--y", "--output", "--title"}) {
        CHECK_MESSAGE(plot.out.find(n) != std::string::npos, n);
    }
    const Result top = run({"--help"});
    for (const std::string n : {"scene", "field", "trap", "transport", "merge", "calibrate", "waveform", "plot"}) {
        CHECK_MESSAGE(top.out.find(n) != std::string::npos, n);
    }
}

TEST_CASE("usage errors exit with 2") {
    CHECK(run({"transport", "simulate", "--bogus"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"transport", "simulate", "--vmax", "3furlongs"}).code == 2);
    CHECK(run({"merge", "simulate", "--populate", "right_only"}).code == 2);
    CHECK(run({"field", "sample", "--from", "1,2"}).code == 2);
}

TEST_CASE("scene errors exit with 3") {
    const fs::path dir = scratch("scene_errors");
    const fs::path empty = write_file(dir, "empty.json", "");
    Result r = run({"trap", "analyze", "--scene", empty.string(), "--out", dir.string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("scene error") != std::string::npos);

    const fs::path bad = write_file(dir, "bad.json", R"({"name": "x", "field": {"n_filaments": -4}})");
    r = run({"scene", "validate", bad.string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("n_filaments") != std::string::npos);

    CHECK(run({"scene", "validate", "no_such_preset_or_file"}).code == 3);
}

TEST_CASE("physics errors exit with 4") {
    const fs::path dir = scratch("physics_errors");
    // a search started on the center conductor
    const Result r = run({"trap", "analyze", "--seed-um", "0,0,1", "--out", dir.string()});
    CHECK(r.code == 4);
    CHECK(r.err.find("exclusion") != std::string::npos);
}

TEST_CASE("scene validate and presets") {
    Result r = run({"scene", "presets"});
    CHECK(r.code == 0);
    CHECK(r.out.find("fig2_conveyor") != std::string::npos);
    CHECK(r.out.find("guide_example") != std::string::npos);

    const fs::path dir = scratch("validate");
    const fs::path p = write_file(dir, "g.json", kGuideScene);
    r = run({"scene", "validate", p.string(), "--print"});
    CHECK(r.code == 0);
    CHECK(r.out.find("tiny_guide") != std::string::npos);
    CHECK(r.out.find("n_filaments") != std::string::npos);
}

TEST_CASE("option values do not leak between invocations") {
    const fs::path a = scratch("leak_a"), b = scratch("leak_b");
    REQUIRE(run({"waveform", "export", "--dt-s", "0.01", "--out", a.string()}).code == 0);
    REQUIRE(run({"waveform", "export", "--out", b.string()}).code == 0);
    CHECK(slurp(a / "waveform.csv") != slurp(b / "waveform.csv"));
    const std::string manifest = slurp(b / "waveform_export.manifest.json");
    CHECK(manifest.find("0.01") == std::string::npos);
}

TEST_CASE("outputs name their manifest") {
    const fs::path dir = scratch("manifest");
    REQUIRE(run({"trap", "scan-phase", "--step-deg", "90", "--plot", "--out", dir.string()}).code == 0);
    const std::string csv = slurp(dir / "trap_scan_phase.csv");
    CHECK(csv.rfind("# manifest: trap_scan_phase.manifest.json\n", 0) == 0);
    CHECK(csv.find('\r') == std::string::npos);
    CHECK(fs::exists(dir / "trap_scan_phase.manifest.json"));
    int svgs = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".svg") continue;
        ++svgs;
        CHECK(slurp(e.path()).find("<!-- manifest: trap_scan_phase.manifest.json -->") != std::string::npos);
    }
    CHECK(svgs > 0);

    const std::string manifest = slurp(dir / "trap_scan_phase.manifest.json");
    CHECK(manifest.find("\"scene_hash\"") != std::string::npos);
    CHECK(manifest.find("trap_scan_phase.csv") != std::string::npos);
}

TEST_CASE("plot renders a CSV column") {
    const fs::path dir = scratch("plot");
    REQUIRE(run({"trap", "scan-phase", "--step-deg", "45", "--out", dir.string()}).code == 0);
    const std::string header = [&] {
        std::istringstream in(slurp(dir / "trap_scan_phase.csv"));
        std::string line;
        std::getline(in, line);
        std::getline(in, line);
        return line;
    }();
    const auto comma = header.find(',');
    REQUIRE(comma != std::string::npos);
    const std::string x = header.substr(0, comma);
    const std::string y = header.substr(comma + 1, header.find(',', comma + 1) - comma - 1);
    const fs::path svg = dir / "p.svg";
    const Result r = run({"plot", "--csv", (dir / "trap_scan_phase.csv").string(), "--x", x, "--y", y, "--output",
                          svg.string()});
    CHECK(r.code == 0);
    const std::string doc = slurp(svg);
    CHECK(doc.find("<svg") != std::string::npos);
    CHECK(doc.find("<!-- manifest: plot.manifest.json -->") != std::string::npos);

    CHECK(run({"plot", "--csv", (dir / "trap_scan_phase.csv").string(), "--x", "nope", "--y", y, "--output",
               svg.string()})
              .code != 0);
}

TEST_CASE("guide analysis from a scene file") {
    const fs::path dir = scratch("guide");
    const fs::path p = write_file(dir, "g.json", kGuideScene);
    const Result r = run({"trap", "analyze", "--scene", p.string(), "--phase", "0", "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("Lamb-Dicke") != std::string::npos);
    CHECK(fs::exists(dir / "trap_analyze.csv"));
}

TEST_CASE("CSV output is byte-identical across runs and thread counts") {
    const fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
    const std::vector<std::string> base{"field", "sample", "--n", "4,3,2", "--from", "-300,-20,150", "--to",
                                        "300,20,250"};
    auto with = [&](const fs::path& out, const std::string& threads) {
        auto args = base;
        args.insert(args.end(), {"--out", out.string(), "--threads", threads});
        return run(args).code;
    };
    REQUIRE(with(a, "1") == 0);
    REQUIRE(with(b, "1") == 0);
    REQUIRE(with(c, "3") == 0);
    CHECK(slurp(a / "field_sample.csv") == slurp(b / "field_sample.csv"));
    CHECK(slurp(a / "field_sample.csv") == slurp(c / "field_sample.csv"));

    const std::vector<std::string> transport{"transport", "simulate", "--N", "60", "--seeds", "1", "--vmax",
                                             "8cm_s", "--hold-periods", "1"};
    auto sim = [&](const fs::path& out, const std::string& threads) {
        auto args = transport;
        args.insert(args.end(), {"--out", out.string(), "--threads", threads});
        return run(args).code;
    };
    REQUIRE(sim(a, "1") == 0);
    REQUIRE(sim(c, "3") == 0);
    CHECK(slurp(a / "transport_simulate.csv") == slurp(c / "transport_simulate.csv"));
}
