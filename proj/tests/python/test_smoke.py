import json
import math

import numpy as np
import pytest

import atomchip

MU0 = 4e-7 * math.pi


def test_presets_load():
    names = atomchip.preset_names()
    assert "fig2_conveyor" in names
    for name in names:
        scene = atomchip.Scene.load(name)
        assert scene.name == name
        assert len(scene.hash()) == 16


def test_scene_round_trip():
    scene = atomchip.Scene.load("fig2_conveyor")
    again = atomchip.Scene.parse(scene.to_json())
    assert again.hash() == scene.hash()
    assert scene.modulation_period == pytest.approx(402e-6)


def test_scene_errors():
    with pytest.raises(atomchip.SceneError):
        atomchip.Scene.parse("")
    with pytest.raises(ValueError):
        atomchip.Scene.parse(json.dumps({"name": "x", "field": {"n_filaments": -1}}))


def test_guide_field_matches_thin_wire():
    scene = atomchip.Scene.load("guide_example")
    engine = atomchip.FieldEngine(scene)
    bias = scene.bias
    est = atomchip.guide_estimates(scene.I0, bias[1], bias[0])
    assert est["r0"] == pytest.approx(MU0 * scene.I0 / (2 * math.pi * bias[1]))

    z = np.linspace(30e-6, 200e-6, 7)
    pts = np.column_stack([np.zeros_like(z), np.zeros_like(z), z])
    B = engine.field(pts)
    assert B.shape == (7, 3)
    # far from a flat ribbon the center wire looks like a thin wire along x
    far = z > 120e-6
    thin = MU0 * scene.I0 / (2 * math.pi * z[far])
    np.testing.assert_allclose(bias[1] - B[far, 1], thin, rtol=0.05)
    np.testing.assert_allclose(B[:, 0], bias[0], rtol=1e-3)


def test_exclusion_zone_raises():
    engine = atomchip.FieldEngine(atomchip.Scene.load("fig2_conveyor"))
    assert engine.in_exclusion([0.0, 0.0, 1e-6])
    with pytest.raises(atomchip.PhysicsError):
        engine.field([0.0, 0.0, 1e-6])
    with pytest.raises(ValueError):
        engine.field(np.zeros((2, 2)))


def test_conveyor_minimum_and_survey():
    scene = atomchip.Scene.load("fig2_conveyor")
    t = atomchip.find_minimum(scene)
    assert t["position"][2] > 0
    f = t["frequencies"]
    assert 0 < f[0] <= f[1] <= f[2]
    energy = atomchip.FieldEngine(scene).potential(t["position"])[0]
    assert energy == pytest.approx(t["energy"], rel=1e-9)

    survey = atomchip.survey_conveyor(scene, n_phases=2, threads=1)
    assert survey["wells"]
    assert survey["min_depth"] <= survey["mean_depth"] <= survey["max_depth"]


def test_transport_is_reproducible():
    scene = atomchip.Scene.load("fig2_conveyor")
    kw = dict(N=40, seed=3, hold_periods=1.0)
    a = atomchip.transport(scene, 0.08, threads=1, **kw)
    b = atomchip.transport(scene, 0.08, threads=2, **kw)
    assert a["T_final"] == b["T_final"]
    assert a["T_initial"] > 0
    assert 0 < a["survival_fraction"] <= 1


def test_run_cli(tmp_path):
    assert atomchip.run_cli(["waveform", "export", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "waveform.csv").read_text()
    assert text.startswith("# manifest: waveform_export.manifest.json\n")
    assert (tmp_path / "waveform_export.manifest.json").exists()
    assert atomchip.run_cli(["no-such-command"]) == 2
