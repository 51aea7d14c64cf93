"""Magnetic conveyor belts for cold atoms on a chip.

Positions are in metres, fields in tesla, temperatures in kelvin and
phases in radians.
"""

from ._core import (
    FieldEngine,
    PhysicsError,
    Scene,
    SceneError,
    __version__,
    find_minimum,
    guide_estimates,
    merge,
    preset_names,
    run_cli,
    survey_conveyor,
    transport,
)

__all__ = [
    "FieldEngine",
    "PhysicsError",
    "Scene",
    "SceneError",
    "find_minimum",
    "guide_estimates",
    "merge",
    "preset_names",
    "run_cli",
    "survey_conveyor",
    "transport",
]
