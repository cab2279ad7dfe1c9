"""Scenario configuration: one strict JSON document drives a whole run.

Unknown keys anywhere in the document are configuration errors, so typos
fail loudly instead of silently falling back to defaults.
"""
import dataclasses
import json
import os

import numpy as np

from ..arm_kinematics import DHTable, JointLimits
from ..controller import ControllerConfig
from ..errors import ConfigError
from ..geometry import load_obj, shapes
from ..geometry.core import pose_from_z_axis
from ..mirrorglide import LinkageGeometry
from ..tracking import FilterParams
from ..twin_protocol import LinkConfig


def _check_keys(section, d, allowed):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")


@dataclasses.dataclass(frozen=True)
class Scenario:
    duration: float = 6.0
    seed: int = 0
    mode: str = "haptic"
    noise_sigma: float = 0.003
    tracker_rate: float = 90.0
    mesh: object = None            # path string or spec dict
    trajectory: object = None      # path string or spec dict
    controller: ControllerConfig = dataclasses.field(
        default_factory=ControllerConfig)
    linkage: LinkageGeometry = dataclasses.field(
        default_factory=LinkageGeometry)
    dh: DHTable = dataclasses.field(default_factory=DHTable.ur3)
    joint_limits: JointLimits = dataclasses.field(default_factory=JointLimits)
    link: LinkConfig = dataclasses.field(default_factory=LinkConfig)
    plant_tau: float = 0.05
    filter_params: FilterParams = dataclasses.field(default_factory=FilterParams)
    d_on: float = 0.005            # measurement-event hysteresis
    d_off: float = 0.010

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.mode not in ("haptic", "visual_only"):
            raise ConfigError(f"mode must be haptic or visual_only, got {self.mode!r}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if not self.d_off > self.d_on > 0:
            raise ConfigError("need d_off > d_on > 0")

    def build_mesh(self):
        spec = self.mesh
        if spec is None:
            spec = {"platform": {}}
        if isinstance(spec, str):
            if not os.path.exists(spec):
                raise ConfigError(f"mesh file not found: {spec}")
            return load_obj(spec)
        if not isinstance(spec, dict) or len(spec) != 1:
            raise ConfigError("mesh must be a path or a single-kind object")
        kind, params = next(iter(spec.items()))
        params = dict(params)
        if kind == "platform":
            _check_keys("mesh.platform", params,
                        ("length", "width", "height", "center_xy", "top_z"))
            return shapes.platform(
                length=params.get("length", 0.4),
                width=params.get("width", 0.12),
                height=params.get("height", 0.08),
                center_xy=tuple(params.get("center_xy", (0.0, 0.19))),
                top_z=params.get("top_z", 0.10))
        if kind == "box":
            _check_keys("mesh.box", params, ("center", "size"))
            return shapes.box(center=tuple(params.get("center", (0, 0, 0))),
                              size=tuple(params.get("size", (1, 1, 1))))
        if kind == "plane":
            _check_keys("mesh.plane", params, ("size", "z", "center"))
            return shapes.plane(size=params.get("size", 1.0),
                                z=params.get("z", 0.0),
                                center=tuple(params.get("center", (0.0, 0.0))))
        if kind == "icosphere":
            _check_keys("mesh.icosphere", params,
                        ("radius", "subdivisions", "center"))
            return shapes.icosphere(radius=params.get("radius", 0.1),
                                    subdivisions=params.get("subdivisions", 3),
                                    center=tuple(params.get("center", (0, 0, 0))))
        raise ConfigError(f"unknown mesh kind {kind!r}")


_CONTROLLER_KEYS = (
    "tick_rate", "d_approach", "v_min", "replan_threshold", "arrive_tolerance",
    "d_on", "d_off", "max_tcp_speed", "max_tcp_speed_near", "near_distance",
    "workspace_min", "workspace_max", "retract_pose", "home_q",
    "display_home_y", "patch_sample_radius",
)


def _parse_controller(d):
    _check_keys("controller", d, _CONTROLLER_KEYS)
    kwargs = dict(d)
    for key in ("workspace_min", "workspace_max", "home_q"):
        if key in kwargs:
            kwargs[key] = np.asarray(kwargs[key], dtype=float)
    if "retract_pose" in kwargs:
        rp = kwargs["retract_pose"]
        _check_keys("controller.retract_pose", rp, ("pos", "z_axis"))
        kwargs["retract_pose"] = pose_from_z_axis(
            np.asarray(rp["pos"], dtype=float),
            np.asarray(rp.get("z_axis", (0.0, 0.0, 1.0)), dtype=float))
    return ControllerConfig(**kwargs)


def _parse_arm(d):
    _check_keys("arm", d, ("dh", "joint_limits"))
    dh = DHTable.ur3()
    limits = JointLimits()
    if "dh" in d:
        _check_keys("arm.dh", d["dh"], ("a", "d", "alpha", "theta_offset"))
        dh = DHTable.from_dict(d["dh"])
    if "joint_limits" in d:
        _check_keys("arm.joint_limits", d["joint_limits"],
                    ("lower", "upper", "max_velocity", "max_acceleration"))
        limits = JointLimits.from_dict(d["joint_limits"])
    return dh, limits


_TOP_KEYS = ("duration", "seed", "mode", "noise_sigma", "tracker_rate",
             "mesh", "trajectory", "controller", "linkage", "arm", "link",
             "plant", "filter", "events")


def scenario_from_dict(doc):
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    _check_keys("scenario", doc, _TOP_KEYS)
    kwargs = {}
    for key in ("duration", "seed", "mode", "noise_sigma", "tracker_rate",
                "mesh", "trajectory"):
        if key in doc:
            kwargs[key] = doc[key]
    if "controller" in doc:
        kwargs["controller"] = _parse_controller(doc["controller"])
    if "linkage" in doc:
        _check_keys("linkage", doc["linkage"],
                    ("l_a", "l_b", "w_b", "w_f", "s_flank_max"))
        kwargs["linkage"] = LinkageGeometry.from_dict(doc["linkage"])
    if "arm" in doc:
        kwargs["dh"], kwargs["joint_limits"] = _parse_arm(doc["arm"])
    if "link" in doc:
        _check_keys("link", doc["link"],
                    ("latency_mean", "jitter_std", "drop_prob", "seed"))
        kwargs["link"] = LinkConfig.from_dict(doc["link"])
    if "plant" in doc:
        _check_keys("plant", doc["plant"], ("tau",))
        kwargs["plant_tau"] = doc["plant"].get("tau", 0.05)
    if "filter" in doc:
        _check_keys("filter", doc["filter"],
                    ("min_cutoff", "beta", "d_cutoff"))
        kwargs["filter_params"] = FilterParams(**doc["filter"])
    if "events" in doc:
        _check_keys("events", doc["events"], ("d_on", "d_off"))
        kwargs["d_on"] = doc["events"].get("d_on", 0.005)
        kwargs["d_off"] = doc["events"].get("d_off", 0.010)
    try:
        return Scenario(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


def load_scenario(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except ValueError as exc:
        raise ConfigError(f"scenario file is not valid JSON: {exc}")
    return scenario_from_dict(doc)
