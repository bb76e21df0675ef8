"""Scenario files: schema, validation, and loading of referenced inputs.

A scenario is a single JSON object tying together the turbine fixture,
coefficient surface, synthesis settings, controller configuration,
simulation setup, and metrics parameters.  Validation is strict: every
field is type-checked, unknown fields are rejected, and error messages
carry the JSON path of the offending entry.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .control import EstimatorConfig, V_CUTIN, V_CUTOUT
from .sim import SimulationConfig, WindSpec
from .turbine import TurbineParameters, default_parameters, load_parameters
from .coefficients import default_surface, load_surface

__all__ = ["ScenarioError", "Scenario", "load_scenario", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Scenario file failed validation; message carries the JSON path."""


class _Checker:
    def __init__(self, data, path="$"):
        self.data = data
        self.path = path

    def fail(self, key, msg):
        raise ScenarioError(f"at {self.path}.{key}: {msg}")

    def reject_unknown(self, allowed):
        for key in self.data:
            if key not in allowed:
                raise ScenarioError(f"at {self.path}.{key}: unknown field")

    def get(self, key, kind, default=..., lo=None, hi=None, choices=None):
        if key not in self.data:
            if default is ...:
                self.fail(key, "required field missing")
            return default
        val = self.data[key]
        if kind is float:
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                self.fail(key, f"expected number, got {type(val).__name__}")
            val = float(val)
        elif kind is int:
            if not isinstance(val, int) or isinstance(val, bool):
                self.fail(key, f"expected integer, got {type(val).__name__}")
        elif kind is str:
            if not isinstance(val, str):
                self.fail(key, f"expected string, got {type(val).__name__}")
        elif kind is dict:
            if not isinstance(val, dict):
                self.fail(key, f"expected object, got {type(val).__name__}")
        elif kind is list:
            if not isinstance(val, list):
                self.fail(key, f"expected array, got {type(val).__name__}")
        if lo is not None and val < lo:
            self.fail(key, f"must be >= {lo}")
        if hi is not None and val > hi:
            self.fail(key, f"must be <= {hi}")
        if choices is not None and val not in choices:
            self.fail(key, f"must be one of {sorted(choices)}")
        return val

    def sub(self, key, default=None):
        if key not in self.data:
            if default is None:
                self.fail(key, "required section missing")
            return _Checker(default, f"{self.path}.{key}")
        val = self.get(key, dict)
        return _Checker(val, f"{self.path}.{key}")


def _number_list(chk, key, length=None, default=...):
    val = chk.get(key, list, default=default)
    if val is default and default is not ...:
        return val
    for i, v in enumerate(val):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ScenarioError(f"at {chk.path}.{key}[{i}]: expected number")
    if length is not None and len(val) != length:
        chk.fail(key, f"expected {length} entries, got {len(val)}")
    return [float(v) for v in val]


@dataclass
class RegionSynthesisSpec:
    wind_speeds: list          # explicit vertex winds, or [] for the default grid
    q_diag_scaled: list
    r_diag_scaled: list


@dataclass
class MetricsSpec:
    woehler: dict              # channel -> exponent m
    n_ref: float
    t_life_years: float
    tower_lever: float


@dataclass
class Scenario:
    """Validated scenario with loaded turbine parameters and surface."""

    params: TurbineParameters
    surface: object
    epsilon: float
    regions: dict              # {2: RegionSynthesisSpec, 3: RegionSynthesisSpec}
    delta_v: float
    estimator: EstimatorConfig
    gains_path: str            # "" -> synthesize in-process
    sim: SimulationConfig
    metrics: MetricsSpec
    output_dir: str
    v_cutin: float = V_CUTIN
    v_cutout: float = V_CUTOUT
    source_path: str = ""


def _load_turbine(value, base_dir, path):
    if value == "default":
        return default_parameters()
    full = os.path.join(base_dir, value)
    if not os.path.exists(full):
        raise ScenarioError(f"at {path}: referenced file {full} does not exist")
    try:
        return load_parameters(full)
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"at {path}: {exc}") from exc


def _load_surface_ref(value, base_dir, path):
    if value == "default":
        return default_surface()
    if not isinstance(value, dict) or set(value) != {"cp", "ct"}:
        raise ScenarioError(f'at {path}: expected "default" or {{"cp": ..., "ct": ...}}')
    cp_path = os.path.join(base_dir, value["cp"])
    ct_path = os.path.join(base_dir, value["ct"])
    for p in (cp_path, ct_path):
        if not os.path.exists(p):
            raise ScenarioError(f"at {path}: referenced file {p} does not exist")
    return load_surface(cp_path, ct_path)


_DEFAULT_WOEHLER = {"tower_moment": 4.0, "shaft_torque": 4.0, "thrust": 10.0}


def load_scenario(path):
    """Parse, validate, and resolve a scenario JSON file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    base_dir = os.path.dirname(os.path.abspath(path))

    root = _Checker(data)
    root.reject_unknown({
        "schema_version", "turbine", "surface", "synthesis", "controller",
        "simulation", "metrics", "output_dir",
    })
    version = root.get("schema_version", int)
    if version != SCHEMA_VERSION:
        root.fail("schema_version", f"unsupported version {version} (expected {SCHEMA_VERSION})")

    turbine_ref = data.get("turbine", "default")
    if not isinstance(turbine_ref, str):
        root.fail("turbine", "expected a path string or 'default'")
    params = _load_turbine(turbine_ref, base_dir, "$.turbine")
    surface = _load_surface_ref(data.get("surface", "default"), base_dir, "$.surface")

    syn = root.sub("synthesis", default={})
    syn.reject_unknown({"epsilon", "regions"})
    epsilon = syn.get("epsilon", float, default=1e-8, lo=1e-300)
    regions = {}
    regs = syn.sub("regions", default={})
    regs.reject_unknown({"2", "3"})
    from .synthesis import _SCALED_WEIGHTS

    for region in (2, 3):
        rchk = regs.sub(str(region), default={})
        rchk.reject_unknown({"wind_speeds", "q_diag_scaled", "r_diag_scaled"})
        q_def, r_def = _SCALED_WEIGHTS[region]
        winds = _number_list(rchk, "wind_speeds", default=[])
        q_diag = _number_list(rchk, "q_diag_scaled", length=7, default=list(q_def))
        r_diag = _number_list(rchk, "r_diag_scaled", length=2, default=list(r_def))
        regions[region] = RegionSynthesisSpec(
            wind_speeds=winds, q_diag_scaled=q_diag, r_diag_scaled=r_diag
        )

    ctl = root.sub("controller", default={})
    ctl.reject_unknown({"type", "delta_v", "estimator", "gains", "v_cutin", "v_cutout"})
    ctl_type = ctl.get("type", str, default="robust-lq",
                       choices={"robust-lq", "baseline"})
    delta_v = ctl.get("delta_v", float, default=0.5, lo=1e-9)
    v_cutin = ctl.get("v_cutin", float, default=V_CUTIN, lo=0.1)
    v_cutout = ctl.get("v_cutout", float, default=V_CUTOUT)
    if v_cutout <= v_cutin:
        ctl.fail("v_cutout", "must be > v_cutin")
    est = ctl.sub("estimator", default={})
    est.reject_unknown({"mode", "tau", "noise_std"})
    estimator = EstimatorConfig(
        mode=est.get("mode", str, default="torque_balance",
                     choices={"torque_balance", "oracle"}),
        tau=est.get("tau", float, default=0.5, lo=1e-6),
        noise_std=est.get("noise_std", float, default=0.0, lo=0.0),
        v_min=v_cutin,
        v_max=v_cutout,
    )
    gains_path = ctl.get("gains", str, default="")
    if gains_path:
        full = os.path.join(base_dir, gains_path)
        if not os.path.exists(full):
            ctl.fail("gains", f"referenced file {full} does not exist")
        gains_path = full

    simc = root.sub("simulation", default={})
    simc.reject_unknown({
        "ts", "substeps", "duration", "seed", "p_ref", "wind", "initial_state",
    })
    wchk = simc.sub("wind", default={})
    wchk.reject_unknown({"mode", "mean", "intensity", "ramp_rate", "path"})
    wind_path = wchk.get("path", str, default="")
    if wind_path:
        wind_path = os.path.join(base_dir, wind_path)
        if not os.path.exists(wind_path):
            wchk.fail("path", f"referenced file {wind_path} does not exist")
    try:
        wind = WindSpec(
            mode=wchk.get("mode", str, default="constant",
                          choices={"constant", "ramp", "turbulent", "file"}),
            mean=wchk.get("mean", float, default=12.0),
            intensity=wchk.get("intensity", float, default=0.0, lo=0.0),
            ramp_rate=wchk.get("ramp_rate", float, default=0.0),
            path=wind_path,
        )
    except ValueError as exc:
        raise ScenarioError(f"at $.simulation.wind: {exc}") from exc
    initial_state = _number_list(simc, "initial_state", length=7, default=None)
    try:
        sim = SimulationConfig(
            ts=simc.get("ts", float, default=0.004, lo=1e-6),
            integrator_substeps=simc.get("substeps", int, default=4, lo=1),
            duration=simc.get("duration", float, default=60.0, lo=1e-6),
            wind=wind,
            seed=simc.get("seed", int, default=0, lo=0),
            controller=ctl_type,
            p_ref=simc.get("p_ref", float, default=0.0, lo=0.0),
            initial_state=tuple(initial_state) if initial_state else None,
        )
    except ValueError as exc:
        raise ScenarioError(f"at $.simulation: {exc}") from exc

    met = root.sub("metrics", default={})
    met.reject_unknown({"woehler", "n_ref", "t_life_years", "tower_lever"})
    woehler = dict(_DEFAULT_WOEHLER)
    wo = met.sub("woehler", default={})
    for ch in wo.data:
        if ch not in _DEFAULT_WOEHLER:
            raise ScenarioError(f"at $.metrics.woehler.{ch}: unknown channel")
        woehler[ch] = wo.get(ch, float, lo=1.0)
    metrics = MetricsSpec(
        woehler=woehler,
        n_ref=met.get("n_ref", float, default=2.0e6, lo=1.0),
        t_life_years=met.get("t_life_years", float, default=20.0, lo=1e-6),
        tower_lever=met.get("tower_lever", float, default=110.0, lo=0.0),
    )

    out_dir = root.get("output_dir", str, default="out")
    if not os.path.isabs(out_dir):
        out_dir = os.path.join(base_dir, out_dir)

    return Scenario(
        params=params, surface=surface, epsilon=epsilon, regions=regions,
        delta_v=delta_v, estimator=estimator, gains_path=gains_path,
        sim=sim, metrics=metrics, output_dir=out_dir,
        v_cutin=v_cutin, v_cutout=v_cutout, source_path=os.path.abspath(path),
    )
