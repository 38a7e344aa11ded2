"""JSON experiment configs.

A config is a JSON object with these sections (defaults in brackets)::

    mode        analytic | optimize-power | cell-size | simulate | sweep-alpha | validate
    geometry    half_length_m, regions [5], edges [uniform], lossless_radius_m [10],
                pathloss_exp [2.5]
    traffic     lambda (per metre per second) or cell_arrival_rate (per cell per second),
                job_rate [0.2], ho_bytes [0.4], servers [60], arrival_probs [uniform]
    speed       kind [uniform] | truncated_gaussian, units [kmph] | mps, v_min, v_max,
                variance (gaussian only, in units squared), centre [midpoint]
    power       policy [equal] | alpha | linear_optimal | discrete_optimal, p_bar,
                alpha, classes
    simulation  towers [10], dt [0.04], horizon_s [2000], warmup_s [auto],
                rate_set [per-user region rates], interference [false], sigma2, batches [30]
    scaling     p_tilde, gamma, omega_p [0], bracket_m [auto]
    sweep       axis name -> list of values, see AXES
    seeds [[0]], replications [1], output [stdout]

Rate sets are lists of numbers or ``"start:step:stop"`` ranges (stop included),
or one string such as ``"{0.8:-0.035:0.03, 0.011:-0.004:0.003}"``.
"""

from __future__ import annotations

import copy
import itertools
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, SmallCellError
from .model import KMPH, CellGeometry, TrafficModel, TruncatedGaussianSpeed, UniformSpeed
from .power import (AlphaRule, DiscretePower, EqualPower, SpeedClasses, continuous_optimal_power,
                    discrete_optimal_power)
from .scns import SimConfig
from .sizing import ScalingSpec

MODES = ("analytic", "optimize-power", "cell-size", "simulate", "sweep-alpha", "validate")
SIM_MODES = ("simulate", "sweep-alpha", "validate")

SECTIONS = {
    "geometry": {"half_length_m": None, "regions": 5, "edges": None, "lossless_radius_m": 10.0,
                 "pathloss_exp": 2.5},
    "traffic": {"lambda": None, "cell_arrival_rate": None, "job_rate": 0.2, "ho_bytes": 0.4,
                "servers": 60, "arrival_probs": None},
    "speed": {"kind": "uniform", "units": "kmph", "v_min": None, "v_max": None,
              "variance": None, "centre": None},
    "power": {"policy": "equal", "p_bar": None, "alpha": None, "classes": None},
    "simulation": {"towers": 10, "dt": 0.04, "horizon_s": 2000.0, "warmup_s": None,
                   "rate_set": None, "interference": False, "sigma2": None, "batches": 30},
    "scaling": {"p_tilde": None, "gamma": None, "omega_p": 0.0, "bracket_m": None},
}
TOP_LEVEL = ("mode", "sweep", "seeds", "replications", "output") + tuple(SECTIONS)
REQUIRED = {"geometry": ("half_length_m",), "speed": ("v_min", "v_max"), "power": ("p_bar",)}

# sweep axis -> (section, key)
AXES = {
    "power": ("power", "p_bar"),
    "policy": ("power", "policy"),
    "alpha": ("power", "alpha"),
    "classes": ("power", "classes"),
    "pathloss_exp": ("geometry", "pathloss_exp"),
    "half_length_m": ("geometry", "half_length_m"),
    "servers": ("traffic", "servers"),
    "ho_bytes": ("traffic", "ho_bytes"),
    "job_rate": ("traffic", "job_rate"),
    "v_max": ("speed", "v_max"),
    "rate_set": ("simulation", "rate_set"),
    "interference": ("simulation", "interference"),
    "sigma2": ("simulation", "sigma2"),
    "omega_p": ("scaling", "omega_p"),
}


def expand_rates(spec) -> tuple:
    """Expand a rate-set description into a tuple of floats, in the given order."""
    if spec is None:
        return None
    if isinstance(spec, str):
        spec = [s for s in spec.strip().strip("{}").split(",") if s.strip()]
    out = []
    for item in spec:
        if isinstance(item, (int, float)) and not isinstance(item, bool):
            out.append(float(item))
            continue
        if not isinstance(item, str):
            raise ConfigError(f"rate entry {item!r} is neither a number nor a range")
        parts = item.strip().split(":")
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            raise ConfigError(f"cannot parse rate entry {item!r}") from None
        if len(nums) == 1:
            out.append(nums[0])
            continue
        if len(nums) != 3 or nums[1] == 0:
            raise ConfigError(f"rate range {item!r} must be start:step:stop with step != 0")
        start, step, stop = nums
        count = math.floor((stop - start) / step + 1e-9) + 1
        if count < 1:
            raise ConfigError(f"rate range {item!r} is empty")
        out.extend(round(start + k * step, 12) for k in range(count))
    return tuple(out)


def _line_of(text: str, *path) -> int | None:
    """Line of the last key in ``path``, searching after each enclosing key."""
    pos = 0
    for key in path:
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


@dataclass(frozen=True)
class Scenario:
    """Model objects for one grid point."""

    geom: CellGeometry
    traffic: TrafficModel
    speed: object
    p_bar: float
    policy: object = None
    sim: SimConfig = None
    scaling: ScalingSpec = None
    classes: tuple = ()


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str
    document: dict = field(compare=True)
    axes: tuple
    seeds: tuple
    output: str = None
    source: str = field(default=None, compare=False)

    def grid(self) -> list:
        """``(point, document)`` pairs in grid order; ``point`` maps axis name to value."""
        names = [a for a, _ in self.axes]
        out = []
        for values in itertools.product(*(v for _, v in self.axes)):
            doc = copy.deepcopy(self.document)
            for name, val in zip(names, values):
                section, key = AXES[name]
                doc[section][key] = val
            if self.mode == "sweep-alpha":
                doc["power"]["policy"] = "alpha"
            out.append((dict(zip(names, values)), doc))
        return out

    def to_json(self) -> str:
        return json.dumps(self.document, indent=2) + "\n"


def _speed_scale(units: str) -> float:
    if units == "kmph":
        return KMPH
    if units == "mps":
        return 1.0
    raise ConfigError(f"speed.units must be 'kmph' or 'mps', got {units!r}")


def classes_list(value) -> tuple:
    if value is None:
        return ()
    vals = value if isinstance(value, list) else [value]
    if not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in vals):
        raise ConfigError(f"power.classes must be a positive integer or a list of them, got {value!r}")
    return tuple(vals)


def build(doc: dict, mode: str) -> Scenario:
    """Turn a normalised document into model objects; raises the model's own errors."""
    g, t, s, p = doc["geometry"], doc["traffic"], doc["speed"], doc["power"]
    geom = CellGeometry(float(g["half_length_m"]), int(g["regions"]), g["edges"],
                        float(g["lossless_radius_m"]), float(g["pathloss_exp"]))
    if (t["lambda"] is None) == (t["cell_arrival_rate"] is None):
        raise ConfigError("traffic needs exactly one of 'lambda' and 'cell_arrival_rate'")
    density = (float(t["lambda"]) if t["lambda"] is not None
               else float(t["cell_arrival_rate"]) / geom.half_length)
    traffic = TrafficModel(density, float(t["job_rate"]), float(t["ho_bytes"]), t["servers"],
                           t["arrival_probs"])
    scale = _speed_scale(s["units"])
    lo, hi = float(s["v_min"]) * scale, float(s["v_max"]) * scale
    if s["kind"] == "uniform":
        if s["variance"] is not None:
            raise ConfigError("speed.variance only applies to truncated_gaussian")
        speed = UniformSpeed(lo, hi)
    elif s["kind"] == "truncated_gaussian":
        if s["variance"] is None:
            raise ConfigError("truncated_gaussian speed needs a variance")
        centre = None if s["centre"] is None else float(s["centre"]) * scale
        speed = TruncatedGaussianSpeed(lo, hi, float(s["variance"]) * scale**2, centre)
    else:
        raise ConfigError(f"speed.kind must be 'uniform' or 'truncated_gaussian', got {s['kind']!r}")

    p_bar = float(p["p_bar"])
    classes = classes_list(p["classes"])
    kind = p["policy"]
    if kind == "equal":
        policy = EqualPower(p_bar)
    elif kind == "alpha":
        if p["alpha"] is None:
            raise ConfigError("power.policy 'alpha' needs power.alpha")
        policy = AlphaRule(p_bar, float(p["alpha"]), speed.mean())
    elif kind == "linear_optimal":
        policy = continuous_optimal_power(geom, traffic, speed, p_bar)
    elif kind == "discrete_optimal":
        if len(classes) != 1:
            raise ConfigError("power.policy 'discrete_optimal' needs a single integer power.classes")
        sc = SpeedClasses.uniform(speed, classes[0])
        policy = DiscretePower(sc, tuple(discrete_optimal_power(geom, traffic, sc, p_bar)))
    else:
        raise ConfigError(f"unknown power.policy {kind!r}")

    sim = None
    if mode in SIM_MODES:
        m = doc["simulation"]
        if mode == "validate" and (m["rate_set"] is not None or m["interference"]):
            raise ConfigError("validate compares against the closed form: rate_set must be null "
                              "and interference false")
        if not isinstance(m["towers"], int) or isinstance(m["towers"], bool):
            raise ConfigError("simulation.towers must be an integer")
        sim = SimConfig(m["towers"], float(m["dt"]), geom, traffic, speed, policy,
                        float(m["horizon_s"]), expand_rates(m["rate_set"]),
                        None if m["sigma2"] is None else float(m["sigma2"]),
                        bool(m["interference"]), 0,
                        None if m["warmup_s"] is None else float(m["warmup_s"]), int(m["batches"]))
    scaling = None
    if mode == "cell-size":
        c = doc["scaling"]
        if c["p_tilde"] is None or c["gamma"] is None:
            raise ConfigError("cell-size needs scaling.p_tilde and scaling.gamma")
        scaling = ScalingSpec(float(c["p_tilde"]), float(c["gamma"]), float(c["omega_p"]))
    return Scenario(geom, traffic, speed, p_bar, policy, sim, scaling, classes)


def normalise(raw: dict) -> dict:
    """Fill defaults; rejects unknown keys. Pure structure, no model validation."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in raw:
        if key not in TOP_LEVEL:
            raise ConfigError(f"unknown key {key!r}", key)
    doc = {"mode": raw.get("mode")}
    if doc["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {doc['mode']!r}", "mode")
    for section, defaults in SECTIONS.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section {section!r} must be an object", section)
        for key in given:
            if key not in defaults:
                raise ConfigError(f"unknown key {section}.{key}", section, key)
        doc[section] = {k: copy.deepcopy(given.get(k, d)) for k, d in defaults.items()}
        for key in REQUIRED.get(section, ()):
            if doc[section][key] is None:
                raise ConfigError(f"missing required key {section}.{key}", section)
    sweep = raw.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ConfigError("sweep must be an object mapping axis names to lists", "sweep")
    for name, values in sweep.items():
        if name not in AXES:
            raise ConfigError(f"unknown sweep axis {name!r}; known: {', '.join(AXES)}", "sweep", name)
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep axis {name!r} needs a non-empty list", "sweep", name)
    if doc["mode"] == "sweep-alpha":
        if not sweep.get("alpha"):
            raise ConfigError("sweep-alpha needs a non-empty sweep.alpha list", "sweep")
        if 1.0 not in sweep["alpha"]:
            sweep = dict(sweep, alpha=[1.0] + list(sweep["alpha"]))
    doc["sweep"] = copy.deepcopy(sweep)
    seeds = raw.get("seeds", [0])
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = [seeds]
    if not isinstance(seeds, list) or not all(isinstance(x, int) for x in seeds) or not seeds:
        raise ConfigError("seeds must be an integer or a non-empty list of integers", "seeds")
    doc["seeds"] = list(seeds)
    reps = raw.get("replications", 1)
    if not isinstance(reps, int) or reps < 1:
        raise ConfigError("replications must be a positive integer", "replications")
    doc["replications"] = reps
    doc["output"] = raw.get("output")
    return doc


def resolve_seeds(seeds, replications: int) -> tuple:
    """An explicit list of several seeds wins; otherwise ``replications`` consecutive seeds."""
    seeds = list(seeds)
    if len(seeds) == 1:
        seeds = [seeds[0] + i for i in range(replications)]
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"seeds must be distinct, got {seeds}")
    return tuple(seeds)


def _located(err: Exception, text: str, source: str, path=()) -> ConfigError:
    line = _line_of(text, *path) if path else None
    where = f"{source}:{line}" if line else source
    return ConfigError(f"{where}: {err}")


def _blame(doc_path_hint: str):
    """Best guess at the config key an error message refers to."""
    for section, defaults in SECTIONS.items():
        for key in defaults:
            if key.removesuffix("_m") in doc_path_hint:
                return (section, key)
    return ()


def loads(text: str, source: str = "<config>", overrides: dict = None) -> ExperimentSpec:
    """Parse and validate a config; ``overrides`` replace top-level keys (CLI flags)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}: invalid JSON: {e.msg}") from None
    if overrides and isinstance(raw, dict):
        raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        doc = normalise(raw)
    except ConfigError as e:
        raise _located(e.args[0], text, source, e.args[1:]) from None
    spec = ExperimentSpec(doc["mode"], doc, tuple((k, tuple(v)) for k, v in doc["sweep"].items()),
                          resolve_seeds(doc["seeds"], doc["replications"]), doc["output"], source)
    # validate every grid point eagerly
    for point, d in spec.grid():
        try:
            build(d, spec.mode)
        except (SmallCellError, ValueError, TypeError) as e:
            at = f" at grid point {point}" if point else ""
            msg = f"{type(e).__name__}{at}: {e}"
            raise _located(msg, text, source, _blame(str(e))) from None
    return spec


def load_config(path, overrides: dict = None) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    return loads(text, str(path), overrides)


def dumps(spec: ExperimentSpec) -> str:
    return spec.to_json()
