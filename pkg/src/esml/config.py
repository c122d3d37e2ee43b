"""Experiment configuration files (JSON) and their validation.

A configuration describes the process (dimension, population size,
constraint normal, movement law, step-size rule, start point, seed) plus
one optional section per subcommand. ``parse_config`` reports every
violation it finds, not just the first. See ``configs/`` in the
repository and the README for annotated examples.
"""

from __future__ import annotations

import hashlib
import importlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dist_core.copulas import copula_from_dict
from .dist_core.movement import movement_from_dict
from .errors import ConfigError
from .es_sim import ConstantStep, ConstraintNormal, CustomStep, ESConfig
from .analysis.quadrature import QuadratureSpec

FORMAT_VERSION = 1

SUBCOMMANDS = ("simulate", "kernel", "drift", "delta-inf", "validate-copula", "diagnose")
ANALYSIS_SUBCOMMANDS = ("kernel", "drift", "delta-inf", "diagnose")

RULE_STRUCTURE = ("constraint structure rule: when n1 > 0 and n2 > 0 every component "
                  "beyond the second must be zero")
RULE_POPULATION = ("analysis rule: kernel, drift and ergodicity results require a "
                   "population size lambda >= 2")
RULE_FEASIBLE = "feasible start rule: the initial point must satisfy -n.x0 > 0"
RULE_STEP = "step-size rule: the step size must be a positive real"
RULE_PLANE = ("analysis rule: the analytic layer only covers normals supported on the "
              "first two coordinates")

DEFAULTS = {
    "simulate": {"T": 1000, "replicas": 1, "record_x": False},
    "kernel": {"deltas": [0.1, 1.0, 5.0], "intervals": [[0.0, None], [0.0, 1.0], [1.0, None]],
               "eps": [1e-1, 1e-2, 1e-3, 1e-4]},
    "drift": {"alphas": [0.01, 0.05, 0.1, 0.2], "delta_min": 2.0, "delta_max": 10.0,
              "points": 20},
    "delta-inf": {"moment_alphas": [0.01, 0.05, 0.1, 0.2]},
    "validate-copula": {"grid": 9, "step": 1e-4, "monotone_order": 4},
    "diagnose": {"T": 2000, "replicas": 1000, "alpha": 0.1, "window": 500,
                 "ks_threshold": 0.02, "drift_points": 20, "beta_points": 400},
}


@dataclass
class ExperimentConfig:
    es: ESConfig
    raw: dict
    sections: dict
    quadrature: QuadratureSpec
    config_hash: str
    format_version: int = FORMAT_VERSION
    copula: object = None
    extra: dict = field(default_factory=dict)

    def section(self, name):
        return self.sections[name]


def canonical_hash(raw):
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


def _load_eta(ref):
    mod, _, name = str(ref).partition(":")
    if not mod or not name:
        raise ValueError(f"custom step rule must be given as 'module:function', got {ref!r}")
    fn = importlib.import_module(mod)
    for part in name.split("."):
        fn = getattr(fn, part)
    return fn


def _positive(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) and x > 0


def parse_config_dict(raw, subcommand=None):
    """Validate a decoded configuration; raises ``ConfigError`` listing every problem."""
    bad = []
    if not isinstance(raw, dict):
        raise ConfigError(["config: top level must be an object"])
    fv = raw.get("format_version", FORMAT_VERSION)
    if fv != FORMAT_VERSION:
        bad.append(f"format_version: unsupported version {fv!r} (expected {FORMAT_VERSION})")
    if subcommand is not None and subcommand not in SUBCOMMANDS:
        bad.append(f"subcommand: unknown subcommand {subcommand!r}")

    for key in ("d", "lambda", "n", "movement"):
        if key not in raw:
            bad.append(f"{key}: missing required field")

    d = raw.get("d")
    if d is not None and not (isinstance(d, int) and not isinstance(d, bool) and d >= 2):
        bad.append(f"d: dimension must be an integer >= 2, got {d!r}")
    lam = raw.get("lambda")
    if lam is not None:
        if not (isinstance(lam, int) and not isinstance(lam, bool) and lam >= 1):
            bad.append(f"lambda: population size must be an integer >= 1, got {lam!r}")
        elif subcommand in ANALYSIS_SUBCOMMANDS and lam < 2:
            bad.append(f"lambda: {RULE_POPULATION}; got lambda = {lam} for '{subcommand}'")

    n = None
    nvec = raw.get("n")
    if nvec is not None:
        try:
            vec = [float(v) for v in nvec]
        except (TypeError, ValueError):
            bad.append(f"n: must be a list of numbers, got {nvec!r}")
        else:
            if isinstance(d, int) and len(vec) != d:
                bad.append(f"n: has {len(vec)} components but d = {d}")
            if not any(vec):
                bad.append("n: the constraint normal must be nonzero")
            elif not all(math.isfinite(v) for v in vec):
                bad.append("n: components must be finite")
            elif len(vec) >= 3 and vec[0] > 0 and vec[1] > 0 and any(vec[2:]):
                k = next(i for i, v in enumerate(vec[2:], start=3) if v)
                bad.append(f"n: {RULE_STRUCTURE}; component {k} is {vec[k - 1]!r}")
            else:
                n = ConstraintNormal(tuple(vec))
                if subcommand in ANALYSIS_SUBCOMMANDS and any(vec[2:]):
                    bad.append(f"n: {RULE_PLANE}")
                elif subcommand in ANALYSIS_SUBCOMMANDS and vec[0] == 0 and vec[1] == 0:
                    bad.append(f"n: {RULE_PLANE}")

    movement = None
    if "movement" in raw:
        try:
            movement = movement_from_dict(raw["movement"])
        except (KeyError, TypeError, ValueError) as err:
            bad.append(f"movement: {err}")

    step = None
    st = raw.get("step_size", {"kind": "constant", "sigma": 1.0})
    kind = st.get("kind") if isinstance(st, dict) else None
    if kind == "constant":
        if _positive(st.get("sigma")):
            step = ConstantStep(float(st["sigma"]))
        else:
            bad.append(f"step_size.sigma: {RULE_STEP}; got {st.get('sigma')!r}")
    elif kind == "custom":
        try:
            step = CustomStep(_load_eta(st.get("eta")), int(st.get("depth", 1)))
        except (ImportError, AttributeError, ValueError) as err:
            bad.append(f"step_size.eta: {err}")
        if subcommand in ANALYSIS_SUBCOMMANDS:
            bad.append("step_size: analysis subcommands assume a constant step size")
    else:
        bad.append(f"step_size.kind: must be 'constant' or 'custom', got {kind!r}")

    sigma0 = raw.get("sigma0")
    if sigma0 is not None and not _positive(sigma0):
        bad.append(f"sigma0: {RULE_STEP}; got {sigma0!r}")
    x0 = raw.get("x0")
    if x0 is not None:
        try:
            x0 = tuple(float(v) for v in x0)
        except (TypeError, ValueError):
            bad.append(f"x0: must be a list of numbers, got {x0!r}")
            x0 = None
        else:
            if isinstance(d, int) and len(x0) != d:
                bad.append(f"x0: has {len(x0)} components but d = {d}")
            elif n is not None and not -n.dot(np.array(x0)) > 0:
                bad.append(f"x0: {RULE_FEASIBLE}; got -n.x0 = {-n.dot(np.array(x0))!r}")
    cap = raw.get("resample_cap", 10 ** 6)
    if not (isinstance(cap, int) and not isinstance(cap, bool) and cap >= 1):
        bad.append(f"resample_cap: must be an integer >= 1, got {cap!r}")
    seed = raw.get("seed", 0)
    if not (isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2 ** 64):
        bad.append(f"seed: must be an integer in [0, 2**64), got {seed!r}")

    quad = None
    try:
        quad = QuadratureSpec(**raw.get("quadrature", {}))
    except (TypeError, ValueError) as err:
        bad.append(f"quadrature: {err}")

    sections = {}
    for name, dflt in DEFAULTS.items():
        given = raw.get(name, {})
        if not isinstance(given, dict):
            bad.append(f"{name}: section must be an object")
            continue
        unknown = sorted(set(given) - set(dflt) - {"copula"})
        if unknown:
            bad.append(f"{name}: unknown keys {unknown}")
        sections[name] = {**dflt, **given}
    for name in ("simulate", "diagnose"):
        sec = sections.get(name, {})
        for key in ("T", "replicas"):
            v = sec.get(key)
            if not (isinstance(v, int) and not isinstance(v, bool) and v >= 1):
                bad.append(f"{name}.{key}: must be an integer >= 1, got {v!r}")

    copula = None
    vc = sections.get("validate-copula", {})
    if "copula" in vc:
        try:
            copula = copula_from_dict(vc["copula"])
        except (KeyError, TypeError, ValueError) as err:
            bad.append(f"validate-copula.copula: {err}")
    elif movement is not None:
        copula = movement.components()[2]

    if bad:
        raise ConfigError(bad)
    try:
        es = ESConfig(d=d, lam=lam, n=n, movement=movement, step=step, x0=x0, sigma0=sigma0,
                      resample_cap=cap, seed=seed)
    except ValueError as err:
        raise ConfigError([f"config: {err}"]) from err
    return ExperimentConfig(es, raw, sections, quad, canonical_hash(raw), copula=copula)


def parse_config(path, subcommand=None):
    """Read and validate a JSON configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError([f"config: cannot read {path}: {err.strerror}"]) from err
    except json.JSONDecodeError as err:
        raise ConfigError([f"config: malformed JSON at line {err.lineno}: {err.msg}"]) from err
    return parse_config_dict(raw, subcommand)
