"""Experiment configuration: YAML tree, validation, dotted-path overrides.

A config has five sections::

    experiment: weak-converge
    model:   {name: lorenz96, n: 6, conservative: true, nu: 0.0, forcing: null, x0: null}
    scheme:  {h: 0.1, time_law: exponential, gamma_shape: 2.0, order_policy: fixed}
    run:     {cycles: 1000, samples: 10000, seed: 0, burn_in: null, record_every: 1}
    params:  {...}   # keys depend on the experiment kind

Parsing fills defaults, rejects unknown keys and collects every problem it
finds before reporting. ``dump_config(parse_config(text))`` re-parses to the
same structure.
"""

import copy
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .. import euler2d, lorenz96
from ..errors import ConfigurationError
from ..timelaw import LAW_CODES

KINDS = ("simulate", "weak-converge", "pathwise-converge", "ergodic", "ranks", "bracket",
         "lyapunov", "control-demo")
MODELS = ("lorenz96", "euler2d")
MANIFEST_MARKER = "manifest_format"

_MISSING = object()

MODEL_DEFAULTS = {
    "name": "lorenz96",
    "n": 6,
    "N": 2,
    "conservative": True,
    "nu": 0.0,
    "dissipation": "laplacian",
    "forcing": None,
    "x0": None,
}
SCHEME_DEFAULTS = {
    "h": 0.1,
    "time_law": "exponential",
    "gamma_shape": 2.0,
    "order_policy": "fixed",
}
RUN_DEFAULTS = {
    "cycles": 1000,
    "samples": 10000,
    "seed": 0,
    "burn_in": None,
    "record_every": 1,
}
PARAM_DEFAULTS = {
    "simulate": {},
    "weak-converge": {"t": 1.0, "h_grid": [0.02, 0.01, 0.005, 0.0025],
                      "observables": [[1], [1, 2], [4]], "slope_range": [0.8, 2.2]},
    "pathwise-converge": {"t": 1.0, "m_list": [4, 8, 16, 32], "reduction": 4.0},
    "ergodic": {"n_batches": 50, "radius": 1.0, "threshold": 4.0},
    "ranks": {"points": 10, "gap": 1000.0, "w_variant": "aaa"},
    "bracket": {"points": 10, "tolerance": 1e-12},
    "lyapunov": {"radii": [1.0, 10.0, 100.0], "threshold": 3.0},
    "control-demo": {"triad": 0, "variant": "aaa", "target": "middle", "theta": 0.0},
}
SECTIONS = ("experiment", "model", "scheme", "run", "params")


@dataclass
class ExperimentConfig:
    """A fully validated experiment description."""

    experiment: str
    model: Dict[str, Any]
    scheme: Dict[str, Any]
    run: Dict[str, Any]
    params: Dict[str, Any]
    overrides: List[str] = field(default_factory=list)

    def as_tree(self) -> dict:
        return {"experiment": self.experiment, "model": copy.deepcopy(self.model),
                "scheme": copy.deepcopy(self.scheme), "run": copy.deepcopy(self.run),
                "params": copy.deepcopy(self.params)}

    def model_spec(self):
        return build_model_spec(self.model)


class ConfigErrors(ConfigurationError):
    """All problems found in one config, each prefixed by its field path."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (``1e9``) as numbers."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                    |[-+]?\.(?:inf|Inf|INF)
                    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def _safe_load(text: str):
    return yaml.load(text, Loader=_Loader)


def _load_yaml(text: str):
    try:
        return _safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigErrors([f"syntax error at {where}: {exc.problem or exc}"]) from None
    except yaml.YAMLError as exc:
        raise ConfigErrors([f"syntax error: {exc}"]) from None


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


class _Checker:
    def __init__(self):
        self.problems = []

    def err(self, path, msg):
        self.problems.append(f"{path}: {msg}")

    def section(self, tree, name, defaults):
        raw = tree.get(name, {})
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            self.err(name, "must be a mapping")
            return copy.deepcopy(defaults)
        for key in raw:
            if key not in defaults:
                self.err(f"{name}.{key}", "unknown key")
        out = copy.deepcopy(defaults)
        out.update({k: v for k, v in raw.items() if k in defaults})
        return out

    def positive_int(self, path, v, minimum=1):
        if not _is_int(v) or v < minimum:
            self.err(path, f"must be an integer >= {minimum}, got {v!r}")
            return False
        return True

    def positive(self, path, v):
        if not _is_num(v) or not np.isfinite(v) or v <= 0:
            self.err(path, f"must be a positive number, got {v!r}")
            return False
        return True

    def number_list(self, path, v, positive=True, integer=False, allow_empty=False):
        if not isinstance(v, list) or (not v and not allow_empty):
            self.err(path, f"must be a non-empty list, got {v!r}")
            return False
        ok = True
        for i, item in enumerate(v):
            good = _is_int(item) if integer else _is_num(item)
            if not good or not np.isfinite(item) or (positive and item <= 0):
                self.err(f"{path}[{i}]", f"must be a {'positive ' if positive else ''}"
                                         f"{'integer' if integer else 'number'}, got {item!r}")
                ok = False
        return ok


def _vector(value, length):
    if value is None:
        return None
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(length, float(arr))
    return arr


def model_dim(model: dict) -> int:
    if model["name"] == "lorenz96":
        return int(model["n"])
    return 4 * int(model["N"]) * (int(model["N"]) + 1)


def build_model_spec(model: dict):
    """Model spec object of a validated model section."""
    forcing = model["forcing"]
    if model["name"] == "lorenz96":
        return lorenz96.LorenzSpec(int(model["n"]), conservative=bool(model["conservative"]),
                                   nu=float(model["nu"]), forcing=forcing)
    return euler2d.EulerSpec(int(model["N"]), conservative=bool(model["conservative"]),
                             nu=float(model["nu"]), dissipation_kind=model["dissipation"],
                             forcing=forcing)


def _check_model(c: _Checker, m: dict):
    if m["name"] not in MODELS:
        c.err("model.name", f"must be one of {list(MODELS)}, got {m['name']!r}")
        return
    size_key = "n" if m["name"] == "lorenz96" else "N"
    minimum = 4 if m["name"] == "lorenz96" else 2
    if not c.positive_int(f"model.{size_key}", m[size_key], minimum):
        return
    if not isinstance(m["conservative"], bool):
        c.err("model.conservative", f"must be true or false, got {m['conservative']!r}")
        return
    if m["dissipation"] not in euler2d.DISSIPATION_KINDS:
        c.err("model.dissipation",
              f"must be one of {list(euler2d.DISSIPATION_KINDS)}, got {m['dissipation']!r}")
    dim = model_dim(m)
    for key in ("forcing", "x0"):
        v = m[key]
        if v is None:
            continue
        if _is_num(v) and key == "forcing":
            continue
        if not isinstance(v, list) or len(v) != dim or not all(_is_num(e) for e in v):
            c.err(f"model.{key}", f"must be null{' or a number' if key == 'forcing' else ''} "
                                  f"or a list of {dim} numbers")
    if m["conservative"]:
        if not _is_num(m["nu"]) or m["nu"] != 0:
            c.err("model.nu", "must be 0 for a conservative model")
        if m["forcing"] is not None and np.any(_vector(m["forcing"], dim) != 0):
            c.err("model.forcing", "must be null or zero for a conservative model")
        return
    if not _is_num(m["nu"]) or not np.isfinite(m["nu"]) or m["nu"] <= 0:
        c.err("model.nu", f"must be positive for a forced model, got {m['nu']!r}")
    if m["forcing"] is None:
        c.err("model.forcing", "is required for a forced model")
        return
    if c.problems:
        return
    F = _vector(m["forcing"], dim)
    if np.any(F < 0) or not np.any(F > 0) or not np.all(np.isfinite(F)):
        c.err("model.forcing", "entries must be finite, nonnegative and not all zero")
        return
    if m["name"] == "euler2d" and not euler2d.is_nondegenerate(F):
        c.err("model.forcing", "forcing must be a nondegenerate Euler state")


def _check_scheme(c: _Checker, s: dict):
    c.positive("scheme.h", s["h"])
    if s["time_law"] not in LAW_CODES:
        c.err("scheme.time_law", f"must be one of {sorted(LAW_CODES)}, got {s['time_law']!r}")
    c.positive("scheme.gamma_shape", s["gamma_shape"])
    if s["order_policy"] not in ("fixed", "random-permutation"):
        c.err("scheme.order_policy",
              f"must be 'fixed' or 'random-permutation', got {s['order_policy']!r}")


def _check_run(c: _Checker, r: dict):
    c.positive_int("run.cycles", r["cycles"], 1)
    c.positive_int("run.samples", r["samples"], 2)
    if not _is_int(r["seed"]) or not 0 <= r["seed"] < 2 ** 64:
        c.err("run.seed", f"must be an integer in [0, 2**64), got {r['seed']!r}")
    if r["burn_in"] is not None:
        c.positive_int("run.burn_in", r["burn_in"], 0)
    c.positive_int("run.record_every", r["record_every"], 1)


def _check_params(c: _Checker, kind: str, p: dict, model: dict):
    at = lambda k: f"params.{k}"
    if kind == "weak-converge":
        c.positive(at("t"), p["t"])
        c.number_list(at("h_grid"), p["h_grid"])
        obs = p["observables"]
        dim = model_dim(model) if _is_int(model.get("n")) and _is_int(model.get("N")) else None
        if not isinstance(obs, list) or not obs:
            c.err(at("observables"), "must be a non-empty list of coordinate index lists")
        else:
            for i, o in enumerate(obs):
                if (not isinstance(o, list) or not o
                        or not all(_is_int(e) and e >= 1 and (dim is None or e <= dim) for e in o)):
                    c.err(f"{at('observables')}[{i}]",
                          "must be a non-empty list of 1-based coordinate indices")
        sr = p["slope_range"]
        if c.number_list(at("slope_range"), sr) and (len(sr) != 2 or sr[0] >= sr[1]):
            c.err(at("slope_range"), "must be [low, high] with low < high")
    elif kind == "pathwise-converge":
        c.positive(at("t"), p["t"])
        if c.number_list(at("m_list"), p["m_list"], integer=True) and len(p["m_list"]) < 2:
            c.err(at("m_list"), "needs at least two values")
        c.positive(at("reduction"), p["reduction"])
    elif kind == "ergodic":
        c.positive_int(at("n_batches"), p["n_batches"], 2)
        c.positive(at("radius"), p["radius"])
        c.positive(at("threshold"), p["threshold"])
    elif kind == "ranks":
        c.positive_int(at("points"), p["points"])
        c.positive(at("gap"), p["gap"])
        if p["w_variant"] not in euler2d.VARIANTS:
            c.err(at("w_variant"), f"must be one of {list(euler2d.VARIANTS)}")
    elif kind == "bracket":
        c.positive_int(at("points"), p["points"])
        c.positive(at("tolerance"), p["tolerance"])
    elif kind == "lyapunov":
        c.number_list(at("radii"), p["radii"])
        c.positive(at("threshold"), p["threshold"])
    elif kind == "control-demo":
        c.positive_int(at("triad"), p["triad"], 0)
        if p["variant"] not in euler2d.VARIANTS:
            c.err(at("variant"), f"must be one of {list(euler2d.VARIANTS)}")
        if p["target"] not in ("middle", "largest"):
            c.err(at("target"), "must be 'middle' or 'largest'")
        if not _is_num(p["theta"]) or not np.isfinite(p["theta"]):
            c.err(at("theta"), f"must be a finite number, got {p['theta']!r}")


def _check_kind_vs_model(c: _Checker, kind: str, m: dict):
    euler_only = {"bracket": "a forced euler2d model", "control-demo": "an euler2d model"}
    if kind in euler_only and m["name"] != "euler2d":
        c.err("model.name", f"experiment {kind!r} needs {euler_only[kind]}")
    if kind in ("bracket", "lyapunov") and m["conservative"] is True:
        c.err("model.conservative", f"experiment {kind!r} needs a forced model")
    if kind in ("ergodic", "pathwise-converge") and m["conservative"] is False:
        c.err("model.conservative", f"experiment {kind!r} needs a conservative model")


def validate_tree(tree, kind: Optional[str] = None) -> ExperimentConfig:
    """Validate a parsed tree; ``kind`` (a subcommand) fills or must match ``experiment``."""
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ConfigErrors(["<root>: config must be a mapping"])
    if MANIFEST_MARKER in tree:
        tree = tree.get("config")
        if not isinstance(tree, dict):
            raise ConfigErrors(["config: manifest has no config section"])
    c = _Checker()
    for key in tree:
        if key not in SECTIONS:
            c.err(str(key), "unknown key")
    exp = tree.get("experiment", kind)
    if kind is not None and exp != kind:
        c.err("experiment", f"config describes {exp!r} but the command is {kind!r}")
    known = exp in KINDS
    if not known:
        c.err("experiment", f"must be one of {list(KINDS)}, got {exp!r}")
    model = c.section(tree, "model", MODEL_DEFAULTS)
    scheme = c.section(tree, "scheme", SCHEME_DEFAULTS)
    run = c.section(tree, "run", RUN_DEFAULTS)
    _check_model(c, model)
    _check_scheme(c, scheme)
    _check_run(c, run)
    params = {}
    if known:
        params = c.section(tree, "params", PARAM_DEFAULTS[exp])
        _check_params(c, exp, params, model)
        if not any(p.startswith("model.") for p in c.problems):
            _check_kind_vs_model(c, exp, model)
    if c.problems:
        raise ConfigErrors(c.problems)
    return ExperimentConfig(exp, model, scheme, run, params)


def parse_config(text: str, kind: Optional[str] = None) -> ExperimentConfig:
    """Parse and validate YAML text (a plain config or a run manifest)."""
    return validate_tree(_load_yaml(text), kind)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.as_tree(), sort_keys=True, default_flow_style=False)


def apply_overrides(tree, overrides) -> dict:
    """Set ``section.key=value`` entries; values are read as YAML scalars or lists."""
    tree = copy.deepcopy(tree) if tree else {}
    if MANIFEST_MARKER in tree:
        tree = copy.deepcopy(tree.get("config") or {})
    problems = []
    for item in overrides:
        if "=" not in item:
            problems.append(f"--set {item}: expected key=value")
            continue
        path, raw = item.split("=", 1)
        keys = path.strip().split(".")
        if not all(keys):
            problems.append(f"--set {item}: empty path component")
            continue
        try:
            value = _safe_load(raw) if raw.strip() else None
        except yaml.YAMLError as exc:
            problems.append(f"--set {item}: cannot parse value ({exc})")
            continue
        node = tree
        for k in keys[:-1]:
            nxt = node.get(k, _MISSING)
            if nxt is _MISSING or nxt is None:
                nxt = node[k] = {}
            if not isinstance(nxt, dict):
                problems.append(f"--set {item}: {k} is not a section")
                break
            node = nxt
        else:
            node[keys[-1]] = value
    if problems:
        raise ConfigErrors(problems)
    return tree


def load_config(path: Optional[str], overrides=(), kind: Optional[str] = None,
                seed: Optional[int] = None) -> ExperimentConfig:
    """Read a config file (or start empty), apply overrides and validate."""
    tree = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigErrors([f"{path}: {exc.strerror}"]) from None
        tree = _load_yaml(text) or {}
        if not isinstance(tree, dict):
            raise ConfigErrors(["<root>: config must be a mapping"])
    overrides = list(overrides)
    if seed is not None:
        overrides.append(f"run.seed={seed}")
    tree = apply_overrides(tree, overrides)
    cfg = validate_tree(tree, kind)
    cfg.overrides = overrides
    return cfg
