"""One function per experiment kind.

Each runner takes a validated :class:`ExperimentConfig` and returns a
:class:`RunResult`: named tables (header plus rows), an optional pass flag for
kinds that carry an acceptance check, a small summary and the derived seeds
it used. Column orders are fixed here and documented in the README.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .. import control, core, euler2d, lorenz96
from .. import diagnostics as D
from ..errors import PreconditionError, UsageError
from ..timelaw import TimeLaw
from .config import ExperimentConfig

STATE_STREAM, RUN_STREAM, EXTRA_STREAM = 0, 1, 2


@dataclass
class Table:
    header: List[str]
    rows: List[list] = field(default_factory=list)


@dataclass
class RunResult:
    tables: Dict[str, Table]
    passed: Optional[bool] = None
    summary: dict = field(default_factory=dict)
    substreams: dict = field(default_factory=dict)


def substream_seeds(seed: int) -> list:
    """Seeds derived from the root seed: initial state, main run, auxiliary draws."""
    return D.grid_seeds(seed, 3)


def coordinate_names(spec) -> list:
    if isinstance(spec, lorenz96.LorenzSpec):
        return [f"x{i + 1}" for i in range(spec.n)]
    names = []
    for j1, j2 in spec.model.modes:
        names += [f"a_{j1}_{j2}", f"b_{j1}_{j2}"]
    return names


def time_law(cfg: ExperimentConfig, h: Optional[float] = None) -> TimeLaw:
    s = cfg.scheme
    return TimeLaw(s["time_law"], float(s["h"] if h is None else h), float(s["gamma_shape"]))


def initial_state(cfg: ExperimentConfig, spec, seeds) -> np.ndarray:
    """``model.x0`` when given, otherwise a standard normal draw from the state substream."""
    if cfg.model["x0"] is not None:
        return np.asarray(cfg.model["x0"], dtype=float)
    dim = spec.n if isinstance(spec, lorenz96.LorenzSpec) else spec.dim
    return np.random.default_rng(seeds[STATE_STREAM]).standard_normal(dim)


def _scheme(cfg, spec, law=None):
    return D.models.build_scheme(spec, law or time_law(cfg), cfg.scheme["order_policy"])


def run_simulate(cfg: ExperimentConfig) -> RunResult:
    spec = cfg.model_spec()
    seeds = substream_seeds(cfg.run["seed"])
    x0 = initial_state(cfg, spec, seeds)
    scheme = _scheme(cfg, spec)
    traj = core.run_chain(scheme, x0, core.ChainRunConfig(
        cfg.run["cycles"], seeds[RUN_STREAM], cfg.run["record_every"]))
    table = Table(["cycle"] + coordinate_names(spec))
    for c, x in zip(traj.cycles, traj.states):
        table.rows.append([int(c)] + [float(v) for v in x])
    final = traj.states[-1]
    return RunResult({"trajectory": table}, None,
                     {"final_norm": float(np.linalg.norm(final)), "records": len(traj)},
                     {"initial_state": seeds[STATE_STREAM], "chain": seeds[RUN_STREAM]})


def _product_observable(idx):
    cols = [i - 1 for i in idx]

    def f(X):
        return np.prod(X[:, cols], axis=1)

    return f


def run_weak(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    spec = cfg.model_spec()
    seeds = substream_seeds(cfg.run["seed"])
    x0 = initial_state(cfg, spec, seeds)
    obs = {"*".join(f"x{i}" for i in o): _product_observable(o) for o in p["observables"]}
    rep = D.weak_error_study(spec, obs, x0, float(p["t"]), [float(h) for h in p["h_grid"]],
                             cfg.run["samples"], seeds[RUN_STREAM], cfg.scheme["time_law"],
                             cfg.scheme["order_policy"])
    header = ["h"]
    for name in rep.observables:
        header += [name, f"{name}_se", f"{name}_used"]
    table = Table(header)
    for i, h in enumerate(rep.grid):
        row = [float(h)]
        for j in range(len(rep.observables)):
            row += [float(rep.errors[i, j]), float(rep.standard_errors[i, j]),
                    int(rep.used[i, j])]
        table.rows.append(row)
    slope_row = ["slope"]
    for s in rep.slopes:
        slope_row += [float(s), "", ""]
    table.rows.append(slope_row)
    lo, hi = p["slope_range"]
    passed = bool(np.all(np.isfinite(rep.slopes)) and np.all((rep.slopes >= lo) & (rep.slopes <= hi))
                  and rep.reference_dominant)
    summary = {"slopes": dict(zip(rep.observables, map(float, rep.slopes))),
               "reference_error": rep.reference_error, "reference_dominant": rep.reference_dominant,
               "inconclusive": dict(zip(rep.observables, map(bool, rep.inconclusive))),
               "notes": rep.notes}
    return RunResult({"weak_errors": table}, passed, summary,
                     {"initial_state": seeds[STATE_STREAM], "grid_root": seeds[RUN_STREAM],
                      "grid": D.grid_seeds(seeds[RUN_STREAM], len(rep.grid))})


def pathwise_verdict(errors, reduction: float) -> bool:
    e = np.asarray(errors, dtype=float)
    return bool(np.all(np.diff(e) < 0) and e[-1] <= e[0] / reduction)


def run_pathwise(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    spec = cfg.model_spec()
    seeds = substream_seeds(cfg.run["seed"])
    x0 = initial_state(cfg, spec, seeds)
    rep = D.pathwise_study(spec, x0, float(p["t"]), p["m_list"], seeds[RUN_STREAM],
                           law_kind=cfg.scheme["time_law"])
    table = Table(["m", "error"], [[int(m), float(e)] for m, e in zip(rep.grid, rep.errors[:, 0])])
    passed = pathwise_verdict(rep.errors[:, 0], float(p["reduction"]))
    return RunResult({"pathwise_errors": table}, passed,
                     {"slope": float(rep.slopes[0]), "notes": rep.notes},
                     {"initial_state": seeds[STATE_STREAM], "time_stream": seeds[RUN_STREAM]})


def run_ergodic(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    spec = cfg.model_spec()
    seeds = substream_seeds(cfg.run["seed"])
    x0 = initial_state(cfg, spec, seeds)
    names = coordinate_names(spec)
    h = float(cfg.scheme["h"])
    if isinstance(spec, lorenz96.LorenzSpec):
        x0 = float(p["radius"]) * x0 / np.linalg.norm(x0)
        rep = D.ergodic_moment_test(spec, x0, cfg.run["cycles"], h, seeds[RUN_STREAM],
                                    cfg.run["burn_in"], p["n_batches"], cfg.scheme["time_law"])
        table = Table(["coordinate", "moment2", "se2", "reference2", "z2",
                       "moment4", "se4", "reference4", "z4"])
        for i, name in enumerate(names):
            table.rows.append([name] + [float(a[i]) for a in (
                rep.moment2, rep.se2, rep.reference2, rep.z2,
                rep.moment4, rep.se4, rep.reference4, rep.z4)])
        extra = {}
    else:
        q2 = D.matched_state(x0, seeds[EXTRA_STREAM])
        rep = D.euler_two_run_test(spec, x0, q2, cfg.run["cycles"], h, seeds[RUN_STREAM],
                                   cfg.run["burn_in"], p["n_batches"], cfg.scheme["time_law"])
        table = Table(["coordinate", "moment2_first", "se2_first", "moment2_second",
                       "se2_second", "z2"])
        for i, name in enumerate(names):
            table.rows.append([name] + [float(a[i]) for a in (
                rep.moment2, rep.se2, rep.other2, rep.other_se2, rep.z2)])
        extra = {"second_state": seeds[EXTRA_STREAM]}
    rep.threshold = float(p["threshold"])
    z = np.abs(rep.z2) if rep.z4 is None else np.maximum(np.abs(rep.z2), np.abs(rep.z4))
    return RunResult({"ergodic_moments": table}, rep.passed,
                     {"kind": rep.kind, "burn_in": rep.burn_in, "max_abs_z": float(z.max())},
                     {"initial_state": seeds[STATE_STREAM], "chain": seeds[RUN_STREAM], **extra})


def run_ranks(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    spec = cfg.model_spec()
    seeds = substream_seeds(cfg.run["seed"])
    rng = np.random.default_rng(seeds[RUN_STREAM])
    dim = spec.n if isinstance(spec, lorenz96.LorenzSpec) else spec.dim
    triads = [None]
    if isinstance(spec, euler2d.EulerSpec):
        triads = D.full_coefficient_triads(spec.N)
    records = []
    for point in range(p["points"]):
        x = D.generic_point(dim, rng)
        for ti, tr in enumerate(triads):
            for rep in D.rank_tests(spec, x, tr, p["w_variant"]):
                label = "" if tr is None else f"{tr.j}+{tr.k}={tr.l}".replace(" ", "")
                records.append((rep.matrix, label, point, rep))
    width = max(len(r[3].singular_values) for r in records)
    table = Table(["matrix", "triad", "point", "rank", "expected_rank", "gap", "passed"]
                  + [f"sv{i + 1}" for i in range(width)])
    ok = True
    for name, label, point, rep in records:
        good = rep.passed and rep.gap >= p["gap"]
        ok &= good
        sv = [float(v) for v in rep.singular_values]
        table.rows.append([name, label, point, rep.rank, rep.expected_rank, float(rep.gap),
                           int(good)] + sv + [""] * (width - len(sv)))
    gaps = [r[3].gap for r in records]
    return RunResult({"ranks": table}, bool(ok),
                     {"matrices": len(records), "min_gap": float(min(gaps))},
                     {"points": seeds[RUN_STREAM]})


def run_bracket(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    spec = cfg.model_spec()
    seeds = substream_seeds(cfg.run["seed"])
    rng = np.random.default_rng(seeds[RUN_STREAM])
    table = Table(["triad", "variant", "point", "residual"])
    worst = 0.0
    triads = euler2d.enumerate_triads(spec.N)
    for point in range(p["points"]):
        q = D.generic_point(spec.dim, rng)
        for tr in triads:
            for v in euler2d.VARIANTS:
                r = D.bracket_check(spec, tr, v, q)
                worst = max(worst, r)
                table.rows.append([f"{tr.j}+{tr.k}={tr.l}".replace(" ", ""), v, point, float(r)])
    return RunResult({"bracket_residuals": table}, bool(worst < p["tolerance"]),
                     {"max_residual": worst}, {"points": seeds[RUN_STREAM]})


def run_lyapunov(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    spec = cfg.model_spec()
    seeds = substream_seeds(cfg.run["seed"])
    x0 = initial_state(cfg, spec, seeds)
    law = time_law(cfg)
    scheme = _scheme(cfg, spec, law)
    traj = core.run_chain(scheme, x0, core.ChainRunConfig(
        cfg.run["cycles"], seeds[RUN_STREAM], cfg.run["record_every"], record_times=True))
    lrep = D.lyapunov_check(spec, traj)
    path = Table(["cycles", "min_slack", "min_relative_slack", "violations"],
                 [[lrep.cycles, lrep.min_slack, lrep.min_relative_slack, lrep.violations]])
    drift = Table(["radius", "mean_norm", "standard_error", "bound", "gamma", "K", "passed"])
    ok = lrep.passed
    dseeds = D.grid_seeds(seeds[EXTRA_STREAM], len(p["radii"]))
    for R, s in zip(p["radii"], dseeds):
        d = D.lyapunov_drift(spec, float(R), law.mean, cfg.run["samples"], s, law.kind)
        d.threshold = float(p["threshold"])
        ok &= d.passed
        drift.rows.append([d.radius, d.mean_norm, d.standard_error, d.bound, d.gamma, d.K,
                           int(d.passed)])
    return RunResult({"lyapunov_path": path, "lyapunov_drift": drift}, bool(ok),
                     {"violations": lrep.violations},
                     {"initial_state": seeds[STATE_STREAM], "chain": seeds[RUN_STREAM],
                      "drift": dseeds})


def run_control(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    spec = cfg.model_spec()
    seeds = substream_seeds(cfg.run["seed"])
    triads = euler2d.enumerate_triads(spec.N)
    if p["triad"] >= len(triads):
        raise UsageError(f"params.triad must be below {len(triads)} for N={spec.N}")
    tr = triads[p["triad"]]
    v = p["variant"]
    q = initial_state(cfg, spec, seeds)
    Q = control.TriadOrbitQuery.from_state(q, tr, v)
    table = Table(["stage", "time", "y1", "y2", "y3", "partial_energy", "partial_enstrophy"])

    def row(stage, t, y):
        y = np.asarray(y, dtype=float)
        table.rows.append([stage, float(t), *map(float, y), float(np.sum(y ** 2)),
                           float(np.sum(y ** 2 / Q.weights))])

    row("initial", 0.0, Q.y)
    if not Q.distinct_norms:
        t = control.pair_rotation_time(q, tr, v, float(p["theta"]))
        y = Q.flow(t)
        row("pair_rotation", t, y)
        zero = int(np.flatnonzero(Q.rates == 0.0)[0])
        pr = [i for i in range(3) if i != zero]
        angle = np.arctan2(y[pr[1]], y[pr[0]])
        err = abs((angle - p["theta"] + np.pi) % (2 * np.pi) - np.pi)
        passed = bool(err <= 1e-10 and y[zero] == Q.y[zero])
        summary = {"operation": "pair_rotation", "angle_error": float(err)}
    else:
        if Q.is_degenerate:
            raise PreconditionError("the initial triad state sits on the degenerate level")
        t = control.zeroing_time(q, tr, v, p["target"])
        y = Q.flow(t)
        row("zeroed", t, y)
        lo, mid, hi = Q.order
        z = mid if p["target"] == "middle" else hi
        surv = [i for i in range(3) if i != z]
        ok_sign = all(np.sign(y[i]) == np.sign(Q.y[i]) for i in surv)
        resid = abs(y[z]) / np.sqrt(Q.E)
        passed = bool(resid < 1e-9 and ok_sign)
        summary = {"operation": "zeroing", "target": p["target"], "relative_residual": float(resid),
                   "regime": Q.regime}
    summary["triad"] = f"{tr.j}+{tr.k}={tr.l}".replace(" ", "")
    return RunResult({"control": table}, passed, summary, {"initial_state": seeds[STATE_STREAM]})


RUNNERS = {
    "simulate": run_simulate,
    "weak-converge": run_weak,
    "pathwise-converge": run_pathwise,
    "ergodic": run_ergodic,
    "ranks": run_ranks,
    "bracket": run_bracket,
    "lyapunov": run_lyapunov,
    "control-demo": run_control,
}
