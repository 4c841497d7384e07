"""Declarative experiment runner.

A config names a scenario and its parameters.  ``run`` validates everything up
front, executes the scenario, writes CSV artifacts plus ``record.json`` into
the output directory and returns the record.  ``verify`` re-checks a stored
record against the stored kicks and states without optimizing again.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import __version__
from .classical import chaos_fraction, lyapunov_exponent, poincare_section
from .control import (ControlProblem, ControlRun, OptimizationResult, cost, loglog_slope, optimize_control,
                      random_pair, scaling_sweep, target_fidelity)
from .powell import OptimizerConfig
from .rmt import (empirical_density_check, ensemble_autocorrelation, heisenberg_time, kicked_rotor_ratio,
                  sample_gaussian, scrambling_ratio, semicircle_density, spacing_repulsion_check)
from .rotor import (SLOTS, ControlKicks, FloquetPropagator, RotorParams, dense_floquet_matrix,
                    disorder_potential, write_columns)
from .spectral import autocorrelation_spectral, decompose, intensities, phase_alignment
from .timescales import logtime, loschmidt_echo, rotor_h_ks
from .torus import Basis, HilbertSpec, WaveState, fidelity, load_state, make_cat, make_gaussian, make_random

RECORD_FORMAT = 1
RECORD_NAME = "record.json"
ERROR_NAME = "errors.json"
SCENARIOS = ("revival", "cat", "random_pair", "fidelity_vs_time", "scaling_chaotic", "scaling_integrable",
             "classical_sos", "rmt_suite")
CONTROL_TOL = 1e-10


class ConfigError(ValueError):
    """Invalid experiment configuration; ``problems`` lists field-level messages."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


class RunFailure(RuntimeError):
    def __init__(self, message: str, record_path: Path | None):
        super().__init__(message)
        self.record_path = record_path


# ---------------------------------------------------------------- validation

_MISSING = object()


class _Field:
    def __init__(self, check: Callable[[Any, str], Any], default: Any = _MISSING, figure: Any = _MISSING):
        self.check = check
        self.default = default
        self.figure = default if figure is _MISSING else figure


def _number(lo=None, hi=None, lo_open=False, integer=False):
    def check(v, where):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"{where}: expected a number, got {v!r}")
        if integer and int(v) != v:
            raise ValueError(f"{where}: expected an integer, got {v!r}")
        v = int(v) if integer else float(v)
        if not math.isfinite(v):
            raise ValueError(f"{where}: must be finite")
        if lo is not None and (v <= lo if lo_open else v < lo):
            raise ValueError(f"{where}: must be {'>' if lo_open else '>='} {lo}, got {v}")
        if hi is not None and v > hi:
            raise ValueError(f"{where}: must be <= {hi}, got {v}")
        return v
    return check


def _list_of(item, min_len=1, ascending=False):
    def check(v, where):
        if not isinstance(v, (list, tuple)) or len(v) < min_len:
            raise ValueError(f"{where}: expected a list with at least {min_len} entries")
        out = [item(x, f"{where}[{i}]") for i, x in enumerate(v)]
        if ascending and any(b <= a for a, b in zip(out, out[1:])):
            raise ValueError(f"{where}: entries must be strictly ascending")
        return out
    return check


def _slots(v, where):
    if isinstance(v, str):
        v = [v]
    if not isinstance(v, (list, tuple)) or not v:
        raise ValueError(f"{where}: expected a non-empty list drawn from {list(SLOTS)}")
    bad = [s for s in v if s not in SLOTS]
    if bad:
        raise ValueError(f"{where}: unknown slot(s) {bad}; allowed {list(SLOTS)}")
    return [s for s in SLOTS if s in v]


def _offset(v, where):
    v = _number(0.0)(v, where)
    if v >= 1.0:
        raise ValueError(f"{where}: must lie in [0, 1)")
    return v


_STATE_FIELDS = {
    "gaussian": {"q0": _number(), "p0": _number(), "sigma": _number(0.0, lo_open=True)},
    "cat": {"q1": _number(), "q2": _number(), "p0": _number(), "sigma": _number(0.0, lo_open=True)},
    "random": {"seed": _number(0, integer=True)},
    "file": {"path": lambda v, w: str(v)},
}


def _state(v, where):
    if not isinstance(v, dict) or "kind" not in v:
        raise ValueError(f"{where}: expected a mapping with a 'kind' in {sorted(_STATE_FIELDS)}")
    kind = v["kind"]
    if kind not in _STATE_FIELDS:
        raise ValueError(f"{where}.kind: unknown state kind {kind!r}")
    fields = _STATE_FIELDS[kind]
    out = {"kind": kind}
    for k, val in v.items():
        if k == "kind":
            continue
        if k not in fields:
            raise ValueError(f"{where}.{k}: not a field of a {kind} state")
        out[k] = None if (k == "sigma" and val is None) else fields[k](val, f"{where}.{k}")
    required = {"gaussian": ("q0", "p0"), "cat": ("q1", "q2", "p0"), "random": ("seed",), "file": ("path",)}[kind]
    missing = [k for k in required if k not in out]
    if missing:
        raise ValueError(f"{where}: missing {missing}")
    return out


_OPT_FIELDS = {
    "max_iterations": _number(1, integer=True),
    "f_tol": _number(0.0, lo_open=True),
    "x_tol": _number(0.0, lo_open=True),
    "init_scale": _number(0.0, lo_open=True),
    "max_evaluations": _number(1, integer=True),
}


def _optimizer(v, where):
    if not isinstance(v, dict):
        raise ValueError(f"{where}: expected a mapping")
    out = {}
    for k, val in v.items():
        if k not in _OPT_FIELDS:
            raise ValueError(f"{where}.{k}: unknown optimizer field; allowed {sorted(_OPT_FIELDS)}")
        out[k] = _OPT_FIELDS[k](val, f"{where}.{k}")
    return out


def _path(v, where):
    if v is None:
        return None
    if not isinstance(v, str):
        raise ValueError(f"{where}: expected a path string")
    return v


_K = _number(0.0)
_N = _number(2, integer=True)
_T = _number(1, integer=True)
_MU = _number(0.0)
_SEED = _number(0, integer=True)
_COUNT = _number(1, integer=True)

_DEFAULT_OPT = {"max_iterations": 200, "f_tol": 1e-8, "x_tol": 1e-8, "init_scale": 1e-3}
_GAUSS = {"kind": "gaussian", "q0": 0.5, "p0": 0.0}


def _control_fields(t_star, restarts, offset, slots, **extra):
    base = {
        "K": _Field(_K, 8.0),
        "N": _Field(_N, 64, 256),
        "t_star": _Field(_T, t_star),
        "mu": _Field(_MU, 25.0),
        "restarts": _Field(_COUNT, restarts),
        "seed": _Field(_SEED, 0),
        "grid_offset": _Field(_offset, offset),
        "slots": _Field(_slots, slots),
        "optimizer": _Field(_optimizer, {}),
    }
    base.update(extra)
    return base


_SCALING = dict(
    N_list=_Field(_list_of(_N, 1, ascending=True), [32, 64, 128], [32, 64, 128, 256]),
    t_star=_Field(_T, 5),
    mu=_Field(_MU, 25.0),
    pairs=_Field(_COUNT, 2),
    first_pair=_Field(_SEED, 0),
    init_scales=_Field(_list_of(_number(0.0, lo_open=True)), [1e-4, 1e-5], [1e-4, 1e-5, 1e-6]),
    success_fidelity=_Field(_number(0.0, 1.0), 0.99),
    grid_offset=_Field(_offset, 0.25),
    slots=_Field(_slots, list(SLOTS)),
    optimizer=_Field(_optimizer, {"max_iterations": 60, "f_tol": 1e-7}),
)

SCHEMA: dict[str, dict[str, _Field]] = {
    "revival": _control_fields(10, 3, 0.0, ["main"], initial=_Field(_state, _GAUSS)),
    "cat": _control_fields(5, 1, 0.0, list(SLOTS), initial=_Field(_state, _GAUSS),
                           target=_Field(_state, {"kind": "cat", "q1": 0.25, "q2": 0.75, "p0": 0.0})),
    "random_pair": _control_fields(5, 1, 0.25, list(SLOTS), pair=_Field(_SEED, 0)),
    "fidelity_vs_time": _control_fields(
        5, 1, 0.25, list(SLOTS),
        N=_Field(_N, 128),
        pairs=_Field(_COUNT, 8),
        first_pair=_Field(_SEED, 0),
        t_star_list=_Field(_list_of(_T, 1, ascending=True), [1, 2, 3, 5, 10]),
        echo_t_stars=_Field(_list_of(_T, 0), [5, 10, 20]),
        optimizer=_Field(_optimizer, {"max_iterations": 60, "f_tol": 1e-7}),
    ),
    "scaling_chaotic": dict(_SCALING, K=_Field(_K, 8.0)),
    "scaling_integrable": dict(_SCALING, K=_Field(_K, 0.0)),
    "classical_sos": {
        "K": _Field(_K, 0.0),
        "disorder_record": _Field(_path, None),
        "N": _Field(_N, 64),
        "t_star": _Field(_T, 5),
        "mu": _Field(_MU, 25.0),
        "pair": _Field(_SEED, 0),
        "grid_offset": _Field(_offset, 0.25),
        "slots": _Field(_slots, list(SLOTS)),
        "optimizer": _Field(_optimizer, {"max_iterations": 60, "f_tol": 1e-7}),
        "n_seeds": _Field(_COUNT, 20),
        "n_iter": _Field(_COUNT, 5000),
        "grid": _Field(_number(8, integer=True), 32),
        "lyapunov_iterations": _Field(_number(1000, integer=True), 20000),
        "seed": _Field(_SEED, 0),
    },
    "rmt_suite": {
        "N": _Field(_N, 256),
        "count": _Field(_COUNT, 50),
        "beta": _Field(lambda v, w: _choice(v, w, (1, 2)), 1),
        "seed": _Field(_SEED, 0),
        "bin_width": _Field(_number(0.0, lo_open=True), 0.1),
        "hbar": _Field(_number(0.0, lo_open=True), 1.0),
        "t_max": _Field(_number(0.0, lo_open=True), 5.0),
        "t_points": _Field(_number(2, integer=True), 101),
        "lyapunov": _Field(_number(0.0, lo_open=True), math.log(4.0)),
    },
}


def _choice(v, where, options):
    if v not in options:
        raise ValueError(f"{where}: must be one of {list(options)}, got {v!r}")
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    parameters: dict
    output_dir: Path | None = None
    figure_scale: bool = False

    @classmethod
    def from_mapping(cls, raw: Any, *, figure_scale: bool = False, output_dir: str | Path | None = None,
                     base_dir: Path | None = None) -> "ExperimentConfig":
        """Validate ``raw`` and fill in defaults; raises ConfigError listing every problem."""
        problems: list[str] = []
        if not isinstance(raw, dict):
            raise ConfigError(["config: expected a mapping at the top level"])
        unknown = sorted(set(raw) - {"scenario", "parameters", "output_dir"})
        problems += [f"{k}: unknown top-level key" for k in unknown]
        scenario = raw.get("scenario")
        if scenario not in SCENARIOS:
            raise ConfigError(problems + [f"scenario: must be one of {list(SCENARIOS)}, got {scenario!r}"])
        params_raw = raw.get("parameters") or {}
        if not isinstance(params_raw, dict):
            raise ConfigError(problems + ["parameters: expected a mapping"])
        schema = SCHEMA[scenario]
        params: dict[str, Any] = {}
        for key, value in params_raw.items():
            if key not in schema:
                problems.append(f"parameters.{key}: unknown for scenario {scenario}; allowed {sorted(schema)}")
                continue
            try:
                params[key] = schema[key].check(value, f"parameters.{key}")
            except ValueError as exc:
                problems.append(str(exc))
        for key, fld in schema.items():
            if key not in params:
                default = fld.figure if figure_scale else fld.default
                params[key] = json.loads(json.dumps(default)) if default is not _MISSING else None
        if "optimizer" in schema:
            base = dict(_DEFAULT_OPT)
            base.update(schema["optimizer"].default)
            base.update(params["optimizer"])
            params["optimizer"] = base
        problems += _cross_checks(scenario, params, base_dir)
        if problems:
            raise ConfigError(problems)
        out = output_dir if output_dir is not None else raw.get("output_dir")
        if out is not None and base_dir is not None and output_dir is None:
            out = base_dir / out
        return cls(scenario, params, Path(out) if out is not None else None, figure_scale)

    def to_record(self) -> dict:
        return {"scenario": self.scenario, "parameters": self.parameters, "figure_scale": self.figure_scale}


def _cross_checks(scenario: str, p: dict, base_dir: Path | None) -> list[str]:
    out = []
    if scenario in ("revival", "cat", "random_pair", "fidelity_vs_time", "classical_sos"):
        if p.get("N", 2) > 1024 and scenario == "revival":
            out.append("parameters.N: revival diagnostics need a dense Floquet matrix, N <= 1024")
    if scenario == "revival" and p["slots"] != ["main"]:
        out.append("parameters.slots: revival control uses the main slot only")
    for key in ("initial", "target"):
        st = p.get(key)
        if isinstance(st, dict) and st.get("kind") == "file":
            path = Path(st["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
                st["path"] = str(path)
            if not path.exists():
                out.append(f"parameters.{key}.path: file {path} does not exist")
    if scenario == "classical_sos" and p.get("disorder_record"):
        path = Path(p["disorder_record"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
            p["disorder_record"] = str(path)
        if not path.exists():
            out.append(f"parameters.disorder_record: file {path} does not exist")
    return out


def load_config(path: str | Path, *, figure_scale: bool = False,
                output_dir: str | Path | None = None) -> ExperimentConfig:
    """Read a YAML (or JSON) config file."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError([f"config: file {path} not found"]) from None
    except yaml.YAMLError as exc:
        raise ConfigError([f"config: cannot parse {path}: {exc}"]) from None
    return ExperimentConfig.from_mapping(raw, figure_scale=figure_scale, output_dir=output_dir,
                                         base_dir=path.parent)


# ---------------------------------------------------------------- run context

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class _Context:
    out: Path
    threads: int
    artifacts: dict[str, str] = field(default_factory=dict)
    results: dict[str, Any] = field(default_factory=dict)
    seeds: dict[str, Any] = field(default_factory=dict)

    def path(self, name: str) -> Path:
        return self.out / name

    def csv(self, name: str, header, columns) -> None:
        p = self.path(name)
        write_columns(p, header, columns)
        self.artifacts[name] = _sha256(p)

    def register(self, name: str) -> None:
        self.artifacts[name] = _sha256(self.path(name))

    def map(self, fn, tasks: list) -> list:
        if self.threads > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=self.threads) as pool:
                return list(pool.map(fn, tasks))
        return [fn(t) for t in tasks]


def _make_state(desc: dict, spec: HilbertSpec) -> WaveState:
    kind = desc["kind"]
    if kind == "gaussian":
        return make_gaussian(spec, desc["q0"], desc["p0"], desc.get("sigma"))
    if kind == "cat":
        return make_cat(spec, desc["q1"], desc["q2"], desc["p0"], desc.get("sigma"))
    if kind == "random":
        return make_random(spec, desc["seed"])
    st = load_state(desc["path"])
    if st.spec != spec:
        raise ValueError(f"state file {desc['path']} has N={st.spec.N}, offset={st.spec.grid_offset}; "
                         f"expected N={spec.N}, offset={spec.grid_offset}")
    return st


def _opt_config(p: dict, restarts: int = 1) -> OptimizerConfig:
    o = p["optimizer"]
    return OptimizerConfig(max_iterations=o["max_iterations"], f_tol=o["f_tol"], x_tol=o["x_tol"],
                           init_scale=o["init_scale"], max_evaluations=o.get("max_evaluations"),
                           restarts=restarts, seed=p.get("seed", 0))


def _problem_record(problem: ControlProblem) -> dict:
    spec = problem.params.spec
    return {"K": problem.params.K, "N": spec.N, "grid_offset": spec.grid_offset, "t_star": problem.t_star,
            "mu": problem.mu, "slots": list(problem.active_slots), "mid_times": list(problem.params.mid_times),
            "initial": problem.initial.to_record(), "target": problem.target.to_record()}


def problem_from_record(rec: dict) -> ControlProblem:
    spec = HilbertSpec(rec["N"], rec.get("grid_offset", 0.0))
    params = RotorParams(rec["K"], spec, tuple(rec.get("mid_times", (1 / 3, 2 / 3))))
    return ControlProblem(params, WaveState.from_record(rec["initial"]), WaveState.from_record(rec["target"]),
                          rec["t_star"], rec["mu"], tuple(rec["slots"]))


def _control_entry(label: str, problem: ControlProblem, run: ControlRun) -> dict:
    return {"label": label, "problem": _problem_record(problem), "result": run.best.to_record(),
            "restart_fidelities": [r.fidelity for r in run.restarts],
            "restart_errors": [r.error for r in run.restarts if r.error],
            "fidelity_std": run.fidelity_std}


def _write_evolution(ctx: _Context, prefix: str, problem: ControlProblem, kicks: ControlKicks) -> None:
    spec = problem.params.spec
    psi = problem.initial.in_basis(Basis.POSITION).amplitudes
    t = problem.t_star
    controlled = np.abs(FloquetPropagator(problem.params, kicks).trajectory(psi, t)) ** 2
    free = np.abs(FloquetPropagator(problem.params).trajectory(psi, t)) ** 2
    tt = np.repeat(np.arange(t + 1), spec.N)
    qq = np.tile(spec.q, t + 1)
    ctx.csv(f"{prefix}_densities.csv", ("t", "q", "controlled", "uncontrolled"),
            (tt, qq, controlled.ravel(), free.ravel()))
    ctx.csv(f"{prefix}_target.csv", ("q", "density"), (spec.q, problem.target.density()))
    for slot in kicks.active_slots:
        prof = disorder_potential(getattr(kicks, slot), spec)
        ctx.csv(f"{prefix}_potential_{slot}.csv", ("q", "V"), (spec.q, prof.values))


def _write_echo(ctx: _Context, name: str, problem: ControlProblem, kicks: ControlKicks) -> dict:
    series = loschmidt_echo(problem.initial, problem.params, kicks, 2 * problem.t_star)
    ctx.csv(name, ("t", "C"), (series.times, series.values))
    c = float(series.values[problem.t_star])
    return {"t_star": problem.t_star, "C_at_t_star": c, "N_times_C": c * problem.N, "csv": name}


# ---------------------------------------------------------------- scenarios

def _single_control(ctx: _Context, p: dict, scenario: str) -> None:
    spec = HilbertSpec(p["N"], p["grid_offset"])
    params = RotorParams(p["K"], spec)
    if scenario == "random_pair":
        initial, target = random_pair(spec, p["pair"])
        ctx.seeds["pair"] = p["pair"]
    else:
        initial = _make_state(p["initial"], spec)
        target = initial if scenario == "revival" else _make_state(p["target"], spec)
    problem = ControlProblem(params, initial, target, p["t_star"], p["mu"], tuple(p["slots"]))
    config = _opt_config(p, p["restarts"])
    ctx.seeds["optimizer"] = config.seed
    run = optimize_control(problem, config, workers=ctx.threads)
    best = run.best
    entry = _control_entry(scenario, problem, run)
    ctx.results["controls"] = [entry]
    _write_evolution(ctx, scenario, problem, best.kicks)
    entry["echo"] = _write_echo(ctx, f"{scenario}_echo.csv", problem, best.kicks)
    ctx.csv(f"{scenario}_trace.csv", ("cycle", "cost"), ([i for i, _ in best.trace], [c for _, c in best.trace]))
    summary = {"fidelity": best.fidelity, "eps_rms": best.eps_rms,
               "eps_rms_per_harmonic": best.eps_rms_per_harmonic, "potential_rms": best.potential_rms,
               "potential_rms_kick_units": best.potential_rms_kick_units, "cost": best.cost,
               "fidelity_std": run.fidelity_std}
    if scenario == "revival":
        U = dense_floquet_matrix(params, best.kicks)
        dec = decompose(U, spec.hbar)
        w = intensities(initial, dec)
        ac = autocorrelation_spectral(initial, dec, problem.t_star)
        R = phase_alignment(w, dec, problem.t_star)
        dec.to_csv(ctx.path("revival_quasienergies.csv"), w)
        ctx.register("revival_quasienergies.csv")
        free = decompose(dense_floquet_matrix(params), spec.hbar)
        wf = intensities(initial, free)
        free.to_csv(ctx.path("revival_quasienergies_unperturbed.csv"), wf)
        ctx.register("revival_quasienergies_unperturbed.csv")
        entry["spectral"] = {"phase_alignment": R, "autocorrelation_abs": abs(ac),
                             "unperturbed_phase_alignment": phase_alignment(wf, free, problem.t_star)}
        summary["phase_alignment"] = R
    ctx.results["summary"] = summary


def _fvt_task(args):
    p, pair, t_star = args
    spec = HilbertSpec(p["N"], p["grid_offset"])
    initial, target = random_pair(spec, pair)
    problem = ControlProblem(RotorParams(p["K"], spec), initial, target, t_star, p["mu"], tuple(p["slots"]))
    return problem, optimize_control(problem, _opt_config(p, p["restarts"]))


def _fidelity_vs_time(ctx: _Context, p: dict) -> None:
    pairs = list(range(p["first_pair"], p["first_pair"] + p["pairs"]))
    ctx.seeds["pairs"] = pairs
    tasks = [(p, pair, t) for t in p["t_star_list"] for pair in pairs]
    tasks += [(p, pairs[0], t) for t in p["echo_t_stars"] if t not in p["t_star_list"]]
    outcomes = ctx.map(_fvt_task, tasks)
    controls, table = [], {}
    for (_, pair, t), (problem, run) in zip(tasks, outcomes):
        controls.append(_control_entry(f"pair{pair}_t{t}", problem, run))
        table.setdefault(t, []).append(run.best.fidelity)
        if pair == pairs[0] and t in p["echo_t_stars"]:
            controls[-1]["echo"] = _write_echo(ctx, f"echo_t{t}.csv", problem, run.best.kicks)
    ctx.results["controls"] = controls
    ts = [t for t in p["t_star_list"]]
    means = [float(np.mean(table[t])) for t in ts]
    stds = [float(np.std(table[t])) for t in ts]
    ctx.csv("fidelity_vs_time.csv", ("t_star", "mean_fidelity", "std_fidelity", "pairs"),
            (ts, means, stds, [len(table[t]) for t in ts]))
    ctx.results["summary"] = {"t_star": ts, "mean_fidelity": means, "std_fidelity": stds,
                              "logtime": logtime(p["N"], rotor_h_ks(p["K"])) if p["K"] > 2 else None,
                              "echo": {c["label"]: c["echo"] for c in controls if "echo" in c}}


def _scaling(ctx: _Context, p: dict) -> None:
    o = p["optimizer"]
    cfg = OptimizerConfig(max_iterations=o["max_iterations"], f_tol=o["f_tol"], x_tol=o["x_tol"],
                          max_evaluations=o.get("max_evaluations"))
    ctx.seeds["pairs"] = list(range(p["first_pair"], p["first_pair"] + p["pairs"]))
    points = scaling_sweep(p["K"], p["t_star"], p["N_list"], cfg, pairs=p["pairs"], init_scales=p["init_scales"],
                           success_fidelity=p["success_fidelity"], mu=p["mu"], active_slots=p["slots"],
                           grid_offset=p["grid_offset"], first_pair=p["first_pair"], workers=ctx.threads)
    ctx.csv("scaling.csv", ("N", "hbar", "eps_rms", "eps_rms_per_harmonic", "potential_rms", "successful_pairs"),
            ([pt.N for pt in points], [pt.hbar for pt in points], [pt.eps_rms for pt in points],
             [pt.eps_rms_per_harmonic for pt in points], [pt.potential_rms for pt in points],
             [len(pt.pairs) for pt in points]))
    hb = [pt.hbar for pt in points]
    ctx.results["points"] = [pt.to_record() for pt in points]
    ctx.results["summary"] = {
        "slope_eps_rms": loglog_slope(hb, [pt.eps_rms for pt in points]),
        "slope_eps_rms_per_harmonic": loglog_slope(hb, [pt.eps_rms_per_harmonic for pt in points]),
        "slope_potential_rms": loglog_slope(hb, [pt.potential_rms for pt in points]),
        "failures": [f for pt in points for f in pt.failures],
    }


def _classical(ctx: _Context, p: dict) -> None:
    if p["disorder_record"]:
        rec = json.loads(Path(p["disorder_record"]).read_text())
        entry = rec["results"]["controls"][0]
        kicks = ControlKicks.from_record(entry["result"]["kicks"])
        fid = entry["result"]["fidelity"]
        ctx.results["disorder_source"] = str(p["disorder_record"])
    else:
        spec = HilbertSpec(p["N"], p["grid_offset"])
        initial, target = random_pair(spec, p["pair"])
        problem = ControlProblem(RotorParams(p["K"], spec), initial, target, p["t_star"], p["mu"],
                                 tuple(p["slots"]))
        run = optimize_control(problem, _opt_config(p))
        ctx.results["controls"] = [_control_entry("integrable_control", problem, run)]
        kicks, fid = run.best.kicks, run.best.fidelity
    eps = kicks.main if kicks.main is not None else getattr(kicks, kicks.active_slots[0])
    ctx.seeds["section"] = p["seed"]
    out = {"control_fidelity": fid}
    for label, pert in (("unperturbed", None), ("perturbed", eps)):
        sec = poincare_section(p["K"], pert, p["n_seeds"], p["n_iter"], p["seed"])
        sec.to_csv(ctx.path(f"section_{label}.csv"))
        ctx.register(f"section_{label}.csv")
        out[label] = {"chaos_fraction": chaos_fraction(sec, p["grid"]),
                      "lyapunov": lyapunov_exponent(p["K"], pert, p["lyapunov_iterations"], 8, p["seed"])}
    ctx.results["summary"] = out


def _rmt(ctx: _Context, p: dict) -> None:
    ctx.seeds["ensemble"] = p["seed"]
    sample = sample_gaussian(p["N"], p["beta"], p["count"], p["seed"])
    spectra = sample.spectra()
    pooled = spectra.pooled()
    edges = np.arange(-2.4, 2.4 + 1e-12, p["bin_width"])
    hist, _ = np.histogram(pooled, bins=edges, density=True)
    centres = 0.5 * (edges[1:] + edges[:-1])
    ctx.csv("rmt_density.csv", ("E", "empirical", "semicircle"), (centres, hist, semicircle_density(centres)))
    t = np.linspace(0.0, p["t_max"] * p["hbar"], p["t_points"])
    ac = ensemble_autocorrelation(spectra, t, p["hbar"])
    ac.to_csv(ctx.path("rmt_autocorrelation.csv"))
    ctx.register("rmt_autocorrelation.csv")
    rep = spacing_repulsion_check(spectra, p["beta"])
    tau_h = heisenberg_time(p["N"], p["hbar"])
    ctx.results["summary"] = {
        "density_sup_distance": empirical_density_check(spectra, p["bin_width"]),
        "autocorrelation_max_deviation": float(np.max(np.abs(ac.empirical[1:] - ac.bessel[1:]))),
        "spacing_fraction_below": rep.fraction_below,
        "spacing_poisson_fraction": rep.poisson_fraction,
        "spacing_exponent": rep.exponent,
        "n_spacings": rep.n_spacings,
        "heisenberg_time": tau_h,
        "scrambling_ratio": scrambling_ratio(p["N"]),
        "scrambling_time": scrambling_ratio(p["N"]) * tau_h,
        "kicked_rotor_ratio": kicked_rotor_ratio(p["N"], p["lyapunov"]),
    }


_RUNNERS = {
    "revival": lambda c, p: _single_control(c, p, "revival"),
    "cat": lambda c, p: _single_control(c, p, "cat"),
    "random_pair": lambda c, p: _single_control(c, p, "random_pair"),
    "fidelity_vs_time": _fidelity_vs_time,
    "scaling_chaotic": _scaling,
    "scaling_integrable": _scaling,
    "classical_sos": _classical,
    "rmt_suite": _rmt,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def run(config: ExperimentConfig, *, threads: int = 1, output_dir: str | Path | None = None) -> dict:
    """Execute ``config`` and write its artifacts; returns the run record."""
    out = Path(output_dir) if output_dir is not None else config.output_dir
    if out is None:
        raise ConfigError(["output_dir: no output directory given (use --out or output_dir)"])
    if threads < 1:
        raise ConfigError(["threads: must be >= 1"])
    out.mkdir(parents=True, exist_ok=True)
    ctx = _Context(out, threads)
    start = time.perf_counter()
    status, error = "ok", None
    try:
        _RUNNERS[config.scenario](ctx, config.parameters)
    except Exception as exc:  # keep partial results, then report
        status = "failed"
        error = {"category": "runtime", "type": type(exc).__name__, "message": str(exc),
                 "traceback": traceback.format_exc()}
    record = {
        "format": RECORD_FORMAT,
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": config.to_record(),
        "seeds": ctx.seeds,
        "threads": threads,
        "wall_time_s": time.perf_counter() - start,
        "status": status,
        "results": ctx.results,
        "artifacts": ctx.artifacts,
    }
    record = _jsonable(record)
    (out / RECORD_NAME).write_text(json.dumps(record, indent=1, allow_nan=False))
    if error is not None:
        (out / ERROR_NAME).write_text(json.dumps(error, indent=1))
        raise RunFailure(f"{config.scenario} failed: {error['type']}: {error['message']}", out / RECORD_NAME)
    return record


# ---------------------------------------------------------------- verification

@dataclass
class VerifyReport:
    checks: list[tuple[str, bool, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, bool(ok), detail))

    def lines(self) -> list[str]:
        out = [f"{'PASS' if ok else 'FAIL'} {name}" + (f": {d}" if d else "") for name, ok, d in self.checks]
        out += [f"WARN {w}" for w in self.warnings]
        return out


class RecordError(IOError):
    pass


def _close(a: float, b: float, tol: float) -> bool:
    return a is not None and b is not None and abs(a - b) <= tol


def _verify_control(rep: VerifyReport, entry: dict) -> None:
    label = entry["label"]
    problem = problem_from_record(entry["problem"])
    res = OptimizationResult.from_record(entry["result"])
    rep.add(f"{label}: initial norm", abs(problem.initial.norm - 1) < 1e-10, f"{problem.initial.norm:.15f}")
    rep.add(f"{label}: target norm", abs(problem.target.norm - 1) < 1e-10, f"{problem.target.norm:.15f}")
    F = target_fidelity(problem, res.kicks)
    S = cost(problem, res.kicks)
    rep.add(f"{label}: fidelity", _close(F, res.fidelity, CONTROL_TOL),
            f"stored {res.fidelity!r}, recomputed {F!r}")
    rep.add(f"{label}: cost", _close(S, res.cost, CONTROL_TOL), f"stored {res.cost!r}, recomputed {S!r}")
    rep.add(f"{label}: eps_rms", _close(res.kicks.eps_rms(), res.eps_rms, 1e-14),
            f"stored {res.eps_rms!r}, recomputed {res.kicks.eps_rms()!r}")
    if "echo" in entry:
        series = loschmidt_echo(problem.initial, problem.params, res.kicks, problem.t_star)
        c = float(series.values[problem.t_star])
        rep.add(f"{label}: echo at t*", _close(c, entry["echo"]["C_at_t_star"], 1e-10),
                f"stored {entry['echo']['C_at_t_star']!r}, recomputed {c!r}")
    if "spectral" in entry:
        dec = decompose(dense_floquet_matrix(problem.params, res.kicks), problem.params.spec.hbar)
        w = intensities(problem.initial, dec)
        R = phase_alignment(w, dec, problem.t_star)
        ac = abs(autocorrelation_spectral(problem.initial, dec, problem.t_star))
        rep.add(f"{label}: phase alignment identity", abs(R - ac) < 1e-12, f"R={R!r}, |A|={ac!r}")
        rep.add(f"{label}: phase alignment >= F - 1e-6", R >= F - 1e-6, f"R={R:.8f}, F={F:.8f}")
        rep.add(f"{label}: stored phase alignment", _close(R, entry["spectral"]["phase_alignment"], 1e-8),
                f"stored {entry['spectral']['phase_alignment']!r}, recomputed {R!r}")


def verify(record_path: str | Path) -> VerifyReport:
    """Re-check a run record: artifacts, norms, costs and identities."""
    record_path = Path(record_path)
    if record_path.is_dir():
        record_path = record_path / RECORD_NAME
    try:
        record = json.loads(record_path.read_text())
    except FileNotFoundError:
        raise RecordError(f"record {record_path} not found") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise RecordError(f"record {record_path} is not valid JSON: {exc}") from None
    if not isinstance(record, dict) or "results" not in record or "config" not in record:
        raise RecordError(f"record {record_path} lacks results/config sections")
    rep = VerifyReport()
    if record.get("code_version") != __version__:
        rep.warnings.append(f"record written by version {record.get('code_version')}, "
                            f"checking with {__version__}; best effort")
    if record.get("format") != RECORD_FORMAT:
        rep.warnings.append(f"record format {record.get('format')} differs from {RECORD_FORMAT}")
    rep.add("run status", record.get("status") == "ok", str(record.get("status")))
    base = record_path.parent
    for name, digest in sorted(record.get("artifacts", {}).items()):
        p = base / name
        if not p.exists():
            rep.add(f"artifact {name}", False, "missing")
        else:
            rep.add(f"artifact {name}", _sha256(p) == digest, "checksum")
    results = record["results"]
    try:
        for entry in results.get("controls", []):
            _verify_control(rep, entry)
        scen = record["config"]["scenario"]
        if scen.startswith("scaling") and "points" in results:
            pts = results["points"]
            hb = [pt["hbar"] for pt in pts]
            for pt in pts:
                rep.add(f"N={pt['N']}: hbar", _close(pt["hbar"], 1 / (2 * math.pi * pt["N"]), 1e-15))
            slope = loglog_slope(hb, [pt["eps_rms"] if pt["eps_rms"] is not None else math.nan for pt in pts])
            stored = results["summary"]["slope_eps_rms"]
            rep.add("scaling slope", (slope is None and stored is None) or _close(slope, stored, 1e-9),
                    f"stored {stored!r}, recomputed {slope!r}")
        if scen == "rmt_suite":
            s = results["summary"]
            n = record["config"]["parameters"]["N"]
            hbar = record["config"]["parameters"]["hbar"]
            rep.add("scrambling identity", abs(s["scrambling_time"] - 1.9 * hbar) <= 1e-12 * max(hbar, 1),
                    f"{s['scrambling_time']!r}")
            rep.add("heisenberg time", _close(s["heisenberg_time"], heisenberg_time(n, hbar), 1e-12))
    except (KeyError, TypeError, ValueError) as exc:
        rep.add("record structure", False, f"{type(exc).__name__}: {exc}")
    return rep
