"""Optimal control of the kicked rotor by weak disorder.

The cost of a disorder configuration is

    S = 1 - |<target| U(t*) |initial>|^2 + mu * |eps|^2

where ``|eps|^2`` sums the squared amplitudes of every active slot.  It is
minimized with Powell's method from several random starting vectors.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .powell import NonFiniteObjective, OptimizerConfig, powell_minimize
from .rotor import (SLOTS, ControlKicks, RotorParams, _check_slots, _cosine_table, kicks_potential_rms,
                    propagate)
from .torus import Basis, HilbertSpec, WaveState, fidelity, make_random, orthogonalize

log = logging.getLogger(__name__)

DEFAULT_MU = 25.0
DEFAULT_INIT_SCALE = 1e-3
# disorder potential quoted in the units of the kick strength K
KICK_UNITS = 4.0 * math.pi**2


class ControlError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ControlProblem:
    params: RotorParams
    initial: WaveState
    target: WaveState
    t_star: int
    mu: float = DEFAULT_MU
    active_slots: tuple[str, ...] = ("main",)

    def __post_init__(self):
        _check_slots(self.active_slots)
        object.__setattr__(self, "active_slots", tuple(s for s in SLOTS if s in self.active_slots))
        if not self.active_slots:
            raise ControlError("at least one control slot must be active")
        N = self.params.N
        for name in ("initial", "target"):
            s = getattr(self, name)
            if s.spec.N != N:
                raise ControlError(f"{name} state has N={s.spec.N}, rotor has N={N}")
            if abs(s.norm - 1.0) > 1e-10:
                raise ControlError(f"{name} state is not normalized (norm {s.norm})")
        if int(self.t_star) != self.t_star or self.t_star < 0:
            raise ControlError(f"t_star must be a non-negative integer, got {self.t_star}")
        if self.mu < 0:
            raise ControlError("penalty weight mu must be >= 0")

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def n_parameters(self) -> int:
        return self.N * len(self.active_slots)


@dataclass
class OptimizationResult:
    kicks: ControlKicks
    fidelity: float
    eps_rms: float
    potential_rms: float
    cost: float
    evaluations: int
    trace: list[tuple[int, float]]
    seed: int
    converged: bool = False
    restart: int = 0
    error: str | None = None
    eps_rms_per_harmonic: float = math.nan

    @property
    def potential_rms_kick_units(self) -> float:
        return KICK_UNITS * self.potential_rms

    def to_record(self) -> dict:
        return {
            "kicks": self.kicks.to_record(),
            "fidelity": self.fidelity,
            "eps_rms": self.eps_rms,
            "eps_rms_per_harmonic": self.eps_rms_per_harmonic,
            "potential_rms": self.potential_rms,
            "potential_rms_kick_units": self.potential_rms_kick_units,
            "cost": self.cost,
            "evaluations": self.evaluations,
            "trace": [list(t) for t in self.trace],
            "seed": self.seed,
            "converged": self.converged,
            "restart": self.restart,
            "error": self.error,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "OptimizationResult":
        return cls(
            kicks=ControlKicks.from_record(rec["kicks"]),
            fidelity=rec["fidelity"], eps_rms=rec["eps_rms"], potential_rms=rec["potential_rms"],
            cost=rec["cost"], evaluations=rec["evaluations"],
            trace=[(int(i), float(c)) for i, c in rec["trace"]], seed=rec["seed"],
            converged=rec.get("converged", False), restart=rec.get("restart", 0), error=rec.get("error"),
            eps_rms_per_harmonic=rec.get("eps_rms_per_harmonic", math.nan),
        )


@dataclass
class ControlRun:
    """Best result over restarts plus every individual restart."""

    best: OptimizationResult
    restarts: list[OptimizationResult]

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([r.fidelity for r in self.restarts if r.error is None])

    @property
    def fidelity_std(self) -> float:
        f = self.fidelities
        return float(np.std(f)) if f.size else math.nan


def _check_kicks(problem: ControlProblem, kicks: ControlKicks) -> None:
    if kicks.active_slots != problem.active_slots:
        raise ControlError(f"kicks use slots {kicks.active_slots}, problem expects {problem.active_slots}")
    if kicks.N != problem.N:
        raise ControlError(f"kicks have length {kicks.N}, problem has N={problem.N}")


def target_fidelity(problem: ControlProblem, kicks: ControlKicks) -> float:
    out = propagate(problem.initial, problem.params, kicks, problem.t_star)
    return fidelity(problem.target, out)


def cost(problem: ControlProblem, kicks: ControlKicks) -> float:
    """Reference evaluation of the control cost via split-operator propagation."""
    _check_kicks(problem, kicks)
    return 1.0 - target_fidelity(problem, kicks) + problem.mu * kicks.norm_squared()


class TransferObjective:
    """Fast evaluator of the cost as a function of the flat parameter vector.

    For N up to ``dense_below`` the free evolution is applied as a precomputed
    dense matrix, which beats FFTs at small N.  Phases of slots whose
    amplitudes did not change since the previous call are reused.
    """

    def __init__(self, problem: ControlProblem, dense_below: int = 128):
        self.problem = problem
        p = problem.params
        N = p.N
        self.N = N
        self.slots = problem.active_slots
        self.mu = problem.mu
        self.t_star = int(problem.t_star)
        self._table = _cosine_table(p.spec)
        self._inv_hbar = 1.0 / p.spec.hbar
        self._kick = (p.K / KICK_UNITS) * np.cos(2.0 * np.pi * p.spec.q)
        self._psi0 = problem.initial.in_basis(Basis.POSITION).amplitudes.copy()
        self._target = problem.target.in_basis(Basis.POSITION).amplitudes.copy()
        times = [0.0] + [t for s, t in zip(("mid1", "mid2"), p.mid_times) if s in self.slots] + [1.0]
        durations = np.diff(times)
        kinetic = (p.spec.momentum_index_fft / N) ** 2 * (0.5 * self._inv_hbar)
        self._dense = N <= dense_below
        if self._dense:
            n = np.arange(N)
            dft = np.exp(-2j * np.pi * np.outer(n, n) / N) / math.sqrt(N)
            self._free = [dft.conj().T @ (np.exp(-1j * kinetic * d)[:, None] * dft) for d in durations]
        else:
            self._free = [np.exp(-1j * kinetic * d) for d in durations]
        self._cache: dict[str, tuple[bytes, np.ndarray]] = {}
        self.evaluations = 0

    def _phase(self, name: str, eps: np.ndarray) -> np.ndarray:
        key = eps.tobytes()
        hit = self._cache.get(name)
        if hit is not None and hit[0] == key:
            return hit[1]
        v = self._table @ eps
        if name == "main":
            v = v + self._kick
        ph = np.exp(1j * self._inv_hbar * v)
        self._cache[name] = (key, ph)
        return ph

    def phases(self, x: np.ndarray) -> list[np.ndarray]:
        N = self.N
        out = []
        for i, s in enumerate(self.slots):
            out.append(self._phase(s, x[i * N:(i + 1) * N]))
        if "main" not in self.slots:
            out.insert(0, np.exp(1j * self._inv_hbar * self._kick))
        return out

    def evolve(self, x: np.ndarray) -> np.ndarray:
        phases = self.phases(np.asarray(x, dtype=float))
        psi = self._psi0
        steps = list(zip(phases, self._free))
        if self._dense:
            for _ in range(self.t_star):
                for ph, w in steps:
                    psi = w @ (ph * psi)
        else:
            fft, ifft = np.fft.fft, np.fft.ifft
            for _ in range(self.t_star):
                for ph, kin in steps:
                    psi = ifft(kin * fft(ph * psi))
        return psi

    def fidelity(self, x: np.ndarray) -> float:
        return float(abs(np.vdot(self._target, self.evolve(x))) ** 2)

    def __call__(self, x: np.ndarray) -> float:
        self.evaluations += 1
        x = np.asarray(x, dtype=float)
        return 1.0 - self.fidelity(x) + self.mu * float(x @ x)


def default_init_scale(problem: ControlProblem) -> float:
    return DEFAULT_INIT_SCALE


def _restart_seed(seed: int, restart: int) -> int:
    return int(np.random.SeedSequence([seed, restart]).generate_state(1)[0])


def _finish(problem: ControlProblem, x: np.ndarray, evaluations: int, trace, seed: int,
            converged: bool, restart: int) -> OptimizationResult:
    kicks = ControlKicks.from_vector(x, problem.N, problem.active_slots)
    F = target_fidelity(problem, kicks)
    return OptimizationResult(
        kicks=kicks,
        fidelity=F,
        eps_rms=kicks.eps_rms(),
        potential_rms=kicks_potential_rms(kicks, problem.params.spec),
        cost=1.0 - F + problem.mu * kicks.norm_squared(),
        evaluations=evaluations,
        trace=list(trace),
        seed=seed,
        converged=converged,
        restart=restart,
        eps_rms_per_harmonic=kicks.eps_rms_per_harmonic(),
    )


def _single_restart(problem: ControlProblem, config: OptimizerConfig, restart: int) -> OptimizationResult:
    seed = _restart_seed(config.seed, restart)
    scale = config.init_scale if config.init_scale is not None else default_init_scale(problem)
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-scale, scale, problem.n_parameters)
    objective = TransferObjective(problem)
    cfg = replace(config, init_scale=scale)
    try:
        res = powell_minimize(objective, x0, cfg)
    except NonFiniteObjective as exc:
        log.warning("restart %d aborted: %s", restart, exc)
        out = _finish(problem, exc.x, objective.evaluations, exc.trace, seed, False, restart)
        out.error = str(exc)
        return out
    log.info("restart %d: cost %.6g after %d evaluations", restart, res.fun, res.evaluations)
    return _finish(problem, res.x, res.evaluations, res.trace, seed, res.converged, restart)


def _run_restart(args):
    return _single_restart(*args)


def optimize_control(problem: ControlProblem, config: OptimizerConfig | None = None,
                     workers: int = 1) -> ControlRun:
    """Run ``config.restarts`` independent Powell minimizations; keep the cheapest."""
    config = config or OptimizerConfig()
    jobs = [(problem, config, r) for r in range(config.restarts)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_restart, jobs))
    else:
        results = [_run_restart(j) for j in jobs]
    results.sort(key=lambda r: r.restart)
    ok = [r for r in results if r.error is None]
    if not ok:
        raise ControlError("every restart failed: " + "; ".join(r.error or "" for r in results))
    best = min(ok, key=lambda r: (r.cost, r.restart))
    return ControlRun(best, results)


def revival_control(problem: ControlProblem, config: OptimizerConfig | None = None,
                    workers: int = 1) -> ControlRun:
    """Optimize the main-kick disorder so that ``initial`` revives at ``t_star``."""
    if fidelity(problem.initial, problem.target) < 1.0 - 1e-12:
        raise ControlError("revival control needs target == initial")
    if problem.active_slots != ("main",):
        problem = replace(problem, active_slots=("main",))
    if problem.t_star == 0:
        zero = ControlKicks.zeros(problem.N, ("main",))
        res = OptimizationResult(zero, 1.0, 0.0, 0.0, 0.0, 0, [(0, 0.0)], (config or OptimizerConfig()).seed,
                                 converged=True, eps_rms_per_harmonic=0.0)
        return ControlRun(res, [res])
    return optimize_control(problem, config, workers)


def random_pair(spec: HilbertSpec, seed: int) -> tuple[WaveState, WaveState]:
    """Haar-random initial state and a random target orthogonal to it."""
    ss = np.random.SeedSequence(seed).generate_state(2)
    initial = make_random(spec, int(ss[0]))
    target = orthogonalize(make_random(spec, int(ss[1])), initial)
    return initial, target


def even_weight(state: WaveState) -> float:
    """Weight of ``state`` in the sector even under q -> -q (unshifted grid only)."""
    if state.spec.grid_offset != 0.0:
        raise ControlError("parity q -> -q maps the grid onto itself only for grid_offset = 0")
    psi = state.in_basis(Basis.POSITION).amplitudes
    mirrored = np.roll(psi[::-1], 1)  # psi(-q_j) = psi(q_{(N-j) mod N})
    even = 0.5 * (psi + mirrored)
    return float(np.vdot(even, even).real / state.norm**2)


def parity_fidelity_bound(initial: WaveState, target: WaveState) -> float:
    """Largest fidelity reachable by any parity-preserving evolution.

    On the unshifted grid the kick potentials and the kinetic phase all
    commute with q -> -q, so the even and odd sector weights of a state are
    conserved and the overlap with a target is capped at
    (sqrt(a b) + sqrt((1 - a)(1 - b)))^2.
    """
    a, b = even_weight(initial), even_weight(target)
    return float((math.sqrt(a * b) + math.sqrt(max(1 - a, 0.0) * max(1 - b, 0.0))) ** 2)


@dataclass
class ScalingPoint:
    """Smallest successful disorder at one Hilbert dimension, averaged over pairs."""

    N: int
    hbar: float
    eps_rms: float            # mean over pairs of sqrt(sum eps_k^2 / n_slots)
    potential_rms: float      # mean over pairs of the pooled V_eps(q) rms
    eps_rms_per_harmonic: float = math.nan
    pairs: list[dict] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def as_pair(self) -> tuple[float, float]:
        return self.hbar, self.eps_rms

    def to_record(self) -> dict:
        return {"N": self.N, "hbar": self.hbar, "eps_rms": self.eps_rms, "potential_rms": self.potential_rms,
                "eps_rms_per_harmonic": self.eps_rms_per_harmonic,
                "pairs": self.pairs, "failures": self.failures}


def _scaling_task(args):
    K, N, t_star, mu, slots, offset, pair, scale, config = args
    spec = HilbertSpec(N, offset)
    initial, target = random_pair(spec, pair)
    problem = ControlProblem(RotorParams(K, spec), initial, target, t_star, mu, slots)
    try:
        return optimize_control(problem, replace(config, init_scale=scale)).best
    except ControlError as exc:
        return str(exc)


def scaling_sweep(K: float, t_star: int, N_list: Sequence[int], config: OptimizerConfig | None = None, *,
                  pairs: int = 2, init_scales: Sequence[float] = (1e-3, 1e-4, 1e-5),
                  success_fidelity: float = 0.99, mu: float = DEFAULT_MU, active_slots=SLOTS,
                  grid_offset: float = 0.25, first_pair: int = 0, workers: int = 1) -> list[ScalingPoint]:
    """Minimal control strength versus hbar.

    Each random pair is optimized once per starting scale in ``init_scales``.
    Starting well below the needed strength lets Powell grow the disorder only
    as far as the transfer requires, so the smallest disorder among the runs
    reaching ``success_fidelity`` is taken as the minimal strength for that
    pair.  Pairs with no successful run are listed under ``failures``.
    """
    N_list = list(N_list)
    if N_list != sorted(N_list) or len(set(N_list)) != len(N_list):
        raise ControlError("N_list must be strictly ascending")
    if pairs < 1 or not init_scales:
        raise ControlError("need at least one pair and one starting scale")
    config = config or OptimizerConfig()
    slots = tuple(s for s in SLOTS if s in active_slots)
    tasks = [(K, N, t_star, mu, slots, grid_offset, first_pair + j, float(s), config)
             for N in N_list for j in range(pairs) for s in init_scales]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_scaling_task, tasks))
    else:
        outcomes = [_scaling_task(t) for t in tasks]
    by_key: dict[tuple[int, int], list] = {}
    for task, out in zip(tasks, outcomes):
        by_key.setdefault((task[1], task[6]), []).append((task[7], out))
    points = []
    for N in N_list:
        rows, failures = [], []
        for j in range(pairs):
            pair = first_pair + j
            runs = by_key[(N, pair)]
            good = [(s, r) for s, r in runs if isinstance(r, OptimizationResult) and r.fidelity >= success_fidelity]
            if not good:
                best_f = max((r.fidelity for _, r in runs if isinstance(r, OptimizationResult)), default=math.nan)
                failures.append(f"N={N} pair={pair}: no run reached F>={success_fidelity} (best {best_f:.4f})")
                continue
            s, r = min(good, key=lambda sr: sr[1].eps_rms)
            rows.append({"pair": pair, "init_scale": s, "fidelity": r.fidelity, "eps_rms": r.eps_rms,
                         "potential_rms": r.potential_rms, "cost": r.cost,
                         "eps_rms_per_harmonic": r.eps_rms_per_harmonic,
                         "runs": [{"init_scale": s2, "fidelity": getattr(r2, "fidelity", None),
                                   "eps_rms": getattr(r2, "eps_rms", None),
                                   "potential_rms": getattr(r2, "potential_rms", None),
                                   "error": r2 if isinstance(r2, str) else None} for s2, r2 in runs]})
        eps = float(np.mean([r["eps_rms"] for r in rows])) if rows else math.nan
        pot = float(np.mean([r["potential_rms"] for r in rows])) if rows else math.nan
        per = float(np.mean([r["eps_rms_per_harmonic"] for r in rows])) if rows else math.nan
        points.append(ScalingPoint(N, 1.0 / (2.0 * math.pi * N), eps, pot, per, rows, failures))
    return points


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Least-squares slope of log y against log x; None with fewer than two finite points."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])
