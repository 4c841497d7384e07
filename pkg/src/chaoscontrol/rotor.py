"""Quantum kicked rotor on the torus, with weak disorder kicks.

One Floquet period is: the main kick ``exp(i [K cos(2 pi q)/(4 pi^2) + V_main(q)] / hbar)``
in position space, then free evolution ``exp(-i p^2 tau / (2 hbar))`` in momentum
space, interrupted by the optional weak kicks ``exp(i V_mid(q) / hbar)``.  By default
the two intermediate kicks sit at 1/3 and 2/3 of the period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .torus import Basis, HilbertSpec, WaveState

SLOTS = ("main", "mid1", "mid2")
DENSE_LIMIT = 1024


class RotorError(ValueError):
    pass


@dataclass(frozen=True)
class RotorParams:
    K: float
    spec: HilbertSpec
    mid_times: tuple[float, float] = (1.0 / 3.0, 2.0 / 3.0)

    def __post_init__(self):
        if not (self.K >= 0 and math.isfinite(self.K)):
            raise RotorError(f"kick strength K must be finite and >= 0, got {self.K}")
        t1, t2 = self.mid_times
        if not 0.0 < t1 < t2 < 1.0:
            raise RotorError(f"intermediate kick times must satisfy 0 < t1 < t2 < 1, got {self.mid_times}")

    @property
    def N(self) -> int:
        return self.spec.N


@dataclass(frozen=True)
class PotentialProfile:
    values: np.ndarray
    rms: float

    def to_csv(self, path: str | Path, spec: HilbertSpec) -> None:
        write_columns(path, ("q", "V"), (spec.q, self.values))


@dataclass(frozen=True, eq=False)
class ControlKicks:
    """Disorder amplitudes for up to three kicks per period.

    ``main`` perturbs the regular kick; ``mid1``/``mid2`` are the extra weak
    kicks.  ``None`` marks an inactive slot.
    """

    main: np.ndarray | None = None
    mid1: np.ndarray | None = None
    mid2: np.ndarray | None = None

    def __post_init__(self):
        sizes = set()
        for name in SLOTS:
            v = getattr(self, name)
            if v is None:
                continue
            v = np.array(v, dtype=float)
            if v.ndim != 1:
                raise RotorError(f"slot {name!r} must be a vector")
            v.flags.writeable = False
            object.__setattr__(self, name, v)
            sizes.add(v.size)
        if len(sizes) > 1:
            raise RotorError(f"all active slots need the same length, got {sorted(sizes)}")

    @classmethod
    def zeros(cls, N: int, slots: Iterable[str] = ("main",)) -> "ControlKicks":
        slots = tuple(slots)
        _check_slots(slots)
        return cls(**{s: np.zeros(N) for s in slots})

    @classmethod
    def from_vector(cls, x: np.ndarray, N: int, slots: Sequence[str]) -> "ControlKicks":
        _check_slots(slots)
        x = np.asarray(x, dtype=float)
        if x.size != N * len(slots):
            raise RotorError(f"expected {N * len(slots)} parameters for slots {tuple(slots)}, got {x.size}")
        return cls(**{s: x[i * N:(i + 1) * N] for i, s in enumerate(slots)})

    @property
    def active_slots(self) -> tuple[str, ...]:
        return tuple(s for s in SLOTS if getattr(self, s) is not None)

    @property
    def N(self) -> int | None:
        for s in self.active_slots:
            return getattr(self, s).size
        return None

    def vector(self) -> np.ndarray:
        parts = [getattr(self, s) for s in self.active_slots]
        return np.concatenate(parts) if parts else np.zeros(0)

    def norm_squared(self) -> float:
        v = self.vector()
        return float(v @ v)

    def eps_rms(self) -> float:
        """Amplitude strength per active kick, sqrt(sum eps^2 / n_slots).

        With this normalization the potential profile rms is eps_rms / sqrt(2),
        since every cosine harmonic contributes eps_k^2 / 2 to <V^2>.
        """
        v = self.vector()
        n = len(self.active_slots)
        return float(np.sqrt(v @ v / n)) if n else 0.0

    def eps_rms_per_harmonic(self) -> float:
        """Plain rms over all active amplitudes, sqrt(sum eps^2 / count)."""
        v = self.vector()
        return float(np.sqrt(np.mean(v**2))) if v.size else 0.0

    def to_record(self) -> dict:
        return {
            "N": self.N,
            "slots": [[s, getattr(self, s).tolist()] for s in self.active_slots],
        }

    @classmethod
    def from_record(cls, record: dict) -> "ControlKicks":
        kicks = cls(**{name: np.asarray(v, dtype=float) for name, v in record["slots"]})
        if record.get("N") is not None and kicks.N not in (None, int(record["N"])):
            raise RotorError("slot length disagrees with recorded N")
        return kicks


def _check_slots(slots: Iterable[str]) -> None:
    slots = tuple(slots)
    bad = [s for s in slots if s not in SLOTS]
    if bad or len(set(slots)) != len(slots):
        raise RotorError(f"slots must be distinct names from {SLOTS}, got {slots}")


@lru_cache(maxsize=16)
def _cosine_table(spec: HilbertSpec) -> np.ndarray:
    """table[j, k-1] = cos(2 pi k q_j), k = 1..N."""
    N = spec.N
    j = np.arange(N)[:, None]
    k = np.arange(1, N + 1)[None, :]
    # reduce j*k mod N first to keep the argument small
    table = np.cos(2.0 * np.pi * (((j * k) % N) + spec.grid_offset * k) / N)
    table.flags.writeable = False
    return table


def potential_values(eps: np.ndarray, spec: HilbertSpec) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (spec.N,):
        raise RotorError(f"disorder vector must have length N={spec.N}, got shape {eps.shape}")
    return _cosine_table(spec) @ eps


def disorder_potential(eps: np.ndarray, spec: HilbertSpec) -> PotentialProfile:
    """V(q_j) = sum_k eps_k cos(2 pi k q_j) for k = 1..N."""
    v = potential_values(eps, spec)
    return PotentialProfile(v, float(np.sqrt(np.mean(v**2))))


def kicks_potential_rms(kicks: ControlKicks, spec: HilbertSpec) -> float:
    """rms of the disorder potential pooled over all active slots."""
    slots = kicks.active_slots
    if not slots:
        return 0.0
    ms = [np.mean(potential_values(getattr(kicks, s), spec) ** 2) for s in slots]
    return float(np.sqrt(np.mean(ms)))


class FloquetPropagator:
    """Precomputed split-operator phases for one (perturbed) Floquet period.

    Works on raw position-basis amplitude arrays; ``psi`` may also be a 2-D
    array whose columns are propagated together.
    """

    def __init__(self, params: RotorParams, kicks: ControlKicks | None = None):
        spec = params.spec
        N = spec.N
        if kicks is not None and kicks.N not in (None, N):
            raise RotorError(f"kicks have length {kicks.N}, rotor has N={N}")
        inv_hbar = 1.0 / spec.hbar
        q = spec.q
        main = (params.K / (4.0 * np.pi**2)) * np.cos(2.0 * np.pi * q)
        if kicks is not None and kicks.main is not None:
            main = main + potential_values(kicks.main, spec)
        events = [(0.0, main)]
        for name, t in zip(("mid1", "mid2"), params.mid_times):
            v = None if kicks is None else getattr(kicks, name)
            if v is not None:
                events.append((t, potential_values(v, spec)))
        n = spec.momentum_index_fft
        kinetic = (n / N) ** 2 * (0.5 * inv_hbar)  # p^2/(2 hbar) per unit time
        self._position_phases = [np.exp(1j * inv_hbar * v) for _, v in events]
        times = [t for t, _ in events] + [1.0]
        self._kinetic_phases = [np.exp(-1j * kinetic * (b - a)) for a, b in zip(times[:-1], times[1:])]
        self.N = N

    def step(self, psi: np.ndarray) -> np.ndarray:
        fft, ifft = np.fft.fft, np.fft.ifft
        if psi.ndim == 1:
            for pos, kin in zip(self._position_phases, self._kinetic_phases):
                psi = ifft(kin * fft(pos * psi))
            return psi
        for pos, kin in zip(self._position_phases, self._kinetic_phases):
            psi = ifft(kin[:, None] * fft(pos[:, None] * psi, axis=0), axis=0)
        return psi

    def evolve(self, psi: np.ndarray, t: int) -> np.ndarray:
        for _ in range(t):
            psi = self.step(psi)
        return psi

    def trajectory(self, psi: np.ndarray, t: int) -> np.ndarray:
        """Array of shape (t+1, N): the state after 0..t periods."""
        out = np.empty((t + 1, psi.size), dtype=complex)
        out[0] = psi
        for i in range(t):
            psi = self.step(psi)
            out[i + 1] = psi
        return out


def _as_position(state: WaveState) -> np.ndarray:
    return state.in_basis(Basis.POSITION).amplitudes


def _wrap(amps: np.ndarray, state: WaveState) -> WaveState:
    out = WaveState(amps, Basis.POSITION, state.spec)
    return out.in_basis(state.basis)


def apply_floquet(state: WaveState, params: RotorParams) -> WaveState:
    """One period of the unperturbed rotor: kick, then free evolution."""
    return apply_perturbed_floquet(state, params, ControlKicks())


def apply_perturbed_floquet(state: WaveState, params: RotorParams, kicks: ControlKicks) -> WaveState:
    if state.spec.N != params.N:
        raise RotorError("state and rotor dimensions differ")
    prop = FloquetPropagator(params, kicks)
    return _wrap(prop.step(_as_position(state)), state)


def propagate(state: WaveState, params: RotorParams, kicks: ControlKicks | None, t: int) -> WaveState:
    if t < 0 or int(t) != t:
        raise RotorError(f"number of periods must be a non-negative integer, got {t}")
    if t == 0:
        return state
    if state.spec.N != params.N:
        raise RotorError("state and rotor dimensions differ")
    prop = FloquetPropagator(params, kicks)
    return _wrap(prop.evolve(_as_position(state), int(t)), state)


def dense_floquet_matrix(params: RotorParams, kicks: ControlKicks | None = None,
                         limit: int = DENSE_LIMIT) -> np.ndarray:
    """Position-basis matrix of one period; column j is U applied to |q_j>."""
    if params.N > limit:
        raise RotorError(f"N={params.N} exceeds the dense-matrix limit {limit}")
    prop = FloquetPropagator(params, kicks)
    return prop.step(np.eye(params.N, dtype=complex))


def write_columns(path: str | Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    arr = np.column_stack([np.asarray(c) for c in columns])
    np.savetxt(path, arr, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
