"""Classical kicked rotor (standard map) on the unit torus.

    p' = p - (K / 2 pi) sin(2 pi q) + V_eps'(q)
    q' = q + p'                                  (both mod 1)

The disorder enters with the sign of the quantum kick ``exp(+i V_eps / hbar)``,
i.e. as the potential energy ``-V_eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhasePoint:
    q: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "q", float(self.q) % 1.0)
        object.__setattr__(self, "p", float(self.p) % 1.0)


class ClassicalDisorder:
    """Smooth disorder potential V(q) = sum_k eps_k cos(2 pi k q)."""

    def __init__(self, eps):
        self.eps = np.asarray(eps, dtype=float)
        self.k = np.arange(1, self.eps.size + 1)
        self._w = TWO_PI * self.k

    def potential(self, q):
        q = np.asarray(q, dtype=float)
        return np.cos(np.multiply.outer(q, self._w)) @ self.eps

    def force(self, q):
        """dV/dq."""
        q = np.asarray(q, dtype=float)
        return -np.sin(np.multiply.outer(q, self._w)) @ (self._w * self.eps)

    def curvature(self, q):
        q = np.asarray(q, dtype=float)
        return -np.cos(np.multiply.outer(q, self._w)) @ (self._w**2 * self.eps)


def _kick(q, p, K, disorder):
    dp = -(K / TWO_PI) * np.sin(TWO_PI * q)
    if disorder is not None:
        dp = dp + disorder.force(q)
    return p + dp


def _kick_slope(q, K, disorder):
    s = -K * np.cos(TWO_PI * q)
    if disorder is not None:
        s = s + disorder.curvature(q)
    return s


def step_arrays(q, p, K: float, disorder: ClassicalDisorder | None = None):
    """Vectorized map step on arrays of coordinates."""
    p_new = _kick(q, p, K, disorder)
    q_new = np.mod(q + p_new, 1.0)
    return q_new, np.mod(p_new, 1.0)


def map_step(pt: PhasePoint, K: float, disorder: ClassicalDisorder | None = None) -> PhasePoint:
    q, p = step_arrays(pt.q, pt.p, K, disorder)
    return PhasePoint(float(q), float(p))


def inverse_step(pt: PhasePoint, K: float, disorder: ClassicalDisorder | None = None) -> PhasePoint:
    q = (pt.q - pt.p) % 1.0
    dp = -(K / TWO_PI) * math.sin(TWO_PI * q)
    if disorder is not None:
        dp += float(disorder.force(q))
    return PhasePoint(q, pt.p - dp)


def jacobian(pt: PhasePoint, K: float, disorder: ClassicalDisorder | None = None) -> np.ndarray:
    """Tangent map d(q', p')/d(q, p) of one step."""
    s = float(_kick_slope(pt.q, K, disorder))
    return np.array([[1.0 + s, 1.0], [s, 1.0]])


@dataclass
class SectionData:
    trajectories: list[np.ndarray]  # each of shape (n_iter + 1, 2)
    K: float
    perturbation: np.ndarray | None = None

    def to_csv(self, path: str | Path) -> None:
        rows = [np.column_stack([np.full(len(t), i), t]) for i, t in enumerate(self.trajectories)]
        data = np.vstack(rows) if rows else np.zeros((0, 3))
        np.savetxt(path, data, delimiter=",", header="trajectory_id,q,p", comments="",
                   fmt=["%d", "%.17g", "%.17g"])


def poincare_section(K: float, perturbation=None, n_seeds: int = 20, n_iter: int = 1000,
                     seed: int = 0) -> SectionData:
    """Iterate the map from ``n_seeds`` uniformly drawn points and record every point."""
    if n_seeds < 1 or n_iter < 1:
        raise ValueError("n_seeds and n_iter must be >= 1")
    disorder = _as_disorder(perturbation)
    rng = np.random.default_rng(seed)
    q = rng.random(n_seeds)
    p = rng.random(n_seeds)
    out = np.empty((n_iter + 1, n_seeds, 2))
    out[0, :, 0], out[0, :, 1] = q, p
    for i in range(n_iter):
        q, p = step_arrays(q, p, K, disorder)
        out[i + 1, :, 0], out[i + 1, :, 1] = q, p
    trajs = [out[:, j, :].copy() for j in range(n_seeds)]
    return SectionData(trajs, K, None if disorder is None else disorder.eps)


def _as_disorder(perturbation):
    if perturbation is None or isinstance(perturbation, ClassicalDisorder):
        return perturbation
    return ClassicalDisorder(perturbation)


def lyapunov_exponent(K: float, perturbation=None, n_iter: int = 20000, n_seeds: int = 8,
                      seed: int = 0, renorm_every: int = 10) -> float:
    """Mean largest Lyapunov exponent over ``n_seeds`` random initial points."""
    return float(np.mean(lyapunov_exponents(K, perturbation, n_iter, n_seeds, seed, renorm_every)))


def lyapunov_exponents(K: float, perturbation=None, n_iter: int = 20000, n_seeds: int = 8,
                       seed: int = 0, renorm_every: int = 10) -> np.ndarray:
    """Per-seed tangent-map growth rates, renormalized every ``renorm_every`` steps."""
    if n_iter < 1000:
        raise ValueError("n_iter must be >= 1000 for a meaningful estimate")
    disorder = _as_disorder(perturbation)
    rng = np.random.default_rng(seed)
    q, p = rng.random(n_seeds), rng.random(n_seeds)
    v = np.vstack([np.ones(n_seeds), np.zeros(n_seeds)]) / 1.0
    log_growth = np.zeros(n_seeds)
    for i in range(1, n_iter + 1):
        s = _kick_slope(q, K, disorder)
        dq, dp = v
        dp_new = s * dq + dp
        v = np.vstack([dq + dp_new, dp_new])
        q, p = step_arrays(q, p, K, disorder)
        if i % renorm_every == 0 or i == n_iter:
            norm = np.linalg.norm(v, axis=0)
            log_growth += np.log(norm)
            v = v / norm
    return log_growth / n_iter


def chaos_fraction(section: SectionData, grid: int = 32) -> float:
    """Largest fraction of grid x grid cells covered by a single trajectory."""
    if grid < 8:
        raise ValueError("grid must be >= 8")
    best = 0
    for traj in section.trajectories:
        if len(traj) == 0:
            continue
        cells = np.minimum((np.asarray(traj) * grid).astype(int), grid - 1)
        best = max(best, np.unique(cells[:, 0] * grid + cells[:, 1]).size)
    return best / grid**2
