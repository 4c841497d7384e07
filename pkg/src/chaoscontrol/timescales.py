"""Loschmidt echo and the analytic control timescales.

The echo compares the same initial state evolved with and without the control
disorder.  The remaining functions are closed-form estimates: effective
dimension, minimal control time, logtime and the minimal perturbation strength
in its three regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rotor import ControlKicks, FloquetPropagator, RotorParams, write_columns
from .torus import Basis, WaveState


@dataclass(frozen=True)
class EchoSeries:
    times: np.ndarray
    values: np.ndarray

    def to_csv(self, path: str | Path) -> None:
        write_columns(path, ("t", "C"), (self.times, self.values))


@dataclass(frozen=True)
class TimescaleInputs:
    """Inputs to the analytic estimates; leave unused ones as ``None``."""

    N_eff: float | None = None
    h_KS: float | None = None
    v_rms: float | None = None
    rho_g: float | None = None
    epsilon: float | None = None
    hbar: float | None = None
    K_E: float | None = None
    t_star: float | None = None
    D: int | None = None
    lambda_bar: float | None = None
    V1_over_h: float | None = None
    delta_E_th: float | None = None
    V_th: float | None = None
    g: float | None = None
    h: float | None = None


def _need(inputs: TimescaleInputs, *names: str) -> list[float]:
    vals = []
    for n in names:
        v = getattr(inputs, n)
        if v is None:
            raise ValueError(f"missing input {n!r}")
        if n != "N_eff" and not v > 0:
            raise ValueError(f"input {n!r} must be positive, got {v}")
        vals.append(float(v))
    return vals


def loschmidt_echo(state: WaveState, params: RotorParams, kicks: ControlKicks, t_max: int) -> EchoSeries:
    """C(t) = |<psi_0(t)|psi_eps(t)>|^2 for t = 0..t_max."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    psi = state.in_basis(Basis.POSITION).amplitudes
    free = FloquetPropagator(params).trajectory(psi, t_max)
    pert = FloquetPropagator(params, kicks).trajectory(psi, t_max)
    c = np.abs(np.einsum("ij,ij->i", free.conj(), pert)) ** 2
    return EchoSeries(np.arange(t_max + 1), np.minimum(c, 1.0))


def decay_time(series: EchoSeries, threshold: float) -> int | None:
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    hits = np.nonzero(series.values <= threshold)[0]
    return int(series.times[hits[0]]) if hits.size else None


def effective_dimension(inputs: TimescaleInputs) -> float:
    """N ~ Delta E_Th * rho_g, or V_Th / (g h^D) when the phase-space form is given."""
    if inputs.delta_E_th is not None and inputs.rho_g is not None:
        dE, rho = _need(inputs, "delta_E_th", "rho_g")
        return dE * rho
    if inputs.V_th is not None:
        V, g, h = _need(inputs, "V_th", "g", "h")
        D = int(_need(inputs, "D")[0])
        return V / (g * h**D)
    if inputs.N_eff is not None:
        return float(inputs.N_eff)
    raise ValueError("need (delta_E_th, rho_g), (V_th, g, h, D) or N_eff")


def min_control_time(inputs: TimescaleInputs) -> float:
    """Time for the echo to decay to 1/N in the Fermi-golden-rule regime."""
    hbar, v, rho, eps = _need(inputs, "hbar", "v_rms", "rho_g", "epsilon")
    N = effective_dimension(inputs)
    return hbar * math.log(N) / (2.0 * math.pi * v**2 * rho * eps**2)


def logtime(N_eff: float, h_KS: float) -> float:
    if h_KS <= 0:
        raise ValueError("h_KS must be positive")
    return math.log(N_eff) / h_KS


def epsilon_star(inputs: TimescaleInputs, variant: str) -> float:
    """Minimal perturbation strength for a decayed echo at the control time.

    ``fgr_rmt`` uses matrix-element statistics, ``fgr_semiclassical`` the
    classical diffusion constant K(E), and ``saturation`` the Lyapunov-regime
    limit reached when t* shrinks to the logtime.
    """
    if variant == "fgr_rmt":
        hbar, v, rho, t = _need(inputs, "hbar", "v_rms", "rho_g", "t_star")
        N = effective_dimension(inputs)
        return math.sqrt(hbar * math.log(N) / (2.0 * math.pi * v**2 * rho * t))
    if variant == "fgr_semiclassical":
        hbar, K, t = _need(inputs, "hbar", "K_E", "t_star")
        N = effective_dimension(inputs)
        return hbar * math.sqrt(math.log(N) / (2.0 * K * t))
    if variant == "saturation":
        hbar, K, h = _need(inputs, "hbar", "K_E", "h_KS")
        return hbar * math.sqrt(h / (2.0 * K))
    raise ValueError(f"unknown variant {variant!r}")


def logtime_phase_space(V_th: float, g: float, h: float, D: int, h_KS: float) -> float:
    """Logtime with N written as a phase-space volume over Planck cells."""
    return (math.log(V_th) - math.log(g) - D * math.log(h)) / h_KS


def logtime_manybody(D: int, lambda_bar: float, V1_over_h: float) -> float:
    """Per-degree-of-freedom logtime ln(V_1/h)/lambda_bar; D drops out."""
    if lambda_bar <= 0:
        raise ValueError("lambda_bar must be positive")
    return math.log(V1_over_h) / lambda_bar


def rotor_h_ks(K: float) -> float:
    """Kolmogorov-Sinai entropy of the strongly chaotic standard map, ln(K/2)."""
    return math.log(K / 2.0)
