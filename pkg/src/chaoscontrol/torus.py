"""Quantum mechanics on the unit torus.

The Hilbert space has dimension ``N`` with ``hbar = 1/(2 pi N)``.  Position
amplitudes live on the grid ``q_j = (j + offset)/N``; momentum amplitudes are
stored in symmetric order ``n = -floor(N/2), ..., ceil(N/2) - 1`` with
``p_n = n/N``.  The offset is the position Bloch phase (0 means periodic).

A nonzero offset other than 1/2 matters for control: on the periodic grid
``cos(2 pi k q)`` and ``cos(2 pi (N-k) q)`` coincide and every even potential
commutes with the reflection ``q -> -q``.
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

NORM_TOL = 1e-10


class TorusError(ValueError):
    """Raised on invalid state construction or incompatible states."""


class Basis(str, enum.Enum):
    POSITION = "position"
    MOMENTUM = "momentum"


@dataclass(frozen=True)
class HilbertSpec:
    """Dimension of the torus Hilbert space; ``hbar`` follows from ``N``."""

    N: int
    grid_offset: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise TorusError(f"Hilbert dimension must be an integer >= 2, got {self.N!r}")
        if not 0.0 <= self.grid_offset < 1.0:
            raise TorusError(f"grid_offset must lie in [0, 1), got {self.grid_offset}")

    @property
    def hbar(self) -> float:
        return 1.0 / (2.0 * math.pi * self.N)

    @property
    def q(self) -> np.ndarray:
        return (np.arange(self.N) + self.grid_offset) / self.N

    @property
    def momentum_index(self) -> np.ndarray:
        """Integer momentum labels in storage (symmetric) order."""
        return np.arange(-(self.N // 2), self.N - self.N // 2)

    @property
    def p(self) -> np.ndarray:
        return self.momentum_index / self.N

    @property
    def momentum_index_fft(self) -> np.ndarray:
        """Integer momentum labels in raw FFT order (0, 1, ..., -1)."""
        return np.fft.ifftshift(self.momentum_index)

    def _bloch_phase(self) -> np.ndarray:
        # momentum amplitudes pick up exp(-2 pi i n offset / N) relative to a plain DFT
        return np.exp(-2j * np.pi * self.momentum_index * self.grid_offset / self.N)

    def default_sigma(self) -> float:
        # equal position and momentum widths on the unit square: sigma^2 = hbar/2
        return math.sqrt(self.hbar / 2.0)


@dataclass(frozen=True, eq=False)
class WaveState:
    amplitudes: np.ndarray
    basis: Basis
    spec: HilbertSpec

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.spec.N,):
            raise TorusError(f"expected {self.spec.N} amplitudes, got shape {amps.shape}")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "basis", Basis(self.basis))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def in_basis(self, basis: Basis | str) -> "WaveState":
        basis = Basis(basis)
        if basis is self.basis:
            return self
        return to_momentum(self) if basis is Basis.MOMENTUM else to_position(self)

    def normalized(self) -> "WaveState":
        n = self.norm
        if n == 0:
            raise TorusError("cannot normalize the zero vector")
        return WaveState(self.amplitudes / n, self.basis, self.spec)

    def to_record(self) -> dict:
        flat = np.empty(2 * self.spec.N)
        flat[0::2] = self.amplitudes.real
        flat[1::2] = self.amplitudes.imag
        rec = {"N": self.spec.N, "basis": self.basis.value, "amplitudes": flat.tolist()}
        if self.spec.grid_offset:
            rec["grid_offset"] = self.spec.grid_offset
        return rec

    @classmethod
    def from_record(cls, record: dict) -> "WaveState":
        spec = HilbertSpec(int(record["N"]), float(record.get("grid_offset", 0.0)))
        flat = np.asarray(record["amplitudes"], dtype=float)
        if flat.shape != (2 * spec.N,):
            raise TorusError("amplitude record must hold 2N interleaved floats")
        return cls(flat[0::2] + 1j * flat[1::2], Basis(record["basis"]), spec)


def _position_state(amps: np.ndarray, spec: HilbertSpec) -> WaveState:
    return WaveState(amps / np.linalg.norm(amps), Basis.POSITION, spec)


def circle_distance(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def make_gaussian(spec: HilbertSpec, q0: float, p0: float, sigma: float | None = None) -> WaveState:
    """Periodized Gaussian wavepacket centred at ``(q0, p0)``.

    ``sigma`` is the position width of ``|psi|^2``; the default gives equal
    widths in position and momentum.
    """
    if sigma is None:
        sigma = spec.default_sigma()
    if not sigma > 0:
        raise TorusError(f"sigma must be positive, got {sigma}")
    if sigma < 1.0 / spec.N:
        raise TorusError(
            f"sigma={sigma:.4g} is below the grid spacing 1/N={1.0 / spec.N:.4g}; "
            "the packet cannot be resolved"
        )
    q = spec.q
    dq = q - q0
    env = sum(np.exp(-((dq + m) ** 2) / (4.0 * sigma**2)) for m in range(-2, 3))
    amps = env * np.exp(2j * np.pi * p0 * spec.N * dq)
    return _position_state(amps, spec)


def make_cat(spec: HilbertSpec, qA: float, qB: float, p0: float, sigma: float | None = None) -> WaveState:
    """Equal-weight superposition of two Gaussians at ``qA`` and ``qB``."""
    if sigma is None:
        sigma = spec.default_sigma()
    if circle_distance(qA, qB) <= 4.0 * sigma:
        raise TorusError(
            f"humps at {qA} and {qB} overlap: separation must exceed 4*sigma={4 * sigma:.4g}"
        )
    a = make_gaussian(spec, qA, p0, sigma).amplitudes
    b = make_gaussian(spec, qB, p0, sigma).amplitudes
    return _position_state(a + b, spec)


def make_random(spec: HilbertSpec, seed: int) -> WaveState:
    """Haar-random state: i.i.d. complex Gaussian amplitudes, normalized."""
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(spec.N) + 1j * rng.standard_normal(spec.N)
    return _position_state(amps, spec)


def orthogonalize(target: WaveState, reference: WaveState) -> WaveState:
    """Project ``reference`` out of ``target`` and renormalize."""
    _check_compatible(target, reference)
    t = target.in_basis(reference.basis).amplitudes
    r = reference.amplitudes / reference.norm
    c = np.vdot(r, t)
    if abs(c) / np.linalg.norm(t) >= 1.0 - 1e-9:
        raise TorusError("target is parallel to reference; nothing left after projection")
    out = t - c * r
    out = out - np.vdot(r, out) * r
    return WaveState(out / np.linalg.norm(out), reference.basis, reference.spec)


def to_momentum(state: WaveState) -> WaveState:
    if state.basis is Basis.MOMENTUM:
        raise TorusError("state is already in the momentum basis")
    amps = np.fft.fftshift(np.fft.fft(state.amplitudes, norm="ortho"))
    if state.spec.grid_offset:
        amps = amps * state.spec._bloch_phase()
    return WaveState(amps, Basis.MOMENTUM, state.spec)


def to_position(state: WaveState) -> WaveState:
    if state.basis is Basis.POSITION:
        raise TorusError("state is already in the position basis")
    amps = state.amplitudes
    if state.spec.grid_offset:
        amps = amps * state.spec._bloch_phase().conj()
    amps = np.fft.ifft(np.fft.ifftshift(amps), norm="ortho")
    return WaveState(amps, Basis.POSITION, state.spec)


def _check_compatible(a: WaveState, b: WaveState) -> None:
    if a.spec.N != b.spec.N:
        raise TorusError(f"dimension mismatch: {a.spec.N} vs {b.spec.N}")
    if a.spec.grid_offset != b.spec.grid_offset:
        raise TorusError("states live on tori with different grid offsets")


def overlap(a: WaveState, b: WaveState) -> complex:
    """<a|b>; ``b`` is transformed to the basis of ``a`` if needed."""
    _check_compatible(a, b)
    return complex(np.vdot(a.amplitudes, b.in_basis(a.basis).amplitudes))


def fidelity(a: WaveState, b: WaveState) -> float:
    return min(abs(overlap(a, b)) ** 2, 1.0)


def expectation_q(state: WaveState) -> float:
    """Circular mean of position, in [0, 1)."""
    rho = state.in_basis(Basis.POSITION).density()
    z = np.sum(rho * np.exp(2j * np.pi * state.spec.q))
    return float(np.angle(z) / (2 * np.pi) % 1.0)


def expectation_p(state: WaveState) -> float:
    rho = state.in_basis(Basis.MOMENTUM).density()
    return float(np.sum(rho * state.spec.p))


# --- persistence ---------------------------------------------------------

_BASIS_CODE = {Basis.POSITION: 0.0, Basis.MOMENTUM: 1.0}


def save_state(state: WaveState, path: str | Path) -> None:
    """Write ``state`` as JSON (``.json``) or little-endian float64 binary.

    The binary layout is ``[N, basis_code, grid_offset, re_0, im_0, ...]``
    with basis_code 0 for position and 1 for momentum.
    """
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(state.to_record()))
        return
    rec = state.to_record()
    values = [float(state.spec.N), _BASIS_CODE[state.basis], state.spec.grid_offset, *rec["amplitudes"]]
    path.write_bytes(struct.pack(f"<{len(values)}d", *values))


def load_state(path: str | Path) -> WaveState:
    path = Path(path)
    if path.suffix == ".json":
        return WaveState.from_record(json.loads(path.read_text()))
    raw = path.read_bytes()
    if len(raw) % 8 or len(raw) < 24:
        raise TorusError(f"{path}: not a float64 state record")
    values = np.frombuffer(raw, dtype="<f8")
    N = int(values[0])
    if values.size != 3 + 2 * N:
        raise TorusError(f"{path}: expected {3 + 2 * N} values, found {values.size}")
    basis = Basis.POSITION if values[1] == 0.0 else Basis.MOMENTUM
    return WaveState.from_record({"N": N, "basis": basis, "grid_offset": float(values[2]),
                                  "amplitudes": values[3:]})
