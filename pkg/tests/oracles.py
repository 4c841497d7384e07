"""Independent reference constructions used by several test modules."""

import numpy as np


def explicit_dft(spec):
    """F[n, j] = exp(-i p_n q_j / hbar) / sqrt(N), built from the grids directly."""
    p = spec.p
    q = spec.q
    return np.exp(-1j * np.outer(p, q) / spec.hbar) / np.sqrt(spec.N)


def explicit_free(spec, tau):
    F = explicit_dft(spec)
    kin = np.exp(-1j * spec.p**2 * tau / (2 * spec.hbar))
    return F.conj().T @ np.diag(kin) @ F


def explicit_potential(eps, spec):
    q = spec.q
    return sum(e * np.cos(2 * np.pi * k * q) for k, e in enumerate(eps, start=1))


def explicit_floquet(params, kicks=None, mid_times=(1 / 3, 2 / 3)):
    """Dense period operator assembled term by term in the position basis."""
    spec = params.spec
    q = spec.q
    hb = spec.hbar
    main = params.K * np.cos(2 * np.pi * q) / (4 * np.pi**2)
    events = []
    if kicks is not None and kicks.main is not None:
        main = main + explicit_potential(kicks.main, spec)
    events.append((0.0, main))
    for name, t in zip(("mid1", "mid2"), mid_times):
        v = None if kicks is None else getattr(kicks, name)
        if v is not None:
            events.append((t, explicit_potential(v, spec)))
    times = [t for t, _ in events] + [1.0]
    U = np.eye(spec.N, dtype=complex)
    for (t0, v), t1 in zip(events, times[1:]):
        U = explicit_free(spec, t1 - t0) @ np.diag(np.exp(1j * v / hb)) @ U
    return U
