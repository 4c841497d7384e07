"""Powell's conjugate-direction minimizer.

Each cycle does a line minimization along every direction in the set, then
an extra line search along the net displacement of the cycle, which replaces
the direction of largest decrease when Powell's test accepts it.  Line
minimizations bracket the minimum by golden-ratio expansion and refine it
with Brent's parabolic/golden-section method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

GOLD = 0.5 * (1.0 + math.sqrt(5.0))
CGOLD = 0.5 * (3.0 - math.sqrt(5.0))


class NonFiniteObjective(ArithmeticError):
    """The objective returned NaN or inf; ``trace`` holds progress so far."""

    def __init__(self, x, trace):
        super().__init__(f"objective is not finite at a trial point (after {len(trace)} cycles)")
        self.x = x
        self.trace = trace


@dataclass
class OptimizerConfig:
    max_iterations: int = 200
    f_tol: float = 1e-8
    x_tol: float = 1e-8
    restarts: int = 1
    seed: int = 0
    init_scale: float | None = None
    step: float | None = None  # initial bracketing step; default 0.1 * init_scale
    line_tol: float = 1e-10
    max_bracket_steps: int = 60
    max_evaluations: int | None = None

    def __post_init__(self):
        if self.f_tol <= 0 or self.x_tol <= 0 or self.line_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.init_scale is not None and self.init_scale <= 0:
            raise ValueError("init_scale must be positive")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")


@dataclass
class PowellResult:
    x: np.ndarray
    fun: float
    trace: list[tuple[int, float]]
    evaluations: int
    converged: bool
    directions: np.ndarray = field(repr=False)


class _Budget(Exception):
    pass


class _Counted:
    def __init__(self, fun, limit):
        self.fun = fun
        self.count = 0
        self.limit = limit
        self.best_x = None
        self.best_f = math.inf

    def __call__(self, x):
        if self.limit is not None and self.count >= self.limit:
            raise _Budget
        self.count += 1
        f = float(self.fun(x))
        if not math.isfinite(f):
            raise FloatingPointError
        if f < self.best_f:
            self.best_f, self.best_x = f, np.array(x, copy=True)
        return f


def _bracket(g, f0, step, max_steps):
    """Find a < b < c (in step units) with g(b) <= g(a), g(c).  Returns None
    if no interior minimum shows up; then the best probed point is returned."""
    a, fa = 0.0, f0
    b, fb = step, g(step)
    if fb >= fa:
        c, fc = -step, g(-step)
        if fc >= fa:
            return (c, a, b), (a, fa)
        a, fa, b, fb = a, fa, c, fc
        step = -step
    # downhill from a to b; expand
    c = b + GOLD * (b - a)
    fc = g(c)
    n = 0
    while fc < fb:
        n += 1
        if n > max_steps:
            return None, (c, fc)
        a, fa, b, fb = b, fb, c, fc
        c = b + GOLD * (b - a)
        fc = g(c)
    return (a, b, c) if a < c else (c, b, a), (b, fb)


def brent(g, a, b, c, fb, tol, max_iter=200):
    """Brent's method on the bracket a < b < c with g(b) = fb known."""
    x = w = v = b
    fx = fw = fv = fb
    d = e = 0.0
    for _ in range(max_iter):
        xm = 0.5 * (a + c)
        tol1 = tol * abs(x) + 1e-12
        tol2 = 2.0 * tol1
        if abs(x - xm) <= tol2 - 0.5 * (c - a):
            break
        use_golden = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            e_old, e = e, d
            if abs(p) < abs(0.5 * q * e_old) and q * (a - x) < p < q * (c - x):
                d = p / q
                u = x + d
                if u - a < tol2 or c - u < tol2:
                    d = tol1 if xm >= x else -tol1
                use_golden = False
        if use_golden:
            e = (a - x) if x >= xm else (c - x)
            d = CGOLD * e
        u = x + d if abs(d) >= tol1 else x + (tol1 if d >= 0 else -tol1)
        fu = g(u)
        if fu <= fx:
            if u >= x:
                a = x
            else:
                c = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                c = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx


def line_minimize(f, x, d, fx, step, tol, max_steps):
    """Minimize f(x + alpha d); returns (alpha, f_min)."""

    def g(alpha):
        return f(x + alpha * d)

    triple, (best_a, best_f) = _bracket(g, fx, step, max_steps)
    if triple is None:
        return best_a, best_f
    a, b, c = triple
    alpha, fa = brent(g, a, b, c, best_f if b == best_a else g(b), tol)
    if fa < best_f:
        return alpha, fa
    return best_a, best_f


def powell_minimize(objective: Callable[[np.ndarray], float], x0, config: OptimizerConfig | None = None,
                    callback: Callable[[int, float], None] | None = None) -> PowellResult:
    """Minimize ``objective`` from ``x0`` with Powell's method.

    Terminates when one full cycle lowers the objective by less than
    ``config.f_tol`` or moves the point by less than ``config.x_tol``
    (max norm), or after ``config.max_iterations`` cycles.
    """
    config = config or OptimizerConfig()
    x = np.array(x0, dtype=float)
    n = x.size
    f = _Counted(objective, config.max_evaluations)
    try:
        fx = f(x)
    except FloatingPointError:
        raise NonFiniteObjective(x, []) from None
    step = config.step
    if step is None:
        scale = config.init_scale if config.init_scale else max(float(np.max(np.abs(x))), 1.0)
        step = 0.1 * scale
    directions = np.eye(n)
    trace = [(0, fx)]
    converged = False
    try:
        for it in range(1, config.max_iterations + 1):
            x_start, f_start = x.copy(), fx
            big_drop, i_big = 0.0, 0
            for i in range(n):
                f_before = fx
                alpha, fx = line_minimize(f, x, directions[i], fx, step, config.line_tol,
                                          config.max_bracket_steps)
                x = x + alpha * directions[i]
                if f_before - fx > big_drop:
                    big_drop, i_big = f_before - fx, i
            trace.append((it, fx))
            if callback is not None:
                callback(it, fx)
            moved = float(np.max(np.abs(x - x_start))) if n else 0.0
            if f_start - fx < config.f_tol or moved < config.x_tol:
                converged = True
                break
            disp = x - x_start
            f_ext = f(x + disp)
            if f_ext < f_start:
                t = 2.0 * (f_start - 2.0 * fx + f_ext) * (f_start - fx - big_drop) ** 2 \
                    - big_drop * (f_start - f_ext) ** 2
                if t < 0.0:
                    d = disp / np.linalg.norm(disp)
                    alpha, fx = line_minimize(f, x, d, fx, step, config.line_tol,
                                              config.max_bracket_steps)
                    x = x + alpha * d
                    directions[i_big] = directions[-1]
                    directions[-1] = d
    except FloatingPointError:
        raise NonFiniteObjective(x, trace) from None
    except _Budget:
        pass
    if f.best_f < fx:
        x, fx = f.best_x, f.best_f
    if trace[-1][1] != fx:
        trace.append((trace[-1][0], fx))
    return PowellResult(x, fx, trace, f.count, converged, directions)
