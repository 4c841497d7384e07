import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chaoscontrol.classical import (ClassicalDisorder, PhasePoint, SectionData, chaos_fraction, inverse_step,
                                    jacobian, lyapunov_exponent, lyapunov_exponents, map_step,
                                    poincare_section, step_arrays)

coord = st.floats(0, 1, exclude_max=True)


def disorder(seed=0, n=16, scale=1e-3):
    return ClassicalDisorder(np.random.default_rng(seed).normal(scale=scale, size=n))


def circ(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1 - d)


def test_point_wrapping():
    pt = PhasePoint(1.25, -0.25)
    assert (pt.q, pt.p) == (0.25, 0.75)


def test_free_shear():
    pt = PhasePoint(0.1, 0.3)
    nxt = map_step(pt, 0.0)
    assert nxt.p == pytest.approx(0.3) and nxt.q == pytest.approx(0.4)


@pytest.mark.parametrize("K", [0.0, 3.0, 8.0, 20.0])
def test_origin_fixed(K):
    assert map_step(PhasePoint(0, 0), K) == PhasePoint(0, 0)


def test_disorder_force_against_finite_difference():
    d = disorder(n=8, scale=0.05)
    q = np.linspace(0, 1, 37)
    h = 1e-6
    fd = (d.potential(q + h) - d.potential(q - h)) / (2 * h)
    np.testing.assert_allclose(d.force(q), fd, atol=1e-7)
    fd2 = (d.force(q + h) - d.force(q - h)) / (2 * h)
    np.testing.assert_allclose(d.curvature(q), fd2, atol=1e-5)


def test_force_sign_matches_quantum_kick():
    # exp(+i V / hbar) shifts momentum by +dV/dq
    eps = np.zeros(3)
    eps[0] = 0.01
    d = ClassicalDisorder(eps)
    out = map_step(PhasePoint(0.75, 0.0), 0.0, d)
    assert out.p == pytest.approx(2 * math.pi * 0.01)


def numeric_jacobian(pt, K, d, h=1e-7):
    J = np.zeros((2, 2))
    for j, (dq, dp) in enumerate([(h, 0), (0, h)]):
        plus = map_step(PhasePoint(pt.q + dq, pt.p + dp), K, d)
        minus = map_step(PhasePoint(pt.q - dq, pt.p - dp), K, d)
        J[0, j] = ((plus.q - minus.q + 0.5) % 1 - 0.5) / (2 * h)
        J[1, j] = ((plus.p - minus.p + 0.5) % 1 - 0.5) / (2 * h)
    return J


@settings(max_examples=50, deadline=None)
@given(q=coord, p=coord, K=st.floats(0, 20), with_d=st.booleans())
def test_area_preservation(q, p, K, with_d):
    d = disorder(3) if with_d else None
    pt = PhasePoint(q, p)
    J = jacobian(pt, K, d)
    assert abs(np.linalg.det(J) - 1) < 1e-12
    np.testing.assert_allclose(numeric_jacobian(pt, K, d), J, atol=1e-5 * (1 + K))


@settings(max_examples=100, deadline=None)
@given(q=coord, p=coord, K=st.floats(0, 20), with_d=st.booleans())
def test_reversibility(q, p, K, with_d):
    d = disorder(5, scale=1e-2) if with_d else None
    pt = PhasePoint(q, p)
    back = inverse_step(map_step(pt, K, d), K, d)
    assert circ(back.q, pt.q) < 1e-12 and circ(back.p, pt.p) < 1e-12


def test_step_arrays_vectorized():
    rng = np.random.default_rng(0)
    q, p = rng.random(20), rng.random(20)
    d = disorder()
    qa, pa = step_arrays(q, p, 5.0, d)
    for i in range(20):
        pt = map_step(PhasePoint(q[i], p[i]), 5.0, d)
        assert pt.q == pytest.approx(qa[i], abs=1e-14) and pt.p == pytest.approx(pa[i], abs=1e-14)


def test_section_integrable():
    sec = poincare_section(0.0, None, n_seeds=10, n_iter=2000, seed=1)
    assert len(sec.trajectories) == 10
    for t in sec.trajectories:
        assert t.shape == (2001, 2)
        assert np.ptp(t[:, 1]) < 1e-12
    assert chaos_fraction(sec, 32) <= 2 / 32 + 1e-9
    with pytest.raises(ValueError):
        poincare_section(1.0, n_seeds=0)


def test_section_chaotic_coverage():
    sec = poincare_section(8.0, None, n_seeds=1, n_iter=100_000, seed=2)
    assert chaos_fraction(sec, 32) >= 0.95
    for t in sec.trajectories:
        assert np.all((t >= 0) & (t < 1))


def test_chaos_fraction_edge_cases():
    assert chaos_fraction(SectionData([], 0.0), 32) == 0.0
    with pytest.raises(ValueError):
        chaos_fraction(SectionData([], 0.0), 4)


def test_section_csv(tmp_path):
    sec = poincare_section(2.0, disorder(), n_seeds=3, n_iter=4)
    sec.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "trajectory_id,q,p"
    assert len(lines) == 1 + 3 * 5
    np.testing.assert_array_equal(sec.perturbation, disorder().eps)


@pytest.mark.parametrize("K", [8.0, 20.0])
def test_lyapunov_standard_map(K):
    lam = lyapunov_exponents(K, n_iter=20000, n_seeds=8, seed=0)
    expected = math.log(K / 2)
    assert abs(lam.mean() - expected) < 0.1 * expected
    assert lam.std() < 0.05 * lam.mean()
    assert np.all(lam >= 0)


def test_lyapunov_integrable():
    assert abs(lyapunov_exponent(0.0, n_iter=5000)) < 1e-3
    with pytest.raises(ValueError):
        lyapunov_exponent(1.0, n_iter=100)


def test_lyapunov_deterministic():
    assert lyapunov_exponent(5.0, n_iter=2000, seed=3) == lyapunov_exponent(5.0, n_iter=2000, seed=3)
