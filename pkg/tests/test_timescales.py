import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chaoscontrol.rotor import ControlKicks, RotorParams, propagate
from chaoscontrol.timescales import (EchoSeries, TimescaleInputs, decay_time, effective_dimension, epsilon_star,
                                     logtime, logtime_manybody, logtime_phase_space, loschmidt_echo,
                                     min_control_time, rotor_h_ks)
from chaoscontrol.torus import HilbertSpec, fidelity, make_gaussian, make_random

pos = st.floats(1e-3, 1e3)
big = st.floats(1.5, 1e6)


def rel(a, b):
    return abs(a - b) <= 1e-12 * max(abs(a), abs(b), 1e-300)


def test_echo_unperturbed_is_one():
    spec = HilbertSpec(64)
    s = loschmidt_echo(make_random(spec, 0), RotorParams(8.0, spec), ControlKicks.zeros(64), 30)
    assert s.times.tolist() == list(range(31))
    np.testing.assert_allclose(s.values, 1.0, atol=1e-12)


def test_echo_tiny_perturbation(rng):
    spec = HilbertSpec(128)
    eps = rng.normal(size=128)
    eps *= 1e-6 / np.sqrt(np.mean(eps**2))
    s = loschmidt_echo(make_gaussian(spec, 0.5, 0.0), RotorParams(8.0, spec), ControlKicks(main=eps), 10)
    assert s.values.min() >= 0.999


def test_echo_matches_direct(rng):
    spec = HilbertSpec(32, 0.25)
    params = RotorParams(8.0, spec)
    kicks = ControlKicks(main=rng.normal(scale=0.01, size=32), mid1=rng.normal(scale=0.01, size=32))
    psi = make_random(spec, 1)
    s = loschmidt_echo(psi, params, kicks, 12)
    for t in (0, 1, 5, 12):
        direct = fidelity(propagate(psi, params, None, t), propagate(psi, params, kicks, t))
        assert s.values[t] == pytest.approx(direct, abs=1e-12)
    assert s.values[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all((s.values >= 0) & (s.values <= 1))
    with pytest.raises(ValueError):
        loschmidt_echo(psi, params, kicks, 0)


def test_echo_monotone_in_strength():
    """Stronger disorder decays no later than weaker disorder, in most instances."""
    spec = HilbertSpec(64)
    params = RotorParams(8.0, spec)
    ok = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        d = rng.normal(size=64)
        psi = make_random(spec, seed)
        times = []
        for scale in (1e-4, 2e-4):
            s = loschmidt_echo(psi, params, ControlKicks(main=scale * d), 200)
            t = decay_time(s, 3 / 64)
            times.append(math.inf if t is None else t)
        ok += times[1] <= times[0]
    assert ok >= 9


def test_decay_time_cases(tmp_path):
    ones = EchoSeries(np.arange(10), np.ones(10))
    assert decay_time(ones, 0.5) is None
    vals = np.array([1, 0.9, 0.8, 0.7, 0.6, 0.4, 0.6, 0.3])
    assert decay_time(EchoSeries(np.arange(8), vals), 0.5) == 5
    for bad in (0.0, 1.0, -1):
        with pytest.raises(ValueError):
            decay_time(ones, bad)
    ones.to_csv(tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "t,C"


def test_effective_dimension_forms():
    assert effective_dimension(TimescaleInputs(N_eff=128)) == 128
    assert effective_dimension(TimescaleInputs(delta_E_th=1.0, rho_g=256.0)) == 256.0
    with pytest.raises(ValueError):
        effective_dimension(TimescaleInputs())


@settings(max_examples=200)
@given(dE=pos, g=pos, h=st.floats(0.05, 2.0), D=st.integers(1, 4))
def test_phase_space_dimension_identity(dE, g, h, D):
    # choose V_th and rho_g describing the same system: rho = V/(g h^D) / dE
    V = 3.7 * g * h**D
    rho = V / (g * h**D) / dE
    a = effective_dimension(TimescaleInputs(delta_E_th=dE, rho_g=rho))
    b = effective_dimension(TimescaleInputs(V_th=V, g=g, h=h, D=D))
    assert abs(a - b) <= 1e-12 * a


def test_min_control_time_spot_values():
    inp = TimescaleInputs(hbar=0.01, v_rms=0.5, rho_g=30.0, epsilon=0.02, N_eff=100)
    expected = 0.01 * math.log(100) / (2 * math.pi * 0.25 * 30.0 * 0.0004)
    assert rel(min_control_time(inp), expected)
    doubled = TimescaleInputs(hbar=0.01, v_rms=0.5, rho_g=30.0, epsilon=0.04, N_eff=100)
    assert rel(min_control_time(doubled), expected / 4)
    assert min_control_time(TimescaleInputs(hbar=0.01, v_rms=0.5, rho_g=30.0, epsilon=0.02, N_eff=1)) == 0.0
    with pytest.raises(ValueError):
        min_control_time(TimescaleInputs(hbar=0.01, v_rms=0.5, rho_g=30.0, N_eff=10))


def test_logtime_values():
    assert logtime(256, math.log(4)) == pytest.approx(4.0, abs=1e-14)
    assert logtime(256, rotor_h_ks(8.0)) == pytest.approx(4.0, abs=1e-14)
    assert logtime(1, 2.0) == 0.0
    with pytest.raises(ValueError):
        logtime(10, 0.0)


@given(N=big, h=pos)
def test_logtime_square(N, h):
    assert rel(logtime(N * N, h), 2 * logtime(N, h))


@settings(max_examples=300)
@given(hbar=pos, K=pos, N=big, h=pos)
def test_fgr_at_logtime_equals_saturation(hbar, K, N, h):
    tau = logtime(N, h)
    a = epsilon_star(TimescaleInputs(hbar=hbar, K_E=K, N_eff=N, t_star=tau), "fgr_semiclassical")
    b = epsilon_star(TimescaleInputs(hbar=hbar, K_E=K, h_KS=h), "saturation")
    assert rel(a, b)


@given(hbar=pos, K=pos, N=big, t=pos)
def test_fgr_semiclassical_linear_in_hbar(hbar, K, N, t):
    a = epsilon_star(TimescaleInputs(hbar=hbar, K_E=K, N_eff=N, t_star=t), "fgr_semiclassical")
    b = epsilon_star(TimescaleInputs(hbar=hbar / 2, K_E=K, N_eff=N, t_star=t), "fgr_semiclassical")
    assert rel(a, 2 * b)


def test_epsilon_star_variants_spot():
    inp = TimescaleInputs(hbar=0.02, v_rms=0.3, rho_g=50.0, t_star=5.0, N_eff=64, K_E=2.0, h_KS=1.2)
    assert rel(epsilon_star(inp, "fgr_rmt"), math.sqrt(0.02 * math.log(64) / (2 * math.pi * 0.09 * 50 * 5)))
    assert rel(epsilon_star(inp, "fgr_semiclassical"), 0.02 * math.sqrt(math.log(64) / (2 * 2.0 * 5.0)))
    sat = epsilon_star(inp, "saturation")
    assert rel(sat, 0.02 * math.sqrt(1.2 / 4.0))
    longer = TimescaleInputs(hbar=0.02, K_E=2.0, h_KS=1.2, t_star=50.0)
    assert epsilon_star(longer, "saturation") == sat
    with pytest.raises(ValueError):
        epsilon_star(inp, "bogus")


@settings(max_examples=300)
@given(D=st.integers(1, 12), lam=pos, v1=st.floats(1.01, 1e4))
def test_manybody_logtime_identity(D, lam, v1):
    # h_KS = D * lambda_bar and V_th = V_1^D with g = h = 1
    a = logtime_phase_space(v1**D, 1.0, 1.0, D, D * lam)
    b = logtime_manybody(D, lam, v1)
    assert abs(a - b) <= 1e-12 * max(abs(b), 1.0)


def test_manybody_trivial():
    assert logtime_manybody(3, 1.0, math.e) == pytest.approx(1.0, abs=1e-15)
    assert logtime_manybody(3, 2.0, 10.0) == pytest.approx(logtime_manybody(3, 1.0, 10.0) / 2)
    with pytest.raises(ValueError):
        logtime_manybody(3, 0.0, 2.0)


def test_rotor_entropy():
    assert rotor_h_ks(8.0) == pytest.approx(math.log(4))
    assert rotor_h_ks(20.0) == pytest.approx(math.log(10))
