import cmath
import math

import numpy as np
import pytest

from avglab.integrator import (BlowUpError, IntegratorConfig, auto_dt, inequality_violation,
                               integrate, integrate_pair, phi1, solve)
from avglab.models import ForcingSpec, SimParams, frame_transform
from avglab.spectral import SpectralState, random_state, reality_defect, wavevectors

F1 = ForcingSpec.build("burgers", [{"k": 1, "re": 1.0}])


def test_phi1_limits():
    assert phi1(0.0, 2.0) == pytest.approx(2.0)
    assert phi1(1e-12, 1.0) == pytest.approx(1.0)
    assert phi1(-1.0, 1.0) == pytest.approx(1 - math.exp(-1))
    assert abs(phi1(1e-9, 1.0) - phi1(0.0, 1.0)) <= 1e-9


def test_pure_decay_is_exact(rng):
    p = SimParams(0.3, 0.0, 8)
    u0 = random_state(rng, 1, 8)
    rec = integrate(u0, 0.0, IntegratorConfig(t_end=2.0, dt=0.05), p, nonlinear=False,
                    keep_states=True)
    K, ksq, _ = wavevectors(1, 8)
    for t, st in zip(rec.times, rec.states):
        assert np.max(np.abs(st.coeffs - u0.coeffs * np.exp(-0.3 * ksq * t))) <= 1e-12


def test_toy_ode_matches_closed_form():
    nu, alpha = 1.0, 10.0
    w = 1j * alpha
    ts, zs = solve(-nu, lambda t, z: cmath.exp(w * t), 0j, 0.0, 10.0, 0.005)
    exact = (cmath.exp(w * 10.0) - cmath.exp(-nu * 10.0)) / (nu + w)
    assert abs(zs[-1] - exact) <= 1e-8


def test_if_rk4_equals_rk4_without_linear_part(rng):
    y0 = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    N = lambda t, y: 1j * y ** 2 * np.cos(t)
    _, a = solve(np.zeros(5), N, y0, 0.0, 0.1, 0.1, method="IF-RK4")
    _, b = solve(np.zeros(5), N, y0, 0.0, 0.1, 0.1, method="RK4")
    assert np.max(np.abs(a[-1] - b[-1])) <= 1e-13


@pytest.mark.parametrize("method", ["IF-RK4", "RK4"])
def test_fourth_order_convergence(rng, method):
    p = SimParams(1.0, 2.0, 8)
    u0 = random_state(rng, 1, 8, energy_target=0.5)
    f = ForcingSpec.build("burgers", [{"k": 1, "re": 1.0}, {"k": 2, "im": 0.5}])
    final = {}
    for dt in (0.008, 0.004, 0.002, 0.001):
        rec = integrate(u0, 0.0, IntegratorConfig(t_end=1.0, dt=dt, method=method), p, f,
                        keep_states=True)
        final[dt] = rec.states[-1].coeffs
    e1 = np.linalg.norm(final[0.004] - final[0.008])
    e2 = np.linalg.norm(final[0.002] - final[0.004])
    e3 = np.linalg.norm(final[0.001] - final[0.002])
    assert 12 <= e1 / e2 <= 20
    assert 12 <= e2 / e3 <= 20


def test_reality_not_amplified(rng):
    p = SimParams(1.0, 20.0, 16)
    u0 = random_state(rng, 1, 16)
    rec = integrate(u0, 0.0, IntegratorConfig(t_end=1.0), p, F1)
    assert rec.reality_defect[-1] <= 10 * reality_defect(u0) + 1e-12
    p2 = SimParams(1.0, (3.0, 4.0), 8, "nse2d")
    f2 = ForcingSpec.build("nse2d", [{"k": [1, 0], "re": [0, 1]}])
    u2 = random_state(rng, 2, 8, 2, divergence_free=True)
    rec = integrate(u2, 0.0, IntegratorConfig(t_end=0.5), p2, f2, keep_states=True)
    assert np.max(rec.reality_defect) <= 1e-12
    K, _, _ = wavevectors(2, 8)
    assert np.max(np.abs(np.sum(K * rec.states[-1].coeffs, axis=0))) <= 1e-12


def test_energy_inequality_along_burgers_run(rng):
    p = SimParams(1.0, 8.0, 16)
    u0 = random_state(rng, 1, 16, energy_target=2.0)
    rec = integrate(u0, 0.0, IntegratorConfig(t_end=3.0, sample_every=0.01), p, F1)
    assert inequality_violation(rec, 1.0, F1, "energy") <= 0


def test_inequality_detects_violation():
    # a record with growing energy and no forcing must violate
    p = SimParams(1.0, 0.0, 4)
    rec = integrate(SpectralState.from_modes(1, 4, {1: 0.1}), 0.0, IntegratorConfig(t_end=1.0, dt=0.1),
                    p, nonlinear=False)
    rec.energy[:] = np.linspace(1.0, 2.0, rec.energy.size)
    assert inequality_violation(rec, 1.0, None) > 0


def test_pair_identical_forcings_and_zero_start(rng):
    p = SimParams(1.0, 50.0, 16)
    u0 = random_state(rng, 1, 16, energy_target=0.25)
    prof = integrate_pair(u0, 0.0, 0.1, IntegratorConfig(), p, F1, F1)
    assert prof.sup == 0.0
    prof = integrate_pair(u0, 0.0, 0.1, IntegratorConfig(), p, F1, ForcingSpec.zero("burgers"))
    assert prof.gap[0] == 0.0
    assert prof.sup > 0


def test_pair_gap_scales_inverse_alpha(rng):
    u0 = random_state(rng, 1, 16, energy_target=0.25)
    zero = ForcingSpec.zero("burgers")
    cfg = IntegratorConfig()
    sups = []
    for a in (50.0, 100.0):
        p = SimParams(1.0, a, 16)
        sups.append(integrate_pair(u0, 0.0, 0.1, cfg, p, F1, zero).sup)
    assert 1.6 <= sups[0] / sups[1] <= 2.4


def test_blowup_is_reported():
    # negative viscosity is rejected, so force blow-up through a huge forcing on a short horizon
    p = SimParams(1e-3, 0.0, 4)
    f = ForcingSpec.build("burgers", [{"k": 1, "re": 1e5}])
    with pytest.raises(BlowUpError):
        integrate(p.zero_state(), 0.0, IntegratorConfig(t_end=1.0, dt=0.01), p, f, nonlinear=False)


def test_oscillation_limit_enforced():
    p = SimParams(1.0, 1000.0, 8)
    with pytest.raises(ValueError, match="oscillation"):
        integrate(p.zero_state(), 0.0, IntegratorConfig(t_end=0.1, dt=0.01), p, F1)


def test_auto_dt():
    p = SimParams(1.0, 100.0, 16)
    cfg = IntegratorConfig()
    assert auto_dt(cfg, p, F1) == pytest.approx(0.05 / 101)
    assert auto_dt(cfg, SimParams(1.0, 0.0, 16), None) == pytest.approx(0.01)
    assert auto_dt(IntegratorConfig(method="RK4"), SimParams(1.0, 0.0, 32), None) == pytest.approx(0.5 / 1024)


def test_galilean_equivariance(rng):
    # lab and moving frame runs from matching data stay within 1e-6 on [0, 1]
    alpha, m = 6.0, 16
    f = ForcingSpec.build("burgers", [{"k": 1, "re": 1.0}, {"k": 3, "im": 0.2}])
    u0 = random_state(rng, 1, m, energy_target=0.5).replace(mean=[alpha])
    a0 = frame_transform(u0, alpha, 0.0, "to_moving")
    lab = SimParams(1.0, alpha, m)
    cfg = IntegratorConfig(t_end=1.0, dt=1e-3, sample_every=0.05)
    rl = integrate(u0, 0.0, cfg, lab, f, "lab", keep_states=True)
    rm = integrate(a0, 0.0, cfg, lab, f, "moving", keep_states=True)
    gap = max(np.max(np.abs(frame_transform(u, alpha, t, "to_moving").coeffs - a.coeffs))
              for t, u, a in zip(rl.times, rl.states, rm.states))
    assert gap <= 1e-6


def test_galilean_equivariance_nse(rng):
    alpha, m = (2.0, 3.0), 6
    f = ForcingSpec.build("nse2d", [{"k": [1, 1], "re": [1.0, -1.0]}])
    u0 = random_state(rng, 2, m, 2, energy_target=0.5, divergence_free=True).replace(mean=alpha)
    a0 = frame_transform(u0, alpha, 0.0, "to_moving")
    p = SimParams(1.0, alpha, m, "nse2d")
    cfg = IntegratorConfig(t_end=0.5, dt=2e-3, sample_every=0.1)
    rl = integrate(u0, 0.0, cfg, p, f, "lab", keep_states=True)
    rm = integrate(a0, 0.0, cfg, p, f, "moving", keep_states=True)
    gap = max(np.max(np.abs(frame_transform(u, alpha, t, "to_moving").coeffs - a.coeffs))
              for t, u, a in zip(rl.times, rl.states, rm.states))
    assert gap <= 1e-6


def test_record_csv_and_trailing(rng):
    p = SimParams(1.0, 0.0, 4)
    rec = integrate(random_state(rng, 1, 4), 0.0, IntegratorConfig(t_end=1.0, dt=0.01), p)
    text = rec.to_csv()
    assert text.splitlines()[0] == "t,energy,enstrophy,l2norm,gradbound,reality_defect"
    assert len(text.splitlines()) == rec.times.size + 1
    assert rec.trailing("energy", 0.25).size == 26
