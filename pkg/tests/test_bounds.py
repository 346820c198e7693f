import json
import math

import numpy as np
import pytest
from scipy.special import zeta

from avglab.bounds import (BoundsReport, PreconditionError, attractor_radius,
                           averaging_delta, bk_profile, burgers_absorbing_sequence, burgers_D,
                           burgers_E1, burgers_E1_h0, burgers_trapping_constants,
                           enstrophy_energy_delta, estimate_ns_nonlinearity_constant,
                           find_negative_lognorm_radius, gershgorin_log_norm, log_norm_euclidean,
                           nonresonance_scan, ns3d_K0, ns3d_time_step, ns3d_trap_C,
                           nse2d_trapping_D, toy_ode_attractor)
from avglab.models import ForcingSpec, ResonanceError, SimParams, jacobian
from avglab.spectral import estimate_C2

ZERO = ForcingSpec.zero("burgers")
F1 = ForcingSpec.build("burgers", [{"k": 1, "re": 1.0}], s_V=6)


def test_D_formula():
    assert burgers_D(2) == pytest.approx(2 ** 1.5 + 2 / math.sqrt(3), abs=1e-12)
    assert burgers_D(2) == pytest.approx(3.983128, abs=1e-6)
    with pytest.raises(PreconditionError):
        burgers_D(0.5)


def test_trapping_unforced():
    tc = burgers_trapping_constants(1.0, 2.0, 1.0, ZERO)
    assert tc["E0"] == 0
    assert tc["N"] == pytest.approx((burgers_D(2) + 1) ** 2, rel=1e-14)
    assert tc["N"] == pytest.approx(24.8316, abs=1e-4)
    assert tc["C_min"] == pytest.approx(tc["N"] ** 2, rel=1e-14)
    assert tc["isolation_ok"]


def test_trapping_monotone_in_nu():
    Ns = [burgers_trapping_constants(4.0, 2.0, nu, F1)["N"] for nu in (1.0, 1.5, 2.0, 4.0)]
    assert all(a >= b for a, b in zip(Ns, Ns[1:]))


def test_trapping_isolation_inequality_forced():
    tc = burgers_trapping_constants(4.0, 2.5, 1.0, F1)
    k = tc["isolation_k"]
    assert math.sqrt(k) > tc["D"] * 2.0 + F1.sup_weighted(1.0) / tc["C_min"]
    with pytest.raises(PreconditionError):
        burgers_trapping_constants(0.5, 2.0, 1.0, F1)     # E~ below E0 = 2


def test_absorbing_recursion():
    seq = burgers_absorbing_sequence(1.0, 1.0, ZERO, 5, eps=0.0)
    assert seq[0].i == 2 and seq[0].s == 1.0
    assert seq[0].C == pytest.approx(0.5, abs=1e-12)
    assert seq[1].C == pytest.approx(0.5 * (math.sqrt(2) + 1), abs=1e-12)
    assert seq[1].C == pytest.approx(1.207107, abs=1e-6)
    assert all(lv.C >= 0 for lv in seq)
    bumped = burgers_absorbing_sequence(1.0, 1.0, ZERO, 5, eps=0.01)
    assert all(b.C > a.C for a, b in zip(seq, bumped))


def test_log_norm_examples(rng):
    assert log_norm_euclidean(np.diag([-1.0, -4.0, -9.0])) == pytest.approx(-1.0)
    assert log_norm_euclidean([[0.0, 1.0], [-1.0, 0.0]]) == pytest.approx(0.0, abs=1e-15)
    A = rng.standard_normal((30, 30))
    brute = np.max(np.linalg.eig((A + A.T) / 2)[0].real)
    assert log_norm_euclidean(A) == pytest.approx(brute, abs=1e-9)
    D = np.diag(rng.standard_normal(6))
    assert gershgorin_log_norm(D) == pytest.approx(log_norm_euclidean(D))


def test_log_norms_of_burgers_zero_state():
    p = SimParams(0.4, 3.0, 10)
    J = jacobian(p.zero_state(), p)
    assert log_norm_euclidean(J) == -0.4
    assert gershgorin_log_norm(J) == -0.4


def test_negative_lognorm_radius():
    r1 = find_negative_lognorm_radius(SimParams(1.0, 0.0, 16), None, 1.0, 4.0)
    assert r1.E_minus > 0 and r1.mu_max < 0
    assert abs(r1.mu_small + 1.0) <= 0.1
    r2 = find_negative_lognorm_radius(SimParams(2.0, 0.0, 16), None, 1.0, 4.0)
    assert r2.E_minus >= r1.E_minus
    with pytest.raises(ValueError):
        find_negative_lognorm_radius(SimParams(1.0, 0.0, 8), F1, 1.0, 4.0)
    with pytest.raises(ValueError):
        find_negative_lognorm_radius(SimParams(1.0, 0.0, 8), None, 1.0, 4.0, n_samples=10)


def test_negative_lognorm_radius_bisects():
    # a large envelope forces the bisection to stop inside the region
    r = find_negative_lognorm_radius(SimParams(0.05, 0.0, 8), None, 50.0, 1.0)
    assert r.E_minus < r.iterations[1][0]
    assert r.mu_max < 0


def test_bk_profile_examples():
    assert bk_profile(0.3, 2.0, 1.0, 1.0, 1.0, -0.5, 0.0) == pytest.approx(2 * 0.3 * 2.0)
    assert bk_profile(0.3, 1.0, 0.2, 0.1, 0.4, 0.0, 1.5) == pytest.approx(0.6 + 0.7 * 1.5)
    assert bk_profile(1.0, 1.0, 0.0, 0.0, 0.0, -1.0, 1.0) == pytest.approx(1 + math.exp(-1))
    b0 = bk_profile(0.3, 1.0, 0.2, 0.1, 0.4, 0.0, 1.5)
    assert abs(bk_profile(0.3, 1.0, 0.2, 0.1, 0.4, 1e-9, 1.5) - b0) <= 1e-6 * b0


def test_averaging_delta_homogeneous_and_composed():
    f = ForcingSpec.build("burgers", [{"k": 1, "re": 1.0, "profile": "slow-cosine", "omega_slow": 1.0}], s_V=6)
    assert (f.A_V, f.B_V) == (1.0, 1.0)
    p = SimParams(1.0, 0.0, 16)
    d1 = averaging_delta(f, -1.0, 1.0, 40.0, p)
    assert averaging_delta(f, -1.0, 1.0, 80.0, p) == pytest.approx(d1 / 2, rel=1e-14)
    # A_V/|k|^(s_V - p) (nu + 0) = 1, B_V/|k|^s_V = 1, C_v = 1
    b = max(bk_profile(1.0, 1.0, 1.0, 1.0, 0.0, -1.0, t) for t in (0.0, 1.0))
    assert d1 == pytest.approx(2 * b / 40.0, rel=1e-14)
    ts = np.linspace(0, 1, 101)
    assert b == pytest.approx(np.max(bk_profile(1.0, 1.0, 1.0, 1.0, 0.0, -1.0, ts)))
    relaxed = averaging_delta(f, -1.0, 1.0, 40.0, p, relaxed=True)
    assert relaxed >= d1
    with pytest.raises(ResonanceError):
        averaging_delta(f, -1.0, 1.0, 0.0, p)


def test_burgers_E1():
    S7, S5 = 1 + 2 * zeta(7), 1 + 2 * zeta(5)
    e = math.e
    v = burgers_E1(1.0, 0.0, 6.0, 1.0, 100.0, 0.0)
    assert v == pytest.approx(e / ((e - 1) * 100) * (3 * S7 + 1.5 * S5), rel=1e-6)
    assert math.isfinite(v)
    assert burgers_E1(1.0, 0.3, 6.0, 1.0, 50.0, 2.0) == pytest.approx(
        2 * burgers_E1(1.0, 0.3, 6.0, 1.0, 100.0, 2.0), rel=1e-14)
    # h0 = 1/nu reproduces the closed form
    assert burgers_E1_h0(1.0, 0.3, 6.0, 2.0, 50.0, 2.0, 0.5) == pytest.approx(
        burgers_E1(1.0, 0.3, 6.0, 2.0, 50.0, 2.0), rel=1e-12)
    assert attractor_radius(3.0) == pytest.approx(5.0)
    with pytest.raises(PreconditionError):
        burgers_E1(1.0, 0.0, 5.0, 1.0, 100.0, 0.0)


def test_toy_attractor():
    assert abs(toy_ode_attractor(1.0, 10.0)) == pytest.approx(1 / math.sqrt(101))
    assert toy_ode_attractor(2.0, 0.0) == pytest.approx(0.5)
    for nu, a in ((0.5, 3.0), (2.0, 0.1), (1.0, -7.0)):
        assert abs(toy_ode_attractor(nu, a)) <= min(1 / nu, 1 / abs(a))


def test_nse2d_trapping_D():
    assert nse2d_trapping_D(1.0, 2.0, 1.0, 1.0, 0.0) == pytest.approx(4.0)
    g, nu, C = 2.5, 0.7, 1.3
    assert nse2d_trapping_D(2.0, g, nu, C, 0.0) == pytest.approx(
        (4 * C ** 2 * 2.0 ** (1 + 1 / (2 * g - 2)) / nu ** 2) ** (g - 1))
    vals = [nse2d_trapping_D(V, 2.0, 1.0, 1.0, 3.0) for V in (0.1, 0.5, 1.0, 2.0)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    vals = [nse2d_trapping_D(1.0, 2.0, 1.0, C, 3.0) for C in (0.1, 0.5, 1.0, 2.0)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    with pytest.raises(PreconditionError):
        nse2d_trapping_D(1.0, 2.0, 1.0, 1.0, 0.0, V_star=2.0)


def test_ns_nonlinearity_constant():
    a = estimate_ns_nonlinearity_constant(2.5, 0.1, 1.0, 1.0)
    assert a > 0
    assert estimate_ns_nonlinearity_constant(2.5, 0.1, 4.0, 2.0) == pytest.approx(a, rel=1e-10)
    b = estimate_ns_nonlinearity_constant(2.5, 0.1, 1.0, 1.0, sample_size=128)
    assert abs(b - a) <= 0.2 * a
    with pytest.raises(ValueError):
        estimate_ns_nonlinearity_constant(2.5, 0.1, 1.0, 0.0, sample_size=4)


def test_ns3d_constants():
    c1 = ns3d_trap_C(1.0, 7.0)
    assert math.isfinite(c1) and c1 > 0
    assert ns3d_trap_C(3.0, 7.0) == pytest.approx(3 * c1, rel=1e-14)
    assert ns3d_trap_C(1.0, 7.0, K=8) <= ns3d_trap_C(1.0, 7.0, K=4)
    C2 = estimate_C2(3, 7.0)
    assert ns3d_K0(0.5 / C2, 1.0, 7.0, 8.0, 0.0) == 2
    assert ns3d_K0(0.1, 1.0, 7.0, 7.0, 1.0, C2=5.0) == 3
    ks = [ns3d_K0(0.1, 1.0, 7.0, 7.0, A, C2=5.0) for A in (0.0, 1.0, 10.0, 100.0)]
    assert all(a <= b for a, b in zip(ks, ks[1:]))
    with pytest.raises(PreconditionError):
        ns3d_K0(1.0, 1.0, 7.0, 7.0, 1.0, C2=5.0)


def test_ns3d_time_step():
    assert ns3d_time_step(4.0, 2.0, 1.0) == pytest.approx(1.0)
    assert ns3d_time_step(4.0, 2.0, 1e-12) > 1e5
    with pytest.raises(PreconditionError):
        ns3d_time_step(2.0, 4.0, 1.0)


def test_enstrophy_energy_delta():
    tails = {n: 2 * sum(k ** -6.0 for k in range(n + 1, 200000)) for n in (2, 3, 4)}
    assert tails[2] >= 0.0025 > tails[3]
    delta, n = enstrophy_energy_delta(1.0, 4.0, 1, 0.1)
    assert n == 3
    assert delta == pytest.approx(0.1 / (math.sqrt(2) * 3))
    ds = [enstrophy_energy_delta(1.0, 4.0, 1, e)[0] for e in (0.01, 0.05, 0.1, 0.5)]
    assert all(d > 0 for d in ds)
    assert all(a <= b for a, b in zip(ds, ds[1:]))
    with pytest.raises(PreconditionError):
        enstrophy_energy_delta(1.0, 2.0, 1, 0.1)


def test_nonresonance_scan():
    v, k = nonresonance_scan((1.0, 0.0), 10)
    assert v == 0.0 and k == (0, 1)
    a = (1.0, math.sqrt(2))
    vals = [nonresonance_scan(a, K)[0] for K in (10, 100, 1000)]
    assert vals[0] > vals[1] > vals[2]
    # minimisers sit at sqrt(2) convergents p/q: k = (p, -q)
    assert nonresonance_scan(a, 10)[1] == (7, -5)
    assert nonresonance_scan(a, 100)[1] == (41, -29)
    assert nonresonance_scan(a, 1000)[1] == (577, -408)
    assert vals[2] == pytest.approx(abs(577 - 408 * math.sqrt(2)), rel=1e-12)
    k = np.array([7, -5])
    assert abs(k @ np.array(a)) == abs(-k @ np.array(a))


def test_report_json():
    rep = BoundsReport()
    rep.add("D", burgers_D(2), s=2)
    rep.add("C2", 1.0, "sampled")
    data = json.loads(rep.to_json())
    assert data[0]["name"] == "D" and data[1]["origin"] == "sampled"
    assert rep["D"] == pytest.approx(3.983127663, abs=1e-9)
    with pytest.raises(KeyError):
        rep["missing"]
