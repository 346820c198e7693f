import math

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp
from scipy.special import zeta

from avglab.bounds import (averaging_delta, bk_profile, burgers_E1, gershgorin_log_norm,
                           log_norm_euclidean)
from avglab.cli import RunConfig, parse_config, serialize_config
from avglab.models import (ForcingSpec, SimParams, burgers_nonlinearity, frame_transform,
                           leray_project, nse2d_nonlinearity, rhs)
from avglab.spectral import (dumps_state, energy, enstrophy, grad_supnorm_bound,
                             loads_state, random_state, reality_defect, sum_S, wavevectors)

seeds = st.integers(0, 2 ** 32 - 1)
FAST = settings(max_examples=40, deadline=None)


def _state(seed, d, m, scale=1.0, div_free=False):
    rng = np.random.default_rng(seed)
    s = random_state(rng, d, m, 1 if d == 1 else 2, divergence_free=div_free)
    return s.replace(coeffs=s.coeffs * scale)


@FAST
@given(seeds, st.integers(2, 24), st.floats(1e-3, 1e3))
def test_burgers_reality_and_neutrality(seed, m, scale):
    u = _state(seed, 1, m, scale)
    N = burgers_nonlinearity(u)
    assert reality_defect(N) <= 1e-12 * (1 + energy(u))
    neutral = float(np.real(np.sum(np.conj(u.coeffs) * N.coeffs)))
    assert abs(neutral) <= 1e-10 * (1 + energy(u)) ** 1.5


@FAST
@given(seeds, st.integers(2, 10), st.floats(1e-3, 1e2))
def test_nse_reality_neutrality_divergence(seed, m, scale):
    u = _state(seed, 2, m, scale, div_free=True)
    N = nse2d_nonlinearity(u)
    K, _, _ = wavevectors(2, m)
    E = energy(u)
    assert reality_defect(N) <= 1e-12 * (1 + E)
    assert abs(float(np.real(np.sum(np.conj(u.coeffs) * N.coeffs)))) <= 1e-10 * (1 + E) ** 1.5
    assert np.max(np.abs(np.sum(K * N.coeffs, axis=0))) <= 1e-12 * (1 + E)


@FAST
@given(seeds, st.floats(-50, 50), st.floats(-50, 50))
def test_nse_rhs_divergence_free(seed, a1, a2):
    u = _state(seed, 2, 6, div_free=True)
    f = ForcingSpec.build("nse2d", [{"k": [1, 2], "re": [1.0, 0.5], "im": [0.0, -1.0]}])
    p = SimParams(0.3, (a1, a2), 6, "nse2d")
    du = rhs(0.37, u, p, f)
    K, _, _ = wavevectors(2, 6)
    assert np.max(np.abs(np.sum(K * du.coeffs, axis=0))) <= 1e-12 * (1 + energy(u))
    assert reality_defect(du) <= 1e-12 * (1 + energy(u))


@FAST
@given(st.tuples(st.integers(-20, 20), st.integers(-20, 20)).filter(any),
       hnp.arrays(complex, 2, elements=st.complex_numbers(max_magnitude=1e6, allow_nan=False,
                                                         allow_infinity=False)))
def test_leray_projector(k, v):
    p = leray_project(k, v)
    scale = 1 + np.linalg.norm(v) * math.hypot(*k)
    assert abs(np.dot(p, k)) <= 1e-12 * scale
    assert np.allclose(leray_project(k, p), p, atol=1e-9 * (1 + np.linalg.norm(v)))
    assert np.linalg.norm(p) <= np.linalg.norm(v) * (1 + 1e-12) + 1e-300


@settings(max_examples=200, deadline=None)
@given(hnp.arrays(float, st.tuples(st.integers(1, 12), st.integers(1, 12)).map(lambda t: (t[0], t[0])),
                  elements=st.floats(-1e3, 1e3)))
def test_gershgorin_dominates_exact(J):
    assert gershgorin_log_norm(J) >= log_norm_euclidean(J) - 1e-9 * (1 + np.max(np.abs(J)))


@FAST
@given(seeds, st.integers(1, 2), hnp.arrays(float, 2, elements=st.floats(-100, 100)),
       st.floats(-10, 10))
def test_frame_roundtrip(seed, d, alpha, t):
    u = _state(seed, d, 5)
    a = alpha[:d]
    mv = frame_transform(u, a, t, "to_moving")
    back = frame_transform(mv, a, t, "to_lab")
    assert np.max(np.abs(back.coeffs - u.coeffs)) <= 1e-15 * (1 + np.max(np.abs(u.coeffs))) * 4
    assert np.allclose(back.mean, u.mean, atol=1e-12)
    assert np.allclose(np.abs(mv.coeffs), np.abs(u.coeffs), rtol=1e-14)
    assert reality_defect(mv) <= 1e-14


@FAST
@given(seeds, st.integers(1, 2), st.integers(1, 6))
def test_state_text_roundtrip(seed, d, m):
    u = _state(seed, d, m)
    back = loads_state(dumps_state(u))
    assert back.allclose(u)


@FAST
@given(seeds, st.integers(1, 2))
def test_norm_invariants(seed, d):
    u = _state(seed, d, 6)
    flipped = u.replace(coeffs=u.flipped())
    assert math.isclose(energy(flipped), energy(u), rel_tol=1e-14)
    assert math.isclose(enstrophy(flipped), enstrophy(u), rel_tol=1e-14)
    assert enstrophy(u) >= energy(u)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_grad_bound_dominates_grid(seed):
    u = _state(seed, 1, 8)
    x = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
    k = np.arange(-8, 9)
    ux = np.real(np.exp(1j * np.outer(x, k)) @ (1j * k * u.coeffs[0]))
    assert grad_supnorm_bound(u) >= np.max(np.abs(ux))


@settings(max_examples=25, deadline=None)
@given(st.floats(1.5, 12.0))
def test_sum_S_contains_zeta(p):
    lo, hi = sum_S(1, p)
    exact = 1 + 2 * zeta(p)
    assert lo <= exact * (1 + 1e-13) and exact <= hi * (1 + 1e-13)


@FAST
@given(st.floats(0.5, 500.0), st.floats(-2.0, 1.0), st.floats(0.01, 2.0), st.floats(0.0, 5.0))
def test_delta_homogeneous(alpha, l, h0, C_hat):
    f = ForcingSpec.build("burgers", [{"k": 1, "re": 1.0}, {"k": 2, "im": 0.4, "profile": "slow-cosine",
                                                            "omega_slow": 0.3}], s_V=6)
    p = SimParams(1.0, 0.0, 8)
    d1 = averaging_delta(f, l, h0, alpha, p, C_hat)
    d2 = averaging_delta(f, l, h0, 2 * alpha, p, C_hat)
    assert math.isclose(d2, d1 / 2, rel_tol=1e-13)
    e1 = burgers_E1(1.0, 0.5, 6.0, 1.0, alpha, C_hat)
    assert math.isclose(burgers_E1(1.0, 0.5, 6.0, 1.0, 2 * alpha, C_hat), e1 / 2, rel_tol=1e-13)


@FAST
@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(0.0, 5.0))
def test_bk_continuous_in_l(Cv, CDz, Cdv, t):
    b0 = bk_profile(Cv, 1.0, CDz, Cdv, 0.0, 0.0, t)
    for l in (1e-9, -1e-9):
        assert abs(bk_profile(Cv, 1.0, CDz, Cdv, 0.0, l, t) - b0) <= 1e-6 * max(b0, 1e-300) + 1e-300


@FAST
@given(st.sampled_from(["toy_ode", "burgers_scaling", "averaging_gap"]),
       st.floats(0.1, 10.0), st.integers(2, 64),
       st.lists(st.floats(1.0, 1e3), min_size=1, max_size=5),
       st.one_of(st.none(), st.floats(1e-4, 0.1)), seeds)
def test_config_roundtrip(scenario, nu, m, alphas, dt, seed):
    cfg = RunConfig(scenario=scenario, nu=nu, m=m, alphas=alphas, dt=dt, seed=seed,
                    forcing=[{"k": 1, "re": 1.0}])
    assert parse_config(serialize_config(cfg)) == cfg
