"""Closed-form constants for the trapping, averaging and attractor estimates.

Every function here evaluates an explicit formula or a small numerical
search; nothing integrates a PDE.  Lattice sums ``S_d(p)`` enter through
the upper end of the bracket from :func:`avglab.spectral.sum_S`, so that
the resulting bounds are not underestimated.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import eigvalsh

from .integrator import phi1
from .models import ForcingSpec, ResonanceError, SimParams, jacobian, nse2d_nonlinearity
from .spectral import _partial_power_sum
from .spectral import (EnvelopeBound, energy, enstrophy, estimate_C2,
                       half_modes, random_state, sum_S, sum_S_tail, wavevectors)

__all__ = [
    "BoundsReport",
    "PreconditionError",
    "LognormFailure",
    "S_upper",
    "burgers_D",
    "burgers_trapping_constants",
    "burgers_absorbing_sequence",
    "log_norm_euclidean",
    "gershgorin_log_norm",
    "find_negative_lognorm_radius",
    "bk_profile",
    "averaging_delta",
    "burgers_E1",
    "burgers_E1_h0",
    "attractor_radius",
    "toy_ode_attractor",
    "nse2d_trapping_D",
    "estimate_ns_nonlinearity_constant",
    "ns3d_trap_C",
    "ns3d_K0",
    "ns3d_time_step",
    "enstrophy_energy_delta",
    "nonresonance_scan",
]


class PreconditionError(ValueError):
    """Inputs fall outside the range where a bound holds."""


class LognormFailure(RuntimeError):
    """No radius with a negative logarithmic norm was found."""


@dataclass
class BoundEntry:
    name: str
    value: float
    origin: str
    inputs: dict = field(default_factory=dict)


@dataclass
class BoundsReport:
    """Named constants with the inputs they were computed from.

    ``origin`` tells how a value was obtained: ``formula`` for a closed
    form, ``lattice-sum`` when it depends on bracketed sums, ``sampled``
    for a randomised estimate.
    """

    entries: list = field(default_factory=list)

    def add(self, name, value, origin="formula", **inputs):
        self.entries.append(BoundEntry(name, float(value), origin, dict(inputs)))
        return value

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e.value
        raise KeyError(name)

    def to_json(self) -> str:
        return json.dumps([asdict(e) for e in self.entries], indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def S_upper(d: int, p: float) -> float:
    """Upper end of the bracket for ``S_d(p)``."""
    return sum_S(d, p)[1]


# ---------------------------------------------------------------------------
# Burgers trapping region and absorbing sets
# ---------------------------------------------------------------------------

def burgers_D(s: float) -> float:
    """``D(s) = 2^{s-1/2} + 2^{s-1}/sqrt(2s-1)`` for ``s > 1/2``."""
    if s <= 0.5:
        raise PreconditionError(f"D(s) requires s > 1/2, got s={s}")
    return 2.0 ** (s - 0.5) + 2.0 ** (s - 1.0) / math.sqrt(2.0 * s - 1.0)


def burgers_trapping_constants(E_tilde: float, s: float, nu: float, forcing: ForcingSpec) -> dict:
    """Constants of the Burgers trapping region ``{E <= E~, |a_k| <= C/|k|^s}``.

    Returns ``E0 = sup E(f)/nu^2``, ``D``, ``N = ((sqrt(E~) D + 1)/nu)^2`` and
    ``C_min``, the infimum of admissible ``C``.  ``isolation_ok`` records
    that the mode-isolation inequality holds at ``|k| = ceil(N) + 1``.
    """
    if not nu > 0:
        raise PreconditionError(f"nu must be positive, got {nu}")
    E0 = forcing.sup_energy() / nu ** 2
    if not E_tilde > E0:
        raise PreconditionError(f"need E~ > E0 = sup E(f)/nu^2 = {E0:g}, got E~ = {E_tilde:g}")
    D = burgers_D(s)
    N = ((math.sqrt(E_tilde) * D + 1.0) / nu) ** 2
    fsup = forcing.sup_weighted(s - 1.5)
    C_min = max(math.sqrt(E_tilde) * N ** s, fsup)
    kk = math.ceil(N) + 1
    isolation_ok = nu * math.sqrt(kk) > D * math.sqrt(E_tilde) + (fsup / C_min if C_min > 0 else 0.0)
    return {"E0": E0, "D": D, "N": N, "C_min": C_min, "isolation_ok": isolation_ok,
            "isolation_k": kk}


@dataclass(frozen=True)
class AbsorbingLevel:
    i: int
    s: float
    C: float
    D: float
    C_s: float


def burgers_absorbing_sequence(E_tilde: float, nu: float, forcing: ForcingSpec, i_max: int,
                               eps: float | None = None) -> list[AbsorbingLevel]:
    """Absorbing-set constants ``C_i`` for ``s_i = i/2``, ``i = 2..i_max``.

    ``C_2 = eps + (E~/2 + sup|f_k|/|k|)/nu`` and
    ``C_i = eps + (C_{i-1} sqrt(E~) D(s_{i-1}) + sup |k|^{s_i-2}|f_k|)/nu``.
    ``C_s`` is ``max(C_i, sqrt(E~) N^{s_i})``, the constant that also covers
    the modes below ``N``.  ``eps`` defaults to 1% of the ``eps = 0`` value
    of ``C_2``.
    """
    if i_max < 2:
        raise ValueError("i_max must be at least 2")
    if not nu > 0:
        raise PreconditionError(f"nu must be positive, got {nu}")
    base = (0.5 * E_tilde + forcing.sup_weighted(-1.0)) / nu
    eps = 0.01 * base if eps is None else float(eps)
    sq = math.sqrt(E_tilde)
    N = ((sq * burgers_D(1.0) + 1.0) / nu) ** 2
    out = []
    C = eps + base
    D = burgers_D(1.0)
    out.append(AbsorbingLevel(2, 1.0, C, D, max(C, sq * N)))
    for i in range(3, i_max + 1):
        s_prev, s_i = (i - 1) / 2.0, i / 2.0
        D_prev = burgers_D(s_prev)
        C = eps + (C * sq * D_prev + forcing.sup_weighted(s_i - 2.0)) / nu
        N = ((sq * burgers_D(s_i) + 1.0) / nu) ** 2
        out.append(AbsorbingLevel(i, s_i, C, burgers_D(s_i), max(C, sq * N ** s_i)))
    return out


# ---------------------------------------------------------------------------
# Logarithmic norms
# ---------------------------------------------------------------------------

def log_norm_euclidean(J) -> float:
    """``mu(J) = lambda_max((J + J^T)/2)`` for a real matrix."""
    J = np.asarray(J, dtype=float)
    S = 0.5 * (J + J.T)
    return float(eigvalsh(S, subset_by_index=[S.shape[0] - 1, S.shape[0] - 1])[0])


def gershgorin_log_norm(J) -> float:
    """Gershgorin upper bound for :func:`log_norm_euclidean`."""
    J = np.asarray(J, dtype=float)
    S = 0.5 * (J + J.T)
    off = np.sum(np.abs(S), axis=1) - np.abs(np.diag(S))
    return float(np.max(np.diag(S) + off))


@dataclass
class NegativeLognormResult:
    E_minus: float
    mu_max: float
    mu_small: float
    samples: int
    iterations: list


def find_negative_lognorm_radius(params: SimParams, forcing_off: ForcingSpec | None, C: float,
                                 s: float, grid: tuple | None = None, *, n_samples: int = 200,
                                 n_iter: int = 40, seed: int = 0) -> NegativeLognormResult:
    """Largest tested energy ``E`` with a negative sampled log norm on ``W(E, C, s)``.

    ``W(E, C, s)`` holds the unforced moving-frame states with energy at
    most ``E`` and ``|a_k| <= C/|k|^s``.  The same ``n_samples`` random
    directions are reused at every ``E``, each pushed out to energy ``E``
    and clipped by the envelope.  Bisection in ``log E`` runs over
    ``grid = (E_lo, E_hi)``, by default from ``1e-8`` to the largest energy
    the envelope allows.  The Jacobian does not see the forcing, so
    ``forcing_off`` must be empty or zero.

    This is a sampled estimate: a state outside the sample may have a
    larger log norm.
    """
    if n_samples < 200:
        raise ValueError("at least 200 sampled states are required")
    if forcing_off is not None and not forcing_off.is_zero:
        raise ValueError("the log-norm search is defined for the unforced system")
    E_lo, E_hi = (1e-8, None) if grid is None else grid
    d, m, n = params.d, params.m, params.n
    rng = np.random.default_rng(seed)
    env = EnvelopeBound(C, s)
    hm = half_modes(d, m)
    ks = np.sqrt(np.sum(hm.astype(float) ** 2, axis=1))
    cap = C / ks ** s
    E_env = 2.0 * float(np.sum(cap ** 2))
    E_hi = E_env if E_hi is None else min(E_hi, E_env)
    dirs = [random_state(rng, d, m, n, env, divergence_free=(params.model == "nse2d"))
            for _ in range(n_samples)]

    def sample_mu(E):
        worst = -np.inf
        for u in dirs:
            e = energy(u)
            t = math.sqrt(E / e) if e > 0 else 0.0
            mag = np.abs(u.half()).max(axis=0)
            t = min(t, float(np.min(np.where(mag > 0, cap / np.where(mag > 0, mag, 1), np.inf))))
            st = u.replace(coeffs=u.coeffs * t)
            worst = max(worst, log_norm_euclidean(jacobian(st, params)))
        return worst

    mu_small = sample_mu(E_lo)
    if not mu_small < 0:
        raise LognormFailure(f"sampled log norm {mu_small:g} is not negative even at E={E_lo:g}")
    history = [(E_lo, mu_small)]
    mu_hi = sample_mu(E_hi)
    history.append((E_hi, mu_hi))
    if mu_hi < 0:
        return NegativeLognormResult(E_hi, mu_hi, mu_small, n_samples, history)
    lo, hi, mu_lo = math.log(E_lo), math.log(E_hi), mu_small
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        mu = sample_mu(math.exp(mid))
        history.append((math.exp(mid), mu))
        if mu < 0:
            lo, mu_lo = mid, mu
        else:
            hi = mid
        if hi - lo < 1e-3:
            break
    return NegativeLognormResult(math.exp(lo), mu_lo, mu_small, n_samples, history)


# ---------------------------------------------------------------------------
# Averaging estimate
# ---------------------------------------------------------------------------

def bk_profile(Cv, CG, CDzFv, Cdvdt, CDzvF, l, t):
    """Per-mode averaging bound ``b_k(t)``.

    ``b = Cv CG (1 + e^{lt}) + (CDzFv CG + CG (Cdvdt + CDzvF)) (e^{lt} - 1)/l``,
    with ``(e^{lt} - 1)/l`` evaluated stably and equal to ``t`` at ``l = 0``.
    """
    t = np.asarray(t, dtype=float)
    g = phi1(l, t)
    out = Cv * CG * (1.0 + np.exp(l * t)) + (CDzFv * CG + CG * (Cdvdt + CDzvF)) * g
    return float(out) if out.ndim == 0 else out


def _mode_constants(kabs, A_V, B_V, s_V, nu, C_hat, d, p, r):
    Cv = A_V / kabs ** s_V
    Cdvdt = B_V / kabs ** s_V
    CDzFv = A_V / kabs ** (s_V - p) * (nu + C_hat * S_upper(d, s_V - r))
    return Cv, Cdvdt, CDzFv


def averaging_delta(forcing: ForcingSpec, l: float, h0: float, alpha, params: SimParams,
                    C_hat: float = 0.0, p: float = 2.0, r: float = 1.0,
                    relaxed: bool = False) -> float:
    """Upper bound ``Delta`` on ``sup_{[0,h0]} |x - y|`` for the averaged system.

    ``Delta = sum_k sup_t b_k(t)/|k.alpha|`` over forced modes, with the
    forcing envelope providing ``C(v_k) = A_V/|k|^s_V`` and
    ``C(dv_k/dt) = B_V/|k|^s_V``, ``C(G) = 1``, no explicit state dependence
    of ``v_k``, and
    ``C(D_z F v_k) = A_V/|k|^{s_V-p} (nu + C_hat S_d(s_V - r))``.

    ``l`` bounds the log norm along the segment.  ``b_k`` is monotone in
    ``t`` (its derivative is ``e^{lt}`` times a constant), so the sup is
    attained at an end point.  ``relaxed=True`` for ``l <= 0`` uses
    ``1 + e^{lt} <= 2`` and ``(e^{lt}-1)/l <= t`` instead of the exact
    profile.
    """
    if h0 < 0:
        raise ValueError("h0 must be non-negative")
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (forcing.d,))
    A_V, B_V, s_V = forcing.envelope()
    total = 0.0
    for fm in forcing.modes:
        w = float(np.dot(fm.k, alpha))
        if w == 0.0:
            raise ResonanceError(f"forced mode k={fm.k} is resonant: k.alpha = 0")
        Cv, Cdvdt, CDzFv = _mode_constants(fm.kabs, A_V, B_V, s_V, params.nu, C_hat,
                                           forcing.d, p, r)
        if relaxed:
            if l > 0:
                raise ValueError("the relaxed profile needs l <= 0")
            b = 2.0 * Cv + (CDzFv + Cdvdt) * h0
        else:
            b = max(bk_profile(Cv, 1.0, CDzFv, Cdvdt, 0.0, l, 0.0),
                    bk_profile(Cv, 1.0, CDzFv, Cdvdt, 0.0, l, h0))
        total += b / abs(w)
    return total


def burgers_E1_h0(A_V: float, B_V: float, s_V: float, nu: float, alpha: float, C_hat: float,
                  h0: float, p: float = 2.0, r: float = 1.0) -> float:
    """``sqrt(E1)`` for the Burgers attractor estimate with step ``h0``.

    ``sqrt(E1) = [3 A_V S(s_V+1) + 1.5 (A_V S(s_V-p+1)(nu + C_hat S(s_V-r))
    + B_V S(s_V+1)) h0] / (|alpha| (1 - e^{-nu h0}))`` with ``S = S_1``.
    """
    if s_V <= 5:
        raise PreconditionError(f"the attractor estimate needs s_V > 5, got s_V={s_V}")
    if alpha == 0:
        raise ResonanceError("alpha = 0 leaves the forcing resonant")
    S = lambda q: S_upper(1, q)
    num = 3.0 * A_V * S(s_V + 1) + 1.5 * (A_V * S(s_V - p + 1) * (nu + C_hat * S(s_V - r))
                                          + B_V * S(s_V + 1)) * h0
    return num / (abs(alpha) * -math.expm1(-nu * h0))


def burgers_E1(A_V: float, B_V: float, s_V: float, nu: float, alpha: float, C_hat: float,
               p: float = 2.0, r: float = 1.0) -> float:
    """``sqrt(E1)`` with ``h0 = 1/nu``::

        e/((e-1)|alpha|) (A_V (3 S(s_V+1) + 1.5 S(s_V-p+1))
                          + 3/(2 nu) (A_V S(s_V-p+1) C_hat S(s_V-r) + B_V S(s_V+1)))
    """
    if s_V <= 5:
        raise PreconditionError(f"the attractor estimate needs s_V > 5, got s_V={s_V}")
    if alpha == 0:
        raise ResonanceError("alpha = 0 leaves the forcing resonant")
    S = lambda q: S_upper(1, q)
    e = math.e
    inner = A_V * (3.0 * S(s_V + 1) + 1.5 * S(s_V - p + 1)) + \
        1.5 / nu * (A_V * S(s_V - p + 1) * C_hat * S(s_V - r) + B_V * S(s_V + 1))
    return e / ((e - 1.0) * abs(alpha)) * inner


def attractor_radius(sqrt_E1: float) -> float:
    """Radius ``5 sqrt(E1)/3`` of the ball containing the attractor."""
    return 5.0 * sqrt_E1 / 3.0


def toy_ode_attractor(nu: float, alpha: float) -> complex:
    """Periodic attractor of ``z' = -nu z + e^{i alpha t}`` at ``t = 0``: ``1/(nu + i alpha)``."""
    if nu <= 0:
        raise PreconditionError("nu must be positive")
    return 1.0 / complex(nu, alpha)


# ---------------------------------------------------------------------------
# Navier-Stokes constants
# ---------------------------------------------------------------------------

def nse2d_trapping_D(V0: float, gamma: float, nu: float, C_lemma: float, A_gamma: float,
                     V_star: float = 0.0) -> float:
    """Smallest envelope constant ``D`` of the 2D trapping region.

    ``D`` must exceed both ``2 A_gamma / nu`` (mode ``|k| = 1``) and
    ``(4 C^2 V0^{1 + 1/(2 gamma - 2)} / nu^2)^{gamma - 1}``.
    """
    if gamma <= 1:
        raise PreconditionError(f"gamma must exceed 1, got {gamma}")
    if not V0 > V_star:
        raise PreconditionError(f"need V0 > V* = {V_star:g}, got V0 = {V0:g}")
    a = 2.0 * A_gamma / nu
    b = (4.0 * C_lemma ** 2 * V0 ** (1.0 + 1.0 / (2.0 * gamma - 2.0)) / nu ** 2) ** (gamma - 1.0)
    return max(a, b)


def estimate_ns_nonlinearity_constant(gamma: float, eps: float, V0: float, D_env: float,
                                      sample_size: int = 64, m: int = 12, seed: int = 0) -> float:
    """Sampled constant ``C`` in ``|N_k(u)| <= C sqrt(V) D / |k|^{gamma-1-eps}``.

    States are divergence-free with ``|u_k| <= D_env/|k|^gamma`` and
    enstrophy ``V0`` (scaled down if the envelope forces it).  Returns the
    largest observed ratio, which is only an estimate of the true constant.
    """
    rng = np.random.default_rng(seed)
    env = EnvelopeBound(D_env, gamma)
    _, ksq, mask = wavevectors(2, m)
    kabs = np.sqrt(np.where(mask, ksq, 1.0))
    best = 0.0
    for _ in range(sample_size):
        u = random_state(rng, 2, m, 2, env, divergence_free=True)
        # push magnitudes to the envelope, keep random phases
        mag = np.sqrt(np.sum(np.abs(u.coeffs) ** 2, axis=0))
        u = u.replace(coeffs=np.where(mask, u.coeffs / np.where(mag > 0, mag, 1.0) * env.at(kabs ** 2), 0))
        V = enstrophy(u)
        if V > V0:
            u = u.replace(coeffs=u.coeffs * math.sqrt(V0 / V))
            V = V0
        N = nse2d_nonlinearity(u).coeffs
        Nk = np.sqrt(np.sum(np.abs(N) ** 2, axis=0))
        ratio = Nk * kabs ** (gamma - 1.0 - eps) / (math.sqrt(V) * D_env)
        best = max(best, float(np.max(np.where(mask, ratio, 0.0))))
    return best


def ns3d_trap_C(nu: float, s: float, K: int | None = None) -> float:
    """Largest admissible envelope constant ``nu / C_2(3, s)`` (exclusive)."""
    if s <= 3:
        raise PreconditionError(f"need s > 3, got s={s}")
    return nu / estimate_C2(3, s, K)


def ns3d_K0(C: float, nu: float, s: float, s_V: float, A_V: float, C2: float | None = None) -> int:
    """Smallest integer ``|k|`` with ``|k|^{s_V-s+1}(|k|-1) > A_V C_2 / nu^2``.

    ``C`` must satisfy the trapping condition ``C < nu/C_2``.
    """
    C2 = estimate_C2(3, s) if C2 is None else float(C2)
    if not C < nu / C2:
        raise PreconditionError(f"need C < nu/C_2 = {nu / C2:g}, got C = {C:g}")
    if s_V < s - 1:
        raise PreconditionError("need s_V >= s - 1 for the left side to grow")
    rhs = A_V * C2 / nu ** 2
    k = 1
    while not k ** (s_V - s + 1) * (k - 1) > rhs:
        k += 1
    return k


def ns3d_time_step(E1: float, E2: float, sup_Ef: float) -> float:
    """``h = (E1 - E2) / (sqrt(E1) sqrt(sup E(f)))``."""
    if not E1 > E2 >= 0:
        raise PreconditionError(f"need E1 > E2 >= 0, got E1={E1}, E2={E2}")
    if not sup_Ef > 0:
        raise PreconditionError("sup E(f) must be positive")
    return (E1 - E2) / (math.sqrt(E1) * math.sqrt(sup_Ef))


def _weighted_tail(d: int, q: float, n: int, extra: int = 256) -> float:
    """Upper bound for ``sum_{|k| > n} |k|^{-q}``: exact up to ``n + extra``, then an integral."""
    R = n + extra
    band = _partial_power_sum(d, q, R) - _partial_power_sum(d, q, n)
    return band + sum_S_tail(d, q, R)[1]


def enstrophy_energy_delta(C: float, s: float, d: int, eps: float) -> tuple[float, int]:
    """Energy radius ``delta`` that keeps the enstrophy distance below ``eps``.

    ``n`` is the smallest integer with ``C^2 sum_{|k|>n} |k|^{2-2s} < eps^2/4``
    and ``delta = eps/(sqrt(2) n)``.  Returns ``(delta, n)``.
    """
    if s <= d + 1:
        raise PreconditionError(f"need s > d + 1, got s={s}, d={d}")
    target = eps ** 2 / 4.0
    q = 2.0 * s - 2.0
    n = 1
    while C ** 2 * _weighted_tail(d, q, n) >= target:
        n += 1
    return eps / (math.sqrt(2.0) * n), n


def nonresonance_scan(alpha, K: int) -> tuple[float, tuple]:
    """``min |k.alpha|`` over integer ``0 < |k| <= K`` and a minimiser.

    The minimiser is reported with its first nonzero component positive.
    """
    a = np.asarray(alpha, dtype=float).reshape(-1)
    d = a.size
    if d == 1:
        return abs(a[0]), (1,)
    if d != 2:
        raise ValueError("nonresonance_scan supports d = 1 or 2")
    r = np.arange(-K, K + 1)
    best, arg = np.inf, None
    for k1 in range(0, K + 1):
        k2 = r[k1 * k1 + r * r <= K * K]
        if k1 == 0:
            k2 = k2[k2 > 0]
        v = np.abs(k1 * a[0] + k2 * a[1])
        i = int(np.argmin(v))
        if v[i] < best:
            best, arg = float(v[i]), (k1, int(k2[i]))
    return best, arg
