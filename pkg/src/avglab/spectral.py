"""Fourier-mode containers and lattice sums on the d-dimensional torus.

A state holds the complex coefficients ``u_k`` of a real vector field with
``n`` components for every wavevector ``0 < |k| <= m``, plus the (real) mean
``u_0``.  Coefficients live in a dense array of shape ``(n,) + (2m+1,)*d``;
entry ``[j, k_1+m, ..., k_d+m]`` is component ``j`` of ``u_k``.  Positions
outside the disk, and the centre ``k = 0``, are kept at zero.

Both conjugate halves are stored so that departures from the reality
condition ``u_{-k} = conj(u_k)`` can be measured after a computation.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "EnvelopeBound",
    "SpectralState",
    "wavevectors",
    "half_modes",
    "energy",
    "enstrophy",
    "l2norm",
    "reality_defect",
    "grad_supnorm_bound",
    "sum_S",
    "sum_S_tail",
    "estimate_C2",
    "dumps_state",
    "loads_state",
    "random_state",
]


# ---------------------------------------------------------------------------
# Lattice bookkeeping
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def wavevectors(d: int, m: int):
    """Return ``(K, ksq, mask)`` for the retained modes of a ``(d, m)`` grid.

    ``K`` has shape ``(d,) + (2m+1,)*d`` with ``K[i]`` the i-th component of
    the wavevector at each grid position, ``ksq = |k|^2`` and ``mask`` is true
    exactly on ``0 < |k| <= m``.  Arrays are cached and read-only.
    """
    if d < 1 or m < 1:
        raise ValueError(f"need d >= 1 and m >= 1, got d={d}, m={m}")
    r = np.arange(-m, m + 1)
    K = np.array(np.meshgrid(*([r] * d), indexing="ij"), dtype=float)
    ksq = np.sum(K**2, axis=0)
    mask = (ksq > 0) & (ksq <= m * m)
    for a in (K, ksq, mask):
        a.setflags(write=False)
    return K, ksq, mask


def _lex_positive(k: Sequence[int]) -> bool:
    for c in k:
        if c != 0:
            return c > 0
    return False


@functools.lru_cache(maxsize=None)
def half_modes(d: int, m: int) -> np.ndarray:
    """Integer wavevectors with ``0 < |k| <= m`` that are lexicographically positive.

    Returns an ``(M, d)`` array, one row per mode, in lexicographic order.
    Together with their negatives these cover every retained mode once.
    """
    rows = []
    for k in np.ndindex(*([2 * m + 1] * d)):
        kk = tuple(c - m for c in k)
        if 0 < sum(c * c for c in kk) <= m * m and _lex_positive(kk):
            rows.append(kk)
    out = np.array(rows, dtype=int).reshape(-1, d)
    out.setflags(write=False)
    return out


def _index(k: Sequence[int], m: int) -> tuple:
    return tuple(int(c) + m for c in k)


# ---------------------------------------------------------------------------
# Containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeBound:
    """Mode-wise envelope ``|u_k| <= C / |k|^s``."""

    C: float
    s: float

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"envelope constant must be positive, got C={self.C}")

    def at(self, ksq):
        """Envelope value at ``|k|^2 = ksq``."""
        return self.C / np.power(ksq, self.s / 2.0)

    def contains(self, state: "SpectralState", rtol: float = 1e-12) -> bool:
        _, ksq, mask = wavevectors(state.d, state.m)
        mag = np.sqrt(np.sum(np.abs(state.coeffs) ** 2, axis=0))[mask]
        return bool(np.all(mag <= self.at(ksq[mask]) * (1 + rtol)))


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Truncated Fourier representation of a real vector field on the torus.

    Parameters
    ----------
    d : int
        Spatial dimension.
    m : int
        Truncation radius, modes ``0 < |k| <= m`` are retained.
    coeffs : ndarray
        Complex array of shape ``(n,) + (2m+1,)*d``.
    mean : ndarray
        Real mean flow ``u_0`` of shape ``(n,)``.
    """

    d: int
    m: int
    coeffs: np.ndarray
    mean: np.ndarray = field(default=None)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        shape = (2 * self.m + 1,) * self.d
        if c.ndim != self.d + 1 or c.shape[1:] != shape:
            raise ValueError(
                f"coeffs must have shape (n,)+{shape}, got {c.shape}")
        _, _, mask = wavevectors(self.d, self.m)
        c = np.where(mask, c, 0.0)
        mean = np.zeros(c.shape[0]) if self.mean is None else np.asarray(self.mean, dtype=float).reshape(-1)
        if mean.shape != (c.shape[0],):
            raise ValueError(f"mean must have {c.shape[0]} components, got {mean.shape}")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "mean", mean)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    # constructors -----------------------------------------------------

    @classmethod
    def zeros(cls, d: int, m: int, n: int = 1, mean=None) -> "SpectralState":
        return cls(d, m, np.zeros((n,) + (2 * m + 1,) * d, dtype=complex), mean)

    @classmethod
    def from_modes(cls, d: int, m: int, modes: Mapping, n: int = 1, mean=None,
                   complete: bool = True) -> "SpectralState":
        """Build a state from ``{k: amplitude}``.

        With ``complete=True`` each entry ``k`` also sets ``u_{-k}`` to the
        conjugate amplitude, so only one of each pair needs listing.
        """
        c = np.zeros((n,) + (2 * m + 1,) * d, dtype=complex)
        for k, amp in modes.items():
            k = (k,) if np.isscalar(k) else tuple(k)
            if len(k) != d:
                raise ValueError(f"mode {k} does not have {d} components")
            ksq = sum(x * x for x in k)
            if ksq == 0 or ksq > m * m:
                raise ValueError(f"mode {k} outside 0 < |k| <= {m}")
            amp = np.broadcast_to(np.asarray(amp, dtype=complex), (n,))
            c[(slice(None),) + _index(k, m)] = amp
            if complete:
                c[(slice(None),) + _index([-x for x in k], m)] = np.conj(amp)
        return cls(d, m, c, mean)

    @classmethod
    def from_half(cls, d: int, m: int, values: np.ndarray, mean=None) -> "SpectralState":
        """Inverse of :meth:`half`: ``values`` has shape ``(n, M)`` over :func:`half_modes`."""
        values = np.asarray(values, dtype=complex)
        if values.ndim == 1:
            values = values[None, :]
        hm = half_modes(d, m)
        c = np.zeros((values.shape[0],) + (2 * m + 1,) * d, dtype=complex)
        pos = tuple((hm + m).T)
        neg = tuple((-hm + m).T)
        c[(slice(None),) + pos] = values
        c[(slice(None),) + neg] = np.conj(values)
        return cls(d, m, c, mean)

    # accessors --------------------------------------------------------

    def mode(self, k) -> np.ndarray:
        k = (k,) if np.isscalar(k) else tuple(k)
        return self.coeffs[(slice(None),) + _index(k, self.m)].copy()

    def half(self) -> np.ndarray:
        """Coefficients on the lexicographically positive half, shape ``(n, M)``."""
        hm = half_modes(self.d, self.m)
        return self.coeffs[(slice(None),) + tuple((hm + self.m).T)]

    def flipped(self) -> np.ndarray:
        """Array of ``u_{-k}`` laid out like ``coeffs``."""
        return self.coeffs[(slice(None),) + (slice(None, None, -1),) * self.d]

    def replace(self, coeffs=None, mean=None) -> "SpectralState":
        return SpectralState(self.d, self.m,
                             self.coeffs if coeffs is None else coeffs,
                             self.mean if mean is None else mean)

    def resized(self, m: int) -> "SpectralState":
        """Copy onto a grid of radius ``m`` (truncating or zero-padding)."""
        out = np.zeros((self.n,) + (2 * m + 1,) * self.d, dtype=complex)
        r = min(m, self.m)
        src = (slice(None),) + (slice(self.m - r, self.m + r + 1),) * self.d
        dst = (slice(None),) + (slice(m - r, m + r + 1),) * self.d
        out[dst] = self.coeffs[src]
        return SpectralState(self.d, m, out, self.mean)

    def allclose(self, other: "SpectralState", atol: float = 0.0, rtol: float = 0.0) -> bool:
        return (self.d, self.m, self.n) == (other.d, other.m, other.n) and \
            np.allclose(self.coeffs, other.coeffs, atol=atol, rtol=rtol) and \
            np.allclose(self.mean, other.mean, atol=atol, rtol=rtol)


# ---------------------------------------------------------------------------
# Norms and diagnostics
# ---------------------------------------------------------------------------

def energy(state: SpectralState, include_mean: bool = False) -> float:
    """Sum of ``|u_k|^2`` over retained modes.

    By default the mean is excluded, which is the energy used by the moving
    frame estimates.  ``include_mean=True`` adds ``|u_0|^2``.
    """
    e = float(np.sum(np.abs(state.coeffs) ** 2))
    if include_mean:
        e += float(np.sum(state.mean ** 2))
    return e


def enstrophy(state: SpectralState) -> float:
    """Sum of ``|k|^2 |u_k|^2`` over retained modes."""
    _, ksq, _ = wavevectors(state.d, state.m)
    return float(np.sum(ksq * np.abs(state.coeffs) ** 2))


def l2norm(state: SpectralState) -> float:
    return math.sqrt(energy(state))


def reality_defect(state: SpectralState) -> float:
    """Largest ``|u_k - conj(u_{-k})|`` over retained modes."""
    return float(np.max(np.abs(state.coeffs - np.conj(state.flipped())), initial=0.0))


def grad_supnorm_bound(state: SpectralState) -> float:
    """Upper bound on the sup norm of the gradient.

    Sums ``|k_l| |u_k^j|`` over all stored modes, components ``j`` and
    directions ``l``; every entry of the Jacobian matrix of the field is
    bounded by its share of this sum.
    """
    K, _, _ = wavevectors(state.d, state.m)
    absu = np.abs(state.coeffs)
    return float(sum(np.sum(np.abs(K[l]) * absu) for l in range(state.d)))


# ---------------------------------------------------------------------------
# Lattice sums
# ---------------------------------------------------------------------------

_SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}
_MAX_RADIUS = {1: 2 ** 21, 2: 4096, 3: 256}


def _partial_power_sum(d: int, p: float, K: int) -> float:
    """Sum of ``|k|^{-p}`` over ``0 < |k| <= K`` (no leading 1)."""
    if d == 1:
        k = np.arange(K, 0, -1, dtype=float)
        return 2.0 * float(np.sum(k ** -p))
    r = np.arange(-K, K + 1, dtype=float)
    # squared radius of the remaining d-1 coordinates, reused for every slab
    rest = np.zeros(())
    for _ in range(d - 1):
        rest = np.add.outer(rest, r * r)
    rest = rest.ravel()
    total = 0.0
    for k1 in r:
        rsq = rest + k1 * k1
        sel = rsq[(rsq > 0) & (rsq <= K * K)]
        total += float(np.sum(sel ** (-p / 2.0)))
    return total


def _radial_integral(d: int, p: float, lo: float, shift: float) -> float:
    """``|S^{d-1}| * int_lo^inf (rho + shift)^{d-1} rho^{-p} d rho``."""
    total = 0.0
    for j in range(d):
        total += math.comb(d - 1, j) * shift ** (d - 1 - j) * lo ** (j - p + 1) / (p - j - 1)
    return _SPHERE_AREA[d] * total


def sum_S_tail(d: int, p: float, K: int) -> tuple[float, float]:
    """Bracket for ``sum_{|k| > K} |k|^{-p}`` by comparison with radial integrals.

    Each lattice point owns the unit cube centred on it, whose points lie
    within ``c = sqrt(d)/2`` of it.  Integrating ``(|x| -+ c)^{-p}`` over the
    union of cubes gives the two sides; the upper side starts at radius
    ``K - sqrt(d)``.
    """
    if d not in _SPHERE_AREA:
        raise ValueError(f"lattice sums are implemented for d in 1..3, got {d}")
    if p <= d:
        raise ValueError(f"sum of |k|^-p over Z^{d} diverges for p={p} <= d")
    c = math.sqrt(d) / 2.0
    if K - 2 * c <= 0:
        raise ValueError(f"truncation radius K={K} too small for d={d}")
    upper = _radial_integral(d, p, K - 2 * c, c)
    lower = _radial_integral(d, p, K + 2 * c, -c)
    return max(lower, 0.0), upper


def sum_S(d: int, p: float, K: int | None = None, tol: float = 1e-6) -> tuple[float, float]:
    """Rigorous bracket ``(lower, upper)`` for ``S_d(p) = 1 + sum_{k != 0} |k|^{-p}``.

    The lattice sum is evaluated exactly for ``|k| <= K`` and the tail is
    bracketed by :func:`sum_S_tail`.  Without an explicit ``K`` the radius is
    doubled until the bracket is narrower than ``tol`` or a per-dimension
    size limit is reached.
    """
    if p <= d:
        raise ValueError(f"S_{d}({p}) diverges: need p > d")
    return _sum_S_cached(d, float(p), K, float(tol))


@functools.lru_cache(maxsize=256)
def _sum_S_cached(d, p, K, tol):
    def bracket(K):
        part = 1.0 + _partial_power_sum(d, p, K)
        lo, hi = sum_S_tail(d, p, K)
        return part + lo, part + hi

    if K is not None:
        return bracket(int(K))
    K = 16
    lo, hi = bracket(K)
    while hi - lo > tol and 2 * K <= _MAX_RADIUS[d]:
        K *= 2
        lo, hi = bracket(K)
    return lo, hi


_C2_RADIUS = {1: 2048, 2: 128, 3: 32}
_C2_K = {1: 512, 2: 32, 3: 8}


def estimate_C2(d: int, gamma: float, K: int | None = None, R: int | None = None) -> float:
    """Estimate the convolution constant ``C_2(d, gamma)``.

    ``C_2`` is the smallest constant with
    ``sum_{k1+k2=k} 1/(<k1>^gamma <k2>^gamma) <= C_2 / |k|^gamma`` where
    ``<0> = 1`` and ``<k> = |k|`` otherwise.  For each ``0 < |k| <= K`` the
    sum is taken over ``|k1|, |k2| <= R`` and the remainder is bounded by a
    radial-integral tail, then ``|k|^gamma`` times this is maximised over
    ``k``.  The value is an estimate of a supremum over all ``k`` and is
    nondecreasing in ``K`` for a fixed ``R``.

    Parameters
    ----------
    d : int
        Lattice dimension.
    gamma : float
        Decay exponent, must exceed ``d``.
    K : int, optional
        Largest ``|k|`` at which the sup is sampled.
    R : int, optional
        Truncation radius of the inner sum, at least ``2K``.
    """
    if gamma <= d:
        raise ValueError(f"convolution constant requires gamma > d, got gamma={gamma}, d={d}")
    K = _C2_K[d] if K is None else int(K)
    R = max(_C2_RADIUS[d], 2 * K) if R is None else int(R)
    if R < 2 * K:
        raise ValueError(f"inner radius R={R} must be at least 2K={2 * K}")
    Kg, ksq, _ = wavevectors(d, R)
    inside = ksq <= R * R
    w = np.where(ksq > 0, np.power(np.where(ksq > 0, ksq, 1.0), -gamma / 2.0), 1.0)
    w = np.where(inside, w, 0.0)
    if d == 1:
        conv = np.convolve(w, w)
    else:
        from scipy.signal import fftconvolve
        conv = fftconvolve(w, w)
    centre = (slice(R, 3 * R + 1),) * d
    conv = conv[centre]
    # terms with |k1| > R or |k - k1| > R: |k - k1| >= |k1| (1 - |k|/R)
    tail = sum_S_tail(d, 2 * gamma, R)[1]
    kabs = np.sqrt(ksq)
    sel = (ksq > 0) & (ksq <= K * K)
    bound = conv[sel] + 2.0 * tail * (1.0 - kabs[sel] / R) ** (-gamma)
    return float(np.max(kabs[sel] ** gamma * bound))


# ---------------------------------------------------------------------------
# Text serialisation
# ---------------------------------------------------------------------------

def dumps_state(state: SpectralState) -> str:
    """Plain-text form: header ``d m n mean...``, then one line per mode.

    Mode lines read ``k_1 ... k_d re_1 im_1 ... re_n im_n`` and cover every
    stored mode, so unphysical states survive a round trip unchanged.
    """
    head = [str(state.d), str(state.m), str(state.n)] + [repr(float(x)) for x in state.mean]
    lines = ["# " + " ".join(head)]
    _, _, mask = wavevectors(state.d, state.m)
    for idx in zip(*np.nonzero(mask)):
        k = [i - state.m for i in idx]
        v = state.coeffs[(slice(None),) + idx]
        vals = []
        for z in v:
            vals += [repr(float(z.real)), repr(float(z.imag))]
        lines.append(" ".join([str(x) for x in k] + vals))
    return "\n".join(lines) + "\n"


def loads_state(text: str) -> SpectralState:
    """Parse the output of :func:`dumps_state`."""
    rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    if not rows or rows[0][0] != "#":
        raise ValueError("missing state header")
    d, m, n = (int(x) for x in rows[0][1:4])
    mean = [float(x) for x in rows[0][4:]]
    c = np.zeros((n,) + (2 * m + 1,) * d, dtype=complex)
    for row in rows[1:]:
        if len(row) != d + 2 * n:
            raise ValueError(f"malformed mode line: {' '.join(row)}")
        k = [int(x) for x in row[:d]]
        vals = [float(x) for x in row[d:]]
        c[(slice(None),) + _index(k, m)] = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
    return SpectralState(d, m, c, mean)


def random_state(rng: np.random.Generator, d: int, m: int, n: int = 1,
                 envelope: EnvelopeBound | None = None, energy_target: float | None = None,
                 divergence_free: bool = False) -> SpectralState:
    """Random real state with magnitudes inside ``envelope``.

    Magnitudes are drawn uniformly below the envelope (or below 1) with
    random phases.  With ``energy_target`` the state is scaled down, never
    up, so that its energy does not exceed the target.
    """
    K, ksq, mask = wavevectors(d, m)
    hm = half_modes(d, m)
    M = len(hm)
    ks = np.sqrt(np.sum(hm.astype(float) ** 2, axis=1))
    cap = np.ones(M) if envelope is None else envelope.C / ks ** envelope.s
    z = rng.standard_normal((n, M)) + 1j * rng.standard_normal((n, M))
    if divergence_free:
        if d != 2 or n != 2:
            raise ValueError("divergence-free sampling is implemented for d = n = 2")
        perp = np.stack([-hm[:, 1], hm[:, 0]]) / ks
        z = z[0] * perp
    z = z / np.maximum(np.sqrt(np.sum(np.abs(z) ** 2, axis=0)), 1e-300)
    z = z * cap * rng.uniform(0.0, 1.0, M)
    st = SpectralState.from_half(d, m, z)
    if energy_target is not None:
        e = energy(st)
        if e > energy_target:
            st = st.replace(coeffs=st.coeffs * math.sqrt(energy_target / e))
    return st
