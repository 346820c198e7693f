"""Galerkin right-hand sides for forced viscous Burgers and 2D Navier-Stokes.

Both models are written for the mode amplitudes ``u_k``, ``0 < |k| <= m``::

    u_k' = -nu |k|^2 u_k + N_k(u) + f_k(t)

In the lab frame the mean flow ``alpha`` advects every mode, adding
``-i (k.alpha) u_k``.  Going to the frame moving with the mean,
``a_k = u_k exp(+i (k.alpha) t)``, removes that term and turns the forcing
into ``f_k(t) exp(+i (k.alpha) t)``, which oscillates fast when ``alpha`` is
large.

The quadratic terms are truncated Galerkin convolutions: only triads with
all three wavevectors inside the disk ``|k| <= m`` contribute, which keeps
the discrete energy (and, in 2D, enstrophy) exactly conserved by ``N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.fft as sfft
from scipy.signal import convolve

from .spectral import SpectralState, half_modes, wavevectors

__all__ = [
    "ForcedMode",
    "ForcingSpec",
    "SimParams",
    "GalerkinModel",
    "burgers_nonlinearity",
    "nse2d_nonlinearity",
    "leray_project",
    "rhs",
    "frame_transform",
    "jacobian",
    "realify",
    "derealify",
    "ResonanceError",
]

MODELS = {"burgers": (1, 1), "nse2d": (2, 2)}  # model -> (d, n)
FRAMES = ("lab", "moving")
PROFILES = ("constant", "slow-cosine")


class ResonanceError(ValueError):
    """A forced mode has ``k.alpha = 0`` and cannot be averaged out."""


# ---------------------------------------------------------------------------
# Forcing
# ---------------------------------------------------------------------------

def leray_project(k, v) -> np.ndarray:
    """Project ``v`` onto the plane orthogonal to the wavevector ``k``.

    Returns ``v - k (v.k) / |k|^2``; undefined for ``k = 0``.
    """
    k = np.asarray(k, dtype=float)
    v = np.asarray(v)
    kk = float(k @ k)
    if kk == 0.0:
        raise ValueError("Leray projection is undefined at k = 0")
    return v - k * (v @ k) / kk


@dataclass(frozen=True)
class ForcedMode:
    """One forced wavevector with amplitude and time profile.

    The forcing at ``k`` is ``amplitude * p(t)`` with ``p = 1`` for the
    constant profile and ``p = cos(omega_slow t + phase)`` for slow-cosine.
    """

    k: tuple
    amplitude: tuple
    profile: str = "constant"
    omega_slow: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown forcing profile {self.profile!r}, expected one of {PROFILES}")

    @property
    def kabs(self) -> float:
        return math.sqrt(sum(c * c for c in self.k))

    def p(self, t):
        if self.profile == "constant":
            return 1.0
        return math.cos(self.omega_slow * t + self.phase)

    def sup_rate(self) -> float:
        """``sup_t |p'(t)|``."""
        return 0.0 if self.profile == "constant" else abs(self.omega_slow)


@dataclass(frozen=True)
class ForcingSpec:
    """Finite set of forced modes for a model of dimension ``d`` with ``n`` components.

    Use :meth:`build` to create one: it adds the conjugate partner of every
    listed mode and, for the Navier-Stokes model, makes amplitudes
    divergence free.  The envelope ``(A_V, B_V, s_V)`` is the tightest one
    with ``|f_k(t)| <= A_V/|k|^s_V`` and ``|f_k'(t)| <= B_V/|k|^s_V``.
    """

    d: int
    n: int
    modes: tuple = ()
    s_V: float = 6.0

    @classmethod
    def build(cls, model: str, entries: Sequence = (), s_V: float = 6.0,
              tol: float = 1e-12) -> "ForcingSpec":
        """Create a completed forcing from ``ForcedMode`` entries or dicts.

        Dict entries use the configuration keys ``k, re, im, profile,
        omega_slow, phase``; ``re`` and ``im`` are scalars or ``n``-lists.
        """
        if model not in MODELS:
            raise ValueError(f"unknown model {model!r}")
        d, n = MODELS[model]
        table: dict = {}
        for e in entries:
            fm = e if isinstance(e, ForcedMode) else _mode_from_dict(e, n)
            k = tuple(int(c) for c in fm.k)
            if len(k) != d:
                raise ValueError(f"forced mode {k} must have {d} components")
            if not any(k):
                raise ValueError("the mean mode k = 0 cannot be forced")
            amp = np.broadcast_to(np.asarray(fm.amplitude, dtype=complex), (n,)).copy()
            if model == "nse2d":
                amp = leray_project(k, amp)
            fm = replace(fm, k=k, amplitude=tuple(complex(a) for a in amp))
            for kk, a in ((k, amp), (tuple(-c for c in k), np.conj(amp))):
                prev = table.get(kk)
                if prev is None:
                    table[kk] = replace(fm, k=kk, amplitude=tuple(complex(x) for x in a))
                elif not (np.allclose(prev.amplitude, a, atol=tol, rtol=0)
                          and (prev.profile, prev.omega_slow, prev.phase)
                          == (fm.profile, fm.omega_slow, fm.phase)):
                    raise ValueError(f"forcing at {kk} conflicts with the conjugate of another entry")
        modes = tuple(table[k] for k in sorted(table))
        return cls(d, n, modes, float(s_V))

    @classmethod
    def zero(cls, model: str, s_V: float = 6.0) -> "ForcingSpec":
        return cls.build(model, (), s_V)

    # envelope -----------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return all(not any(abs(a) > 0 for a in fm.amplitude) for fm in self.modes)

    @property
    def max_k(self) -> float:
        """Largest forced ``|k|`` (0 for no forcing)."""
        return max((fm.kabs for fm in self.modes), default=0.0)

    def _amp(self, fm) -> float:
        return float(np.linalg.norm(np.asarray(fm.amplitude)))

    @property
    def A_V(self) -> float:
        return max((fm.kabs ** self.s_V * self._amp(fm) for fm in self.modes), default=0.0)

    @property
    def B_V(self) -> float:
        return max((fm.kabs ** self.s_V * self._amp(fm) * fm.sup_rate() for fm in self.modes),
                   default=0.0)

    def envelope(self) -> tuple[float, float, float]:
        return self.A_V, self.B_V, self.s_V

    def sup_weighted(self, power: float) -> float:
        """``sup_{k,t} |k|^power |f_k(t)|``."""
        return max((fm.kabs ** power * self._amp(fm) for fm in self.modes), default=0.0)

    def sup_energy(self) -> float:
        """Upper bound for ``sup_t sum_k |f_k(t)|^2`` (exact for constant profiles)."""
        return float(sum(self._amp(fm) ** 2 for fm in self.modes))

    def sup_enstrophy(self) -> float:
        return float(sum(fm.kabs ** 2 * self._amp(fm) ** 2 for fm in self.modes))

    # evaluation -----------------------------------------------------------

    def dense(self, t: float, m: int, alpha=None) -> np.ndarray:
        """Forcing coefficients at time ``t`` on a radius-``m`` grid.

        With ``alpha`` given, each mode is multiplied by
        ``exp(i (k.alpha) t)``, i.e. the forcing seen in the moving frame.
        """
        return self.evaluator(m, alpha)(t)

    def evaluator(self, m: int, alpha=None):
        """Return a fast ``t -> coefficient array`` closure for a fixed grid."""
        shape = (self.n,) + (2 * m + 1,) * self.d
        for fm in self.modes:
            if fm.kabs > m:
                raise ValueError(f"forced mode {fm.k} lies outside the truncation radius m={m}")
        if not self.modes:
            zero = np.zeros(shape, dtype=complex)
            return lambda t: zero
        idx = tuple(np.array([fm.k[i] + m for fm in self.modes]) for i in range(self.d))
        amp = np.array([fm.amplitude for fm in self.modes], dtype=complex).T  # (n, F)
        cosine = np.array([fm.profile == "slow-cosine" for fm in self.modes])
        om = np.array([fm.omega_slow for fm in self.modes])
        ph = np.array([fm.phase for fm in self.modes])
        if alpha is None:
            rate = None
        else:
            alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (self.d,))
            rate = np.array([np.dot(fm.k, alpha) for fm in self.modes])
        any_cos = bool(cosine.any())

        def f(t):
            out = np.zeros(shape, dtype=complex)
            v = amp
            if any_cos:
                v = v * np.where(cosine, np.cos(om * t + ph), 1.0)
            if rate is not None:
                v = v * np.exp(1j * rate * t)
            out[(slice(None),) + idx] = v
            return out

        return f

    def frequencies(self, alpha) -> list[tuple[tuple, float]]:
        """``(k, k.alpha)`` for every forced mode."""
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (self.d,))
        return [(fm.k, float(np.dot(fm.k, alpha))) for fm in self.modes]

    def check_nonresonant(self, alpha, tol: float = 1e-12) -> None:
        """Raise :class:`ResonanceError` naming the first mode with ``k.alpha = 0``."""
        for k, w in self.frequencies(alpha):
            if abs(w) <= tol:
                raise ResonanceError(f"forced mode k={k} is resonant with alpha: k.alpha = {w:g}")

    def scaled(self, factor: float) -> "ForcingSpec":
        modes = tuple(replace(fm, amplitude=tuple(factor * a for a in fm.amplitude))
                      for fm in self.modes)
        return replace(self, modes=modes)

    def to_entries(self) -> list[dict]:
        """Configuration dicts for the lexicographically positive forced modes."""
        out = []
        for fm in self.modes:
            if next(c for c in fm.k if c != 0) < 0:
                continue
            re = [a.real for a in fm.amplitude]
            im = [a.imag for a in fm.amplitude]
            out.append({"k": list(fm.k), "re": re[0] if self.n == 1 else re,
                        "im": im[0] if self.n == 1 else im, "profile": fm.profile,
                        "omega_slow": fm.omega_slow, "phase": fm.phase})
        return out


def _mode_from_dict(e: dict, n: int) -> ForcedMode:
    k = e["k"]
    k = (k,) if np.isscalar(k) else tuple(k)
    re = np.broadcast_to(np.asarray(e.get("re", 0.0), dtype=float), (n,))
    im = np.broadcast_to(np.asarray(e.get("im", 0.0), dtype=float), (n,))
    return ForcedMode(k, tuple(re + 1j * im), e.get("profile", "constant"),
                      float(e.get("omega_slow", 0.0)), float(e.get("phase", 0.0)))


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimParams:
    """Viscosity, mean flow, truncation radius and model name."""

    nu: float
    alpha: float | tuple = 0.0
    m: int = 16
    model: str = "burgers"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}, expected one of {tuple(MODELS)}")
        if not self.nu > 0:
            raise ValueError(f"viscosity must be positive, got nu={self.nu}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"truncation radius must be a positive integer, got m={self.m}")
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if a.size == 1 and self.d > 1:
            raise ValueError(f"model {self.model} needs a {self.d}-component alpha")
        if a.size != self.d:
            raise ValueError(f"alpha must have {self.d} components, got {a.size}")
        object.__setattr__(self, "alpha", float(a[0]) if self.d == 1 else tuple(float(x) for x in a))
        object.__setattr__(self, "m", int(self.m))

    @property
    def d(self) -> int:
        return MODELS[self.model][0]

    @property
    def n(self) -> int:
        return MODELS[self.model][1]

    @property
    def alpha_vec(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.alpha, dtype=float))

    @property
    def alpha_norm(self) -> float:
        return float(np.linalg.norm(self.alpha_vec))

    def with_alpha(self, alpha) -> "SimParams":
        return replace(self, alpha=alpha)

    def zero_state(self, frame: str = "moving") -> SpectralState:
        mean = self.alpha_vec if frame == "lab" else None
        return SpectralState.zeros(self.d, self.m, self.n, mean)


# ---------------------------------------------------------------------------
# Nonlinear terms
# ---------------------------------------------------------------------------

def _burgers_N(c: np.ndarray, m: int, kvec: np.ndarray) -> np.ndarray:
    # np.convolve is a direct sum; u_0 is stored as 0 so k1 in {0, k} drop out
    conv = np.convolve(c[0], c[0])[m:3 * m + 1]
    return (-0.5j * kvec * conv)[None, :]


class _NSEConvolver:
    """Truncated products ``sum_{k1} u_{k1,j} u_{k-k1,l}`` for the 2D model.

    The ``fft`` path evaluates the products of the real fields on a grid of
    at least ``3m+1`` points per direction, where the cyclic convolution
    coincides with the truncated linear one on ``|k| <= m``.  It reads only
    the ``k_2 >= 0`` half, so it assumes the reality condition.  The
    ``direct`` path sums the convolution explicitly for any complex state
    and serves as the reference.
    """

    def __init__(self, m: int, method: str = "fft"):
        if method not in ("fft", "direct"):
            raise ValueError(f"unknown convolution method {method!r}")
        self.m, self.method = m, method
        self.N = N = sfft.next_fast_len(3 * m + 1, real=True)
        # spectral buffer, only the retained block is ever written
        self._spec = np.zeros((2, N, N // 2 + 1), dtype=complex)
        self._prod = np.empty((3, N, N))
        self._out = np.empty((3, 2 * m + 1, 2 * m + 1), dtype=complex)

    def products(self, c: np.ndarray) -> np.ndarray:
        """Return array ``(3, 2m+1, 2m+1)`` with the (1,1), (1,2), (2,2) products."""
        m = self.m
        if self.method == "direct":
            pairs = ((0, 0), (0, 1), (1, 1))
            out = [convolve(c[j], c[l], method="direct")[m:3 * m + 1, m:3 * m + 1] for j, l in pairs]
            return np.array(out)
        N, spec, prod, out = self.N, self._spec, self._prod, self._out
        spec[:, :m + 1, :m + 1] = c[:, m:, m:]          # k1 >= 0
        spec[:, N - m:, :m + 1] = c[:, :m, m:]          # k1 < 0
        phys = sfft.irfft2(spec, s=(N, N), norm="forward")
        np.multiply(phys[0], phys[0], out=prod[0])
        np.multiply(phys[0], phys[1], out=prod[1])
        np.multiply(phys[1], phys[1], out=prod[2])
        back = sfft.rfft2(prod, norm="forward")
        out[:, m:, m:] = back[:, :m + 1, :m + 1]
        out[:, :m, m:] = back[:, N - m:, :m + 1]
        # k2 < 0 from the conjugate symmetry of products of real fields
        out[:, :, :m] = np.conj(out[:, ::-1, :m:-1])
        return out


def _nse_N(c, conv: _NSEConvolver, K, ksq_safe, mask):
    p11, p12, p22 = conv.products(c)
    # w_l = -i sum_j k_j (u_j u_l)^_k, then remove the component along k
    w1 = K[0] * p11 + K[1] * p12
    w2 = K[0] * p12 + K[1] * p22
    kw = (K[0] * w1 + K[1] * w2) / ksq_safe
    out = np.empty((2,) + w1.shape, dtype=complex)
    np.multiply(-1j * mask, w1 - K[0] * kw, out=out[0])
    np.multiply(-1j * mask, w2 - K[1] * kw, out=out[1])
    return out


def burgers_nonlinearity(state: SpectralState) -> SpectralState:
    """Galerkin Burgers term ``N_k = -(ik/2) sum u_{k1} u_{k-k1}``.

    The sum runs over ``k1`` with ``k1 != 0, k`` and ``|k1|, |k-k1| <= m``.
    """
    if state.d != 1 or state.n != 1:
        raise ValueError("Burgers nonlinearity expects a scalar 1D state")
    K, _, _ = wavevectors(1, state.m)
    return SpectralState(1, state.m, _burgers_N(state.coeffs, state.m, K[0]))


def nse2d_nonlinearity(state: SpectralState, method: str = "fft") -> SpectralState:
    """Galerkin Navier-Stokes term ``N_k = -i P_k sum_{k1} (u_{k1}.k) u_{k-k1}``.

    ``P_k`` is the Leray projection.  ``method='direct'`` evaluates the
    convolution by explicit summation.
    """
    if state.d != 2 or state.n != 2:
        raise ValueError("Navier-Stokes nonlinearity expects a 2-component 2D state")
    K, ksq, mask = wavevectors(2, state.m)
    return SpectralState(2, state.m, _nse_N(state.coeffs, _NSEConvolver(state.m, method),
                                            K, np.where(ksq > 0, ksq, 1.0), mask))


# ---------------------------------------------------------------------------
# Right-hand side
# ---------------------------------------------------------------------------

class GalerkinModel:
    """Array-level right-hand side ``L u + N(u) + f(t)`` for a fixed grid.

    ``linear`` holds the diagonal of ``L``: ``-nu |k|^2``, plus
    ``-i k.alpha`` in the lab frame.  This is the form consumed by the
    integrators.
    """

    def __init__(self, params: SimParams, forcing: ForcingSpec | None = None,
                 frame: str = "moving", nonlinear: bool = True, method: str = "fft"):
        if frame not in FRAMES:
            raise ValueError(f"unknown frame {frame!r}, expected one of {FRAMES}")
        forcing = ForcingSpec.zero(params.model) if forcing is None else forcing
        if (forcing.d, forcing.n) != (params.d, params.n):
            raise ValueError("forcing does not match the model dimensions")
        if forcing.max_k > params.m:
            raise ValueError(f"truncation m={params.m} is below the largest forced |k|={forcing.max_k:g}")
        self.params, self.forcing, self.frame = params, forcing, frame
        self.nonlinear_on = nonlinear
        m, d = params.m, params.d
        K, ksq, mask = wavevectors(d, m)
        self.K, self.ksq, self.mask = K, ksq, mask
        lin = -params.nu * ksq + 0j
        if frame == "lab":
            lin = lin - 1j * np.tensordot(params.alpha_vec, K, axes=1)
        self.linear = np.broadcast_to(np.where(mask, lin, 0.0), (params.n,) + ksq.shape).copy()
        self.force = forcing.evaluator(m, params.alpha_vec if frame == "moving" else None)
        if params.model == "burgers":
            kv = K[0]
            self._N = lambda c: _burgers_N(c, m, kv)
        else:
            conv = _NSEConvolver(m, method)
            ksq_safe = np.where(ksq > 0, ksq, 1.0)
            self._N = lambda c: _nse_N(c, conv, K, ksq_safe, mask)

    def mean(self) -> np.ndarray:
        return self.params.alpha_vec.copy() if self.frame == "lab" else np.zeros(self.params.n)

    def nonlinear(self, t: float, c: np.ndarray) -> np.ndarray:
        """Everything except the linear diagonal: ``N(u) + f(t)``."""
        f = self.force(t)
        if self.nonlinear_on:
            return self._N(c) + f
        return f

    def __call__(self, t: float, c: np.ndarray) -> np.ndarray:
        return self.linear * c + self.nonlinear(t, c)

    def check_state(self, state: SpectralState) -> None:
        p = self.params
        if (state.d, state.m, state.n) != (p.d, p.m, p.n):
            raise ValueError(f"state grid (d={state.d}, m={state.m}, n={state.n}) does not match the model")
        if not np.allclose(state.mean, self.mean(), rtol=0, atol=1e-12):
            raise ValueError(f"state mean {state.mean} is inconsistent with the {self.frame} frame "
                             f"(expected {self.mean()})")


def rhs(t: float, state: SpectralState, params: SimParams, forcing: ForcingSpec | None = None,
        frame: str = "moving") -> SpectralState:
    """Time derivative of ``state`` at ``t``; the mean is constant in time."""
    model = GalerkinModel(params, forcing, frame)
    model.check_state(state)
    return SpectralState(state.d, state.m, model(t, state.coeffs), np.zeros(state.n))


def frame_transform(state: SpectralState, alpha, t: float, direction: str) -> SpectralState:
    """Switch between the lab frame and the frame moving with ``alpha``.

    ``to_moving`` maps ``u_k -> u_k exp(+i (k.alpha) t)`` and subtracts
    ``alpha`` from the mean; ``to_lab`` is the inverse.
    """
    if direction not in ("to_moving", "to_lab"):
        raise ValueError(f"unknown direction {direction!r}")
    K, _, _ = wavevectors(state.d, state.m)
    a = np.broadcast_to(np.asarray(alpha, dtype=float), (state.d,))
    sign = 1.0 if direction == "to_moving" else -1.0
    phase = np.exp(sign * 1j * np.tensordot(a, K, axes=1) * t)
    mean = state.mean - sign * a if state.n == state.d else state.mean
    return SpectralState(state.d, state.m, state.coeffs * phase, mean)


# ---------------------------------------------------------------------------
# Jacobian in real coordinates
# ---------------------------------------------------------------------------

def _basis(d: int, m: int) -> np.ndarray:
    """Unit vectors spanning the admissible amplitudes at each half mode, ``(M, n)``."""
    hm = half_modes(d, m).astype(float)
    if d == 1:
        return np.ones((len(hm), 1))
    perp = np.stack([-hm[:, 1], hm[:, 0]], axis=1)
    return perp / np.linalg.norm(perp, axis=1, keepdims=True)


def realify(state: SpectralState) -> np.ndarray:
    """Real coordinates ``[Re c, Im c]`` over the half modes.

    ``c_k`` is the amplitude along the admissible direction at ``k``
    (divergence-free direction in 2D).  Conjugate partners and the mean
    are implied.
    """
    h = state.half()                      # (n, M)
    c = np.sum(h * _basis(state.d, state.m).T, axis=0)
    return np.concatenate([c.real, c.imag])


def derealify(x: np.ndarray, d: int, m: int, mean=None) -> SpectralState:
    """Inverse of :func:`realify` for reality-satisfying admissible states."""
    M = len(half_modes(d, m))
    c = x[:M] + 1j * x[M:]
    return SpectralState.from_half(d, m, c[None, :] * _basis(d, m).T, mean)


def jacobian(state: SpectralState, params: SimParams, frame: str = "moving") -> np.ndarray:
    """Dense real Jacobian of the right-hand side in :func:`realify` coordinates.

    Forcing does not depend on the state and drops out.  Conjugate pairs
    are merged, so a state with ``M`` half modes gives a ``2M x 2M`` matrix.
    """
    if frame not in FRAMES:
        raise ValueError(f"unknown frame {frame!r}")
    d, m = params.d, params.m
    if (state.d, state.m) != (d, m):
        raise ValueError("state grid does not match params")
    hm = half_modes(d, m)
    M = len(hm)
    E = _basis(d, m)                          # (M, n)
    kf = hm.astype(float)
    # lookup of u_q for |q| <= 2m, zero outside the stored disk
    big = np.zeros((state.n,) + (4 * m + 1,) * d, dtype=complex)
    big[(slice(None),) + (slice(m, 3 * m + 1),) * d] = state.coeffs

    def gather(q):                            # q: (M, M, d) -> (M, M, n)
        return np.moveaxis(big[(slice(None),) + tuple(np.moveaxis(q + 2 * m, -1, 0))], 0, -1)

    w_minus = gather(hm[:, None, :] - hm[None, :, :])   # u_{k-j}
    w_plus = gather(hm[:, None, :] + hm[None, :, :])    # u_{k+j}

    def block(w):
        if d == 1:
            return -1j * kf[:, None, 0] * w[..., 0]
        ek_w = np.einsum("kn,kjn->kj", E, w)
        k_ej = kf @ E.T                                  # (k . e_j)
        w_k = np.einsum("kjn,kn->kj", w, kf)
        ek_ej = E @ E.T
        return -1j * (ek_w * k_ej + w_k * ek_ej)

    P = block(w_minus)
    Q = block(w_plus)
    lam = -params.nu * np.sum(kf ** 2, axis=1) + 0j
    if frame == "lab":
        lam = lam - 1j * (kf @ params.alpha_vec)
    P[np.diag_indices(M)] += lam
    S, D = P + Q, P - Q
    return np.block([[S.real, -D.imag], [S.imag, D.real]])
