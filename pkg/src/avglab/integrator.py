"""Time stepping for the Galerkin models.

The default scheme is the integrating-factor Runge-Kutta method (IF-RK4):
the diagonal linear part ``L`` is propagated exactly by ``exp(L dt)`` and
classical RK4 is applied to the remaining terms in the rotated variable.
Plain RK4 on the full right-hand side is kept as a reference.

A forced mode in the moving frame oscillates like ``exp(i (k.alpha) t)``;
the step is required to resolve that oscillation, ``dt |alpha| J <= 0.1``
with ``J`` the largest forced ``|k|``.
"""
from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .models import ForcingSpec, GalerkinModel, SimParams
from .spectral import (EnvelopeBound, SpectralState, energy, enstrophy, grad_supnorm_bound,
                       reality_defect, wavevectors)

__all__ = [
    "IntegratorConfig",
    "TrajectoryRecord",
    "GapProfile",
    "BlowUpError",
    "auto_dt",
    "phi1",
    "solve",
    "integrate",
    "integrate_pair",
    "inequality_violation",
]

METHODS = ("IF-RK4", "RK4")
OSCILLATION_LIMIT = 0.1      # max allowed dt * |alpha| * J
BLOWUP_FACTOR = 1e6


class BlowUpError(RuntimeError):
    """Energy grew past the abort threshold."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size, sampling and horizon for :func:`integrate`.

    ``dt=None`` selects the step automatically (see :func:`auto_dt`).
    ``sample_every=None`` records every step.
    """

    t_end: float = 1.0
    dt: float | None = None
    method: str = "IF-RK4"
    sample_every: float | None = None
    c1: float = 0.5
    c2: float = 0.05
    c3: float = 0.01

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


def auto_dt(config: IntegratorConfig, params: SimParams, forcing: ForcingSpec | None,
            frame: str = "moving") -> float:
    """Default step ``min(c2/(1 + |alpha| J), c3)``.

    Plain RK4 treats the stiff diffusion explicitly and also needs
    ``c1/(nu m^2)``; in the lab frame it additionally needs
    ``c1/(1 + |alpha| m)`` for the advection term.
    """
    J = 0.0 if forcing is None else forcing.max_k
    dt = min(config.c2 / (1.0 + params.alpha_norm * J), config.c3)
    if config.method == "RK4":
        dt = min(dt, config.c1 / (params.nu * params.m ** 2))
        if frame == "lab":
            dt = min(dt, config.c1 / (1.0 + params.alpha_norm * params.m))
    return dt


def phi1(z, t=1.0):
    """``(exp(z t) - 1)/z``, equal to ``t`` at ``z = 0``.

    Uses ``expm1`` and switches to the two-term series when ``|z t| < 1e-8``.
    """
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    zt = z * t
    small = np.abs(zt) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, t * (1.0 + 0.5 * zt), np.expm1(zt) / safe)


# ---------------------------------------------------------------------------
# Core stepping
# ---------------------------------------------------------------------------

def solve(linear, nonlinear: Callable, y0, t0: float, t_end: float, dt: float,
          stride: int = 1, method: str = "IF-RK4", monitor: Callable | None = None):
    """Integrate ``y' = linear * y + nonlinear(t, y)`` on ``[t0, t_end]``.

    ``linear`` is the diagonal of the linear operator (array or scalar).
    The step is shrunk so that a whole number of steps ends at ``t_end``.
    Scalar problems run on Python complex numbers, which is much faster
    than size-1 arrays.

    Returns ``(times, samples)`` with a sample every ``stride`` steps,
    including both end points.  ``monitor(t, y)`` is called on every sample
    and may raise to abort.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    T = t_end - t0
    nsteps = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / nsteps
    scalar = np.ndim(y0) == 0
    if scalar:
        y = complex(y0)
        L = complex(linear)
        exp = cmath.exp
        copy = lambda v: v
    else:
        y = np.array(y0, dtype=complex)
        L = np.asarray(linear, dtype=complex)
        exp = np.exp
        copy = np.copy
    if method == "IF-RK4":
        E = exp(L * h / 2)
        E2 = E * E
    times = [t0]
    samples = [copy(y)]
    if monitor is not None:
        monitor(t0, y)
    half = h / 2
    sixth = h / 6
    for i in range(1, nsteps + 1):
        t = t0 + (i - 1) * h
        if method == "IF-RK4":
            k1 = nonlinear(t, y)
            Ey = E * y
            k2 = nonlinear(t + half, E * (y + half * k1))
            k3 = nonlinear(t + half, Ey + half * k2)
            k4 = nonlinear(t + h, E2 * y + h * (E * k3))
            y = E2 * y + sixth * (E2 * k1 + 2.0 * E * (k2 + k3) + k4)
        else:
            f = lambda s, v: L * v + nonlinear(s, v)
            k1 = f(t, y)
            k2 = f(t + half, y + half * k1)
            k3 = f(t + half, y + half * k2)
            k4 = f(t + h, y + h * k3)
            y = y + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        if i % stride == 0 or i == nsteps:
            tt = t0 + i * h
            times.append(tt)
            samples.append(copy(y))
            if monitor is not None:
                monitor(tt, y)
    return np.array(times), samples


# ---------------------------------------------------------------------------
# Trajectories of the Galerkin models
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    """Sampled diagnostics of one trajectory.

    ``envelope_residual`` is ``max_k (|u_k| - C/|k|^s)`` when an envelope was
    supplied (positive means the envelope is violated).
    """

    times: np.ndarray
    energy: np.ndarray
    enstrophy: np.ndarray
    l2norm: np.ndarray
    gradbound: np.ndarray
    reality_defect: np.ndarray
    envelope_residual: np.ndarray | None = None
    states: list | None = None
    dt: float = float("nan")

    COLUMNS = ("t", "energy", "enstrophy", "l2norm", "gradbound", "reality_defect")

    def columns(self, gap=None) -> dict:
        cols = {"t": self.times, "energy": self.energy, "enstrophy": self.enstrophy,
                "l2norm": self.l2norm, "gradbound": self.gradbound,
                "reality_defect": self.reality_defect}
        if gap is not None:
            cols["gap"] = np.asarray(gap)
        return cols

    def to_csv(self, gap=None) -> str:
        """CSV text with columns ``t,energy,enstrophy,l2norm,gradbound,reality_defect[,gap]``."""
        return _csv(self.columns(gap))

    def trailing(self, name: str, fraction: float = 0.25) -> np.ndarray:
        """Values of a column over the final ``fraction`` of the time span."""
        t = self.times
        cut = t[-1] - fraction * (t[-1] - t[0])
        return np.asarray(getattr(self, name))[t >= cut - 1e-12]


def _csv(cols: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(cols)
    w.writerow(names)
    for row in zip(*(cols[n] for n in names)):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def _record(times, samples, d, m, mean, envelope=None, keep_states=False, dt=float("nan")):
    states = [SpectralState(d, m, c, mean) for c in samples]
    env = None
    if envelope is not None:
        _, ksq, mask = wavevectors(d, m)
        cap = envelope.at(np.where(mask, ksq, 1.0))
        env = np.array([float(np.max(np.where(mask, np.sqrt(np.sum(np.abs(s.coeffs) ** 2, axis=0)) - cap,
                                              -np.inf))) for s in states])
    e = np.array([energy(s) for s in states])
    return TrajectoryRecord(
        times=np.asarray(times), energy=e,
        enstrophy=np.array([enstrophy(s) for s in states]), l2norm=np.sqrt(e),
        gradbound=np.array([grad_supnorm_bound(s) for s in states]),
        reality_defect=np.array([reality_defect(s) for s in states]),
        envelope_residual=env, states=states if keep_states else None, dt=dt)


def _stepping(config, params, forcing, frame):
    dt = auto_dt(config, params, forcing, frame) if config.dt is None else config.dt
    J = 0.0 if forcing is None else forcing.max_k
    if dt * params.alpha_norm * J > OSCILLATION_LIMIT * (1 + 1e-12):
        raise ValueError(f"dt={dt:g} does not resolve the forcing oscillation: "
                         f"dt*|alpha|*J = {dt * params.alpha_norm * J:g} > {OSCILLATION_LIMIT}")
    stride = 1 if config.sample_every is None else max(1, int(round(config.sample_every / dt)))
    return dt, stride


def integrate(initial: SpectralState, t0: float, config: IntegratorConfig, params: SimParams,
              forcing: ForcingSpec | None = None, frame: str = "moving", *,
              nonlinear: bool = True, envelope: EnvelopeBound | None = None,
              keep_states: bool = False) -> TrajectoryRecord:
    """Integrate a Galerkin model from ``initial`` at ``t0`` to ``t0 + config.t_end``.

    Raises :class:`BlowUpError` when the energy exceeds ``1e6`` times
    ``max(initial energy, 1)``.
    """
    model = GalerkinModel(params, forcing, frame, nonlinear=nonlinear)
    model.check_state(initial)
    dt, stride = _stepping(config, params, forcing, frame)
    limit = BLOWUP_FACTOR * max(energy(initial), 1.0)

    def monitor(t, y):
        e = float(np.sum(np.abs(y) ** 2))
        if not e <= limit:
            raise BlowUpError(f"energy {e:.3g} exceeded {limit:.3g} at t={t:.6g}")

    times, samples = solve(model.linear, model.nonlinear, initial.coeffs, t0,
                           t0 + config.t_end, dt, stride, config.method, monitor)
    return _record(times, samples, initial.d, initial.m, initial.mean, envelope, keep_states,
                   dt=(config.t_end / max(1, math.ceil(config.t_end / dt - 1e-9))))


@dataclass
class GapProfile:
    """Distance ``|x(t) - y(t)|`` between the full and the reduced system."""

    times: np.ndarray
    gap: np.ndarray
    full: TrajectoryRecord
    reduced: TrajectoryRecord

    @property
    def sup(self) -> float:
        return float(np.max(self.gap))

    def to_csv(self) -> str:
        return self.full.to_csv(self.gap)


def integrate_pair(initial: SpectralState, t0: float, h: float, config: IntegratorConfig,
                   params: SimParams, forcing_full: ForcingSpec | None,
                   forcing_reduced: ForcingSpec | None, frame: str = "moving",
                   *, dt_forcing: ForcingSpec | None = None) -> GapProfile:
    """Integrate two systems from the same state over ``[t0, t0 + h]``.

    Both runs share one step size, chosen from ``forcing_full``, so their
    samples line up.
    """
    cfg = IntegratorConfig(t_end=h, dt=config.dt, method=config.method,
                           sample_every=config.sample_every, c1=config.c1, c2=config.c2, c3=config.c3)
    ref = forcing_full if dt_forcing is None else dt_forcing
    dt, _ = _stepping(cfg, params, ref, frame)
    cfg = IntegratorConfig(t_end=h, dt=dt, method=cfg.method, sample_every=cfg.sample_every)
    x = integrate(initial, t0, cfg, params, forcing_full, frame, keep_states=True)
    y = integrate(initial, t0, cfg, params, forcing_reduced, frame, keep_states=True)
    gap = np.array([math.sqrt(energy(a.replace(coeffs=a.coeffs - b.coeffs)))
                    for a, b in zip(x.states, y.states)])
    return GapProfile(x.times - t0, gap, x, y)


def inequality_violation(record: TrajectoryRecord, nu: float, forcing: ForcingSpec | None,
                         kind: str = "energy", tol: float = 1e-3) -> float:
    """Largest excess of the sampled growth rate over the dissipation bound.

    For ``kind='energy'`` the bound is ``dE/dt <= -2 nu E + 2 sqrt(E) sqrt(E(f))``;
    for ``kind='enstrophy'`` the same with enstrophies.  The forward
    difference between consecutive samples is compared with the bound at
    the mean of the two sampled values, which matches the second-order
    accuracy of the difference quotient.  A tolerance ``tol (1 + E)`` is
    subtracted, so a result ``<= 0`` means the inequality holds everywhere.
    """
    if kind == "energy":
        q = record.energy
        qf = 0.0 if forcing is None else forcing.sup_energy()
    elif kind == "enstrophy":
        q = record.enstrophy
        qf = 0.0 if forcing is None else forcing.sup_enstrophy()
    else:
        raise ValueError(f"unknown inequality {kind!r}")
    t = record.times
    if len(t) < 2:
        return -np.inf
    rate = np.diff(q) / np.diff(t)
    mid = 0.5 * (q[1:] + q[:-1])
    bound = -2.0 * nu * mid + 2.0 * np.sqrt(mid) * math.sqrt(qf)
    return float(np.max(rate - bound - tol * (1.0 + mid)))
