"""Lyapunov functionals, norms and decay checks along simulated trajectories."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import Sequence

import numpy as np

from .errors import InsufficientData, NonpositiveDensity
from .grid import Grid, grad_sq_integral, integrate
from .integrator import SimState, distance_linf
from .params import Equilibrium, EquilibriumKind

DENSITY_FLOOR = 1e-300
F_FLOOR = 1e-12


@dataclass(frozen=True)
class DiagRecord:
    t: float
    mass_u: float
    mass_v: float
    linf_u: float
    linf_v: float
    linf_w: float
    l2_dist_u: float
    l2_dist_v: float
    l2_dist_w: float
    grad_w_sq: float
    E: float
    F: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> tuple[float, ...]:
        return astuple(self)


@dataclass(frozen=True)
class DecayVerdict:
    monotone: bool
    epsilon_hat: float | None
    violations: int


def _relative_entropy(grid: Grid, s: np.ndarray, s_eq: float, name: str) -> float:
    """Integral of ``s - s_eq - s_eq*log(s/s_eq)``, evaluated without cancellation."""
    if float(np.min(s)) <= DENSITY_FLOOR:
        raise NonpositiveDensity(f"{name} must be strictly positive for the log term")
    r = (s - s_eq) / s_eq
    return integrate(grid, s_eq * (r - np.log1p(r)))


def lyapunov_weak(
    state: SimState, eq: Equilibrium, delta: float, v_weight: float = 1.0
) -> tuple[float, float]:
    """Energy ``E`` and dissipation ``F`` around the coexistence state.

    ``v_weight`` multiplies the ``v`` entropy term; the dissipation estimate for
    the coupled system holds with ``v_weight = a2/b1``.
    """
    if eq.kind is not EquilibriumKind.COEXISTENCE:
        raise ValueError("lyapunov_weak needs a coexistence equilibrium")
    if not delta > 0:
        raise ValueError("delta must be positive")
    g = state.grid
    du, dv, dw = (integrate(g, (f - c) ** 2) for f, c in zip((state.u, state.v, state.w), eq.as_tuple()))
    E = (
        _relative_entropy(g, state.u, eq.u, "u")
        + v_weight * _relative_entropy(g, state.v, eq.v, "v")
        + 0.5 * delta * dw
    )
    return E, du + dv + dw


def lyapunov_asym(
    state: SimState, eq: Equilibrium, delta2: float, v_weight: float = 1.0
) -> tuple[float, float]:
    """Energy and dissipation around the semi-trivial state ``(0, v_e, w_e)``."""
    if eq.kind is not EquilibriumKind.SEMI_TRIVIAL:
        raise ValueError("lyapunov_asym needs a semi-trivial equilibrium")
    if not delta2 > 0:
        raise ValueError("delta2 must be positive")
    g = state.grid
    u2 = integrate(g, state.u**2)
    dv = integrate(g, (state.v - eq.v) ** 2)
    dw = integrate(g, (state.w - eq.w) ** 2)
    E = (
        integrate(g, state.u)
        + v_weight * _relative_entropy(g, state.v, eq.v, "v")
        + 0.5 * delta2 * dw
    )
    return E, u2 + dv + dw


class Recorder:
    """Diagnostic sink for :func:`chemotaxis_lab.integrator.run`.

    Without a reference equilibrium the distance columns hold squared norms of
    the fields themselves; without ``delta`` the Lyapunov columns are NaN.
    """

    def __init__(
        self,
        eq: Equilibrium | None = None,
        delta: float | None = None,
        v_weight: float = 1.0,
    ):
        self.eq = eq
        self.delta = delta
        self.v_weight = v_weight
        self.records: list[DiagRecord] = []

    def __call__(self, state: SimState) -> None:
        self.records.append(self.evaluate(state))

    def evaluate(self, state: SimState) -> DiagRecord:
        g = state.grid
        ref = self.eq.as_tuple() if self.eq is not None else (0.0, 0.0, 0.0)
        d = [integrate(g, (f - c) ** 2) for f, c in zip((state.u, state.v, state.w), ref)]
        E = F = math.nan
        if self.eq is not None and self.delta is not None:
            try:
                if self.eq.kind is EquilibriumKind.COEXISTENCE:
                    E, F = lyapunov_weak(state, self.eq, self.delta, self.v_weight)
                else:
                    E, F = lyapunov_asym(state, self.eq, self.delta, self.v_weight)
            except NonpositiveDensity:
                pass
        lu, lv, lw = state.linf()
        return DiagRecord(
            t=state.t,
            mass_u=integrate(g, state.u),
            mass_v=integrate(g, state.v),
            linf_u=lu,
            linf_v=lv,
            linf_w=lw,
            l2_dist_u=d[0],
            l2_dist_v=d[1],
            l2_dist_w=d[2],
            grad_w_sq=grad_sq_integral(g, state.w),
            E=E,
            F=F,
        )


def check_decay(series: Sequence[DiagRecord], transient: float = 0.05) -> DecayVerdict:
    """Test discrete monotonicity of ``E`` and fit the rate in ``E' <= -eps F``.

    The first ``transient`` fraction of records is excluded. ``epsilon_hat`` is the
    smallest observed ratio ``-dE/(dt F)`` over steps with ``F > 1e-12``; it is
    ``None`` when no such step exists.
    """
    if len(series) < 3:
        raise InsufficientData("need at least 3 records")
    ts = [r.t for r in series]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise InsufficientData("record times must be strictly increasing")
    if any(math.isnan(r.E) or math.isnan(r.F) for r in series):
        raise InsufficientData("series carries no Lyapunov values")

    tol_E = 1e-8 * max(1.0, series[0].E)
    window = series[int(transient * len(series)):]
    if len(window) < 2:
        raise InsufficientData("transient exclusion leaves fewer than 2 records")
    violations = 0
    eps = math.inf
    for a, b in zip(window, window[1:]):
        if b.E > a.E + tol_E:
            violations += 1
        if a.F > F_FLOOR:
            eps = min(eps, (a.E - b.E) / ((b.t - a.t) * a.F))
    return DecayVerdict(violations == 0, None if math.isinf(eps) else eps, violations)


def detect_convergence(state: SimState, eq: Equilibrium, tol: float) -> bool:
    if not tol > 0:
        raise ValueError("tol must be positive")
    return max(distance_linf(state, eq)) < tol
