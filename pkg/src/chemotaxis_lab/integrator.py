"""First-order IMEX time stepping for the two-species chemotaxis system.

Diffusion and signal decay are implicit; chemotactic transport, local and
nonlocal kinetics and signal production are explicit. Rejected steps (negative
densities, failed linear solves) are retried with half the step; no clipping is
ever applied so the discrete mass balance stays exact.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import fft, linalg

from .errors import BlowUpGuard, NegativityBreach, SolverDiverged
from .grid import Grid, chemo_divergence, integrate, laplacian_neumann
from .params import Equilibrium, Params

log = logging.getLogger(__name__)

TOL_NEG = 1e-10
SOLVE_RTOL = 1e-10


@dataclass(frozen=True)
class SimState:
    grid: Grid
    t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("u", "v", "w"):
            object.__setattr__(self, name, self.grid.check(getattr(self, name), name))

    @classmethod
    def homogeneous(cls, grid: Grid, u: float, v: float, w: float, t: float = 0.0) -> "SimState":
        return cls(grid, t, grid.constant(u), grid.constant(v), grid.constant(w))

    def linf(self) -> tuple[float, float, float]:
        return tuple(float(np.max(np.abs(f))) for f in (self.u, self.v, self.w))

    def is_finite(self) -> bool:
        return all(np.isfinite(f).all() for f in (self.u, self.v, self.w))


@dataclass(frozen=True)
class SimConfig:
    dt_init: float = 1e-2
    t_end: float = 10.0
    dt_min: float = 1e-9
    # dt is divided by `safety` (i.e. grown) after GROW_AFTER clean steps
    safety: float = 0.5
    blowup_threshold: float = 1e8
    record_every: int = 10
    converge_tol: float = 1e-8
    tol_neg: float = TOL_NEG

    def __post_init__(self):
        if not (0 < self.dt_min < self.dt_init <= self.t_end):
            raise ValueError("need 0 < dt_min < dt_init <= t_end")
        if not (0 < self.safety <= 1):
            raise ValueError("safety must lie in (0, 1]")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")


GROW_AFTER = 10


class Outcome(str, enum.Enum):
    CONVERGED = "Converged"
    REACHED_T_END = "ReachedTEnd"
    BLOW_UP = "BlowUp"
    STEP_UNDERFLOW = "StepUnderflow"


def reaction_rhs(state: SimState, p: Params) -> tuple[np.ndarray, np.ndarray]:
    """Local plus nonlocal Lotka-Volterra kinetics, with the integrals frozen at ``state``."""
    Iu = integrate(state.grid, state.u)
    Iv = integrate(state.grid, state.v)
    u, v = state.u, state.v
    ru = u * (p.a0 - p.a1 * u - p.a2 * v - p.a3 * Iu - p.a4 * Iv)
    rv = v * (p.b0 - p.b1 * u - p.b2 * v - p.b3 * Iu - p.b4 * Iv)
    return ru, rv


def _neumann_eigenvalues(n: int, h: float) -> np.ndarray:
    # DCT-II modes diagonalise the mirrored 3-point stencil
    return -(4.0 / h**2) * np.sin(np.pi * np.arange(n) / (2 * n)) ** 2


def implicit_helmholtz_solve(
    grid: Grid, rhs: np.ndarray, coeff_diffusion: float, coeff_decay: float, dt: float
) -> np.ndarray:
    """Solve ``(1 + dt*decay - dt*D*Lap) x = rhs`` with the Neumann Laplacian.

    1D uses banded Gaussian elimination; 2D uses the exact cosine-transform
    diagonalisation. Both are followed by a residual check.
    """
    if not (coeff_diffusion > 0 and coeff_decay >= 0 and dt > 0):
        raise ValueError("need coeff_diffusion > 0, coeff_decay >= 0, dt > 0")
    rhs = grid.check(rhs, "rhs")
    shift = 1.0 + dt * coeff_decay
    if grid.dim == 1:
        (n,), (h,) = grid.shape, grid.h
        r = dt * coeff_diffusion / h**2
        ab = np.empty((3, n))
        ab[0, :] = -r
        ab[2, :] = -r
        ab[1, :] = shift + 2 * r
        ab[1, 0] = ab[1, -1] = shift + r
        x = linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
    else:
        denom = shift - dt * coeff_diffusion * np.add.outer(
            _neumann_eigenvalues(grid.shape[0], grid.h[0]),
            _neumann_eigenvalues(grid.shape[1], grid.h[1]),
        )
        x = fft.idctn(fft.dctn(rhs, type=2, norm="ortho") / denom, type=2, norm="ortho")

    resid = rhs - (shift * x - dt * coeff_diffusion * laplacian_neumann(grid, x))
    scale = float(np.max(np.abs(rhs)))
    if not np.isfinite(x).all() or float(np.max(np.abs(resid))) > SOLVE_RTOL * scale:
        raise SolverDiverged("implicit solve missed the residual target")
    return x


def step(
    state: SimState,
    p: Params,
    dt: float,
    *,
    blowup_threshold: float = 1e8,
    tol_neg: float = TOL_NEG,
) -> SimState:
    """Advance one IMEX step of size ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    g = state.grid
    ru, rv = reaction_rhs(state, p)
    u_expl = state.u + dt * (-p.chi1 * chemo_divergence(g, state.u, state.w) + ru)
    v_expl = state.v + dt * (-p.chi2 * chemo_divergence(g, state.v, state.w) + rv)
    w_expl = state.w + dt * (p.k * state.u + p.l * state.v)
    for f in (u_expl, v_expl, w_expl):
        if not np.isfinite(f).all():
            raise BlowUpGuard("non-finite values in explicit stage")

    u_new = implicit_helmholtz_solve(g, u_expl, p.d1, 0.0, dt)
    v_new = implicit_helmholtz_solve(g, v_expl, p.d2, 0.0, dt)
    w_new = implicit_helmholtz_solve(g, w_expl, p.d3, p.lam, dt)

    new = SimState(g, state.t + dt, u_new, v_new, w_new)
    if max(new.linf()) > blowup_threshold:
        raise BlowUpGuard(f"L-infinity norm exceeded {blowup_threshold:g} at t={new.t:g}")
    low = min(float(u_new.min()), float(v_new.min()))
    if low < -tol_neg:
        raise NegativityBreach(f"density undershoot {low:.3e} with dt={dt:g}")
    return new


def initial_dt(state: SimState, p: Params, dt_user: float) -> float:
    """Advective step guess; the model carries no CFL information of its own."""
    chi = max(p.chi1, p.chi2)
    if chi <= 0:
        return dt_user
    g = state.grid
    grad = max(
        (float(np.max(np.abs(np.diff(state.w, axis=a)))) / h if state.w.shape[a] > 1 else 0.0)
        for a, h in enumerate(g.h)
    )
    return min(dt_user, 0.1 * min(g.h) / chi / (1.0 + grad))


def distance_linf(state: SimState, eq: Equilibrium) -> tuple[float, float, float]:
    return (
        float(np.max(np.abs(state.u - eq.u))),
        float(np.max(np.abs(state.v - eq.v))),
        float(np.max(np.abs(state.w - eq.w))),
    )


@dataclass
class RunResult:
    final: SimState
    outcome: Outcome
    steps: int = 0
    rejected: int = 0


def run(
    state0: SimState,
    p: Params,
    cfg: SimConfig,
    diag: Callable[[SimState], None] | None = None,
    eq: Equilibrium | None = None,
) -> RunResult:
    """Integrate from ``state0`` until ``t_end``, convergence, blow-up or step underflow.

    ``diag`` is called with the initial state, every ``cfg.record_every`` accepted
    steps, and with the final state. Convergence is only tested when a reference
    equilibrium ``eq`` is given.
    """
    emit = diag or (lambda s: None)
    state = state0
    emit(state)
    if eq is not None and max(distance_linf(state, eq)) < cfg.converge_tol:
        return RunResult(state, Outcome.CONVERGED)

    dt = initial_dt(state, p, cfg.dt_init)
    clean = steps = rejected = 0
    last_emitted = 0
    t_eps = 1e-12 * max(1.0, cfg.t_end)
    outcome = Outcome.REACHED_T_END
    while state.t < cfg.t_end - t_eps:
        h = min(dt, cfg.t_end - state.t)
        try:
            new = step(state, p, h, blowup_threshold=cfg.blowup_threshold, tol_neg=cfg.tol_neg)
        except (NegativityBreach, SolverDiverged) as exc:
            rejected += 1
            clean = 0
            dt = h / 2
            log.debug("step rejected at t=%g: %s", state.t, exc)
            if dt < cfg.dt_min:
                outcome = Outcome.STEP_UNDERFLOW
                break
            continue
        except BlowUpGuard as exc:
            log.info("blow-up guard: %s", exc)
            outcome = Outcome.BLOW_UP
            break

        state = new
        steps += 1
        clean += 1
        if clean >= GROW_AFTER and dt < cfg.dt_init:
            dt = min(cfg.dt_init, dt / cfg.safety)
            clean = 0
        if steps % cfg.record_every == 0:
            emit(state)
            last_emitted = steps
        if eq is not None and max(distance_linf(state, eq)) < cfg.converge_tol:
            outcome = Outcome.CONVERGED
            break

    if last_emitted != steps:
        emit(state)
    return RunResult(state, outcome, steps, rejected)
