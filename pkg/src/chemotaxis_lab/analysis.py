"""Coefficient algebra: equilibria, competition regimes and theorem hypotheses.

Every function here is a pure function of a :class:`Params` instance. Hypotheses
are evaluated as strict inequalities with zero tolerance; the reported margins
let callers apply their own slack.

Condition identifiers used in :class:`HypothesisReport`:

``intraspecific_dominance``
    ``min(a1, b2) > max((a3)-, (b4)-, (a4)-, (b3)-) |Omega|``
``high_dim_u`` / ``high_dim_v``
    the two L^p-regularity inequalities needed when the dimension is >= 3
``signal_coupling``
    ``b1 l^2 w1 + a2 k^2 w2 > 2 a2 b1 k l``
``competition_product``
    ``w1 w2 > a2 b1 + (b1 l^2 w1 + a2 k^2 w2 - 2 a2 b1 k l) w3``
``varpi1_positive``
    ``w1 > 0`` (exclusion case only)
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Literal

import numpy as np

from .errors import (
    EmptyWindow,
    InvalidExponent,
    NonpositiveEquilibrium,
    NotSymmetric,
    RegimeMismatch,
    SingularSystem,
)
from .params import (
    Equilibrium,
    EquilibriumKind,
    HypothesisReport,
    Params,
    Regime,
    RegimeClass,
    StabilityCertificate,
)

Case = Literal["weak", "asymmetric"]
CASES = ("weak", "asymmetric")


def signed_parts(a: float) -> tuple[float, float]:
    """Return ``(max(0, a), max(0, -a))``."""
    if not math.isfinite(a):
        raise ValueError(f"signed_parts needs a finite value, got {a!r}")
    return (a, 0.0) if a > 0 else (0.0, -a if a < 0 else 0.0)


def neg(a: float) -> float:
    return signed_parts(a)[1]


def effective_coefficients(p: Params) -> tuple[float, float, float, float]:
    """Local plus nonlocal competition strengths felt by a homogeneous state.

    Returns ``(A1, A2, B1, B2)`` with ``A1 = a1 + a3|Omega|``, ``A2 = a2 + a4|Omega|``,
    ``B1 = b1 + b3|Omega|``, ``B2 = b2 + b4|Omega|``.
    """
    m = p.omega_measure
    return (p.a1 + p.a3 * m, p.a2 + p.a4 * m, p.b1 + p.b3 * m, p.b2 + p.b4 * m)


def classify_regime(p: Params) -> RegimeClass:
    A1, A2, B1, B2 = effective_coefficients(p)
    r_low = B1 / A1 if A1 > 0 else math.nan
    r_high = B2 / A2 if A2 > 0 else math.nan
    r_mid = p.b0 / p.a0 if p.a0 > 0 else math.nan
    if any(math.isnan(r) for r in (r_low, r_mid, r_high)):
        regime = Regime.UNCLASSIFIED
    elif r_low < r_mid < r_high:
        regime = Regime.WEAK
    elif r_low < r_high <= r_mid:
        regime = Regime.STRONGLY_ASYMMETRIC
    elif r_low > r_mid > r_high:
        regime = Regime.FULL_STRONG
    else:
        regime = Regime.UNCLASSIFIED
    return RegimeClass(regime, r_low, r_mid, r_high)


def coexistence_equilibrium(p: Params) -> Equilibrium:
    """Unique positive homogeneous steady state in the weak competition regime."""
    A1, A2, B1, B2 = effective_coefficients(p)
    det = B2 * A1 - A2 * B1
    if det == 0.0:
        raise SingularSystem("homogeneous balance system is singular (B2*A1 == A2*B1)")
    u = (p.a0 * B2 - p.b0 * A2) / det
    v = (p.a0 * B1 - p.b0 * A1) / (A2 * B1 - B2 * A1)
    w = (p.a0 * (p.k * B2 - p.l * B1) + p.b0 * (p.l * A1 - p.k * A2)) / (p.lam * det)
    if not (u > 0 and v > 0 and w > 0):
        raise NonpositiveEquilibrium(f"coexistence state ({u!r}, {v!r}, {w!r}) is not positive")
    return Equilibrium(u, v, w, EquilibriumKind.COEXISTENCE)


def semitrivial_equilibrium(p: Params) -> Equilibrium:
    """Homogeneous steady state with the first species extinct."""
    B2 = p.b2 + p.b4 * p.omega_measure
    if not B2 > 0:
        raise SingularSystem(f"b2 + b4|Omega| = {B2!r} must be positive")
    v = p.b0 / B2
    return Equilibrium(0.0, v, p.l * p.b0 / (p.lam * B2), EquilibriumKind.SEMI_TRIVIAL)


def balance_residual(p: Params, u: float, v: float, w: float) -> tuple[float, float, float]:
    """Relative residuals of the three homogeneous balance equations at (u, v, w).

    For the first species the balance is ``u * (a0 - a1 u - ...) = 0``; the growth
    factor is only required to vanish when ``u > 0``.
    """
    m = p.omega_measure
    terms_u = (p.a0, p.a1 * u, p.a2 * v, p.a3 * m * u, p.a4 * m * v)
    terms_v = (p.b0, p.b1 * u, p.b2 * v, p.b3 * m * u, p.b4 * m * v)
    terms_w = (p.lam * w, p.k * u, p.l * v)

    def rel(total, terms):
        scale = max(abs(t) for t in terms)
        return abs(total) / scale if scale > 0 else 0.0

    gu = terms_u[0] - sum(terms_u[1:])
    gv = terms_v[0] - sum(terms_v[1:])
    return (
        rel(gu, terms_u) if u > 0 else 0.0,
        rel(gv, terms_v) if v > 0 else 0.0,
        rel(terms_w[0] - terms_w[1] - terms_w[2], terms_w),
    )


def check_boundedness(
    p: Params, dim: int, p_exp: float | None = None, C_p: float | None = None
) -> HypothesisReport:
    """Evaluate the sufficient conditions for global bounded solutions.

    ``C_p`` is the maximal Sobolev regularity constant of the domain; it cannot be
    computed here and must be supplied for ``dim >= 3`` (default 1.0, flagged in the
    report notes). ``p_exp`` defaults to ``dim + 1``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    m = p.omega_measure
    report = HypothesisReport()
    report.add(
        "intraspecific_dominance",
        min(p.a1, p.b2),
        max(neg(p.a3), neg(p.b4), neg(p.a4), neg(p.b3)) * m,
    )
    if dim <= 2:
        return report

    if p_exp is None:
        p_exp = dim + 1.0
        report.notes.append(f"p_exp defaulted to dim + 1 = {p_exp:g}")
    if not p_exp > dim:
        raise InvalidExponent(f"p_exp must exceed dim={dim}, got {p_exp!r}")
    if C_p is None:
        C_p = 1.0
        report.notes.append("C_p not supplied; defaulted to 1.0 (the result is conditional on C_p)")
    if not C_p > 0:
        raise ValueError("C_p must be positive")

    q = p_exp
    chis = p.chi1 + p.chi2
    rhs_u = (
        (q - 1) * p.chi1
        + q * (neg(p.a3) + neg(p.a4)) * m ** (1 / q)
        + (neg(p.a3) + neg(p.b3)) * m**q
        + (2 * p.k) ** (q + 1) * chis * C_p
    )
    rhs_v = (
        (q - 1) * p.chi2
        + q * (neg(p.b4) + neg(p.b3)) * m ** (1 / q)
        + (neg(p.a4) + neg(p.b4)) * m**q
        + (2 * p.l) ** (q + 1) * chis * C_p
    )
    report.add("high_dim_u", p.a1, rhs_u)
    report.add("high_dim_v", p.b2, rhs_v)
    return report


def varpi_local(p: Params) -> tuple[float, float]:
    m = p.omega_measure
    cross = (p.a4 + p.b3) * m
    return p.a1 - cross, p.b2 - cross


def varpi3(p: Params) -> float:
    eq = coexistence_equilibrium(p)
    num = p.d1 * p.a2 * p.chi2**2 * eq.v + p.d2 * p.b1 * p.chi1**2 * eq.u
    return num / (16 * p.d1 * p.d2 * p.d3 * p.a2 * p.b1 * p.lam)


def varpi3_bar(p: Params) -> float:
    eq = semitrivial_equilibrium(p)
    return p.chi2**2 * eq.v / (16 * p.d2 * p.d3 * p.b1 * p.lam)


def compute_varpi(p: Params) -> tuple[float, float, float, float]:
    """All four stability constants; raises if either equilibrium is unavailable."""
    w1, w2 = varpi_local(p)
    return w1, w2, varpi3(p), varpi3_bar(p)


def _coupling(p: Params, w1: float, w2: float) -> tuple[float, float]:
    return p.b1 * p.l**2 * w1 + p.a2 * p.k**2 * w2, 2 * p.a2 * p.b1 * p.k * p.l


def delta_interval(p: Params, case: Case) -> tuple[float, float]:
    """Open interval of admissible weights for the signal term of the Lyapunov functional."""
    _check_case(case)
    w1, w2 = varpi_local(p)
    lhs, rhs = _coupling(p, w1, w2)
    denom = lhs - rhs
    if not denom > 0:
        raise EmptyWindow("signal coupling condition fails; no admissible weight")
    hi = 4 * p.lam * p.a2 * (w1 * w2 - p.b1 * p.a2) / denom
    if case == "weak":
        eq = coexistence_equilibrium(p)
        lo = (p.d1 * p.a2 * p.chi2**2 * eq.v + p.d2 * p.b1 * p.chi1**2 * eq.u) / (
            4 * p.d1 * p.d2 * p.d3 * p.b1
        )
    else:
        eq = semitrivial_equilibrium(p)
        lo = p.a2 * p.chi2**2 * eq.v / (4 * p.d2 * p.d3 * p.b1)
    if not lo < hi:
        raise EmptyWindow(f"admissible weight window ({lo!r}, {hi!r}) is empty")
    return lo, hi


def build_matrices(p: Params, delta: float, case: Case) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic forms bounding the Lyapunov dissipation from below.

    ``P`` acts on the deviations ``(u - u_e, v - v_e, w - w_e)``; ``S`` acts on the
    normalised gradients (3x3 for coexistence, 2x2 for exclusion since the first
    species carries no log term there).
    """
    _check_case(case)
    if not delta > 0:
        raise ValueError("delta must be positive")
    w1, w2 = varpi_local(p)
    P = np.array(
        [
            [w1, p.a2, -p.k * delta / 2],
            [p.a2, p.a2 * w2 / p.b1, -p.l * delta / 2],
            [-p.k * delta / 2, -p.l * delta / 2, p.lam * delta],
        ]
    )
    r = p.a2 / p.b1
    if case == "weak":
        eq = coexistence_equilibrium(p)
        S = np.array(
            [
                [p.d1 * eq.u, 0.0, -p.chi1 * eq.u / 2],
                [0.0, r * p.d2 * eq.v, -r * p.chi2 * eq.v / 2],
                [-p.chi1 * eq.u / 2, -r * p.chi2 * eq.v / 2, p.d3 * delta],
            ]
        )
    else:
        eq = semitrivial_equilibrium(p)
        S = np.array(
            [
                [r * p.d2 * eq.v, -r * p.chi2 * eq.v / 2],
                [-r * p.chi2 * eq.v / 2, p.d3 * delta],
            ]
        )
    return P, S


def is_positive_definite(M: np.ndarray, rtol: float = 1e-12) -> tuple[bool, list[float]]:
    """Sylvester's criterion on the leading principal minors."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > rtol * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    minors = [float(np.linalg.det(M[:j, :j])) for j in range(1, M.shape[0] + 1)]
    return all(m > 0 for m in minors), minors


def check_stability(
    p: Params, case: Case
) -> tuple[HypothesisReport, StabilityCertificate | None]:
    """Check the global-stability hypotheses and, if they hold, build a certificate.

    Nonlocal coefficients must be nonnegative. The certificate is ``None`` when
    the report fails.
    """
    _check_case(case)
    if min(p.a3, p.a4, p.b3, p.b4) < 0:
        raise RegimeMismatch("stability analysis requires a3, a4, b3, b4 >= 0")
    regime = classify_regime(p).regime
    wanted = Regime.WEAK if case == "weak" else Regime.STRONGLY_ASYMMETRIC
    if regime is not wanted:
        raise RegimeMismatch(f"case {case!r} needs regime {wanted.value}, got {regime.value}")

    w1, w2 = varpi_local(p)
    lhs, rhs = _coupling(p, w1, w2)
    report = HypothesisReport()
    if case == "asymmetric":
        report.add("varpi1_positive", w1, 0.0)
    report.add("signal_coupling", lhs, rhs)
    w3 = varpi3(p) if case == "weak" else varpi3_bar(p)
    report.add("competition_product", w1 * w2, p.a2 * p.b1 + (lhs - rhs) * w3)
    if not report.overall:
        return report, None

    lo, hi = delta_interval(p, case)
    delta = 0.5 * (lo + hi)
    P, S = build_matrices(p, delta, case)
    pd_P, minors_P = is_positive_definite(P)
    pd_S, minors_S = is_positive_definite(S)
    cert = StabilityCertificate(
        case=case,
        varpi1=w1,
        varpi2=w2,
        varpi3=w3 if case == "weak" else None,
        varpi3_bar=w3 if case == "asymmetric" else None,
        delta_interval=(lo, hi),
        delta_chosen=delta,
        P_matrix=P,
        S_matrix=S,
        minors_P=minors_P,
        minors_S=minors_S,
        positive_definite=pd_P and pd_S,
    )
    if not cert.positive_definite:
        report.notes.append("hypotheses hold but a matrix failed Sylvester's test (roundoff?)")
    return report, cert


def escalate_local_competition(
    p: Params, case: Case, start: float | None = None, step: float = 0.5, limit: float = 1e6
) -> Params:
    """Raise ``a1`` and ``b2`` together in fixed increments until ``check_stability`` passes.

    Large local self-limitation is the generic way to satisfy both stability
    hypotheses. Regime mismatches at intermediate values are skipped.
    """
    value = max(p.a1, p.b2) if start is None else start
    while value <= limit:
        trial = replace(p, a1=value, b2=value)
        try:
            report, cert = check_stability(trial, case)
        except RegimeMismatch:
            report, cert = None, None
        if report is not None and report.overall and cert is not None and cert.positive_definite:
            return trial
        value += step
    raise RegimeMismatch(f"no a1 = b2 <= {limit:g} satisfies the {case} stability hypotheses")


def reduce_tello_winkler(mu1: float, mu2: float, abar1: float, abar2: float) -> dict[str, float]:
    """Coefficient patch turning the nonlocal model into the classical local one.

    Apply with ``dataclasses.replace(params, **patch)``.
    """
    if min(mu1, mu2, abar1, abar2) <= 0:
        raise ValueError("reduction inputs must be positive")
    return {
        "a0": mu1, "a1": mu1, "a2": mu1 * abar1,
        "b0": mu2, "b2": mu2, "b1": mu2 * abar2,
        "a3": 0.0, "a4": 0.0, "b3": 0.0, "b4": 0.0,
    }


def apply_patch(p: Params, patch: dict[str, float]) -> Params:
    return replace(p, **patch)


def _check_case(case: str) -> None:
    if case not in CASES:
        raise ValueError(f"case must be one of {CASES}, got {case!r}")
