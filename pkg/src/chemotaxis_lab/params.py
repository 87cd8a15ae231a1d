"""Model coefficients and the plain data records produced by the analysis routines."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ValidationError

# a3, a4, b3, b4 may take either sign; everything else is strictly positive.
POSITIVE_FIELDS = (
    "d1", "d2", "d3", "chi1", "chi2",
    "a0", "a1", "a2", "b0", "b1", "b2",
    "lam", "k", "l", "omega_measure",
)
SIGNED_FIELDS = ("a3", "a4", "b3", "b4")

# JSON spelling differs from the attribute name only for the decay rate.
_JSON_ALIASES = {"lam": "lambda"}


@dataclass(frozen=True)
class Params:
    d1: float
    d2: float
    d3: float
    chi1: float
    chi2: float
    a0: float
    a1: float
    a2: float
    a3: float
    a4: float
    b0: float
    b1: float
    b2: float
    b3: float
    b4: float
    lam: float
    k: float
    l: float
    omega_measure: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ValidationError("must be finite", f"params.{json_key(f.name)}")
            object.__setattr__(self, f.name, float(value))

    def validate(self) -> "Params":
        """Enforce the model sign conventions.

        Construction only checks finiteness so that degenerate cases (e.g. all
        kinetic coefficients switched off) stay expressible for the solver.
        """
        for name in POSITIVE_FIELDS:
            if not getattr(self, name) > 0:
                raise ValidationError("must be > 0", f"params.{json_key(name)}")
        return self

    def to_dict(self) -> dict[str, float]:
        return {json_key(k): v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "Params":
        names = {json_key(f.name): f.name for f in fields(cls)}
        unknown = sorted(set(data) - set(names))
        if unknown:
            raise ValidationError(f"unknown key {unknown[0]!r}", f"params.{unknown[0]}")
        missing = [k for k, name in names.items() if k not in data and name != "omega_measure"]
        if missing:
            raise ValidationError("missing", f"params.{missing[0]}")
        kwargs = {}
        for key, value in data.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError("must be a number", f"params.{key}")
            kwargs[names[key]] = value
        return cls(**kwargs)


def json_key(name: str) -> str:
    return _JSON_ALIASES.get(name, name)


class EquilibriumKind(str, enum.Enum):
    COEXISTENCE = "coexistence"
    SEMI_TRIVIAL = "semi-trivial"


@dataclass(frozen=True)
class Equilibrium:
    u: float
    v: float
    w: float
    kind: EquilibriumKind

    def __post_init__(self):
        if self.kind is EquilibriumKind.SEMI_TRIVIAL and self.u != 0.0:
            raise ValueError("semi-trivial equilibrium must have u == 0")
        if min(self.u, self.v, self.w) < 0:
            raise ValueError("equilibrium components must be nonnegative")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.u, self.v, self.w)


class Regime(str, enum.Enum):
    WEAK = "Weak"
    STRONGLY_ASYMMETRIC = "StronglyAsymmetric"
    FULL_STRONG = "FullStrong"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class RegimeClass:
    regime: Regime
    r_low: float
    r_mid: float
    r_high: float


@dataclass(frozen=True)
class ConditionRecord:
    id: str
    lhs: float
    rhs: float
    satisfied: bool
    margin: float


@dataclass
class HypothesisReport:
    conditions: list[ConditionRecord] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    def add(self, id: str, lhs: float, rhs: float) -> ConditionRecord:
        """Record the strict inequality ``lhs > rhs``."""
        rec = ConditionRecord(id, float(lhs), float(rhs), bool(lhs > rhs), float(lhs - rhs))
        self.conditions.append(rec)
        return rec

    def __getitem__(self, id: str) -> ConditionRecord:
        for c in self.conditions:
            if c.id == id:
                return c
        raise KeyError(id)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "conditions": [asdict(c) for c in self.conditions],
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class StabilityCertificate:
    case: str
    varpi1: float
    varpi2: float
    varpi3: float | None
    varpi3_bar: float | None
    delta_interval: tuple[float, float]
    delta_chosen: float
    P_matrix: np.ndarray
    S_matrix: np.ndarray
    minors_P: list[float]
    minors_S: list[float]
    positive_definite: bool

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "varpi1": self.varpi1,
            "varpi2": self.varpi2,
            "varpi3": self.varpi3,
            "varpi3_bar": self.varpi3_bar,
            "delta_interval": list(self.delta_interval),
            "delta_chosen": self.delta_chosen,
            "P_matrix": self.P_matrix.tolist(),
            "S_matrix": self.S_matrix.tolist(),
            "minors_P": list(self.minors_P),
            "minors_S": list(self.minors_S),
            "positive_definite": self.positive_definite,
        }
