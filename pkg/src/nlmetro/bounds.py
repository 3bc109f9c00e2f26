"""Closed-form lossy phase-estimation bounds from photon-number moments.

Loss is a beam splitter of transmission T on mode 2, placed after the phase
shifter.  ``cq1`` and ``cq2`` are upper bounds on the lossy QFI for k = 1 and
k = 2 built from <n>, <n^2>, <n^3>, <n^4> of mode 2 at the shifter input;
1/sqrt(C) is then a lower bound on the phase uncertainty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import PropertyViolation
from .fock import TwoModeState, number_moment
from .metrology import ecs_moment_series, aecs_moment
from .states import Family, StateSpec


@dataclass(frozen=True)
class MomentSet:
    m1: float
    m2: float
    m3: float
    m4: float

    def __post_init__(self):
        tol = 1e-9 * max(1.0, abs(self.m4))
        if self.m1 < -tol or self.m2 < self.m1**2 - tol * max(1.0, self.m2) or self.m4 < self.m2**2 - tol:
            raise ValueError(f"inconsistent moments {self}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.m1, self.m2, self.m3, self.m4)


@dataclass(frozen=True)
class LossModel:
    transmission: float

    def __post_init__(self):
        if not 0.0 <= self.transmission <= 1.0:
            raise ValueError(f"transmission must lie in [0, 1], got {self.transmission!r}")


def _moments_from_state(s) -> MomentSet:
    return MomentSet(*(number_moment(s, 2, j) for j in range(1, 5)))


def moments_of(spec: StateSpec | TwoModeState, cross_check: bool = True, rel_tol: float = 1e-8) -> MomentSet:
    """First four mode-2 photon-number moments of a probe.

    NOON uses N^k/2, ECS the Poisson series, AECS the H-coefficient sum;
    anything else (including explicit states) the Fock-space moments.  With
    ``cross_check`` the family formula is compared with the Fock-space moments
    of the built state.
    """
    if isinstance(spec, TwoModeState):
        return _moments_from_state(spec)
    fam = spec.family
    state = None
    if fam is Family.NOON:
        ms = MomentSet(*(spec.N**j / 2.0 for j in range(1, 5)))
    elif fam in (Family.ECS_PLUS, Family.ECS_MINUS):
        parity = "+" if fam is Family.ECS_PLUS else "-"
        ms = MomentSet(*(ecs_moment_series(spec.alpha, parity, j) for j in range(1, 5)))
    elif fam is Family.AECS:
        state = spec.build()
        ms = MomentSet(*(aecs_moment(state, j) for j in range(1, 5)))
    else:
        # single-mode families are taken as the mode-2 input
        return MomentSet(*(number_moment(spec.build(), 1, j) for j in range(1, 5)))
    if cross_check:
        state = state if state is not None else spec.build()
        fock_ms = _moments_from_state(state)
        for a, b in zip(ms.as_tuple(), fock_ms.as_tuple()):
            if abs(a - b) > rel_tol * max(1.0, abs(a)):
                raise PropertyViolation(f"{spec.label()}: closed-form moments {ms} disagree with Fock moments {fock_ms}")
    return ms


def _t(loss) -> float:
    return loss.transmission if isinstance(loss, LossModel) else LossModel(float(loss)).transmission


def cq1(m: MomentSet, loss: LossModel | float) -> float:
    """4 [T^2 (<n^2> - <n>^2) + T (1 - T) <n>]."""
    t = _t(loss)
    return 4.0 * t * (m.m1 + t * (m.m2 - m.m1**2 - m.m1))


def cq2(m: MomentSet, loss: LossModel | float) -> float:
    """k = 2 bound polynomial, evaluated in Horner form in T.

    4 [T^4 <n^4> + 6 T^3 (1-T) <n^3> + T^2 (1-T)(3-11T) <n^2> + T (1-T)(1-6T+6T^2) <n>
       - (T^4 <n^2>^2 + 2 T^3 (1-T) <n><n^2> + T^2 (1-T)^2 <n>^2)]
    """
    t = _t(loss)
    n1, n2, n3, n4 = m.as_tuple()
    c1 = n1
    c2 = 3 * n2 - 7 * n1 - n1 * n1
    c3 = 6 * n3 - 14 * n2 + 12 * n1 - 2 * n1 * n2 + 2 * n1 * n1
    c4 = (n4 - 6 * n3 + 11 * n2 - 6 * n1) - (n2 - n1) ** 2
    return 4.0 * t * (c1 + t * (c2 + t * (c3 + t * c4)))


def cq(m: MomentSet, loss: LossModel | float, k: int) -> float:
    if k == 1:
        return cq1(m, loss)
    if k == 2:
        return cq2(m, loss)
    raise ValueError(f"closed-form lossy bound exists only for k in (1, 2), got {k}")


def lossy_sensitivity(spec: StateSpec | TwoModeState | MomentSet, k: int, loss: LossModel | float) -> float:
    """1/sqrt(C^Q_k): lower bound on delta phi; +inf when the bound vanishes."""
    m = spec if isinstance(spec, MomentSet) else moments_of(spec)
    c = cq(m, loss, k)
    return 1.0 / math.sqrt(c) if c > 0 else math.inf
