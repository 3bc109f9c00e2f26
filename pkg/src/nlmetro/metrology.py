"""Nonlinear phase shifts and pure-state quantum Fisher information.

The phase shifter U(phi, k) = exp(i phi (a2^+ a2)^k) acts on mode 2.  For a
pure probe its QFI is four times the variance of n2^k; NOON and ECS states
also have closed forms that serve as independent checks of the Fock-space
numerics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, InfeasibleTargetError, PropertyViolation
from .fock import DEFAULT_TAIL_EPSILON, TwoModeState
from .states import _sign, aecs, ecs_norm_squared, h_coefficients, match_aecs

SERIES_TERM_BUDGET = 10_000


@dataclass(frozen=True)
class PhaseShift:
    phi: float
    k: int = 1

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"nonlinearity exponent k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))


@dataclass(frozen=True)
class QfiReport:
    qfi: float
    delta_phi: float
    series_terms_used: int = 0
    truncation_error_estimate: float = 0.0

    @classmethod
    def from_qfi(cls, qfi: float, terms: int = 0, err: float = 0.0) -> "QfiReport":
        qfi = max(float(qfi), 0.0)
        dphi = 1.0 / math.sqrt(qfi) if qfi > 0 else math.inf
        return cls(qfi, dphi, terms, err)


def apply_phase(s: TwoModeState, p: PhaseShift) -> TwoModeState:
    """(1 x U(phi, k)) |s>."""
    n = np.arange(s.truncation.dim, dtype=float)
    phases = np.exp(1j * p.phi * n**p.k)
    return TwoModeState(s.coeffs * phases[None, :], s.truncation, s.tail)


def _variance(p: np.ndarray, x: np.ndarray) -> float:
    mean = math.fsum(p * x)
    return math.fsum(p * (x - mean) ** 2)


def pure_qfi(s: TwoModeState, k: int) -> QfiReport:
    """4 Var(n2^k) for a normalized pure two-mode state."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    p = s.mode_distribution(2)
    x = np.arange(p.shape[0], dtype=float) ** k
    qfi = 4.0 * _variance(p, x)
    # moments weighted by the dropped tail are at least cutoff^{2k} each
    err = 4.0 * s.tail * float(s.cutoff + 1) ** (2 * k)
    return QfiReport.from_qfi(qfi, terms=p.shape[0], err=err)


def noon_sensitivity(N: int, k: int) -> QfiReport:
    """Closed form for NOON(N): F = N^{2k}, delta phi = N^{-k}."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return QfiReport(float(N) ** (2 * k), float(N) ** (-k))


def _poisson_moment_series(alpha: float, power: int, rel_tol: float) -> tuple[float, int, float]:
    """sum_{n>=1} n^power e^{-a^2} a^{2n} / n!, with a ratio-test tail bound.

    Returns (sum, terms used, tail bound).
    """
    a2 = alpha * alpha
    la2 = math.log(a2)
    terms = []
    n = 1
    while n <= SERIES_TERM_BUDGET:
        lt = -a2 + n * la2 - math.lgamma(n + 1) + power * math.log(n)
        terms.append(math.exp(lt))
        # successive-term ratio a^2/(n+1) (1+1/n)^power, itself decreasing in n
        ratio = a2 / (n + 1) * (1.0 + 1.0 / n) ** power
        if ratio < 1.0:
            bound = terms[-1] * ratio / (1.0 - ratio)
            total = math.fsum(terms)
            if bound <= rel_tol * total:
                return total, n, bound
        n += 1
    raise ConvergenceError(f"moment series for alpha={alpha}, power={power} exceeded {SERIES_TERM_BUDGET} terms")


def ecs_moment_series(alpha: float, parity: str, k: int, rel_tol: float = 1e-16) -> float:
    """<n2^k> of ECS(alpha, parity): f sum n^k alpha^{2n}/n!, f = e^{-alpha^2} N^2."""
    if k == 0:
        return 1.0
    total, _, _ = _poisson_moment_series(alpha, k, rel_tol)
    return ecs_norm_squared(alpha, parity) * total


def ecs_qfi_series(alpha: float, parity: str, k: int, rel_tol: float = 1e-15) -> QfiReport:
    """QFI of ECS(alpha, parity) under U(phi, k) from the two Poisson-moment series."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    n2 = ecs_norm_squared(alpha, parity)
    s2k, t2k, b2k = _poisson_moment_series(alpha, 2 * k, rel_tol)
    sk, tk, bk = _poisson_moment_series(alpha, k, rel_tol)
    qfi = 4.0 * n2 * (s2k - n2 * sk * sk)
    err = 4.0 * n2 * (b2k + 2 * n2 * sk * bk)
    return QfiReport.from_qfi(qfi, terms=max(t2k, tk), err=err)


def ecs_mean_photon(alpha: float, parity: str) -> float:
    """N^2 alpha^2, the mode-2 mean photon number of ECS(alpha, parity)."""
    return ecs_norm_squared(alpha, parity) * alpha * alpha


def match_alpha(nbar: float, parity: str, tol: float = 1e-12) -> float:
    """ECS amplitude whose mode-2 mean photon number equals ``nbar``.

    The odd ECS mean tends to 1/2 as alpha -> 0, so targets nbar <= 1/2 are
    rejected for parity '-'.
    """
    sign = _sign(parity)
    floor = 0.5 if sign < 0 else 0.0
    if not nbar > floor:
        raise InfeasibleTargetError(f"ECS{'-' if sign < 0 else '+'} cannot reach mean photon number {nbar} (needs > {floor})")
    f = lambda a: ecs_mean_photon(a, parity) - nbar
    lo, hi = 1e-6, 1.0
    while f(hi) < 0:
        hi *= 2.0
    if f(lo) > 0:
        # only reachable for parity '+' with nbar below ~5e-13
        lo = 1e-300
    grid = np.linspace(lo, hi, 65)
    vals = np.array([ecs_mean_photon(a, parity) for a in grid])
    if not np.all(np.diff(vals) > 0):
        raise ConvergenceError("mean photon number is not monotone on the bracket")
    root = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(root)) > max(tol, 4 * np.finfo(float).eps * nbar):
        raise ConvergenceError(f"alpha match for nbar={nbar} missed by {f(root):.3e}")
    return root


def aecs_moment(s: TwoModeState, k: int) -> float:
    """<n2^k> of an antisymmetric state from its H coefficients: sum |H|^2 (m^k + m'^k)."""
    terms = [abs(h) ** 2 * (m**k + mp**k) for m, mp, h in h_coefficients(s)]
    return math.fsum(terms)


@dataclass(frozen=True)
class SensitivityRow:
    N: int
    nbar: float
    noon: float
    ecs_minus: float | None
    ecs_plus: float
    aecs: float | None = None
    alpha_minus: float | None = None
    alpha_plus: float | None = None
    alpha_a: float | None = None

    @property
    def diff_noon_ecs_minus(self) -> float | None:
        return None if self.ecs_minus is None else self.noon - self.ecs_minus

    @property
    def ordered(self) -> bool:
        # rows without a feasible odd ECS only compare NOON with the even ECS
        if self.ecs_minus is None:
            return self.noon >= self.ecs_plus
        return self.noon >= self.ecs_minus >= self.ecs_plus


def aecs_qfi(nbar: float, k: int, tail_epsilon: float = DEFAULT_TAIL_EPSILON) -> tuple[QfiReport, float]:
    """QFI of the AECS matched to ``nbar``; returns (report, alpha_A)."""
    a0 = match_aecs(nbar)
    return pure_qfi(aecs(a0, tail_epsilon=tail_epsilon), k), math.sqrt(2.0) * a0


def sensitivity_inequality_check(N_max: int, k: int, include_aecs: bool = False, strict: bool = True) -> list[SensitivityRow]:
    """Sensitivity table at matched mean photon number N/2 for N = 1..N_max.

    With ``strict`` a row violating delta_N >= delta_E- >= delta_E+ raises
    ``PropertyViolation``.
    """
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    rows = []
    for N in range(1, N_max + 1):
        nbar = N / 2
        ap = match_alpha(nbar, "+")
        dp = ecs_qfi_series(ap, "+", k).delta_phi
        try:
            am = match_alpha(nbar, "-")
            dm = ecs_qfi_series(am, "-", k).delta_phi
        except InfeasibleTargetError:
            am = dm = None
        da = aa = None
        if include_aecs:
            try:
                rep, aa = aecs_qfi(nbar, k)
                da = rep.delta_phi
            except InfeasibleTargetError:
                pass
        row = SensitivityRow(N, nbar, noon_sensitivity(N, k).delta_phi, dm, dp, da, am, ap, aa)
        if strict and not row.ordered:
            raise PropertyViolation(f"ordering violated at N={N}, k={k}: {row}")
        rows.append(row)
    return rows
