"""Probe-state constructors.

Every constructor takes an optional :class:`~nlmetro.fock.Truncation`.  With
``trunc=None`` the cutoff is chosen adaptively: start from a family-specific
guess and double until the discarded tail drops below ``tail_epsilon``.  With
an explicit truncation the tail is checked and ``TruncationError`` raised if
the cutoff is too small.

Returned states are normalized and phase-fixed so the first significant
amplitude is real positive (see :func:`nlmetro.fock.fix_global_phase`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize, special

from .errors import (
    DimensionError,
    InfeasibleTargetError,
    NotAntisymmetricError,
    PreparationError,
    TruncationError,
    UndefinedStateError,
)
from .fock import (
    DEFAULT_TAIL_EPSILON,
    MAX_CUTOFF,
    SingleModeState,
    Truncation,
    TwoModeState,
    annihilate,
    beam_splitter,
    fidelity,
    fix_global_phase,
    normalize,
    tensor,
    vacuum,
)


class Family(str, enum.Enum):
    NOON = "NOON"
    ECS_PLUS = "ECS_plus"
    ECS_MINUS = "ECS_minus"
    AECS = "AECS"
    COHERENT = "Coherent"
    CSS_PLUS = "CSS_plus"
    CSS_MINUS = "CSS_minus"
    SQUEEZED_VACUUM = "SqueezedVacuum"
    FOCK = "Fock"


@dataclass(frozen=True)
class StateSpec:
    """Symbolic probe-state descriptor.

    ``N`` is used by NOON and Fock, ``alpha`` by the coherent/cat/ECS families,
    ``alpha0`` by AECS (the amplitude fed into the 50:50 splitter), ``r`` by
    squeezed vacuum.
    """

    family: Family
    N: int | None = None
    alpha: float | None = None
    alpha0: float | None = None
    r: float | None = None

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam in (Family.NOON, Family.FOCK):
            if self.N is None or int(self.N) != self.N:
                raise ValueError(f"{fam.value} needs an integer N")
            if self.N < (1 if fam is Family.NOON else 0):
                raise ValueError(f"{fam.value} needs N >= {1 if fam is Family.NOON else 0}, got {self.N}")
        elif fam in (Family.ECS_PLUS, Family.ECS_MINUS):
            if self.alpha is None or not self.alpha > 0:
                raise UndefinedStateError(f"{fam.value} needs alpha > 0, got {self.alpha!r}")
        elif fam is Family.AECS:
            if self.alpha0 is None or not self.alpha0 > 0:
                raise UndefinedStateError(f"AECS needs alpha0 > 0, got {self.alpha0!r}")
        elif fam in (Family.COHERENT, Family.CSS_PLUS, Family.CSS_MINUS):
            if self.alpha is None or self.alpha < 0:
                raise ValueError(f"{fam.value} needs alpha >= 0, got {self.alpha!r}")
            if fam is Family.CSS_MINUS and self.alpha == 0:
                raise UndefinedStateError("odd cat state is undefined at alpha = 0")
        elif fam is Family.SQUEEZED_VACUUM:
            if self.r is None or self.r < 0:
                raise ValueError(f"squeezed vacuum needs r >= 0, got {self.r!r}")

    @property
    def two_mode(self) -> bool:
        return self.family in (Family.NOON, Family.ECS_PLUS, Family.ECS_MINUS, Family.AECS)

    def label(self) -> str:
        fam = self.family
        if fam in (Family.NOON, Family.FOCK):
            return f"{fam.value}(N={self.N})"
        if fam is Family.AECS:
            return f"AECS(alpha0={self.alpha0:.12g})"
        if fam is Family.SQUEEZED_VACUUM:
            return f"SqueezedVacuum(r={self.r:.12g})"
        return f"{fam.value}(alpha={self.alpha:.12g})"

    def build(self, trunc: Truncation | None = None, tail_epsilon: float = DEFAULT_TAIL_EPSILON):
        fam = self.family
        kw = dict(trunc=trunc, tail_epsilon=tail_epsilon)
        if fam is Family.NOON:
            return noon(self.N, **kw)
        if fam is Family.ECS_PLUS:
            return ecs(self.alpha, "+", **kw)
        if fam is Family.ECS_MINUS:
            return ecs(self.alpha, "-", **kw)
        if fam is Family.AECS:
            return aecs(self.alpha0, **kw)
        if fam is Family.COHERENT:
            return coherent(self.alpha, **kw)
        if fam is Family.CSS_PLUS:
            return css(self.alpha, "+", **kw)
        if fam is Family.CSS_MINUS:
            return css(self.alpha, "-", **kw)
        if fam is Family.SQUEEZED_VACUUM:
            return squeezed_vacuum(self.r, **kw)
        t = trunc or Truncation(self.N, tail_epsilon)
        from .fock import fock

        return fock(self.N, t)


@dataclass(frozen=True)
class PreparationReport:
    state: SingleModeState | TwoModeState
    success_probability: float = 1.0
    fidelity_to_ideal: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.success_probability <= 1.0 + 1e-12:
            raise ValueError(f"success probability {self.success_probability} outside [0, 1]")


def _sign(parity: str) -> int:
    if parity in ("+", "even", 1):
        return 1
    if parity in ("-", "odd", -1):
        return -1
    raise ValueError(f"parity must be '+' or '-', got {parity!r}")


# --------------------------------------------------------------------------
# truncation plumbing

def _tail_sum(log_prob: Callable[[np.ndarray], np.ndarray], start: int, chunk: int = 256) -> float:
    """Sum ``exp(log_prob(n))`` for n >= start until the terms are negligible."""
    parts = []
    n0 = start
    for _ in range(10_000):
        n = np.arange(n0, n0 + chunk)
        lp = log_prob(n)
        terms = np.exp(lp)
        parts.append(math.fsum(terms))
        if lp[-1] < -745.0 or (np.all(np.diff(lp) < 0) and terms[-1] < 1e-30 * max(math.fsum(parts), 1e-300)):
            break
        n0 += chunk
    return math.fsum(parts)


def _resolve(trunc: Truncation | None, tail_epsilon: float, start: int, tail_of: Callable[[int], float], what: str) -> tuple[Truncation, float]:
    if trunc is not None:
        tail = tail_of(trunc.cutoff)
        trunc.admit(tail, what)
        return trunc, tail
    cutoff = max(int(start), 1)
    while True:
        tail = tail_of(cutoff)
        if tail < tail_epsilon:
            return Truncation(cutoff, tail_epsilon), tail
        if cutoff >= MAX_CUTOFF:
            raise TruncationError(f"{what}: tail {tail:.3e} still above {tail_epsilon:.1e} at cutoff {cutoff}", cutoff=cutoff, tail=tail)
        cutoff = min(2 * cutoff, MAX_CUTOFF)


def _coherent_start(alpha: float) -> int:
    a = abs(alpha)
    return math.ceil(a * a + 10 * a + 20)


def _log_poisson(alpha: float):
    a2 = alpha * alpha

    def lp(n):
        n = np.asarray(n, dtype=float)
        return -a2 + n * math.log(a2) - special.gammaln(n + 1) if a2 > 0 else np.where(n == 0, 0.0, -np.inf)

    return lp


def _coherent_amplitudes(alpha: float, dim: int) -> np.ndarray:
    n = np.arange(dim, dtype=float)
    a = abs(alpha)
    if a == 0.0:
        amps = np.zeros(dim)
        amps[0] = 1.0
        return amps.astype(np.complex128)
    mag = np.exp(-0.5 * a * a + n * math.log(a) - 0.5 * special.gammaln(n + 1))
    return (mag * np.sign(alpha) ** n).astype(np.complex128)


def _finish_single(amps: np.ndarray, trunc: Truncation, tail: float) -> SingleModeState:
    s = normalize(SingleModeState(amps, trunc, tail))
    return SingleModeState(fix_global_phase(s.amplitudes), trunc, tail)


def _finish_two(coeffs: np.ndarray, trunc: Truncation, tail: float) -> TwoModeState:
    s = normalize(TwoModeState(coeffs, trunc, tail))
    return TwoModeState(fix_global_phase(s.coeffs), trunc, tail)


# --------------------------------------------------------------------------
# single-mode families

def coherent(alpha: float, trunc: Truncation | None = None, tail_epsilon: float = DEFAULT_TAIL_EPSILON) -> SingleModeState:
    """Coherent state |alpha> for real alpha >= 0."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    trunc, tail = _resolve(
        trunc, tail_epsilon, _coherent_start(alpha),
        lambda c: float(special.gammainc(c + 1, alpha * alpha)) if alpha else 0.0,
        "coherent",
    )
    return _finish_single(_coherent_amplitudes(alpha, trunc.dim), trunc, tail)


def _squeezed_log_prob(r: float):
    # P(2j) = sech r * (2j)! / (4^j j!^2) * tanh^{2j} r ; odd entries vanish
    th2 = math.tanh(r) ** 2
    lsech = -math.log(math.cosh(r))

    def lp(n):
        n = np.asarray(n, dtype=float)
        j = np.floor(n / 2)
        val = lsech + special.gammaln(2 * j + 1) - 2 * j * math.log(2) - 2 * special.gammaln(j + 1) + j * math.log(th2)
        return np.where(n % 2 == 0, val, -np.inf)

    return lp


def squeezed_vacuum(r: float, trunc: Truncation | None = None, tail_epsilon: float = DEFAULT_TAIL_EPSILON) -> SingleModeState:
    """S(r)|0> with S(r) = exp[-(r/2)(a^2 - a+^2)]; even Fock support, coefficients ~ (+tanh r)^j."""
    if r < 0:
        raise ValueError(f"squeezing r must be >= 0, got {r}")
    if r == 0:
        return vacuum(trunc or Truncation(1, tail_epsilon))
    mean = math.sinh(r) ** 2
    spread = math.sqrt(2.0) * math.sinh(r) * math.cosh(r)
    lp = _squeezed_log_prob(r)
    trunc, tail = _resolve(trunc, tail_epsilon, math.ceil(mean + 10 * spread + 20), lambda c: _tail_sum(lp, c + 1), "squeezed_vacuum")
    n = np.arange(trunc.dim)
    amps = np.where(n % 2 == 0, np.exp(0.5 * lp(n)), 0.0)
    return _finish_single(amps.astype(np.complex128), trunc, tail)


def css(alpha: float, parity: str, trunc: Truncation | None = None, tail_epsilon: float = DEFAULT_TAIL_EPSILON) -> SingleModeState:
    """Cat state N(|alpha> +/- |-alpha>) with N = 1/sqrt(2(1 +/- exp(-2 alpha^2)))."""
    sign = _sign(parity)
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if alpha == 0:
        if sign < 0:
            raise UndefinedStateError("odd cat state is undefined at alpha = 0")
        return vacuum(trunc or Truncation(1, tail_epsilon))
    # P(n) = 2 Poisson(n) / (1 +/- e^{-2a^2}) on the allowed parity
    norm_lp = math.log(2.0) - math.log(1 + math.exp(-2 * alpha * alpha) if sign > 0 else -math.expm1(-2 * alpha * alpha))
    base = _log_poisson(alpha)
    keep = 0 if sign > 0 else 1

    def lp(n):
        n = np.asarray(n)
        return np.where(n % 2 == keep, base(n) + norm_lp, -np.inf)

    trunc, tail = _resolve(trunc, tail_epsilon, _coherent_start(alpha), lambda c: _tail_sum(lp, c + 1), "css")
    amps = _coherent_amplitudes(alpha, trunc.dim)
    n = np.arange(trunc.dim)
    amps = np.where(n % 2 == keep, 2.0 * amps, 0.0)
    return _finish_single(amps, trunc, tail)


def _acss_log_prob(r0: float):
    # P(2k+1) = (1-x)^{3/2} (2k+1)! / (4^k k!^2) x^k,  x = tanh^2 r0
    x = math.tanh(r0) ** 2
    lnorm = 1.5 * math.log1p(-x)

    def lp(n):
        n = np.asarray(n, dtype=float)
        k = np.maximum(np.floor((n - 1) / 2), 0.0)
        val = lnorm + special.gammaln(2 * k + 2) - 2 * k * math.log(2) - 2 * special.gammaln(k + 1) + k * math.log(x)
        return np.where(n % 2 == 1, val, -np.inf)

    return lp


def acss_closed_form(r0: float, trunc: Truncation | None = None, tail_epsilon: float = DEFAULT_TAIL_EPSILON) -> SingleModeState:
    """Photon-subtracted squeezed vacuum a S(r0)|0>, normalized.

    Amplitudes f_r sqrt((2k+1)!)/(2^k k!) tanh^k(r0) on |2k+1>, f_r = (1 - tanh^2 r0)^{3/4}.
    """
    if r0 < 0:
        raise ValueError(f"r0 must be >= 0, got {r0}")
    if r0 == 0:
        raise PreparationError("a S(0)|0> = a|0> = 0: zero subtraction weight at r0 = 0")
    mean = 3 * math.sinh(r0) ** 2 + 1
    lp = _acss_log_prob(r0)
    trunc, tail = _resolve(trunc, tail_epsilon, math.ceil(mean + 10 * math.sqrt(mean * (mean + 1)) + 20), lambda c: _tail_sum(lp, c + 1), "acss")
    n = np.arange(trunc.dim)
    amps = np.where(n % 2 == 1, np.exp(0.5 * lp(n)), 0.0)
    return _finish_single(amps.astype(np.complex128), trunc, tail)


def cat_matched_squeezing(alpha0: float) -> float:
    """Squeezing r0 maximizing the overlap of a S(r0)|0> with the odd cat of amplitude alpha0.

    Closed form r0 = asinh(2 alpha0^2 / 3) / 2.
    """
    return 0.5 * math.asinh(2.0 * alpha0 * alpha0 / 3.0)


def photon_subtract(s: SingleModeState, eta: float) -> PreparationReport:
    """Tap ``s`` on a beam splitter of transmission eta and herald one reflected photon.

    Ideal projective single-photon detection on the vacuum-fed port.  The
    reported fidelity compares against normalize(a|s>), the eta -> 1 limit.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    mixed = beam_splitter(tensor(s, vacuum(s.truncation)), eta)
    cond = mixed.coeffs[:, 1]
    weight = math.fsum(np.abs(cond) ** 2)
    if weight == 0.0:
        raise PreparationError("photon subtraction heralds with zero probability")
    state = _finish_single(cond, s.truncation, s.tail)
    ideal, ideal_w = annihilate(s)
    fid = fidelity(state, normalize(ideal)) if ideal_w > 0 else None
    return PreparationReport(state, min(weight, 1.0), fid)


# --------------------------------------------------------------------------
# two-mode families

def noon(N: int, trunc: Truncation | None = None, tail_epsilon: float = DEFAULT_TAIL_EPSILON) -> TwoModeState:
    """(|N,0> + |0,N>)/sqrt(2)."""
    if int(N) != N or N < 1:
        raise ValueError(f"NOON needs integer N >= 1, got {N!r}")
    trunc = trunc or Truncation(int(N), tail_epsilon)
    if N > trunc.cutoff:
        raise DimensionError(f"NOON({N}) does not fit cutoff {trunc.cutoff}")
    c = np.zeros((trunc.dim, trunc.dim), dtype=np.complex128)
    c[N, 0] = c[0, N] = 1 / math.sqrt(2.0)
    return TwoModeState(c, trunc)


def ecs_norm_squared(alpha: float, parity: str) -> float:
    """(N_alpha^{+/-})^2 = 1 / (2 (1 +/- e^{-alpha^2}))."""
    a2 = alpha * alpha
    if _sign(parity) > 0:
        return 1.0 / (2.0 * (1.0 + math.exp(-a2)))
    return 1.0 / (2.0 * -math.expm1(-a2))


def ecs(alpha: float, parity: str, trunc: Truncation | None = None, tail_epsilon: float = DEFAULT_TAIL_EPSILON) -> TwoModeState:
    """Entangled coherent state N(|alpha>|0> +/- |0>|alpha>)."""
    sign = _sign(parity)
    if not alpha > 0:
        raise UndefinedStateError(f"ECS needs alpha > 0, got {alpha}")
    n2 = ecs_norm_squared(alpha, parity)
    trunc, tail = _resolve(
        trunc, tail_epsilon, _coherent_start(alpha),
        lambda c: 4.0 * n2 * float(special.gammainc(c + 1, alpha * alpha)),
        "ecs",
    )
    amp = _coherent_amplitudes(alpha, trunc.dim)
    c = np.zeros((trunc.dim, trunc.dim), dtype=np.complex128)
    c[:, 0] += amp
    c[0, :] += sign * amp
    return _finish_two(c, trunc, tail)


def _aecs_at(alpha0: float, r0: float, trunc: Truncation) -> TwoModeState:
    a = acss_closed_form(r0, trunc)
    b = coherent(alpha0, trunc)
    out = beam_splitter(tensor(a, b), 0.5)
    return _finish_two(out.coeffs, trunc, out.tail)


def aecs(alpha0: float, trunc: Truncation | None = None, tail_epsilon: float = DEFAULT_TAIL_EPSILON, r0: float | None = None) -> TwoModeState:
    """Approximate odd ECS: a S(r0)|0> and |alpha0> mixed on a 50:50 splitter.

    ``r0`` defaults to :func:`cat_matched_squeezing`.  The output approximates
    the odd ECS of amplitude alpha_A = sqrt(2) alpha0 and is antisymmetric
    under mode exchange.
    """
    if not alpha0 > 0:
        raise UndefinedStateError(f"AECS needs alpha0 > 0, got {alpha0}")
    r0 = cat_matched_squeezing(alpha0) if r0 is None else r0
    if trunc is not None:
        return _aecs_at(alpha0, r0, trunc)
    mean = 3 * math.sinh(r0) ** 2 + 1
    cutoff = max(_coherent_start(math.sqrt(2.0) * alpha0), math.ceil(mean + 10 * math.sqrt(mean * (mean + 1)) + 20))
    while True:
        try:
            return _aecs_at(alpha0, r0, Truncation(cutoff, tail_epsilon))
        except TruncationError:
            if cutoff >= MAX_CUTOFF // 4:
                raise
            cutoff *= 2


def aecs_mean_photon(alpha0: float, r0: float | None = None) -> float:
    """Mode-2 mean photon number of the untruncated AECS.

    The odd input has zero field mean, so the 50:50 splitter averages the
    input photon numbers: (3 sinh^2 r0 + 1 + alpha0^2) / 2.
    """
    r0 = cat_matched_squeezing(alpha0) if r0 is None else r0
    return 0.5 * (3.0 * math.sinh(r0) ** 2 + 1.0 + alpha0 * alpha0)


def match_aecs(nbar: float, tol: float = 1e-12) -> float:
    """alpha0 whose AECS has mode-2 mean photon number ``nbar`` (bracketed root search)."""
    if not nbar > 0.5:
        raise InfeasibleTargetError(f"AECS mean photon number exceeds 1/2; target {nbar} unreachable")
    f = lambda a: aecs_mean_photon(a) - nbar
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    root = optimize.brentq(f, 1e-9, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(root)) > max(tol, 1e-12 * nbar):
        raise InfeasibleTargetError(f"AECS match for nbar={nbar} missed by {f(root):.3e}")
    return root


def h_coefficients(s: TwoModeState, tol: float = 1e-8) -> list[tuple[int, int, complex]]:
    """Antisymmetric-state coefficients H[m, m'] = C[m, m'] for m > m'.

    The state is sum H[m,m'] (|m,m'> - |m',m>), so sum 2|H|^2 = 1.
    """
    c = s.coeffs
    asym = float(np.max(np.abs(c + c.T)))
    if asym > tol:
        raise NotAntisymmetricError(f"state is not antisymmetric: max |C + C^T| = {asym:.3e}")
    d = s.truncation.dim
    return [(m, mp, complex(c[m, mp])) for m in range(1, d) for mp in range(m)]


def prepare_aecs(alpha0: float, eta: float | None = None, tail_epsilon: float = DEFAULT_TAIL_EPSILON) -> PreparationReport:
    """Run the AECS preparation pipeline and compare with the odd ECS of amplitude sqrt(2) alpha0.

    With ``eta`` the photon is subtracted from S(r0)|0> on a tap of
    transmission eta (heralded, finite success probability); without it the
    ideal annihilation is used.
    """
    ideal = aecs(alpha0, tail_epsilon=tail_epsilon)
    trunc = ideal.truncation
    if eta is None:
        state, p = ideal, 1.0
    else:
        r0 = cat_matched_squeezing(alpha0)
        sq = squeezed_vacuum(r0, trunc)
        sub = photon_subtract(sq, eta)
        mixed = beam_splitter(tensor(sub.state, coherent(alpha0, trunc)), 0.5)
        state, p = _finish_two(mixed.coeffs, trunc, mixed.tail), sub.success_probability
    target = ecs(math.sqrt(2.0) * alpha0, "-", trunc)
    return PreparationReport(state, p, fidelity(state, target))


def refined_peak(values: np.ndarray) -> float:
    """Peak position of a sampled profile, refined by a parabola through the top three samples.

    A plain argmax breaks ties toward the lower index (coherent |2> has equal
    amplitudes at m = 3 and 4); the refined position puts that peak at 3.5.
    """
    v = np.asarray(values, dtype=float)
    i = int(np.argmax(v))
    if 0 < i < v.size - 1:
        curv = v[i - 1] - 2 * v[i] + v[i + 1]
        if curv < 0:
            return i + 0.5 * (v[i - 1] - v[i + 1]) / curv
    return float(i)


def h_column_profile(s: TwoModeState, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """|H(m, 0)| of an antisymmetric state next to the coherent |alpha> amplitudes, m = 0..cutoff."""
    h = np.abs(s.coeffs[:, 0])
    coh = np.abs(coherent(alpha, Truncation(s.cutoff, s.truncation.tail_epsilon)).amplitudes)
    return h, coh


def tail_crossover(h: np.ndarray, ref: np.ndarray) -> int | None:
    """First index past the reference peak where ``h`` exceeds ``ref``, if any."""
    start = int(math.ceil(refined_peak(ref)))
    for m in range(start, min(h.size, ref.size)):
        if h[m] > ref[m]:
            return m
    return None
