"""Truncated Fock-space states and linear-optical primitives.

Single-mode states are amplitude vectors over |0>..|cutoff>, two-mode states
are coefficient matrices ``C[m, m']`` over |m>_1 |m'>_2.  Modes are numbered
1 and 2, matching the usual interferometer labelling where mode 2 carries the
phase shifter.

All sums that feed norms and moments are accumulated with ``math.fsum`` in
increasing Fock index so results are reproducible to the last bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, TruncationError

DEFAULT_TAIL_EPSILON = 1e-12
MAX_CUTOFF = 4096


@dataclass(frozen=True)
class Truncation:
    """Fock cutoff and the largest tail probability a state may drop."""

    cutoff: int
    tail_epsilon: float = DEFAULT_TAIL_EPSILON

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 0:
            raise ValueError(f"cutoff must be a non-negative integer, got {self.cutoff!r}")
        if not 0.0 < self.tail_epsilon < 1.0:
            raise ValueError(f"tail_epsilon must lie in (0, 1), got {self.tail_epsilon!r}")
        object.__setattr__(self, "cutoff", int(self.cutoff))

    @property
    def dim(self) -> int:
        return self.cutoff + 1

    def admit(self, tail: float, what: str = "state") -> None:
        """Raise ``TruncationError`` unless ``tail`` is below the permitted epsilon."""
        if not tail < self.tail_epsilon:
            raise TruncationError(
                f"{what}: probability beyond cutoff {self.cutoff} is {tail:.3e} "
                f">= tail_epsilon {self.tail_epsilon:.1e}; raise the cutoff",
                cutoff=self.cutoff,
                tail=tail,
            )


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SingleModeState:
    """Pure single-mode state; ``amplitudes[n] = <n|psi>``.

    ``tail`` records the probability discarded by truncation when the state
    was built (zero for states with finite support).
    """

    amplitudes: np.ndarray
    truncation: Truncation
    tail: float = field(default=0.0)

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1 or amps.shape[0] != self.truncation.dim:
            raise DimensionError(
                f"amplitude vector of shape {amps.shape} does not match cutoff {self.truncation.cutoff}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def cutoff(self) -> int:
        return self.truncation.cutoff

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_squared(self) -> float:
        return math.fsum(self.probabilities())

    def __repr__(self):
        return f"SingleModeState(cutoff={self.cutoff}, norm2={self.norm_squared():.12g})"


@dataclass(frozen=True, eq=False)
class TwoModeState:
    """Pure two-mode state with coefficients ``coeffs[m, m'] = <m, m'|psi>``."""

    coeffs: np.ndarray
    truncation: Truncation
    tail: float = field(default=0.0)

    def __post_init__(self):
        c = _frozen(self.coeffs)
        d = self.truncation.dim
        if c.shape != (d, d):
            raise DimensionError(f"coefficient matrix of shape {c.shape} does not match cutoff {d - 1}")
        object.__setattr__(self, "coeffs", c)

    @property
    def cutoff(self) -> int:
        return self.truncation.cutoff

    def probabilities(self) -> np.ndarray:
        return np.abs(self.coeffs) ** 2

    def norm_squared(self) -> float:
        return math.fsum(self.probabilities().ravel())

    def mode_distribution(self, mode: int) -> np.ndarray:
        """Photon-number distribution of one mode (1 or 2)."""
        p = self.probabilities()
        if mode == 1:
            return np.array([math.fsum(row) for row in p])
        if mode == 2:
            return np.array([math.fsum(col) for col in p.T])
        raise ValueError(f"mode must be 1 or 2, got {mode!r}")

    def __repr__(self):
        return f"TwoModeState(cutoff={self.cutoff}, norm2={self.norm_squared():.12g})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density operator over a single mode or the flattened two-mode basis.

    For two modes the flattened index is ``m * (cutoff + 1) + m'``.
    """

    entries: np.ndarray
    truncation: Truncation
    modes: int = 2

    def __post_init__(self):
        rho = _frozen(self.entries)
        d = self.truncation.dim ** self.modes
        if rho.shape != (d, d):
            raise DimensionError(f"density matrix of shape {rho.shape} does not match {self.modes} mode(s) at cutoff {self.truncation.cutoff}")
        object.__setattr__(self, "entries", rho)

    def trace(self) -> float:
        return math.fsum(np.real(np.diag(self.entries)))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.entries, self.entries)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def check(self, herm_tol: float = 1e-12, trace_tol: float = 1e-10, eig_tol: float = 1e-10) -> None:
        """Assert the density-matrix invariants; raises ``ValueError`` on failure."""
        rho = self.entries
        herm = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
        if herm > herm_tol:
            raise ValueError(f"not Hermitian: max deviation {herm:.3e}")
        if abs(self.trace() - 1.0) > trace_tol:
            raise ValueError(f"trace {self.trace():.15g} differs from 1")
        lo = self.eigenvalues().min()
        if lo < -eig_tol:
            raise ValueError(f"negative eigenvalue {lo:.3e}")


# --------------------------------------------------------------------------
# helpers

def fock(n: int, trunc: Truncation) -> SingleModeState:
    """Number state |n>."""
    if not 0 <= n <= trunc.cutoff:
        raise DimensionError(f"Fock index {n} outside 0..{trunc.cutoff}")
    amps = np.zeros(trunc.dim, dtype=np.complex128)
    amps[n] = 1.0
    return SingleModeState(amps, trunc)


def vacuum(trunc: Truncation) -> SingleModeState:
    return fock(0, trunc)


def fix_global_phase(arr: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Rotate ``arr`` so its first significant amplitude is real positive.

    Two-mode matrices are scanned with the mode-1 index running fastest,
    so |m, 0> components come before |0, m'> ones.
    """
    arr = np.asarray(arr, dtype=np.complex128)
    flat = arr.T.ravel() if arr.ndim == 2 else arr.ravel()
    mags = np.abs(flat)
    top = mags.max() if mags.size else 0.0
    if top == 0.0:
        return arr.copy()
    idx = int(np.argmax(mags > rel_tol * top))
    ref = flat[idx]
    return arr * (abs(ref) / ref)


def normalize(s):
    """Return ``s`` scaled to unit norm (global phase untouched)."""
    n2 = s.norm_squared()
    if n2 == 0.0:
        raise ValueError("cannot normalize the zero vector")
    scale = 1.0 / math.sqrt(n2)
    if isinstance(s, SingleModeState):
        return SingleModeState(s.amplitudes * scale, s.truncation, s.tail)
    return TwoModeState(s.coeffs * scale, s.truncation, s.tail)


def _data(s) -> np.ndarray:
    if isinstance(s, SingleModeState):
        return s.amplitudes
    if isinstance(s, TwoModeState):
        return s.coeffs
    raise TypeError(f"expected a pure state, got {type(s).__name__}")


def _same_space(a, b) -> None:
    if type(a) is not type(b):
        raise DimensionError(f"cannot combine {type(a).__name__} with {type(b).__name__}")
    if a.cutoff != b.cutoff:
        raise DimensionError(f"cutoff mismatch: {a.cutoff} vs {b.cutoff}")


def embed(s, cutoff: int, tail_epsilon: float | None = None):
    """Re-express ``s`` at another cutoff (zero padding, or trimming with a tail check)."""
    eps = s.truncation.tail_epsilon if tail_epsilon is None else tail_epsilon
    trunc = Truncation(cutoff, eps)
    data = _data(s)
    d = trunc.dim
    if isinstance(s, SingleModeState):
        out = np.zeros(d, dtype=np.complex128)
        keep = min(d, data.shape[0])
        out[:keep] = data[:keep]
        dropped = math.fsum(np.abs(data[keep:]) ** 2)
        tail = s.tail + dropped
        trunc.admit(tail, "embed")
        return SingleModeState(out, trunc, tail)
    out = np.zeros((d, d), dtype=np.complex128)
    keep = min(d, data.shape[0])
    out[:keep, :keep] = data[:keep, :keep]
    dropped = math.fsum((np.abs(data) ** 2).ravel()) - math.fsum((np.abs(out) ** 2).ravel())
    tail = s.tail + max(dropped, 0.0)
    trunc.admit(tail, "embed")
    return TwoModeState(out, trunc, tail)


# --------------------------------------------------------------------------
# operations

def inner_product(a, b) -> complex:
    """<a|b>."""
    _same_space(a, b)
    terms = np.conj(_data(a)).ravel() * _data(b).ravel()
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def fidelity(a, b) -> float:
    """|<a|b>|^2 for pure states."""
    return abs(inner_product(a, b)) ** 2


def tensor(a: SingleModeState, b: SingleModeState) -> TwoModeState:
    """|a>_1 |b>_2."""
    _same_space(a, b)
    return TwoModeState(np.outer(a.amplitudes, b.amplitudes), a.truncation, a.tail + b.tail)


def _next_sector(prev: np.ndarray, total: int, t: float, r: float) -> np.ndarray:
    """Beam-splitter block for ``total`` photons from the block for ``total - 1``.

    Columns index the input mode-1 photon number, rows the output one.  Uses
    the creation-operator substitution a1+ -> t a1+ - r a2+, a2+ -> r a1+ + t a2+.
    """
    j = np.arange(total, dtype=float)
    up1 = np.zeros((total + 1, total))
    up2 = np.zeros((total + 1, total))
    up1[1:] = np.sqrt(j + 1.0)[:, None] * prev
    up2[:-1] = np.sqrt(total - j)[:, None] * prev
    block = np.empty((total + 1, total + 1))
    block[:, 0] = (r * up1[:, 0] + t * up2[:, 0]) / math.sqrt(total)
    block[:, 1:] = (t * up1 - r * up2) / np.sqrt(np.arange(1, total + 1, dtype=float))
    return block


def beam_splitter_sectors(max_total: int, transmission: float):
    """Yield ``(M, U_M)`` for M = 0..max_total; each U_M is real orthogonal."""
    t = math.sqrt(transmission)
    r = math.sqrt(1.0 - transmission)
    block = np.ones((1, 1))
    yield 0, block
    for total in range(1, max_total + 1):
        block = _next_sector(block, total, t, r)
        yield total, block


def beam_splitter(s: TwoModeState, transmission: float, inverse: bool = False) -> TwoModeState:
    """Lossless two-mode beam splitter with intensity transmission ``transmission``.

    Heisenberg action a1 -> sqrt(T) a1 + sqrt(1-T) a2, a2 -> sqrt(T) a2 - sqrt(1-T) a1,
    so |1,0> -> sqrt(T)|1,0> - sqrt(1-T)|0,1>.  The Fock matrix is assembled per
    total-photon-number sector.  ``inverse=True`` applies the transpose.

    Output probability pushed beyond the cutoff is discarded and must stay
    below the truncation's tail epsilon.
    """
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {transmission!r}")
    c = s.cutoff
    coeffs = s.coeffs
    out = np.zeros_like(coeffs)
    lost = []
    for total, block in beam_splitter_sectors(2 * c, transmission):
        ms = np.arange(max(0, total - c), min(total, c) + 1)
        x = coeffs[ms, total - ms]
        if not np.any(x):
            continue
        u = block[ms, :].T if inverse else block[:, ms]
        y = u @ x
        js = np.arange(total + 1)
        inside = (js <= c) & (total - js <= c)
        out[js[inside], total - js[inside]] = y[inside]
        if not inside.all():
            lost.append(math.fsum(np.abs(y[~inside]) ** 2))
    tail = s.tail + math.fsum(lost)
    s.truncation.admit(tail, "beam_splitter output")
    return TwoModeState(out, s.truncation, tail)


def partial_trace(s, keep: int) -> DensityMatrix:
    """Reduced density matrix of mode ``keep`` (1 or 2)."""
    if keep not in (1, 2):
        raise ValueError(f"mode index must be 1 or 2, got {keep!r}")
    if isinstance(s, TwoModeState):
        c = s.coeffs
        rho = c @ c.conj().T if keep == 1 else c.T @ c.conj()
        return DensityMatrix(rho, s.truncation, modes=1)
    if isinstance(s, DensityMatrix):
        if s.modes != 2:
            raise ValueError("partial_trace needs a two-mode density matrix")
        d = s.truncation.dim
        r4 = s.entries.reshape(d, d, d, d)
        rho = np.einsum("ijkj->ik", r4) if keep == 1 else np.einsum("ijil->jl", r4)
        return DensityMatrix(rho, s.truncation, modes=1)
    raise TypeError(f"cannot trace {type(s).__name__}")


def number_moment(s, mode: int = 2, k: int = 1) -> float:
    """<(a_mode^+ a_mode)^k>; single-mode states ignore ``mode``."""
    if int(k) != k or k < 0:
        raise ValueError(f"moment order must be a non-negative integer, got {k!r}")
    if k == 0:
        return 1.0
    if isinstance(s, SingleModeState):
        p = s.probabilities()
    else:
        p = s.mode_distribution(mode)
    n = np.arange(p.shape[0], dtype=float)
    return math.fsum(p * n**k)


def annihilate(s: SingleModeState) -> tuple[SingleModeState, float]:
    """Apply a to ``s``; returns the unnormalized result and its squared norm."""
    amps = s.amplitudes
    out = np.zeros_like(amps)
    out[:-1] = np.sqrt(np.arange(1, amps.shape[0], dtype=float)) * amps[1:]
    res = SingleModeState(out, s.truncation, s.tail)
    return res, res.norm_squared()
