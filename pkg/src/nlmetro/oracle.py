"""Exact QFI of a probe after the phase shifter and a lossy mode-2 arm.

The loss channel has Kraus operators K_l|n> = sqrt(C(n,l) T^{n-l} (1-T)^l) |n-l>
on mode 2.  Its output rho(phi) = sum_l v_l v_l^+ with v_l = (1 x K_l U(phi)) psi
has rank at most cutoff+1, so the symmetric-logarithmic-derivative formula is
evaluated on the span of the branch vectors {v_l} instead of the full
two-mode space.  The dense path (:func:`mixed_qfi_exact`) is kept for small
cutoffs and as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .bounds import cq, moments_of
from .errors import PropertyViolation, TruncationError
from .fock import DensityMatrix, TwoModeState
from .metrology import PhaseShift, apply_phase
from .states import StateSpec

EIGEN_FLOOR = 1e-12
DOMINANCE_SLACK = 1e-6
# pinned; states are built with a 1e-12 tail, well inside it
TRACE_TOL = 1e-8


@dataclass(frozen=True)
class KrausSet:
    operators: tuple[np.ndarray, ...]
    transmission: float

    def completeness_error(self) -> float:
        d = self.operators[0].shape[0]
        acc = sum(k.conj().T @ k for k in self.operators)
        return float(np.max(np.abs(acc - np.eye(d))))


def _kraus_weights(cutoff: int, transmission: float) -> np.ndarray:
    """w[l, n] = sqrt(C(n,l) T^{n-l} (1-T)^l) for n >= l, zero otherwise."""
    d = cutoff + 1
    n = np.arange(d, dtype=float)[None, :]
    l = np.arange(d, dtype=float)[:, None]
    w = np.zeros((d, d))
    valid = n >= l
    t, r = transmission, 1.0 - transmission
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = special.gammaln(n + 1) - special.gammaln(l + 1) - special.gammaln(np.maximum(n - l, 0) + 1)
        lt = np.where(n - l > 0, (n - l) * math.log(t) if t > 0 else -np.inf, 0.0)
        lr = np.where(l > 0, l * math.log(r) if r > 0 else -np.inf, 0.0)
        w = np.where(valid, np.exp(0.5 * (logc + lt + lr)), 0.0)
    return w


def loss_kraus(cutoff: int, transmission: float) -> KrausSet:
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {transmission!r}")
    w = _kraus_weights(cutoff, transmission)
    d = cutoff + 1
    ops = []
    for l in range(d):
        k = np.zeros((d, d))
        idx = np.arange(l, d)
        k[idx - l, idx] = w[l, idx]
        ops.append(k)
    return KrausSet(tuple(ops), transmission)


def lossy_branches(s: TwoModeState, transmission: float, phase: PhaseShift) -> tuple[np.ndarray, np.ndarray]:
    """Branch vectors v_l and their phi-derivatives, both shaped (L, d*d)."""
    if not 0.0 < transmission <= 1.0:
        raise ValueError(f"transmission must lie in (0, 1], got {transmission!r}")
    d = s.truncation.dim
    psi = apply_phase(s, phase).coeffs
    gen = np.arange(d, dtype=float) ** phase.k
    dpsi = 1j * psi * gen[None, :]
    w = _kraus_weights(s.cutoff, transmission)
    live = [l for l in range(d) if np.any(w[l])]
    v = np.zeros((len(live), d, d), dtype=np.complex128)
    dv = np.zeros_like(v)
    for i, l in enumerate(live):
        v[i, :, : d - l] = psi[:, l:] * w[l, l:][None, :]
        dv[i, :, : d - l] = dpsi[:, l:] * w[l, l:][None, :]
    return v.reshape(len(live), d * d), dv.reshape(len(live), d * d)


def loss_channel(s: TwoModeState, transmission: float, phase: PhaseShift) -> tuple[DensityMatrix, np.ndarray]:
    """rho(phi) after phase then loss, with the analytic d rho / d phi."""
    v, dv = lossy_branches(s, transmission, phase)
    rho = v.T @ v.conj()
    drho = dv.T @ v.conj() + v.T @ dv.conj()
    tr = math.fsum(np.real(np.diag(rho)))
    if abs(tr - 1.0) > TRACE_TOL:
        raise TruncationError(f"loss channel output has trace {tr:.12g}", cutoff=s.cutoff, tail=abs(1.0 - tr))
    return DensityMatrix(rho, s.truncation, modes=2), drho


def mixed_qfi_exact(rho: DensityMatrix | np.ndarray, drho: np.ndarray, floor: float = EIGEN_FLOOR) -> float:
    """SLD QFI: sum over eigenpairs with lambda_i + lambda_j > floor of 2 |<e_i|drho|e_j>|^2 / (lambda_i + lambda_j)."""
    r = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    lam, vecs = np.linalg.eigh(r)
    dm = vecs.conj().T @ drho @ vecs
    denom = lam[:, None] + lam[None, :]
    mask = denom > floor
    return float(np.sum(2.0 * np.abs(dm[mask]) ** 2 / denom[mask]))


def mixed_qfi_branches(v: np.ndarray, dv: np.ndarray, floor: float = EIGEN_FLOOR) -> float:
    """SLD QFI of rho = sum_l v_l v_l^+ given d v_l / d phi, on the span of the branches.

    Eigenpairs come from the Gram matrix G = V^+ V; pairs between the support
    and the kernel are summed through the kernel projection of drho e_i.
    """
    vt = v.T  # columns are branch vectors
    dvt = dv.T
    gram = vt.conj().T @ vt
    lam, w = np.linalg.eigh(gram)
    keep = lam > floor
    lam, w = lam[keep], w[:, keep]
    if lam.size == 0:
        return 0.0
    e = (vt @ w) / np.sqrt(lam)[None, :]
    x = dvt @ (vt.conj().T @ e) + vt @ (dvt.conj().T @ e)  # drho e_i
    dm = e.conj().T @ x
    denom = lam[:, None] + lam[None, :]
    inner = np.sum(2.0 * np.abs(dm) ** 2 / denom)
    outside = np.sum(np.abs(x - e @ dm) ** 2, axis=0)
    return float(inner + np.sum(4.0 * outside / lam))


def lossy_qfi(s: TwoModeState, transmission: float, k: int, phi: float = 0.0) -> float:
    v, dv = lossy_branches(s, transmission, PhaseShift(phi, k))
    norm = math.fsum(np.abs(v.ravel()) ** 2)
    if abs(norm - 1.0) > TRACE_TOL:
        raise TruncationError(f"loss channel output has trace {norm:.12g}", cutoff=s.cutoff, tail=abs(1.0 - norm))
    return mixed_qfi_branches(v, dv)


@dataclass(frozen=True)
class OracleRow:
    T: float
    qfi_exact: float
    cq: float

    @property
    def delta_phi_exact(self) -> float:
        return 1.0 / math.sqrt(self.qfi_exact) if self.qfi_exact > 0 else math.inf

    @property
    def delta_phi_bound(self) -> float:
        return 1.0 / math.sqrt(self.cq) if self.cq > 0 else math.inf

    @property
    def dominated(self) -> bool:
        return self.cq >= self.qfi_exact - DOMINANCE_SLACK


def oracle_sweep(spec: StateSpec | TwoModeState, k: int, T_grid, strict: bool = False, state: TwoModeState | None = None) -> list[OracleRow]:
    """Exact lossy QFI next to the closed-form bound over a transmission grid.

    With ``strict`` a row where the bound falls below the exact QFI (beyond
    ``DOMINANCE_SLACK``) raises ``PropertyViolation``.
    """
    if k not in (1, 2):
        raise ValueError(f"oracle sweep supports k in (1, 2), got {k}")
    if isinstance(spec, TwoModeState):
        state = spec
        moments = moments_of(spec)
    else:
        state = state if state is not None else spec.build()
        moments = moments_of(spec)
    rows = []
    for T in T_grid:
        if not 0.0 < T <= 1.0:
            raise ValueError(f"transmission grid must lie in (0, 1], got {T}")
        row = OracleRow(float(T), lossy_qfi(state, T, k), cq(moments, T, k))
        if strict and not row.dominated:
            raise PropertyViolation(f"bound {row.cq:.12g} below exact QFI {row.qfi_exact:.12g} at T={T}, k={k}")
        rows.append(row)
    return rows
