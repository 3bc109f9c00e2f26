"""Invariant suite behind ``nlmetro selftest``.

Each check returns (name, passed, detail).  Output carries no timings so two
runs print the same bytes.
"""

from __future__ import annotations

import math

import numpy as np

from .bounds import cq, cq1, cq2, moments_of
from .fock import Truncation, embed, fidelity, normalize, annihilate
from .metrology import (
    ecs_qfi_series,
    match_alpha,
    noon_sensitivity,
    pure_qfi,
    sensitivity_inequality_check,
)
from .oracle import DOMINANCE_SLACK, lossy_qfi
from .states import (
    Family,
    StateSpec,
    acss_closed_form,
    aecs,
    cat_matched_squeezing,
    ecs,
    h_column_profile,
    match_aecs,
    noon,
    photon_subtract,
    refined_peak,
    squeezed_vacuum,
    tail_crossover,
)

NBAR = 2.0
T_GRID = [round(0.90 + 0.005 * i, 12) for i in range(21)]


def matched_specs(nbar: float = NBAR) -> dict[str, StateSpec]:
    """The four probe families at mean photon number ``nbar`` in mode 2."""
    return {
        "noon": StateSpec(Family.NOON, N=int(round(2 * nbar))),
        "ecs-": StateSpec(Family.ECS_MINUS, alpha=match_alpha(nbar, "-")),
        "ecs+": StateSpec(Family.ECS_PLUS, alpha=match_alpha(nbar, "+")),
        "aecs": StateSpec(Family.AECS, alpha0=match_aecs(nbar)),
    }


def _g(x: float) -> str:
    return format(x, ".12g")


def check_matching():
    a = match_alpha(2.0, "-")
    aa = math.sqrt(2.0) * match_aecs(2.0)
    ok = abs(a - 1.9807) <= 5e-4 and abs(aa - 1.9807) <= 0.02
    return "resource matching alpha_- = alpha_A = 1.9807", ok, f"alpha_-={_g(a)}, alpha_A={_g(aa)}"


def check_fidelity_anchor():
    a = 1.9807
    s = aecs(a / math.sqrt(2.0))
    f = fidelity(s, ecs(a, "-", s.truncation))
    return "AECS fidelity to odd ECS 0.975 +/- 0.01", abs(f - 0.975) <= 0.01, f"fidelity={_g(f)}"


def check_noon():
    worst = 0.0
    for N in range(1, 13):
        for k in (1, 2, 3):
            exact = float(N) ** (-k)
            for d in (noon_sensitivity(N, k).delta_phi, pure_qfi(noon(N), k).delta_phi):
                worst = max(worst, abs(d - exact) / exact)
    return "NOON delta phi = N^-k", worst <= 1e-12, f"max rel err={_g(worst)}"


def check_ordering():
    details = []
    ok = True
    for k in (1, 2, 3):
        rows = sensitivity_inequality_check(20, k, strict=False)
        rows = [r for r in rows if r.N >= 2]
        ok &= all(r.ordered for r in rows)
        diffs = np.array([r.diff_noon_ecs_minus for r in rows])
        peak = int(np.argmax(diffs))
        ok &= bool(np.all(diffs >= 0) and np.all(np.diff(diffs[peak:]) <= 0) and diffs[-1] <= 0.05 * diffs.max())
        details.append(f"k={k} diff(20)/max={_g(diffs[-1] / diffs.max())}")
    return "sensitivity ordering NOON >= ECS- >= ECS+ for N=2..20", ok, "; ".join(details)


def check_series():
    worst = 0.0
    for a in (0.5, 1.0, 2.0, 3.0):
        for parity in "+-":
            s = ecs(a, parity)
            for k in (1, 2, 3):
                f1 = ecs_qfi_series(a, parity, k).qfi
                f2 = pure_qfi(s, k).qfi
                worst = max(worst, abs(f1 - f2) / f1)
    return "series QFI matches Fock-space QFI", worst <= 1e-8, f"max rel diff={_g(worst)}"


def check_pipeline():
    worst = 0.0
    for r in (0.3, 0.6, 0.9, 1.2):
        x = acss_closed_form(r)
        sq = squeezed_vacuum(r, Truncation(x.cutoff + 1))
        y, _ = annihilate(sq)
        worst = max(worst, 1.0 - fidelity(x, embed(normalize(y), x.cutoff)))
    r0 = cat_matched_squeezing(1.0)
    ideal = acss_closed_form(r0)
    sub = photon_subtract(squeezed_vacuum(r0, ideal.truncation), 0.99)
    f = fidelity(sub.state, ideal)
    ok = worst < 1e-10 and f > 0.99
    return "ACSS closed form = photon-subtracted squeezed vacuum", ok, f"max infidelity={_g(worst)}, eta=0.99 fidelity={_g(f)}"


def check_lossless_limit(specs):
    worst = 0.0
    for spec in specs.values():
        s = spec.build()
        m = moments_of(spec)
        for k, c in ((1, cq1(m, 1.0)), (2, cq2(m, 1.0))):
            f = pure_qfi(s, k).qfi
            worst = max(worst, abs(c - f) / f, abs(lossy_qfi(s, 1.0, k) - f) / f)
    return "T=1 reductions of cq1, cq2 and the exact oracle", worst <= 1e-8, f"max rel diff={_g(worst)}"


def check_dominance(specs, k):
    bad = []
    for name, spec in specs.items():
        s = spec.build()
        m = moments_of(spec)
        for T in T_GRID:
            c, f = cq(m, T, k), lossy_qfi(s, T, k)
            if c < f - DOMINANCE_SLACK:
                bad.append(f"{name}@T={_g(T)}")
    detail = f"{len(bad)} violations" + (f", first {', '.join(bad[:3])}" if bad else "")
    return f"bound dominance cq{k} >= exact QFI, T=0.90..1.00", not bad, detail


def check_beats_noon(specs):
    bad = []
    moms = {name: moments_of(spec) for name, spec in specs.items()}
    for k in (1, 2):
        for T in T_GRID:
            ref = cq(moms["noon"], T, k)
            for name in ("ecs-", "ecs+", "aecs"):
                if not cq(moms[name], T, k) > ref:
                    bad.append(f"{name} k={k} T={_g(T)}")
    return "ECS-/ECS+/AECS bound sensitivities beat NOON(4)", not bad, f"{len(bad)} violations"


def check_aecs_structure():
    s = aecs(2.0 / math.sqrt(2.0))
    asym = float(np.max(np.abs(s.coeffs + s.coeffs.T)))
    h, coh = h_column_profile(s, 2.0)
    col = math.fsum(2 * h**2)
    ph, pc = refined_peak(h), refined_peak(coh)
    cross = tail_crossover(h, coh)
    ok = asym < 1e-9 and col > 0.5 and ph < pc and cross is not None
    return "AECS antisymmetry, m'=0 dominance, earlier peak and longer tail", ok, (
        f"asym={_g(asym)}, column mass={_g(col)}, peaks {_g(ph)} < {_g(pc)}, crossover m={cross}"
    )


def run_checks() -> list[tuple[str, bool, str]]:
    specs = matched_specs()
    return [
        check_matching(),
        check_fidelity_anchor(),
        check_noon(),
        check_ordering(),
        check_series(),
        check_pipeline(),
        check_lossless_limit(specs),
        check_dominance(specs, 1),
        check_dominance(specs, 2),
        check_beats_noon(specs),
        check_aecs_structure(),
    ]
