"""Acceptance criteria, one test each, every test printing a PASS/FAIL line.

Criterion 1 (the 1.9807 anchor) and the k = 2 part of criterion 8 (printed
C^Q_2 dominance) fail by construction of the stated formulas; the decisions
ledger explains both.  Tolerances are exactly the stated ones.
"""

import math
import time

import numpy as np
import pytest

from nlmetro.bounds import cq, cq1, cq2, moments_of
from nlmetro.cli import main
from nlmetro.fock import Truncation, annihilate, embed, fidelity, normalize
from nlmetro.metrology import (
    PhaseShift,
    ecs_qfi_series,
    match_alpha,
    noon_sensitivity,
    pure_qfi,
    sensitivity_inequality_check,
)
from nlmetro.oracle import DOMINANCE_SLACK, loss_channel, lossy_qfi, mixed_qfi_exact
from nlmetro.selftest import T_GRID, matched_specs
from nlmetro.states import (
    acss_closed_form,
    aecs,
    ecs,
    h_column_profile,
    match_aecs,
    noon,
    photon_subtract,
    refined_peak,
    squeezed_vacuum,
    tail_crossover,
)


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
        assert ok, detail

    return emit


@pytest.fixture(scope="module")
def specs():
    return matched_specs()


@pytest.fixture(scope="module")
def states(specs):
    return {name: spec.build() for name, spec in specs.items()}


def test_c01_resource_matching_anchor(report):
    t0 = time.perf_counter()
    a_minus = match_alpha(2.0, "-")
    alpha_a = math.sqrt(2.0) * match_aecs(2.0)
    dt = time.perf_counter() - t0
    ok = abs(a_minus - 1.9807) <= 5e-4 and abs(alpha_a - 1.9807) <= 0.02 and dt < 1.0
    report(1, ok, f"alpha_- = {a_minus:.7f} (|diff| {abs(a_minus - 1.9807):.2e}, tol 5e-4), "
                  f"alpha_A = {alpha_a:.7f} (|diff| {abs(alpha_a - 1.9807):.2e}, tol 0.02), {dt:.3f} s")


def test_c02_fidelity_anchor(report):
    # cutoff 40 drops 2.6e-12 of the AECS, so the tail budget is 1e-11 here
    t0 = time.perf_counter()
    s = aecs(1.9807 / math.sqrt(2.0), Truncation(40, 1e-11))
    f = fidelity(s, ecs(1.9807, "-", s.truncation))
    dt = time.perf_counter() - t0
    ref = aecs(1.9807 / math.sqrt(2.0))
    f_ref = fidelity(ref, ecs(1.9807, "-", ref.truncation))
    ok = abs(f - 0.975) <= 0.01 and dt < 1.0 and abs(f - f_ref) < 1e-10
    report(2, ok, f"fidelity = {f:.6f} (target 0.975 +/- 0.01) at cutoff 40 in {dt:.3f} s; "
                  f"adaptive cutoff {ref.cutoff} gives {f_ref:.10f}")


def test_c03_noon_sensitivity(report):
    worst = 0.0
    for N in range(1, 13):
        for k in (1, 2, 3):
            exact = float(N) ** (-k)
            for d in (noon_sensitivity(N, k).delta_phi, pure_qfi(noon(N), k).delta_phi):
                worst = max(worst, abs(d - exact) / exact)
    report(3, worst <= 1e-12, f"max relative error {worst:.2e} over N <= 12, k <= 3, both paths")


def test_c04_sensitivity_inequality(report):
    t0 = time.perf_counter()
    violated, negative, ratios, monotone = 0, 0, [], True
    for k in (1, 2, 3):
        rows = [r for r in sensitivity_inequality_check(20, k, strict=False) if r.N >= 2]
        violated += sum(not r.ordered for r in rows)
        d = np.array([r.diff_noon_ecs_minus for r in rows])
        negative += int(np.sum(d < 0))
        peak = int(np.argmax(d))
        monotone &= bool(np.all(np.diff(d[peak:]) <= 0))
        ratios.append(d[-1] / d.max())
    dt = time.perf_counter() - t0
    ok = violated == 0 and negative == 0 and monotone and max(ratios) <= 0.05 and dt < 30
    report(4, ok, f"{violated} ordering violations, {negative} negative differences, decay after peak {monotone}, "
                  f"diff(20)/max = {', '.join(f'{x:.3g}' for x in ratios)} (k=1,2,3), {dt:.2f} s")


def test_c05_series_equivalence(report):
    worst = 0.0
    for alpha in (0.5, 1.0, 2.0, 3.0):
        for parity in "+-":
            s = ecs(alpha, parity)
            for k in (1, 2, 3):
                a, b = ecs_qfi_series(alpha, parity, k).qfi, pure_qfi(s, k).qfi
                worst = max(worst, abs(a - b) / b)
    report(5, worst <= 1e-8, f"max relative gap {worst:.2e} (tol 1e-8) over 24 cells")


def test_c06_pipeline_equivalence(report):
    worst = 1.0
    for r in (0.3, 0.6, 0.9, 1.2):
        x = acss_closed_form(r)
        sq = squeezed_vacuum(r, Truncation(x.cutoff + 1, x.truncation.tail_epsilon))
        y, _ = annihilate(sq)
        worst = min(worst, fidelity(x, embed(normalize(y), x.cutoff)))
    x = acss_closed_form(0.8)
    cond = photon_subtract(squeezed_vacuum(0.8, x.truncation), 0.99)
    fc = fidelity(cond.state, x)
    ok = worst > 1 - 1e-10 and fc > 0.99
    report(6, ok, f"min closed-form vs subtracted fidelity 1 - {1 - worst:.1e}, eta = 0.99 fidelity {fc:.5f} "
                  f"(p = {cond.success_probability:.4g})")


@pytest.mark.slow
def test_c07_lossless_reductions(report, specs, states):
    worst = 0.0
    for name, spec in specs.items():
        s, m = states[name], moments_of(spec)
        p1 = np.abs(s.coeffs) ** 2
        n = np.arange(s.truncation.dim, dtype=float)
        pn = p1.sum(axis=0)
        var1 = math.fsum(pn * n**2) - math.fsum(pn * n) ** 2
        var2 = math.fsum(pn * n**4) - math.fsum(pn * n**2) ** 2
        for k, c, v in ((1, cq1(m, 1.0), var1), (2, cq2(m, 1.0), var2)):
            f = pure_qfi(s, k).qfi
            rho, drho = loss_channel(s, 1.0, PhaseShift(0.0, k))
            fx = mixed_qfi_exact(rho, drho)
            worst = max(worst, abs(c - 4 * v) / (4 * v), abs(fx - f) / f)
    report(7, worst <= 1e-8, f"max relative gap {worst:.2e} (tol 1e-8), cq1, cq2 and dense oracle, four families")


def _dominance(specs, states, k):
    bad = []
    for name, spec in specs.items():
        m = moments_of(spec)
        for T in T_GRID:
            c, f = cq(m, T, k), lossy_qfi(states[name], T, k)
            if c < f - DOMINANCE_SLACK:
                bad.append((name, T, c, f))
    return bad


def test_c08a_dominance_k1(report, specs, states):
    bad = _dominance(specs, states, 1)
    report("8 (k=1 dominance)", not bad, f"{len(bad)} of 84 cells below the exact QFI, cutoffs "
           + ", ".join(f"{n}={s.cutoff}" for n, s in states.items()))


def test_c08b_dominance_k2(report, specs, states):
    bad = _dominance(specs, states, 2)
    first = ", ".join(f"{n}@T={T:.3f}: cq2 {c:.6g} < F {f:.6g}" for n, T, c, f in bad[:2])
    report("8 (k=2 dominance)", not bad, f"{len(bad)} of 84 cells below the exact QFI" + (f"; {first}" if bad else ""))


def test_c08c_beats_noon(report, specs):
    moms = {name: moments_of(spec) for name, spec in specs.items()}
    bad = 0
    for k in (1, 2):
        for T in T_GRID:
            ref = 1 / math.sqrt(cq(moms["noon"], T, k))
            bad += sum(not 1 / math.sqrt(cq(moms[n], T, k)) < ref for n in ("ecs-", "ecs+", "aecs"))
    report("8 (beats NOON)", bad == 0, f"{bad} of 126 cells where an ECS/AECS bound sensitivity fails to beat NOON(4)")


def test_c08_runtime(report, specs):
    t0 = time.perf_counter()
    for k in (1, 2):
        for name, spec in specs.items():
            s = spec.build()
            for T in T_GRID:
                lossy_qfi(s, T, k)
    dt = time.perf_counter() - t0
    report("8 (runtime)", dt < 600, f"full oracle grid in {dt:.2f} s (limit 600 s)")


def test_c09_aecs_structure(report):
    s4 = aecs(1.9807 / math.sqrt(2.0))
    asym = float(np.max(np.abs(s4.coeffs + s4.coeffs.T)))
    p = np.abs(s4.coeffs) ** 2
    col = float(p[:, 0].sum() + p[0, :].sum())
    h, coh = h_column_profile(aecs(math.sqrt(2.0)), 2.0)
    ph, pc = refined_peak(h), refined_peak(coh)
    cross = tail_crossover(h, coh)
    ok = asym < 1e-9 and col > 0.5 and ph < pc and cross is not None
    report(9, ok, f"||C + C^T|| = {asym:.1e}, m'=0 column mass {col:.4f}, peak {ph:.3f} < {pc:.3f}, crossover m = {cross}")


def _run_twice(argv, path):
    blobs, codes = [], []
    for _ in range(2):
        codes.append(main([*argv, "-o", str(path)]))
        blobs.append(path.read_bytes())
    return blobs[0] == blobs[1], codes


def test_c10_determinism(report, tmp_path):
    commands = {
        "selftest": ["selftest"],
        "sensitivity": ["sensitivity", "--k", "1,2,3", "--N", "2:20"],
        "coeffs": ["coeffs", "--alpha-a", "2.0", "--profile-output", str(tmp_path / "profile.csv")],
        "loss": ["loss", "--oracle"],
        "prepare": ["prepare", "aecs", "--alpha0", "1.40057", "--eta", "0.99"],
    }
    results = {name: _run_twice(argv, tmp_path / f"{name}.out") for name, argv in commands.items()}
    same = {name: r[0] for name, r in results.items()}
    ok = all(same.values()) and all(len(set(r[1])) == 1 for r in results.values())
    report(10, ok, ", ".join(f"{n} {'identical' if v else 'DIFFERENT'}" for n, v in same.items()))
