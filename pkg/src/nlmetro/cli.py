"""Command-line front end: sweeps, coefficient dumps and preparation reports.

Every table is written as CSV (``#`` comment header, then a header row) or as
a single JSON object.  Floats use 12 significant digits so reruns are
byte-identical.  Exit codes: 0 success, 1 numeric/property failure, 2 usage
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import shlex
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bounds import cq, moments_of
from .errors import ConvergenceError, InfeasibleTargetError, NlmetroError, PropertyViolation, TruncationError
from .fock import DEFAULT_TAIL_EPSILON, fidelity, number_moment
from .metrology import ecs_qfi_series, match_alpha, noon_sensitivity, pure_qfi
from .oracle import DOMINANCE_SLACK, lossy_qfi
from .states import (
    Family,
    StateSpec,
    acss_closed_form,
    aecs,
    cat_matched_squeezing,
    css,
    h_column_profile,
    h_coefficients,
    match_aecs,
    noon,
    photon_subtract,
    prepare_aecs,
    refined_peak,
    squeezed_vacuum,
    tail_crossover,
)

PROBES = ("noon", "ecs-", "ecs+", "aecs")
ORACLE_MAX_CUTOFF = 60
INFEASIBLE = "infeasible"


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def _json_value(x):
    if isinstance(x, float) or isinstance(x, np.floating):
        x = float(x)
        return float(format(x, ".12g")) if math.isfinite(x) else fmt(x)
    if isinstance(x, dict):
        return {k: _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    return x


# --------------------------------------------------------------------------
# argument parsing helpers

def parse_list(text, conv=str) -> list:
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [t.strip() for t in str(text).split(",") if t.strip()]
    try:
        return [conv(t) for t in items]
    except ValueError as exc:
        raise UsageError(f"bad list {text!r}: {exc}") from None


def parse_range(text: str, default_step: float = 1.0, integer: bool = False) -> list:
    """'a:b' or 'a:b:step', inclusive on both ends."""
    parts = str(text).split(":")
    if len(parts) not in (2, 3):
        raise UsageError(f"range {text!r} must look like a:b or a:b:step")
    try:
        a, b = float(parts[0]), float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else default_step
    except ValueError:
        raise UsageError(f"range {text!r} has a non-numeric bound") from None
    if not step > 0:
        raise UsageError(f"range {text!r} needs a positive step")
    if b < a:
        raise UsageError(f"range {text!r} is empty")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    # fixed rounding keeps grid points such as 0.905 free of accumulated drift
    vals = [round(a + i * step, 12) for i in range(count)]
    if integer:
        if any(v != int(v) for v in vals):
            raise UsageError(f"range {text!r} must contain integers")
        vals = [int(v) for v in vals]
    return vals


def transmission_grid(text: str) -> list[float]:
    grid = parse_range(text, default_step=0.005)
    bad = [t for t in grid if not 0.0 < t <= 1.0]
    if bad:
        raise UsageError(f"transmission range {text!r} leaves (0, 1]: {fmt(bad[0])}")
    return grid


def probe_list(text) -> list[str]:
    states = parse_list(text)
    if not states:
        raise UsageError("state list is empty")
    for s in states:
        if s not in PROBES:
            raise UsageError(f"unknown state {s!r}; choose from {', '.join(PROBES)}")
    return states


# --------------------------------------------------------------------------
# output

@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    meta: list[tuple[str, str]] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.meta:
            buf.write(f"# {key}: {value}\n")
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        obj = {
            "meta": {k.replace(" ", "_"): v for k, v in self.meta},
            "columns": self.columns,
            "rows": [dict(zip(self.columns, _json_value(r))) for r in self.rows],
        }
        return json.dumps(obj, indent=2) + "\n"

    def render(self, form: str) -> str:
        return self.to_json() if form == "json" else self.to_csv()


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _meta(argv: list[str], tail_epsilon: float) -> list[tuple[str, str]]:
    return [
        ("tool", f"nlmetro {__version__}"),
        ("command", shlex.join(["nlmetro", *argv])),
        ("tail_epsilon", fmt(tail_epsilon)),
    ]


# --------------------------------------------------------------------------
# subcommands

def _matched_probe(name: str, nbar: float, tail_epsilon: float):
    """(spec, state or None, amplitude) of a probe matched to mean photon number nbar."""
    if name == "noon":
        n = 2 * nbar
        if abs(n - round(n)) > 1e-12 or round(n) < 1:
            raise InfeasibleTargetError(f"NOON needs integer N = 2 nbar, got {n}")
        spec = StateSpec(Family.NOON, N=int(round(n)))
        return spec, noon(spec.N), None
    if name in ("ecs+", "ecs-"):
        a = match_alpha(nbar, name[-1])
        fam = Family.ECS_PLUS if name == "ecs+" else Family.ECS_MINUS
        return StateSpec(fam, alpha=a), None, a
    a0 = match_aecs(nbar)
    return StateSpec(Family.AECS, alpha0=a0), aecs(a0, tail_epsilon=tail_epsilon), math.sqrt(2.0) * a0


def cmd_sensitivity(opts, argv) -> int:
    states = probe_list(opts["states"])
    ks = parse_list(opts["k"], int)
    if not ks or any(k < 1 for k in ks):
        raise UsageError("--k needs positive integers")
    Ns = parse_range(opts["N"], integer=True)
    if Ns[0] < 1:
        raise UsageError("--N must start at 1 or above")
    eps = opts["tail_epsilon"]
    table = Table(["state", "k", "N", "nbar", "alpha", "qfi", "delta_phi", "diff_vs_noon"], meta=_meta(argv, eps))
    cutoffs: dict[str, str] = {}
    probes = {}
    for name in states:
        for N in Ns:
            try:
                probes[name, N] = _matched_probe(name, N / 2, eps)
            except InfeasibleTargetError:
                probes[name, N] = None
                continue
            spec, state, _ = probes[name, N]
            cutoffs[spec.label()] = str(state.cutoff) if state is not None else "none (Poisson series)"
    results = {}
    for name in states:
        for k in ks:
            for N in Ns:
                p = probes[name, N]
                if p is None:
                    results[name, k, N] = None
                    continue
                spec, state, amp = p
                if name == "noon":
                    rep = noon_sensitivity(N, k)
                elif name == "aecs":
                    rep = pure_qfi(state, k)
                else:
                    rep = ecs_qfi_series(amp, name[-1], k)
                results[name, k, N] = (amp, rep)
    failures = []
    for name in states:
        for k in ks:
            for N in Ns:
                r = results[name, k, N]
                if r is None:
                    table.rows.append([name, k, N, N / 2, INFEASIBLE, INFEASIBLE, INFEASIBLE, INFEASIBLE])
                    continue
                amp, rep = r
                diff = noon_sensitivity(N, k).delta_phi - rep.delta_phi
                table.rows.append([name, k, N, N / 2, amp, rep.qfi, rep.delta_phi, diff])
    if {"noon", "ecs-", "ecs+"} <= set(states):
        for k in ks:
            for N in Ns:
                dn, dm, dp = (results[s, k, N] for s in ("noon", "ecs-", "ecs+"))
                chain = [r[1].delta_phi for r in (dn, dm, dp) if r is not None]
                if any(a < b for a, b in zip(chain, chain[1:])):
                    failures.append(f"ordering violated at k={k}, N={N}: {chain}")
    table.meta += [(f"cutoff {lbl}", c) for lbl, c in sorted(cutoffs.items())]
    _write(table.render(opts["format"]), opts["output"])
    for f in failures:
        print(f"error: {f}", file=sys.stderr)
    return 1 if failures else 0


def cmd_coeffs(opts, argv) -> int:
    if (opts["alpha_a"] is None) == (opts["alpha0"] is None):
        raise UsageError("give exactly one of --alpha-a or --alpha0")
    a0 = opts["alpha0"] if opts["alpha0"] is not None else opts["alpha_a"] / math.sqrt(2.0)
    if not a0 > 0:
        raise UsageError("amplitude must be positive")
    alpha_a = math.sqrt(2.0) * a0
    eps = opts["tail_epsilon"]
    s = aecs(a0, tail_epsilon=eps)
    meta = _meta(argv, eps) + [
        ("alpha0", fmt(a0)),
        ("alpha_a", fmt(alpha_a)),
        ("r0", fmt(cat_matched_squeezing(a0))),
        (f"cutoff AECS(alpha0={a0:.12g})", str(s.cutoff)),
    ]
    coeffs = h_coefficients(s)
    table = Table(["m", "m_prime", "re_h", "im_h"], meta=meta)
    for m, mp, h in coeffs:
        table.rows.append([m, mp, h.real, h.imag])
    norm = math.fsum(2 * abs(h) ** 2 for _, _, h in coeffs)
    h, coh = h_column_profile(s, alpha_a)
    column_mass = math.fsum(2 * h**2)
    peak_h, peak_c = refined_peak(h), refined_peak(coh)
    cross = tail_crossover(h, coh)
    table.meta += [
        ("norm sum 2|H|^2", fmt(norm)),
        ("mass on m_prime=0 column", fmt(column_mass)),
        ("peak |H(m,0)|", fmt(peak_h)),
        ("peak coherent", fmt(peak_c)),
        ("tail crossover m", "none" if cross is None else str(cross)),
    ]
    _write(table.render(opts["format"]), opts["output"])
    if opts["profile_output"]:
        prof = Table(["m", "abs_h_m0", "coherent_amplitude"], meta=list(table.meta))
        for m in range(h.size):
            prof.rows.append([m, h[m], coh[m]])
        _write(prof.render(opts["format"]), opts["profile_output"])
    failures = []
    if abs(norm - 1.0) > 1e-9:
        failures.append(f"coefficient norm {norm:.12g} differs from 1")
    return 1 if failures else 0


def cmd_loss(opts, argv) -> int:
    ks = parse_list(opts["k"], int)
    if not ks or any(k not in (1, 2) for k in ks):
        raise UsageError("--k accepts 1 and/or 2 for the lossy bounds")
    grid = transmission_grid(opts["T"])
    states = probe_list(opts["states"])
    nbar = float(opts["nbar"])
    eps = opts["tail_epsilon"]
    use_oracle = bool(opts["oracle"])
    max_cut = int(opts["oracle_max_cutoff"])
    probes = {}
    for name in states:
        try:
            spec, state, _ = _matched_probe(name, nbar, eps)
        except InfeasibleTargetError as exc:
            raise UsageError(f"{name} cannot be matched to nbar={nbar}: {exc}") from None
        if use_oracle and state is None:
            state = spec.build(tail_epsilon=eps)
        if use_oracle and state.cutoff > max_cut:
            raise UsageError(
                f"oracle for {spec.label()} needs cutoff {state.cutoff} > --oracle-max-cutoff {max_cut}; "
                "raise --oracle-max-cutoff or lower --nbar"
            )
        probes[name] = (spec, state, moments_of(spec))
    cols = ["state", "k", "T", "cq", "delta_phi_bound"]
    if use_oracle:
        cols += ["qfi_exact", "delta_phi_exact"]
    meta = _meta(argv, eps) + [("nbar", fmt(nbar))]
    meta += [(f"cutoff {spec.label()}", str(st.cutoff) if st is not None else "none (moments from Poisson series)")
             for spec, st, _ in probes.values()]
    table = Table(cols, meta=meta)
    failures = []
    for name in states:
        spec, state, moms = probes[name]
        for k in ks:
            for T in grid:
                c = cq(moms, T, k)
                row = [name, k, T, c, 1.0 / math.sqrt(c) if c > 0 else math.inf]
                if use_oracle:
                    f = lossy_qfi(state, T, k)
                    row += [f, 1.0 / math.sqrt(f) if f > 0 else math.inf]
                    if c < f - DOMINANCE_SLACK:
                        failures.append(f"bound below exact QFI for {name}, k={k}, T={fmt(T)}: {fmt(c)} < {fmt(f)}")
                table.rows.append(row)
    _write(table.render(opts["format"]), opts["output"])
    for f in failures:
        print(f"error: {f}", file=sys.stderr)
    return 1 if failures else 0


_PREPARE = {
    "noon": Family.NOON, "ecs+": Family.ECS_PLUS, "ecs-": Family.ECS_MINUS, "aecs": Family.AECS,
    "coherent": Family.COHERENT, "css+": Family.CSS_PLUS, "css-": Family.CSS_MINUS,
    "squeezed": Family.SQUEEZED_VACUUM, "acss": None,
}


def prepare_report(family: str, N=None, alpha=None, alpha0=None, r=None, eta=None,
                   tail_epsilon: float = DEFAULT_TAIL_EPSILON) -> dict:
    if family not in _PREPARE:
        raise UsageError(f"unknown family {family!r}; choose from {', '.join(_PREPARE)}")
    if eta is not None and family not in ("aecs", "acss"):
        raise UsageError("--eta applies only to the aecs and acss pipelines")
    params: dict = {}
    success = None
    fid = None
    if family == "aecs":
        if alpha0 is None:
            raise UsageError("aecs needs --alpha0")
        StateSpec(Family.AECS, alpha0=alpha0)
        rep = prepare_aecs(alpha0, eta, tail_epsilon)
        state, fid = rep.state, rep.fidelity_to_ideal
        params = {"alpha0": alpha0, "r0": cat_matched_squeezing(alpha0), "alpha_a": math.sqrt(2.0) * alpha0}
        if eta is not None:
            params["eta"], success = eta, rep.success_probability
    elif family == "acss":
        if r is None:
            raise UsageError("acss needs --r")
        ideal = acss_closed_form(r, tail_epsilon=tail_epsilon)
        params = {"r": r}
        if eta is None:
            state = ideal
        else:
            sub = photon_subtract(squeezed_vacuum(r, ideal.truncation), eta)
            state, success = sub.state, sub.success_probability
            params["eta"] = eta
        # the odd cat whose matched squeezing is r: alpha0^2 = 3 sinh(2r) / 2
        a0 = math.sqrt(1.5 * math.sinh(2.0 * r))
        fid = fidelity(state, css(a0, "-", ideal.truncation)) if r > 0 else None
        params["alpha0"] = a0
    else:
        fam = _PREPARE[family]
        spec = StateSpec(fam, N=N, alpha=alpha, r=r)
        state = spec.build(tail_epsilon=tail_epsilon)
        params = {k: v for k, v in (("N", N), ("alpha", alpha), ("r", r)) if v is not None}
    two = state.coeffs.ndim == 2 if hasattr(state, "coeffs") else False
    mean = number_moment(state, 2, 1) if two else number_moment(state, 1, 1)
    out = {"family": family, "params": params, "mean_photon": mean, "fidelity_to_ideal": fid, "cutoff": state.cutoff}
    if success is not None:
        out["success_probability"] = success
    return out


def cmd_prepare(opts, argv) -> int:
    rep = prepare_report(opts["family"], opts["N"], opts["alpha"], opts["alpha0"], opts["r"], opts["eta"],
                         opts["tail_epsilon"])
    obj = {"tool": f"nlmetro {__version__}", "command": shlex.join(["nlmetro", *argv]),
           "tail_epsilon": opts["tail_epsilon"], **rep}
    _write(json.dumps(_json_value(obj), indent=2) + "\n", opts["output"])
    return 0


def cmd_selftest(opts, argv) -> int:
    from .selftest import run_checks

    results = run_checks()
    lines = [f"{'PASS' if ok else 'FAIL'} {name}{'' if ok else ': ' + detail}" for name, ok, detail in results]
    failed = sum(1 for _, ok, _ in results if not ok)
    lines.append(f"{len(results) - failed} passed, {failed} failed")
    _write("\n".join(lines) + "\n", opts["output"])
    return 1 if failed else 0


# --------------------------------------------------------------------------

DEFAULTS = {
    "states": ",".join(PROBES),
    "k": "1",
    "N": "2:20",
    "T": "0.90:1.00:0.005",
    "nbar": 2.0,
    "oracle": False,
    "oracle_max_cutoff": ORACLE_MAX_CUTOFF,
    "format": "csv",
    "output": None,
    "profile_output": None,
    "tail_epsilon": DEFAULT_TAIL_EPSILON,
    "alpha_a": None,
    "alpha0": None,
    "alpha": None,
    "N_int": None,
    "r": None,
    "eta": None,
}

_PER_COMMAND_DEFAULTS = {"sensitivity": {"states": "noon,ecs-,ecs+"}, "loss": {"k": "1,2"}}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlmetro", description="Nonlinear phase metrology with NOON, ECS and AECS probes.")
    p.add_argument("--version", action="version", version=f"nlmetro {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, form=True):
        sp.add_argument("--config", help="JSON file of option defaults; flags override it")
        sp.add_argument("--output", "-o", help="output path (stdout when omitted)")
        sp.add_argument("--tail-epsilon", type=float, dest="tail_epsilon")
        if form:
            sp.add_argument("--format", choices=("csv", "json"))

    sp = sub.add_parser("sensitivity", help="lossless sensitivity table at matched nbar = N/2")
    common(sp)
    sp.add_argument("--states", help="comma list from noon,ecs-,ecs+,aecs")
    sp.add_argument("--k", help="comma list of nonlinearity exponents")
    sp.add_argument("--N", help="N range a:b[:step]; nbar = N/2")

    sp = sub.add_parser("coeffs", help="AECS H(m,m') table and H(m,0) vs coherent profile")
    common(sp)
    sp.add_argument("--alpha-a", type=float, dest="alpha_a")
    sp.add_argument("--alpha0", type=float)
    sp.add_argument("--profile-output", dest="profile_output")

    sp = sub.add_parser("loss", help="lossy bound sweep, optionally with the exact oracle")
    common(sp)
    sp.add_argument("--states", help="comma list from noon,ecs-,ecs+,aecs")
    sp.add_argument("--k", help="comma list from 1,2")
    sp.add_argument("--T", help="transmission range a:b[:step], step defaults to 0.005")
    sp.add_argument("--nbar", type=float)
    sp.add_argument("--oracle", action="store_true", default=None)
    sp.add_argument("--oracle-max-cutoff", type=int, dest="oracle_max_cutoff")

    sp = sub.add_parser("prepare", help="JSON report for one prepared state")
    common(sp, form=False)
    sp.add_argument("family", help=", ".join(_PREPARE))
    sp.add_argument("--N", type=int, dest="N_int")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--alpha0", type=float)
    sp.add_argument("--r", type=float)
    sp.add_argument("--eta", type=float)

    sp = sub.add_parser("selftest", help="run the invariant suite and print PASS/FAIL lines")
    sp.add_argument("--output", "-o")
    return p


def resolve_options(ns: argparse.Namespace) -> dict:
    """Merge built-in defaults, the optional JSON config, then explicit flags."""
    opts = dict(DEFAULTS)
    opts.update(_PER_COMMAND_DEFAULTS.get(ns.command, {}))
    cfg_path = getattr(ns, "config", None)
    if cfg_path:
        try:
            with open(cfg_path, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {cfg_path}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        for key, value in cfg.items():
            key = key.replace("-", "_")
            if key not in opts:
                raise UsageError(f"unknown config key {key!r}")
            opts[key] = ",".join(map(str, value)) if isinstance(value, list) else value
    for key, value in vars(ns).items():
        if value is not None:
            opts[key] = value
    opts["N"] = opts.pop("N_int") if ns.command == "prepare" else opts["N"]
    if not 0 < float(opts["tail_epsilon"]) < 1:
        raise UsageError("--tail-epsilon must lie in (0, 1)")
    opts["tail_epsilon"] = float(opts["tail_epsilon"])
    return opts


COMMANDS = {
    "sensitivity": cmd_sensitivity,
    "coeffs": cmd_coeffs,
    "loss": cmd_loss,
    "prepare": cmd_prepare,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = resolve_options(ns)
        return COMMANDS[ns.command](opts, argv)
    except UsageError as exc:
        print(f"nlmetro: usage error: {exc}", file=sys.stderr)
        return 2
    except (TruncationError, ConvergenceError, PropertyViolation) as exc:
        print(f"nlmetro: failure: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError) as exc:
        # invalid state parameters surface as ValueError subclasses
        print(f"nlmetro: invalid parameters: {exc}", file=sys.stderr)
        return 2
    except (NlmetroError, ArithmeticError, RuntimeError) as exc:
        print(f"nlmetro: failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
