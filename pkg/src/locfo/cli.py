"""Command-line front end: ``locfo check|view|translate|sat|gadget|report``.

Exit codes: flag errors 64, unreadable or malformed input files 66,
contract violations 70. ``check`` exits 0/1 for true/false and ``sat``
exits 0 SAT, 1 UNSAT (complete), 2 UNSAT within a bound or UNKNOWN.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .core import ArgumentError, DataStructure, LocfoError, Signature, full_gamma, parse_gamma
from .evaluator import eval_formula, models
from .existred import reduce_exist1, reduce_exist2
from .formula import Exists, Forall, Formula, free_vars, predicates, rel_pairs
from .gadgets import (
    DominoSystem,
    a2m_node,
    build_a2m,
    build_phi_D,
    build_phi_D_prime,
    build_phi_grid_2loc,
    build_phi_grid_3loc,
    build_phi_H,
    build_phi_V,
    build_phi_W,
    grid,
    induced_bibinary,
    periodic_tiling_search,
)
from .locality import INFINITY, distance, view_with_fresh
from .localred import full_pipeline
from .normalform import counter_encoding, threshold_nf
from .satsolver import (
    SatVerdict,
    bounded_sat,
    enumerate_structures,
    sat_exist_local1,
    sat_exist_local2,
    sat_local1_pipeline,
    sat_raw,
)
from .syntax import FormatError, ParseError, parse_formula, print_formula, read_structure, structure_to_obj, write_structure

log = logging.getLogger("locfo")

EXIT_USAGE = 64
EXIT_NOINPUT = 66
EXIT_SOFTWARE = 70

DEFAULT_SEED = 20240917

GADGET_FORMULAS = {
    "grid3loc": build_phi_grid_3loc,
    "grid2loc": build_phi_grid_2loc,
    "phiH": build_phi_H,
    "phiV": build_phi_V,
    "phiW": build_phi_W,
}


class FlagError(Exception):
    pass


class InputFileError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise FlagError(f"{self.prog}: {message}")


@dataclass
class JobConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    gamma: list[str] | None = None
    fragment: str | None = None
    bounds: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        for name, b in self.bounds.items():
            if b is not None and b < 1:
                raise FlagError(f"--{name} must be >= 1")


@dataclass
class Outcome:
    code: int
    verdict: str
    text: str = ""
    witness: object = None
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------- io helpers


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write_text(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputFileError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _load_formula(path: str) -> Formula:
    text = _read_text(path)
    try:
        return parse_formula(text)
    except ParseError as exc:
        raise InputFileError(f"{path}: {exc}") from exc


def _gamma_flag(text: str | None):
    if text is None:
        return None
    try:
        return parse_gamma(text)
    except LocfoError as exc:
        raise FlagError(f"--gamma: {exc}") from exc


def _load_structure(path: str, gamma=None) -> DataStructure:
    text = _read_text(path)
    try:
        return read_structure(text, gamma)
    except FormatError as exc:
        if gamma is not None and "gamma pair" in str(exc):
            raise FlagError(f"--gamma: {exc}") from exc
        raise InputFileError(f"{path}: {exc}") from exc


def _signature_obj(sig: Signature, **extra) -> dict:
    obj = {"sigma": list(sig.sigma), "d": sig.d, "gamma": [f"{i}:{j}" for i, j in sorted(sig.gamma)]}
    obj.update(extra)
    return obj


def _emit(text: str, path: str | None) -> str:
    """Write to ``path`` or return the text for stdout."""
    if path:
        _write_text(path, text + "\n")
        return ""
    return text


# ---------------------------------------------------------------- check


def _leading_block(phi: Formula) -> tuple[type | None, list[str]]:
    kind = type(phi) if isinstance(phi, (Exists, Forall)) else None
    names = []
    p = phi
    while kind is not None and isinstance(p, kind):
        names.append(p.var)
        p = p.body
    return kind, names


def _block_assignment(A: DataStructure, phi: Formula, want: bool) -> dict | None:
    kind, names = _leading_block(phi)
    body = phi
    for _ in names:
        body = body.body
    for combo in itertools.product(A.ids, repeat=len(names)):
        I = dict(zip(names, combo))
        if eval_formula(A, I, body) == want:
            return I
    return None


def cmd_check(args, cfg: JobConfig) -> Outcome:
    A = _load_structure(args.structure, _gamma_flag(args.gamma))
    phi = _load_formula(args.formula)
    value = models(A, phi)
    kind, names = _leading_block(phi)
    witness = None
    if names and ((kind is Exists and value) or (kind is Forall and not value)):
        witness = _block_assignment(A, phi, kind is Exists)
    text = "true" if value else "false"
    if witness:
        label = "witness" if value else "counterexample"
        text += f"\n{label}: " + ", ".join(f"{k}={v}" for k, v in witness.items())
    return Outcome(0 if value else 1, text.split("\n")[0], text, witness)


# ---------------------------------------------------------------- view


def cmd_view(args, cfg: JobConfig) -> Outcome:
    A = _load_structure(args.structure, _gamma_flag(args.gamma))
    V, fresh = view_with_fresh(A, args.element, args.radius)
    sidecar = {"center": args.element, "radius": args.radius, "freshened": [[e, f] for e, f in fresh]}
    text = _emit(write_structure(V), args.output)
    side_path = args.fresh_out or (args.output + ".fresh.json" if args.output else None)
    if side_path:
        _write_text(side_path, json.dumps(sidecar, sort_keys=True) + "\n")
    else:
        log.info("freshened: %s", sidecar["freshened"])
    return Outcome(0, "ok", text, structure_to_obj(V), {"freshened": sidecar["freshened"]})


# ---------------------------------------------------------------- translate


def _value_arity(phi: Formula, override: int | None) -> int:
    if override is not None:
        return override
    return max([1] + [max(i, j) for i, j in rel_pairs(phi)])


def cmd_translate(args, cfg: JobConfig) -> Outcome:
    phi = _load_formula(args.formula)
    side = {}
    if args.pipeline == "nf":
        fv = sorted(free_vars(phi))
        if len(fv) > 1:
            raise ArgumentError(f"normal form needs at most one free variable, got {fv}")
        nf = threshold_nf(phi, fv[0] if fv else None)
        out = nf.formula
        side = {"sigma": list(nf.sigma), "d": 0, "gamma": [], "M": nf.M}
    elif args.pipeline == "twovar":
        sigma, out = counter_encoding(phi)
        side = {"sigma": list(sigma), "d": 0, "gamma": []}
    elif args.pipeline == "loc1":
        res = full_pipeline(phi)
        out = res.phi_hat
        side = _signature_obj(res.signature, M=res.M)
    elif args.pipeline == "exist2":
        red = reduce_exist2(phi)
        out = red.psi
        side = _signature_obj(red.signature, anchors=list(red.anchors))
    else:
        red = reduce_exist1(phi, _value_arity(phi, args.d))
        out = red.psi
        side = _signature_obj(red.signature, anchors=list(red.anchors))
    printed = print_formula(out)
    text = _emit(printed, args.output)
    if args.signature_out:
        _write_text(args.signature_out, json.dumps(side, sort_keys=True) + "\n")
    if "M" in side:
        log.info("M = %d", side["M"])
    log.info("signature: %s", json.dumps(side, sort_keys=True))
    return Outcome(0, "ok", text, None, {"formula": printed, "signature": side})


# ---------------------------------------------------------------- sat


def _verdict_stats(v: SatVerdict) -> dict:
    return {k: s for k, s in v.stats.items() if isinstance(s, (int, float, str))}


def cmd_sat(args, cfg: JobConfig) -> Outcome:
    phi = _load_formula(args.formula)
    if free_vars(phi):
        raise ArgumentError(f"not a sentence, free variables {sorted(free_vars(phi))}")
    n, vb = args.max_size, args.max_val
    if args.fragment == "exist1":
        v = sat_exist_local1(phi, _value_arity(phi, args.d))
    elif args.fragment == "exist2":
        v = sat_exist_local2(phi, n, vb)
    elif args.fragment == "loc1":
        v = sat_local1_pipeline(phi, n, vb)
    else:
        v = sat_raw(phi, n, vb) if args.d is None else bounded_sat(phi, n, vb, d=args.d)
    if v.is_sat and args.witness:
        _write_text(args.witness, write_structure(v.witness) + "\n")
    text = str(v)
    if v.note:
        text += f"\nnote: {v.note}"
    if v.is_sat and not args.witness:
        text += "\n" + write_structure(v.witness)
    witness = structure_to_obj(v.witness) if v.is_sat else None
    return Outcome(v.exit_code, v.status, text, witness, {"bound": v.bound, "stats": _verdict_stats(v)})


# ---------------------------------------------------------------- gadget


def cmd_gadget(args, cfg: JobConfig) -> Outcome:
    if args.gadget == "a2m":
        A = build_a2m(args.m)
        return Outcome(0, "ok", _emit(write_structure(A), args.output), structure_to_obj(A))
    if args.gadget == "formula":
        printed = print_formula(GADGET_FORMULAS[args.name]())
        return Outcome(0, "ok", _emit(printed, args.output), None, {"formula": printed})
    text = _read_text(args.file)
    try:
        D = DominoSystem.from_obj(json.loads(text))
    except (json.JSONDecodeError, ArgumentError) as exc:
        raise InputFileError(f"{args.file}: {exc}") from exc
    if not args.search_tiling:
        phi = build_phi_D(D) if args.radius == 3 else build_phi_D_prime(D)
        printed = print_formula(phi)
        return Outcome(0, "ok", _emit(printed, args.output), None, {"formula": printed})
    found = periodic_tiling_search(D, args.max_m)
    if found is None:
        return Outcome(1, "none", f"no periodic tiling with period <= {args.max_m}")
    m, tau = found
    rows = [f"{i},{j},{tau[(i, j)]}" for j in range(m) for i in range(m)]
    body = f"period {m}\ni,j,domino\n" + "\n".join(rows)
    return Outcome(0, "found", _emit(body, args.output), {f"{i},{j}": t for (i, j), t in sorted(tau.items())})


# ---------------------------------------------------------------- report


def _csv_text(header: Sequence[str], rows: Sequence[Sequence], delimiter: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _report_grid(args) -> tuple[list[str], list[list], object]:
    A = build_a2m(args.m)
    G = induced_bibinary(A)
    n = 2 * args.m
    T = grid(n)
    expected = {"H": set(T.H), "V": set(T.V)}
    rows = []
    for kind, pairs in (("H", G.H), ("V", G.V)):
        for a, b in sorted(pairs, key=lambda p: (a2m_node(p[0]), a2m_node(p[1]))):
            u, w = a2m_node(a), a2m_node(b)
            rows.append([kind, *u, *w, int((u, w) in expected[kind])])
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    for kind, colour, dx in (("H", "tab:blue", 0.06), ("V", "tab:red", -0.06)):
        for r in rows:
            if r[0] != kind:
                continue
            (i, j), (k, l) = r[1:3], r[3:5]
            if abs(k - i) > 1 or abs(l - j) > 1:
                continue
            ax.annotate("", xy=(k + dx, l + dx), xytext=(i + dx, j + dx),
                        arrowprops=dict(arrowstyle="->", color=colour, lw=1))
    ax.scatter([i for i in range(n) for _ in range(n)], [j for _ in range(n) for j in range(n)], s=30, c="k", zorder=3)
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    ax.set_title(f"relations defined in A_{n} (H blue, V red)")
    ax.set_aspect("equal")
    return ["kind", "src_i", "src_j", "dst_i", "dst_j", "in_grid"], rows, fig


def _report_view(args) -> tuple[list[str], list[list], object]:
    A = _load_structure(args.structure, _gamma_flag(args.gamma))
    V, fresh = view_with_fresh(A, args.element, args.radius)
    fresh = set(fresh)
    kept = dict(zip(V.ids, V.values))
    rows = []
    for eid, vs in zip(A.ids, A.values):
        for f, v in enumerate(vs, start=1):
            dist = min((distance(A, (args.element, g), (eid, f)) for g in range(1, A.d + 1)), default=INFINITY)
            in_view = eid in kept
            rows.append([eid, f, v, "inf" if dist == INFINITY else int(dist), int(in_view),
                         kept[eid][f - 1] if in_view else "", int((eid, f) in fresh)])
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(max(4, 0.7 * len(A) + 2), 1.2 * A.d + 1.5))
    for x, (eid, vs) in enumerate(zip(A.ids, A.values)):
        for f, v in enumerate(vs, start=1):
            row = rows[x * A.d + f - 1]
            inside = row[3] != "inf" and row[3] <= args.radius
            colour = "tab:green" if inside else ("tab:orange" if row[4] else "lightgrey")
            ax.add_patch(plt.Rectangle((x - 0.4, f - 0.4), 0.8, 0.8, color=colour))
            ax.text(x, f, str(v), ha="center", va="center")
    ax.set_xticks(range(len(A)), A.ids)
    ax.set_yticks(range(1, A.d + 1), [f"field {f}" for f in range(1, A.d + 1)])
    ax.set_xlim(-0.6, len(A) - 0.4)
    ax.set_ylim(0.4, A.d + 0.6)
    ax.set_title(f"{args.radius}-ball of {args.element}: green inside, orange freshened")
    return ["element", "field", "value", "distance", "in_view", "view_value", "freshened"], rows, fig


def _report_sat(args) -> tuple[list[str], list[list], object]:
    phi = _load_formula(args.formula)
    if free_vars(phi):
        raise ArgumentError(f"not a sentence, free variables {sorted(free_vars(phi))}")
    d = _value_arity(phi, args.d) if rel_pairs(phi) or args.d is not None else 0
    sig = Signature(tuple(sorted(predicates(phi))), d, full_gamma(d))
    rows = []
    for s in range(1, args.max_size + 1):
        t0 = time.perf_counter()
        total = hits = 0
        for A in enumerate_structures(sig, s, args.max_val):
            total += 1
            hits += models(A, phi)
        rows.append([s, total, hits, round(time.perf_counter() - t0, 4)])
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    sizes = [r[0] for r in rows]
    ax.bar([s - 0.2 for s in sizes], [r[1] for r in rows], width=0.4, label="structures")
    ax.bar([s + 0.2 for s in sizes], [r[2] for r in rows], width=0.4, label="models")
    ax.set_yscale("log")
    ax.set_xticks(sizes)
    ax.set_xlabel("universe size")
    ax.set_ylabel("count (up to value renaming)")
    ax.legend(frameon=False)
    return ["size", "structures", "models", "seconds"], rows, fig


REPORTS = {"grid": _report_grid, "view": _report_view, "sat": _report_sat}


def cmd_report(args, cfg: JobConfig) -> Outcome:
    header, rows, fig = REPORTS[args.report](args)
    outdir = Path(args.outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputFileError(f"cannot create {outdir}: {exc.strerror or exc}") from exc
    delim = "\t" if args.delimiter == "tab" else args.delimiter
    table = _csv_text(header, rows, delim)
    stem = outdir / args.report
    _write_text(str(stem) + (".tsv" if delim == "\t" else ".csv"), table)
    fig.tight_layout()
    fig.savefig(str(stem) + f".{args.fig_format}", dpi=150)
    _pyplot().close(fig)
    return Outcome(0, "ok", table.rstrip("\n"), None, {"files": [str(stem) + ext for ext in (".csv" if delim != "\t" else ".tsv", f".{args.fig_format}")]})


# ---------------------------------------------------------------- parser


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _natural(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="locfo", description="Local first-order logic over data structures.")
    p.add_argument("--version", action="version", version=f"locfo {__version__}")
    p.add_argument("--json", action="store_true", help="print a JSON report instead of plain text")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for randomized runs")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="model-check a sentence on a structure")
    c.add_argument("-s", "--structure", required=True)
    c.add_argument("-f", "--formula", required=True)
    c.add_argument("--gamma", help="relation pairs such as 1:1,2:2 (default: all pairs)")

    v = sub.add_parser("view", help="r-view of an element")
    v.add_argument("-s", "--structure", required=True)
    v.add_argument("-e", "--element", required=True)
    v.add_argument("-r", "--radius", type=_natural, required=True)
    v.add_argument("--gamma")
    v.add_argument("-o", "--output")
    v.add_argument("--fresh-out", help="where to write the list of freshened fields")

    t = sub.add_parser("translate", help="run a reduction and print the resulting formula")
    t.add_argument("-f", "--formula", required=True)
    t.add_argument("--pipeline", required=True, choices=["nf", "twovar", "loc1", "exist2", "exist1"])
    t.add_argument("--d", type=_positive, help="value arity for exist1 (default: largest field used)")
    t.add_argument("-o", "--output")
    t.add_argument("--signature-out", help="JSON file for the output signature")

    s = sub.add_parser("sat", help="satisfiability search")
    s.add_argument("-f", "--formula", required=True)
    s.add_argument("--fragment", required=True, choices=["exist1", "exist2", "loc1", "raw"])
    s.add_argument("--max-size", type=_positive, default=4)
    s.add_argument("--max-val", type=_positive)
    s.add_argument("--d", type=_natural, help="value arity (default: largest field used)")
    s.add_argument("--seq", action="store_true", help="sequential search (the only mode implemented)")
    s.add_argument("--witness", help="write the model found as structure JSON")

    g = sub.add_parser("gadget", help="grid and tiling constructions")
    gs = g.add_subparsers(dest="gadget", required=True, parser_class=_Parser)
    ga = gs.add_parser("a2m", help="the 2m x 2m grid structure")
    ga.add_argument("--m", type=_positive, required=True)
    ga.add_argument("-o", "--output")
    gf = gs.add_parser("formula", help="print a grid formula")
    gf.add_argument("name", choices=sorted(GADGET_FORMULAS))
    gf.add_argument("-o", "--output")
    gd = gs.add_parser("domino", help="tiling formula or periodic tiling search")
    gd.add_argument("--file", required=True)
    gd.add_argument("--search-tiling", action="store_true")
    gd.add_argument("--max-m", type=_positive, default=4)
    gd.add_argument("--radius", type=int, choices=[2, 3], default=3)
    gd.add_argument("-o", "--output")

    r = sub.add_parser("report", help="write a figure and a delimited table")
    rs = r.add_subparsers(dest="report", required=True, parser_class=_Parser)
    for name in REPORTS:
        q = rs.add_parser(name)
        q.add_argument("-o", "--outdir", required=True)
        q.add_argument("--delimiter", default=",", help="field delimiter, or 'tab'")
        q.add_argument("--fig-format", default="png", choices=["png", "pdf", "svg"])
        if name == "grid":
            q.add_argument("--m", type=_positive, default=2)
        elif name == "view":
            q.add_argument("-s", "--structure", required=True)
            q.add_argument("-e", "--element", required=True)
            q.add_argument("-r", "--radius", type=_natural, required=True)
            q.add_argument("--gamma")
        else:
            q.add_argument("-f", "--formula", required=True)
            q.add_argument("--max-size", type=_positive, default=3)
            q.add_argument("--max-val", type=_positive)
            q.add_argument("--d", type=_natural)
    return p


COMMANDS = {
    "check": cmd_check,
    "view": cmd_view,
    "translate": cmd_translate,
    "sat": cmd_sat,
    "gadget": cmd_gadget,
    "report": cmd_report,
}


def _config(args) -> JobConfig:
    inputs = {k: getattr(args, k) for k in ("structure", "formula", "file") if getattr(args, k, None)}
    outputs = {k: getattr(args, k) for k in ("output", "witness", "signature_out", "fresh_out", "outdir") if getattr(args, k, None)}
    bounds = {k.replace("_", "-"): getattr(args, k, None) for k in ("max_size", "max_val", "max_m")}
    gamma = args.gamma.split(",") if getattr(args, "gamma", None) else None
    return JobConfig(args.command, inputs, gamma, getattr(args, "fragment", None), bounds, outputs, args.seed)


def run(argv: Sequence[str] | None = None) -> int:
    json_mode = "--json" in (argv if argv is not None else sys.argv[1:])
    t0 = time.perf_counter()
    command = None

    def fail(code: int, message: str) -> int:
        print(f"locfo: {message}", file=sys.stderr)
        if json_mode:
            print(json.dumps({"command": command, "verdict": "error", "error": message, "exit": code,
                              "timings": {"total": time.perf_counter() - t0}}, sort_keys=True))
        return code

    try:
        args = build_parser().parse_args(argv)
        command = args.command
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        cfg = _config(args)
        out = COMMANDS[args.command](args, cfg)
    except FlagError as exc:
        return fail(EXIT_USAGE, str(exc))
    except InputFileError as exc:
        return fail(EXIT_NOINPUT, str(exc))
    except LocfoError as exc:
        return fail(EXIT_SOFTWARE, f"{type(exc).__name__}: {exc}")
    elapsed = time.perf_counter() - t0
    if args.json:
        report = {"command": command, "verdict": out.verdict, "exit": out.code, "timings": {"total": elapsed}}
        if out.witness is not None:
            report["witness"] = out.witness
        report.update(out.extra)
        print(json.dumps(report, sort_keys=True))
    elif out.text:
        print(out.text)
    return out.code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        return run(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0


if __name__ == "__main__":
    sys.exit(main())
