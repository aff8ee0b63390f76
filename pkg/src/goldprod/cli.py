"""Command line front end: ``goldprod classify | check-map | verify | catalog list``.

Exit codes: 0 when everything checked passes, 1 on a verification failure,
2 on a configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from .classifier import NOT_EVALUABLE, classify
from .config import ConfigError, Workspace, builtin_catalog, load_config
from .maps import constancy_diagnostic, harmonicity_report, intertwining_class, tension_at
from .structures import CompatibilityWarning
from .suites import SUITES, run_suites

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2

U64_MAX = 2**64 - 1


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--catalog", nargs="+", metavar="NAME", default=[],
                        help="entries to use ('all' for every entry); defaults to all")
    common.add_argument("--config", metavar="PATH", help="workspace JSON file used instead of the built-in catalog")
    common.add_argument("--seed", type=_seed, help="sampling seed (unsigned 64-bit)")
    common.add_argument("--points", type=_positive_int, help="sample points per check")
    common.add_argument("--tol", type=_positive_float, help="flag tolerance")
    common.add_argument("--format", choices=("text", "json"), default="text")

    parser = argparse.ArgumentParser(
        prog="goldprod",
        description="Sampled verification of product and golden structures, their metrics and maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="classify structures into named classes")
    sub.add_parser("check-map", parents=[common], help="intertwining and harmonicity of maps")
    verify = sub.add_parser("verify", parents=[common], help="run verification suites")
    verify.add_argument("--suite", nargs="+", metavar="NAME", choices=sorted(SUITES), default=None,
                        help="suites to run (default: all)")
    catalog = sub.add_parser("catalog", help="inspect the built-in catalog")
    catalog.add_argument("action", choices=("list",))
    catalog.add_argument("--format", choices=("text", "json"), default="text")
    return parser


def _workspace(args) -> Workspace:
    ws = load_config(args.config) if args.config else builtin_catalog()
    ws = ws.select(args.catalog)
    return ws.with_overrides(seed=args.seed, points=args.points, tol=args.tol)


def _dump(obj) -> str:
    def default(o):
        if isinstance(o, (np.generic,)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"cannot serialise {type(o).__name__}")

    return json.dumps(obj, sort_keys=True, indent=2, default=default)


def run_classify(ws: Workspace) -> tuple[int, dict, str]:
    s = ws.sampling
    reports = []
    for name, e in ws.entries.items():
        reports.append(classify(e.manifold, e.structure, ws.sample(e.manifold), s.fields, ws.tolerances.flag, s.seed))
    ok = all(f.status != NOT_EVALUABLE for r in reports for f in r.flags)
    doc = {"command": "classify", "reports": [r.to_dict() for r in reports]}
    text = "\n\n".join(r.to_text() for r in reports) if reports else "no structures selected"
    return (EXIT_OK if ok else EXIT_FAIL), doc, text


def _map_report(ws: Workspace, name: str, m) -> tuple[bool, dict, list[str]]:
    F = m.map
    pts = ws.sample(F.source)
    tol = ws.tolerances.flag
    centre = np.array([(lo + hi) / 2 for lo, hi in F.source.sample_box])
    doc = {"map": name, "source": F.source.name, "target": F.target.name, "provenance": m.provenance}
    lines = [f"map {name}: {F.source.name} -> {F.target.name}"]
    ok = True
    if m.source_structure is not None:
        cls = intertwining_class(F, m.source_structure, m.target_structure, pts, tol)
        diagnostics = constancy_diagnostic(F, m.source_structure, m.target_structure, pts, tol) + cls.diagnostics
        cls.diagnostics = diagnostics
        doc["intertwining"] = cls.to_dict()
        lam = "none" if cls.lam is None else f"{cls.lam:+d}"
        held = [k for k, v in cls.flags.items() if v]
        lines.append(f"  intertwining (lambda {lam}): " + (", ".join(held) if held else "no relation holds"))
        for k in cls.residuals:
            lines.append(f"    {k:<22} {'yes' if cls.flags[k] else 'no':<4} residual {cls.residuals[k]:.3e}")
        for d in diagnostics:
            lines.append(f"  diagnostic: {d}")
        ok = ok and not diagnostics
        rep = harmonicity_report(F, m.source_structure, m.target_structure, pts, tol,
                                 ws.sampling.fields, ws.sampling.seed, intertwining=cls)
        res = tension_at(F, centre, m.source_structure, m.target_structure, lam=cls.lam or 1)
    else:
        rep = harmonicity_report(F, None, None, pts, tol, ws.sampling.fields, ws.sampling.seed)
        res = tension_at(F, centre)
    doc["harmonicity"] = rep.to_dict()
    doc["tension_at_centre"] = {
        "point": centre.tolist(),
        "tension": res.tension.tolist(),
        "d_tension_plus": None if res.d_tension_plus is None else res.d_tension_plus.tolist(),
        "d_tension_minus": None if res.d_tension_minus is None else res.d_tension_minus.tolist(),
        "split_mode": res.split_mode,
    }
    fmt = lambda v: "(" + ", ".join(f"{c:.6g}" for c in v) + ")"
    lines.append(f"  harmonic: {'yes' if rep.harmonic else 'no'} (max tension {rep.max_tension:.3e})")
    if rep.max_plus is not None:
        lines.append(f"  plus-eigen harmonic: {'yes' if rep.plus_harmonic else 'no'} (max {rep.max_plus:.3e}), "
                     f"minus-eigen harmonic: {'yes' if rep.minus_harmonic else 'no'} (max {rep.max_minus:.3e}), "
                     f"split by {rep.split_mode}")
    lines.append(f"  tension at {fmt(centre)}: {fmt(res.tension)}")
    for note in rep.notes:
        state = "not applicable" if not note.applicable else ("holds" if note.conclusion_holds else "FAILS")
        lines.append(f"  {note.name}: {state} ({note.detail})")
        if note.applicable and note.conclusion_holds is False:
            ok = False
    return ok, doc, lines


def run_check_map(ws: Workspace) -> tuple[int, dict, str]:
    docs, blocks, ok = [], [], True
    for name, m in ws.maps.items():
        good, doc, lines = _map_report(ws, name, m)
        ok = ok and good
        docs.append(doc)
        blocks.append("\n".join(lines))
    header = "sampled verification, not proof"
    text = header + "\n" + ("\n\n".join(blocks) if blocks else "no maps selected")
    return (EXIT_OK if ok else EXIT_FAIL), {"command": "check-map", "header": header, "maps": docs}, text


def run_verify(ws: Workspace, suites=None) -> tuple[int, dict, str]:
    checks = run_suites(ws, suites)
    ok = all(c.passed for c in checks)
    s = ws.sampling
    doc = {
        "command": "verify",
        "passed": ok,
        "sampling": {"seed": s.seed, "points": s.points, "fields": s.fields},
        "checks": [c.to_dict() for c in checks],
    }
    lines = [c.line() for c in checks]
    lines.append(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
    return (EXIT_OK if ok else EXIT_FAIL), doc, "\n".join(lines)


def run_catalog_list() -> tuple[int, dict, str]:
    ws = builtin_catalog()
    entries = [
        {"name": n, "type": "structure", "manifold": e.manifold.name, "kind": e.structure.kind.value,
         "provenance": e.provenance}
        for n, e in ws.entries.items()
    ] + [
        {"name": n, "type": "map", "source": m.map.source.name, "target": m.map.target.name,
         "provenance": m.provenance}
        for n, m in ws.maps.items()
    ]
    lines = []
    for item in entries:
        where = item.get("manifold") or f"{item['source']} -> {item['target']}"
        lines.append(f"{item['name']:<18} {item['type']:<9} {where:<20} {item['provenance']}")
    return EXIT_OK, {"command": "catalog list", "entries": entries}, "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CompatibilityWarning)
            if args.command == "catalog":
                code, doc, text = run_catalog_list()
            else:
                ws = _workspace(args)
                if args.command == "classify":
                    code, doc, text = run_classify(ws)
                elif args.command == "check-map":
                    code, doc, text = run_check_map(ws)
                else:
                    code, doc, text = run_verify(ws, args.suite)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(_dump(doc) if args.format == "json" else text)
    return code


if __name__ == "__main__":
    sys.exit(main())
