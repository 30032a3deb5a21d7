"""``pestov-lab check <suite>``: run check suites and write a JSON report.

Settings come from an optional flat ``key = value`` file (``--config``) and
from flags; flags win. Exit status is 0 when every record is fine, 1 when a
check failed and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, fields

from .manifolds import get_manifold
from .suites import SUITES, Settings, record_ok, run_suites

SCHEMA_VERSION = 1


def read_config(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes equal underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, val = (t.strip() for t in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _parser():
    p = argparse.ArgumentParser(prog="pestov-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command")
    c = sub.add_parser("check", help="run check suites")
    c.add_argument("suite_pos", nargs="?", metavar="suite", help="pointwise, integrated, grassmannian or all")
    c.add_argument("--suite", action="append", help="suite to run (repeatable, or comma separated)")
    c.add_argument("--config", help="key = value settings file; flags override it")
    c.add_argument("--manifold", help="torus:3, sphere:2, hyperbolic:2, ctorus:4, product:H2xH2, ...")
    c.add_argument("--k", type=int, help="frame size (plane dimension for the grassmannian suite)")
    c.add_argument("--i", type=int, help="first identity index (0-based)")
    c.add_argument("--j", type=int, help="second identity index (0-based)")
    c.add_argument("--fd-step", type=float)
    c.add_argument("--ode-step", type=float)
    c.add_argument("--samples", type=int, help="Monte Carlo samples per integrated check")
    c.add_argument("--pairs", type=int, help="(frame, function) pairs per pointwise identity")
    c.add_argument("--loops", type=int, help="random transports per invariance check")
    c.add_argument("--seed", type=int)
    c.add_argument("--tolerance", type=float, help="relative residual tolerance for pointwise checks")
    c.add_argument("--report", help="write the JSON report here (default: stdout)")
    return p


def _suites(args, cfg):
    raw = []
    if args.suite_pos:
        raw.append(args.suite_pos)
    for item in args.suite or []:
        raw.append(item)
    if not raw and "suite" in cfg:
        raw.append(cfg["suite"])
    names = [t.strip() for item in raw for t in item.split(",") if t.strip()]
    if "all" in names:
        names = list(SUITES)
    unknown = [t for t in names if t not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}")
    return list(dict.fromkeys(names))


def settings_from(args, cfg) -> Settings:
    types = {f.name: f.type for f in fields(Settings)}
    values = {}
    for name in types:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
        elif name in cfg:
            values[name] = cfg[name]
    if "manifold" not in values:
        raise ValueError("--manifold is required")
    if "k" not in values:
        raise ValueError("--k is required")
    casts = {"manifold": str, "k": int, "seed": int, "i": int, "j": int, "samples": int, "pairs": int,
             "loops": int, "fd_step": float, "ode_step": float, "tolerance": float}
    return Settings(**{key: casts[key](val) for key, val in values.items()})


def build_report(settings: Settings, suites, records) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "settings": asdict(settings),
        "suites": suites,
        "records": records,
        "summary": {
            "n_records": len(records),
            "by_verdict": {v: sum(r["verdict"] == v for r in records) for v in sorted({r["verdict"] for r in records})},
            "ok": all(record_ok(r) for r in records),
        },
    }


def run(settings: Settings, suites) -> tuple[int, dict]:
    m = get_manifold(settings.manifold)
    if not 1 <= settings.k:
        raise ValueError("k must be positive")
    records = run_suites(suites, settings, m)
    report = build_report(settings, suites, records)
    return (0 if report["summary"]["ok"] else 1), report


def dumps(report) -> str:
    return json.dumps(report, sort_keys=True, indent=1, ensure_ascii=False, allow_nan=False) + "\n"


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    if args.command != "check":
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = read_config(args.config) if args.config else {}
        suites = _suites(args, cfg)
        if not suites:
            print("pestov-lab check: no suite selected", file=sys.stderr)
            return 2
        settings = settings_from(args, cfg)
        if settings.k > get_manifold(settings.manifold).dim:
            raise ValueError("k cannot exceed the manifold dimension")
    except (OSError, ValueError, KeyError) as err:
        print(f"pestov-lab check: {err}", file=sys.stderr)
        return 2
    code, report = run(settings, suites)
    text = dumps(report)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    summary = report["summary"]
    print(f"{summary['n_records']} records, {summary['by_verdict']}, ok={summary['ok']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
