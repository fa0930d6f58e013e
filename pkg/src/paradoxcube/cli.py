"""Command-line entry point: ``paradoxcube <command> ...``.

Every command prints one JSON document (``"schema": "sp-report/1"``) to
stdout or to ``--output``. Failures print a JSON error object to stderr and
exit with 2 (usage), 3 (data) or 4 (infeasible generation).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import report
from .errors import DataError, Infeasible, ParadoxCubeError
from .lattice import parse_population
from .materialize import (
    cache_key,
    load_cached,
    materialize_bruteforce,
    materialize_dfs,
    parse_theta,
    store_cached,
)
from .paradox import AssocConfig, discover, discover_bruteforce
from .robustness import KINDS, PerturbConfig, run
from .synth import (
    SynthSpec,
    describe_plants,
    generate,
    unique_records,
    with_extra_attributes,
    with_label_copies,
)
from .table import BaseTable, load_csv, write_csv

log = logging.getLogger("paradoxcube")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 2, 3, 4


class UsageError(ParadoxCubeError):
    pass


def _default_seed() -> int:
    raw = os.environ.get("SP_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SP_SEED must be an integer, got {raw!r}") from None


def _ms(start: float) -> float:
    return round((time.perf_counter() - start) * 1000, 3)


# ---------------------------------------------------------------------------
# table loading and output


def _positive_values(pairs: list[str]) -> dict[str, str]:
    out = {}
    for item in pairs:
        col, sep, val = item.partition("=")
        if not sep or not col:
            raise UsageError(f"--positive-value expects COL=VAL, got {item!r}")
        out[col] = val
    return out


def _load(args) -> BaseTable:
    if not args.labels:
        raise UsageError("--labels is required")
    return load_csv(
        args.input,
        [c.strip() for c in args.labels.split(",") if c.strip()],
        positive_values=_positive_values(args.positive_value),
        drop_missing=args.drop_missing or None,
        ignore_columns=[c.strip() for c in (args.ignore or "").split(",") if c.strip()],
    )


def _loader_options(args) -> str:
    return json.dumps(
        [args.labels, sorted(args.positive_value), args.drop_missing, args.ignore], sort_keys=True
    )


def _emit(args, doc: dict) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _header(command: str, **extra) -> dict:
    return {"schema": report.SCHEMA, "command": command, **extra}


def _table_meta(table: BaseTable) -> dict:
    return {"records": table.n_records, "attributes": table.n_attrs, "labels": table.m_labels}


def _materialize(args, table: BaseTable):
    theta = parse_theta(args.theta)
    key = None
    if args.cache_dir:
        key = cache_key(args.input, theta, _loader_options(args))
        cached = load_cached(args.cache_dir, key)
        if cached is not None:
            log.info("materialization loaded from cache %s", key)
            return cached, 0.0
    start = time.perf_counter()
    mat = materialize_dfs(table, theta, workers=args.threads)
    elapsed = _ms(start)
    if key is not None:
        store_cached(args.cache_dir, key, mat)
    return mat, elapsed


# ---------------------------------------------------------------------------
# commands


def cmd_materialize(args) -> int:
    table = _load(args)
    mat, mat_ms = _materialize(args, table)
    doc = _header("materialize", theta=str(mat.theta), table=_table_meta(table))
    doc["counts"] = {"coverage_groups": len(mat.groups)}
    if not args.omit_timing:
        doc["timing"] = {"materialize_ms": mat_ms}
    doc["coverage_groups"] = mat.to_json(table)
    _emit(args, doc)
    return EXIT_OK


def _discovery(args, table: BaseTable) -> report.DiscoveryReport:
    mat, mat_ms = _materialize(args, table)
    start = time.perf_counter()
    verify = getattr(args, "verify_hashes", False)
    groups = discover(table, mat, strict_empty=args.strict_empty, verify_hashes=verify)
    timing = {"materialize_ms": mat_ms, "discover_ms": _ms(start)}
    return report.summarize_groups(table, groups, timing, getattr(args, "emit_members", False))


def cmd_discover(args) -> int:
    table = _load(args)
    rep = _discovery(args, table)
    head = _header("discover", theta=str(parse_theta(args.theta)), table=_table_meta(table))
    head["counts"] = rep.counts
    if not args.omit_timing:
        head["timing"] = rep.timing
    if args.compare_table4:
        sys.stderr.write(report.compare_block(rep.counts) + "\n")
    if args.ndjson:
        lines = [json.dumps(head)] + [json.dumps(g) for g in rep.groups]
        text = "\n".join(lines) + "\n"
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    head["groups"] = rep.groups
    _emit(args, head)
    return EXIT_OK


def cmd_bruteforce(args) -> int:
    table = _load(args)
    theta = parse_theta(args.theta)
    start = time.perf_counter()
    mat = materialize_bruteforce(table, theta)
    mat_ms = _ms(start)
    start = time.perf_counter()
    found = discover_bruteforce(table, mat, strict_empty=args.strict_empty)
    timing = {"materialize_ms": mat_ms, "discover_ms": _ms(start)}
    body = report.summarize_paradoxes(table, found, timing, args.emit_members)
    doc = _header("bruteforce", theta=str(theta), table=_table_meta(table))
    doc["counts"] = body["counts"]
    if not args.omit_timing:
        doc["timing"] = timing
    if "paradoxes" in body:
        doc["paradoxes"] = body["paradoxes"]
    _emit(args, doc)
    return EXIT_OK


def _spec_from(args, seed: int) -> SynthSpec:
    return SynthSpec(
        n_attrs=args.n_attrs,
        m_labels=args.m_labels,
        domain_size=args.domain_size,
        paradox_size=args.paradox_size,
        target_unique=args.target_unique,
        seed=seed,
        enable_sibling=not args.no_sibling,
        enable_separator=not args.no_separator,
        enable_statistic=not args.no_statistic,
        margin=Fraction(args.margin),
    )


def cmd_generate(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    spec = _spec_from(args, seed)
    table, plans = generate(spec)
    write_csv(table, args.csv)
    doc = _header("generate", seed=seed, csv=str(args.csv), table=_table_meta(table))
    doc["spec"] = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in vars(spec).items()}
    doc["counts"] = {"records": table.n_records, "unique_records": unique_records(table), "plants": len(plans)}
    doc["label_columns"] = list(table.label_names)
    doc["plants"] = describe_plants(table, plans)
    _emit(args, doc)
    return EXIT_OK


def _parse_config(table: BaseTable, text: str) -> AssocConfig:
    parts = [p.strip() for p in text.split(";")]
    if len(parts) != 4:
        raise UsageError(f"--config expects 'S1;S2;SEPARATOR;LABEL', got {text!r}")
    s1, s2 = parse_population(table, parts[0]), parse_population(table, parts[1])
    return AssocConfig(s1, s2, table.attr_index(parts[2]), table.label_index(parts[3]))


def cmd_perturb(args) -> int:
    table = _load(args)
    seed = _default_seed() if args.seed is None else args.seed
    cfg = PerturbConfig(
        fraction=Fraction(args.fraction),
        trials=args.trials,
        seed=seed,
        kind=args.kind,
        robust_threshold=Fraction(args.threshold),
        exact_count=args.exact_count,
        include_separators=args.include_separators,
    )
    subjects: list = [_parse_config(table, c) for c in args.config]
    if args.group or not subjects:
        mat, _ = _materialize(args, table)
        groups = discover(table, mat, strict_empty=args.strict_empty)
        wanted = args.group if args.group else range(min(len(groups), args.max_subjects))
        for gid in wanted:
            if not 0 <= gid < len(groups):
                raise UsageError(f"group id {gid} outside 0..{len(groups) - 1}")
            subjects.append(groups[gid])
    checksum = table.checksum()
    reports = [run(table, s, cfg).to_json() for s in subjects]
    if table.checksum() != checksum:
        raise RuntimeError("perturbation modified the input table")
    doc = _header("perturb", theta=str(parse_theta(args.theta)), seed=seed, kind=cfg.kind)
    doc["config"] = {
        "fraction": str(cfg.fraction),
        "trials": cfg.trials,
        "robust_threshold": str(cfg.robust_threshold),
    }
    doc["counts"] = {"subjects": len(reports), "robust": sum(r["robust"] for r in reports)}
    doc["reports"] = reports
    _emit(args, doc)
    return EXIT_OK


def _sweep(manifest: dict) -> list[dict]:
    """Rows of counts for a label-count or attribute-count sweep over one generated table."""
    base = dict(manifest["base"])
    param = manifest["param"]
    if param not in ("m_labels", "n_attrs"):
        raise UsageError(f"sweep parameter must be m_labels or n_attrs, got {param!r}")
    table, _ = generate(SynthSpec(**base))
    theta = manifest.get("theta", "0")
    rows = []
    for value in manifest["values"]:
        if param == "m_labels":
            t = with_label_copies(table, int(value))
        else:
            t = with_extra_attributes(table, int(value), base["domain_size"], base.get("seed", 0) + 1)
        groups = discover(t, materialize_dfs(t, theta))
        rep = report.summarize_groups(t, groups, {})
        rows.append({param: value, **rep.counts})
    return rows


def cmd_stats(args) -> int:
    doc = _header("stats")
    if args.sweep:
        manifest = json.loads(Path(args.sweep).read_text())
        doc["sweep"] = {"param": manifest["param"], "rows": _sweep(manifest)}
    if args.report:
        prior = json.loads(Path(args.report).read_text())
        sizes = [g["members"] for g in prior.get("groups", [])]
        doc["histogram"] = report.member_histogram(sizes)
    elif args.input:
        table = _load(args)
        rep = _discovery(args, table)
        doc["theta"] = str(parse_theta(args.theta))
        doc["counts"] = rep.counts
        doc["histogram"] = report.member_histogram(g["members"] for g in rep.groups)
    elif not args.sweep:
        raise UsageError("stats needs an input CSV, --report or --sweep")
    _emit(args, doc)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _table_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("input", nargs=None if required else "?", help="CSV file with a header row")
    p.add_argument("--labels", help="comma-separated label columns")
    p.add_argument(
        "--positive-value",
        action="append",
        default=[],
        metavar="COL=VAL",
        help="value counted as positive in a two-valued label column",
    )
    p.add_argument("--ignore", help="comma-separated columns to leave out")
    p.add_argument("--drop-missing", action="append", metavar="TOKEN", help="drop rows holding TOKEN")
    p.add_argument("--theta", default="0", help="pruning threshold as a decimal or fraction")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--cache-dir", help="reuse materializations across runs")
    p.add_argument("--strict-empty", action="store_true", help="one-sided separator values void a paradox")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--output", help="write JSON here instead of stdout")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="paradoxcube", description="Redundancy-aware Simpson's paradox mining")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("materialize", help="coverage groups of all populations")
    _table_args(p)
    _common(p)
    p.add_argument("--omit-timing", action="store_true")
    p.set_defaults(func=cmd_materialize)

    p = sub.add_parser("discover", help="paradoxes grouped by redundancy")
    _table_args(p)
    _common(p)
    p.add_argument("--verify-hashes", action="store_true", help="confirm hash matches on record sets")
    p.add_argument("--emit-members", action="store_true", help="list every paradox of every group")
    p.add_argument("--ndjson", action="store_true", help="one JSON object per line, groups streamed")
    p.add_argument("--omit-timing", action="store_true", help="leave timings out for byte-stable output")
    p.add_argument("--compare-table4", action="store_true", help="print counts beside the published Adult counts")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("bruteforce", help="exhaustive baseline without grouping")
    _table_args(p)
    _common(p)
    p.add_argument("--emit-members", action="store_true")
    p.add_argument("--omit-timing", action="store_true")
    p.set_defaults(func=cmd_bruteforce)

    p = sub.add_parser("generate", help="synthetic table with planted redundant paradoxes")
    _common(p)
    p.add_argument("--csv", required=True, help="where to write the generated table")
    p.add_argument("--n-attrs", type=int, default=6)
    p.add_argument("--m-labels", type=int, default=2)
    p.add_argument("--domain-size", type=int, default=4)
    p.add_argument("--paradox-size", type=int, default=100)
    p.add_argument("--target-unique", type=int, default=256)
    p.add_argument("--margin", default="1/100")
    p.add_argument("--seed", type=int, help="defaults to $SP_SEED, then 0")
    p.add_argument("--no-sibling", action="store_true")
    p.add_argument("--no-separator", action="store_true")
    p.add_argument("--no-statistic", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("perturb", help="survival rates under random perturbation")
    _table_args(p)
    _common(p)
    p.add_argument("--kind", choices=KINDS, default="label")
    p.add_argument("--fraction", default="1/20")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--threshold", default="19/20", help="survival rate that counts as robust")
    p.add_argument("--seed", type=int, help="defaults to $SP_SEED, then 0")
    p.add_argument("--exact-count", action="store_true", help="coverage kind: exact positive counts")
    p.add_argument("--include-separators", action="store_true", help="separator kind: alter the separators too")
    p.add_argument("--group", type=int, action="append", default=[], help="group id from a discover run")
    p.add_argument("--config", action="append", default=[], help="'S1;S2;SEPARATOR;LABEL'")
    p.add_argument("--max-subjects", type=int, default=50, help="groups tested when none are named")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("stats", help="group-size histogram and sweep tables")
    _table_args(p, required=False)
    _common(p)
    p.add_argument("--report", help="histogram from a prior discover JSON instead of a CSV")
    p.add_argument("--sweep", help="JSON manifest: {base: generator args, param, values, theta}")
    p.set_defaults(func=cmd_stats)
    return ap


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, Infeasible):
        return EXIT_INFEASIBLE
    if isinstance(exc, (DataError, OSError, json.JSONDecodeError)):
        return EXIT_DATA
    return EXIT_USAGE


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be at least 1")
        return args.func(args)
    except (ParadoxCubeError, OSError, ValueError, json.JSONDecodeError, KeyError) as exc:
        code = _exit_code(exc)
        err = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
        sys.stderr.write(json.dumps({"schema": report.SCHEMA, "error": err}) + "\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
