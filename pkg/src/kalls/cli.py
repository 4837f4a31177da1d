"""Command line entry point: ``kalls run | verify | report``."""

from __future__ import annotations

import argparse
import sys
from collections import defaultdict
from dataclasses import fields

from .errors import InvalidInputError
from .evaluation import active_exponent, fit_rate, passive_exponent
from .experiment import (
    CSV_COLUMNS,
    ExperimentConfig,
    MalformedRecords,
    load_config,
    parse_budgets,
    read_records,
    run_sweep,
    sweep_summary,
    write_json,
    write_records,
)
from .problems import FAMILIES, resolve_family, verify_holder, verify_margin_noise, verify_smoothness, verify_density_smoothness

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2

SCHEMA_HELP = f"""\
experiment CSV (one row per run, sorted by family, mode, budget, replication):
  {", ".join(CSV_COLUMNS)}
  mode is kalls or passive; degenerate_flag is 0/1; margin_agreement is empty
  when no test draw lies beyond the margin. Passive rows report n as both
  active_set_size and retained_size.

families: {", ".join(FAMILIES)}  (parameters as name:key=value,...;
  alpha, L, beta, C override the declared constants)

seeding: replication r at budget position b uses
  SeedSequence([seed, b, r]).generate_state(1)[0], recorded in the seed column.

exit codes: 0 success, 1 usage or config error, 2 verification failure
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kalls", description=__doc__, epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a seeded budget sweep", epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    run.add_argument("--config", help="flat key = value file; flags override it")
    run.add_argument("--family")
    run.add_argument("--mode", choices=("kalls", "passive", "both"))
    run.add_argument("--pool-size", help="integer, or a budget multiple such as 20n")
    run.add_argument("--budgets", help="comma separated, e.g. 250,500,1000")
    run.add_argument("--epsilon", type=float)
    run.add_argument("--delta", type=float)
    run.add_argument("--reps", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--test-size", type=int, help="Monte Carlo sample size for risk estimates")
    run.add_argument("--out", help="experiment CSV path (default: standard output)")
    run.add_argument("--summary", help="JSON summary path")
    run.add_argument("--trace-dir", help="directory for per-run trace, query log and JSON")
    run.add_argument("--recharge-duplicates", action="store_true", default=None, help="charge repeated queries of a cached point")

    verify = sub.add_parser("verify", help="check a family's declared assumption constants")
    verify.add_argument("--family", required=True)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--sample-size", type=int, default=100_000)
    verify.add_argument("--pairs", type=int, default=1000)

    report = sub.add_parser("report", help="fit rates from an experiment CSV", epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    report.add_argument("csv")
    return parser


def config_from_args(args) -> ExperimentConfig:
    values = load_config(args.config) if args.config else {}
    for f in fields(ExperimentConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = parse_budgets(flag) if f.name == "budgets" else flag
    return ExperimentConfig(**values)


def cmd_run(config: ExperimentConfig) -> int:
    records = run_sweep(config)
    write_records(config.out or sys.stdout, records)
    if config.summary:
        write_json(config.summary, sweep_summary(config, records))
    return EXIT_OK


def cmd_verify(family: str, seed: int = 0, sample_size: int = 100_000, pairs: int = 1000) -> int:
    spec = resolve_family(family)
    reports = []
    if spec.holder is not None:
        reports.append(verify_holder(spec, pairs, seed))
    reports.append(verify_margin_noise(spec, sample_size, seed=seed))
    reports.append(verify_smoothness(spec, pairs, sample_size, seed))
    for r in reports:
        print(r.line())
    if spec.density is None:
        print("T1: skipped  (no density lower bound)")
    else:
        report = verify_density_smoothness(spec, pairs, seed, sample_size)
        reports.append(report)
        print(report.line())
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


def _theory(family: str, mode: str) -> str:
    try:
        spec = resolve_family(family)
    except InvalidInputError:
        return ""
    fn = active_exponent if mode == "kalls" else passive_exponent
    return f"{fn(spec.alpha, spec.beta, spec.dim):.3f}"


def cmd_report(path: str) -> int:
    records = read_records(path)
    if not records:
        raise MalformedRecords(f"{path}: no data rows")
    grouped = defaultdict(lambda: defaultdict(list))
    for r in records:
        grouped[(r.family, r.mode)][r.n].append(r.excess_risk)
    fits = {}
    print(f"{'family':<28} {'mode':<8} {'budgets':>7} {'slope':>8} {'r2':>6} {'theory':>7}")
    for (family, mode), by_n in sorted(grouped.items()):
        points = [(n, sum(v) / len(v)) for n, v in sorted(by_n.items())]
        try:
            fit = fit_rate(points)
        except InvalidInputError as exc:
            print(f"{family:<28} {mode:<8} {len(points):>7} {'n/a':>8}   ({exc})")
            continue
        fits[(family, mode)] = fit
        print(f"{family:<28} {mode:<8} {len(points):>7} {fit.slope:>8.3f} {fit.r_squared:>6.3f} {_theory(family, mode):>7}")
    for family in sorted({f for f, _ in fits}):
        if (family, "kalls") in fits and (family, "passive") in fits:
            gap = fits[(family, "kalls")].slope - fits[(family, "passive")].slope
            print(f"{family:<28} {'gap':<8} {'':>7} {gap:>8.3f}   (kalls minus passive)")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(config_from_args(args))
        if args.command == "verify":
            return cmd_verify(args.family, args.seed, args.sample_size, args.pairs)
        return cmd_report(args.csv)
    except (InvalidInputError, OSError) as exc:
        print(f"kalls: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
