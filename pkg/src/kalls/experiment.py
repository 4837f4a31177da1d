"""Seeded budget sweeps and their CSV / JSON records.

Seeding rule: the replication at budget position ``b`` and replication
number ``r`` uses ``run_seed = SeedSequence([base_seed, b, r]).generate_state(1)[0]``.
The pool, the oracle and the test sample are then seeded with
``[run_seed, 0]``, ``[run_seed, 1]`` and ``[run_seed, 2]``, so any single row
can be reproduced from its ``seed`` column alone. Both modes of a
replication share the same pool and test sample.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .algorithm import KallsParams, KallsRun, delta_hat, run_kalls
from .baseline import PassiveParams, choose_k_n, train_passive
from .errors import InvalidInputError, UndefinedResultError
from .evaluation import excess_risk, margin_agreement
from .oracle import BudgetedOracle
from .problems import ProblemSpec, resolve_family, sample_pool

CSV_COLUMNS = (
    "family",
    "mode",
    "n",
    "seed",
    "excess_risk",
    "std_error",
    "margin_agreement",
    "active_set_size",
    "retained_size",
    "degenerate_flag",
)
TRACE_COLUMNS = ("s", "decision", "n_queries", "mean_q", "tau", "y_hat", "charged_total")
MODES = ("kalls", "passive", "both")


@dataclass
class ExperimentConfig:
    family: str = "linear-1d"
    mode: str = "both"
    pool_size: str = "20n"
    budgets: list[int] = field(default_factory=lambda: [250, 500, 1000, 2000, 4000])
    epsilon: float = 0.2
    delta: float = 0.1
    reps: int = 20
    seed: int = 0
    test_size: int = 10_000
    out: str | None = None
    summary: str | None = None
    trace_dir: str | None = None
    recharge_duplicates: bool = False

    def validate(self) -> ProblemSpec:
        if self.mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.reps < 1:
            raise InvalidInputError("reps must be >= 1")
        if not self.budgets:
            raise InvalidInputError("at least one budget is required")
        if any(n < 0 for n in self.budgets):
            raise InvalidInputError("budgets must be nonnegative")
        if self.test_size < 1:
            raise InvalidInputError("test_size must be >= 1")
        for n in self.budgets:
            if n > self.pool_for(n):
                raise InvalidInputError(f"budget {n} exceeds pool size {self.pool_for(n)}")
            if self.mode != "kalls" and n < 1:
                raise InvalidInputError("passive mode needs budgets >= 1")
        if not 0.0 < self.epsilon < 1.0 or not 0.0 < self.delta < 1.0:
            raise InvalidInputError("epsilon and delta must lie in (0, 1)")
        return resolve_family(self.family)

    def pool_for(self, n: int) -> int:
        """Pool size for budget ``n``: an integer, or a multiple written ``<k>n``."""
        text = str(self.pool_size).strip()
        try:
            if text.endswith("n"):
                w = math.ceil(float(text[:-1] or 1) * max(n, 1))
            else:
                w = int(text)
        except ValueError:
            raise InvalidInputError(f"bad pool size {self.pool_size!r}") from None
        if w < 1:
            raise InvalidInputError("pool size must be >= 1")
        return w


_CONFIG_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, value: str):
    kind = _CONFIG_TYPES[key]
    if kind == "bool":
        return value.strip().lower() in ("1", "true", "yes", "on")
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    if kind.startswith("list"):
        return parse_budgets(value)
    return value.strip()


def parse_budgets(text: str) -> list[int]:
    return [int(tok) for tok in str(text).replace(";", ",").split(",") if tok.strip()]


def load_config(path) -> dict:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _CONFIG_TYPES:
            raise InvalidInputError(f"{path}:{lineno}: unrecognized config line {raw!r}")
        try:
            values[key] = _coerce(key, value)
        except ValueError:
            raise InvalidInputError(f"{path}:{lineno}: bad value for {key}") from None
    return values


def derive_seed(base_seed: int, budget_index: int, rep: int) -> int:
    return int(np.random.SeedSequence([base_seed, budget_index, rep]).generate_state(1)[0])


@dataclass
class RunRecord:
    family: str
    mode: str
    n: int
    seed: int
    excess_risk: float
    std_error: float
    margin_agreement: float | None
    active_set_size: int
    retained_size: int
    degenerate_flag: bool
    rep: int = 0
    details: dict = field(default_factory=dict)

    def csv_row(self) -> list[str]:
        return [
            self.family,
            self.mode,
            str(self.n),
            str(self.seed),
            repr(self.excess_risk),
            repr(self.std_error),
            "" if self.margin_agreement is None else repr(self.margin_agreement),
            str(self.active_set_size),
            str(self.retained_size),
            str(int(self.degenerate_flag)),
        ]


def run_summary(run: KallsRun) -> dict:
    """JSON-ready description of a single KALLS run."""
    return dict(
        params=asdict(run.params),
        delta_hat=run.delta_hat,
        active_set_size=len(run.active_set),
        retained_size=run.retained_size,
        degenerate=run.degenerate,
        charged=run.charged,
        truncated_entries=run.truncated_entries,
        steps=len(run.trace),
    )


def write_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in trace:
            writer.writerow(
                [
                    row.s,
                    row.decision,
                    row.n_queries,
                    "" if row.mean_q is None else repr(row.mean_q),
                    "" if row.tau is None else repr(row.tau),
                    "" if row.y_hat is None else row.y_hat,
                    row.charged_total,
                ]
            )


def _passive_trace(oracle: BudgetedOracle):
    from .algorithm import TraceRow

    return [TraceRow(q.pool_index + 1, "labeled", 1, float(q.label), None, q.label, q.charged_total) for q in oracle.log]


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _evaluate(classifier, spec, dh, m, test_seed):
    risk = excess_risk(classifier, spec, m, test_seed)
    try:
        agreement = margin_agreement(classifier, spec, dh, m, test_seed)
    except UndefinedResultError:
        agreement = None
    return risk, agreement


def run_replication(spec: ProblemSpec, config: ExperimentConfig, n: int, budget_index: int, rep: int) -> list[RunRecord]:
    seed = derive_seed(config.seed, budget_index, rep)
    pool = sample_pool(spec, config.pool_for(n), [seed, 0])
    dh = delta_hat(config.epsilon, spec.C, spec.beta)
    trace_dir = Path(config.trace_dir) if config.trace_dir else None
    records = []
    if config.mode in ("kalls", "both"):
        oracle = BudgetedOracle(pool, spec, n, [seed, 1], config.recharge_duplicates)
        params = KallsParams.for_problem(spec, config.delta, config.epsilon, n)
        run = run_kalls(pool, oracle, params)
        risk, agreement = _evaluate(run.classifier, spec, dh, config.test_size, [seed, 2])
        summary = run_summary(run)
        records.append(
            RunRecord(spec.name, "kalls", n, seed, risk.mean, risk.std_error, agreement,
                      len(run.active_set), run.retained_size, run.degenerate, rep, summary)
        )
        if trace_dir:
            stem = trace_dir / f"kalls_n{n}_rep{rep}"
            write_trace(f"{stem}_trace.csv", run.trace)
            oracle.write_log(f"{stem}_queries.csv")
            write_json(f"{stem}.json", dict(summary, family=spec.name, seed=seed))
    if config.mode in ("passive", "both"):
        oracle = BudgetedOracle(pool, spec, n, [seed, 1], config.recharge_duplicates)
        pparams = PassiveParams.for_problem(spec)
        classifier = train_passive(pool, oracle, n, pparams)
        risk, agreement = _evaluate(classifier, spec, dh, config.test_size, [seed, 2])
        summary = dict(k=classifier.k, charged=oracle.charged, degenerate=False)
        records.append(
            RunRecord(spec.name, "passive", n, seed, risk.mean, risk.std_error, agreement, n, n, False, rep, summary)
        )
        if trace_dir:
            stem = trace_dir / f"passive_n{n}_rep{rep}"
            write_trace(f"{stem}_trace.csv", _passive_trace(oracle))
            oracle.write_log(f"{stem}_queries.csv")
            write_json(f"{stem}.json", dict(summary, family=spec.name, seed=seed, n=n))
    return records


def run_sweep(config: ExperimentConfig, progress=None) -> list[RunRecord]:
    """All (budget, replication, mode) runs in canonical order."""
    spec = config.validate()
    if config.mode != "passive":
        KallsParams.for_problem(spec, config.delta, config.epsilon, 0).check_dimension(spec.dim)
    if config.trace_dir:
        Path(config.trace_dir).mkdir(parents=True, exist_ok=True)
    records = []
    for b, n in enumerate(config.budgets):
        for rep in range(config.reps):
            records.extend(run_replication(spec, config, n, b, rep))
            if progress:
                progress(n, rep)
    mode_rank = {"kalls": 0, "passive": 1}
    records.sort(key=lambda r: (r.family, mode_rank[r.mode], config.budgets.index(r.n), r.rep))
    return records


def write_records(target, records) -> None:
    """Write the experiment CSV to a path or an open text stream."""
    if hasattr(target, "write"):
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(rec.csv_row() for rec in records)
        return
    with open(target, "w", newline="") as fh:
        write_records(fh, records)


def sweep_summary(config: ExperimentConfig, records) -> dict:
    return dict(
        config=asdict(config),
        passive_k={str(n): choose_k_n(n, PassiveParams.for_problem(resolve_family(config.family))) for n in config.budgets if n >= 2},
        runs=[
            {**r.details, **dict(family=r.family, mode=r.mode, n=r.n, rep=r.rep, seed=r.seed,
                                 excess_risk=r.excess_risk, active_set_size=r.active_set_size,
                                 retained_size=r.retained_size, degenerate=r.degenerate_flag)}
            for r in records
        ],
    )


# -- reading records back ---------------------------------------------------


class MalformedRecords(InvalidInputError):
    pass


def read_records(path) -> list[RunRecord]:
    """Parse a sweep CSV; raises :class:`MalformedRecords` naming the first bad row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise MalformedRecords(f"{path}: row 1: expected header {','.join(CSV_COLUMNS)}")
        records = []
        for lineno, row in enumerate(reader, 2):
            try:
                if len(row) != len(CSV_COLUMNS):
                    raise ValueError(f"expected {len(CSV_COLUMNS)} fields, got {len(row)}")
                family, mode, n, seed, risk, se, agree, act, ret, degen = row
                if mode not in ("kalls", "passive"):
                    raise ValueError(f"unknown mode {mode!r}")
                risk_f = float(risk)
                if not math.isfinite(risk_f) or risk_f < 0:
                    raise ValueError(f"bad excess_risk {risk!r}")
                records.append(
                    RunRecord(family, mode, int(n), int(seed), risk_f, float(se) if se else 0.0,
                              float(agree) if agree else None, int(act or 0), int(ret or 0), degen in ("1", "True", "true"))
                )
            except ValueError as exc:
                raise MalformedRecords(f"{path}: row {lineno}: {exc}") from None
    return records
