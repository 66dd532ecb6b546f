"""Config-driven experiment runner for comparative sweeps.

One experiment varies exactly one axis (training-set size N, treatment
count K, or outcome count M) while holding the other two fixed, trains the
requested learners over seeded repetitions, and records composite PEHE per
run. Everything derives deterministically from the config:

    run_seed      = seed_base + repetition
    dgp seed      = dgp_seed + repetition   (fresh_dgp_per_rep, the default)
                  = dgp_seed                (fixed-DGP mode)
    train data    = generate_dataset(dgp, N, 2 * run_seed)
    test data     = generate_dataset(dgp, n_test, 2 * run_seed + 1)
    train config  = overrides + seed=run_seed  (same split for all learners,
                    so learner comparisons are paired within a repetition)

When K is swept, the number of continuous components stays fixed and the
remainder are binary. Raw rows and aggregates are emitted as delimited text
with 17-significant-digit numbers in a fixed sort order, so identical
configs produce byte-identical files; wall-clock training times go to a
separate timings file to keep the result files reproducible.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import TreatmentSpec, enumerate_eval_treatments, generate_dataset, sample_dgp
from .learners import ALL_LEARNERS, TrainConfig, train
from .metrics import factual_rmse, pehe_composite

__all__ = [
    "ExperimentConfig",
    "RunRow",
    "AggRow",
    "ResultTable",
    "run_experiment",
    "aggregate",
    "emit_csv",
    "load_table",
]

_AXES = ("n", "k", "m")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one sweep.

    Exactly one of n_values, k_values, m_values may hold more than one
    entry; that list is the sweep axis. `train` holds TrainConfig overrides
    (the seed is derived per repetition and may not be set there).
    """

    name: str = "experiment"
    p: int = 10
    n_continuous: int = 1
    gamma: float = 1.0
    sigma_y: float = 0.1
    dgp_seed: int = 0
    fresh_dgp_per_rep: bool = True
    n_values: tuple[int, ...] = (1000,)
    k_values: tuple[int, ...] = (5,)
    m_values: tuple[int, ...] = (2,)
    learners: tuple[str, ...] = ALL_LEARNERS
    repetitions: int = 10
    seed_base: int = 0
    train: dict = field(default_factory=dict)
    n_test: int = 1000
    grid_size: int = 5
    output_dir: str | None = None

    def __post_init__(self) -> None:
        for name in ("n_values", "k_values", "m_values", "learners"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.p < 1 or self.n_continuous < 0:
            raise ValueError("p must be >= 1 and n_continuous >= 0")
        if self.repetitions < 1 or self.seed_base < 0 or self.dgp_seed < 0:
            raise ValueError("repetitions must be >= 1 and seeds >= 0")
        if self.n_test < 1 or self.grid_size < 2:
            raise ValueError("n_test must be >= 1 and grid_size >= 2")
        for name in ("n_values", "k_values", "m_values"):
            values = getattr(self, name)
            if not values or any(int(v) != v or v < 1 for v in values):
                raise ValueError(f"{name} must be a nonempty list of positive integers")
        varying = [a for a in _AXES if len(getattr(self, f"{a}_values")) > 1]
        if len(varying) > 1:
            raise ValueError(f"only one sweep axis may vary, got {varying}")
        if not self.learners:
            raise ValueError("at least one learner is required")
        for learner in self.learners:
            if learner not in ALL_LEARNERS:
                raise ValueError(f"unknown learner: {learner!r}")
        for k in self.k_values:
            if k < max(self.n_continuous, 1):
                raise ValueError(
                    f"k={k} is too small for {self.n_continuous} continuous components"
                )
        if "seed" in self.train:
            raise ValueError("train.seed is derived per repetition; do not set it")
        TrainConfig.from_dict({**self.train, "seed": 0})  # validate override keys

    @property
    def axis(self) -> str:
        for a in _AXES:
            if len(getattr(self, f"{a}_values")) > 1:
                return a
        return "n"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "p": self.p,
            "n_continuous": self.n_continuous,
            "gamma": self.gamma,
            "sigma_y": self.sigma_y,
            "dgp_seed": self.dgp_seed,
            "fresh_dgp_per_rep": self.fresh_dgp_per_rep,
            "n_values": list(self.n_values),
            "k_values": list(self.k_values),
            "m_values": list(self.m_values),
            "learners": list(self.learners),
            "repetitions": self.repetitions,
            "seed_base": self.seed_base,
            "train": dict(self.train),
            "n_test": self.n_test,
            "grid_size": self.grid_size,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls().to_dict())
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class RunRow:
    """One (axis value, repetition, learner) result."""

    axis: str
    axis_value: int
    learner: str
    seed: int
    status: str = "ok"
    error: str = ""
    pehe_composite: float | None = None
    pehe_per_outcome: tuple[float, ...] = ()
    factual_rmse: float | None = None
    train_seconds: float | None = None


@dataclass(frozen=True)
class AggRow:
    """Per (axis value, learner) aggregate over successful repetitions."""

    axis: str
    axis_value: int
    learner: str
    mean_pehe: float
    stderr_pehe: float
    n_seeds: int


@dataclass
class ResultTable:
    axis: str
    raw: list[RunRow]
    agg: list[AggRow]


def _resolve_point(cfg: ExperimentConfig, value: int) -> tuple[int, int, int]:
    axis = cfg.axis
    n = value if axis == "n" else cfg.n_values[0]
    k = value if axis == "k" else cfg.k_values[0]
    m = value if axis == "m" else cfg.m_values[0]
    return n, k, m


def run_experiment(cfg: ExperimentConfig, progress=None) -> ResultTable:
    """Run the full sweep. A failing run is recorded as a failed row with
    its reason and the sweep continues; callers inspect `status` (the CLI
    maps any failure to a nonzero exit)."""
    axis = cfg.axis
    rows: list[RunRow] = []
    for value in getattr(cfg, f"{axis}_values"):
        n, k, m = _resolve_point(cfg, int(value))
        spec = TreatmentSpec.from_counts(k - cfg.n_continuous, cfg.n_continuous)
        for rep in range(cfg.repetitions):
            run_seed = cfg.seed_base + rep
            dgp_seed = cfg.dgp_seed + rep if cfg.fresh_dgp_per_rep else cfg.dgp_seed
            dgp = sample_dgp(cfg.p, spec, m, cfg.gamma, cfg.sigma_y, dgp_seed)
            train_ds = generate_dataset(dgp, n, 2 * run_seed)
            test_ds = generate_dataset(dgp, cfg.n_test, 2 * run_seed + 1)
            combos = enumerate_eval_treatments(spec, cfg.grid_size)
            train_cfg = TrainConfig.from_dict({**cfg.train, "seed": run_seed})
            for learner in cfg.learners:
                try:
                    started = time.perf_counter()
                    model, _ = train(learner, train_ds, train_cfg)
                    elapsed = time.perf_counter() - started
                    report = pehe_composite(model, dgp, test_ds.x, combos)
                    row = RunRow(
                        axis=axis,
                        axis_value=int(value),
                        learner=learner,
                        seed=run_seed,
                        pehe_composite=report.pehe_composite,
                        pehe_per_outcome=tuple(report.pehe_per_outcome),
                        factual_rmse=factual_rmse(model, test_ds),
                        train_seconds=elapsed,
                    )
                except Exception as err:  # noqa: BLE001 - failure rows keep the sweep honest
                    row = RunRow(
                        axis=axis,
                        axis_value=int(value),
                        learner=learner,
                        seed=run_seed,
                        status="failed",
                        error=f"{type(err).__name__}: {err}",
                    )
                rows.append(row)
                if progress is not None:
                    progress(row)
    rows.sort(key=lambda r: (r.axis_value, r.learner, r.seed))
    return ResultTable(axis=axis, raw=rows, agg=aggregate(rows))


def _group_stats(values: list[float]) -> tuple[float, float]:
    if not values:
        raise ValueError("cannot aggregate an empty group")
    mean = float(np.mean(values))
    if len(values) == 1:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(len(values)))


def aggregate(rows: list[RunRow]) -> list[AggRow]:
    """Mean and standard error of composite PEHE per (axis value, learner),
    over successful rows; stderr = sample standard deviation / sqrt(n)."""
    groups: dict[tuple[int, str], list[float]] = {}
    axis_by_key: dict[tuple[int, str], str] = {}
    for row in rows:
        if row.status != "ok":
            continue
        key = (row.axis_value, row.learner)
        groups.setdefault(key, []).append(row.pehe_composite)
        axis_by_key[key] = row.axis
    out = []
    for key in sorted(groups):
        mean, stderr = _group_stats(groups[key])
        out.append(
            AggRow(
                axis=axis_by_key[key],
                axis_value=key[0],
                learner=key[1],
                mean_pehe=mean,
                stderr_pehe=stderr,
                n_seeds=len(groups[key]),
            )
        )
    return out


def _fmt(value: float | None) -> str:
    return "" if value is None else "%.17g" % value


def _raw_header(max_m: int) -> list[str]:
    return (
        ["axis", "axis_value", "learner", "seed", "status", "error", "pehe_composite"]
        + [f"pehe_outcome_{i}" for i in range(max_m)]
        + ["factual_rmse"]
    )


def _table_max_m(table: ResultTable) -> int:
    return max((len(r.pehe_per_outcome) for r in table.raw), default=0)


def _write_csv(path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit_csv(table: ResultTable, out_dir, name: str) -> dict:
    """Write <name>_raw.csv, <name>_agg.csv, and <name>_timings.csv.

    Numbers carry 17 significant digits and rows are pre-sorted, so the raw
    and aggregate files are byte-identical across repeated runs of the same
    config. Timings are wall-clock and live in their own file.
    """
    raw_path = os.path.join(out_dir, f"{name}_raw.csv")
    agg_path = os.path.join(out_dir, f"{name}_agg.csv")
    timings_path = os.path.join(out_dir, f"{name}_timings.csv")
    max_m = _table_max_m(table)

    raw_rows = []
    timing_rows = []
    for r in table.raw:
        outcome_cells = [_fmt(v) for v in r.pehe_per_outcome]
        outcome_cells += [""] * (max_m - len(outcome_cells))
        raw_rows.append(
            [r.axis, str(r.axis_value), r.learner, str(r.seed), r.status, r.error,
             _fmt(r.pehe_composite)] + outcome_cells + [_fmt(r.factual_rmse)]
        )
        timing_rows.append(
            [r.axis, str(r.axis_value), r.learner, str(r.seed), _fmt(r.train_seconds)]
        )
    _write_csv(raw_path, _raw_header(max_m), raw_rows)

    agg_rows = [
        [a.axis, str(a.axis_value), a.learner, _fmt(a.mean_pehe), _fmt(a.stderr_pehe),
         str(a.n_seeds)]
        for a in table.agg
    ]
    _write_csv(agg_path, ["axis", "axis_value", "learner", "mean_pehe", "stderr_pehe", "n_seeds"], agg_rows)
    _write_csv(timings_path, ["axis", "axis_value", "learner", "seed", "train_seconds"], timing_rows)
    return {"raw": raw_path, "agg": agg_path, "timings": timings_path}


def _parse_float(cell: str) -> float | None:
    return None if cell == "" else float(cell)


def load_table(raw_path, agg_path=None, timings_path=None) -> ResultTable:
    """Rebuild a ResultTable from emitted files. Aggregates are recomputed
    when no aggregate file is given; timings default to None."""
    with open(raw_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:7] != _raw_header(0)[:7] or header[-1] != "factual_rmse":
            raise ValueError(f"unrecognized raw results header in {raw_path}")
        n_outcome_cols = len(header) - 8
        rows = []
        for rec in reader:
            outcome_cells = [c for c in rec[7 : 7 + n_outcome_cols] if c != ""]
            rows.append(
                RunRow(
                    axis=rec[0],
                    axis_value=int(rec[1]),
                    learner=rec[2],
                    seed=int(rec[3]),
                    status=rec[4],
                    error=rec[5],
                    pehe_composite=_parse_float(rec[6]),
                    pehe_per_outcome=tuple(float(c) for c in outcome_cells),
                    factual_rmse=_parse_float(rec[-1]),
                )
            )
    if timings_path is not None:
        with open(timings_path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            seconds = {(r[0], int(r[1]), r[2], int(r[3])): _parse_float(r[4]) for r in reader}
        rows = [
            replace(r, train_seconds=seconds.get((r.axis, r.axis_value, r.learner, r.seed)))
            for r in rows
        ]
    if agg_path is not None:
        with open(agg_path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            agg = [
                AggRow(
                    axis=rec[0],
                    axis_value=int(rec[1]),
                    learner=rec[2],
                    mean_pehe=float(rec[3]),
                    stderr_pehe=float(rec[4]),
                    n_seeds=int(rec[5]),
                )
                for rec in reader
            ]
    else:
        agg = aggregate(rows)
    axis = rows[0].axis if rows else "n"
    return ResultTable(axis=axis, raw=rows, agg=agg)
