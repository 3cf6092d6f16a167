"""Synthetic longitudinal scenarios and the replication harness.

Subjects follow one of two or three quadratic group curves on [0, 1.2]
with stationary lag-one autocorrelated noise indexed by occasion.
Unbalanced designs drop a random fraction of occasions for half the
subjects; noise is always generated on the full grid first so a
subject's retained values do not depend on which occasions were dropped.

Each replication draws from its own counter-based generator keyed by
(seed, replication index), so runs are reproducible independently of
execution order or worker count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import LongitudinalDataset, SubjectRecord
from .metrics import (Partition, accuracy, contingency,
                      normalized_mutual_information, rand_index, rmse_curve)
from .path import PathConfig, refit_groups
from .penalty import PenaltyConfig
from .pipeline import fit_dataset, spline_config_for
from .solver import AdmmConfig

__all__ = [
    "ScenarioConfig",
    "ReplicationReport",
    "true_curves",
    "replication_rng",
    "generate",
    "run_replications",
]

# quadratic group curves (a, b, c) meaning a*t^2 + b*t + c
CURVES = {
    2: {
        "close": [(-0.5, 1.25, 0.0), (-1.0, 2.5, 0.0)],
        "middle": [(-0.5, 1.25, 0.0), (-1.3, 3.25, 0.0)],
        "far": [(-0.5, 1.25, 0.0), (-2.5, 6.25, 0.0)],
    },
    3: {
        "close": [(-0.6, 1.5, 0.0), (-1.3, 3.25, 0.2), (-2.2, 5.5, 0.1)],
        "middle": [(-0.4, 1.0, 0.0), (-1.3, 3.25, 0.2), (-2.4, 6.0, 0.1)],
        "far": [(-0.3, 0.75, 0.0), (-4.0, 10.0, 0.2), (-8.5, 21.25, 0.3)],
    },
}

MISS_FRACTIONS = (0.3, 0.4, 0.5)


@dataclass(frozen=True)
class ScenarioConfig:
    """Design of one simulated study."""

    groups: int = 2
    separation: str = "middle"
    n_subjects: int = 100
    n_times: int = 20
    sigma: float = 0.5
    rho: float = 0.3
    balanced: bool = True
    domain: tuple = (0.0, 1.2)
    min_visits: int = 4

    def __post_init__(self):
        if self.groups not in CURVES:
            raise ValueError(
                f"groups must be one of {sorted(CURVES)}, got {self.groups}"
            )
        if self.separation not in CURVES[self.groups]:
            raise ValueError(
                f"separation must be one of "
                f"{sorted(CURVES[self.groups])}, got {self.separation!r}"
            )
        if self.n_subjects < self.groups:
            raise ValueError("need at least one subject per group")
        if self.n_times < 2:
            raise ValueError(f"need at least 2 occasions, got {self.n_times}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")

    def curve_values(self, group: int, t) -> np.ndarray:
        """True curve of one group (labels start at 1) on a grid."""
        a, b, c = CURVES[self.groups][self.separation][group - 1]
        t = np.asarray(t, dtype=float)
        return a * t * t + b * t + c


def true_curves(groups: int, separation: str) -> list:
    """Callables for the group curves of a named scenario family."""
    coefs = CURVES[groups][separation]

    def make(a, b, c):
        return lambda t: a * np.asarray(t, float) ** 2 \
            + b * np.asarray(t, float) + c

    return [make(*abc) for abc in coefs]


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Counter-based generator for one replication.

    Philox keyed through a seed sequence on (seed, rep): streams for
    different replications are independent and the draw order inside a
    replication is fixed.
    """
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([int(seed), int(rep)]))
    )


def _ar1_errors(rng: np.random.Generator, n: int, t: int, sigma: float,
                rho: float) -> np.ndarray:
    """Stationary lag-one process by occasion, one row per subject."""
    z = rng.standard_normal((n, t))
    e = np.empty((n, t))
    e[:, 0] = sigma * z[:, 0]
    scale = sigma * math.sqrt(1.0 - rho * rho)
    for j in range(1, t):
        e[:, j] = rho * e[:, j - 1] + scale * z[:, j]
    return e


def generate(scenario: ScenarioConfig, rng: np.random.Generator):
    """One synthetic dataset and its true partition.

    Group labels go round-robin over subjects, so the true group sizes
    differ by at most one.  For unbalanced designs exactly half the
    subjects (rounded down) lose a uniformly drawn 30, 40 or 50 percent
    of their occasions.
    """
    n, t_count = scenario.n_subjects, scenario.n_times
    lo, hi = scenario.domain
    grid = np.linspace(lo, hi, t_count)
    labels = np.arange(n) % scenario.groups + 1
    errors = _ar1_errors(rng, n, t_count, scenario.sigma, scenario.rho)

    keep_sets = [np.arange(t_count) for _ in range(n)]
    if not scenario.balanced:
        affected = rng.choice(n, size=n // 2, replace=False)
        for i in affected:
            frac = MISS_FRACTIONS[rng.integers(len(MISS_FRACTIONS))]
            n_miss = int(round(frac * t_count))
            if t_count - n_miss < scenario.min_visits:
                raise ValueError(
                    f"dropping {n_miss} of {t_count} occasions leaves fewer "
                    f"than {scenario.min_visits} visits"
                )
            drop = rng.choice(t_count, size=n_miss, replace=False)
            keep = np.setdiff1d(np.arange(t_count), drop)
            keep_sets[i] = keep

    width = len(str(n - 1))
    subjects = []
    for i in range(n):
        keep = keep_sets[i]
        values = scenario.curve_values(labels[i], grid[keep]) + errors[i, keep]
        subjects.append(SubjectRecord(
            sid=f"s{i:0{width}d}",
            times=grid[keep],
            values=values,
        ))
    return LongitudinalDataset(subjects=subjects), Partition(labels=labels)


def _match_groups(estimated: Partition, truth: Partition) -> dict:
    """Map estimated labels to true labels by maximal overlap."""
    table = contingency(estimated, truth)
    rows, cols = linear_sum_assignment(-table)
    est_labels = np.unique(estimated.labels)
    true_labels = np.unique(truth.labels)
    return {int(est_labels[r]): int(true_labels[c])
            for r, c in zip(rows, cols)}


RMSE_GRID_SIZE = 100


def _rep_columns(groups: int, include_oracle: bool) -> list:
    cols = ["rep", "k_hat", "lam", "ri", "nmi", "accuracy"]
    cols += [f"rmse_g{k}" for k in range(1, groups + 1)]
    if include_oracle:
        cols += [f"oracle_rmse_g{k}" for k in range(1, groups + 1)]
    cols += ["converged_all", "max_primal", "max_dual", "eps",
             "iterations_total", "error"]
    return cols


def _run_one(args):
    (scenario, seed, rep, spline_kw, penalty, path_config, admm_config,
     criterion, include_oracle) = args
    row = {"rep": rep, "error": ""}
    rng = replication_rng(seed, rep)
    dataset, truth = generate(scenario, rng)
    tgrid = np.linspace(scenario.domain[0], scenario.domain[1],
                        RMSE_GRID_SIZE)
    try:
        report = fit_dataset(
            dataset,
            spline=spline_config_for(dataset, **spline_kw),
            penalty=penalty,
            path_config=path_config,
            admm_config=admm_config,
            criterion=criterion,
        )
    except Exception as exc:  # noqa: BLE001 - per-replication fault barrier
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    est = report.result.membership
    row["k_hat"] = report.selected.k_hat
    row["lam"] = report.selected.lam
    row["ri"] = rand_index(est, truth)
    row["nmi"] = normalized_mutual_information(est, truth)
    row["accuracy"] = accuracy(est, truth)

    n, d = report.design.n_subjects, report.design.dim
    eps = (admm_config or AdmmConfig()).tolerance(n, d)
    conv = [p for p in report.points if p.converged]
    row["converged_all"] = len(conv) == len(report.points)
    row["max_primal"] = max(p.primal_norm for p in conv) if conv else math.nan
    row["max_dual"] = max(p.dual_norm for p in conv) if conv else math.nan
    row["eps"] = eps
    row["iterations_total"] = sum(p.iterations for p in report.points)

    if report.selected.k_hat == scenario.groups:
        mapping = _match_groups(est, truth)
        for est_label, true_label in mapping.items():
            fitted = report.result.curve(est_label, tgrid)
            target = scenario.curve_values(true_label, tgrid)
            row[f"rmse_g{true_label}"] = rmse_curve(fitted, target)

    if include_oracle:
        oracle = refit_groups(report.design, dataset, report.v_blocks, truth)
        for k in range(1, scenario.groups + 1):
            fitted = oracle.curve(k, tgrid)
            target = scenario.curve_values(k, tgrid)
            row[f"oracle_rmse_g{k}"] = rmse_curve(fitted, target)
    return row


@dataclass
class ReplicationReport:
    """Per-replication rows plus scenario-level aggregates."""

    scenario: ScenarioConfig
    seed: int
    criterion: str
    rows: list
    aggregate: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        include_oracle = any("oracle_rmse_g1" in r for r in self.rows)
        cols = _rep_columns(self.scenario.groups, include_oracle)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for row in self.rows:
                writer.writerow([_fmt(row.get(c)) for c in cols])

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.aggregate, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        # repr of the builtin float; numpy scalars repr as np.float64(...)
        return repr(float(value))
    return str(value)


def _aggregate(scenario: ScenarioConfig, rows: list,
               include_oracle: bool) -> dict:
    ok = [r for r in rows if not r.get("error")]
    k_hats = [r["k_hat"] for r in ok]
    hits = [r for r in ok if r["k_hat"] == scenario.groups]
    agg = {
        "replications": len(rows),
        "failed": len(rows) - len(ok),
        "k_hat_mean": float(np.mean(k_hats)) if k_hats else math.nan,
        "k_hat_median": float(np.median(k_hats)) if k_hats else math.nan,
        "per": len(hits) / len(ok) if ok else math.nan,
    }
    for name in ("ri", "nmi", "accuracy"):
        agg[f"{name}_mean"] = (
            float(np.mean([r[name] for r in hits])) if hits else math.nan
        )
    for k in range(1, scenario.groups + 1):
        vals = [r[f"rmse_g{k}"] for r in hits if f"rmse_g{k}" in r]
        agg[f"rmse_g{k}_mean"] = float(np.mean(vals)) if vals else math.nan
    if include_oracle:
        for k in range(1, scenario.groups + 1):
            vals = [r[f"oracle_rmse_g{k}"] for r in ok
                    if f"oracle_rmse_g{k}" in r]
            agg[f"oracle_rmse_g{k}_mean"] = (
                float(np.mean(vals)) if vals else math.nan
            )
    return agg


def run_replications(scenario: ScenarioConfig, reps: int, seed: int,
                     spline_kw: dict | None = None,
                     penalty: PenaltyConfig | None = None,
                     path_config: PathConfig | None = None,
                     admm_config: AdmmConfig | None = None,
                     criterion: str = "bic:0.6",
                     include_oracle: bool = True,
                     workers: int = 1) -> ReplicationReport:
    """Run ``reps`` independent replications of one scenario.

    Results are keyed by replication index; a failure inside one
    replication is recorded in its row and does not stop the others.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    spline_kw = spline_kw or {}
    penalty = penalty or PenaltyConfig()
    path_config = path_config or PathConfig()
    admm_config = admm_config or AdmmConfig()

    jobs = [
        (scenario, seed, rep, spline_kw, penalty, path_config, admm_config,
         criterion, include_oracle)
        for rep in range(reps)
    ]
    if workers > 1 and reps > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_one, jobs))
    else:
        rows = [_run_one(job) for job in jobs]
    rows.sort(key=lambda r: r["rep"])

    return ReplicationReport(
        scenario=scenario,
        seed=seed,
        criterion=str(criterion),
        rows=rows,
        aggregate=_aggregate(scenario, rows, include_oracle),
    )
