"""Command line interface.

Three subcommands:

* ``fit``       cluster a CSV of trajectories and write membership,
                group curves with confidence bands, the penalty path
                and a JSON summary;
* ``simulate``  run seeded replications of a synthetic scenario and
                write a per-replication report plus aggregates;
* ``path``      write the penalty path and the full coefficient trace
                without selecting a model.

Option precedence is CLI flag > config file (``--config``, JSON) >
built-in default.  The output directory may also be set through the
``TRAJCLUST_OUTDIR`` environment variable; an explicit ``--out`` wins.
Exit codes: 0 on success, 1 on any pipeline error (a JSON error object
is printed to stderr), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from .bspline import SplineConfig
from .data import filter_min_visits, load_csv, standardize
from .inference import confidence_bands
from .path import PathConfig
from .penalty import PenaltyConfig
from .pipeline import fit_dataset, solve_and_score, spline_config_for
from .selection import SelectionCriterion
from .simulate import ScenarioConfig, run_replications
from .solver import AdmmConfig

__all__ = ["main", "cmd_fit", "cmd_simulate", "cmd_path", "RunConfig"]

OUTDIR_ENV = "TRAJCLUST_OUTDIR"


@dataclass
class RunConfig:
    """Effective options of one CLI invocation (echoed to summary.json)."""

    input: str | None = None
    id_col: str = "id"
    time_col: str = "time"
    value_col: str = "value"
    standardize: bool = False
    min_visits: int = 0
    order: int = 3
    knots: int = 1
    knot_rule: str = "equal"
    tau: float = 3.0
    theta: float = 1.0
    lam_min: float = 0.05
    lam_max: float = 2.0
    lam_num: int = 40
    lambdas: str | None = None
    epsilon: float | None = None
    max_iter: int = 2000
    dense_solve: bool = False
    criterion: str = "bic:1.5"
    level: float = 0.95
    band_grid: int = 100
    band_mode: str = "robust"
    seed: int = 0

    def spline_kw(self) -> dict:
        return {
            "order": self.order,
            "n_interior": self.knots,
            "knot_rule": self.knot_rule,
        }

    def penalty(self) -> PenaltyConfig:
        return PenaltyConfig(tau=self.tau, theta=self.theta)

    def path_config(self) -> PathConfig:
        if self.lambdas:
            grid = tuple(float(x) for x in self.lambdas.split(","))
            return PathConfig(lambdas=grid)
        return PathConfig(lam_min=self.lam_min, lam_max=self.lam_max,
                          num=self.lam_num)

    def admm_config(self) -> AdmmConfig:
        return AdmmConfig(epsilon=self.epsilon, max_iter=self.max_iter,
                          structured_solve=not self.dense_solve)


_FIT_DEFAULTS = RunConfig()


def _add_common_fit_options(sub, criterion_default: str) -> None:
    sub.add_argument("--config", help="JSON file with option defaults")
    sub.add_argument("--out", "-o", help="output directory")
    sub.add_argument("--order", type=int, help="spline order q (default 3)")
    sub.add_argument("--knots", type=int,
                     help="number of interior knots (default 1)")
    sub.add_argument("--knot-rule", choices=("equal", "quantile"),
                     help="interior knot placement (default equal)")
    sub.add_argument("--tau", type=float,
                     help="penalty concavity (default 3.0)")
    sub.add_argument("--theta", type=float,
                     help="augmentation step (default 1.0)")
    sub.add_argument("--lam-min", type=float,
                     help="smallest penalty level (default 0.05)")
    sub.add_argument("--lam-max", type=float,
                     help="largest penalty level (default 2.0)")
    sub.add_argument("--lam-num", type=int,
                     help="grid size (default 40, log spaced)")
    sub.add_argument("--lambdas",
                     help="explicit comma-separated penalty grid")
    sub.add_argument("--epsilon", type=float,
                     help="primal tolerance (default 1e-4*sqrt(n*d))")
    sub.add_argument("--max-iter", type=int,
                     help="iteration cap per solve (default 2000)")
    sub.add_argument("--dense-solve", action=argparse.BooleanOptionalAction,
                     help="use the dense linear solve (small problems only)")
    sub.add_argument("--criterion",
                     help="bic[:c], ch, or known-k:K "
                          f"(default {criterion_default})")
    sub.add_argument("--seed", type=int, help="seed echoed into outputs")


def _add_input_options(sub) -> None:
    sub.add_argument("--input", "-i", required=True, help="long-format CSV")
    sub.add_argument("--id-col", help="subject id column (default id)")
    sub.add_argument("--time-col", help="time column (default time)")
    sub.add_argument("--value-col", help="response column (default value)")
    sub.add_argument("--standardize", action=argparse.BooleanOptionalAction,
                     help="center and scale responses before fitting")
    sub.add_argument("--min-visits", type=int,
                     help="drop subjects with fewer visits (default keep all)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajclust",
        description="Cluster longitudinal trajectories into latent "
                    "subgroups with pairwise-fused spline fits.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    fit = subs.add_parser("fit", help="cluster one dataset")
    _add_input_options(fit)
    _add_common_fit_options(fit, criterion_default="bic:1.5")
    fit.add_argument("--level", type=float,
                     help="confidence level for bands (default 0.95)")
    fit.add_argument("--band-grid", type=int,
                     help="number of curve grid points (default 100)")
    fit.add_argument("--band-mode", choices=("robust", "model"),
                     help="sandwich middle matrix (default robust)")

    sim = subs.add_parser("simulate", help="run a synthetic scenario")
    sim.add_argument("--groups", type=int, choices=(2, 3),
                     help="number of true subgroups (default 2)")
    sim.add_argument("--separation", choices=("close", "middle", "far"),
                     help="distance between group curves (default middle)")
    sim.add_argument("--n", type=int, dest="n_subjects",
                     help="subjects per replication (default 100)")
    sim.add_argument("--t-points", type=int, dest="n_times",
                     help="occasions per subject (default 20)")
    sim.add_argument("--sigma", type=float, help="noise scale (default 0.5)")
    sim.add_argument("--rho", type=float,
                     help="lag-one correlation (default 0.3)")
    sim.add_argument("--unbalanced", action=argparse.BooleanOptionalAction,
                     help="drop occasions for half the subjects")
    sim.add_argument("--reps", type=int, help="replications (default 100)")
    sim.add_argument("--workers", type=int,
                     help="parallel workers (default: cpu count)")
    sim.add_argument("--no-oracle", action="store_true", default=None,
                     dest="no_oracle",
                     help="skip the true-membership refit columns")
    _add_common_fit_options(sim, criterion_default="bic:0.6")

    pth = subs.add_parser("path", help="penalty path and coefficient trace")
    _add_input_options(pth)
    _add_common_fit_options(pth, criterion_default="bic:1.5")

    return parser


def _resolve(args, key: str, file_config: dict, default):
    cli_val = getattr(args, key, None)
    if cli_val is not None:
        return cli_val
    if key in file_config:
        return file_config[key]
    return default


def _load_file_config(args) -> dict:
    if getattr(args, "config", None) is None:
        return {}
    with open(args.config) as fh:
        loaded = json.load(fh)
    if not isinstance(loaded, dict):
        raise ValueError(f"{args.config}: config must be a JSON object")
    return loaded


def _outdir(args, file_config: dict) -> str:
    out = getattr(args, "out", None)
    if out is None:
        out = file_config.get("out")
    if out is None:
        out = os.environ.get(OUTDIR_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _run_config(args, file_config: dict, criterion_default: str) -> RunConfig:
    kwargs = {}
    for key, default in asdict(_FIT_DEFAULTS).items():
        if key == "criterion":
            default = criterion_default
        kwargs[key] = _resolve(args, key, file_config, default)
    return RunConfig(**kwargs)


def _prepare_dataset(config: RunConfig):
    dataset = load_csv(config.input, id_col=config.id_col,
                       time_col=config.time_col, value_col=config.value_col)
    if config.min_visits > 0:
        dataset = filter_min_visits(dataset, config.min_visits)
        if not dataset.subjects:
            raise ValueError(
                f"no subjects left after requiring {config.min_visits} visits"
            )
    record = None
    if config.standardize:
        dataset, record = standardize(dataset)
    return dataset, record


def _write_membership(path, dataset, membership) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "group"])
        for sid, group in zip(dataset.ids(), membership.labels):
            writer.writerow([sid, int(group)])


def _write_curves(path, bands, record) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "t", "estimate", "se", "lower", "upper"])
        for band in bands:
            est, se = band.estimate, band.se
            lo, hi = band.lower, band.upper
            if record is not None:
                est = record.inverse(est)
                se = record.inverse_scale(se)
                lo = record.inverse(lo)
                hi = record.inverse(hi)
            for j, t in enumerate(band.t):
                writer.writerow([
                    band.group, repr(float(t)), repr(float(est[j])),
                    repr(float(se[j])), repr(float(lo[j])),
                    repr(float(hi[j])),
                ])


def _write_path(path, points, bic_values, ch_values) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "k_hat", "bic", "ch", "converged"])
        for p, b, c in zip(points, bic_values, ch_values):
            writer.writerow([
                repr(float(p.lam)), p.k_hat, repr(float(b)), repr(float(c)),
                "true" if p.converged else "false",
            ])


def _write_trace(path, points, dataset) -> None:
    ids = dataset.ids()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "subject", "coef", "value"])
        for p in points:
            for i, sid in enumerate(ids):
                for l in range(p.gamma.shape[1]):
                    writer.writerow([
                        repr(float(p.lam)), sid, l + 1,
                        repr(float(p.gamma[i, l])),
                    ])


def _summary(config: RunConfig, dataset, report, record) -> dict:
    result = report.result
    return {
        "k_hat": int(result.k_hat),
        "lambda": float(report.selected.lam),
        "criterion": config.criterion,
        "n_subjects": int(dataset.n_subjects),
        "n_obs": int(dataset.n_obs),
        "group_sizes": [int(s) for s in result.group_sizes()],
        "sigma2": float(report.cov.sigma2),
        "rho": float(report.cov.rho),
        "kappa": float(report.cov.kappa),
        "standardized": record is not None,
        "seed": int(config.seed),
        "converged_points": int(sum(p.converged for p in report.points)),
        "path_points": len(report.points),
        "config": asdict(config),
    }


def cmd_fit(args) -> int:
    file_config = _load_file_config(args)
    config = _run_config(args, file_config, criterion_default="bic:1.5")
    outdir = _outdir(args, file_config)
    dataset, record = _prepare_dataset(config)

    report = fit_dataset(
        dataset,
        spline=spline_config_for(dataset, **config.spline_kw()),
        penalty=config.penalty(),
        path_config=config.path_config(),
        admm_config=config.admm_config(),
        criterion=SelectionCriterion.parse(config.criterion),
    )
    lo, hi = report.design.knots[0], report.design.knots[-1]
    tgrid = np.linspace(lo, hi, config.band_grid)
    bands = confidence_bands(report.result, report.design, dataset,
                             report.v_blocks, level=config.level,
                             tgrid=tgrid, mode=config.band_mode)

    _write_membership(os.path.join(outdir, "membership.csv"), dataset,
                      report.result.membership)
    _write_curves(os.path.join(outdir, "curves.csv"), bands, record)
    _write_path(os.path.join(outdir, "path.csv"), report.points,
                report.bic_values, report.ch_values)
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(_summary(config, dataset, report, record), fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    print(f"fit: k_hat={report.result.k_hat} lambda={report.selected.lam:.6g} "
          f"-> {outdir}")
    return 0


def cmd_simulate(args) -> int:
    file_config = _load_file_config(args)
    config = _run_config(args, file_config, criterion_default="bic:0.6")
    outdir = _outdir(args, file_config)

    scenario = ScenarioConfig(
        groups=_resolve(args, "groups", file_config, 2),
        separation=_resolve(args, "separation", file_config, "middle"),
        n_subjects=_resolve(args, "n_subjects", file_config, 100),
        n_times=_resolve(args, "n_times", file_config, 20),
        sigma=_resolve(args, "sigma", file_config, 0.5),
        rho=_resolve(args, "rho", file_config, 0.3),
        balanced=not _resolve(args, "unbalanced", file_config, False),
    )
    reps = _resolve(args, "reps", file_config, 100)
    workers = _resolve(args, "workers", file_config, os.cpu_count() or 1)
    include_oracle = not _resolve(args, "no_oracle", file_config, False)

    report = run_replications(
        scenario, reps=reps, seed=config.seed,
        spline_kw=config.spline_kw(),
        penalty=config.penalty(),
        path_config=config.path_config(),
        admm_config=config.admm_config(),
        criterion=config.criterion,
        include_oracle=include_oracle,
        workers=workers,
    )
    report.to_csv(os.path.join(outdir, "report.csv"))
    agg = dict(report.aggregate)
    agg["scenario"] = asdict(scenario)
    agg["seed"] = int(config.seed)
    agg["criterion"] = config.criterion
    with open(os.path.join(outdir, "aggregate.json"), "w") as fh:
        json.dump(agg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    per = report.aggregate.get("per")
    print(f"simulate: reps={reps} per={per} -> {outdir}")
    return 0


def cmd_path(args) -> int:
    file_config = _load_file_config(args)
    config = _run_config(args, file_config, criterion_default="bic:1.5")
    outdir = _outdir(args, file_config)
    dataset, _ = _prepare_dataset(config)

    criterion = SelectionCriterion.parse(config.criterion)
    _, _, _, _, points, bic_values, ch_values = solve_and_score(
        dataset,
        spline=spline_config_for(dataset, **config.spline_kw()),
        penalty=config.penalty(),
        path_config=config.path_config(),
        admm_config=config.admm_config(),
        bic_c=criterion.c,
    )
    _write_path(os.path.join(outdir, "path.csv"), points, bic_values,
                ch_values)
    _write_trace(os.path.join(outdir, "trace.csv"), points, dataset)
    print(f"path: {len(points)} points -> {outdir}")
    return 0


_COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "path": cmd_path}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
