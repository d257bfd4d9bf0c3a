"""Config-driven batch front end: analyze, simulate, verify.

A single JSON file describes the correlation matrix, the marginal tail, the
tail sets of interest, the evaluation grid, and an optional simulation plan.
Commands emit CSV files under --out plus a human-readable report on stdout.
Re-running a command with the same config and seed reproduces every output
byte for byte.

Exit codes: 0 success, 2 config error (message names the offending field),
3 unsupported degeneracy, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .asymptotics import (
    PARETO_EXACT,
    AsymptoticEstimate,
    AtLeastI,
    ComplementBox,
    ConeAnalysis,
    MarginalSpec,
    Rectangular,
    TailSetSpec,
    UnsupportedDegeneracy,
    asymptotic_estimate,
    cone_analysis,
    mu_i_at_least,
    mu_i_rectangular,
    mu_level_one,
)
from .linalg import CorrelationMatrix, IndexSubset
from .qp import SubsetQpSolver
from .simulate import (
    ConditionalCurve,
    Coordinate,
    MaxAll,
    MinOverSet,
    OrderStatistic,
    SimulationConfig,
    _gaussian_sample,
    conditional_exceedance_curves,
    default_k_grid,
    derived_series,
    hill_estimator,
    sample_rvgc,
    verify_asymptotics,
    write_conditional_csv,
    write_hill_csv,
    write_verification_csv,
)

MAX_CONFIG_DIM = 12
DEFAULT_TOLERANCE_PCT = 15.0

# Fixed curve grids for the simulate command's conditional-probability CSV.
GAUSSIAN_KAPPAS = (1.0, 2.0, 2.5)
GAUSSIAN_T_GRID = tuple(round(0.1 * i, 1) for i in range(1, 21))
PARETO_KAPPAS = (1.0, 2.0, 3.0, 4.0, 5.0)
PARETO_T_GRID = tuple(float(i) for i in range(1, 51))


class ConfigError(ValueError):
    """Invalid or missing config content; field says where."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class TailSetJob:
    """One configured tail set: its spec, display label, and an optional
    override for the verification slope target."""

    spec: TailSetSpec
    label: str
    slope_target: Optional[float] = None


@dataclass(frozen=True)
class JobConfig:
    sigma: CorrelationMatrix
    marg: MarginalSpec
    sets: tuple[TailSetJob, ...]
    t_grid: tuple[float, ...]
    n: Optional[int]
    seed: Optional[int]
    k_grid: Optional[tuple[int, ...]]


def _field_positive_real(obj: dict, key: str, default=None) -> float:
    if key not in obj:
        if default is not None:
            return default
        raise ConfigError(key, f"missing required field '{key}'")
    value = obj[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(key, f"'{key}' must be a number, got {value!r}")
    if not (math.isfinite(value) and value > 0):
        raise ConfigError(key, f"'{key}' must be a positive finite real, got {value!r}")
    return float(value)


def _parse_sigma(obj: dict) -> CorrelationMatrix:
    if "sigma" not in obj:
        raise ConfigError("sigma", "missing required field 'sigma'")
    try:
        entries = np.asarray(obj["sigma"], dtype=float)
    except (TypeError, ValueError) as err:
        raise ConfigError("sigma", f"'sigma' is not a numeric matrix: {err}") from None
    try:
        sigma = CorrelationMatrix(entries)
    except ValueError as err:
        raise ConfigError("sigma", f"'sigma' is not a valid correlation matrix: {err}") from None
    if sigma.dim > MAX_CONFIG_DIM:
        raise ConfigError("sigma", f"'sigma' dimension {sigma.dim} exceeds the d <= {MAX_CONFIG_DIM} capacity")
    return sigma


def _parse_tail_set(raw, position: int, dim: int) -> TailSetJob:
    field = f"sets[{position}]"
    if not isinstance(raw, dict):
        raise ConfigError(field, f"each set must be an object, got {raw!r}")
    kind = raw.get("type")
    label = raw.get("label")
    if label is not None and not isinstance(label, str):
        raise ConfigError(f"{field}.label", "'label' must be a string")
    slope_target = raw.get("slope_target")
    if slope_target is not None:
        if not isinstance(slope_target, (int, float)) or isinstance(slope_target, bool):
            raise ConfigError(f"{field}.slope_target", "'slope_target' must be a number")
        slope_target = float(slope_target)

    try:
        if kind == "rectangular":
            members = raw.get("subset")
            if not isinstance(members, list) or not members:
                raise ConfigError(f"{field}.subset", "'subset' must be a nonempty list of labels")
            spec = Rectangular(
                IndexSubset(tuple(int(m) for m in members)),
                tuple(raw.get("thresholds", ())),
            )
            spec.subset.validate_within(dim)
            default_label = f"rect{spec.subset}"
        elif kind == "at-least":
            level = raw.get("level")
            if not isinstance(level, int) or isinstance(level, bool):
                raise ConfigError(f"{field}.level", "'level' must be an integer")
            spec = AtLeastI(tuple(raw.get("thresholds", ())), level)
            if len(spec.thresholds) != dim:
                raise ConfigError(f"{field}.thresholds", f"need {dim} thresholds, got {len(spec.thresholds)}")
            default_label = f"atleast{level}"
        elif kind == "complement-box":
            spec = ComplementBox(tuple(raw.get("thresholds", ())))
            if len(spec.thresholds) != dim:
                raise ConfigError(f"{field}.thresholds", f"need {dim} thresholds, got {len(spec.thresholds)}")
            default_label = "box-complement"
        else:
            raise ConfigError(
                f"{field}.type",
                f"'type' must be one of rectangular, at-least, complement-box; got {kind!r}",
            )
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(field, str(err)) from None
    return TailSetJob(spec=spec, label=label or f"{default_label}#{position + 1}", slope_target=slope_target)


def load_job_config(path: str, seed_override: Optional[int] = None) -> JobConfig:
    """Parse and validate a job config file; raises ConfigError naming the field."""
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as err:
        raise ConfigError("config", f"cannot read config: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError("config", f"config is not valid JSON: {err}") from None
    if not isinstance(obj, dict):
        raise ConfigError("config", "config root must be an object")

    sigma = _parse_sigma(obj)
    alpha = _field_positive_real(obj, "alpha")
    scale_c = _field_positive_real(obj, "scale_c", default=1.0)
    family = PARETO_EXACT if scale_c == 1.0 else "asymptotic-only"
    marg = MarginalSpec(alpha=alpha, scale_c=scale_c, family=family)

    raw_sets = obj.get("sets", [])
    if not isinstance(raw_sets, list):
        raise ConfigError("sets", "'sets' must be a list")
    sets = tuple(_parse_tail_set(raw, i, sigma.dim) for i, raw in enumerate(raw_sets))

    raw_grid = obj.get("t_grid", [])
    if not isinstance(raw_grid, list) or not all(
        isinstance(t, (int, float)) and not isinstance(t, bool) for t in raw_grid
    ):
        raise ConfigError("t_grid", "'t_grid' must be a list of numbers")
    t_grid = tuple(float(t) for t in raw_grid)
    if any(not math.isfinite(t) or t < 10.0 for t in t_grid):
        raise ConfigError("t_grid", "'t_grid' values must be finite and >= 10 (asymptotic evaluation guard)")
    if any(t_grid[i] >= t_grid[i + 1] for i in range(len(t_grid) - 1)):
        raise ConfigError("t_grid", "'t_grid' must be strictly increasing")

    n = seed = k_grid = None
    sim = obj.get("simulation")
    if sim is not None:
        if not isinstance(sim, dict):
            raise ConfigError("simulation", "'simulation' must be an object")
        n = sim.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ConfigError("simulation.n", f"'n' must be a positive integer, got {n!r}")
        seed = sim.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ConfigError("simulation.seed", f"'seed' must be a 64-bit unsigned integer, got {seed!r}")
        raw_k = sim.get("k_grid")
        if raw_k is not None:
            if not isinstance(raw_k, list) or not all(
                isinstance(k, int) and not isinstance(k, bool) for k in raw_k
            ):
                raise ConfigError("simulation.k_grid", "'k_grid' must be a list of integers")
            k_grid = tuple(raw_k)

    if seed_override is not None:
        if not 0 <= seed_override < 2**64:
            raise ConfigError("seed", f"--seed must be a 64-bit unsigned integer, got {seed_override}")
        seed = seed_override

    return JobConfig(sigma=sigma, marg=marg, sets=sets, t_grid=t_grid, n=n, seed=seed, k_grid=k_grid)


def _family_text(family) -> str:
    return " ".join(str(s) for s in family)


def _set_kind(spec: TailSetSpec) -> str:
    if isinstance(spec, Rectangular):
        return "rectangular"
    if isinstance(spec, AtLeastI):
        return "at-least"
    return "complement-box"


def _cone_mu(job: JobConfig, cones: dict[int, ConeAnalysis], item: TailSetJob) -> tuple[float, str]:
    """Cone-level limit mass of a configured set and the cone it lives in."""
    spec = item.spec
    if isinstance(spec, Rectangular):
        if len(spec.subset) == 1:
            return spec.thresholds[0] ** -job.marg.alpha, "level 1"
        cone = cones[len(spec.subset)]
        return mu_i_rectangular(cone, spec), f"level {cone.level}"
    if isinstance(spec, ComplementBox):
        return mu_level_one(job.marg, spec.thresholds), "level 1"
    if spec.level == 1:
        return mu_level_one(job.marg, spec.thresholds), "level 1"
    cone = cones[spec.level]
    return mu_i_at_least(cone, spec), f"level {cone.level}"


def cmd_analyze(job: JobConfig, out_dir: str) -> int:
    """Cone analysis for every level plus per-set decay laws; writes
    cones.csv and sets.csv."""
    solver = SubsetQpSolver(job.sigma)
    d = job.sigma.dim
    cones = {
        level: cone_analysis(job.sigma, job.marg, level, solver=solver)
        for level in range(2, d + 1)
    }

    print(f"dimension d={d}, alpha={job.marg.alpha:g}, scale_c={job.marg.scale_c:g}")
    print("== cone analysis ==")
    for level, cone in cones.items():
        print(
            f"level {level}: gamma={cone.gamma:.12g} alpha_{level}={cone.alpha:.12g} "
            f"|I|={cone.min_active_size} minimizing: {_family_text(cone.minimizing_family)} "
            f"principal: {_family_text(cone.principal_family)}"
        )

    with open(os.path.join(out_dir, "cones.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["level", "gamma", "alpha", "min_active_size", "minimizing_family", "principal_family"]
        )
        for level, cone in cones.items():
            writer.writerow(
                [
                    level,
                    repr(cone.gamma),
                    repr(cone.alpha),
                    cone.min_active_size,
                    "|".join(str(s) for s in cone.minimizing_family),
                    "|".join(str(s) for s in cone.principal_family),
                ]
            )

    print("== tail sets ==")
    with open(os.path.join(out_dir, "sets.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["set", "type", "a", "beta", "log_constant", "mu", "mu_flag", "t", "log_probability"]
        )
        for item in job.sets:
            est = asymptotic_estimate(job.sigma, job.marg, item.spec)
            mu, mu_level = _cone_mu(job, cones, item)
            flagged = mu == 0.0 and not est.is_zero
            mu_flag = "null-at-cone-scale" if flagged else "ok"
            print(
                f"{item.label}: a={est.power_exponent:.12g} beta={est.log_log_exponent:.12g} "
                f"log_constant={est.log_constant:.12g} mu[{mu_level}]={mu:.12g}"
                + (" (mass null at the cone scale; set decays faster than the cone)" if flagged else "")
            )
            for contrib in est.contributing_sets:
                where = str(contrib.subset) if contrib.subset is not None else "(marginal)"
                active = str(contrib.active_set) if contrib.active_set is not None else "-"
                print(
                    f"  contributing {where}: active={active} gamma={contrib.gamma:.12g} "
                    f"log_constant={contrib.log_constant:.12g}"
                )
            for t in job.t_grid:
                log_p = est.evaluate_log(t)
                print(f"  t={t:g}: log_probability={log_p:.12g}")
                writer.writerow(
                    [
                        item.label,
                        _set_kind(item.spec),
                        repr(est.power_exponent),
                        repr(est.log_log_exponent),
                        repr(est.log_constant),
                        repr(mu),
                        mu_flag,
                        repr(t),
                        repr(log_p),
                    ]
                )
    return 0


def _simulation_config(job: JobConfig) -> SimulationConfig:
    if job.n is None or job.seed is None:
        raise ConfigError("simulation", "this command requires the 'simulation' block")
    if job.marg.family != PARETO_EXACT:
        raise ConfigError("scale_c", "simulation requires the exact Pareto marginal (scale_c = 1)")
    return SimulationConfig(sigma=job.sigma, marg=job.marg, n=job.n, seed=job.seed)


def cmd_simulate(job: JobConfig, out_dir: str) -> int:
    """One seeded draw; writes hill.csv (tail-index curves for the standard
    derived series) and condprob.csv (conditional exceedance curves)."""
    cfg = _simulation_config(job)
    d = job.sigma.dim
    # One draw feeds both sides: the heavy-tailed sample is the transform of
    # the same normal rows the gaussian-side curves condition on.
    z = _gaussian_sample(cfg)
    x = np.power(ndtr(-z), -1.0 / job.marg.alpha)

    k_grid = job.k_grid if job.k_grid is not None else default_k_grid(cfg.n)
    series: list[tuple[str, object]] = [(f"X{j}", Coordinate(j)) for j in range(1, d + 1)]
    for a in range(1, d + 1):
        for b in range(a + 1, d + 1):
            series.append((f"min(X{a},X{b})", MinOverSet(IndexSubset.of(a, b))))
    if d >= 2:
        series.append(("X_(2)", OrderStatistic(2)))
    series.append(("min_all", MinOverSet(IndexSubset.full(d))))
    series.append(("max_all", MaxAll()))

    curves = [
        hill_estimator(derived_series(x, selector), k_grid=k_grid, series_label=label)
        for label, selector in series
    ]
    write_hill_csv(os.path.join(out_dir, "hill.csv"), curves)

    curves_by_side: dict[str, list[ConditionalCurve]] = {}
    if d >= 2:
        curves_by_side["gaussian"] = conditional_exceedance_curves(
            cfg, GAUSSIAN_KAPPAS, GAUSSIAN_T_GRID, side="gaussian", samples=z
        )
        curves_by_side["pareto"] = conditional_exceedance_curves(
            cfg, PARETO_KAPPAS, PARETO_T_GRID, side="pareto", samples=x
        )
        write_conditional_csv(os.path.join(out_dir, "condprob.csv"), curves_by_side)

    print(f"simulated n={cfg.n} seed={cfg.seed} d={d}")
    print(f"hill.csv: {len(curves)} series over k in [{k_grid[0]}, {k_grid[-1]}]")
    if d >= 2:
        print("condprob.csv: gaussian kappas " + ",".join(f"{k:g}" for k in GAUSSIAN_KAPPAS)
              + " / pareto kappas " + ",".join(f"{k:g}" for k in PARETO_KAPPAS))
    return 0


def cmd_verify(job: JobConfig, out_dir: str, tolerance_pct: float) -> int:
    """Empirical-versus-asymptotic table per configured set; exit 4 when any
    fitted slope misses its target by more than the tolerance."""
    if not job.sets:
        raise ConfigError("sets", "verify requires at least one tail set")
    if not job.t_grid:
        raise ConfigError("t_grid", "verify requires a nonempty t_grid")
    cfg = _simulation_config(job)
    samples = sample_rvgc(cfg)

    print(f"verification: n={cfg.n} seed={cfg.seed} tolerance={tolerance_pct:g}%")
    failed = False
    for position, item in enumerate(job.sets, start=1):
        table = verify_asymptotics(cfg, item.spec, job.t_grid, samples=samples)
        target = item.slope_target if item.slope_target is not None else table.slope_target
        if math.isnan(table.slope) or target == 0.0:
            ok = False
            deviation_pct = math.nan
        else:
            deviation_pct = 100.0 * abs(table.slope - target) / abs(target)
            ok = deviation_pct <= tolerance_pct
        failed = failed or not ok
        write_verification_csv(os.path.join(out_dir, f"verify_{position}.csv"), table)
        usable = sum(1 for row in table.rows if row.flag == "ok")
        print(
            f"{item.label}: slope={table.slope:.6g} target={target:.6g} "
            f"deviation={deviation_pct:.3g}% rows={len(table.rows)} usable={usable} "
            + ("PASS" if ok else "FAIL")
        )
    return 4 if failed else 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="artifact",
        description=(
            "Asymptotic joint-tail analysis of heavy-tailed vectors with "
            "normal-copula dependence, with seeded Monte Carlo verification."
        ),
    )
    parser.add_argument("command", choices=["analyze", "simulate", "verify"])
    parser.add_argument("--config", required=True, help="path to the JSON job config")
    parser.add_argument("--out", required=True, help="output directory for CSV files")
    parser.add_argument(
        "--tolerance",
        type=float,
        default=DEFAULT_TOLERANCE_PCT,
        help="verify: allowed slope deviation in percent (default 15)",
    )
    parser.add_argument("--seed", type=int, default=None, help="override simulation.seed")
    args = parser.parse_args(argv)

    try:
        job = load_job_config(args.config, seed_override=args.seed)
        os.makedirs(args.out, exist_ok=True)
        if args.command == "analyze":
            return cmd_analyze(job, args.out)
        if args.command == "simulate":
            return cmd_simulate(job, args.out)
        return cmd_verify(job, args.out, args.tolerance)
    except ConfigError as err:
        print(f"config error in field '{err.field}': {err}", file=sys.stderr)
        return 2
    except UnsupportedDegeneracy as err:
        print(f"unsupported degeneracy: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
