"""Declarative Monte Carlo sweeps over (density, n, r-schedule) grids.

A sweep cell is one (n, r) pair; each of its trials samples a cloud with a
seed derived as child(master_seed, cell_index, trial_index), builds the
graph, and records connectivity statistics. Trials are embarrassingly
parallel and records are sorted by (cell, trial) before aggregation, so any
worker count produces byte-identical output.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rgglab import theory
from rgglab.density import (
    DensitySpec,
    HeavyTail,
    LightTail,
    NumericFailure,
    psi_inverse,
    psi_prime,
)
from rgglab.graph import build, stats
from rgglab.partition import CubePartition, InsufficientResolution, build_partition, check_concentration
from rgglab.sampler import child_seed, sample

__all__ = [
    "ConfigError",
    "RSchedule",
    "ExperimentConfig",
    "TrialRecord",
    "CellAggregate",
    "SweepResult",
    "density_label",
    "parse_density",
    "resolve_radius",
    "run_trial",
    "run",
    "aggregate_cell",
    "wilson_interval",
    "CSV_COLUMNS",
]

CSV_COLUMNS = (
    "density,d,n,r,trials,p_disconnected,ci_lo,ci_hi,"
    "p_tail_empty,mean_isolated,expected_isolated,prediction"
)

_Z95 = 1.959963984540054


class ConfigError(ValueError):
    """Malformed experiment config; carries the JSON pointer of the field."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


def density_label(spec: DensitySpec) -> str:
    fam = spec.family
    if isinstance(fam, HeavyTail):
        return f"heavy:{fam.alpha:g}"
    if fam.v == 2.0 and fam.scale == 1.0:
        return "gaussian"
    if fam.scale == 1.0:
        return f"light:{fam.v:g}"
    return f"light:{fam.v:g}:{fam.scale:g}"


def parse_density(text: str, dimension: int = 2) -> DensitySpec:
    """Parse 'gaussian', 'heavy:ALPHA' or 'light:V[:SCALE]'."""
    parts = text.strip().lower().split(":")
    try:
        if parts[0] == "gaussian" and len(parts) == 1:
            return DensitySpec(dimension, LightTail(2.0, 1.0))
        if parts[0] == "heavy" and len(parts) == 2:
            return DensitySpec(dimension, HeavyTail(float(parts[1])))
        if parts[0] == "light" and len(parts) in (2, 3):
            scale = float(parts[2]) if len(parts) == 3 else 1.0
            return DensitySpec(dimension, LightTail(float(parts[1]), scale))
    except ValueError as exc:
        raise ConfigError("/density", str(exc)) from exc
    raise ConfigError("/density", f"unrecognized density {text!r}")


@dataclass(frozen=True)
class RSchedule:
    """Radius schedule: fixed r, a multiple of tau(n), or of 1/psi'(psi_inv(log n))."""

    kind: str  # "fixed" | "tau_multiple" | "exp_multiple"
    value: float

    _KINDS = ("fixed", "tau_multiple", "exp_multiple")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ConfigError("/r_schedule", f"unknown schedule kind {self.kind!r}")
        if not self.value > 0:
            raise ConfigError(f"/r_schedule/{self.kind}", "value must be > 0")

    def to_json(self) -> dict:
        return {self.kind: self.value}


def resolve_radius(spec: DensitySpec, n: float, schedule: RSchedule) -> tuple[float, float, bool]:
    """Raw schedule radius, the effective radius clipped into (0, 1], clip flag."""
    if schedule.kind == "fixed":
        raw = schedule.value
    elif schedule.kind == "tau_multiple":
        try:
            raw = schedule.value * theory.tau(spec, n)
        except ValueError as exc:
            raise ConfigError("/r_schedule/tau_multiple", str(exc)) from exc
    else:
        if not isinstance(spec.family, LightTail):
            raise ConfigError("/r_schedule/exp_multiple", "needs a light-tail density")
        raw = schedule.value / psi_prime(spec, psi_inverse(spec, math.log(n)))
    clipped = raw > 1.0
    return raw, min(raw, 1.0), clipped


@dataclass(frozen=True)
class ExperimentConfig:
    spec: DensitySpec
    n_values: tuple
    r_schedule: RSchedule
    trials: int
    master_seed: int
    gamma: float | None = None
    probes: tuple = ()

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigError("/trials", "must be an integer >= 1")
        if not self.n_values:
            raise ConfigError("/n_values", "must be a non-empty list")

    def to_json(self) -> dict:
        return {
            "density": self.spec.to_json(),
            "n_values": list(self.n_values),
            "r_schedule": self.r_schedule.to_json(),
            "gamma": self.gamma,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "probes": list(self.probes),
        }

    @staticmethod
    def from_json(data: dict) -> "ExperimentConfig":
        def need(key, pointer):
            if key not in data:
                raise ConfigError(pointer, "missing required field")
            return data[key]

        density = need("density", "/density")
        try:
            spec = DensitySpec.from_json(density)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("/density", str(exc)) from exc

        raw_n = need("n_values", "/n_values")
        if not isinstance(raw_n, list) or not raw_n:
            raise ConfigError("/n_values", "must be a non-empty list of numbers")
        n_values = []
        for i, value in enumerate(raw_n):
            if not isinstance(value, (int, float)) or not value > 0:
                raise ConfigError(f"/n_values/{i}", "must be a positive number")
            n_values.append(float(value))

        raw_sched = need("r_schedule", "/r_schedule")
        if not isinstance(raw_sched, dict) or len(raw_sched) != 1:
            raise ConfigError("/r_schedule", "must be an object with exactly one schedule key")
        kind, value = next(iter(raw_sched.items()))
        if not isinstance(value, (int, float)):
            raise ConfigError(f"/r_schedule/{kind}", "must be a number")
        schedule = RSchedule(kind, float(value))

        trials = need("trials", "/trials")
        if not isinstance(trials, int) or trials < 1:
            raise ConfigError("/trials", "must be an integer >= 1")

        master_seed = need("master_seed", "/master_seed")
        if not isinstance(master_seed, int) or master_seed < 0:
            raise ConfigError("/master_seed", "must be a non-negative integer")

        gamma = data.get("gamma")
        if gamma is not None:
            if not isinstance(gamma, (int, float)) or not 0 < gamma < 1:
                raise ConfigError("/gamma", "must be a number in (0, 1)")
            gamma = float(gamma)

        probes = data.get("probes", [])
        if not isinstance(probes, list):
            raise ConfigError("/probes", "must be a list of radii")
        for i, p in enumerate(probes):
            if not isinstance(p, (int, float)) or p < 0:
                raise ConfigError(f"/probes/{i}", "must be a non-negative number")

        return ExperimentConfig(
            spec=spec,
            n_values=tuple(n_values),
            r_schedule=schedule,
            trials=trials,
            master_seed=master_seed,
            gamma=gamma,
            probes=tuple(float(p) for p in probes),
        )


@dataclass(frozen=True)
class TrialRecord:
    n: float
    r: float
    seed: int
    point_count: int
    num_components: int
    is_connected: bool
    r_c: float
    r_max: float
    isolated_counts: tuple  # ((probe, count), ...), first probe is r0
    tail_points_beyond_r1: int
    concentration: dict | None = None

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "seed": self.seed,
            "point_count": self.point_count,
            "num_components": self.num_components,
            "is_connected": self.is_connected,
            "r_c": self.r_c,
            "r_max": self.r_max,
            "isolated_counts": [[p, c] for p, c in self.isolated_counts],
            "tail_points_beyond_r1": self.tail_points_beyond_r1,
            "concentration": self.concentration,
        }


def run_trial(
    spec: DensitySpec,
    n: float,
    r: float,
    seed: int,
    probes=(),
    r1: float | None = None,
    gamma: float | None = None,
    partition: CubePartition | None = None,
) -> TrialRecord:
    """One seeded trial: sample, build, measure. Pure function of its inputs."""
    if r1 is None:
        if isinstance(spec.family, HeavyTail):
            _, r1 = theory.heavy_tail_radii(spec, n)
        else:
            _, r1 = theory.light_tail_radii(spec, n)
    cloud = sample(spec, n, seed)
    graph = build(cloud, r)
    st = stats(graph, probes)
    conc = None
    if partition is not None and gamma is not None:
        report = check_concentration(partition, cloud, spec, gamma)
        conc = {
            "violations": report.violation_count,
            "cells": len(report.cells),
            "max_relative_deviation": report.max_relative_deviation,
            "overflow": report.overflow,
        }
    return TrialRecord(
        n=float(n),
        r=float(r),
        seed=int(seed),
        point_count=cloud.count,
        num_components=st.num_components,
        is_connected=st.is_connected,
        r_c=st.r_c,
        r_max=st.r_max,
        isolated_counts=tuple((float(p), int(c)) for p, c in st.isolated_within.items()),
        tail_points_beyond_r1=int(np.count_nonzero(cloud.radii > r1)),
        concentration=conc,
    )


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson 95% score interval; behaves sensibly at p near 0 and 1."""
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class CellAggregate:
    density: str
    d: int
    n: float
    r: float
    r_raw: float
    r_clipped: bool
    flags: tuple
    trials: int
    failures: int
    p_disconnected: float
    ci_lo: float
    ci_hi: float
    p_rc_lt_rmax: float
    p_tail_empty: float
    mean_isolated: float
    expected_isolated: float
    prediction: str
    report: theory.ThresholdReport
    mean_violations: float | None = None
    mean_max_relative_deviation: float | None = None

    def csv_row(self) -> str:
        cells = [
            self.density,
            str(self.d),
            f"{self.n:g}",
            repr(self.r),
            str(self.trials),
            repr(self.p_disconnected),
            repr(self.ci_lo),
            repr(self.ci_hi),
            repr(self.p_tail_empty),
            repr(self.mean_isolated),
            repr(self.expected_isolated),
            self.prediction,
        ]
        return ",".join(cells)

    def to_json(self) -> dict:
        out = {
            "density": self.density,
            "d": self.d,
            "n": self.n,
            "r": self.r,
            "r_raw": self.r_raw,
            "r_clipped": self.r_clipped,
            "flags": list(self.flags),
            "trials": self.trials,
            "failures": self.failures,
            "p_disconnected": self.p_disconnected,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "p_rc_lt_rmax": self.p_rc_lt_rmax,
            "p_tail_empty": self.p_tail_empty,
            "mean_isolated": self.mean_isolated,
            "expected_isolated": self.expected_isolated,
            "prediction": self.prediction,
            "report": self.report.to_json(),
        }
        if self.mean_violations is not None:
            out["mean_violations"] = self.mean_violations
            out["mean_max_relative_deviation"] = self.mean_max_relative_deviation
        return out


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    cells: tuple
    records: tuple  # ((cell_index, TrialRecord), ...) sorted by (cell, trial)

    def csv_text(self) -> str:
        lines = [CSV_COLUMNS]
        lines.extend(cell.csv_row() for cell in self.cells)
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "cells": [c.to_json() for c in self.cells],
            "records": [
                {"cell": idx, **rec.to_json()} for idx, rec in self.records
            ],
        }


def aggregate_cell(
    records: list[TrialRecord],
    *,
    density: str,
    d: int,
    n: float,
    r: float,
    r_raw: float,
    r_clipped: bool,
    failures: int,
    report: theory.ThresholdReport,
    flags: tuple = (),
) -> CellAggregate:
    """Reduce one cell's trial records; pure, so aggregates can be recomputed."""
    m = len(records)
    disconnected = sum(1 for rec in records if not rec.is_connected)
    ci_lo, ci_hi = wilson_interval(disconnected, m)
    mean_isolated = float(np.mean([rec.isolated_counts[0][1] for rec in records])) if m else 0.0
    has_conc = m > 0 and records[0].concentration is not None
    return CellAggregate(
        density=density,
        d=d,
        n=n,
        r=r,
        r_raw=r_raw,
        r_clipped=r_clipped,
        flags=flags,
        trials=m,
        failures=failures,
        p_disconnected=disconnected / m if m else 0.0,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        p_rc_lt_rmax=sum(1 for rec in records if rec.r_c < rec.r_max) / m if m else 0.0,
        p_tail_empty=sum(1 for rec in records if rec.tail_points_beyond_r1 == 0) / m if m else 0.0,
        mean_isolated=mean_isolated,
        expected_isolated=report.expected_isolated,
        prediction=report.prediction,
        report=report,
        mean_violations=(
            float(np.mean([rec.concentration["violations"] for rec in records]))
            if has_conc
            else None
        ),
        mean_max_relative_deviation=(
            float(np.mean([rec.concentration["max_relative_deviation"] for rec in records]))
            if has_conc
            else None
        ),
    )


def _worker_count(threads: int | None) -> int:
    count = threads if threads is not None else (os.cpu_count() or 1)
    cap = os.environ.get("RGG_THREADS")
    if cap:
        count = min(count, int(cap))
    return max(1, count)


def _trial_task(payload):
    (cell_idx, trial_idx, spec_json, n, r, seed, probes, r1, gamma, partition) = payload
    spec = DensitySpec.from_json(spec_json)
    try:
        rec = run_trial(spec, n, r, seed, probes, r1, gamma, partition)
        return cell_idx, trial_idx, rec, None
    except Exception as exc:  # per-trial failures recorded, not fatal
        return cell_idx, trial_idx, None, f"{type(exc).__name__}: {exc}"


def run(config: ExperimentConfig, threads: int | None = None) -> SweepResult:
    """Run the sweep; deterministic for a fixed master_seed at any worker count."""
    spec = config.spec
    label = density_label(spec)
    cell_meta = []
    tasks = []
    prev_raw = None
    for cell_idx, n in enumerate(config.n_values):
        r_raw, r, clipped = resolve_radius(spec, n, config.r_schedule)
        flags = []
        if clipped:
            flags.append("r_clipped")
        # the model assumes a non-increasing radius sequence; a pre-asymptotic
        # rise of the schedule (tau grows below n ~ 1.6e3) is visible, not fatal
        if prev_raw is not None and r_raw > prev_raw * (1 + 1e-12):
            flags.append("r_increased_pre_asymptotic")
        prev_raw = r_raw
        report = theory.classify(spec, n, r, config.gamma)
        if isinstance(spec.family, HeavyTail):
            r0, r1 = theory.heavy_tail_radii(spec, n)
        else:
            r0, r1 = theory.light_tail_radii(spec, n)
        partition = None
        if config.gamma is not None and theory.regime_of(spec) == "superexponential":
            try:
                conc = theory.concentration_radii(spec, n, r, config.gamma)
                if math.isfinite(conc.r0) and conc.r0 > 0:
                    partition = build_partition(
                        spec.dimension,
                        conc.r0,
                        config.gamma * r,
                        seed=child_seed(config.master_seed, cell_idx, 2**31),
                    )
                    partition.region_masses(spec)  # warm the cached masses once
            except (InsufficientResolution, NumericFailure):
                partition = None
        probes = (r0,) + config.probes
        cell_meta.append((n, r_raw, r, clipped, tuple(flags), report))
        for trial_idx in range(config.trials):
            seed = child_seed(config.master_seed, cell_idx, trial_idx)
            tasks.append(
                (cell_idx, trial_idx, spec.to_json(), n, r, seed, probes, r1, config.gamma, partition)
            )

    workers = _worker_count(threads)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_trial_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        raw = [_trial_task(t) for t in tasks]
    raw.sort(key=lambda item: (item[0], item[1]))

    failures_total = sum(1 for _, _, rec, _ in raw if rec is None)
    if failures_total > 0.01 * len(tasks):
        details = [err for _, _, rec, err in raw if rec is None][:5]
        raise RuntimeError(
            f"{failures_total}/{len(tasks)} trials failed; first errors: {details}"
        )

    cells = []
    records = []
    for cell_idx, (n, r_raw, r, clipped, flags, report) in enumerate(cell_meta):
        cell_records = [rec for ci, _, rec, _ in raw if ci == cell_idx and rec is not None]
        cell_failures = sum(1 for ci, _, rec, _ in raw if ci == cell_idx and rec is None)
        cells.append(
            aggregate_cell(
                cell_records,
                density=label,
                d=spec.dimension,
                n=n,
                r=r,
                r_raw=r_raw,
                r_clipped=clipped,
                failures=cell_failures,
                report=report,
                flags=flags,
            )
        )
        records.extend((cell_idx, rec) for rec in cell_records)
    return SweepResult(config=config, cells=tuple(cells), records=tuple(records))


def write_results(result: SweepResult, csv_path: str | Path, json_path: str | Path | None = None) -> None:
    Path(csv_path).write_text(result.csv_text())
    if json_path is not None:
        Path(json_path).write_text(json.dumps(result.to_json(), indent=2) + "\n")
