"""Exact cube partition of a ball and per-cube concentration checks.

The grid has side ``gamma * r`` and is anchored so the origin is a cell
center. Cells whose 2^d corners all lie in the closed ball B(0, R) are the
inner cells; every other cell meeting the ball is assigned to the inner cell
with the nearest center (ties broken lexicographically on index vectors).
The assigned regions, clipped to the ball, tile B(0, R) exactly.

Region masses combine the tensor quadrature for whole inner cubes with a
seeded Monte Carlo estimate (recorded standard error) for ball-clipped
boundary cells; the concentration check folds three standard errors of that
estimate into the violation band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from rgglab.density import DensitySpec, cube_mass, eval_density
from rgglab.sampler import PointCloud

__all__ = [
    "InsufficientResolution",
    "CubePartition",
    "PartitionCounts",
    "CellCheck",
    "ConcentrationReport",
    "build_partition",
    "count_points",
    "check_concentration",
]

BOUNDARY_MC_SAMPLES = 100_000


class InsufficientResolution(ValueError):
    """No grid cell fits inside the ball at the requested side width."""


@dataclass(frozen=True, eq=False)
class CubePartition:
    dimension: int
    side: float
    radius: float  # R, the ball being partitioned
    inner_cells: np.ndarray  # (K, d) integer index vectors, lexicographically sorted
    assignment: dict  # cell tuple -> owning inner cell tuple, total over touched cells
    seed: int = 0
    _mass_cache: dict = field(default_factory=dict, repr=False)

    def cell_center(self, index) -> np.ndarray:
        return np.asarray(index, dtype=float) * self.side

    def cell_bounds(self, index) -> tuple[np.ndarray, np.ndarray]:
        center = self.cell_center(index)
        half = 0.5 * self.side
        return center - half, center + half

    def cell_of_point(self, x: np.ndarray) -> tuple:
        # half-open cubes [center - s/2, center + s/2) per axis
        return tuple(int(k) for k in np.floor(x / self.side + 0.5).astype(np.int64))

    def region_masses(self, spec: DensitySpec) -> dict:
        """Mass (nu, standard error) of each owned region under the density.

        Whole inner cubes use the tensor quadrature (zero recorded error);
        ball-clipped boundary cells use BOUNDARY_MC_SAMPLES uniform draws per
        cell, seeded from the partition's own seed, so the result is
        deterministic. Cached per spec.
        """
        key = spec
        if key in self._mass_cache:
            return self._mass_cache[key]
        masses = {
            tuple(cell): [cube_mass(spec, *self.cell_bounds(cell)), 0.0]
            for cell in self.inner_cells.tolist()
        }
        inner_set = set(masses)
        boundary = sorted(c for c in self.assignment if c not in inner_set)
        vol = self.side**self.dimension
        for ordinal, cell in enumerate(boundary):
            rng = np.random.default_rng(
                np.random.SeedSequence(self.seed, spawn_key=(ordinal,))
            )
            lo, hi = self.cell_bounds(cell)
            pts = rng.uniform(lo, hi, size=(BOUNDARY_MC_SAMPLES, self.dimension))
            vals = eval_density(spec, np.linalg.norm(pts, axis=1))
            vals = vals * (np.linalg.norm(pts, axis=1) <= self.radius)
            owner = self.assignment[cell]
            masses[owner][0] += vol * float(np.mean(vals))
            err = vol * float(np.std(vals)) / math.sqrt(BOUNDARY_MC_SAMPLES)
            masses[owner][1] = math.hypot(masses[owner][1], err)
        out = {cell: (nu, se) for cell, (nu, se) in masses.items()}
        self._mass_cache[key] = out
        return out


@dataclass(frozen=True)
class PartitionCounts:
    counts: dict  # inner cell tuple -> point count in its owned region
    overflow: int  # points strictly outside the closed ball

    @property
    def total(self) -> int:
        return sum(self.counts.values()) + self.overflow


def build_partition(dimension: int, R: float, side: float, seed: int = 0) -> CubePartition:
    """Partition B(0, R) into a grid of side ``side`` with origin-centered cells."""
    if not (R > 0 and side > 0):
        raise ValueError("R and side must be positive")
    if side > R:
        raise InsufficientResolution(f"side {side} exceeds the ball radius {R}")
    d = int(dimension)
    half = 0.5 * side
    reach = int(math.ceil((R + half) / side))
    axes = [np.arange(-reach, reach + 1)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    centers = grid * side
    abs_c = np.abs(centers)
    nearest = np.sqrt(np.sum(np.maximum(abs_c - half, 0.0) ** 2, axis=1))
    farthest = np.sqrt(np.sum((abs_c + half) ** 2, axis=1))
    touching = grid[nearest <= R]
    inner = grid[farthest <= R]
    if len(inner) == 0:
        raise InsufficientResolution(
            f"no cell of side {side} fits inside B(0, {R}); refine the grid"
        )
    inner = inner[np.lexsort(inner.T[::-1])]  # lexicographic order fixes tie-breaks
    inner.setflags(write=False)
    inner_centers = inner * side
    assignment = {}
    inner_set = {tuple(c) for c in inner.tolist()}
    for cell in touching.tolist():
        key = tuple(cell)
        if key in inner_set:
            assignment[key] = key
            continue
        dists = np.sum((inner_centers - np.asarray(cell) * side) ** 2, axis=1)
        # argmin returns the first minimum; inner is lex-sorted, so exact ties
        # resolve to the lexicographically smallest index vector
        assignment[key] = tuple(inner[int(np.argmin(dists))].tolist())
    return CubePartition(
        dimension=d,
        side=float(side),
        radius=float(R),
        inner_cells=inner,
        assignment=assignment,
    )


def count_points(partition: CubePartition, cloud: PointCloud) -> PartitionCounts:
    """Count the cloud's points per owned region; points beyond R are overflow."""
    if cloud.spec.dimension != partition.dimension:
        raise ValueError("cloud and partition dimensions differ")
    counts = {tuple(c): 0 for c in partition.inner_cells.tolist()}
    inside = cloud.radii <= partition.radius
    overflow = int(cloud.count - np.count_nonzero(inside))
    pts = cloud.points[inside]
    if len(pts):
        cells = np.floor(pts / partition.side + 0.5).astype(np.int64)
        uniq, counts_per_cell = np.unique(cells, axis=0, return_counts=True)
        for cell, c in zip(uniq.tolist(), counts_per_cell.tolist()):
            owner = partition.assignment.get(tuple(cell))
            if owner is None:
                raise RuntimeError(
                    f"point cell {tuple(cell)} inside the ball has no owner; "
                    "partition invariant violated"
                )
            counts[owner] += int(c)
    return PartitionCounts(counts=counts, overflow=overflow)


@dataclass(frozen=True)
class CellCheck:
    index: tuple
    count: int
    nu: float
    se: float
    lower: float
    upper: float
    violated: bool

    def to_json(self) -> dict:
        return {
            "index": list(self.index),
            "count": self.count,
            "nu": self.nu,
            "se": self.se,
            "lower": self.lower,
            "upper": self.upper,
            "violated": self.violated,
        }


@dataclass(frozen=True)
class ConcentrationReport:
    gamma: float
    n: float
    cells: tuple
    overflow: int
    violations: tuple
    max_relative_deviation: float

    @property
    def violation_count(self) -> int:
        return len(self.violations)

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "n": self.n,
            "cells": [c.to_json() for c in self.cells],
            "overflow": self.overflow,
            "violations": [list(v) for v in self.violations],
            "max_relative_deviation": self.max_relative_deviation,
        }


def check_concentration(
    partition: CubePartition, cloud: PointCloud, spec: DensitySpec, gamma: float
) -> ConcentrationReport:
    """Compare per-region counts against (1 +- gamma) n nu(Q_i).

    The Monte Carlo uncertainty of clipped-cell masses widens the band by
    three standard errors on each side.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    n = cloud.intensity_n
    counted = count_points(partition, cloud)
    masses = partition.region_masses(spec)
    cells = []
    violations = []
    max_dev = 0.0
    for index in map(tuple, partition.inner_cells.tolist()):
        count = counted.counts[index]
        nu, se = masses[index]
        lower = (1.0 - gamma) * n * max(nu - 3.0 * se, 0.0)
        upper = (1.0 + gamma) * n * (nu + 3.0 * se)
        violated = not (lower <= count <= upper)
        if nu > 0:
            max_dev = max(max_dev, abs(count - n * nu) / (n * nu))
        if violated:
            violations.append(index)
        cells.append(
            CellCheck(index, count, nu, se, lower, upper, violated)
        )
    return ConcentrationReport(
        gamma=float(gamma),
        n=float(n),
        cells=tuple(cells),
        overflow=counted.overflow,
        violations=tuple(violations),
        max_relative_deviation=max_dev,
    )
