import math

import numpy as np
import pytest

from rgglab import density as dn
from rgglab import partition as pt
from rgglab import sampler as sp

GAUSS2 = dn.gaussian_spec(2)


def owner_by_direct_rule(partition, x):
    """Recompute the owning inner cell of a point from the definition."""
    cell = np.floor(np.asarray(x) / partition.side + 0.5).astype(int)
    centers = partition.inner_cells * partition.side
    d2 = np.sum((centers - cell * partition.side) ** 2, axis=1)
    return tuple(partition.inner_cells[int(np.argmin(d2))].tolist())


class TestBuildPartition:
    def test_origin_cell_is_inner(self):
        p = pt.build_partition(2, R=1.0, side=0.4)
        assert (0, 0) in {tuple(c) for c in p.inner_cells.tolist()}
        lo, hi = p.cell_bounds((0, 0))
        np.testing.assert_allclose(lo, [-0.2, -0.2])
        np.testing.assert_allclose(hi, [0.2, 0.2])

    def test_inner_cubes_inside_closed_ball(self):
        p = pt.build_partition(2, R=2.0, side=0.5)
        for cell in p.inner_cells.tolist():
            lo, hi = p.cell_bounds(cell)
            corners = np.array([[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]])
            assert np.all(np.linalg.norm(corners, axis=1) <= 2.0 + 1e-12)

    def test_assignment_total_and_fixed_on_inner(self):
        p = pt.build_partition(2, R=2.0, side=0.5)
        inner = {tuple(c) for c in p.inner_cells.tolist()}
        for cell in inner:
            assert p.assignment[cell] == cell
        assert set(p.assignment.values()) <= inner

    def test_insufficient_resolution(self):
        with pytest.raises(pt.InsufficientResolution):
            pt.build_partition(2, R=1.0, side=1.5)
        # d = 5: a cell of side in (2R/sqrt(5), R] touches the ball but cannot fit
        with pytest.raises(pt.InsufficientResolution):
            pt.build_partition(5, R=1.0, side=0.95)

    def test_every_ball_point_has_exactly_one_owner(self):
        p = pt.build_partition(2, R=1.5, side=0.4)
        rng = np.random.default_rng(5)
        pts = rng.uniform(-1.5, 1.5, size=(100_000, 2))
        pts = pts[np.linalg.norm(pts, axis=1) <= 1.5]
        owners = {tuple(c) for c in p.inner_cells.tolist()}
        for x in pts[:5000]:
            cell = p.cell_of_point(x)
            assert p.assignment[cell] in owners  # total and single-valued

    def test_ball_volume_from_region_counts(self):
        # conservation: per-region counts sum exactly to the in-ball count,
        # and the Monte Carlo ball volume matches omega_d R^d
        R = 1.3
        p = pt.build_partition(2, R=R, side=0.3)
        rng = np.random.default_rng(11)
        box = 2.0 * R
        pts = rng.uniform(-R, R, size=(1_000_000, 2))
        inside = np.linalg.norm(pts, axis=1) <= R
        per_region = {tuple(c): 0 for c in p.inner_cells.tolist()}
        for x in pts[inside][:200_000]:
            per_region[p.assignment[p.cell_of_point(x)]] += 1
        checked = sum(per_region.values())
        assert checked == min(int(inside.sum()), 200_000)  # exact conservation
        p_hat = float(inside.mean())
        want = dn.ball_volume(2) * R**2 / box**2
        se = math.sqrt(want * (1 - want) / len(pts))
        assert abs(p_hat - want) <= 3 * se

    def test_region_masses_sum_to_ball_mass(self):
        p = pt.build_partition(2, R=2.0, side=0.5, seed=9)
        masses = p.region_masses(GAUSS2)
        total = sum(nu for nu, _ in masses.values())
        err = math.sqrt(sum(se**2 for _, se in masses.values()))
        want = 1.0 - dn.tail_mass(GAUSS2, 2.0)
        assert abs(total - want) <= 3 * err + 1e-8

    def test_region_masses_deterministic(self):
        a = pt.build_partition(2, R=1.5, side=0.5, seed=3).region_masses(GAUSS2)
        b = pt.build_partition(2, R=1.5, side=0.5, seed=3).region_masses(GAUSS2)
        assert a == b


class TestCountPoints:
    def test_empty_cloud(self):
        p = pt.build_partition(2, R=1.0, side=0.4)
        cloud = sp.PointCloud(np.empty((0, 2)), 1.0, 0, GAUSS2)
        counted = pt.count_points(p, cloud)
        assert all(v == 0 for v in counted.counts.values())
        assert counted.overflow == 0

    def test_conservation(self):
        p = pt.build_partition(2, R=2.0, side=0.5)
        cloud = sp.sample(GAUSS2, 5000.0, seed=21)
        counted = pt.count_points(p, cloud)
        assert counted.total == cloud.count
        assert counted.overflow == int(np.sum(cloud.radii > 2.0))

    def test_matches_direct_membership_rule(self):
        p = pt.build_partition(2, R=1.8, side=0.45)
        cloud = sp.sample(GAUSS2, 3000.0, seed=33)
        counted = pt.count_points(p, cloud)
        want = {tuple(c): 0 for c in p.inner_cells.tolist()}
        for x, rad in zip(cloud.points, cloud.radii):
            if rad <= 1.8:
                want[owner_by_direct_rule(p, x)] += 1
        assert counted.counts == want

    def test_symmetry_under_axis_maps(self):
        # Exact count equivariance holds on regions free of assignment ties;
        # a tie's lexicographic resolution cannot commute with sign flips.
        p = pt.build_partition(2, R=1.5, side=0.5)
        centers = p.inner_cells * p.side
        tied_owners = set()
        for cell, owner in p.assignment.items():
            d2 = np.sum((centers - np.asarray(cell) * p.side) ** 2, axis=1)
            mins = np.nonzero(d2 == d2.min())[0]
            if len(mins) > 1:
                tied_owners.update(tuple(p.inner_cells[k].tolist()) for k in mins)
        cloud = sp.sample(GAUSS2, 2000.0, seed=44)
        base = pt.count_points(p, cloud).counts
        assert tied_owners  # the configuration genuinely exercises ties

        # sign flip of axis 0: counts move to the mirrored inner cell
        flipped = sp.PointCloud(cloud.points * np.array([-1.0, 1.0]), cloud.intensity_n, 0, GAUSS2)
        got = pt.count_points(p, flipped).counts
        for (i, j), c in base.items():
            if (i, j) not in tied_owners and (-i, j) not in tied_owners:
                assert got[(-i, j)] == c
        assert sum(got.values()) == sum(base.values())

        # axis swap: counts move to the transposed inner cell
        swapped = sp.PointCloud(cloud.points[:, ::-1], cloud.intensity_n, 0, GAUSS2)
        got = pt.count_points(p, swapped).counts
        for (i, j), c in base.items():
            if (i, j) not in tied_owners and (j, i) not in tied_owners:
                assert got[(j, i)] == c
        assert sum(got.values()) == sum(base.values())

    def test_dimension_mismatch_rejected(self):
        p = pt.build_partition(3, R=1.0, side=0.4)
        with pytest.raises(ValueError):
            pt.count_points(p, sp.sample(GAUSS2, 10.0, seed=1))


class TestCheckConcentration:
    def test_constructed_violation_is_reported(self):
        p = pt.build_partition(2, R=2.0, side=0.5, seed=7)
        gamma, n = 0.3, 200.0
        target = (1, 1)
        nu, _ = p.region_masses(GAUSS2)[target]
        k = math.ceil((1 + 2 * gamma) * n * nu)
        center = p.cell_center(target)
        pts = np.tile(center, (k, 1)) + 0.01 * np.arange(k)[:, None] / k
        cloud = sp.PointCloud(pts, n, 0, GAUSS2)
        report = pt.check_concentration(p, cloud, GAUSS2, gamma)
        assert target in report.violations
        by_index = {c.index: c for c in report.cells}
        assert by_index[target].count == k
        assert by_index[target].violated

    def test_huge_intensity_concentrates(self):
        # fixed partition, n large: every count lands in the (1 +- gamma) band
        p = pt.build_partition(2, R=1.5, side=0.5, seed=2)
        cloud = sp.sample(GAUSS2, 200_000.0, seed=512)
        report = pt.check_concentration(p, cloud, GAUSS2, 0.5)
        assert report.violation_count == 0
        assert report.max_relative_deviation < 0.5

    def test_report_serializes(self):
        p = pt.build_partition(2, R=1.0, side=0.4, seed=1)
        cloud = sp.sample(GAUSS2, 500.0, seed=3)
        blob = pt.check_concentration(p, cloud, GAUSS2, 0.4).to_json()
        assert set(blob) == {
            "gamma", "n", "cells", "overflow", "violations", "max_relative_deviation",
        }
        assert blob["n"] == 500.0
        assert all(set(c) >= {"index", "count", "nu", "lower", "upper", "violated"} for c in blob["cells"])

    def test_rejects_bad_gamma(self):
        p = pt.build_partition(2, R=1.0, side=0.4)
        cloud = sp.sample(GAUSS2, 10.0, seed=1)
        with pytest.raises(ValueError):
            pt.check_concentration(p, cloud, GAUSS2, 1.2)
