"""Random geometric graph over a point cloud, with implicit edges.

Two points are adjacent iff their distance is STRICTLY below the radius.
Components are computed without materializing edges: points are bucketed
into a sub-grid fine enough that same-cell points are always adjacent, and
cell pairs are classified by box distance into
  * skip        (minimum box distance >= radius: no pair can be adjacent),
  * union       (maximum box distance < radius: every cross pair is adjacent),
  * check       (straddling: test point pairs, but only while the two cells
                 are in different components).
Every merge is witnessed by a genuine edge and every edge's cell pair is
examined, so the resulting partition is exactly the one induced by the
O(N^2) edge rule; the oracle tests enforce this bit-for-bit.

The coarse spatial hash with cell side equal to the radius is kept on the
graph for edge iteration/export, which is the only place edges materialize.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Iterator

import numpy as np

from rgglab.sampler import PointCloud

__all__ = ["GeometricGraph", "ConnectivityStats", "build", "stats", "iter_edges", "export_edges_csv"]

# Cap on the pair block evaluated at once during straddling-cell checks.
_CHUNK = 1 << 20


@dataclass(frozen=True, eq=False)
class GeometricGraph:
    """Built graph: component labeling plus the coarse spatial hash."""

    cloud: PointCloud
    radius: float
    component_of: np.ndarray  # per-vertex component id, contiguous from 0
    grid: dict  # cell index tuple -> vertex index array, cell side = radius

    @property
    def num_components(self) -> int:
        return int(self.component_of.max()) + 1 if self.component_of.size else 0


@dataclass(frozen=True)
class ConnectivityStats:
    is_connected: bool
    num_components: int
    r_c: float  # furthest distance from origin within the origin component
    r_max: float  # furthest distance from origin overall
    isolated_within: dict  # probe radius -> count of degree-0 vertices inside
    flags: tuple = ()


def _roots_of(parent: np.ndarray, idx: np.ndarray) -> np.ndarray:
    roots = parent[idx]
    while True:
        nxt = parent[roots]
        if np.array_equal(nxt, roots):
            return roots
        roots = nxt


def _find(parent: np.ndarray, i: int) -> int:
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return int(i)


def _union_pairs(parent: np.ndarray, a: np.ndarray, b: np.ndarray) -> None:
    """Merge every pair (a[k], b[k]); deterministic min-root hooking."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    while a.size:
        ra = _roots_of(parent, a)
        rb = _roots_of(parent, b)
        diff = ra != rb
        if not diff.any():
            return
        hi = np.maximum(ra[diff], rb[diff])
        lo = np.minimum(ra[diff], rb[diff])
        np.minimum.at(parent, hi, lo)
        parent[:] = parent[parent]
        a, b = a[diff], b[diff]


def _cells_linked(pts: np.ndarray, ia: np.ndarray, ib: np.ndarray, radius: float) -> bool:
    """Whether any cross pair between the two vertex sets is strictly closer than radius."""
    r2 = radius * radius
    xa = pts[ia]
    step = max(1, _CHUNK // max(1, len(ib)))
    for s in range(0, len(ia), step):
        d2 = np.sum((xa[s : s + step, None, :] - pts[ib][None, :, :]) ** 2, axis=2)
        if np.any(d2 < r2):
            return True
    return False


def _offset_classes(dimension: int, radius: float, side: float):
    """Lexicographically positive cell offsets, split by box-distance class."""
    reach = int(np.floor(radius / side + 1.0 - 1e-9))
    union_offsets, check_offsets = [], []
    for off in product(range(-reach, reach + 1), repeat=dimension):
        if off <= (0,) * dimension:
            continue  # keep one of {off, -off}; (0,...,0) handled in-cell
        gaps = np.maximum(np.abs(off) - 1, 0)
        min_d = side * float(np.sqrt(np.sum(gaps * gaps)))
        if min_d >= radius:
            continue
        spans = np.abs(off) + 1
        max_d = side * float(np.sqrt(np.sum(spans * spans)))
        (union_offsets if max_d < radius else check_offsets).append(off)
    return union_offsets, check_offsets


def build(cloud: PointCloud, radius: float) -> GeometricGraph:
    """Build the graph at the given radius (0 < radius <= 1)."""
    if not 0.0 < radius <= 1.0:
        raise ValueError(f"radius must be in (0, 1], got {radius}")
    pts = cloud.points
    n = len(pts)
    d = cloud.spec.dimension
    grid = _coarse_grid(pts, radius)
    if n == 0:
        return GeometricGraph(cloud, radius, np.empty(0, dtype=np.int64), grid)

    # Sub-grid side: same-cell diameter strictly below the radius for any d.
    side = radius / max(3.0, 1.5 * np.sqrt(d))
    cells = np.floor(pts / side).astype(np.int64)
    index = _CellIndex(cells, reach=int(np.floor(radius / side + 1.0 - 1e-9)))

    order = np.argsort(index.codes, kind="stable")
    _, starts = np.unique(index.codes[order], return_index=True)
    ends = np.append(starts[1:], n)
    reps = order[starts]  # lowest original index per cell (stable sort)

    parent = np.arange(n, dtype=np.int64)
    _union_pairs(parent, order, np.repeat(reps, ends - starts))

    union_offsets, check_offsets = _offset_classes(d, radius, side)

    for off in union_offsets:
        ca, cb = index.matched(off)
        if ca.size:
            _union_pairs(parent, reps[ca], reps[cb])

    cell_roots = _roots_of(parent, reps)
    for off in check_offsets:
        ca, cb = index.matched(off)
        if not ca.size:
            continue
        live = cell_roots[ca] != cell_roots[cb]
        for i, j in zip(ca[live], cb[live]):
            ri, rj = _find(parent, reps[i]), _find(parent, reps[j])
            if ri == rj:
                continue
            if _cells_linked(pts, order[starts[i] : ends[i]], order[starts[j] : ends[j]], radius):
                parent[max(ri, rj)] = min(ri, rj)
        cell_roots = _roots_of(parent, reps)

    roots = _roots_of(parent, np.arange(n, dtype=np.int64))
    component_of = np.unique(roots, return_inverse=True)[1].astype(np.int64)
    component_of.setflags(write=False)
    return GeometricGraph(cloud, radius, component_of, grid)


class _CellIndex:
    """Groups points by sub-grid cell and matches neighbor cells per offset.

    Cells are packed into int64 codes with axis extents padded by the offset
    reach, so code arithmetic never aliases across axes; `matched` is then a
    single vectorized searchsorted. When the padded box would overflow int64
    (possible only with extreme outliers in d >= 3) a dictionary grid takes
    over with the same interface. Matched pairs are ordinals into the sorted
    unique-cell array, i.e. consistent with the grouping order of `codes`.
    """

    def __init__(self, cells: np.ndarray, reach: int):
        mins = cells.min(axis=0)
        shifted = cells - mins + reach
        extents = shifted.max(axis=0) + 1 + reach
        self._packed = float(np.prod(extents.astype(float))) < 2.0**62
        if self._packed:
            strides = np.ones(len(extents), dtype=np.int64)
            for k in range(len(extents) - 2, -1, -1):
                strides[k] = strides[k + 1] * extents[k + 1]
            self._strides = strides
            self.codes = shifted @ strides
            self._uniq = np.unique(self.codes)
        else:
            lookup: dict = {}
            ids = np.empty(len(cells), dtype=np.int64)
            for i, cell in enumerate(map(tuple, cells.tolist())):
                ids[i] = lookup.setdefault(cell, len(lookup))
            self.codes = ids
            self._lookup = lookup
            self._ordered = sorted(lookup, key=lookup.get)

    def matched(self, offset) -> tuple[np.ndarray, np.ndarray]:
        if self._packed:
            delta = int(np.dot(np.asarray(offset, dtype=np.int64), self._strides))
            uniq = self._uniq
            pos = np.searchsorted(uniq, uniq + delta)
            ok = pos < len(uniq)
            ok[ok] &= uniq[pos[ok]] == uniq[ok] + delta
            return np.nonzero(ok)[0], pos[ok]
        out_a, out_b = [], []
        for idx, cell in enumerate(self._ordered):
            j = self._lookup.get(tuple(c + o for c, o in zip(cell, offset)))
            if j is not None:
                out_a.append(idx)
                out_b.append(j)
        return np.asarray(out_a, dtype=np.int64), np.asarray(out_b, dtype=np.int64)


def _coarse_grid(pts: np.ndarray, radius: float) -> dict:
    """Spatial hash with cell side = radius, for edge iteration and export."""
    if len(pts) == 0:
        return {}
    cells = np.floor(pts / radius).astype(np.int64)
    order = np.lexsort(cells.T[::-1])
    sorted_cells = cells[order]
    change = np.any(np.diff(sorted_cells, axis=0) != 0, axis=1)
    starts = np.concatenate(([0], np.nonzero(change)[0] + 1))
    ends = np.append(starts[1:], len(pts))
    return {
        tuple(sorted_cells[s].tolist()): np.sort(order[s:e]) for s, e in zip(starts, ends)
    }


def iter_edges(graph: GeometricGraph) -> Iterator[tuple[int, int]]:
    """Yield edges (u, v), u < v, via the coarse grid. Materializes O(E) work."""
    pts = graph.cloud.points
    r2 = graph.radius * graph.radius
    d = graph.cloud.spec.dimension
    offsets = [off for off in product((-1, 0, 1), repeat=d) if off > (0,) * d]
    for cell, idx in graph.grid.items():
        # within-cell pairs
        for a in range(len(idx)):
            diff = pts[idx[a + 1 :]] - pts[idx[a]]
            hits = np.nonzero(np.sum(diff * diff, axis=1) < r2)[0]
            for h in hits:
                yield int(idx[a]), int(idx[a + 1 + h])
        # cross-cell pairs, each unordered cell pair visited once
        for off in offsets:
            other = graph.grid.get(tuple(c + o for c, o in zip(cell, off)))
            if other is None:
                continue
            for a in idx:
                diff = pts[other] - pts[a]
                hits = np.nonzero(np.sum(diff * diff, axis=1) < r2)[0]
                for h in hits:
                    u, v = int(a), int(other[h])
                    yield (u, v) if u < v else (v, u)


def export_edges_csv(graph: GeometricGraph, path: str | Path) -> int:
    """Write the edge list as `u,v` rows; returns the number of edges."""
    count = 0
    with Path(path).open("w") as fh:
        fh.write("u,v\n")
        for u, v in iter_edges(graph):
            fh.write(f"{u},{v}\n")
            count += 1
    return count


def stats(graph: GeometricGraph, probe_radii=()) -> ConnectivityStats:
    """Connectivity statistics and isolated-vertex counts at the probe radii.

    The origin component is the component of the vertex nearest the origin
    (ties by lowest vertex index). Isolated vertices are exactly the
    singleton components, so degrees are implicitly counted against all
    vertices.
    """
    probe_radii = tuple(float(p) for p in probe_radii)
    if any(p < 0 for p in probe_radii):
        raise ValueError("probe radii must be non-negative")
    comp = graph.component_of
    if comp.size == 0:
        return ConnectivityStats(
            True, 0, 0.0, 0.0, {p: 0 for p in probe_radii}, flags=("empty_graph",)
        )
    norms = graph.cloud.radii
    counts = np.bincount(comp)
    origin_comp = comp[int(np.argmin(norms))]
    r_c = float(norms[comp == origin_comp].max())
    r_max = float(norms.max())
    singleton = counts[comp] == 1
    isolated_within = {
        p: int(np.count_nonzero(singleton & (norms <= p))) for p in probe_radii
    }
    return ConnectivityStats(
        is_connected=counts.size <= 1,
        num_components=int(counts.size),
        r_c=r_c,
        r_max=r_max,
        isolated_within=isolated_within,
    )
