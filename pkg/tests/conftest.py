"""Shared test oracles: density sampling that bypasses the package's own
sampling path, plus brute-force graph references."""

import numpy as np

from rgglab import density as dn


def sample_oracle(spec, size, rng):
    """Draw from the density using numpy's gamma/beta samplers only.

    Light-tail radii: (rho/scale)^v ~ Gamma(d/v)  => rho = scale * G^(1/v).
    Heavy-tail radii: rho^a/(1+rho^a) ~ Beta(d/a, 1-d/a).
    """
    d = spec.dimension
    fam = spec.family
    if isinstance(fam, dn.LightTail):
        rho = fam.scale * rng.gamma(d / fam.v, size=size) ** (1.0 / fam.v)
    else:
        x = np.minimum(rng.beta(d / fam.alpha, 1.0 - d / fam.alpha, size=size), 1.0 - 1e-16)
        rho = (x / (1.0 - x)) ** (1.0 / fam.alpha)
    dirs = rng.normal(size=(size, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return rho[:, None] * dirs


def brute_force_edges(points, radius):
    points = np.asarray(points, dtype=float)
    edges = set()
    for i in range(len(points)):
        d2 = np.sum((points[i + 1 :] - points[i]) ** 2, axis=1)
        for j in np.nonzero(d2 < radius * radius)[0]:
            edges.add((i, int(i + 1 + j)))
    return edges


def bfs_components(n, edges):
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    label = [-1] * n
    cur = 0
    for s in range(n):
        if label[s] != -1:
            continue
        frontier = [s]
        label[s] = cur
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if label[v] == -1:
                        label[v] = cur
                        nxt.append(v)
            frontier = nxt
        cur += 1
    return label


def partition_signature(labels):
    """Canonical form of a labeling: map each label to its first vertex."""
    first = {}
    return tuple(first.setdefault(l, i) for i, l in enumerate(labels))
