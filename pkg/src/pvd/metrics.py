"""Point-cloud distances and generative-set metrics.

Distance conventions (reported in every MetricReport so numbers are
self-describing):

  CD(X, Y)  = mean_x min_y ||x - y||^2 + mean_y min_x ||x - y||^2
              (sum of both directional means of squared nearest distances)
  EMD(X, Y) = (1/N) min_pi sum_i ||x_i - y_pi(i)||_2 over bijections pi,
              solved exactly with the Hungarian assignment algorithm
              (requires |X| = |Y|)

Set metrics:
  one_nn_accuracy: merge both sets, classify each cloud by its nearest other
      cloud (self excluded, ties to the lowest index); 0.5 is ideal.
  coverage: fraction of reference clouds matched as some generated cloud's
      nearest reference.
  mmd: mean over reference clouds of the distance to the nearest generated one.
  tmd: sum of pairwise CDs over a list of completions, optionally restricted
      to the free rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

__all__ = [
    "MetricReport", "chamfer", "emd", "pairwise_distances",
    "one_nn_accuracy", "coverage", "mmd", "tmd",
]


@dataclass
class MetricReport:
    metric: str
    distance: str
    value: float
    protocol: dict = field(default_factory=dict)

    def to_json(self) -> str:
        body = {"metric": self.metric, "distance": self.distance,
                "value": self.value, "protocol": self.protocol}
        return json.dumps(body, sort_keys=True, indent=2)


def _check_cloud(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 3 or x.shape[0] < 1:
        raise ValueError(f"{name} must be a nonempty (N, 3) array, got {x.shape}")
    return x


def chamfer(x, y) -> float:
    x = _check_cloud(x, "X")
    y = _check_cloud(y, "Y")
    d2 = cdist(x, y, "sqeuclidean")
    return float(d2.min(axis=1).mean() + d2.min(axis=0).mean())


def emd(x, y) -> float:
    x = _check_cloud(x, "X")
    y = _check_cloud(y, "Y")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"EMD needs equal sizes, got {x.shape[0]} and {y.shape[0]}")
    d = cdist(x, y, "euclidean")
    rows, cols = linear_sum_assignment(d)
    return float(d[rows, cols].sum() / x.shape[0])


_DISTANCES = {"cd": chamfer, "emd": emd}


def _distance_fn(distance: str):
    try:
        return _DISTANCES[distance.lower()]
    except KeyError:
        raise ValueError(f"unknown distance {distance!r}, expected one of {sorted(_DISTANCES)}")


def pairwise_distances(set_a, set_b, distance: str = "cd") -> np.ndarray:
    """Dense |A| x |B| matrix of cloud-to-cloud distances."""
    fn = _distance_fn(distance)
    out = np.empty((len(set_a), len(set_b)), dtype=np.float64)
    for i, a in enumerate(set_a):
        for j, b in enumerate(set_b):
            out[i, j] = fn(a, b)
    return out


def one_nn_accuracy(gen_set, ref_set, distance: str = "cd") -> float:
    """Two-sample nearest-neighbor classification accuracy on the merged sets.

    Exact duplicates across sets sit at distance 0 of each other, so a copied
    set scores 0. Ties resolve to the lowest merged index.
    """
    if len(gen_set) < 1 or len(ref_set) < 1:
        raise ValueError("both sets must be nonempty")
    clouds = list(gen_set) + list(ref_set)
    labels = np.array([0] * len(gen_set) + [1] * len(ref_set))
    n = len(clouds)
    fn = _distance_fn(distance)
    d = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = fn(clouds[i], clouds[j])
    np.fill_diagonal(d, np.inf)
    nearest = d.argmin(axis=1)  # argmin takes the first (lowest-index) minimum
    return float(np.mean(labels[nearest] == labels))


def coverage(gen_set, ref_set, distance: str = "cd") -> float:
    """Fraction of reference clouds that are the nearest reference of at least
    one generated cloud."""
    if len(gen_set) < 1 or len(ref_set) < 1:
        raise ValueError("both sets must be nonempty")
    d = pairwise_distances(gen_set, ref_set, distance)
    matched = np.unique(d.argmin(axis=1))
    return float(matched.size / len(ref_set))


def mmd(gen_set, ref_set, distance: str = "cd") -> float:
    """Mean over reference clouds of the distance to the nearest generated cloud."""
    if len(gen_set) < 1 or len(ref_set) < 1:
        raise ValueError("both sets must be nonempty")
    d = pairwise_distances(gen_set, ref_set, distance)
    return float(d.min(axis=0).mean())


def tmd(completions, m_fixed: int = 0) -> float:
    """Total mutual difference: sum of CD over all unordered pairs.

    m_fixed > 0 restricts the comparison to rows [m_fixed, N) of each cloud,
    the free rows of a completion whose fixed block occupies the prefix.
    """
    k = len(completions)
    if k < 2:
        raise ValueError(f"TMD needs at least 2 completions, got {k}")
    clouds = []
    for c in completions:
        c = _check_cloud(c, "completion")
        if m_fixed:
            if m_fixed >= c.shape[0]:
                raise ValueError("m_fixed leaves no free rows")
            c = c[m_fixed:]
        clouds.append(c)
    total = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            total += chamfer(clouds[i], clouds[j])
    return float(total)
