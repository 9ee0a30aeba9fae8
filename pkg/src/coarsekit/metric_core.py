"""Finite metric spaces, subsets, neighborhoods, Hausdorff distance, R-connectivity.

Strictness conventions used across the whole library (fixed globally):

* expansion ``B(A, R)`` uses strict ``d < R`` (plus A itself);
* ``R``-disjoint means cross distance ``>= R``;
* ``R``-chains/components use non-strict ``d <= R``.

All comparisons are exact comparisons on the stored float values; inputs are
rational-valued descriptors, so no epsilon tolerance is applied anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import InputError, MetricError, PreconditionError

__all__ = [
    "FiniteMetricSpace",
    "Subset",
    "build_space",
    "verify_metric",
    "neighborhood",
    "inner_neighborhood",
    "hausdorff_distance",
    "r_components",
    "diameter",
]


def verify_metric(dmat: np.ndarray) -> None:
    """Check the metric axioms, reporting the offending pair/triple on failure."""
    n = dmat.shape[0]
    if dmat.ndim != 2 or dmat.shape[1] != n:
        raise MetricError("distance table must be square")
    if not np.all(np.isfinite(dmat)):
        raise MetricError("distances must be finite")
    diag = np.diagonal(dmat)
    if np.any(diag != 0):
        i = int(np.nonzero(diag)[0][0])
        raise MetricError(f"d({i},{i}) = {dmat[i, i]} != 0")
    asym = dmat != dmat.T
    if np.any(asym):
        i, j = (int(v[0]) for v in np.nonzero(asym))
        raise MetricError(f"asymmetric matrix: d({i},{j}) != d({j},{i})")
    off = dmat + np.eye(n)
    if np.any(off <= 0):
        bad = np.argwhere(off <= 0)[0]
        i, j = int(bad[0]), int(bad[1])
        raise MetricError(f"d({i},{j}) = {dmat[i, j]} <= 0 for distinct points")
    # Triangle inequality, exhaustive over all triples (one numpy pass per k).
    for k in range(n):
        slack = dmat - (dmat[:, k : k + 1] + dmat[k : k + 1, :])
        if np.any(slack > 0):
            bad = np.argwhere(slack > 0)[0]
            i, j = int(bad[0]), int(bad[1])
            raise MetricError(
                f"triangle violation at ({i},{k},{j}): "
                f"d({i},{j}) = {dmat[i, j]} > {dmat[i, k]} + {dmat[k, j]}"
            )


class FiniteMetricSpace:
    """Immutable finite metric space with opaque point labels.

    Points are addressed by stable index (the descriptor order); all set
    outputs across the library are emitted in sorted index order.
    """

    __slots__ = ("labels", "dmat", "_label_index")

    def __init__(self, labels: Sequence, dmat: np.ndarray, *, validate: bool = True):
        dmat = np.asarray(dmat, dtype=float)
        if len(labels) != dmat.shape[0]:
            raise InputError("label count does not match distance table size")
        if validate:
            verify_metric(dmat)
        self.labels = tuple(labels)
        self.dmat = dmat
        self.dmat.setflags(write=False)
        self._label_index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self._label_index) != len(self.labels):
            raise InputError("labels must be unique")

    @property
    def n(self) -> int:
        return len(self.labels)

    def d(self, i: int, j: int) -> float:
        return float(self.dmat[i, j])

    def index_of(self, label) -> int:
        return self._label_index[label]

    def points(self) -> range:
        return range(self.n)

    def full(self) -> "Subset":
        return Subset(self, frozenset(range(self.n)))

    def subset(self, members: Iterable[int]) -> "Subset":
        return Subset(self, frozenset(members))

    def diam(self) -> float:
        return float(self.dmat.max()) if self.n else 0.0

    def realized_distances(self) -> list[float]:
        """Sorted unique pairwise distances (including 0)."""
        return sorted(set(float(v) for v in self.dmat.ravel()))

    def subspace(self, indices: Iterable[int]) -> tuple["FiniteMetricSpace", list[int]]:
        """Induced metric subspace; returns (space, map from new index to old index)."""
        idx = sorted(set(indices))
        sub = FiniteMetricSpace(
            [self.labels[i] for i in idx],
            self.dmat[np.ix_(idx, idx)],
            validate=False,
        )
        return sub, idx

    def __eq__(self, other):
        return self is other

    def __hash__(self):
        return id(self)

    def __repr__(self):
        return f"FiniteMetricSpace(n={self.n})"


@dataclass(frozen=True)
class Subset:
    """A subset of a space's points, held as a frozenset of indices."""

    space: FiniteMetricSpace
    members: frozenset

    def __post_init__(self):
        bad = [i for i in self.members if not (0 <= i < self.space.n)]
        if bad:
            raise InputError(f"subset members {bad} outside the owning space")

    def sorted_members(self) -> list[int]:
        return sorted(self.members)

    def labels(self) -> list:
        return [self.space.labels[i] for i in self.sorted_members()]

    def __len__(self):
        return len(self.members)

    def __contains__(self, i):
        return i in self.members


_NORMS = {"l1": 1, "l2": 2, "linf": np.inf}


def build_space(descriptor: dict) -> FiniteMetricSpace:
    """Construct a space from a matrix, point-cloud, or connected-graph descriptor."""
    if not isinstance(descriptor, dict) or "kind" not in descriptor:
        raise InputError("descriptor must be a dict with a 'kind' field")
    kind = descriptor["kind"]
    if kind == "matrix":
        dmat = np.asarray(descriptor["matrix"], dtype=float)
        labels = descriptor.get("labels", list(range(dmat.shape[0])))
        return FiniteMetricSpace(labels, dmat)
    if kind == "cloud":
        coords = np.asarray(descriptor["coords"], dtype=float)
        norm = descriptor.get("norm", "l2")
        if norm not in _NORMS:
            raise InputError(f"unknown norm {norm!r}")
        diffs = coords[:, None, :] - coords[None, :, :]
        dmat = np.linalg.norm(diffs, ord=_NORMS[norm], axis=2)
        labels = descriptor.get("labels", list(range(coords.shape[0])))
        return FiniteMetricSpace(labels, dmat)
    if kind == "graph":
        edges = descriptor["edges"]
        labels = descriptor.get("labels")
        if labels is None:
            nv = 1 + max(max(i, j) for i, j, _ in edges) if edges else 1
            labels = list(range(nv))
        nv = len(labels)
        rows, cols, data = [], [], []
        for i, j, w in edges:
            if w <= 0:
                raise InputError(f"edge ({i},{j}) has non-positive weight {w}")
            rows += [i, j]
            cols += [j, i]
            data += [w, w]
        adj = csr_matrix((data, (rows, cols)), shape=(nv, nv))
        dmat = shortest_path(adj, method="D", directed=False)
        if not np.all(np.isfinite(dmat)):
            raise MetricError("graph is disconnected")
        return FiniteMetricSpace(labels, dmat, validate=False)
    raise InputError(f"unknown descriptor kind {kind!r}")


def _same_space(*subsets: Subset) -> FiniteMetricSpace:
    sp = subsets[0].space
    if any(s.space is not sp for s in subsets):
        raise InputError("subsets belong to different spaces")
    return sp


def neighborhood(A: Subset, R: float, *, closed: bool = False) -> Subset:
    """B(A, R): A plus all points at distance < R from A (<= R when closed)."""
    sp = A.space
    if not A.members:
        return Subset(sp, frozenset())
    idx = A.sorted_members()
    mind = np.min(sp.dmat[:, idx], axis=1)
    hit = (mind <= R) if closed else (mind < R)
    out = frozenset(int(i) for i in np.nonzero(hit)[0]) | A.members
    return Subset(sp, out)


def inner_neighborhood(A: Subset, R: float) -> Subset:
    """{x in A : B({x}, R) is contained in A}; the -R shrinking of A."""
    sp = A.space
    if not A.members:
        return A
    outside = sorted(set(range(sp.n)) - A.members)
    if not outside:
        return A
    keep = [x for x in A.sorted_members() if np.min(sp.dmat[x, outside]) >= R]
    return Subset(sp, frozenset(keep))


def hausdorff_distance(A: Subset, B: Subset) -> float:
    sp = _same_space(A, B)
    if not A.members or not B.members:
        raise PreconditionError("hausdorff_distance requires nonempty subsets")
    ai = A.sorted_members()
    bi = B.sorted_members()
    block = sp.dmat[np.ix_(ai, bi)]
    return float(max(block.min(axis=1).max(), block.min(axis=0).max()))


class _UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, u):
        root = u
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[u] != root:
            self.parent[u], u = root, self.parent[u]
        return root

    def union(self, u, v):
        ru, rv = self.find(u), self.find(v)
        if ru != rv:
            if rv < ru:
                ru, rv = rv, ru
            self.parent[rv] = ru


def r_components(A: Subset, R: float) -> tuple[Subset, ...]:
    """Partition of A into maximal R-connected pieces (chains with d <= R).

    Classes are returned ordered by their least member index.
    """
    sp = A.space
    if not A.members:
        raise PreconditionError("r_components requires a nonempty subset")
    idx = A.sorted_members()
    uf = _UnionFind(idx)
    for a_pos, a in enumerate(idx):
        for b in idx[a_pos + 1 :]:
            if sp.dmat[a, b] <= R:
                uf.union(a, b)
    classes: dict[int, list[int]] = {}
    for a in idx:
        classes.setdefault(uf.find(a), []).append(a)
    return tuple(Subset(sp, frozenset(classes[r])) for r in sorted(classes))


def diameter(A: Subset) -> float:
    sp = A.space
    if not A.members:
        raise PreconditionError("diameter requires a nonempty subset")
    idx = A.sorted_members()
    return float(sp.dmat[np.ix_(idx, idx)].max())


def dist_point_to_set(space: FiniteMetricSpace, x: int, members: Iterable[int]) -> float:
    """min distance from x to a set; +inf for the empty set."""
    members = list(members)
    if not members:
        return math.inf
    return float(np.min(space.dmat[x, members]))


def dist_set_to_set(space: FiniteMetricSpace, A: Iterable[int], B: Iterable[int]) -> float:
    A, B = list(A), list(B)
    if not A or not B:
        return math.inf
    return float(space.dmat[np.ix_(A, B)].min())
