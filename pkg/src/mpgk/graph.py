"""Graph and dataset containers.

Graphs are simple, undirected and immutable.  Vertices are 0-indexed.  A
:class:`GraphDataset` stacks the vertices of all its graphs into one global
index space, which is the space the vertex kernels live in.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError

VARIANTS = ("RR", "RA", "AR", "AA")
BASE_KERNELS = ("delta", "linear", "delta_plus_linear", "degree")


@dataclass(frozen=True, eq=False)
class Graph:
    """An undirected graph with optional discrete labels and/or attributes.

    The constructor stores what it is given; use :meth:`from_edges` to build a
    graph that satisfies the invariants, and :func:`validate` to check one.
    """

    n_vertices: int
    adjacency: tuple[tuple[int, ...], ...]
    vertex_labels: Optional[tuple[int, ...]] = None
    vertex_attributes: Optional[np.ndarray] = None

    @classmethod
    def from_edges(cls, n_vertices, edges, labels=None, attributes=None):
        """Build a graph from an edge iterable.

        Edges are symmetrized and deduplicated, self-loops are dropped.
        """
        if n_vertices < 0:
            raise ParameterError("n_vertices must be non-negative")
        nbrs = [set() for _ in range(n_vertices)]
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n_vertices and 0 <= v < n_vertices):
                raise ParameterError(f"edge ({u}, {v}) out of range for {n_vertices} vertices")
            if u != v:
                nbrs[u].add(v)
                nbrs[v].add(u)
        adjacency = tuple(tuple(sorted(s)) for s in nbrs)
        if labels is not None:
            labels = tuple(int(x) for x in labels)
        if attributes is not None:
            attributes = np.array(attributes, dtype=float, copy=True)
            if attributes.ndim == 1:
                attributes = attributes.reshape(n_vertices, -1)
            attributes.setflags(write=False)
        return cls(n_vertices, adjacency, labels, attributes)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, row in enumerate(self.adjacency) for v in row if u < v]

    @property
    def n_edges(self) -> int:
        return sum(len(row) for row in self.adjacency) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(row) for row in self.adjacency], dtype=float)

    @property
    def attribute_dim(self) -> Optional[int]:
        if self.vertex_attributes is None:
            return None
        return int(np.shape(self.vertex_attributes)[1]) if np.ndim(self.vertex_attributes) == 2 else None

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        if (self.n_vertices, self.adjacency, self.vertex_labels) != (
            other.n_vertices, other.adjacency, other.vertex_labels
        ):
            return False
        a, b = self.vertex_attributes, other.vertex_attributes
        if a is None or b is None:
            return a is None and b is None
        return np.array_equal(a, b)

    __hash__ = None


def neighbors(g: Graph, v: int) -> list[int]:
    """Return the sorted neighbor list of vertex `v`."""
    if not 0 <= v < g.n_vertices:
        raise IndexError(f"vertex {v} out of range for graph with {g.n_vertices} vertices")
    return list(g.adjacency[v])


def make_barbell(h: int, k: int) -> Graph:
    """Barbell graph B(h, k): two K_h cliques joined through a k-vertex path.

    Clique A is 0..h-1, the path h..h+k-1, clique B h+k..2h+k-1.  The path
    attaches to vertex 0 of clique A and vertex 2h+k-1 of clique B.
    """
    if h < 3:
        raise ParameterError("barbell clique size h must be >= 3")
    if k < 1:
        raise ParameterError("barbell path length k must be >= 1")
    n = 2 * h + k
    edges = []
    for base in (0, h + k):
        edges += [(base + i, base + j) for i in range(h) for j in range(i + 1, h)]
    path = list(range(h, h + k))
    edges += list(zip(path[:-1], path[1:]))
    edges += [(0, h), (h + k - 1, n - 1)]
    return Graph.from_edges(n, edges)


def permute_vertices(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel vertex ``v`` as ``perm[v]``; labels and attributes follow."""
    perm = np.asarray(perm, dtype=int)
    if perm.shape != (g.n_vertices,) or not np.array_equal(np.sort(perm), np.arange(g.n_vertices)):
        raise ParameterError("perm must be a bijection on the vertex set")
    inv = np.argsort(perm)
    edges = [(perm[u], perm[v]) for u, v in g.edges]
    labels = None
    if g.vertex_labels is not None:
        labels = [g.vertex_labels[i] for i in inv]
    attributes = None
    if g.vertex_attributes is not None:
        attributes = np.asarray(g.vertex_attributes)[inv]
    return Graph.from_edges(g.n_vertices, edges, labels, attributes)


@dataclass(frozen=True, eq=False)
class GraphDataset:
    """A list of graphs with one target per graph.

    ``targets`` holds dense class indices (1-D int array) for classification
    data or a float array for regression targets.  ``class_values`` keeps the
    original class labels, indexed by dense class id.
    """

    graphs: tuple[Graph, ...]
    targets: np.ndarray
    class_values: Optional[tuple] = None
    name: str = "dataset"

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        object.__setattr__(self, "targets", np.asarray(self.targets))

    def __len__(self):
        return len(self.graphs)

    def __eq__(self, other):
        if not isinstance(other, GraphDataset):
            return NotImplemented
        return (
            self.graphs == other.graphs
            and np.array_equal(self.targets, other.targets)
            and self.class_values == other.class_values
        )

    __hash__ = None

    @property
    def is_classification(self) -> bool:
        return self.targets.ndim == 1 and np.issubdtype(self.targets.dtype, np.integer)

    @property
    def n_classes(self) -> int:
        return int(np.unique(self.targets).size) if self.is_classification else 0

    @property
    def has_labels(self) -> bool:
        return bool(self.graphs) and self.graphs[0].vertex_labels is not None

    @property
    def has_attributes(self) -> bool:
        return bool(self.graphs) and self.graphs[0].vertex_attributes is not None

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([g.n_vertices for g in self.graphs])]).astype(int)

    @property
    def n_total(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def graph_of(self) -> np.ndarray:
        sizes = np.diff(self.offsets)
        return np.repeat(np.arange(len(self.graphs)), sizes)

    def global_id(self, graph_id: int, vertex: int) -> int:
        if not 0 <= vertex < self.graphs[graph_id].n_vertices:
            raise IndexError(f"vertex {vertex} out of range in graph {graph_id}")
        return int(self.offsets[graph_id] + vertex)

    def local_id(self, gid: int) -> tuple[int, int]:
        g = int(self.graph_of[gid])
        return g, int(gid - self.offsets[g])

    def vertex_ids(self, graph_id: int) -> np.ndarray:
        return np.arange(self.offsets[graph_id], self.offsets[graph_id + 1])

    @cached_property
    def labels(self) -> Optional[np.ndarray]:
        if not self.has_labels:
            return None
        return np.array([x for g in self.graphs for x in g.vertex_labels], dtype=np.int64)

    @cached_property
    def attributes(self) -> Optional[np.ndarray]:
        if not self.has_attributes:
            return None
        return np.vstack([np.asarray(g.vertex_attributes, dtype=float) for g in self.graphs])

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.concatenate([g.degrees for g in self.graphs]) if self.graphs else np.zeros(0)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Block-diagonal adjacency over global vertex ids (CSR, sorted indices)."""
        rows, cols = [], []
        for gi, g in enumerate(self.graphs):
            off = self.offsets[gi]
            for u, row in enumerate(g.adjacency):
                rows.extend([off + u] * len(row))
                cols.extend(off + v for v in row)
        n = self.n_total
        a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        a.sort_indices()
        return a

    @cached_property
    def membership(self) -> sp.csr_matrix:
        """N x nN indicator of which graph owns each vertex."""
        n = self.n_total
        return sp.csr_matrix(
            (np.ones(n), (self.graph_of, np.arange(n))), shape=(len(self.graphs), n)
        )

    def subset(self, graph_ids) -> "GraphDataset":
        graph_ids = list(graph_ids)
        return GraphDataset(
            tuple(self.graphs[i] for i in graph_ids),
            self.targets[graph_ids],
            self.class_values,
            self.name,
        )


@dataclass(frozen=True)
class KernelParams:
    """Parameters of a message passing graph kernel run.

    ``landmarks`` is the Nyström landmark count, or ``None`` (equivalently the
    string ``"exact"``) for exact computation.  Datasets with at most
    ``exact_threshold`` vertices are always computed exactly.
    ``base_kernel=None`` picks one from the available vertex data.
    """

    alpha: float = 0.8
    beta: float = 0.2
    iterations: int = 4
    variant: str = "RR"
    base_kernel: Optional[str] = None
    landmarks: Optional[int] = 200
    hierarchy_depth: int = 4
    hierarchy_branching: int = 4
    kmeans_iter: int = 50
    seed: int = 0
    normalize: bool = False
    exact_threshold: int = 4000

    def __post_init__(self):
        variant = str(self.variant).upper()
        object.__setattr__(self, "variant", variant)
        if self.landmarks == "exact":
            object.__setattr__(self, "landmarks", None)
        if self.alpha < 0 or self.beta < 0:
            raise ParameterError("alpha and beta must be nonnegative")
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")
        if variant not in VARIANTS:
            raise ParameterError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.base_kernel is not None and self.base_kernel not in BASE_KERNELS:
            raise ParameterError(f"base_kernel must be one of {BASE_KERNELS}")
        if self.landmarks is not None and int(self.landmarks) < 1:
            raise ParameterError("landmarks must be >= 1")
        if self.hierarchy_depth < 1:
            raise ParameterError("hierarchy_depth must be >= 1")
        if self.hierarchy_branching < 2:
            raise ParameterError("hierarchy_branching must be >= 2")
        if self.seed < 0:
            raise ParameterError("seed must be unsigned")

    @property
    def neighbor_aggregation(self) -> str:
        return self.variant[0]

    @property
    def graph_aggregation(self) -> str:
        return self.variant[1]

    def use_exact(self, n_total: int) -> bool:
        return self.landmarks is None or n_total <= self.exact_threshold


class Violation(NamedTuple):
    graph_id: Optional[int]
    rule: str
    detail: str = ""

    def __str__(self):
        where = "dataset" if self.graph_id is None else f"graph {self.graph_id}"
        return f"{where}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


def _graph_violations(gi: int, g: Graph) -> list[Violation]:
    out = []
    n = g.n_vertices
    if len(g.adjacency) != n:
        return [Violation(gi, "adjacency length", f"{len(g.adjacency)} rows for {n} vertices")]
    for v, row in enumerate(g.adjacency):
        if any(not 0 <= u < n for u in row):
            out.append(Violation(gi, "neighbor out of range", f"vertex {v}"))
            continue
        if v in row:
            out.append(Violation(gi, "self-loop", f"vertex {v}"))
        if any(a >= b for a, b in zip(row[:-1], row[1:])):
            out.append(Violation(gi, "unsorted or duplicate neighbors", f"vertex {v}"))
    asym = [
        (v, u) for v, row in enumerate(g.adjacency) for u in row
        if 0 <= u < n and v not in g.adjacency[u]
    ]
    if asym:
        out.append(Violation(gi, "asymmetry", f"{len(asym)} one-sided edges, first {asym[0]}"))
    if g.vertex_labels is not None and len(g.vertex_labels) != n:
        out.append(Violation(gi, "label count", f"{len(g.vertex_labels)} labels"))
    if g.vertex_attributes is not None:
        attrs = g.vertex_attributes
        if isinstance(attrs, np.ndarray) and attrs.ndim == 2:
            rows, dim = attrs.shape[0], attrs.shape[1]
            if dim < 1:
                out.append(Violation(gi, "attribute dimension", "d must be >= 1"))
        else:
            dims = {len(a) for a in attrs}
            rows = len(attrs)
            if len(dims) > 1:
                out.append(Violation(gi, "ragged attributes", f"dimensions {sorted(dims)}"))
        if rows != n:
            out.append(Violation(gi, "attribute count", f"{rows} rows"))
    return out


def validate(ds: GraphDataset) -> list[Violation]:
    """Check every Graph and GraphDataset invariant; return the violations."""
    out = []
    for gi, g in enumerate(ds.graphs):
        out.extend(_graph_violations(gi, g))
    if len(ds.targets) != len(ds.graphs):
        out.append(Violation(None, "target count", f"{len(ds.targets)} targets for {len(ds.graphs)} graphs"))
    if ds.graphs:
        ref = ds.graphs[0]
        ref_dim = ref.attribute_dim
        for gi, g in enumerate(ds.graphs[1:], start=1):
            if (g.vertex_labels is None) != (ref.vertex_labels is None):
                out.append(Violation(gi, "label presence mismatch"))
            if (g.vertex_attributes is None) != (ref.vertex_attributes is None):
                out.append(Violation(gi, "attribute presence mismatch"))
            elif g.vertex_attributes is not None and g.attribute_dim != ref_dim:
                out.append(Violation(gi, "attribute dimension mismatch", f"{g.attribute_dim} != {ref_dim}"))
    return out
