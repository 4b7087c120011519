"""Reading TU-format datasets, generating synthetic ones, writing CSV exports."""
from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, FormatError, ParameterError
from .graph import Graph, GraphDataset

log = logging.getLogger(__name__)


def _rows(path: Path) -> list[list[str]]:
    """Comma separated rows with surrounding whitespace stripped, blank lines skipped."""
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append([tok.strip() for tok in line.split(",")])
    return out


def _ints(path: Path) -> list[int]:
    out = []
    for lineno, row in enumerate(_rows(path), start=1):
        try:
            out.append(int(float(row[0])))
        except ValueError:
            raise FormatError(f"{path.name}:{lineno}: expected an integer, got {row[0]!r}") from None
    return out


def _floats(path: Path) -> list[list[float]]:
    out = []
    for lineno, row in enumerate(_rows(path), start=1):
        try:
            out.append([float(tok) for tok in row])
        except ValueError:
            raise FormatError(f"{path.name}:{lineno}: non-numeric value in {row!r}") from None
    return out


def find_tu_directory(root, name: str) -> Path:
    """Return the directory holding ``{name}_A.txt``: ``root`` or ``root/name``."""
    root = Path(root)
    for cand in (root, root / name):
        if (cand / f"{name}_A.txt").is_file():
            return cand
    return root


def load_tu_dataset(directory, name: str, standardize: bool = False) -> GraphDataset:
    """Load a dataset in the TU Dortmund text format.

    Vertex ids in the files are 1-indexed and global; they are renumbered
    per graph in ascending global order.  Edges are symmetrized and
    deduplicated.  Graph class labels are mapped onto ``0..C-1`` in sorted
    order of the original labels, which are kept in ``class_values``.  If
    there is no ``_graph_labels.txt`` but a ``_graph_attributes.txt``, the
    latter becomes a float target matrix.

    ``standardize`` rescales each vertex attribute dimension to zero mean and
    unit variance over the whole dataset.
    """
    d = find_tu_directory(directory, name)
    files = {key: d / f"{name}_{key}.txt" for key in
             ("A", "graph_indicator", "graph_labels", "graph_attributes", "node_labels", "node_attributes")}
    for key in ("A", "graph_indicator"):
        if not files[key].is_file():
            raise FileNotFoundError(f"missing {name}_{key}.txt in {d}")

    indicator = np.array(_ints(files["graph_indicator"]), dtype=np.int64)
    n_total = indicator.size
    if n_total and indicator.min() < 1:
        raise FormatError(f"{name}_graph_indicator.txt: graph ids must be >= 1")
    n_graphs = int(indicator.max()) if n_total else 0
    # local ids follow ascending global order within each graph
    order = np.argsort(indicator, kind="stable")
    graph_sizes = np.bincount(indicator - 1, minlength=n_graphs)
    starts = np.concatenate([[0], np.cumsum(graph_sizes)])
    local = np.empty(n_total, dtype=np.int64)
    local[order] = np.arange(n_total) - starts[indicator[order] - 1]

    edges = [[] for _ in range(n_graphs)]
    for lineno, row in enumerate(_rows(files["A"]), start=1):
        if len(row) != 2:
            raise FormatError(f"{name}_A.txt:{lineno}: expected 'i, j', got {row!r}")
        try:
            i, j = int(row[0]) - 1, int(row[1]) - 1
        except ValueError:
            raise FormatError(f"{name}_A.txt:{lineno}: non-integer vertex id") from None
        if not (0 <= i < n_total and 0 <= j < n_total):
            raise FormatError(f"{name}_A.txt:{lineno}: vertex id outside graph_indicator range")
        gi, gj = indicator[i], indicator[j]
        if gi != gj:
            raise FormatError(f"{name}_A.txt:{lineno}: edge joins graphs {gi} and {gj}")
        edges[gi - 1].append((local[i], local[j]))

    node_labels = None
    if files["node_labels"].is_file():
        node_labels = np.array(_ints(files["node_labels"]), dtype=np.int64)
        if node_labels.size != n_total:
            raise FormatError(f"{name}_node_labels.txt has {node_labels.size} rows, expected {n_total}")

    node_attrs = None
    if files["node_attributes"].is_file():
        rows = _floats(files["node_attributes"])
        dims = {len(r) for r in rows}
        if len(dims) > 1:
            raise FormatError(f"{name}_node_attributes.txt: ragged rows with dimensions {sorted(dims)}")
        if len(rows) != n_total:
            raise FormatError(f"{name}_node_attributes.txt has {len(rows)} rows, expected {n_total}")
        node_attrs = np.array(rows, dtype=float).reshape(n_total, -1)
        if standardize:
            mu = node_attrs.mean(axis=0)
            sd = node_attrs.std(axis=0)
            sd[sd == 0] = 1.0
            node_attrs = (node_attrs - mu) / sd

    class_values = None
    if files["graph_labels"].is_file():
        raw = _ints(files["graph_labels"])
        if len(raw) != n_graphs:
            raise FormatError(f"{name}_graph_labels.txt has {len(raw)} rows, expected {n_graphs}")
        class_values = tuple(sorted(set(raw)))
        lookup = {c: k for k, c in enumerate(class_values)}
        targets = np.array([lookup[c] for c in raw], dtype=np.int64)
    elif files["graph_attributes"].is_file():
        targets = np.array(_floats(files["graph_attributes"]), dtype=float)
        if targets.shape[0] != n_graphs:
            raise FormatError(f"{name}_graph_attributes.txt has {targets.shape[0]} rows, expected {n_graphs}")
    else:
        targets = np.zeros(n_graphs, dtype=np.int64)

    graphs = []
    for gi in range(n_graphs):
        members = order[starts[gi]:starts[gi + 1]]
        graphs.append(Graph.from_edges(
            int(graph_sizes[gi]),
            edges[gi],
            None if node_labels is None else node_labels[members],
            None if node_attrs is None else node_attrs[members],
        ))
    log.info("loaded %s: %d graphs, %d vertices", name, n_graphs, n_total)
    return GraphDataset(tuple(graphs), targets, class_values, name)


def random_dataset(n_graphs: int, max_vertices: int, seed: int = 0, *, min_vertices: int = 1,
                   edge_prob: float = 0.4, n_labels: Optional[int] = 3, attr_dim: Optional[int] = None,
                   n_classes: int = 2, name: str = "random") -> GraphDataset:
    """Erdős–Rényi graphs with random labels/attributes and random class targets."""
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(n_graphs):
        n = int(rng.integers(min_vertices, max_vertices + 1))
        iu, ju = np.triu_indices(n, 1)
        keep = rng.random(iu.size) < edge_prob
        labels = rng.integers(0, n_labels, size=n) if n_labels else None
        attrs = rng.normal(size=(n, attr_dim)) if attr_dim else None
        graphs.append(Graph.from_edges(n, zip(iu[keep], ju[keep]), labels, attrs))
    targets = rng.integers(0, n_classes, size=n_graphs)
    return GraphDataset(tuple(graphs), targets, tuple(range(n_classes)), name)


def two_class_dataset(n_graphs: int, seed: int = 0, name: str = "synthetic") -> GraphDataset:
    """Small labelled benchmark: class 0 are cycles, class 1 are stars with a tail.

    Vertex labels are random in both classes so only structure separates them.
    """
    rng = np.random.default_rng(seed)
    graphs, targets = [], []
    for i in range(n_graphs):
        cls = i % 2
        n = int(rng.integers(5, 9))
        if cls == 0:
            edges = [(v, (v + 1) % n) for v in range(n)]
        else:
            edges = [(0, v) for v in range(1, n - 1)] + [(n - 2, n - 1)]
        graphs.append(Graph.from_edges(n, edges, rng.integers(0, 2, size=n)))
        targets.append(cls)
    return GraphDataset(tuple(graphs), np.array(targets), (0, 1), name)


def _fmt(x: float) -> str:
    """Shortest round-trip decimal, with a trailing '.0' dropped."""
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def _check_symmetric(K: np.ndarray, rtol: float = 1e-9):
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {K.shape}")
    scale = max(1.0, float(np.abs(K).max())) if K.size else 1.0
    if K.size and np.abs(K - K.T).max() > rtol * scale:
        raise ContractError("matrix is not symmetric")
    return K


def write_gram(K, ids: Optional[Sequence] = None, path=None) -> None:
    """Write a symmetric matrix as CSV: a header of ids, then ``id,values...`` rows."""
    K = _check_symmetric(K)
    if ids is None:
        ids = [f"g{i}" for i in range(K.shape[0])]
    if len(ids) != K.shape[0]:
        raise ContractError(f"{len(ids)} ids for a {K.shape[0]}x{K.shape[0]} matrix")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *ids])
        for name, row in zip(ids, K):
            w.writerow([name, *map(_fmt, row)])


def read_gram(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    ids = rows[0][1:]
    K = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=float).reshape(len(ids), len(ids))
    return ids, K


def write_features(F, path, ids: Optional[Sequence] = None, targets=None) -> None:
    """Write graph features as CSV: ``id, target column(s), f0, f1, ...``."""
    F = np.asarray(F, dtype=float)
    if F.ndim == 1:
        F = F.reshape(0, 0) if F.size == 0 else F.reshape(1, -1)
    n, n_feat = F.shape
    if ids is None:
        ids = [f"g{i}" for i in range(n)]
    tcols = []
    if targets is not None:
        targets = np.asarray(targets)
        targets = targets.reshape(n, -1) if targets.size else targets.reshape(n, 0)
        tcols = ["target"] if targets.shape[1] == 1 else [f"target{j}" for j in range(targets.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *tcols, *(f"f{j}" for j in range(n_feat))])
        for i in range(n):
            tv = [] if targets is None else [_fmt(x) for x in targets[i]]
            w.writerow([ids[i], *tv, *map(_fmt, F[i])])


def write_precomputed(K, labels, path) -> None:
    """Precomputed-kernel text form: ``label 0:i 1:K(i,1) ... N:K(i,N)`` (1-based)."""
    K = _check_symmetric(K)
    if len(labels) != K.shape[0]:
        raise ContractError("one label per row required")
    with open(path, "w") as fh:
        for i, (y, row) in enumerate(zip(labels, K), start=1):
            vals = " ".join(f"{j}:{_fmt(x)}" for j, x in enumerate(row, start=1))
            fh.write(f"{_fmt(y)} 0:{i} {vals}\n")


def write_coordinates(coords, ds: GraphDataset, path) -> None:
    coords = np.asarray(coords, dtype=float)
    if coords.shape[0] != ds.n_total:
        raise ParameterError("one coordinate row per dataset vertex required")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["graph", "vertex", *(f"x{j}" for j in range(coords.shape[1]))])
        for gid, row in enumerate(coords):
            g, v = ds.local_id(gid)
            w.writerow([g, v, *map(_fmt, row)])
