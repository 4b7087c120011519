"""Shared test helpers."""
from pathlib import Path

import numpy as np

from mpgk.graph import Graph, GraphDataset

DATA_DIR = Path(__file__).parent / "data"

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def dataset(*graphs, targets=None):
    targets = np.zeros(len(graphs), dtype=np.int64) if targets is None else np.asarray(targets)
    return GraphDataset(tuple(graphs), targets, tuple(sorted(set(targets.tolist()))))


def edge_graph(labels=(0, 0)):
    return Graph.from_edges(2, [(0, 1)], labels)


def write_tu(directory, name, graph_indicator, edges, graph_labels=None, node_labels=None,
             node_attributes=None):
    """Write a TU-format dataset from 1-indexed lists."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{name}_graph_indicator.txt").write_text("".join(f"{g}\n" for g in graph_indicator))
    (directory / f"{name}_A.txt").write_text("".join(f"{u}, {v}\n" for u, v in edges))
    if graph_labels is not None:
        (directory / f"{name}_graph_labels.txt").write_text("".join(f"{y}\n" for y in graph_labels))
    if node_labels is not None:
        (directory / f"{name}_node_labels.txt").write_text("".join(f"{x}\n" for x in node_labels))
    if node_attributes is not None:
        (directory / f"{name}_node_attributes.txt").write_text(
            "".join(", ".join(map(str, row)) + "\n" for row in node_attributes)
        )
    return directory
