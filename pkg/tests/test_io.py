import numpy as np
import pytest

from helpers import write_tu
from mpgk.errors import ContractError, FormatError
from mpgk.graph import validate
from mpgk.io import (load_tu_dataset, random_dataset, read_gram, two_class_dataset, write_coordinates,
                     write_features, write_gram, write_precomputed)


def test_mutag(data_dir):
    ds = load_tu_dataset(data_dir, "MUTAG")
    assert len(ds) == 188 and ds.n_classes == 2 and ds.has_labels
    assert ds.class_values == (-1, 1)
    assert validate(ds) == []
    assert ds.n_total == len((data_dir / "MUTAG" / "MUTAG_graph_indicator.txt").read_text().split())


def test_mutag_edge_count(data_dir):
    ds = load_tu_dataset(data_dir, "MUTAG")
    pairs = set()
    for line in (data_dir / "MUTAG" / "MUTAG_A.txt").read_text().splitlines():
        if line.strip():
            u, v = (int(x) for x in line.split(","))
            pairs.add((min(u, v), max(u, v)))
    assert sum(g.n_edges for g in ds.graphs) == len(pairs)


def test_load_is_deterministic(data_dir):
    assert load_tu_dataset(data_dir, "MUTAG") == load_tu_dataset(data_dir, "MUTAG")


def test_smallest_edge_list(tmp_path):
    write_tu(tmp_path, "T", [1, 1], [(1, 2), (2, 1)], graph_labels=[3])
    ds = load_tu_dataset(tmp_path, "T")
    assert len(ds) == 1 and ds.graphs[0].edges == [(0, 1)]
    assert ds.targets.tolist() == [0] and ds.class_values == (3,)


def test_attributes_dimension(tmp_path):
    write_tu(tmp_path, "T", [1, 1], [(1, 2)], graph_labels=[0], node_attributes=[[1.0, 2.0], [3.0, 4.0]])
    ds = load_tu_dataset(tmp_path, "T")
    assert ds.graphs[0].attribute_dim == 2
    assert ds.attributes.tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_whitespace_and_trailing_blank_lines(tmp_path):
    write_tu(tmp_path, "T", [1, 1, 2], [(1, 2)], graph_labels=[5, 2], node_labels=[0, 1, 0])
    (tmp_path / "T_A.txt").write_text("  1 ,2\n2,   1\n\n\n")
    ds = load_tu_dataset(tmp_path, "T")
    assert [g.n_vertices for g in ds.graphs] == [2, 1]
    assert ds.targets.tolist() == [1, 0] and ds.class_values == (2, 5)


def test_local_ids_follow_global_order(tmp_path):
    # vertices of graph 2 interleave with those of graph 1
    write_tu(tmp_path, "T", [1, 2, 1, 2], [(1, 3), (2, 4)], graph_labels=[0, 1], node_labels=[7, 8, 9, 10])
    ds = load_tu_dataset(tmp_path, "T")
    assert ds.graphs[0].vertex_labels == (7, 9) and ds.graphs[1].vertex_labels == (8, 10)
    assert ds.graphs[0].edges == [(0, 1)]


def test_subdirectory_lookup(tmp_path):
    write_tu(tmp_path / "T", "T", [1], [], graph_labels=[0])
    assert len(load_tu_dataset(tmp_path, "T")) == 1


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="missing T_A.txt"):
        load_tu_dataset(tmp_path, "T")


def test_edge_across_graphs(tmp_path):
    write_tu(tmp_path, "T", [1, 2], [(1, 2)], graph_labels=[0, 1])
    with pytest.raises(FormatError):
        load_tu_dataset(tmp_path, "T")


def test_vertex_out_of_range(tmp_path):
    write_tu(tmp_path, "T", [1, 1], [(1, 5)], graph_labels=[0])
    with pytest.raises(FormatError):
        load_tu_dataset(tmp_path, "T")


def test_ragged_attributes(tmp_path):
    write_tu(tmp_path, "T", [1, 1], [(1, 2)], graph_labels=[0])
    (tmp_path / "T_node_attributes.txt").write_text("1.0, 2.0\n3.0\n")
    with pytest.raises(FormatError):
        load_tu_dataset(tmp_path, "T")


def test_label_count_mismatch(tmp_path):
    write_tu(tmp_path, "T", [1, 1], [(1, 2)], graph_labels=[0], node_labels=[1])
    with pytest.raises(FormatError):
        load_tu_dataset(tmp_path, "T")


def test_regression_targets(tmp_path):
    write_tu(tmp_path, "T", [1, 2], [])
    (tmp_path / "T_graph_attributes.txt").write_text("0.5, 1.5\n2.0, -1.0\n")
    ds = load_tu_dataset(tmp_path, "T")
    assert not ds.is_classification
    assert ds.targets.shape == (2, 2)


def test_standardize(tmp_path):
    write_tu(tmp_path, "T", [1, 1, 1], [], graph_labels=[0], node_attributes=[[1.0], [2.0], [3.0]])
    X = load_tu_dataset(tmp_path, "T", standardize=True).attributes
    assert abs(X.mean()) < 1e-12 and abs(X.std() - 1) < 1e-12


def test_generators_are_valid():
    for ds in (random_dataset(6, 7, seed=3, attr_dim=2), two_class_dataset(10)):
        assert validate(ds) == []
    assert random_dataset(4, 5, seed=1) == random_dataset(4, 5, seed=1)


def test_write_gram_singleton(tmp_path):
    write_gram(np.array([[4.0]]), path=tmp_path / "k.csv")
    assert (tmp_path / "k.csv").read_text() == "id,g0\ng0,4\n"


def test_write_gram_identity(tmp_path):
    write_gram(np.eye(2), ["a", "b"], tmp_path / "k.csv")
    assert (tmp_path / "k.csv").read_text().splitlines() == ["id,a,b", "a,1,0", "b,0,1"]


def test_write_gram_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(7, 3)) * 10.0 ** rng.integers(-8, 8, size=(7, 1))
    K = X @ X.T
    K = (K + K.T) / 2
    write_gram(K, path=tmp_path / "k.csv")
    ids, back = read_gram(tmp_path / "k.csv")
    assert ids == [f"g{i}" for i in range(7)]
    assert np.array_equal(back, K)


def test_write_gram_asymmetric(tmp_path):
    with pytest.raises(ContractError):
        write_gram(np.array([[1.0, 2.0], [0.0, 1.0]]), path=tmp_path / "k.csv")


def test_write_gram_unwritable(tmp_path):
    with pytest.raises(OSError):
        write_gram(np.eye(1), path=tmp_path / "missing" / "k.csv")


def test_write_features_columns(tmp_path):
    write_features(np.zeros((1, 800)), tmp_path / "f.csv", targets=[1])
    header, row = (tmp_path / "f.csv").read_text().splitlines()
    assert header.split(",")[:3] == ["id", "target", "f0"]
    assert len(header.split(",")) == 802 and len(row.split(",")) == 802

    F = np.hstack([np.ones((2, 3)), 2 * np.ones((2, 3))])
    write_features(F, tmp_path / "g.csv")
    rows = (tmp_path / "g.csv").read_text().splitlines()
    assert rows[1] == "g0,1,1,1,2,2,2"


def test_write_features_empty(tmp_path):
    write_features(np.zeros((0, 0)), tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text() == "id\n"


def test_write_precomputed(tmp_path):
    write_precomputed(np.array([[2.0, 0.5], [0.5, 1.0]]), [1, -1], tmp_path / "p.txt")
    assert (tmp_path / "p.txt").read_text().splitlines() == ["1 0:1 1:2 2:0.5", "-1 0:2 1:0.5 2:1"]


def test_write_coordinates(tmp_path):
    ds = two_class_dataset(2)
    write_coordinates(np.zeros((ds.n_total, 2)), ds, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "graph,vertex,x0,x1" and len(lines) == ds.n_total + 1
    assert lines[-1].startswith(f"1,{ds.graphs[1].n_vertices - 1},")
