import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import dataset, edge_graph
from oracles import naive_base, naive_rr, naive_variant, wl_colors
from mpgk.errors import ConfigurationError, ContractError, ParameterError
from mpgk.graph import Graph, GraphDataset, KernelParams, make_barbell, permute_vertices
from mpgk.graph_kernel import compute_grams
from mpgk.hierarchy import ClusterTree
from mpgk.io import random_dataset
from mpgk.vertex_kernel import (VertexData, VertexKernelState, assign_update, base_kernel, base_kernel_block,
                                init_state, resolve_base_kernel, rr_update, run_message_passing)

EXACT = dict(landmarks=None)


def barbell_dataset(h=10, k=10):
    return GraphDataset((make_barbell(h, k),), np.zeros(1, dtype=np.int64))


def barbell_classes(h=10, k=10):
    n = 2 * h + k
    classes = [list(range(1, h)) + list(range(h + k, n - 1)), [0, n - 1]]
    path = list(range(h, h + k))
    classes += [[path[i], path[-1 - i]] for i in range(k // 2)]
    if k % 2:
        classes.append([path[k // 2]])
    return classes


def test_base_kernel_examples():
    assert base_kernel(VertexData(label=3), VertexData(label=3), "delta") == 1.0
    assert base_kernel(VertexData(label=3), VertexData(label=4), "delta") == 0.0
    a, b = VertexData(attributes=np.array([1.0, 2.0])), VertexData(attributes=np.array([3.0, 4.0]))
    assert base_kernel(a, b, "linear") == 11.0
    both = VertexData(1, np.array([1.0, 2.0])), VertexData(1, np.array([3.0, 4.0]))
    assert base_kernel(*both, "delta_plus_linear") == 12.0


def test_degree_base_on_barbell_path():
    ds = barbell_dataset()
    K = base_kernel_block(ds, "degree")
    assert K[12, 15] == 4.0
    assert K[0, 29] == 100.0 and K[1, 0] == 90.0


def test_base_kernel_missing_data():
    with pytest.raises(ConfigurationError):
        base_kernel(VertexData(), VertexData(label=1), "delta")
    with pytest.raises(ConfigurationError):
        base_kernel(VertexData(label=1), VertexData(label=1), "linear")
    with pytest.raises(ConfigurationError):
        base_kernel(VertexData(label=1), VertexData(label=1), "rbf")


def test_resolve_base_kernel():
    assert resolve_base_kernel(random_dataset(2, 3, n_labels=2), None) == "delta"
    assert resolve_base_kernel(random_dataset(2, 3, n_labels=None, attr_dim=2), None) == "linear"
    assert resolve_base_kernel(random_dataset(2, 3, n_labels=2, attr_dim=2), None) == "delta_plus_linear"
    assert resolve_base_kernel(barbell_dataset(), None) == "degree"
    with pytest.raises(ConfigurationError):
        resolve_base_kernel(barbell_dataset(), "delta")
    with pytest.raises(ConfigurationError):
        resolve_base_kernel(random_dataset(2, 3, n_labels=2), "linear")


def test_base_block_matches_pairwise():
    ds = random_dataset(4, 5, seed=2, n_labels=2, attr_dim=3)
    K = base_kernel_block(ds, "delta_plus_linear")
    assert np.allclose(K, naive_base(ds, "delta_plus_linear"), atol=1e-12)


def test_init_state_delta():
    st0 = init_state(dataset(edge_graph()), KernelParams(base_kernel="delta", **EXACT))
    assert st0.mode == "exact" and st0.iteration == 0
    assert st0.exact_matrix.tolist() == [[1.0, 1.0], [1.0, 1.0]]


def test_init_state_full_nystrom():
    ds = random_dataset(5, 6, seed=1, n_labels=None, attr_dim=8, min_vertices=4)
    p = KernelParams(landmarks=ds.n_total, exact_threshold=0)
    st0 = init_state(ds, p)
    exact = base_kernel_block(ds, "linear")
    assert st0.mode == "nystrom"
    assert np.linalg.norm(st0.matrix() - exact) <= 1e-6 * np.linalg.norm(exact)


def test_init_state_landmarks_seeded():
    ds = random_dataset(5, 6, seed=1, min_vertices=4)
    p = KernelParams(landmarks=5, exact_threshold=0, seed=11)
    a, b = init_state(ds, p), init_state(ds, p)
    assert np.array_equal(a.landmark_ids, b.landmark_ids) and len(set(a.landmark_ids)) == 5


def test_init_state_too_many_landmarks():
    ds = random_dataset(2, 3, seed=0, min_vertices=2)
    with pytest.raises(ParameterError):
        init_state(ds, KernelParams(landmarks=ds.n_total + 1, exact_threshold=0))


def test_state_contract():
    with pytest.raises(ContractError):
        VertexKernelState("exact", 0)
    with pytest.raises(ContractError):
        VertexKernelState("nystrom", 0, features=np.ones((2, 1)))
    with pytest.raises(ContractError):
        VertexKernelState("dense", 0, exact_matrix=np.eye(2))


def test_rr_two_edges():
    ds = dataset(edge_graph(), edge_graph())
    st1 = rr_update(init_state(ds, KernelParams(base_kernel="delta", **EXACT)), ds, 0.8, 0.2)
    assert np.allclose(st1.exact_matrix, 1.0, atol=1e-15)


def test_rr_beta_zero_scales():
    ds = random_dataset(3, 5, seed=4)
    st = init_state(ds, KernelParams(**EXACT))
    K0 = st.exact_matrix
    for t in range(1, 4):
        st = rr_update(st, ds, 0.5, 0.0)
        assert np.array_equal(st.exact_matrix, K0 * 0.5 ** t)


def test_rr_isolated_vertex():
    g = Graph.from_edges(3, [(0, 1)], [0, 0, 0])
    ds = dataset(g, edge_graph())
    st0 = init_state(ds, KernelParams(**EXACT))
    st1 = rr_update(st0, ds, 0.7, 0.3)
    assert np.array_equal(st1.exact_matrix[2], 0.7 * st0.exact_matrix[2])


def test_rr_matches_recursion():
    ds = random_dataset(4, 5, seed=8, n_labels=2)
    K0 = naive_base(ds, "delta")
    ref = naive_rr(ds, K0, 0.8, 0.2, 3)
    states = run_message_passing(ds, KernelParams(iterations=3, **EXACT))
    for st, R in zip(states, ref[1:]):
        assert np.abs(st.exact_matrix - R).max() <= 1e-9


def hand_tree_dataset():
    # v1 = 0 with N = {1, 2}; v2 = 3 with N = {4, 5}
    star = Graph.from_edges(3, [(0, 1), (0, 2)], [0, 0, 0])
    ds = dataset(star, star)
    # depth-1 clusters {1, 4}, {0, 2, 3}, {5}; omega 0 at the root, 0.5 below
    parent = [-1, 0, 0, 0] + [1, 2, 2, 2, 1, 3]
    leaf_of = [5, 4, 6, 7, 8, 9]
    omega = [0.0, 0.5, 0.5, 0.5] + [0.5] * 6
    return ds, ClusterTree(parent, leaf_of, omega)


def test_assign_hand_tree():
    ds, tree = hand_tree_dataset()
    st0 = init_state(ds, KernelParams(**EXACT))
    st1 = assign_update(st0, ds, 0.0, 1.0, tree)
    assert st1.exact_matrix[0, 3] == pytest.approx(0.5, abs=1e-12)
    assert st1.neighbor_tree is tree


def test_assign_identical_and_empty_neighborhoods():
    g = Graph.from_edges(4, [(0, 1), (0, 2), (3, 3)], [0, 0, 0, 0])
    ds = dataset(g, g)
    params = KernelParams(variant="AR", iterations=1, **EXACT)
    st = run_message_passing(ds, params)[0]
    st0 = init_state(ds, params)
    A = (st.exact_matrix - 0.8 * st0.exact_matrix) / 0.2
    # vertex 0 of both copies has the same neighbourhood shape; self value is the row maximum
    assert np.isclose(A[0, 0], A[0].max()) and A[0, 0] > 0
    # vertex 3 is isolated
    assert np.allclose(A[3], 0.0) and np.allclose(A[:, 7], 0.0)


def test_assign_tree_must_cover():
    ds, tree = hand_tree_dataset()
    small = ClusterTree([-1, 0, 0], [1, 2])
    with pytest.raises(ContractError):
        assign_update(init_state(ds, KernelParams(**EXACT)), ds, 0.8, 0.2, small)


def test_run_single_iteration_is_one_update():
    ds = random_dataset(3, 5, seed=5)
    p = KernelParams(iterations=1, **EXACT)
    (st,) = run_message_passing(ds, p)
    assert np.array_equal(st.exact_matrix, rr_update(init_state(ds, p), ds, 0.8, 0.2).exact_matrix)


@pytest.mark.parametrize("variant", ["RR", "AR"])
def test_identity_recurrence(variant):
    ds = random_dataset(3, 5, seed=6)
    p = KernelParams(alpha=1.0, beta=0.0, variant=variant, **EXACT)
    K0 = init_state(ds, p).exact_matrix
    for st in run_message_passing(ds, p):
        assert np.array_equal(st.exact_matrix, K0)


def test_barbell_equivalent_rows():
    ds = barbell_dataset()
    (*_, st) = run_message_passing(ds, KernelParams(iterations=5, base_kernel="degree", **EXACT))
    K = st.exact_matrix
    # the reflection swapping the two halves is an automorphism
    reflect = np.array([29 - v for v in range(30)])
    assert np.allclose(K[np.ix_(reflect, reflect)], K, rtol=1e-13, atol=0)
    for cls in barbell_classes():
        for v in cls[1:]:
            assert np.allclose(K[v], K[cls[0]], rtol=1e-13, atol=0)


@pytest.mark.parametrize("variant", ["RR", "RA", "AR", "AA"])
def test_exact_symmetry_and_psd(variant):
    ds = random_dataset(6, 7, seed=3, n_labels=3, attr_dim=2)
    for st in run_message_passing(ds, KernelParams(variant=variant, **EXACT)):
        K = st.exact_matrix
        assert np.array_equal(K, K.T)
        lam = np.linalg.eigvalsh(K)
        assert lam[0] >= -1e-8 * lam[-1]
        assert (np.diag(K) >= 0).all()


@pytest.mark.parametrize("variant", ["RR", "AR"])
def test_nystrom_symmetry(variant):
    ds = random_dataset(8, 8, seed=3, min_vertices=5)
    for st in run_message_passing(ds, KernelParams(variant=variant, landmarks=12, exact_threshold=0)):
        K = st.matrix()
        assert np.abs(K - K.T).max() <= 1e-9 * max(1.0, np.abs(K).max())


def test_nystrom_full_rank_follows_exact_rr():
    ds = random_dataset(6, 7, seed=9, n_labels=4, attr_dim=3, min_vertices=3)
    ex = run_message_passing(ds, KernelParams(**EXACT))
    ny = run_message_passing(ds, KernelParams(landmarks=ds.n_total, exact_threshold=0))
    for a, b in zip(ex, ny):
        assert np.linalg.norm(b.matrix() - a.exact_matrix) <= 1e-6 * np.linalg.norm(a.exact_matrix)


def permuted(ds, rng):
    perms = [rng.permutation(g.n_vertices) for g in ds.graphs]
    pds = GraphDataset(tuple(permute_vertices(g, p) for g, p in zip(ds.graphs, perms)), ds.targets)
    # global id of each old vertex in the permuted dataset
    new_of = np.concatenate([ds.offsets[i] + p for i, p in enumerate(perms)])
    return pds, new_of


def test_permutation_invariance_exact_rr():
    ds = random_dataset(5, 7, seed=12, n_labels=3, attr_dim=2)
    rng = np.random.default_rng(0)
    p = KernelParams(**EXACT)
    ref = run_message_passing(ds, p)
    for _ in range(5):
        pds, new_of = permuted(ds, rng)
        for a, b in zip(ref, run_message_passing(pds, p)):
            assert np.abs(b.exact_matrix[np.ix_(new_of, new_of)] - a.exact_matrix).max() <= 1e-9


def test_permutation_invariance_nystrom_mapped_landmarks():
    ds = random_dataset(6, 7, seed=13, n_labels=3, attr_dim=2, min_vertices=3)
    p = KernelParams(landmarks=10, exact_threshold=0, seed=2)
    ref = run_message_passing(ds, p)
    pds, new_of = permuted(ds, np.random.default_rng(1))
    got = run_message_passing(pds, p, landmarks=new_of[ref[0].landmark_ids])
    for a, b in zip(ref, got):
        Ka, Kb = a.matrix(), b.matrix()[np.ix_(new_of, new_of)]
        assert np.abs(Ka - Kb).max() <= 1e-9 * max(1.0, np.abs(Ka).max())


def test_permutation_invariance_assign_with_mapped_tree():
    ds = random_dataset(5, 6, seed=14, n_labels=2)
    p = KernelParams(variant="AR", iterations=1, **EXACT)
    (st,) = run_message_passing(ds, p)
    tree = st.neighbor_tree
    pds, new_of = permuted(ds, np.random.default_rng(2))
    leaf_of = np.empty_like(tree.leaf_of)
    leaf_of[new_of] = tree.leaf_of
    mapped = ClusterTree(tree.parent, leaf_of)
    got = assign_update(init_state(pds, p), pds, 0.8, 0.2, mapped)
    assert np.abs(got.exact_matrix[np.ix_(new_of, new_of)] - st.exact_matrix).max() <= 1e-12


@pytest.mark.parametrize("variant", ["AR", "AA", "RA"])
def test_assignment_variants_match_oracle(variant):
    ds = random_dataset(5, 6, seed=21, n_labels=2)
    p = KernelParams(variant=variant, iterations=3, base_kernel="delta", **EXACT)
    states = run_message_passing(ds, p)
    grams = compute_grams(ds, p, states)
    V, G = naive_variant(ds, p, states, grams)
    for st, R in zip(states, V):
        assert np.abs(st.exact_matrix - R).max() <= 1e-9
    for g, R in zip(grams, G):
        assert np.abs(g.values - R).max() <= 1e-9


def test_trees_are_seeded():
    ds = random_dataset(6, 7, seed=4)
    p = KernelParams(variant="AA", **EXACT)
    a, b = run_message_passing(ds, p), run_message_passing(ds, p)
    for x, y in zip(a, b):
        assert np.array_equal(x.exact_matrix, y.exact_matrix)
        assert np.array_equal(x.neighbor_tree.parent, y.neighbor_tree.parent)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 3))
def test_equal_wl_colours_give_equal_rows(seed, rounds):
    ds = random_dataset(4, 6, seed=seed, n_labels=2, edge_prob=0.5)
    states = run_message_passing(ds, KernelParams(iterations=rounds, base_kernel="delta", **EXACT))
    colors = wl_colors(ds, rounds)[rounds]
    K = states[-1].exact_matrix
    for c in set(colors):
        idx = [i for i, x in enumerate(colors) if x == c]
        for i in idx[1:]:
            assert np.allclose(K[i], K[idx[0]], rtol=1e-12, atol=1e-12)
