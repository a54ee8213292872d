from itertools import combinations, product

import numpy as np
import pytest

from latstruct.errors import GraphError
from latstruct.graphs import MixedGraph, d_separated, observed
from latstruct.independence import DataIndependenceSource, OracleIndependenceSource
from latstruct.synth import (
    DiscreteBN,
    ancestral_sample,
    bn_from_dict,
    bn_to_dict,
    dump_bn_json,
    joint_distribution,
    load_bn_json,
    random_bn,
    random_latent_structure,
    structural_distance,
    true_cpdag,
)

from conftest import build_toy_bn


# ---------------------------------------------------------------------------
# random_bn
# ---------------------------------------------------------------------------


def test_single_node_bn():
    bn = random_bn(1, 0, 2, seed=0)
    assert bn.nodes == ["X00"]
    assert bn.cpts["X00"].shape == (1, 2)
    assert bn.cpts["X00"].sum() == pytest.approx(1.0)


def test_seed_determinism():
    a = random_bn(5, 2, 2, seed=42)
    b = random_bn(5, 2, 2, seed=42)
    assert a.dag == b.dag
    for node in a.nodes:
        assert np.array_equal(a.cpts[node], b.cpts[node])
    c = random_bn(5, 2, 2, seed=43)
    assert c.dag != a.dag or any(
        not np.array_equal(a.cpts[n], c.cpts[n]) for n in a.nodes
    )


def test_bn_invariants():
    bn = random_bn(6, 3, 3, seed=7)
    for node in bn.nodes:
        assert len(bn.dag.parents(node)) <= 3
        cpt = bn.cpts[node]
        assert np.allclose(cpt.sum(axis=1), 1.0, atol=1e-12)
        assert cpt.min() >= 0.05
    assert bn.dag.directed_is_acyclic()


def test_bn_size_validation():
    with pytest.raises(GraphError):
        random_bn(0, 0, 2, seed=1)
    with pytest.raises(GraphError):
        random_bn(3, 3, 2, seed=1)
    with pytest.raises(GraphError):
        random_bn(3, 1, 25, seed=1)


# ---------------------------------------------------------------------------
# ancestral sampling
# ---------------------------------------------------------------------------


def test_sample_zero_rows():
    bn = random_bn(4, 2, 3, seed=3)
    ds = ancestral_sample(bn, 0, seed=0)
    assert ds.row_count == 0
    assert ds.column_names == bn.nodes


def test_forced_copy_chain():
    dag = MixedGraph()
    dag.add_node(observed("A"))
    dag.add_node(observed("B"))
    dag.add_directed("A", "B")
    bn = DiscreteBN(
        dag,
        {"A": 2, "B": 2},
        {"A": np.array([[0.5, 0.5]]), "B": np.array([[1.0, 0.0], [0.0, 1.0]])},
    )
    ds = ancestral_sample(bn, 500, seed=9)
    assert np.array_equal(ds.column("A").values, ds.column("B").values)


def test_sample_determinism():
    bn = random_bn(5, 2, 2, seed=1)
    a = ancestral_sample(bn, 1000, seed=5)
    b = ancestral_sample(bn, 1000, seed=5)
    for name in bn.nodes:
        assert np.array_equal(a.column(name).values, b.column(name).values)


def test_sample_marginals_match_enumeration():
    bn = build_toy_bn()
    names, joint = joint_distribution(bn)
    ds = ancestral_sample(bn, 50_000, seed=11)
    for axis, name in enumerate(names):
        exact = joint.sum(axis=tuple(i for i in range(len(names)) if i != axis))
        values = ds.column(name).values
        for code, p in enumerate(exact):
            assert abs((values == code).mean() - p) < 0.01


def test_sampled_toy_ci_decisions():
    # the two ground-truth independencies are accepted at alpha=0.01 and a
    # direct edge is firmly rejected, on one seeded 50k-row draw
    bn = build_toy_bn()
    ds = ancestral_sample(bn, 50_000, seed=2024)
    src = DataIndependenceSource(ds, test="g2", alpha=0.01)
    assert src.is_independent("A", "B")
    assert src.is_independent("C", "D", {"A", "B"})
    assert not src.is_independent("A", "C")
    assert not src.is_independent("C", "E")


def test_sampled_ci_decisions_track_oracle():
    # spec-level calibration: with 100k rows, order<=2 G2 decisions agree
    # with d-separation on at least 95% of queries
    agree = total = 0
    for seed in (0, 1, 2):
        bn = random_bn(4, 2, 2, seed=seed)
        ds = ancestral_sample(bn, 100_000, seed=seed + 100)
        data_src = DataIndependenceSource(ds, test="g2", alpha=0.01)
        oracle = OracleIndependenceSource(bn.dag)
        nodes = bn.nodes
        for a, b in combinations(nodes, 2):
            others = [n for n in nodes if n not in (a, b)]
            for size in (0, 1, 2):
                for s in combinations(others, size):
                    total += 1
                    if data_src.is_independent(a, b, set(s)) == oracle.is_independent(
                        a, b, set(s)
                    ):
                        agree += 1
    assert agree / total >= 0.95


# ---------------------------------------------------------------------------
# true CPDAG
# ---------------------------------------------------------------------------


def _bn_from_dag(edges, nodes):
    dag = MixedGraph()
    for n in nodes:
        dag.add_node(observed(n))
    for a, b in edges:
        dag.add_directed(a, b)
    cpts = {}
    for n in nodes:
        n_cfg = 2 ** len(dag.parents(n))
        cpts[n] = np.full((n_cfg, 2), 0.5)
    return DiscreteBN(dag, {n: 2 for n in nodes}, cpts)


def test_chain_cpdag_fully_undirected():
    bn = _bn_from_dag([("A", "B"), ("B", "C")], "ABC")
    cp = true_cpdag(bn)
    assert cp.directed_edges == set()
    assert cp.undirected_edges == {("A", "B"), ("B", "C")}


def test_collider_cpdag_stays_directed():
    bn = _bn_from_dag([("A", "C"), ("B", "C")], "ABC")
    cp = true_cpdag(bn)
    assert cp.directed_edges == {("A", "C"), ("B", "C")}


def _all_dags_4():
    """Enumerate every DAG over four nodes (3^6 edge states, filtered)."""
    nodes = ["X00", "X01", "X02", "X03"]
    pairs = list(combinations(nodes, 2))
    for states in product((0, 1, 2), repeat=len(pairs)):
        g = MixedGraph()
        for n in nodes:
            g.add_node(observed(n))
        for (a, b), state in zip(pairs, states):
            if state == 1:
                g.add_directed(a, b)
            elif state == 2:
                g.add_directed(b, a)
        if g.directed_is_acyclic():
            yield g


def _skeleton_and_vstructs(g):
    skel = frozenset(frozenset(e) for e in g.directed_edges)
    vs = set()
    for z in g.node_ids:
        for x, y in combinations(sorted(g.parents(z)), 2):
            if not g.is_adjacent(x, y):
                vs.add((x, y, z))
    return skel, frozenset(vs)


def test_cpdag_matches_equivalence_class_enumeration():
    # brute force: compelled edges = identically oriented across the class
    by_class = {}
    for g in _all_dags_4():
        by_class.setdefault(_skeleton_and_vstructs(g), []).append(g)

    rng_seeds = [5, 17, 23]
    for seed in rng_seeds:
        bn = random_bn(4, 2, 2, seed=seed)
        cls = by_class[_skeleton_and_vstructs(bn.dag)]
        compelled = set.intersection(*(set(g.directed_edges) for g in cls))
        cp = true_cpdag(bn)
        assert cp.directed_edges == compelled
        expected_undirected = {
            tuple(sorted(e)) for e in bn.dag.directed_edges if e not in compelled
        }
        assert cp.undirected_edges == expected_undirected


def test_cpdag_oracle_independencies_unchanged():
    # the CPDAG's skeleton+v-structures pin the same d-separations
    bn = random_bn(5, 2, 2, seed=2)
    oracle = OracleIndependenceSource(bn.dag)
    assert oracle.is_independent is not None
    cp = true_cpdag(bn)
    adj_dag = {frozenset(e) for e in bn.dag.directed_edges}
    adj_cp = {frozenset(e) for e in cp.directed_edges} | {
        frozenset(e) for e in cp.undirected_edges
    }
    assert adj_dag == adj_cp


# ---------------------------------------------------------------------------
# structural distance
# ---------------------------------------------------------------------------


def _graph(nodes, directed=(), undirected=()):
    g = MixedGraph()
    for n in nodes:
        g.add_node(observed(n))
    for a, b in directed:
        g.add_directed(a, b)
    for a, b in undirected:
        g.add_undirected(a, b)
    return g


def test_distance_identity():
    g = _graph("ABC", directed=[("A", "B")])
    assert structural_distance(g, g) == 0


def test_distance_orientation_mismatch():
    g1 = _graph("AB", undirected=[("A", "B")])
    g2 = _graph("AB", directed=[("A", "B")])
    assert structural_distance(g1, g2) == 1


def test_distance_empty_vs_complete():
    empty = _graph("ABCD")
    complete = _graph("ABCD", undirected=list(combinations("ABCD", 2)))
    assert structural_distance(empty, complete) == 6


def test_distance_is_a_metric():
    from conftest import random_dag

    graphs = [random_dag(5, 0.4, seed) for seed in range(6)]
    for a in graphs:
        for b in graphs:
            assert structural_distance(a, b) == structural_distance(b, a)
    for a in graphs:
        for b in graphs:
            for c in graphs:
                assert structural_distance(a, c) <= structural_distance(
                    a, b
                ) + structural_distance(b, c)


def test_distance_node_set_mismatch():
    with pytest.raises(GraphError):
        structural_distance(_graph("AB"), _graph("AC"))


# ---------------------------------------------------------------------------
# latent-structure generator / wire format
# ---------------------------------------------------------------------------


def test_random_latent_structure_validity():
    latent_counts = []
    for seed in range(30):
        structure = random_latent_structure(seed)
        structure.validate()
        latent_counts.append(len(structure.latent_nodes))
        assert len(structure.observed_nodes) <= 8
        assert len(structure.latent_nodes) <= 6
    assert any(c >= 2 for c in latent_counts)


def test_random_latent_structure_determinism():
    a = random_latent_structure(123)
    b = random_latent_structure(123)
    assert a.graph == b.graph
    assert a.gather_groups == b.gather_groups


def test_bn_json_roundtrip():
    bn = random_bn(5, 2, 3, seed=77)
    back = bn_from_dict(bn_to_dict(bn))
    assert back.dag == bn.dag
    assert back.cardinalities == bn.cardinalities
    for n in bn.nodes:
        assert np.allclose(back.cpts[n], bn.cpts[n])
    assert load_bn_json(dump_bn_json(bn)).dag == bn.dag
