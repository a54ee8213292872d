"""Shared fixtures: the five-variable toy network used across the suite.

The network has A and B as joint causes of C, D, E, with C and D also
feeding E.  Its only marginal independence is A vs B, and the only
conditional independence discoverable at low order is C vs D given {A, B}.
"""

import numpy as np
import pytest

from latstruct.graphs import MixedGraph, observed


TOY_EDGES = [
    ("A", "C"), ("A", "D"), ("A", "E"),
    ("B", "C"), ("B", "D"), ("B", "E"),
    ("C", "E"), ("D", "E"),
]


def build_toy_dag() -> MixedGraph:
    g = MixedGraph()
    for n in "ABCDE":
        g.add_node(observed(n))
    for src, dst in TOY_EDGES:
        g.add_directed(src, dst)
    return g


@pytest.fixture
def toy_dag() -> MixedGraph:
    return build_toy_dag()


def random_dag(n_nodes: int, edge_prob: float, seed: int) -> MixedGraph:
    """Random DAG over X0..X{n-1} with edges respecting a random order."""
    rng = np.random.default_rng(seed)
    names = [f"X{i}" for i in range(n_nodes)]
    order = rng.permutation(n_nodes)
    g = MixedGraph()
    for name in names:
        g.add_node(observed(name))
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < edge_prob:
                g.add_directed(names[order[i]], names[order[j]])
    return g


def build_toy_bn():
    """The toy network as a parameterized binary BN with strong effects.

    Every edge carries a sizeable probability shift so 50k samples decide
    each CI query cleanly; A and B stay exactly independent, and C, D are
    conditionally independent given both of them by construction.
    """
    from latstruct.synth import DiscreteBN

    dag = build_toy_dag()
    cards = {n: 2 for n in "ABCDE"}

    def rows(ps):
        return np.array([[1 - p, p] for p in ps])

    cpts = {
        "A": rows([0.5]),
        "B": rows([0.45]),
        # parent order is ascending: (A, B) indexed A*2 + B
        "C": rows([0.15, 0.4, 0.6, 0.85]),
        "D": rows([0.8, 0.5, 0.35, 0.1]),
        # parents (A, B, C, D) indexed A*8 + B*4 + C*2 + D
        "E": rows(
            [
                min(0.05 + 0.2 * a + 0.15 * b + 0.3 * c + 0.25 * d, 0.95)
                for a in (0, 1)
                for b in (0, 1)
                for c in (0, 1)
                for d in (0, 1)
            ]
        ),
    }
    return DiscreteBN(dag, cards, cpts)
