"""Ground-truth generators and structure metrics for testing.

Random discrete Bayesian networks with bounded-away-from-deterministic
CPTs, vectorized ancestral sampling, exact CPDAG computation, and the
structural Hamming distance used by the recovery checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .errors import GraphError
from .graphs import MixedGraph, apply_orientation_rules, observed
from .independence import Categorical, Column, Dataset

CPT_FLOOR = 0.05


@dataclass
class DiscreteBN:
    """DAG + per-node cardinalities + CPTs.

    CPT of a node has shape (number of parent configurations, cardinality);
    the configuration index is mixed-radix over the node's parents in
    ascending id order, first parent most significant.  Rows sum to one.
    """

    dag: MixedGraph
    cardinalities: dict[str, int]
    cpts: dict[str, np.ndarray]

    def __post_init__(self):
        for node in self.dag.node_ids:
            card = self.cardinalities[node]
            parents = sorted(self.dag.parents(node))
            n_cfg = int(np.prod([self.cardinalities[p] for p in parents])) if parents else 1
            cpt = self.cpts[node]
            if cpt.shape != (n_cfg, card):
                raise GraphError(
                    f"CPT of {node} has shape {cpt.shape}, expected {(n_cfg, card)}"
                )
            if not np.allclose(cpt.sum(axis=1), 1.0, atol=1e-12):
                raise GraphError(f"CPT rows of {node} do not sum to 1")

    @property
    def nodes(self) -> list[str]:
        return self.dag.node_ids

    def parent_config_index(self, node: str, codes: dict[str, np.ndarray]) -> np.ndarray:
        parents = sorted(self.dag.parents(node))
        if not parents:
            return np.zeros(len(next(iter(codes.values()))) if codes else 0, dtype=np.int64)
        idx = np.zeros_like(codes[parents[0]], dtype=np.int64)
        for p in parents:
            idx = idx * self.cardinalities[p] + codes[p]
        return idx


MIN_PARENT_EFFECT = 0.25  # per-parent total-variation effect on the child


def random_bn(n_nodes: int, max_parents: int, cardinality: int, seed: int) -> DiscreteBN:
    """Random DAG over a uniformly drawn node order with random CPTs.

    Every CPT entry is at least ``CPT_FLOOR`` (near-deterministic rows
    starve finite-sample CI decisions) and every parent shifts its child's
    distribution by at least ``MIN_PARENT_EFFECT`` in total variation, so
    edges stay detectable at realistic sample sizes.
    """
    if n_nodes < 1 or max_parents >= max(n_nodes, 1) or max_parents < 0:
        raise GraphError(f"invalid sizes: n_nodes={n_nodes}, max_parents={max_parents}")
    if cardinality < 2 or cardinality * CPT_FLOOR >= 1.0:
        raise GraphError(f"cardinality {cardinality} unsupported")
    rng = np.random.default_rng(seed)
    width = max(2, len(str(n_nodes - 1)))
    names = [f"X{i:0{width}d}" for i in range(n_nodes)]
    order = [names[i] for i in rng.permutation(n_nodes)]

    dag = MixedGraph()
    for name in names:
        dag.add_node(observed(name))
    for pos, node in enumerate(order):
        n_par = int(rng.integers(0, min(max_parents, pos) + 1))
        if n_par:
            for j in rng.choice(pos, size=n_par, replace=False):
                dag.add_directed(order[int(j)], node)

    cardinalities = {name: cardinality for name in names}
    cpts = {}
    for node in names:
        n_parents = len(dag.parents(node))
        cpts[node] = _random_cpt(rng, cardinality, n_parents)
    return DiscreteBN(dag, cardinalities, cpts)


def _random_cpt(rng: np.random.Generator, card: int, n_parents: int) -> np.ndarray:
    """Random CPT whose rows differ by a guaranteed amount per parent.

    Each parent value pushes a fixed probability mass onto one category
    (through a per-parent random permutation), on top of a random base
    distribution.  Because every parent contributes the same mass whatever
    its value, the normalizer is shared across configurations and flipping
    one parent changes the row by an exact, known total variation.
    """
    base = rng.dirichlet(np.ones(card))
    if n_parents == 0:
        cpt = CPT_FLOOR + (1.0 - CPT_FLOOR * card) * base[None, :]
        return cpt / cpt.sum(axis=1, keepdims=True)

    rescale = 1.0 - CPT_FLOOR * card
    # target per-parent TV, clamped to what the scheme can reach at this
    # fan-in (raw TV approaches 1/n_parents as the push mass grows)
    target = min(MIN_PARENT_EFFECT, 0.8 * rescale / n_parents)
    push = target / (rescale - target * n_parents)
    norm = 1.0 + n_parents * push
    perms = [rng.permutation(card) for _ in range(n_parents)]

    n_cfg = card**n_parents
    cpt = np.empty((n_cfg, card))
    for cfg in range(n_cfg):
        rest, vals = cfg, []
        for _ in range(n_parents):
            rest, v = divmod(rest, card)
            vals.append(v)
        vals.reverse()  # first parent most significant
        row = base.copy()
        for p, v in enumerate(vals):
            row[perms[p][v]] += push
        cpt[cfg] = row / norm
    cpt = CPT_FLOOR + rescale * cpt
    return cpt / cpt.sum(axis=1, keepdims=True)


def _min_parent_tv(cpt: np.ndarray, card: int, n_parents: int) -> float:
    shaped = cpt.reshape([card] * n_parents + [card])
    worst = np.inf
    for p in range(n_parents):
        rows = np.moveaxis(shaped, p, 0).reshape(card, -1, card)
        for a in range(card):
            for b in range(a + 1, card):
                tv = 0.5 * np.abs(rows[a] - rows[b]).sum(axis=1).min()
                worst = min(worst, float(tv))
    return worst


def ancestral_sample(bn: DiscreteBN, rows: int, seed: int) -> Dataset:
    """Sample in topological order, each node from its CPT row."""
    if rows < 0:
        raise GraphError("rows must be non-negative")
    rng = np.random.default_rng(seed)
    codes: dict[str, np.ndarray] = {}
    for node in bn.dag.topological_order():
        card = bn.cardinalities[node]
        if rows == 0:
            codes[node] = np.zeros(0, dtype=np.int32)
            continue
        cfg = bn.parent_config_index(node, codes) if bn.dag.parents(node) else np.zeros(
            rows, dtype=np.int64
        )
        probs = bn.cpts[node][cfg]
        u = rng.random(rows)
        sampled = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
        codes[node] = np.minimum(sampled, card - 1).astype(np.int32)
    columns = [
        Column(name, Categorical(bn.cardinalities[name]), codes[name])
        for name in bn.nodes
    ]
    return Dataset(columns)


def joint_distribution(bn: DiscreteBN) -> tuple[list[str], np.ndarray]:
    """Exact joint probability table (ascending node order axes).

    Enumeration oracle for small networks only.
    """
    names = bn.nodes
    cards = [bn.cardinalities[n] for n in names]
    if int(np.prod(cards)) > 1 << 22:
        raise GraphError("joint enumeration too large")
    table = np.zeros(cards)
    for config in product(*(range(c) for c in cards)):
        codes = {n: np.array([v]) for n, v in zip(names, config)}
        p = 1.0
        for n, v in zip(names, config):
            cfg = bn.parent_config_index(n, codes) if bn.dag.parents(n) else np.zeros(1, dtype=np.int64)
            p *= bn.cpts[n][int(cfg[0]), v]
        table[config] = p
    return names, table


def true_cpdag(bn: DiscreteBN) -> MixedGraph:
    """Markov-equivalence-class representative of the BN's DAG."""
    dag = bn.dag
    compelled: set[tuple[str, str]] = set()
    for z in dag.node_ids:
        for x, y in combinations(sorted(dag.parents(z)), 2):
            if not dag.is_adjacent(x, y):
                compelled.add((x, z))
                compelled.add((y, z))
    g = MixedGraph()
    for n in dag.node_ids:
        g.add_node(dag.node(n))
    for src, dst in sorted(dag.directed_edges):
        if (src, dst) in compelled:
            g.add_directed(src, dst)
        else:
            g.add_undirected(src, dst)
    return apply_orientation_rules(g)


def structural_distance(g1: MixedGraph, g2: MixedGraph) -> int:
    """Node pairs whose adjacency or orientation differs."""
    if g1.node_ids != g2.node_ids:
        raise GraphError("graphs are over different node sets")
    distance = 0
    for a, b in combinations(g1.node_ids, 2):
        if g1.edge_kind(a, b) != g2.edge_kind(a, b):
            distance += 1
    return distance


def random_latent_structure(seed: int, n_observed: int | None = None, max_latents: int = 6):
    """Random deep latent structure from the descendant-chain family.

    Mirrors the recursive construction's wiring with ancestor branches kept
    as plain gathers: each level peels k gather groups off the pool, wires
    k fresh latents over them plus the roots of the deeper structure, and
    recurses only down the descendant remainder (with random layer skips).
    On this family every cross-level latent pair is directly connected, so
    all three dependency-preservation claims hold exactly; branch-nested
    latents (which the full learner can produce) are the known exception
    for the two intermediate claims and are exercised separately in tests.
    """
    from .graphs import latent
    from .learner import LatentStructure

    rng = np.random.default_rng(seed)
    if n_observed is None:
        n_observed = int(rng.integers(4, 9))
    names = [f"X{i:02d}" for i in range(n_observed)]

    g = MixedGraph()
    for name in names:
        g.add_node(observed(name))
    gather_groups: list[frozenset[str]] = []
    counters: dict[int, int] = {}

    def build(pool: list[str], level: int, budget: int) -> list[str]:
        if len(pool) == 1 or budget == 0 or rng.random() < 0.15:
            gather_groups.append(frozenset(pool))
            return sorted(pool)
        k = int(rng.integers(1, min(budget, len(pool) - 1, 3) + 1))
        shuffled = [pool[i] for i in rng.permutation(len(pool))]
        groups: list[list[str]] = []
        taken = 0
        for i in range(k):
            remaining_groups = k - i - 1
            max_take = len(pool) - taken - remaining_groups - 1
            size = int(rng.integers(1, max_take + 1)) if max_take > 1 else 1
            groups.append(sorted(shuffled[taken : taken + size]))
            taken += size
        descendant = sorted(shuffled[taken:])
        deeper_roots = build(descendant, level + int(rng.integers(1, 3)), budget - k)
        latent_ids = []
        for group in groups:
            counters[level] = counters.get(level, 0) + 1
            hid = f"H{level}_{counters[level]}"
            g.add_node(latent(hid, level))
            gather_groups.append(frozenset(group))
            for child in sorted(set(group) | set(deeper_roots)):
                g.add_directed(hid, child)
            latent_ids.append(hid)
        return latent_ids

    build(names, 0, max_latents)
    structure = LatentStructure(g, gather_groups)
    structure.validate()
    return structure


# ---------------------------------------------------------------------------
# wire format
# ---------------------------------------------------------------------------


def bn_to_dict(bn: DiscreteBN) -> dict:
    return {
        "nodes": [
            {"id": n, "cardinality": bn.cardinalities[n]} for n in bn.nodes
        ],
        "edges": [[src, dst] for src, dst in sorted(bn.dag.directed_edges)],
        "cpts": {n: [float(v) for v in bn.cpts[n].ravel()] for n in bn.nodes},
    }


def bn_from_dict(doc: dict) -> DiscreteBN:
    dag = MixedGraph()
    cardinalities = {}
    for entry in doc["nodes"]:
        dag.add_node(observed(entry["id"]))
        cardinalities[entry["id"]] = entry["cardinality"]
    for src, dst in doc["edges"]:
        dag.add_directed(src, dst)
    cpts = {}
    for node, flat in doc["cpts"].items():
        card = cardinalities[node]
        arr = np.asarray(flat, dtype=np.float64).reshape(-1, card)
        cpts[node] = arr
    return DiscreteBN(dag, cardinalities, cpts)


def dump_bn_json(bn: DiscreteBN) -> str:
    return json.dumps(bn_to_dict(bn), indent=2, sort_keys=True) + "\n"


def load_bn_json(text: str) -> DiscreteBN:
    return bn_from_dict(json.loads(text))
