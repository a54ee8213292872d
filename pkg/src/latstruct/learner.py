"""Recursive construction of the deep latent generative DAG.

The learner refines an auxiliary CPDAG over the observed variables by
testing conditional independencies of increasing order, splits the scope
into autonomous descendant/ancestor sets, recurses, and wires a fresh
latent layer over the roots of the returned sub-structures.  Deeper layers
therefore encode lower-order independencies, and the recursion depth (the
network depth) falls out of the data instead of being chosen.

Everything here is deterministic: pairs, condition sets, and autonomous
sets are iterated in ascending id order, and all randomness lives in the
caller's data generation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

from .errors import BookkeepingError, GraphError
from .graphs import (
    MixedGraph,
    NodeKind,
    SepsetRegistry,
    apply_orientation_rules,
    latent,
    observed,
    orient_v_structures,
    sink_components,
)
from .independence import IndependenceSource


# ---------------------------------------------------------------------------
# trace logging
# ---------------------------------------------------------------------------


class NullTrace:
    def emit(self, event: dict) -> None:
        pass


class ListTrace:
    def __init__(self):
        self.events: list[dict] = []

    def emit(self, event: dict) -> None:
        self.events.append(event)


class JsonlTrace:
    """Writes one JSON object per line; replayable learner history."""

    def __init__(self, fh):
        self._fh = fh

    def emit(self, event: dict) -> None:
        self._fh.write(json.dumps(event, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass
class AuxGraph:
    """CPDAG over observed variables at a given d-separation resolution.

    resolution = the independence order already encoded; -1 means the
    untested complete graph.
    """

    graph: MixedGraph
    resolution: int = -1


class LatentStructure:
    """The learned generative DAG over observed and latent nodes."""

    def __init__(self, graph: MixedGraph, gather_groups: list[frozenset[str]]):
        self.graph = graph
        self.gather_groups = list(gather_groups)

    @property
    def observed_nodes(self) -> list[str]:
        return self.graph.nodes_of_kind(NodeKind.OBSERVED)

    @property
    def latent_nodes(self) -> list[str]:
        return self.graph.nodes_of_kind(NodeKind.LATENT)

    def layers(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for nid in self.latent_nodes:
            out.setdefault(self.graph.node(nid).layer, []).append(nid)
        return {n: sorted(ids) for n, ids in sorted(out.items())}

    def roots(self) -> list[str]:
        return sorted(n for n in self.graph.node_ids if not self.graph.parents(n))

    def validate(self) -> None:
        """Check every structural invariant; raises on violation."""
        g = self.graph
        if g.undirected_edges or g.bidirected_edges:
            raise BookkeepingError("latent structure must be a plain DAG")
        if not g.directed_is_acyclic():
            raise BookkeepingError("latent structure contains a directed cycle")
        for x in self.observed_nodes:
            if g.children(x):
                raise BookkeepingError(f"observed node {x} has children")
        for src, dst in g.directed_edges:
            s_ref, d_ref = g.node(src), g.node(dst)
            if s_ref.kind is NodeKind.LATENT and d_ref.kind is NodeKind.LATENT:
                if not s_ref.layer < d_ref.layer:
                    raise BookkeepingError(
                        f"latent edge {src}->{dst} does not increase layer order"
                    )
        latents = self.latent_nodes
        roots = set(self.roots())
        if latents:
            min_layer = min(g.node(h).layer for h in latents)
            expected = {h for h in latents if g.node(h).layer == min_layer}
            if roots != expected:
                raise BookkeepingError(
                    f"parentless nodes {sorted(roots)} differ from minimal-layer "
                    f"latents {sorted(expected)}"
                )
        else:
            if roots != set(self.observed_nodes):
                raise BookkeepingError("latent-free structure must leave all observed parentless")
        seen: set[str] = set()
        for group in self.gather_groups:
            if seen & group:
                raise BookkeepingError("gather groups overlap")
            seen |= group
        if seen != set(self.observed_nodes):
            raise BookkeepingError("gather groups do not cover the observed set")

    def to_dict(self) -> dict:
        from .graphs import graph_to_dict

        return graph_to_dict(
            self.graph, extra={"gather_groups": [sorted(g) for g in self.gather_groups]}
        )

    @classmethod
    def from_dict(cls, doc: dict) -> "LatentStructure":
        from .graphs import graph_from_dict

        return cls(
            graph_from_dict(doc), [frozenset(g) for g in doc.get("gather_groups", [])]
        )


@dataclass
class LearnResult:
    structure: LatentStructure
    auxiliary: MixedGraph  # learned CPDAG over the observed variables
    sepsets: SepsetRegistry


# ---------------------------------------------------------------------------
# algorithm pieces
# ---------------------------------------------------------------------------


def exit_condition(
    f: AuxGraph, x: set[str], x_ex: set[str] | frozenset[str], n: int
) -> bool:
    """True when no node in x has n+1 potential parents left.

    Potential parents of X are its directed parents plus undirected
    neighbors, counted within the current scope and its exogenous set.
    """
    if not x:
        return True
    scope = set(x) | set(x_ex)
    g = f.graph
    max_indegree = max(
        len((g.parents(node) | g.neighbors(node)) & scope) for node in x
    )
    return max_indegree < n + 1


def _condition_pool(g: MixedGraph, node: str, scope: set[str]) -> set[str]:
    # full adjacency, not just potential parents: a mis-oriented edge must
    # not hide a node's true separating sets from the enumeration
    return g.adjacent(node) & scope


def increase_resolution(
    f: AuxGraph,
    x: set[str],
    x_ex: set[str],
    n: int,
    src: IndependenceSource,
    trace=None,
    removal_log: list | None = None,
) -> AuxGraph:
    """Disconnect order-n conditionally independent pairs, then re-orient.

    Phase 1 tests every connected endogenous/exogenous pair, phase 2 every
    connected pair within x.  Condition sets of size exactly n are drawn
    from the pair's potential parents in ascending lexicographic order with
    early exit on the first separating set; removals take effect
    immediately.  Edges between exogenous nodes are never touched.
    """
    if f.resolution != n - 1:
        raise BookkeepingError(
            f"increase_resolution at order {n} applied to resolution {f.resolution}"
        )
    trace = trace or NullTrace()
    g = f.graph.copy()
    scope = set(x) | set(x_ex)

    def test_pair(a: str, b: str) -> None:
        if not g.is_adjacent(a, b):
            return
        pool = (_condition_pool(g, a, scope) | _condition_pool(g, b, scope)) - {a, b}
        for s in combinations(sorted(pool), n):
            if src.is_independent(a, b, frozenset(s)):
                g.remove_edge(a, b)
                if removal_log is not None:
                    removal_log.append((a, b))
                trace.emit(
                    {
                        "event": "edge_removed",
                        "x": min(a, b),
                        "y": max(a, b),
                        "sepset": sorted(s),
                        "order": n,
                    }
                )
                return

    for a in sorted(x):
        for b in sorted(g.adjacent(a) & set(x_ex)):
            test_pair(a, b)
    for a, b in combinations(sorted(x), 2):
        test_pair(a, b)

    directed_before = g.directed_edges
    g = orient_v_structures(g, src.sepsets)
    for u, v in sorted(g.directed_edges - directed_before):
        trace.emit({"event": "edge_oriented", "from": u, "to": v, "stage": "v_structure", "order": n})
    directed_before = g.directed_edges
    g = apply_orientation_rules(g)
    for u, v in sorted(g.directed_edges - directed_before):
        trace.emit({"event": "edge_oriented", "from": u, "to": v, "stage": "rules", "order": n})
    return AuxGraph(g, n)


def split_autonomous(
    x: set[str], f: AuxGraph
) -> tuple[frozenset[str], list[frozenset[str]]]:
    """Descendant set and ancestor sets of the current scope."""
    return sink_components(f.graph, set(x))


# ---------------------------------------------------------------------------
# the recursive learner
# ---------------------------------------------------------------------------


class _Learner:
    def __init__(self, src: IndependenceSource, trace=None):
        self.src = src
        self.trace = trace or NullTrace()
        self.structure = MixedGraph()
        self.gather_groups: list[frozenset[str]] = []
        self.layer_counters: dict[int, int] = {}
        self.removals: list[tuple[str, str]] = []

    def run(self, f: AuxGraph, x: set[str], x_ex: set[str], n: int) -> list[str]:
        """Returns the parentless node ids of the structure built over x."""
        if not x:
            raise BookkeepingError("recursion entered with empty scope")
        if x & x_ex:
            raise BookkeepingError("scope and exogenous set overlap")
        self.trace.emit(
            {"event": "enter", "x": sorted(x), "x_ex": sorted(x_ex), "n": n}
        )

        if exit_condition(f, x, x_ex, n):
            group = frozenset(x)
            self.gather_groups.append(group)
            for node in sorted(x):
                self.structure.add_node(observed(node))
            self.trace.emit({"event": "gather", "x": sorted(x), "n": n})
            return sorted(x)

        f2 = increase_resolution(f, x, x_ex, n, self.src, self.trace, self.removals)
        x_d, ancestor_sets = split_autonomous(x, f2)
        self.trace.emit(
            {
                "event": "split",
                "n": n,
                "x_d": sorted(x_d),
                "x_a": [sorted(a) for a in ancestor_sets],
            }
        )

        ancestor_roots = [
            self.run(f2, set(a), set(x_ex), n + 1) for a in ancestor_sets
        ]
        descendant_ex = set(x_ex).union(*ancestor_sets) if ancestor_sets else set(x_ex)
        descendant_roots = self.run(f2, set(x_d), descendant_ex, n + 1)

        k = len(ancestor_sets)
        if k == 0:
            # nothing to split off: the sub-structure passes through unchanged
            return descendant_roots

        layer_ids = []
        for i in range(k):
            self.layer_counters[n] = self.layer_counters.get(n, 0) + 1
            hid = f"H{n}_{self.layer_counters[n]}"
            self.structure.add_node(latent(hid, n))
            for root in sorted(set(ancestor_roots[i]) | set(descendant_roots)):
                self.structure.add_directed(hid, root)
            layer_ids.append(hid)
        self.trace.emit(
            {
                "event": "latent_layer",
                "n": n,
                "ids": layer_ids,
                "children": {
                    hid: sorted(self.structure.children(hid)) for hid in layer_ids
                },
            }
        )
        return sorted(layer_ids)


def complete_undirected_graph(variables: list[str]) -> MixedGraph:
    g = MixedGraph()
    for v in variables:
        g.add_node(observed(v))
    for a, b in combinations(sorted(variables), 2):
        g.add_undirected(a, b)
    return g


def recur_lat_struct(
    f: AuxGraph,
    x: set[str],
    x_ex: set[str],
    n: int,
    src: IndependenceSource,
    trace=None,
) -> LatentStructure:
    """Run the recursive construction from an arbitrary starting state."""
    learner = _Learner(src, trace)
    roots = learner.run(f, set(x), set(x_ex), n)
    structure = LatentStructure(learner.structure, learner.gather_groups)
    if structure.latent_nodes:
        min_layer = min(structure.graph.node(h).layer for h in structure.latent_nodes)
        if min_layer > n:
            learner.trace.emit(
                {
                    "event": "deep_roots_audit",
                    "roots": list(roots),
                    "min_layer": min_layer,
                    "n": n,
                }
            )
    structure.validate()
    return structure


def learn_structure(
    src: IndependenceSource,
    variables: list[str] | None = None,
    trace=None,
) -> LearnResult:
    """Full learning run: complete graph, order 0, empty exogenous set.

    Besides the latent structure, assembles the learned CPDAG over the
    observed variables by replaying every edge removal against the initial
    complete graph and re-running the orientation pass once.
    """
    trace = trace or NullTrace()
    if variables is None:
        variables = src.variables()
    variables = sorted(variables)
    if not variables:
        raise GraphError("no variables to learn over")

    learner = _Learner(src, trace)
    f0 = AuxGraph(complete_undirected_graph(variables), resolution=-1)
    roots = learner.run(f0, set(variables), set(), 0)

    structure = LatentStructure(learner.structure, learner.gather_groups)
    if structure.latent_nodes:
        min_layer = min(structure.graph.node(h).layer for h in structure.latent_nodes)
        if min_layer > 0:
            trace.emit(
                {
                    "event": "deep_roots_audit",
                    "roots": list(roots),
                    "min_layer": min_layer,
                    "n": 0,
                }
            )
    structure.validate()

    aux = complete_undirected_graph(variables)
    for a, b in learner.removals:
        aux.remove_edge(a, b)
    aux = apply_orientation_rules(orient_v_structures(aux, src.sepsets))

    trace.emit(
        {
            "event": "summary",
            "variables": len(variables),
            "latents": len(structure.latent_nodes),
            "gather_groups": len(structure.gather_groups),
            "ci_tests": src.test_evaluations,
        }
    )
    return LearnResult(structure, aux, src.sepsets)
