"""Stochastic inverse, discriminative graph, and dependency-preservation checks.

The inverse reverses the generative flow so observed nodes become parentless;
dependencies that reversal would lose between same-layer latents are kept as
bidirected edges (hidden common causes, materialized only inside queries).
The discriminative graph trades those bidirected edges for explaining-away
through the class node Y.  ``verify_preservation`` machine-checks, by
exhaustive d-separation enumeration, that every conditional dependence of
the generative graph survives both constructions.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import _kernels
from .errors import BookkeepingError, GraphError, VerificationGuardError
from .graphs import MixedGraph, NodeKind, class_node, materialize_projection
from .learner import LatentStructure

VERIFY_NODE_LIMIT = 14


class InverseGraph:
    """Directed + bidirected graph over the same nodes as the generative DAG."""

    def __init__(self, graph: MixedGraph, gather_groups: list[frozenset[str]]):
        self.graph = graph
        self.gather_groups = list(gather_groups)

    def childless_latents(self) -> list[str]:
        return sorted(
            h
            for h in self.graph.nodes_of_kind(NodeKind.LATENT)
            if not self.graph.children(h)
        )

    def validate(self) -> None:
        g = self.graph
        if g.undirected_edges:
            raise BookkeepingError("inverse graph may not contain undirected edges")
        if not g.directed_is_acyclic():
            raise BookkeepingError("inverse graph has a directed cycle")
        for x in g.nodes_of_kind(NodeKind.OBSERVED):
            if g.parents(x):
                raise BookkeepingError(f"observed node {x} has parents in the inverse")
        for a, b in g.bidirected_edges:
            ra, rb = g.node(a), g.node(b)
            if ra.kind is not NodeKind.LATENT or rb.kind is not NodeKind.LATENT:
                raise BookkeepingError(f"bidirected edge {a}<->{b} touches a non-latent")
            if ra.layer != rb.layer:
                raise BookkeepingError(
                    f"bidirected pair {a}<->{b} spans layers {ra.layer} and {rb.layer}"
                )

    def to_dict(self) -> dict:
        from .graphs import graph_to_dict

        return graph_to_dict(
            self.graph, extra={"gather_groups": [sorted(g) for g in self.gather_groups]}
        )

    @classmethod
    def from_dict(cls, doc: dict) -> "InverseGraph":
        from .graphs import graph_from_dict

        return cls(graph_from_dict(doc), [frozenset(g) for g in doc.get("gather_groups", [])])


class DiscriminativeGraph:
    """Class-conditional DAG over observed, latent, and class nodes."""

    def __init__(self, graph: MixedGraph, gather_groups: list[frozenset[str]], y_id: str):
        self.graph = graph
        self.gather_groups = list(gather_groups)
        self.y_id = y_id

    def validate(self) -> None:
        g = self.graph
        if g.undirected_edges or g.bidirected_edges:
            raise BookkeepingError("discriminative graph must be a plain DAG")
        if not g.directed_is_acyclic():
            raise BookkeepingError("discriminative graph has a directed cycle")
        if g.children(self.y_id):
            raise BookkeepingError("class node must be childless")
        for x in g.nodes_of_kind(NodeKind.OBSERVED):
            if g.parents(x):
                raise BookkeepingError(f"observed node {x} has parents")

    def to_dict(self) -> dict:
        from .graphs import graph_to_dict

        return graph_to_dict(
            self.graph,
            extra={
                "gather_groups": [sorted(g) for g in self.gather_groups],
                "class_node": self.y_id,
            },
        )

    @classmethod
    def from_dict(cls, doc: dict) -> "DiscriminativeGraph":
        from .graphs import graph_from_dict

        return cls(
            graph_from_dict(doc),
            [frozenset(g) for g in doc.get("gather_groups", [])],
            doc["class_node"],
        )


def build_stochastic_inverse(structure: LatentStructure) -> InverseGraph:
    """Reverse every edge; bidirect latent pairs that shared a child."""
    src = structure.graph
    g = MixedGraph()
    for nid in src.node_ids:
        g.add_node(src.node(nid))
    for a, b in src.directed_edges:
        g.add_directed(b, a)
    latents = structure.latent_nodes
    for h1, h2 in combinations(latents, 2):
        if src.children(h1) & src.children(h2):
            g.add_bidirected(h1, h2)
    inv = InverseGraph(g, structure.gather_groups)
    inv.validate()
    return inv


def _fresh_class_id(g: MixedGraph) -> str:
    y = "Y"
    while g.has_node(y):
        y += "_"
    return y


def build_discriminative(inv: InverseGraph) -> DiscriminativeGraph:
    """Drop bidirected edges and add Y as the common child of the leaves.

    The leaves are the childless latents of the inverse (the deepest
    generative layer); with no latents at all, Y attaches directly to every
    observed node.
    """
    g = MixedGraph()
    for nid in inv.graph.node_ids:
        g.add_node(inv.graph.node(nid))
    for a, b in inv.graph.directed_edges:
        g.add_directed(a, b)
    y = _fresh_class_id(g)
    g.add_node(class_node(y))
    leaves = inv.childless_latents()
    if not leaves:
        leaves = inv.graph.nodes_of_kind(NodeKind.OBSERVED)
    for h in leaves:
        g.add_directed(h, y)
    disc = DiscriminativeGraph(g, inv.gather_groups, y)
    disc.validate()
    return disc


# ---------------------------------------------------------------------------
# preservation verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    prop: int
    a: str
    b: str
    s: tuple[str, ...]


@dataclass
class PreservationReport:
    checked: int
    violations: list[Violation]
    informational: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        def enc(v: Violation) -> dict:
            return {"prop": v.prop, "a": v.a, "b": v.b, "s": list(v.s)}

        return {
            "checked": self.checked,
            "violations": [enc(v) for v in self.violations],
            "informational": [enc(v) for v in self.informational],
        }


class _CsrDag:
    """Parent/child CSR arrays for the reachability kernel."""

    def __init__(self, g: MixedGraph, index: dict[str, int]):
        n = len(index)
        parents: list[list[int]] = [[] for _ in range(n)]
        children: list[list[int]] = [[] for _ in range(n)]
        for src, dst in g.directed_edges:
            parents[index[dst]].append(index[src])
            children[index[src]].append(index[dst])
        self.n = n
        self.p_indptr, self.p_indices = _to_csr(parents)
        self.c_indptr, self.c_indices = _to_csr(children)

    def reach(self, source: int, s_mask: np.ndarray) -> np.ndarray:
        return _kernels.reachable_mask(
            self.n,
            self.p_indptr,
            self.p_indices,
            self.c_indptr,
            self.c_indices,
            source,
            s_mask,
        )


def _to_csr(adj: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    indptr = np.zeros(len(adj) + 1, dtype=np.int32)
    for i, lst in enumerate(adj):
        indptr[i + 1] = indptr[i] + len(lst)
    indices = np.fromiter(
        (v for lst in adj for v in sorted(lst)), dtype=np.int32, count=int(indptr[-1])
    )
    return indptr, indices


def verify_preservation(
    structure: LatentStructure,
    inv: InverseGraph,
    disc: DiscriminativeGraph,
    max_condition_size: int = 3,
    condition_on_y: bool = True,
) -> PreservationReport:
    """Enumerate (a, b, S) triples and check the three preservation claims.

    For every pair of generative-graph nodes and every condition set S up
    to the size cap: d-connection in the generative DAG must imply
    d-connection in the projected inverse (claim 1); d-connection in the
    projected inverse must imply d-connection in the discriminative DAG
    given S plus Y (claim 2); and their composition (claim 3).  Pairs with
    an observed endpoint are exempt and reported separately as
    informational: observed variables are the network inputs, always
    conditioned on in use, so their marginal coupling carries no
    architectural meaning.

    ``condition_on_y=False`` runs the claim-2/3 checks without adding Y to
    the condition set, the negative control: explaining-away through Y is
    what carries the bidirected dependencies, so violations are expected.
    """
    nodes = structure.graph.node_ids
    if len(nodes) > VERIFY_NODE_LIMIT:
        raise VerificationGuardError(
            f"{len(nodes)} nodes exceeds the enumeration guard ({VERIFY_NODE_LIMIT})"
        )
    for g in (inv.graph, disc.graph):
        for nid in nodes:
            if not g.has_node(nid):
                raise GraphError(f"graphs disagree on node set: missing {nid!r}")

    gl = structure.graph
    gi = materialize_projection(inv.graph)
    gd = disc.graph
    y = disc.y_id

    idx_l = {nid: k for k, nid in enumerate(gl.node_ids)}
    idx_i = {nid: k for k, nid in enumerate(gi.node_ids)}
    idx_d = {nid: k for k, nid in enumerate(gd.node_ids)}
    csr_l = _CsrDag(gl, idx_l)
    csr_i = _CsrDag(gi, idx_i)
    csr_d = _CsrDag(gd, idx_d)

    observed_set = set(structure.observed_nodes)
    checked = 0
    violations: list[Violation] = []
    informational: list[Violation] = []

    base_mask_l = np.zeros(csr_l.n, dtype=np.uint8)
    base_mask_i = np.zeros(csr_i.n, dtype=np.uint8)
    base_mask_d = np.zeros(csr_d.n, dtype=np.uint8)

    for size in range(max_condition_size + 1):
        for s in combinations(nodes, size):
            mask_l = base_mask_l.copy()
            mask_i = base_mask_i.copy()
            mask_d = base_mask_d.copy()
            for nid in s:
                mask_l[idx_l[nid]] = 1
                mask_i[idx_i[nid]] = 1
                mask_d[idx_d[nid]] = 1
            if condition_on_y:
                mask_d[idx_d[y]] = 1
            s_set = set(s)
            reach_cache = {}
            for a in nodes:
                if a in s_set:
                    continue
                reach_cache[a] = (
                    csr_l.reach(idx_l[a], mask_l),
                    csr_i.reach(idx_i[a], mask_i),
                    csr_d.reach(idx_d[a], mask_d),
                )
            for a, b in combinations(nodes, 2):
                if a in s_set or b in s_set:
                    continue
                r_l, r_i, r_d = reach_cache[a]
                conn_l = bool(r_l[idx_l[b]])
                conn_i = bool(r_i[idx_i[b]])
                conn_d = bool(r_d[idx_d[b]])
                checked += 1
                exempt = a in observed_set or b in observed_set
                for prop, failed in (
                    (1, conn_l and not conn_i),
                    (2, conn_i and not conn_d),
                    (3, conn_l and not conn_d),
                ):
                    if failed:
                        v = Violation(prop, a, b, tuple(s))
                        (informational if exempt else violations).append(v)
    return PreservationReport(checked, violations, informational)
