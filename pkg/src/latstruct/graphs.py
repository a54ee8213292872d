"""Mixed-graph representation and the graph algorithms built on it.

A single :class:`MixedGraph` underlies every graph role in the pipeline:
the auxiliary CPDAG refined during learning (directed + undirected edges),
the generative and discriminative DAGs (directed only), and the stochastic
inverse (directed + bidirected).  All public functions treat graphs as
immutable values: they copy before mutating and never modify their inputs.

Node pairs in undirected and bidirected edge sets are always stored with
endpoints in ascending-id order, and every algorithm iterates nodes in
ascending id, so results are deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations

from .errors import BookkeepingError, GraphError


class NodeKind(Enum):
    OBSERVED = "observed"
    LATENT = "latent"
    CLASS = "class"


@dataclass(frozen=True)
class NodeRef:
    """A graph node: opaque id, role, and (for latents) its layer order."""

    id: str
    kind: NodeKind = NodeKind.OBSERVED
    layer: int | None = None
    label: str | None = None

    def __post_init__(self):
        if (self.kind is NodeKind.LATENT) != (self.layer is not None):
            raise GraphError(
                f"node {self.id!r}: layer order must be present iff kind is latent"
            )
        if self.layer is not None and self.layer < 0:
            raise GraphError(f"node {self.id!r}: negative layer order")


def observed(node_id: str) -> NodeRef:
    return NodeRef(node_id, NodeKind.OBSERVED)


def latent(node_id: str, layer: int) -> NodeRef:
    return NodeRef(node_id, NodeKind.LATENT, layer)


def class_node(node_id: str = "Y") -> NodeRef:
    return NodeRef(node_id, NodeKind.CLASS)


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


class MixedGraph:
    """Nodes plus directed, undirected, and bidirected edge sets.

    At most one edge of any kind may connect a node pair; self-loops are
    rejected.  Instances are cheap to copy and all algorithm entry points
    below work on copies, so callers may share graphs freely.
    """

    def __init__(self, nodes: dict[str, NodeRef] | None = None):
        self._nodes: dict[str, NodeRef] = dict(nodes) if nodes else {}
        self._directed: set[tuple[str, str]] = set()
        self._undirected: set[tuple[str, str]] = set()
        self._bidirected: set[tuple[str, str]] = set()
        # adjacency caches, kept in sync by the mutators
        self._parents: dict[str, set[str]] = {n: set() for n in self._nodes}
        self._children: dict[str, set[str]] = {n: set() for n in self._nodes}
        self._neighbors: dict[str, set[str]] = {n: set() for n in self._nodes}
        self._spouses: dict[str, set[str]] = {n: set() for n in self._nodes}

    # -- construction ------------------------------------------------------

    def add_node(self, node: NodeRef) -> None:
        if node.id in self._nodes:
            if self._nodes[node.id] != node:
                raise GraphError(f"node id {node.id!r} already present with a different role")
            return
        self._nodes[node.id] = node
        self._parents[node.id] = set()
        self._children[node.id] = set()
        self._neighbors[node.id] = set()
        self._spouses[node.id] = set()

    def _check_endpoints(self, a: str, b: str) -> None:
        if a == b:
            raise GraphError(f"self-loop on {a!r}")
        for n in (a, b):
            if n not in self._nodes:
                raise GraphError(f"unknown node {n!r}")
        if self.edge_kind(a, b) is not None:
            raise GraphError(f"nodes {a!r}, {b!r} already connected")

    def add_directed(self, src: str, dst: str) -> None:
        self._check_endpoints(src, dst)
        self._directed.add((src, dst))
        self._parents[dst].add(src)
        self._children[src].add(dst)

    def add_undirected(self, a: str, b: str) -> None:
        self._check_endpoints(a, b)
        self._undirected.add(_pair(a, b))
        self._neighbors[a].add(b)
        self._neighbors[b].add(a)

    def add_bidirected(self, a: str, b: str) -> None:
        self._check_endpoints(a, b)
        self._bidirected.add(_pair(a, b))
        self._spouses[a].add(b)
        self._spouses[b].add(a)

    def remove_edge(self, a: str, b: str) -> None:
        """Remove whatever edge connects a and b."""
        if (a, b) in self._directed:
            self._directed.discard((a, b))
            self._parents[b].discard(a)
            self._children[a].discard(b)
        elif (b, a) in self._directed:
            self._directed.discard((b, a))
            self._parents[a].discard(b)
            self._children[b].discard(a)
        elif _pair(a, b) in self._undirected:
            self._undirected.discard(_pair(a, b))
            self._neighbors[a].discard(b)
            self._neighbors[b].discard(a)
        elif _pair(a, b) in self._bidirected:
            self._bidirected.discard(_pair(a, b))
            self._spouses[a].discard(b)
            self._spouses[b].discard(a)
        else:
            raise GraphError(f"no edge between {a!r} and {b!r}")

    def orient(self, src: str, dst: str) -> None:
        """Turn the undirected edge src-dst into src->dst."""
        if _pair(src, dst) not in self._undirected:
            raise GraphError(f"no undirected edge between {src!r} and {dst!r}")
        self.remove_edge(src, dst)
        self.add_directed(src, dst)

    def copy(self) -> "MixedGraph":
        g = MixedGraph(self._nodes)
        g._directed = set(self._directed)
        g._undirected = set(self._undirected)
        g._bidirected = set(self._bidirected)
        g._parents = {n: set(s) for n, s in self._parents.items()}
        g._children = {n: set(s) for n, s in self._children.items()}
        g._neighbors = {n: set(s) for n, s in self._neighbors.items()}
        g._spouses = {n: set(s) for n, s in self._spouses.items()}
        return g

    # -- queries -----------------------------------------------------------

    @property
    def node_ids(self) -> list[str]:
        return sorted(self._nodes)

    def node(self, node_id: str) -> NodeRef:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise GraphError(f"unknown node {node_id!r}") from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self._nodes

    def nodes_of_kind(self, kind: NodeKind) -> list[str]:
        return sorted(n for n, ref in self._nodes.items() if ref.kind is kind)

    @property
    def directed_edges(self) -> set[tuple[str, str]]:
        return set(self._directed)

    @property
    def undirected_edges(self) -> set[tuple[str, str]]:
        return set(self._undirected)

    @property
    def bidirected_edges(self) -> set[tuple[str, str]]:
        return set(self._bidirected)

    def parents(self, n: str) -> set[str]:
        return set(self._parents[n])

    def children(self, n: str) -> set[str]:
        return set(self._children[n])

    def neighbors(self, n: str) -> set[str]:
        """Nodes joined to n by an undirected edge."""
        return set(self._neighbors[n])

    def adjacent(self, n: str) -> set[str]:
        return self._parents[n] | self._children[n] | self._neighbors[n] | self._spouses[n]

    def edge_kind(self, a: str, b: str) -> str | None:
        """One of 'directed' (a->b), 'reversed' (b->a), 'undirected', 'bidirected'."""
        if (a, b) in self._directed:
            return "directed"
        if (b, a) in self._directed:
            return "reversed"
        if _pair(a, b) in self._undirected:
            return "undirected"
        if _pair(a, b) in self._bidirected:
            return "bidirected"
        return None

    def is_adjacent(self, a: str, b: str) -> bool:
        return self.edge_kind(a, b) is not None

    def has_directed_path(self, src: str, dst: str) -> bool:
        if src == dst:
            return True
        stack, seen = [src], {src}
        while stack:
            for c in self._children[stack.pop()]:
                if c == dst:
                    return True
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return False

    def directed_is_acyclic(self) -> bool:
        order = self.topological_order(strict=False)
        return order is not None

    def topological_order(self, strict: bool = True) -> list[str] | None:
        """Topological order of the directed part (ties broken by id).

        Returns None when the directed part is cyclic and strict is False,
        raises otherwise.  Undirected/bidirected edges are ignored.
        """
        indeg = {n: len(self._parents[n]) for n in self._nodes}
        ready = sorted((n for n, d in indeg.items() if d == 0), reverse=True)
        order: list[str] = []
        while ready:
            n = ready.pop()
            order.append(n)
            changed = False
            for c in sorted(self._children[n]):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
                    changed = True
            if changed:
                ready.sort(reverse=True)
        if len(order) != len(self._nodes):
            if strict:
                raise GraphError("directed part contains a cycle")
            return None
        return order

    def ancestors(self, targets: set[str]) -> set[str]:
        """targets plus every node with a directed path into targets."""
        out = set(targets)
        stack = list(targets)
        while stack:
            for p in self._parents[stack.pop()]:
                if p not in out:
                    out.add(p)
                    stack.append(p)
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return (
            self._nodes == other._nodes
            and self._directed == other._directed
            and self._undirected == other._undirected
            and self._bidirected == other._bidirected
        )

    def __repr__(self) -> str:
        return (
            f"MixedGraph({len(self._nodes)} nodes, {len(self._directed)} directed, "
            f"{len(self._undirected)} undirected, {len(self._bidirected)} bidirected)"
        )


@dataclass
class SepsetRegistry:
    """Separating sets recorded when independence findings remove edges.

    A pair appears iff its edge was removed; the stored set is the condition
    set of the independence that removed it.
    """

    _sets: dict[tuple[str, str], frozenset[str]] = field(default_factory=dict)

    def record(self, a: str, b: str, s: frozenset[str]) -> None:
        self._sets.setdefault(_pair(a, b), frozenset(s))

    def lookup(self, a: str, b: str) -> frozenset[str] | None:
        return self._sets.get(_pair(a, b))

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return _pair(*pair) in self._sets

    def __len__(self) -> int:
        return len(self._sets)

    def items(self):
        return sorted(self._sets.items())


# ---------------------------------------------------------------------------
# d-separation
# ---------------------------------------------------------------------------


def dconnected_set(g: MixedGraph, a: str, s: set[str] | frozenset[str]) -> set[str]:
    """All nodes d-connected to a given conditioning set s, in a DAG.

    Single reachability pass over (node, entry-direction) states; linear in
    the edge count.  The companion Cython kernel implements the same walk on
    CSR arrays; this reference version is the fallback and the arbiter.
    """
    anc = g.ancestors(set(s))
    # entry direction: True = entered through an edge into the node's child
    # side (coming "up" from a child), False = entered from a parent.
    up, down = True, False
    stack = [(a, up)]
    visited: set[tuple[str, bool]] = set()
    reach: set[str] = set()
    while stack:
        state = stack.pop()
        if state in visited:
            continue
        visited.add(state)
        node, direction = state
        if node not in s:
            reach.add(node)
        if direction is up and node not in s:
            for p in g.parents(node):
                stack.append((p, up))
            for c in g.children(node):
                stack.append((c, down))
        elif direction is down:
            if node not in s:
                for c in g.children(node):
                    stack.append((c, down))
            if node in anc:  # collider (or its ancestor-of-evidence) opens
                for p in g.parents(node):
                    stack.append((p, up))
    reach.discard(a)
    return reach


def d_separated(g: MixedGraph, a: str, b: str, s: set[str] | frozenset[str]) -> bool:
    """Standard d-separation criterion between single nodes a and b given s."""
    if g.undirected_edges or g.bidirected_edges:
        raise GraphError("d-separation requires a DAG (directed edges only)")
    for n in (a, b, *s):
        if not g.has_node(n):
            raise GraphError(f"unknown node {n!r}")
    if a == b:
        raise GraphError("query nodes must be distinct")
    if a in s or b in s:
        raise GraphError("query nodes may not appear in the conditioning set")
    if not g.directed_is_acyclic():
        raise GraphError("directed part contains a cycle")
    return b not in dconnected_set(g, a, frozenset(s))


# ---------------------------------------------------------------------------
# CPDAG orientation
# ---------------------------------------------------------------------------


def orient_v_structures(g: MixedGraph, sepsets: SepsetRegistry) -> MixedGraph:
    """Direct X->Z<-Y for every unshielded triple whose sepset excludes Z.

    Triples are scanned in ascending (Z, X, Y) order and only undirected
    edges are (re)oriented, so earlier decisions are never flipped; the
    skeleton is untouched.  A missing sepset for a tested non-adjacent pair
    indicates learner bookkeeping has gone wrong and raises.
    """
    if g.bidirected_edges:
        raise GraphError("v-structure orientation expects no bidirected edges")
    out = g.copy()
    for z in out.node_ids:
        adj = sorted(out.adjacent(z))
        for x, y in combinations(adj, 2):
            if out.is_adjacent(x, y):
                continue
            sep = sepsets.lookup(x, y)
            if sep is None:
                raise BookkeepingError(f"no sepset recorded for non-adjacent pair ({x}, {y})")
            if z in sep:
                continue
            for src in (x, y):
                if out.edge_kind(src, z) == "undirected":
                    out.orient(src, z)
    return out


def apply_orientation_rules(g: MixedGraph) -> MixedGraph:
    """Close a PDAG under the four standard orientation rules.

    Repeats until fixpoint; never adds or removes adjacencies and never
    introduces a directed cycle (each application is guarded, which also
    keeps the function total on inputs where CI decisions were inconsistent).
    """
    out = g.copy()

    def try_orient(src: str, dst: str) -> bool:
        if out.edge_kind(src, dst) != "undirected":
            return False
        if out.has_directed_path(dst, src):
            return False
        out.orient(src, dst)
        return True

    changed = True
    while changed:
        changed = False
        for a, b in sorted(out.undirected_edges):
            for x, y in ((a, b), (b, a)):
                # R1: z->x, x-y, z not adjacent to y  =>  x->y
                if any(not out.is_adjacent(z, y) for z in out.parents(x)):
                    if try_orient(x, y):
                        changed = True
                        break
                # R2: x->w->y and x-y  =>  x->y
                if out.children(x) & out.parents(y):
                    if try_orient(x, y):
                        changed = True
                        break
                # R3: x-z1, x-z2, z1->y, z2->y, z1/z2 non-adjacent, x-y  =>  x->y
                zs = sorted(out.neighbors(x) & out.parents(y))
                if any(
                    not out.is_adjacent(z1, z2)
                    for z1, z2 in combinations(zs, 2)
                ):
                    if try_orient(x, y):
                        changed = True
                        break
                # R4: x-z, z->w, w->y, x adj w, z/y non-adjacent (and x-y) => x->y
                found = False
                for z in sorted(out.neighbors(x)):
                    if found:
                        break
                    if out.is_adjacent(z, y):
                        continue
                    for w in out.children(z) & out.parents(y):
                        if out.edge_kind(x, w) is not None:
                            found = True
                            break
                if found and try_orient(x, y):
                    changed = True
                    break
            if changed:
                break
    return out


# ---------------------------------------------------------------------------
# chain components / sink split
# ---------------------------------------------------------------------------


def chain_components(g: MixedGraph, scope: set[str]) -> list[frozenset[str]]:
    """Maximal undirected-connected groups within scope, sorted by min id."""
    remaining = set(scope)
    comps = []
    while remaining:
        seed = min(remaining)
        comp = {seed}
        stack = [seed]
        while stack:
            for nb in g.neighbors(stack.pop()):
                if nb in remaining and nb not in comp:
                    comp.add(nb)
                    stack.append(nb)
        comps.append(frozenset(comp))
        remaining -= comp
    return sorted(comps, key=min)


def sink_components(
    g: MixedGraph, scope: set[str]
) -> tuple[frozenset[str], list[frozenset[str]]]:
    """Split scope into the lowest-topological-order group and the rest.

    Chain components are contracted to supernodes; components of the
    resulting directed component graph with no out-edges form the
    descendant set.  Removing it leaves k (possibly zero) connected
    sub-structures, returned as the ancestor sets.  Together the returned
    sets partition scope.

    If inconsistent CI answers ever leave a directed cycle between chain
    components, the cycle's strongly connected components are contracted
    first; on clean input this is a no-op.
    """
    if not scope:
        raise GraphError("empty scope")
    for n in scope:
        if not g.has_node(n):
            raise GraphError(f"unknown node {n!r}")

    comps = chain_components(g, scope)
    comp_of = {n: i for i, comp in enumerate(comps) for n in comp}
    out_edges: dict[int, set[int]] = {i: set() for i in range(len(comps))}
    for src, dst in g.directed_edges:
        if src in comp_of and dst in comp_of and comp_of[src] != comp_of[dst]:
            out_edges[comp_of[src]].add(comp_of[dst])

    groups = _condense(out_edges)
    sink_nodes: set[str] = set()
    for group in groups:
        targets = set().union(*(out_edges[i] for i in group))
        if targets <= group:
            for i in group:
                sink_nodes |= comps[i]

    descendant = frozenset(sink_nodes)
    rest = scope - sink_nodes
    ancestors = []
    remaining = set(rest)
    while remaining:
        seed = min(remaining)
        comp = {seed}
        stack = [seed]
        while stack:
            n = stack.pop()
            for nb in g.adjacent(n):
                if nb in remaining and nb not in comp:
                    comp.add(nb)
                    stack.append(nb)
        ancestors.append(frozenset(comp))
        remaining -= comp
    return descendant, sorted(ancestors, key=min)


def _condense(out_edges: dict[int, set[int]]) -> list[set[int]]:
    """Strongly connected components (iterative Tarjan) of a small digraph."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    sccs: list[set[int]] = []
    counter = 0

    for root in sorted(out_edges):
        if root in index:
            continue
        work = [(root, iter(sorted(out_edges[root])))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(out_edges[w]))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == index[v]:
                scc = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    scc.add(w)
                    if w == v:
                        break
                sccs.append(scc)
    return sccs


# ---------------------------------------------------------------------------
# latent projection
# ---------------------------------------------------------------------------


def materialize_projection(g: MixedGraph) -> MixedGraph:
    """Replace each bidirected pair by a fresh hidden common cause.

    The fresh nodes make the graph a plain DAG so ordinary d-separation
    applies; they are never stored back into the inverse graph itself.
    """
    if g.undirected_edges:
        raise GraphError("projection input may not contain undirected edges")
    out = g.copy()
    for i, (a, b) in enumerate(sorted(g.bidirected_edges), start=1):
        qid = f"__q{i}"
        while out.has_node(qid):
            qid += "_"
        layers = [out.node(n).layer for n in (a, b)]
        q_layer = min((l for l in layers if l is not None), default=0)
        out.add_node(latent(qid, q_layer))
        out.remove_edge(a, b)
        out.add_directed(qid, a)
        out.add_directed(qid, b)
    if not out.directed_is_acyclic():
        raise GraphError("projection produced a directed cycle (malformed input)")
    return out


# ---------------------------------------------------------------------------
# JSON wire format
# ---------------------------------------------------------------------------


def graph_to_dict(g: MixedGraph, extra: dict | None = None) -> dict:
    nodes = []
    for nid in g.node_ids:
        ref = g.node(nid)
        entry: dict = {"id": nid, "kind": ref.kind.value}
        if ref.layer is not None:
            entry["layer"] = ref.layer
        nodes.append(entry)
    edges = []
    for src, dst in sorted(g.directed_edges):
        edges.append({"from": src, "to": dst, "kind": "directed"})
    for a, b in sorted(g.undirected_edges):
        edges.append({"from": a, "to": b, "kind": "undirected"})
    for a, b in sorted(g.bidirected_edges):
        edges.append({"from": a, "to": b, "kind": "bidirected"})
    edges.sort(key=lambda e: (e["from"], e["to"], e["kind"]))
    doc = {"nodes": nodes, "edges": edges}
    if extra:
        doc.update(extra)
    return doc


def graph_from_dict(doc: dict) -> MixedGraph:
    g = MixedGraph()
    for entry in doc["nodes"]:
        kind = NodeKind(entry["kind"])
        g.add_node(NodeRef(entry["id"], kind, entry.get("layer")))
    for edge in doc["edges"]:
        a, b, kind = edge["from"], edge["to"], edge["kind"]
        if kind == "directed":
            g.add_directed(a, b)
        elif kind == "undirected":
            g.add_undirected(a, b)
        elif kind == "bidirected":
            g.add_bidirected(a, b)
        else:
            raise GraphError(f"unknown edge kind {kind!r}")
    return g


def dump_graph_json(g: MixedGraph, extra: dict | None = None) -> str:
    return json.dumps(graph_to_dict(g, extra), indent=2, sort_keys=True) + "\n"


def load_graph_json(text: str) -> MixedGraph:
    return graph_from_dict(json.loads(text))
