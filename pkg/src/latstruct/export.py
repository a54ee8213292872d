"""Conversion of a discriminative graph into a feed-forward architecture.

Each latent becomes a fully connected ReLU layer whose inputs are the
layers of its graph parents (concatenated when there are several); each
gather group becomes an input-selection layer; the class node becomes the
softmax head.  Serialization is canonical: exporting the same graph twice
yields byte-identical JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import GraphError
from .graphs import NodeKind
from .inverse import DiscriminativeGraph


@dataclass(frozen=True)
class GatherLayer:
    id: str
    indices: tuple[int, ...]


@dataclass(frozen=True)
class DenseLayer:
    id: str
    width: int
    inputs: tuple[str, ...]
    layer_order: int
    activation: str = "relu"


@dataclass(frozen=True)
class SoftmaxLayer:
    id: str
    classes: int
    inputs: tuple[str, ...]


Layer = GatherLayer | DenseLayer | SoftmaxLayer


@dataclass
class ArchitectureSpec:
    input_dim: int
    layers: list[Layer]

    def layer(self, layer_id: str) -> Layer:
        for layer in self.layers:
            if layer.id == layer_id:
                return layer
        raise GraphError(f"no layer {layer_id!r}")

    def to_dict(self) -> dict:
        out = []
        for layer in self.layers:
            if isinstance(layer, GatherLayer):
                out.append({"id": layer.id, "kind": "gather", "indices": list(layer.indices)})
            elif isinstance(layer, DenseLayer):
                out.append(
                    {
                        "id": layer.id,
                        "kind": "dense",
                        "width": layer.width,
                        "activation": layer.activation,
                        "inputs": list(layer.inputs),
                        "layer_order": layer.layer_order,
                    }
                )
            else:
                out.append(
                    {
                        "id": layer.id,
                        "kind": "softmax",
                        "classes": layer.classes,
                        "inputs": list(layer.inputs),
                    }
                )
        return {"input_dim": self.input_dim, "layers": out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "ArchitectureSpec":
        layers: list[Layer] = []
        for entry in doc["layers"]:
            kind = entry["kind"]
            if kind == "gather":
                layers.append(GatherLayer(entry["id"], tuple(entry["indices"])))
            elif kind == "dense":
                layers.append(
                    DenseLayer(
                        entry["id"],
                        entry["width"],
                        tuple(entry["inputs"]),
                        entry["layer_order"],
                        entry.get("activation", "relu"),
                    )
                )
            elif kind == "softmax":
                layers.append(SoftmaxLayer(entry["id"], entry["classes"], tuple(entry["inputs"])))
            else:
                raise GraphError(f"unknown layer kind {kind!r}")
        return cls(doc["input_dim"], layers)

    @classmethod
    def from_json(cls, text: str) -> "ArchitectureSpec":
        return cls.from_dict(json.loads(text))


@dataclass
class ExportConfig:
    neurons_per_layer: int
    num_classes: int
    input_names: list[str] | None = None

    def __post_init__(self):
        if self.neurons_per_layer < 1:
            raise GraphError("neurons_per_layer must be positive")
        if self.num_classes < 1:
            raise GraphError("num_classes must be positive")


def export_architecture(
    disc: DiscriminativeGraph,
    gather_groups: list[frozenset[str]] | None = None,
    cfg: ExportConfig | None = None,
) -> ArchitectureSpec:
    """Build the layer DAG mirroring the discriminative graph.

    Input indices follow ``cfg.input_names`` (defaulting to the observed
    node ids in ascending order).  Merges concatenate parent outputs;
    splits are just multiple consumers of one layer.
    """
    if cfg is None:
        raise GraphError("an ExportConfig is required")
    g = disc.graph
    observed = g.nodes_of_kind(NodeKind.OBSERVED)
    if gather_groups is None:
        gather_groups = disc.gather_groups
    covered = set().union(*gather_groups) if gather_groups else set()
    if covered != set(observed) or sum(len(gr) for gr in gather_groups) != len(observed):
        raise GraphError("gather groups do not partition the observed nodes")

    input_names = cfg.input_names or observed
    if sorted(input_names) != sorted(observed):
        raise GraphError("input_names must name exactly the observed nodes")
    index_of = {name: i for i, name in enumerate(input_names)}

    groups = sorted(gather_groups, key=lambda gr: min(index_of[m] for m in gr))
    gather_of: dict[str, str] = {}
    gathers: list[GatherLayer] = []
    for pos, group in enumerate(groups):
        gid = f"gather_{pos}"
        indices = tuple(sorted(index_of[m] for m in group))
        gathers.append(GatherLayer(gid, indices))
        for member in group:
            gather_of[member] = gid

    def input_layers(parents: set[str]) -> tuple[str, ...]:
        gather_ids = sorted({gather_of[p] for p in parents if p in gather_of})
        dense_ids = sorted(p for p in parents if p not in gather_of)
        return tuple(gather_ids + dense_ids)

    denses: list[DenseLayer] = []
    for h in g.nodes_of_kind(NodeKind.LATENT):
        parents = g.parents(h)
        if not parents:
            raise GraphError(f"latent {h} has no parents in the discriminative graph")
        denses.append(
            DenseLayer(
                h,
                cfg.neurons_per_layer,
                input_layers(parents),
                g.node(h).layer,
            )
        )

    head = SoftmaxLayer("softmax", cfg.num_classes, input_layers(g.parents(disc.y_id)))
    return ArchitectureSpec(len(input_names), [*gathers, *denses, head])


@dataclass
class ValidationReport:
    ok: bool
    failures: list[str] = field(default_factory=list)


def validate_architecture(spec: ArchitectureSpec) -> ValidationReport:
    """Check every structural invariant; failures are data, not exceptions."""
    failures: list[str] = []
    ids = [layer.id for layer in spec.layers]
    if len(set(ids)) != len(ids):
        failures.append("duplicate layer ids")
    by_id = {layer.id: layer for layer in spec.layers}

    softmaxes = [l for l in spec.layers if isinstance(l, SoftmaxLayer)]
    denses = [l for l in spec.layers if isinstance(l, DenseLayer)]
    gathers = [l for l in spec.layers if isinstance(l, GatherLayer)]
    if len(softmaxes) != 1:
        failures.append(f"expected exactly one softmax layer, found {len(softmaxes)}")

    seen_indices: set[int] = set()
    for gl in gathers:
        dup = seen_indices & set(gl.indices)
        if dup:
            failures.append(f"gather {gl.id}: input indices {sorted(dup)} already gathered")
        seen_indices |= set(gl.indices)
    if seen_indices != set(range(spec.input_dim)):
        failures.append("gather indices do not cover the input exactly once")

    widths = {dl.width for dl in denses}
    if any(w <= 0 for w in widths):
        failures.append("dense width must be positive")
    if len(widths) > 1:
        failures.append(f"dense widths differ: {sorted(widths)}")

    # reference resolution + acyclicity via DFS
    state: dict[str, int] = {}
    cyclic = False

    def visit(lid: str) -> None:
        nonlocal cyclic
        if state.get(lid) == 1:
            cyclic = True
            return
        if state.get(lid) == 2:
            return
        state[lid] = 1
        layer = by_id.get(lid)
        for ref in getattr(layer, "inputs", ()):
            if ref not in by_id:
                failures.append(f"layer {lid}: unknown input {ref!r}")
            else:
                visit(ref)
        state[lid] = 2

    for layer in spec.layers:
        visit(layer.id)
    if cyclic:
        failures.append("layer references form a cycle")

    if softmaxes and not cyclic:
        # every dense must reach the softmax head
        consumers: dict[str, set[str]] = {lid: set() for lid in by_id}
        for layer in spec.layers:
            for ref in getattr(layer, "inputs", ()):
                if ref in consumers:
                    consumers[ref].add(layer.id)
        head = softmaxes[0].id
        for dl in denses:
            frontier = [dl.id]
            seen = {dl.id}
            reached = False
            while frontier:
                cur = frontier.pop()
                if cur == head:
                    reached = True
                    break
                for nxt in consumers[cur]:
                    if nxt not in seen:
                        seen.add(nxt)
                        frontier.append(nxt)
            if not reached:
                failures.append(f"dense layer {dl.id} cannot reach the softmax head")

    return ValidationReport(not failures, failures)


def layer_output_dim(spec: ArchitectureSpec, layer_id: str) -> int:
    layer = spec.layer(layer_id)
    if isinstance(layer, GatherLayer):
        return len(layer.indices)
    if isinstance(layer, DenseLayer):
        return layer.width
    return layer.classes


def parameter_count(spec: ArchitectureSpec) -> int:
    """Closed-form trainable parameter count of the described network."""
    total = 0
    for layer in spec.layers:
        if isinstance(layer, DenseLayer):
            fan_in = sum(layer_output_dim(spec, ref) for ref in layer.inputs)
            total += layer.width * (fan_in + 1)
        elif isinstance(layer, SoftmaxLayer):
            fan_in = sum(layer_output_dim(spec, ref) for ref in layer.inputs)
            total += layer.classes * (fan_in + 1)
    return total
