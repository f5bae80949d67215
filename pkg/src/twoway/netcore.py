"""Data model for three-layer directed user networks.

All layers share one dense node universe 0..node_count-1. The friendly
layer F carries a sign (+1 accepted, -1 declined) on every edge; the
message layer M and the regular-match layer R are unsigned. Layers are
self-loop free. Multiplicities are merged into integer edge weights at
parse time, so each ordered pair appears at most once per layer.

Networks are immutable once built. Hiding friendly edges (for leak-free
feature extraction) goes through :class:`MaskedView`, an overlay that
never copies the base adjacency.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

F = "F"
M = "M"
R = "R"
LAYERS = (F, M, R)

POSITIVE = 1
NEGATIVE = -1
SIGNS = (POSITIVE, NEGATIVE)

_SIGN_TOKENS = {"+1": POSITIVE, "-1": NEGATIVE}


class ParseError(ValueError):
    """Malformed edge-list input; the message carries the line number."""


class SignConflictError(ValueError):
    """The same ordered friendly pair appeared with both signs."""


@dataclass(frozen=True)
class RelationStep:
    """One hop of a meta-path: a layer, a direction, and (for F) a sign.

    ``inverse=True`` walks against edge direction. ``sign`` is required
    exactly for friendly steps. ``bridge`` marks a hop onto or off a
    cluster node; bridge hops are resolved by the cluster augmentation,
    not by the plain network.
    """

    layer: str
    inverse: bool = False
    sign: int | None = None
    bridge: bool = False

    def __post_init__(self):
        if self.bridge:
            return
        if self.layer not in LAYERS:
            raise ValueError(f"unknown layer {self.layer!r}")
        if (self.sign is not None) != (self.layer == F):
            raise ValueError("a sign filter is required exactly for F steps")
        if self.sign is not None and self.sign not in SIGNS:
            raise ValueError(f"sign must be +1 or -1, got {self.sign!r}")


@dataclass(frozen=True)
class SignedEdge:
    src: int
    dst: int
    layer: str
    sign: int | None = None
    weight: int = 1


def parse_layer_file(lines, layer):
    """Parse an edge list, one edge per line, merging duplicate pairs.

    M and R lines hold ``src dst``; F lines hold ``src dst sign`` with
    sign token ``+1`` or ``-1``. Fields are split on runs of whitespace,
    lines whose first non-blank character is ``#`` are comments.
    Duplicates merge by summing weight; a friendly pair repeated with
    the opposite sign raises :class:`SignConflictError`.
    """
    if layer not in LAYERS:
        raise ValueError(f"unknown layer {layer!r}")
    arity = 3 if layer == F else 2
    merged: dict[tuple[int, int], list] = {}
    order: list[tuple[int, int]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != arity:
            raise ParseError(
                f"line {lineno}: expected {arity} fields, got {len(fields)}"
            )
        try:
            src, dst = int(fields[0]), int(fields[1])
        except ValueError:
            raise ParseError(f"line {lineno}: node ids must be integers") from None
        if src < 0 or dst < 0:
            raise ParseError(f"line {lineno}: node ids must be non-negative")
        if src == dst:
            raise ParseError(f"line {lineno}: self-loop on node {src} not allowed")
        sign = None
        if layer == F:
            sign = _SIGN_TOKENS.get(fields[2])
            if sign is None:
                raise ParseError(f"line {lineno}: bad sign token {fields[2]!r}")
        key = (src, dst)
        entry = merged.get(key)
        if entry is None:
            merged[key] = [sign, 1]
            order.append(key)
        else:
            if layer == F and entry[0] != sign:
                raise SignConflictError(
                    f"conflicting signs for friendly pair {key}"
                )
            entry[1] += 1
    return [
        SignedEdge(s, d, layer, merged[(s, d)][0], merged[(s, d)][1])
        for (s, d) in order
    ]


class MultilayerNetwork:
    """Immutable three-layer adjacency with per-sign indexes on F.

    Neighbor queries return internal sets; callers must treat them as
    read-only.
    """

    def __init__(self, edges_by_layer, node_count):
        if node_count < 0:
            raise ValueError("node_count must be non-negative")
        self.node_count = node_count
        self._out = {layer: [set() for _ in range(node_count)] for layer in LAYERS}
        self._in = {layer: [set() for _ in range(node_count)] for layer in LAYERS}
        self._out_sign = {s: [set() for _ in range(node_count)] for s in SIGNS}
        self._in_sign = {s: [set() for _ in range(node_count)] for s in SIGNS}
        self._weights = {layer: {} for layer in LAYERS}
        self._f_signs: dict[tuple[int, int], int] = {}
        for layer in LAYERS:
            for edge in edges_by_layer.get(layer, ()):
                self._add(layer, edge)
        self.edge_counts = {layer: len(self._weights[layer]) for layer in LAYERS}

    def _add(self, layer, edge):
        u, v = edge.src, edge.dst
        if edge.layer != layer:
            raise ValueError(f"edge {edge} filed under layer {layer!r}")
        if not (0 <= u < self.node_count and 0 <= v < self.node_count):
            raise ValueError(
                f"edge ({u}, {v}) out of range for node_count {self.node_count}"
            )
        if u == v:
            raise ValueError(f"self-loop on node {u} not allowed")
        key = (u, v)
        weights = self._weights[layer]
        if key in weights:
            if layer == F and self._f_signs[key] != edge.sign:
                raise SignConflictError(f"conflicting signs for friendly pair {key}")
            weights[key] += edge.weight
            return
        weights[key] = edge.weight
        self._out[layer][u].add(v)
        self._in[layer][v].add(u)
        if layer == F:
            if edge.sign not in SIGNS:
                raise ValueError(f"friendly edge {key} needs a +1/-1 sign")
            self._f_signs[key] = edge.sign
            self._out_sign[edge.sign][u].add(v)
            self._in_sign[edge.sign][v].add(u)

    def _check_node(self, node):
        if not (0 <= node < self.node_count):
            raise ValueError(f"node {node} out of range")

    def neighbors(self, node, step):
        """Successor set of ``node`` under one meta-path step."""
        if step.bridge:
            raise ValueError("bridge steps are resolved by the cluster augmentation")
        self._check_node(node)
        if step.layer == F:
            table = self._in_sign if step.inverse else self._out_sign
            return table[step.sign][node]
        table = self._in if step.inverse else self._out
        return table[step.layer][node]

    def f_out(self, node, sign=None):
        self._check_node(node)
        if sign is None:
            return self._out[F][node]
        return self._out_sign[sign][node]

    def f_in(self, node, sign=None):
        self._check_node(node)
        if sign is None:
            return self._in[F][node]
        return self._in_sign[sign][node]

    def f_sign(self, u, v):
        """Sign of the friendly edge (u, v), or None if absent."""
        return self._f_signs.get((u, v))

    def has_edge(self, layer, u, v):
        return (u, v) in self._weights[layer]

    def weight(self, layer, u, v):
        return self._weights[layer].get((u, v), 0)

    def edge_pairs(self, layer):
        """Ordered pairs of ``layer``, sorted for deterministic iteration."""
        return sorted(self._weights[layer])

    def f_edges(self):
        """Sorted list of (src, dst, sign) over visible friendly edges."""
        return [(u, v, self._f_signs[(u, v)]) for (u, v) in sorted(self._weights[F])]


def build_network(edges_by_layer, node_count):
    """Assemble a network from per-layer edge lists, merging duplicates."""
    return MultilayerNetwork(edges_by_layer, node_count)


class EdgeNotFoundError(KeyError):
    """A pair requested for masking is not a friendly edge."""


class MaskedView:
    """Read-only overlay hiding a set of friendly edges.

    Hidden edges vanish from every query: neighbor sets, signs, degrees,
    edge listings and counts. M and R queries pass through to the base
    network unchanged.
    """

    def __init__(self, base, hidden):
        hidden = frozenset(hidden)
        self._base = base
        self.hidden = hidden
        self._hidden_out = {POSITIVE: {}, NEGATIVE: {}, None: {}}
        self._hidden_in = {POSITIVE: {}, NEGATIVE: {}, None: {}}
        for (u, v) in hidden:
            sign = base.f_sign(u, v)
            if sign is None:
                raise EdgeNotFoundError(f"({u}, {v}) is not a friendly edge")
            for key in (sign, None):
                self._hidden_out[key].setdefault(u, set()).add(v)
                self._hidden_in[key].setdefault(v, set()).add(u)

    @property
    def node_count(self):
        return self._base.node_count

    @property
    def edge_counts(self):
        counts = dict(self._base.edge_counts)
        counts[F] -= len(self.hidden)
        return counts

    def neighbors(self, node, step):
        if step.bridge:
            raise ValueError("bridge steps are resolved by the cluster augmentation")
        if step.layer != F:
            return self._base.neighbors(node, step)
        if step.inverse:
            return self.f_in(node, step.sign)
        return self.f_out(node, step.sign)

    def _subtract(self, base_set, hides):
        if not hides or not base_set:
            return base_set
        return base_set - hides

    def f_out(self, node, sign=None):
        return self._subtract(
            self._base.f_out(node, sign), self._hidden_out[sign].get(node)
        )

    def f_in(self, node, sign=None):
        return self._subtract(
            self._base.f_in(node, sign), self._hidden_in[sign].get(node)
        )

    def f_sign(self, u, v):
        if (u, v) in self.hidden:
            return None
        return self._base.f_sign(u, v)

    def has_edge(self, layer, u, v):
        if layer == F and (u, v) in self.hidden:
            return False
        return self._base.has_edge(layer, u, v)

    def weight(self, layer, u, v):
        if layer == F and (u, v) in self.hidden:
            return 0
        return self._base.weight(layer, u, v)

    def edge_pairs(self, layer):
        pairs = self._base.edge_pairs(layer)
        if layer != F:
            return pairs
        return [p for p in pairs if p not in self.hidden]

    def f_edges(self):
        return [e for e in self._base.f_edges() if (e[0], e[1]) not in self.hidden]


def mask_f_edges(net, hidden):
    """Hide the given ordered friendly pairs behind a :class:`MaskedView`."""
    return MaskedView(net, hidden)


def embeddedness(net, u, v):
    """Number of shared positive friendly partners of u and v.

    A partner counts regardless of edge direction; only positive edges
    form partnerships. u and v themselves never count, so the presence
    or absence of a friendly edge between them has no effect.
    """
    if u == v:
        raise ValueError("embeddedness needs two distinct nodes")
    nu = net.f_out(u, POSITIVE) | net.f_in(u, POSITIVE)
    nv = net.f_out(v, POSITIVE) | net.f_in(v, POSITIVE)
    common = nu & nv
    common.discard(u)
    common.discard(v)
    return len(common)


def degree_vector(net, layer, direction):
    """Per-node degree array for one layer and direction ('in' or 'out')."""
    if direction not in ("in", "out"):
        raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")
    out = direction == "out"
    degs = []
    for node in range(net.node_count):
        if layer == F:
            nbrs = net.f_out(node) if out else net.f_in(node)
        else:
            step = RelationStep(layer, inverse=not out)
            nbrs = net.neighbors(node, step)
        degs.append(len(nbrs))
    return degs


def read_manifest(path):
    """Load and validate a manifest, resolving layer paths relative to it."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: manifest must be a JSON object")
    node_count = raw.get("node_count")
    if not isinstance(node_count, int) or node_count < 0:
        raise ParseError(f"{path}: node_count must be a non-negative integer")
    layers = raw.get("layers")
    if not isinstance(layers, dict) or set(layers) != set(LAYERS):
        raise ParseError(f"{path}: layers must map exactly F, M and R to paths")
    base_dir = os.path.dirname(os.path.abspath(path))
    resolved = {
        layer: os.path.join(base_dir, layers[layer]) for layer in LAYERS
    }
    id_map = raw.get("id_map")
    manifest = {"node_count": node_count, "layers": resolved}
    if id_map is not None:
        manifest["id_map"] = os.path.join(base_dir, id_map)
    return manifest


def load_network(manifest_path):
    """Build a network from the layer files named by a manifest."""
    manifest = read_manifest(manifest_path)
    edges = {}
    for layer in LAYERS:
        with open(manifest["layers"][layer], encoding="utf-8") as fh:
            edges[layer] = parse_layer_file(fh, layer)
    return build_network(edges, manifest["node_count"])


def load_id_map(manifest_path):
    """Optional external-id mapping: lines of ``string_id node_id``."""
    manifest = read_manifest(manifest_path)
    path = manifest.get("id_map")
    if path is None:
        return None
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 2:
                raise ParseError(f"line {lineno}: expected 'string_id node_id'")
            try:
                mapping[fields[0]] = int(fields[1])
            except ValueError:
                raise ParseError(f"line {lineno}: node id must be an integer") from None
    return mapping


def write_layer_file(path, edges, comment=None):
    """Write one layer's edges, repeating merged weights as duplicate lines."""
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for edge in edges:
            suffix = ""
            if edge.layer == F:
                suffix = " +1" if edge.sign == POSITIVE else " -1"
            for _ in range(edge.weight):
                fh.write(f"{edge.src} {edge.dst}{suffix}\n")
