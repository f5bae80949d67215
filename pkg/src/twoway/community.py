"""Directed community detection by description-length minimization.

A weight-proportional random walk with uniform teleportation yields
stationary node visit rates and per-edge flows. The quality of a
partition is the expected per-step code length of a two-level Huffman
scheme: an index codebook over cluster entries plus one codebook per
cluster over its members and its exit marker. Teleportation steps are
encoded like any other step (recorded teleportation), so exit flow out
of a cluster combines real edge flow with the teleport and dangling
mass that lands outside the cluster.

The optimizer greedily moves nodes between neighboring clusters,
contracts, and repeats; it never accepts a move that increases the
code length.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .netcore import F, M, R

TELEPORT_DEFAULT = 0.15
_CONVERGENCE = 1e-10
_MAX_POWER_ITERS = 10_000
_PASS_TOLERANCE = 1e-12
_MAX_PASSES = 200


@dataclass
class VisitRates:
    """Stationary walk statistics for one layer.

    ``rates`` sums to 1. ``flow[e]`` is the probability mass moved along
    edge (src[e], dst[e]) in one step, excluding teleportation.
    ``dangling_rate`` holds each node's rate where it has no out-edges,
    else 0.
    """

    rates: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    flow: np.ndarray
    dangling_rate: np.ndarray
    teleport: float


def visit_rates(net, layer, teleport=TELEPORT_DEFAULT):
    """Power-iterate the teleporting walk on one layer to stationarity."""
    if not 0 < teleport < 1:
        raise ValueError(f"teleport rate must lie in (0, 1), got {teleport}")
    n = net.node_count
    if n == 0:
        empty = np.zeros(0)
        return VisitRates(empty, empty.astype(int), empty.astype(int), empty, empty, teleport)
    pairs = net.edge_pairs(layer)
    src = np.array([p[0] for p in pairs], dtype=np.int64)
    dst = np.array([p[1] for p in pairs], dtype=np.int64)
    w = np.array([net.weight(layer, u, v) for (u, v) in pairs], dtype=float)
    strength = np.zeros(n)
    np.add.at(strength, src, w)
    dangling = strength == 0
    if len(src):
        transition = sparse.csr_matrix(
            (w / strength[src], (dst, src)), shape=(n, n)
        )
    else:
        transition = sparse.csr_matrix((n, n))
    p = np.full(n, 1.0 / n)
    uniform = 1.0 / n
    for _ in range(_MAX_POWER_ITERS):
        leaked = p[dangling].sum()
        new = teleport * uniform + (1.0 - teleport) * (transition @ p + leaked * uniform)
        new /= new.sum()
        done = np.abs(new - p).sum() < _CONVERGENCE
        p = new
        if done:
            break
    flow = (1.0 - teleport) * p[src] * w / strength[src] if len(src) else np.zeros(0)
    dangling_rate = np.where(dangling, p, 0.0)
    return VisitRates(p, src, dst, flow, dangling_rate, teleport)


def _plogp(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    mask = x > 0
    out[mask] = x[mask] * np.log2(x[mask])
    return out


def map_equation(vr, assignment):
    """Per-step description length, in bits, of a partition.

    Equals index-codebook usage times its entropy plus, per cluster,
    codebook usage times within-cluster entropy over member visits and
    the exit marker.
    """
    a = np.asarray(assignment, dtype=np.int64)
    n = len(a)
    if n != len(vr.rates):
        raise ValueError("assignment does not cover the node set")
    if n == 0:
        return 0.0
    k = int(a.max()) + 1
    p_mod = np.bincount(a, weights=vr.rates, minlength=k)
    n_mod = np.bincount(a, minlength=k).astype(float)
    tele_mod = np.bincount(
        a,
        weights=vr.teleport * vr.rates + (1.0 - vr.teleport) * vr.dangling_rate,
        minlength=k,
    )
    if len(vr.src):
        crossing = a[vr.src] != a[vr.dst]
        out_flow = np.bincount(
            a[vr.src][crossing], weights=vr.flow[crossing], minlength=k
        )
    else:
        out_flow = np.zeros(k)
    q = tele_mod * (n - n_mod) / n + out_flow
    q_tot = q.sum()
    node_term = _plogp(vr.rates).sum()
    return float(
        _plogp(q_tot) - 2.0 * _plogp(q).sum() + _plogp(q + p_mod).sum() - node_term
    )


class _Level:
    """Aggregated walk statistics over super-nodes at one contraction level."""

    def __init__(self, rate, tele, size, out_edges, in_edges, total_nodes, node_term):
        self.rate = rate
        self.tele = tele          # teleport*rate + (1-teleport)*dangling, additive
        self.size = size          # original node count per super-node
        self.out_edges = out_edges
        self.in_edges = in_edges
        self.total_nodes = total_nodes
        self.node_term = node_term
        self.count = len(rate)


def _leaf_level(vr):
    n = len(vr.rates)
    out_edges = [[] for _ in range(n)]
    in_edges = [[] for _ in range(n)]
    for e in range(len(vr.src)):
        u, v, fl = int(vr.src[e]), int(vr.dst[e]), float(vr.flow[e])
        out_edges[u].append((v, fl))
        in_edges[v].append((u, fl))
    tele = vr.teleport * vr.rates + (1.0 - vr.teleport) * vr.dangling_rate
    return _Level(
        vr.rates.astype(float).copy(),
        tele,
        np.ones(n),
        out_edges,
        in_edges,
        n,
        float(_plogp(vr.rates).sum()),
    )


class _ModuleState:
    """Incrementally maintained partition statistics at one level."""

    def __init__(self, level, labels):
        self.level = level
        m = level.count
        self.labels = np.asarray(labels, dtype=np.int64).copy()
        k = int(self.labels.max()) + 1 if m else 0
        self.p = np.bincount(self.labels, weights=level.rate, minlength=k)
        self.tele = np.bincount(self.labels, weights=level.tele, minlength=k)
        self.size = np.bincount(self.labels, weights=level.size, minlength=k)
        self.out_flow = np.zeros(k)
        for u in range(m):
            lu = self.labels[u]
            for (v, fl) in level.out_edges[u]:
                if self.labels[v] != lu:
                    self.out_flow[lu] += fl
        self.q = self._q_of(self.p, self.tele, self.size, self.out_flow)
        self.q_tot = float(self.q.sum())

    def _q_of(self, p, tele, size, out_flow):
        n = self.level.total_nodes
        return tele * (n - size) / n + out_flow

    def codelength(self):
        return float(
            _plogp(self.q_tot)
            - 2.0 * _plogp(self.q).sum()
            + _plogp(self.q + self.p).sum()
            - self.level.node_term
        )

    def _term(self, q, p):
        return float(-2.0 * _plogp(q) + _plogp(q + p))

    def try_moves(self, node):
        """Best strictly-improving move for one node, or None.

        Candidates are the clusters of in/out neighbors; ties in the
        code-length decrease resolve to the smallest cluster id.
        """
        level = self.level
        a = int(self.labels[node])
        flow_to = {}
        flow_from = {}
        tot_out = 0.0
        tot_in = 0.0
        for (v, fl) in level.out_edges[node]:
            if v == node:
                continue
            mod = int(self.labels[v])
            flow_to[mod] = flow_to.get(mod, 0.0) + fl
            tot_out += fl
        for (v, fl) in level.in_edges[node]:
            if v == node:
                continue
            mod = int(self.labels[v])
            flow_from[mod] = flow_from.get(mod, 0.0) + fl
            tot_in += fl
        candidates = set(flow_to) | set(flow_from)
        candidates.discard(a)
        if not candidates:
            return None

        n = level.total_nodes
        p_nu = level.rate[node]
        tele_nu = level.tele[node]
        size_nu = level.size[node]
        to_a = flow_to.get(a, 0.0)
        from_a = flow_from.get(a, 0.0)

        p_a = self.p[a] - p_nu
        tele_a = self.tele[a] - tele_nu
        size_a = self.size[a] - size_nu
        out_a = self.out_flow[a] - (tot_out - to_a) + from_a
        q_a_new = tele_a * (n - size_a) / n + out_a
        old_a_term = self._term(self.q[a], self.p[a])
        new_a_term = self._term(q_a_new, p_a)

        best = None
        for b in sorted(candidates):
            to_b = flow_to.get(b, 0.0)
            from_b = flow_from.get(b, 0.0)
            p_b = self.p[b] + p_nu
            tele_b = self.tele[b] + tele_nu
            size_b = self.size[b] + size_nu
            out_b = self.out_flow[b] + (tot_out - to_b) - from_b
            q_b_new = tele_b * (n - size_b) / n + out_b
            q_tot_new = self.q_tot - self.q[a] - self.q[b] + q_a_new + q_b_new
            delta = (
                _plogp(q_tot_new)
                - _plogp(self.q_tot)
                + new_a_term
                + self._term(q_b_new, p_b)
                - old_a_term
                - self._term(self.q[b], self.p[b])
            )
            if delta < 0 and (best is None or delta < best[0]):
                best = (
                    float(delta),
                    b,
                    (p_a, tele_a, size_a, out_a, q_a_new),
                    (p_b, tele_b, size_b, out_b, q_b_new),
                    q_tot_new,
                )
        return best

    def apply(self, node, move):
        _, b, state_a, state_b, q_tot_new = move
        a = int(self.labels[node])
        self.p[a], self.tele[a], self.size[a], self.out_flow[a], self.q[a] = state_a
        self.p[b], self.tele[b], self.size[b], self.out_flow[b], self.q[b] = state_b
        self.q_tot = float(q_tot_new)
        self.labels[node] = b


def _sweep_to_convergence(state, rng, max_passes=_MAX_PASSES):
    """Repeated node sweeps in seeded random order until a pass stalls."""
    trace = []
    moved_any = False
    for _ in range(max_passes):
        before = state.codelength()
        moved = False
        for node in rng.permutation(state.level.count):
            move = state.try_moves(int(node))
            if move is not None:
                state.apply(int(node), move)
                moved = True
        after = state.codelength()
        trace.append(after)
        moved_any = moved_any or moved
        if not moved or before - after < _PASS_TOLERANCE:
            break
    return trace, moved_any


def _compact_labels(labels):
    """Relabel to dense ids ordered by smallest member index."""
    order = {}
    out = np.empty_like(labels)
    for i, lab in enumerate(labels):
        key = int(lab)
        if key not in order:
            order[key] = len(order)
        out[i] = order[key]
    return out, len(order)


def _contract(level, labels, k):
    rate = np.bincount(labels, weights=level.rate, minlength=k)
    tele = np.bincount(labels, weights=level.tele, minlength=k)
    size = np.bincount(labels, weights=level.size, minlength=k)
    flows = {}
    for u in range(level.count):
        lu = int(labels[u])
        for (v, fl) in level.out_edges[u]:
            lv = int(labels[v])
            if lu != lv:
                flows[(lu, lv)] = flows.get((lu, lv), 0.0) + fl
    out_edges = [[] for _ in range(k)]
    in_edges = [[] for _ in range(k)]
    for (lu, lv) in sorted(flows):
        fl = flows[(lu, lv)]
        out_edges[lu].append((lv, fl))
        in_edges[lv].append((lu, fl))
    return _Level(rate, tele, size, out_edges, in_edges, level.total_nodes, level.node_term)


def minimize_codelength(vr, seed=0):
    """Greedy two-level map-equation search.

    Returns (labels, trace): dense cluster labels per node ordered by
    smallest member, and the recorded code length after the singleton
    start, after every sweep pass, and after the final refinement pass.
    """
    n = len(vr.rates)
    if n == 0:
        return np.zeros(0, dtype=np.int64), [0.0]
    rng = np.random.default_rng(seed)
    leaf = _leaf_level(vr)
    node_labels = np.arange(n, dtype=np.int64)

    state = _ModuleState(leaf, node_labels)
    trace = [state.codelength()]
    level = leaf
    level_labels = node_labels.copy()
    while True:
        level_best = trace[-1]
        pass_trace, moved = _sweep_to_convergence(state, rng)
        trace.extend(pass_trace)
        if not moved or level_best - trace[-1] < _PASS_TOLERANCE:
            break
        compact, k = _compact_labels(state.labels)
        node_labels = compact[level_labels]
        if k == level.count:
            break
        level = _contract(level, compact, k)
        level_labels = node_labels.copy()
        state = _ModuleState(level, np.arange(k, dtype=np.int64))

    # single refinement pass at node granularity
    compact, _ = _compact_labels(node_labels)
    state = _ModuleState(leaf, compact)
    for node in rng.permutation(n):
        move = state.try_moves(int(node))
        if move is not None:
            state.apply(int(node), move)
    trace.append(state.codelength())
    labels, _ = _compact_labels(state.labels)
    return labels, trace


@dataclass(frozen=True)
class Partition:
    """Dense cluster assignment of every node for one source layer."""

    layer: str
    assignment: tuple
    cluster_count: int

    def __post_init__(self):
        if self.layer not in (M, R):
            raise ValueError(f"partitions cover layer M or R, got {self.layer!r}")
        seen = set(self.assignment)
        if self.cluster_count != len(seen) or (
            seen and seen != set(range(self.cluster_count))
        ):
            raise ValueError("cluster ids must be dense 0..cluster_count-1, all non-empty")


def partition_from_labels(layer, labels):
    """Densely relabel arbitrary labels, ordered by smallest member."""
    compact, k = _compact_labels(np.asarray(labels, dtype=np.int64))
    return Partition(layer, tuple(int(c) for c in compact), k)


def cluster_layer(net, layer, teleport=TELEPORT_DEFAULT, seed=0):
    """Cluster one source layer; returns the partition only."""
    part, _ = cluster_layer_trace(net, layer, teleport, seed)
    return part


def cluster_layer_trace(net, layer, teleport=TELEPORT_DEFAULT, seed=0):
    """Cluster one source layer, also returning the code-length trace."""
    vr = visit_rates(net, layer, teleport)
    labels, trace = minimize_codelength(vr, seed)
    return partition_from_labels(layer, labels), trace


def connected_component_partition(net, layer):
    """Weakly connected components of one layer as a partition."""
    n = net.node_count
    labels = np.full(n, -1, dtype=np.int64)
    adj = [[] for _ in range(n)]
    for (u, v) in net.edge_pairs(layer):
        adj[u].append(v)
        adj[v].append(u)
    next_label = 0
    for start in range(n):
        if labels[start] != -1:
            continue
        stack = [start]
        labels[start] = next_label
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if labels[v] == -1:
                    labels[v] = next_label
                    stack.append(v)
        next_label += 1
    return Partition(layer, tuple(int(c) for c in labels), next_label)


def save_partition(partition, path, config=None):
    payload = {
        "layer": partition.layer,
        "cluster_count": partition.cluster_count,
        "assignment": list(partition.assignment),
    }
    if config is not None:
        payload["config"] = config
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_partition(path):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        layer = raw["layer"]
        count = raw["cluster_count"]
        assignment = raw["assignment"]
    except (TypeError, KeyError) as exc:
        raise ValueError(f"{path}: not a partition file") from exc
    part = Partition(layer, tuple(int(c) for c in assignment), int(count))
    return part


class AugmentedNetwork:
    """A network plus one cluster node per community of each source layer.

    Membership edges are implicit: ``cluster_of`` walks node -> cluster,
    ``cluster_members`` walks cluster -> nodes. Plain relation queries
    delegate to the base network (or masked view), so an augmentation
    can wrap a fold's view while reusing partitions computed on the
    full network.
    """

    def __init__(self, base, partition_r, partition_m):
        for part, layer in ((partition_r, R), (partition_m, M)):
            if part.layer != layer:
                raise ValueError(f"expected a partition of layer {layer}")
            if len(part.assignment) != base.node_count:
                raise ValueError(
                    f"partition of layer {layer} covers {len(part.assignment)} nodes, "
                    f"network has {base.node_count}"
                )
        self.base = base
        self.partitions = {R: partition_r, M: partition_m}
        self.members = {}
        for layer, part in self.partitions.items():
            members = [[] for _ in range(part.cluster_count)]
            for node, cid in enumerate(part.assignment):
                members[cid].append(node)
            self.members[layer] = tuple(tuple(m) for m in members)

    @property
    def node_count(self):
        return self.base.node_count

    def cluster_of(self, layer, node):
        return self.partitions[layer].assignment[node]

    def cluster_members(self, layer, cid):
        return self.members[layer][cid]

    def neighbors(self, node, step):
        return self.base.neighbors(node, step)

    def f_out(self, node, sign=None):
        return self.base.f_out(node, sign)

    def f_in(self, node, sign=None):
        return self.base.f_in(node, sign)

    def f_sign(self, u, v):
        return self.base.f_sign(u, v)


def augment(base, partition_r, partition_m):
    """Attach cluster nodes for both source layers to a network or view."""
    return AugmentedNetwork(base, partition_r, partition_m)
