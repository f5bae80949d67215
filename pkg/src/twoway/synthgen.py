"""Seeded synthetic three-layer networks with planted structure.

The message and regular-match layers are directed planted-partition
graphs; the friendly layer is a fixed number of distinct ordered pairs
whose signs follow a logistic model over shared regular-match cluster
membership and embeddedness at insertion time.

One PCG64 stream drives everything, in this order: regular-match
memberships, correlation coins, message memberships, R block edges,
M block edges, friendly pairs, one uniform per friendly edge for its
sign. Friendly pairs are uniform distinct ordered pairs, unless
``f_hub_bias > 0``: then a popularity permutation is drawn first and
endpoints follow a Zipf-like weight, concentrating partners on a few
popular nodes. Identical configs therefore reproduce byte-identical
networks and ground truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .netcore import F, M, R, SignedEdge, build_network


@dataclass(frozen=True)
class GenConfig:
    """Full recipe for one synthetic network."""

    node_count: int
    clusters_r: int
    clusters_m: int
    p_in_r: float
    p_out_r: float
    p_in_m: float
    p_out_m: float
    membership_correlation: float
    f_edge_count: int
    alpha: float
    beta_cluster: float
    beta_embed: float
    seed: int
    f_hub_bias: float = 0.0

    def validate(self):
        if self.node_count <= 0:
            raise ValueError("node_count must be positive")
        if self.clusters_r <= 0 or self.clusters_m <= 0:
            raise ValueError("cluster counts must be positive")
        for p_out, p_in, layer in (
            (self.p_out_r, self.p_in_r, R),
            (self.p_out_m, self.p_in_m, M),
        ):
            if not 0.0 <= p_out <= p_in <= 1.0:
                raise ValueError(
                    f"layer {layer}: need 0 <= p_out <= p_in <= 1, "
                    f"got p_out={p_out}, p_in={p_in}"
                )
        if not 0.0 <= self.membership_correlation <= 1.0:
            raise ValueError("membership_correlation must lie in [0, 1]")
        if self.f_hub_bias < 0.0:
            raise ValueError("f_hub_bias must be non-negative")
        capacity = self.node_count * (self.node_count - 1)
        if not 0 <= self.f_edge_count <= capacity:
            raise ValueError(
                f"f_edge_count {self.f_edge_count} exceeds the {capacity} "
                "distinct ordered pairs available"
            )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, raw):
        return cls(**raw)

    @classmethod
    def from_json_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class FEdgeRecord:
    """Ground truth for one friendly edge at the moment it was drawn."""

    src: int
    dst: int
    same_cluster: bool
    embeddedness: int
    p_positive: float
    sign: int


@dataclass(frozen=True)
class GroundTruth:
    memberships_r: tuple
    memberships_m: tuple
    f_records: tuple

    def to_dict(self):
        return {
            "memberships": {
                "R": list(self.memberships_r),
                "M": list(self.memberships_m),
            },
            "f_edges": [asdict(rec) for rec in self.f_records],
        }


def _distinct_ints(rng, total, count):
    """``count`` distinct ints below ``total``, in draw order."""
    if count == 0:
        return []
    if count > total:
        raise ValueError(f"cannot draw {count} distinct values below {total}")
    if count * 2 >= total:
        return [int(t) for t in rng.permutation(total)[:count]]
    picked = []
    seen = set()
    while len(picked) < count:
        need = count - len(picked)
        batch = rng.integers(0, total, size=need + need // 8 + 16)
        for t in batch:
            t = int(t)
            if t not in seen:
                seen.add(t)
                picked.append(t)
                if len(picked) == count:
                    break
    return picked


def _pair_from_index(t, n):
    """Bijection from [0, n*(n-1)) onto ordered pairs without the diagonal."""
    i, j = divmod(t, n - 1)
    if j >= i:
        j += 1
    return i, j


def _planted_edges(rng, members, p_in, p_out):
    """Directed planted-partition edges over the given cluster member arrays."""
    edges = []
    k = len(members)
    for ci in range(k):
        a = members[ci]
        na = len(a)
        for cj in range(k):
            b = members[cj]
            nb = len(b)
            diagonal = ci == cj
            total = na * (na - 1) if diagonal else na * nb
            p = p_in if diagonal else p_out
            if total == 0 or p == 0.0:
                continue
            count = int(rng.binomial(total, p))
            for t in _distinct_ints(rng, total, count):
                if diagonal:
                    i, j = _pair_from_index(t, na)
                    edges.append((int(a[i]), int(a[j])))
                else:
                    edges.append((int(a[t // nb]), int(b[t % nb])))
    edges.sort()
    return edges


def _sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def _biased_pairs(rng, n, count, bias):
    """Distinct ordered pairs with Zipf-weighted endpoints, in draw order.

    A fresh permutation assigns each node a popularity rank so that ids
    carry no meaning; both endpoints use the same weights.
    """
    rank = rng.permutation(n)
    weights = (1.0 + rank.astype(float)) ** -bias
    weights /= weights.sum()
    picked = []
    seen = set()
    while len(picked) < count:
        need = count - len(picked)
        draws = rng.choice(n, size=2 * (need + need // 4 + 16), p=weights)
        for u, v in zip(draws[0::2], draws[1::2]):
            u, v = int(u), int(v)
            if u == v or (u, v) in seen:
                continue
            seen.add((u, v))
            picked.append((u, v))
            if len(picked) == count:
                break
    return picked


def generate(config):
    """Draw one network and its ground truth from a config."""
    config.validate()
    n = config.node_count
    rng = np.random.default_rng(config.seed)

    mem_r = rng.integers(0, config.clusters_r, size=n)
    coins = rng.random(n) < config.membership_correlation
    mem_m_free = rng.integers(0, config.clusters_m, size=n)
    mem_m = np.where(coins, mem_r % config.clusters_m, mem_m_free)

    members_r = [np.flatnonzero(mem_r == c) for c in range(config.clusters_r)]
    members_m = [np.flatnonzero(mem_m == c) for c in range(config.clusters_m)]
    r_pairs = _planted_edges(rng, members_r, config.p_in_r, config.p_out_r)
    m_pairs = _planted_edges(rng, members_m, config.p_in_m, config.p_out_m)

    if config.f_hub_bias > 0.0:
        f_pairs = _biased_pairs(rng, n, config.f_edge_count, config.f_hub_bias)
    else:
        f_indices = _distinct_ints(rng, n * (n - 1), config.f_edge_count)
        f_pairs = [_pair_from_index(t, n) for t in f_indices]
    sign_coins = rng.random(config.f_edge_count)

    pos_partners = [set() for _ in range(n)]
    records = []
    f_edges = []
    for (u, v), coin in zip(f_pairs, sign_coins):
        same = bool(mem_r[u] == mem_r[v])
        embed = len(pos_partners[u] & pos_partners[v])
        z = config.alpha + config.beta_cluster * same + config.beta_embed * embed
        p_pos = _sigmoid(z)
        sign = 1 if coin < p_pos else -1
        if sign == 1:
            pos_partners[u].add(v)
            pos_partners[v].add(u)
        records.append(FEdgeRecord(u, v, same, embed, p_pos, sign))
        f_edges.append(SignedEdge(u, v, F, sign))

    f_edges.sort(key=lambda e: (e.src, e.dst))
    edges = {
        F: f_edges,
        M: [SignedEdge(u, v, M) for (u, v) in m_pairs],
        R: [SignedEdge(u, v, R) for (u, v) in r_pairs],
    }
    net = build_network(edges, n)
    truth = GroundTruth(
        tuple(int(c) for c in mem_r),
        tuple(int(c) for c in mem_m),
        tuple(records),
    )
    return net, truth


def _planted_probs(node_count, clusters, target_edges, ratio):
    """Within/between probabilities hitting a target edge count in expectation.

    Memberships are uniform, so a distinct ordered pair is within-cluster
    with probability 1/clusters; ``ratio`` fixes p_in/p_out.
    """
    pairs = node_count * (node_count - 1)
    within = pairs / clusters
    between = pairs - within
    p_in = target_edges / (within + between / ratio)
    return p_in, p_in / ratio


# Edge-count targets per preset; M and R scale off the friendly count
# by the observed ratios 1 : 7.42 : 7.93.
PRESET_TARGETS = {
    "desk": {"F": 8000, "M": 59344, "R": 63463},
    "paper-scale": {"F": 182598, "M": 1354606, "R": 1448620},
}

_PRESET_SHAPES = {
    "desk": {
        "node_count": 2000,
        "clusters": 2,
        "ratio": 60.0,
        "rho": 0.95,
        "hub_bias": 0.8,
    },
    "paper-scale": {
        "node_count": 44124,
        "clusters": 12,
        "ratio": 30.0,
        "rho": 0.8,
        "hub_bias": 0.0,
    },
}

_PRESET_SIGN_MODEL = {
    "desk": {"alpha": -1.35, "beta_cluster": 4.5, "beta_embed": 0.8},
    "paper-scale": {"alpha": -1.0, "beta_cluster": 2.0, "beta_embed": 0.8},
}


def preset(name, seed=7):
    """A ready-made config; ``seed`` overrides the stream seed only."""
    if name not in PRESET_TARGETS:
        raise ValueError(f"unknown preset {name!r}, have {sorted(PRESET_TARGETS)}")
    shape = _PRESET_SHAPES[name]
    targets = PRESET_TARGETS[name]
    sign = _PRESET_SIGN_MODEL[name]
    n, k, ratio = shape["node_count"], shape["clusters"], shape["ratio"]
    p_in_r, p_out_r = _planted_probs(n, k, targets["R"], ratio)
    p_in_m, p_out_m = _planted_probs(n, k, targets["M"], ratio)
    return GenConfig(
        node_count=n,
        clusters_r=k,
        clusters_m=k,
        p_in_r=p_in_r,
        p_out_r=p_out_r,
        p_in_m=p_in_m,
        p_out_m=p_out_m,
        membership_correlation=shape["rho"],
        f_edge_count=targets["F"],
        alpha=sign["alpha"],
        beta_cluster=sign["beta_cluster"],
        beta_embed=sign["beta_embed"],
        seed=seed,
        f_hub_bias=shape["hub_bias"],
    )
