"""Meta-path templates and exact path-instance counting.

A template starts at the initiator with one hop over R, R^-1, M or M^-1
and ends at the recipient with one signed friendly hop, forward
(F+(fwd), F-(fwd)) or inverse (F+(inv), F-(inv)). Plain templates walk
straight from the intermediate node to the recipient; cluster-bridged
templates detour through the intermediate node's cluster (of the first
hop's layer) and accept any member of that cluster as the second
intermediate, the original node included.

Canonical column order: the four first hops (R, R-1, M, M-1) each
crossed with the four final hops, plain templates before bridged ones.

The labelled pair's own friendly edge never contributes to a count:
queries for a pair whose edge is still visible skip it, and fold
evaluation additionally hides test edges behind a masked view.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .netcore import F, M, R, RelationStep


@dataclass(frozen=True)
class MetaPathSpec:
    """One template: a first hop, an optional cluster bridge, a final hop."""

    name: str
    first: RelationStep
    bridged: bool
    final: RelationStep


_FIRST_STEPS = (
    ("R", RelationStep(R)),
    ("R-1", RelationStep(R, inverse=True)),
    ("M", RelationStep(M)),
    ("M-1", RelationStep(M, inverse=True)),
)
_FINAL_STEPS = (
    ("F+(fwd)", RelationStep(F, sign=1)),
    ("F-(fwd)", RelationStep(F, sign=-1)),
    ("F+(inv)", RelationStep(F, inverse=True, sign=1)),
    ("F-(inv)", RelationStep(F, inverse=True, sign=-1)),
)


def enumerate_node_based():
    """The 16 plain templates in canonical order."""
    return tuple(
        MetaPathSpec(f"{fn}.{gn}", fstep, False, gstep)
        for (fn, fstep) in _FIRST_STEPS
        for (gn, gstep) in _FINAL_STEPS
    )


def enumerate_cluster_based():
    """The 16 cluster-bridged templates in canonical order."""
    return tuple(
        MetaPathSpec(f"{fn}.B.B-1.{gn}", fstep, True, gstep)
        for (fn, fstep) in _FIRST_STEPS
        for (gn, gstep) in _FINAL_STEPS
    )


NB_SPECS = enumerate_node_based()
CB_SPECS = enumerate_cluster_based()
ALL_SPECS = NB_SPECS + CB_SPECS

MODE_SPECS = {"nb": NB_SPECS, "cb": CB_SPECS, "both": ALL_SPECS}
MODE_COLUMNS = {mode: [s.name for s in specs] for mode, specs in MODE_SPECS.items()}


@dataclass(frozen=True)
class FeatureRow:
    """Counts for one ordered pair, aligned with a mode's column list."""

    initiator: int
    recipient: int
    counts: tuple
    label: int | None = None


def _final_candidates(net, recipient, final):
    """Nodes whose friendly relation to the recipient matches the last hop."""
    if final.inverse:
        return net.f_out(recipient, final.sign)
    return net.f_in(recipient, final.sign)


def count_paths(net, spec, initiator, recipient):
    """Exact number of instances of one template between a pair.

    For bridged templates ``net`` must be an augmentation carrying the
    partition of the first hop's layer. The pair's own friendly edge is
    skipped if still visible.
    """
    if initiator == recipient:
        raise ValueError("initiator and recipient must differ")
    first = net.neighbors(initiator, spec.first)
    cond = _final_candidates(net, recipient, spec.final)
    if not first or not cond:
        return 0
    if not spec.bridged:
        # the initiator is never its own first-hop neighbor, so the pair's
        # edge cannot slip into a plain count
        if len(first) > len(cond):
            return sum(1 for x in cond if x in first)
        return len(first & cond)
    part = net.partitions[spec.first.layer]
    assign = part.assignment
    hist = Counter(assign[w] for w in first)
    total = 0
    for x in cond:
        c = assign[x]
        if c in hist:
            total += hist[c]
    if not spec.final.inverse and initiator in cond:
        total -= hist.get(assign[initiator], 0)
    return total


def feature_row(net, initiator, recipient, mode="both", label=None):
    """Counts for all templates of ``mode`` between one pair."""
    specs = MODE_SPECS[mode]
    counts = tuple(count_paths(net, s, initiator, recipient) for s in specs)
    return FeatureRow(initiator, recipient, counts, label)


class PairFeaturizer:
    """Counts templates for many pairs against one immutable network.

    Caches per-initiator first-hop neighbor sets and cluster histograms,
    and per-recipient final-hop candidate sets and cluster buckets, so
    repeated initiators and recipients amortize. The network (or masked
    view) must not change while a featurizer is alive.
    """

    def __init__(self, net, mode="both"):
        if mode not in MODE_SPECS:
            raise ValueError(f"mode must be nb, cb or both, got {mode!r}")
        self.net = net
        self.mode = mode
        self.specs = MODE_SPECS[mode]
        self.columns = MODE_COLUMNS[mode]
        self._needs_bridge = any(s.bridged for s in self.specs)
        if self._needs_bridge and not hasattr(net, "partitions"):
            raise ValueError("bridged templates need a cluster-augmented network")
        self._firsts = {}
        self._first_hists = {}
        self._finals = {}
        self._final_buckets = {}

    def _first_sets(self, u):
        sets = self._firsts.get(u)
        if sets is None:
            sets = tuple(self.net.neighbors(u, step) for (_, step) in _FIRST_STEPS)
            self._firsts[u] = sets
        return sets

    def _first_hist(self, u, idx, layer):
        key = (u, idx)
        hist = self._first_hists.get(key)
        if hist is None:
            assign = self.net.partitions[layer].assignment
            hist = Counter(assign[w] for w in self._first_sets(u)[idx])
            self._first_hists[key] = hist
        return hist

    def _final_sets(self, v):
        sets = self._finals.get(v)
        if sets is None:
            sets = tuple(
                _final_candidates(self.net, v, step) for (_, step) in _FINAL_STEPS
            )
            self._finals[v] = sets
        return sets

    def _final_bucket(self, v, idx, layer):
        key = (v, idx, layer)
        bucket = self._final_buckets.get(key)
        if bucket is None:
            assign = self.net.partitions[layer].assignment
            bucket = Counter(assign[x] for x in self._final_sets(v)[idx])
            self._final_buckets[key] = bucket
        return bucket

    def row(self, u, v, label=None):
        if u == v:
            raise ValueError("initiator and recipient must differ")
        firsts = self._first_sets(u)
        finals = self._final_sets(v)
        counts = []
        if self.mode in ("nb", "both"):
            for fi in range(4):
                first = firsts[fi]
                for gi in range(4):
                    cond = finals[gi]
                    if not first or not cond:
                        counts.append(0)
                    elif len(first) > len(cond):
                        counts.append(sum(1 for x in cond if x in first))
                    else:
                        counts.append(len(first & cond))
        if self.mode in ("cb", "both"):
            for fi, (_, fstep) in enumerate(_FIRST_STEPS):
                layer = fstep.layer
                assign = self.net.partitions[layer].assignment
                hist = self._first_hist(u, fi, layer)
                for gi, (_, gstep) in enumerate(_FINAL_STEPS):
                    if not hist:
                        counts.append(0)
                        continue
                    bucket = self._final_bucket(v, gi, layer)
                    total = 0
                    if len(hist) < len(bucket):
                        for c, hc in hist.items():
                            bc = bucket.get(c)
                            if bc:
                                total += hc * bc
                    else:
                        for c, bc in bucket.items():
                            hc = hist.get(c)
                            if hc:
                                total += hc * bc
                    if not gstep.inverse and u in finals[gi]:
                        total -= hist.get(assign[u], 0)
                    counts.append(total)
        return FeatureRow(u, v, tuple(counts), label)


def featurize_pairs(net, pairs, mode="both"):
    """Feature rows for (initiator, recipient[, label]) tuples.

    Returns (columns, rows) with columns in canonical order for ``mode``.
    """
    featurizer = PairFeaturizer(net, mode)
    rows = []
    for pair in pairs:
        u, v = pair[0], pair[1]
        label = pair[2] if len(pair) > 2 else None
        rows.append(featurizer.row(u, v, label))
    return featurizer.columns, rows
