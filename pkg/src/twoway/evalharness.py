"""Cross-validated sign-prediction experiments and structural analyses.

Folds hide their test edges behind a masked view before any feature is
computed; training pairs additionally skip their own edge inside the
extractors. Community detection, when used, runs once on the full
source layers since it never touches friendly edges.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats as sp_stats

from . import metapath, predictors
from .community import AugmentedNetwork, augment
from .netcore import F, M, R, MaskedView, degree_vector, embeddedness, mask_f_edges


class UndefinedMetricError(ValueError):
    """A metric's denominator vanished (missing class or constant data)."""


PREDICTOR_KINDS = ("cbmp", "nbmp", "nbsp", "mf", "random")


@dataclass(frozen=True)
class FoldPlan:
    """Seeded shuffle of the friendly pairs cut into k contiguous folds."""

    k: int
    folds: tuple
    seed: int


def kfold_split(pairs, k, seed=0):
    """Shuffle pairs with a seeded permutation, slice into k folds.

    Fold sizes differ by at most one; the first ``len(pairs) % k`` folds
    take the extra element.
    """
    pairs = list(pairs)
    n = len(pairs)
    if k < 2 or k > n:
        raise ValueError(f"need 2 <= k <= {n}, got {k}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    shuffled = [pairs[i] for i in order]
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(tuple(shuffled[start : start + size]))
        start += size
    return FoldPlan(k, tuple(folds), seed)


def balanced_accuracy(tp, fn, tn, fp):
    """Mean of the positive and negative recalls."""
    if tp + fn == 0 or tn + fp == 0:
        raise UndefinedMetricError(
            "balanced accuracy needs both classes in the test fold"
        )
    return 0.5 * (tp / (tp + fn) + tn / (tn + fp))


@dataclass
class FoldOutcome:
    fold: int
    tp: int
    fn: int
    tn: int
    fp: int
    balanced_accuracy: float | None
    warning: str | None = None

    def to_dict(self):
        return {
            "fold": self.fold,
            "tp": self.tp,
            "fn": self.fn,
            "tn": self.tn,
            "fp": self.fp,
            "balanced_accuracy": self.balanced_accuracy,
            "warning": self.warning,
        }


@dataclass
class EvalReport:
    predictor: str
    folds: list
    mean_balanced_accuracy: float | None
    config: dict

    def to_dict(self):
        return {
            "predictor": self.predictor,
            "folds": [f.to_dict() for f in self.folds],
            "mean_balanced_accuracy": self.mean_balanced_accuracy,
            "config": self.config,
        }


@dataclass
class ExperimentConfig:
    """Hyperparameters and seeds shared by every predictor in one run."""

    partitions: dict | None = None
    seed: int = 0
    svm_lam: float = 1e-4
    svm_epochs: int = 50
    class_weighted: bool = True
    mf_rank: int = 20
    mf_lam: float = 0.05
    mf_epochs: int = 30
    mf_lr: float = 0.05
    threads: int = 1

    def echo(self, plan=None, kinds=None):
        out = {
            "seed": self.seed,
            "svm_lam": self.svm_lam,
            "svm_epochs": self.svm_epochs,
            "class_weighted": self.class_weighted,
            "mf_rank": self.mf_rank,
            "mf_lam": self.mf_lam,
            "mf_epochs": self.mf_epochs,
            "mf_lr": self.mf_lr,
            "threads": self.threads,
            "partitions": None,
        }
        if self.partitions:
            out["partitions"] = {
                layer: part.cluster_count for layer, part in self.partitions.items()
            }
        if plan is not None:
            out["folds"] = plan.k
            out["fold_seed"] = plan.seed
        if kinds is not None:
            out["predictors"] = list(kinds)
        return out


def _model_seed(base_seed, fold_index, kind):
    return base_seed + 1009 * (fold_index + 1) + 13 * PREDICTOR_KINDS.index(kind)


def _require_masked(net, test_pairs):
    """Refuse to featurize unless every test edge is hidden by a view."""
    base = net.base if isinstance(net, AugmentedNetwork) else net
    if not isinstance(base, MaskedView):
        raise RuntimeError("fold featurization must run against a masked view")
    missing = [p for p in test_pairs if p not in base.hidden]
    if missing:
        raise RuntimeError(f"test pairs not hidden from featurization: {missing[:3]}")


def _confusion(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    tp = int(((y_true == 1) & (y_pred == 1)).sum())
    fn = int(((y_true == 1) & (y_pred == -1)).sum())
    tn = int(((y_true == -1) & (y_pred == -1)).sum())
    fp = int(((y_true == -1) & (y_pred == 1)).sum())
    return tp, fn, tn, fp


_MODE_SLICES = {"cbmp": ("both", slice(16, 32)), "nbmp": ("both", slice(0, 16))}


def _run_fold(net, kinds, plan, config, fold_index):
    test_pairs = list(plan.folds[fold_index])
    train_pairs = [
        p for i, fold in enumerate(plan.folds) if i != fold_index for p in fold
    ]
    y_train = np.array([net.f_sign(u, v) for (u, v) in train_pairs], dtype=np.int64)
    y_test = np.array([net.f_sign(u, v) for (u, v) in test_pairs], dtype=np.int64)
    view = mask_f_edges(net, set(test_pairs))

    results = {}

    def svm_outcome(kind, x_train, x_test):
        try:
            scaler = predictors.fit_standardizer(x_train)
            model = predictors.train_svm(
                scaler.transform(x_train),
                y_train,
                lam=config.svm_lam,
                epochs=config.svm_epochs,
                seed=_model_seed(config.seed, fold_index, kind),
                class_weighted=config.class_weighted,
            )
        except predictors.DegenerateTrainingError as exc:
            return (0, 0, 0, 0), str(exc)
        y_pred = model.predict(scaler.transform(x_test))
        return _confusion(y_test, y_pred), None

    metapath_kinds = [k for k in ("cbmp", "nbmp") if k in kinds]
    if metapath_kinds:
        _require_masked(view, test_pairs)
        need_cb = "cbmp" in metapath_kinds
        if need_cb:
            if not config.partitions:
                raise ValueError("cbmp needs partitions of layers R and M")
            base = augment(view, config.partitions[R], config.partitions[M])
            mode = "both"
        else:
            base = view
            mode = "nb"
        featurizer = metapath.PairFeaturizer(base, mode)
        rows_train = np.array(
            [featurizer.row(u, v).counts for (u, v) in train_pairs], dtype=float
        )
        rows_test = np.array(
            [featurizer.row(u, v).counts for (u, v) in test_pairs], dtype=float
        )
        for kind in metapath_kinds:
            if mode == "both":
                _, cols = _MODE_SLICES[kind]
            else:
                cols = slice(0, 16)
            results[kind] = svm_outcome(kind, rows_train[:, cols], rows_test[:, cols])

    if "nbsp" in kinds:
        _require_masked(view, test_pairs)
        x_train = np.array(
            [predictors.nbsp_features(view, u, v) for (u, v) in train_pairs]
        )
        x_test = np.array(
            [predictors.nbsp_features(view, u, v) for (u, v) in test_pairs]
        )
        results["nbsp"] = svm_outcome("nbsp", x_train, x_test)

    if "mf" in kinds:
        train_edges = [
            (u, v, int(s)) for (u, v), s in zip(train_pairs, y_train)
        ]
        model = predictors.train_mf(
            train_edges,
            net.node_count,
            rank=config.mf_rank,
            lam=config.mf_lam,
            epochs=config.mf_epochs,
            lr=config.mf_lr,
            seed=_model_seed(config.seed, fold_index, "mf"),
        )
        y_pred = model.predict(test_pairs)
        results["mf"] = (_confusion(y_test, y_pred), None)

    if "random" in kinds:
        coin = predictors.RandomSignPredictor(
            _model_seed(config.seed, fold_index, "random")
        )
        y_pred = coin.draw(len(test_pairs))
        results["random"] = (_confusion(y_test, y_pred), None)

    return results


def run_experiments(net, kinds, plan, config):
    """Evaluate several predictors fold by fold, sharing featurization.

    Returns one report per kind, in the order given. Folds whose
    balanced accuracy is undefined (or whose training degenerated) are
    excluded from the mean, with a warning recorded on the fold.
    """
    kinds = list(kinds)
    unknown = [k for k in kinds if k not in PREDICTOR_KINDS]
    if unknown:
        raise ValueError(f"unknown predictors {unknown}, have {PREDICTOR_KINDS}")
    if "cbmp" in kinds and not config.partitions:
        raise ValueError("cbmp needs partitions of layers R and M")

    indices = range(plan.k)
    if config.threads > 1:
        import multiprocessing as mp

        ctx = mp.get_context("fork")
        with ctx.Pool(min(config.threads, plan.k)) as pool:
            per_fold = pool.starmap(
                _run_fold,
                [(net, kinds, plan, config, i) for i in indices],
            )
    else:
        per_fold = [_run_fold(net, kinds, plan, config, i) for i in indices]

    reports = []
    echo = config.echo(plan, kinds)
    for kind in kinds:
        outcomes = []
        for i, fold_result in enumerate(per_fold):
            (tp, fn, tn, fp), warning = fold_result[kind]
            ba = None
            if warning is None:
                try:
                    ba = balanced_accuracy(tp, fn, tn, fp)
                except UndefinedMetricError as exc:
                    warning = str(exc)
            if warning is not None:
                warnings.warn(f"{kind} fold {i}: {warning}")
            outcomes.append(FoldOutcome(i, tp, fn, tn, fp, ba, warning))
        defined = [o.balanced_accuracy for o in outcomes if o.balanced_accuracy is not None]
        mean = float(np.mean(defined)) if defined else None
        reports.append(EvalReport(kind, outcomes, mean, dict(echo)))
    return reports


def run_experiment(net, kind, plan, config):
    """Evaluate one predictor; see :func:`run_experiments`."""
    return run_experiments(net, [kind], plan, config)[0]


def kendall_tau_b(xs, ys):
    """Tie-corrected rank correlation (variant b)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("need two 1-d sequences of equal length")
    if len(xs) < 2:
        raise UndefinedMetricError("rank correlation needs at least two items")
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        raise UndefinedMetricError("rank correlation is undefined for constant data")
    result = sp_stats.kendalltau(xs, ys)
    return float(result.statistic)


def layer_degree_correlation(net, layer_a, layer_b, direction):
    """Rank correlation of per-node degrees between two layers.

    Nodes isolated in either layer (for the given direction) are dropped
    from both sequences before correlating.
    """
    deg_a = np.asarray(degree_vector(net, layer_a, direction))
    deg_b = np.asarray(degree_vector(net, layer_b, direction))
    keep = (deg_a > 0) & (deg_b > 0)
    if keep.sum() < 2:
        raise UndefinedMetricError(
            f"fewer than two nodes active in both {layer_a} and {layer_b}"
        )
    return kendall_tau_b(deg_a[keep], deg_b[keep])


def activity_hamming(net, layer_a, layer_b, direction):
    """Mean disagreement of the active/inactive indicator over all nodes."""
    if net.node_count == 0:
        raise UndefinedMetricError("activity distance is undefined on empty networks")
    a = np.asarray(degree_vector(net, layer_a, direction)) > 0
    b = np.asarray(degree_vector(net, layer_b, direction)) > 0
    return float(np.mean(a != b))


def common_edges(net, layer_a, layer_b):
    """Ordered pairs present in both layers, friendly signs ignored."""
    return len(set(net.edge_pairs(layer_a)) & set(net.edge_pairs(layer_b)))


def f_overlap_summary(net):
    """How friendly pairs overlap the message and regular-match layers."""
    f_set = set(net.edge_pairs(F))
    m_set = set(net.edge_pairs(M))
    r_set = set(net.edge_pairs(R))
    in_m = len(f_set & m_set)
    in_r = len(f_set & r_set)
    in_all = len(f_set & m_set & r_set)
    in_either = len(f_set & (m_set | r_set))
    return {
        "f_edges": len(f_set),
        "in_m": in_m,
        "in_r": in_r,
        "in_all": in_all,
        "in_either": in_either,
        "in_neither": len(f_set) - in_either,
    }


_LAYER_PAIRS = ((F, R), (F, M), (M, R))


def correlation_report(net):
    """Degree correlations, activity distances and shared edges per layer pair."""
    pairs = []
    for (a, b) in _LAYER_PAIRS:
        entry = {"layers": f"{a}-{b}"}
        for direction in ("in", "out"):
            try:
                entry[f"{direction}_degree_tau"] = layer_degree_correlation(
                    net, a, b, direction
                )
            except UndefinedMetricError as exc:
                entry[f"{direction}_degree_tau"] = None
                entry.setdefault("warnings", []).append(str(exc))
            try:
                entry[f"{direction}_activity_hamming"] = activity_hamming(
                    net, a, b, direction
                )
            except UndefinedMetricError as exc:
                entry[f"{direction}_activity_hamming"] = None
                entry.setdefault("warnings", []).append(str(exc))
        entry["common_edges"] = common_edges(net, a, b)
        pairs.append(entry)
    return {"pairs": pairs, "f_overlap": f_overlap_summary(net)}


def embeddedness_histogram(net):
    """Friendly edges bucketed by embeddedness, with per-bin outcome rates.

    Each edge's embeddedness is computed with that edge hidden, which by
    construction equals computing it directly. Percentages are of all
    positive (respectively negative) edges; the rate is within-bin.
    """
    per_bin = {}
    n_pos = 0
    n_neg = 0
    for (u, v, s) in net.f_edges():
        e = embeddedness(net, u, v)
        pos, neg = per_bin.get(e, (0, 0))
        if s == 1:
            per_bin[e] = (pos + 1, neg)
            n_pos += 1
        else:
            per_bin[e] = (pos, neg + 1)
            n_neg += 1
    rows = []
    for e in sorted(per_bin):
        pos, neg = per_bin[e]
        n = pos + neg
        rows.append(
            {
                "embeddedness": e,
                "n": n,
                "pct_of_positives": 100.0 * pos / n_pos if n_pos else 0.0,
                "pct_of_negatives": 100.0 * neg / n_neg if n_neg else 0.0,
                "positive_rate": pos / n,
            }
        )
    return rows
