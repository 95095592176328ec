"""From-scratch decision-tree boosting and bagging engines.

Four training procedures share the tree machinery:

* ``classic_gb``       - first-order residual boosting, squared-error splits,
                         per-leaf Newton line search.
* ``second_order``     - gradient/hessian boosting with L2 leaf regularization,
                         split penalty and exact greedy splits.
* ``histogram_goss_efb`` - the same second-order objective on quantile-binned
                         features with gradient-based one-side sampling and
                         exclusive feature bundling.
* bagging              - bootstrap-resampled Gini classification trees fused
                         by majority vote.

Everything is deterministic given (data, params, seed): sorts are stable,
sampling is generator-seeded, and tie-breaks prefer the lowest feature index
then the lowest threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, InvalidFractions, SingleClassDataset

MODE_CLASSIC = "classic_gb"
MODE_SECOND_ORDER = "second_order"
MODE_HISTOGRAM = "histogram_goss_efb"
BOOSTING_MODES = (MODE_CLASSIC, MODE_SECOND_ORDER, MODE_HISTOGRAM)

_H_FLOOR = 1e-12


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 4
    min_samples_leaf: int = 2
    reg_lambda: float = 1.0
    gamma: float = 0.0
    learning_rate: float = 0.1
    n_rounds: int = 200
    colsample: float = 1.0
    max_bins: int = 255
    goss_a: float = 0.2
    goss_b: float = 0.1
    efb_max_conflict: float = 0.0
    seed: int = 0
    use_goss: bool = True
    use_efb: bool = True

    def __post_init__(self):
        if not (0.0 <= self.goss_a <= 1.0 and 0.0 <= self.goss_b <= 1.0):
            raise InvalidFractions("goss fractions must lie in [0, 1]")
        if self.goss_a + self.goss_b > 1.0 + 1e-12:
            raise InvalidFractions("goss_a + goss_b must not exceed 1")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ValueError("learning_rate must be in (0, 1]")
        if not (0.0 < self.colsample <= 1.0):
            raise ValueError("colsample must be in (0, 1]")
        if self.reg_lambda < 0 or self.gamma < 0:
            raise ValueError("reg_lambda and gamma must be non-negative")
        if self.max_bins < 2:
            raise ValueError("max_bins must be >= 2")


@dataclass(frozen=True)
class BaggingParams:
    n_trees: int = 100
    max_depth: int = 10
    min_samples_leaf: int = 1
    seed: int = 0
    bootstrap: bool = True


@dataclass
class Node:
    """Internal node (feature >= 0) or leaf (feature == -1)."""

    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    leaf: float = 0.0


@dataclass
class DecisionTree:
    nodes: list = field(default_factory=list)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Leaf value for every row; routing rule is x[feature] <= threshold."""
        out = np.empty(len(X))
        stack = [(0, np.arange(len(X)))]
        while stack:
            node_id, rows = stack.pop()
            node = self.nodes[node_id]
            if node.feature < 0:
                out[rows] = node.leaf
                continue
            goes_left = X[rows, node.feature] <= node.threshold
            stack.append((node.left, rows[goes_left]))
            stack.append((node.right, rows[~goes_left]))
        return out

    def predict_one(self, x: np.ndarray) -> float:
        node = self.nodes[0]
        while node.feature >= 0:
            node = self.nodes[node.left if x[node.feature] <= node.threshold else node.right]
        return node.leaf

    def depth(self) -> int:
        def walk(i):
            n = self.nodes[i]
            return 0 if n.feature < 0 else 1 + max(walk(n.left), walk(n.right))
        return walk(0)


@dataclass
class BoostedModel:
    mode: str
    base_margin: float
    learning_rate: float
    trees: list
    feature_count: int

    def predict_margin_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise DimensionMismatch(
                f"expected (n, {self.feature_count}) matrix, got {X.shape}")
        margins = np.full(len(X), self.base_margin)
        for tree in self.trees:
            margins += self.learning_rate * tree.predict(X)
        return margins

    def predict_label_matrix(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_margin_matrix(X) >= 0.0).astype(int)

    def staged_label_matrix(self, X: np.ndarray, checkpoints) -> dict:
        """Labels after the first k trees for every k in checkpoints; one pass
        over the ensemble instead of refitting truncated models."""
        X = np.asarray(X, dtype=float)
        margins = np.full(len(X), self.base_margin)
        wanted = set(checkpoints)
        out = {}
        if 0 in wanted:
            out[0] = (margins >= 0.0).astype(int)
        for i, tree in enumerate(self.trees, start=1):
            margins += self.learning_rate * tree.predict(X)
            if i in wanted:
                out[i] = (margins >= 0.0).astype(int)
        return out

    def predict_margin(self, x) -> float:
        return float(self.predict_margin_matrix(np.asarray(x, dtype=float)[None, :])[0])

    def predict_proba(self, x) -> float:
        return float(_sigmoid(np.array([self.predict_margin(x)]))[0])

    def predict_label(self, x) -> int:
        return 1 if self.predict_proba(x) >= 0.5 else 0


@dataclass
class BaggedModel:
    trees: list
    feature_count: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def positive_votes(self, x) -> int:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.feature_count,):
            raise DimensionMismatch(
                f"expected {self.feature_count} features, got {x.shape}")
        return sum(1 for t in self.trees if t.predict_one(x) >= 0.5)

    def predict_proba(self, x) -> float:
        return self.positive_votes(x) / self.n_trees

    def predict_label(self, x) -> int:
        # exact tie goes to the positive class
        return 1 if 2 * self.positive_votes(x) >= self.n_trees else 0

    def predict_label_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise DimensionMismatch(
                f"expected (n, {self.feature_count}) matrix, got {X.shape}")
        votes = np.zeros(len(X), dtype=int)
        for tree in self.trees:
            votes += (tree.predict(X) >= 0.5).astype(int)
        return (2 * votes >= self.n_trees).astype(int)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def logistic_grad_hess(y, margin):
    """Gradient and hessian of the binary log-loss at the given margin."""
    p = _sigmoid(np.asarray(margin, dtype=float))
    y = np.asarray(y, dtype=float)
    return p - y, p * (1.0 - p)


def split_gain(gl, hl, gr, hr, reg_lambda, gamma):
    """Second-order gain of separating (gl, hl) from (gr, hr)."""
    def score(g, h):
        return g * g / (h + reg_lambda) if h + reg_lambda > 0 else 0.0
    return 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma


# --------------------------------------------------------------------------
# split search
# --------------------------------------------------------------------------

class _ExactContext:
    """Columns presorted once per training matrix; node scans restrict the
    stable global order with a boolean gather instead of re-sorting."""

    def __init__(self, X: np.ndarray):
        self.n, self.d = X.shape
        self.values_t = np.ascontiguousarray(X.T)
        self.presort = np.ascontiguousarray(
            np.argsort(X, axis=0, kind="stable").T)  # (d, n) row ids

    def node_order(self, idx: np.ndarray) -> np.ndarray:
        """Per-feature sorted row ids of the node, shape (d, len(idx)).

        idx must hold unique ascending rows; restricting a stable sort keeps
        exactly the order a stable per-node sort would produce.
        """
        mask = np.zeros(self.n, dtype=bool)
        mask[idx] = True
        return self.presort[mask[self.presort]].reshape(self.d, len(idx))


def _scan_all_features(ctx: _ExactContext, idx, g, h, min_leaf, reg_lambda,
                       gamma, allowed):
    """Vectorized exact scan over every feature column.

    Returns (feature, threshold, gain) of the best positive-gain candidate or
    None. Ties prefer the lowest feature index, then the lowest threshold.
    """
    m = len(idx)
    if m < 2 * min_leaf:
        return None
    sel = ctx.node_order(idx)
    v = np.take_along_axis(ctx.values_t, sel, axis=1)  # (d, m) sorted values
    gs = g[sel]
    hs = h[sel]
    gl = np.cumsum(gs, axis=1)[:, :-1]
    hl = np.cumsum(hs, axis=1)[:, :-1]
    g_tot = (gl[:, -1] + gs[:, -1])[:, None]
    h_tot = (hl[:, -1] + hs[:, -1])[:, None]
    gr = g_tot - gl
    hr = h_tot - hl

    with np.errstate(divide="ignore", invalid="ignore"):
        gains = 0.5 * (gl ** 2 / (hl + reg_lambda)
                       + gr ** 2 / (hr + reg_lambda)
                       - g_tot ** 2 / (h_tot + reg_lambda)) - gamma
    counts = np.arange(1, m)[None, :]
    valid = (v[:, :-1] < v[:, 1:]) & (counts >= min_leaf) & (m - counts >= min_leaf)
    if allowed is not None:
        valid &= allowed[:, None]
    gains = np.where(valid & np.isfinite(gains), gains, -np.inf)

    best = gains.max()
    if not np.isfinite(best) or best <= 0.0:
        return None
    # equal partitions reached through different columns accumulate in a
    # different order, so break float-level ties inside a tiny window by
    # lowest feature index, then lowest threshold
    window = 1e-12 * max(1.0, abs(best))
    features, positions = np.nonzero(gains >= best - window)
    feature, pos = int(features[0]), int(positions[0])
    threshold = 0.5 * (v[feature, pos] + v[feature, pos + 1])
    return feature, threshold, float(gains[feature, pos])


def best_split_exact(column, g, h, params: TreeParams):
    """Best split of one column: midpoint threshold of adjacent distinct
    values maximizing the second-order gain, or None."""
    column = np.asarray(column, dtype=float)
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if not (len(column) == len(g) == len(h)):
        raise DimensionMismatch("column, g and h must have equal length")
    ctx = _ExactContext(column[:, None])
    hit = _scan_all_features(ctx, np.arange(len(column)), g, h,
                             params.min_samples_leaf, params.reg_lambda,
                             params.gamma, None)
    if hit is None:
        return None
    _, threshold, gain = hit
    return {"threshold": threshold, "gain": gain}


# --------------------------------------------------------------------------
# binning and bundling
# --------------------------------------------------------------------------

def bin_features(X: np.ndarray, max_bins: int):
    """Quantile-bin every column; monotone, and bijective onto the distinct
    values whenever there are at most max_bins of them.

    Returns (codes, edges): codes[i, f] <= b exactly when X[i, f] <= edges[f][b].
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    codes = np.zeros((n, d), dtype=np.int32)
    edges = []
    for f in range(d):
        col = X[:, f]
        uniq = np.unique(col)
        if len(uniq) <= max_bins:
            cut = (uniq[:-1] + uniq[1:]) / 2.0
        else:
            qs = np.quantile(col, np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
            cut = np.unique(qs)
        codes[:, f] = np.searchsorted(cut, col, side="left")
        edges.append(cut)
    return codes, edges


@dataclass
class BundleMap:
    """Grouping of binned features into merge-compatible bundles."""

    bundles: list          # list of feature-index lists
    offsets: list          # per bundle: list of value offsets, parallel to members
    n_bins: list           # bins per original feature
    bundle_bins: list      # total merged bins per bundle

    def encode(self, codes: np.ndarray) -> np.ndarray:
        out = np.zeros((codes.shape[0], len(self.bundles)), dtype=np.int64)
        for bi, members in enumerate(self.bundles):
            col = np.zeros(codes.shape[0], dtype=np.int64)
            for f, off in zip(members, self.offsets[bi]):
                nz = codes[:, f] != 0
                col[nz] = codes[nz, f] + off
            out[:, bi] = col
        return out

    def decode(self, bundled: np.ndarray) -> np.ndarray:
        codes = np.zeros((bundled.shape[0], len(self.n_bins)), dtype=np.int32)
        for bi, members in enumerate(self.bundles):
            col = bundled[:, bi]
            for f, off in zip(members, self.offsets[bi]):
                inside = (col > off) & (col <= off + self.n_bins[f] - 1)
                codes[inside, f] = col[inside] - off
        return codes


def efb_bundle(codes: np.ndarray, max_conflict: float) -> BundleMap:
    """Greedy exclusive-feature bundling on binned data.

    Code 0 is the reserved "feature absent" bin. Features are visited by
    descending nonzero count and appended to the first bundle whose occupied
    rows overlap theirs in at most max_conflict * n rows.
    """
    n, d = codes.shape
    n_bins = [int(codes[:, f].max()) + 1 for f in range(d)]
    nonzero = [codes[:, f] != 0 for f in range(d)]
    counts = np.array([int(m.sum()) for m in nonzero])
    order = sorted(range(d), key=lambda f: (-counts[f], f))
    budget = max_conflict * n

    bundles, occupied = [], []
    for f in order:
        for bi in range(len(bundles)):
            conflicts = int(np.count_nonzero(nonzero[f] & occupied[bi]))
            if conflicts <= budget:
                bundles[bi].append(f)
                occupied[bi] |= nonzero[f]
                break
        else:
            bundles.append([f])
            occupied.append(nonzero[f].copy())

    offsets, bundle_bins = [], []
    for members in bundles:
        offs, acc = [], 0
        for f in members:
            offs.append(acc)
            acc += n_bins[f] - 1
        offsets.append(offs)
        bundle_bins.append(acc + 1)
    return BundleMap(bundles=bundles, offsets=offsets, n_bins=n_bins,
                     bundle_bins=bundle_bins)


def goss_sample(g: np.ndarray, a: float, b: float, seed_or_rng):
    """Gradient-based one-side sampling.

    Keeps the ceil(a*n) largest-|g| rows with multiplier 1 and a uniform
    ceil(b*n) of the rest with multiplier (1-a)/b; indices come back in
    ascending order so downstream accumulation order is stable.
    """
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0) or a + b > 1.0 + 1e-12:
        raise InvalidFractions(f"invalid goss fractions a={a}, b={b}")
    rng = (seed_or_rng if isinstance(seed_or_rng, np.random.Generator)
           else np.random.default_rng(seed_or_rng))
    n = len(g)
    if a >= 1.0:
        return np.arange(n), np.ones(n)
    n_top = int(math.ceil(a * n))
    n_rand = int(math.ceil(b * n))
    order = np.argsort(-np.abs(g), kind="stable")
    top = order[:n_top]
    rest = order[n_top:]
    picked = np.empty(0, dtype=int)
    if n_rand > 0 and len(rest) > 0 and b > 0.0:
        n_rand = min(n_rand, len(rest))
        picked = rest[np.sort(rng.choice(len(rest), size=n_rand, replace=False))]
    idx = np.concatenate([top, picked])
    mult = np.concatenate([np.ones(len(top)),
                           np.full(len(picked), (1.0 - a) / b if b > 0 else 0.0)])
    srt = np.argsort(idx, kind="stable")
    return idx[srt], mult[srt]


# --------------------------------------------------------------------------
# tree growers
# --------------------------------------------------------------------------

def _choose_features(d: int, colsample: float, rng) -> np.ndarray:
    if colsample >= 1.0:
        return np.ones(d, dtype=bool)
    keep = max(1, int(math.ceil(colsample * d)))
    chosen = np.sort(rng.choice(d, size=keep, replace=False))
    mask = np.zeros(d, dtype=bool)
    mask[chosen] = True
    return mask


def build_tree(X, g, h, params: TreeParams, mode: str,
               feature_mask=None, _hist_ctx=None, _exact_ctx=None, rows=None):
    """Grow one regression tree by greedy splitting.

    g and h drive leaf weights (-G / (H + lambda)); classic mode scans with
    unit hessians and lambda=0 so structure search reduces to squared-error
    improvement on the residuals while leaves keep the Newton step.
    Returns (tree, per-row leaf values for the supplied rows).
    """
    X = np.asarray(X, dtype=float)
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if X.ndim != 2 or len(X) != len(g) or len(g) != len(h):
        raise DimensionMismatch("X, g, h must agree on the sample count")
    if mode not in BOOSTING_MODES:
        raise ValueError(f"unknown boosting mode {mode!r}")
    rows = np.arange(len(X)) if rows is None else rows
    if _hist_ctx is None and _exact_ctx is None:
        _exact_ctx = _ExactContext(X)

    classic = mode == MODE_CLASSIC
    split_h = np.ones_like(h) if classic else h
    lam_split = 0.0 if classic else params.reg_lambda
    gamma = 0.0 if classic else params.gamma
    lam_leaf = 0.0 if classic else params.reg_lambda

    tree = DecisionTree()
    train_pred = np.zeros(len(X))
    stack = [(0, rows, 0)]
    tree.nodes.append(Node())
    while stack:
        node_id, idx, depth = stack.pop()
        g_sum, h_sum = g[idx].sum(), h[idx].sum()
        leaf_value = -g_sum / max(h_sum + lam_leaf, _H_FLOOR)

        hit = None
        if depth < params.max_depth and len(idx) >= 2 * params.min_samples_leaf:
            if _hist_ctx is None:
                hit = _scan_all_features(_exact_ctx, idx, g, split_h,
                                         params.min_samples_leaf, lam_split,
                                         gamma, feature_mask)
            else:
                hit = _best_histogram_split(_hist_ctx, idx, g, split_h,
                                            params.min_samples_leaf, lam_split,
                                            gamma, feature_mask)
        if hit is None:
            node = tree.nodes[node_id]
            node.feature, node.leaf = -1, leaf_value
            train_pred[idx] = leaf_value
            continue

        feature, threshold, _ = hit
        goes_left = X[idx, feature] <= threshold
        left_id, right_id = len(tree.nodes), len(tree.nodes) + 1
        tree.nodes.extend([Node(), Node()])
        node = tree.nodes[node_id]
        node.feature, node.threshold = feature, threshold
        node.left, node.right = left_id, right_id
        stack.append((right_id, idx[~goes_left], depth + 1))
        stack.append((left_id, idx[goes_left], depth + 1))
    return tree, train_pred


class _HistContext:
    """Binned training matrix plus a static per-feature histogram layout.

    Bundle histograms live concatenated in one flat array; `gather` maps
    feature f's nonzero-bin span into row f of a padded (d, W) matrix whose
    column 0 is reconstructed as "everything not in the span". The layout
    depends only on per-feature bin counts, never on the bundling, so EFB
    on/off produce bit-identical scans when bundling is lossless.
    """

    def __init__(self, codes, edges, bundle_map):
        self.codes = codes
        self.edges = edges
        self.bundle_map = bundle_map
        self.bundled = bundle_map.encode(codes)

        d = codes.shape[1]
        bm = bundle_map
        self.n_bundles = len(bm.bundles)
        self.bundle_base = np.concatenate([[0], np.cumsum(bm.bundle_bins)[:-1]])
        self.total_bins = int(np.sum(bm.bundle_bins))
        nb = np.array(bm.n_bins)
        w = int(nb.max())
        gather = np.zeros((d, w), dtype=np.int64)
        mask = np.zeros((d, w), dtype=bool)
        for bi, members in enumerate(bm.bundles):
            for f, off in zip(members, bm.offsets[bi]):
                span = nb[f] - 1
                gather[f, 1:1 + span] = self.bundle_base[bi] + off + 1 + np.arange(span)
                mask[f, 1:1 + span] = True
        self.gather, self.gather_mask, self.width = gather, mask, w
        thr = np.full((d, max(w - 1, 1)), np.nan)
        for f in range(d):
            thr[f, :nb[f] - 1] = edges[f]
        self.thresholds = thr
        # candidate position p on feature f is real iff p <= nb[f] - 2
        self.pos_valid = np.arange(max(w - 1, 1))[None, :] <= (nb[:, None] - 2)


def _best_histogram_split(ctx, idx, g, h, min_leaf, reg_lambda, gamma, feature_mask):
    """Best split across original features from one flat node histogram."""
    w = ctx.width
    if w < 2:
        return None
    flat = (ctx.bundled[idx] + ctx.bundle_base[None, :]).ravel()
    hist_g = np.bincount(flat, weights=np.repeat(g[idx], ctx.n_bundles),
                         minlength=ctx.total_bins)
    hist_h = np.bincount(flat, weights=np.repeat(h[idx], ctx.n_bundles),
                         minlength=ctx.total_bins)
    hist_n = np.bincount(flat, minlength=ctx.total_bins)

    span_g = np.where(ctx.gather_mask, hist_g[ctx.gather], 0.0)
    span_h = np.where(ctx.gather_mask, hist_h[ctx.gather], 0.0)
    span_n = np.where(ctx.gather_mask, hist_n[ctx.gather], 0)
    tot_g, tot_h, tot_n = g[idx].sum(), h[idx].sum(), len(idx)
    span_g[:, 0] = tot_g - span_g.sum(axis=1)
    span_h[:, 0] = tot_h - span_h.sum(axis=1)
    span_n[:, 0] = tot_n - span_n.sum(axis=1)

    gl = np.cumsum(span_g, axis=1)[:, :-1]
    hl = np.cumsum(span_h, axis=1)[:, :-1]
    nl = np.cumsum(span_n, axis=1)[:, :-1]
    gr, hr = tot_g - gl, tot_h - hl
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = 0.5 * (gl ** 2 / (hl + reg_lambda)
                       + gr ** 2 / (hr + reg_lambda)
                       - tot_g ** 2 / (tot_h + reg_lambda)) - gamma
    valid = ctx.pos_valid & (nl >= min_leaf) & (tot_n - nl >= min_leaf)
    if feature_mask is not None:
        valid &= feature_mask[:, None]
    gains = np.where(valid & np.isfinite(gains), gains, -np.inf)

    best = gains.max()
    if not np.isfinite(best) or best <= 0.0:
        return None
    window = 1e-12 * max(1.0, abs(best))
    features, positions = np.nonzero(gains >= best - window)
    feature, pos = int(features[0]), int(positions[0])
    return feature, float(ctx.thresholds[feature, pos]), float(gains[feature, pos])


# --------------------------------------------------------------------------
# boosting / bagging drivers
# --------------------------------------------------------------------------

def _validate_training_data(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y):
        raise DimensionMismatch(f"bad training shapes {X.shape} / {y.shape}")
    classes = set(np.unique(y))
    if not classes <= {0, 1}:
        raise ValueError(f"labels must be 0/1, got {sorted(classes)}")
    if len(classes) < 2:
        raise SingleClassDataset("training data contains a single class")
    return X, y


def fit_boosted(X, y, params: TreeParams, mode: str) -> BoostedModel:
    """Stagewise additive logistic boosting in the requested mode."""
    X, y = _validate_training_data(X, y)
    if mode not in BOOSTING_MODES:
        raise ValueError(f"unknown boosting mode {mode!r}")
    n, d = X.shape
    prior = y.mean()
    base_margin = math.log(prior / (1.0 - prior))
    margins = np.full(n, base_margin)
    rng = np.random.default_rng(params.seed)

    hist_ctx = None
    exact_ctx = None
    if mode == MODE_HISTOGRAM:
        codes, edges = bin_features(X, params.max_bins)
        if params.use_efb:
            bm = efb_bundle(codes, params.efb_max_conflict)
        else:
            bm = efb_bundle(codes, -1.0)  # negative budget: nothing ever merges
        hist_ctx = _HistContext(codes, edges, bm)
    else:
        exact_ctx = _ExactContext(X)

    trees = []
    for _ in range(params.n_rounds):
        g, h = logistic_grad_hess(y, margins)
        if mode == MODE_HISTOGRAM and params.use_goss and params.goss_a < 1.0:
            idx, mult = goss_sample(g, params.goss_a, params.goss_b, rng)
        else:
            idx, mult = np.arange(n), np.ones(n)
        g_fit = g.copy()
        h_fit = h.copy()
        g_fit[idx] = g[idx] * mult
        h_fit[idx] = h[idx] * mult
        feature_mask = _choose_features(d, params.colsample, rng)
        tree, _ = build_tree(X, g_fit, h_fit, params, mode,
                             feature_mask=feature_mask, _hist_ctx=hist_ctx,
                             _exact_ctx=exact_ctx, rows=idx)
        margins = margins + params.learning_rate * tree.predict(X)
        trees.append(tree)
    return BoostedModel(mode=mode, base_margin=base_margin,
                        learning_rate=params.learning_rate, trees=trees,
                        feature_count=d)


def _gini_scan(ctx: _ExactContext, idx, y, min_leaf, allowed):
    """Exact Gini-impurity split scan, vectorized over features."""
    m = len(idx)
    if m < 2 * min_leaf:
        return None
    sel = ctx.node_order(idx)
    v = np.take_along_axis(ctx.values_t, sel, axis=1)
    pos_left = np.cumsum(y[sel], axis=1)[:, :-1].astype(float)
    n_left = np.arange(1, m, dtype=float)[None, :]
    n_pos = float(y[idx].sum())
    pos_right = n_pos - pos_left
    n_right = m - n_left

    def gini(pos, total):
        with np.errstate(divide="ignore", invalid="ignore"):
            p = pos / total
        return 1.0 - p ** 2 - (1.0 - p) ** 2

    parent = gini(n_pos, float(m)) * m
    weighted = n_left * gini(pos_left, n_left) + n_right * gini(pos_right, n_right)
    gains = parent - weighted
    valid = (v[:, :-1] < v[:, 1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if allowed is not None:
        valid &= allowed[:, None]
    gains = np.where(valid & np.isfinite(gains), gains, -np.inf)
    best = gains.max()
    if not np.isfinite(best) or best <= 1e-12:
        return None
    window = 1e-12 * max(1.0, abs(best))
    features, positions = np.nonzero(gains >= best - window)
    feature, pos = int(features[0]), int(positions[0])
    threshold = 0.5 * (v[feature, pos] + v[feature, pos + 1])
    return feature, threshold, float(gains[feature, pos])


def _build_gini_tree(X, y, params: BaggingParams) -> DecisionTree:
    """Full classification tree over the given (already resampled) data."""
    ctx = _ExactContext(X)
    tree = DecisionTree()
    tree.nodes.append(Node())
    stack = [(0, np.arange(len(X)), 0)]
    while stack:
        node_id, idx, depth = stack.pop()
        n_pos = int(y[idx].sum())
        majority = 1 if 2 * n_pos >= len(idx) else 0  # tie -> positive
        hit = None
        if depth < params.max_depth and len(idx) >= 2 * params.min_samples_leaf \
                and 0 < n_pos < len(idx):
            hit = _gini_scan(ctx, idx, y, params.min_samples_leaf, None)
        if hit is None:
            node = tree.nodes[node_id]
            node.feature, node.leaf = -1, float(majority)
            continue
        feature, threshold, _ = hit
        goes_left = X[idx, feature] <= threshold
        left_id, right_id = len(tree.nodes), len(tree.nodes) + 1
        tree.nodes.extend([Node(), Node()])
        node = tree.nodes[node_id]
        node.feature, node.threshold = feature, threshold
        node.left, node.right = left_id, right_id
        stack.append((right_id, idx[~goes_left], depth + 1))
        stack.append((left_id, idx[goes_left], depth + 1))
    return tree


def fit_bagging(X, y, params: BaggingParams) -> BaggedModel:
    """Bootstrap-aggregated Gini classification trees, majority vote."""
    X, y = _validate_training_data(X, y)
    rng = np.random.default_rng(params.seed)
    n = len(X)
    trees = []
    for _ in range(params.n_trees):
        rows = np.sort(rng.integers(0, n, size=n)) if params.bootstrap else np.arange(n)
        trees.append(_build_gini_tree(X[rows], y[rows], params))
    return BaggedModel(trees=trees, feature_count=X.shape[1])


def log_loss(y, margins) -> float:
    """Mean binary cross-entropy of raw margins; used to track training."""
    p = _sigmoid(np.asarray(margins, dtype=float))
    y = np.asarray(y, dtype=float)
    eps = 1e-15
    p = np.clip(p, eps, 1 - eps)
    return float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).mean())
