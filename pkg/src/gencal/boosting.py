"""Gradient boosting with Poisson deviance over depth-limited trees.

Each iteration fits a regression tree to the gradient residual
y - exp(F) on a without-replacement subsample, assigns leaf values by
the Poisson one-step update log(sum y / sum exp(F)) over the subsample,
and adds the (clamped, shrunken) tree to the score.  The cross-validated
grid search reuses staged predictions: for a fixed depth, held-out
deviance at T trees is computed from the first T trees of one T_max fit.
"""

import math
from dataclasses import dataclass

import numpy as np

from gencal import _kernels
from gencal.errors import ConfigError, DataError
from gencal.rng import Rng

LEAF_CLAMP = 5.0


@dataclass(frozen=True)
class BoostConfig:
    n_trees: int
    depth: int
    shrinkage: float = 0.01
    bag_fraction: float = 0.75
    min_node_fraction: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0:
            raise ConfigError("n_trees must be nonnegative")
        if not 1 <= self.depth <= 20:
            raise ConfigError("depth must be between 1 and 20")
        if not 0 < self.shrinkage <= 1:
            raise ConfigError("shrinkage must be in (0, 1]")
        if not 0 < self.bag_fraction <= 1:
            raise ConfigError("bag_fraction must be in (0, 1]")
        if not 0 < self.min_node_fraction < 1:
            raise ConfigError("min_node_fraction must be in (0, 1)")


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # per node id; nonzero only at leaves


@dataclass(frozen=True)
class BoostModel:
    init_score: float
    trees: tuple
    config: BoostConfig

    @property
    def n_trees(self):
        return len(self.trees)


def _feature_orders(x):
    p = x.shape[1]
    return np.vstack([np.argsort(x[:, j], kind="stable").astype(np.int32)
                      for j in range(p)])


def _leaf_values(node_of_row, n_nodes, y_bag, expf_bag):
    sums_y = np.bincount(node_of_row, weights=y_bag, minlength=n_nodes)
    sums_e = np.bincount(node_of_row, weights=expf_bag, minlength=n_nodes)
    vals = np.zeros(n_nodes)
    occupied = sums_e > 0
    with np.errstate(divide="ignore"):
        vals[occupied] = np.log(sums_y[occupied]) - np.log(sums_e[occupied])
    return np.clip(vals, -LEAF_CLAMP, LEAF_CLAMP)


def grow_boost_tree(x_bag, grad_bag, y_bag, expf_bag, depth, min_node, order=None):
    """One tree of the ensemble: structure from the gradient, Poisson
    one-step leaf values from (y, exp(F)) on the same rows."""
    k = _kernels.active
    if order is None:
        order = _feature_orders(x_bag)
    feature, threshold, left, right, node_of_row = k.grow_tree(
        np.ascontiguousarray(x_bag), np.ascontiguousarray(grad_bag),
        order, depth, min_node)
    value = _leaf_values(node_of_row, feature.shape[0], y_bag, expf_bag)
    value[feature >= 0] = 0.0
    return Tree(feature=feature, threshold=threshold, left=left, right=right,
                value=value)


def tree_predict(tree, x):
    leaf = _kernels.active.apply_tree(tree.feature, tree.threshold, tree.left,
                                      tree.right, np.ascontiguousarray(x))
    return tree.value[leaf]


def boost_fit(x, y, config):
    """Fit the ensemble; deterministic for a given config.seed."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if y.shape[0] != n:
        raise DataError("x and y row counts differ")
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise DataError("boosting requires nonnegative finite outcomes")
    ybar = float(y.mean()) if n else 0.0
    if ybar <= 0:
        raise DataError("all outcomes are zero; initial score log(mean y) is degenerate")
    bag_size = int(math.floor(config.bag_fraction * n))
    if bag_size < 1:
        raise ConfigError("bag_fraction keeps no rows")
    min_node = int(math.ceil(config.min_node_fraction * bag_size))
    if config.min_node_fraction * n < 1:
        raise ConfigError(
            f"min_node_fraction {config.min_node_fraction} puts the minimum node "
            f"size below one row for n = {n}")

    rng = Rng(config.seed).derive("boost")
    f0 = math.log(ybar)
    score = np.full(n, f0)
    trees = []
    p = x.shape[1]
    # sort each feature once; per-tree bag orderings are filtered from it,
    # so ties in feature values follow population row order
    orders_full = [np.argsort(x[:, j], kind="stable") for j in range(p)]
    pos = np.empty(n, dtype=np.int32)
    mask = np.zeros(n, dtype=bool)
    for _ in range(config.n_trees):
        bag = rng.sample_indices(n, bag_size)
        mask[:] = False
        mask[bag] = True
        pos[bag] = np.arange(bag_size, dtype=np.int32)
        order = np.empty((p, bag_size), dtype=np.int32)
        for f in range(p):
            of = orders_full[f]
            order[f] = pos[of[mask[of]]]
        expf = np.exp(score[bag])
        grad = y[bag] - expf
        tree = grow_boost_tree(np.ascontiguousarray(x[bag]), grad, y[bag], expf,
                               config.depth, min_node, order=order)
        trees.append(tree)
        score = score + config.shrinkage * tree_predict(tree, x)
    return BoostModel(init_score=f0, trees=tuple(trees), config=config)


def boost_predict(model, x, n_trees=None):
    """Predicted means exp(F0 + shrinkage * sum of the first n_trees trees)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    t = model.n_trees if n_trees is None else n_trees
    if t > model.n_trees:
        raise DataError(f"model has {model.n_trees} trees, asked for {t}")
    score = np.full(x.shape[0], model.init_score)
    for tree in model.trees[:t]:
        score = score + model.config.shrinkage * tree_predict(tree, x)
    return np.exp(score)


def poisson_deviance_mean(y, mu):
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(np.mean(2.0 * (term - (y - mu))))


def boost_model_to_json(model):
    """Versioned JSON document for a fitted ensemble."""
    import json

    doc = {
        "format": "gencal-boost",
        "version": 1,
        "init_score": model.init_score,
        "config": {
            "n_trees": model.config.n_trees,
            "depth": model.config.depth,
            "shrinkage": model.config.shrinkage,
            "bag_fraction": model.config.bag_fraction,
            "min_node_fraction": model.config.min_node_fraction,
            "seed": model.config.seed,
        },
        "trees": [
            {
                "feature": tree.feature.tolist(),
                "threshold": tree.threshold.tolist(),
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "value": tree.value.tolist(),
            }
            for tree in model.trees
        ],
    }
    return json.dumps(doc, indent=2)


def boost_model_from_json(text):
    import json

    doc = json.loads(text)
    if doc.get("format") != "gencal-boost" or doc.get("version") != 1:
        raise DataError("not a version-1 gencal boosting model document")
    trees = tuple(
        Tree(feature=np.asarray(t["feature"], dtype=np.int32),
             threshold=np.asarray(t["threshold"], dtype=np.float64),
             left=np.asarray(t["left"], dtype=np.int32),
             right=np.asarray(t["right"], dtype=np.int32),
             value=np.asarray(t["value"], dtype=np.float64))
        for t in doc["trees"])
    return BoostModel(init_score=doc["init_score"], trees=trees,
                      config=BoostConfig(**doc["config"]))


@dataclass(frozen=True)
class CvGridResult:
    grid: tuple  # (n_trees, depth, mean heldout deviance) triples
    best: tuple  # (n_trees, depth)


def _cv_task(args):
    """One (depth, fold) unit of the grid search; module-level so the
    process pool can pickle it.  Deterministic in its own derived seed."""
    x, y, fold, d, i, t_grid, t_max, base_config, seed = args
    mask = np.ones(x.shape[0], dtype=bool)
    mask[fold] = False
    cfg = BoostConfig(n_trees=t_max, depth=d,
                      shrinkage=base_config.shrinkage,
                      bag_fraction=base_config.bag_fraction,
                      min_node_fraction=base_config.min_node_fraction,
                      seed=Rng(seed).derive(f"cv-d{d}-fold{i}").seed)
    model = boost_fit(x[mask], y[mask], cfg)
    xh, yh = x[fold], y[fold]
    score = np.full(xh.shape[0], model.init_score)
    out = {}
    want = set(t_grid)
    for t, tree in enumerate(model.trees, start=1):
        score = score + cfg.shrinkage * tree_predict(tree, xh)
        if t in want:
            out[t] = poisson_deviance_mean(yh, np.exp(score))
    if 0 in want:
        out[0] = poisson_deviance_mean(yh, np.exp(np.full(xh.shape[0], model.init_score)))
    return (d, i, out)


def _fold_bounds(n, k):
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    return np.concatenate([[0], np.cumsum(sizes)])


def cv_grid_search(x, y, t_grid, d_grid, k=10, seed=0, base_config=None, jobs=1):
    """Mean k-fold held-out Poisson deviance over the (T, d) grid.

    For each depth one model with max(t_grid) trees is fitted per fold
    and evaluated at every T in t_grid from its leading trees.  Ties in
    the best deviance break toward smaller T, then smaller d.
    """
    if k < 2:
        raise ConfigError("cross-validation needs k >= 2 folds")
    t_grid = sorted(int(t) for t in t_grid)
    d_grid = sorted(int(d) for d in d_grid)
    if not t_grid or not d_grid:
        raise ConfigError("grids must be nonempty")
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if k > n:
        raise ConfigError("more folds than observations")
    if base_config is None:
        base_config = BoostConfig(n_trees=0, depth=1)
    t_max = t_grid[-1]

    perm = Rng(seed).derive("cv-folds").permutation(n)
    bounds = _fold_bounds(n, k)
    folds = [perm[bounds[i]:bounds[i + 1]] for i in range(k)]
    for fold in folds:
        train_n = n - fold.shape[0]
        if base_config.min_node_fraction * train_n < 1:
            raise ConfigError("a fold is smaller than the minimum-node requirement")

    tasks = [(x, y, folds[i], d, i, t_grid, t_max, base_config, seed)
             for d in d_grid for i in range(k)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cv_task, tasks))
    else:
        results = [_cv_task(t) for t in tasks]

    dev = {(t, d): 0.0 for t in t_grid for d in d_grid}
    for d, _i, out in results:
        for t in t_grid:
            dev[(t, d)] += out[t] / k

    entries = tuple((t, d, dev[(t, d)]) for d in d_grid for t in t_grid)
    best = min(entries, key=lambda e: (e[2], e[0], e[1]))
    return CvGridResult(grid=entries, best=(best[0], best[1]))
