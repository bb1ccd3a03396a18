"""Estimation models fitted on the original dataset and used to generate
synthetic responses: a conditional-mean estimate for regression or a
conditional class-probability estimate for classification.

Menu: oracle (wraps the true function), ordinary least squares, logistic
maximum likelihood (damped Newton / IRLS), k-nearest neighbors, a random
forest regressor built from scratch, and a small fully-connected network.

Hyperparameter defaults follow the experiment prescriptions:
k = round(n^(2/(2+p))), trees = round(1.5 sqrt(n)), depth = floor(ln n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .datamodel import Dataset, SeedSpec, TaskKind
from .errors import NonConvergence, SingularDesign, TaskMismatch

ESTIMATOR_KINDS = ("oracle", "ols", "logistic", "knn", "rf", "mlp")


@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimation model to fit, plus optional hyperparameter overrides."""

    kind: str
    oracle_fn: Optional[Callable] = None  # true mean (regression) or prob (classification)
    k: Optional[int] = None
    trees: Optional[int] = None
    depth: Optional[int] = None
    box: Optional[float] = None  # logistic coefficient clip bound B
    hidden: int = 10
    layers: int = 4

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        for name in ("k", "trees", "depth"):
            v = getattr(self, name)
            if v is not None and (int(v) != v or v < 1):
                raise ValueError(f"{name} override must be a positive integer, got {v}")


@dataclass(frozen=True)
class FittedEstimator:
    kind: str
    task: TaskKind
    training_n: int
    fitted_params: dict
    _mean_fn: Callable = field(repr=False)
    _prob_fn: Optional[Callable] = field(repr=False, default=None)

    def mean(self, X) -> np.ndarray:
        """Vectorized conditional-mean prediction over rows of X."""
        return self._mean_fn(np.atleast_2d(np.asarray(X, dtype=float)))

    def prob(self, X) -> np.ndarray:
        """Vectorized P(Z = +1 | x) over rows of X."""
        out = self._prob_fn(np.atleast_2d(np.asarray(X, dtype=float)))
        return np.clip(out, 0.0, 1.0)


def predict_mean(est: FittedEstimator, x):
    if est.task is not TaskKind.REGRESSION:
        raise TaskMismatch("predict_mean requires a regression estimator")
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    out = est.mean(x.reshape(1, -1) if single else x)
    return float(out[0]) if single else out


def predict_prob(est: FittedEstimator, x):
    if est.task is not TaskKind.CLASSIFICATION:
        raise TaskMismatch("predict_prob requires a classification estimator")
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    out = est.prob(x.reshape(1, -1) if single else x)
    return float(out[0]) if single else out


def default_knn_k(n: int, p: int) -> int:
    return max(1, round(n ** (2.0 / (2.0 + p))))


def default_rf_shape(n: int) -> tuple:
    return max(1, round(1.5 * math.sqrt(n))), max(0, int(math.floor(math.log(n))))


# ---------------------------------------------------------------------------
# Ordinary least squares
# ---------------------------------------------------------------------------


def _fit_ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise SingularDesign(f"design rank {rank} < {X.shape[1]}")
    return beta


# ---------------------------------------------------------------------------
# Logistic maximum likelihood (damped Newton / IRLS)
# ---------------------------------------------------------------------------


def _sigmoid(m):
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    e = np.exp(m[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _logistic_nll(X, z, beta):
    m = X @ beta
    return float(np.mean(np.logaddexp(0.0, -z * m)))


def fit_logistic_mle(
    X: np.ndarray,
    z: np.ndarray,
    box: Optional[float] = None,
    max_iter: int = 100,
    grad_tol: float = 1e-9,
):
    """Unpenalized logistic MLE by damped Newton with step halving.

    The negative log-likelihood is non-increasing across accepted steps.
    Coordinates are clipped to [-box, box] after convergence when a box is
    given.  Raises NonConvergence if the gradient tolerance is not reached
    within the iteration cap (e.g. on separable data, where the MLE diverges).
    """
    n, p = X.shape
    beta = np.zeros(p)
    nll = _logistic_nll(X, z, beta)
    for _ in range(max_iter):
        m = X @ beta
        s = _sigmoid(-z * m)
        grad = -(X.T @ (z * s)) / n
        if np.max(np.abs(grad)) <= grad_tol:
            if box is not None:
                beta = np.clip(beta, -box, box)
            return beta, nll
        w = _sigmoid(m) * _sigmoid(-m)
        H = (X.T * w) @ X / n
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(p), -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, -grad, rcond=None)[0]
        t = 1.0
        accepted = False
        for _ in range(40):
            cand = beta + t * step
            cand_nll = _logistic_nll(X, z, cand)
            if cand_nll <= nll:  # enforce monotone descent
                beta, nll = cand, cand_nll
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
    raise NonConvergence(
        f"logistic IRLS did not reach gradient tolerance {grad_tol} "
        f"within {max_iter} iterations (data may be separable)"
    )


# ---------------------------------------------------------------------------
# k-nearest neighbors
# ---------------------------------------------------------------------------


class _KNN:
    """Brute-force Euclidean KNN with exact lowest-index tie breaking."""

    def __init__(self, X, y, k):
        self.X = X
        self.y = y
        self.k = int(k)
        self._sq = np.einsum("ij,ij->i", X, X)

    def predict(self, Q: np.ndarray) -> np.ndarray:
        n = self.X.shape[0]
        k = min(self.k, n)
        out = np.empty(Q.shape[0])
        chunk = max(1, int(4_000_000 // max(n, 1)))
        for s in range(0, Q.shape[0], chunk):
            B = Q[s : s + chunk]
            D = self._sq[None, :] - 2.0 * (B @ self.X.T)
            # query norms omitted: constant per row, irrelevant to ordering
            if k >= n:
                out[s : s + B.shape[0]] = self.y.mean()
                continue
            kth = np.partition(D, k - 1, axis=1)[:, k - 1]
            for i in range(B.shape[0]):
                row = D[i]
                less = row < kth[i]
                c = int(np.count_nonzero(less))
                total = float(self.y[less].sum())
                if c < k:
                    ties = np.flatnonzero(row == kth[i])[: k - c]
                    total += float(self.y[ties].sum())
                out[s + i] = total / k
        return out


# ---------------------------------------------------------------------------
# Random forest regressor (CART, variance-reduction splits)
# ---------------------------------------------------------------------------


class _Tree:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self):
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []

    def _add(self, feature, threshold, value):
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def finalize(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=float)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=float)

    def predict(self, Q: np.ndarray) -> np.ndarray:
        node = np.zeros(Q.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = Q[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return self.value[node]


def _best_split(X: np.ndarray, y: np.ndarray):
    """Best (feature, threshold) by squared-error reduction; all features
    considered; ties broken toward the lowest feature index."""
    m = y.shape[0]
    total = y.sum()
    best_score = -np.inf
    best = None
    counts = np.arange(1, m)
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        prefix = np.cumsum(y[order])[:-1]
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            continue
        score = prefix**2 / counts + (total - prefix) ** 2 / (m - counts)
        score[~valid] = -np.inf
        i = int(np.argmax(score))
        if score[i] > best_score + 1e-12:
            best_score = score[i]
            best = (j, 0.5 * (xs[i] + xs[i + 1]))
    return best


def _grow_tree(X, y, max_depth) -> _Tree:
    tree = _Tree()
    root = tree._add(-1, 0.0, float(y.mean()))
    stack = [(root, np.arange(y.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        if depth >= max_depth or idx.shape[0] < 2 or np.ptp(ys) == 0.0:
            continue
        split = _best_split(X[idx], ys)
        if split is None:
            continue
        j, thr = split
        mask = X[idx, j] <= thr
        left = tree._add(-1, 0.0, float(ys[mask].mean()))
        right = tree._add(-1, 0.0, float(ys[~mask].mean()))
        tree.feature[node] = j
        tree.threshold[node] = thr
        tree.left[node] = left
        tree.right[node] = right
        stack.append((left, idx[mask], depth + 1))
        stack.append((right, idx[~mask], depth + 1))
    tree.finalize()
    return tree


class _Forest:
    def __init__(self, X, y, n_trees, max_depth, rng):
        n = X.shape[0]
        self.trees = []
        for t in range(n_trees):
            if n_trees == 1:
                idx = np.arange(n)  # single-tree forest degenerates to plain CART
            else:
                idx = rng.integers(0, n, size=n)
            self.trees.append(_grow_tree(X[idx], y[idx], max_depth))

    def predict(self, Q: np.ndarray) -> np.ndarray:
        out = np.zeros(Q.shape[0])
        for tree in self.trees:
            out += tree.predict(Q)
        return out / len(self.trees)


# ---------------------------------------------------------------------------
# Fully-connected network (ReLU hidden layers, adaptive-moment full batch)
# ---------------------------------------------------------------------------


class _MLP:
    def __init__(self, p, layers, hidden, rng):
        sizes = [p] + [hidden] * layers + [1]
        self.W = [
            rng.normal(0.0, math.sqrt(2.0 / sizes[i]), size=(sizes[i], sizes[i + 1]))
            for i in range(len(sizes) - 1)
        ]
        self.b = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]

    def forward(self, X):
        h = X
        cache = [h]
        for W, b in zip(self.W[:-1], self.b[:-1]):
            h = np.maximum(h @ W + b, 0.0)
            cache.append(h)
        out = (cache[-1] @ self.W[-1] + self.b[-1]).ravel()
        return out, cache

    def gradients(self, X, y):
        out, cache = self.forward(X)
        n = X.shape[0]
        gW = [None] * len(self.W)
        gb = [None] * len(self.b)
        delta = (2.0 / n) * (out - y).reshape(-1, 1)
        gW[-1] = cache[-1].T @ delta
        gb[-1] = delta.sum(axis=0)
        back = delta @ self.W[-1].T
        for layer in range(len(self.W) - 2, -1, -1):
            back = back * (cache[layer + 1] > 0.0)
            gW[layer] = cache[layer].T @ back
            gb[layer] = back.sum(axis=0)
            if layer > 0:
                back = back @ self.W[layer].T
        return gW, gb, float(np.mean((out - y) ** 2))

    def train(self, X, y, lr=1e-3, epochs=500, patience=20, min_improvement=1e-6):
        params = self.W + self.b
        m = [np.zeros_like(q) for q in params]
        v = [np.zeros_like(q) for q in params]
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        best = math.inf
        stall = 0
        t = 0
        for _ in range(epochs):
            gW, gb, loss = self.gradients(X, y)
            grads = gW + gb
            t += 1
            for q, g, mi, vi in zip(params, grads, m, v):
                mi *= beta1
                mi += (1 - beta1) * g
                vi *= beta2
                vi += (1 - beta2) * g * g
                mhat = mi / (1 - beta1**t)
                vhat = vi / (1 - beta2**t)
                q -= lr * mhat / (np.sqrt(vhat) + eps)
            if loss < best - min_improvement:
                best = loss
                stall = 0
            else:
                stall += 1
                if stall >= patience:
                    break
        return t

    def predict(self, Q):
        return self.forward(Q)[0]


# ---------------------------------------------------------------------------
# Fitting entry point
# ---------------------------------------------------------------------------


def _mean_to_prob(mean_fn):
    # E[Z|x] = 2 eta(x) - 1 for Z in {-1, +1}
    return lambda X: np.clip((mean_fn(X) + 1.0) / 2.0, 0.0, 1.0)


def fit_estimator(spec: EstimatorSpec, data: Dataset, seed: SeedSpec) -> FittedEstimator:
    """Fit the estimation model on the original dataset.

    The result is deterministic given the seed.  Oracle specs delegate to the
    supplied true function.  Estimators that regress on labels (knn, rf, mlp)
    expose the class probability through (conditional mean + 1) / 2.
    """
    kind = spec.kind
    task = data.task
    X, y = data.features, data.responses
    n, p = data.n, data.p

    if kind == "oracle":
        if spec.oracle_fn is None:
            raise ValueError("oracle estimator requires oracle_fn")
        fn = spec.oracle_fn
        wrapped = lambda Q: np.asarray(fn(Q), dtype=float).reshape(-1)
        if task is TaskKind.REGRESSION:
            return FittedEstimator(kind, task, n, {}, wrapped)
        return FittedEstimator(kind, task, n, {}, wrapped, wrapped)

    if kind == "ols":
        if task is not TaskKind.REGRESSION:
            raise TaskMismatch("ols estimator requires a regression dataset")
        beta = _fit_ols(X, y)
        return FittedEstimator(kind, task, n, {"beta": beta}, lambda Q: Q @ beta)

    if kind == "logistic":
        if task is not TaskKind.CLASSIFICATION:
            raise TaskMismatch("logistic estimator requires a classification dataset")
        beta, nll = fit_logistic_mle(X, y, box=spec.box)
        prob = lambda Q: _sigmoid(Q @ beta)
        mean = lambda Q: 2.0 * _sigmoid(Q @ beta) - 1.0
        return FittedEstimator(kind, task, n, {"beta": beta, "nll": nll}, mean, prob)

    if kind == "knn":
        k = spec.k if spec.k is not None else default_knn_k(n, p)
        model = _KNN(X, y, k)
        mean = model.predict
        params = {"k": int(min(k, n))}
    elif kind == "rf":
        trees, depth = default_rf_shape(n)
        trees = spec.trees if spec.trees is not None else trees
        depth = spec.depth if spec.depth is not None else depth
        model = _Forest(X, y, int(trees), int(depth), seed.rng(101))
        mean = model.predict
        params = {"trees": int(trees), "depth": int(depth)}
    elif kind == "mlp":
        model = _MLP(p, spec.layers, spec.hidden, seed.rng(102))
        epochs = model.train(X, y)
        mean = model.predict
        params = {"layers": spec.layers, "hidden": spec.hidden, "epochs_run": epochs}
    else:  # pragma: no cover
        raise ValueError(kind)

    if task is TaskKind.REGRESSION:
        return FittedEstimator(kind, task, n, params, mean)
    return FittedEstimator(kind, task, n, params, mean, _mean_to_prob(mean))


def parse_estimator(text: str) -> EstimatorSpec:
    """Parse an estimator config entry, e.g. ``knn k=16`` or ``logistic box=4``."""
    parts = text.split()
    kind = parts[0]
    kwargs = {}
    for item in parts[1:]:
        key, val = item.split("=", 1)
        if key in ("k", "trees", "depth", "hidden", "layers"):
            kwargs[key] = int(val)
        elif key == "box":
            kwargs[key] = float(val)
        else:
            raise ValueError(f"unknown estimator parameter {key!r}")
    return EstimatorSpec(kind, **kwargs)
