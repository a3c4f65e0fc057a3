"""Stepwise-selected linear discriminant classification of flash epochs.

Training runs in two stages.  Stage one is stepwise ordinary-least-squares
feature selection: starting from an empty set, each pass first fits OLS with
every excluded feature added one at a time and admits the feature with the
smallest two-sided t-test p-value if it is below p_in, then refits on the
included set and drops the feature with the largest p-value if it is above
p_out.  The loop stops when a full pass changes nothing.  Stage two fits a
two-class linear discriminant on the selected columns; scoring a feature
vector is then a dot product plus an offset, oriented so the target class
scores higher on average.

p-values use N - k - 1 degrees of freedom (k regressors plus an intercept;
the intercept is always present and never selectable).  All candidate
evaluations run on a precomputed Gram matrix, which is algebraically
identical to refitting OLS on the chosen columns but far cheaper.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import lstsq as svd_lstsq
from scipy.linalg import solve_triangular
from scipy.stats import t as student_t

from .errors import (
    DegenerateClassError,
    EmptySelectionError,
    InputError,
    ParameterError,
    RankError,
    ShapeError,
)
from .signals import FEATURE_LENGTH, EegEpoch, decimate_epoch, feature_layout_hash

P_IN_DEFAULT = 0.1
P_OUT_DEFAULT = 0.25
MAX_FEATURES_DEFAULT = 60
MIN_CLASS_ROWS = 10
MODEL_FORMAT = "swlda-model.v1"

# relative pivot tolerance: an exact duplicate column pivots at round-off,
# genuinely correlated features stay orders of magnitude above this
_PIVOT_RTOL = 1e-10


@dataclass
class TrainingSet:
    """Labeled feature rows: features (n, d) float64, labels (n,) in {0, 1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ShapeError(
                f"labels shape {self.labels.shape} does not match {self.features.shape[0]} rows"
            )
        values = np.unique(self.labels)
        if not np.all(np.isin(values, (0, 1))):
            raise InputError(f"labels must be 0 or 1, got values {values}")
        self.labels = self.labels.astype(np.int64)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        n1 = int(self.labels.sum())
        return self.n_rows - n1, n1


def build_training_set(epochs: list[EegEpoch]) -> TrainingSet:
    """Decimate labeled epochs into a TrainingSet (label 'target' -> 1)."""
    if not epochs:
        raise InputError("no epochs supplied")
    rows, labels = [], []
    for ep in epochs:
        if ep.label is None:
            raise InputError("every epoch needs a 'target'/'nontarget' label")
        rows.append(decimate_epoch(ep))
        labels.append(1 if ep.label == "target" else 0)
    return TrainingSet(np.vstack(rows), np.asarray(labels))


@dataclass
class OlsFit:
    """OLS result: intercept, per-column coefficients and two-sided p-values."""

    intercept: float
    coef: np.ndarray
    p_values: np.ndarray
    dof: int
    rss: float


@dataclass(frozen=True)
class StepEvent:
    """One stepwise action, kept so selections can be audited after the fact."""

    pass_index: int
    action: str          # "add" | "remove"
    feature: int
    p_value: float


@dataclass
class StepwiseSelection:
    """Ordered selected feature indices plus the trace that produced them."""

    indices: tuple[int, ...]
    trace: tuple[StepEvent, ...]
    stop_reason: str     # "converged" | "max_features" | "iteration_cap"


def _cholesky_tol(G: np.ndarray) -> tuple[np.ndarray | None, int]:
    """Lower Cholesky with a relative pivot check.

    Returns (L, -1) on success or (None, j) with j the first column whose
    pivot collapses, i.e. the first column linearly dependent on its
    predecessors.
    """
    k = G.shape[0]
    L = np.zeros_like(G)
    for j in range(k):
        pivot = G[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= _PIVOT_RTOL * max(abs(G[j, j]), 1e-300):
            return None, j
        L[j, j] = math.sqrt(pivot)
        if j + 1 < k:
            L[j + 1:, j] = (G[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L, -1


def _p_from_t(t_abs: np.ndarray | float, dof: int):
    p = 2.0 * student_t.sf(t_abs, dof)
    return np.nan_to_num(p, nan=1.0)


class _GramOls:
    """Shared sufficient statistics for every OLS subproblem on one data set.

    Z = [1, X]; stores Z'Z, Z'y and y'y once, so fitting any column subset is
    a small dense solve instead of a pass over the rows.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray):
        n = X.shape[0]
        Z = np.empty((n, X.shape[1] + 1))
        Z[:, 0] = 1.0
        Z[:, 1:] = X
        self.G = Z.T @ Z
        self.gy = Z.T @ y
        self.yy = float(y @ y)
        self.n = n
        self.X = X
        self.y = y

    def _cols(self, idx: list[int]) -> list[int]:
        return [0] + [i + 1 for i in idx]

    def factor(self, idx: list[int]):
        cols = self._cols(idx)
        sub = self.G[np.ix_(cols, cols)]
        L, fail = _cholesky_tol(sub)
        return L, fail, cols

    def fit(self, idx: list[int]) -> OlsFit:
        """Exact OLS on the intercept plus the given feature columns."""
        k = len(idx)
        dof = self.n - k - 1
        if dof < 1:
            raise ParameterError(f"{k} features leave no residual degrees of freedom (n={self.n})")
        L, fail, cols = self.factor(idx)
        if L is None:
            bad = idx[fail - 1] if fail > 0 else -1
            raise RankError(f"design matrix is rank deficient at feature column {bad}", bad)
        g = self.gy[cols]
        z = solve_triangular(L, g, lower=True)
        beta = solve_triangular(L.T, z, lower=False)
        # per-row residuals: the telescoped y'y - b'g form cancels
        # catastrophically on near-perfect fits and poisons the t-tests
        resid = self.y - beta[0] - self.X[:, idx] @ beta[1:]
        rss = float(resid @ resid)
        sigma2 = rss / dof
        Linv = solve_triangular(L, np.eye(len(cols)), lower=True)
        inv_diag = (Linv ** 2).sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            se = np.sqrt(sigma2 * inv_diag)
            t_abs = np.abs(beta) / se
        p = _p_from_t(t_abs, dof)
        return OlsFit(float(beta[0]), beta[1:].copy(), p[1:].copy(), dof, rss)

    def scan_candidates(self, idx: list[int], candidates: np.ndarray):
        """Insertion p-value of each candidate added alone to the current set.

        Uses partitioned regression on the shared Gram matrix: for candidate c
        with residualized squared norm s_c (the Cholesky pivot), the candidate
        coefficient is (x~_c . y) / s_c and the residual sum of squares drops
        by coef^2 * s_c.  Identical to refitting each augmented model.
        Candidates whose pivot collapses (collinear with the current set) get
        p = inf and are reported in the second return value.
        """
        k = len(idx)
        dof = self.n - (k + 1) - 1
        if dof < 1 or candidates.size == 0:
            return np.full(candidates.size, np.inf), np.zeros(candidates.size, bool)
        L, fail, cols = self.factor(idx)
        if L is None:
            raise InputError("current selection became rank deficient")
        g = self.gy[cols]
        z = solve_triangular(L, g, lower=True)
        rss_base = max(self.yy - float(z @ z), 0.0)
        cand_cols = candidates + 1
        B = self.G[np.ix_(cols, cand_cols)]
        V = solve_triangular(L, B, lower=True)
        pivots = self.G[cand_cols, cand_cols] - (V ** 2).sum(axis=0)
        degenerate = pivots <= _PIVOT_RTOL * np.maximum(np.abs(self.G[cand_cols, cand_cols]), 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = (self.gy[cand_cols] - V.T @ z) / pivots
            rss_new = np.maximum(rss_base - coef ** 2 * pivots, 0.0)
            sigma2 = rss_new / dof
            t_abs = np.abs(coef) / np.sqrt(sigma2 / pivots)
        p = _p_from_t(t_abs, dof)
        if rss_base == 0.0:
            # the current fit is already perfect; nothing can improve it
            p = np.ones_like(p)
        p = np.where(degenerate, np.inf, p)
        return p, degenerate


def ols_fit(X: np.ndarray, y: np.ndarray) -> OlsFit:
    """OLS of y on X with an implicit intercept.

    p_values[i] is the two-sided t-test p-value of column i on n - k - 1
    degrees of freedom.  Raises RankError (with the first offending column
    index) when X plus the intercept is rank deficient.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ShapeError(f"y shape {y.shape} does not match {X.shape[0]} rows")
    return _GramOls(X, y).fit(list(range(X.shape[1])))


def stepwise_select(
    ts: TrainingSet,
    p_in: float = P_IN_DEFAULT,
    p_out: float = P_OUT_DEFAULT,
    max_features: int = MAX_FEATURES_DEFAULT,
    max_passes: int | None = None,
) -> StepwiseSelection:
    """Forward/backward stepwise OLS feature selection.

    Each pass adds at most one feature (smallest insertion p-value, if below
    p_in) and removes at most one (largest refit p-value, if above p_out);
    convergence is a pass with no change.  Ties break toward the lowest
    feature index.  Raises EmptySelectionError when no feature is ever
    admitted (e.g. labels carry no information at all).
    """
    if not 0 < p_in <= 1 or not 0 < p_out <= 1:
        raise ParameterError(f"p thresholds must be in (0, 1], got p_in={p_in} p_out={p_out}")
    if max_features < 1:
        raise ParameterError(f"max_features must be >= 1, got {max_features}")
    d = ts.n_features
    if max_passes is None:
        max_passes = 2 * d
    # forward fits use k+1 regressors and need >= 1 residual dof
    cap = min(max_features, ts.n_rows - 3)
    if cap < 1:
        raise ParameterError(f"too few rows ({ts.n_rows}) to select even one feature")

    gram = _GramOls(ts.features, ts.labels.astype(np.float64))
    selected: list[int] = []
    in_set = np.zeros(d, dtype=bool)
    trace: list[StepEvent] = []
    stop_reason = "iteration_cap"

    for pass_index in range(max_passes):
        updated = False

        if len(selected) < cap:
            candidates = np.flatnonzero(~in_set)
            p_cand, _ = gram.scan_candidates(selected, candidates)
            if p_cand.size:
                best = int(np.argmin(p_cand))      # first minimum: lowest index wins ties
                if p_cand[best] < p_in:
                    feature = int(candidates[best])
                    selected.append(feature)
                    in_set[feature] = True
                    trace.append(StepEvent(pass_index, "add", feature, float(p_cand[best])))
                    updated = True

        if selected:
            fit = gram.fit(selected)
            worst_p = np.max(fit.p_values)
            if worst_p > p_out:
                ties = [selected[i] for i in np.flatnonzero(fit.p_values == worst_p)]
                feature = min(ties)
                selected.remove(feature)
                in_set[feature] = False
                trace.append(StepEvent(pass_index, "remove", feature, float(worst_p)))
                updated = True

        if not updated:
            stop_reason = "max_features" if len(selected) >= cap else "converged"
            break

    if not selected:
        raise EmptySelectionError(
            f"no feature reached insertion p < {p_in}; labels may carry no signal"
        )
    return StepwiseSelection(tuple(selected), tuple(trace), stop_reason)


def fit_discriminant(features: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, float]:
    """Two-class LDA on already-selected columns: returns (weights, offset).

    weights solve pooled_scatter @ w = mu1 - mu0 through an SVD-based least
    squares; when the pooled within-class scatter is singular its diagonal is
    lifted by 1e-9 * trace / k first.  The offset places zero at the midpoint
    of the class means and the sign is fixed so class 1 scores higher on
    average.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    n0, n1 = int((y == 0).sum()), int((y == 1).sum())
    if n0 < 2 or n1 < 2:
        raise DegenerateClassError(f"need >= 2 rows per class, got {n0} and {n1}")
    mu0 = X[y == 0].mean(axis=0)
    mu1 = X[y == 1].mean(axis=0)
    c0 = X[y == 0] - mu0
    c1 = X[y == 1] - mu1
    scatter = (c0.T @ c0 + c1.T @ c1) / (n0 + n1 - 2)
    k = X.shape[1]
    L, fail = _cholesky_tol(scatter)
    if L is None:
        trace_total = float(np.trace(scatter))
        eps = 1e-9 * trace_total / k if trace_total > 0 else 1e-12
        scatter = scatter + eps * np.eye(k)
    weights = svd_lstsq(scatter, mu1 - mu0)[0]
    offset = -float(weights @ (mu0 + mu1) / 2.0)
    if float(mu1 @ weights) + offset < float(mu0 @ weights) + offset:
        weights = -weights
        offset = -offset
    return weights, offset


@dataclass
class TrainedModel:
    """Selected feature indices plus discriminant weights and offset."""

    selected: tuple[int, ...]
    weights: np.ndarray
    offset: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.selected = tuple(int(i) for i in self.selected)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(set(self.selected)) != len(self.selected):
            raise InputError("selected indices must be unique")
        if any(i < 0 for i in self.selected):
            raise InputError("selected indices must be >= 0")
        if self.weights.shape != (len(self.selected),):
            raise ShapeError(
                f"{len(self.selected)} selected indices but weight shape {self.weights.shape}"
            )

    @property
    def feature_length(self) -> int:
        return int(self.metadata.get("feature_length", FEATURE_LENGTH))


def train(
    ts: TrainingSet,
    p_in: float = P_IN_DEFAULT,
    p_out: float = P_OUT_DEFAULT,
    max_features: int = MAX_FEATURES_DEFAULT,
    metadata: dict | None = None,
) -> TrainedModel:
    """Stepwise selection followed by LDA on the surviving columns."""
    n0, n1 = ts.class_counts()
    if n0 < MIN_CLASS_ROWS or n1 < MIN_CLASS_ROWS:
        raise DegenerateClassError(
            f"need >= {MIN_CLASS_ROWS} rows per class, got {n0} nontarget / {n1} target"
        )
    selection = stepwise_select(ts, p_in=p_in, p_out=p_out, max_features=max_features)
    cols = ts.features[:, list(selection.indices)]
    weights, offset = fit_discriminant(cols, ts.labels)
    meta = {
        "p_in": p_in,
        "p_out": p_out,
        "max_features": max_features,
        "stop_reason": selection.stop_reason,
        "n_rows": ts.n_rows,
        "n_target": n1,
        "feature_length": ts.n_features,
        "layout_hash": feature_layout_hash() if ts.n_features == FEATURE_LENGTH else "",
    }
    if metadata:
        meta.update(metadata)
    return TrainedModel(selection.indices, weights, offset, meta)


def score(model: TrainedModel, features: np.ndarray) -> float:
    """Discriminant score of one feature vector: weights . fv[selected] + offset."""
    fv = np.asarray(features, dtype=np.float64)
    if fv.shape != (model.feature_length,):
        raise ShapeError(f"expected feature vector of length {model.feature_length}, got {fv.shape}")
    return float(fv[list(model.selected)] @ model.weights + model.offset)


def score_rows(model: TrainedModel, rows: np.ndarray) -> np.ndarray:
    """Score many feature vectors at once; rows is (n, feature_length)."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.feature_length:
        raise ShapeError(f"expected (n, {model.feature_length}), got {rows.shape}")
    return rows[:, list(model.selected)] @ model.weights + model.offset


def rank_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties averaged)."""
    from scipy.stats import rankdata

    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n1 = int((labels == 1).sum())
    n0 = int((labels == 0).sum())
    if n0 == 0 or n1 == 0:
        raise DegenerateClassError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[labels == 1].sum() - n1 * (n1 + 1) / 2.0) / (n0 * n1))


def model_to_payload(model: TrainedModel) -> dict:
    """JSON-ready dict; floats survive the round trip bit for bit via repr."""
    return {
        "format": MODEL_FORMAT,
        "selected": list(model.selected),
        "weights": model.weights.tolist(),
        "offset": model.offset,
        "metadata": model.metadata,
    }


def model_from_payload(doc: dict) -> TrainedModel:
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise InputError(f"payload is not a {MODEL_FORMAT} document")
    for key in ("selected", "weights", "offset"):
        if key not in doc:
            raise InputError(f"model payload missing field {key!r}")
    return TrainedModel(
        tuple(doc["selected"]),
        np.asarray(doc["weights"], dtype=np.float64),
        float(doc["offset"]),
        dict(doc.get("metadata", {})),
    )


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_payload(model)))


def load_model(path: str | Path) -> TrainedModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read model from {path}: {exc}") from exc
    return model_from_payload(doc)
