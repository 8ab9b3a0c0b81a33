"""Per-bag filtering of numeric predictors.

Numeric columns with (relative) zero variance are dropped first; then
highly correlated numeric pairs are broken up one drop at a time.
Indicator columns from categorical features are never filtered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import FeatureCatalog
from .errors import TooFewRows

VARIANCE_RTOL = 1e-12


@dataclass(frozen=True)
class SelectionMask:
    kept: tuple[str, ...]
    dropped_zero_variance: tuple[str, ...]
    dropped_correlated: tuple[tuple[str, str, float], ...]

    def kept_columns(self, design_columns: list[str]) -> np.ndarray:
        """Indices into the design matrix of the columns this mask keeps."""
        kept = set(self.kept)
        return np.array([i for i, c in enumerate(design_columns) if c in kept], dtype=np.intp)

    def to_dict(self) -> dict:
        return {
            "kept": list(self.kept),
            "dropped_zero_variance": list(self.dropped_zero_variance),
            "dropped_correlated": [
                {"dropped": d, "partner": p, "correlation": c} for d, p, c in self.dropped_correlated
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionMask":
        return cls(
            tuple(d["kept"]),
            tuple(d["dropped_zero_variance"]),
            tuple((x["dropped"], x["partner"], x["correlation"]) for x in d["dropped_correlated"]),
        )


def _canonical_rows(X: np.ndarray) -> np.ndarray:
    # Sorting rows makes every floating-point reduction independent of input row order.
    if X.shape[1] == 0:
        return X
    order = np.lexsort(X.T[::-1])
    return X[order]


def exact_abs_corr(X: np.ndarray) -> np.ndarray:
    """|Pearson correlation| between columns with correctly rounded sums.

    Bitwise-identical columns get bitwise-identical rows in the result,
    which the tie-break in the correlation filter depends on.
    """
    n, p = X.shape
    means = [math.fsum(X[:, k]) / n for k in range(p)]
    Z = X - np.array(means)
    ss = [math.fsum(Z[:, k] * Z[:, k]) for k in range(p)]
    out = np.zeros((p, p))
    for a in range(p):
        for b in range(a + 1, p):
            c = math.fsum(Z[:, a] * Z[:, b]) / math.sqrt(ss[a] * ss[b])
            out[a, b] = out[b, a] = min(abs(c), 1.0)
    return out


def select_columns(X: np.ndarray, names: list[str], numeric: np.ndarray,
                   corr_threshold: float = 0.75) -> SelectionMask:
    """Filter the numeric columns of ``X``; non-numeric columns pass through."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise TooFewRows(f"feature selection needs at least 2 rows, got {X.shape[0]}")
    numeric = np.asarray(numeric, dtype=bool)
    num_idx = np.flatnonzero(numeric)
    Xn = _canonical_rows(X[:, num_idx])

    var = Xn.var(axis=0, ddof=1)
    mean_sq = np.mean(Xn * Xn, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        live = (mean_sq > 0) & (var > VARIANCE_RTOL * mean_sq)
    zero_var = [names[num_idx[k]] for k in np.flatnonzero(~live)]

    cand = num_idx[live]  # catalog-ordered design indices
    dropped_corr = []
    if len(cand) > 1:
        corr = exact_abs_corr(Xn[:, live])
        alive = np.ones(len(cand), dtype=bool)
        while True:
            sub = np.where(np.outer(alive, alive), corr, 0.0)
            best = sub.max()
            if best < corr_threshold:
                break
            # first pair in catalog order among those attaining the maximum
            i, j = (int(v) for v in np.argwhere(np.triu(sub == best, k=1))[0])
            n_other = alive.sum() - 1
            # exact sums so that identical columns tie exactly
            mean_i = math.fsum(sub[i]) / n_other
            mean_j = math.fsum(sub[j]) / n_other
            drop, keep = (i, j) if mean_i > mean_j else (j, i)
            alive[drop] = False
            dropped_corr.append((names[cand[drop]], names[cand[keep]], float(corr[i, j])))
        kept_numeric = set(cand[alive].tolist())
    else:
        kept_numeric = set(cand.tolist())

    kept = [n for k, n in enumerate(names) if not numeric[k] or k in kept_numeric]
    return SelectionMask(tuple(kept), tuple(zero_var), tuple(dropped_corr))


def select_features(rows: np.ndarray, catalog: FeatureCatalog,
                    corr_threshold: float = 0.75) -> SelectionMask:
    """Select design columns for one bag's training rows (design-matrix layout)."""
    return select_columns(rows, catalog.design_columns, catalog.design_numeric_mask, corr_threshold)
