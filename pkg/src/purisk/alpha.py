"""Upper bound on the positive share of the unlabeled pool, and the threshold it implies.

Pipeline: reflected Gaussian KDEs of positive and unlabeled average scores,
their ratio at every unlabeled score (monotonized and median-smoothed), the
curve ``D(alpha) = alpha - mean(min(alpha * r, 1))`` on a grid, and the grid
point where ``D`` bends upward hardest (maximum smoothed second derivative).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FlatCurve, NonPositiveBandwidth, TooFewScores, ValidationError

RATIO_EPS = 1e-10
FLAT_TOL = 1e-6
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_DIRECT_EVAL_LIMIT = 50_000_000
_GRID_POINTS = 4097


def silverman_bandwidth(x: np.ndarray) -> float:
    """Rule-of-thumb bandwidth ``0.9 * min(sd, IQR/1.34) * n^(-1/5)``.

    Zero spread falls back to the sd, then ``|x[0]|``, then 1, so the result
    is always positive and finite.
    """
    x = np.asarray(x, dtype=np.float64)
    hi = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    lo = min(hi, float(q75 - q25) / 1.34)
    if lo <= 0:
        lo = hi or abs(float(x[0])) or 1.0
    return 0.9 * lo * len(x) ** -0.2


@dataclass(frozen=True)
class DensityEstimate:
    """Gaussian KDE on [0, 1] with reflection at both boundaries."""

    sample: np.ndarray
    bandwidth: float

    @property
    def n(self) -> int:
        return len(self.sample)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if x.size * self.n > _DIRECT_EVAL_LIMIT:
            # large inputs: exact values on a fine grid, linear interpolation between
            grid = np.linspace(0.0, 1.0, _GRID_POINTS)
            return np.interp(x, grid, self._direct(grid))
        return self._direct(x)

    def _direct(self, x: np.ndarray) -> np.ndarray:
        h = self.bandwidth
        out = np.empty(x.shape)
        step = max(1, 4_000_000 // max(self.n, 1))
        for lo in range(0, x.size, step):
            xc = x[lo:lo + step, None]
            s = self.sample[None, :]
            k = (np.exp(-0.5 * ((xc - s) / h) ** 2)
                 + np.exp(-0.5 * ((xc + s) / h) ** 2)
                 + np.exp(-0.5 * ((xc - (2.0 - s)) / h) ** 2))
            out[lo:lo + step] = k.sum(axis=1) / (self.n * h * _SQRT_2PI)
        return out


def estimate_kde(scores, bandwidth_rule="silverman") -> DensityEstimate:
    """Fit a reflected KDE; ``bandwidth_rule`` is ``"silverman"`` or a fixed width."""
    x = np.sort(np.asarray(scores, dtype=np.float64))
    if x.size < 5:
        raise TooFewScores(f"KDE needs at least 5 scores, got {x.size}")
    if np.any((x < 0) | (x > 1)) or not np.all(np.isfinite(x)):
        raise ValidationError("scores must lie in [0, 1]")
    if bandwidth_rule == "silverman":
        h = silverman_bandwidth(x)
    else:
        h = float(bandwidth_rule)
        if not h > 0:
            raise NonPositiveBandwidth(f"bandwidth must be positive, got {bandwidth_rule!r}")
    return DensityEstimate(x, h)


@dataclass(frozen=True)
class DensityRatio:
    y: np.ndarray         # unlabeled scores, ascending
    raw: np.ndarray
    monotone: np.ndarray
    smoothed: np.ndarray


def rolling_median(a: np.ndarray, window: int) -> np.ndarray:
    """Centered running median; windows are truncated at the ends."""
    if window < 1 or window % 2 == 0:
        raise ValidationError(f"median window must be odd and >= 1, got {window}")
    n, k = len(a), window // 2
    if window == 1 or n == 0:
        return a.copy()
    out = np.empty(n)
    if n > 2 * k:
        out[k:n - k] = np.median(np.lib.stride_tricks.sliding_window_view(a, window), axis=1)
    for i in list(range(min(k, n))) + list(range(max(n - k, k), n)):
        out[i] = np.median(a[max(0, i - k):i + k + 1])
    return out


def density_ratio(pos: DensityEstimate, unl: DensityEstimate, y_u, median_window: int = 9
                  ) -> DensityRatio:
    y = np.asarray(y_u, dtype=np.float64)
    if np.any(np.diff(y) < 0):
        raise ValidationError("unlabeled scores must be sorted ascending")
    fp, fu = pos(y), unl(y)
    raw = np.empty(len(y))
    last = 0.0
    for i in range(len(y)):
        # sparse tails: reuse the last well-defined ratio instead of dividing by ~0
        if fu[i] < RATIO_EPS:
            raw[i] = last
        else:
            raw[i] = last = fp[i] / fu[i]
    mono = np.maximum.accumulate(raw)
    smooth = np.maximum.accumulate(rolling_median(mono, median_window))
    return DensityRatio(y, raw, mono, smooth)


@dataclass(frozen=True)
class DCurve:
    alpha: np.ndarray
    d: np.ndarray            # clamped to [0, alpha] and made non-decreasing
    d_raw: np.ndarray        # alpha - mean(min(alpha * r, 1)) before that
    second_derivative: np.ndarray  # smoothed; NaN where the stencil does not fit
    stencil: int
    smooth_window: int


def expected_posterior(alpha: np.ndarray, r: np.ndarray) -> np.ndarray:
    """``mean(min(alpha * r, 1))`` for each alpha, via sorted ratios and prefix sums."""
    rs = np.sort(np.asarray(r, dtype=np.float64))
    prefix = np.concatenate([[0.0], np.cumsum(rs)])
    n = len(rs)
    with np.errstate(divide="ignore"):
        cut = np.searchsorted(rs, 1.0 / alpha, side="left")  # entries with alpha*r < 1
    return (alpha * prefix[cut] + (n - cut)) / n


def build_d_curve(ratio: DensityRatio | np.ndarray, alpha_grid_step: float = 0.001,
                  stencil: int = 5, smooth_window: int = 5) -> DCurve:
    if not 0 < alpha_grid_step <= 0.1:
        raise ValidationError(f"alpha grid step must lie in (0, 0.1], got {alpha_grid_step}")
    r = ratio.smoothed if isinstance(ratio, DensityRatio) else np.asarray(ratio, dtype=np.float64)
    m = int(round(1.0 / alpha_grid_step))
    alpha = alpha_grid_step * np.arange(1, m + 1)
    d_raw = alpha - expected_posterior(alpha, r)
    d = np.maximum.accumulate(np.clip(d_raw, 0.0, alpha))
    d = np.minimum(d, alpha)
    return DCurve(alpha, d, d_raw, _second_derivative(d, alpha_grid_step, stencil, smooth_window),
                  stencil, smooth_window)


def _second_derivative(d: np.ndarray, step: float, k: int, window: int) -> np.ndarray:
    out = np.full(len(d), np.nan)
    if len(d) <= 2 * k:
        return out
    d2 = (d[2 * k:] - 2.0 * d[k:-k] + d[:-2 * k]) / (k * step) ** 2
    if window > 1 and len(d2) >= window:
        d2 = np.convolve(d2, np.ones(window) / window, mode="valid")
        k += window // 2
    out[k:k + len(d2)] = d2
    return out


def find_alpha_star(curve: DCurve) -> float:
    """Grid point maximizing the smoothed second derivative (smallest alpha on ties)."""
    if len(curve.alpha) < 5:
        raise ValidationError("D curve needs at least 5 grid points")
    d2 = curve.second_derivative
    valid = np.flatnonzero(np.isfinite(d2))
    if valid.size == 0:
        raise FlatCurve("grid too coarse for the second-derivative stencil")
    i = valid[np.argmax(d2[valid])]
    if not d2[i] > FLAT_TOL:
        raise FlatCurve("D has no upward bend; positive and unlabeled scores look alike")
    return float(curve.alpha[i])


def threshold_from_alpha(alpha_star: float, all_avg_scores) -> float:
    """Threshold ``t`` whose positive share ``#{score > t} / N`` is closest to ``alpha_star``.

    Candidates are the distinct scores plus 0 (so every case can be
    positive when no score is 0). Equally close candidates resolve to the
    larger ``t``.
    """
    if not 0 <= alpha_star <= 1:
        raise ValidationError(f"alpha_star must lie in [0, 1], got {alpha_star}")
    s = np.sort(np.asarray(all_avg_scores, dtype=np.float64))
    if s.size == 0:
        raise ValidationError("no scores to threshold")
    cand = np.unique(s)
    if cand[0] > 0:
        cand = np.concatenate([[0.0], cand])
    above = s.size - np.searchsorted(s, cand, side="right")
    gap = np.abs(above - alpha_star * s.size)
    best = np.flatnonzero(gap == gap.min())[-1]
    return float(cand[best])


@dataclass(frozen=True)
class AlphaCalibration:
    alpha_star: float | None
    threshold: float | None
    curve: DCurve
    ratio: DensityRatio
    bandwidths: dict
    grid_step: float
    median_window: int
    diagnostics: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        d2 = self.curve.second_derivative
        return {
            "alpha_star": self.alpha_star,
            "threshold": self.threshold,
            "grid_step": self.grid_step,
            "bandwidths": self.bandwidths,
            "median_window": self.median_window,
            "stencil": self.curve.stencil,
            "smooth_window": self.curve.smooth_window,
            "diagnostics": self.diagnostics,
            "d_curve": [
                [float(a), float(v), None if not np.isfinite(x) else float(x)]
                for a, v, x in zip(self.curve.alpha, self.curve.d, d2)
            ],
        }


def calibrate(positive_scores, unlabeled_scores, all_scores, bandwidth_rule="silverman",
              alpha_grid_step: float = 0.001, median_window: int = 9,
              allow_flat: bool = False) -> AlphaCalibration:
    """Run the full estimate: KDEs, ratio, D curve, alpha* and threshold.

    With ``allow_flat`` a flat curve yields a calibration whose alpha_star
    and threshold are None, with the reason in ``diagnostics``.
    """
    yp = np.asarray(positive_scores, dtype=np.float64)
    yu = np.sort(np.asarray(unlabeled_scores, dtype=np.float64))
    if bandwidth_rule == "silverman":
        # one pooled bandwidth for both densities: separate bandwidths smooth
        # the two samples unequally, which tilts the ratio
        if min(yp.size, yu.size) < 5:
            raise TooFewScores(f"need >= 5 scores per sample, got {yp.size} and {yu.size}")
        bandwidth_rule = silverman_bandwidth(np.concatenate([yp, yu]))
    f_p = estimate_kde(yp, bandwidth_rule)
    f_u = estimate_kde(yu, bandwidth_rule)
    ratio = density_ratio(f_p, f_u, yu, median_window)
    curve = build_d_curve(ratio, alpha_grid_step)
    bw = {"positive": f_p.bandwidth, "unlabeled": f_u.bandwidth}
    try:
        a = find_alpha_star(curve)
    except FlatCurve as exc:
        if not allow_flat:
            raise
        return AlphaCalibration(None, None, curve, ratio, bw, alpha_grid_step, median_window,
                                [f"FlatCurve: {exc}"])
    t = threshold_from_alpha(a, all_scores)
    return AlphaCalibration(a, t, curve, ratio, bw, alpha_grid_step, median_window)
