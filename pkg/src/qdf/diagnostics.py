"""Label-autocorrelation diagnostics.

Partial correlation between two label steps, controlling for the shared
history: regress each step on the history by OLS, then take the Pearson
correlation of the two residual series.  The matrix form regresses every
step once and reuses the residuals, so it costs O(T) regressions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import SeriesFrame, WindowSet, make_windows
from .errors import (
    InsufficientDataError,
    InvalidDimensionError,
    UndefinedCorrelationError,
)

log = logging.getLogger(__name__)

RIDGE_LAMBDA = 1e-8
VAR_EPS = 1e-12


@dataclass
class PartialCorrReport:
    """Symmetric partial-correlation matrix plus per-step residual variance."""

    matrix: np.ndarray
    cond_var: np.ndarray
    meta: dict
    flags: list[str] = field(default_factory=list)


def _design_and_labels(windows: WindowSet, variable: int | None):
    """Intercept-plus-history design and label matrix, optionally pooled
    across variables (each variable regressed on its own history)."""
    X, Y = windows.arrays()
    n, H, D = X.shape
    if variable is not None:
        if not 0 <= variable < D:
            raise InvalidDimensionError(f"variable {variable} out of range (D={D})")
        hist = X[:, :, variable]
        labels = Y[:, :, variable]
    else:
        hist = X.transpose(0, 2, 1).reshape(n * D, H)
        labels = Y.transpose(0, 2, 1).reshape(n * D, Y.shape[1])
    design = np.column_stack([np.ones(hist.shape[0]), hist])
    return design, labels


def _fit_residuals(design: np.ndarray, labels: np.ndarray, flags: list[str]) -> np.ndarray:
    coef, _, rank, _ = np.linalg.lstsq(design, labels, rcond=None)
    if rank < design.shape[1]:
        flags.append("ridge_fallback")
        log.warning("rank-deficient design (rank %d < %d); ridge fallback",
                    rank, design.shape[1])
        gram = design.T @ design + RIDGE_LAMBDA * np.eye(design.shape[1])
        coef = np.linalg.solve(gram, design.T @ labels)
    return labels - design @ coef


def partial_correlation(
    windows: WindowSet, t: int, t2: int, variable: int = 0
) -> float:
    """Partial correlation of label steps t and t2 (0-based) given history."""
    T = windows.horizon
    if t == t2:
        raise InvalidDimensionError("step indices must differ")
    if not (0 <= t < T and 0 <= t2 < T):
        raise InvalidDimensionError(f"step indices out of range (T={T})")
    design, labels = _design_and_labels(windows, variable)
    if design.shape[0] < windows.history + 3:
        raise InsufficientDataError(
            f"need at least H+3={windows.history + 3} samples, have {design.shape[0]}"
        )
    flags: list[str] = []
    resid = _fit_residuals(design, labels[:, [t, t2]], flags)
    v = resid.var(axis=0)
    if np.any(v < VAR_EPS):
        raise UndefinedCorrelationError(
            "residual variance below 1e-12; correlation undefined"
        )
    r = resid - resid.mean(axis=0)
    return float((r[:, 0] @ r[:, 1]) / np.sqrt((r[:, 0] @ r[:, 0]) * (r[:, 1] @ r[:, 1])))


def partial_corr_matrix(
    frame: SeriesFrame,
    history: int = 8,
    horizon: int = 96,
    subsample: int = 5000,
    variable: int | None = None,
    seed: int = 0,
) -> PartialCorrReport:
    """All pairwise partial correlations of the label steps.

    Windows are subsampled (seeded, without replacement) when more than
    ``subsample`` are available.  ``variable=None`` pools samples across
    variables into a single estimate.
    """
    windows = make_windows(frame, history, horizon)
    n = len(windows)
    if subsample < n:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(n, size=subsample, replace=False))
        windows = _select_windows(windows, keep)
    design, labels = _design_and_labels(windows, variable)
    if design.shape[0] < history + 3:
        raise InsufficientDataError(
            f"need at least H+3={history + 3} samples after subsampling"
        )
    flags: list[str] = []
    resid = _fit_residuals(design, labels, flags)
    cond_var = resid.var(axis=0)
    dead = cond_var < VAR_EPS
    centered = resid - resid.mean(axis=0)
    norms = np.sqrt(np.sum(centered**2, axis=0))
    z = centered / np.maximum(norms, np.sqrt(VAR_EPS * centered.shape[0]))
    corr = z.T @ z
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    if np.any(dead):
        for t in np.nonzero(dead)[0]:
            flags.append(f"zero_variance_step_{int(t)}")
        corr[dead, :] = 0.0
        corr[:, dead] = 0.0
        np.fill_diagonal(corr, 1.0)
    meta = {
        "history": history,
        "horizon": horizon,
        "samples": int(design.shape[0]),
        "windows": len(windows),
        "variable": variable if variable is not None else "pooled",
        "subsample": subsample,
    }
    return PartialCorrReport(corr, cond_var, meta, flags)


def _select_windows(windows: WindowSet, idx: np.ndarray) -> WindowSet:
    X, Y = windows.arrays()
    picked = WindowSet(X[idx], Y[idx], windows.starts[idx])
    return picked


def fraction_above(report: PartialCorrReport, threshold: float) -> float:
    """Share of off-diagonal coefficients with magnitude above threshold."""
    T = report.matrix.shape[0]
    if T < 2:
        return 0.0
    off = ~np.eye(T, dtype=bool)
    return float(np.mean(np.abs(report.matrix[off]) > threshold))
