"""Atomic bilevel update: N inner model steps, one outer weighting step.

The inner loop runs plain full-batch gradient descent on the quadratic loss
over the inner split.  The outer step differentiates the outer-split loss
with respect to the weighting parameters *through the unrolled inner
trajectory only*: the weighting's direct appearance in the outer quadratic
form is held constant.  Everything here is exact reverse-mode differentiation
of the unrolled updates; because the model is linear and the loss quadratic,
the Hessian-vector products have closed forms and no autodiff is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .data import WindowSet
from .errors import InvalidDimensionError, InvalidSplitError, NumericError
from .model import LinearForecaster
from .timing import PhaseTimer, phase
from .weighting import (
    WeightingParams,
    chain_sigma_grad_to_raw,
    materialize,
    normalize_scale,
)


@dataclass(frozen=True)
class SplitPair:
    """Inner/outer window sets, disjoint in source-row coverage."""

    inner: WindowSet
    outer: WindowSet

    def __post_init__(self):
        if len(self.inner) == 0 or len(self.outer) == 0:
            raise InvalidSplitError("inner and outer splits must be nonempty")
        if (
            self.inner.history != self.outer.history
            or self.inner.horizon != self.outer.horizon
        ):
            raise InvalidDimensionError("inner/outer window shapes disagree")
        if _coverage_overlaps(self.inner, self.outer):
            raise InvalidSplitError("inner and outer windows share source rows")


def _covered_mask(ws: WindowSet, hi: int) -> np.ndarray:
    """Boolean mask over source rows [0, hi) touched by any window."""
    span = ws.history + ws.horizon
    diff = np.zeros(hi + 1, dtype=int)
    np.add.at(diff, ws.starts, 1)
    np.add.at(diff, ws.starts + span, -1)
    return np.cumsum(diff)[:hi] > 0


def _coverage_overlaps(a: WindowSet, b: WindowSet) -> bool:
    hi = max(a.coverage()[1], b.coverage()[1])
    return bool(np.any(_covered_mask(a, hi) & _covered_mask(b, hi)))


def make_split_pair(windows: WindowSet, inner_fraction: float = 0.5) -> SplitPair:
    """Chronological inner/outer split of one window set.

    The window list is cut at the given fraction; inner windows whose
    coverage runs past the first outer window's start are dropped so the two
    sides share no source rows (an embargo at the boundary).
    """
    n = len(windows)
    cut = int(np.floor(n * inner_fraction))
    if cut < 1 or cut >= n:
        raise InvalidSplitError(f"cannot split {n} windows at fraction {inner_fraction}")
    inner = windows.slice(0, cut)
    outer = windows.slice(cut, n)
    span = windows.history + windows.horizon
    boundary = int(outer.starts.min())
    keep = inner.starts + span <= boundary
    if not np.any(keep):
        raise InvalidSplitError(
            "inner split empty after dropping boundary-straddling windows"
        )
    last = int(np.max(np.nonzero(keep)[0])) + 1
    return SplitPair(inner.slice(0, last), outer)


@dataclass(frozen=True)
class AtomicConfig:
    inner_steps: int = 1
    inner_lr: float = 0.05
    eta: float = 0.05
    normalize: bool = True

    def __post_init__(self):
        if self.inner_steps < 1:
            raise InvalidDimensionError("inner_steps must be >= 1")
        if self.inner_lr <= 0:
            raise InvalidDimensionError("inner_lr must be positive")
        if self.eta < 0:
            raise InvalidDimensionError("eta must be nonnegative")


def _inner_trajectory(
    theta0: LinearForecaster,
    L: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    cfg: AtomicConfig,
    timer: PhaseTimer | None,
):
    """Run N full-batch GD steps; returns per-step (W, b) including theta_N."""
    B = X.shape[0]
    A_cols = solve_triangular(L, np.eye(L.shape[0]), lower=True)
    A = A_cols.T @ A_cols  # Sigma^-1, formed from the factor
    W, b = theta0.weights.copy(), theta0.bias.copy()
    traj = [(W.copy(), b.copy())]
    for _ in range(cfg.inner_steps):
        with phase(timer, "inner_fwd"):
            E = Y - (X @ W.T + b)
            z = solve_triangular(L, E.T, lower=True)
            loss = float(np.sum(z * z) / B)
        if not np.isfinite(loss):
            raise NumericError("inner loop diverged; reduce inner_lr")
        with phase(timer, "inner_bwd"):
            AE = A @ E.T
            W = W + (2.0 * cfg.inner_lr / B) * (AE @ X)
            b = b + (2.0 * cfg.inner_lr / B) * AE.sum(axis=1)
        traj.append((W.copy(), b.copy()))
    return A, traj


def _backward_hypergrad(
    A: np.ndarray,
    traj,
    X: np.ndarray,
    Y: np.ndarray,
    Xo: np.ndarray,
    Yo: np.ndarray,
    cfg: AtomicConfig,
) -> np.ndarray:
    """Reverse-mode pass over the unrolled trajectory.

    Propagates the outer-loss adjoint through each GD step (its Jacobian is
    I - lr * Hessian, constant in theta for a quadratic loss) and accumulates
    the mixed derivative of each step with respect to Sigma.
    """
    B = X.shape[0]
    Bo = Xo.shape[0]
    Wn, bn = traj[-1]
    R = Yo - (Xo @ Wn.T + bn)
    AR = A @ R.T
    lam_W = -(2.0 / Bo) * (AR @ Xo)
    lam_b = -(2.0 / Bo) * AR.sum(axis=1)
    grad_sigma = np.zeros_like(A)
    scale = 2.0 * cfg.inner_lr / B
    for k in range(len(traj) - 2, -1, -1):
        Wk, bk = traj[k]
        U = lam_W @ X.T + lam_b[:, None]  # T x B sensitivity rows
        Ek = (Y - (X @ Wk.T + bk)).T  # T x B residual columns
        grad_sigma -= scale * (A @ Ek @ U.T @ A)
        AU = A @ U
        lam_W = lam_W - scale * (AU @ X)
        lam_b = lam_b - scale * AU.sum(axis=1)
    return grad_sigma


def hypergradient(
    theta0: LinearForecaster,
    w: WeightingParams,
    split: SplitPair,
    cfg: AtomicConfig,
    timer: PhaseTimer | None = None,
) -> np.ndarray:
    """Gradient of the outer loss w.r.t. raw weighting entries, through the
    inner trajectory only (direct outer occurrence of Sigma held fixed)."""
    grad, _ = _hypergrad_and_model(theta0, w, split, cfg, timer)
    return grad


def _hypergrad_and_model(theta0, w, split, cfg, timer):
    if theta0.horizon != w.horizon or split.inner.horizon != w.horizon:
        raise InvalidDimensionError("model/weighting/split horizons disagree")
    L, _ = materialize(w)
    X, Y = split.inner.as_samples()
    Xo, Yo = split.outer.as_samples()
    A, traj = _inner_trajectory(theta0, L, X, Y, cfg, timer)
    with phase(timer, "outer_fwd"):
        Wn, bn = traj[-1]
        Ro = Yo - (Xo @ Wn.T + bn)
        zo = solve_triangular(L, Ro.T, lower=True)
        outer_loss = float(np.sum(zo * zo) / Xo.shape[0])
    if not np.isfinite(outer_loss):
        raise NumericError("outer loss diverged; reduce inner_lr")
    with phase(timer, "outer_bwd"):
        grad_sigma = _backward_hypergrad(A, traj, X, Y, Xo, Yo, cfg)
        grad_raw = chain_sigma_grad_to_raw(w, grad_sigma)
    model_n = LinearForecaster(traj[-1][0], traj[-1][1], theta0.history, theta0.horizon)
    return grad_raw, model_n


def atomic_update(
    model: LinearForecaster,
    w: WeightingParams,
    split: SplitPair,
    cfg: AtomicConfig,
    timer: PhaseTimer | None = None,
) -> tuple[WeightingParams, LinearForecaster]:
    """N inner GD steps on the model, then one hypergradient step on the
    weighting.  With eta = 0 the weighting is returned untouched."""
    if cfg.eta == 0.0:
        L, _ = materialize(w)
        X, Y = split.inner.as_samples()
        _, traj = _inner_trajectory(model, L, X, Y, cfg, timer)
        model_n = LinearForecaster(
            traj[-1][0], traj[-1][1], model.history, model.horizon
        )
        return w, model_n
    grad_raw, model_n = _hypergrad_and_model(model, w, split, cfg, timer)
    new_w = w.with_raw(w.raw - cfg.eta * grad_raw)
    if cfg.normalize:
        new_w = normalize_scale(new_w)
    return new_w, model_n
