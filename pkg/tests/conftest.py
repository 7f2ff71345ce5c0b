"""Shared numerical test helpers."""

import numpy as np
import pytest


def central_diff(f, x0, step=1e-5):
    """Central finite-difference gradient of scalar f over an array argument."""
    x0 = np.asarray(x0, dtype=float)
    grad = np.zeros_like(x0)
    it = np.nditer(x0, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x0.copy()
        xm = x0.copy()
        xp[idx] += step
        xm[idx] -= step
        grad[idx] = (f(xp) - f(xm)) / (2 * step)
        it.iternext()
    return grad


def rel_err(analytic, numeric, floor=1e-6):
    """Worst-case entrywise relative error with a small-denominator floor."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = np.maximum(np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
