import numpy as np
import pytest

from conftest import central_diff, rel_err
from qdf.errors import EmptyInputError, InvalidDimensionError, NumericError
from qdf.objective import (
    ResidualBatch,
    grad_wrt_residual,
    grad_wrt_weighting,
    mse_loss,
    quadratic_loss,
)
from qdf.weighting import (
    WeightingMode,
    WeightingParams,
    identity_params,
    params_from_matrix,
    softplus_inv,
)


def known_params():
    raw = np.array([[softplus_inv(2.0), 0.0], [1.0, softplus_inv(2.0)]])
    return WeightingParams(raw, 2)  # L = [[2,0],[1,2]], Sigma = [[4,2],[2,5]]


def test_quadratic_loss_identity_is_squared_norm():
    batch = ResidualBatch(np.array([[1.0, 2.0]]))
    assert quadratic_loss(batch, identity_params(2)) == pytest.approx(5.0, abs=1e-12)


def test_quadratic_loss_known_factor():
    batch = ResidualBatch(np.array([[2.0, 3.0]]))
    assert quadratic_loss(batch, known_params()) == pytest.approx(2.0, abs=1e-12)


def test_quadratic_loss_diagonal_weighting():
    batch = ResidualBatch(np.array([[2.0, 2.0]]))
    w = params_from_matrix(np.diag([1.0, 4.0]))
    assert quadratic_loss(batch, w) == pytest.approx(5.0, abs=1e-10)


def test_mse_loss_examples():
    assert mse_loss(ResidualBatch(np.array([[1.0, 2.0, 3.0]]))) == 14.0
    assert mse_loss(ResidualBatch(np.zeros((1, 4)))) == 0.0
    assert mse_loss(ResidualBatch(np.array([[1.0, 0.0], [0.0, 1.0]]))) == 1.0


def test_empty_batch_raises():
    empty = ResidualBatch(np.zeros((0, 3)))
    with pytest.raises(EmptyInputError):
        mse_loss(empty)
    with pytest.raises(EmptyInputError):
        quadratic_loss(empty, identity_params(3))


def test_horizon_mismatch_raises():
    with pytest.raises(InvalidDimensionError):
        quadratic_loss(ResidualBatch(np.ones((2, 3))), identity_params(2))


def test_nonfinite_residuals_rejected():
    with pytest.raises(NumericError):
        ResidualBatch(np.array([[1.0, np.nan]]))


def test_identity_equivalence_with_mse(rng):
    for _ in range(50):
        T = int(rng.integers(1, 9))
        B = int(rng.integers(1, 6))
        batch = ResidualBatch(rng.standard_normal((B, T)) * 3)
        q = quadratic_loss(batch, identity_params(T))
        m = mse_loss(batch)
        assert q == pytest.approx(m, rel=1e-12)


def test_positivity_and_zero_iff_zero_residual(rng):
    for _ in range(30):
        T = int(rng.integers(1, 6))
        w = WeightingParams(rng.uniform(-2, 2, size=(T, T)), T)
        batch = ResidualBatch(rng.standard_normal((3, T)))
        assert quadratic_loss(batch, w) > 0
        assert quadratic_loss(ResidualBatch(np.zeros((3, T))), w) == 0.0


def test_scale_covariance(rng):
    for _ in range(10):
        T = int(rng.integers(1, 6))
        base = rng.standard_normal((T, T))
        sigma = base @ base.T + 2 * np.eye(T)
        batch = ResidualBatch(rng.standard_normal((4, T)))
        c = float(rng.uniform(0.2, 5.0))
        l1 = quadratic_loss(batch, params_from_matrix(sigma))
        l2 = quadratic_loss(batch, params_from_matrix(c * sigma))
        assert l2 == pytest.approx(l1 / c, rel=1e-10)


def test_grad_wrt_residual_identity():
    batch = ResidualBatch(np.array([[1.0, 2.0]]))
    g = grad_wrt_residual(batch, identity_params(2))
    assert np.allclose(g, [[2.0, 4.0]], atol=1e-12)


def test_grad_wrt_residual_known_factor():
    batch = ResidualBatch(np.array([[2.0, 3.0]]))
    g = grad_wrt_residual(batch, known_params())
    assert np.allclose(g, [[0.5, 1.0]], atol=1e-12)


def test_grad_wrt_residual_zero_at_zero():
    g = grad_wrt_residual(ResidualBatch(np.zeros((2, 3))), identity_params(3))
    assert np.all(g == 0.0)


def test_grad_wrt_residual_matches_finite_differences(rng):
    for _ in range(20):
        T = int(rng.integers(1, 7))
        B = int(rng.integers(1, 5))
        w = WeightingParams(rng.uniform(-1.5, 1.5, size=(T, T)), T)
        r0 = rng.standard_normal((B, T))
        fd = central_diff(lambda r: quadratic_loss(ResidualBatch(r), w), r0)
        assert rel_err(grad_wrt_residual(ResidualBatch(r0), w), fd) <= 1e-5


def test_grad_wrt_weighting_zero_residuals():
    w = WeightingParams(np.random.default_rng(0).uniform(-1, 1, (3, 3)), 3)
    g = grad_wrt_weighting(ResidualBatch(np.zeros((2, 3))), w)
    assert np.all(g == 0.0)


def test_grad_wrt_weighting_matches_finite_differences(rng):
    for _ in range(20):
        T = int(rng.integers(1, 7))
        B = int(rng.integers(1, 5))
        raw0 = rng.uniform(-1.5, 1.5, size=(T, T))
        batch = ResidualBatch(rng.standard_normal((B, T)))

        def loss_of(raw):
            return quadratic_loss(batch, WeightingParams(raw, T))

        fd = central_diff(loss_of, raw0)
        analytic = grad_wrt_weighting(batch, WeightingParams(raw0, T))
        assert rel_err(np.tril(analytic), np.tril(fd)) <= 1e-5
        assert np.all(np.triu(analytic, k=1) == 0.0)


def test_grad_wrt_weighting_spec_example_t2():
    batch = ResidualBatch(np.array([[1.0, 1.0]]))
    p = identity_params(2)
    fd = central_diff(lambda raw: quadratic_loss(batch, WeightingParams(raw, 2)), p.raw)
    analytic = grad_wrt_weighting(batch, p)
    assert np.max(np.abs(np.tril(analytic) - np.tril(fd))) <= 1e-6


@pytest.mark.parametrize(
    "mode,check",
    [
        (WeightingMode.DIAG_ONLY, lambda g: np.all(np.tril(g, k=-1) == 0.0)),
        (WeightingMode.OFFDIAG_ONLY, lambda g: np.all(np.diagonal(g) == 0.0)),
    ],
)
def test_grad_wrt_weighting_mode_masks(rng, mode, check):
    w = WeightingParams(rng.uniform(-1, 1, (4, 4)), 4, mode)
    g = grad_wrt_weighting(ResidualBatch(rng.standard_normal((3, 4))), w)
    assert check(g)


def test_masked_gradients_match_finite_differences(rng):
    # FD through the masked materialization must agree with the masked grad
    for mode in (WeightingMode.DIAG_ONLY, WeightingMode.OFFDIAG_ONLY):
        T = 4
        raw0 = rng.uniform(-1, 1, (T, T))
        batch = ResidualBatch(rng.standard_normal((5, T)))

        def loss_of(raw):
            return quadratic_loss(batch, WeightingParams(raw, T, mode))

        fd = central_diff(loss_of, raw0)
        analytic = grad_wrt_weighting(batch, WeightingParams(raw0, T, mode))
        assert rel_err(np.tril(analytic), np.tril(fd)) <= 1e-5
