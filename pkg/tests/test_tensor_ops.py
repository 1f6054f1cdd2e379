import math

import numpy as np
import pytest

from protestlens.errors import DimensionError, NumericError, ParameterError, TargetIndexError
from protestlens.tensor import Tensor, functional as F


def test_tensor_defaults_to_float32():
    t = Tensor([[1, 2], [3, 4]])
    assert t.dtype == np.float32
    assert t.shape == (2, 2)
    assert Tensor(np.zeros(3)).dtype == np.float64  # 64-bit mode is opt-in via the array dtype


def test_non_finite_values_are_rejected():
    with pytest.raises(NumericError):
        Tensor([1.0, float("nan")])
    with pytest.raises(NumericError):
        Tensor([float("inf")])


# -- matmul -----------------------------------------------------------------

def test_matmul_identity():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(F.matmul(Tensor(np.eye(2)), a).data, a.data)


def test_matmul_hand_product():
    out = F.matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[5.0, 6.0], [7.0, 8.0]]))
    np.testing.assert_array_equal(out.data, [[19.0, 22.0], [43.0, 50.0]])


def test_matmul_summation():
    out = F.matmul(Tensor(np.ones((1, 4))), Tensor(np.ones((4, 1))))
    np.testing.assert_array_equal(out.data, [[4.0]])


def test_matmul_batched_matches_numpy(rng):
    a, b = rng.standard_normal((3, 2, 4)), rng.standard_normal((3, 4, 5))
    np.testing.assert_allclose(F.matmul(Tensor(a), Tensor(b)).data, a @ b, atol=1e-12)


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4, 2\)"):
        F.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


# -- softmax ----------------------------------------------------------------

def test_softmax_symmetric():
    np.testing.assert_allclose(F.softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])


def test_softmax_reference_values():
    # high-precision e^z / sum e^z, frozen
    np.testing.assert_allclose(F.softmax(Tensor([1.0, 2.0, 3.0])).data,
                               [0.09003057, 0.24472847, 0.66524096], atol=1e-7)


def test_softmax_large_inputs_do_not_overflow():
    out = F.softmax(Tensor([1000.0, 1000.0])).data
    np.testing.assert_allclose(out, [0.5, 0.5])
    assert np.all(np.isfinite(out))


def test_softmax_empty_axis():
    with pytest.raises(DimensionError):
        F.softmax(Tensor(np.zeros((2, 0))), axis=-1)


# -- layer norm -------------------------------------------------------------

def test_layer_norm_constant_row():
    out = F.layer_norm(Tensor([[5.0, 5.0, 5.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
    np.testing.assert_allclose(out.data, 0.0, atol=1e-6)


def test_layer_norm_population_variance():
    # eps must be positive here, so use one far below the tolerance
    x = Tensor(np.array([1.0, 2.0, 3.0]))
    out = F.layer_norm(x, Tensor(np.ones(3)), Tensor(np.zeros(3)), eps=1e-12)
    np.testing.assert_allclose(out.data, [-1.22474, 0.0, 1.22474], atol=1e-5)


def test_layer_norm_affine_override(rng):
    x = Tensor(rng.standard_normal((4, 6)))
    out = F.layer_norm(x, Tensor(np.zeros(6)), Tensor(np.full(6, 7.0)))
    np.testing.assert_array_equal(out.data, 7.0)


@pytest.mark.parametrize("eps", [0.0, -1e-5])
def test_layer_norm_rejects_non_positive_eps(eps):
    with pytest.raises(ParameterError):
        F.layer_norm(Tensor(np.ones(3)), Tensor(np.ones(3)), Tensor(np.zeros(3)), eps=eps)


# -- gelu -------------------------------------------------------------------

def test_gelu_values():
    out = F.gelu(Tensor(np.array([0.0, 1.0, -10.0]))).data
    assert out[0] == 0.0
    assert abs(out[1] - 0.841345) < 1e-6
    assert abs(out[2]) < 1e-6


def test_gelu_against_stdlib_erf():
    xs = np.linspace(-6, 6, 241)
    ref = np.array([x * 0.5 * (1.0 + math.erf(x / math.sqrt(2.0))) for x in xs])
    np.testing.assert_allclose(F.gelu(Tensor(xs)).data, ref, atol=1e-12)


# -- cross entropy ----------------------------------------------------------

def test_cross_entropy_uniform():
    loss = F.cross_entropy_logits(Tensor([[0.0, 0.0]]), [0])
    assert abs(float(loss.data) - math.log(2)) < 1e-6


def test_cross_entropy_confident():
    assert float(F.cross_entropy_logits(Tensor([[10.0, -10.0]]), [0]).data) < 1e-4


def test_cross_entropy_reference():
    loss = F.cross_entropy_logits(Tensor([[1.0, 2.0, 3.0]]), [2])
    assert abs(float(loss.data) - 0.407606) < 1e-6


@pytest.mark.parametrize("target", [3, -1])
def test_cross_entropy_bad_target(target):
    with pytest.raises(TargetIndexError):
        F.cross_entropy_logits(Tensor([[1.0, 2.0, 3.0]]), [target])


def test_binary_cross_entropy_masks_absent_labels():
    logits = Tensor([[0.0, 50.0]])
    full = F.binary_cross_entropy_logits(logits, np.array([[1.0, 0.0]]))
    masked = F.binary_cross_entropy_logits(logits, np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]))
    assert float(full.data) > 10
    assert abs(float(masked.data) - math.log(2)) < 1e-6


def test_binary_cross_entropy_soft_target_minimum():
    # the loss for soft target 0.3 is smallest at logit log(0.3/0.7)
    best = math.log(0.3 / 0.7)
    at = lambda z: float(F.binary_cross_entropy_logits(Tensor([[z]]), np.array([[0.3]])).data)  # noqa: E731
    assert at(best) < at(best + 0.1) and at(best) < at(best - 0.1)


# -- misc shape ops ---------------------------------------------------------

def test_sliding_windows_layout():
    x = Tensor(np.arange(5.0).reshape(5, 1))
    w = F.sliding_windows(F.pad(x, 0, 1, 1), 3, axis=0)
    assert w.shape == (5, 3, 1)
    np.testing.assert_array_equal(w.data[2, :, 0], [1, 2, 3])
    np.testing.assert_array_equal(w.data[0, :, 0], [0, 0, 1])


def test_masked_fill_and_where():
    a = Tensor(np.array([1.0, 2.0, 3.0]))
    out = F.masked_fill(a, np.array([True, False, True]), -5.0)
    np.testing.assert_array_equal(out.data, [1.0, -5.0, 3.0])
    np.testing.assert_array_equal(F.where(np.array([1, 0, 1], bool), a, Tensor(np.zeros(3))).data, [1, 0, 3])


def test_dropout_is_identity_at_eval(rng):
    x = Tensor(rng.standard_normal((4, 4)))
    assert F.dropout(x, 0.5, rng, training=False) is x
    y = F.dropout(x, 0.5, np.random.default_rng(0), training=True).data
    kept = y != 0
    np.testing.assert_allclose(y[kept], 2 * x.data[kept])


def test_l2_normalize_zero_row_is_finite():
    out = F.l2_normalize(Tensor(np.zeros((2, 3))), axis=-1)
    np.testing.assert_array_equal(out.data, 0.0)
