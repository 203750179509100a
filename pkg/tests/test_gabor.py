"""Gabor bank closed-form checks and layer contracts."""

import math

import numpy as np
import pytest

from hbpsynth.autodiff import Tape, Tensor, backward, check_gradients, sum_all, zero_grad
from hbpsynth.gabor import GaborConfigError, GaborParams, gabor_bank, gabor_kernel, gabor_layer


def filter_same_loops(img, kern):
    """Direct correlation oracle with edge-replicate padding, as the layer uses."""
    k = kern.shape[0]
    half = k // 2
    h, w = img.shape
    padded = np.pad(img, half, mode="edge")
    out = np.zeros_like(img)
    for i in range(h):
        for j in range(w):
            out[i, j] = (padded[i:i + k, j:j + k] * kern).sum()
    return out


def test_center_value_before_normalization_is_one():
    params = GaborParams(phase=0.0)
    for theta in params.orientations:
        raw = gabor_kernel(params, theta, normalized=False)
        assert raw[params.size // 2, params.size // 2] == pytest.approx(1.0)


def test_kernels_sum_to_zero_after_mean_subtraction():
    bank = gabor_bank(GaborParams(size=7))
    for kern in bank[:, 0]:
        assert abs(kern.sum()) < 1e-12
        assert np.linalg.norm(kern) == pytest.approx(1.0, abs=1e-12)


def test_quarter_turn_kernel_is_transpose():
    params = GaborParams(aspect=1.0, phase=0.0, size=5)
    k0 = gabor_kernel(params, 0.0)
    k90 = gabor_kernel(params, math.pi / 2)
    np.testing.assert_allclose(k90, k0.T, atol=1e-10)


def test_invalid_params_rejected():
    with pytest.raises(GaborConfigError):
        GaborParams(size=4).validate()
    with pytest.raises(GaborConfigError):
        GaborParams(sigma=-1.0).validate()
    with pytest.raises(GaborConfigError):
        GaborParams(orientations=()).validate()
    with pytest.raises(GaborConfigError):
        GaborParams(orientations=(0.1, 0.1)).validate()


def _mix_weight(c, n_orient, seed=0):
    rng = np.random.default_rng(seed)
    scale = 1.0 / math.sqrt(c * n_orient)
    return Tensor(rng.uniform(-scale, scale, (c, c * n_orient, 1, 1)), requires_grad=True)


def test_zero_input_passes_through():
    bank = gabor_bank(GaborParams())
    x = Tensor(np.zeros((1, 2, 8, 8)))
    out = gabor_layer(x, bank, _mix_weight(2, bank.shape[0]))
    np.testing.assert_array_equal(out.data, np.zeros((1, 2, 8, 8)))


def test_constant_input_passes_through():
    bank = gabor_bank(GaborParams())
    x = Tensor(np.full((1, 3, 8, 8), 0.7))
    out = gabor_layer(x, bank, _mix_weight(3, bank.shape[0], seed=1))
    np.testing.assert_allclose(out.data, x.data, atol=1e-12)


def test_vertical_edge_strongest_along_theta_zero():
    # theta=0 oscillates along x (columns): a vertical step edge must excite it
    # more than the theta=pi/2 kernel at the edge column.
    params = GaborParams(size=5)
    img = np.zeros((16, 16))
    img[:, 8:] = 1.0
    k0 = gabor_kernel(params, 0.0)
    k90 = gabor_kernel(params, math.pi / 2)
    r0 = filter_same_loops(img, k0)
    r90 = filter_same_loops(img, k90)
    edge_col = 8
    assert np.abs(r0[4:12, edge_col]).max() > np.abs(r90[4:12, edge_col]).max()


def test_layer_matches_depthwise_then_mix_oracle():
    # The fused kernel must behave exactly like explicit depthwise filtering
    # followed by the 1x1 recombination and the residual add.
    rng = np.random.default_rng(2)
    params = GaborParams()
    bank = gabor_bank(params)
    n_orient = bank.shape[0]
    c = 2
    x = rng.uniform(0, 1, (1, c, 8, 8))
    mix = _mix_weight(c, n_orient, seed=3)
    out = gabor_layer(Tensor(x), bank, mix).data

    responses = np.zeros((1, c * n_orient, 8, 8))
    for ci in range(c):
        for o in range(n_orient):
            responses[0, ci * n_orient + o] = filter_same_loops(x[0, ci], bank[o, 0])
    mixed = np.einsum("ok,nkhw->nohw", mix.data[:, :, 0, 0], responses)
    np.testing.assert_allclose(out, mixed + x, rtol=1e-10, atol=1e-12)


def test_bank_stays_fixed_under_training_step():
    bank = gabor_bank(GaborParams())
    frozen = bank.copy()
    mix = _mix_weight(2, bank.shape[0], seed=4)
    x = Tensor(np.random.default_rng(5).uniform(0, 1, (1, 2, 8, 8)), requires_grad=True)
    with Tape() as tape:
        loss = sum_all(gabor_layer(x, bank, mix))
    backward(loss, tape)
    assert mix.grad is not None and np.abs(mix.grad).sum() > 0
    mix.data -= 0.1 * mix.grad  # optimizer step on the learned weights only
    np.testing.assert_array_equal(bank, frozen)


def test_residual_branch_depends_only_on_filtered_responses():
    bank = gabor_bank(GaborParams())
    mix = _mix_weight(2, bank.shape[0], seed=6)
    rng = np.random.default_rng(7)
    x = rng.uniform(0, 1, (1, 2, 8, 8))
    out = gabor_layer(Tensor(x), bank, mix).data
    shifted = gabor_layer(Tensor(x + 0.25), bank, mix).data
    # adding a constant leaves the zero-mean filter responses unchanged
    np.testing.assert_allclose(out - x, shifted - (x + 0.25), atol=1e-12)


def test_layer_gradients():
    bank = gabor_bank(GaborParams())
    rng = np.random.default_rng(8)
    x = Tensor(rng.uniform(0, 1, (1, 2, 6, 6)), requires_grad=True)
    mix = _mix_weight(2, bank.shape[0], seed=9)

    def f():
        out = gabor_layer(x, bank, mix)
        return sum_all(out * out)

    report = check_gradients(f, {"x": x, "mix": mix}, samples=60, seed=10)
    assert report.passed, str(report)
    zero_grad([x, mix])
