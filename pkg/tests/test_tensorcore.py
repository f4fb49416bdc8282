import math

import numpy as np
import pytest

from oracles import conv_oracle, gaussian_oracle, gradient_oracle
from zeroshot_retinex.exceptions import ShapeError, TapeError
from zeroshot_retinex.tensorcore import (
    EPS_DIV,
    Tape,
    Tensor,
    backward,
    channel_max,
    concat,
    conv2d,
    elementwise_map,
    elementwise_zip,
    gaussian_filter,
    gaussian_kernel,
    instance_norm,
    no_grad,
    reduce,
    repeat_channels,
    spatial_gradient,
    take_channel,
)


# =============================================================================
# conv2d
# =============================================================================

class TestConv2d:

    def test_identity_kernel(self, rng):
        x = Tensor(rng.uniform(size=(1, 5, 5)))
        out = conv2d(x, Tensor(np.ones((1, 1, 1, 1))), Tensor(np.zeros(1)))
        np.testing.assert_array_equal(out.data, x.data)

    def test_all_ones_kernel_sums_window(self):
        x = Tensor(np.full((1, 5, 5), 0.3))
        out = conv2d(x, Tensor(np.ones((1, 1, 3, 3))), Tensor(np.zeros(1)))
        assert out.data[0, 2, 2] == pytest.approx(9 * 0.3)
        # Zero padding: a corner only sees four pixels.
        assert out.data[0, 0, 0] == pytest.approx(4 * 0.3)

    def test_matches_nested_loop_oracle(self, rng):
        x = rng.uniform(size=(1, 5, 5))
        w = rng.normal(size=(2, 1, 3, 3))
        b = rng.normal(size=2)
        out = conv2d(Tensor(x), Tensor(w), Tensor(b))
        np.testing.assert_allclose(out.data, conv_oracle(x, w, b), rtol=0, atol=1e-10)

    @pytest.mark.parametrize('trial', range(50))
    def test_oracle_on_random_8x8(self, trial):
        rng = np.random.default_rng(trial)
        x = rng.uniform(size=(3, 8, 8))
        w = rng.normal(size=(2, 3, 3, 3))
        b = rng.normal(size=2)
        out = conv2d(Tensor(x), Tensor(w), Tensor(b))
        np.testing.assert_allclose(out.data, conv_oracle(x, w, b), rtol=0, atol=1e-10)

    def test_even_kernel_rejected(self):
        with pytest.raises(ShapeError):
            conv2d(Tensor(np.zeros((1, 4, 4))), Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros(1)))

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ShapeError, match='input channels'):
            conv2d(Tensor(np.zeros((2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))), Tensor(np.zeros(1)))

    def test_wrong_padding_rejected(self):
        with pytest.raises(ShapeError, match='padding'):
            conv2d(Tensor(np.zeros((1, 4, 4))), Tensor(np.zeros((1, 1, 3, 3))), Tensor(np.zeros(1)), padding=0)


# =============================================================================
# Elementwise
# =============================================================================

class TestElementwise:

    def test_mul(self):
        assert elementwise_zip('mul', Tensor([0.5]), Tensor([0.5])).data[0] == 0.25

    def test_div_clamps_denominator(self):
        out = elementwise_zip('div', Tensor([0.3]), Tensor([0.0]))
        assert out.data[0] == pytest.approx(0.3 / EPS_DIV)

    def test_sub_matches_loop(self, rng):
        a = rng.normal(size=(3, 4, 4))
        b = rng.normal(size=(3, 4, 4))
        out = elementwise_zip('sub', Tensor(a), Tensor(b)).data
        for idx in np.ndindex(a.shape):
            assert out[idx] == a[idx] - b[idx]

    def test_channel_broadcast(self, rng):
        img = rng.uniform(size=(3, 4, 4))
        light = rng.uniform(size=(1, 4, 4))
        out = elementwise_zip('mul', Tensor(img), Tensor(light)).data
        np.testing.assert_array_equal(out, img * light)

    def test_incompatible_shapes(self):
        with pytest.raises(ShapeError):
            elementwise_zip('add', Tensor(np.zeros((3, 4, 4))), Tensor(np.zeros((2, 4, 4))))

    def test_pow_identity_at_one(self):
        assert elementwise_map('pow', Tensor([1.0]), p=0.4).data[0] == 1.0

    def test_pow_matches_scalar_math(self):
        out = elementwise_map('pow', Tensor([0.25]), p=0.4).data[0]
        assert out == pytest.approx(math.exp(0.4 * math.log(0.25)), rel=1e-14)

    def test_sigmoid_zero(self):
        assert elementwise_map('sigmoid', Tensor([0.0])).data[0] == 0.5

    def test_sqrt_and_log_are_finite_at_zero(self):
        with Tape():
            x = Tensor([0.0], requires_grad=True)
            loss = reduce('sum', elementwise_map('sqrt', x) + elementwise_map('log', x))
        backward(loss)
        assert np.all(np.isfinite(loss.data))
        assert np.all(np.isfinite(x.grad))

    def test_abs_subgradient_zero_at_zero(self):
        with Tape():
            x = Tensor([0.0, -2.0, 3.0], requires_grad=True)
            loss = reduce('sum', elementwise_map('abs', x))
        backward(loss)
        np.testing.assert_array_equal(x.grad, [0.0, -1.0, 1.0])

    def test_clamp_zero_gradient_outside(self):
        with Tape():
            x = Tensor([-0.5, 0.5, 1.5], requires_grad=True)
            loss = reduce('sum', elementwise_map('clamp', x, lo=0.0, hi=1.0))
        backward(loss)
        np.testing.assert_array_equal(x.grad, [0.0, 1.0, 0.0])

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            elementwise_map('cosh', Tensor([1.0]))


# =============================================================================
# Reductions
# =============================================================================

class TestReduce:

    def test_mean_constant(self):
        assert reduce('mean', Tensor(np.full((3, 4, 4), 0.5))).item() == 0.5

    def test_sum_zeros(self):
        assert reduce('sum', Tensor(np.zeros((2, 3)))).item() == 0.0

    def test_sum_matches_loop(self, rng):
        a = rng.normal(size=(3, 5, 5))
        acc = 0.0
        for v in a.flat:
            acc += v
        assert reduce('sum', Tensor(a)).item() == pytest.approx(acc, abs=1e-12)

    def test_mean_is_sum_over_numel(self, rng):
        t = Tensor(rng.normal(size=(3, 7, 5)))
        assert reduce('mean', t).item() == reduce('sum', t).item() / t.size

    def test_empty_rejected(self):
        with pytest.raises(ShapeError):
            reduce('sum', Tensor(np.zeros((0,))))


# =============================================================================
# Spatial gradient, Gaussian filter, channel max
# =============================================================================

class TestSpatialGradient:

    def test_constant_image(self):
        gh, gv = spatial_gradient(Tensor(np.full((1, 4, 4), 0.7)))
        assert not gh.data.any() and not gv.data.any()

    def test_horizontal_ramp(self):
        s = 0.1
        a = np.tile(np.arange(5) * s, (1, 4, 1))
        gh, gv = spatial_gradient(Tensor(a))
        np.testing.assert_allclose(gh.data[:, :, :-1], s)
        np.testing.assert_array_equal(gh.data[:, :, -1], 0.0)
        np.testing.assert_array_equal(gv.data, 0.0)

    @pytest.mark.parametrize('trial', range(50))
    def test_matches_oracle(self, trial):
        a = np.random.default_rng(trial).uniform(size=(2, 8, 8))
        gh, gv = spatial_gradient(Tensor(a))
        oh, ov = gradient_oracle(a)
        np.testing.assert_allclose(gh.data, oh, rtol=0, atol=1e-10)
        np.testing.assert_allclose(gv.data, ov, rtol=0, atol=1e-10)

    def test_single_pixel_rejected(self):
        with pytest.raises(ShapeError):
            spatial_gradient(Tensor(np.zeros((1, 1, 1))))


class TestGaussianFilter:

    def test_constant_preserved(self):
        out = gaussian_filter(Tensor(np.full((1, 9, 9), 0.3)), 1.0, 5)
        np.testing.assert_allclose(out.data, 0.3, rtol=0, atol=1e-14)

    def test_impulse_response_is_kernel(self):
        a = np.zeros((1, 9, 9))
        a[0, 4, 4] = 1.0
        out = gaussian_filter(Tensor(a), 1.0, 5)
        np.testing.assert_allclose(out.data[0, 2:7, 2:7], gaussian_kernel(1.0, 5), rtol=0, atol=1e-15)

    def test_kernel_normalized(self):
        assert gaussian_kernel(1.5, 7).sum() == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize('trial', range(50))
    def test_matches_oracle(self, trial):
        a = np.random.default_rng(trial).uniform(size=(1, 8, 8))
        out = gaussian_filter(Tensor(a), 1.0, 5)
        np.testing.assert_allclose(out.data, gaussian_oracle(a, 1.0, 5), rtol=0, atol=1e-10)

    @pytest.mark.parametrize('shape,ksize', [((1, 2, 2), 5), ((2, 2, 8), 5), ((1, 3, 3), 7), ((1, 2, 5), 9)])
    def test_pad_wider_than_image_matches_oracle(self, shape, ksize):
        a = np.random.default_rng(ksize).uniform(size=shape)
        out = gaussian_filter(Tensor(a), 1.0, ksize)
        np.testing.assert_allclose(out.data, gaussian_oracle(a, 1.0, ksize), rtol=0, atol=1e-10)

    def test_single_row_rejected(self):
        with pytest.raises(ShapeError):
            gaussian_filter(Tensor(np.zeros((1, 1, 8))), 1.0, 5)

    def test_even_kernel_rejected(self):
        with pytest.raises(ShapeError):
            gaussian_filter(Tensor(np.zeros((1, 8, 8))), 1.0, 4)

    def test_output_is_constant_on_tape(self):
        with Tape():
            x = Tensor(np.ones((1, 8, 8)), requires_grad=True)
            out = gaussian_filter(x, 1.0, 5)
        assert not out.requires_grad


class TestChannelMax:

    def test_pixel(self):
        img = Tensor(np.array([0.2, 0.5, 0.3]).reshape(3, 1, 1))
        assert channel_max(img).data.item() == 0.5

    def test_black(self):
        assert not channel_max(Tensor(np.zeros((3, 4, 4)))).data.any()

    def test_matches_oracle(self, rng):
        a = rng.uniform(size=(3, 6, 6))
        out = channel_max(Tensor(a)).data
        for y in range(6):
            for x in range(6):
                assert out[0, y, x] == max(a[0, y, x], a[1, y, x], a[2, y, x])

    def test_tie_routes_gradient_to_first_channel(self):
        with Tape():
            x = Tensor(np.full((3, 1, 1), 0.4), requires_grad=True)
            loss = reduce('sum', channel_max(x))
        backward(loss)
        np.testing.assert_array_equal(x.grad.ravel(), [1.0, 0.0, 0.0])

    def test_wrong_channel_count(self):
        with pytest.raises(ShapeError):
            channel_max(Tensor(np.zeros((4, 2, 2))))


class TestChannelPlumbing:

    def test_concat_and_take(self, rng):
        a = Tensor(rng.uniform(size=(3, 4, 4)))
        b = Tensor(rng.uniform(size=(1, 4, 4)))
        out = concat([a, b])
        assert out.shape == (4, 4, 4)
        np.testing.assert_array_equal(take_channel(out, 3).data, b.data)

    def test_concat_spatial_mismatch(self):
        with pytest.raises(ShapeError):
            concat([Tensor(np.zeros((1, 4, 4))), Tensor(np.zeros((1, 4, 5)))])

    def test_repeat_channels(self, rng):
        a = rng.uniform(size=(1, 3, 3))
        out = repeat_channels(Tensor(a), 3).data
        for c in range(3):
            np.testing.assert_array_equal(out[c], a[0])

    def test_instance_norm_constant_input_is_finite(self):
        out = instance_norm(Tensor(np.full((2, 4, 4), 3.0)))
        assert np.all(np.isfinite(out.data))
        assert not out.data.any()


# =============================================================================
# Tape and backward
# =============================================================================

class TestBackward:

    def test_sum_gives_ones(self, rng):
        with Tape():
            x = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
            loss = reduce('sum', x)
        backward(loss)
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_sum_of_squares_gives_2x(self, rng):
        data = rng.normal(size=(4,))
        with Tape():
            x = Tensor(data, requires_grad=True)
            loss = reduce('sum', x * x)
        backward(loss)
        np.testing.assert_allclose(x.grad, 2 * data)

    def test_non_scalar_rejected(self):
        with Tape():
            x = Tensor(np.ones(3), requires_grad=True)
            y = x * 2.0
        with pytest.raises(ShapeError):
            backward(y)

    def test_backward_twice_rejected(self):
        with Tape() as tape:
            x = Tensor(np.ones(3), requires_grad=True)
            loss = reduce('sum', x)
        tape.backward(loss)
        with pytest.raises(TapeError):
            tape.backward(loss)
        with pytest.raises(TapeError):
            backward(loss)

    def test_backward_releases_records(self):
        with Tape() as tape:
            x = Tensor(np.ones(3), requires_grad=True)
            loss = reduce('sum', x * x)
        assert len(tape) == 2
        backward(loss)
        assert len(tape) == 0
        assert tape.consumed

    def test_clear_releases_records(self):
        with Tape() as tape:
            x = Tensor(np.ones(3), requires_grad=True)
            reduce('sum', x * x)
        tape.clear()
        assert len(tape) == 0

    def test_no_grad_suspends_recording(self):
        with Tape() as tape:
            x = Tensor(np.ones(3), requires_grad=True)
            with no_grad():
                y = x * 2.0
        assert len(tape) == 0
        assert not y.requires_grad

    def test_loss_outside_tape_rejected(self):
        with pytest.raises(TapeError):
            backward(reduce('sum', Tensor(np.ones(3), requires_grad=True)))

    def test_unreached_leaf_gets_zero_gradient(self):
        with Tape():
            x = Tensor(np.ones(2), requires_grad=True)
            y = Tensor(np.ones(2), requires_grad=True)
            unused = y * 3.0
            loss = reduce('sum', x)
        backward(loss)
        np.testing.assert_array_equal(y.grad, [0.0, 0.0])
        assert unused.requires_grad
