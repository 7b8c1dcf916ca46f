#!/usr/bin/env python3

import csv
import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from src.errors import CacheIntegrityError, ConfigurationError, NumericError
from src.evaluators import ConfigEval
from src.losses import (
    LossConfig, VARIANTS, L1_ONLY, JOINT_GAUSSIAN, JOINT_LAPLACE, SEPARATE_LAPLACE, SEPARATE_NO_VR,
    loss_joint_gaussian, loss_joint_laplace, loss_separate, error_estimate, predicted_error, batch_loss,
)

FILENAME = 'data/loss_values.csv'
EVAL = ConfigEval()


def get_csv_data(filename=FILENAME):
    with open(filename, newline='') as csvfile:
        reader = csv.reader(csvfile)
        next(reader, None)
        data = [(index, *row) for index, row in enumerate(reader, start=1)]
    return data


def number(cell):
    return None if cell == '' else EVAL(cell)


DATA = get_csv_data(FILENAME)
IDS = [f"Row {i} ({row[1]})" for i, row in zip(range(1, len(DATA) + 1), DATA)]

R_GRID = np.logspace(-3, 3, 50)


class TestLossValues:
    """
    Hand-computed loss values from data/loss_values.csv; numeric cells are expressions.
    """

    @pytest.mark.parametrize("row_index, variant, y, w, y_star, r_tilde, lam, clamp_c, expected", DATA, ids=IDS)
    def test_scalar_loss(self, row_index, variant, y, w, y_star, r_tilde, lam, clamp_c, expected):
        y, w, y_star, r_tilde, lam, clamp_c, expected = map(number, (y, w, y_star, r_tilde, lam, clamp_c, expected))
        if variant == JOINT_GAUSSIAN:
            value = loss_joint_gaussian(y, w, y_star)
        elif variant == JOINT_LAPLACE:
            value = loss_joint_laplace(y, w, y_star, clamp_c)
        else:
            value = loss_separate(y, w, y_star, r_tilde, lam, clamp_c)
        assert value == pytest.approx(expected, rel=1e-12, abs=1e-12), f"Row {row_index} failed: {value} != {expected}"

    @pytest.mark.parametrize("row_index, variant, y, w, y_star, r_tilde, lam, clamp_c, expected", DATA, ids=IDS)
    def test_batch_loss_agrees(self, row_index, variant, y, w, y_star, r_tilde, lam, clamp_c, expected):
        y, w, y_star, r_tilde, lam, clamp_c, expected = map(number, (y, w, y_star, r_tilde, lam, clamp_c, expected))
        cfg = LossConfig(variant=variant, lam=lam or 0.0, clamp_c=clamp_c or 1.0)
        loss, _, _ = batch_loss(cfg, [y, y], [w, w], [y_star, y_star],
                                None if r_tilde is None else [r_tilde, r_tilde])
        assert loss == pytest.approx(expected, rel=1e-12, abs=1e-12), f"Row {row_index} failed: batch mean {loss}"

    def test_gaussian_zero_residual(self):
        assert loss_joint_gaussian(3.0, 0.0, 3.0) == 0.0

    def test_separate_lambda_zero_is_l1(self):
        for w, r_tilde in [(-2.0, 0.1), (0.0, 5.0), (3.0, 0.0)]:
            assert loss_separate(0.25, w, 1.75, r_tilde, 0.0) == 1.5

    def test_non_finite_inputs(self):
        with pytest.raises(NumericError):
            loss_joint_laplace(float('nan'), 0.0, 1.0)
        with pytest.raises(NumericError):
            loss_joint_gaussian(0.0, float('inf'), 1.0)
        with pytest.raises(NumericError):
            loss_separate(0.0, 0.0, 1.0, float('nan'), 0.1)

    def test_negative_virtual_residual(self):
        with pytest.raises(CacheIntegrityError):
            loss_separate(0.0, 0.0, 1.0, -0.5, 0.1)
        with pytest.raises(CacheIntegrityError):
            batch_loss(LossConfig(SEPARATE_LAPLACE), [0.0], [0.0], [1.0], [-0.5])


class TestErrorEstimate:
    """
    Certainty-to-error mapping and the optimum of the certainty term.
    """

    def test_examples(self):
        assert error_estimate(0.0) == 1.0
        assert error_estimate(-math.log(2)) == pytest.approx(2.0, rel=1e-15)

    @pytest.mark.parametrize("r", R_GRID, ids=[f"r={r:.3g}" for r in R_GRID])
    def test_minimiser_recovers_residual(self, r):
        result = minimize_scalar(lambda w: math.exp(w) * r - w, bounds=(-10.0, 10.0),
                                 method='bounded', options={'xatol': 1e-12})
        assert error_estimate(result.x) == pytest.approx(r, rel=1e-6), f"exp(-w*) = {error_estimate(result.x)} for r = {r}"

    @pytest.mark.parametrize("clamp_c", [0.5, 2.0, 5.0])
    def test_clamped_minimiser_recovers_residual(self, clamp_c):
        for r in (0.01, 0.3, 1.0, 7.0):
            result = minimize_scalar(lambda w: loss_joint_laplace(0.0, w, r, clamp_c),
                                     bounds=(-40.0, 40.0), method='bounded', options={'xatol': 1e-12})
            assert error_estimate(result.x, clamp_c) == pytest.approx(r, rel=1e-6), f"c={clamp_c}, r={r}"

    def test_predicted_error(self):
        w = np.array([-1.0, 0.0, 2.0])
        assert predicted_error(w, L1_ONLY) is None
        np.testing.assert_allclose(predicted_error(w, JOINT_LAPLACE), np.exp(-w))
        np.testing.assert_allclose(predicted_error(w, SEPARATE_NO_VR), np.exp(-w))
        # mean absolute deviation of N(0, sigma^2), head emits log sigma^2
        np.testing.assert_allclose(predicted_error(w, JOINT_GAUSSIAN), math.sqrt(2 / math.pi) * np.exp(w / 2))


class TestGradients:
    """
    Closed-form head derivatives of the batch-mean losses.
    """

    def numeric(self, cfg, y, w, y_star, r_tilde, which, eps=1e-6):
        grads = []
        for k in range(len(y)):
            plus, minus = [np.array(y, dtype=float), np.array(w, dtype=float)], [np.array(y, dtype=float), np.array(w, dtype=float)]
            plus[which][k] += eps
            minus[which][k] -= eps
            grads.append((batch_loss(cfg, *plus, y_star, r_tilde)[0] - batch_loss(cfg, *minus, y_star, r_tilde)[0]) / (2 * eps))
        return np.array(grads)

    @pytest.mark.parametrize("variant", [JOINT_GAUSSIAN, JOINT_LAPLACE, SEPARATE_LAPLACE])
    def test_head_derivatives(self, variant):
        rng = np.random.default_rng(11)
        y, w, y_star = rng.normal(size=6), rng.normal(size=6), rng.normal(size=6) + 3.0
        r_tilde = rng.random(6) if variant == SEPARATE_LAPLACE else None
        cfg = LossConfig(variant, lam=0.3, clamp_c=1.5)
        _, d_y, d_w = batch_loss(cfg, y, w, y_star, r_tilde)
        np.testing.assert_allclose(d_y, self.numeric(cfg, y, w, y_star, r_tilde, 0), rtol=1e-6, atol=1e-7)
        np.testing.assert_allclose(d_w, self.numeric(cfg, y, w, y_star, r_tilde, 1), rtol=1e-6, atol=1e-7)

    def test_attenuation(self):
        cfg = LossConfig(JOINT_LAPLACE)
        y, y_star, w = np.array([0.2, -1.0, 3.0]), np.array([1.0, -2.0, 3.5]), np.array([0.4, -0.7, 1.1])
        _, d_y, _ = batch_loss(cfg, y, w, y_star)
        np.testing.assert_allclose(d_y * len(y), np.exp(w) * np.sign(y - y_star), rtol=1e-13)
        for k in (0.5, 2.0, 10.0):
            _, scaled, _ = batch_loss(cfg, y, w + math.log(k), y_star)
            np.testing.assert_allclose(scaled, k * d_y, rtol=1e-12)

    def test_separate_decoupling(self):
        cfg = LossConfig(SEPARATE_LAPLACE, lam=0.4)
        y_star = np.array([1.0, -1.0])
        _, d_y_a, d_w_a = batch_loss(cfg, [0.0, 0.0], [0.5, -2.0], y_star, [0.1, 2.0])
        _, d_y_b, _ = batch_loss(cfg, [0.0, 0.0], [3.0, 1.0], y_star, [4.0, 0.0])
        _, _, d_w_c = batch_loss(cfg, [7.0, -5.0], [0.5, -2.0], y_star, [0.1, 2.0])
        np.testing.assert_array_equal(d_y_a, d_y_b)
        np.testing.assert_array_equal(d_w_a, d_w_c)

    def test_no_vr_detaches_live_residual(self):
        y, w, y_star = np.array([0.3, 2.0]), np.array([0.1, -0.4]), np.array([1.0, 1.0])
        detached = batch_loss(LossConfig(SEPARATE_NO_VR, lam=0.2), y, w, y_star)
        frozen = batch_loss(LossConfig(SEPARATE_LAPLACE, lam=0.2), y, w, y_star, np.abs(y - y_star))
        assert detached[0] == frozen[0]
        np.testing.assert_array_equal(detached[1], frozen[1])
        np.testing.assert_array_equal(detached[2], frozen[2])

    def test_l1_only(self):
        loss, d_y, d_w = batch_loss(LossConfig(L1_ONLY), [1.0, 0.0, 2.0], None, [0.0, 0.0, 3.0])
        assert loss == pytest.approx(2.0 / 3.0)
        np.testing.assert_array_equal(d_y, [1 / 3, 0.0, -1 / 3])
        assert d_w is None

    def test_clamp_continuity(self):
        """c = 1 reproduces the plain loss; the clamped loss has no jumps in w."""
        for w in np.linspace(-5, 5, 11):
            assert loss_joint_laplace(0.0, w, 2.0, 1.0) == pytest.approx(math.exp(w) * 2.0 - w, rel=1e-14)
        grid = np.linspace(-30, 30, 60001)
        values = np.array([loss_joint_laplace(0.0, w, 0.5, 4.0) for w in grid[::100]])
        steps = np.abs(np.diff(values))
        # slope bounded by exp(30/4) * 0.5 / 4 + 1 over a step of 0.1
        assert steps.max() < 0.1 * (math.exp(7.5) * 0.125 + 1.0)


class TestLossConfig:
    """
    Validation of the loss configuration record.
    """

    @pytest.mark.parametrize("kwargs", [
        {"variant": "student_t"},
        {"lam": -0.1},
        {"lam": float('nan')},
        {"clamp_c": 0.0},
        {"clamp_c": -2.0},
    ], ids=["variant", "lam negative", "lam nan", "clamp zero", "clamp negative"])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            LossConfig(**kwargs)

    def test_flags(self):
        assert [LossConfig(v).requires_cache for v in VARIANTS] == [False, False, False, True, False]
        assert [LossConfig(v).uses_lambda for v in VARIANTS] == [False, False, False, True, True]
        assert not LossConfig(L1_ONLY).has_certainty

    def test_missing_certainty_head(self):
        with pytest.raises(ConfigurationError):
            batch_loss(LossConfig(JOINT_LAPLACE), [0.0], None, [1.0])
        with pytest.raises(ConfigurationError):
            batch_loss(LossConfig(SEPARATE_LAPLACE), [0.0], [0.0], [1.0])
