import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cbrn.model import (
    CbrnSystem,
    CrossLink,
    CueBall,
    SystemConfig,
    cross_preactivation,
    cue_preactivation,
    recall_output,
    threshold,
)

from helpers import tiny_config, unit


class TestConfig:
    def test_defaults(self):
        cfg = SystemConfig()
        assert (cfg.image_width, cfg.image_height, cfg.dim) == (116, 116, 13456)
        assert cfg.neurons_per_ball == 7
        assert (cfg.eps_w, cfg.eps_v, cfg.lambda_cb) == (1.0, 1.0, 1.0)
        assert cfg.theta_series == (100.0, 110.0)
        assert cfg.threshold_d == 72.0
        assert cfg.chain_order == ("Color", "Shape", "Volume", "SpectacularView", "Constellation")

    @pytest.mark.parametrize(
        "kw",
        [
            {"eps_w": 0.0},
            {"lambda_cb": -1.0},
            {"threshold_d": 0.0},
            {"theta_series": (50.0,)},
            {"theta_series": ()},
            {"chain_order": ("A",)},
            {"chain_order": ("A", "A")},
            {"image_width": 0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SystemConfig(**kw)


class TestSystemLayout:
    def test_fresh_default(self):
        system = CbrnSystem(SystemConfig())
        assert len(system.links) == 8
        assert list(system.balls) == list(system.config.chain_order)
        for ball in system.balls.values():
            assert ball.w.shape == ball.v.shape == (7, 13456)
            assert not ball.learned.any() and not ball.w.any() and not ball.v.any()
        assert system.link("Shape", "Color") is not system.link("Color", "Shape")

    def test_non_neighbours_have_no_link(self):
        system = CbrnSystem(SystemConfig())
        with pytest.raises(KeyError, match="neighbours"):
            system.link("Color", "Volume")

    def test_fresh_system_reads_zero(self):
        system = CbrnSystem(tiny_config())
        y = unit([1, 2, 3, 4])
        for ball in system.balls.values():
            for i in range(3):
                assert cue_preactivation(ball, i, y) == 0.0
        for link in system.links.values():
            for k in range(3):
                for l in range(3):
                    assert cross_preactivation(link, k, l, 1.0) == 0.0


class TestRecallOutput:
    def test_zero_activation(self):
        ball = CueBall.empty("A", 2, 4)
        ball.w[0] = [1, 2, 3, 4]
        assert not recall_output(ball, 0, 0.0).any()

    def test_identity(self):
        ball = CueBall.empty("A", 1, 2)
        ball.w[0] = [0.5, 0.5]
        assert recall_output(ball, 0, 1.0).tolist() == [0.5, 0.5]

    def test_index_error(self):
        with pytest.raises(IndexError):
            recall_output(CueBall.empty("A", 2, 2), 2, 1.0)

    def test_does_not_alias_weights(self):
        ball = CueBall.empty("A", 1, 2)
        y = recall_output(ball, 0, 1.0)
        y += 1
        assert not ball.w.any()


class TestCuePreactivation:
    def test_learned_endpoint(self):
        ball = CueBall.empty("A", 1, 4)
        y = unit([1, 0, 0, 1])
        ball.v[0] = 100 * y
        assert cue_preactivation(ball, 0, y) == pytest.approx(100.0, abs=1e-6)

    def test_hand_dot(self):
        ball = CueBall.empty("A", 1, 4)
        ball.v[0] = 100 * np.array([0.7071, 0, 0, 0.7071])
        assert cue_preactivation(ball, 0, [1.0, 0, 0, 0]) == pytest.approx(70.71, abs=1e-6)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cue_preactivation(CueBall.empty("A", 1, 4), 0, [1.0, 0.0])


class TestThreshold:
    @pytest.mark.parametrize("q, expected", [(71.9, 0.0), (72.0, 1.0), (100.0, 1.0), (-5.0, 0.0)])
    def test_values(self, q, expected):
        assert threshold(q, 72.0) == expected

    @given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
    def test_monotone_binary(self, a, b):
        lo, hi = sorted((a, b))
        assert threshold(lo, 72.0) in (0.0, 1.0)
        assert threshold(lo, 72.0) <= threshold(hi, 72.0)


class TestCrossPreactivation:
    def test_values(self):
        link = CrossLink.empty("A", "B", 3)
        assert cross_preactivation(link, 0, 1, 1.0) == 0.0
        link.u[1, 0] = 100.0
        assert cross_preactivation(link, 0, 1, 1.0) == 100.0
        link.u[2, 0] = 110.0
        assert cross_preactivation(link, 0, 2, 0.0) == 0.0

    def test_orientation_is_to_from(self):
        link = CrossLink.empty("A", "B", 3)
        link.u[2, 0] = 5.0
        assert cross_preactivation(link, 0, 2, 1.0) == 5.0
        assert cross_preactivation(link, 2, 0, 1.0) == 0.0

    def test_index_error(self):
        with pytest.raises(IndexError):
            cross_preactivation(CrossLink.empty("A", "B", 3), 3, 0, 1.0)
