"""CB-RN state and the elementary input/output maps.

Each cue ball holds, per cue neuron, a private copy of the recall-net weights
(`w`, cue neuron -> recall neurons) and the cue weights (`v`, recall neurons ->
cue neuron). Cross links hold `u[to][from]` between neighbouring balls.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from cbrn.codec import DEFAULT_HEIGHT, DEFAULT_WIDTH, PatternVector

DEFAULT_CHAIN = ("Color", "Shape", "Volume", "SpectacularView", "Constellation")


@dataclass(frozen=True)
class SystemConfig:
    image_width: int = DEFAULT_WIDTH
    image_height: int = DEFAULT_HEIGHT
    neurons_per_ball: int = 7
    eps_w: float = 1.0
    eps_v: float = 1.0
    lambda_cb: float = 1.0
    theta_series: tuple[float, ...] = (100.0, 110.0)
    threshold_d: float = 72.0
    chain_order: tuple[str, ...] = DEFAULT_CHAIN

    def __post_init__(self):
        object.__setattr__(self, "theta_series", tuple(float(t) for t in self.theta_series))
        object.__setattr__(self, "chain_order", tuple(self.chain_order))
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be positive")
        if self.neurons_per_ball < 1:
            raise ValueError("neurons_per_ball must be positive")
        for name in ("eps_w", "eps_v", "lambda_cb", "threshold_d"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.theta_series:
            raise ValueError("theta_series must not be empty")
        for theta in self.theta_series:
            if theta < self.threshold_d:
                raise ValueError(f"theta {theta} is below threshold D={self.threshold_d}")
        if len(self.chain_order) < 2:
            raise ValueError("chain_order needs at least two balls")
        if len(set(self.chain_order)) != len(self.chain_order):
            raise ValueError(f"duplicate ball names in {self.chain_order}")

    @property
    def dim(self) -> int:
        """Recall neurons per net, M + 1."""
        return self.image_width * self.image_height


@dataclass(eq=False)
class CueBall:
    """One attribute group. Row i of `w` and `v` belongs to cue neuron i."""

    attribute: str
    w: np.ndarray
    v: np.ndarray
    learned: np.ndarray
    labels: list[str | None]

    @classmethod
    def empty(cls, attribute: str, n_neurons: int, dim: int) -> CueBall:
        return cls(
            attribute,
            np.zeros((n_neurons, dim)),
            np.zeros((n_neurons, dim)),
            np.zeros(n_neurons, dtype=bool),
            [None] * n_neurons,
        )

    @property
    def n_neurons(self) -> int:
        return self.w.shape[0]

    @property
    def dim(self) -> int:
        return self.w.shape[1]

    def check_index(self, i: int) -> None:
        if not 0 <= i < self.n_neurons:
            raise IndexError(f"{self.attribute}: neuron index {i} out of range 0..{self.n_neurons - 1}")

    def index_of(self, label: str) -> int | None:
        for i, stored in enumerate(self.labels):
            if stored == label:
                return i
        return None


@dataclass(eq=False)
class CrossLink:
    from_ball: str
    to_ball: str
    u: np.ndarray  # [to-neuron, from-neuron]

    @classmethod
    def empty(cls, from_ball: str, to_ball: str, n_neurons: int) -> CrossLink:
        return cls(from_ball, to_ball, np.zeros((n_neurons, n_neurons)))

    def check_indices(self, k: int, l: int) -> None:
        n_to, n_from = self.u.shape
        if not 0 <= k < n_from:
            raise IndexError(f"{self.from_ball}->{self.to_ball}: source index {k} out of range")
        if not 0 <= l < n_to:
            raise IndexError(f"{self.from_ball}->{self.to_ball}: target index {l} out of range")


@dataclass(eq=False)
class CbrnSystem:
    config: SystemConfig
    balls: dict[str, CueBall] = field(default_factory=dict)
    links: dict[tuple[str, str], CrossLink] = field(default_factory=dict)

    def __post_init__(self):
        cfg = self.config
        if not self.balls:
            self.balls = {
                name: CueBall.empty(name, cfg.neurons_per_ball, cfg.dim) for name in cfg.chain_order
            }
        if not self.links:
            for a, b in zip(cfg.chain_order, cfg.chain_order[1:]):
                self.links[(a, b)] = CrossLink.empty(a, b, cfg.neurons_per_ball)
                self.links[(b, a)] = CrossLink.empty(b, a, cfg.neurons_per_ball)

    def ball(self, name: str) -> CueBall:
        try:
            return self.balls[name]
        except KeyError:
            raise KeyError(f"unknown cue ball {name!r}; known: {list(self.balls)}") from None

    def link(self, from_ball: str, to_ball: str) -> CrossLink:
        try:
            return self.links[(from_ball, to_ball)]
        except KeyError:
            raise KeyError(f"no cross link {from_ball}->{to_ball}; balls must be chain neighbours") from None

    def iter_balls(self) -> Iterator[CueBall]:
        for name in self.config.chain_order:
            yield self.balls[name]

    def copy(self) -> CbrnSystem:
        balls = {
            name: CueBall(b.attribute, b.w.copy(), b.v.copy(), b.learned.copy(), list(b.labels))
            for name, b in self.balls.items()
        }
        links = {key: CrossLink(l.from_ball, l.to_ball, l.u.copy()) for key, l in self.links.items()}
        return CbrnSystem(self.config, balls, links)

    def find_label(self, label: str) -> tuple[str, int]:
        """(ball, neuron) that stored `label`."""
        for ball in self.iter_balls():
            i = ball.index_of(label)
            if i is not None:
                return ball.attribute, i
        raise KeyError(f"no neuron has stored label {label!r}")


def _as_array(y: PatternVector | np.ndarray) -> np.ndarray:
    return y.values if isinstance(y, PatternVector) else np.asarray(y, dtype=np.float64)


def recall_output(ball: CueBall, neuron_index: int, x: float) -> np.ndarray:
    """Recall-net output y_j = w_ji * x for a single driving cue neuron (no sum over i)."""
    ball.check_index(neuron_index)
    return ball.w[neuron_index] * x


def cue_preactivation(ball: CueBall, neuron_index: int, y: PatternVector | np.ndarray) -> float:
    """q_i = sum_j v_ij y_j."""
    ball.check_index(neuron_index)
    y = _as_array(y)
    if y.shape != (ball.dim,):
        raise ValueError(f"input length {y.size} does not match recall net size {ball.dim}")
    return float(ball.v[neuron_index] @ y)


def threshold(q: float, d: float) -> float:
    return 1.0 if q >= d else 0.0


def cross_preactivation(link: CrossLink, from_neuron: int, to_neuron: int, x: float) -> float:
    """q_l = u_lk * x_k; one source fires at a time so there is no sum."""
    link.check_indices(from_neuron, to_neuron)
    return float(link.u[to_neuron, from_neuron] * x)
