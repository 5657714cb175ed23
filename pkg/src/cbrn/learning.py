"""Delta-rule learning of the three weight families and their orchestration.

* ``w``: cue neuron -> recall net, target the presented pattern d.
* ``v``: recall net -> cue neuron, target pre-activation theta.
* ``u``: cue neuron -> cue neuron of the next ball, target pre-activation theta.

With unit learning rates, zero initial weights and unit-norm patterns every
learner converges after exactly one update; the loops exist so other rates
still work.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from cbrn.codec import PatternVector
from cbrn.errors import ConvergenceError, LearningError
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

TOLERANCE = 1e-9
MAX_ITERATIONS = 1000
NORM_TOLERANCE = 1e-6

# Neuron-index sequences per chain group; each starts at the group's first ball.
TABLE3_SERIES = {
    0: ((0, 1, 2, 3, 4), (0, 4, 3, 2, 1)),
    1: ((0, 6, 5, 4, 3), (0, 3, 4, 5, 6)),
}


@dataclass(frozen=True)
class TrainingEntry:
    phase: str  # "w", "v" or "u"
    ball: str
    neuron_or_edge: str
    iterations: int
    final_error: float
    final_q: float | None = None
    cmb: int | None = None
    series: int | None = None


@dataclass
class TrainingReport:
    entries: list[TrainingEntry] = field(default_factory=list)

    def add(self, entry: TrainingEntry) -> TrainingEntry:
        self.entries.append(entry)
        return entry

    def extend(self, other: TrainingReport) -> None:
        self.entries.extend(other.entries)

    def phase(self, name: str) -> list[TrainingEntry]:
        return [e for e in self.entries if e.phase == name]

    def counts(self) -> dict[str, int]:
        c = Counter(e.phase for e in self.entries)
        return {p: c.get(p, 0) for p in ("w", "v", "u")}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["phase", "ball", "neuron_or_edge", "iterations", "final_error", "final_q"])
        for e in self.entries:
            writer.writerow(
                [
                    e.phase,
                    e.ball,
                    e.neuron_or_edge,
                    e.iterations,
                    repr(e.final_error),
                    "" if e.final_q is None else repr(e.final_q),
                ]
            )
        return buf.getvalue()

    def summary(self) -> str:
        counts = self.counts()
        lines = [f"learnings: w={counts['w']} v={counts['v']} u={counts['u']}"]
        per_cmb = Counter(e.cmb for e in self.phase("u"))
        for cmb in sorted(k for k in per_cmb if k is not None):
            lines.append(f"  cmb={cmb}: {per_cmb[cmb]} u-learnings")
        qs = [e.final_q for e in self.entries if e.final_q is not None]
        if qs:
            by_target = Counter(round(q, 6) for q in qs)
            lines.append(
                "final q values: " + ", ".join(f"{q:g} x{n}" for q, n in sorted(by_target.items()))
            )
        if self.entries:
            lines.append(f"max iterations: {max(e.iterations for e in self.entries)}")
            lines.append(f"max final error: {max(e.final_error for e in self.entries):.3g}")
        return "\n".join(lines)


# -- update rules ------------------------------------------------------------


def delta_w(d: np.ndarray, y: np.ndarray, x: float, rate: float) -> np.ndarray:
    """-rate * dE/dw for E = 1/2 sum_j (d_j - y_j)^2, y_j = w_j x."""
    return rate * (d - y) * x


def delta_v(theta: float, q: float, y: np.ndarray, rate: float) -> np.ndarray:
    """-rate * de/dv for e = 1/2 (theta - q)^2, q = sum_j v_j y_j."""
    return rate * (theta - q) * y


def delta_u(theta: float, q: float, x: float, rate: float) -> float:
    """-rate * d(eta)/du for eta = 1/2 (theta - q)^2, q = u x."""
    return rate * (theta - q) * x


# -- single learners ---------------------------------------------------------


def _pattern_array(d: PatternVector | np.ndarray) -> np.ndarray:
    return d.values if isinstance(d, PatternVector) else np.asarray(d, dtype=np.float64)


def learn_w(
    ball: CueBall,
    neuron_index: int,
    d: PatternVector | np.ndarray,
    rate: float = 1.0,
    *,
    label: str | None = None,
    tol: float = TOLERANCE,
    max_iter: int = MAX_ITERATIONS,
) -> TrainingEntry:
    """Store pattern d in the neuron's recall-net weights with x fixed at 1."""
    ball.check_index(neuron_index)
    target = _pattern_array(d)
    if target.shape != (ball.dim,):
        raise LearningError(f"pattern length {target.size} does not match recall net size {ball.dim}")
    if label is None and isinstance(d, PatternVector):
        label = d.source_label or None
    i = neuron_index
    if ball.learned[i] and (
        not np.allclose(ball.w[i], target, rtol=0.0, atol=tol) or (label is not None and ball.labels[i] != label)
    ):
        raise LearningError(
            f"{ball.attribute} neuron {i} already stores {ball.labels[i]!r}; refusing to overwrite"
        )

    x = 1.0
    iterations = 0
    while True:
        y = recall_output(ball, i, x)
        residual = target - y
        if np.max(np.abs(residual)) < tol:
            break
        if iterations >= max_iter:
            raise ConvergenceError(
                f"{ball.attribute} neuron {i}: w did not converge in {max_iter} updates"
            )
        ball.w[i] += delta_w(target, y, x, rate)
        iterations += 1

    ball.learned[i] = True
    if label is not None:
        ball.labels[i] = label
    error = 0.5 * float(residual @ residual)
    return TrainingEntry("w", ball.attribute, str(i), iterations, error)


def learn_v(
    ball: CueBall,
    neuron_index: int,
    theta: float,
    rate: float = 1.0,
    *,
    tol: float = TOLERANCE,
    max_iter: int = MAX_ITERATIONS,
) -> TrainingEntry:
    """Train the neuron's cue weights so its pre-activation on its own pattern is theta.

    The input is the recall-net output driven by this neuron (x = 1), which
    after w-learning is the stored pattern.
    """
    ball.check_index(neuron_index)
    i = neuron_index
    if not ball.learned[i]:
        raise LearningError(f"{ball.attribute} neuron {i}: w must be learned before v")
    y = recall_output(ball, i, 1.0)
    sq = float(y @ y)
    if abs(sq - 1.0) > NORM_TOLERANCE:
        raise LearningError(
            f"{ball.attribute} neuron {i}: recall output has squared norm {sq}, expected 1"
        )

    iterations = 0
    while True:
        q = cue_preactivation(ball, i, y)
        if abs(theta - q) < tol:
            break
        if iterations >= max_iter:
            raise ConvergenceError(
                f"{ball.attribute} neuron {i}: v did not converge in {max_iter} updates (q={q})"
            )
        ball.v[i] += delta_v(theta, q, y, rate)
        iterations += 1
    return TrainingEntry("v", ball.attribute, str(i), iterations, 0.5 * (theta - q) ** 2, q)


def learn_u(
    link: CrossLink,
    from_neuron: int,
    to_neuron: int,
    theta: float,
    rate: float = 1.0,
    *,
    x: float = 1.0,
    tol: float = TOLERANCE,
    max_iter: int = MAX_ITERATIONS,
) -> TrainingEntry:
    """Train u[to][from] so that the target's pre-activation equals theta when the source fires."""
    link.check_indices(from_neuron, to_neuron)
    k, l = from_neuron, to_neuron
    edge = f"{k}->{l}"
    ball = f"{link.from_ball}->{link.to_ball}"
    if x == 0.0:
        raise LearningError(f"{ball} edge {edge}: source neuron is silent (x=0), nothing to learn")

    iterations = 0
    while True:
        q = cross_preactivation(link, k, l, x)
        if abs(theta - q) < tol:
            break
        if iterations >= max_iter:
            raise ConvergenceError(f"{ball} edge {edge}: u did not converge in {max_iter} updates")
        link.u[l, k] += delta_u(theta, q, x, rate)
        iterations += 1
    return TrainingEntry("u", ball, edge, iterations, 0.5 * (theta - q) ** 2, q)


# -- chains and orchestration ------------------------------------------------


@dataclass(frozen=True)
class Series:
    index: int  # 1-based
    theta: float
    neurons: tuple[int, ...]


@dataclass(frozen=True)
class ChainSpec:
    """One chain group: a direction through the balls and its training series."""

    cmb: int
    balls: tuple[str, ...]
    series: tuple[Series, ...]

    def __post_init__(self):
        for s in self.series:
            if len(s.neurons) != len(self.balls):
                raise ValueError(
                    f"cmb={self.cmb} series {s.index}: {len(s.neurons)} neurons for {len(self.balls)} balls"
                )

    @property
    def start_ball(self) -> str:
        return self.balls[0]

    def validate(self, config: SystemConfig) -> None:
        order = config.chain_order
        if self.balls not in (order, order[::-1]):
            raise ValueError(f"cmb={self.cmb}: balls {self.balls} do not follow chain order {order}")
        for s in self.series:
            if any(not 0 <= n < config.neurons_per_ball for n in s.neurons):
                raise ValueError(f"cmb={self.cmb} series {s.index}: neuron index out of range")


def default_chains(config: SystemConfig) -> tuple[ChainSpec, ChainSpec]:
    """Both chain groups: cmb=0 walks chain_order forward, cmb=1 backward."""
    if len(config.chain_order) != 5 or config.neurons_per_ball < 7:
        raise ValueError("default chains need 5 balls of at least 7 neurons")
    if len(config.theta_series) < 2:
        raise ValueError("default chains need two theta values")
    directions = {0: config.chain_order, 1: config.chain_order[::-1]}
    chains = []
    for cmb, seqs in TABLE3_SERIES.items():
        series = tuple(
            Series(s + 1, config.theta_series[s], neurons) for s, neurons in enumerate(seqs)
        )
        chains.append(ChainSpec(cmb, directions[cmb], series))
    return tuple(chains)


def train_system(
    system: CbrnSystem,
    patterns: Mapping[str, Sequence[PatternVector]],
    chains: Sequence[ChainSpec] | None = None,
) -> TrainingReport:
    """Run all three phases: w for every neuron, v for every neuron, then u along each chain.

    Element p of a ball's pattern list is stored in cue neuron p.
    """
    cfg = system.config
    if chains is None:
        chains = default_chains(cfg)
    for name in cfg.chain_order:
        if name not in patterns:
            raise LearningError(f"no patterns supplied for cue ball {name}")
        if len(patterns[name]) != cfg.neurons_per_ball:
            raise LearningError(
                f"cue ball {name} has {cfg.neurons_per_ball} neurons but {len(patterns[name])} patterns"
            )
    for chain in chains:
        chain.validate(cfg)

    report = TrainingReport()
    for ball in system.iter_balls():
        for i, d in enumerate(patterns[ball.attribute]):
            report.add(learn_w(ball, i, d, cfg.eps_w))
    for ball in system.iter_balls():
        for i in range(ball.n_neurons):
            report.add(learn_v(ball, i, cfg.theta_series[0], cfg.eps_v))

    d_threshold = cfg.threshold_d
    for chain in chains:
        for s in chain.series:
            start = system.ball(chain.balls[0])
            k = s.neurons[0]
            # present the stored image of the first neuron to its own recall net
            q = cue_preactivation(start, k, recall_output(start, k, 1.0))
            x = threshold(q, d_threshold)
            for (a, b), (k, l) in zip(
                zip(chain.balls, chain.balls[1:]), zip(s.neurons, s.neurons[1:])
            ):
                entry = learn_u(system.link(a, b), k, l, s.theta, cfg.lambda_cb, x=x)
                report.add(
                    TrainingEntry(
                        entry.phase,
                        entry.ball,
                        entry.neuron_or_edge,
                        entry.iterations,
                        entry.final_error,
                        entry.final_q,
                        chain.cmb,
                        s.index,
                    )
                )
                x = threshold(entry.final_q, d_threshold)
    return report
