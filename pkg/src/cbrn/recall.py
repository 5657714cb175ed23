"""Identification in a cue ball and chained recall across cross links."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from cbrn.codec import PatternImage, PatternVector
from cbrn.errors import RecallError
from cbrn.model import CbrnSystem, cross_preactivation, cue_preactivation, recall_output

NORM_TOLERANCE = 1e-6
# Stored weights are exactly 0 on light pixels and >= 1/sqrt(M+1) on dark ones.
DARK_EPS = 1e-12


@dataclass(frozen=True)
class BallResponse:
    ball: str
    q_values: tuple[float, ...]
    fired: tuple[tuple[int, float], ...]
    argmax_index: int
    # for propagated responses: fired target neuron -> source neuron that drove it
    sources: dict[int, int] = field(default_factory=dict)

    @property
    def fired_indices(self) -> set[int]:
        return {i for i, _ in self.fired}

    @property
    def max_q(self) -> float:
        return self.q_values[self.argmax_index]


@dataclass(frozen=True)
class RecalledImage:
    ball: str
    neuron: int
    q: float
    label: str | None
    image: PatternImage | None


@dataclass
class RecallTrace:
    cmb: int
    responses: list[BallResponse] = field(default_factory=list)
    recalled: list[RecalledImage] = field(default_factory=list)
    failed: bool = False
    reason: str | None = None

    def fired_by_ball(self) -> dict[str, set[int]]:
        return {r.ball: r.fired_indices for r in self.responses}

    def labels_by_ball(self) -> dict[str, list[str | None]]:
        out: dict[str, list[str | None]] = {}
        for item in self.recalled:
            out.setdefault(item.ball, []).append(item.label)
        return out

    def to_csv(self, system: CbrnSystem) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cmb", "ball", "neuron", "q", "fired", "label"])
        for r in self.responses:
            fired = r.fired_indices
            labels = system.ball(r.ball).labels
            for i, q in enumerate(r.q_values):
                writer.writerow([self.cmb, r.ball, i, repr(q), int(i in fired), labels[i] or ""])
        return buf.getvalue()

    def to_text(self, show_images: bool = True) -> str:
        lines = [f"cmb={self.cmb}"]
        for r in self.responses:
            fired = ", ".join(f"{i}:{q:g}" for i, q in r.fired) or "none"
            lines.append(f"{r.ball}: fired {{{fired}}} argmax={r.argmax_index}")
        if self.failed:
            lines.append(f"RECALL FAILED: {self.reason}")
        if show_images:
            for item in self.recalled:
                lines.append("")
                lines.append(f"[{item.ball} neuron {item.neuron}] {item.label or '?'} q={item.q:g}")
                if item.image is not None:
                    lines.append(item.image.to_ascii())
        return "\n".join(lines)


def _argmax(values: Iterable[float]) -> int:
    # np.argmax returns the first maximum: ties go to the lowest index
    return int(np.argmax(np.asarray(list(values))))


def identify(system: CbrnSystem, ball: str, presented: PatternVector | np.ndarray) -> BallResponse:
    """Present a pattern to a ball's recall net and read every cue neuron's q."""
    cue_ball = system.ball(ball)
    y = presented.values if isinstance(presented, PatternVector) else np.asarray(presented, dtype=np.float64)
    if y.shape != (cue_ball.dim,):
        raise ValueError(f"presented pattern has length {y.size}, recall net has {cue_ball.dim}")
    sq = float(y @ y)
    if abs(sq - 1.0) > NORM_TOLERANCE:
        raise ValueError(f"presented pattern must be unit-norm, squared norm is {sq}")
    d = system.config.threshold_d
    q = tuple(cue_preactivation(cue_ball, i, y) for i in range(cue_ball.n_neurons))
    fired = tuple((i, qi) for i, qi in enumerate(q) if qi >= d)
    return BallResponse(ball, q, fired, _argmax(q))


def propagate(
    system: CbrnSystem,
    from_ball: str,
    to_ball: str,
    fired: Iterable[tuple[int, float]],
) -> BallResponse:
    """Drive `to_ball` from the fired neurons of `from_ball` (x = 1 each).

    A target reached by several sources takes the largest contribution.
    """
    link = system.link(from_ball, to_ball)
    sources = [k for k, _ in fired]
    if not sources:
        raise RecallError(f"nothing fired in {from_ball}; cannot propagate to {to_ball}")
    d = system.config.threshold_d
    n_targets = link.u.shape[0]
    q = []
    drivers = {}
    for l in range(n_targets):
        contributions = [cross_preactivation(link, k, l, 1.0) for k in sources]
        j = _argmax(contributions)
        q.append(contributions[j])
        drivers[l] = sources[j]
    q = tuple(q)
    fired_out = tuple((l, ql) for l, ql in enumerate(q) if ql >= d)
    return BallResponse(
        to_ball, q, fired_out, _argmax(q), {l: drivers[l] for l, _ in fired_out}
    )


def reconstruct(system: CbrnSystem, ball: str, neuron_index: int) -> PatternImage:
    """Drive the recall net from one cue neuron (x = 1) and binarize: dark iff y_j > 0."""
    cue_ball = system.ball(ball)
    cue_ball.check_index(neuron_index)
    if not cue_ball.learned[neuron_index]:
        raise RecallError(f"{ball} neuron {neuron_index} has not learned a pattern")
    y = recall_output(cue_ball, neuron_index, 1.0)
    cfg = system.config
    return PatternImage(
        cfg.image_width, cfg.image_height, y > DARK_EPS, cue_ball.labels[neuron_index] or ""
    )


def chain_direction(system: CbrnSystem, cmb: int) -> tuple[str, ...]:
    order = system.config.chain_order
    if cmb == 0:
        return order
    if cmb == 1:
        return order[::-1]
    raise ValueError(f"cmb must be 0 or 1, got {cmb}")


def _recalled(system: CbrnSystem, response: BallResponse) -> list[RecalledImage]:
    ball = system.ball(response.ball)
    out = []
    for i, q in response.fired:
        image = reconstruct(system, response.ball, i) if ball.learned[i] else None
        out.append(RecalledImage(response.ball, i, q, ball.labels[i], image))
    return out


def chain_recall(system: CbrnSystem, cmb: int, presented: PatternVector | np.ndarray) -> RecallTrace:
    """Identify `presented` in the group's start ball, then propagate ball by ball.

    Failure to fire anywhere is reported on the trace, not raised.
    """
    balls = chain_direction(system, cmb)
    trace = RecallTrace(cmb)
    response = identify(system, balls[0], presented)
    trace.responses.append(response)
    if not response.fired:
        trace.failed = True
        trace.reason = (
            f"no cue neuron in {balls[0]} reached D={system.config.threshold_d:g} "
            f"(max q={response.max_q:g})"
        )
        return trace
    trace.recalled.extend(_recalled(system, response))
    for a, b in zip(balls, balls[1:]):
        response = propagate(system, a, b, response.fired)
        trace.responses.append(response)
        if not response.fired:
            trace.failed = True
            trace.reason = f"chain stopped at {b}: no cue neuron reached D"
            return trace
        trace.recalled.extend(_recalled(system, response))
    return trace
