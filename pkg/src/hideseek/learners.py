"""Expert-advice learners on the biased binary-loss construction.

Hedge sees every loss vector. The bandit learner is an Exp3-style
(1, 1, T) protocol: each round the runtime hands it the loss vector, and the
only thing it keeps is one bit, the loss of the arm it played.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distributions import BanditLossSpec, sample_bandit_loss_batch
from .protocol import Message, Protocol, ProtocolSpec, run_protocol


@dataclass
class RegretTrace:
    """Per-round actions and loss vectors of one learner run.

    ``accumulated[j]`` is the regret against arm ``j`` summed round by round
    while the learner played; :meth:`regret_vs` recomputes it from the stored
    losses.
    """

    actions: np.ndarray
    losses: np.ndarray
    accumulated: np.ndarray = field(repr=False)

    @property
    def T(self) -> int:
        return len(self.actions)

    @property
    def incurred(self) -> np.ndarray:
        return self.losses[np.arange(self.T), self.actions].astype(float)

    def regret_vs(self, j: int, upto: Optional[int] = None) -> float:
        t = self.T if upto is None else upto
        return float(self.incurred[:t].sum() - self.losses[:t, j].sum(dtype=float))

    def regret_best(self, upto: Optional[int] = None) -> float:
        """Regret against the best fixed arm in hindsight over the first ``upto`` rounds."""
        t = self.T if upto is None else upto
        return float(self.incurred[:t].sum() - self.losses[:t].sum(axis=0, dtype=float).min())

    def curves(self, checkpoints, j: int):
        """Regret vs arm ``j`` and vs the best arm at each checkpoint."""
        inc = np.cumsum(self.incurred)
        arm = np.cumsum(self.losses, axis=0, dtype=float)
        idx = np.asarray(checkpoints) - 1
        vs_j = inc[idx] - arm[idx, j]
        best = inc[idx] - arm[idx].min(axis=1)
        return vs_j, best

    def to_csv(self, path) -> None:
        inc = np.cumsum(self.incurred)
        best = inc - np.cumsum(self.losses, axis=0, dtype=float).min(axis=1)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "action", "loss", "cum_regret_best"])
            for t in range(self.T):
                writer.writerow([t + 1, int(self.actions[t]), repr(float(self.incurred[t])), repr(float(best[t]))])


def default_hedge_rate(d: int, T: int) -> float:
    return math.sqrt(8 * math.log(d) / T)


def default_exploration(d: int, T: int) -> float:
    return min(1.0, math.sqrt(d * math.log(d) / T))


def _draw(probs: np.ndarray, u: float) -> int:
    cdf = np.cumsum(probs)
    return min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(probs) - 1)


def run_hedge(
    spec: BanditLossSpec,
    T: int,
    eta: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
    losses: Optional[np.ndarray] = None,
) -> RegretTrace:
    """Full-information exponential weights over ``spec.d`` arms.

    Losses are drawn from ``spec`` unless ``losses`` (shape ``(T, d)``) is
    given, which lets several learners share one loss sequence.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    d = spec.d
    eta = default_hedge_rate(d, T) if eta is None else eta
    if eta <= 0:
        raise ValueError("eta must be positive")
    rng = rng if rng is not None else np.random.default_rng()
    if losses is None:
        losses = sample_bandit_loss_batch(spec, rng, T)
    uniforms = rng.random(T)
    cum = np.zeros(d)
    acc = np.zeros(d)
    actions = np.empty(T, dtype=np.int64)
    for t in range(T):
        w = np.exp(-eta * (cum - cum.min()))
        i = _draw(w, uniforms[t])
        actions[t] = i
        row = losses[t].astype(float)
        acc += row[i] - row
        cum += row
    return RegretTrace(actions, np.asarray(losses), acc)


class Exp3Bandit(Protocol):
    """Exp3 with uniform exploration, as a (1, 1, T) protocol.

    Each step plays an arm drawn from the current mixture and emits the one
    observed loss bit. Learning happens only from emitted bits: the update for
    round t is applied at the start of round t + 1 (and in :meth:`finish`).
    The final output is the sequence of arms played.
    """

    deterministic = False

    def __init__(self, d: int, T: int, gamma: Optional[float] = None):
        self.d = d
        self.gamma = default_exploration(d, T) if gamma is None else gamma

    def reset(self, spec: ProtocolSpec, rng=None):
        self.rng = rng if rng is not None else np.random.default_rng()
        self.scores = np.zeros(self.d)
        self.actions: list[int] = []
        self._pending = None

    def _probs(self) -> np.ndarray:
        w = np.exp(self.scores - self.scores.max())
        return (1 - self.gamma) * w / w.sum() + self.gamma / self.d

    def _learn(self, msg: Message) -> None:
        arm, prob = self._pending
        reward = 1.0 - msg.bits[0]
        self.scores[arm] += self.gamma * reward / (prob * self.d)
        self._pending = None

    def step(self, batch, history):
        if history:
            self._learn(history[-1])
        p = self._probs()
        arm = _draw(p, self.rng.random())
        self._pending = (arm, p[arm])
        self.actions.append(arm)
        return Message((int(batch[0][arm]),))

    def finish(self, history):
        if history and self._pending is not None:
            self._learn(history[-1])
        return tuple(self.actions)


def run_coordinate_bandit(
    spec: BanditLossSpec,
    T: int,
    rng: Optional[np.random.Generator] = None,
    gamma: Optional[float] = None,
    losses: Optional[np.ndarray] = None,
) -> RegretTrace:
    """Run :class:`Exp3Bandit` through the protocol runtime with b = 1."""
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    if losses is None:
        losses = sample_bandit_loss_batch(spec, rng, T)
    learner = Exp3Bandit(spec.d, T, gamma)
    transcript = run_protocol(learner, ProtocolSpec(1, 1, T), losses, rng)
    actions = np.asarray(transcript.final_output, dtype=np.int64)
    rows = np.asarray(losses, dtype=float)
    acc = rows[np.arange(T), actions].sum() - rows.sum(axis=0)
    return RegretTrace(actions, np.asarray(losses), acc)


def appendix_rho(d: int, T: int, b: int = 1, c2: float = 5.9e-3) -> float:
    """Bias c2 * min(1/4, sqrt(d / (b T))) of the regret lower-bound construction."""
    return c2 * min(0.25, math.sqrt(d / (b * T)))
