"""Offer generation: random sampling and concession, with constraint handling."""

from __future__ import annotations

import enum
import heapq
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .constraints import AtomicConstraint
from .model import Offer, UtilityFunction, table_max, table_utility

DEFAULT_SAMPLE_BUDGET = 1000
SAMPLE_CHUNK = 50
CONSTRAINT_PENALTY = 1000.0


class _Strategy:
    def __init__(self, utility: UtilityFunction, threshold: float):
        self.utility = utility
        self.W = utility.weighted
        self.sizes = utility.sizes
        self.threshold = float(threshold)

    def acceptable(self, offer: Sequence[int]) -> bool:
        return table_utility(self.W, offer) >= self.threshold

    def apply_constraint(self, constraint: AtomicConstraint) -> None:
        raise NotImplementedError

    def next_offer(self) -> Offer | None:
        raise NotImplementedError


class RandomSampler(_Strategy):
    """Zero-intelligence bidder.

    Each issue is sampled independently from its own distribution, uniform
    at the start. A turn draws up to ``budget`` offers and returns the first
    self-acceptable one, or ``None`` when the budget runs out. Draws carry
    no memory, so the same offer may come up again on a later turn.
    """

    def __init__(
        self,
        utility: UtilityFunction,
        threshold: float,
        rng: np.random.Generator,
        budget: int = DEFAULT_SAMPLE_BUDGET,
    ):
        super().__init__(utility, threshold)
        self.rng = rng
        self.budget = budget
        n = len(self.sizes)
        self.probs = np.zeros(self.W.shape)
        for i, m in enumerate(self.sizes):
            self.probs[i, :m] = 1.0 / m
        self.dead = False
        self._out = np.empty(n, dtype=np.int64)
        self._rebuild()

    def _rebuild(self) -> None:
        cum = np.ones(self.W.shape)
        for i, m in enumerate(self.sizes):
            p = self.probs[i, :m]
            live = np.flatnonzero(p > 0)
            if live.size == 0:
                self.dead = True
                continue
            c = np.cumsum(p)
            # float drift must not let a draw land past the last live value
            c[live[-1]:] = 1.0
            cum[i, :m] = c
        self.cum = cum

    def apply_constraint(self, constraint: AtomicConstraint) -> None:
        i, v = constraint
        if self.probs[i, v] == 0.0:
            return
        self.probs[i, v] = 0.0
        total = self.probs[i, : self.sizes[i]].sum()
        if total > 0:
            self.probs[i, : self.sizes[i]] /= total
        self._rebuild()

    def next_offer(self) -> Offer | None:
        if self.dead:
            return None
        n = len(self.sizes)
        drawn = 0
        while drawn < self.budget:
            k = min(SAMPLE_CHUNK, self.budget - drawn)
            uniforms = self.rng.random((k, n))
            if kernels.sample_acceptable(self.cum, self.W, uniforms, self.threshold, self._out) >= 0:
                return tuple(int(v) for v in self._out)
            drawn += k
        return None


class ConcessionEnumerator(_Strategy):
    """Yields offers in non-increasing utility order, ties by ascending offer index.

    Lazy best-first search over the product space: the root picks every
    issue's best value, and a successor moves one issue to its next-best
    value. Every offer except the root has a predecessor that is at least
    as good and, on equal utility, has a smaller offer index, so popping
    the frontier by ``(-utility, offer_index)`` produces the exact sorted
    order.

    A received constraint overwrites the excluded value's evaluation with a
    large negative number and restarts the search; offers already emitted
    are never emitted again.
    """

    def __init__(self, utility: UtilityFunction, threshold: float):
        super().__init__(utility, threshold)
        self.effective = self.W.copy()
        self.override = -(table_max(self.W, self.sizes) * len(self.sizes)) - CONSTRAINT_PENALTY
        self.excluded: set[AtomicConstraint] = set()
        self.emitted: set[int] = set()
        self._radix = [1] * len(self.sizes)
        for i in range(len(self.sizes) - 2, -1, -1):
            self._radix[i] = self._radix[i + 1] * self.sizes[i + 1]
        self._reseed()

    def _reseed(self) -> None:
        self._order = [
            sorted(range(m), key=lambda v, row=self.effective[i]: (-row[v], v))
            for i, m in enumerate(self.sizes)
        ]
        root = (0,) * len(self.sizes)
        self._seen = {root}
        self._frontier = [self._entry(root)]

    def _entry(self, ranks: tuple[int, ...]):
        offer = tuple(order[r] for order, r in zip(self._order, ranks))
        index = sum(v * r for v, r in zip(offer, self._radix))
        return (-table_utility(self.effective, offer), index, ranks, offer)

    def apply_constraint(self, constraint: AtomicConstraint) -> None:
        constraint = AtomicConstraint(*constraint)
        if constraint in self.excluded:
            return
        self.excluded.add(constraint)
        i, v = constraint
        self.effective[i, v] = self.utility.weights[i] * self.override
        self._reseed()

    def peek_utility(self) -> float | None:
        return -self._frontier[0][0] if self._frontier else None

    def next_offer(self) -> Offer | None:
        frontier = self._frontier
        while frontier:
            if -frontier[0][0] < self.threshold:
                return None
            entry = heapq.heappop(frontier)
            _, index, ranks, offer = entry
            for i, m in enumerate(self.sizes):
                if ranks[i] + 1 < m:
                    succ = ranks[:i] + (ranks[i] + 1,) + ranks[i + 1 :]
                    if succ not in self._seen:
                        self._seen.add(succ)
                        heapq.heappush(frontier, self._entry(succ))
            if index in self.emitted:
                continue
            if any(c.violated_by(offer) for c in self.excluded):
                continue
            self.emitted.add(index)
            return offer
        return None


class Action(str, enum.Enum):
    ACCEPT = "accept"
    COUNTER = "counter"
    TERMINATE = "terminate"


class Decision(NamedTuple):
    action: Action
    offer: Offer | None


def decide(strategy: _Strategy, incoming: Offer | None) -> Decision:
    """Accept an acceptable incoming offer, else counter, else give up."""
    if incoming is not None and strategy.acceptable(incoming):
        return Decision(Action.ACCEPT, tuple(incoming))
    offer = strategy.next_offer()
    if offer is None:
        return Decision(Action.TERMINATE, None)
    return Decision(Action.COUNTER, offer)
