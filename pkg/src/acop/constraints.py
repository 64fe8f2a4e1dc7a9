"""Atomic constraints: deduction, bookkeeping and impossibility detection."""

from __future__ import annotations

import enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .model import NegotiationSpace, Offer, ShapeError, UtilityFunction


class AtomicConstraint(NamedTuple):
    """Declares that ``offer[issue] == value`` is never acceptable."""

    issue: int
    value: int

    def violated_by(self, offer: Sequence[int]) -> bool:
        return offer[self.issue] == self.value

    def check(self, space: NegotiationSpace) -> AtomicConstraint:
        if not 0 <= self.issue < space.issue_count or not 0 <= self.value < space.sizes[self.issue]:
            raise ShapeError(f"constraint {tuple(self)} outside the space")
        return self


class SendPolicy(str, enum.Enum):
    REACTIVE = "reactive"
    EAGER = "eager"


def deduce_from_table(W: np.ndarray, sizes: Sequence[int], threshold: float) -> frozenset[AtomicConstraint]:
    """Constraints whose best completion under ``W`` falls below ``threshold``.

    For additive utilities the best offer containing ``(i, v)`` picks the
    per-issue maximum everywhere else, so one bound per cell decides it
    exactly; no deeper branching is needed.
    """
    bounds = kernels.completion_bounds(W, np.asarray(sizes, dtype=np.int64))
    return frozenset(
        AtomicConstraint(i, v)
        for i, m in enumerate(sizes)
        for v in range(m)
        if bounds[i, v] < threshold
    )


def deduce_atomic_constraints(
    space: NegotiationSpace, u: UtilityFunction, threshold: float
) -> frozenset[AtomicConstraint]:
    u.check(space)
    return deduce_from_table(u.weighted, space.sizes, threshold)


def covers_an_issue(constraints: Iterable[AtomicConstraint], sizes: Sequence[int]) -> bool:
    ruled_out: dict[int, set[int]] = {}
    for c in constraints:
        ruled_out.setdefault(c.issue, set()).add(c.value)
    return any(len(values) >= sizes[i] for i, values in ruled_out.items())


class ConstraintStore:
    """Constraints an agent knows about during one session.

    ``own`` holds constraints deduced (or given) for this agent, ``received``
    those declared by the opponent and ``sent`` the subset of ``own``
    already transmitted.
    """

    def __init__(self, own: Iterable[AtomicConstraint] = ()):
        self.own: set[AtomicConstraint] = set()
        self.received: set[AtomicConstraint] = set()
        self.sent: set[AtomicConstraint] = set()
        self.add_own(own)

    def add_own(self, constraints: Iterable[AtomicConstraint]) -> set[AtomicConstraint]:
        new = {AtomicConstraint(*c) for c in constraints} - self.own
        self.own |= new
        return new

    def record_received(self, constraints: Iterable[AtomicConstraint]) -> set[AtomicConstraint]:
        """Union ``constraints`` into ``received``; returns the ones not seen before."""
        new = {AtomicConstraint(*c) for c in constraints} - self.received
        self.received |= new
        return new

    def known(self) -> set[AtomicConstraint]:
        return self.own | self.received

    def is_dead(self, sizes: Sequence[int]) -> bool:
        """True when some issue has every value ruled out by one side or the other."""
        return covers_an_issue(self.known(), sizes)

    def constraints_to_send(
        self, policy: SendPolicy, last_incoming: Offer | None
    ) -> list[AtomicConstraint]:
        pending = self.own - self.sent
        if policy is SendPolicy.REACTIVE:
            if last_incoming is None:
                return []
            pending = {c for c in pending if c.violated_by(last_incoming)}
        return sorted(pending)

    def mark_sent(self, constraints: Iterable[AtomicConstraint]) -> None:
        constraints = set(constraints)
        if not constraints <= self.own:
            raise ValueError("only own constraints can be sent")
        self.sent |= constraints
