"""Negotiation spaces, offers and linearly additive utility functions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

Offer = tuple[int, ...]

WEIGHT_TOLERANCE = 1e-9


class ShapeError(ValueError):
    """A utility function, offer or constraint does not fit the negotiation space."""


class StrategyKind(str, enum.Enum):
    RANDOM = "random"
    CONCESSION = "concession"


class Protocol(str, enum.Enum):
    AOP = "aop"
    ACOP = "acop"


@dataclass(frozen=True)
class Issue:
    name: str
    values: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ShapeError(f"issue {self.name!r} has no values")
        if len(set(self.values)) != len(self.values):
            raise ShapeError(f"issue {self.name!r} has duplicate value labels")


@dataclass(frozen=True)
class NegotiationSpace:
    issues: tuple[Issue, ...]

    def __post_init__(self):
        object.__setattr__(self, "issues", tuple(self.issues))
        if not self.issues:
            raise ShapeError("a negotiation space needs at least one issue")

    @classmethod
    def uniform(cls, n_issues: int, n_values: int) -> NegotiationSpace:
        """Space of ``n_issues`` issues named ``issue1..`` with values ``v1..``."""
        return cls.from_sizes([n_values] * n_issues)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> NegotiationSpace:
        return cls(
            tuple(
                Issue(f"issue{i + 1}", tuple(f"v{k + 1}" for k in range(m)))
                for i, m in enumerate(sizes)
            )
        )

    @property
    def issue_count(self) -> int:
        return len(self.issues)

    @cached_property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(issue.values) for issue in self.issues)

    @cached_property
    def size_array(self) -> np.ndarray:
        return np.asarray(self.sizes, dtype=np.int64)

    @property
    def n_offers(self) -> int:
        return math.prod(self.sizes)

    def offers(self) -> Iterator[Offer]:
        """All offers in ``offer_index`` order."""
        for k in range(self.n_offers):
            yield index_offer(self, k)

    def check_offer(self, offer: Sequence[int]) -> Offer:
        offer = tuple(offer)
        if len(offer) != self.issue_count:
            raise ShapeError(f"offer has {len(offer)} entries, space has {self.issue_count} issues")
        for i, (v, m) in enumerate(zip(offer, self.sizes)):
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or not 0 <= v < m:
                raise ShapeError(f"value index {v!r} out of range for issue {i}")
        return tuple(int(v) for v in offer)


@dataclass(frozen=True, eq=False)
class UtilityFunction:
    """``u(offer) = sum_i weights[i] * evaluations[i][offer[i]]``.

    ``evaluations`` is ragged (row ``i`` has one entry per value of issue
    ``i``) and is stored as float64.
    """

    evaluations: tuple[np.ndarray, ...]
    weights: np.ndarray

    def __post_init__(self):
        rows = tuple(np.array(row, dtype=np.float64).reshape(-1) for row in self.evaluations)
        for row in rows:
            row.flags.writeable = False
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        weights.flags.writeable = False
        if len(weights) != len(rows):
            raise ShapeError(f"{len(weights)} weights for {len(rows)} issues")
        if np.any(weights < 0) or np.any(weights > 1):
            raise ShapeError("weights must lie in [0, 1]")
        if abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise ShapeError(f"weights sum to {weights.sum()!r}, expected 1")
        if any(row.size == 0 for row in rows):
            raise ShapeError("every issue needs at least one evaluation")
        object.__setattr__(self, "evaluations", rows)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, evaluations: Sequence[Sequence[float]]) -> UtilityFunction:
        n = len(evaluations)
        return cls(tuple(evaluations), np.full(n, 1.0 / n))

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(row.size for row in self.evaluations)

    @cached_property
    def weighted(self) -> np.ndarray:
        """Padded table ``W[i, v] = w_i * e_i(v)``; padding is ``-inf``."""
        return weighted_table(self.evaluations, self.weights)

    def check(self, space: NegotiationSpace) -> None:
        if self.sizes != space.sizes:
            raise ShapeError(f"utility shape {self.sizes} does not match space {space.sizes}")

    def with_evaluations(self, evaluations: Sequence[Sequence[float]]) -> UtilityFunction:
        return UtilityFunction(tuple(evaluations), self.weights)

    def table(self) -> list[list[float]]:
        return [row.tolist() for row in self.evaluations]


def weighted_table(evaluations: Sequence[np.ndarray], weights: np.ndarray) -> np.ndarray:
    width = max(len(row) for row in evaluations)
    W = np.full((len(evaluations), width), -np.inf)
    for i, row in enumerate(evaluations):
        W[i, : len(row)] = weights[i] * np.asarray(row, dtype=np.float64)
    return W


def table_utility(W: np.ndarray, offer: Sequence[int]) -> float:
    acc = 0.0
    for i, v in enumerate(offer):
        acc += float(W[i, v])
    return acc


def table_max(W: np.ndarray, sizes: Sequence[int]) -> float:
    acc = 0.0
    for i, m in enumerate(sizes):
        acc += float(W[i, :m].max())
    return acc


@dataclass(frozen=True)
class AgentProfile:
    utility: UtilityFunction
    reservation: float
    strategy: StrategyKind = StrategyKind.CONCESSION
    protocol: Protocol = Protocol.ACOP

    def __post_init__(self):
        if not 0.0 <= self.reservation <= 1.0:
            raise ValueError(f"reservation fraction {self.reservation!r} outside [0, 1]")
        object.__setattr__(self, "strategy", StrategyKind(self.strategy))
        object.__setattr__(self, "protocol", Protocol(self.protocol))


def utility(space: NegotiationSpace, u: UtilityFunction, offer: Sequence[int]) -> float:
    u.check(space)
    return table_utility(u.weighted, space.check_offer(offer))


def max_utility(space: NegotiationSpace, u: UtilityFunction) -> float:
    u.check(space)
    return table_max(u.weighted, space.sizes)


def best_offer(space: NegotiationSpace, u: UtilityFunction) -> Offer:
    """Per-issue argmax offer; ties go to the lowest value index."""
    u.check(space)
    return tuple(int(np.argmax(u.weighted[i, :m])) for i, m in enumerate(space.sizes))


def acceptance_threshold(profile: AgentProfile, space: NegotiationSpace) -> float:
    return profile.reservation * max_utility(space, profile.utility)


def is_acceptable(profile: AgentProfile, space: NegotiationSpace, offer: Sequence[int]) -> bool:
    return utility(space, profile.utility, offer) >= acceptance_threshold(profile, space)


def offer_index(space: NegotiationSpace, offer: Sequence[int]) -> int:
    k = 0
    for v, m in zip(space.check_offer(offer), space.sizes):
        k = k * m + v
    return k


def index_offer(space: NegotiationSpace, k: int) -> Offer:
    if not 0 <= k < space.n_offers:
        raise IndexError(f"offer index {k} outside [0, {space.n_offers})")
    digits = []
    for m in reversed(space.sizes):
        k, v = divmod(k, m)
        digits.append(v)
    return tuple(reversed(digits))
