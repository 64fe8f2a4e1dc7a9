"""Bilateral alternating-offers sessions, with or without constraints.

A session is a strict alternation of messages between agents ``A`` and
``B``; ``A`` opens. The same :class:`Agent` and :class:`Exchange` objects
drive both the in-process loop in :func:`run_session` and the two-process
peer in :mod:`acop.wire`, which is what keeps the two modes in lockstep.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np

from .constraints import AtomicConstraint, ConstraintStore, SendPolicy, deduce_from_table
from .model import (
    AgentProfile,
    NegotiationSpace,
    Offer,
    Protocol,
    ShapeError,
    StrategyKind,
    acceptance_threshold,
    table_utility,
)
from .strategy import Action, ConcessionEnumerator, RandomSampler, decide

MAX_PROPOSALS = 400
ROLES = ("A", "B")


class Kind(str, enum.Enum):
    PROPOSE = "propose"
    ACCEPT = "accept"
    TERMINATE = "terminate"


class TerminationReason(str, enum.Enum):
    ACCEPTED = "accepted"
    EXHAUSTED = "exhausted"
    TIMEOUT = "timeout"
    DEAD_STORE = "dead_store"


class ProtocolViolation(RuntimeError):
    """A participant broke the message alphabet or turn order.

    Raised for implementation bugs or misbehaving remote peers; sessions are
    never repaired silently.
    """

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


@dataclass(frozen=True)
class Message:
    """One protocol move.

    ``constraints`` is ``None`` for messages that cannot carry any (every
    AOP message, every accept and terminate) and a tuple, possibly empty,
    on ACOP proposals. ``reason`` tells the peer why a terminate was sent.
    """

    kind: Kind
    offer: Offer | None = None
    constraints: tuple[AtomicConstraint, ...] | None = None
    reason: TerminationReason | None = None

    @classmethod
    def propose(cls, offer: Sequence[int], constraints: Iterable[Sequence[int]] | None = None) -> Message:
        if constraints is not None:
            constraints = tuple(AtomicConstraint(*c) for c in constraints)
        return cls(Kind.PROPOSE, tuple(offer), constraints)

    @classmethod
    def accept(cls, offer: Sequence[int]) -> Message:
        return cls(Kind.ACCEPT, tuple(offer))

    @classmethod
    def terminate(cls, reason: TerminationReason) -> Message:
        return cls(Kind.TERMINATE, reason=TerminationReason(reason))

    def to_dict(self, t: int, sender: str) -> dict[str, Any]:
        out: dict[str, Any] = {"t": t, "from": sender, "kind": self.kind.value}
        if self.offer is not None:
            out["offer"] = list(self.offer)
        if self.constraints is not None:
            out["constraints"] = [[c.issue, c.value] for c in self.constraints]
        if self.reason is not None:
            out["reason"] = self.reason.value
        return out


class TranscriptEntry(NamedTuple):
    t: int
    sender: str
    message: Message

    def to_dict(self) -> dict[str, Any]:
        return self.message.to_dict(self.t, self.sender)


@dataclass(frozen=True)
class NegotiationRecord:
    success: bool
    message_count: int
    utility_a: float
    utility_b: float
    termination_reason: TerminationReason
    transcript: tuple[TranscriptEntry, ...] | None = field(default=None, compare=False)

    @property
    def proposals(self) -> int:
        return sum(1 for e in self.transcript or () if e.message.kind is Kind.PROPOSE)


def write_transcript(record: NegotiationRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in record.transcript or ():
            fh.write(json.dumps(entry.to_dict(), separators=(",", ":")) + "\n")


@dataclass(frozen=True)
class SessionConfig:
    space: NegotiationSpace
    profile_a: AgentProfile
    profile_b: AgentProfile
    protocol: Protocol = Protocol.ACOP
    seed: int = 0
    policy: SendPolicy = SendPolicy.REACTIVE
    max_proposals: int = MAX_PROPOSALS
    sample_budget: int = 1000

    def __post_init__(self):
        if self.max_proposals % 2:
            raise ValueError("the proposal cap must split evenly between the two agents")

    @property
    def per_agent_cap(self) -> int:
        return self.max_proposals // 2

    def profile(self, role: str) -> AgentProfile:
        return self.profile_a if role == "A" else self.profile_b


# --------------------------------------------------------------------------
# seeds

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_agent_seed(master_seed: int, config_index: int, agent_tag: int) -> int:
    """Mix three integers into one 64-bit seed.

    ``splitmix64(splitmix64(splitmix64(master) ^ index) ^ tag)`` with every
    input reduced modulo 2**64 first.
    """
    z = _splitmix64(master_seed & _MASK64)
    z = _splitmix64(z ^ (config_index & _MASK64))
    return _splitmix64(z ^ (agent_tag & _MASK64))


def agent_rng_seed(session_seed: int, role: str) -> int:
    return derive_agent_seed(session_seed, 0, ROLES.index(role) + 1)


# --------------------------------------------------------------------------
# validation


@dataclass
class TurnState:
    """What the receiving side knows when checking a message."""

    space: NegotiationSpace
    opponent_offer: Offer | None = None
    opponent_constraints: frozenset[AtomicConstraint] = frozenset()
    ended: bool = False


class Violation(NamedTuple):
    code: str
    detail: str


def validate_message(protocol: Protocol, msg: Message, state: TurnState) -> Violation | None:
    """``None`` when ``msg`` is a legal next move, else the broken rule."""
    if state.ended:
        return Violation("after_end", "session already ended")
    if msg.constraints is not None:
        if protocol is Protocol.AOP:
            return Violation("constraints_under_aop", "AOP messages carry no constraints")
        if msg.kind is not Kind.PROPOSE:
            return Violation("constraints_on_non_proposal", msg.kind.value)
    if msg.kind is Kind.TERMINATE:
        if msg.offer is not None:
            return Violation("offer_on_terminate", "terminate carries no offer")
        return None
    if msg.offer is None:
        return Violation("missing_offer", msg.kind.value)
    try:
        offer = state.space.check_offer(msg.offer)
    except ShapeError as exc:
        return Violation("bad_offer", str(exc))
    if msg.kind is Kind.ACCEPT:
        if state.opponent_offer is None:
            return Violation("accept_without_offer", "nothing to accept")
        if offer != state.opponent_offer:
            return Violation("stale_accept", f"{offer} is not the latest offer {state.opponent_offer}")
        return None
    for c in msg.constraints or ():
        try:
            c.check(state.space)
        except ShapeError as exc:
            return Violation("bad_constraint", str(exc))
    for c in state.opponent_constraints:
        if c.violated_by(offer):
            return Violation("violates_received_constraint", f"{offer} breaks {tuple(c)}")
    return None


# --------------------------------------------------------------------------
# the two sides


class Agent:
    """One negotiator: strategy state, constraint store and turn logic."""

    def __init__(
        self,
        space: NegotiationSpace,
        profile: AgentProfile,
        *,
        protocol: Protocol,
        policy: SendPolicy = SendPolicy.REACTIVE,
        seed: int = 0,
        sample_budget: int = 1000,
    ):
        profile.utility.check(space)
        self.space = space
        self.profile = profile
        self.protocol = protocol
        self.policy = policy
        self.threshold = acceptance_threshold(profile, space)
        self.W = profile.utility.weighted
        self.store = ConstraintStore()
        if profile.strategy is StrategyKind.RANDOM:
            rng = np.random.default_rng(seed)
            self.strategy = RandomSampler(profile.utility, self.threshold, rng, sample_budget)
        else:
            self.strategy = ConcessionEnumerator(profile.utility, self.threshold)
        if protocol is Protocol.ACOP:
            own = self.store.add_own(deduce_from_table(self.W, space.sizes, self.threshold))
            if isinstance(self.strategy, RandomSampler):
                for c in sorted(own):
                    self.strategy.apply_constraint(c)

    def acceptable(self, offer: Sequence[int]) -> bool:
        return table_utility(self.W, offer) >= self.threshold

    def _absorb(self, constraints: Iterable[AtomicConstraint]) -> None:
        new = self.store.record_received(constraints)
        if not new:
            return
        for c in sorted(new):
            self.strategy.apply_constraint(c)
        if isinstance(self.strategy, ConcessionEnumerator):
            self.store.add_own(
                deduce_from_table(self.strategy.effective, self.space.sizes, self.threshold)
            )

    def act(self, incoming: Message | None, proposals_so_far: int, cap: int = MAX_PROPOSALS) -> Message | None:
        """The next message, or ``None`` when the proposal cap ends the session silently."""
        offer_in = incoming.offer if incoming is not None and incoming.kind is Kind.PROPOSE else None
        if self.protocol is Protocol.ACOP and incoming is not None and incoming.constraints:
            self._absorb(incoming.constraints)
        if proposals_so_far >= cap:
            if offer_in is not None and self.acceptable(offer_in):
                return Message.accept(offer_in)
            return None
        if self.protocol is Protocol.ACOP and self.store.is_dead(self.space.sizes):
            return Message.terminate(TerminationReason.DEAD_STORE)
        action, offer = decide(self.strategy, offer_in)
        if action is Action.ACCEPT:
            return Message.accept(offer)
        if action is Action.TERMINATE:
            return Message.terminate(TerminationReason.EXHAUSTED)
        if self.protocol is Protocol.AOP:
            return Message.propose(offer)
        attached = self.store.constraints_to_send(self.policy, offer_in)
        self.store.mark_sent(attached)
        return Message.propose(offer, attached)


class Exchange:
    """Referee for one session: turn order, validation, counting, outcome."""

    def __init__(self, space: NegotiationSpace, protocol: Protocol, max_proposals: int = MAX_PROPOSALS):
        self.space = space
        self.protocol = protocol
        self.max_proposals = max_proposals
        self.transcript: list[TranscriptEntry] = []
        self.proposals = 0
        self.last_offer: dict[str, Offer | None] = {"A": None, "B": None}
        self.declared: dict[str, set[AtomicConstraint]] = {"A": set(), "B": set()}
        self.reason: TerminationReason | None = None
        self.agreement: Offer | None = None

    @property
    def ended(self) -> bool:
        return self.reason is not None

    @property
    def to_move(self) -> str:
        return ROLES[len(self.transcript) % 2]

    @property
    def last_message(self) -> Message | None:
        return self.transcript[-1].message if self.transcript else None

    def post(self, sender: str, msg: Message) -> None:
        if sender != self.to_move:
            raise ProtocolViolation("out_of_turn", f"{sender} moved, {self.to_move} expected")
        other = "B" if sender == "A" else "A"
        state = TurnState(self.space, self.last_offer[other], frozenset(self.declared[other]), self.ended)
        violation = validate_message(self.protocol, msg, state)
        if violation is not None:
            raise ProtocolViolation(*violation)
        if msg.kind is Kind.PROPOSE and self.proposals >= self.max_proposals:
            raise ProtocolViolation("over_cap", "proposal cap already reached")
        self.transcript.append(TranscriptEntry(len(self.transcript), sender, msg))
        if msg.kind is Kind.PROPOSE:
            self.proposals += 1
            self.last_offer[sender] = msg.offer
            self.declared[sender].update(msg.constraints or ())
        elif msg.kind is Kind.ACCEPT:
            self.reason = TerminationReason.ACCEPTED
            self.agreement = msg.offer
        else:
            self.reason = msg.reason or TerminationReason.EXHAUSTED

    def time_out(self) -> None:
        if self.proposals < self.max_proposals:
            raise ProtocolViolation("early_timeout", f"only {self.proposals} proposals made")
        self.reason = TerminationReason.TIMEOUT

    def record(self, profile_a: AgentProfile, profile_b: AgentProfile, keep_transcript: bool = True) -> NegotiationRecord:
        if not self.ended:
            raise RuntimeError("session still running")
        if self.agreement is not None:
            ua = table_utility(profile_a.utility.weighted, self.agreement)
            ub = table_utility(profile_b.utility.weighted, self.agreement)
        else:
            ua = ub = 0.0
        return NegotiationRecord(
            success=self.reason is TerminationReason.ACCEPTED,
            message_count=len(self.transcript),
            utility_a=ua,
            utility_b=ub,
            termination_reason=self.reason,
            transcript=tuple(self.transcript) if keep_transcript else None,
        )


def make_agent(config: SessionConfig, role: str) -> Agent:
    profile = config.profile(role)
    if profile.protocol is not config.protocol:
        raise ValueError(f"agent {role} speaks {profile.protocol.value}, session is {config.protocol.value}")
    return Agent(
        config.space,
        profile,
        protocol=config.protocol,
        policy=config.policy,
        seed=agent_rng_seed(config.seed, role),
        sample_budget=config.sample_budget,
    )


def run_session(config: SessionConfig, keep_transcript: bool = True) -> NegotiationRecord:
    agents = {role: make_agent(config, role) for role in ROLES}
    exchange = Exchange(config.space, config.protocol, config.max_proposals)
    while not exchange.ended:
        role = exchange.to_move
        msg = agents[role].act(exchange.last_message, exchange.proposals, config.max_proposals)
        if msg is None:
            exchange.time_out()
        else:
            exchange.post(role, msg)
    return exchange.record(config.profile_a, config.profile_b, keep_transcript)
