"""Alternating offers negotiation, with and without atomic constraints."""

from .constraints import AtomicConstraint, ConstraintStore, SendPolicy, deduce_atomic_constraints
from .model import (
    AgentProfile,
    Issue,
    NegotiationSpace,
    Protocol,
    ShapeError,
    StrategyKind,
    UtilityFunction,
    acceptance_threshold,
    index_offer,
    is_acceptable,
    max_utility,
    offer_index,
    utility,
)
from .protocol import (
    Message,
    NegotiationRecord,
    ProtocolViolation,
    SessionConfig,
    TerminationReason,
    derive_agent_seed,
    run_session,
)

__all__ = [
    "AgentProfile",
    "AtomicConstraint",
    "ConstraintStore",
    "Issue",
    "Message",
    "NegotiationRecord",
    "NegotiationSpace",
    "Protocol",
    "ProtocolViolation",
    "SendPolicy",
    "SessionConfig",
    "ShapeError",
    "StrategyKind",
    "TerminationReason",
    "UtilityFunction",
    "acceptance_threshold",
    "deduce_atomic_constraints",
    "derive_agent_seed",
    "index_offer",
    "is_acceptable",
    "max_utility",
    "offer_index",
    "run_session",
    "utility",
]
