import json

import pytest

from acop import (
    AgentProfile,
    AtomicConstraint,
    Message,
    NegotiationSpace,
    Protocol,
    ProtocolViolation,
    SendPolicy,
    SessionConfig,
    StrategyKind,
    TerminationReason,
    UtilityFunction,
    derive_agent_seed,
    run_session,
)
from acop.protocol import Exchange, TurnState, _splitmix64, validate_message, write_transcript
from acop.scenario import Configuration, Scenario, count_solutions

from .conftest import brute_max, brute_solutions, random_sizes, random_utility

CONC, RAND = StrategyKind.CONCESSION, StrategyKind.RANDOM
AOP, ACOP = Protocol.AOP, Protocol.ACOP


def session(space, ua, ub, ra, rb, strategy=CONC, protocol=ACOP, **kw):
    return SessionConfig(
        space,
        AgentProfile(ua, ra, strategy, protocol),
        AgentProfile(ub, rb, strategy, protocol),
        protocol=protocol,
        **kw,
    )


def kinds(record):
    return [e.message.kind.value for e in record.transcript]


def test_immediate_agreement():
    space = NegotiationSpace.uniform(2, 3)
    u = UtilityFunction.uniform([[9, 1, 0], [0, 9, 1]])
    for protocol in (AOP, ACOP):
        r = run_session(session(space, u, u, 0.5, 0.5, protocol=protocol))
        assert r.message_count == 2 and r.success
        assert kinds(r) == ["propose", "accept"]
        assert r.utility_a == r.utility_b == 9.0


def test_example_trace(example_scenario):
    space, a, b = example_scenario
    r = run_session(session(space, a, b, 1 / 3, 1 / 3))
    assert r.message_count == 5 and r.success
    assert kinds(r) == ["propose", "propose", "propose", "propose", "accept"]
    offers = [e.message.offer for e in r.transcript]
    assert offers[0] == (5, 5, 5)  # (v6, v6, v6)
    assert offers[1] == (1, 1, 1)  # (v2, v2, v2)
    assert offers[3] == (1, 4, 1)  # (v2, v5, v2)
    assert offers[4] == offers[3]
    assert r.transcript[2].message.constraints == (AtomicConstraint(1, 1),)
    assert all(not r.transcript[k].message.constraints for k in (0, 1, 3))


def test_dead_store_single_issue():
    space = NegotiationSpace.uniform(1, 2)
    a = UtilityFunction.uniform([[-1000, 100]])
    b = UtilityFunction.uniform([[100, -1000]])
    config = session(space, a, b, 0.5, 0.5, policy=SendPolicy.EAGER)
    r = run_session(config)
    assert not r.success and r.utility_a == r.utility_b == 0
    assert r.termination_reason is TerminationReason.DEAD_STORE
    assert r.message_count <= 4
    assert count_solutions(Configuration("x", Scenario(space, a, b), 0.5, 0.5)) == 0


def test_exhausted_concession():
    space = NegotiationSpace.uniform(1, 2)
    a = UtilityFunction.uniform([[100, 0]])
    b = UtilityFunction.uniform([[0, 100]])
    r = run_session(session(space, a, b, 1.0, 1.0, protocol=AOP))
    assert kinds(r) == ["propose", "propose", "terminate"]
    assert r.termination_reason is TerminationReason.EXHAUSTED


def test_timeout_is_silent():
    space = NegotiationSpace.uniform(3, 5)
    a = UtilityFunction.uniform([[100, 90, 80, 0, 0]] * 3)
    b = UtilityFunction.uniform([[0, 0, 80, 90, 100]] * 3)
    # no offer reaches 0.85 for both, so random agents run out the clock
    r = run_session(session(space, a, b, 0.85, 0.85, strategy=RAND, protocol=AOP))
    assert r.termination_reason is TerminationReason.TIMEOUT
    assert r.message_count == 400 and kinds(r) == ["propose"] * 400


def test_small_cap_still_allows_acceptance():
    space = NegotiationSpace.uniform(1, 3)
    a = UtilityFunction.uniform([[100, 60, 0]])
    b = UtilityFunction.uniform([[0, 60, 100]])
    accepted = run_session(session(space, a, b, 0.5, 0.5, protocol=AOP, max_proposals=2))
    # B's top offer (value 2) is unacceptable to A, so the cap ends it silently
    assert accepted.termination_reason is TerminationReason.TIMEOUT
    assert accepted.message_count == 2
    b2 = UtilityFunction.uniform([[0, 100, 90]])
    late = run_session(session(space, a, b2, 0.5, 0.5, protocol=AOP, max_proposals=2))
    assert kinds(late) == ["propose", "propose", "accept"]
    assert late.success and late.utility_a == 60.0


def test_deterministic_transcripts(rng):
    space = NegotiationSpace.uniform(4, 4)
    ua, ub = random_utility(rng, space.sizes), random_utility(rng, space.sizes)
    for strategy in (RAND, CONC):
        for protocol in (AOP, ACOP):
            config = session(space, ua, ub, 0.7, 0.7, strategy=strategy, protocol=protocol, seed=1234)
            one, two = run_session(config), run_session(config)
            assert one == two
            assert [e.to_dict() for e in one.transcript] == [e.to_dict() for e in two.transcript]


def test_random_seed_changes_stream(rng):
    space = NegotiationSpace.uniform(5, 5)
    ua, ub = random_utility(rng, space.sizes), random_utility(rng, space.sizes)
    transcripts = {
        tuple(e.message.offer for e in run_session(session(space, ua, ub, 0.9, 0.9, strategy=RAND, seed=s)).transcript[:4])
        for s in range(5)
    }
    assert len(transcripts) > 1


def test_protocol_mismatch_in_process():
    space = NegotiationSpace.uniform(1, 2)
    u = UtilityFunction.uniform([[1, 0]])
    config = SessionConfig(space, AgentProfile(u, 0.5, CONC, AOP), AgentProfile(u, 0.5, CONC, ACOP), ACOP)
    with pytest.raises(ValueError):
        run_session(config)


# --- validation ------------------------------------------------------------

SPACE = NegotiationSpace.uniform(2, 3)


def test_validate_constraints_under_aop():
    msg = Message.propose((0, 0), [(1, 2)])
    assert validate_message(AOP, msg, TurnState(SPACE)).code == "constraints_under_aop"


def test_validate_stale_accept():
    state = TurnState(SPACE, opponent_offer=(1, 1))
    assert validate_message(ACOP, Message.accept((0, 0)), state).code == "stale_accept"
    assert validate_message(ACOP, Message.accept((1, 1)), state) is None
    assert validate_message(ACOP, Message.accept((1, 1)), TurnState(SPACE)).code == "accept_without_offer"


def test_validate_empty_constraint_list_ok():
    assert validate_message(ACOP, Message.propose((0, 0), []), TurnState(SPACE)) is None
    assert validate_message(AOP, Message.propose((0, 0)), TurnState(SPACE)) is None


def test_validate_other_rules():
    assert validate_message(ACOP, Message.propose((0, 3)), TurnState(SPACE)).code == "bad_offer"
    assert validate_message(ACOP, Message.propose((0, 0), [(5, 0)]), TurnState(SPACE)).code == "bad_constraint"
    forbidding = TurnState(SPACE, opponent_constraints=frozenset({AtomicConstraint(0, 0)}))
    assert validate_message(ACOP, Message.propose((0, 1)), forbidding).code == "violates_received_constraint"
    assert validate_message(ACOP, Message.propose((0, 1)), TurnState(SPACE, ended=True)).code == "after_end"


def test_exchange_rejects_out_of_turn_and_bad_moves():
    ex = Exchange(SPACE, AOP)
    with pytest.raises(ProtocolViolation) as info:
        ex.post("B", Message.propose((0, 0)))
    assert info.value.code == "out_of_turn"
    ex.post("A", Message.propose((0, 0)))
    with pytest.raises(ProtocolViolation) as info:
        ex.post("B", Message.propose((0, 0), [(0, 1)]))
    assert info.value.code == "constraints_under_aop"
    ex.post("B", Message.accept((0, 0)))
    with pytest.raises(ProtocolViolation):
        ex.post("A", Message.propose((1, 1)))


# --- seeds -----------------------------------------------------------------


def test_splitmix_reference_vector():
    # first output of the reference SplitMix64 generator seeded with 0
    assert _splitmix64(0) == 0xE220A8397B1DCDAF


def test_seed_golden_and_deterministic():
    assert derive_agent_seed(0, 0, 0) == 0x238275BC38FCBE91
    assert derive_agent_seed(42, 7, 1) == derive_agent_seed(42, 7, 1)
    assert 0 <= derive_agent_seed(-1, 2**70, 3) < 2**64


def test_seed_tags_do_not_collide():
    seen = set()
    for master in range(100):
        for index in range(50):
            a, b = derive_agent_seed(master, index, 0), derive_agent_seed(master, index, 1)
            assert a != b
            seen.update((a, b))
    assert len(seen) == 10_000


def test_transcript_jsonl(tmp_path, example_scenario):
    space, a, b = example_scenario
    r = run_session(session(space, a, b, 1 / 3, 1 / 3))
    path = tmp_path / "t.jsonl"
    write_transcript(r, path)
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert lines[2] == {"t": 2, "from": "A", "kind": "propose", "offer": [4, 5, 5], "constraints": [[1, 1]]}
    assert lines[4] == {"t": 4, "from": "A", "kind": "accept", "offer": [1, 4, 1]}
    aop = run_session(session(space, a, b, 1 / 3, 1 / 3, protocol=AOP))
    write_transcript(aop, path)
    assert all("constraints" not in json.loads(line) for line in path.read_text().splitlines())


def test_terminate_omits_offer(tmp_path):
    space = NegotiationSpace.uniform(1, 2)
    a = UtilityFunction.uniform([[100, 0]])
    b = UtilityFunction.uniform([[0, 100]])
    r = run_session(session(space, a, b, 1.0, 1.0, protocol=AOP))
    last = r.transcript[-1].to_dict()
    assert last["kind"] == "terminate" and "offer" not in last



def test_concession_never_exhausts_when_a_solution_exists(rng):
    # whoever exhausts has proposed its whole acceptable set, which holds the solution
    checked = 0
    for k in range(150):
        sizes = random_sizes(rng, 4, 4)
        space = NegotiationSpace.from_sizes(sizes)
        ua, ub = random_utility(rng, sizes, -50, 100), random_utility(rng, sizes, -50, 100)
        ra, rb = (float(x) for x in rng.choice([0.5, 0.6, 0.7], size=2))
        solvable = brute_solutions(ua, ub, sizes, ra * brute_max(ua, sizes), rb * brute_max(ub, sizes)) > 0
        for protocol, policy in ((AOP, SendPolicy.REACTIVE), (ACOP, SendPolicy.EAGER)):
            r = run_session(session(space, ua, ub, ra, rb, protocol=protocol, policy=policy, seed=k))
            if solvable:
                assert r.termination_reason in (TerminationReason.ACCEPTED, TerminationReason.TIMEOUT)
            else:
                assert not r.success
        checked += solvable
    assert checked > 50
