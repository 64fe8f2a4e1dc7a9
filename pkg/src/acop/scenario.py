"""Random scenarios, constraint injection, reservation grids and exhaustive oracles."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import kernels
from .model import Issue, NegotiationSpace, UtilityFunction, table_max

CONSTRAINT_VALUE = -1000.0
VALUE_RANGES = (100, 25)
MAX_EXHAUSTIVE_OFFERS = 1_000_000


class GridKind(str, enum.Enum):
    LINEAR = "lin"
    LOG = "log"


@dataclass(frozen=True, eq=False)
class Scenario:
    space: NegotiationSpace
    utility_a: UtilityFunction
    utility_b: UtilityFunction
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.utility_a.check(self.space)
        self.utility_b.check(self.space)

    def same_tables(self, other: Scenario) -> bool:
        return all(
            np.array_equal(x, y)
            for u, v in ((self.utility_a, other.utility_a), (self.utility_b, other.utility_b))
            for x, y in zip(u.evaluations, v.evaluations)
        )


@dataclass(frozen=True, eq=False)
class Configuration:
    id: str
    scenario: Scenario
    rho_a: float
    rho_b: float


def generate_scenario(space: NegotiationSpace, value_range: int, rng: np.random.Generator) -> Scenario:
    """Both agents' evaluations i.i.d. uniform on ``{0, ..., value_range}``; uniform weights."""
    if value_range not in VALUE_RANGES:
        raise ValueError(f"value range must be one of {VALUE_RANGES}")

    def draw() -> UtilityFunction:
        return UtilityFunction.uniform(
            [rng.integers(0, value_range, size=m, endpoint=True).astype(np.float64) for m in space.sizes]
        )

    utility_a = draw()
    utility_b = draw()
    return Scenario(space, utility_a, utility_b, {"range": value_range, "injected": 0})


def favourite_cells(u: UtilityFunction, n: int) -> list[tuple[int, int]]:
    """The ``n`` cells with the largest weighted contribution, ties by (issue, value)."""
    cells = [
        (-float(u.weights[i] * e), i, v)
        for i, row in enumerate(u.evaluations)
        for v, e in enumerate(row)
    ]
    cells.sort()
    return [(i, v) for _, i, v in cells[:n]]


def _overwrite(u: UtilityFunction, cells: Iterable[tuple[int, int]]) -> UtilityFunction:
    rows = [row.copy() for row in u.evaluations]
    for i, v in cells:
        rows[i][v] = CONSTRAINT_VALUE
    return u.with_evaluations(rows)


def inject_constraints(scenario: Scenario, n_per_agent: int) -> Scenario:
    """Sink each agent's evaluation at the opponent's ``n`` favourite cells."""
    n_cells = sum(scenario.space.sizes)
    if not 0 <= n_per_agent <= n_cells:
        raise ValueError(f"cannot inject {n_per_agent} constraints into {n_cells} cells")
    if n_per_agent == 0:
        return scenario
    utility_a = _overwrite(scenario.utility_a, favourite_cells(scenario.utility_b, n_per_agent))
    utility_b = _overwrite(scenario.utility_b, favourite_cells(scenario.utility_a, n_per_agent))
    provenance = dict(scenario.provenance, injected=n_per_agent)
    return Scenario(scenario.space, utility_a, utility_b, provenance)


def reservation_grid(kind: GridKind | str) -> list[float]:
    kind = GridKind(kind)
    if kind is GridKind.LINEAR:
        return [0.5 + i / 20 for i in range(10)]
    lo = math.log10(0.5)
    return [10 ** (lo - i * lo / 10) for i in range(10)]


def reservation_pairs(grids: Sequence[GridKind | str]) -> list[tuple[str, float, float]]:
    """Pairs from the union of the grids' squares, with a stable tag each.

    A pair present in more than one square is kept once, under the first
    grid listed.
    """
    pairs = []
    seen = set()
    for kind in grids:
        kind = GridKind(kind)
        grid = reservation_grid(kind)
        for ia, ra in enumerate(grid):
            for ib, rb in enumerate(grid):
                if (ra, rb) in seen:
                    continue
                seen.add((ra, rb))
                pairs.append((f"{kind.value}{ia}{ib}", ra, rb))
    return pairs


def offer_utilities(space: NegotiationSpace, u: UtilityFunction) -> np.ndarray:
    """Utility of every offer, indexed by ``offer_index``."""
    if space.n_offers > MAX_EXHAUSTIVE_OFFERS:
        raise ValueError(f"{space.n_offers} offers exceed the exhaustive budget")
    u.check(space)
    return kernels.offer_utilities(u.weighted, space.size_array)


def count_solutions(config: Configuration, cache: dict | None = None) -> int:
    """Offers acceptable to both agents, by exhaustive enumeration."""
    sc = config.scenario
    if sc.space.n_offers > MAX_EXHAUSTIVE_OFFERS:
        raise ValueError(f"{sc.space.n_offers} offers exceed the exhaustive budget")
    key = id(sc)
    if cache is not None and key in cache:
        ua, ub, max_a, max_b = cache[key][1:]
    else:
        ua = offer_utilities(sc.space, sc.utility_a)
        ub = offer_utilities(sc.space, sc.utility_b)
        max_a = table_max(sc.utility_a.weighted, sc.space.sizes)
        max_b = table_max(sc.utility_b.weighted, sc.space.sizes)
        if cache is not None:
            cache[key] = (sc, ua, ub, max_a, max_b)
    return int(kernels.count_joint(ua, ub, config.rho_a * max_a, config.rho_b * max_b))


def scenario_id(base: int, n: int) -> str:
    return f"s{base:03d}-n{n:02d}"


def build_batch(
    n_base: int,
    ranges: Sequence[int] = (100,),
    constraint_counts: Iterable[int] = range(13),
    grids: Sequence[GridKind | str] = (GridKind.LINEAR,),
    seed: int = 0,
    space: NegotiationSpace | None = None,
) -> list[Configuration]:
    """Base scenarios x injection variants x reservation pairs, sorted by id.

    Base ``k`` draws from ``ranges[k % len(ranges)]``. Bases are unique:
    a draw whose tables equal an earlier base is redrawn. All randomness
    comes from one generator seeded with ``seed``.
    """
    space = space or NegotiationSpace.uniform(5, 5)
    rng = np.random.default_rng(seed)
    counts = sorted(set(constraint_counts))
    pairs = reservation_pairs(grids)
    bases: list[Scenario] = []
    while len(bases) < n_base:
        candidate = generate_scenario(space, ranges[len(bases) % len(ranges)], rng)
        if any(candidate.same_tables(b) for b in bases):
            continue
        candidate.provenance.update(base=len(bases), seed=seed)
        bases.append(candidate)
    configs = []
    for k, base in enumerate(bases):
        for n in counts:
            variant = inject_constraints(base, n)
            if n == 0:
                variant = Scenario(space, base.utility_a, base.utility_b, dict(base.provenance))
            variant.provenance["id"] = scenario_id(k, n)
            for tag, ra, rb in pairs:
                configs.append(Configuration(f"{scenario_id(k, n)}-{tag}", variant, ra, rb))
    configs.sort(key=lambda c: c.id)
    return configs


def batch_size(n_base: int, constraint_counts: Iterable[int], grids: Sequence[GridKind | str]) -> int:
    return n_base * len(set(constraint_counts)) * len(reservation_pairs(grids))


# --------------------------------------------------------------------------
# scenario files


def scenario_to_json(scenario: Scenario, rho_a: float | None = None, rho_b: float | None = None) -> dict:
    def agent(u: UtilityFunction, rho: float | None) -> dict:
        return {"weights": u.weights.tolist(), "evaluations": u.table(), "reservation": rho}

    return {
        "issues": [{"name": issue.name, "values": list(issue.values)} for issue in scenario.space.issues],
        "agents": {"A": agent(scenario.utility_a, rho_a), "B": agent(scenario.utility_b, rho_b)},
    }


def scenario_from_json(data: dict) -> tuple[Scenario, float | None, float | None]:
    space = NegotiationSpace(tuple(Issue(str(i["name"]), tuple(map(str, i["values"]))) for i in data["issues"]))
    agents = data["agents"]
    utilities = []
    rhos = []
    for role in ("A", "B"):
        spec = agents[role]
        utilities.append(UtilityFunction(tuple(spec["evaluations"]), spec["weights"]))
        rho = spec.get("reservation")
        rhos.append(None if rho is None else float(rho))
    return Scenario(space, utilities[0], utilities[1]), rhos[0], rhos[1]


def dump_scenario(path, scenario: Scenario, rho_a: float | None = None, rho_b: float | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_json(scenario, rho_a, rho_b), fh, indent=1)
        fh.write("\n")


def load_scenario(path) -> tuple[Scenario, float | None, float | None]:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_json(json.load(fh))
