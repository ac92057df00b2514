"""Per-habitat genetic algorithm over variable-length agent-sequences.

Selection is fitness-proportional and non-elitist. After selection a random
10% of the survivors undergo one-point crossover and an independently drawn
10% get a single point mutation (insert, replace or delete); everyone else
passes through unchanged. Sequences longer than the population average are
penalised to keep lengths from drifting upward.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .semantics import (
    Agent,
    AgentSequence,
    MISSING_PENALTY,
    UserRequest,
    flatten,
    raw_fitness,
)


class EmptyPool(Exception):
    """The habitat has no agents to seed a population from."""


@dataclass(frozen=True)
class EvolutionParams:
    crossover_fraction: float = 0.10
    mutation_fraction: float = 0.10
    base_pop_size: int = 40
    size_factor: float = 10.0
    parsimony_alpha: float = 0.5
    max_generations: int = 100
    stagnation_window: int = 15

    def __post_init__(self):
        for name in ("crossover_fraction", "mutation_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.base_pop_size < 1 or self.max_generations < 1 or self.stagnation_window < 1:
            raise ValueError("population size, generations and window must be positive")
        if self.size_factor < 0 or self.parsimony_alpha < 0:
            raise ValueError("size_factor and parsimony_alpha must be non-negative")


def dynamic_population_size(avg_len: float, p: EvolutionParams) -> int:
    return p.base_pop_size + int(round(p.size_factor * avg_len))


def parsimony(raw: float, length: int, avg_len: float, p: EvolutionParams) -> float:
    if length <= avg_len:
        return raw
    return raw / (1.0 + p.parsimony_alpha * (length - avg_len))


def effective_fitness(seq: AgentSequence, request: UserRequest, avg_len: float,
                      p: EvolutionParams) -> float:
    return parsimony(raw_fitness(seq, request), len(seq), avg_len, p)


class FitnessTable:
    """Raw fitness of sequences drawn from one pool against one request.

    Row ``k`` holds, for every required tuple, the distance to agent ``k``'s
    closest tuple; a sequence's total distance is the column-wise minimum
    over its members, summed. Results are memoised by member ids.
    """

    def __init__(self, agents: Sequence[Agent], request: UserRequest):
        required = flatten(request)
        self.row = {a.agent_id: k for k, a in enumerate(agents)}
        dist = np.full((len(agents), len(required)), MISSING_PENALTY, dtype=np.int64)
        for k, a in enumerate(agents):
            held = a.description.as_dict()
            for j, (attr_id, value) in enumerate(required):
                if attr_id in held:
                    dist[k, j] = abs(held[attr_id] - value)
        self.dist = dist
        self._cache: dict[tuple[int, ...], float] = {}

    def raw(self, seq: AgentSequence) -> float:
        key = seq.key
        hit = self._cache.get(key)
        if hit is None:
            rows = sorted({self.row[i] for i in key})
            hit = 1.0 / (1.0 + float(self.dist[rows].min(axis=0).sum()))
            self._cache[key] = hit
        return hit


@dataclass
class Population:
    individuals: list[tuple[AgentSequence, float]]
    request: UserRequest
    seed_pool: tuple[Agent, ...]
    generation: int = 0
    params: EvolutionParams = EvolutionParams()
    table: FitnessTable | None = None

    def __post_init__(self):
        if self.table is None:
            self.table = FitnessTable(self.seed_pool, self.request)

    @property
    def size(self) -> int:
        return len(self.individuals)

    @property
    def sequences(self) -> list[AgentSequence]:
        return [s for s, _ in self.individuals]

    def mean_length(self) -> float:
        return sum(len(s) for s, _ in self.individuals) / len(self.individuals)

    def raw(self, seq: AgentSequence) -> float:
        return self.table.raw(seq)

    def rescore(self) -> None:
        """Recompute cached effective fitness against the current mean length."""
        avg = self.mean_length()
        self.individuals = [
            (s, parsimony(self.table.raw(s), len(s), avg, self.params))
            for s, _ in self.individuals
        ]


def _usable_sequences(agents: Sequence[Agent], sequences: Sequence[AgentSequence]):
    ids = {a.agent_id for a in agents}
    return [s for s in sequences if all(m.agent_id in ids for m in s.members)]


def seed_population(agents: Sequence[Agent], request: UserRequest, p: EvolutionParams,
                    rng: random.Random,
                    sequences: Sequence[AgentSequence] = ()) -> Population:
    """Generation 0 from a habitat's pool.

    Individuals are singletons (50%), stored sequences (25%) or random
    concatenations of 2-3 agents (25%). Without stored sequences their share
    goes to concatenations.
    """
    agents = tuple(agents)
    if not agents:
        raise EmptyPool("habitat pool is empty")
    stored = _usable_sequences(agents, sequences)

    def draw() -> AgentSequence:
        u = rng.random()
        if u < 0.5:
            return AgentSequence((rng.choice(agents),))
        if u < 0.75 and stored:
            return AgentSequence(rng.choice(stored).members)
        return AgentSequence(tuple(rng.choice(agents) for _ in range(rng.randint(2, 3))))

    seqs = [draw() for _ in range(dynamic_population_size(1.0, p))]
    target = dynamic_population_size(sum(map(len, seqs)) / len(seqs), p)
    if target > len(seqs):
        seqs.extend(draw() for _ in range(target - len(seqs)))
    else:
        del seqs[target:]

    pop = Population([(s, 0.0) for s in seqs], request, agents, 0, p)
    pop.rescore()
    return pop


def select_next_generation(pop: Population, rng: random.Random) -> Population:
    size = dynamic_population_size(pop.mean_length(), pop.params)
    seqs = [s for s, _ in pop.individuals]
    weights = [f for _, f in pop.individuals]
    chosen = rng.choices(seqs, weights=weights, k=size)
    nxt = Population([(s, 0.0) for s in chosen], pop.request, pop.seed_pool,
                     pop.generation + 1, pop.params, pop.table)
    nxt.rescore()
    return nxt


def crossover_at(p1: AgentSequence, p2: AgentSequence, c1: int, c2: int):
    a, b = p1.members, p2.members
    return AgentSequence(a[:c1] + b[c2:]), AgentSequence(b[:c2] + a[c1:])


def _cut(length: int, rng: random.Random) -> int:
    return rng.randint(1, length - 1) if length > 1 else 1


def crossover(p1: AgentSequence, p2: AgentSequence, rng: random.Random):
    """One-point crossover with an independent cut per parent."""
    return crossover_at(p1, p2, _cut(len(p1), rng), _cut(len(p2), rng))


INSERT, REPLACE, DELETE = "insert", "replace", "delete"


def mutate_at(ind: AgentSequence, pos: int, op: str, agent: Agent | None = None) -> AgentSequence:
    m = list(ind.members)
    if op == INSERT:
        m.insert(pos, agent)
    elif op == REPLACE:
        m[pos] = agent
    elif op == DELETE:
        if len(m) == 1:
            raise ValueError("cannot delete the only member")
        del m[pos]
    else:
        raise ValueError(f"unknown mutation {op!r}")
    return AgentSequence(m, ind.provenance)


def mutate(ind: AgentSequence, pool: Sequence[Agent], rng: random.Random) -> AgentSequence:
    pos = rng.randrange(len(ind))
    op = rng.choice((INSERT, REPLACE) if len(ind) == 1 else (INSERT, REPLACE, DELETE))
    agent = rng.choice(pool) if op != DELETE else None
    return mutate_at(ind, pos, op, agent)


def cohort_size(fraction: float, n: int) -> int:
    if n < 1 or fraction == 0:
        return 0
    return min(n, max(1, int(round(fraction * n))))


def vary(pop: Population, rng: random.Random) -> None:
    """Apply crossover then mutation cohorts in place and rescore."""
    seqs = [s for s, _ in pop.individuals]
    n = len(seqs)
    cx = rng.sample(range(n), cohort_size(pop.params.crossover_fraction, n))
    for i, j in zip(cx[0::2], cx[1::2]):
        seqs[i], seqs[j] = crossover(seqs[i], seqs[j], rng)
    if len(cx) % 2 and n > 1:
        # odd cohort: the leftover crosses with a random partner, keeps one child
        i = cx[-1]
        partner = rng.choice([k for k in range(n) if k != i])
        seqs[i] = crossover(seqs[i], seqs[partner], rng)[0]
    for i in rng.sample(range(n), cohort_size(pop.params.mutation_fraction, n)):
        seqs[i] = mutate(seqs[i], pop.seed_pool, rng)
    pop.individuals = [(s, 0.0) for s in seqs]
    pop.rescore()


def _better(candidate: tuple[float, int], incumbent: tuple[float, int]) -> bool:
    # higher raw fitness wins, then shorter; equal keeps the earlier discovery
    return candidate[0] > incumbent[0] or (candidate[0] == incumbent[0] and candidate[1] < incumbent[1])


def _best_of(pop: Population) -> tuple[AgentSequence, float]:
    best, best_key = None, None
    for s, _ in pop.individuals:
        key = (pop.raw(s), len(s))
        if best is None or _better(key, best_key):
            best, best_key = s, key
    return best, best_key[0]


def evolve(agents: Sequence[Agent], request: UserRequest, p: EvolutionParams,
           rng: random.Random, sequences: Sequence[AgentSequence] = (),
           on_generation: Callable[[Population], None] | None = None):
    """Evolve the best agent-sequence for ``request`` from a pool snapshot.

    Returns ``(best, best_raw_fitness, generations_run)``.
    """
    pop = seed_population(agents, request, p, rng, sequences)
    if on_generation:
        on_generation(pop)
    best, best_raw = _best_of(pop)
    stale = 0
    generations = 0
    while generations < p.max_generations and best_raw < 1.0 and stale < p.stagnation_window:
        pop = select_next_generation(pop, rng)
        vary(pop, rng)
        generations += 1
        if on_generation:
            on_generation(pop)
        cand, cand_raw = _best_of(pop)
        if _better((cand_raw, len(cand)), (best_raw, len(best))):
            stale = 0 if cand_raw > best_raw else stale + 1
            best, best_raw = cand, cand_raw
        else:
            stale += 1
    return best, best_raw, generations
