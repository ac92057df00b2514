"""Ecology measurements over runs and world snapshots."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .semantics import (
    MISSING_PENALTY,
    Agent,
    AgentSequence,
    SemanticDescription,
    UserRequest,
    flatten,
    min_distance,
)

SPECIES_THRESHOLD = 0.10


class DegenerateInput(ValueError):
    pass


@dataclass
class MetricSeries:
    points: list[tuple[float, float]]
    labels: tuple[str, str] = ("x", "y")

    def __post_init__(self):
        xs = [x for x, _ in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("series x values must be strictly increasing")

    @property
    def xs(self) -> list[float]:
        return [x for x, _ in self.points]

    @property
    def ys(self) -> list[float]:
        return [y for _, y in self.points]

    def __len__(self) -> int:
        return len(self.points)


def effectiveness(best: AgentSequence, request: UserRequest) -> float:
    """Percent of the request fulfilled, crediting each tuple by closeness."""
    cands = best.attribute_tuples()
    required = flatten(request)
    score = sum(max(0.0, 1.0 - min_distance(r, cands) / MISSING_PENALTY) for r in required)
    return 100.0 * score / len(required)


def moving_average(values: Sequence[float], window: int) -> list[float]:
    """Trailing moving average: point i is the mean of the last ``window`` values.

    The first points average over whatever history exists.
    """
    if window < 1:
        raise ValueError("window must be positive")
    out = []
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out.append(math.fsum(values[lo:i + 1]) / (i + 1 - lo))
    return out


def succession_series(log, window: int = 50) -> tuple[MetricSeries, MetricSeries]:
    """Raw per-request effectiveness and its trailing moving average."""
    if not log:
        raise ValueError("empty event log")
    xs = [float(e.request_index) for e in log]
    ys = [e.effectiveness for e in log]
    labels = ("request_index", "effectiveness")
    return (MetricSeries(list(zip(xs, ys)), labels),
            MetricSeries(list(zip(xs, moving_average(ys, window))), labels))


# -- species ----------------------------------------------------------------

@dataclass
class SpeciesPartition:
    species: list[set[int]]
    representative: list[SemanticDescription]

    def __len__(self) -> int:
        return len(self.species)

    @property
    def total(self) -> int:
        return sum(len(s) for s in self.species)


def _description_matrix(descs: Sequence[SemanticDescription]) -> np.ndarray:
    """Pairwise description distances, same rule as ``description_distance``."""
    k = len(descs)
    present = np.zeros((k, 101), dtype=bool)
    values = np.zeros((k, 101), dtype=np.int64)
    for i, d in enumerate(descs):
        for attr_id, v in d.tuples:
            present[i, attr_id] = True
            values[i, attr_id] = v
    counts = present.sum(axis=1)
    pres = present.astype(np.int64)
    shared = pres @ pres.T
    union = counts[:, None] + counts[None, :] - shared
    diff = np.zeros((k, k), dtype=np.int64)
    for c in np.flatnonzero(present.any(axis=0)):
        idx = np.flatnonzero(present[:, c])
        v = values[idx, c]
        diff[np.ix_(idx, idx)] += np.abs(v[:, None] - v[None, :])
    numer = diff + 100 * (union - shared)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, numer / np.maximum(100 * union, 1), 0.0)
    return out


class SpeciesIndex:
    """Leader clustering over subsets of a fixed agent collection.

    Agents with identical descriptions always land in the same species, so
    clustering runs over distinct descriptions ordered by their smallest
    agent id, against a precomputed distance matrix.
    """

    def __init__(self, agents: Sequence[Agent], threshold: float = SPECIES_THRESHOLD):
        self.threshold = threshold
        self.agents = sorted(agents, key=lambda a: a.agent_id)
        slot: dict[SemanticDescription, int] = {}
        self.descs: list[SemanticDescription] = []
        self.desc_of: dict[int, int] = {}
        for a in self.agents:
            j = slot.get(a.description)
            if j is None:
                j = slot[a.description] = len(self.descs)
                self.descs.append(a.description)
            self.desc_of[a.agent_id] = j
        self.dist = _description_matrix(self.descs) if self.descs else np.zeros((0, 0))

    def partition(self, agent_ids=None) -> SpeciesPartition:
        pool = self.agents if agent_ids is None else [a for a in self.agents if a.agent_id in agent_ids]
        order: list[int] = []
        members: dict[int, list[int]] = {}
        for a in pool:
            j = self.desc_of[a.agent_id]
            if j not in members:
                members[j] = []
                order.append(j)
            members[j].append(a.agent_id)
        leaders: list[int] = []
        species: list[set[int]] = []
        thr = self.threshold + 1e-12
        for j in order:
            if leaders:
                row = self.dist[j, leaders]
                hit = np.flatnonzero(row <= thr)
                if hit.size:
                    species[hit[0]].update(members[j])
                    continue
            leaders.append(j)
            species.append(set(members[j]))
        return SpeciesPartition(species, [self.descs[j] for j in leaders])

    def count(self, agent_ids=None) -> int:
        return len(self.partition(agent_ids))


def partition_species(agents: Sequence[Agent], threshold: float = SPECIES_THRESHOLD) -> SpeciesPartition:
    """Greedy leader clustering in agent-id order."""
    if not agents:
        raise ValueError("no agents to partition")
    return SpeciesIndex(agents, threshold).partition()


@dataclass
class AbundanceHistogram:
    bins: list[tuple[int, int, int]]  # (lo, hi, species_count), member-count octaves
    abundances: list[float] = field(default_factory=list)

    def counts(self) -> list[int]:
        return [c for _, _, c in self.bins]


def relative_abundance(p: SpeciesPartition) -> AbundanceHistogram:
    total = p.total
    sizes = [len(s) for s in p.species]
    top = max(sizes).bit_length()
    counts = [0] * top
    for n in sizes:
        counts[n.bit_length() - 1] += 1
    bins = [(2**b, 2 ** (b + 1) - 1, counts[b]) for b in range(top)]
    return AbundanceHistogram(bins, [n / total for n in sizes])


def _network(world):
    return getattr(world, "network", world)


def species_area_table(world, repeats: int = 10, rng: random.Random | None = None,
                       index: SpeciesIndex | None = None) -> list[tuple[int, float]]:
    """Mean species count over ``repeats`` random habitat subsets of each size."""
    net = _network(world)
    rng = rng or random.Random(0)
    hids = sorted(net.habitats)
    if not hids:
        raise ValueError("world has no habitats")
    index = index or SpeciesIndex(net.all_agents())
    pools = {h: set(net.habitats[h].pool_agents) for h in hids}
    rows = []
    for n in range(1, min(100, len(hids)) + 1):
        total = 0
        for _ in range(repeats):
            ids: set[int] = set()
            for h in rng.sample(hids, n):
                ids |= pools[h]
            total += index.count(ids) if ids else 0
        rows.append((n, total / repeats))
    return rows


def species_area(world, repeats: int = 10, rng: random.Random | None = None) -> MetricSeries:
    rows = species_area_table(world, repeats, rng)
    pts = [(math.log10(n), math.log10(m)) for n, m in rows if m > 0]
    return MetricSeries(pts, ("log10_n", "log10_mean_species"))


def fit_power_law(s: MetricSeries) -> tuple[float, float, float]:
    """OLS line through already log-transformed points: (slope, intercept, r^2)."""
    if len(s) < 3:
        raise DegenerateInput("need at least 3 points")
    xs, ys = s.xs, s.ys
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise DegenerateInput("x values have zero variance")
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = my - slope * mx
    ss_res = sum((y - (intercept + slope * x)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - my) ** 2 for y in ys)
    if ss_tot == 0:
        r2 = 1.0 if ss_res == 0 else 0.0
    else:
        r2 = max(0.0, 1.0 - ss_res / ss_tot)
    return slope, intercept, r2


def link_means_by_community(world) -> tuple[float, float]:
    """Mean directed link probability over same- and cross-community habitat pairs.

    Absent links count as probability 0; every ordered pair of distinct
    habitats contributes.
    """
    net = world.network
    community = world.community_of_habitat()
    hids = sorted(net.habitats)
    same = [0.0, 0]
    cross = [0.0, 0]
    for a in hids:
        out = net.habitats[a].outgoing
        for b in hids:
            if a == b:
                continue
            acc = same if community[a] == community[b] else cross
            acc[0] += out.get(b, 0.0)
            acc[1] += 1
    return same[0] / max(same[1], 1), cross[0] / max(cross[1], 1)
