"""Habitats, their agent-pools and the adaptive migration network.

Links are directed probabilities, but a link always exists in both
directions or neither. Successful use of migrated agents strengthens the
link they came along (``p += eta_up * (1 - p)``); links that keep
delivering agents nobody uses decay (``p *= 1 - eta_down``) until they fall
below ``epsilon_close`` and the connection is closed.
"""

from __future__ import annotations

import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .semantics import Agent, AgentSequence


class NetworkError(Exception):
    pass


class UnknownHabitat(NetworkError, KeyError):
    pass


class SelfLink(NetworkError, ValueError):
    pass


class DuplicateHabitat(NetworkError, ValueError):
    pass


class InsufficientPeers(NetworkError, ValueError):
    pass


@dataclass(frozen=True)
class FeedbackParams:
    eta_up: float = 0.2
    eta_down: float = 0.1
    epsilon_close: float = 0.02
    new_link_p0: float = 0.1
    cluster_threshold: float = 0.6
    idle_limit: int = 1

    def __post_init__(self):
        if not (0 < self.eta_up < 1 and 0 < self.eta_down < 1):
            raise ValueError("eta_up and eta_down must lie in (0, 1)")
        if not 0 < self.epsilon_close < self.new_link_p0 <= 1:
            raise ValueError("need 0 < epsilon_close < new_link_p0 <= 1")
        if self.idle_limit < 1:
            raise ValueError("idle_limit must be positive")


@dataclass
class Habitat:
    habitat_id: int
    pool_agents: dict[int, Agent] = field(default_factory=dict)
    pool_sequences: dict[tuple[int, ...], AgentSequence] = field(default_factory=dict)
    outgoing: dict[int, float] = field(default_factory=dict)

    def agents(self) -> list[Agent]:
        return list(self.pool_agents.values())

    def sequences(self) -> list[AgentSequence]:
        return list(self.pool_sequences.values())

    def holding(self, lineage: int) -> Agent | None:
        for a in self.pool_agents.values():
            if a.lineage == lineage:
                return a
        return None

    def add(self, agent: Agent) -> None:
        self.pool_agents[agent.agent_id] = agent

    def remove(self, agent_id: int) -> Agent:
        agent = self.pool_agents.pop(agent_id)
        stale = [k for k in self.pool_sequences if agent_id in k]
        for k in stale:
            del self.pool_sequences[k]
        return agent


class Network:
    """The single mutable world of habitats.

    All mutating operations are meant to be called from one thread. Agent
    ids come from a network-wide counter so runs are reproducible.
    """

    def __init__(self, feedback: FeedbackParams | None = None):
        self.habitats: dict[int, Habitat] = {}
        self.feedback = feedback or FeedbackParams()
        self._next_id = 0
        # links that delivered agents not yet used at the receiving end
        self.pending: set[tuple[int, int]] = set()

    # -- bookkeeping -------------------------------------------------------

    def new_agent_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def add_empty_habitat(self, habitat_id: int) -> Habitat:
        if habitat_id in self.habitats:
            raise DuplicateHabitat(habitat_id)
        h = self.habitats[habitat_id] = Habitat(habitat_id)
        return h

    def habitat(self, habitat_id: int) -> Habitat:
        try:
            return self.habitats[habitat_id]
        except KeyError:
            raise UnknownHabitat(habitat_id) from None

    def links(self) -> Iterable[tuple[int, int, float]]:
        for hid in sorted(self.habitats):
            out = self.habitats[hid].outgoing
            for t in sorted(out):
                yield hid, t, out[t]

    def link(self, a: int, b: int) -> float | None:
        return self.habitat(a).outgoing.get(b)

    def agent_count(self) -> int:
        return sum(len(h.pool_agents) for h in self.habitats.values())

    def all_agents(self) -> list[Agent]:
        return [a for hid in sorted(self.habitats) for a in self.habitats[hid].agents()]

    # -- topology ----------------------------------------------------------

    def connect(self, h1: int, h2: int, p12: float, p21: float) -> None:
        if h1 == h2:
            raise SelfLink(h1)
        a, b = self.habitat(h1), self.habitat(h2)
        for p in (p12, p21):
            if not 0 < p <= 1:
                raise ValueError(f"link probability {p} outside (0, 1]")
        a.outgoing[h2] = p12
        b.outgoing[h1] = p21

    def disconnect(self, h1: int, h2: int) -> None:
        self.habitat(h1).outgoing.pop(h2, None)
        self.habitat(h2).outgoing.pop(h1, None)
        self.pending.discard((h1, h2))
        self.pending.discard((h2, h1))

    def cluster_of(self, habitat_id: int) -> set[int]:
        self.habitat(habitat_id)
        thr = self.feedback.cluster_threshold
        seen = {habitat_id}
        queue = deque([habitat_id])
        while queue:
            h = queue.popleft()
            out = self.habitats[h].outgoing
            for t, p in out.items():
                if t in seen:
                    continue
                back = self.habitats[t].outgoing.get(h, 0.0)
                if max(p, back) >= thr:
                    seen.add(t)
                    queue.append(t)
        return seen

    def escape_budget(self, habitat_id: int) -> int:
        size = len(self.cluster_of(habitat_id))
        return max(2, math.ceil(math.log2(1 + size)))

    def add_habitat(self, new_id: int, k: int, rng: random.Random) -> int:
        """Join a new habitat to ``k`` random peers and merge their pools."""
        if new_id in self.habitats:
            raise DuplicateHabitat(new_id)
        if k > len(self.habitats):
            raise InsufficientPeers(f"need {k} peers, network has {len(self.habitats)}")
        peers = rng.sample(sorted(self.habitats), k)
        h = self.add_empty_habitat(new_id)
        p0 = self.feedback.new_link_p0
        for peer in peers:
            self.connect(new_id, peer, p0, p0)
        budget = self.escape_budget(new_id)
        for peer in peers:
            for agent in self.habitats[peer].agents():
                if h.holding(agent.lineage) is None:
                    h.add(self._copy(agent, new_id, budget))
        return new_id

    # -- agents ------------------------------------------------------------

    def _copy(self, agent: Agent, target: int, budget: int) -> Agent:
        return Agent(
            agent_id=self.new_agent_id(),
            service_ref=agent.service_ref,
            description=agent.description,
            origin_habitat=agent.origin_habitat,
            migration_history=agent.migration_history + [target],
            escape_remaining=budget,
            lineage=agent.lineage,
        )

    def _deliver(self, agent: Agent, source: int, target: int) -> Agent | None:
        """Place a copy of ``agent`` at ``target``; None if it already holds one."""
        dest = self.habitats[target]
        if dest.holding(agent.lineage) is not None:
            return None
        copy = self._copy(agent, target, self.escape_budget(target))
        dest.add(copy)
        self.pending.add((source, target))
        return copy

    def deploy(self, agent: Agent, home: int, rng: random.Random) -> None:
        h = self.habitat(home)
        agent.escape_remaining = self.escape_budget(home)
        agent.idle_request_count = 0
        h.add(agent)
        self.migrate_copy(agent, home, rng)

    def migrate_copy(self, agent: Agent, source: int, rng: random.Random) -> list[Agent]:
        """Copy ``agent`` along each outgoing link with that link's probability."""
        h = self.habitat(source)
        copies = []
        for target in sorted(h.outgoing):
            if rng.random() < h.outgoing[target]:
                c = self._deliver(agent, source, target)
                if c is not None:
                    copies.append(c)
        return copies

    # -- sequences ---------------------------------------------------------

    @staticmethod
    def _store(h: Habitat, seq: AgentSequence) -> bool:
        if seq.key in h.pool_sequences:
            return False
        h.pool_sequences[seq.key] = seq
        return True

    def register_solution(self, habitat_id: int, seq: AgentSequence,
                          rng: random.Random) -> None:
        """Store an evolved sequence locally and try to copy it to every neighbour."""
        h = self.habitat(habitat_id)
        self._store(h, seq)
        for target in sorted(h.outgoing):
            if rng.random() >= h.outgoing[target]:
                continue
            dest = self.habitats[target]
            budget = None
            members = []
            for m in seq.members:
                local = dest.holding(m.lineage)
                if local is None:
                    if budget is None:
                        budget = self.escape_budget(target)
                    local = self._copy(m, target, budget)
                    dest.add(local)
                    self.pending.add((habitat_id, target))
                members.append(local)
            self._store(dest, AgentSequence(members, seq.provenance))

    # -- feedback ----------------------------------------------------------

    def _strengthen(self, src: int, dst: int) -> None:
        out = self.habitats[src].outgoing
        out[dst] = out[dst] + self.feedback.eta_up * (1.0 - out[dst])
        self.pending.discard((src, dst))

    def migration_feedback(self, used: AgentSequence, user_habitat: int) -> None:
        """Reward the habitats the used sequence and its members came from."""
        here = self.habitat(user_habitat)
        sources = {m.origin_habitat for m in used.members} | set(used.provenance)
        for m in used.members:
            if len(m.migration_history) >= 2:
                self.pending.discard((m.migration_history[-2], user_habitat))
        p0 = self.feedback.new_link_p0
        for o in sorted(sources):
            if o == user_habitat or o not in self.habitats:
                continue
            if user_habitat in self.habitats[o].outgoing:
                self._strengthen(o, user_habitat)
            else:
                self.connect(o, user_habitat, p0, p0)
        for m in used.members:
            local = here.pool_agents.get(m.agent_id)
            if local is not None:
                local.usage_count += 1
                local.idle_request_count = 0

    def request_tick(self, habitat_id: int, used_agent_ids: set[int],
                     rng: random.Random) -> None:
        """Age idle migrants, let them escape or die, decay unrewarded links."""
        h = self.habitat(habitat_id)
        fb = self.feedback
        for agent in sorted(h.agents(), key=lambda a: a.agent_id):
            # a provider's own deployment stays home; only migrants age out
            if agent.agent_id in used_agent_ids or agent.origin_habitat == habitat_id:
                continue
            agent.idle_request_count += 1
            if agent.idle_request_count < fb.idle_limit:
                continue
            h.remove(agent.agent_id)
            targets = sorted(h.outgoing)
            if agent.escape_remaining <= 0 or not targets:
                continue
            target = rng.choice(targets)
            if self.habitats[target].holding(agent.lineage) is not None:
                continue  # absorbed: the target already offers this service
            agent.migration_history.append(target)
            agent.idle_request_count = 0
            agent.escape_remaining -= 1
            self.habitats[target].add(agent)

        for target in sorted(h.outgoing):
            if (habitat_id, target) in self.pending:
                self.decay(habitat_id, target)

    def decay(self, src: int, dst: int) -> None:
        """One failure update on a single directed link."""
        out = self.habitat(src).outgoing
        if dst not in out:
            return
        p = out[dst] * (1.0 - self.feedback.eta_down)
        if p < self.feedback.epsilon_close:
            self.disconnect(src, dst)
        else:
            out[dst] = p

    # -- export ------------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "habitats": [
                {
                    "id": hid,
                    "pool_agents": len(h.pool_agents),
                    "pool_sequences": len(h.pool_sequences),
                }
                for hid, h in sorted(self.habitats.items())
            ],
            "links": [
                {"from": a, "to": b, "p": round(p, 6)} for a, b, p in self.links()
            ],
        }

    def snapshot_json(self) -> str:
        return json.dumps(self.snapshot(), indent=1, sort_keys=True) + "\n"
