"""User-base model and the request-driven event loop."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .evolution import EmptyPool, EvolutionParams, evolve
from .metrics import effectiveness
from .network import FeedbackParams, Network
from .semantics import (
    ATTR_MAX,
    ATTR_MIN,
    Agent,
    AgentSequence,
    AttributeTuple,
    SemanticDescription,
    UserRequest,
)

VALUE_NOISE = 10
FOREIGN_ID_RATE = 0.2


class InvalidConfig(ValueError):
    pass


@dataclass
class SimConfig:
    num_users: int = 100
    initial_agents_per_user: int = 5
    deploy_every_requests: int = 3
    total_requests: int = 1000
    num_communities: int = 8
    initial_degree: int = 4
    initial_link_p: float = 0.5
    rng_seed: int = 42
    evolution: EvolutionParams = field(default_factory=EvolutionParams)
    feedback: FeedbackParams = field(default_factory=FeedbackParams)

    def validate(self) -> None:
        positive = ("num_users", "initial_agents_per_user", "deploy_every_requests",
                    "total_requests", "num_communities", "initial_degree")
        for name in positive:
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be positive")
        if self.num_users < self.num_communities:
            raise InvalidConfig("num_users must be at least num_communities")
        if not 0 < self.initial_link_p <= 1:
            raise InvalidConfig("initial_link_p must lie in (0, 1]")
        if not 0 <= self.rng_seed < 2**64:
            raise InvalidConfig("rng_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class CommunityTemplate:
    """Attribute centres of one community plus its provider roles.

    A role is the subset of template ids one kind of provider offers
    (airline vs hotel in a travel community). Each request group asks for
    one role.
    """

    community_id: int
    attribute_profile: dict[int, int]
    groups: int
    tuples_per_group: int
    roles: tuple[tuple[int, ...], ...] = ()

    @property
    def ids(self) -> list[int]:
        return sorted(self.attribute_profile)


@dataclass
class UserModel:
    user_id: int
    habitat_id: int
    community_id: int
    role: int = 0
    requests_submitted: int = 0
    agents_deployed: int = 0


@dataclass(frozen=True)
class EventRecord:
    request_index: int
    user_id: int
    habitat_id: int
    request: UserRequest
    best_fitness: float
    effectiveness: float
    generations_run: int
    pool_size_after: int
    mean_sequence_length: float = 0.0
    best_length: int = 0


@dataclass
class World:
    config: SimConfig
    network: Network
    users: list[UserModel]
    templates: dict[int, CommunityTemplate]
    rng: random.Random
    requests_served: int = 0

    def template_of(self, user: UserModel) -> CommunityTemplate:
        return self.templates[user.community_id]

    def community_of_habitat(self) -> dict[int, int]:
        return {u.habitat_id: u.community_id for u in self.users}


ROLES_PER_COMMUNITY = 3
ROLE_SIZE = 3


def make_template(community_id: int, rng: random.Random) -> CommunityTemplate:
    size = rng.randint(6, 8)
    ids = rng.sample(range(ATTR_MIN, ATTR_MAX + 1), size)
    profile = {i: rng.randint(ATTR_MIN, ATTR_MAX) for i in ids}
    # cyclic windows over the shuffled ids, so roles overlap only at their edges
    stride = size / ROLES_PER_COMMUNITY
    roles = tuple(
        tuple(sorted(ids[(int(r * stride) + j) % size] for j in range(ROLE_SIZE)))
        for r in range(ROLES_PER_COMMUNITY)
    )
    groups = rng.randint(2, 8)
    per_group = rng.randint(3, ROLE_SIZE)
    return CommunityTemplate(community_id, profile, groups, per_group, roles)


def _clamp(v: int) -> int:
    return max(ATTR_MIN, min(ATTR_MAX, v))


def _draw_tuples(template: CommunityTemplate, role: int, size: int, rng: random.Random,
                 noise: int) -> list[AttributeTuple]:
    ids = rng.sample(template.roles[role], size)
    foreign = None
    if noise and rng.random() < FOREIGN_ID_RATE:
        outside = [i for i in range(ATTR_MIN, ATTR_MAX + 1) if i not in ids]
        foreign = rng.choice(outside)
        ids[rng.randrange(size)] = foreign
    out = []
    for i in ids:
        if i == foreign:
            out.append(AttributeTuple(i, rng.randint(ATTR_MIN, ATTR_MAX)))
        else:
            centre = template.attribute_profile[i]
            out.append(AttributeTuple(i, _clamp(centre + rng.randint(-noise, noise))))
    return out


def generate_agent(world: World, user: UserModel, rng: random.Random | None = None,
                   noise: int = VALUE_NOISE) -> Agent:
    rng = rng or world.rng
    template = world.template_of(user)
    size = rng.randint(3, min(6, len(template.roles[user.role])))
    desc = SemanticDescription(_draw_tuples(template, user.role, size, rng, noise))
    user.agents_deployed += 1
    return Agent(
        agent_id=world.network.new_agent_id(),
        service_ref=f"svc://user{user.user_id}/{user.agents_deployed}",
        description=desc,
        origin_habitat=user.habitat_id,
    )


def generate_request(world: World, user: UserModel, rng: random.Random | None = None,
                     noise: int = VALUE_NOISE) -> UserRequest:
    rng = rng or world.rng
    t = world.template_of(user)
    return UserRequest([
        _draw_tuples(t, rng.randrange(len(t.roles)), t.tuples_per_group, rng, noise)
        for _ in range(t.groups)
    ])


def init(config: SimConfig) -> World:
    config.validate()
    rng = random.Random(config.rng_seed)
    net = Network(config.feedback)
    templates = {c: make_template(c, rng) for c in range(config.num_communities)}
    c = config.num_communities
    users = [UserModel(u, u, u % c, (u // c) % ROLES_PER_COMMUNITY)
             for u in range(config.num_users)]
    for u in users:
        net.add_empty_habitat(u.habitat_id)

    ids = [u.habitat_id for u in users]
    degree = min(config.initial_degree, len(ids) - 1)
    p = config.initial_link_p
    for h in ids:
        for other in rng.sample([x for x in ids if x != h], degree):
            net.connect(h, other, p, p)

    world = World(config, net, users, templates, rng)
    for u in users:
        for _ in range(config.initial_agents_per_user):
            net.deploy(generate_agent(world, u, rng), u.habitat_id, rng)
    return world


def _provenance(best: AgentSequence, stored: list[AgentSequence], here: int) -> tuple[int, ...]:
    """Habitats where ``best`` or a contiguous piece of it was evolved."""
    key = best.key
    found = {here}
    for s in stored:
        k = s.key
        n = len(k)
        if n <= len(key) and any(key[i:i + n] == k for i in range(len(key) - n + 1)):
            found.update(s.provenance)
    return tuple(sorted(found))


def step(world: World, rng: random.Random | None = None) -> EventRecord:
    rng = rng or world.rng
    cfg = world.config
    net = world.network
    user = rng.choice(world.users)
    hid = user.habitat_id
    habitat = net.habitat(hid)
    request = generate_request(world, user, rng)

    agents = habitat.agents()
    stored = habitat.sequences()
    lengths: list[float] = []
    used: set[int] = set()
    try:
        best, fit, gens = evolve(agents, request, cfg.evolution, rng, stored,
                                 on_generation=lambda pop: lengths.append(pop.mean_length()))
    except EmptyPool:
        best, fit, gens, eff = None, 0.0, 0, 0.0
    else:
        eff = effectiveness(best, request)
        best = AgentSequence(best.members, _provenance(best, stored, hid))
        net.register_solution(hid, best, rng)
        net.migration_feedback(best, hid)
        used = {m.agent_id for m in best.members}
    net.request_tick(hid, used, rng)

    user.requests_submitted += 1
    if user.requests_submitted % cfg.deploy_every_requests == 0:
        net.deploy(generate_agent(world, user, rng), hid, rng)

    world.requests_served += 1
    return EventRecord(
        request_index=world.requests_served,
        user_id=user.user_id,
        habitat_id=hid,
        request=request,
        best_fitness=fit,
        effectiveness=eff,
        generations_run=gens,
        pool_size_after=len(habitat.pool_agents),
        mean_sequence_length=sum(lengths) / len(lengths) if lengths else 0.0,
        best_length=len(best) if best is not None else 0,
    )


def run(config: SimConfig, progress=None) -> tuple[list[EventRecord], World]:
    world = init(config)
    log = []
    for _ in range(config.total_requests):
        log.append(step(world))
        if progress:
            progress(log[-1])
    return log, world
