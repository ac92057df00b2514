"""Flat ``key = value`` configuration files.

Nested parameter blocks use dotted keys (``evolution.parsimony_alpha``).
``#`` starts a comment. Unknown keys are an error.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .evolution import EvolutionParams
from .network import FeedbackParams
from .simulation import InvalidConfig, SimConfig

_SECTIONS = {"evolution": EvolutionParams, "feedback": FeedbackParams}

_COMMENTS = {
    "num_users": "users, one habitat each",
    "initial_agents_per_user": "agents each user deploys before the first request",
    "deploy_every_requests": "a user deploys one more agent after this many of their requests",
    "total_requests": "requests in one run",
    "num_communities": "communities, users assigned round-robin",
    "initial_degree": "random peers each habitat links to at start",
    "initial_link_p": "starting probability of those links, each direction",
    "rng_seed": "master seed (ECOSIM_SEED or --seed override it)",
    "evolution.crossover_fraction": "share of survivors recombined per generation",
    "evolution.mutation_fraction": "share of survivors point-mutated per generation",
    "evolution.base_pop_size": "population size = base + round(size_factor * mean length)",
    "evolution.size_factor": "",
    "evolution.parsimony_alpha": "fitness divisor slope for longer-than-average sequences",
    "evolution.max_generations": "hard generation cap",
    "evolution.stagnation_window": "stop after this many generations without improvement",
    "feedback.eta_up": "link strengthening rate on successful use",
    "feedback.eta_down": "link decay rate for unused deliveries",
    "feedback.epsilon_close": "links below this probability are closed",
    "feedback.new_link_p0": "probability of links created by multi-hop success",
    "feedback.cluster_threshold": "minimum link probability for clustering",
    "feedback.idle_limit": "idle local requests before a migrant escapes",
}


def _coerce(raw: str, typ, key: str):
    try:
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
    except ValueError:
        raise InvalidConfig(f"{key}: cannot parse {raw!r}") from None
    return raw


def _field_types(cls) -> dict[str, str]:
    return {f.name: f.type for f in dataclasses.fields(cls)}


def parse_config(text: str) -> SimConfig:
    top = _field_types(SimConfig)
    values: dict = {}
    nested: dict[str, dict] = {name: {} for name in _SECTIONS}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if "." in key:
            section, name = key.split(".", 1)
            cls = _SECTIONS.get(section)
            types = _field_types(cls) if cls else {}
            if name not in types:
                raise InvalidConfig(f"line {lineno}: unknown key {key!r}")
            nested[section][name] = _coerce(raw, types[name], key)
        elif key in top and key not in _SECTIONS:
            values[key] = _coerce(raw, top[key], key)
        else:
            raise InvalidConfig(f"line {lineno}: unknown key {key!r}")
    try:
        for section, cls in _SECTIONS.items():
            values[section] = cls(**nested[section])
        cfg = SimConfig(**values)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(str(exc)) from None
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> SimConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _items(cfg: SimConfig):
    for f in dataclasses.fields(SimConfig):
        v = getattr(cfg, f.name)
        if f.name in _SECTIONS:
            for g in dataclasses.fields(v):
                yield f"{f.name}.{g.name}", getattr(v, g.name)
        else:
            yield f.name, v


def format_config(cfg: SimConfig, comments: bool = True) -> str:
    lines = ["# ecosim run configuration", ""] if comments else []
    section = None
    for key, value in _items(cfg):
        head = key.split(".", 1)[0] if "." in key else None
        if comments and head != section:
            section = head
            if head:
                lines += ["", f"# [{head}]"]
        note = _COMMENTS.get(key) if comments else ""
        if note:
            lines.append(f"# {note}")
        lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    return "\n".join(lines) + "\n"


def config_dict(cfg: SimConfig) -> dict:
    return dict(_items(cfg))
