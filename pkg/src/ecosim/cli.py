"""Command line: run experiments, translate tuple sets, write a default config."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import random
import sys
from pathlib import Path

from . import __version__
from .config import config_dict, format_config, load_config
from .metrics import (
    SpeciesIndex,
    partition_species,
    relative_abundance,
    species_area_table,
    succession_series,
)
from .semantics import SemanticError, SemanticFilter, filter_translate, parse_item
from .simulation import InvalidConfig, SimConfig, init, step

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3
SPECIES_AREA_REPEATS = 10
SUCCESSION_WINDOW = 50


def fmt(x: float) -> str:
    return f"{x:.6f}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_experiment(cfg: SimConfig, out_dir, progress=None):
    """Run one configured experiment and write every output file.

    Returns (log, world). Raises OSError on write failures.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    world = init(cfg)
    _write_text(out / "network_before.json", world.network.snapshot_json())

    log = []
    for _ in range(cfg.total_requests):
        log.append(step(world))
        if progress:
            progress(log[-1])

    _write_csv(out / "succession.csv",
               ["request_index", "user_id", "habitat_id", "best_fitness",
                "effectiveness", "generations", "pool_size"],
               ([e.request_index, e.user_id, e.habitat_id, fmt(e.best_fitness),
                 fmt(e.effectiveness), e.generations_run, e.pool_size_after] for e in log))

    _, smooth = succession_series(log, SUCCESSION_WINDOW)
    _write_csv(out / "succession_smoothed.csv", ["request_index", "effectiveness_ma"],
               ([int(x), fmt(y)] for x, y in smooth.points))

    agents = world.network.all_agents()
    index = SpeciesIndex(agents)
    bins = relative_abundance(partition_species(agents)).bins if agents else []
    _write_csv(out / "species_abundance.csv", ["bin_lo", "bin_hi", "species_count"], bins)

    # separate stream so sampling does not depend on how far the run consumed the main one
    table = species_area_table(world, SPECIES_AREA_REPEATS,
                               random.Random(f"species-area:{cfg.rng_seed}"), index)
    _write_csv(out / "species_area.csv",
               ["n", "log10_n", "mean_species", "log10_mean_species"],
               ([n, fmt(math.log10(n)), fmt(m), fmt(math.log10(m)) if m > 0 else "nan"]
                for n, m in table))

    _write_text(out / "network_after.json", world.network.snapshot_json())

    files = ["succession.csv", "succession_smoothed.csv", "species_abundance.csv",
             "species_area.csv", "network_before.json", "network_after.json"]
    manifest = {
        "version": __version__,
        "rng_seed": cfg.rng_seed,
        "config": config_dict(cfg),
        "files": [{"name": f, "sha256": _sha256(out / f)} for f in files],
    }
    _write_text(out / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return log, world


def _err(msg: str) -> None:
    print(f"ecosim: {msg}", file=sys.stderr)


def _resolve_seed(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get("ECOSIM_SEED")
    if env is None or env == "":
        return None
    return int(env)


def cmd_run(config_path, seed_override, out_dir) -> int:
    try:
        cfg = load_config(config_path)
        seed = _resolve_seed(seed_override)
        if seed is not None:
            cfg.rng_seed = seed
            cfg.validate()
    except FileNotFoundError:
        _err(f"config file not found: {config_path}")
        return EXIT_CONFIG
    except (InvalidConfig, ValueError) as exc:
        _err(f"bad config: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _err(f"cannot read config: {exc}")
        return EXIT_CONFIG
    try:
        run_experiment(cfg, out_dir)
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return EXIT_IO
    return EXIT_OK


def cmd_translate(filter_path, input_path, out=None) -> int:
    out = out or sys.stdout
    try:
        table = SemanticFilter.load(filter_path)
    except OSError as exc:
        _err(f"cannot read filter: {exc}")
        return EXIT_IO
    except (SemanticError, ValueError) as exc:
        _err(f"bad filter table: {exc}")
        return EXIT_CONFIG
    try:
        with open(input_path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        _err(f"cannot read input: {exc}")
        return EXIT_IO
    rendered = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rendered.append(filter_translate(parse_item(line), table))
        except SemanticError as exc:
            _err(f"line {lineno}: {exc}")
            return EXIT_CONFIG
    for r in rendered:
        out.write(r + "\n")
    return EXIT_OK


def cmd_init_config(out_path) -> int:
    try:
        _write_text(Path(out_path), format_config(SimConfig()))
    except OSError as exc:
        _err(f"cannot write config: {exc}")
        return EXIT_IO
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ecosim", description=__doc__)
    ap.add_argument("--version", action="version", version=f"ecosim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment and write CSV/JSON outputs")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, default=None, help="overrides rng_seed (fallback: ECOSIM_SEED)")
    r.add_argument("--out", required=True, help="output directory")

    t = sub.add_parser("translate", help="render tuple sets through a semantic filter")
    t.add_argument("--filter", required=True, dest="filter_path")
    t.add_argument("--in", required=True, dest="input_path")

    c = sub.add_parser("init-config", help="write a commented default config")
    c.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.seed, args.out)
    if args.command == "translate":
        return cmd_translate(args.filter_path, args.input_path)
    return cmd_init_config(args.out)


if __name__ == "__main__":
    sys.exit(main())
