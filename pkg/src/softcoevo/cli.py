"""``softcoevo`` command line: run experiments, export replays, inspect bodies, compare runs."""

from __future__ import annotations

import argparse
import json
import logging
import math
import statistics
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import archive
from .evolution import ALGORITHMS, EvolutionConfig, run_algorithm
from .evolution.algorithms import (
    WORKERS_ENV,
    NetworkController,
    direct_phenotype,
    effective_config,
    hyperneat_phenotype,
)
from .hyperneat import build_substrates
from .morphology import validate_body
from .network import compile as compile_network
from .tasks import TASK_IDS, UnknownTaskError, make_task, run_episode

log = logging.getLogger("softcoevo")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "hyperneat"
    task: str = "walker"
    seed: int | None = None
    output: str | None = None
    horizon: int | None = None  # overrides the task's episode length
    record_replay: bool = False
    evolution: dict = field(default_factory=dict)

    def output_dir(self) -> Path:
        return Path(self.output or f"runs/{self.algorithm}-{self.task}-seed{self.seed}")


RUN_KEYS = {f for f in RunConfig.__dataclass_fields__}


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(data: dict, assignment: str) -> None:
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    parts = key.split(".")
    target = data
    for part in parts[:-1]:
        target = target.setdefault(part, {})
        if not isinstance(target, dict):
            raise ConfigError(f"cannot set {key!r}: {part!r} is not a section")
    target[parts[-1]] = parse_value(raw)


def load_run_config(path: str | None, overrides: list[str]) -> tuple[RunConfig, EvolutionConfig]:
    """Strictly parse the JSON config plus dotted overrides; nothing is run here."""
    data: dict = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
        except json.JSONDecodeError as err:
            raise ConfigError(f"config {path} is not valid JSON: {err}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for item in overrides:
        apply_override(data, item)
    unknown = sorted(set(data) - RUN_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    run = RunConfig(**data)
    if run.seed is None:
        raise ConfigError("a seed is required (set \"seed\" in the config or pass --seed)")
    if not isinstance(run.seed, int) or isinstance(run.seed, bool) or run.seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    if run.algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {run.algorithm!r}; expected one of {', '.join(ALGORITHMS)}")
    if run.task not in TASK_IDS:
        raise ConfigError(f"unknown task {run.task!r}; expected one of {', '.join(TASK_IDS)}")
    if run.horizon is not None and (not isinstance(run.horizon, int) or run.horizon < 1):
        raise ConfigError("horizon must be a positive integer")
    if not isinstance(run.evolution, dict):
        raise ConfigError("evolution must be an object")
    evo_data = dict(run.evolution)
    if "seed" in evo_data and evo_data["seed"] != run.seed:
        raise ConfigError("evolution.seed conflicts with seed; set the seed once at top level")
    evo_data["seed"] = run.seed
    try:
        evo = EvolutionConfig.from_dict(evo_data)
    except KeyError as err:
        raise ConfigError(f"{err.args[0]} (in evolution)") from None
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid evolution settings: {err}") from None
    return run, evo


def task_for(task_id: str, horizon: int | None, grid_size: int = 5):
    task = make_task(task_id, grid_size)
    return replace(task, horizon=horizon) if horizon else task


# -- run ---------------------------------------------------------------------


def cmd_run(args) -> int:
    overrides = list(args.set or [])
    for flag in ("algorithm", "task", "seed", "output", "horizon"):
        value = getattr(args, flag)
        if value is not None:
            overrides.append(f"{flag}={json.dumps(value)}")
    if args.record_replay:
        overrides.append("record_replay=true")
    try:
        run, evo = load_run_config(args.config, overrides)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    if run.algorithm == "nested" and evo.body_weight:
        log.warning("nested baseline speciates on genomes only; body_weight %s ignored", evo.body_weight)
    evo = effective_config(run.algorithm, evo)
    task = task_for(run.task, run.horizon, evo.grid_size)
    out = run.output_dir()
    info = {
        "algorithm": run.algorithm,
        "task": run.task,
        "horizon": task.horizon,
        "seed": run.seed,
        "config": evo.to_dict(),
        "run": {"output": str(out), "record_replay": run.record_replay},
    }
    rundir = archive.RunDirectory(out, info)
    try:
        result = run_algorithm(run.algorithm, evo, task, on_generation=rundir.add_generation)
    except KeyboardInterrupt:
        rundir.write_manifest("interrupted")
        print("interrupted; partial artifacts kept", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as err:
        log.exception("run failed")
        rundir.write_manifest("failed", error=f"{type(err).__name__}: {err}")
        print(f"error: run failed: {err}", file=sys.stderr)
        return EXIT_FAILURE
    rundir.write_initial(result.initial_genomes)
    status = "complete" if result.stop_reason is None else "budget_exhausted"
    rundir.write_manifest(
        status,
        evaluations=result.evaluations,
        stop_reason=result.stop_reason,
        events=result.events,
    )
    if run.record_replay and rundir.best is not None:
        export_replay(out / archive.CHAMPION_FILE, None, out / "replay.jsonl", None)
    best = rundir.best["fitness"] if rundir.best else None
    print(f"final best fitness: {best if best is not None else 'n/a'}")
    print(f"artifacts: {out}")
    return EXIT_OK


# -- replay ------------------------------------------------------------------


def champion_phenotype(champion: dict, task):
    """Rebuild (body, controller) for ``task`` from a champion record."""
    algorithm = champion["algorithm"]
    genome = champion["genome"]
    if algorithm == "hyperneat":
        body, controller = hyperneat_phenotype(genome, task, build_substrates(task.input_count, task.grid_size))
        return body, controller
    if algorithm == "direct":
        expected = 2 + task.input_count
        if len(genome.input_ids) != expected:
            raise ValueError(
                f"direct champion has {len(genome.input_ids)} inputs, task {task.id} needs {expected}"
            )
        return direct_phenotype(genome, task)
    if algorithm == "nested":
        ctrl = champion.get("controller_genome")
        if ctrl is None:
            raise ValueError("nested champion has no controller genome")
        if len(ctrl.input_ids) != task.input_count:
            raise ValueError(
                f"nested controller has {len(ctrl.input_ids)} inputs, task {task.id} provides {task.input_count}"
            )
        return champion["body"], NetworkController(compile_network(ctrl))
    raise ValueError(f"unknown algorithm {algorithm!r} in champion")


def export_replay(champion_path, task_id: str | None, out_path, horizon: int | None) -> int:
    champion = archive.load_champion(champion_path)
    task_id = task_id or champion["task"]
    if horizon is None and task_id == champion["task"]:
        horizon = champion.get("horizon")
    config = champion.get("config") or {}
    task = task_for(task_id, horizon, champion["body"].n)
    body, controller = champion_phenotype(champion, task)
    ok, reason = validate_body(body)
    if not ok:
        raise ValueError(f"champion body is not simulatable ({reason})")
    result = run_episode(body, controller, task, record=True, action_center=config.get("action_center", 1.1))
    header = {
        "type": "header",
        "algorithm": champion["algorithm"],
        "task": task.id,
        "horizon": task.horizon,
        "seed": champion.get("seed"),
        "config": config,
        "generation": champion.get("generation"),
        "body": body.to_list(),
        "fitness": result.fitness,
        "termination": result.termination,
        "frames": len(result.frames),
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for frame in result.frames:
            fh.write(json.dumps(frame, sort_keys=True) + "\n")
    return len(result.frames)


def cmd_replay_export(args) -> int:
    try:
        frames = export_replay(args.champion, args.task, args.out, args.horizon)
    except (archive.ArchiveError, UnknownTaskError, ValueError) as err:
        msg = err.args[0] if isinstance(err, KeyError) else err
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE if isinstance(err, UnknownTaskError) else EXIT_FAILURE
    print(f"wrote {frames} frames to {args.out}")
    return EXIT_OK


# -- inspect -----------------------------------------------------------------


def describe_body(body) -> str:
    lines = [body.to_ascii(), ""]
    for vt, count in body.counts().items():
        lines.append(f"{vt.name.lower():<11} {count:>3}")
    lines.append(f"{'total':<11} {body.n * body.n:>3}")
    ok, reason = validate_body(body)
    lines.append(f"valid: {'yes' if ok else 'no (' + reason + ')'}")
    return "\n".join(lines)


def cmd_inspect_body(args) -> int:
    try:
        champion = archive.load_champion(args.champion)
    except archive.ArchiveError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAILURE
    fitness = champion.get("fitness")
    print(f"{champion['algorithm']} / {champion['task']}  generation {champion.get('generation')}  fitness {fitness}")
    print(describe_body(champion["body"]))
    return EXIT_OK


# -- compare -----------------------------------------------------------------

COMPARE_COLUMNS = ("algorithm", "task", "seed", "generations", "final_best", "best_ever", "final_mean", "evaluations", "file")


def summarise_stats(path) -> dict:
    meta, rows = archive.read_stats(path)
    best = [r["best"] for r in rows if not math.isnan(r["best"])]
    last = rows[-1] if rows else None
    return {
        "algorithm": meta.get("algorithm", "?"),
        "task": meta.get("task", "?"),
        "seed": meta.get("seed", "?"),
        "generations": len(rows),
        "final_best": last["best"] if last else math.nan,
        "best_ever": max(best) if best else math.nan,
        "final_mean": last["mean"] if last else math.nan,
        "evaluations": last["evaluations_cumulative"] if last else 0,
        "file": str(path),
    }


def _fmt(value) -> str:
    return f"{value:.4f}" if isinstance(value, float) else str(value)


def cmd_compare(args) -> int:
    try:
        summaries = [summarise_stats(p) for p in args.stats]
    except (OSError, KeyError, ValueError) as err:
        print(f"error: cannot read stats: {err}", file=sys.stderr)
        return EXIT_FAILURE
    groups: dict[tuple, list[float]] = {}
    for s in summaries:
        groups.setdefault((s["algorithm"], s["task"]), []).append(s["best_ever"])
    table = [[_fmt(s[c]) for c in COMPARE_COLUMNS] for s in summaries]
    widths = [max(len(c), *(len(r[i]) for r in table)) for i, c in enumerate(COMPARE_COLUMNS)]
    print("  ".join(c.ljust(w) for c, w in zip(COMPARE_COLUMNS, widths)))
    for r in table:
        print("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    print()
    print("algorithm   task                 runs  mean_best_ever  std")
    for (alg, task), values in sorted(groups.items()):
        std = statistics.stdev(values) if len(values) > 1 else 0.0
        print(f"{alg:<11} {task:<20} {len(values):>4}  {statistics.fmean(values):>14.4f}  {std:.4f}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(",".join(COMPARE_COLUMNS) + "\n")
            for s in summaries:
                fh.write(",".join(archive._cell(s[c]) for c in COMPARE_COLUMNS) + "\n")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softcoevo",
        description="Co-evolve soft voxel robot bodies and controllers.",
        epilog=f"Set {WORKERS_ENV}=N to evaluate episodes in N worker processes.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one evolutionary experiment")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted override, e.g. evolution.population=24")
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--task")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="output directory (default runs/<algorithm>-<task>-seed<seed>)")
    p.add_argument("--horizon", type=int, help="episode length override")
    p.add_argument("--record-replay", action="store_true", help="also export the champion's replay trace")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay-export", help="re-run a champion and write a JSONL frame trace")
    p.add_argument("champion", help="champion JSON file")
    p.add_argument("--task", help="task id (default: the champion's task)")
    p.add_argument("--horizon", type=int)
    p.add_argument("--out", required=True, help="output .jsonl path")
    p.set_defaults(func=cmd_replay_export)

    p = sub.add_parser("inspect-body", help="print a champion's body grid and voxel counts")
    p.add_argument("champion")
    p.set_defaults(func=cmd_inspect_body)

    p = sub.add_parser("compare", help="summarise several stats CSVs in one table")
    p.add_argument("stats", nargs="+")
    p.add_argument("--out", help="also write the per-run summary as CSV")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
