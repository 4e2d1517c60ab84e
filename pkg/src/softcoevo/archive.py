"""On-disk run artifacts: stats CSV, champion archive, manifest and replay traces.

Every file carries the configuration and seed. Nothing time-dependent is
written, so two runs with the same seed produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .genome import Genome
from .morphology import BodyGrid

STATS_COLUMNS = (
    "generation",
    "best",
    "mean",
    "median",
    "species_count",
    "valid_fraction",
    "evaluations_cumulative",
)
STATS_FILE = "stats.csv"
CHAMPION_FILE = "champion.json"
CHAMPION_DIR = "champions"
MANIFEST_FILE = "manifest.json"
INITIAL_FILE = "initial_genomes.json"


class ArchiveError(ValueError):
    pass


def _json_default(value):
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def dump_json(data, path: Path) -> None:
    text = json.dumps(data, indent=2, sort_keys=True, default=_json_default, allow_nan=True)
    path.write_text(text + "\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


class RunDirectory:
    """Writes artifacts as a run progresses so an interrupted run leaves usable files."""

    def __init__(self, root: Path | str, run_info: dict):
        self.root = Path(root)
        self.info = run_info
        self.best: dict | None = None
        self.rows = 0
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / CHAMPION_DIR).mkdir(exist_ok=True)
        header = io.StringIO()
        for key in ("algorithm", "task", "seed"):
            header.write(f"# {key}: {run_info[key]}\n")
        header.write(f"# config: {json.dumps(run_info['config'], sort_keys=True, default=_json_default)}\n")
        header.write(",".join(STATS_COLUMNS) + "\n")
        (self.root / STATS_FILE).write_text(header.getvalue())
        self.write_manifest("running")

    def add_generation(self, row: dict, champion: dict | None) -> None:
        with open(self.root / STATS_FILE, "a") as fh:
            fh.write(",".join(_cell(row[c]) for c in STATS_COLUMNS) + "\n")
        self.rows += 1
        if champion is None:
            return
        dump_json(champion, self.root / CHAMPION_DIR / f"gen_{row['generation']:04d}.json")
        if self.best is None or champion["fitness"] > self.best["fitness"]:
            self.best = champion
            dump_json(champion, self.root / CHAMPION_FILE)

    def write_initial(self, genomes: list[Genome]) -> None:
        dump_json(
            {"seed": self.info["seed"], "config": self.info["config"], "genomes": [g.to_dict() for g in genomes]},
            self.root / INITIAL_FILE,
        )

    def write_manifest(self, status: str, **extra) -> None:
        manifest = dict(self.info)
        manifest.update(
            status=status,
            complete=status == "complete",
            generations_recorded=self.rows,
            best_fitness=None if self.best is None else self.best["fitness"],
            best_generation=None if self.best is None else self.best["generation"],
            files={
                "stats": STATS_FILE,
                "champion": CHAMPION_FILE if self.best is not None else None,
                "champions": CHAMPION_DIR,
                "initial_genomes": INITIAL_FILE,
            },
        )
        manifest.update(extra)
        dump_json(manifest, self.root / MANIFEST_FILE)


def read_stats(path: Path | str) -> tuple[dict, list[dict]]:
    """Return (comment header fields, rows) from a stats CSV."""
    meta, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = value
        elif line:
            body.append(line)
    rows = []
    for rec in csv.DictReader(body):
        rows.append(
            {
                "generation": int(rec["generation"]),
                "best": float(rec["best"]),
                "mean": float(rec["mean"]),
                "median": float(rec["median"]),
                "species_count": int(rec["species_count"]),
                "valid_fraction": float(rec["valid_fraction"]),
                "evaluations_cumulative": int(rec["evaluations_cumulative"]),
            }
        )
    return meta, rows


def load_champion(path: Path | str) -> dict:
    """Load and sanity-check a champion record; raises ArchiveError when it is unusable."""
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ArchiveError(f"no champion archive at {path}") from None
    except (OSError, json.JSONDecodeError) as err:
        raise ArchiveError(f"corrupt champion archive {path}: {err}") from None
    if not isinstance(data, dict):
        raise ArchiveError(f"corrupt champion archive {path}: expected an object")
    missing = [k for k in ("algorithm", "task", "body", "genome") if k not in data]
    if missing:
        raise ArchiveError(f"corrupt champion archive {path}: missing {', '.join(missing)}")
    try:
        data["body"] = BodyGrid(data["body"])
        data["genome"] = Genome.from_dict(data["genome"])
        if "controller_genome" in data:
            data["controller_genome"] = Genome.from_dict(data["controller_genome"])
    except Exception as err:  # any decoding failure means the file is not a champion
        raise ArchiveError(f"corrupt champion archive {path}: {err}") from None
    return data
