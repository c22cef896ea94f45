"""On-disk layout for one evolution run.

    <run dir>/
        run.json                  config echo plus live run state
        audit.log                 JSONL, one line per event
        metrics.csv               one row per candidate evaluation
        best.cost                 expression text of the current best
        best.json                 fitness and metrics of the current best
        best_policy.ckpt          policy weights behind best.json
        candidates/<id>.json      full candidate record
        candidates/<id>.cost      expression text only
        candidates/<id>.curve.csv per-epoch training rows

Everything except the two append-only files is written atomically
(temp file then rename) so a reader never sees a half-written JSON.
"""

from __future__ import annotations

import csv
import json
import os
import time
from pathlib import Path

from .ecf import CandidateRecord
from .ppo import TrainReport

METRICS_FIELDS = [
    "iteration",
    "candidate_id",
    "origin",
    "phase",
    "epochs",
    "avg_return",
    "avg_cost",
    "tcr",
    "her",
    "fitness",
    "wall_clock_s",
]


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


class RunDir:
    def __init__(self, path: str | Path):
        self.path = Path(path)

    @property
    def run_id(self) -> str:
        return self.path.name

    @property
    def candidates_dir(self) -> Path:
        return self.path / "candidates"

    def ensure(self) -> "RunDir":
        self.candidates_dir.mkdir(parents=True, exist_ok=True)
        return self

    # run.json -----------------------------------------------------------

    def write_run_info(self, info: dict) -> None:
        _atomic_write(self.path / "run.json", json.dumps(info, indent=2) + "\n")

    def read_run_info(self) -> dict:
        return json.loads((self.path / "run.json").read_text())

    # audit.log ----------------------------------------------------------

    def audit(self, event: str, **fields) -> None:
        entry = {"ts": time.time(), "event": event}
        entry.update(fields)
        with open(self.path / "audit.log", "a") as fh:
            fh.write(json.dumps(entry) + "\n")

    def read_audit(self) -> list[dict]:
        path = self.path / "audit.log"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines() if line]

    # candidates ---------------------------------------------------------

    def save_candidate(self, record: CandidateRecord) -> None:
        _atomic_write(
            self.candidates_dir / f"{record.id}.json",
            json.dumps(record.as_dict(), indent=2) + "\n",
        )
        _atomic_write(
            self.candidates_dir / f"{record.id}.cost", record.source_text + "\n"
        )

    def load_candidate(self, candidate_id: str) -> dict:
        return json.loads(
            (self.candidates_dir / f"{candidate_id}.json").read_text()
        )

    def list_candidates(self) -> list[dict]:
        if not self.candidates_dir.is_dir():
            return []
        out = []
        for path in sorted(self.candidates_dir.glob("*.json")):
            out.append(json.loads(path.read_text()))
        return out

    def save_curve(self, candidate_id: str, report: TrainReport) -> None:
        _atomic_write(
            self.candidates_dir / f"{candidate_id}.curve.csv", report.to_csv()
        )

    def load_curve(self, candidate_id: str) -> TrainReport:
        path = self.candidates_dir / f"{candidate_id}.curve.csv"
        return TrainReport.from_csv(path.read_text())

    # metrics.csv --------------------------------------------------------

    def append_metrics_row(self, row: dict) -> None:
        path = self.path / "metrics.csv"
        fresh = not path.exists()
        with open(path, "a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=METRICS_FIELDS)
            if fresh:
                writer.writeheader()
            writer.writerow({k: row[k] for k in METRICS_FIELDS})

    def read_metrics(self) -> list[dict]:
        path = self.path / "metrics.csv"
        if not path.exists():
            return []
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))

    # best ----------------------------------------------------------------

    def save_best(self, info: dict, cost_text: str) -> None:
        _atomic_write(self.path / "best.cost", cost_text + "\n")
        _atomic_write(self.path / "best.json", json.dumps(info, indent=2) + "\n")

    def read_best(self) -> dict | None:
        path = self.path / "best.json"
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def read_best_cost(self) -> str:
        return (self.path / "best.cost").read_text()


def list_runs(root: str | Path) -> list[RunDir]:
    """Run directories under a root, newest id last (lexicographic)."""
    root = Path(root)
    if not root.is_dir():
        return []
    return [
        RunDir(p) for p in sorted(root.iterdir())
        if (p / "run.json").is_file()
    ]


def new_run_id(seed: int, clock=time.localtime) -> str:
    stamp = time.strftime("%Y%m%d-%H%M%S", clock())
    return f"run-{stamp}-s{seed}"
