"""Run records: an ordered event log plus the final best configuration."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SUMMARY_COLUMNS = ("round", "member", "T_eff", "min_energy", "event")


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


@dataclass
class RunRecord:
    seed: int
    events: list[dict] = field(default_factory=list)
    best_history: list[float] = field(default_factory=list)
    best_config: np.ndarray | None = None
    best_energy: float = np.inf
    calls: int = 0

    def log(self, event: str, round: int, **fields) -> None:
        self.events.append({"round": round, "event": event, **_plain(fields)})

    def events_of(self, event: str) -> list[dict]:
        return [e for e in self.events if e["event"] == event]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)

    def summary_rows(self) -> list[dict]:
        rows = []
        for e in self.events:
            if "min_energy" not in e:
                continue
            rows.append({"round": e["round"], "member": e.get("member", e.get("node", "")),
                         "T_eff": "" if e.get("T_eff") is None else e["T_eff"],
                         "min_energy": e["min_energy"], "event": e["event"]})
        return rows

    def summary_csv(self, comment: str | None = None) -> str:
        buf = io.StringIO()
        if comment:
            buf.write(f"# {comment}\n")
        writer = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.summary_rows())
        return buf.getvalue()

    def best_text(self) -> str:
        spins = " ".join(str(int(s)) for s in self.best_config)
        return f"energy {float(self.best_energy)!r}\n{spins}\n"

    def write(self, out_dir, comment: str | None = None) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"events": out / "events.jsonl", "summary": out / "summary.csv", "best": out / "best.txt"}
        paths["events"].write_text(self.to_jsonl())
        paths["summary"].write_text(self.summary_csv(comment))
        paths["best"].write_text(self.best_text())
        return paths

    def __eq__(self, other):
        if not isinstance(other, RunRecord):
            return NotImplemented
        return (self.seed == other.seed and self.to_jsonl() == other.to_jsonl()
                and self.best_history == other.best_history and self.best_energy == other.best_energy
                and np.array_equal(self.best_config, other.best_config) and self.calls == other.calls)
