"""Append-only telemetry store: newline-delimited JSON segments on disk.

Layout: ``<root>/readings-<seq>.log`` and ``<root>/decisions-<seq>.log``,
where ``<seq>`` is the first sequence number in the segment.  Segments roll
at 64 MiB.  Records are flushed per append (optionally fsynced), so a
reopened store reproduces exactly the appended sequence.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

DEFAULT_SEGMENT_BYTES = 64 * 1024 * 1024
CSV_HEADER = "humidity,temperature,soil_moisture,is_raining,label"
DECISION_JOIN_WINDOW_MS = 60_000


class ValidationError(ValueError):
    pass


class StoreError(RuntimeError):
    pass


def format_number(x: float) -> str:
    """Render a value the way payloads do: integers bare, floats shortest."""
    if isinstance(x, bool):
        return str(int(x))
    if float(x) == int(x):
        return str(int(x))
    return repr(float(x))


@dataclass(frozen=True)
class SensorReading:
    timestamp: int  # unix milliseconds
    node_id: str
    humidity_pct: float
    temperature_c: float
    soil_moisture_raw: int
    is_raining: int

    def __post_init__(self) -> None:
        if not self.node_id:
            raise ValidationError("node_id must be non-empty")
        if not 0 <= self.humidity_pct <= 100:
            raise ValidationError(f"humidity {self.humidity_pct} outside 0-100")
        if not 0 <= self.temperature_c <= 50:
            raise ValidationError(f"temperature {self.temperature_c} outside 0-50")
        if not 0 <= self.soil_moisture_raw <= 1023:
            raise ValidationError(f"soil moisture {self.soil_moisture_raw} outside 0-1023")
        if self.is_raining not in (0, 1):
            raise ValidationError(f"is_raining must be 0 or 1, got {self.is_raining}")

    def features(self) -> tuple[float, float, float, float]:
        return (
            float(self.humidity_pct),
            float(self.temperature_c),
            float(self.soil_moisture_raw),
            float(self.is_raining),
        )

    def payload(self) -> str:
        return ",".join(format_number(v) for v in self.features())

    def to_json(self) -> dict:
        return {
            "ts": self.timestamp,
            "node": self.node_id,
            "humidity": self.humidity_pct,
            "temperature": self.temperature_c,
            "soil": self.soil_moisture_raw,
            "rain": self.is_raining,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SensorReading":
        return cls(
            timestamp=obj["ts"],
            node_id=obj["node"],
            humidity_pct=obj["humidity"],
            temperature_c=obj["temperature"],
            soil_moisture_raw=obj["soil"],
            is_raining=obj["rain"],
        )


@dataclass(frozen=True)
class DecisionRecord:
    timestamp: int  # unix milliseconds
    reading: SensorReading | None  # None for operator commands issued before any telemetry
    decision: int
    source: str  # "model" | "manual"

    def __post_init__(self) -> None:
        if self.decision not in (0, 1):
            raise ValidationError(f"decision must be 0 or 1, got {self.decision}")
        if self.source not in ("model", "manual"):
            raise ValidationError(f"source must be model or manual, got {self.source!r}")

    def to_json(self) -> dict:
        return {
            "ts": self.timestamp,
            "decision": self.decision,
            "source": self.source,
            "reading": self.reading.to_json() if self.reading is not None else None,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DecisionRecord":
        reading = obj.get("reading")
        return cls(
            timestamp=obj["ts"],
            reading=SensorReading.from_json(reading) if reading is not None else None,
            decision=obj["decision"],
            source=obj["source"],
        )


@dataclass
class ExportResult:
    csv: str
    rows: int
    skipped: int = 0


@dataclass
class _Segment:
    path: Path
    first_seq: int


class TelemetryStore:
    """Durable reading/decision log.  Single writer, many readers."""

    KINDS = ("readings", "decisions")

    def __init__(self, root: str | Path, segment_bytes: int = DEFAULT_SEGMENT_BYTES, sync: bool = False):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.segment_bytes = segment_bytes
        self.sync = sync
        self._lock = threading.Lock()
        self._open_files: dict[str, object] = {}
        self._next_seq = self._recover_next_seq()

    # -- write path ---------------------------------------------------------

    def append(self, record: SensorReading | DecisionRecord) -> int:
        if isinstance(record, SensorReading):
            kind = "readings"
        elif isinstance(record, DecisionRecord):
            kind = "decisions"
        else:
            raise ValidationError(f"cannot store {type(record).__name__}")
        with self._lock:
            seq = self._next_seq
            obj = record.to_json()
            obj["seq"] = seq
            line = json.dumps(obj, separators=(",", ":")) + "\n"
            fh = self._writer(kind, seq, len(line))
            try:
                fh.write(line)
                fh.flush()
                if self.sync:
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StoreError(f"append failed: {exc}") from exc
            self._next_seq += 1
            return seq

    def _writer(self, kind: str, seq: int, incoming: int):
        fh = self._open_files.get(kind)
        if fh is not None and fh.tell() + incoming > self.segment_bytes:
            fh.close()
            fh = None
            self._open_files.pop(kind, None)
        if fh is None:
            # continue the newest segment if it has room, else start a new one
            segments = self._segments(kind)
            if segments and segments[-1].path.stat().st_size + incoming <= self.segment_bytes:
                fh = open(segments[-1].path, "a", encoding="utf-8")
            else:
                fh = open(self.root / f"{kind}-{seq}.log", "a", encoding="utf-8")
            self._open_files[kind] = fh
        return fh

    def _segments(self, kind: str) -> list[_Segment]:
        out = []
        for path in self.root.glob(f"{kind}-*.log"):
            try:
                first = int(path.stem.split("-", 1)[1])
            except ValueError:
                continue
            out.append(_Segment(path, first))
        out.sort(key=lambda s: s.first_seq)
        return out

    def _recover_next_seq(self) -> int:
        top = 0
        for kind in self.KINDS:
            for obj in self._iter_json(kind):
                if obj["seq"] >= top:
                    top = obj["seq"] + 1
        return max(top, 1)

    # -- read path ----------------------------------------------------------

    def _iter_json(self, kind: str) -> Iterator[dict]:
        for seg in self._segments(kind):
            with open(seg.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        yield json.loads(line)

    def readings(self) -> list[SensorReading]:
        return [SensorReading.from_json(o) for o in self._iter_json("readings")]

    def decisions(self) -> list[DecisionRecord]:
        return [DecisionRecord.from_json(o) for o in self._iter_json("decisions")]

    def query_range(self, start: int, end: int, kind: str = "readings") -> list[SensorReading] | list[DecisionRecord]:
        """All records with start <= timestamp < end, ordered by (timestamp, seq)."""
        if kind not in self.KINDS:
            raise ValueError(f"kind must be one of {self.KINDS}")
        rows = [(o["ts"], o["seq"], o) for o in self._iter_json(kind) if start <= o["ts"] < end]
        rows.sort(key=lambda r: (r[0], r[1]))
        parse = SensorReading.from_json if kind == "readings" else DecisionRecord.from_json
        return [parse(o) for _, _, o in rows]

    # -- exports ------------------------------------------------------------

    def export_training_csv(
        self,
        start: int,
        end: int,
        label_source: str = "oracle",
        join_window_ms: int = DECISION_JOIN_WINDOW_MS,
    ) -> ExportResult:
        """Build a labeled training CSV from stored readings.

        ``oracle`` labels every reading with the simulator's ground-truth
        rule; ``decisions`` joins each reading to the nearest stored decision
        within the join window, dropping (and counting) unmatched rows.
        """
        if label_source not in ("oracle", "decisions"):
            raise ValueError("label_source must be 'oracle' or 'decisions'")
        readings = self.query_range(start, end, "readings")
        lines = [CSV_HEADER]
        skipped = 0
        if label_source == "oracle":
            from .fieldsim import label_oracle

            for r in readings:
                lines.append(f"{r.payload()},{label_oracle(r)}")
        else:
            decided = sorted(self.query_range(start, end + join_window_ms, "decisions"), key=lambda d: d.timestamp)
            times = [d.timestamp for d in decided]
            for r in readings:
                label = _nearest_decision(times, decided, r.timestamp, join_window_ms)
                if label is None:
                    skipped += 1
                    continue
                lines.append(f"{r.payload()},{label}")
        return ExportResult(csv="\n".join(lines) + "\n", rows=len(lines) - 1, skipped=skipped)

    def close(self) -> None:
        with self._lock:
            for fh in self._open_files.values():
                fh.close()
            self._open_files.clear()

    def __enter__(self) -> "TelemetryStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _nearest_decision(times: list[int], decided: list[DecisionRecord], ts: int, window: int) -> int | None:
    import bisect

    if not decided:
        return None
    i = bisect.bisect_left(times, ts)
    best: tuple[int, int] | None = None  # (distance, decision)
    for j in (i - 1, i):
        if 0 <= j < len(decided):
            dist = abs(decided[j].timestamp - ts)
            if dist <= window and (best is None or dist < best[0]):
                best = (dist, decided[j].decision)
    return None if best is None else best[1]
