"""Irrigation decision loop.

Consumes telemetry from the bus, predicts with the loaded tree model,
publishes "0"/"1" commands and records an audit trail of every decision.
Manual mode suppresses the model's commands without losing its opinion;
any failure path keeps the pump off.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass

from .dataprep import Instance, ParseError, parse_payload
from .store import DecisionRecord, SensorReading, TelemetryStore, ValidationError
from .tree import TreeModel, load_model, predict

log = logging.getLogger(__name__)

TEST_DATA_TOPIC = "test/newdata"
TEST_RESULT_TOPIC = "test/result"
TELEMETRY_FILTER = "field/+/telemetry"

AUTO = "auto"
MANUAL = "manual"


class CommandError(ValueError):
    pass


@dataclass(frozen=True)
class Command:
    value: int  # 0 = stop, 1 = irrigate
    source: str  # "model" | "manual"
    timestamp: int  # unix ms

    def __post_init__(self) -> None:
        if self.value not in (0, 1):
            raise CommandError(f"command value must be 0 or 1, got {self.value}")

    @property
    def payload(self) -> str:
        return str(self.value)


def _now_ms() -> int:
    return int(time.time() * 1000)


class Controller:
    """Single event loop around one model; telemetry and operator requests
    are serialized through one lock."""

    def __init__(self, model: TreeModel, store: TelemetryStore | None = None, publish=None, clock=_now_ms):
        if model is None:
            raise CommandError("controller refuses to start without a model")
        self.model = model
        self.store = store
        self.clock = clock
        self._publish = publish  # callable(topic, payload) or None
        self._lock = threading.RLock()
        self.mode = AUTO
        self.pump_commanded = False
        self.last_decision: DecisionRecord | None = None
        self.last_reading: SensorReading | None = None
        self._last_reply_topic = TEST_RESULT_TOPIC
        self.parse_failures = 0
        self._listeners: list = []

    # -- wiring -------------------------------------------------------------

    def attach(self, client) -> None:
        """Subscribe to the live and harness telemetry topics on a bus client."""
        self._publish = client.publish
        client.subscribe(TELEMETRY_FILTER, TEST_DATA_TOPIC)
        client.on_message(self.handle_message)

    def add_listener(self, callback) -> None:
        """callback(kind, payload_dict) on reading/decision/mode/pump events."""
        self._listeners.append(callback)

    def _emit(self, kind: str, payload: dict) -> None:
        for cb in list(self._listeners):
            try:
                cb(kind, payload)
            except Exception:
                log.exception("controller listener failed")

    def handle_message(self, topic: str, payload: bytes) -> None:
        self.on_telemetry(payload.decode("utf-8", "replace"), topic)

    # -- decision path --------------------------------------------------------

    def on_telemetry(self, payload: str, topic: str = TEST_DATA_TOPIC) -> Command | None:
        """Parse, predict, and (in auto mode) command the pump."""
        with self._lock:
            try:
                inst = parse_payload(payload)
            except ParseError as exc:
                self.parse_failures += 1
                log.warning("unparseable telemetry on %s: %s", topic, exc)
                return None
            reading = self._to_reading(inst, topic)
            if reading is not None and self.store is not None:
                self.store.append(reading)
            if reading is not None:
                self.last_reading = reading
                self._emit("reading", reading.to_json())
            self._last_reply_topic = self._reply_topic(topic)
            return self._decide(inst, reading)

    def _to_reading(self, inst: Instance, topic: str) -> SensorReading | None:
        node_id = "test"
        parts = topic.split("/")
        if len(parts) == 3 and parts[0] == "field" and parts[2] == "telemetry":
            node_id = parts[1]
        h, t, s, r = inst.features
        try:
            return SensorReading(self.clock(), node_id, h, t, int(s), int(r))
        except (ValidationError, TypeError) as exc:
            log.warning("telemetry outside sensor ranges: %s", exc)
            return None

    def _reply_topic(self, topic: str) -> str:
        parts = topic.split("/")
        if len(parts) == 3 and parts[0] == "field" and parts[2] == "telemetry":
            return f"field/{parts[1]}/command"
        return TEST_RESULT_TOPIC

    def _decide(self, inst: Instance, reading: SensorReading | None) -> Command | None:
        prediction, _probs = predict(self.model, Instance(inst.features))
        self._record_decision(prediction, "model", reading)
        if self.mode != AUTO:
            return None
        command = Command(prediction, "model", self.clock())
        self._send(command)
        return command

    def _record_decision(self, value: int, source: str, reading: SensorReading | None) -> None:
        if reading is None:
            reading = self.last_reading  # may still be None before first telemetry
        record = DecisionRecord(self.clock(), reading, value, source)
        self.last_decision = record
        if self.store is not None:
            self.store.append(record)
        self._emit("decision", record.to_json())

    def _send(self, command: Command) -> None:
        self.pump_commanded = command.value == 1
        self._emit("pump", {"pump": self.pump_commanded, "source": command.source})
        if self._publish is not None:
            try:
                self._publish(self._last_reply_topic, command.payload)
            except Exception:
                log.exception("publish failed; pump command %s not sent", command.value)

    # -- operator path ----------------------------------------------------------

    def set_mode(self, mode: str) -> Command | None:
        """Switch auto/manual; returning to auto re-evaluates the last reading."""
        if mode not in (AUTO, MANUAL):
            raise CommandError(f"mode must be '{AUTO}' or '{MANUAL}'")
        with self._lock:
            if mode == self.mode:
                return None
            self.mode = mode
            self._emit("mode", {"mode": mode})
            if mode == AUTO and self.last_reading is not None:
                inst = Instance(self.last_reading.features())
                prediction, _ = predict(self.model, inst)
                command = Command(prediction, "model", self.clock())
                self._record_decision(prediction, "model", self.last_reading)
                self._send(command)
                return command
            return None

    def manual_command(self, value: int) -> Command:
        """Operator override; implies manual mode."""
        if value not in (0, 1):
            raise CommandError(f"command value must be 0 or 1, got {value}")
        with self._lock:
            if self.mode != MANUAL:
                self.mode = MANUAL
                self._emit("mode", {"mode": MANUAL})
            command = Command(value, "manual", self.clock())
            self._record_decision(value, "manual", self.last_reading)
            self._send(command)
            return command

    def status(self) -> dict:
        with self._lock:
            return {
                "mode": self.mode,
                "pump": self.pump_commanded,
                "last_decision": self.last_decision.to_json() if self.last_decision else None,
            }


def load_controller_model(path) -> TreeModel:
    return load_model(path)


def replay_trials(model: TreeModel, trials=None) -> list[tuple[str, int, int]]:
    """Run the recorded trials through a model.

    Returns (payload, predicted, actual) per row; the CLI renders the
    familiar PREDICTED/ACTUAL/RESULT table from it.
    """
    from .trials import REPLAY_TRIALS

    rows = []
    for payload, actual in trials or REPLAY_TRIALS:
        inst = parse_payload(payload)
        prediction, _ = predict(model, Instance(inst.features))
        rows.append((payload, prediction, actual))
    return rows
