"""Deterministic virtual irrigation field.

Soil moisture uses the FC-28 analog scale (lower = wetter): it drifts upward
as the soil dries, faster in heat, and is pulled down by the pump or rain.
Temperature and humidity follow 24-hour sinusoids; sensors report with
DHT11-style error margins and integer resolution.  All randomness is derived
from (seed, tick_index), so trajectories are bit-identical per seed.
"""

from __future__ import annotations

import dataclasses
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .dataprep import Dataset, Instance
from .store import SensorReading

SOIL_FLOOR = 120.0  # tap-water reading: probe fully wet
SOIL_CEILING = 900.0  # driest in-soil reading
IRRIGATE_SOIL_THRESHOLD = 690.0  # dry enough to water, absent rain

TELEMETRY_TOPIC = "field/{node_id}/telemetry"
COMMAND_TOPIC = "field/{node_id}/command"


@dataclass(frozen=True)
class SimConfig:
    seed: int = 1
    tick: float = 60.0  # seconds per simulation step
    publish_period: float = 300.0  # seconds between telemetry publishes
    drying_rate: float = 8.0  # raw units/hour gained at 25 C
    irrigation_rate: float = 120.0  # raw units/hour removed while pump runs
    rain_rate: float = 60.0  # raw units/hour removed while raining
    rain_schedule: tuple[tuple[float, float], ...] = ()  # (start_s, duration_s)
    temperature_mean: float = 22.0
    temperature_amplitude: float = 8.0
    humidity_mean: float = 55.0
    humidity_amplitude: float = 15.0
    temperature_noise: float = 2.0  # DHT11 error margin, degrees C
    humidity_noise: float = 5.0  # DHT11 error margin, percent
    initial_soil: float = 650.0

    def __post_init__(self) -> None:
        if min(self.drying_rate, self.irrigation_rate, self.rain_rate) <= 0:
            raise ValueError("rates must be positive")
        if self.tick <= 0 or self.publish_period <= 0:
            raise ValueError("tick and publish_period must be positive")
        if self.publish_period % self.tick != 0:
            raise ValueError("publish_period must be a multiple of tick")
        # drying scales up to 1.5x at 50 C; the pump must still win then
        if self.irrigation_rate <= 1.5 * self.drying_rate:
            raise ValueError("irrigation_rate must exceed peak drying rate")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "SimConfig":
        obj = dict(obj)
        if "rain_schedule" in obj:
            obj["rain_schedule"] = tuple(tuple(ep) for ep in obj["rain_schedule"])
        return cls(**obj)


def load_sim_config(path: str | Path) -> SimConfig:
    return SimConfig.from_json(json.loads(Path(path).read_text()))


def save_sim_config(config: SimConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_json(), indent=2) + "\n")


@dataclass(frozen=True)
class FieldState:
    sim_time: float
    soil_moisture_raw: float
    air_humidity_pct: float
    temperature_c: float
    raining: bool
    pump_on: bool
    seed: int
    tick_index: int


def _rng(seed: int, tick_index: int, salt: str) -> random.Random:
    return random.Random(f"{seed}/{tick_index}/{salt}")


def _clamp(v: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, v))


def _raining_at(config: SimConfig, t: float) -> bool:
    return any(start <= t < start + duration for start, duration in config.rain_schedule)


def _weather(config: SimConfig, seed: int, tick_index: int, t: float) -> tuple[float, float]:
    phase = 2 * math.pi * (t / 86_400.0)
    jitter = _rng(seed, tick_index, "weather")
    temp = config.temperature_mean + config.temperature_amplitude * math.sin(phase)
    temp += jitter.uniform(-0.5, 0.5)
    hum = config.humidity_mean - config.humidity_amplitude * math.sin(phase)
    hum += jitter.uniform(-1.0, 1.0)
    return _clamp(temp, 0.0, 50.0), _clamp(hum, 0.0, 100.0)


def initial_state(config: SimConfig, seed: int | None = None, soil: float | None = None) -> FieldState:
    seed = config.seed if seed is None else seed
    temp, hum = _weather(config, seed, 0, 0.0)
    return FieldState(
        sim_time=0.0,
        soil_moisture_raw=_clamp(config.initial_soil if soil is None else soil, SOIL_FLOOR, SOIL_CEILING),
        air_humidity_pct=hum,
        temperature_c=temp,
        raining=_raining_at(config, 0.0),
        pump_on=False,
        seed=seed,
        tick_index=0,
    )


def step(state: FieldState, config: SimConfig, dt: float) -> FieldState:
    """Advance the field by dt seconds (pure function of its inputs)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    t = state.sim_time + dt
    tick_index = state.tick_index + 1
    temp, hum = _weather(config, state.seed, tick_index, t)
    raining = _raining_at(config, t)

    drying = config.drying_rate * (1 + (temp - 25.0) / 50.0)
    rate = drying
    if state.pump_on:
        rate -= config.irrigation_rate
    if raining:
        rate -= config.rain_rate
    soil = _clamp(state.soil_moisture_raw + rate * dt / 3600.0, SOIL_FLOOR, SOIL_CEILING)

    return FieldState(
        sim_time=t,
        soil_moisture_raw=soil,
        air_humidity_pct=hum,
        temperature_c=temp,
        raining=raining,
        pump_on=state.pump_on,
        seed=state.seed,
        tick_index=tick_index,
    )


def read_sensors(state: FieldState, config: SimConfig, node_id: str = "n1", epoch_ms: int = 0) -> SensorReading:
    """Sample the sensors: DHT11 noise and clamping, integer resolution."""
    noise = _rng(state.seed, state.tick_index, "sensor")
    temp = _clamp(state.temperature_c + noise.uniform(-config.temperature_noise, config.temperature_noise), 0.0, 50.0)
    hum = _clamp(state.air_humidity_pct + noise.uniform(-config.humidity_noise, config.humidity_noise), 20.0, 80.0)
    return SensorReading(
        timestamp=int(epoch_ms + state.sim_time * 1000),
        node_id=node_id,
        humidity_pct=float(round(hum)),
        temperature_c=float(round(temp)),
        soil_moisture_raw=int(round(_clamp(state.soil_moisture_raw, 0, 1023))),
        is_raining=int(state.raining),
    )


def label_oracle(reading: SensorReading) -> int:
    """Ground-truth irrigation decision: water only dry soil with no rain."""
    if reading.is_raining:
        return 0
    return 1 if reading.soil_moisture_raw >= IRRIGATE_SOIL_THRESHOLD else 0


def set_pump(state: FieldState, on: bool) -> FieldState:
    return dataclasses.replace(state, pump_on=on)


def _random_rain_schedule(rng: random.Random, horizon_s: float) -> tuple[tuple[float, float], ...]:
    episodes = []
    t = rng.uniform(2 * 3600, 30 * 3600)
    while t < horizon_s:
        duration = rng.uniform(4 * 3600, 16 * 3600)
        episodes.append((t, duration))
        t += duration + rng.uniform(20 * 3600, 60 * 3600)
    return tuple(episodes)


def simulate_readings(
    config: SimConfig,
    n: int,
    seed: int | None = None,
    node_id: str = "sim",
    sample_interval_s: float = 7200.0,
    epoch_ms: int = 0,
) -> list[SensorReading]:
    """Run the field through wet/dry/rain regimes and sample n readings.

    Two phases: a wide soil sweep (with random rain) for regime coverage,
    then a sweep pinned around the irrigation threshold so the decision
    boundary is densely sampled.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    seed = config.seed if seed is None else seed
    n_boundary = round(0.3 * n) if n >= 4 else 0
    n_rain = round(0.15 * n) if n >= 8 else 0
    n_wide = n - n_boundary - n_rain

    policy_rng = random.Random(f"{seed}/schedule")
    horizon = (n_wide + 2) * sample_interval_s
    wide_config = dataclasses.replace(config, rain_schedule=_random_rain_schedule(policy_rng, horizon))
    dry_config = dataclasses.replace(config, rain_schedule=())
    wet_config = dataclasses.replace(config, rain_schedule=((0.0, float(2**62)),))

    readings: list[SensorReading] = []
    state = initial_state(wide_config, seed)

    def collect(
        cfg: SimConfig,
        state: FieldState,
        count: int,
        pump_on_at: float,
        pump_off_at: float,
        reset_dry_below: float | None = None,
    ) -> FieldState:
        next_sample = state.sim_time + sample_interval_s
        while count > 0:
            state = step(state, cfg, cfg.tick)
            if state.soil_moisture_raw >= pump_on_at and not state.pump_on:
                state = set_pump(state, True)
            elif state.soil_moisture_raw <= pump_off_at and state.pump_on:
                state = set_pump(state, False)
            if reset_dry_below is not None and state.soil_moisture_raw <= reset_dry_below:
                state = dataclasses.replace(state, soil_moisture_raw=860.0)
            if state.sim_time >= next_sample:
                readings.append(read_sensors(state, cfg, node_id, epoch_ms))
                next_sample += sample_interval_s
                count -= 1
        return state

    state = collect(wide_config, state, n_wide, pump_on_at=850.0, pump_off_at=560.0)
    if n_rain:
        # rain falling on every soil level, bone dry included, so the model
        # sees the rain veto across the whole range
        state = dataclasses.replace(state, soil_moisture_raw=860.0, pump_on=False)
        state = collect(wet_config, state, n_rain, pump_on_at=2000.0, pump_off_at=0.0, reset_dry_below=420.0)
    if n_boundary:
        # jump straight into the threshold band; climbing there from a wet
        # field would burn most of the boundary-sample budget
        state = dataclasses.replace(state, soil_moisture_raw=640.0, pump_on=False)
        state = collect(dry_config, state, n_boundary, pump_on_at=748.0, pump_off_at=632.0)
    return readings


def generate_training_set(config: SimConfig, n: int, seed: int | None = None) -> Dataset:
    """Oracle-labeled dataset for training the decision model."""
    readings = simulate_readings(config, n, seed)
    instances = [Instance(r.features(), label_oracle(r)) for r in readings]
    return Dataset(instances)


class Simulator:
    """Stateful wrapper that publishes telemetry and obeys pump commands."""

    def __init__(self, config: SimConfig, node_id: str = "n1", seed: int | None = None, epoch_ms: int = 0, soil: float | None = None):
        self.config = config
        self.node_id = node_id
        self.epoch_ms = epoch_ms
        self.state = initial_state(config, seed, soil)
        self._client = None

    @property
    def telemetry_topic(self) -> str:
        return TELEMETRY_TOPIC.format(node_id=self.node_id)

    @property
    def command_topic(self) -> str:
        return COMMAND_TOPIC.format(node_id=self.node_id)

    def attach(self, client) -> None:
        """Wire to a bus client: publish telemetry, obey pump commands."""
        self._client = client
        client.subscribe(self.command_topic)
        client.on_message(self._on_command)

    def _on_command(self, topic: str, payload: bytes) -> None:
        if topic != self.command_topic:
            return
        value = payload.decode("utf-8", "replace").strip()
        if value in ("0", "1"):
            self.state = set_pump(self.state, value == "1")

    def tick(self) -> SensorReading | None:
        """Advance one tick; returns a reading on publish-period boundaries."""
        self.state = step(self.state, self.config, self.config.tick)
        if self.state.sim_time % self.config.publish_period == 0:
            reading = read_sensors(self.state, self.config, self.node_id, self.epoch_ms)
            if self._client is not None:
                self._client.publish(self.telemetry_topic, reading.payload())
            return reading
        return None

    def run(self, ticks: int, sleep=None) -> list[SensorReading]:
        published = []
        for _ in range(ticks):
            reading = self.tick()
            if reading is not None:
                published.append(reading)
            if sleep is not None:
                sleep(self.config.tick)
        return published
