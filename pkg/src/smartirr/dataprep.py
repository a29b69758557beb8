"""Payload parsing, cleaning, normalization and period downsampling.

The standard feature schema is (humidity, temperature, soil_moisture,
is_raining); datasets of other arity are allowed so the learner can be
exercised on synthetic data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

ATTRIBUTES = ("humidity", "temperature", "soil_moisture", "is_raining")
CLASS_VALUES = (0, 1)

MISSING = None


class ParseError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Instance:
    features: tuple[float | None, ...]
    label: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        if self.label is not None and self.label not in CLASS_VALUES:
            raise DataError(f"label must be in {CLASS_VALUES}, got {self.label}")

    @property
    def complete(self) -> bool:
        return all(v is not None for v in self.features)


@dataclass
class Dataset:
    instances: list[Instance] = field(default_factory=list)
    attributes: tuple[str, ...] = ATTRIBUTES
    class_values: tuple[int, int] = CLASS_VALUES

    def __post_init__(self) -> None:
        arity = len(self.attributes)
        for inst in self.instances:
            if len(inst.features) != arity:
                raise DataError(f"instance arity {len(inst.features)} != {arity}")

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    @property
    def arity(self) -> int:
        return len(self.attributes)

    def labels(self) -> list[int]:
        out = []
        for inst in self.instances:
            if inst.label is None:
                raise DataError("dataset is not fully labeled")
            out.append(inst.label)
        return out

    def column(self, index: int) -> list[float | None]:
        return [inst.features[index] for inst in self.instances]


@dataclass(frozen=True)
class NormStats:
    """Per-attribute normalization parameters, fitted on training data only."""

    method: str  # "zscore" | "minmax"
    params: tuple[tuple[float, float], ...]  # (mean, stddev) or (min, max)

    def __post_init__(self) -> None:
        if self.method not in ("zscore", "minmax"):
            raise DataError(f"unknown normalization method {self.method!r}")
        object.__setattr__(self, "params", tuple(tuple(p) for p in self.params))
        for a, b in self.params:
            if self.method == "zscore" and b < 0:
                raise DataError("stddev must be nonnegative")
            if self.method == "minmax" and a > b:
                raise DataError("min must not exceed max")

    def to_json(self) -> dict:
        return {"method": self.method, "params": [list(p) for p in self.params]}

    @classmethod
    def from_json(cls, obj: dict) -> "NormStats":
        return cls(obj["method"], tuple((float(a), float(b)) for a, b in obj["params"]))


def parse_payload(text: str, attributes: tuple[str, ...] = ATTRIBUTES) -> Instance:
    """Parse a telemetry payload: 4 comma-separated numbers, or 5 with a label."""
    tokens = [t.strip() for t in text.split(",")]
    arity = len(attributes)
    if len(tokens) not in (arity, arity + 1):
        raise ParseError(f"expected {arity} or {arity + 1} fields, got {len(tokens)}: {text!r}")
    values = []
    for i, tok in enumerate(tokens):
        try:
            values.append(float(tok))
        except ValueError:
            raise ParseError(f"field {i + 1} is not numeric: {tok!r}") from None
    label = None
    if len(values) == arity + 1:
        raw = values.pop()
        if raw not in (0.0, 1.0):
            raise ParseError(f"label field must be 0 or 1, got {raw}")
        label = int(raw)
    return Instance(tuple(values), label)


def clean_dataset(d: Dataset, policy: str = "drop", k: int = 3) -> Dataset:
    """Remove or impute MISSING values.

    ``drop`` removes every instance with a missing attribute.  ``knn``
    replaces each missing attribute with the mean of that attribute over the
    k nearest complete instances (Euclidean distance on the z-scored
    attributes present in the gappy instance).
    """
    if policy == "drop":
        return Dataset([i for i in d.instances if i.complete], d.attributes, d.class_values)
    if policy != "knn":
        raise DataError(f"unknown cleaning policy {policy!r}")
    if k < 1:
        raise DataError("k must be >= 1")
    complete = [i for i in d.instances if i.complete]
    if len(complete) < k:
        raise DataError(f"knn imputation needs at least k={k} complete instances, have {len(complete)}")

    scale = _zscore_params(Dataset(complete, d.attributes, d.class_values))

    def z(idx: int, value: float) -> float:
        mean, sd = scale[idx]
        return (value - mean) / sd if sd > 0 else 0.0

    out: list[Instance] = []
    for inst in d.instances:
        if inst.complete:
            out.append(inst)
            continue
        present = [i for i, v in enumerate(inst.features) if v is not None]
        ranked = sorted(
            range(len(complete)),
            key=lambda ci: (
                sum((z(a, complete[ci].features[a]) - z(a, inst.features[a])) ** 2 for a in present),
                ci,
            ),
        )
        nearest = [complete[ci] for ci in ranked[:k]]
        filled = tuple(
            v if v is not None else sum(n.features[a] for n in nearest) / k
            for a, v in enumerate(inst.features)
        )
        out.append(Instance(filled, inst.label))
    return Dataset(out, d.attributes, d.class_values)


def _zscore_params(d: Dataset) -> list[tuple[float, float]]:
    params = []
    n = len(d)
    for a in range(d.arity):
        col = [v for v in d.column(a)]
        mean = sum(col) / n
        if n > 1:
            var = sum((v - mean) ** 2 for v in col) / (n - 1)
        else:
            var = 0.0
        params.append((mean, math.sqrt(var)))
    return params


def fit_norm_stats(d: Dataset, method: str = "zscore") -> NormStats:
    """Fit per-attribute stats; zscore uses the sample (n-1) standard deviation."""
    if len(d) < 2:
        raise DataError("need at least 2 instances to fit normalization stats")
    for inst in d.instances:
        if not inst.complete:
            raise DataError("clean the dataset before fitting normalization stats")
    if method == "zscore":
        return NormStats("zscore", tuple(_zscore_params(d)))
    if method == "minmax":
        params = []
        for a in range(d.arity):
            col = d.column(a)
            params.append((min(col), max(col)))
        return NormStats("minmax", tuple(params))
    raise DataError(f"unknown normalization method {method!r}")


def apply_norm(inst: Instance, stats: NormStats) -> Instance:
    """Normalize one instance; constant columns map to 0, minmax clamps to [0,1]."""
    values = []
    for a, v in enumerate(inst.features):
        if v is None:
            values.append(None)
            continue
        lo, hi = stats.params[a]
        if stats.method == "zscore":
            mean, sd = lo, hi
            values.append((v - mean) / sd if sd > 0 else 0.0)
        else:
            span = hi - lo
            values.append(min(1.0, max(0.0, (v - lo) / span)) if span > 0 else 0.0)
    return Instance(tuple(values), inst.label)


def apply_norm_dataset(d: Dataset, stats: NormStats) -> Dataset:
    return Dataset([apply_norm(i, stats) for i in d.instances], d.attributes, d.class_values)


def denorm_value(z: float, stats: NormStats, attribute: int) -> float:
    """Invert normalization for one attribute (used for reporting thresholds)."""
    lo, hi = stats.params[attribute]
    if stats.method == "zscore":
        return z * hi + lo
    return lo + z * (hi - lo)


def downsample_period(d: Dataset, period_s: float, timestamps: Sequence[float]) -> Dataset:
    """Keep the first instance of each epoch-aligned period bucket."""
    if len(timestamps) != len(d):
        raise DataError("timestamps must parallel the instances")
    if period_s <= 0:
        raise DataError("period must be positive")
    kept: list[Instance] = []
    seen: set[int] = set()
    for inst, ts in zip(d.instances, timestamps):
        bucket = math.floor(ts / period_s)
        if bucket not in seen:
            seen.add(bucket)
            kept.append(inst)
    return Dataset(kept, d.attributes, d.class_values)


# -- CSV interchange (matches the telemetry store export format) -------------


def dataset_to_csv(d: Dataset) -> str:
    from .store import format_number

    header = ",".join(d.attributes) + ",label"
    lines = [header]
    for inst in d.instances:
        cells = ["" if v is None else format_number(v) for v in inst.features]
        cells.append("" if inst.label is None else str(inst.label))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def dataset_from_csv(text: str, attributes: tuple[str, ...] = ATTRIBUTES) -> Dataset:
    """Load a labeled/unlabeled CSV; empty cells and '?' mean MISSING."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty CSV")
    header = [h.strip() for h in lines[0].split(",")]
    has_label = header[-1] == "label"
    names = tuple(header[:-1]) if has_label else tuple(header)
    if len(names) != len(attributes):
        attributes = names  # trust the file's own schema
    instances = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} cells, got {len(cells)}")
        feats: list[float | None] = []
        for i, cell in enumerate(cells[: len(names)]):
            if cell in ("", "?"):
                feats.append(None)
                continue
            try:
                feats.append(float(cell))
            except ValueError:
                raise ParseError(f"line {lineno}: field {i + 1} is not numeric: {cell!r}") from None
        label = None
        if has_label:
            cell = cells[-1]
            if cell not in ("", "?"):
                try:
                    label = int(float(cell))
                except ValueError:
                    raise ParseError(f"line {lineno}: label is not numeric: {cell!r}") from None
        instances.append(Instance(tuple(feats), label))
    return Dataset(instances, attributes)
