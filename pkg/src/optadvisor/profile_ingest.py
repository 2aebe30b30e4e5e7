"""Tier 1: profiler output -> sample records -> cycle-normalized feature vectors."""

from __future__ import annotations

import csv
import io
import math
import re
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import TextIO

import numpy as np

from .errors import (
    DuplicateCounterError,
    IncompleteRecordError,
    MissingFeatureError,
    ProfileFormatError,
    ProfileParseError,
    SchemaError,
)

CANONICAL_HEADER = ("program", "input_id", "run_id", "version_mask", "kernel", "counter", "value")
CYCLES_COUNTER = "elapsed_cycles"
RUNTIME_COUNTER = "runtime_ms"
RESERVED_NAMES = frozenset({CYCLES_COUNTER, RUNTIME_COUNTER, "cycles", "runtime"})

RecordKey = tuple[str, str, int, int, str]


@dataclass(frozen=True, eq=True)
class SampleRecord:
    program: str
    input_id: str
    run_id: int
    version_mask: int
    kernel: str
    counters: Mapping[str, float]
    cycles: int
    runtime: float

    def __post_init__(self):
        if self.run_id < 0:
            raise ValueError(f"run_id must be >= 0, got {self.run_id}")
        if self.version_mask < 0:
            raise ValueError(f"version_mask must be >= 0, got {self.version_mask}")
        if not self.cycles > 0:
            raise ValueError(f"cycles must be positive, got {self.cycles}")
        if not (self.runtime > 0 and math.isfinite(self.runtime)):
            raise ValueError(f"runtime must be positive and finite, got {self.runtime}")
        for name, value in self.counters.items():
            if name in RESERVED_NAMES:
                raise ValueError(f"{name!r} is reserved and cannot be a counter")
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"counter {name!r} must be finite and >= 0, got {value}")
        object.__setattr__(self, "counters", MappingProxyType(dict(self.counters)))

    @property
    def key(self) -> RecordKey:
        return (self.program, self.input_id, self.run_id, self.version_mask, self.kernel)

    @property
    def group(self) -> tuple[str, str, int]:
        """The (program, input, run) group this record was measured in."""
        return (self.program, self.input_id, self.run_id)

    def has_bit(self, bit: int) -> bool:
        return bool(self.version_mask >> bit & 1)


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        bad = RESERVED_NAMES.intersection(names)
        if bad:
            raise SchemaError(f"reserved names cannot be features: {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)


@dataclass(frozen=True)
class FeatureVector:
    """Events-per-cycle rates keyed by counter name, ordered by ``schema``."""

    schema: FeatureSchema
    values: tuple[float, ...] = field(repr=False)

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if len(values) != len(self.schema):
            raise SchemaError(f"expected {len(self.schema)} values, got {len(values)}")
        if not all(math.isfinite(v) for v in values):
            raise ValueError("feature values must be finite")

    @classmethod
    def from_mapping(cls, schema: FeatureSchema, features: Mapping[str, float]) -> FeatureVector:
        try:
            return cls(schema, tuple(features[n] for n in schema.names))
        except KeyError as exc:
            raise MissingFeatureError(f"missing feature {exc.args[0]!r}") from None

    @property
    def features(self) -> dict[str, float]:
        return dict(zip(self.schema.names, self.values))

    def __getitem__(self, name: str) -> float:
        return self.features[name]

    def keys(self) -> tuple[str, ...]:
        return self.schema.names

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def _lines(text: str | TextIO) -> Iterable[str]:
    if isinstance(text, str):
        return io.StringIO(text)
    return text


def _parse_float(raw: str, what: str, lineno: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ProfileParseError(f"non-numeric {what}: {raw!r}", lineno) from None
    if not math.isfinite(value):
        raise ProfileParseError(f"non-finite {what}: {raw!r}", lineno)
    return value


def _parse_uint(raw: str, what: str, lineno: int) -> int:
    raw = raw.strip()
    if not raw.isdigit():
        raise ProfileParseError(f"{what} must be a non-negative integer, got {raw!r}", lineno)
    return int(raw)


class _RecordBuilder:
    """Accumulates counter rows per record key, then validates completeness."""

    def __init__(self):
        self._groups: dict[RecordKey, dict[str, float]] = {}

    def add(self, key: RecordKey, counter: str, value: float, lineno: int | None = None):
        counters = self._groups.setdefault(key, {})
        if counter in counters:
            where = f" (line {lineno})" if lineno is not None else ""
            raise DuplicateCounterError(f"duplicate counter {counter!r} for {_fmt_key(key)}{where}")
        counters[counter] = value

    def fill_missing(self, counter: str, value: float):
        for counters in self._groups.values():
            counters.setdefault(counter, value)

    def build(self) -> list[SampleRecord]:
        records = []
        for key, counters in self._groups.items():
            counters = dict(counters)
            missing = [c for c in (CYCLES_COUNTER, RUNTIME_COUNTER) if c not in counters]
            if missing:
                raise IncompleteRecordError(f"{_fmt_key(key)} lacks {', '.join(missing)}")
            cycles = counters.pop(CYCLES_COUNTER)
            runtime = counters.pop(RUNTIME_COUNTER)
            if cycles != int(cycles) or cycles <= 0:
                raise IncompleteRecordError(f"{_fmt_key(key)}: elapsed_cycles must be a positive integer")
            if runtime <= 0:
                raise IncompleteRecordError(f"{_fmt_key(key)}: runtime_ms must be positive")
            if any(v < 0 for v in counters.values()):
                raise ProfileParseError(f"{_fmt_key(key)}: negative counter value")
            program, input_id, run_id, mask, kernel = key
            records.append(SampleRecord(program, input_id, run_id, mask, kernel, counters, int(cycles), runtime))
        return records


def _fmt_key(key: RecordKey) -> str:
    program, input_id, run_id, mask, kernel = key
    return f"group(program={program}, input={input_id}, run={run_id}, mask={mask}, kernel={kernel})"


def parse_canonical_csv(text: str | TextIO) -> list[SampleRecord]:
    """Parse the canonical long-format CSV into records, in first-seen order."""
    builder = _RecordBuilder()
    header_seen = False
    for lineno, line in enumerate(_lines(text), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        row = next(csv.reader([line.rstrip("\r\n")]))
        if not header_seen:
            if tuple(c.strip() for c in row) != CANONICAL_HEADER:
                raise ProfileParseError(f"expected header {','.join(CANONICAL_HEADER)}", lineno)
            header_seen = True
            continue
        if len(row) != len(CANONICAL_HEADER):
            raise ProfileParseError(f"expected {len(CANONICAL_HEADER)} columns, got {len(row)}", lineno)
        program, input_id, run_raw, mask_raw, kernel, counter, value_raw = (c.strip() for c in row)
        key = (program, input_id, _parse_uint(run_raw, "run_id", lineno),
               _parse_uint(mask_raw, "version_mask", lineno), kernel)
        value = _parse_float(value_raw, f"value for {counter!r}", lineno)
        if value < 0:
            raise ProfileParseError(f"negative value for {counter!r}", lineno)
        builder.add(key, counter, value, lineno)
    if not header_seen:
        raise ProfileParseError("missing header", 1)
    return builder.build()


def _fmt_number(value: float) -> str:
    if float(value).is_integer() and abs(value) < 2**53:
        return str(int(value))
    return repr(float(value))


def write_canonical_csv(records: Iterable[SampleRecord], out: TextIO | None = None) -> str:
    """Serialize records to canonical CSV; returns the text (also written to ``out``)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CANONICAL_HEADER)
    for rec in records:
        prefix = [rec.program, rec.input_id, rec.run_id, rec.version_mask, rec.kernel]
        writer.writerow(prefix + [CYCLES_COUNTER, str(rec.cycles)])
        writer.writerow(prefix + [RUNTIME_COUNTER, repr(float(rec.runtime))])
        for name, value in rec.counters.items():
            writer.writerow(prefix + [name, _fmt_number(value)])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


# nvprof writes "Event Name" for --events and "Metric Name" for --metrics exports.
_NVPROF_NAME_COLUMNS = ("Event Name", "Metric Name")
_NVPROF_VALUE_COLUMNS = ("Avg", "Value", "Total")
_NVPROF_CYCLE_EVENTS = (CYCLES_COUNTER, "elapsed_cycles_sm")
_UNIT_SUFFIX = re.compile(r"^\s*([-+0-9.eE]+)\s*(%|[A-Za-z/]+)?\s*$")


def _nvprof_value(raw: str, lineno: int) -> float:
    m = _UNIT_SUFFIX.match(raw.replace(",", ""))
    if not m:
        raise ProfileParseError(f"non-numeric value {raw!r}", lineno)
    return _parse_float(m.group(1), "value", lineno)


def import_nvprof_csv(
    text: str | TextIO,
    *,
    program: str,
    input_id: str,
    run_id: int,
    version_mask: int,
    runtime_ms: float | None = None,
) -> list[SampleRecord]:
    """Best-effort import of an ``nvprof --csv --events/--metrics`` export.

    Identity labels come from the caller. ``elapsed_cycles_sm`` is accepted
    as the cycle normalizer. nvprof event exports carry no wall time, so the
    runtime comes either from a ``runtime_ms`` row or from ``runtime_ms=``.
    """
    builder = _RecordBuilder()
    header: list[str] | None = None
    kernel_col = name_col = value_col = -1
    for lineno, line in enumerate(_lines(text), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("=="):
            continue
        row = [c.strip() for c in next(csv.reader([line.rstrip("\r\n")]))]
        if header is None:
            if "Kernel" not in row:
                continue
            name_col = next((row.index(c) for c in _NVPROF_NAME_COLUMNS if c in row), -1)
            value_col = next((row.index(c) for c in _NVPROF_VALUE_COLUMNS if c in row), -1)
            if name_col < 0 or value_col < 0:
                raise ProfileFormatError(f"line {lineno}: nvprof header lacks an event/metric name or value column")
            header = row
            kernel_col = row.index("Kernel")
            continue
        if len(row) != len(header):
            raise ProfileParseError(f"expected {len(header)} columns, got {len(row)}", lineno)
        kernel = row[kernel_col]
        name = row[name_col]
        if name in _NVPROF_CYCLE_EVENTS:
            name = CYCLES_COUNTER
        value = _nvprof_value(row[value_col], lineno)
        if name == CYCLES_COUNTER:
            value = round(value)
        builder.add((program, input_id, run_id, version_mask, kernel), name, value, lineno)
    if header is None:
        raise ProfileFormatError("no nvprof header row with a 'Kernel' column found")
    if runtime_ms is not None:
        builder.fill_missing(RUNTIME_COUNTER, float(runtime_ms))
    return builder.build()


def build_schema(records: Sequence[SampleRecord]) -> FeatureSchema:
    """Features shared by every record, sorted by name."""
    if not records:
        raise SchemaError("cannot build a schema from zero records")
    common = set(records[0].counters)
    for rec in records[1:]:
        common &= set(rec.counters)
    common -= RESERVED_NAMES
    if not common:
        raise SchemaError("records share no common counters")
    return FeatureSchema(tuple(sorted(common)))


def normalize(record: SampleRecord, schema: FeatureSchema) -> FeatureVector:
    values = []
    for name in schema.names:
        try:
            values.append(record.counters[name] / record.cycles)
        except KeyError:
            raise MissingFeatureError(
                f"record {_fmt_key(record.key)} lacks schema counter {name!r}"
            ) from None
    return FeatureVector(schema, tuple(values))


def select_kernel(records: Sequence[SampleRecord], kernel: str | None) -> list[SampleRecord]:
    if kernel is None:
        return list(records)
    return [r for r in records if r.kernel == kernel]
