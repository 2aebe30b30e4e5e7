"""The optimization database: one directory per optimization entry.

Layout::

    <root>/<entry-id>/manifest.json
    <root>/<entry-id>/profiles/*.csv      (canonical profile CSV)

A manifest looks like::

    {"id": "ftz", "name": "Flush denormals to zero",
     "description": "...", "example": "...",
     "samples": [{"before": "profiles/a.csv", "after": "profiles/b.csv", "input_id": "in0"},
                 {"before": {"file": "profiles/all.csv", "program": "BH", "input_id": "in0",
                             "run_id": 0, "version_mask": 0, "kernel": "force"},
                  "after": {...}, "input_id": "in0"}]}

A plain path must name a CSV holding exactly one record; the selector form
picks one record out of a multi-record CSV.
"""

from __future__ import annotations

import json
import math
import os
import shutil
import tempfile
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConflictError, EntryLoadError, PairingError, UnknownEntryError
from .profile_ingest import (
    FeatureSchema,
    FeatureVector,
    RecordKey,
    SampleRecord,
    build_schema,
    normalize,
    parse_canonical_csv,
    write_canonical_csv,
)

MANIFEST = "manifest.json"
PROFILES_DIR = "profiles"


@dataclass(frozen=True)
class SamplePair:
    before: SampleRecord
    after: SampleRecord
    input_id: str

    @property
    def bit(self) -> int:
        return (self.before.version_mask ^ self.after.version_mask).bit_length() - 1

    @property
    def speedup(self) -> float:
        return self.before.runtime / self.after.runtime


@dataclass(frozen=True)
class OptimizationEntry:
    id: str
    name: str
    description: str = ""
    example: str = ""
    samples: tuple[SamplePair, ...] = ()

    @property
    def bits(self) -> dict[str, int]:
        """Bit position of this optimization in each program's version mask."""
        return {p.before.program: p.bit for p in self.samples}

    @property
    def trainable(self) -> bool:
        return bool(self.samples)


@dataclass(frozen=True)
class TrainingInstance:
    features: FeatureVector
    label: float
    source: RecordKey | None = None

    def __post_init__(self):
        if not (math.isfinite(self.label) and self.label > 0):
            raise ValueError(f"speedup label must be finite and positive, got {self.label}")


@dataclass(frozen=True)
class EntryInfo:
    id: str
    name: str
    n_samples: int


@dataclass
class OptimizationDB:
    root: Path | None
    entries: dict[str, OptimizationEntry] = field(default_factory=dict)

    def __iter__(self) -> Iterator[OptimizationEntry]:
        return (self.entries[k] for k in sorted(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, entry_id: str) -> bool:
        return entry_id in self.entries

    def __getitem__(self, entry_id: str) -> OptimizationEntry:
        try:
            return self.entries[entry_id]
        except KeyError:
            raise UnknownEntryError(f"no optimization entry {entry_id!r}") from None

    def before_records(self) -> list[SampleRecord]:
        return [p.before for e in self for p in e.samples]

    def schema(self) -> FeatureSchema:
        """Counters common to every before-record of every entry."""
        return build_schema(self.before_records())


def validate_pair(pair: SamplePair, entry_id: str = "?") -> int:
    b, a = pair.before, pair.after
    where = f"entry {entry_id!r}, input {pair.input_id!r}"
    if (b.program, b.input_id, b.run_id, b.kernel) != (a.program, a.input_id, a.run_id, a.kernel):
        raise PairingError(f"{where}: before/after differ in program, input, run or kernel")
    if b.input_id != pair.input_id:
        raise PairingError(f"{where}: sample input_id does not match its records ({b.input_id!r})")
    diff = b.version_mask ^ a.version_mask
    if diff == 0 or diff & (diff - 1):
        raise PairingError(
            f"{where}: version masks {b.version_mask} and {a.version_mask} must differ in exactly one bit"
        )
    if not a.version_mask & diff:
        raise PairingError(f"{where}: the after-record must be the one including the optimization")
    return diff.bit_length() - 1


def _check_bits(entry_id: str, pairs: Iterable[SamplePair]):
    seen: dict[str, int] = {}
    for pair in pairs:
        bit = validate_pair(pair, entry_id)
        program = pair.before.program
        if seen.setdefault(program, bit) != bit:
            raise PairingError(f"entry {entry_id!r}: pairs for {program} toggle different bits")


def _resolve(ref, entry_dir: Path, cache: dict[Path, list[SampleRecord]], entry_id: str) -> SampleRecord:
    if isinstance(ref, str):
        selector = None
        rel = ref
    elif isinstance(ref, Mapping) and "file" in ref:
        selector = ref
        rel = ref["file"]
    else:
        raise EntryLoadError(f"entry {entry_id!r}: bad sample reference {ref!r}")
    path = (entry_dir / rel).resolve()
    if path not in cache:
        try:
            cache[path] = parse_canonical_csv(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise EntryLoadError(f"entry {entry_id!r}: cannot read {rel}: {exc}") from None
    records = cache[path]
    if selector is None:
        if len(records) != 1:
            raise EntryLoadError(
                f"entry {entry_id!r}: {rel} holds {len(records)} records; use a selector"
            )
        return records[0]
    try:
        want = (str(selector["program"]), str(selector["input_id"]), int(selector["run_id"]),
                int(selector["version_mask"]), str(selector["kernel"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise EntryLoadError(f"entry {entry_id!r}: incomplete selector {dict(selector)!r}") from exc
    for rec in records:
        if rec.key == want:
            return rec
    raise EntryLoadError(f"entry {entry_id!r}: selector {want} matches nothing in {rel}")


def load_entry(entry_dir: Path) -> OptimizationEntry:
    entry_dir = Path(entry_dir)
    label = entry_dir.name
    try:
        manifest = json.loads((entry_dir / MANIFEST).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise EntryLoadError(f"entry {label!r}: missing {MANIFEST}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise EntryLoadError(f"entry {label!r}: invalid {MANIFEST}: {exc}") from None
    if not isinstance(manifest, dict) or not isinstance(manifest.get("id"), str) or not manifest["id"]:
        raise EntryLoadError(f"entry {label!r}: manifest needs a non-empty string 'id'")
    entry_id = manifest["id"]
    samples_raw = manifest.get("samples", [])
    if not isinstance(samples_raw, list):
        raise EntryLoadError(f"entry {entry_id!r}: 'samples' must be a list")
    cache: dict[Path, list[SampleRecord]] = {}
    pairs = []
    for s in samples_raw:
        if not isinstance(s, dict) or "before" not in s or "after" not in s:
            raise EntryLoadError(f"entry {entry_id!r}: each sample needs 'before' and 'after'")
        before = _resolve(s["before"], entry_dir, cache, entry_id)
        after = _resolve(s["after"], entry_dir, cache, entry_id)
        pairs.append(SamplePair(before, after, str(s.get("input_id", before.input_id))))
    _check_bits(entry_id, pairs)
    return OptimizationEntry(
        id=entry_id,
        name=str(manifest.get("name", entry_id)),
        description=str(manifest.get("description", "")),
        example=str(manifest.get("example", "")),
        samples=tuple(pairs),
    )


def _entry_dirs(root: Path) -> list[Path]:
    return sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))


def load_db(root: str | os.PathLike) -> OptimizationDB:
    root = Path(root)
    if not root.is_dir():
        raise EntryLoadError(f"database root {str(root)!r} is not a directory")
    db = OptimizationDB(root)
    for d in _entry_dirs(root):
        entry = load_entry(d)
        if entry.id in db.entries:
            raise ConflictError(f"duplicate entry id {entry.id!r} in {d.name!r}")
        db.entries[entry.id] = entry
    return db


def list_entries(db: OptimizationDB | str | os.PathLike) -> list[EntryInfo]:
    if not isinstance(db, OptimizationDB):
        db = load_db(db)
    return [EntryInfo(e.id, e.name, len(e.samples)) for e in db]


def _manifest_for(entry: OptimizationEntry, csv_name: str) -> dict:
    def selector(rec: SampleRecord) -> dict:
        return {"file": f"{PROFILES_DIR}/{csv_name}", "program": rec.program, "input_id": rec.input_id,
                "run_id": rec.run_id, "version_mask": rec.version_mask, "kernel": rec.kernel}

    return {
        "id": entry.id,
        "name": entry.name,
        "description": entry.description,
        "example": entry.example,
        "samples": [{"before": selector(p.before), "after": selector(p.after), "input_id": p.input_id}
                    for p in entry.samples],
    }


def write_entry(entry_dir: Path, entry: OptimizationEntry) -> None:
    """Write ``entry`` as manifest + one multi-record profile CSV."""
    _check_bits(entry.id, entry.samples)
    entry_dir = Path(entry_dir)
    (entry_dir / PROFILES_DIR).mkdir(parents=True, exist_ok=True)
    records: dict[RecordKey, SampleRecord] = {}
    for p in entry.samples:
        records.setdefault(p.before.key, p.before)
        records.setdefault(p.after.key, p.after)
    csv_name = "samples.csv"
    (entry_dir / PROFILES_DIR / csv_name).write_text(
        write_canonical_csv(records[k] for k in sorted(records)), encoding="utf-8")
    (entry_dir / MANIFEST).write_text(
        json.dumps(_manifest_for(entry, csv_name), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def add_entry(root: str | os.PathLike, source: OptimizationEntry | str | os.PathLike) -> OptimizationEntry:
    """Add an entry (object, or an entry directory to copy) to the database at ``root``.

    The entry is staged in a hidden temp directory under ``root`` and moved
    into place with a rename, so readers never see a half-written entry.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    db = load_db(root)
    entry = source if isinstance(source, OptimizationEntry) else load_entry(Path(source))
    if entry.id in db or (root / entry.id).exists():
        raise ConflictError(f"entry {entry.id!r} already exists")
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=root))
    try:
        if isinstance(source, OptimizationEntry):
            write_entry(staging, entry)
        else:
            shutil.rmtree(staging)
            shutil.copytree(Path(source), staging)
        load_entry(staging)
        os.rename(staging, root / entry.id)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return entry


def remove_entry(root: str | os.PathLike, entry_id: str) -> None:
    root = Path(root)
    db = load_db(root)
    if entry_id not in db:
        raise UnknownEntryError(f"no optimization entry {entry_id!r}")
    target = next(d for d in _entry_dirs(root) if load_entry(d).id == entry_id)
    trash = root / f".trash-{target.name}-{os.getpid()}"
    os.rename(target, trash)
    shutil.rmtree(trash)


def build_training_set(entry: OptimizationEntry, schema: FeatureSchema) -> list[TrainingInstance]:
    """One (before-vector, speedup) instance per sample pair, in a stable order."""
    pairs = sorted(entry.samples, key=lambda p: (p.before.program, p.before.input_id, p.before.run_id,
                                                 p.before.version_mask, p.before.kernel))
    return [TrainingInstance(normalize(p.before, schema), p.speedup, p.before.key) for p in pairs]


def pairs_from_records(records: Sequence[SampleRecord], bit: int, program: str | None = None) -> list[SamplePair]:
    """All (without-bit, with-bit) pairs present in ``records``."""
    index = {r.key: r for r in records}
    pairs = []
    for rec in records:
        if program is not None and rec.program != program:
            continue
        if rec.has_bit(bit):
            continue
        after = index.get((rec.program, rec.input_id, rec.run_id, rec.version_mask | 1 << bit, rec.kernel))
        if after is not None:
            pairs.append(SamplePair(rec, after, rec.input_id))
    return pairs
