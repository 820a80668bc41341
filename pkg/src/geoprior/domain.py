"""Core data model: observations, the three-level label hierarchy, the class
vocabulary and probability vectors.

Everything here is immutable once validated. ``validate_dataset`` is the only
way raw rows become a :class:`Dataset`; it reports every bad row instead of
stopping at the first one.
"""

from __future__ import annotations

import datetime as _dt
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from .errors import DatasetValidationError, InvalidProbabilities, VocabularyMismatch

OBSERVATION_COLUMNS = (
    "obs_id",
    "latitude",
    "longitude",
    "date",
    "label_l1",
    "label_l2",
    "label_l3",
)

INGEST_SUM_TOL = 1e-6
INTERNAL_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Violation:
    code: str
    row: int | None
    obs_id: str | None
    message: str

    def __str__(self):
        where = f"row {self.row}" if self.row is not None else "dataset"
        if self.obs_id:
            where += f" ({self.obs_id})"
        return f"{self.code} at {where}: {self.message}"


@dataclass(frozen=True)
class LabelHierarchy:
    """Species (level 3) -> level 2 -> family (level 1), each link unique."""

    level1: tuple[str, ...]
    level2: tuple[str, ...]
    level3: tuple[str, ...]
    parent_of: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "parent_of", MappingProxyType(dict(self.parent_of)))

    def lineage(self, species: str) -> tuple[str, str]:
        """Return the (level-2, level-1) ancestors of a species."""
        l2 = self.parent_of[species]
        return l2, self.parent_of[l2]

    def __eq__(self, other):
        if not isinstance(other, LabelHierarchy):
            return NotImplemented
        return (
            self.level1 == other.level1
            and self.level2 == other.level2
            and self.level3 == other.level3
            and dict(self.parent_of) == dict(other.parent_of)
        )

    def __hash__(self):
        return hash((self.level1, self.level2, self.level3))


@dataclass(frozen=True)
class ClassVocabulary:
    classes: tuple[str, ...]
    index_of: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        classes = tuple(self.classes)
        if len(set(classes)) != len(classes):
            raise ValueError("vocabulary contains duplicate labels")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(
            self, "index_of", MappingProxyType({c: i for i, c in enumerate(classes)})
        )

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "ClassVocabulary":
        # sorted order keeps indices stable across runs and files
        return cls(tuple(sorted(set(labels))))

    def __len__(self):
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    def require_same(self, other: "ClassVocabulary", what: str = "vocabulary"):
        if self.classes != other.classes:
            raise VocabularyMismatch(
                f"{what}: {len(self.classes)} classes vs {len(other.classes)} "
                f"(first difference: {_first_difference(self.classes, other.classes)})"
            )


def _first_difference(a, b):
    for x, y in zip(a, b):
        if x != y:
            return f"{x!r} != {y!r}"
    return f"length {len(a)} != {len(b)}"


@dataclass(frozen=True)
class Observation:
    obs_id: str
    latitude: float
    longitude: float
    date: _dt.date
    species: str


@dataclass(frozen=True)
class Dataset:
    hierarchy: LabelHierarchy
    vocabulary: ClassVocabulary
    observations: tuple[Observation, ...]

    def __len__(self):
        return len(self.observations)

    def labels(self) -> np.ndarray:
        """Class index of every observation, in file order."""
        idx = self.vocabulary.index_of
        return np.array([idx[o.species] for o in self.observations], dtype=np.int64)

    @property
    def obs_ids(self) -> tuple[str, ...]:
        return tuple(o.obs_id for o in self.observations)

    def to_rows(self) -> list[dict[str, str]]:
        rows = []
        for o in self.observations:
            l2, l1 = self.hierarchy.lineage(o.species)
            rows.append(
                {
                    "obs_id": o.obs_id,
                    "latitude": repr(float(o.latitude)),
                    "longitude": repr(float(o.longitude)),
                    "date": o.date.isoformat(),
                    "label_l1": l1,
                    "label_l2": l2,
                    "label_l3": o.species,
                }
            )
        return rows


def validate_prob_vector(values, tol: float = INGEST_SUM_TOL) -> np.ndarray:
    """Check a probability vector on ingest; returns it as float64."""
    p = np.asarray(values, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InvalidProbabilities("probability vector must be 1-D and non-empty")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidProbabilities("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > tol:
        raise InvalidProbabilities(f"probabilities sum to {p.sum()!r}, not 1")
    return p


def normalize(values) -> np.ndarray:
    p = np.asarray(values, dtype=np.float64)
    return p / p.sum(axis=-1, keepdims=True)


def _parse_float(text):
    try:
        value = float(text)
    except (TypeError, ValueError):
        return None
    return value if math.isfinite(value) else None


def validate_dataset(
    raw: Iterable[Mapping[str, object]] | Dataset,
    vocabulary: ClassVocabulary | None = None,
) -> Dataset:
    """Validate parsed observation rows into a :class:`Dataset`.

    ``raw`` is an iterable of mappings keyed by :data:`OBSERVATION_COLUMNS`
    (as read from CSV), or an existing Dataset, which is re-checked and
    returned unchanged. When ``vocabulary`` is given, species outside it are
    reported as ``UnknownLabel`` and the dataset adopts that vocabulary.

    Raises :class:`DatasetValidationError` carrying every violation.
    """
    if isinstance(raw, Dataset):
        vocabulary = vocabulary or raw.vocabulary
        raw = raw.to_rows()

    violations: list[Violation] = []
    seen_ids: set[str] = set()
    parent: dict[str, str] = {}
    level_of: dict[str, int] = {}
    parent_conflicts: set[str] = set()
    staged = []

    def bad(code, row, obs_id, msg):
        violations.append(Violation(code, row, obs_id, msg))

    for row_no, row in enumerate(raw, start=1):
        missing = [c for c in OBSERVATION_COLUMNS if c not in row]
        obs_id = str(row.get("obs_id", "") or "").strip()
        if missing:
            bad("MalformedRow", row_no, obs_id or None, f"missing columns {missing}")
            continue
        if not obs_id:
            bad("MalformedRow", row_no, None, "empty obs_id")
            continue
        if obs_id in seen_ids:
            bad("DuplicateId", row_no, obs_id, "obs_id already used")
        seen_ids.add(obs_id)

        ok = True
        lat = _parse_float(row["latitude"])
        lon = _parse_float(row["longitude"])
        if lat is None or not -90.0 <= lat <= 90.0:
            bad("CoordinateOutOfRange", row_no, obs_id, f"latitude {row['latitude']!r}")
            ok = False
        if lon is None or not -180.0 <= lon <= 180.0:
            bad("CoordinateOutOfRange", row_no, obs_id, f"longitude {row['longitude']!r}")
            ok = False
        elif lon == 180.0:
            lon = -180.0

        date = row["date"]
        if not isinstance(date, _dt.date):
            try:
                date = _dt.date.fromisoformat(str(date).strip())
            except ValueError:
                bad("InvalidDate", row_no, obs_id, f"date {row['date']!r}")
                ok = False

        labels = [str(row[c] or "").strip() for c in ("label_l1", "label_l2", "label_l3")]
        if not all(labels):
            bad("UnknownLabel", row_no, obs_id, "empty label")
            continue
        l1, l2, l3 = labels
        for level, label in enumerate(labels, start=1):
            prev = level_of.setdefault(label, level)
            if prev != level:
                bad(
                    "BrokenHierarchy",
                    row_no,
                    obs_id,
                    f"label {label!r} used at levels {prev} and {level}",
                )
                ok = False
        for child, par in ((l3, l2), (l2, l1)):
            known = parent.setdefault(child, par)
            if known != par and child not in parent_conflicts:
                parent_conflicts.add(child)
                bad(
                    "BrokenHierarchy",
                    row_no,
                    obs_id,
                    f"label {child!r} has two parents: {known!r} and {par!r}",
                )
                ok = False
        if vocabulary is not None and l3 not in vocabulary.index_of:
            bad("UnknownLabel", row_no, obs_id, f"species {l3!r} not in vocabulary")
            ok = False
        if ok:
            staged.append(Observation(obs_id, lat, lon, date, l3))

    if violations:
        raise DatasetValidationError(violations)

    levels = {1: set(), 2: set(), 3: set()}
    for label, level in level_of.items():
        levels[level].add(label)
    hierarchy = LabelHierarchy(
        level1=tuple(sorted(levels[1])),
        level2=tuple(sorted(levels[2])),
        level3=tuple(sorted(levels[3])),
        parent_of=parent,
    )
    if vocabulary is None:
        vocabulary = ClassVocabulary.from_labels(levels[3])
    return Dataset(hierarchy, vocabulary, tuple(staged))


@dataclass(frozen=True)
class ProbMatrix:
    """One probability vector per observation, columns in vocabulary order."""

    obs_ids: tuple[str, ...]
    classes: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.shape != (len(self.obs_ids), len(self.classes)):
            raise InvalidProbabilities(
                f"matrix shape {v.shape} does not match {len(self.obs_ids)} ids x {len(self.classes)} classes"
            )
        v.flags.writeable = False
        object.__setattr__(self, "obs_ids", tuple(self.obs_ids))
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.obs_ids)

    def row_index(self) -> dict[str, int]:
        return {o: i for i, o in enumerate(self.obs_ids)}

    def validate(self, tol: float = INGEST_SUM_TOL) -> "ProbMatrix":
        v = self.values
        if len(set(self.obs_ids)) != len(self.obs_ids):
            raise InvalidProbabilities("duplicate obs_id rows")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidProbabilities("probabilities must be finite and non-negative")
        bad = np.flatnonzero(np.abs(v.sum(axis=1) - 1.0) > tol)
        if bad.size:
            raise InvalidProbabilities(f"row {self.obs_ids[bad[0]]!r} does not sum to 1")
        return self
