"""CSV formats: observation files and probability matrices."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .domain import OBSERVATION_COLUMNS, ClassVocabulary, Dataset, ProbMatrix, validate_dataset
from .errors import CorruptFile, HeaderMismatch, InvalidProbabilities


def read_observation_rows(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in OBSERVATION_COLUMNS if c not in header]
        if missing:
            raise HeaderMismatch(f"{path}: missing columns {missing}")
        return list(reader)


def read_observations(path, vocabulary: ClassVocabulary | None = None) -> Dataset:
    return validate_dataset(read_observation_rows(path), vocabulary)


def write_observation_rows(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=OBSERVATION_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row[c] for c in OBSERVATION_COLUMNS})


def write_observations(dataset: Dataset, path) -> None:
    write_observation_rows(dataset.to_rows(), path)


def format_prob_matrix(pm: ProbMatrix) -> str:
    lines = [",".join(("obs_id",) + pm.classes)]
    for oid, row in zip(pm.obs_ids, pm.values):
        lines.append(",".join([oid] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"


def write_prob_matrix(pm: ProbMatrix, path) -> None:
    Path(path).write_text(format_prob_matrix(pm), encoding="utf-8")


def read_prob_matrix(path) -> ProbMatrix:
    """Parse and validate a probability CSV (rows must sum to 1 within 1e-6)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorruptFile(f"{path}: empty probability file") from None
        if not header or header[0] != "obs_id" or len(header) < 2:
            raise HeaderMismatch(f"{path}: header must be 'obs_id' followed by class labels")
        ids, rows = [], []
        for line_no, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise CorruptFile(f"{path}:{line_no}: expected {len(header)} fields, got {len(rec)}")
            try:
                rows.append([float(v) for v in rec[1:]])
            except ValueError as exc:
                raise CorruptFile(f"{path}:{line_no}: {exc}") from None
            ids.append(rec[0])
    values = np.array(rows, dtype=np.float64).reshape(len(ids), len(header) - 1)
    pm = ProbMatrix(tuple(ids), tuple(header[1:]), values)
    try:
        return pm.validate()
    except InvalidProbabilities as exc:
        raise InvalidProbabilities(f"{path}: {exc}") from None
