"""Dictionary-encoded categorical tables with binary labels."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyTable,
    IndexOutOfRange,
    LengthMismatch,
    MissingColumn,
    NonBinaryLabel,
    RaggedRow,
)

WILDCARD = -1

_TRUE_TOKENS = frozenset({"1", "true", "yes"})
_FALSE_TOKENS = frozenset({"0", "false", "no"})

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def mix64(ids) -> np.ndarray:
    """splitmix64 finaliser applied element-wise to record ids.

    Coverage hashes are sums of these values modulo 2**64, which makes the
    hash of a record set independent of order and additive over disjoint
    unions.
    """
    x = np.asarray(ids, dtype=np.uint64) + np.uint64(0x9E3779B97F4A7C15)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        x = x ^ (x >> np.uint64(31))
    return x & _MASK64


def hash_ids(ids) -> int:
    """Order-independent 64-bit fingerprint of a set of record ids."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        return 0
    with np.errstate(over="ignore"):
        return int(mix64(ids).sum(dtype=np.uint64))


@dataclass(frozen=True)
class AttributeDictionary:
    attr_index: int
    name: str
    values: tuple[str, ...]

    @property
    def cardinality(self) -> int:
        return len(self.values)

    @cached_property
    def _ids(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.values)}

    def encode(self, raw: str) -> int:
        return self._ids[raw]

    def decode(self, vid: int) -> str:
        return self.values[vid]


@dataclass(frozen=True)
class Compressed:
    """Identical records collapsed into distinct rows with multiplicities.

    Every population covers either all or none of the records sharing a
    categorical row, so row-level counts and hash sums are enough to
    reproduce any coverage statistic.
    """

    rows: np.ndarray  # (k, n) int32 distinct categorical rows
    row_of_record: np.ndarray  # (N,) row index of each record
    counts: np.ndarray  # (k,) int64
    positives: np.ndarray  # (k, m) int64
    hashes: np.ndarray  # (k,) uint64 sum of record hashes per row
    min_record: np.ndarray  # (k,) smallest record id per row


@dataclass(frozen=True, eq=False)
class BaseTable:
    attr_names: tuple[str, ...]
    label_names: tuple[str, ...]
    dicts: tuple[AttributeDictionary, ...]
    cat_data: np.ndarray  # (N, n) int32
    label_data: np.ndarray  # (N, m) uint8
    source: str = field(default="")

    def __post_init__(self):
        cat = np.ascontiguousarray(self.cat_data, dtype=np.int32)
        lab = np.ascontiguousarray(self.label_data, dtype=np.uint8)
        if cat.ndim != 2 or cat.shape[1] != len(self.attr_names):
            cat = cat.reshape(-1, len(self.attr_names))
        if lab.ndim != 2 or lab.shape[1] != len(self.label_names):
            lab = lab.reshape(-1, len(self.label_names))
        if cat.shape[0] != lab.shape[0]:
            raise LengthMismatch("categorical and label data disagree on record count")
        if len(self.dicts) != len(self.attr_names):
            raise LengthMismatch("one dictionary per attribute is required")
        for i, d in enumerate(self.dicts):
            col = cat[:, i]
            if col.size and (col.min() < 0 or col.max() >= d.cardinality):
                raise IndexOutOfRange(f"value id out of range for attribute {d.name}")
        if lab.size and lab.max() > 1:
            raise NonBinaryLabel("label cells must be 0 or 1")
        cat.setflags(write=False)
        lab.setflags(write=False)
        object.__setattr__(self, "cat_data", cat)
        object.__setattr__(self, "label_data", lab)

    @property
    def n_attrs(self) -> int:
        return len(self.attr_names)

    @property
    def m_labels(self) -> int:
        return len(self.label_names)

    @property
    def n_records(self) -> int:
        return int(self.cat_data.shape[0])

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(d.cardinality for d in self.dicts)

    @classmethod
    def from_raw(
        cls,
        attr_names: Sequence[str],
        label_names: Sequence[str],
        cat_rows: Iterable[Sequence[str]],
        label_rows: Iterable[Sequence[int]],
        source: str = "",
    ) -> "BaseTable":
        """Build a table from raw string values, assigning ids by first appearance."""
        n = len(attr_names)
        seen: list[dict[str, int]] = [{} for _ in range(n)]
        encoded = []
        for row in cat_rows:
            if len(row) != n:
                raise RaggedRow(f"expected {n} categorical values, got {len(row)}")
            enc = []
            for i, raw in enumerate(row):
                ids = seen[i]
                if raw not in ids:
                    ids[raw] = len(ids)
                enc.append(ids[raw])
            encoded.append(enc)
        labels = [list(r) for r in label_rows]
        dicts = tuple(
            AttributeDictionary(i, attr_names[i], tuple(seen[i])) for i in range(n)
        )
        cat = np.array(encoded, dtype=np.int32).reshape(len(encoded), n)
        lab = np.array(labels, dtype=np.int64).reshape(len(labels), len(label_names))
        if lab.size and (lab.min() < 0 or lab.max() > 1):
            raise NonBinaryLabel("label cells must be 0 or 1")
        return cls(tuple(attr_names), tuple(label_names), dicts, cat, lab, source)

    @classmethod
    def from_codes(
        cls,
        cat: np.ndarray,
        labels: np.ndarray,
        cardinalities: Sequence[int],
        attr_names: Sequence[str] | None = None,
        label_names: Sequence[str] | None = None,
    ) -> "BaseTable":
        """Build a table from value ids; value strings are ``<attr><id+1>``."""
        cat = np.asarray(cat, dtype=np.int32)
        labels = np.asarray(labels, dtype=np.uint8)
        n = len(cardinalities)
        m = labels.shape[1] if labels.ndim == 2 else len(label_names or ())
        attr_names = tuple(attr_names or default_attr_names(n))
        label_names = tuple(label_names or (f"Y{j + 1}" for j in range(m)))
        dicts = tuple(
            AttributeDictionary(
                i, attr_names[i], tuple(f"{attr_names[i].lower()}{v + 1}" for v in range(c))
            )
            for i, c in enumerate(cardinalities)
        )
        return cls(attr_names, label_names, dicts, cat, labels)

    def record_matches(self, t: int, s: Sequence[int]) -> bool:
        if not 0 <= t < self.n_records:
            raise IndexOutOfRange(f"record {t} outside 0..{self.n_records - 1}")
        if len(s) != self.n_attrs:
            raise LengthMismatch("population length differs from attribute count")
        row = self.cat_data[t]
        return all(v == WILDCARD or v == row[i] for i, v in enumerate(s))

    def match_mask(self, s: Sequence[int]) -> np.ndarray:
        """Boolean mask over records selected by population ``s``."""
        if len(s) != self.n_attrs:
            raise LengthMismatch("population length differs from attribute count")
        mask = np.ones(self.n_records, dtype=bool)
        for i, v in enumerate(s):
            if v != WILDCARD:
                mask &= self.cat_data[:, i] == v
        return mask

    def decode_record(self, t: int) -> tuple[list[str], list[int]]:
        row = self.cat_data[t]
        return (
            [d.decode(int(v)) for d, v in zip(self.dicts, row)],
            [int(b) for b in self.label_data[t]],
        )

    def attr_index(self, name: str) -> int:
        try:
            return self.attr_names.index(name)
        except ValueError:
            raise MissingColumn(name) from None

    def label_index(self, name: str) -> int:
        try:
            return self.label_names.index(name)
        except ValueError:
            raise MissingColumn(name) from None

    def checksum(self) -> int:
        """Fingerprint of the table contents, used to confirm nothing mutated it."""
        return hash((self.cat_data.tobytes(), self.label_data.tobytes()))

    @cached_property
    def compressed(self) -> Compressed:
        n, m = self.n_attrs, self.m_labels
        if self.n_records == 0:
            return Compressed(
                np.zeros((0, n), np.int32),
                np.zeros(0, np.int64),
                np.zeros(0, np.int64),
                np.zeros((0, m), np.int64),
                np.zeros(0, np.uint64),
                np.zeros(0, np.int64),
            )
        rows, inverse = np.unique(self.cat_data, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1).astype(np.int64)
        k = rows.shape[0]
        counts = np.bincount(inverse, minlength=k).astype(np.int64)
        positives = np.zeros((k, m), dtype=np.int64)
        for j in range(m):
            np.add.at(positives[:, j], inverse, self.label_data[:, j].astype(np.int64))
        order = np.argsort(inverse, kind="stable")
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        rec_hash = mix64(order)
        with np.errstate(over="ignore"):
            hashes = np.add.reduceat(rec_hash, starts).astype(np.uint64)
        min_record = order[starts].astype(np.int64)
        rows = np.ascontiguousarray(rows, dtype=np.int32)
        for arr in (rows, inverse, counts, positives, hashes, min_record):
            arr.setflags(write=False)
        return Compressed(rows, inverse, counts, positives, hashes, min_record)


def default_attr_names(n: int) -> list[str]:
    letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    return [letters[i] if i < 26 else f"X{i + 1}" for i in range(n)]


def _binarize(column: str, raw_values: list[str], positive: str | None) -> list[int]:
    distinct = set(raw_values)
    if positive is not None:
        if len(distinct) > 2:
            raise NonBinaryLabel(
                f"label column {column!r} has {len(distinct)} distinct values"
            )
        return [1 if v == positive else 0 for v in raw_values]
    out = []
    for v in raw_values:
        key = v.strip().lower()
        if key in _TRUE_TOKENS:
            out.append(1)
        elif key in _FALSE_TOKENS:
            out.append(0)
        else:
            raise NonBinaryLabel(
                f"label column {column!r} holds {v!r}; pass a positive value for it"
            )
    return out


def load_csv(
    path: str | Path,
    label_columns: Iterable[str],
    positive_values: Mapping[str, str] | None = None,
    drop_missing: Iterable[str] | None = None,
    ignore_columns: Iterable[str] = (),
) -> BaseTable:
    """Read a headed CSV file into a :class:`BaseTable`.

    Non-label columns become categorical attributes in header order. Label
    cells must be one of 1/true/yes or 0/false/no (case-insensitive) unless a
    positive value is given for that column, in which case the column must be
    two-valued and cells equal to it map to 1.

    ``drop_missing`` lists tokens (e.g. ``"?"``) that mark a row for removal
    when they occur in any cell. Nothing is dropped by default.
    """
    path = Path(path)
    label_columns = list(label_columns)
    positive_values = dict(positive_values or {})
    missing_tokens = set(drop_missing or ())
    ignore = set(ignore_columns)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyTable(f"{path} has no header row") from None
        for col in label_columns + list(positive_values):
            if col not in header:
                raise MissingColumn(col)
        label_idx = [header.index(c) for c in label_columns]
        attr_idx = [
            i for i, h in enumerate(header) if h not in label_columns and h not in ignore
        ]
        cat_rows, raw_labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise RaggedRow(f"line {lineno}: {len(row)} cells, header has {len(header)}")
            row = [c.strip() for c in row]
            if missing_tokens and any(c in missing_tokens for c in row):
                continue
            cat_rows.append([row[i] for i in attr_idx])
            raw_labels.append([row[i] for i in label_idx])
    if not cat_rows:
        raise EmptyTable(f"{path} has no data rows")
    columns = []
    for j, name in enumerate(label_columns):
        columns.append(_binarize(name, [r[j] for r in raw_labels], positive_values.get(name)))
    label_rows = list(zip(*columns)) if columns else [() for _ in cat_rows]
    return BaseTable.from_raw(
        [header[i] for i in attr_idx], label_columns, cat_rows, label_rows, source=str(path)
    )


def write_csv(table: BaseTable, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(table.attr_names) + list(table.label_names))
        for t in range(table.n_records):
            cats, labels = table.decode_record(t)
            w.writerow(cats + labels)
