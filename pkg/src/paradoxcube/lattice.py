"""Population algebra over the lattice of attribute selectors.

A population is a plain tuple of ints, one slot per attribute, holding a
value id or ``WILDCARD`` (-1). Tuple ordering therefore already sorts a
wildcard before any concrete value, which is the canonical output order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from .errors import EmptyPopulation, IndexOutOfRange, InvalidValue, LengthMismatch, NotComparable
from .table import WILDCARD, BaseTable, hash_ids

Population = tuple[int, ...]


class Relation(enum.Enum):
    EQUAL = "Equal"
    PARENT = "Parent"
    CHILD = "Child"
    ANCESTOR = "Ancestor"
    DESCENDANT = "Descendant"
    SIBLING = "Sibling"
    OTHER = "Other"


@dataclass(frozen=True)
class Coverage:
    record_ids: tuple[int, ...]

    @property
    def hash(self) -> int:
        return hash_ids(self.record_ids)

    def __len__(self) -> int:
        return len(self.record_ids)


@dataclass(frozen=True)
class FreqStat:
    positives: int
    total: int

    def __post_init__(self):
        if self.total <= 0:
            raise EmptyPopulation("frequency statistic of an empty population")
        if not 0 <= self.positives <= self.total:
            raise InvalidValue("positives must lie in [0, total]")

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.positives, self.total)

    def __str__(self) -> str:
        return f"{self.positives}/{self.total}"


def root(n: int) -> Population:
    return (WILDCARD,) * n


def substitute(s: Sequence[int], attr: int, v: int, table: BaseTable | None = None) -> Population:
    if not 0 <= attr < len(s):
        raise IndexOutOfRange(f"attribute {attr} outside 0..{len(s) - 1}")
    if table is not None and not (v == WILDCARD or 0 <= v < table.dicts[attr].cardinality):
        raise InvalidValue(f"value id {v} invalid for attribute {table.attr_names[attr]}")
    out = list(s)
    out[attr] = v
    return tuple(out)


def is_ancestor_or_equal(a: Sequence[int], b: Sequence[int]) -> bool:
    """True when every concrete slot of ``a`` agrees with ``b``."""
    return all(x == WILDCARD or x == y for x, y in zip(a, b))


def relation(s: Sequence[int], s2: Sequence[int]) -> Relation:
    if len(s) != len(s2):
        raise LengthMismatch("populations have different lengths")
    diff = [i for i, (a, b) in enumerate(zip(s, s2)) if a != b]
    if not diff:
        return Relation.EQUAL
    if len(diff) == 1:
        a, b = s[diff[0]], s2[diff[0]]
        if a == WILDCARD:
            return Relation.PARENT
        if b == WILDCARD:
            return Relation.CHILD
        return Relation.SIBLING
    if is_ancestor_or_equal(s, s2):
        return Relation.ANCESTOR
    if is_ancestor_or_equal(s2, s):
        return Relation.DESCENDANT
    return Relation.OTHER


def differential_attr(s1: Sequence[int], s2: Sequence[int]) -> int | None:
    """Index of the single differing slot if the two are siblings, else None."""
    diff = [i for i, (a, b) in enumerate(zip(s1, s2)) if a != b]
    if len(diff) == 1 and s1[diff[0]] != WILDCARD and s2[diff[0]] != WILDCARD:
        return diff[0]
    return None


def coverage(table: BaseTable, s: Sequence[int]) -> Coverage:
    ids = np.flatnonzero(table.match_mask(s))
    return Coverage(tuple(int(i) for i in ids))


def freq_stat(table: BaseTable, cov: Coverage, label: int) -> FreqStat:
    if len(cov) == 0:
        raise EmptyPopulation("coverage is empty")
    if not 0 <= label < table.m_labels:
        raise IndexOutOfRange(f"label {label} outside 0..{table.m_labels - 1}")
    ids = np.fromiter(cov.record_ids, dtype=np.int64, count=len(cov))
    return FreqStat(int(table.label_data[ids, label].sum()), len(cov))


def compare_stats(a: FreqStat, b: FreqStat) -> int:
    d = a.positives * b.total - b.positives * a.total
    return (d > 0) - (d < 0)


def enumerate_between(low: Sequence[int], up: Sequence[int]) -> list[Population]:
    if len(low) != len(up):
        raise LengthMismatch("populations have different lengths")
    if not is_ancestor_or_equal(low, up):
        raise NotComparable(f"{tuple(low)} is not an ancestor of {tuple(up)}")
    free = [i for i, (a, b) in enumerate(zip(low, up)) if a == WILDCARD and b != WILDCARD]
    out = []
    for choice in product((False, True), repeat=len(free)):
        s = list(low)
        for i, take in zip(free, choice):
            if take:
                s[i] = up[i]
        out.append(tuple(s))
    out.sort()
    return out


def members(lowers: Sequence[Sequence[int]], upper: Sequence[int]) -> list[Population]:
    """All populations between any of ``lowers`` and ``upper``, deduplicated."""
    seen = set()
    for low in lowers:
        seen.update(enumerate_between(low, upper))
    return sorted(seen)


def render(table: BaseTable, s: Sequence[int]) -> str:
    parts = ["*" if v == WILDCARD else table.dicts[i].decode(v) for i, v in enumerate(s)]
    return "(" + ",".join(parts) + ")"


def parse_population(table: BaseTable, text: str) -> Population:
    """Inverse of :func:`render`: ``"(a1,*,c1)"`` to value ids."""
    body = text.strip().removeprefix("(").removesuffix(")")
    parts = [p.strip() for p in body.split(",")]
    if len(parts) != table.n_attrs:
        raise LengthMismatch(f"{text!r} has {len(parts)} slots, expected {table.n_attrs}")
    out = []
    for d, p in zip(table.dicts, parts):
        if p == "*":
            out.append(WILDCARD)
        else:
            try:
                out.append(d.encode(p))
            except KeyError:
                raise InvalidValue(f"{p!r} is not a value of {d.name}") from None
    return tuple(out)
