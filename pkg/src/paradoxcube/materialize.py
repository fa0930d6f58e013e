"""Materialization of the population lattice into coverage groups.

Two routes produce the same result:

* ``materialize_bruteforce`` enumerates the 2**n ancestors of every record
  and groups the resulting populations by coverage. It is the oracle.
* ``materialize_dfs`` walks the lattice depth-first over shrinking
  sub-tables, jumping each entry population to the closure of its coverage
  (the group's upper bound) and pruning children below the threshold.
"""

from __future__ import annotations

import hashlib
import logging
import pickle
from array import array
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GroupNotFound, HashCollision, ThetaOutOfRange, TooManyAttributes
from .lattice import FreqStat, Population, is_ancestor_or_equal, members, render, root
from .table import WILDCARD, BaseTable, mix64

log = logging.getLogger(__name__)

MAX_BRUTEFORCE_ATTRS = 24
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class GroupStats:
    size: int
    cov_hash: int
    positives: tuple[int, ...]
    min_record: int


@dataclass(frozen=True)
class CoverageGroup:
    upper: Population
    lowers: tuple[Population, ...]
    size: int
    cov_hash: int
    positives: tuple[int, ...]
    min_record: int
    # distinct-row ids of the coverage; only the DFS route fills this in
    rows: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def stats(self) -> tuple[FreqStat, ...]:
        return tuple(FreqStat(p, self.size) for p in self.positives)

    def members(self) -> list[Population]:
        return members(self.lowers, self.upper)

    def contains(self, s: Sequence[int]) -> bool:
        return is_ancestor_or_equal(s, self.upper) and any(
            is_ancestor_or_equal(low, s) for low in self.lowers
        )

    def signature(self) -> tuple:
        """Hashable identity used to compare results of different routes."""
        return (self.upper, self.lowers, self.size, self.cov_hash, self.positives)


@dataclass
class MaterializationResult:
    groups: dict[int, CoverageGroup]
    theta: Fraction
    n_records: int
    table_ref: int = 0
    # full per-population statistics, kept by the brute-force route only
    population_index: dict | None = field(default=None, repr=False)
    population_arrays: tuple | None = field(default=None, repr=False)

    def ordered(self) -> list[CoverageGroup]:
        return sorted(self.groups.values(), key=lambda g: g.upper)

    def group_set(self) -> set[tuple]:
        return {g.signature() for g in self.groups.values()}

    def by_hash(self, cov_hash: int) -> CoverageGroup:
        try:
            return self.groups[cov_hash]
        except KeyError:
            raise GroupNotFound(f"no coverage group with hash {cov_hash:#x}") from None

    def group_of(self, table: BaseTable, s: Sequence[int]) -> CoverageGroup:
        """Coverage group of population ``s`` (which must meet the threshold)."""
        h = coverage_hash(table, s)
        g = self.groups.get(h)
        if g is None or not g.contains(s):
            raise GroupNotFound(f"population {render(table, s)} is not materialized")
        return g

    def meets_threshold(self, size: int) -> bool:
        return keep(size, self.theta, self.n_records)

    def to_json(self, table: BaseTable) -> list[dict]:
        out = []
        for g in self.ordered():
            out.append(
                {
                    "upper": render(table, g.upper),
                    "lowers": [render(table, low) for low in g.lowers],
                    "coverage": g.size,
                    "fractions": {
                        name: str(Fraction(p, g.size))
                        for name, p in zip(table.label_names, g.positives)
                    },
                }
            )
        return out


def parse_theta(theta) -> Fraction:
    """Exact rational threshold from a number or decimal string."""
    try:
        value = Fraction(str(theta)) if not isinstance(theta, Fraction) else theta
    except (ValueError, ZeroDivisionError):
        raise ThetaOutOfRange(f"cannot parse threshold {theta!r}") from None
    if not 0 <= value <= 1:
        raise ThetaOutOfRange(f"threshold {theta} outside [0, 1]")
    return value


def keep(size: int, theta: Fraction, n_records: int) -> bool:
    """Threshold test ``size >= theta * |T|`` in exact arithmetic; empty never passes."""
    return size > 0 and size * theta.denominator >= theta.numerator * n_records


def coverage_hash(table: BaseTable, s: Sequence[int]) -> int:
    c = table.compressed
    mask = np.ones(c.rows.shape[0], dtype=bool)
    for i, v in enumerate(s):
        if v != WILDCARD:
            mask &= c.rows[:, i] == v
    with np.errstate(over="ignore"):
        return int(c.hashes[mask].sum(dtype=np.uint64))


def _refine(lowers: Iterable[Population]) -> tuple[Population, ...]:
    uniq = sorted(set(lowers))
    kept = [
        low
        for low in uniq
        if not any(o != low and is_ancestor_or_equal(o, low) for o in uniq)
    ]
    return tuple(kept)


def merge_and_refine(
    candidates: Iterable[tuple[Population, Population, GroupStats]],
    theta: Fraction = Fraction(0),
    n_records: int = 0,
    rows: dict[Population, np.ndarray] | None = None,
) -> MaterializationResult:
    """Merge (upper, lower, stats) candidates sharing an upper into groups."""
    lowers: dict[Population, list[Population]] = {}
    stats: dict[Population, GroupStats] = {}
    for upper, lower, st in candidates:
        lowers.setdefault(upper, []).append(lower)
        stats.setdefault(upper, st)
    groups: dict[int, CoverageGroup] = {}
    for upper in sorted(lowers):
        st = stats[upper]
        g = CoverageGroup(
            upper,
            _refine(lowers[upper]),
            st.size,
            st.cov_hash,
            st.positives,
            st.min_record,
            None if rows is None else rows.get(upper),
        )
        if st.cov_hash in groups:
            raise HashCollision(
                f"coverage hash {st.cov_hash:#x} shared by {groups[st.cov_hash].upper} and {upper}"
            )
        groups[st.cov_hash] = g
    return MaterializationResult(groups, theta, n_records)


# ---------------------------------------------------------------------------
# brute force


def _all_population_stats(table: BaseTable, chunk: int = 2048):
    """Enumerate every ancestor of every record and total its statistics.

    Returns ``(index, counts, positives, hashes, min_record)`` where ``index``
    maps each non-empty population to its row in the arrays.
    """
    n, m, N = table.n_attrs, table.m_labels, table.n_records
    width = 1 << n

    class _Index(dict):
        def __missing__(self, key):
            v = self[key] = len(self)
            return v

    index = _Index()
    counts = np.zeros(0, np.int64)
    positives = np.zeros((0, m), np.int64)
    hashes = np.zeros(0, np.uint64)
    min_record = np.zeros(0, np.int64)
    cat_rows = table.cat_data.tolist()
    rec_hash = mix64(np.arange(N))
    lookup = index.__getitem__
    for lo in range(0, N, chunk):
        hi = min(N, lo + chunk)
        ids = array("q")
        for row in cat_rows[lo:hi]:
            ids.extend(map(lookup, product(*[(WILDCARD, v) for v in row])))
        pop = np.frombuffer(ids, dtype=np.int64)
        size = len(index)
        grow = size - counts.shape[0]
        if grow:
            counts = np.concatenate([counts, np.zeros(grow, np.int64)])
            positives = np.concatenate([positives, np.zeros((grow, m), np.int64)])
            hashes = np.concatenate([hashes, np.zeros(grow, np.uint64)])
            min_record = np.concatenate([min_record, np.full(grow, N, np.int64)])
        recs = np.repeat(np.arange(lo, hi, dtype=np.int64), width)
        counts += np.bincount(pop, minlength=size)
        for j in range(m):
            lab = np.repeat(table.label_data[lo:hi, j].astype(np.int64), width)
            positives[:, j] += np.bincount(pop, weights=lab, minlength=size).astype(np.int64)
        order = np.argsort(pop, kind="stable")
        sp = pop[order]
        starts = np.flatnonzero(np.r_[True, sp[1:] != sp[:-1]])
        keys = sp[starts]
        with np.errstate(over="ignore"):
            hashes[keys] += np.add.reduceat(rec_hash[recs[order]], starts)
        np.minimum.at(min_record, keys, recs[order][starts])
    return dict(index), counts, positives, hashes, min_record


def materialize_bruteforce(table: BaseTable, theta=0) -> MaterializationResult:
    theta = parse_theta(theta)
    if table.n_attrs > MAX_BRUTEFORCE_ATTRS:
        raise TooManyAttributes(
            f"{table.n_attrs} attributes exceed the brute-force limit of {MAX_BRUTEFORCE_ATTRS}"
        )
    index, counts, positives, hashes, min_record = _all_population_stats(table)
    N = table.n_records
    by_hash: dict[int, list[Population]] = {}
    for pop, i in index.items():
        if keep(int(counts[i]), theta, N):
            by_hash.setdefault(int(hashes[i]), []).append(pop)
    groups: dict[int, CoverageGroup] = {}
    for h, pops in by_hash.items():
        member_set = set(pops)
        upper = max(pops, key=lambda p: sum(v != WILDCARD for v in p))
        sizes = {int(counts[index[p]]) for p in pops}
        if len(sizes) != 1 or not all(is_ancestor_or_equal(p, upper) for p in pops):
            raise HashCollision(f"coverage hash {h:#x} shared by distinct record sets")
        lowers = []
        for p in pops:
            parents = (p[:i] + (WILDCARD,) + p[i + 1 :] for i, v in enumerate(p) if v != WILDCARD)
            if not any(q in member_set for q in parents):
                lowers.append(p)
        i = index[upper]
        groups[h] = CoverageGroup(
            upper,
            tuple(sorted(lowers)),
            int(counts[i]),
            h,
            tuple(int(x) for x in positives[i]),
            int(min_record[i]),
        )
    return MaterializationResult(
        groups,
        theta,
        N,
        id(table),
        population_index=index,
        population_arrays=(counts, positives, hashes, min_record),
    )


# ---------------------------------------------------------------------------
# depth-first


class _Walker:
    def __init__(self, table: BaseTable, theta: Fraction):
        c = table.compressed
        self.rows = c.rows
        self.counts = c.counts
        self.positives = c.positives
        self.hashes = c.hashes
        self.min_record = c.min_record
        self.n = table.n_attrs
        self.bar = theta.numerator * table.n_records
        self.den = theta.denominator
        self.candidates: list[tuple[Population, Population]] = []
        self.stats: dict[Population, GroupStats] = {}
        self.cov_rows: dict[Population, np.ndarray] = {}

    def _record(self, upper: Population, lower: Population, idx: np.ndarray) -> None:
        self.candidates.append((upper, lower))
        if upper not in self.stats:
            with np.errstate(over="ignore"):
                h = int(self.hashes[idx].sum(dtype=np.uint64))
            self.stats[upper] = GroupStats(
                int(self.counts[idx].sum()),
                h,
                tuple(int(x) for x in self.positives[idx].sum(axis=0)),
                int(self.min_record[idx].min()),
            )
            self.cov_rows[upper] = idx

    def visit(self, s: Population, idx: np.ndarray, k: int) -> None:
        sub = self.rows[idx]
        if idx.shape[0] == 1:
            self._record(tuple(int(v) for v in sub[0]), s, idx)
            return
        first = sub[0]
        same = (sub == first).all(axis=0)
        upper = tuple(int(first[i]) if same[i] else s[i] for i in range(self.n))
        self._record(upper, s, idx)
        for h in range(k + 1, self.n):
            if upper[h] != WILDCARD:
                continue
            col = sub[:, h]
            order = np.argsort(col, kind="stable")
            sorted_col = col[order]
            starts = np.flatnonzero(np.r_[True, sorted_col[1:] != sorted_col[:-1]])
            ends = np.r_[starts[1:], len(order)]
            sizes = np.add.reduceat(self.counts[idx[order]], starts)
            for a, b, size in zip(starts, ends, sizes):
                if size * self.den >= self.bar:
                    child = s[:h] + (int(sorted_col[a]),) + s[h + 1 :]
                    self.visit(child, idx[order[a:b]], h)

    def root_children(self, s: Population, idx: np.ndarray):
        """Top-level branches as (child, rows, attr) for distribution to workers."""
        sub = self.rows[idx]
        out = []
        for h in range(self.n):
            col = sub[:, h]
            if (col == col[0]).all():
                continue
            for v in np.unique(col):
                child_idx = idx[col == v]
                if int(self.counts[child_idx].sum()) * self.den >= self.bar:
                    out.append((s[:h] + (int(v),) + s[h + 1 :], child_idx, h))
        return out


_worker_state: dict = {}


def _worker_init(table: BaseTable, theta: Fraction) -> None:
    _worker_state["walker_args"] = (table, theta)


def _worker_run(task):
    child, idx, h = task
    walker = _Walker(*_worker_state["walker_args"])
    walker.visit(child, idx, h)
    return walker.candidates, walker.stats, walker.cov_rows


def materialize_dfs(table: BaseTable, theta=0, workers: int = 1) -> MaterializationResult:
    theta = parse_theta(theta)
    N = table.n_records
    walker = _Walker(table, theta)
    start = root(table.n_attrs)
    if N == 0 or not keep(N, theta, N):
        return MaterializationResult({}, theta, N, id(table))
    all_rows = np.arange(table.compressed.rows.shape[0])
    if workers <= 1:
        walker.visit(start, all_rows, -1)
    else:
        sub = walker.rows[all_rows]
        first = sub[0]
        same = (sub == first).all(axis=0)
        upper = tuple(int(first[i]) if same[i] else WILDCARD for i in range(table.n_attrs))
        walker._record(upper, start, all_rows)
        tasks = [t for t in walker.root_children(start, all_rows) if upper[t[2]] == WILDCARD]
        with ProcessPoolExecutor(workers, initializer=_worker_init, initargs=(table, theta)) as ex:
            for cands, stats, cov_rows in ex.map(_worker_run, tasks):
                walker.candidates.extend(cands)
                for k, v in stats.items():
                    walker.stats.setdefault(k, v)
                    walker.cov_rows.setdefault(k, cov_rows[k])
    result = merge_and_refine(
        ((u, low, walker.stats[u]) for u, low in walker.candidates),
        theta,
        N,
        rows=walker.cov_rows,
    )
    result.table_ref = id(table)
    return result


# ---------------------------------------------------------------------------
# cache


def cache_key(path: str | Path, theta: Fraction, options: str = "") -> str:
    """File digest plus threshold; ``options`` folds in anything that changes the parsed table."""
    h = hashlib.sha256(Path(path).read_bytes())
    h.update(options.encode())
    digest = h.hexdigest()[:32]
    return f"{digest}-{theta.numerator}-{theta.denominator}"


def load_cached(cache_dir: str | Path, key: str) -> MaterializationResult | None:
    p = Path(cache_dir) / f"{key}.pkl"
    if not p.exists():
        return None
    with p.open("rb") as fh:
        return pickle.load(fh)


def store_cached(cache_dir: str | Path, key: str, result: MaterializationResult) -> None:
    Path(cache_dir).mkdir(parents=True, exist_ok=True)
    slim = MaterializationResult(result.groups, result.theta, result.n_records)
    with (Path(cache_dir) / f"{key}.pkl").open("wb") as fh:
        pickle.dump(slim, fh)
