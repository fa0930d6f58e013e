"""Simpson's paradox evaluation, signatures and redundancy-aware discovery.

An association configuration ``(s1, s2, sep, label)`` compares two sibling
populations on a binary label, both overall and inside each value of the
separator attribute. It is a paradox when the overall comparison points one
way while every sub-population comparison points the other way (ties
allowed on either side, provided at least one side is strict everywhere).

Paradoxes that share coverage and sign structure are redundant. Discovery
groups them by a signature of coverage hashes and comparison signs, and
stores each group as upper and lower bounds of two coverage groups plus the
sets of separators and labels that realise it.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyPopulation,
    GroupNotFound,
    HashCollision,
    IndexOutOfRange,
    InvalidConfiguration,
    LengthMismatch,
    SeparatorEqualsDifferential,
    SignatureMismatch,
)
from .lattice import FreqStat, Population, compare_stats, differential_attr, members, render
from .materialize import (
    CoverageGroup,
    MaterializationResult,
    _all_population_stats,
    keep,
)
from .table import WILDCARD, BaseTable, hash_ids


@dataclass(frozen=True, order=True)
class AssocConfig:
    s1: Population
    s2: Population
    sep: int
    label: int

    @property
    def differential(self) -> int:
        d = differential_attr(self.s1, self.s2)
        if d is None:
            raise InvalidConfiguration(f"{self.s1} and {self.s2} are not siblings")
        return d

    def swapped(self) -> "AssocConfig":
        return AssocConfig(self.s2, self.s1, self.sep, self.label)

    def render(self, table: BaseTable) -> str:
        return (
            f"({render(table, self.s1)}, {render(table, self.s2)}, "
            f"{table.attr_names[self.sep]}, {table.label_names[self.label]})"
        )


@dataclass(frozen=True)
class ParadoxVerdict:
    is_paradox: bool
    direction: int  # +1: s1 >= s2 overall, s1 <= s2 within; -1 mirrored; 0 when no paradox
    aggregate_sign: int
    sub_signs: tuple[tuple[int, int], ...]  # (separator value, sign)
    skipped_values: tuple[int, ...]
    aggregate: tuple[FreqStat, FreqStat] | None = field(default=None, compare=False)


@dataclass(frozen=True, order=True)
class JointSig:
    cov1_hash: int
    cov2_hash: int
    sign: int


@dataclass(frozen=True)
class Signature:
    top: JointSig
    subs: tuple[JointSig, ...]


@dataclass
class ParadoxGroup:
    upE1: Population
    lowE1: tuple[Population, ...]
    upE2: Population
    lowE2: tuple[Population, ...]
    seps: set[int]
    labels: set[int]
    signature: Signature
    direction: int
    e1_size: int = 0
    e2_size: int = 0
    e1_positives: tuple[int, ...] = ()
    e2_positives: tuple[int, ...] = ()
    founder: AssocConfig | None = field(default=None, compare=False, repr=False)

    def sort_key(self):
        return (self.upE1, self.upE2, self.lowE1, self.lowE2, sorted(self.seps), sorted(self.labels))

    def sibling_pairs(self) -> list[tuple[Population, Population, int]]:
        """Cross pairs of E1 and E2 members that are siblings, with their differential."""
        m2 = set(members(self.lowE2, self.upE2))
        out = []
        for a in members(self.lowE1, self.upE1):
            for i, v in enumerate(a):
                w = self.upE2[i]
                if v == WILDCARD or w == WILDCARD or v == w:
                    continue
                b = a[:i] + (w,) + a[i + 1 :]
                if b in m2:
                    out.append((a, b, i))
        return out

    def member_count(self) -> int:
        return len(reconstruct_members(self))

    def kinds(self) -> dict[str, bool]:
        n = self.member_count()
        return {
            "sibling_child": len(self.sibling_pairs()) > 1,
            "separator": len(self.seps) > 1,
            "statistic": len(self.labels) > 1,
            "standalone": n == 1,
        }


# ---------------------------------------------------------------------------
# verdicts


def judge(aggregate_sign: int, sub_signs: Sequence[int]) -> int:
    """Direction of the paradox given the comparison signs, or 0 if none.

    Only the separator values where both sides are non-empty are passed in.
    """
    if not sub_signs:
        return 0
    if aggregate_sign >= 0 and max(sub_signs) <= 0:
        if aggregate_sign > 0 or max(sub_signs) < 0:
            return 1
    if aggregate_sign <= 0 and min(sub_signs) >= 0:
        if aggregate_sign < 0 or min(sub_signs) > 0:
            return -1
    return 0


def validate_ac(table: BaseTable, ac: AssocConfig) -> int:
    """Check structural validity and return the differential attribute."""
    n = table.n_attrs
    if len(ac.s1) != n or len(ac.s2) != n:
        raise LengthMismatch("population length differs from attribute count")
    if not 0 <= ac.sep < n:
        raise IndexOutOfRange(f"separator {ac.sep} outside 0..{n - 1}")
    if not 0 <= ac.label < table.m_labels:
        raise IndexOutOfRange(f"label {ac.label} outside 0..{table.m_labels - 1}")
    diff = differential_attr(ac.s1, ac.s2)
    if diff is None:
        raise InvalidConfiguration("the two populations are not siblings")
    if diff == ac.sep:
        raise SeparatorEqualsDifferential(
            f"{table.attr_names[ac.sep]} is both separator and differential attribute"
        )
    if ac.s1[ac.sep] != WILDCARD:
        raise InvalidConfiguration(f"separator {table.attr_names[ac.sep]} is fixed in the siblings")
    return diff


def evaluate_ac(table: BaseTable, ac: AssocConfig, strict_empty: bool = False) -> ParadoxVerdict:
    """Evaluate a configuration directly against the records.

    With ``strict_empty`` a separator value populated on only one side makes
    the configuration a non-paradox instead of being skipped.
    """
    validate_ac(table, ac)
    m1, m2 = table.match_mask(ac.s1), table.match_mask(ac.s2)
    if not m1.any() or not m2.any():
        raise EmptyPopulation("a sibling population has empty coverage")
    y = table.label_data[:, ac.label].astype(np.int64)
    sep = table.cat_data[:, ac.sep]
    agg1 = FreqStat(int(y[m1].sum()), int(m1.sum()))
    agg2 = FreqStat(int(y[m2].sum()), int(m2.sum()))
    agg = compare_stats(agg1, agg2)
    subs, skipped = [], []
    for v in np.unique(sep[m1 | m2]):
        a, b = m1 & (sep == v), m2 & (sep == v)
        if not a.any() or not b.any():
            skipped.append(int(v))
            continue
        subs.append(
            (int(v), compare_stats(FreqStat(int(y[a].sum()), int(a.sum())), FreqStat(int(y[b].sum()), int(b.sum()))))
        )
    direction = judge(agg, [s for _, s in subs])
    if strict_empty and skipped:
        direction = 0
    return ParadoxVerdict(direction != 0, direction, agg, tuple(subs), tuple(skipped), (agg1, agg2))


def canonical(table: BaseTable, ac: AssocConfig) -> AssocConfig:
    """Orient the pair so that s1 covers the smallest record id of the two."""
    i1 = np.flatnonzero(table.match_mask(ac.s1))
    i2 = np.flatnonzero(table.match_mask(ac.s2))
    if not i1.size or not i2.size:
        raise EmptyPopulation("a sibling population has empty coverage")
    return ac if i1[0] < i2[0] else ac.swapped()


def compute_signature(table: BaseTable, ac: AssocConfig) -> Signature:
    """Signature of the configuration after canonical orientation."""
    validate_ac(table, ac)
    ac = canonical(table, ac)
    m1, m2 = table.match_mask(ac.s1), table.match_mask(ac.s2)
    y = table.label_data[:, ac.label].astype(np.int64)
    sep = table.cat_data[:, ac.sep]

    def joint(a, b):
        st1 = FreqStat(int(y[a].sum()), int(a.sum()))
        st2 = FreqStat(int(y[b].sum()), int(b.sum()))
        return JointSig(hash_ids(np.flatnonzero(a)), hash_ids(np.flatnonzero(b)), compare_stats(st1, st2))

    subs = []
    for v in np.unique(sep[m1 | m2]):
        a, b = m1 & (sep == v), m2 & (sep == v)
        if a.any() and b.any():
            subs.append(joint(a, b))
    return Signature(joint(m1, m2), tuple(sorted(subs)))


def _exact_signature(table: BaseTable, ac: AssocConfig) -> tuple:
    """Like :func:`compute_signature` but with explicit record sets instead of hashes."""
    ac = canonical(table, ac)
    m1, m2 = table.match_mask(ac.s1), table.match_mask(ac.s2)
    y = table.label_data[:, ac.label].astype(np.int64)
    sep = table.cat_data[:, ac.sep]

    def joint(a, b):
        d = int(y[a].sum()) * int(b.sum()) - int(y[b].sum()) * int(a.sum())
        return (tuple(np.flatnonzero(a)), tuple(np.flatnonzero(b)), (d > 0) - (d < 0))

    subs = [joint(m1 & (sep == v), m2 & (sep == v)) for v in np.unique(sep[m1 | m2])]
    subs = sorted(s for s in subs if s[0] and s[1])
    return joint(m1, m2), tuple(subs)


def statistic_case(table: BaseTable, ac: AssocConfig, other_label: int) -> int:
    """Strongest statistic-equivalence condition linking ``ac`` to ``other_label``.

    Returns 1 when the two labels agree record by record on the covered
    records, 2 when their frequencies agree on both siblings and on every
    non-empty sub-population, 3 when only the comparison signs agree, and 0
    when none of these hold.
    """
    validate_ac(table, ac)
    m1, m2 = table.match_mask(ac.s1), table.match_mask(ac.s2)
    y = table.label_data[:, ac.label].astype(np.int64)
    z = table.label_data[:, other_label].astype(np.int64)
    sep = table.cat_data[:, ac.sep]
    if np.array_equal(y[m1 | m2], z[m1 | m2]):
        return 1
    cells = [(m1, m2)] + [(m1 & (sep == v), m2 & (sep == v)) for v in np.unique(sep[m1 | m2])]
    same_freq = all(
        y[mask].sum() == z[mask].sum() for pair in cells for mask in pair if mask.any()
    )
    if same_freq:
        return 2

    def sign(lab, a, b):
        d = int(lab[a].sum()) * int(b.sum()) - int(lab[b].sum()) * int(a.sum())
        return (d > 0) - (d < 0)

    if all(sign(y, a, b) == sign(z, a, b) for a, b in cells if a.any() and b.any()):
        return 3
    return 0


# ---------------------------------------------------------------------------
# brute-force discovery


def discover_bruteforce(
    table: BaseTable, mat: MaterializationResult, strict_empty: bool = False
) -> list[tuple[AssocConfig, ParadoxVerdict]]:
    """Evaluate every configuration whose parent population is materialized."""
    if mat.population_index is not None:
        index, arrays = mat.population_index, mat.population_arrays
    else:
        index, *rest = _all_population_stats(table)
        arrays = tuple(rest)
    counts, positives, _hashes, min_record = arrays
    N, n, m = table.n_records, table.n_attrs, table.m_labels
    card = table.cardinalities
    theta = mat.theta

    def lookup(pop):
        return index.get(pop)

    found = []
    for g in mat.ordered():
        for s in g.members():
            wild = [i for i in range(n) if s[i] == WILDCARD]
            for i in wild:
                kids = []
                for v in range(card[i]):
                    c = s[:i] + (v,) + s[i + 1 :]
                    k = lookup(c)
                    if k is not None and keep(int(counts[k]), theta, N):
                        kids.append((c, k))
                for (c1, k1), (c2, k2) in combinations(kids, 2):
                    if min_record[k2] < min_record[k1]:
                        (c1, k1), (c2, k2) = (c2, k2), (c1, k1)
                    for j in wild:
                        if j == i:
                            continue
                        cells = []
                        for w in range(card[j]):
                            a = lookup(c1[:j] + (w,) + c1[j + 1 :])
                            b = lookup(c2[:j] + (w,) + c2[j + 1 :])
                            if a is not None or b is not None:
                                cells.append((w, a, b))
                        for y in range(m):
                            agg1 = FreqStat(int(positives[k1, y]), int(counts[k1]))
                            agg2 = FreqStat(int(positives[k2, y]), int(counts[k2]))
                            agg = compare_stats(agg1, agg2)
                            subs, skipped = [], []
                            for w, a, b in cells:
                                if a is None or b is None:
                                    skipped.append(w)
                                    continue
                                subs.append(
                                    (
                                        w,
                                        compare_stats(
                                            FreqStat(int(positives[a, y]), int(counts[a])),
                                            FreqStat(int(positives[b, y]), int(counts[b])),
                                        ),
                                    )
                                )
                            direction = judge(agg, [sg for _, sg in subs])
                            if strict_empty and skipped:
                                direction = 0
                            if direction:
                                found.append(
                                    (
                                        AssocConfig(c1, c2, j, y),
                                        ParadoxVerdict(
                                            True, direction, agg, tuple(subs), tuple(skipped), (agg1, agg2)
                                        ),
                                    )
                                )
    found.sort(key=lambda item: item[0])
    return found


# ---------------------------------------------------------------------------
# group construction


def _group_from(
    e1: CoverageGroup, e2: CoverageGroup, ac: AssocConfig, sig: Signature, direction: int
) -> ParadoxGroup:
    return ParadoxGroup(
        e1.upper,
        e1.lowers,
        e2.upper,
        e2.lowers,
        {ac.sep},
        {ac.label},
        sig,
        direction,
        e1.size,
        e2.size,
        e1.positives,
        e2.positives,
        founder=ac,
    )


def construct_by_sibling(
    table: BaseTable,
    p: AssocConfig,
    mat: MaterializationResult,
    signature: Signature | None = None,
    direction: int | None = None,
) -> ParadoxGroup:
    """New group whose bounds are the coverage groups of the two siblings."""
    p = canonical(table, p)
    e1, e2 = mat.group_of(table, p.s1), mat.group_of(table, p.s2)
    if signature is None:
        signature = compute_signature(table, p)
    if direction is None:
        direction = evaluate_ac(table, p).direction
    return _group_from(e1, e2, p, signature, direction)


def extend_by_sep_stat(g: ParadoxGroup, p2: AssocConfig, signature: Signature) -> ParadoxGroup:
    """Add the separator and label of a signature-equal paradox to ``g``."""
    if signature != g.signature:
        raise SignatureMismatch("paradox signature differs from the group's")
    g.seps.add(p2.sep)
    g.labels.add(p2.label)
    return g


def reconstruct_members(g: ParadoxGroup) -> set[AssocConfig]:
    out = set()
    for a, b, diff in g.sibling_pairs():
        for sep in g.seps:
            if sep == diff or a[sep] != WILDCARD:
                continue
            for label in g.labels:
                out.add(AssocConfig(a, b, sep, label))
    return out


# ---------------------------------------------------------------------------
# redundancy-aware discovery


class _Discoverer:
    def __init__(self, table: BaseTable, mat: MaterializationResult, strict_empty: bool, verify: bool):
        self.table = table
        self.mat = mat
        self.strict_empty = strict_empty
        self.verify = verify
        c = table.compressed
        self.rows = c.rows
        self.counts = c.counts
        self.positives = c.positives
        self.hashes = c.hashes
        self.min_record = c.min_record
        self.card = table.cardinalities
        self.n, self.m, self.N = table.n_attrs, table.m_labels, table.n_records
        self.theta = mat.theta
        self.by_sig: dict[Signature, ParadoxGroup] = {}
        self.by_pair: dict[tuple[int, int], list[ParadoxGroup]] = defaultdict(list)
        self.exact: dict[Signature, tuple] = {}

    def group_rows(self, g: CoverageGroup) -> np.ndarray:
        if g.rows is not None:
            return g.rows
        mask = np.ones(self.rows.shape[0], dtype=bool)
        for i, v in enumerate(g.upper):
            if v != WILDCARD:
                mask &= self.rows[:, i] == v
        return np.flatnonzero(mask)

    def child_group(self, h: int, pop: Population) -> CoverageGroup:
        g = self.mat.groups.get(h)
        if g is None:
            raise GroupNotFound(f"child population {pop} is missing from the materialization")
        if not g.contains(pop):
            raise HashCollision(f"coverage hash {h:#x} maps to a group not containing {pop}")
        return g

    def run(self) -> list[ParadoxGroup]:
        for g in self.mat.ordered():
            if g.size >= 2:
                self.scan(g)
        return sorted(self.by_sig.values(), key=ParadoxGroup.sort_key)

    def scan(self, g: CoverageGroup) -> None:
        u = g.upper
        idx = self.group_rows(g)
        wild = [i for i in range(self.n) if u[i] == WILDCARD]
        if len(wild) < 2:
            return
        sub = self.rows[idx]
        cnt = self.counts[idx]
        pos = self.positives[idx]
        hsh = self.hashes[idx]
        mrec = self.min_record[idx]
        for i in wild:
            col_i = sub[:, i].astype(np.int64)
            order = np.argsort(col_i, kind="stable")
            sc = col_i[order]
            starts = np.flatnonzero(np.r_[True, sc[1:] != sc[:-1]])
            values = sc[starts]
            sizes = np.add.reduceat(cnt[order], starts)
            ok = np.array([keep(int(x), self.theta, self.N) for x in sizes], dtype=bool)
            if ok.sum() < 2:
                continue
            with np.errstate(over="ignore"):
                child_hash = np.add.reduceat(hsh[order], starts)
            child_min = np.minimum.reduceat(mrec[order], starts)
            valid = values[ok]
            vhash = {int(v): int(h) for v, h in zip(values[ok], child_hash[ok])}
            vmin = {int(v): int(x) for v, x in zip(values[ok], child_min[ok])}
            first, second = [], []
            for a, b in combinations(valid.tolist(), 2):
                if vmin[b] < vmin[a]:
                    a, b = b, a
                first.append(a)
                second.append(b)
            first = np.array(first)
            second = np.array(second)
            Di = self.card[i]
            for j in wild:
                if j == i:
                    continue
                self.scan_pairs(u, i, j, col_i, sub[:, j].astype(np.int64), cnt, pos, hsh, Di, first, second, vhash)

    def scan_pairs(self, u, i, j, col_i, col_j, cnt, pos, hsh, Di, first, second, vhash):
        Dj = self.card[j]
        key = col_i * Dj + col_j
        size = Di * Dj
        C = np.bincount(key, weights=cnt, minlength=size).astype(np.int64).reshape(Di, Dj)
        P = np.stack(
            [np.bincount(key, weights=pos[:, y], minlength=size) for y in range(self.m)]
        ).astype(np.int64).reshape(self.m, Di, Dj)
        Ca, Cb = C[first], C[second]
        Pa, Pb = P[:, first], P[:, second]
        both = (Ca > 0) & (Cb > 0)
        S = np.sign(Pa * Cb - Pb * Ca)
        CA, CB = Ca.sum(axis=1), Cb.sum(axis=1)
        PA, PB = Pa.sum(axis=2), Pb.sum(axis=2)
        agg = np.sign(PA * CB - PB * CA)
        has = both.any(axis=1)
        smax = np.where(both, S, -2).max(axis=2)
        smin = np.where(both, S, 2).min(axis=2)
        plus = has & (agg >= 0) & (smax <= 0) & ((agg > 0) | (smax == -1))
        minus = has & (agg <= 0) & (smin >= 0) & ((agg < 0) | (smin == 1))
        hits = plus | minus
        if self.strict_empty:
            hits &= ~((Ca > 0) ^ (Cb > 0)).any(axis=1)
        if not hits.any():
            return
        cell_hash = None
        for y, p in zip(*np.nonzero(hits)):
            y = int(y)
            a, b = int(first[p]), int(second[p])
            ha, hb = vhash[a], vhash[b]
            if any(j in G.seps and y in G.labels for G in self.by_pair.get((ha, hb), ())):
                continue
            if cell_hash is None:
                cell_hash = np.zeros(size, dtype=np.uint64)
                order = np.argsort(key, kind="stable")
                sk = key[order]
                starts = np.flatnonzero(np.r_[True, sk[1:] != sk[:-1]])
                with np.errstate(over="ignore"):
                    cell_hash[sk[starts]] = np.add.reduceat(hsh[order], starts)
                cell_hash = cell_hash.reshape(Di, Dj)
            ws = np.flatnonzero(both[p])
            subs = tuple(
                sorted(JointSig(int(cell_hash[a, w]), int(cell_hash[b, w]), int(S[y, p, w])) for w in ws)
            )
            sig = Signature(JointSig(ha, hb, int(agg[y, p])), subs)
            s1 = u[:i] + (a,) + u[i + 1 :]
            s2 = u[:i] + (b,) + u[i + 1 :]
            ac = AssocConfig(s1, s2, j, int(y))
            direction = 1 if plus[y, p] else -1
            G = self.by_sig.get(sig)
            if G is None:
                e1, e2 = self.child_group(ha, s1), self.child_group(hb, s2)
                G = _group_from(e1, e2, ac, sig, direction)
                self.by_sig[sig] = G
                self.by_pair[(ha, hb)].append(G)
                if self.verify:
                    self.exact[sig] = _exact_signature(self.table, ac)
            else:
                if self.verify and _exact_signature(self.table, ac) != self.exact[sig]:
                    raise HashCollision("signature match between different record sets")
                extend_by_sep_stat(G, ac, sig)


def discover(
    table: BaseTable,
    mat: MaterializationResult,
    strict_empty: bool = False,
    verify_hashes: bool = False,
) -> list[ParadoxGroup]:
    """Find all paradoxes, grouped into redundancy classes.

    Only upper bounds of coverage groups are used as parents; every other
    member of a class is implied by the stored bounds.
    """
    return _Discoverer(table, mat, strict_empty, verify_hashes).run()


def all_members(groups: Iterable[ParadoxGroup]) -> set[AssocConfig]:
    out: set[AssocConfig] = set()
    for g in groups:
        out |= reconstruct_members(g)
    return out


def group_fraction(positives: tuple[int, ...], size: int, label: int) -> Fraction:
    return Fraction(positives[label], size)
