"""Synthetic tables with planted paradoxes and planted redundancy.

Each plant picks a parent population (a random prefix over the attributes
that play no role in the plant), a differential attribute with two sibling
values, and a separator. Sub-population frequencies follow an interleaved
pattern where the first sibling wins inside every separator value; the
sibling sample distributions over the separator are then chosen (by a small
quadratic program) so that the second sibling wins overall.

Redundancy is realised on top of that:

* sibling: a twin attribute is set to a fixed image of the differential value,
  so a second sibling pair has identical coverage;
* separator: a twin attribute is set to a bijection of the separator value;
* statistic: every other label is a copy of the planted label.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from itertools import product
from math import floor
from typing import Sequence

import numpy as np

from .errors import (
    AttributeCollision,
    BadPattern,
    DomainSizeMismatch,
    DomainTooSmall,
    Infeasible,
    LabelIndexInvalid,
    SpecInfeasible,
)
from .lattice import Population
from .paradox import AssocConfig, evaluate_ac
from .table import WILDCARD, BaseTable, default_attr_names

log = logging.getLogger(__name__)

RATIONAL_DENOMINATOR = 10**6


@dataclass(frozen=True)
class SynthSpec:
    n_attrs: int
    m_labels: int
    domain_size: int
    paradox_size: int = 100
    target_unique: int = 256
    seed: int = 0
    enable_sibling: bool = True
    enable_separator: bool = True
    enable_statistic: bool = True
    margin: Fraction = Fraction(1, 100)
    max_attempts: int = 5000

    def roles_needed(self) -> int:
        return 2 + self.enable_sibling + self.enable_separator

    def validate(self) -> None:
        if self.domain_size < 2:
            raise DomainTooSmall("domain size must be at least 2")
        if self.n_attrs < 3:
            raise SpecInfeasible("at least three attributes are required")
        if self.roles_needed() > self.n_attrs:
            raise SpecInfeasible(
                f"{self.roles_needed()} role attributes needed but only {self.n_attrs} exist"
            )
        if self.m_labels < 1 or (self.enable_statistic and self.m_labels < 2):
            raise SpecInfeasible("statistic redundancy needs at least two labels")
        if self.target_unique * 4 > self.domain_size**self.n_attrs:
            raise SpecInfeasible("target unique count must be at most a quarter of the domain product")


@dataclass
class PlantedParadox:
    ac: AssocConfig
    sub_freqs: tuple[tuple[Fraction, ...], tuple[Fraction, ...]]
    sample_dists: tuple[tuple[Fraction, ...], tuple[Fraction, ...]]
    planted_equivalents: list[AssocConfig] = field(default_factory=list)
    parent: Population = ()
    twin_attr: int | None = None
    twin_values: tuple[int, int] | None = None

    def expected(self) -> list[AssocConfig]:
        return [self.ac] + list(self.planted_equivalents)

    def to_json(self, table: BaseTable) -> dict:
        return {
            "paradox": self.ac.render(table),
            "equivalents": [e.render(table) for e in self.planted_equivalents],
            "sub_freqs": [[str(x) for x in p] for p in self.sub_freqs],
            "sample_dists": [[str(x) for x in q] for q in self.sample_dists],
        }


@dataclass
class Batch:
    cat: np.ndarray  # (k, n) value ids
    labels: np.ndarray  # (k, m) bits
    plan: PlantedParadox


# ---------------------------------------------------------------------------
# frequency pattern and sample distributions


def make_sub_freqs(dX: int) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
    """Interleaved sub-population frequencies ``P2[k] < P1[k] < P2[k+1]``."""
    if dX < 2:
        raise DomainTooSmall("the separator needs at least two values")
    step = 2 * dX + 1
    p2 = tuple(Fraction(2 * k + 1, step) for k in range(dX))
    p1 = tuple(Fraction(2 * k + 2, step) for k in range(dX))
    return p1, p2


def _check_pattern(p1: Sequence[Fraction], p2: Sequence[Fraction]) -> None:
    if len(p1) != len(p2) or len(p1) < 2:
        raise BadPattern("frequency sequences must have equal length of at least two")
    if not all(0 < x < 1 for x in (*p1, *p2)):
        raise BadPattern("frequencies must lie strictly between 0 and 1")
    if not all(a > b for a, b in zip(p1, p2)):
        raise BadPattern("the first sibling must win inside every separator value")


def _project_simplex(v: np.ndarray, floor_: float) -> np.ndarray:
    """Euclidean projection onto ``{x : x >= floor_, sum(x) = 1}``."""
    n = v.shape[0]
    total = 1.0 - n * floor_
    w = v - floor_
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, n + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    return np.maximum(w - tau, 0.0) + floor_


def _rationalize(q: np.ndarray) -> tuple[Fraction, ...]:
    scaled = [max(1, int(round(x * RATIONAL_DENOMINATOR))) for x in q]
    scaled[int(np.argmax(scaled))] += RATIONAL_DENOMINATOR - sum(scaled)
    return tuple(Fraction(s, RATIONAL_DENOMINATOR) for s in scaled)


def _gap(q1, q2, p1, p2):
    return sum(a * b for a, b in zip(q2, p2)) - sum(a * b for a, b in zip(q1, p1))


def qp_objective(q1: Sequence, q2: Sequence) -> Fraction:
    """Squared distance of both distributions to uniform."""
    d = len(q1)
    u = Fraction(1, d)
    return sum((Fraction(x) - u) ** 2 for x in q1) + sum((Fraction(x) - u) ** 2 for x in q2)


def verify_sample_dists(q1, q2, p1, p2, margin: Fraction) -> bool:
    """Exact check of simplex membership, positivity and the reversal margin."""
    return (
        all(x > 0 for x in (*q1, *q2))
        and sum(q1) == 1
        and sum(q2) == 1
        and _gap(q1, q2, p1, p2) >= margin
    )


@lru_cache(maxsize=64)
def solve_sample_dists(
    p1: Sequence[Fraction], p2: Sequence[Fraction], margin: Fraction = Fraction(1, 100)
) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
    """Distributions closest to uniform for which the second sibling wins overall.

    Minimises ``|Q1 - u|^2 + |Q2 - u|^2`` over pairs of simplex vectors with
    entries bounded away from zero, subject to ``Q2.P2 - Q1.P1 >= margin``.
    Relaxing the single linear constraint with a multiplier ``lam`` turns the
    inner problem into two simplex projections, and the constraint value is
    monotone in ``lam``, so bisection on ``lam`` finds the optimum. The
    result is rationalised and re-verified exactly; on failure the margin is
    halved, at most eight times.
    """
    _check_pattern(p1, p2)
    d = len(p1)
    fp1 = np.array([float(x) for x in p1])
    fp2 = np.array([float(x) for x in p2])
    uniform = np.full(d, 1.0 / d)
    floor_ = 1.0 / (8 * d)
    margin = Fraction(margin)
    for _ in range(9):
        target = float(margin) + 4.0 / RATIONAL_DENOMINATOR

        def at(lam):
            q1 = _project_simplex(uniform - lam / 2 * fp1, floor_)
            q2 = _project_simplex(uniform + lam / 2 * fp2, floor_)
            return q1, q2, float(q2 @ fp2 - q1 @ fp1)

        q1, q2, g = at(0.0)
        if g < target:
            hi = 1.0
            while at(hi)[2] < target and hi < 1e9:
                hi *= 2
            lo = 0.0
            for _ in range(200):
                mid = (lo + hi) / 2
                if at(mid)[2] >= target:
                    hi = mid
                else:
                    lo = mid
            q1, q2, g = at(hi)
        r1, r2 = _rationalize(q1), _rationalize(q2)
        if verify_sample_dists(r1, r2, p1, p2, margin):
            return r1, r2
        margin /= 2
    raise Infeasible("no sample distributions satisfy the reversal constraint")


# ---------------------------------------------------------------------------
# record emission


def _largest_remainder(total: int, weights: Sequence[Fraction]) -> list[int]:
    exact = [total * Fraction(w) for w in weights]
    base = [floor(x) for x in exact]
    rest = total - sum(base)
    order = sorted(range(len(exact)), key=lambda k: (-(exact[k] - base[k]), k))
    for k in order[:rest]:
        base[k] += 1
    # every cell must be populated
    for k in range(len(base)):
        while base[k] == 0:
            big = max(range(len(base)), key=lambda i: base[i])
            base[big] -= 1
            base[k] += 1
    return base


def _round_half_up(x: Fraction) -> int:
    return floor(x + Fraction(1, 2))


def _is_planted_paradox(c1, pos1, c2, pos2) -> bool:
    subs_ok = all(a * d > b * c for a, c, b, d in zip(pos1, c1, pos2, c2))
    agg_ok = sum(pos1) * sum(c2) < sum(pos2) * sum(c1)
    return subs_ok and agg_ok


def plan_counts(plan: PlantedParadox, U: int) -> tuple[list[int], list[int], list[int], list[int]]:
    """Per-cell record and positive counts for both siblings, nudged until valid."""
    (p1, p2), (q1, q2) = plan.sub_freqs, plan.sample_dists
    c1, c2 = _largest_remainder(U, q1), _largest_remainder(U, q2)
    pos1 = [_round_half_up(c * p) for c, p in zip(c1, p1)]
    pos2 = [_round_half_up(c * p) for c, p in zip(c2, p2)]
    for _ in range(4 * U + 20):
        if _is_planted_paradox(c1, pos1, c2, pos2):
            return c1, pos1, c2, pos2
        broken = [k for k in range(len(c1)) if pos1[k] * c2[k] <= pos2[k] * c1[k]]
        if broken:
            k = broken[0]
            if pos1[k] < c1[k]:
                pos1[k] += 1
            elif pos2[k] > 0:
                pos2[k] -= 1
            else:
                break
            continue
        # aggregate not reversed: spend sub-population slack, widest lead first
        def lead(k):
            return Fraction(pos1[k], c1[k]) - Fraction(pos2[k], c2[k])

        for k in sorted(range(len(c1)), key=lambda k: -lead(k)):
            if pos1[k] > 0 and (pos1[k] - 1) * c2[k] > pos2[k] * c1[k]:
                pos1[k] -= 1
                break
            if pos2[k] < c2[k] and pos1[k] * c2[k] > (pos2[k] + 1) * c1[k]:
                pos2[k] += 1
                break
        else:
            break
    raise Infeasible("rounding could not be repaired into a paradox")


def emit_paradox_records(
    spec: SynthSpec,
    plan: PlantedParadox,
    rng: np.random.Generator,
) -> Batch:
    """Materialise a plan as records; only plan-relevant columns are set.

    Prefix slots of the parent are copied, the differential and separator
    columns enumerate the cells, and every other column is left at 0 for the
    realisation steps (or the caller) to overwrite.
    """
    U = spec.paradox_size
    d = len(plan.sub_freqs[0])
    if U < 4 * d:
        log.info("raising paradox size from %d to %d", U, 4 * d)
        U = 4 * d
    margin = Fraction(spec.margin)
    while True:
        try:
            c1, pos1, c2, pos2 = plan_counts(plan, U)
            break
        except Infeasible:
            # small cells: rounding swamps a thin aggregate gap, so widen it
            margin *= 2
            if margin > Fraction(1, 2):
                raise
            plan.sample_dists = solve_sample_dists(*plan.sub_freqs, margin)
    ac = plan.ac
    diff, sep = ac.differential, ac.sep
    rows, labels = [], []
    m = spec.m_labels
    for sib, counts, positives in ((ac.s1, c1, pos1), (ac.s2, c2, pos2)):
        base = [0 if v == WILDCARD else v for v in sib]
        for k, (c, p) in enumerate(zip(counts, positives)):
            row = list(base)
            row[sep] = k
            bits = np.zeros(c, dtype=np.uint8)
            bits[rng.permutation(c)[:p]] = 1
            cell = np.zeros((c, m), dtype=np.uint8)
            cell[:, ac.label] = bits
            for other in range(m):
                if other != ac.label:
                    cell[:, other] = rng.integers(0, 2, size=c)
            rows.extend([row] * c)
            labels.append(cell)
    assert all(r[diff] in (ac.s1[diff], ac.s2[diff]) for r in rows)
    return Batch(np.array(rows, dtype=np.int32), np.concatenate(labels), plan)


def realize_sibling_equiv(
    batch: Batch,
    twin_attr: int,
    mapping: dict[int, int],
    parent_shift: dict[int, int] | None = None,
) -> Batch:
    """Give a second sibling pair the coverage of the planted pair.

    ``mapping`` sends each planted differential value to a value of
    ``twin_attr``; every batch record gets ``twin_attr`` rewritten through it.
    ``parent_shift`` optionally pins further attributes on all batch records,
    which aligns a shifted parent with the planted one.
    """
    plan = batch.plan
    ac = plan.ac
    diff = ac.differential
    if twin_attr == ac.sep:
        raise AttributeCollision("the twin attribute is the separator")
    cat = batch.cat.copy()
    if parent_shift:
        for attr, v in parent_shift.items():
            if attr in (diff, ac.sep, twin_attr):
                raise AttributeCollision("a parent shift cannot touch a role attribute")
            cat[:, attr] = v
    if twin_attr == diff:
        if any(k != v for k, v in mapping.items()):
            raise AttributeCollision("the twin attribute is the differential attribute")
        return Batch(cat, batch.labels, plan)
    u1, u2 = ac.s1[diff], ac.s2[diff]
    if mapping[u1] == mapping[u2]:
        raise AttributeCollision("the sibling mapping must be one-to-one")
    cat[:, twin_attr] = np.where(cat[:, diff] == u1, mapping[u1], mapping[u2])
    parent = list(ac.s1)
    parent[diff] = WILDCARD
    if parent_shift:
        for attr, v in parent_shift.items():
            parent[attr] = v
    t1 = list(parent)
    t1[twin_attr] = mapping[u1]
    t2 = list(parent)
    t2[twin_attr] = mapping[u2]
    plan.planted_equivalents.append(AssocConfig(tuple(t1), tuple(t2), ac.sep, ac.label))
    plan.twin_attr = twin_attr
    plan.twin_values = (mapping[u1], mapping[u2])
    return Batch(cat, batch.labels, plan)


def realize_separator_equiv(batch: Batch, sep2: int, bijection: Sequence[int]) -> Batch:
    """Rewrite ``sep2`` as a bijective image of the planted separator."""
    plan = batch.plan
    ac = plan.ac
    if sep2 == ac.sep:
        if any(i != v for i, v in enumerate(bijection)):
            raise DomainSizeMismatch("a non-identity bijection onto the separator itself")
        return batch
    if sorted(bijection) != list(range(len(bijection))):
        raise DomainSizeMismatch("the separator mapping is not a bijection")
    if int(batch.cat[:, ac.sep].max()) >= len(bijection):
        raise DomainSizeMismatch("the separator domain exceeds the mapping")
    if sep2 == ac.differential or (plan.twin_attr is not None and sep2 == plan.twin_attr):
        raise AttributeCollision("the second separator is already a role attribute")
    cat = batch.cat.copy()
    cat[:, sep2] = np.asarray(bijection)[cat[:, ac.sep]]
    plan.planted_equivalents.append(AssocConfig(ac.s1, ac.s2, sep2, ac.label))
    return Batch(cat, batch.labels, plan)


def realize_statistic_equiv(batch: Batch, label2: int) -> Batch:
    """Make ``label2`` an exact copy of the planted label on the batch."""
    plan = batch.plan
    ac = plan.ac
    if not 0 <= label2 < batch.labels.shape[1]:
        raise LabelIndexInvalid(f"label {label2} does not exist")
    if label2 == ac.label:
        return batch
    labels = batch.labels.copy()
    labels[:, label2] = labels[:, ac.label]
    plan.planted_equivalents.append(AssocConfig(ac.s1, ac.s2, ac.sep, label2))
    return Batch(batch.cat, labels, plan)


# ---------------------------------------------------------------------------
# full workflow


@dataclass
class _Territory:
    prefix_attrs: list[int]
    prefix_vals: np.ndarray
    diff: int
    pair: tuple[int, int]
    twin: int | None
    twin_vals: tuple[int, int] | None

    def keys(self) -> set[tuple]:
        """A record lies inside the territory iff it shares one of these keys."""
        prefix = tuple(int(v) for v in self.prefix_vals)
        out = {(prefix, "diff", v) for v in self.pair}
        if self.twin is not None:
            out |= {(prefix, "twin", v) for v in self.twin_vals}
        return out

    def record_keys(self, cat: np.ndarray) -> set[tuple]:
        """Keys of the given records under this territory's role layout."""
        out = set()
        for row in np.unique(cat, axis=0):
            prefix = tuple(int(row[a]) for a in self.prefix_attrs)
            out.add((prefix, "diff", int(row[self.diff])))
            if self.twin is not None:
                out.add((prefix, "twin", int(row[self.twin])))
        return out


def _territories(spec: SynthSpec, n_prefix: int, rng: np.random.Generator):
    """Yield (prefix values, pair index) slots in a seeded random order, without repeats."""
    d = spec.domain_size
    n_pairs = d // 2
    capacity = d**n_prefix * n_pairs
    if capacity <= 200_000:
        slots = list(product(range(d**n_prefix), range(n_pairs)))
        for k in rng.permutation(len(slots)):
            code, pair = slots[k]
            yield np.array(np.unravel_index(code, (d,) * n_prefix), dtype=np.int64).reshape(-1), pair
        return
    used = set()
    for _ in range(spec.max_attempts):
        vals = rng.integers(0, d, size=n_prefix)
        pair = int(rng.integers(0, n_pairs))
        key = (vals.tobytes(), pair)
        if key not in used:
            used.add(key)
            yield vals, pair


def generate(spec: SynthSpec) -> tuple[BaseTable, list[PlantedParadox]]:
    """Plant paradoxes until the table holds ``target_unique`` distinct records.

    One role layout (differential, separator, twins, prefix attributes) is
    drawn per table. Each plant then takes a fresh prefix value and one of
    the disjoint value pairs of the differential attribute, so sibling
    coverages of different plants never overlap.
    """
    spec.validate()
    n, m, d = spec.n_attrs, spec.m_labels, spec.domain_size
    rng = np.random.default_rng(spec.seed)
    cat_parts: list[np.ndarray] = []
    label_parts: list[np.ndarray] = []
    claimed: set[tuple] = set()  # keys of every emitted record
    fenced: set[tuple] = set()  # keys of every accepted territory
    plans: list[PlantedParadox] = []
    seen: set[bytes] = set()
    p1, p2 = make_sub_freqs(d)
    q1, q2 = solve_sample_dists(p1, p2, spec.margin)

    roles = [int(a) for a in rng.permutation(n)]
    diff, sep = roles[0], roles[1]
    rest = roles[2:]
    twin = rest.pop(0) if spec.enable_sibling else None
    sep2 = rest.pop(0) if spec.enable_separator else None
    prefix_attrs = sorted(rest)
    perm = [int(x) for x in rng.permutation(d)]
    diff_pairs = [(perm[2 * k], perm[2 * k + 1]) for k in range(d // 2)]
    perm = [int(x) for x in rng.permutation(d)]
    twin_pairs = [(perm[2 * k], perm[2 * k + 1]) for k in range(d // 2)]

    slots = _territories(spec, len(prefix_attrs), rng)
    while len(seen) < spec.target_unique:
        slot = next(slots, None)
        if slot is None:
            raise SpecInfeasible(
                f"territory exhausted at {len(seen)} of {spec.target_unique} unique records"
            )
        prefix_vals, k = slot
        u1, u2 = diff_pairs[k]
        twin_vals = twin_pairs[k] if twin is not None else None
        terr = _Territory(prefix_attrs, prefix_vals, diff, (u1, u2), twin, twin_vals)
        own = terr.keys()
        if own & claimed:
            continue
        parent = [WILDCARD] * n
        for a, v in zip(prefix_attrs, prefix_vals):
            parent[a] = int(v)
        s1 = list(parent)
        s1[diff] = u1
        s2 = list(parent)
        s2[diff] = u2
        label = int(rng.integers(0, m))
        plan = PlantedParadox(
            AssocConfig(tuple(s1), tuple(s2), sep, label), (p1, p2), (q1, q2), parent=tuple(parent)
        )
        batch = emit_paradox_records(spec, plan, rng)
        if twin is not None:
            batch = realize_sibling_equiv(batch, twin, {u1: twin_vals[0], u2: twin_vals[1]})
        if sep2 is not None:
            batch = realize_separator_equiv(batch, sep2, [int(x) for x in rng.permutation(d)])
        if spec.enable_statistic:
            for other in range(m):
                if other != label:
                    batch = realize_statistic_equiv(batch, other)
        emitted = terr.record_keys(batch.cat)
        if emitted & fenced:
            continue
        claimed |= emitted
        fenced |= own
        plans.append(plan)
        cat_parts.append(batch.cat)
        label_parts.append(batch.labels)
        full = np.concatenate([batch.cat.astype(np.int64), batch.labels.astype(np.int64)], axis=1)
        for row in np.unique(full, axis=0):
            seen.add(row.tobytes())
    cat = np.concatenate(cat_parts) if cat_parts else np.zeros((0, n), np.int32)
    labels = np.concatenate(label_parts) if label_parts else np.zeros((0, m), np.uint8)
    table = BaseTable.from_codes(cat, labels, [d] * n)
    verified = [p for p in plans if verify_plant(table, p)]
    if len(verified) != len(plans):
        log.warning("dropped %d plants that failed verification", len(plans) - len(verified))
    return table, verified


def verify_plant(table: BaseTable, plan: PlantedParadox) -> bool:
    """Planted paradox and all its planted equivalents hold on ``table``."""
    try:
        verdicts = [evaluate_ac(table, ac) for ac in plan.expected()]
    except Exception:  # an empty or invalid configuration means the plant broke
        return False
    return all(v.is_paradox for v in verdicts) and len({v.direction for v in verdicts}) == 1


def unique_records(table: BaseTable) -> int:
    full = np.concatenate([table.cat_data, table.label_data.astype(np.int32)], axis=1)
    return int(np.unique(full, axis=0).shape[0]) if full.shape[0] else 0


def with_label_copies(table: BaseTable, m: int) -> BaseTable:
    """Same records with the first label repeated into ``m`` label columns."""
    labels = np.repeat(table.label_data[:, :1], m, axis=1)
    return BaseTable(
        table.attr_names,
        tuple(f"Y{j + 1}" for j in range(m)),
        table.dicts,
        table.cat_data,
        labels,
    )


def with_extra_attributes(table: BaseTable, n: int, domain_size: int, seed: int) -> BaseTable:
    """Append random categorical columns until the table has ``n`` attributes.

    Existing populations keep their coverage, so no existing paradox can
    disappear.
    """
    extra = n - table.n_attrs
    if extra <= 0:
        return table
    rng = np.random.default_rng(seed)
    new_cols = rng.integers(0, domain_size, size=(table.n_records, extra))
    cat = np.concatenate([table.cat_data, new_cols.astype(np.int32)], axis=1)
    cards = list(table.cardinalities) + [domain_size] * extra
    names = default_attr_names(n)
    return BaseTable.from_codes(cat, table.label_data, cards, attr_names=names, label_names=table.label_names)


def cartesian_table(n: int, d: int, m: int = 1, seed: int = 0) -> BaseTable:
    """Every combination of ``n`` attributes over ``d`` values exactly once."""
    grids = np.meshgrid(*[np.arange(d)] * n, indexing="ij")
    cat = np.stack([g.reshape(-1) for g in grids], axis=1)
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=(cat.shape[0], m))
    return BaseTable.from_codes(cat, labels, [d] * n)


def describe_plants(table: BaseTable, plans: Sequence[PlantedParadox]) -> list[dict]:
    return [p.to_json(table) for p in plans]

