"""Perturbation harness measuring how often a paradox or a redundancy survives.

Every trial draws from its own stream seeded by ``(seed, trial)``, so a report
does not depend on trial order. Trials work on scratch copies of the covered
rows only; the canonical table is never written to.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor
from typing import Iterable

import numpy as np

from .errors import (
    EmptyPopulation,
    GroupHasNoSiblingPair,
    GroupHasSingleSeparator,
    InvalidConfiguration,
    InvalidValue,
)
from .lattice import render
from .materialize import materialize_dfs
from .paradox import AssocConfig, ParadoxGroup, discover, evaluate_ac, judge, validate_ac
from .table import WILDCARD, BaseTable

log = logging.getLogger(__name__)

KINDS = ("label", "coverage", "sibling_equiv", "separator_equiv")


@dataclass(frozen=True)
class PerturbConfig:
    fraction: Fraction = Fraction(1, 20)
    trials: int = 10_000
    seed: int = 0
    kind: str = "label"
    robust_threshold: Fraction = Fraction(19, 20)
    exact_count: bool = False  # coverage kind: assign positives by exact rounding instead of coin flips
    include_separators: bool = False  # separator kind: let the two separators themselves be altered

    def __post_init__(self):
        for name in ("fraction", "robust_threshold"):
            value = getattr(self, name)
            if isinstance(value, float):
                value = str(value)  # 0.05 means one twentieth, not its binary neighbour
            object.__setattr__(self, name, Fraction(value))
        if not 0 < self.fraction < 1:
            raise InvalidValue("perturbed fraction must lie strictly between 0 and 1")
        if self.trials < 1:
            raise InvalidValue("at least one trial is required")
        if self.kind not in KINDS:
            raise InvalidValue(f"unknown perturbation kind {self.kind!r}")

    def picks(self, pool: int) -> int:
        """Records to perturb out of ``pool``: the ceiling of the share, at least one."""
        if pool == 0:
            return 0
        return max(1, ceil(self.fraction * pool))

    def rng(self, trial: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, trial])


@dataclass(frozen=True)
class SurvivalReport:
    subject: str
    survived: int
    trials: int
    survival_rate: Fraction
    robust: bool

    def to_json(self) -> dict:
        return {
            "subject": self.subject,
            "survived": self.survived,
            "trials": self.trials,
            "survival_rate": str(self.survival_rate),
            "survival_pct": float(self.survival_rate) * 100,
            "robust": self.robust,
        }


def _report(subject: str, survived: int, cfg: PerturbConfig) -> SurvivalReport:
    rate = Fraction(survived, cfg.trials)
    return SurvivalReport(subject, survived, cfg.trials, rate, rate >= cfg.robust_threshold)


# ---------------------------------------------------------------------------
# single paradoxes


class _Cells:
    """Covered records of a configuration laid out for fast re-evaluation."""

    def __init__(self, table: BaseTable, ac: AssocConfig):
        validate_ac(table, ac)
        m1, m2 = table.match_mask(ac.s1), table.match_mask(ac.s2)
        if not m1.any() or not m2.any():
            raise EmptyPopulation("a sibling population has empty coverage")
        self.rows = np.flatnonzero(m1 | m2)
        self.side = m2[self.rows].astype(np.int64)
        self.sep = table.cat_data[self.rows, ac.sep].astype(np.int64)
        self.y = table.label_data[self.rows, ac.label].astype(np.int64)
        self.domain = table.dicts[ac.sep].cardinality

    def direction(self, sep: np.ndarray, y: np.ndarray) -> int:
        D = self.domain
        cell = self.side * D + sep
        cnt = np.bincount(cell, minlength=2 * D).reshape(2, D)
        pos = np.bincount(cell, weights=y, minlength=2 * D).astype(np.int64).reshape(2, D)
        n1, n2 = int(cnt[0].sum()), int(cnt[1].sum())
        p1, p2 = int(pos[0].sum()), int(pos[1].sum())
        agg = p1 * n2 - p2 * n1
        both = (cnt[0] > 0) & (cnt[1] > 0)
        diff = pos[0][both] * cnt[1][both] - pos[1][both] * cnt[0][both]
        return judge((agg > 0) - (agg < 0), [int(x) for x in np.sign(diff)])


def _original_direction(table: BaseTable, ac: AssocConfig) -> int:
    verdict = evaluate_ac(table, ac)
    if not verdict.is_paradox:
        raise InvalidConfiguration(f"{ac.render(table)} is not a paradox")
    return verdict.direction


def perturb_labels(table: BaseTable, ac: AssocConfig, cfg: PerturbConfig) -> SurvivalReport:
    """Flip the label of a share of the covered records and re-evaluate, per trial."""
    direction = _original_direction(table, ac)
    cells = _Cells(table, ac)
    k = cfg.picks(cells.rows.size)
    survived = 0
    for trial in range(cfg.trials):
        rng = cfg.rng(trial)
        y = cells.y.copy()
        chosen = rng.choice(cells.rows.size, size=k, replace=False)
        y[chosen] ^= 1
        survived += cells.direction(cells.sep, y) == direction
    return _report(ac.render(table), survived, cfg)


def perturb_coverage(table: BaseTable, ac: AssocConfig, cfg: PerturbConfig) -> SurvivalReport:
    """Move a share of the covered records to other separator values.

    Each moved record gets a fresh label drawn with the positive rate its
    destination sub-population had in the original data (its sibling's
    overall rate when that sub-population was empty).
    """
    direction = _original_direction(table, ac)
    cells = _Cells(table, ac)
    D = cells.domain
    cell = cells.side * D + cells.sep
    cnt = np.bincount(cell, minlength=2 * D)
    pos = np.bincount(cell, weights=cells.y, minlength=2 * D).astype(np.int64)
    rates = []
    for side in (0, 1):
        overall = Fraction(int(pos[side * D : (side + 1) * D].sum()), int(cnt[side * D : (side + 1) * D].sum()))
        rates.extend(
            Fraction(int(pos[side * D + v]), int(cnt[side * D + v])) if cnt[side * D + v] else overall
            for v in range(D)
        )
    float_rates = np.array([float(r) for r in rates])
    k = cfg.picks(cells.rows.size) if D > 1 else 0
    survived = 0
    for trial in range(cfg.trials):
        rng = cfg.rng(trial)
        sep, y = cells.sep.copy(), cells.y.copy()
        if k:
            chosen = rng.choice(cells.rows.size, size=k, replace=False)
            sep[chosen] = (sep[chosen] + rng.integers(1, D, size=k)) % D
            dest = cells.side[chosen] * D + sep[chosen]
            if cfg.exact_count:
                y[chosen] = _exact_positives(dest, rates, rng)
            else:
                y[chosen] = rng.random(k) < float_rates[dest]
        survived += cells.direction(sep, y) == direction
    return _report(ac.render(table), survived, cfg)


def _exact_positives(dest: np.ndarray, rates: list[Fraction], rng: np.random.Generator) -> np.ndarray:
    out = np.zeros(dest.size, dtype=np.int64)
    for c in np.unique(dest):
        at = np.flatnonzero(dest == c)
        n_pos = floor(rates[int(c)] * at.size + Fraction(1, 2))
        out[rng.permutation(at)[:n_pos]] = 1
    return out


# ---------------------------------------------------------------------------
# redundancy groups


def _group_name(table: BaseTable, g: ParadoxGroup) -> str:
    return f"{render(table, g.upE1)}~{render(table, g.upE2)}"


def designated_sibling_pairs(g: ParadoxGroup):
    """The most general and the most specific member pairs of the group."""
    pairs = g.sibling_pairs()
    if len(pairs) < 2:
        raise GroupHasNoSiblingPair("the group has a single sibling pair")

    def concrete(p):
        return sum(v != WILDCARD for v in p[0])

    pairs.sort(key=lambda p: (concrete(p), p))
    return pairs[0], pairs[-1]


def _alter(block: np.ndarray, chosen: np.ndarray, attrs: list[int], cards: list[int], rng) -> None:
    """Give each chosen row a different value in one uniformly drawn attribute."""
    which = rng.integers(0, len(attrs), size=chosen.size)
    for row, w in zip(chosen, which):
        a, d = attrs[w], cards[w]
        if d > 1:
            block[row, a] = (block[row, a] + rng.integers(1, d)) % d


def _mask(block: np.ndarray, pop) -> np.ndarray:
    ok = np.ones(block.shape[0], dtype=bool)
    for a, v in enumerate(pop):
        if v != WILDCARD:
            ok &= block[:, a] == v
    return ok


def perturb_group_sibling(table: BaseTable, g: ParadoxGroup, cfg: PerturbConfig) -> SurvivalReport:
    """Alter one attribute of a share of the covered records; count trials
    where the designated sibling-equivalent pairs keep identical coverages."""
    (a, b, _), (a2, b2, _) = designated_sibling_pairs(g)
    attrs = [i for i in range(table.n_attrs) if (a[i] == WILDCARD) != (a2[i] == WILDCARD) and i not in g.seps]
    if not attrs:
        raise GroupHasNoSiblingPair("no attribute distinguishes the designated pairs")
    cards = [table.dicts[i].cardinality for i in attrs]
    rows = np.flatnonzero(table.match_mask(a) | table.match_mask(b))
    base = table.cat_data[rows]
    k = cfg.picks(rows.size)
    survived = 0
    for trial in range(cfg.trials):
        rng = cfg.rng(trial)
        block = base.copy()
        chosen = rng.choice(rows.size, size=k, replace=False)
        _alter(block, chosen, attrs, cards, rng)
        # rows outside the original coverage are untouched, so comparing here is exact
        same = np.array_equal(_mask(block, a), _mask(block, a2)) and np.array_equal(
            _mask(block, b), _mask(block, b2)
        )
        survived += same
    return _report(_group_name(table, g), survived, cfg)


def separator_bijection(table: BaseTable, rows: np.ndarray, x: int, x2: int) -> dict[int, int] | None:
    """Value map from separator ``x`` to ``x2`` on the given records, if one exists."""
    mapping: dict[int, int] = {}
    for v, w in zip(table.cat_data[rows, x].tolist(), table.cat_data[rows, x2].tolist()):
        if mapping.setdefault(v, w) != w:
            return None
    if len(set(mapping.values())) != len(mapping):
        return None
    return mapping


def perturb_group_separator(table: BaseTable, g: ParadoxGroup, cfg: PerturbConfig) -> SurvivalReport:
    """Alter one attribute of a share of the covered records; count trials where
    the value map between two equivalent separators still aligns coverages."""
    seps = sorted(g.seps)
    if len(seps) < 2:
        raise GroupHasSingleSeparator("the group has a single separator")
    x, x2 = seps[0], seps[1]
    a, b = g.upE1, g.upE2
    rows = np.flatnonzero(table.match_mask(a) | table.match_mask(b))
    mapping = separator_bijection(table, rows, x, x2)
    if mapping is None:
        raise GroupHasSingleSeparator("the two separators are not aligned by a bijection")
    attrs = [i for i in range(table.n_attrs) if cfg.include_separators or i not in (x, x2)]
    cards = [table.dicts[i].cardinality for i in attrs]
    base = table.cat_data[rows]
    k = cfg.picks(rows.size)
    survived = 0
    for trial in range(cfg.trials):
        rng = cfg.rng(trial)
        block = base.copy()
        chosen = rng.choice(rows.size, size=k, replace=False)
        _alter(block, chosen, attrs, cards, rng)
        ok = True
        for s in (a, b):
            inside = _mask(block, s)
            for v, w in mapping.items():
                if not np.array_equal(inside & (block[:, x] == v), inside & (block[:, x2] == w)):
                    ok = False
                    break
            if not ok:
                break
        survived += ok
    return _report(_group_name(table, g), survived, cfg)


# ---------------------------------------------------------------------------
# dispatch and suites


def representative(g: ParadoxGroup) -> AssocConfig:
    """The group's founding paradox, or its upper-bound member."""
    if g.founder is not None:
        return g.founder
    return AssocConfig(g.upE1, g.upE2, min(g.seps), min(g.labels))


def run(table: BaseTable, subject, cfg: PerturbConfig) -> SurvivalReport:
    """Dispatch on ``cfg.kind``; ``subject`` is a configuration or a group."""
    if cfg.kind in ("label", "coverage"):
        ac = representative(subject) if isinstance(subject, ParadoxGroup) else subject
        fn = perturb_labels if cfg.kind == "label" else perturb_coverage
        return fn(table, ac, cfg)
    if not isinstance(subject, ParadoxGroup):
        raise InvalidValue(f"{cfg.kind} perturbation needs a redundancy group")
    fn = perturb_group_sibling if cfg.kind == "sibling_equiv" else perturb_group_separator
    return fn(table, subject, cfg)


def robust_share_by_theta(
    table: BaseTable, thetas: Iterable, cfg: PerturbConfig
) -> list[tuple[Fraction, int, int]]:
    """For each threshold: (theta, robust groups, groups), using label flips on representatives."""
    out = []
    for theta in thetas:
        mat = materialize_dfs(table, theta)
        groups = discover(table, mat)
        robust = sum(perturb_labels(table, representative(g), cfg).robust for g in groups)
        out.append((mat.theta, robust, len(groups)))
        log.info("theta %s: %d of %d groups robust", mat.theta, robust, len(groups))
    return out
