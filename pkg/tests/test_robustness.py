from fractions import Fraction

import numpy as np
import pytest

from helpers import THIN_CELLS, UNIT_CELLS, WIDE_CELLS, plant_table, table2
from paradoxcube.errors import (
    EmptyPopulation,
    GroupHasNoSiblingPair,
    GroupHasSingleSeparator,
    InvalidConfiguration,
    InvalidValue,
)
from paradoxcube.materialize import materialize_dfs
from paradoxcube.paradox import AssocConfig, discover, evaluate_ac
from paradoxcube.robustness import (
    PerturbConfig,
    _Cells,
    designated_sibling_pairs,
    perturb_coverage,
    perturb_group_separator,
    perturb_group_sibling,
    perturb_labels,
    representative,
    robust_share_by_theta,
    run,
    separator_bijection,
)
from paradoxcube.table import BaseTable

PLANT = AssocConfig((-1, 0, -1), (-1, 1, -1), 0, 0)


def only_group(t):
    (g,) = discover(t, materialize_dfs(t, 0))
    return g


def test_config_validation_and_rounding():
    cfg = PerturbConfig(fraction=0.05)
    assert cfg.fraction == Fraction(1, 20)
    assert (cfg.picks(0), cfg.picks(1), cfg.picks(20), cfg.picks(21)) == (0, 1, 1, 2)
    for bad in ({"fraction": 0}, {"fraction": 1}, {"trials": 0}, {"kind": "shuffle"}):
        with pytest.raises(InvalidValue):
            PerturbConfig(**bad)


def test_fast_verdict_agrees_with_evaluator():
    t = plant_table(THIN_CELLS)
    cells = _Cells(t, PLANT)
    rng = np.random.default_rng(5)
    for _ in range(40):
        y = cells.y.copy()
        sep = cells.sep.copy()
        flip = rng.choice(y.size, size=25, replace=False)
        y[flip] ^= 1
        sep[flip[:10]] ^= 1
        cat = t.cat_data.copy()
        lab = t.label_data.copy()
        cat[cells.rows, 0] = sep
        lab[cells.rows, 0] = y
        copy = BaseTable(t.attr_names, t.label_names, t.dicts, cat, lab)
        assert cells.direction(sep, y) == evaluate_ac(copy, PLANT).direction


def test_wide_and_thin_label_survival():
    cfg = PerturbConfig(trials=2000, seed=11)
    wide = perturb_labels(plant_table(WIDE_CELLS), PLANT, cfg)
    thin = perturb_labels(plant_table(THIN_CELLS), PLANT, cfg)
    assert wide.robust and wide.survived == wide.trials
    assert not thin.robust


def test_single_flip_on_large_coverage_survives():
    t = plant_table(WIDE_CELLS, scale=12)
    r = perturb_labels(t, PLANT, PerturbConfig(fraction=Fraction(1, 10**6), trials=300, seed=2))
    assert r.survival_rate == 1


def test_coverage_perturbation_wide_and_thin():
    cfg = PerturbConfig(kind="coverage", trials=2000, seed=4)
    assert perturb_coverage(plant_table(WIDE_CELLS), PLANT, cfg).robust
    assert not perturb_coverage(plant_table(THIN_CELLS), PLANT, cfg).robust
    exact = PerturbConfig(kind="coverage", trials=500, seed=4, exact_count=True)
    assert perturb_coverage(plant_table(WIDE_CELLS), PLANT, exact).robust


def test_single_valued_separator_cannot_hold_a_paradox():
    # one separator value means the lone sub-population is the aggregate
    t = plant_table(WIDE_CELLS)
    with pytest.raises(InvalidConfiguration):
        perturb_coverage(t, AssocConfig((-1, 0, -1), (-1, 1, -1), 2, 0), PerturbConfig(kind="coverage", trials=5))


def test_determinism_and_table_untouched():
    t = plant_table(THIN_CELLS)
    before = t.checksum()
    for kind in ("label", "coverage"):
        cfg = PerturbConfig(kind=kind, trials=300, seed=9)
        assert run(t, PLANT, cfg) == run(t, PLANT, cfg)
    assert t.checksum() == before


def test_trial_streams_do_not_depend_on_count():
    a = PerturbConfig(seed=3).rng(7).integers(0, 1 << 30, size=4)
    b = PerturbConfig(seed=3, trials=99).rng(7).integers(0, 1 << 30, size=4)
    assert (a == b).all()


def test_non_paradox_subject_rejected():
    t = table2()
    with pytest.raises(InvalidConfiguration):
        perturb_labels(t, AssocConfig((0, -1, -1, -1), (1, -1, -1, -1), 1, 0), PerturbConfig(trials=5))
    empty = AssocConfig((-1, 0, -1), (-1, 1, -1), 0, 0)
    one_sided = BaseTable.from_codes(np.array([[0, 0, 0]]), np.array([[1]]), [2, 2, 1])
    with pytest.raises(EmptyPopulation):
        perturb_labels(one_sided, empty, PerturbConfig(trials=5))


def test_table2_group_perturbations():
    t = table2()
    g = only_group(t)
    before = t.checksum()
    cfg = dict(trials=1000, seed=1)
    sib = perturb_group_sibling(t, g, PerturbConfig(kind="sibling_equiv", **cfg))
    assert sib.survival_rate < Fraction(19, 20)
    untouched = perturb_group_separator(t, g, PerturbConfig(kind="separator_equiv", **cfg))
    assert untouched.survival_rate == 1
    touched = perturb_group_separator(t, g, PerturbConfig(kind="separator_equiv", include_separators=True, **cfg))
    assert touched.survival_rate < 1
    assert t.checksum() == before


def test_designated_pairs_span_the_group():
    g = only_group(table2())
    general, specific = designated_sibling_pairs(g)
    assert general != specific
    assert {general, specific} <= set(g.sibling_pairs())


def test_singleton_group_errors():
    base = plant_table(WIDE_CELLS)
    # a noisy third column leaves every sibling population its own coverage
    noise = np.random.default_rng(0).integers(0, 2, size=base.n_records)
    cat = np.concatenate([base.cat_data[:, :2], noise[:, None]], axis=1)
    t = BaseTable.from_codes(cat, base.label_data, [2, 2, 2])
    (g,) = [g for g in discover(t, materialize_dfs(t, 0)) if g.founder == PLANT]
    with pytest.raises(GroupHasNoSiblingPair):
        perturb_group_sibling(t, g, PerturbConfig(kind="sibling_equiv", trials=5))
    with pytest.raises(GroupHasSingleSeparator):
        perturb_group_separator(t, g, PerturbConfig(kind="separator_equiv", trials=5))
    with pytest.raises(InvalidValue):
        run(t, PLANT, PerturbConfig(kind="sibling_equiv", trials=5))
    assert representative(g) == PLANT


def test_separator_bijection():
    t = plant_table(UNIT_CELLS, twins=True)
    rows = np.arange(t.n_records)
    assert separator_bijection(t, rows, 0, 2) == {0: 0, 1: 1}
    assert separator_bijection(t, rows, 0, 1) is None


def test_sibling_survival_does_not_grow_with_coverage():
    rates = []
    for scale in (1, 10, 100):
        t = plant_table(UNIT_CELLS, scale=scale, twins=True)
        g = only_group(t)
        rates.append(perturb_group_sibling(t, g, PerturbConfig(kind="sibling_equiv", trials=100, seed=0)).survival_rate)
    print("sibling survival by coverage size 100/1000/10000:", [str(r) for r in rates])
    assert rates == sorted(rates, reverse=True)


def _two_plant_suite():
    """A large robust plant beside a ten-record fragile one that theta prunes."""
    big = plant_table(WIDE_CELLS, scale=10)
    small = np.array([[0, 2]] * 4 + [[1, 2]] + [[0, 3]] + [[1, 3]] * 4)
    small_y = np.array([1, 0, 0, 0, 1, 0, 1, 1, 1, 0])
    cat = np.concatenate([big.cat_data[:, :2], small])
    prefix = np.concatenate([np.zeros(big.n_records, int), np.ones(len(small), int)])
    cat = np.concatenate([cat, prefix[:, None]], axis=1)
    labels = np.concatenate([big.label_data[:, 0], small_y])[:, None]
    return BaseTable.from_codes(cat, labels, [2, 4, 2])


def test_robust_share_grows_with_theta_on_constructed_suite():
    t = _two_plant_suite()
    fragile = AssocConfig((-1, 2, 1), (-1, 3, 1), 0, 0)
    assert evaluate_ac(t, fragile).is_paradox
    rows = robust_share_by_theta(t, ["0", "0.001", "0.01"], PerturbConfig(trials=300, seed=0))
    shares = [Fraction(r, n) if n else Fraction(1) for _, r, n in rows]
    print("robust share by theta:", [(str(th), r, n) for th, r, n in rows])
    assert shares == sorted(shares)
    assert shares[0] < shares[-1]
