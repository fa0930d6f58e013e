from fractions import Fraction

import numpy as np
import pytest

from helpers import ORACLE_SEEDS, THETAS, random_table, table1, table2
from paradoxcube.errors import GroupNotFound, ThetaOutOfRange, TooManyAttributes
from paradoxcube.lattice import coverage, enumerate_between, parse_population, render, root
from paradoxcube.materialize import (
    GroupStats,
    cache_key,
    keep,
    load_cached,
    materialize_bruteforce,
    materialize_dfs,
    merge_and_refine,
    parse_theta,
    store_cached,
)
from paradoxcube.synth import cartesian_table
from paradoxcube.table import BaseTable

# (upper, sorted lowers, coverage size, positives per label), from per-record enumeration
TABLE2_GROUPS = {
    ("(*,*,*,*)", ("(*,*,*,*)",), 7, (4, 4)),
    ("(*,b1,*,d1)", ("(*,*,*,d1)", "(*,b1,*,*)"), 4, (2, 2)),
    ("(*,b2,*,d2)", ("(*,*,*,d2)", "(*,b2,*,*)"), 3, (2, 2)),
    ("(a1,*,c1,*)", ("(*,*,c1,*)", "(a1,*,*,*)"), 3, (0, 0)),
    ("(a1,b1,c1,d1)", ("(*,*,c1,d1)", "(*,b1,c1,*)", "(a1,*,*,d1)", "(a1,b1,*,*)"), 2, (0, 0)),
    ("(a1,b2,c1,d2)", ("(*,*,c1,d2)", "(*,b2,c1,*)", "(a1,*,*,d2)", "(a1,b2,*,*)"), 1, (0, 0)),
    ("(a2,*,c2,*)", ("(*,*,c2,*)", "(a2,*,*,*)"), 4, (4, 4)),
    ("(a2,b1,c2,d1)", ("(*,*,c2,d1)", "(*,b1,c2,*)", "(a2,*,*,d1)", "(a2,b1,*,*)"), 2, (2, 2)),
    ("(a2,b2,c2,d2)", ("(*,*,c2,d2)", "(*,b2,c2,*)", "(a2,*,*,d2)", "(a2,b2,*,*)"), 2, (2, 2)),
}

# frozen totals of the brute-force route over the random oracle suite
ORACLE_GROUP_TOTALS = {"0": 4121, "0.1": 2856}


def rendered(t, mat):
    return {
        (render(t, g.upper), tuple(sorted(render(t, low) for low in g.lowers)), g.size, g.positives)
        for g in mat.groups.values()
    }


@pytest.mark.parametrize("route", [materialize_bruteforce, materialize_dfs])
def test_table2_groups_frozen(route):
    t = table2()
    assert rendered(t, route(t, 0)) == TABLE2_GROUPS


def test_table2_example_group_has_three_records():
    t = table2()
    g = materialize_dfs(t, 0).group_of(t, parse_population(t, "(a1,*,*,*)"))
    assert render(t, g.upper) == "(a1,*,c1,*)"
    assert coverage(t, g.upper).record_ids == (0, 1, 2)


def test_single_record_table_one_group():
    t = BaseTable.from_codes(np.array([[0, 1, 0]]), np.array([[1]]), [1, 2, 1])
    for route in (materialize_bruteforce, materialize_dfs):
        mat = route(t, 0)
        (g,) = mat.groups.values()
        assert g.upper == (0, 1, 0)
        assert g.lowers == (root(3),)


def test_theta_prunes_small_coverage():
    t = table1()
    c1 = parse_population(t, "(*,*,c1)")
    for route in (materialize_bruteforce, materialize_dfs):
        mat = route(t, "0.6")
        assert not any(g.contains(c1) for g in mat.groups.values())
        with pytest.raises(GroupNotFound):
            mat.group_of(t, c1)


@pytest.mark.parametrize("route", [materialize_bruteforce, materialize_dfs])
def test_theta_one_keeps_root_only(route):
    mat = route(table2(), 1)
    assert [g.upper for g in mat.groups.values()] == [root(4)]


def test_parse_theta():
    assert parse_theta("0.001") == Fraction(1, 1000)
    assert parse_theta("1/3") == Fraction(1, 3)
    for bad in ("-0.1", "1.5", "abc"):
        with pytest.raises(ThetaOutOfRange):
            parse_theta(bad)


def test_keep_is_exact():
    assert keep(1, Fraction(1, 1000), 1000)
    assert not keep(1, Fraction(1, 1000), 1001)
    assert not keep(0, Fraction(0), 10)


def test_bruteforce_attribute_guard():
    t = BaseTable.from_codes(np.zeros((1, 25), dtype=int), np.zeros((1, 1), dtype=int), [1] * 25)
    with pytest.raises(TooManyAttributes):
        materialize_bruteforce(t, 0)


def _stats(size):
    return GroupStats(size, 123, (0,), 0)


def test_merge_keeps_incomparable_lowers():
    up = (0, -1, 0, -1)
    res = merge_and_refine([(up, (0, -1, -1, -1), _stats(3)), (up, (-1, -1, 0, -1), _stats(3))])
    (g,) = res.groups.values()
    assert g.lowers == ((-1, -1, 0, -1), (0, -1, -1, -1))


def test_merge_single_candidate_is_identity():
    up, low = (0, 1), (0, -1)
    (g,) = merge_and_refine([(up, low, _stats(2))]).groups.values()
    assert (g.upper, g.lowers, g.size) == (up, (low,), 2)


def test_merge_drops_descendant_lower():
    up = (0, -1, 0, -1)
    res = merge_and_refine([(up, root(4), _stats(7)), (up, (0, -1, -1, -1), _stats(7))])
    (g,) = res.groups.values()
    assert g.lowers == (root(4),)


def test_oracle_group_totals_frozen():
    totals = {th: 0 for th in THETAS}
    for seed in ORACLE_SEEDS:
        t = random_table(seed)
        for th in THETAS:
            totals[th] += len(materialize_bruteforce(t, th).groups)
    assert totals == ORACLE_GROUP_TOTALS


def test_parallel_matches_serial():
    for seed in range(10):
        t = random_table(seed, max_records=60)
        assert materialize_dfs(t, 0, workers=2).group_set() == materialize_dfs(t, 0).group_set()


def test_cache_round_trip(tmp_path):
    src = tmp_path / "t.csv"
    src.write_text("A,Y\nx,1\n")
    t = table2()
    mat = materialize_dfs(t, 0)
    key = cache_key(src, mat.theta, "labels=Y")
    assert key != cache_key(src, mat.theta, "labels=Z")
    assert load_cached(tmp_path / "c", key) is None
    store_cached(tmp_path / "c", key, mat)
    assert load_cached(tmp_path / "c", key).group_set() == mat.group_set()


def test_cartesian_product_has_only_singleton_groups():
    t = cartesian_table(3, 3, m=1, seed=0)
    mat = materialize_dfs(t, 0)
    assert mat.group_set() == materialize_bruteforce(t, 0).group_set()
    for g in mat.groups.values():
        members = [p for low in g.lowers for p in enumerate_between(low, g.upper)]
        assert len(set(members)) == 1
    assert len(mat.groups) == 4**3


def test_json_export():
    t = table2()
    rows = materialize_dfs(t, 0).to_json(t)
    assert rows[0] == {
        "upper": "(*,*,*,*)",
        "lowers": ["(*,*,*,*)"],
        "coverage": 7,
        "fractions": {"Y1": "4/7", "Y2": "4/7"},
    }
