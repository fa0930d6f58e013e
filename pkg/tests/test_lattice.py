from fractions import Fraction

import pytest

from helpers import table1, table2, table3
from paradoxcube.errors import EmptyPopulation, IndexOutOfRange, InvalidValue, LengthMismatch, NotComparable
from paradoxcube.lattice import (
    Coverage,
    FreqStat,
    Relation,
    compare_stats,
    coverage,
    enumerate_between,
    freq_stat,
    members,
    parse_population,
    relation,
    render,
    root,
    substitute,
)


def pop(t, text):
    return parse_population(t, text)


def test_substitute_examples():
    t = table1()
    assert render(t, substitute(pop(t, "(a1,*,*)"), 1, 0)) == "(a1,b1,*)"
    s = pop(t, "(a1,b1,*)")
    assert substitute(s, 1, 0) == s
    assert render(t, substitute(root(3), 0, 1, t)) == "(a2,*,*)"
    with pytest.raises(IndexOutOfRange):
        substitute(s, 3, 0)
    with pytest.raises(InvalidValue):
        substitute(s, 0, 5, t)


def test_relation_examples():
    t = table1()
    assert relation(pop(t, "(a1,*,*)"), pop(t, "(a1,b1,*)")) is Relation.PARENT
    assert relation(pop(t, "(a1,b1,*)"), pop(t, "(a1,*,*)")) is Relation.CHILD
    assert relation(pop(t, "(a1,b1,*)"), pop(t, "(a1,b1,*)")) is Relation.EQUAL
    assert relation(pop(t, "(a1,b1,*)"), pop(t, "(a2,b2,*)")) is Relation.OTHER
    assert relation(pop(t, "(a1,b1,*)"), pop(t, "(a1,b2,*)")) is Relation.SIBLING
    assert relation(root(3), pop(t, "(a1,b1,*)")) is Relation.ANCESTOR
    assert relation(pop(t, "(a1,b1,c1)"), root(3)) is Relation.DESCENDANT
    with pytest.raises(LengthMismatch):
        relation(root(3), root(4))


def test_coverage_examples():
    t1, t2 = table1(), table2()
    assert coverage(t1, pop(t1, "(a1,b1,*)")).record_ids == (0, 1)
    assert coverage(t1, root(3)).record_ids == tuple(range(7))
    assert coverage(t2, pop(t2, "(a1,*,*,*)")).record_ids == (0, 1, 2)
    assert len(coverage(t1, pop(t1, "(a1,*,c2)"))) == 0


def test_freq_stat_examples():
    t1, t3 = table1(), table3()
    assert freq_stat(t1, coverage(t1, pop(t1, "(*,b1,*)")), 0).fraction == Fraction(2, 4)
    assert str(freq_stat(t1, coverage(t1, pop(t1, "(a1,*,*)")), 0)) == "0/3"
    assert freq_stat(t3, coverage(t3, pop(t3, "(*,b1,*,*)")), 0) == FreqStat(2, 6)
    with pytest.raises(EmptyPopulation):
        freq_stat(t1, Coverage(()), 0)


def test_freq_stat_validation():
    with pytest.raises(EmptyPopulation):
        FreqStat(0, 0)
    with pytest.raises(InvalidValue):
        FreqStat(3, 2)


def test_compare_stats_examples():
    assert compare_stats(FreqStat(2, 4), FreqStat(2, 3)) == -1
    assert compare_stats(FreqStat(2, 3), FreqStat(2, 3)) == 0
    assert compare_stats(FreqStat(1, 2), FreqStat(0, 5)) == 1
    assert compare_stats(FreqStat(1, 2), FreqStat(2, 4)) == 0


def test_enumerate_between_examples():
    t = table2()
    got = enumerate_between(pop(t, "(*,b1,*,*)"), pop(t, "(*,b1,*,d1)"))
    assert [render(t, s) for s in got] == ["(*,b1,*,*)", "(*,b1,*,d1)"]
    s = pop(t, "(a1,b1,*,*)")
    assert enumerate_between(s, s) == [s]
    assert len(enumerate_between(root(4), pop(t, "(a1,*,c1,*)"))) == 4
    with pytest.raises(NotComparable):
        enumerate_between(pop(t, "(a2,*,*,*)"), pop(t, "(a1,*,c1,*)"))


def test_members_deduplicates():
    t = table2()
    lowers = [pop(t, "(*,b1,*,*)"), pop(t, "(*,*,*,d1)")]
    got = members(lowers, pop(t, "(*,b1,*,d1)"))
    assert len(got) == 3


def test_render_parse_round_trip():
    t = table2()
    for text in ("(*,*,*,*)", "(a1,b2,*,d1)", "(a2,b1,c2,d2)"):
        assert render(t, parse_population(t, text)) == text
    with pytest.raises(InvalidValue):
        parse_population(t, "(a9,*,*,*)")
    with pytest.raises(LengthMismatch):
        parse_population(t, "(a1,*)")
