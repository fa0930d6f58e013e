"""Shared fixtures data for the test modules."""

from pathlib import Path

import numpy as np

from paradoxcube.table import BaseTable, load_csv

DATA = Path(__file__).parent / "data"


def table1() -> BaseTable:
    return load_csv(DATA / "table1.csv", ["Y1"])


def table2() -> BaseTable:
    return load_csv(DATA / "table2.csv", ["Y1", "Y2"])


def table3() -> BaseTable:
    return load_csv(DATA / "table3.csv", ["Y1", "Y2", "Y3", "Y4"])


def random_table(seed: int, max_attrs: int = 4, max_card: int = 3, max_records: int = 40) -> BaseTable:
    """Small random table: 2..max_attrs attributes, 2..max_card values, 1..max_records rows."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_attrs + 1))
    cards = [int(c) for c in rng.integers(2, max_card + 1, size=n)]
    N = int(rng.integers(1, max_records + 1))
    m = int(rng.integers(1, 3))
    cat = np.stack([rng.integers(0, c, size=N) for c in cards], axis=1)
    labels = rng.integers(0, 2, size=(N, m))
    return BaseTable.from_codes(cat, labels, cards)


ORACLE_SEEDS = range(120)
THETAS = ("0", "0.1")


def plant_table(cells, scale: int = 1, twins: bool = False) -> BaseTable:
    """Two siblings of attribute B split by a two-valued separator A.

    ``cells[sibling][sep_value] = (records, positives)``. With ``twins`` the
    columns C and D copy A and B, planting separator and sibling equivalence.
    """
    cat, lab = [], []
    for sib, row in enumerate(cells):
        for v, (n, p) in enumerate(row):
            cat += [[v, sib]] * (n * scale)
            lab += [[1]] * (p * scale) + [[0]] * ((n - p) * scale)
    cat = np.array(cat)
    if twins:
        return BaseTable.from_codes(np.concatenate([cat, cat], axis=1), np.array(lab), [2, 2, 2, 2])
    return BaseTable.from_codes(np.concatenate([cat, np.zeros_like(cat[:, :1])], axis=1), np.array(lab), [2, 2, 1])


# every sub-population margin is at least ten records
WIDE_CELLS = (((300, 90), (100, 90)), ((100, 10), (300, 210)))
# both sub-population leads rest on a single record
THIN_CELLS = (((300, 91), (100, 91)), ((100, 30), (300, 270)))
# a 100-record plant, scaled for coverage-size sweeps
UNIT_CELLS = (((35, 7), (15, 14)), ((15, 1), (35, 28)))
