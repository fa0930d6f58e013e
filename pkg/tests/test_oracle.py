"""Brute-force oracle comparisons over a fixed suite of small random tables."""

import time

from helpers import ORACLE_SEEDS, THETAS, random_table
from paradoxcube.materialize import materialize_bruteforce, materialize_dfs
from paradoxcube.paradox import all_members, compute_signature, discover, discover_bruteforce, reconstruct_members

# frozen paradox totals of the brute-force route, keyed by (theta, strict_empty)
PARADOX_TOTALS = {("0", False): 1792, ("0", True): 129, ("0.1", False): 734, ("0.1", True): 109}


def test_materialization_routes_agree():
    start = time.perf_counter()
    for seed in ORACLE_SEEDS:
        t = random_table(seed)
        for theta in THETAS:
            assert materialize_dfs(t, theta).group_set() == materialize_bruteforce(t, theta).group_set(), (seed, theta)
    assert time.perf_counter() - start < 30


def test_discovery_routes_agree():
    start = time.perf_counter()
    totals = dict.fromkeys(PARADOX_TOTALS, 0)
    for seed in ORACLE_SEEDS:
        t = random_table(seed)
        for theta in THETAS:
            for strict in (False, True):
                found = discover_bruteforce(t, materialize_bruteforce(t, theta), strict_empty=strict)
                totals[(theta, strict)] += len(found)
                groups = discover(t, materialize_dfs(t, theta), strict_empty=strict)
                assert all_members(groups) == {p for p, _ in found}, (seed, theta, strict)
                # members of one group share a signature, and no signature spans two groups
                owners = {}
                for i, g in enumerate(groups):
                    for p in reconstruct_members(g):
                        owners.setdefault(compute_signature(t, p), set()).add(i)
                assert all(len(v) == 1 for v in owners.values())
                assert len(owners) == len(groups)
    assert totals == PARADOX_TOTALS
    assert time.perf_counter() - start < 60
