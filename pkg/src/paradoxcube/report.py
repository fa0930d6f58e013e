"""JSON-ready summaries of discovery runs."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import InvalidValue
from .lattice import render
from .paradox import AssocConfig, ParadoxGroup, reconstruct_members
from .table import BaseTable

SCHEMA = "sp-report/1"

# Published Adult counts, printed beside a run for manual comparison.
REFERENCE_ADULT_COUNTS = {
    "paradoxes": 3880,
    "groups": 3460,
    "standalone": 3094,
    "sibling_child": 366,
    "separator": 0,
    "statistic": 0,
}
COUNT_KEYS = tuple(REFERENCE_ADULT_COUNTS)


@dataclass
class DiscoveryReport:
    counts: dict[str, int]
    timing: dict[str, float]
    groups: list[dict] = field(default_factory=list)

    def __post_init__(self):
        c = self.counts
        if not c["paradoxes"] >= c["groups"] >= c["standalone"]:
            raise InvalidValue(f"inconsistent counts {c}")


def group_payload(
    table: BaseTable, g: ParadoxGroup, gid: int, emit_members: bool = False
) -> dict:
    members = reconstruct_members(g)
    kinds = g.kinds()
    out = {
        "id": gid,
        "upE1": render(table, g.upE1),
        "lowE1": [render(table, p) for p in g.lowE1],
        "upE2": render(table, g.upE2),
        "lowE2": [render(table, p) for p in g.lowE2],
        "seps": sorted(table.attr_names[i] for i in g.seps),
        "labels": sorted(table.label_names[j] for j in g.labels),
        "direction": g.direction,
        "coverage": [g.e1_size, g.e2_size],
        "members": len(members),
        "kinds": kinds,
    }
    if emit_members:
        out["paradoxes"] = [ac.render(table) for ac in sorted(members)]
    return out


def summarize_groups(
    table: BaseTable,
    groups: Sequence[ParadoxGroup],
    timing: dict[str, float],
    emit_members: bool = False,
) -> DiscoveryReport:
    payload = [group_payload(table, g, i, emit_members) for i, g in enumerate(groups)]
    counts = {
        "paradoxes": sum(p["members"] for p in payload),
        "groups": len(payload),
        "standalone": sum(p["kinds"]["standalone"] for p in payload),
        "sibling_child": sum(p["kinds"]["sibling_child"] for p in payload),
        "separator": sum(p["kinds"]["separator"] for p in payload),
        "statistic": sum(p["kinds"]["statistic"] for p in payload),
    }
    return DiscoveryReport(counts, timing, payload)


def summarize_paradoxes(
    table: BaseTable,
    found: Sequence[tuple[AssocConfig, object]],
    timing: dict[str, float],
    emit_members: bool = False,
) -> dict:
    """Flat report for the brute-force route, which does not group."""
    out = {"counts": {"paradoxes": len(found)}, "timing": timing}
    if emit_members:
        out["paradoxes"] = [ac.render(table) for ac, _ in found]
    return out


def member_histogram(member_counts: Iterable[int]) -> list[dict]:
    """Number of groups per group size, ascending by size."""
    hist = Counter(member_counts)
    return [{"members": k, "groups": hist[k]} for k in sorted(hist)]


def compare_block(counts: dict[str, int], reference: dict[str, int] = REFERENCE_ADULT_COUNTS) -> str:
    """Two-column text table of measured counts next to reference counts."""
    lines = [f"{'count':<14}{'this run':>12}{'reference':>12}"]
    for key in COUNT_KEYS:
        lines.append(f"{key:<14}{counts.get(key, 0):>12,}{reference[key]:>12,}")
    return "\n".join(lines)


def redundant_share(counts: dict[str, int]) -> Fraction:
    """Share of paradoxes that live in a group with more than one member."""
    total = counts["paradoxes"]
    if total == 0:
        return Fraction(0)
    return Fraction(total - counts["standalone"], total)
