import json
import math
from pathlib import Path

import pytest

from rabi_xtalk.core import ChipTopology
from rabi_xtalk.learning import ChipFitReport, PairFitResult
from rabi_xtalk.report import (
    DirectionColor,
    Tier,
    beta_theta_csv,
    build_graph,
    export_graph,
    load_graph,
    pen_width,
    summary,
    tier_for,
)

GOLDEN = Path(__file__).parent / "data" / "golden_crosstalk.dot"


def reference_report():
    """Hand-built 4-qubit fit report exercising every tier and both directions."""
    entries = {
        (0, 1): (0.02, 0.5),
        (0, 2): (0.05, -1.0),
        (0, 3): (0.1, 2.0),
        (1, 0): (0.1000001, 0.25),
        (1, 2): (0.25, -3.0),
        (2, 1): (0.07, 1.5),
        (2, 3): (0.15, -0.75),
        (3, 0): (0.0, 0.0),
        (3, 2): (0.2, 3.1),
    }
    results = tuple(PairFitResult(p, b, t, 1.0, 0.001, 0.01) for p, (b, t) in entries.items())
    return ChipFitReport(results, 4)


@pytest.mark.parametrize(
    "beta, tier",
    [(0.0, Tier.HIDDEN), (0.0499, Tier.HIDDEN), (0.05, Tier.GREEN), (0.07, Tier.GREEN),
     (0.1, Tier.GREEN), (0.1000001, Tier.STRONG), (0.12, Tier.STRONG)],
)
def test_tier_boundaries(beta, tier):
    assert tier_for(beta) is tier


def test_pen_widths():
    assert [pen_width(b) for b in (0.05, 0.1, 0.15, 0.2, 0.3)] == [1, 1, 2, 2, 3]


def test_empty_graph_keeps_all_nodes():
    results = tuple(PairFitResult((a, b), 0.0, 0.0, 1.0, 0.0, 0.0) for a in range(8) for b in range(8) if a != b)
    dot = export_graph(build_graph(ChipFitReport(results, 8)))
    assert "->" not in dot
    assert all(f"  {n};" in dot for n in range(8))


def test_edge_semantics():
    g = build_graph(reference_report(), ChipTopology.ring(4))
    e = {(x.source, x.target): x for x in g.edges}
    # fit (a=2, b=3) is drawn from drive line 3 to measured qubit 2
    strong = e[(3, 2)]
    assert strong.tier is Tier.STRONG and strong.direction_color is DirectionColor.BLUE
    assert strong.label == "(0.150,-0.75)"
    assert e[(2, 1)].direction_color is DirectionColor.BLUE and e[(2, 1)].label == "(0.250,-3.00)"
    assert e[(1, 2)].direction_color is DirectionColor.RED
    assert e[(1, 2)].tier is Tier.GREEN and e[(1, 2)].label is None
    assert e[(0, 1)].tier is Tier.STRONG
    assert e[(1, 0)].tier is Tier.HIDDEN
    assert all(x.tier is not Tier.HIDDEN for x in g.visible_edges())


def test_golden_dot():
    dot = export_graph(build_graph(reference_report(), ChipTopology.ring(4)), "dot")
    assert dot == GOLDEN.read_text()


def test_structured_round_trip_and_determinism():
    g = build_graph(reference_report(), ChipTopology.ring(4))
    text = export_graph(g, "structured")
    assert load_graph(text) == g
    assert text == export_graph(build_graph(reference_report(), ChipTopology.ring(4)), "structured")
    assert len(json.loads(text)["edges"]) == 9


def test_unknown_format():
    with pytest.raises(ValueError, match="unknown graph export format"):
        export_graph(build_graph(reference_report()), "svg")


def test_tables():
    report = reference_report()
    g = build_graph(report, ChipTopology.ring(4))
    rows = beta_theta_csv(report).splitlines()
    assert rows[0] == "a,b,beta,theta,chi2_per_dof" and len(rows) == 10
    s = summary(report, g)
    assert s["tiers"] == {"hidden": 2, "green": 3, "strong": 4}
    assert s["coupler"]["pairs_with_coupler"] + s["coupler"]["pairs_without_coupler"] == 9
    assert math.isclose(s["median_chi2_per_dof"], 1.0)
