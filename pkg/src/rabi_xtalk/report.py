"""Whole-chip crosstalk graph and summary tables.

Edges point from the drive line (source) to the measured qubit.  Tiers:

* hidden: beta < 0.05 (never drawn)
* green: 0.05 <= beta <= 0.1
* strong: beta > 0.1, drawn red when source < target and blue otherwise,
  and annotated with the fitted (beta, theta)
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import ChipTopology, dumps
from .learning import ChipFitReport

HIDDEN_BELOW = 0.05
STRONG_ABOVE = 0.1
GRAPH_SCHEMA_VERSION = 1


class Tier(str, Enum):
    HIDDEN = "hidden"
    GREEN = "green"
    STRONG = "strong"


class DirectionColor(str, Enum):
    RED = "red"
    BLUE = "blue"


def tier_for(beta: float) -> Tier:
    if beta < HIDDEN_BELOW:
        return Tier.HIDDEN
    if beta <= STRONG_ABOVE:
        return Tier.GREEN
    return Tier.STRONG


def pen_width(beta: float) -> int:
    """Three discrete line widths growing with beta."""
    if beta <= STRONG_ABOVE:
        return 1
    if beta <= 0.2:
        return 2
    return 3


@dataclass(frozen=True)
class GraphEdge:
    source: int
    target: int
    beta: float
    theta: float
    tier: Tier
    direction_color: DirectionColor
    has_coupler: bool

    @property
    def label(self) -> str | None:
        if self.tier is not Tier.STRONG:
            return None
        return f"({self.beta:.3f},{self.theta:.2f})"


@dataclass(frozen=True)
class CrosstalkGraph:
    nodes: tuple
    edges: tuple

    def visible_edges(self) -> list[GraphEdge]:
        return [e for e in self.edges if e.tier is not Tier.HIDDEN]


def build_graph(report: ChipFitReport, topology: ChipTopology | None = None) -> CrosstalkGraph:
    topology = topology or ChipTopology(report.qubit_count)
    edges = []
    for r in report.results:
        a, b = r.pair
        edges.append(
            GraphEdge(
                source=int(b),
                target=int(a),
                beta=r.beta_hat,
                theta=r.theta_hat,
                tier=tier_for(r.beta_hat),
                direction_color=DirectionColor.RED if b < a else DirectionColor.BLUE,
                has_coupler=topology.has_coupler(a, b),
            )
        )
    edges.sort(key=lambda e: (e.source, e.target))
    return CrosstalkGraph(tuple(range(report.qubit_count)), tuple(edges))


def _dot(graph: CrosstalkGraph) -> str:
    lines = ["digraph crosstalk {", "  node [shape=circle];"]
    for n in graph.nodes:
        lines.append(f"  {n};")
    for e in graph.visible_edges():
        color = "green" if e.tier is Tier.GREEN else e.direction_color.value
        attrs = [f"color={color}", f"penwidth={pen_width(e.beta)}"]
        if e.label:
            attrs.append(f'label="{e.label}"')
        if e.has_coupler:
            attrs.append("style=bold")
        lines.append(f"  {e.source} -> {e.target} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_dict(graph: CrosstalkGraph) -> dict:
    return {
        "version": GRAPH_SCHEMA_VERSION,
        "nodes": list(graph.nodes),
        "edges": [
            {
                "from": e.source,
                "to": e.target,
                "beta": e.beta,
                "theta": e.theta,
                "tier": e.tier.value,
                "direction_color": e.direction_color.value,
                "has_coupler": e.has_coupler,
            }
            for e in graph.edges
        ],
    }


def graph_from_dict(d: dict) -> CrosstalkGraph:
    return CrosstalkGraph(
        tuple(d["nodes"]),
        tuple(
            GraphEdge(
                int(e["from"]), int(e["to"]), float(e["beta"]), float(e["theta"]),
                Tier(e["tier"]), DirectionColor(e["direction_color"]), bool(e["has_coupler"]),
            )
            for e in d["edges"]
        ),
    )


def export_graph(graph: CrosstalkGraph, format: str = "dot") -> str:
    if format == "dot":
        return _dot(graph)
    if format == "structured":
        return dumps(graph_to_dict(graph))
    raise ValueError(f"unknown graph export format {format!r}")


def load_graph(text: str) -> CrosstalkGraph:
    return graph_from_dict(json.loads(text))


# ------------------------------------------------------------------- tables


def histogram_csv(values, bins, marker: float | None = None, marker_name: str = "median") -> str:
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    buf = io.StringIO()
    buf.write("bin_low,bin_high,count\n")
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        buf.write(f"{lo:.6g},{hi:.6g},{c}\n")
    if marker is not None:
        buf.write(f"# {marker_name},{marker:.6g}\n")
    return buf.getvalue()


def beta_theta_csv(report: ChipFitReport) -> str:
    buf = io.StringIO()
    buf.write("a,b,beta,theta,chi2_per_dof\n")
    for r in report.results:
        buf.write(f"{r.pair[0]},{r.pair[1]},{float(r.beta_hat)!r},{float(r.theta_hat)!r},{float(r.chi2_per_dof)!r}\n")
    return buf.getvalue()


def coupler_summary(graph: CrosstalkGraph) -> dict:
    """Mean beta over directed pairs with and without a physical coupler."""
    with_c = [e.beta for e in graph.edges if e.has_coupler]
    without = [e.beta for e in graph.edges if not e.has_coupler]
    return {
        "pairs_with_coupler": len(with_c),
        "pairs_without_coupler": len(without),
        "mean_beta_with_coupler": float(np.mean(with_c)) if with_c else None,
        "mean_beta_without_coupler": float(np.mean(without)) if without else None,
    }


def summary(report: ChipFitReport, graph: CrosstalkGraph) -> dict:
    corr = report.beta_theta_correlation
    med = report.median_chi2
    tiers = {t.value: sum(1 for e in graph.edges if e.tier is t) for t in Tier}
    return {
        "pairs": len(report.results),
        "median_chi2_per_dof": med if np.isfinite(med) else None,
        "beta_theta_correlation": corr if np.isfinite(corr) else None,
        "tiers": tiers,
        "coupler": coupler_summary(graph),
    }


def summary_csv(report: ChipFitReport, graph: CrosstalkGraph) -> str:
    s = summary(report, graph)
    rows = [
        ("pairs", s["pairs"]),
        ("median_chi2_per_dof", s["median_chi2_per_dof"]),
        ("beta_theta_correlation", s["beta_theta_correlation"]),
    ]
    rows += [(f"tier_{k}", v) for k, v in s["tiers"].items()]
    rows += [(k, v) for k, v in s["coupler"].items()]
    buf = io.StringIO()
    buf.write("statistic,value\n")
    for k, v in rows:
        buf.write(f"{k},{'' if v is None else format(v, '.6g') if isinstance(v, float) else v}\n")
    return buf.getvalue()
