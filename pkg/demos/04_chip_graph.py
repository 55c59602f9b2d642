# %% [markdown]
# # A whole-chip crosstalk map
#
# Characterise an 8-qubit ring (qubit 5 without readout) and render the
# result as a DOT graph. Paste the output into any Graphviz viewer.

# %%
from rabi_xtalk import characterize_chip
from rabi_xtalk.core import ChipTopology, random_chip
from rabi_xtalk.report import build_graph, export_graph, summary

topology = ChipTopology.ring(8, [5])
chip = random_chip(8, seed=4, beta_range=(0.0, 0.15), topology=topology)
report = characterize_chip(chip, seed=9, workers=4)
graph = build_graph(report, topology)

# %%
s = summary(report, graph)
print(f"tiers: {s['tiers']}")
print(f"beta/theta correlation: {s['beta_theta_correlation']:+.2f}")
print(f"mean beta with / without coupler: {s['coupler']['mean_beta_with_coupler']:.3f} / "
      f"{s['coupler']['mean_beta_without_coupler']:.3f}")

# %%
print(export_graph(graph, "dot"))
