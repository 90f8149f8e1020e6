"""Figure rendering for run outputs.

Each scenario's aggregates map onto one or two matplotlib figures written
next to the run's delimited output: contour-style surfaces for the benefit
and misreporting grids, line plots for the discipline and arterial
comparisons, and heatmaps for the sensitivity and obstruction grids.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render"]


def _load(out_dir: Path) -> list[dict]:
    with open(out_dir / "aggregates.json") as fh:
        return json.load(fh)["cells"]


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _surface(cells, value_key, title, cbar_label):
    volumes = sorted({c["volume"] for c in cells})
    bins = sorted({c["vot_bin_low"] for c in cells})
    grid = np.full((len(bins), len(volumes)), np.nan)
    for c in cells:
        grid[bins.index(c["vot_bin_low"]), volumes.index(c["volume"])] = c[value_key]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    masked = np.ma.masked_invalid(grid)
    mesh = ax.pcolormesh(volumes, bins, masked, shading="nearest", cmap="RdYlGn")
    fig.colorbar(mesh, ax=ax, label=cbar_label)
    ax.set_xlabel("volume (veh/h)")
    ax.set_ylabel("VOT bin lower edge (currency/h)")
    ax.set_title(title)
    return fig


def _render_benefit_surface(cells, out_dir):
    cells = [c for c in cells if "vot_bin_low" in c]
    fig = _surface(cells, "mean_benefit_cents",
                   "Mean benefit vs FCFS baseline", "mean benefit (cents)")
    return [_save(fig, out_dir / "benefit_surface.png")]


def _render_auction_compare(cells, out_dir):
    paths = []
    for key, name in (("mean_benefit_direct", "direct transactions"),
                      ("mean_benefit_auction", "second-price auction")):
        fig = _surface(cells, key, f"Mean benefit: {name}", "mean benefit (cents)")
        paths.append(_save(fig, out_dir / f"benefit_{key.rsplit('_', 1)[1]}.png"))
    share = np.mean([c["direct_dominates"] for c in cells])
    fig, ax = plt.subplots(figsize=(6, 4.5))
    vols = sorted({c["volume"] for c in cells})
    for v in vols:
        rows = sorted((c["vot_bin_low"], c["mean_benefit_direct"] - c["mean_benefit_auction"])
                      for c in cells if c["volume"] == v)
        ax.plot([r[0] for r in rows], [r[1] for r in rows], marker="o", label=f"{v:g} veh/h")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("VOT bin lower edge (currency/h)")
    ax.set_ylabel("benefit gap, direct minus auction (cents)")
    ax.set_title(f"Direct dominates in {share:.0%} of cells")
    ax.legend(fontsize=8)
    paths.append(_save(fig, out_dir / "benefit_gap.png"))
    return paths


def _render_sensitivity(cells, out_dir):
    zones = sorted({c["zone"] for c in cells})
    prs = sorted({c["penetration"] for c in cells})
    grid = np.full((len(zones), len(prs)), np.nan)
    for c in cells:
        grid[zones.index(c["zone"]), prs.index(c["penetration"])] = c["mean_loss_cents"]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    mesh = ax.pcolormesh(prs, zones, grid, shading="nearest", cmap="viridis_r")
    fig.colorbar(mesh, ax=ax, label="mean loss (cents)")
    ax.set_xlabel("penetration rate")
    ax.set_ylabel("control zone radius (m)")
    ax.set_title("Loss sensitivity to penetration and detection range")
    return [_save(fig, out_dir / "sensitivity.png")]


def _render_discipline(cells, out_dir):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for discipline in ("direct-transaction", "min-delay", "fcfs"):
        rows = sorted((c["volume"], c["mean_loss_cents"]) for c in cells
                      if c["discipline"] == discipline)
        ax.plot([r[0] for r in rows], [r[1] for r in rows], marker="o", label=discipline)
    ax.set_xlabel("volume (veh/h)")
    ax.set_ylabel("mean loss (cents)")
    ax.set_title("Mean loss of three service disciplines")
    ax.legend()
    return [_save(fig, out_dir / "discipline_compare.png")]


def _render_misreport(cells, out_dir):
    paths = []
    for payments in (True, False):
        sub = [c for c in cells if c["payments"] == payments]
        if not sub:
            continue
        trues = sorted({c["vot_true"] for c in sub})
        decls = sorted({c["vot_declared"] for c in sub})
        grid = np.full((len(decls), len(trues)), np.nan)
        for c in sub:
            grid[decls.index(c["vot_declared"]), trues.index(c["vot_true"])] = \
                c["mean_delta_benefit_cents"]
        fig, ax = plt.subplots(figsize=(5.5, 4.5))
        vmax = np.nanmax(np.abs(grid))
        mesh = ax.pcolormesh(trues, decls, grid, shading="nearest",
                             cmap="RdBu_r", vmin=-vmax, vmax=vmax)
        fig.colorbar(mesh, ax=ax, label="mean added benefit (cents)")
        ax.plot(trues, trues, "k--", lw=1, label="truthful diagonal")
        ax.set_xlabel("true VOT (currency/h)")
        ax.set_ylabel("declared VOT (currency/h)")
        tag = "with payments" if payments else "payments disabled"
        ax.set_title(f"Benefit change from misreporting ({tag})")
        ax.legend(fontsize=8)
        name = "misreport_payments.png" if payments else "misreport_no_payments.png"
        paths.append(_save(fig, out_dir / name))
    return paths


def _render_obstruction(cells, out_dir):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    rates = sorted({c["rate_per_lane"] for c in cells})
    for r in rates:
        rows = sorted((c["vot"], c["benefit_per_minute_cents"]) for c in cells
                      if c["rate_per_lane"] == r)
        ax.plot([x[0] for x in rows], [x[1] for x in rows], label=f"{r:g} veh/h/lane")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("obstructing vehicle VOT (currency/h)")
    ax.set_ylabel("benefit per minute (cents)")
    ax.set_title("Blocking a lane never pays")
    ax.legend(fontsize=8)
    return [_save(fig, out_dir / "obstruction.png")]


def _render_arterial(cells, out_dir):
    paths = []
    loss_cells = [c for c in cells if "control" in c]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for scen, color in (("coor-pay", "tab:orange"), ("iso-pay", "tab:red"),
                        ("coor-tv", "tab:blue")):
        rows = sorted((c["volume"], c["mean_loss_cents"]) for c in loss_cells
                      if c["control"] == scen)
        ax.plot([r[0] for r in rows], [r[1] for r in rows], marker="o",
                color=color, label=scen)
    ax.set_xlabel("arterial volume per direction (veh/h)")
    ax.set_ylabel("mean loss (cents)")
    ax.set_title("Arterial mean loss (baseline: free-flow passing)")
    ax.legend()
    paths.append(_save(fig, out_dir / "arterial_loss.png"))

    gap_cells = sorted(
        ((c["vot_bin_low"], c["benefit_gap_coor_minus_iso_cents"])
         for c in cells if "benefit_gap_coor_minus_iso_cents" in c)
    )
    if gap_cells:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.bar([g[0] for g in gap_cells], [g[1] for g in gap_cells],
               width=3.2, color="tab:green")
        ax.set_xlabel("VOT bin lower edge (currency/h)")
        ax.set_ylabel("benefit gap, coordinated minus isolated (cents)")
        ax.set_title("Coordination helps high-VOT vehicles most")
        paths.append(_save(fig, out_dir / "arterial_benefit_gap.png"))
    return paths


_RENDERERS = {
    "benefit-surface": _render_benefit_surface,
    "auction-compare": _render_auction_compare,
    "sensitivity": _render_sensitivity,
    "discipline-compare": _render_discipline,
    "misreport": _render_misreport,
    "obstruction": _render_obstruction,
    "arterial": _render_arterial,
}


def render(scenario: str, out_dir) -> list[Path]:
    """Render the scenario's figures from its aggregates; returns paths."""
    out_dir = Path(out_dir)
    cells = _load(out_dir)
    try:
        renderer = _RENDERERS[scenario]
    except KeyError:
        raise ValueError(f"no renderer for scenario {scenario!r}") from None
    return renderer(cells, out_dir)
