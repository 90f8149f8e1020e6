"""End-to-end smoke: every scenario runs tiny via the CLI and renders figures."""

import json

import pytest

from prioritymarket.cli import main

TINY_CONFIGS = {
    "benefit-surface": (
        "scenario: benefit-surface\nvolumes: [1200]\nreplications: 1\n"
        "arrivals_per_cell: 500\nwarmup_s: 60.0\n",
        ["benefit_surface.png"],
    ),
    "auction-compare": (
        "scenario: auction-compare\nvolumes: [1200, 1600]\nreplications: 1\n"
        "arrivals_per_cell: 500\nwarmup_s: 60.0\n",
        ["benefit_direct.png", "benefit_auction.png", "benefit_gap.png"],
    ),
    "sensitivity": (
        "scenario: sensitivity\npenetrations: [0.5, 1.0]\nzones: [150.0]\n"
        "replications: 1\narrivals_per_cell: 400\nwarmup_s: 60.0\n",
        ["sensitivity.png"],
    ),
    "discipline-compare": (
        "scenario: discipline-compare\nvolumes: [1200, 1600]\nreplications: 1\n"
        "arrivals_per_cell: 400\nwarmup_s: 60.0\n",
        ["discipline_compare.png"],
    ),
    "misreport": (
        "scenario: misreport\ntrue_vots: [10.0]\ndeclared_vots: [10.0, 30.0]\n"
        "replications: 1\narrivals_per_cell: 500\nwarmup_s: 120.0\n",
        ["misreport_payments.png", "misreport_no_payments.png"],
    ),
    "obstruction": (
        "scenario: obstruction\nobstruction_vots: [10.0, 30.0]\n"
        "obstruction_rates: [300.0, 700.0]\nobstruction_horizon_s: 480.0\n"
        "replications: 1\n",
        ["obstruction.png"],
    ),
    "arterial": (
        "scenario: arterial\nvolumes: [600]\nreplications: 1\n"
        "arrivals_per_cell: 300\nwarmup_s: 60.0\n",
        ["arterial_loss.png", "arterial_benefit_gap.png"],
    ),
}


@pytest.mark.parametrize("scenario", sorted(TINY_CONFIGS))
def test_scenario_end_to_end_with_figures(scenario, tmp_path):
    text, figures = TINY_CONFIGS[scenario]
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(text)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    run_dir = out / scenario
    doc = json.loads((run_dir / "aggregates.json").read_text())
    assert doc["cells"], "run produced no aggregate cells"
    assert main(["report", "--scenario", scenario, "--out", str(out)]) == 0
    for name in figures:
        path = run_dir / name
        assert path.exists() and path.stat().st_size > 0, f"missing figure {name}"
