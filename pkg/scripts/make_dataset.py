"""Regenerate the bundled roads.csv / params.json from a markdown road-flow listing.

Usage: python scripts/make_dataset.py SOURCE.md OUT_DIR
"""

import sys
from pathlib import Path

from evcs_planner.core import ModelParams, save_params, save_roads
from evcs_planner.network import synthetic_grid_network


FLOW_TABLE_MARKER = "Table A1 Statistics"


def read_flows(source: Path) -> list[int]:
    text = source.read_text(encoding="utf-8").split(FLOW_TABLE_MARKER)[1]
    flows = {}
    for line in text.splitlines()[2:]:
        cells = [c.strip() for c in line.split("\t") if c.strip()]
        if not cells or not cells[0].isdigit():
            continue
        for rid, flow in zip(cells[::2], cells[1::2]):
            flows[int(rid)] = int(flow)
    return [flows[k] for k in sorted(flows)]


if __name__ == "__main__":
    source = Path(sys.argv[1])
    out = Path(sys.argv[2])
    flows = read_flows(source)
    assert len(flows) == 234, len(flows)
    save_roads(synthetic_grid_network(flows), out / "roads.csv")
    save_params(ModelParams(), out / "params.json")
