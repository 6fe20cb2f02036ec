"""Rewrite the frozen 12x12 surfaces. Run only after the oracle suite passes.

    python tests/golden/regenerate.py
"""

from pathlib import Path

from transmon_engine import cli, cycle, model

GOLDEN_DIR = Path(__file__).parent
RESOLUTION = 12


def surfaces():
    params = model.table1_parameters()
    population, coherence = cycle.state_surfaces(params, RESOLUTION)
    return {
        "entropy": cycle.entropy_surface(params, RESOLUTION),
        "rho_ee": population,
        "abs_rho_eg": coherence,
        "efficiency": cycle.efficiency_map(params, RESOLUTION),
    }


if __name__ == "__main__":
    for name, grid in surfaces().items():
        cli.write_surface(GOLDEN_DIR / f"{name}_12x12.csv", grid)
        print("wrote", name)
