"""Run the two pilot reference scenarios end to end and print the metrics.

Usage: python scripts/run_pilot.py [seed]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from foodwatch.sim import build_scenario, preset, run_end_to_end
from foodwatch.sim.detectors import pilot_profile
from foodwatch.sim.metrics import HYGIENE_CATEGORY, TRACING_CATEGORY
from foodwatch.sim.presets import DEFAULT_SEED


def show(name: str, seed: int) -> None:
    config = preset(name)
    scenario = build_scenario(config, seed)
    result = run_end_to_end(scenario, pilot_profile(), seed=seed)
    print(f"\n=== {name} (seed {seed}) ===")
    print(
        f"opportunities={len(scenario.opportunities)} "
        f"violating={len(scenario.violating_instances())} "
        f"records={len(result.records)} rejected={result.rejected} "
        f"elapsed={result.elapsed_seconds:.1f}s"
    )
    for category in (HYGIENE_CATEGORY, TRACING_CATEGORY):
        m = result.metrics.categories.get(category)
        if m is None:
            continue
        sens = f"{m.sensitivity:.4f}" if m.sensitivity is not None else "n/a"
        spec = f"{m.specificity:.4f}" if m.specificity is not None else "n/a"
        print(f"  {category:<18} TP={m.tp:<6} FN={m.fn:<5} TN={m.tn:<6} FP={m.fp:<5} sens={sens} spec={spec}")


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_SEED
    for name in ("pilot-jigani", "pilot-jigani-metrics"):
        show(name, seed)


if __name__ == "__main__":
    main()
