"""Generate dashboard test fixtures from the real status engine.

Three scripted server states (all green; one red + one at-risk;
post-sanitize) plus a trace result and an alert list, written to
frontend/tests/fixtures/ for the vitest parity suite.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from foodwatch.events import AnomalyEvent, ViolationRecord
from foodwatch.reference import reference_model
from foodwatch.status import StatusEngine
from foodwatch.tracing import InfectionReport, PositionPing, TraceConfig, Tracer
from foodwatch.twin import Priority, ViolationType, map_event

OUT = Path(__file__).resolve().parents[1] / "frontend" / "tests" / "fixtures"

NOW = 86400.0 + 9 * 3600.0


def record(model, seq: int, space: str, vtype: ViolationType, at: float) -> ViolationRecord:
    event = AnomalyEvent(f"fx-{seq}", "cv", vtype, space, at, confidence=0.9)
    return ViolationRecord(
        violation_id=f"v-{seq:06d}",
        canonical=event,
        binding=map_event(model, event),
        priority=Priority.DELAY_TOLERANT,
        detected_at=at,
        reported_at=at,
    )


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    model = reference_model()

    engine = StatusEngine(model)
    write("snapshot_all_green.json", engine.snapshot(NOW))

    records = [record(model, i + 1, "cooking", ViolationType.MOPPING, NOW - 300 + 60 * i) for i in range(4)]
    for r in records:
        engine.record_violation(r, NOW)
    engine.set_at_risk("packing", True)
    write("snapshot_mixed.json", engine.snapshot(NOW))
    write("violations.json", {"violations": [r.to_json() for r in records]})

    engine.set_at_risk("packing", False)
    write("snapshot_post_sanitize.json", engine.snapshot(NOW))

    tracer = Tracer(model, TraceConfig())
    t0 = NOW - 7200
    tracer.add_pings(
        [PositionPing("b000", "packing", 2.0, 2.0, t0 + 2.0 * i) for i in range(120)], detect=False
    )
    tracer.add_pings(
        [PositionPing("b001", "packing", 2.6, 2.0, t0 + 2.0 * i) for i in range(40)], detect=False
    )
    tracer.add_pings(
        [PositionPing("b002", "packing", 5.0, 5.0, t0 + 400 + 2.0 * i) for i in range(30)], detect=False
    )
    result = tracer.trace(InfectionReport("r-000", "b000", reported_at=NOW))
    write("trace_result.json", result.to_json())
    print(f"fixtures in {OUT}")


def write(name: str, doc) -> None:
    (OUT / name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {name}")


if __name__ == "__main__":
    main()
