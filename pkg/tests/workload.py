"""Deterministic mixed workloads for journal/recovery tests."""

import json
import random

from foodwatch.tracing import PositionPing

DAY = 86400.0
VTYPES = ["handwash", "mopping", "face_mask", "hairnet", "sterilization", "gloves"]


def make_workload(seed: int, count: int, areas: list[str], badges: list[str]):
    """Roughly ``count`` journaled records: ingests, ping batches, ticks,
    infections, sanitize and reassign actions, all inside operating hours."""
    rng = random.Random(seed)
    ops = []
    t = DAY + 7 * 3600.0
    made = 0
    while made < count:
        t += rng.uniform(5, 120)
        if t % DAY > 17.5 * 3600:  # stay inside the daily windows
            t = (t // DAY + 1) * DAY + 7 * 3600.0
        roll = rng.random()
        if roll < 0.55:
            event = {
                "event_id": f"w{made:05d}-{rng.randint(0, 3)}",
                "source_id": "cv",
                "vtype": rng.choice(VTYPES),
                "space_id": rng.choice(areas),
                "timestamp": t,
                "confidence": round(rng.uniform(0.5, 1.0), 3),
            }
            if rng.random() < 0.5:
                event["location"] = [round(rng.uniform(0, 10), 2), round(rng.uniform(0, 8), 2)]
            ops.append(("event", json.dumps(event), t))
        elif roll < 0.8:
            badge = rng.choice(badges)
            space = rng.choice(areas)
            base_x, base_y = rng.uniform(1, 9), rng.uniform(1, 7)
            pings = [
                PositionPing(badge, space, base_x + 0.05 * i, base_y, t + 2.0 * i)
                for i in range(rng.randint(3, 12))
            ]
            ops.append(("pings", pings, t))
        elif roll < 0.92:
            ops.append(("tick", t))
        elif roll < 0.96:
            ops.append(("infection", rng.choice(badges), t))
        elif roll < 0.98:
            ops.append(("sanitize", rng.choice(areas), t))
        else:
            ops.append(("reassign", rng.choice(badges), rng.choice(areas), t))
        made += 1
    return ops


def apply_op(node, op) -> None:
    kind = op[0]
    if kind == "event":
        node.ingest_event(op[1], "key-cv", now=op[2])
    elif kind == "pings":
        node.add_pings(op[1], now=op[2])
    elif kind == "tick":
        node.tick(op[1])
    elif kind == "infection":
        node.report_infection(op[1], op[2], None, now=op[2])
    elif kind == "sanitize":
        node.sanitize_space(op[1], now=op[2])
    elif kind == "reassign":
        node.reassign(op[1], op[2], op[3])
    else:
        raise AssertionError(kind)
