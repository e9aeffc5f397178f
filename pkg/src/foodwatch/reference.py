"""Reference factory model: 16 production areas, 180 badges.

A deterministic builder for the canonical mid-day-meal factory layout used
by the scenario presets and the test suite. Areas carry a 12 x 10 m local
frame and a daily two-window operating schedule (06:00-12:00, 13:00-18:00).
"""

from __future__ import annotations

from .twin import (
    FormatKind,
    Geometry,
    MealPlan,
    Person,
    ProcessDef,
    SopPolicySet,
    SpaceKind,
    SpaceNode,
    TwinModel,
)

AREA_NAMES = [
    "packing",
    "food_stores",
    "milk_plant",
    "hand_washing",
    "preprocessing",
    "cold_storage",
    "seasoning",
    "vegetable_receiving",
    "cooking",
    "rice_cooking",
    "dal_cooking",
    "vessel_washing",
    "sterilization_bay",
    "loading_bay",
    "staff_entry",
    "quality_lab",
]

_ZONES = {
    "receiving": ["food_stores", "milk_plant", "preprocessing", "cold_storage", "vegetable_receiving"],
    "cooking_block": ["cooking", "rice_cooking", "dal_cooking", "seasoning"],
    "hygiene_block": ["hand_washing", "vessel_washing", "sterilization_bay"],
    "dispatch": ["packing", "loading_bay", "staff_entry", "quality_lab"],
}

ROLES = ["cook", "cleaner", "packer", "supervisor", "loader"]

DAY_WINDOWS = ((6 * 3600, 12 * 3600), (13 * 3600, 18 * 3600))

AREA_WIDTH = 12.0
AREA_HEIGHT = 10.0


def area_names(count: int) -> list[str]:
    names = list(AREA_NAMES[:count])
    names.extend(f"area_{i:02d}" for i in range(len(names), count))
    return names


def reference_model(
    area_count: int = 16,
    badge_count: int = 180,
    model_id: str = "factory-reference",
    format_kind: FormatKind = FormatKind.SMALL_FORMAT,
    meal_plan: MealPlan = MealPlan.SOUTH,
) -> TwinModel:
    names = area_names(area_count)
    zone_of: dict[str, str] = {}
    for zone, members in _ZONES.items():
        for name in members:
            zone_of[name] = zone

    spaces: list[SpaceNode] = [
        SpaceNode(space_id="factory", name="Meal Factory", kind=SpaceKind.FACTORY, parent=None)
    ]
    used_zones = sorted({zone_of[n] for n in names if n in zone_of})
    for zone in used_zones:
        spaces.append(
            SpaceNode(
                space_id=zone,
                name=zone.replace("_", " ").title(),
                kind=SpaceKind.ZONE,
                parent="factory",
            )
        )
    for name in names:
        spaces.append(
            SpaceNode(
                space_id=name,
                name=name.replace("_", " ").title(),
                kind=SpaceKind.AREA,
                parent=zone_of.get(name, "factory"),
                geometry=Geometry(width=AREA_WIDTH, height=AREA_HEIGHT),
                policy=SopPolicySet(),
            )
        )

    people = tuple(
        Person(
            badge_id=f"b{i:03d}",
            role=ROLES[i % len(ROLES)],
            home_space=names[i % len(names)],
        )
        for i in range(badge_count)
    )

    processes = tuple(
        ProcessDef(
            process_id=f"proc-{name}",
            name=f"{name.replace('_', ' ')} shift",
            space=name,
            windows=DAY_WINDOWS,
            nominal_activity_duration=1800,
        )
        for name in names
    )

    return TwinModel(
        model_id=model_id,
        spaces=tuple(spaces),
        people=people,
        processes=processes,
        format_kind=format_kind,
        meal_plan=meal_plan,
    )
