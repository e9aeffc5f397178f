import hypothesis
import pytest

from foodwatch.reference import reference_model
from foodwatch.twin import (
    Geometry,
    Person,
    ProcessDef,
    SpaceKind,
    SpaceNode,
    TwinModel,
)

hypothesis.settings.register_profile("suite", deadline=None, max_examples=60)
hypothesis.settings.load_profile("suite")

# filled by tests/test_acceptance.py; echoed after the run so the per-criterion
# verdicts are visible without -s
ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for status, name in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"{status:<5} {name}")


def build_tiny_model(**overrides) -> TwinModel:
    """Factory -> one zone -> three areas, two badges, two processes.

    The cooking area is 10 x 8 m so out-of-bounds coordinates like (50, 2)
    are rejected.
    """
    spaces = (
        SpaceNode("factory", "Factory", SpaceKind.FACTORY, parent=None),
        SpaceNode("prep", "Prep Zone", SpaceKind.ZONE, parent="factory"),
        SpaceNode("cooking", "Cooking", SpaceKind.AREA, parent="prep", geometry=Geometry(10.0, 8.0)),
        SpaceNode("seasoning", "Seasoning", SpaceKind.AREA, parent="prep", geometry=Geometry(10.0, 8.0)),
        SpaceNode("packing", "Packing", SpaceKind.AREA, parent="factory", geometry=Geometry(12.0, 10.0)),
    )
    people = (
        Person("b042", "packer", "packing"),
        Person("b007", "cook", "cooking"),
    )
    processes = (
        ProcessDef("proc-cooking", "cooking shift", "cooking", ((6 * 3600, 12 * 3600),), 1800),
        ProcessDef("proc-packing", "packing shift", "packing", ((13 * 3600, 18 * 3600),), 1800),
    )
    fields = dict(
        model_id="tiny",
        spaces=spaces,
        people=people,
        processes=processes,
    )
    fields.update(overrides)
    return TwinModel(**fields)


@pytest.fixture
def tiny_model() -> TwinModel:
    return build_tiny_model()


@pytest.fixture
def ref_model() -> TwinModel:
    return reference_model()
