"""Digital-twin model of a food factory.

The factory is a tree of spaces (factory -> zones -> areas) with a staff
roster, scheduled processes bound to areas, and per-space SOP policy
overrides. Models are immutable: every mutating operation returns a new
model and leaves its input untouched, so readers never observe a half
applied change.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import (
    InvalidTarget,
    OverlayError,
    ParseError,
    UnknownBadge,
    UnknownSpace,
    ValidationError,
)


class ViolationType(str, Enum):
    FACE_MASK = "face_mask"
    HAIRNET = "hairnet"
    GLOVES = "gloves"
    APRON = "apron"
    MOPPING = "mopping"
    HANDWASH = "handwash"
    STERILIZATION = "sterilization"
    SOCIAL_DISTANCING = "social_distancing"
    CONTACT_TRACING = "contact_tracing"


class Priority(str, Enum):
    IMMEDIATE = "immediate"
    DELAY_TOLERANT = "delay_tolerant"


class SpaceKind(str, Enum):
    FACTORY = "factory"
    ZONE = "zone"
    AREA = "area"


class FormatKind(str, Enum):
    CENTRALIZED = "centralized"
    SMALL_FORMAT = "small_format"


class MealPlan(str, Enum):
    NORTH = "north"
    SOUTH = "south"


# Default reporting priority per violation type. Handwash and contact
# tracing alert synchronously; everything else waits for the batch tick.
# Gloves and apron follow the other attire types.
DEFAULT_PRIORITIES: dict[ViolationType, Priority] = {
    ViolationType.FACE_MASK: Priority.DELAY_TOLERANT,
    ViolationType.HAIRNET: Priority.DELAY_TOLERANT,
    ViolationType.GLOVES: Priority.DELAY_TOLERANT,
    ViolationType.APRON: Priority.DELAY_TOLERANT,
    ViolationType.MOPPING: Priority.DELAY_TOLERANT,
    ViolationType.HANDWASH: Priority.IMMEDIATE,
    ViolationType.STERILIZATION: Priority.DELAY_TOLERANT,
    ViolationType.SOCIAL_DISTANCING: Priority.DELAY_TOLERANT,
    ViolationType.CONTACT_TRACING: Priority.IMMEDIATE,
}

DEFAULT_AMBER_MIN = 1
DEFAULT_RED_MIN = 4

# Category split used by the metrics harness and the dashboard.
HYGIENE_TYPES = frozenset(
    {
        ViolationType.FACE_MASK,
        ViolationType.HAIRNET,
        ViolationType.GLOVES,
        ViolationType.APRON,
        ViolationType.MOPPING,
        ViolationType.HANDWASH,
        ViolationType.STERILIZATION,
    }
)
TRACING_TYPES = frozenset({ViolationType.SOCIAL_DISTANCING, ViolationType.CONTACT_TRACING})

# Types whose compliance checks make sense without any staff present.
SPACE_LEVEL_TYPES = frozenset({ViolationType.MOPPING, ViolationType.STERILIZATION})


@dataclass(frozen=True)
class PolicyEntry:
    priority: Priority
    rag_amber_min: int = DEFAULT_AMBER_MIN
    rag_red_min: int = DEFAULT_RED_MIN
    enabled: bool = True

    def to_json(self) -> dict:
        return {
            "priority": self.priority.value,
            "rag_amber_min": self.rag_amber_min,
            "rag_red_min": self.rag_red_min,
            "enabled": self.enabled,
        }


def default_policy_entry(vtype: ViolationType) -> PolicyEntry:
    return PolicyEntry(priority=DEFAULT_PRIORITIES[vtype])


@dataclass(frozen=True)
class PolicyPatch:
    """Partial policy entry; unset fields keep the value of the entry it patches."""

    priority: Priority | None = None
    rag_amber_min: int | None = None
    rag_red_min: int | None = None
    enabled: bool | None = None

    def apply(self, base: PolicyEntry) -> PolicyEntry:
        return PolicyEntry(
            priority=self.priority if self.priority is not None else base.priority,
            rag_amber_min=self.rag_amber_min if self.rag_amber_min is not None else base.rag_amber_min,
            rag_red_min=self.rag_red_min if self.rag_red_min is not None else base.rag_red_min,
            enabled=self.enabled if self.enabled is not None else base.enabled,
        )


@dataclass(frozen=True)
class SopPolicySet:
    """Per-space policy overrides keyed by violation type.

    An empty set means the space inherits everything from its ancestors,
    falling back to the built-in priority table and default RAG thresholds.
    """

    entries: dict[ViolationType, PolicyEntry] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {vt.value: entry.to_json() for vt, entry in sorted(self.entries.items(), key=lambda kv: kv[0].value)}


@dataclass(frozen=True)
class Geometry:
    """Flat 2D rectangle in a per-area local frame, metres."""

    width: float
    height: float

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height

    def to_json(self) -> dict:
        return {"width": self.width, "height": self.height}


@dataclass(frozen=True)
class SpaceNode:
    space_id: str
    name: str
    kind: SpaceKind
    parent: str | None = None
    geometry: Geometry | None = None
    policy: SopPolicySet = field(default_factory=SopPolicySet)

    def to_json(self) -> dict:
        doc: dict = {
            "space_id": self.space_id,
            "name": self.name,
            "kind": self.kind.value,
            "parent": self.parent,
        }
        if self.geometry is not None:
            doc["geometry"] = self.geometry.to_json()
        if self.policy.entries:
            doc["policy"] = self.policy.to_json()
        return doc


@dataclass(frozen=True)
class Person:
    # badge_id is a pseudonym: the schema deliberately has no field that
    # could hold a real-world identity.
    badge_id: str
    role: str
    home_space: str

    def to_json(self) -> dict:
        return {"badge_id": self.badge_id, "role": self.role, "home_space": self.home_space}


@dataclass(frozen=True)
class ProcessDef:
    process_id: str
    name: str
    space: str
    windows: tuple[tuple[int, int], ...]  # [start, end) seconds-of-day
    nominal_activity_duration: int

    def to_json(self) -> dict:
        return {
            "process_id": self.process_id,
            "name": self.name,
            "space": self.space,
            "windows": [list(w) for w in self.windows],
            "nominal_activity_duration": self.nominal_activity_duration,
        }


@dataclass(frozen=True)
class TwinModel:
    model_id: str
    spaces: tuple[SpaceNode, ...]
    people: tuple[Person, ...] = ()
    processes: tuple[ProcessDef, ...] = ()
    format_kind: FormatKind = FormatKind.CENTRALIZED
    meal_plan: MealPlan = MealPlan.SOUTH

    def __post_init__(self):
        object.__setattr__(self, "_space_index", {s.space_id: s for s in self.spaces})
        object.__setattr__(self, "_people_index", {p.badge_id: p for p in self.people})
        children: dict[str | None, list[str]] = {}
        for s in self.spaces:
            children.setdefault(s.parent, []).append(s.space_id)
        for ids in children.values():
            ids.sort()
        object.__setattr__(self, "_children", children)

    # -- lookups ------------------------------------------------------

    def space(self, space_id: str) -> SpaceNode:
        try:
            return self._space_index[space_id]
        except KeyError:
            raise UnknownSpace(f"unknown space: {space_id}") from None

    def has_space(self, space_id: str) -> bool:
        return space_id in self._space_index

    def person(self, badge_id: str) -> Person:
        try:
            return self._people_index[badge_id]
        except KeyError:
            raise UnknownBadge(f"unknown badge: {badge_id}") from None

    def has_badge(self, badge_id: str) -> bool:
        return badge_id in self._people_index

    def children_of(self, space_id: str | None) -> list[str]:
        return list(self._children.get(space_id, []))

    def roots(self) -> list[SpaceNode]:
        return [s for s in self.spaces if s.parent is None]

    def root(self) -> SpaceNode:
        roots = self.roots()
        if len(roots) != 1:
            raise ValidationError(f"model has {len(roots)} roots", path="spaces")
        return roots[0]

    def areas(self) -> list[SpaceNode]:
        return [s for s in self.spaces if s.kind is SpaceKind.AREA]

    def ancestry(self, space_id: str) -> list[SpaceNode]:
        """Path from the root down to ``space_id`` inclusive."""
        path = [self.space(space_id)]
        seen = {space_id}
        while path[0].parent is not None:
            parent_id = path[0].parent
            if parent_id in seen or not self.has_space(parent_id):
                raise ValidationError(f"broken ancestry at {parent_id}", path=f"spaces/{space_id}")
            path.insert(0, self.space(parent_id))
            seen.add(parent_id)
        return path

    def walk_depth_first(self) -> list[SpaceNode]:
        """Deterministic depth-first order: root first, children sorted by id."""
        order: list[SpaceNode] = []
        stack = [r.space_id for r in sorted(self.roots(), key=lambda s: s.space_id)][::-1]
        while stack:
            sid = stack.pop()
            order.append(self.space(sid))
            stack.extend(reversed(self.children_of(sid)))
        return order

    def processes_for(self, space_id: str) -> list[ProcessDef]:
        return [p for p in self.processes if p.space == space_id]

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "format_kind": self.format_kind.value,
            "meal_plan": self.meal_plan.value,
            "spaces": [s.to_json() for s in self.spaces],
            "people": [p.to_json() for p in self.people],
            "processes": [p.to_json() for p in self.processes],
        }


@dataclass(frozen=True)
class ModelOverlay:
    """Difference applied to a template model: adds, then removes, then overrides."""

    add_spaces: tuple[SpaceNode, ...] = ()
    remove_space_ids: tuple[str, ...] = ()
    policy_overrides: dict[str, dict[ViolationType, PolicyPatch]] = field(default_factory=dict)
    process_replacements: tuple[ProcessDef, ...] = ()
    format_kind: FormatKind | None = None
    meal_plan: MealPlan | None = None


@dataclass(frozen=True)
class ModelIssue:
    """One broken invariant: machine-readable code plus the offending node path."""

    code: str
    path: str
    message: str

    def to_json(self) -> dict:
        return {"code": self.code, "path": self.path, "message": self.message}


@dataclass(frozen=True)
class TwinBinding:
    """Where an event lands in the twin: space ancestry, live processes, policy."""

    space_path: tuple[str, ...]
    active_process_ids: tuple[str, ...]
    policy: PolicyEntry

    @property
    def space_id(self) -> str:
        return self.space_path[-1]

    def to_json(self) -> dict:
        return {
            "space_path": list(self.space_path),
            "active_process_ids": list(self.active_process_ids),
            "policy": self.policy.to_json(),
        }


# ---------------------------------------------------------------------------
# Parsing


def _enum_value(enum_cls, raw, where: str):
    try:
        return enum_cls(raw)
    except ValueError:
        raise ParseError(f"{where}: {raw!r} is not one of {[e.value for e in enum_cls]}") from None


def _require_keys(doc: dict, required: set[str], optional: set[str], where: str) -> None:
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: expected an object")
    missing = required - doc.keys()
    if missing:
        raise ParseError(f"{where}: missing keys {sorted(missing)}")
    unknown = doc.keys() - required - optional
    if unknown:
        # Strict by design: unexpected keys are rejected rather than ignored
        # so identity-bearing fields can never ride along.
        raise ParseError(f"{where}: unexpected keys {sorted(unknown)}")


def _parse_policy_entries(doc: dict, where: str) -> dict[ViolationType, PolicyEntry]:
    entries: dict[ViolationType, PolicyEntry] = {}
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: expected an object")
    for raw_vt, raw_entry in doc.items():
        vt = _enum_value(ViolationType, raw_vt, f"{where}/{raw_vt}")
        _require_keys(
            raw_entry,
            set(),
            {"priority", "rag_amber_min", "rag_red_min", "enabled"},
            f"{where}/{raw_vt}",
        )
        base = default_policy_entry(vt)
        patch = PolicyPatch(
            priority=_enum_value(Priority, raw_entry["priority"], f"{where}/{raw_vt}/priority")
            if "priority" in raw_entry
            else None,
            rag_amber_min=raw_entry.get("rag_amber_min"),
            rag_red_min=raw_entry.get("rag_red_min"),
            enabled=raw_entry.get("enabled"),
        )
        entries[vt] = patch.apply(base)
    return entries


def _parse_space(doc: dict) -> SpaceNode:
    where = f"spaces/{doc.get('space_id', '?')}" if isinstance(doc, dict) else "spaces"
    _require_keys(doc, {"space_id", "name", "kind", "parent"}, {"geometry", "policy"}, where)
    kind = _enum_value(SpaceKind, doc["kind"], f"{where}/kind")
    geometry = None
    if "geometry" in doc and doc["geometry"] is not None:
        gdoc = doc["geometry"]
        _require_keys(gdoc, {"width", "height"}, set(), f"{where}/geometry")
        geometry = Geometry(width=float(gdoc["width"]), height=float(gdoc["height"]))
    policy = SopPolicySet()
    if "policy" in doc and doc["policy"] is not None:
        policy = SopPolicySet(entries=_parse_policy_entries(doc["policy"], f"{where}/policy"))
    return SpaceNode(
        space_id=str(doc["space_id"]),
        name=str(doc["name"]),
        kind=kind,
        parent=None if doc["parent"] is None else str(doc["parent"]),
        geometry=geometry,
        policy=policy,
    )


def _parse_person(doc: dict) -> Person:
    where = f"people/{doc.get('badge_id', '?')}" if isinstance(doc, dict) else "people"
    _require_keys(doc, {"badge_id", "role", "home_space"}, set(), where)
    return Person(badge_id=str(doc["badge_id"]), role=str(doc["role"]), home_space=str(doc["home_space"]))


def _parse_process(doc: dict) -> ProcessDef:
    where = f"processes/{doc.get('process_id', '?')}" if isinstance(doc, dict) else "processes"
    _require_keys(doc, {"process_id", "name", "space", "windows", "nominal_activity_duration"}, set(), where)
    windows = doc["windows"]
    if not isinstance(windows, list) or not all(isinstance(w, list) and len(w) == 2 for w in windows):
        raise ParseError(f"{where}/windows: expected a list of [start, end] pairs")
    return ProcessDef(
        process_id=str(doc["process_id"]),
        name=str(doc["name"]),
        space=str(doc["space"]),
        windows=tuple((int(w[0]), int(w[1])) for w in windows),
        nominal_activity_duration=int(doc["nominal_activity_duration"]),
    )


def parse_model(document: bytes | str) -> TwinModel:
    """Parse a model document without validating invariants."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model document is not valid JSON: {exc}") from None
    _require_keys(
        doc,
        {"model_id", "format_kind", "meal_plan", "spaces"},
        {"people", "processes"},
        "model",
    )
    if not isinstance(doc["spaces"], list):
        raise ParseError("model/spaces: expected a list")
    return TwinModel(
        model_id=str(doc["model_id"]),
        format_kind=_enum_value(FormatKind, doc["format_kind"], "model/format_kind"),
        meal_plan=_enum_value(MealPlan, doc["meal_plan"], "model/meal_plan"),
        spaces=tuple(_parse_space(s) for s in doc["spaces"]),
        people=tuple(_parse_person(p) for p in doc.get("people", [])),
        processes=tuple(_parse_process(p) for p in doc.get("processes", [])),
    )


def load_model(document: bytes | str) -> TwinModel:
    """Parse and validate a model document; rejects rather than repairs."""
    model = parse_model(document)
    report = validate_model(model)
    if report:
        first = report[0]
        raise ValidationError(
            f"model failed validation ({len(report)} issue(s)); first: {first.code} at {first.path}: {first.message}",
            path=first.path,
            report=report,
        )
    return model


def dump_model(model: TwinModel) -> bytes:
    """Canonical JSON serialization of a model (stable key order)."""
    return json.dumps(model.to_json(), sort_keys=True, separators=(",", ":")).encode()


def parse_overlay(document: bytes | str) -> ModelOverlay:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"overlay document is not valid JSON: {exc}") from None
    _require_keys(
        doc,
        set(),
        {"add_spaces", "remove_space_ids", "policy_overrides", "process_replacements", "format_kind", "meal_plan"},
        "overlay",
    )
    overrides: dict[str, dict[ViolationType, PolicyPatch]] = {}
    for sid, entries in doc.get("policy_overrides", {}).items():
        per_space: dict[ViolationType, PolicyPatch] = {}
        for raw_vt, raw_entry in entries.items():
            vt = _enum_value(ViolationType, raw_vt, f"overlay/policy_overrides/{sid}/{raw_vt}")
            _require_keys(
                raw_entry,
                set(),
                {"priority", "rag_amber_min", "rag_red_min", "enabled"},
                f"overlay/policy_overrides/{sid}/{raw_vt}",
            )
            per_space[vt] = PolicyPatch(
                priority=_enum_value(Priority, raw_entry["priority"], "priority") if "priority" in raw_entry else None,
                rag_amber_min=raw_entry.get("rag_amber_min"),
                rag_red_min=raw_entry.get("rag_red_min"),
                enabled=raw_entry.get("enabled"),
            )
        overrides[str(sid)] = per_space
    return ModelOverlay(
        add_spaces=tuple(_parse_space(s) for s in doc.get("add_spaces", [])),
        remove_space_ids=tuple(str(s) for s in doc.get("remove_space_ids", [])),
        policy_overrides=overrides,
        process_replacements=tuple(_parse_process(p) for p in doc.get("process_replacements", [])),
        format_kind=_enum_value(FormatKind, doc["format_kind"], "overlay/format_kind")
        if "format_kind" in doc and doc["format_kind"] is not None
        else None,
        meal_plan=_enum_value(MealPlan, doc["meal_plan"], "overlay/meal_plan")
        if "meal_plan" in doc and doc["meal_plan"] is not None
        else None,
    )


# ---------------------------------------------------------------------------
# Validation

_KIND_PARENTS = {
    SpaceKind.FACTORY: frozenset([None]),
    SpaceKind.ZONE: frozenset([SpaceKind.FACTORY]),
    SpaceKind.AREA: frozenset([SpaceKind.FACTORY, SpaceKind.ZONE]),
}


def validate_model(model: TwinModel) -> list[ModelIssue]:
    """Check every invariant; empty report means the model is valid.

    Report ordering is deterministic: tree issues depth-first (children
    sorted by id, fields alphabetically within a node), then dangling or
    unreachable nodes by id, then people and processes in document order.
    """
    issues: list[ModelIssue] = []
    by_id: dict[str, SpaceNode] = {}
    duplicates: list[SpaceNode] = []
    for node in model.spaces:
        if node.space_id in by_id:
            duplicates.append(node)
        else:
            by_id[node.space_id] = node

    roots = [s for s in model.spaces if s.parent is None]
    if not roots:
        issues.append(ModelIssue("no_root", "spaces", "no root node (parent = null)"))
    for extra in roots[1:]:
        issues.append(
            ModelIssue("multiple_roots", f"spaces/{extra.space_id}", "more than one root node")
        )
    for dup in duplicates:
        issues.append(
            ModelIssue("duplicate_space_id", f"spaces/{dup.space_id}", "space_id is not unique")
        )

    def node_path(sid: str) -> str:
        parts = [sid]
        seen = {sid}
        cur = by_id.get(sid)
        while cur is not None and cur.parent is not None and cur.parent in by_id and cur.parent not in seen:
            parts.insert(0, cur.parent)
            seen.add(cur.parent)
            cur = by_id[cur.parent]
        return "spaces/" + "/".join(parts)

    def check_node(node: SpaceNode) -> None:
        path = node_path(node.space_id)
        # field checks in alphabetical order: geometry, kind, policy
        if node.kind is SpaceKind.AREA:
            if node.geometry is None:
                issues.append(ModelIssue("geometry_missing", f"{path}/geometry", "area nodes need geometry"))
            elif node.geometry.width <= 0 or node.geometry.height <= 0:
                issues.append(
                    ModelIssue("geometry_nonpositive", f"{path}/geometry", "width and height must be > 0")
                )
        elif node.geometry is not None:
            issues.append(
                ModelIssue("geometry_forbidden", f"{path}/geometry", "only area nodes carry geometry")
            )
        parent_kind = by_id[node.parent].kind if node.parent in by_id else None
        if node.parent is None or node.parent in by_id:
            if parent_kind not in _KIND_PARENTS[node.kind]:
                issues.append(
                    ModelIssue(
                        "kind_order",
                        f"{path}/kind",
                        f"{node.kind.value} node cannot sit under {parent_kind.value if parent_kind else 'root'}",
                    )
                )
        for vt in sorted(node.policy.entries, key=lambda v: v.value):
            entry = node.policy.entries[vt]
            if not (1 <= entry.rag_amber_min <= entry.rag_red_min):
                issues.append(
                    ModelIssue(
                        "rag_thresholds_invalid",
                        f"{path}/policy/{vt.value}",
                        f"need 1 <= amber_min <= red_min, got {entry.rag_amber_min}/{entry.rag_red_min}",
                    )
                )

    # depth-first over the reachable tree
    visited: set[str] = set()
    children: dict[str, list[str]] = {}
    for node in model.spaces:
        if node.parent is not None:
            children.setdefault(node.parent, []).append(node.space_id)
    for ids in children.values():
        ids.sort()
    stack = sorted([r.space_id for r in roots], reverse=True)
    while stack:
        sid = stack.pop()
        if sid in visited:
            continue
        visited.add(sid)
        check_node(by_id[sid])
        stack.extend(reversed(children.get(sid, [])))

    # nodes not reachable from any root: dangling parent or part of a cycle
    for node in sorted(model.spaces, key=lambda s: s.space_id):
        if node.space_id in visited or node in duplicates:
            continue
        check_node(node)
        if node.parent is not None and node.parent not in by_id:
            issues.append(
                ModelIssue(
                    "dangling_parent",
                    f"spaces/{node.space_id}/parent",
                    f"parent {node.parent!r} is not in the tree",
                )
            )
        else:
            issues.append(
                ModelIssue(
                    "unreachable_space",
                    f"spaces/{node.space_id}",
                    "not reachable from the root (cycle or orphan subtree)",
                )
            )

    seen_badges: set[str] = set()
    for person in model.people:
        path = f"people/{person.badge_id}"
        if person.badge_id in seen_badges:
            issues.append(ModelIssue("duplicate_badge_id", path, "badge_id is not unique"))
        seen_badges.add(person.badge_id)
        if person.home_space not in by_id:
            issues.append(ModelIssue("home_space_unknown", f"{path}/home_space", f"unknown space {person.home_space!r}"))
        elif by_id[person.home_space].kind is not SpaceKind.AREA:
            issues.append(ModelIssue("home_space_not_area", f"{path}/home_space", "home space must be an area"))

    seen_procs: set[str] = set()
    for proc in model.processes:
        path = f"processes/{proc.process_id}"
        if proc.process_id in seen_procs:
            issues.append(ModelIssue("duplicate_process_id", path, "process_id is not unique"))
        seen_procs.add(proc.process_id)
        if proc.space not in by_id:
            issues.append(ModelIssue("process_space_unknown", f"{path}/space", f"unknown space {proc.space!r}"))
        elif by_id[proc.space].kind is not SpaceKind.AREA:
            issues.append(ModelIssue("process_space_not_area", f"{path}/space", "process space must be an area"))
        prev_end = None
        for idx, (start, end) in enumerate(proc.windows):
            wpath = f"{path}/windows/{idx}"
            if not (0 <= start < end <= 86400):
                issues.append(ModelIssue("window_bounds", wpath, f"bad window [{start}, {end})"))
            if prev_end is not None and start < prev_end:
                issues.append(ModelIssue("windows_unsorted", wpath, "windows must be sorted and non-overlapping"))
            prev_end = max(prev_end, end) if prev_end is not None else end
        if proc.nominal_activity_duration <= 0:
            issues.append(
                ModelIssue("duration_nonpositive", f"{path}/nominal_activity_duration", "must be > 0")
            )

    return issues


# ---------------------------------------------------------------------------
# Operations


def derive_model(template: TwinModel, overlay: ModelOverlay) -> TwinModel:
    """Apply an overlay: adds, then removes, then overrides. The template is untouched."""
    spaces = list(template.spaces) + list(overlay.add_spaces)
    by_id = {s.space_id: s for s in spaces}

    if overlay.remove_space_ids:
        root_ids = {s.space_id for s in spaces if s.parent is None}
        removed: set[str] = set()
        for sid in overlay.remove_space_ids:
            if sid in root_ids:
                raise OverlayError(f"cannot remove root space {sid!r}")
            if sid not in by_id:
                raise OverlayError(f"remove targets nonexistent space {sid!r}")
            removed.add(sid)
        # removal takes the whole subtree with it
        changed = True
        while changed:
            changed = False
            for s in spaces:
                if s.space_id not in removed and s.parent in removed:
                    removed.add(s.space_id)
                    changed = True
        spaces = [s for s in spaces if s.space_id not in removed]
        by_id = {s.space_id: s for s in spaces}

    for sid, patches in overlay.policy_overrides.items():
        if sid not in by_id:
            raise OverlayError(f"policy override targets nonexistent space {sid!r}")
        node = by_id[sid]
        entries = dict(node.policy.entries)
        for vt, patch in patches.items():
            base = entries.get(vt, default_policy_entry(vt))
            entries[vt] = patch.apply(base)
        by_id[sid] = replace(node, policy=SopPolicySet(entries=entries))
    spaces = [by_id[s.space_id] for s in spaces]

    processes = list(template.processes)
    if overlay.process_replacements:
        replacements = {p.process_id: p for p in overlay.process_replacements}
        processes = [replacements.pop(p.process_id, p) for p in processes]
        processes.extend(replacements.values())

    derived = TwinModel(
        model_id=template.model_id,
        spaces=tuple(spaces),
        people=template.people,
        processes=tuple(processes),
        format_kind=overlay.format_kind or template.format_kind,
        meal_plan=overlay.meal_plan or template.meal_plan,
    )
    report = validate_model(derived)
    if report:
        first = report[0]
        raise ValidationError(
            f"derived model failed validation: {first.code} at {first.path}",
            path=first.path,
            report=report,
        )
    return derived


def policy_for(model: TwinModel, space_id: str, vtype: ViolationType) -> PolicyEntry:
    """Resolve the policy entry for a space: nearest-ancestor override wins,
    otherwise the built-in priority table with default RAG thresholds."""
    for node in reversed(model.ancestry(space_id)):
        entry = node.policy.entries.get(vtype)
        if entry is not None:
            return entry
    return default_policy_entry(vtype)


def seconds_of_day(timestamp: float) -> float:
    return timestamp % 86400.0


def map_event(model: TwinModel, event) -> TwinBinding:
    """Bind a validated event to its area, active processes and policy entry."""
    path = tuple(s.space_id for s in model.ancestry(event.space_id))
    tod = seconds_of_day(event.timestamp)
    active = tuple(
        p.process_id
        for p in model.processes
        if p.space == event.space_id and any(start <= tod < end for start, end in p.windows)
    )
    return TwinBinding(
        space_path=path,
        active_process_ids=active,
        policy=policy_for(model, event.space_id, event.vtype),
    )


def reassign_person(model: TwinModel, badge_id: str, new_space_id: str) -> TwinModel:
    """Move a person to a new home area; returns a new model."""
    model.person(badge_id)
    target = model.space(new_space_id)
    if target.kind is not SpaceKind.AREA:
        raise InvalidTarget(f"{new_space_id} is a {target.kind.value}, not an area")
    people = tuple(
        replace(p, home_space=new_space_id) if p.badge_id == badge_id else p for p in model.people
    )
    return replace(model, people=people)
