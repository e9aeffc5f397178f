"""Deterministic scenario generation.

A scenario bundles a factory model with ground-truth compliance check
opportunities, badge movement scripts and an optional infection plan.
Everything is a pure function of (config, seed): building the same
scenario twice yields byte-identical JSON.

Opportunity slots sit on a jittered grid inside each area's operational
windows, spaced far enough apart that two distinct ground-truth instances
can never fall into the same dedup window, so one detector event maps to
exactly one instance.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError
from ..reference import reference_model
from ..twin import HYGIENE_TYPES, SPACE_LEVEL_TYPES, TwinModel, ViolationType

HYGIENE_ORDER = [vt for vt in ViolationType if vt in HYGIENE_TYPES]


@dataclass(frozen=True)
class OpportunitySettings:
    slot_period_seconds: float = 9000.0
    edge_margin_seconds: float = 300.0
    slot_jitter_seconds: float = 300.0
    violation_probability: float = 0.011

    def __post_init__(self):
        assert self.slot_period_seconds > 0
        assert 0 <= self.violation_probability <= 1
        # keeps neighbouring slots from drifting inside one dedup window
        assert self.slot_period_seconds - 2 * self.slot_jitter_seconds > 300


@dataclass(frozen=True)
class EpisodeSettings:
    """Staged infection episode: who stands where, and when.

    One infected badge occupies a staging area; direct contacts stand
    within arm's reach during the visit; indirect visitors arrive inside
    the true linger horizon; overcapture visitors arrive after it but
    still inside the system's linger window, so the tracer flags them
    while ground truth does not.
    """

    visit_duration_seconds: float = 600.0
    direct_contacts: int = 5
    indirect_contacts: int = 24
    overcapture_contacts: int = 12
    contact_offset_seconds: float = 60.0
    contact_duration_seconds: float = 180.0
    participant_visit_seconds: float = 40.0
    participant_spacing_seconds: float = 45.0
    true_linger_seconds: float = 1800.0
    system_linger_seconds: float = 3600.0
    overcapture_lead_seconds: float = 100.0
    start_second_of_day: float = 8 * 3600.0
    report_delay_seconds: float = 7200.0

    def __post_init__(self):
        indirect_span = (
            10.0
            + self.participant_spacing_seconds * max(self.indirect_contacts - 1, 0)
            + self.participant_visit_seconds
        )
        if indirect_span > self.true_linger_seconds:
            raise ConfigError("indirect visits do not fit inside the true linger horizon")
        over_span = (
            self.true_linger_seconds
            + self.overcapture_lead_seconds
            + self.participant_spacing_seconds * max(self.overcapture_contacts - 1, 0)
            + self.participant_visit_seconds
        )
        if over_span > self.system_linger_seconds:
            raise ConfigError("overcapture visits do not fit inside the system linger window")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    area_count: int = 16
    badge_count: int = 180
    horizon_days: int = 21
    opportunities: OpportunitySettings = field(default_factory=OpportunitySettings)
    episode_count: int = 1
    episode: EpisodeSettings = field(default_factory=EpisodeSettings)
    target_violation_band: tuple[int, int] | None = None

    @property
    def horizon_seconds(self) -> float:
        return self.horizon_days * 86400.0

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["target_violation_band"] = list(self.target_violation_band) if self.target_violation_band else None
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ScenarioConfig":
        opportunities = OpportunitySettings(**doc.get("opportunities", {}))
        episode = EpisodeSettings(**doc.get("episode", {}))
        band = doc.get("target_violation_band")
        return cls(
            name=doc["name"],
            area_count=int(doc.get("area_count", 16)),
            badge_count=int(doc.get("badge_count", 180)),
            horizon_days=int(doc.get("horizon_days", 21)),
            opportunities=opportunities,
            episode_count=int(doc.get("episode_count", 0)),
            episode=episode,
            target_violation_band=(int(band[0]), int(band[1])) if band else None,
        )

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class GroundTruthInstance:
    instance_id: str
    vtype: ViolationType
    space_id: str
    time: float
    compliant: bool  # True = the check passed, no violation occurred
    x: float
    y: float

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "vtype": self.vtype.value,
            "space_id": self.space_id,
            "time": self.time,
            "compliant": self.compliant,
            "x": self.x,
            "y": self.y,
        }


@dataclass(frozen=True)
class MovementSegment:
    space_id: str
    enter: float
    exit: float
    waypoints: tuple[tuple[float, float], ...]

    def to_json(self) -> dict:
        return {
            "space_id": self.space_id,
            "enter": self.enter,
            "exit": self.exit,
            "waypoints": [[x, y] for x, y in self.waypoints],
        }


@dataclass(frozen=True)
class InfectionPlanEntry:
    badge_id: str
    reported_at: float
    staged_space: str
    at_risk_badges: tuple[str, ...]  # ground truth: direct + timely indirect
    lookback_seconds: float = 172800.0

    def to_json(self) -> dict:
        return {
            "badge_id": self.badge_id,
            "reported_at": self.reported_at,
            "staged_space": self.staged_space,
            "at_risk_badges": list(self.at_risk_badges),
            "lookback_seconds": self.lookback_seconds,
        }


@dataclass(frozen=True)
class Scenario:
    name: str
    model: TwinModel
    horizon_seconds: float
    opportunities: tuple[GroundTruthInstance, ...]
    movement_scripts: dict[str, tuple[MovementSegment, ...]]
    infection_plan: tuple[InfectionPlanEntry, ...]
    seed: int

    def violating_instances(self) -> list[GroundTruthInstance]:
        return [g for g in self.opportunities if not g.compliant]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "horizon_seconds": self.horizon_seconds,
            "model": self.model.to_json(),
            "opportunities": [g.to_json() for g in self.opportunities],
            "movement_scripts": {
                badge: [seg.to_json() for seg in segments]
                for badge, segments in sorted(self.movement_scripts.items())
            },
            "infection_plan": [e.to_json() for e in self.infection_plan],
        }

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()


def _operational_windows(model: TwinModel, space_id: str) -> list[tuple[int, int]]:
    windows: list[tuple[int, int]] = []
    for proc in model.processes_for(space_id):
        windows.extend(proc.windows)
    merged: list[tuple[int, int]] = []
    for start, end in sorted(windows):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def _build_opportunities(
    config: ScenarioConfig, model: TwinModel, rng: np.random.Generator
) -> tuple[GroundTruthInstance, ...]:
    settings = config.opportunities
    vtypes = [vt for vt in HYGIENE_ORDER if config.badge_count > 0 or vt in SPACE_LEVEL_TYPES]
    instances: list[GroundTruthInstance] = []
    for area in model.areas():
        windows = _operational_windows(model, area.space_id)
        width = area.geometry.width
        height = area.geometry.height
        for vtype in vtypes:
            counter = 0
            for day in range(config.horizon_days):
                day_start = day * 86400.0
                for win_start, win_end in windows:
                    base = win_start + settings.edge_margin_seconds
                    while base <= win_end - settings.edge_margin_seconds:
                        jitter = float(rng.uniform(-settings.slot_jitter_seconds, settings.slot_jitter_seconds))
                        t = day_start + base + jitter
                        compliant = bool(rng.random() >= settings.violation_probability)
                        x = float(rng.uniform(1.0, width - 1.0))
                        y = float(rng.uniform(1.0, height - 1.0))
                        instances.append(
                            GroundTruthInstance(
                                instance_id=f"g-{area.space_id}-{vtype.value}-{counter:05d}",
                                vtype=vtype,
                                space_id=area.space_id,
                                time=t,
                                compliant=compliant,
                                x=x,
                                y=y,
                            )
                        )
                        counter += 1
                        base += settings.slot_period_seconds
    instances.sort(key=lambda g: (g.time, g.instance_id))
    return tuple(instances)


def _build_episodes(
    config: ScenarioConfig, model: TwinModel, rng: np.random.Generator
) -> tuple[dict[str, list[MovementSegment]], tuple[InfectionPlanEntry, ...]]:
    ep = config.episode
    scripts: dict[str, list[MovementSegment]] = {}
    plan: list[InfectionPlanEntry] = []
    if config.episode_count == 0:
        return scripts, tuple(plan)

    badges = [p.badge_id for p in model.people]
    participants_needed = ep.direct_contacts + ep.indirect_contacts + ep.overcapture_contacts
    if config.badge_count < config.episode_count + participants_needed:
        raise ConfigError(
            f"need at least {config.episode_count + participants_needed} badges for "
            f"{config.episode_count} episode(s), have {config.badge_count}"
        )
    if config.horizon_days < config.episode_count + 2:
        raise ConfigError("horizon too short for the requested episode count")

    areas = model.areas()
    # infected badges are reserved so each has exactly one visit in history
    infected_pool = badges[: config.episode_count]
    candidate_pool = badges[config.episode_count :]

    for k in range(config.episode_count):
        area = areas[k % len(areas)]
        start = (k + 1) * 86400.0 + ep.start_second_of_day
        end = start + ep.visit_duration_seconds
        infected = infected_pool[k]
        chosen = rng.choice(len(candidate_pool), size=participants_needed, replace=False)
        chosen_badges = [candidate_pool[int(i)] for i in chosen]
        direct = chosen_badges[: ep.direct_contacts]
        indirect = chosen_badges[ep.direct_contacts : ep.direct_contacts + ep.indirect_contacts]
        overcapture = chosen_badges[ep.direct_contacts + ep.indirect_contacts :]

        cx, cy = area.geometry.width / 2.0, area.geometry.height / 2.0
        scripts.setdefault(infected, []).append(
            MovementSegment(area.space_id, start, end, ((cx, cy),))
        )
        for i, badge in enumerate(direct):
            scripts.setdefault(badge, []).append(
                MovementSegment(
                    area.space_id,
                    start + ep.contact_offset_seconds,
                    start + ep.contact_offset_seconds + ep.contact_duration_seconds,
                    ((cx + 0.4 + 0.02 * i, cy),),
                )
            )
        grid = [(1.5 + 2.6 * (i % 4), 1.5 + 2.2 * (i // 4 % 4)) for i in range(36)]
        for j, badge in enumerate(indirect):
            visit_start = end + 10.0 + ep.participant_spacing_seconds * j
            scripts.setdefault(badge, []).append(
                MovementSegment(
                    area.space_id,
                    visit_start,
                    visit_start + ep.participant_visit_seconds,
                    (grid[j % len(grid)],),
                )
            )
        for m, badge in enumerate(overcapture):
            visit_start = end + ep.true_linger_seconds + ep.overcapture_lead_seconds + ep.participant_spacing_seconds * m
            scripts.setdefault(badge, []).append(
                MovementSegment(
                    area.space_id,
                    visit_start,
                    visit_start + ep.participant_visit_seconds,
                    (grid[m % len(grid)],),
                )
            )
        plan.append(
            InfectionPlanEntry(
                badge_id=infected,
                reported_at=start + ep.report_delay_seconds,
                staged_space=area.space_id,
                at_risk_badges=tuple(sorted(direct + indirect)),
            )
        )
    return scripts, tuple(plan)


def build_scenario(config: ScenarioConfig, seed: int) -> Scenario:
    """Deterministically expand a config into a full scenario."""
    model = reference_model(area_count=config.area_count, badge_count=config.badge_count)
    # domain-tagged entropy keeps this stream independent of the detector RNG
    seq = np.random.SeedSequence([seed, 1])
    opp_seed, episode_seed = seq.spawn(2)
    opportunities = _build_opportunities(config, model, np.random.default_rng(opp_seed))
    scripts, plan = _build_episodes(config, model, np.random.default_rng(episode_seed))
    if plan and max(e.reported_at for e in plan) > config.horizon_seconds:
        raise ConfigError("infection reports fall outside the horizon")
    return Scenario(
        name=config.name,
        model=model,
        horizon_seconds=config.horizon_seconds,
        opportunities=opportunities,
        movement_scripts={b: tuple(segs) for b, segs in scripts.items()},
        infection_plan=plan,
        seed=seed,
    )
