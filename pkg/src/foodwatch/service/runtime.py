"""Assemble a running service from a config file.

Startup order: resolve and load every referenced file (fail fast), replay
any existing journal to rebuild state, then attach the live journal and
event-log sinks and expose the HTTP app.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI

from .app import SimulatedClock, SystemClock, create_app
from .config import ServiceConfig
from .journal import JournalWriter
from .node import ServiceNode

logger = logging.getLogger(__name__)


@dataclass
class Runtime:
    config: ServiceConfig
    node: ServiceNode
    app: FastAPI
    journal_path: Path
    clock: object

    def close(self) -> None:
        if self.node.journal is not None:
            self.node.journal.close()
        sink = self.node.pipeline._event_log
        if sink is not None and not sink.closed:
            sink.close()


def build_runtime(
    config_path: str | Path,
    clock_override: str | None = None,
    ui_dir: str | Path | None = None,
) -> Runtime:
    config = ServiceConfig.from_file(config_path)
    model = config.load_model()
    credentials = config.load_credentials()

    journal_path = config.journal_path()
    node, report = ServiceNode.recover(
        journal_path,
        model,
        credentials,
        dedup=config.dedup,
        status_config=config.status,
        trace_config=config.trace,
        tick_interval_seconds=config.tick_interval_seconds,
    )
    if report.records_applied:
        logger.info("recovered %d journal records from %s", report.records_applied, journal_path)
    if report.warning:
        logger.warning("%s", report.warning)

    node.journal = JournalWriter(journal_path)
    event_log_path = config.event_log_path()
    event_log_path.parent.mkdir(parents=True, exist_ok=True)
    node.pipeline.set_event_log(open(event_log_path, "a", encoding="utf-8"))

    mode = clock_override or config.clock
    clock = SimulatedClock() if mode == "simulated" else SystemClock()
    if ui_dir is None:
        candidate = Path(__file__).resolve().parents[3] / "frontend" / "dist"
        ui_dir = candidate if candidate.exists() else None
    app = create_app(node, clock, ui_dir=ui_dir)
    app.state.config_hashes = config.config_hashes()
    return Runtime(config=config, node=node, app=app, journal_path=journal_path, clock=clock)
