"""Service configuration: file references resolve at startup or not at all."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import FoodwatchError, StartupError
from ..pipeline import CredentialStore, DedupConfig
from ..status import StatusConfig
from ..tracing import TraceConfig
from ..twin import TwinModel, derive_model, load_model, parse_overlay


@dataclass
class ServiceConfig:
    model_path: str
    credentials_path: str
    overlay_paths: list[str] = field(default_factory=list)
    log_dir: str = "logs"
    listen_host: str = "127.0.0.1"
    listen_port: int = 8700
    clock: str = "system"  # or "simulated"
    tick_interval_seconds: int = 900
    dedup: DedupConfig = field(default_factory=DedupConfig)
    status: StatusConfig = field(default_factory=StatusConfig)
    trace: TraceConfig = field(default_factory=TraceConfig)
    base_dir: Path = field(default_factory=Path)

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        path = Path(path)
        if not path.exists():
            raise StartupError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise StartupError(f"config file {path} is not valid JSON: {exc}") from None
        cfg = cls(
            model_path=doc["model_path"],
            credentials_path=doc["credentials_path"],
            overlay_paths=list(doc.get("overlay_paths", [])),
            log_dir=doc.get("log_dir", "logs"),
            listen_host=doc.get("listen_host", "127.0.0.1"),
            listen_port=int(doc.get("listen_port", 8700)),
            clock=doc.get("clock", "system"),
            tick_interval_seconds=int(doc.get("tick_interval_seconds", 900)),
            dedup=DedupConfig(**doc.get("dedup", {})),
            status=StatusConfig(**doc.get("status", {})),
            trace=TraceConfig(**doc.get("trace", {})),
            base_dir=path.parent,
        )
        cfg.check_files()
        return cfg

    def _resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p

    def check_files(self) -> None:
        for rel in [self.model_path, self.credentials_path, *self.overlay_paths]:
            path = self._resolve(rel)
            if not path.exists():
                raise StartupError(f"referenced file not found: {path}")

    def load_model(self) -> TwinModel:
        try:
            model = load_model(self._resolve(self.model_path).read_bytes())
        except FoodwatchError as exc:
            raise StartupError(f"cannot load model {self._resolve(self.model_path)}: {exc}") from exc
        for rel in self.overlay_paths:
            try:
                overlay = parse_overlay(self._resolve(rel).read_bytes())
                model = derive_model(model, overlay)
            except FoodwatchError as exc:
                raise StartupError(f"cannot apply overlay {self._resolve(rel)}: {exc}") from exc
        return model

    def load_credentials(self) -> CredentialStore:
        path = self._resolve(self.credentials_path)
        try:
            return CredentialStore.from_json(path.read_bytes())
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise StartupError(f"cannot load credentials {path}: {exc}") from exc

    def config_hashes(self) -> dict[str, str]:
        hashes = {}
        for rel in [self.model_path, self.credentials_path, *self.overlay_paths]:
            path = self._resolve(rel)
            hashes[rel] = hashlib.sha256(path.read_bytes()).hexdigest()
        return hashes

    def journal_path(self) -> Path:
        return self._resolve(self.log_dir) / "journal.ndjson"

    def event_log_path(self) -> Path:
        return self._resolve(self.log_dir) / "events.ndjson"
