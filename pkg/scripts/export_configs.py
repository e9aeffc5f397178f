"""Write the reference scenario configs and a demo service setup to configs/."""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from foodwatch.reference import reference_model
from foodwatch.sim.presets import preset, preset_names
from foodwatch.twin import dump_model

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def main() -> None:
    CONFIGS.mkdir(exist_ok=True)
    for name in preset_names():
        path = CONFIGS / f"{name.replace('-', '_')}.json"
        path.write_text(json.dumps(preset(name).to_json(), indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")

    demo = CONFIGS / "demo"
    demo.mkdir(exist_ok=True)
    (demo / "model.json").write_bytes(dump_model(reference_model()))
    (demo / "credentials.json").write_text(
        json.dumps(
            [
                {"source_id": "cv", "api_key": "demo-vision-key", "rate_limit": 5000},
                {"source_id": "ble", "api_key": "demo-location-key", "rate_limit": 5000},
            ],
            indent=2,
        )
        + "\n"
    )
    (demo / "service.json").write_text(
        json.dumps(
            {
                "model_path": "model.json",
                "credentials_path": "credentials.json",
                "log_dir": "logs",
                "listen_host": "127.0.0.1",
                "listen_port": 8700,
                "clock": "system",
                "tick_interval_seconds": 900,
            },
            indent=2,
        )
        + "\n"
    )
    print(f"wrote demo service config under {demo}")


if __name__ == "__main__":
    main()
