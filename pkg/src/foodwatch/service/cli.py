"""Operator command line.

Exit codes: 0 on success, 1 on domain errors (invalid model, failed
startup, bad scenario), 2 on usage errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from ..errors import FoodwatchError
from ..pipeline import CredentialStore, Pipeline, SourceCredential
from ..reference import reference_model
from ..sim import build_scenario, preset, preset_names, run_end_to_end
from ..sim.detectors import DetectorProfile, perfect_profile, pilot_profile
from ..sim.metrics import MetricsReport
from ..sim.presets import DEFAULT_SEED
from ..sim.scenario import ScenarioConfig
from ..twin import dump_model, load_model, parse_model, parse_overlay, derive_model, validate_model


@click.group()
def main():
    """Food factory compliance monitoring."""


def _fail(message: str) -> None:
    click.echo(message, err=True)
    sys.exit(1)


@main.command("validate-model")
@click.argument("model_file", type=click.Path(exists=True, path_type=Path))
def validate_model_cmd(model_file: Path):
    """Validate a model document; prints one line per broken invariant."""
    try:
        model = parse_model(model_file.read_bytes())
    except FoodwatchError as exc:
        _fail(f"parse error: {exc}")
    report = validate_model(model)
    if report:
        for issue in report:
            click.echo(f"{issue.code}  {issue.path}  {issue.message}")
        sys.exit(1)
    click.echo("valid")


@main.command("derive-model")
@click.argument("template_file", type=click.Path(exists=True, path_type=Path))
@click.argument("overlay_file", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_file", type=click.Path(path_type=Path), required=True)
def derive_model_cmd(template_file: Path, overlay_file: Path, out_file: Path):
    """Apply an overlay to a template model and write the derived model."""
    try:
        template = load_model(template_file.read_bytes())
        overlay = parse_overlay(overlay_file.read_bytes())
        derived = derive_model(template, overlay)
    except FoodwatchError as exc:
        _fail(str(exc))
    out_file.write_bytes(dump_model(derived))
    click.echo(f"wrote {out_file}")


def _load_scenario_config(name_or_path: str) -> ScenarioConfig:
    if name_or_path in preset_names():
        return preset(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        raise FoodwatchError(
            f"{name_or_path!r} is neither a preset ({', '.join(preset_names())}) nor a config file"
        )
    return ScenarioConfig.from_file(path)


def _profile(name: str, sensitivity: float, specificity: float) -> DetectorProfile:
    if name == "perfect":
        return perfect_profile()
    if name == "pilot":
        return pilot_profile()
    return DetectorProfile.uniform(sensitivity=sensitivity, specificity=specificity)


@main.command("simulate")
@click.option("--config", "config_ref", default="pilot-jigani", show_default=True, help="preset name or config JSON path")
@click.option("--seed", default=DEFAULT_SEED, show_default=True, type=int)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--profile", "profile_name", type=click.Choice(["pilot", "perfect", "custom"]), default="pilot", show_default=True)
@click.option("--sensitivity", default=0.97, show_default=True)
@click.option("--specificity", default=0.99, show_default=True)
def simulate_cmd(config_ref, seed, out_dir: Path, profile_name, sensitivity, specificity):
    """Build a scenario, run it end to end, and write the streams + metrics."""
    out_dir.mkdir(parents=True, exist_ok=True)
    profile = _profile(profile_name, sensitivity, specificity)
    try:
        config = _load_scenario_config(config_ref)
        scenario = build_scenario(config, seed)
        with open(out_dir / "ingest_log.ndjson", "w", encoding="utf-8") as log:
            result = run_end_to_end(scenario, profile, seed=seed, event_log=log)
    except FoodwatchError as exc:
        _fail(str(exc))
    from ..sim.detectors import simulate_detectors

    events, pings = simulate_detectors(scenario, profile, seed)
    _write_ndjson(out_dir / "events.ndjson", (e.to_json() for e in events))
    _write_ndjson(out_dir / "pings.ndjson", (p.to_json() for p in pings))
    _write_ndjson(out_dir / "ground_truth.ndjson", (g.to_json() for g in scenario.opportunities))
    (out_dir / "metrics.json").write_bytes(result.metrics.to_bytes())
    (out_dir / "snapshot.json").write_text(json.dumps(result.snapshot, indent=2, sort_keys=True))
    (out_dir / "trace_results.json").write_text(
        json.dumps([t.to_json() for t in result.trace_results], indent=2, sort_keys=True)
    )
    click.echo(
        f"scenario {scenario.name}: {len(scenario.opportunities)} opportunities, "
        f"{len(scenario.violating_instances())} violating; "
        f"{len(result.records)} violation records, {result.rejected} rejected; "
        f"{result.elapsed_seconds:.1f}s"
    )
    _echo_metrics(result.metrics)


@main.command("replay")
@click.option("--events", "events_file", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--model", "model_file", type=click.Path(exists=True, path_type=Path), default=None, help="model document; defaults to the 16-area reference model")
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None, help="write the final snapshot JSON here")
def replay_cmd(events_file: Path, model_file: Path | None, out_file: Path | None):
    """Re-feed a recorded event stream through a fresh pipeline."""
    try:
        model = load_model(model_file.read_bytes()) if model_file else reference_model()
    except FoodwatchError as exc:
        _fail(str(exc))
    from ..status import StatusEngine

    pipeline = Pipeline(model, CredentialStore([SourceCredential("replay", "replay", 10**9)]))
    status = StatusEngine(model)
    pipeline.on_publish(lambda record, now: status.record_violation(record, now))
    lines = []
    last_at = 0.0
    for raw in events_file.read_text(encoding="utf-8").splitlines():
        raw = raw.strip()
        if not raw:
            continue
        doc = json.loads(raw)
        if "event" not in doc:  # bare event stream: treat timestamp as receipt time
            doc = {"received_at": doc["timestamp"], "source_id": doc["source_id"], "event": doc}
        lines.append(json.dumps(doc))
        last_at = max(last_at, float(doc["received_at"]))
    outcomes = pipeline.replay(lines, end_time=pipeline.schedule.next_tick(last_at))
    new = sum(1 for o in outcomes if o.status.value == "accepted_new")
    dup = sum(1 for o in outcomes if o.status.value == "accepted_duplicate")
    rej = len(outcomes) - new - dup
    click.echo(f"replayed {len(outcomes)} events: {new} new, {dup} duplicates, {rej} rejected")
    click.echo(f"published: {len(pipeline.published_records())}")
    if out_file:
        out_file.write_text(json.dumps(status.snapshot(last_at), indent=2, sort_keys=True))
        click.echo(f"wrote {out_file}")


@main.command("report")
@click.argument("metrics_file", type=click.Path(exists=True, path_type=Path))
def report_cmd(metrics_file: Path):
    """Render a metrics.json as a human-readable table."""
    try:
        report = MetricsReport.from_json(json.loads(metrics_file.read_text()))
    except (json.JSONDecodeError, KeyError) as exc:
        _fail(f"bad metrics file: {exc}")
    _echo_metrics(report)


def _echo_metrics(report: MetricsReport) -> None:
    header = f"{'category':<18} {'TP':>6} {'FN':>6} {'TN':>6} {'FP':>6} {'sensitivity':>12} {'specificity':>12}"
    click.echo(header)
    click.echo("-" * len(header))
    for name, m in sorted(report.categories.items()):
        sens = f"{m.sensitivity:.4f}" if m.sensitivity is not None else "n/a"
        spec = f"{m.specificity:.4f}" if m.specificity is not None else "n/a"
        click.echo(f"{name:<18} {m.tp:>6} {m.fn:>6} {m.tn:>6} {m.fp:>6} {sens:>12} {spec:>12}")


@main.command("trace")
@click.option("--badge", required=True)
@click.option("--at", "reported_at", type=float, required=True)
@click.option("--lookback", type=float, default=None)
@click.option("--server", default="http://127.0.0.1:8700", show_default=True)
def trace_cmd(badge, reported_at, lookback, server):
    """Report an infection to a running service and print the trace result."""
    import httpx

    body = {"badge_id": badge, "reported_at": reported_at}
    if lookback:
        body["lookback_seconds"] = lookback
    try:
        response = httpx.post(f"{server}/infections", json=body, timeout=30.0)
    except httpx.HTTPError as exc:
        _fail(f"request failed: {exc}")
    if response.status_code != 200:
        _fail(f"service error {response.status_code}: {response.text}")
    doc = response.json()
    click.echo(f"report {doc['report_id']}: {len(doc['at_risk_spaces'])} at-risk space(s)")
    for entry in doc["at_risk_spaces"]:
        ivals = ", ".join(f"[{s:.0f}, {e:.0f}]" for s, e in entry["intervals"])
        click.echo(f"  {entry['space_id']}: {ivals}")
    click.echo(f"direct contacts:   {', '.join(doc['direct_contacts']) or '(none)'}")
    click.echo(f"indirect contacts: {', '.join(doc['indirect_contacts']) or '(none)'}")


@main.command("serve")
@click.option("--config", "config_file", type=click.Path(path_type=Path), required=True)
@click.option("--clock", "clock_mode", type=click.Choice(["system", "simulated"]), default=None, help="override the config's clock mode")
def serve_cmd(config_file: Path, clock_mode):
    """Start the HTTP service (recovers from the journal if one exists)."""
    import uvicorn

    from .runtime import build_runtime

    try:
        runtime = build_runtime(config_file, clock_mode)
    except FoodwatchError as exc:
        _fail(str(exc))
    click.echo(
        f"model {runtime.node.model.model_id}: {len(runtime.node.model.areas())} areas; "
        f"journal {runtime.journal_path}"
    )
    uvicorn.run(runtime.app, host=runtime.config.listen_host, port=runtime.config.listen_port)


def _write_ndjson(path: Path, docs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
