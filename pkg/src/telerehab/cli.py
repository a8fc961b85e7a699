"""Command line front end: content management, synthetic playback,
session scoring, recommendations, analytics, and the network simulator.

Output discipline: results go to stdout as JSON (or CSV where tabular),
errors go to stderr as a single "error: ..." line with a nonzero exit,
and anything seeded is byte-identical across runs.
"""
from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import analytics, knowledge
from .errors import ConflictError, TelerehabError, UnknownNameError, ValidationError
from .fixtures import MOVEMENTS, exercise_playback, seed_demo_store
from .movement import (
    KinematicComponent,
    MovementType,
    movement_to_doc,
    record_movement,
    suggest_relevant_angles,
)
from .posture import PostureLibrary, concept_to_doc, register_posture
from .service import apply_session_upload, create_app
from .session import (
    Exercise,
    PlanEntry,
    SessionPlan,
    event_to_doc,
    exercise_from_doc,
    exercise_to_doc,
    report_to_doc,
    start_session,
)
from .skeleton import JointId, load_recording, save_recording
from .store import Store
from .telestream import qos_to_csv, qos_to_doc, run_scenario

log = logging.getLogger(__name__)

DEFAULT_STORE = "./telerehab-store"


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _wrap_errors(fn):
    """Domain errors become one stderr line and a nonzero exit."""
    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TelerehabError as exc:
            _fail(str(exc))
    return inner


def _store(ctx: click.Context) -> Store:
    return Store(ctx.obj["store"])


def _fmt(ctx: click.Context) -> str:
    return ctx.obj["format"]


def _read_doc(path: str) -> dict:
    text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValidationError("document file must hold one JSON object")
    return doc


def _read_recording(path: str):
    data = sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
    return load_recording(data)


def _put_document(store: Store, collection: str, doc_id: str, doc: dict) -> None:
    """Insert; an identical re-add only warns, a differing one conflicts."""
    doc = dict(doc)
    doc.pop("id", None)
    if store.exists(collection, doc_id):
        existing, _ = store.get(collection, doc_id)
        if existing == doc:
            click.echo(f"warning: {collection}/{doc_id} unchanged, nothing to do", err=True)
            return
        raise ConflictError(f"{collection}/{doc_id} exists with different content")
    store.put(collection, doc_id, doc, if_absent=True)
    click.echo(_dumps({"id": doc_id, "collection": collection, "stored": True}))


def _emit_listing(ctx: click.Context, collection: str) -> None:
    store = _store(ctx)
    if _fmt(ctx) == "csv":
        click.echo("id")
        for doc_id in store.list_ids(collection):
            click.echo(doc_id)
    else:
        click.echo(_dumps({"items": store.list_docs(collection)}))


@click.group()
@click.option(
    "--store",
    "store_path",
    envvar="TELEREHAB_STORE",
    default=DEFAULT_STORE,
    show_default=True,
    help="Document store directory (env TELEREHAB_STORE).",
)
@click.option(
    "--format",
    "output_format",
    type=click.Choice(["json", "csv"]),
    default="json",
    show_default=True,
    help="Output format where tabular data is produced.",
)
@click.option("--verbose", is_flag=True, help="Log engine internals to stderr.")
@click.pass_context
def main(ctx: click.Context, store_path: str, output_format: str, verbose: bool) -> None:
    """Telerehabilitation engine: recognize and score exercises from
    skeleton streams, manage clinical content, and simulate the link."""
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.ensure_object(dict)
    ctx.obj["store"] = store_path
    ctx.obj["format"] = output_format


# ----------------------------------------------------------------------
# Content collections
# ----------------------------------------------------------------------

@main.group()
def posture() -> None:
    """Posture concepts built from demonstration recordings."""


@posture.command("add")
@click.argument("name")
@click.option("--recording", "recording_path", required=True, help="Skeleton recording (JSONL), - for stdin.")
@click.option("--tau", type=float, default=None, help="Match radius override.")
@click.pass_context
@_wrap_errors
def posture_add(ctx: click.Context, name: str, recording_path: str, tau: float | None) -> None:
    """Aggregate the recording's frames into a named posture concept."""
    store = _store(ctx)
    library = store.posture_library()
    recording = _read_recording(recording_path)
    kwargs = {"tau": tau} if tau is not None else {}
    # Register against a scratch library so a re-add of the same name can
    # still compute the would-be document and compare it to the store.
    scratch = PostureLibrary(basis=library.basis)
    concept = register_posture(scratch, name, recording.frames, **kwargs)
    _put_document(store, "postures", name, concept_to_doc(concept))


@posture.command("list")
@click.pass_context
@_wrap_errors
def posture_list(ctx: click.Context) -> None:
    _emit_listing(ctx, "postures")


@main.group()
def movement() -> None:
    """Movements: posture-to-posture transitions with reference curves."""


def _parse_component(text: str) -> KinematicComponent:
    parts = text.split(":")
    if len(parts) != 4:
        raise ValidationError(
            f"component {text!r} must be JOINT:LOCATION:TYPE:ROM, e.g. HipLeft:HipJoint:flexion:40"
        )
    joint_name, location, type_name, rom_text = parts
    try:
        joint = JointId[joint_name]
    except KeyError:
        raise UnknownNameError(f"unknown joint {joint_name!r}") from None
    return KinematicComponent(
        joint=joint,
        location=location,
        type=MovementType.parse(type_name),
        rom=float(rom_text),
    )


@movement.command("add")
@click.argument("name")
@click.option("--recording", "recording_path", required=True, help="Demonstration recording (JSONL), - for stdin.")
@click.option("--initial", required=True, help="Posture the recording starts in.")
@click.option("--final", required=True, help="Posture the recording ends in.")
@click.option("--component", "components", multiple=True, required=True,
              help="JOINT:LOCATION:TYPE:ROM, repeatable.")
@click.option("--angles", default=None,
              help="Comma-separated relevant angle names; skips the suggestion gate.")
@click.option("--yes", is_flag=True, help="Accept the suggested relevant angles.")
@click.pass_context
@_wrap_errors
def movement_add(
    ctx: click.Context,
    name: str,
    recording_path: str,
    initial: str,
    final: str,
    components: tuple[str, ...],
    angles: str | None,
    yes: bool,
) -> None:
    """Record a movement; relevant angles default to what visibly moved.

    Angles whose endpoints differ by more than 10 degrees are suggested;
    pass --yes to accept the suggestion or --angles to choose your own.
    """
    store = _store(ctx)
    library = store.posture_library()
    recording = _read_recording(recording_path)
    suggested = suggest_relevant_angles(recording, library.basis)
    if angles is not None:
        chosen = tuple(a.strip() for a in angles.split(",") if a.strip())
    elif yes:
        chosen = suggested
    else:
        if suggested:
            click.echo(_dumps({"suggested_angles": list(suggested)}))
            _fail(
                "endpoints differ by more than 10 degrees on: "
                + ",".join(suggested)
                + "; rerun with --yes to accept or --angles to choose"
            )
        _fail("no angle moved more than 10 degrees; pass --angles explicitly")
    parsed = tuple(_parse_component(c) for c in components)
    built = record_movement(
        name, recording, initial=initial, final=final,
        relevant_angles=chosen, components=parsed, library=library,
    )
    _put_document(store, "movements", name, movement_to_doc(built))


@movement.command("list")
@click.pass_context
@_wrap_errors
def movement_list(ctx: click.Context) -> None:
    _emit_listing(ctx, "movements")


@main.group()
def exercise() -> None:
    """Exercises: chains of movements whose endpoints connect."""


@exercise.command("add")
@click.argument("name")
@click.option("--movements", "movement_names", required=True,
              help="Comma-separated movement names, chained in order.")
@click.option("--description", default="", help="One-line description.")
@click.option("--series", type=int, default=1, show_default=True)
@click.option("--reps", type=int, default=3, show_default=True)
@click.pass_context
@_wrap_errors
def exercise_add(
    ctx: click.Context,
    name: str,
    movement_names: str,
    description: str,
    series: int,
    reps: int,
) -> None:
    store = _store(ctx)
    built = Exercise(
        name=name,
        movements=tuple(m.strip() for m in movement_names.split(",") if m.strip()),
        description=description,
        default_series=series,
        default_reps=reps,
    )
    _put_document(store, "exercises", name, exercise_to_doc(built))


@exercise.command("list")
@click.pass_context
@_wrap_errors
def exercise_list(ctx: click.Context) -> None:
    _emit_listing(ctx, "exercises")


@main.group()
def protocol() -> None:
    """Treatment protocols: phased conditions over measured ROM and pain."""


@protocol.command("add")
@click.argument("doc_path")
@click.pass_context
@_wrap_errors
def protocol_add(ctx: click.Context, doc_path: str) -> None:
    """Store a protocol document (JSON file, - for stdin)."""
    doc = _read_doc(doc_path)
    doc_id = doc.get("id", "")
    if not doc_id:
        raise ValidationError("protocol document needs an 'id'")
    _put_document(_store(ctx), "protocols", doc_id, doc)


@protocol.command("list")
@click.pass_context
@_wrap_errors
def protocol_list(ctx: click.Context) -> None:
    _emit_listing(ctx, "protocols")


@main.group()
def test() -> None:
    """Question-based self-assessments."""


@test.command("add")
@click.argument("doc_path")
@click.pass_context
@_wrap_errors
def test_add(ctx: click.Context, doc_path: str) -> None:
    """Store a test document (JSON file, - for stdin)."""
    doc = _read_doc(doc_path)
    doc_id = doc.get("id", "")
    if not doc_id:
        raise ValidationError("test document needs an 'id'")
    _put_document(_store(ctx), "tests", doc_id, doc)


@test.command("list")
@click.pass_context
@_wrap_errors
def test_list(ctx: click.Context) -> None:
    _emit_listing(ctx, "tests")


@main.group()
def patient() -> None:
    """Patient records: anamnesis, explorations, pain reports."""


@patient.command("add")
@click.argument("doc_path")
@click.pass_context
@_wrap_errors
def patient_add(ctx: click.Context, doc_path: str) -> None:
    """Store a patient document (JSON file, - for stdin)."""
    doc = _read_doc(doc_path)
    doc_id = doc.get("id", "")
    if not doc_id:
        raise ValidationError("patient document needs an 'id'")
    _put_document(_store(ctx), "patients", doc_id, doc)


@patient.command("list")
@click.pass_context
@_wrap_errors
def patient_list(ctx: click.Context) -> None:
    _emit_listing(ctx, "patients")


# ----------------------------------------------------------------------
# Synthetic playback and session scoring
# ----------------------------------------------------------------------

@main.command()
@click.argument("exercise_name")
@click.option("--reps", type=int, default=1, show_default=True)
@click.option("--series", type=int, default=1, show_default=True)
@click.option("--noise-sigma", type=float, default=0.0, show_default=True,
              help="Per-axis joint noise in meters.")
@click.option("--warp", type=float, default=0.0, show_default=True,
              help="Peak tempo deviation fraction, e.g. 0.1 for +-10%.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", default="-", show_default=True,
              help="Output file for the JSONL recording, - for stdout.")
@click.pass_context
@_wrap_errors
def synth(
    ctx: click.Context,
    exercise_name: str,
    reps: int,
    series: int,
    noise_sigma: float,
    warp: float,
    seed: int,
    out_path: str,
) -> None:
    """Generate a synthetic performance recording for a demo exercise.

    The exercise is read from the store; every movement it chains must
    come from the built-in demonstration set, since only those have
    underlying pose geometry to animate.
    """
    store = _store(ctx)
    doc, _ = store.get("exercises", exercise_name)
    built = exercise_from_doc({**doc, "id": exercise_name})
    for mov in built.movements:
        base = mov[:-4] if mov.endswith("_rev") else mov
        if base not in MOVEMENTS:
            raise UnknownNameError(
                f"movement {mov!r} has no synthetic geometry; only demo movements can be synthesized"
            )
    recording = exercise_playback(
        built, reps=reps, series=series, noise_sigma=noise_sigma, warp_amp=warp, seed=seed
    )
    payload = save_recording(recording)
    if out_path == "-":
        sys.stdout.buffer.write(payload)
    else:
        Path(out_path).write_bytes(payload)
        click.echo(_dumps({"frames": len(recording.frames), "out": out_path}), err=True)


@main.group()
def session() -> None:
    """Run recorded performances through the scoring engine."""


@session.command("run")
@click.option("--patient", "patient_id", required=True)
@click.option("--exercise", "exercise_name", required=True)
@click.option("--recording", "recording_path", required=True,
              help="Performance recording (JSONL), - for stdin.")
@click.option("--reps", type=int, default=None, help="Defaults to the exercise's default_reps.")
@click.option("--series", type=int, default=None, help="Defaults to the exercise's default_series.")
@click.option("--hold-time", type=float, default=0.4, show_default=True,
              help="Seconds a posture must be held to register.")
@click.option("--date", "session_date", default=None, help="Session date, YYYY-MM-DD.")
@click.option("--no-upload", is_flag=True, help="Score only; do not store the report.")
@click.pass_context
@_wrap_errors
def session_run(
    ctx: click.Context,
    patient_id: str,
    exercise_name: str,
    recording_path: str,
    reps: int | None,
    series: int | None,
    hold_time: float,
    session_date: str | None,
    no_upload: bool,
) -> None:
    """Score a recording; feedback events stream out one JSON line each.

    The final line summarizes the stored report and any phase change.
    """
    store = _store(ctx)
    store.get("patients", patient_id)
    library = store.posture_library()
    movements = store.movements_map()
    exercises = store.exercises_map()
    if exercise_name not in exercises:
        raise UnknownNameError(f"unknown exercise {exercise_name!r}")
    target = exercises[exercise_name]
    plan = SessionPlan(
        entries=(
            PlanEntry(
                exercise=exercise_name,
                series=series if series is not None else target.default_series,
                reps=reps if reps is not None else target.default_reps,
            ),
        ),
        hold_time=hold_time,
        timeout_per_movement=30.0,
    )
    recording = _read_recording(recording_path)
    engine = start_session(
        plan, exercises, movements, library, patient=patient_id, record_frames=True
    )
    for frame in recording.frames:
        for event in engine.feed_frame(frame):
            click.echo(_dumps(event_to_doc(event)))
        if engine.completed:
            break
    report = engine.finish(abort=not engine.completed)
    doc = report_to_doc(report)
    if session_date:
        doc["date"] = session_date
    if no_upload:
        click.echo(_dumps({"aborted": report.aborted, "stored": False}))
        return
    result = apply_session_upload(store, doc)
    result["aborted"] = report.aborted
    click.echo(_dumps(result))


# ----------------------------------------------------------------------
# Recommendations and analytics
# ----------------------------------------------------------------------

@main.command()
@click.option("--patient", "patient_id", required=True)
@click.option("--protocol", "protocol_name", default=None,
              help="Defaults to the protocol on the patient record.")
@click.pass_context
@_wrap_errors
def recommend(ctx: click.Context, patient_id: str, protocol_name: str | None) -> None:
    """Phase classification plus recommended and contraindicated exercises."""
    store = _store(ctx)
    record = store.patient(patient_id)
    name = protocol_name or record.protocol
    if not name:
        raise ValidationError(f"patient {patient_id!r} has no protocol; pass --protocol")
    proto = store.protocol(name)
    result = knowledge.recommend_exercises(
        record, proto, store.exercise_movements(), store.overrides_for(patient_id)
    )
    if _fmt(ctx) == "csv":
        click.echo("kind,exercise,detail")
        for rec in result.recommended:
            click.echo(f"recommended,{rec.exercise},{rec.provenance}")
        for ex_name, rule in result.contraindicated:
            click.echo(f'contraindicated,{ex_name},"{rule}"')
        return
    click.echo(
        _dumps(
            {
                "patient": patient_id,
                "protocol": name,
                "phase": result.phase,
                "recommended": [
                    {"exercise": r.exercise, "provenance": r.provenance}
                    for r in result.recommended
                ],
                "contraindicated": [
                    {"exercise": ex_name, "rule": rule}
                    for ex_name, rule in result.contraindicated
                ],
            }
        )
    )


@main.group()
def analyze() -> None:
    """Progress views over stored session reports."""


@analyze.command("timeseries")
@click.option("--patient", "patient_id", required=True)
@click.pass_context
@_wrap_errors
def analyze_timeseries(ctx: click.Context, patient_id: str) -> None:
    """Per-session mean ratings for one patient, date-ordered."""
    store = _store(ctx)
    store.get("patients", patient_id)
    points = analytics.patient_timeseries(store.reports_for(patient_id))
    if _fmt(ctx) == "csv":
        click.echo(analytics.timeseries_csv(points), nl=False)
        return
    click.echo(
        _dumps(
            {
                "patient": patient_id,
                "points": [
                    {
                        "ordinal": p.ordinal,
                        "date": p.date,
                        "exercise_rating": p.exercise_rating,
                        "posture_rating": p.posture_rating,
                    }
                    for p in points
                ],
            }
        )
    )


@analyze.command("cohort")
@click.pass_context
@_wrap_errors
def analyze_cohort(ctx: click.Context) -> None:
    """Mean exercise rating per session ordinal across all patients."""
    store = _store(ctx)
    series = {
        pid: analytics.patient_timeseries(store.reports_for(pid))
        for pid in store.list_ids("patients")
    }
    rows = analytics.cohort_average(series)
    if _fmt(ctx) == "csv":
        click.echo("ordinal,exercise_rating,count")
        for ordinal, mean, count in rows:
            click.echo(f"{ordinal},{mean:.6f},{count}")
        return
    click.echo(
        _dumps(
            {
                "points": [
                    {"ordinal": o, "exercise_rating": m, "count": c} for o, m, c in rows
                ]
            }
        )
    )


# ----------------------------------------------------------------------
# Network simulation and HTTP service
# ----------------------------------------------------------------------

@main.command("simulate-net")
@click.argument("scenario_path")
@click.option("--duration", type=float, default=None, help="Override the scenario duration.")
@click.option("--seed", type=int, default=None, help="Override the network seed.")
@click.pass_context
@_wrap_errors
def simulate_net(
    ctx: click.Context, scenario_path: str, duration: float | None, seed: int | None
) -> None:
    """Run a streaming scenario document and print per-channel QoS."""
    doc = _read_doc(scenario_path)
    if duration is not None:
        doc["duration"] = duration
    if seed is not None:
        doc.setdefault("network", {})["seed"] = seed
    _, report = run_scenario(doc)
    if _fmt(ctx) == "csv":
        click.echo(qos_to_csv(report), nl=False)
        return
    click.echo(_dumps(qos_to_doc(report)))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--demo", is_flag=True, help="Seed the store with the demo corpus first.")
@click.option("--token", default=None, help="Require this bearer token on /v1 routes.")
@click.pass_context
@_wrap_errors
def serve(ctx: click.Context, host: str, port: int, demo: bool, token: str | None) -> None:
    """Serve the HTTP API over the document store."""
    import uvicorn

    store_path = ctx.obj["store"]
    if demo:
        seed_demo_store(Store(store_path))
        click.echo(f"demo corpus seeded into {store_path}", err=True)
    app = create_app(store_path, token=token)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
