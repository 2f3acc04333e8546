"""Command-line pipeline: capture ingestion, model fitting, compensation,
simulation, optimization, waveform export, reports, and the service."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import report as reporting
from .actuation import parse_table, serialize_table, table_from_dict, table_to_dict
from .capture import (
    GRID_STEP_MM,
    PressSegment,
    average_presses,
    filter_trace,
    grid_size,
    parse_capture,
    segment_and_grid,
    serialize_capture,
    synchronize,
)
from .compensation import compensate_model
from .errors import ButtonSimError, ParseError, ValidationError
from .model import build_model, model_to_dict, parse_model, serialize_model
from .optimizer import SimulatedUser, optimize
from .plant import VirtualPlant, parse_plant
from .render import config_for_model, constant_velocity_press, run_press, trajectory_from_dict
from .spline import DEFAULT_PENALTY
from .synthetic import STANDARD_VELOCITIES, synthetic_capture
from .vibration import detect_onset, extract_features, generate_templates, synthesize, write_wav

USAGE_ERROR = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})")


# -- ingest ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    velocities = []
    button_id = None
    travel = None
    for capture_path in args.capture:
        session = parse_capture(Path(capture_path).read_bytes())
        button_id = button_id or session.meta.button_id
        travel = travel or session.meta.travel_range_mm
        if abs(session.meta.travel_range_mm - travel) > 1e-9:
            raise ValidationError(f"{capture_path}: travel range differs from first capture")
        trace = filter_trace(synchronize(session), args.sigma_filter, args.sigma_filter)
        segments = segment_and_grid(
            trace, travel, session.meta.nominal_velocity_mm_s, include_release=args.release
        )
        presses = [s for s in segments if s.stroke == "press"]
        averaged = average_presses(presses, args.sigma_smooth)
        entry = {
            "velocity_mm_s": session.meta.nominal_velocity_mm_s,
            "force_cN": averaged.force_cN.tolist(),
            "sound": averaged.sound.tolist(),
            "press_count": len(presses),
            "complete_count": sum(1 for s in presses if s.complete),
        }
        if args.release:
            releases = [s for s in segments if s.stroke == "release"]
            if any(s.complete for s in releases):
                entry["release_force_cN"] = average_presses(
                    releases, args.sigma_smooth
                ).force_cN.tolist()
        velocities.append(entry)
        print(
            f"{capture_path}: {len(presses)} presses "
            f"({entry['complete_count']} complete) at "
            f"{session.meta.nominal_velocity_mm_s:g} mm/s"
        )
    payload = {
        "button_id": button_id,
        "travel_range_mm": travel,
        "grid_mm": GRID_STEP_MM,
        "velocities": sorted(velocities, key=lambda e: e["velocity_mm_s"]),
    }
    Path(args.out).write_text(json.dumps(payload))
    print(f"wrote {args.out}")
    return 0


def _segments_from_presses(payload: dict) -> tuple[dict[float, PressSegment], dict[float, PressSegment]]:
    travel = float(payload["travel_range_mm"])
    presses: dict[float, PressSegment] = {}
    releases: dict[float, PressSegment] = {}
    for entry in payload["velocities"]:
        v = float(entry["velocity_mm_s"])
        presses[v] = PressSegment(
            velocity_nominal_mm_s=v,
            travel_range_mm=travel,
            force_cN=np.asarray(entry["force_cN"], dtype=float),
            sound=np.asarray(entry.get("sound", np.zeros(grid_size(travel))), dtype=float),
            complete=True,
        )
        if entry.get("release_force_cN"):
            releases[v] = PressSegment(
                velocity_nominal_mm_s=v,
                travel_range_mm=travel,
                force_cN=np.asarray(entry["release_force_cN"], dtype=float),
                sound=np.zeros(grid_size(travel)),
                complete=True,
                stroke="release",
            )
    return presses, releases


def _detect_vibration(segments: dict[float, PressSegment], travel: float):
    """Onset + features from the gridded sound channels; None triggers the
    human-in-the-loop path."""
    onsets = []
    for v, seg in sorted(segments.items()):
        onset = detect_onset(seg.sound, travel)
        if onset is None:
            continue
        onsets.append((v, onset, seg))
    if not onsets:
        return None
    v, onset, seg = onsets[0]
    onset_median = float(np.median([o for _, o, _ in onsets]))
    start = int(onset / GRID_STEP_MM)
    window = seg.sound[start : start + grid_size(travel) // 2]
    sample_rate = v / GRID_STEP_MM  # bins per second at this press speed
    try:
        duration_ms, frequency_hz = extract_features(window, sample_rate)
    except ButtonSimError:
        return None
    from .vibration import VibrationDescriptor

    bank = generate_templates(duration_ms, frequency_hz)
    return VibrationDescriptor(
        onset_mm=onset_median,
        duration_ms=duration_ms,
        frequency_hz=frequency_hz,
        template_id=bank[0].template_id,
    )


def cmd_fit(args) -> int:
    payload = _read_json(args.presses)
    segments, release_segments = _segments_from_presses(payload)
    travel = float(payload["travel_range_mm"])
    activation = args.activation if args.activation is not None else travel / 2
    vibration = _detect_vibration(segments, travel)
    if vibration is None:
        print("no vibration onset detected; model left for human-in-the-loop tuning")
    model = build_model(
        segments,
        button_id=str(payload["button_id"]),
        activation_point_mm=activation,
        vibration=vibration,
        k_range=(args.k_min, args.k_max),
        penalty=args.penalty,
        release_per_velocity=release_segments or None,
    )
    Path(args.out).write_text(serialize_model(model))
    report = {
        str(v): {"best_k": r.k, "rmse_cN": r.rmse_cN, "bic_star": r.bic_star}
        for v, r in model.fit_reports.items()
    }
    report_path = Path(args.out).with_suffix(".report.json")
    report_path.write_text(json.dumps(report, indent=2))
    for v, r in sorted(model.fit_reports.items()):
        print(f"{v:g} mm/s: k={r.k} rmse={r.rmse_cN:.3f} cN bic*={r.bic_star:.1f}")
    print(f"wrote {args.out} and {report_path}")
    if args.figures:
        out = Path(args.figures)
        reporting.model_curves_png(model, out / "model_curves.png")
        reporting.model_curves_csv(model, out / "model_curves.csv")
        print(f"figures in {out}")
    return 0


def cmd_compensate(args) -> int:
    model = parse_model(Path(args.model).read_text())
    plant = (
        parse_plant(Path(args.plant).read_text()) if args.plant else VirtualPlant()
    )
    velocities = (
        [float(v) for v in args.velocities.split(",")] if args.velocities else None
    )
    table, traces = compensate_model(
        model,
        plant,
        velocities=velocities,
        runs=args.runs,
        max_iters=args.max_iters,
        tol_cN=args.tol,
        interpolate_to=args.interpolate,
    )
    Path(args.out).write_text(serialize_table(table))
    for v, runs in sorted(traces.items()):
        finals = ", ".join(f"{errs[-1]:.2f}" for errs in runs)
        print(f"{v:g} mm/s: final errors [{finals}] cN over {len(runs)} runs")
    print(f"wrote {args.out}")
    if args.figures:
        out = Path(args.figures)
        reporting.error_trace_png(traces, out / "compensation_errors.png")
        reporting.error_trace_csv(traces, out / "compensation_errors.csv")
        reporting.actuation_png(table, out / "actuation.png")
        reporting.actuation_csv(table, out / "actuation.csv")
        print(f"figures in {out}")
    return 0


def cmd_simulate(args) -> int:
    table = parse_table(Path(args.actuation).read_text())
    model = parse_model(Path(args.model).read_text()) if args.model else None
    plant = parse_plant(Path(args.plant).read_text()) if args.plant else VirtualPlant()
    if args.trajectory:
        trajectory = trajectory_from_dict(_read_json(args.trajectory))
    else:
        travel = model.travel_range_mm if model else table.travel_range_mm
        trajectory = constant_velocity_press(
            travel, args.velocity, rest_ms=40, hold_ms=40
        )
    preset = None
    if args.preset:
        from .render import load_preset

        preset = load_preset(args.preset)
    if model is not None:
        config = config_for_model(model, preset=preset)
    else:
        from .render import SimConfig

        config = SimConfig(
            travel_range_mm=table.travel_range_mm,
            activation_point_mm=table.travel_range_mm / 2,
            preset=preset,
        )
    trace = run_press(table.curves, trajectory, config, plant, target_model=model)
    Path(args.out).write_text(trace.to_jsonl() + "\n")
    print(json.dumps(trace.summary))
    print(f"wrote {args.out}")
    if args.figures:
        out = Path(args.figures)
        records = [r.to_dict() for r in trace.records]
        reporting.trace_overlay_png(records, model, out / "trace_overlay.png")
        reporting.trace_csv(records, out / "trace.csv")
        print(f"figures in {out}")
    return 0


def cmd_optimize(args) -> int:
    config = _read_json(args.config) if args.config else {}
    user_cfg = config.get("user", {})
    user = SimulatedUser(
        base_asynchrony_ms=float(user_cfg.get("base_asynchrony_ms", 100.0)),
        haptic_gain_ms=float(user_cfg.get("haptic_gain_ms", 35.0)),
        motor_noise_sigma_ms=float(user_cfg.get("motor_noise_sigma_ms", 5.0)),
        seed=int(config.get("seed", 0)),
    )
    best, history = optimize(
        user,
        difficulty=str(config.get("difficulty", "easy")),
        budget=int(config.get("budget", 30)),
        trials_per_eval=int(config.get("trials_per_eval", 20)),
    )
    with open(args.out, "w") as fh:
        for entry in history:
            fh.write(json.dumps(entry) + "\n")
    print(json.dumps({"best_params": best.to_dict(), "incumbent_ms": history[-1]["incumbent_ms"]}))
    print(f"wrote {args.out}")
    if args.figures:
        out = Path(args.figures)
        reporting.history_png(history, out / "optimization.png")
        reporting.history_csv(history, out / "optimization.csv")
        print(f"figures in {out}")
    return 0


def cmd_export_wave(args) -> int:
    model = parse_model(Path(args.model).read_text())
    if model.vibration is None:
        raise ValidationError("model has no vibration descriptor to export")
    bank = generate_templates(model.vibration.duration_ms, model.vibration.frequency_hz)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "templates.json").write_text(json.dumps([t.to_dict() for t in bank], indent=2))
    for template in bank:
        samples = synthesize(template, args.rate)
        write_wav(out / f"{template.template_id}.wav", samples, args.rate)
    print(f"wrote {len(bank)} templates to {out}")
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    written = []
    model = parse_model(Path(args.model).read_text()) if args.model else None
    if model is not None:
        written.append(reporting.model_curves_png(model, out / "model_curves.png"))
        written.append(reporting.model_curves_csv(model, out / "model_curves.csv"))
    if args.actuation:
        table = parse_table(Path(args.actuation).read_text())
        written.append(reporting.actuation_png(table, out / "actuation.png"))
        written.append(reporting.actuation_csv(table, out / "actuation.csv"))
    if args.trace:
        records = [
            json.loads(line)
            for line in Path(args.trace).read_text().splitlines()
            if line.strip()
        ]
        written.append(reporting.trace_overlay_png(records, model, out / "trace_overlay.png"))
        written.append(reporting.trace_csv(records, out / "trace.csv"))
    if args.history:
        history = [
            json.loads(line)
            for line in Path(args.history).read_text().splitlines()
            if line.strip()
        ]
        written.append(reporting.history_png(history, out / "optimization.png"))
        written.append(reporting.history_csv(history, out / "optimization.csv"))
    if not written:
        raise ValidationError("nothing to report: pass --model/--actuation/--trace/--history")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_synth_capture(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    velocities = [float(v) for v in args.velocities.split(",")]
    for i, v in enumerate(velocities):
        session = synthetic_capture(
            button_id=args.button_id,
            velocity_mm_s=v,
            travel_mm=args.travel,
            presses=args.presses,
            seed=args.seed + i,
        )
        path = out / f"{args.button_id}_{v:g}mms.json"
        path.write_bytes(serialize_capture(session))
        print(f"wrote {path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.workspace)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="buttonsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="captures -> averaged per-velocity press profiles")
    p.add_argument("--capture", nargs="+", required=True, help="capture JSON files (one per velocity)")
    p.add_argument("--out", required=True)
    p.add_argument("--sigma-filter", type=float, default=1.2, help="trace filter sigma (mm)")
    p.add_argument("--sigma-smooth", type=float, default=0.8, help="averaged-curve sigma (mm)")
    p.add_argument("--release", action="store_true", help="also grid release strokes")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", help="press profiles -> spline model with order selection")
    p.add_argument("--presses", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--penalty", type=float, default=DEFAULT_PENALTY)
    p.add_argument("--k-min", type=int, default=4)
    p.add_argument("--k-max", type=int, default=30)
    p.add_argument("--activation", type=float, default=None, help="activation point (mm)")
    p.add_argument("--figures", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compensate", help="model + plant -> actuation signals")
    p.add_argument("--model", required=True)
    p.add_argument("--plant", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--velocities", default=None, help="comma-separated mm/s")
    p.add_argument("--runs", type=int, default=4)
    p.add_argument("--max-iters", type=int, default=15)
    p.add_argument("--tol", type=float, default=1.5)
    p.add_argument("--interpolate", type=int, default=None, help="densify to N curves")
    p.add_argument("--figures", default=None)
    p.set_defaults(func=cmd_compensate)

    p = sub.add_parser("simulate", help="drive a press over actuation signals")
    p.add_argument("--actuation", required=True)
    p.add_argument("--model", default=None, help="target model (config + error summary)")
    p.add_argument("--plant", default=None)
    p.add_argument("--trajectory", default=None)
    p.add_argument("--velocity", type=float, default=100.0)
    p.add_argument("--preset", default=None, help="packaged preset name or JSON path")
    p.add_argument("--out", required=True)
    p.add_argument("--figures", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="design optimization vs the simulated user")
    p.add_argument("--config", default=None, help="run config JSON")
    p.add_argument("--out", required=True, help="history JSONL")
    p.add_argument("--figures", default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("export-wave", help="vibration template bank -> WAV files")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rate", type=int, default=44100)
    p.set_defaults(func=cmd_export_wave)

    p = sub.add_parser("report", help="render CSVs and figures from artifacts")
    p.add_argument("--model", default=None)
    p.add_argument("--actuation", default=None)
    p.add_argument("--trace", default=None)
    p.add_argument("--history", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth-capture", help="generate bundled synthetic captures")
    p.add_argument("--out", required=True)
    p.add_argument("--button-id", default="synthetic-tactile")
    p.add_argument("--velocities", default="50,100,150,200")
    p.add_argument("--presses", type=int, default=15)
    p.add_argument("--travel", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth_capture)

    p = sub.add_parser("serve", help="start the HTTP/WebSocket service")
    p.add_argument("--port", type=int, default=8077)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--workspace", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ButtonSimError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
