"""Report rendering: CSV summaries plus matplotlib figures for models,
actuation tables, compensation error traces, simulation traces, and
optimization histories."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .actuation import ActuationTable
from .capture import grid_displacements
from .model import FdvvModel


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return path


def model_curves_csv(model: FdvvModel, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = grid_displacements(model.travel_range_mm)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["velocity_mm_s", "displacement_mm", "force_cN"])
        for v in model.velocities:
            forces = np.asarray(model.press_curves[v].evaluate(grid))
            for d, f in zip(grid, forces):
                writer.writerow([v, round(float(d), 4), float(f)])
    return path


def model_curves_png(model: FdvvModel, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    grid = grid_displacements(model.travel_range_mm)
    for v in model.velocities:
        curve = model.press_curves[v]
        ax.plot(grid, curve.evaluate(grid), label=f"{v:g} mm/s")
        ax.plot(curve.control_x_mm, curve.control_y, "o", ms=3, alpha=0.6)
    ax.axvline(model.activation_point_mm, color="grey", ls="--", lw=1, label="activation")
    if model.vibration is not None:
        ax.axvline(model.vibration.onset_mm, color="tab:red", ls=":", lw=1, label="vibration")
    ax.set_xlabel("displacement (mm)")
    ax.set_ylabel("force (cN)")
    ax.set_title(f"{model.button_id}: force curves")
    ax.legend(fontsize=8)
    return _save(fig, path)


def actuation_csv(table: ActuationTable, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["velocity_mm_s", "displacement_mm", "u"])
        for curve in table.sorted_curves():
            for d, u in zip(curve.grid_mm, curve.u):
                writer.writerow([curve.velocity_mm_s, round(float(d), 4), float(u)])
    return path


def actuation_png(table: ActuationTable, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    curves = table.sorted_curves()
    cmap = plt.get_cmap("viridis")
    span = max(c.velocity_mm_s for c in curves) - min(c.velocity_mm_s for c in curves) or 1.0
    v0 = min(c.velocity_mm_s for c in curves)
    for curve in curves:
        ax.plot(
            curve.grid_mm,
            curve.u,
            color=cmap((curve.velocity_mm_s - v0) / span),
            lw=1.2,
            label=f"{curve.velocity_mm_s:g} mm/s" if len(curves) <= 6 else None,
        )
    ax.set_xlabel("displacement (mm)")
    ax.set_ylabel("actuation (units)")
    title = f"{table.button_id} on {table.plant_id}"
    if table.interpolated:
        title += " (interpolated)"
    ax.set_title(title)
    if len(curves) <= 6:
        ax.legend(fontsize=8)
    return _save(fig, path)


def error_trace_csv(traces: dict[float, list[list[float]]], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["velocity_mm_s", "run", "iteration", "error_cN"])
        for v, runs in sorted(traces.items()):
            for run, errors in enumerate(runs):
                for i, err in enumerate(errors):
                    writer.writerow([v, run, i + 1, err])
    return path


def error_trace_png(traces: dict[float, list[list[float]]], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for v, runs in sorted(traces.items()):
        for run, errors in enumerate(runs):
            ax.plot(
                range(1, len(errors) + 1),
                errors,
                marker="o",
                ms=3,
                alpha=0.8,
                label=f"{v:g} mm/s" if run == 0 else None,
            )
    ax.set_xlabel("iteration")
    ax.set_ylabel("error (cN)")
    ax.set_yscale("log")
    ax.set_title("compensation error per iteration")
    ax.legend(fontsize=8)
    return _save(fig, path)


def trace_csv(records: list[dict], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = [
        "t_ms",
        "raw_disp_mm",
        "filtered_disp_mm",
        "est_velocity_mm_s",
        "selected_curve_velocity_mm_s",
        "u",
        "plant_force_cN",
        "events",
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for r in records:
            row = [r.get(k) for k in fields[:-1]]
            row.append(";".join(r.get("events", [])))
            writer.writerow(row)
    return path


def trace_overlay_png(records: list[dict], model: FdvvModel | None, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    disp = np.array([r["filtered_disp_mm"] for r in records])
    force = np.array([r["plant_force_cN"] for r in records])
    ax.plot(disp, force, lw=0.9, color="tab:blue", label="rendered")
    if model is not None:
        grid = grid_displacements(model.travel_range_mm)
        for v in model.velocities:
            ax.plot(
                grid,
                model.press_curves[v].evaluate(grid),
                lw=0.9,
                ls="--",
                alpha=0.7,
                label=f"target {v:g} mm/s",
            )
    marker_style = {"activation": "^", "vibration_start": "v", "bottom_out": "s"}
    for r in records:
        for event in r.get("events", []):
            if event in marker_style:
                ax.plot(
                    r["filtered_disp_mm"],
                    r["plant_force_cN"],
                    marker_style[event],
                    color="tab:red",
                    ms=7,
                )
                ax.annotate(
                    event,
                    (r["filtered_disp_mm"], r["plant_force_cN"]),
                    textcoords="offset points",
                    xytext=(4, 6),
                    fontsize=7,
                )
    ax.set_xlabel("displacement (mm)")
    ax.set_ylabel("force (cN)")
    ax.set_title("rendered press vs target")
    ax.legend(fontsize=8)
    return _save(fig, path)


def history_csv(history: list[dict], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "mean_asynchrony_ms", "incumbent_ms"])
        for h in history:
            writer.writerow([h["iteration"], h["mean_asynchrony_ms"], h["incumbent_ms"]])
    return path


def history_png(history: list[dict], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    iterations = [h["iteration"] for h in history]
    ax.plot(iterations, [h["mean_asynchrony_ms"] for h in history], "o", ms=4, label="evaluated")
    ax.plot(iterations, [h["incumbent_ms"] for h in history], lw=1.5, label="incumbent")
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean asynchrony (ms)")
    ax.set_title("design optimization progress")
    ax.legend(fontsize=8)
    return _save(fig, path)
