"""Command-line surface: solve, analyze, sweep, report.

Exit codes: 0 full success, 1 configuration/schema/usage errors, 2 partial
results (aborted continuation, failed checks, failed sweep cells).  All
artifacts are JSON, CSV, or SVG; reports are byte-stable for a fixed
configuration and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from . import laminar
from .analysis import AnalysisReport, render_report_text, run_battery
from .config import RunConfig, config_echo, load_config, parse_config
from .errors import (
    BifurcationBracketError,
    ConfigError,
    ConvergenceStallError,
    InvariantViolationError,
    NewtonDivergenceError,
    NonMonotoneProfileError,
    NoRealSlopeError,
    SchemaError,
    StagnationError,
    SteadyWavesError,
)
from .solver import ContinuationTrace, HeightField, PhysicalParams, continue_in_amplitude

TRACE_SCHEMA = "steadywaves.trace/1"

SOLVE_ERRORS = (
    NewtonDivergenceError,
    ConvergenceStallError,
    StagnationError,
    InvariantViolationError,
    NoRealSlopeError,
    NonMonotoneProfileError,
    BifurcationBracketError,
)


def _write(path: str, text: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def _json_text(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=1)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "grid", None):
        try:
            nq_text, np_text = args.grid.lower().split("x")
            cfg.n_q, cfg.n_p = int(nq_text), int(np_text)
        except ValueError as exc:
            raise ConfigError(f"bad --grid value {args.grid!r}; expected NQxNP") from exc
    if getattr(args, "tol", None) is not None:
        cfg.newton_tol = args.tol
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "plots", False):
        cfg.plots = True
    return cfg


def _load_cfg(args) -> RunConfig:
    if args.config is None:
        cfg = parse_config("", path="<defaults>")
    else:
        cfg = load_config(args.config)
    return _apply_overrides(cfg, args)


# -- solve -------------------------------------------------------------------------


def _run_continuation(cfg: RunConfig, spec, out_dir: str) -> tuple[ContinuationTrace, PhysicalParams]:
    p0 = cfg.resolved_mass_flux()
    bound_spec = spec.bound_to_flux(p0)
    params = PhysicalParams(gravity=cfg.gravity, mass_flux=p0)
    bif = laminar.bifurcation_head(bound_spec, params, n_p=cfg.n_p)
    target = cfg.amplitude * (bif.depth if cfg.amplitude_unit == "depth" else 1.0)
    try:
        trace = continue_in_amplitude(
            bound_spec,
            params,
            (cfg.n_q, cfg.n_p),
            target_amplitude=target,
            steps=cfg.steps,
            tol=cfg.newton_tol,
            bifurcation=bif,
        )
    except SOLVE_ERRORS as exc:
        # first step failed; still record the laminar data and the empty trace
        trace = ContinuationTrace(
            members=(),
            bifurcation_head=bif.head,
            laminar_depth=bif.depth,
            failure=f"step 1 (amplitude {target / cfg.steps:.6g}): {exc}",
        )
    run_params = replace(
        params, head=bif.head, depth=bif.depth, wave_speed=bif.surface_speed
    )

    os.makedirs(out_dir, exist_ok=True)
    _write(os.path.join(out_dir, "laminar_profile.csv"), bif.profile.to_csv())
    meta = {
        "schema": TRACE_SCHEMA,
        "config": config_echo(cfg),
        "vorticity": bound_spec.as_dict(),
        "bifurcation_head": bif.head,
        "laminar_depth": bif.depth,
        "surface_speed": bif.surface_speed,
        "target_amplitude": target,
        "steps_requested": cfg.steps,
        "members": [
            {
                "file": f"member_{k:03d}.field.json",
                "amplitude": m.amplitude,
                "head": m.head,
                "newton_iterations": m.newton_iterations,
                "residual_norm": m.residual_norm,
            }
            for k, m in enumerate(trace.members)
        ],
        "failure": trace.failure,
    }
    _write(os.path.join(out_dir, "trace.json"), _json_text(meta))
    for k, member in enumerate(trace.members):
        _write(os.path.join(out_dir, f"member_{k:03d}.field.json"), member.field.to_json())
    if cfg.plots and trace.members:
        from .fields import velocity_from_height
        from .plots import emit_plots

        emit_plots(
            velocity_from_height(trace.members[-1].field),
            os.path.join(out_dir, "plots"),
        )
    return trace, run_params


def cmd_solve(args) -> int:
    try:
        cfg = _load_cfg(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        trace, _ = _run_continuation(cfg, cfg.vorticity, cfg.out_dir)
    except SOLVE_ERRORS as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return 2
    if trace.failure is not None:
        print(
            f"partial trace: {len(trace.members)} of {cfg.steps} members; "
            f"{trace.failure}",
            file=sys.stderr,
        )
        return 2
    print(f"trace complete: {len(trace.members)} members in {cfg.out_dir}")
    return 0


# -- analyze -----------------------------------------------------------------------


def _analyze_field(field: HeightField, out_dir: str, name: str, seed: int, plots: bool) -> AnalysisReport:
    from .fields import (
        export_field_csv,
        extract_streamline,
        pressure_from_bernoulli,
        velocity_from_height,
    )

    report = run_battery(field, seed=seed)
    _write(os.path.join(out_dir, f"{name}.report.json"), report.to_json())
    _write(os.path.join(out_dir, f"{name}.report.txt"), render_report_text(report))

    vf = velocity_from_height(field)
    pressure, _ = pressure_from_bernoulli(vf, field.vorticity, field.params)
    _write(os.path.join(out_dir, f"{name}.field.csv"), export_field_csv(vf, pressure))
    _write(os.path.join(out_dir, f"{name}.surface.csv"), extract_streamline(vf, 0.0).to_csv())
    if plots:
        from .plots import emit_plots

        emit_plots(vf, os.path.join(out_dir, f"{name}.plots"), report=report)
    return report


def _field_files(target: str) -> list[str]:
    if os.path.isdir(target):
        names = sorted(
            n for n in os.listdir(target) if n.endswith(".field.json")
        )
        return [os.path.join(target, n) for n in names]
    return [target]


def cmd_analyze(args) -> int:
    try:
        files = _field_files(args.target)
        if not files:
            raise SchemaError(f"no field files found in {args.target}")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = args.out or (args.target if os.path.isdir(args.target) else os.path.dirname(args.target) or ".")
    any_fail = False
    for path in files:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                field = HeightField.from_json(handle.read())
        except (OSError, SchemaError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return 1
        name = os.path.basename(path).replace(".field.json", "").replace(".json", "")
        try:
            report = _analyze_field(field, out_dir, name, args.seed, args.plots)
        except StagnationError as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return 1
        status = "pass" if report.all_applicable_pass else "FAIL"
        print(f"{name}: {status} ({len(report.failures)} failing checks)")
        any_fail = any_fail or not report.all_applicable_pass
    return 2 if any_fail else 0


# -- sweep -------------------------------------------------------------------------


def _sweep_cell(cfg: RunConfig, spec, amplitude: float, cell_dir: str, seed: int):
    cell_cfg = replace_config(cfg, amplitude=amplitude)
    try:
        trace, _ = _run_continuation(cell_cfg, spec, cell_dir)
    except SOLVE_ERRORS as exc:
        return {"status": "solve-failed", "error": str(exc), "verdicts": {}}
    if trace.failure is not None or not trace.members:
        return {
            "status": "partial",
            "error": trace.failure or "no members",
            "verdicts": {},
        }
    field = trace.members[-1].field
    report = run_battery(field, seed=seed)
    name = "final"
    _write(os.path.join(cell_dir, f"{name}.report.json"), report.to_json())
    _write(os.path.join(cell_dir, f"{name}.report.txt"), render_report_text(report))
    if cfg.plots:
        from .fields import velocity_from_height
        from .plots import emit_plots

        emit_plots(velocity_from_height(field), os.path.join(cell_dir, "plots"), report=report)
    return {
        "status": "pass" if report.all_applicable_pass else "check-failed",
        "error": None,
        "verdicts": {v.name: v.status for v in report.verdicts},
    }


def replace_config(cfg: RunConfig, **updates) -> RunConfig:
    import copy

    out = copy.copy(cfg)
    for key, value in updates.items():
        setattr(out, key, value)
    return out


def _describe_spec(spec) -> str:
    if spec.kind == "zero":
        return "zero"
    if spec.kind == "constant":
        return f"constant_{spec.gamma0:+g}"
    return f"affine_{spec.beta:+g}_{spec.gamma0:+g}"


def cmd_sweep(args) -> int:
    try:
        cfg = _load_cfg(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not cfg.sweep_vorticities or not cfg.sweep_amplitudes:
        print("error: sweep requires non-empty [sweep] vorticities and amplitudes", file=sys.stderr)
        return 1

    cells = [
        (spec, amp)
        for spec in cfg.sweep_vorticities
        for amp in cfg.sweep_amplitudes
    ]
    labels = [f"{_describe_spec(spec)}__a_{amp:g}" for spec, amp in cells]

    def run_cell(idx: int):
        spec, amp = cells[idx]
        cell_dir = os.path.join(cfg.out_dir, labels[idx])
        return _sweep_cell(cfg, spec, amp, cell_dir, cfg.seed)

    workers = min(cfg.workers, len(cells))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_cell, range(len(cells))))

    summary = {
        "schema": "steadywaves.sweep/1",
        "config": config_echo(cfg),
        "cells": [
            {
                "label": labels[k],
                "vorticity": cells[k][0].as_dict(),
                "amplitude": cells[k][1],
                **results[k],
            }
            for k in range(len(cells))
        ],
    }
    _write(os.path.join(cfg.out_dir, "sweep_summary.json"), _json_text(summary))
    _write(os.path.join(cfg.out_dir, "sweep_summary.txt"), _sweep_table(summary))
    print(_sweep_table(summary), end="")
    all_pass = all(r["status"] == "pass" for r in results)
    return 0 if all_pass else 2


def _sweep_table(summary: dict) -> str:
    names: list[str] = []
    for cell in summary["cells"]:
        for name in cell["verdicts"]:
            if name not in names:
                names.append(name)
    lines = []
    header = f"{'cell':34s} {'status':14s}"
    lines.append(header + " failing-checks")
    for cell in summary["cells"]:
        failing = [n for n, s in cell["verdicts"].items() if s == "fail"]
        extra = ",".join(failing) if failing else (cell["error"] or "-")
        lines.append(f"{cell['label']:34s} {cell['status']:14s} {extra}")
    return "\n".join(lines) + "\n"


# -- report ------------------------------------------------------------------------


def cmd_report(args) -> int:
    try:
        with open(args.report, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if doc.get("schema") == "steadywaves.sweep/1":
        print(_sweep_table(doc), end="")
        return 0
    try:
        text = _report_text_from_dict(doc)
    except (KeyError, TypeError) as exc:
        print(f"error: malformed report: {exc}", file=sys.stderr)
        return 1
    print(text, end="")
    return 0


def _report_text_from_dict(doc: dict) -> str:
    from .analysis import (
        DisplacementProfile,
        EigenvalueBound,
        InflectionSet,
        PropertyVerdict,
    )
    import numpy as np

    verdicts = tuple(
        PropertyVerdict(
            name=v["name"],
            status=v["status"],
            worst_violation=v["worst_violation"],
            tolerance=v["tolerance"],
            locations=tuple(v["locations"]),
            sample_count=v["sample_count"],
            details=v["details"],
        )
        for v in doc["verdicts"]
    )
    eig = None
    if doc.get("eigenvalue") is not None:
        e = doc["eigenvalue"]
        eig = EigenvalueBound(e["rectangle_bound"], e["discrete_estimate"], e["iterations"])
    disp = None
    if doc.get("displacement") is not None:
        d = doc["displacement"]
        disp = DisplacementProfile(
            np.asarray(d["p_levels"]), np.asarray(d["mean_depth"]), np.asarray(d["displacement"])
        )
    report = AnalysisReport(
        params=doc["params"],
        vorticity=doc["vorticity"],
        grid=doc["grid"],
        amplitude=doc["amplitude"],
        depth=doc["depth"],
        verdicts=verdicts,
        inflections=tuple(
            InflectionSet(s["p_level"], tuple(s["positions"]), s["count"], s["curvature_band"])
            for s in doc["inflections"]
        ),
        displacement=disp,
        eigenvalue=eig,
    )
    return render_report_text(report)


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steadywaves",
        description="Steady water waves: solve, reconstruct, and verify "
        "vertical-velocity properties.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="continue a wave branch and store the trace")
    solve.add_argument("--config", type=str, default=None, help="configuration file")
    solve.add_argument("--out", type=str, default=None, help="output directory")
    solve.add_argument("--grid", type=str, default=None, help="override grid, e.g. 65x65")
    solve.add_argument("--tol", type=float, default=None, help="Newton tolerance override")
    solve.add_argument("--plots", action="store_true", help="emit SVG plots")
    solve.set_defaults(func=cmd_solve)

    analyze = sub.add_parser("analyze", help="run the property battery on stored fields")
    analyze.add_argument("target", type=str, help="field JSON file or trace directory")
    analyze.add_argument("--out", type=str, default=None, help="report output directory")
    analyze.add_argument("--seed", type=int, default=1234)
    analyze.add_argument("--plots", action="store_true")
    analyze.set_defaults(func=cmd_analyze)

    sweep = sub.add_parser("sweep", help="cross product of vorticities and amplitudes")
    sweep.add_argument("--config", type=str, default=None)
    sweep.add_argument("--out", type=str, default=None)
    sweep.add_argument("--grid", type=str, default=None)
    sweep.add_argument("--tol", type=float, default=None)
    sweep.add_argument("--plots", action="store_true")
    sweep.set_defaults(func=cmd_sweep)

    report = sub.add_parser("report", help="render a stored JSON report as text")
    report.add_argument("report", type=str, help="report or sweep-summary JSON file")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SteadyWavesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
