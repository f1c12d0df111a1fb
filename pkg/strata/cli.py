"""
strata command line.

    strata critical --config CONFIG [--out DIR]
    strata solve    --config CONFIG --epsilon X [--out DIR]
    strata continue --config CONFIG --out DIR [--epsilon X] [--max-points N] [--resume]
    strata diagnose RUN_DIR
    strata export   RUN_DIR [--format csv|json] [--dimensional] [--raster NY]

Every subcommand takes --json (one JSON document on stdout) and --quiet. Exit codes:
0 ok, 2 input, 3 numeric setup, 4 nonconvergence, 5 internal.
"""

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from tabulate import tabulate

from strata.config import settings
from strata.enums import ExportFormat, FarfieldBC, TerminationReason
from strata.exceptions.model_exceptions import (
    GuessQualityError,
    InputDigestError,
    MissingArtifactError,
    PreconditionError,
)
from strata.models.continuation import ContinuationOptions, ContinuationPoint
from strata.models.manifest import RunManifest
from strata.models.profiles import BackgroundFlow, StratifiedConfig
from strata.models.spectrum import SpectrumReport
from strata.models.wave import ReducedConstants, StripGrid
from strata.renderers.json_renderer import render_json
from strata.repositories import RunDirectory
from strata.repositories.run_directory import file_digest
from strata.services.config_file import config_snapshot, load_config, side_files
from strata.services.continuation import run as run_branch
from strata.services.diagnostics import diagnose, summary_row
from strata.services.eulerian import (
    field_rows,
    raster,
    raster_rows,
    reconstruct,
    sidecar,
    surface_rows,
    to_dimensional,
)
from strata.services.exception_catchers import EXIT_OK, catch
from strata.services.height_solver import newton_solve
from strata.services.profiles import background_rows, compute_background
from strata.services.small_amplitude import (
    build_guess,
    compute_constants,
    froude_of_epsilon,
    make_grid,
    required_extent,
)
from strata.services.strata_logging import setup_logger
from strata.services.sturm_liouville import compute_spectrum, lowest_robin_eigenvalue

log = logging.getLogger(__name__)

TERMINATION_EXIT_CODES = {
    TerminationReason.STAGNATION_THRESHOLD: 0,
    TerminationReason.USER_LIMIT: 0,
    TerminationReason.NEWTON_FAILURE: 4,
    TerminationReason.STEP_UNDERFLOW: 4,
    TerminationReason.SHELF_DETECTED: 5,
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _emit(args, payload: dict, rows: list[list], headers=(), floatfmt=".10g"):
    if args.json:
        sys.stdout.write(render_json(payload))
    elif not args.quiet:
        print(tabulate(rows, headers=headers, floatfmt=floatfmt))


def _new_manifest(args, command: str, config: StratifiedConfig) -> RunManifest:
    inputs = {}
    if getattr(args, "config", None):
        inputs[str(Path(args.config).resolve())] = file_digest(args.config)
    for path in side_files(config):
        inputs[str(path)] = file_digest(path)
    return RunManifest(
        config=config_snapshot(config),
        strata_version=settings.strata_version,
        command=command,
        argv=list(args.argv),
        started=_now(),
        config_path=(
            str(Path(args.config).resolve()) if getattr(args, "config", None) else None
        ),
        input_digests=inputs,
    )


def _verify_inputs(manifest: RunManifest):
    for path, digest in manifest.input_digests.items():
        if file_digest(Path(path)) != digest:
            raise InputDigestError(path)


def _pipeline(
    config: StratifiedConfig,
) -> tuple[BackgroundFlow, SpectrumReport, ReducedConstants]:
    bg = compute_background(config)
    spec = compute_spectrum(bg)
    return bg, spec, compute_constants(bg, spec)


def _grid_for(
    config: StratifiedConfig,
    bg: BackgroundFlow,
    spec: SpectrumReport,
    consts: ReducedConstants,
    epsilon: float,
) -> StripGrid:
    q_max = config.q_max
    if q_max is None:
        q_max = required_extent(consts, epsilon)
    rate = 0.0
    if config.farfield_bc == FarfieldBC.ROBIN_DECAY:
        F = froude_of_epsilon(spec, epsilon)
        rate = math.sqrt(max(lowest_robin_eigenvalue(bg, 1 / F**2), 0.0))
    return make_grid(
        bg, q_max, config.dq, farfield_bc=config.farfield_bc, farfield_rate=rate
    )


def _write_setup(run: RunDirectory, manifest: RunManifest, bg, spec: SpectrumReport):
    digests = manifest.output_digests
    digests["spectrum.json"] = run.write_json("spectrum.json", spec.scalars())
    digests["phi_cr.csv"] = run.write_csv(
        "phi_cr.csv",
        [
            {"p": p, "phi": a, "phi_p": b}
            for p, a, b in zip(bg.p_nodes, spec.phi_cr, spec.phi_cr_p)
        ],
    )
    digests["background.csv"] = run.write_csv(
        "background.csv", background_rows(bg, spec.F_cr)
    )


def _spectrum_rows(spec: SpectrumReport) -> list[list]:
    rows = [[k, v] for k, v in spec.scalars().items() if not isinstance(v, list)]
    rows += [[f"nu_{j}", x] for j, x in enumerate(spec.nu)]
    return rows


def cmd_critical(args) -> int:
    config = load_config(args.config)
    bg = compute_background(config)
    spec = compute_spectrum(bg)
    if args.out:
        run = RunDirectory(args.out)
        with run.lock():
            manifest = _new_manifest(args, "critical", config)
            _write_setup(run, manifest, bg, spec)
            manifest.finished = _now()
            run.write_manifest(manifest)
    _emit(
        args,
        spec.scalars(),
        _spectrum_rows(spec),
        ("quantity", "value"),
        floatfmt=".6f",
    )
    return EXIT_OK


def cmd_solve(args) -> int:
    if not 0 < args.epsilon <= settings.eps_guess_max:
        raise GuessQualityError(args.epsilon, settings.eps_guess_max)
    config = load_config(args.config)
    bg, spec, consts = _pipeline(config)
    grid = _grid_for(config, bg, spec, consts, args.epsilon)
    guess = build_guess(bg, spec, consts, args.epsilon, grid)
    state = newton_solve(guess.as_state(), bg, grid)
    report = diagnose(state, bg, grid, spec)

    if args.out:
        run = RunDirectory(args.out)
        with run.lock():
            manifest = _new_manifest(args, "solve", config)
            _write_setup(run, manifest, bg, spec)
            manifest.output_digests.update(
                run.save_point(0, state, grid, {"epsilon": args.epsilon})
            )
            key = "diagnostics/point_0000.json"
            manifest.output_digests[key] = run.write_json(key, report)
            manifest.finished = _now()
            run.write_manifest(manifest)

    payload = {
        "epsilon": args.epsilon,
        "F": state.F,
        "predicted_amplitude": guess.predicted_amplitude,
        "amplitude": float(state.w[grid.crest_index, -1]),
        "iterations": state.iterations,
        "residual_norm": state.residual_norm,
        "failed": report.failed,
        "diagnostics": report,
    }
    rows = [[k, payload[k]] for k in list(payload)[:-2]]
    rows.append(["failed checks", ", ".join(report.failed) or "none"])
    _emit(args, payload, rows, ("quantity", "value"))
    return EXIT_OK


def cmd_continue(args) -> int:
    if args.epsilon is not None and not 0 < args.epsilon <= settings.eps_guess_max:
        raise GuessQualityError(args.epsilon, settings.eps_guess_max)
    run = RunDirectory(args.out)
    with run.lock():
        points: Optional[list[ContinuationPoint]] = None
        if args.resume:
            manifest = run.read_manifest()
            _verify_inputs(manifest)
            indices = run.point_indices()
            if not indices:
                raise MissingArtifactError(str(run.path / "points"))
            run.verify_outputs(
                manifest,
                [run.point_key(i, ext) for i in indices for ext in ("csv", "json")],
            )
            config = StratifiedConfig.model_validate(manifest.config)
            points = [run.load_continuation_point(i) for i in indices]
            manifest.argv = list(args.argv)
            manifest.finished = None
        else:
            if run.has_manifest():
                raise PreconditionError(
                    f"{args.out} already holds a run; pass --resume"
                )
            if not args.config:
                raise PreconditionError("continue needs --config unless resuming")
            config = load_config(args.config)
            manifest = _new_manifest(args, "continue", config)

        bg, spec, consts = _pipeline(config)
        if not args.resume:
            _write_setup(run, manifest, bg, spec)
        epsilon = settings.eps_start if args.epsilon is None else args.epsilon
        opts = ContinuationOptions(
            epsilon=epsilon,
            max_points=args.max_points,
            hp_threshold=args.hp_threshold,
        )
        grid = None if args.resume else _grid_for(config, bg, spec, consts, epsilon)

        def on_point(index: int, point: ContinuationPoint):
            manifest.output_digests.update(run.save_continuation_point(index, point))
            run.write_manifest(manifest)

        curve = run_branch(
            bg, spec, consts, opts, grid=grid, start_points=points, on_point=on_point
        )
        manifest.output_digests["curve.csv"] = run.write_csv("curve.csv", curve.rows())
        manifest.termination_reason = curve.termination_reason.value
        manifest.finished = _now()
        run.write_manifest(manifest)

    last = curve.points[-1].monitors if curve.points else None
    payload = {
        "termination_reason": curve.termination_reason.value,
        "detail": curve.detail,
        "points": len(curve.points),
        "F": last.F if last else None,
        "max_hp": last.max_hp if last else None,
        "amplitude": last.amplitude if last else None,
    }
    _emit(args, payload, [[k, v] for k, v in payload.items()], ("quantity", "value"))
    return TERMINATION_EXIT_CODES[curve.termination_reason]


def _open_run(
    run_dir: Path,
) -> tuple[RunDirectory, RunManifest, StratifiedConfig, list[int]]:
    run = RunDirectory(run_dir)
    manifest = run.read_manifest()
    indices = run.point_indices()
    if not indices:
        raise MissingArtifactError(str(run.path / "points"))
    return run, manifest, StratifiedConfig.model_validate(manifest.config), indices


def _load_checked(run: RunDirectory, index: int, bg: BackgroundFlow):
    state, grid, meta = run.load_point(index)
    if grid.Np != bg.Np:
        raise PreconditionError(
            f"point {index} has Np={grid.Np} but the recorded config gives {bg.Np}"
        )
    return state, grid, meta


def cmd_diagnose(args) -> int:
    run, manifest, config, indices = _open_run(args.run_dir)
    with run.lock():
        bg = compute_background(config)
        spec = compute_spectrum(bg)

        def one(index: int):
            state, grid, _ = _load_checked(run, index, bg)
            return diagnose(state, bg, grid, spec, conjugate=not args.no_conjugate)

        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            reports = list(pool.map(one, indices))

        digests = manifest.output_digests
        for index, report in zip(indices, reports):
            key = f"diagnostics/point_{index:04d}.json"
            digests[key] = run.write_json(key, report)
        rows = [summary_row(i, r) for i, r in zip(indices, reports)]
        digests["diagnostics/branch_summary.csv"] = run.write_csv(
            "diagnostics/branch_summary.csv", rows
        )
        run.write_manifest(manifest)

    payload = {"reports": len(reports), "summary": rows}
    table = [[r["point"], r["F"], r["failed"] or "none"] for r in rows]
    _emit(args, payload, table, ("point", "F", "failed checks"))
    return EXIT_OK


def cmd_export(args) -> int:
    run, manifest, config, indices = _open_run(args.run_dir)
    fmt = ExportFormat(args.format)
    with run.lock():
        bg = compute_background(config)
        digests = manifest.output_digests
        written = []
        for index in indices:
            state, grid, _ = _load_checked(run, index, bg)
            field = reconstruct(state, bg, grid)
            if args.dimensional:
                field = to_dimensional(field, bg, state.F)
            stem = f"eulerian/point_{index:04d}"
            if fmt == ExportFormat.CSV:
                outputs = {
                    f"{stem}_field.csv": lambda k: run.write_csv(k, field_rows(field)),
                    f"{stem}_surface.csv": lambda k: run.write_csv(
                        k, surface_rows(field)
                    ),
                    f"{stem}_sidecar.json": lambda k: run.write_json(k, sidecar(field)),
                }
                if args.raster:
                    outputs[f"{stem}_raster.csv"] = lambda k: run.write_csv(
                        k, raster_rows(raster(field, args.raster))
                    )
            else:
                document = sidecar(field)
                document.update(
                    {
                        "x": field.x_nodes,
                        "eta": field.eta,
                        "y": field.streamline_y,
                        "u": field.u,
                        "v": field.v,
                        "P": field.P,
                        "psi": field.psi,
                    }
                )
                outputs = {f"{stem}.json": lambda k: run.write_json(k, document)}
            for key, write in outputs.items():
                digests[key] = write(key)
                written.append(key)
        run.write_manifest(manifest)

    payload = {"format": fmt.value, "dimensional": args.dimensional, "files": written}
    _emit(args, payload, [[k] for k in written], ("written",))
    return EXIT_OK


def _positive(kind):
    def parse(text: str):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text}")
        return value

    return parse


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--json", action="store_true", help="print one JSON document")
    parser.add_argument("--quiet", action="store_true", help="only warnings and errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strata", description="Stratified solitary water waves"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    critical = commands.add_parser("critical", help="critical Froude numbers")
    critical.add_argument("--config", required=True, type=Path)
    critical.add_argument("--out", type=Path)
    critical.set_defaults(handler=cmd_critical)

    solve = commands.add_parser("solve", help="small-amplitude wave and diagnostics")
    solve.add_argument("--config", required=True, type=Path)
    solve.add_argument("--epsilon", required=True, type=float)
    solve.add_argument("--out", type=Path)
    solve.set_defaults(handler=cmd_solve)

    cont = commands.add_parser("continue", help="continue the branch toward stagnation")
    cont.add_argument("--config", type=Path)
    cont.add_argument("--out", required=True, type=Path)
    cont.add_argument("--epsilon", type=float)
    cont.add_argument("--max-points", type=_positive(int))
    cont.add_argument("--hp-threshold", type=_positive(float))
    cont.add_argument("--resume", action="store_true")
    cont.set_defaults(handler=cmd_continue)

    diag = commands.add_parser("diagnose", help="diagnostics for every stored point")
    diag.add_argument("run_dir", type=Path)
    diag.add_argument(
        "--no-conjugate", action="store_true", help="skip the conjugate-flow scan"
    )
    diag.set_defaults(handler=cmd_diagnose)

    export = commands.add_parser("export", help="Eulerian fields of every stored point")
    export.add_argument("run_dir", type=Path)
    export.add_argument(
        "--format",
        choices=[f.value for f in ExportFormat],
        default=ExportFormat.CSV.value,
    )
    export.add_argument("--dimensional", action="store_true")
    export.add_argument("--raster", type=_positive(int), metavar="NY")
    export.set_defaults(handler=cmd_export)

    for sub in (critical, solve, cont, diag, export):
        _add_common(sub)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    run_settings = settings
    if args.quiet or args.json:
        run_settings = settings.model_copy(update={"log_level": "WARNING"})
    setup_logger(run_settings)
    try:
        return args.handler(args)
    except Exception as e:
        return catch(e)


if __name__ == "__main__":
    sys.exit(main())
