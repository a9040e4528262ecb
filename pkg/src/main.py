#!/usr/bin/env python3
"""
Command-line entry point: calibrate noise strengths, sweep T1/T2 maps,
count critical points of a map, validate configs, and reproduce the
bundled case study.
"""

import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from src.config import Config
from src.core import anisotropy
from src.core.device import DeviceParams, check_near_field_regime, load_config
from src.core.exceptions import ConfigError, SimulatorError
from src.core.exporters import export_map, load_map
from src.core.geometry import FieldDirection
from src.core.models import (
    ExportFormat,
    Quantity,
    Resolution,
    RunConfig,
    dump_models,
    is_charge_model,
)
from src.orchestration.workflow import ReproductionWorkflow
from src.utils.validators import error_messages, resolve_relative, validate_config_file

logger = logging.getLogger(__name__)


def _resolution(text: str) -> Resolution:
    try:
        return Resolution.parse(text)
    except (ValueError, ValidationError) as e:
        raise argparse.ArgumentTypeError(str(e))


def _formats(text: str) -> List[ExportFormat]:
    try:
        return [ExportFormat(part.strip().lower()) for part in text.split(",") if part.strip()]
    except ValueError:
        choices = ",".join(f.value for f in ExportFormat)
        raise argparse.ArgumentTypeError(f"formats must be a subset of {choices}, got '{text}'")


def _positive(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Run config JSON")
    parser.add_argument("--device", help="Device config JSON (overrides the run config)")
    parser.add_argument("--models", help="JSON list of noise models (overrides the run config)")
    parser.add_argument("--reference-t2", type=_positive, help="Measured T2 in seconds at the reference direction")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--tau", type=_positive, help="Switching time of every charge model, seconds")
    parser.add_argument("--sigma", type=_positive, help="Metal conductivity, S/m")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spin-anisotropy",
        description="Spin-qubit T1/T2 anisotropy simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    calibrate = sub.add_parser("calibrate", help="Fit noise strengths to a reference T2")
    _add_run_flags(calibrate)

    map_cmd = sub.add_parser("map", help="Sweep T1 or T2 over field directions")
    _add_run_flags(map_cmd)
    map_cmd.add_argument("--quantity", choices=[q.value for q in Quantity])
    map_cmd.add_argument("--resolution", type=_resolution, help="NxM grid, e.g. 181x360")
    map_cmd.add_argument("--format", type=_formats, help="Comma-separated subset of csv,json,ppm")
    map_cmd.add_argument("--include-t1", action="store_true", help="Fold 1/2T1 into T2")

    critical = sub.add_parser("critical-points", help="Critical-point census of a map file")
    critical.add_argument("map_file", help="CSV or JSON map written by 'map'")
    critical.add_argument("--quantity", choices=[q.value for q in Quantity], default=Quantity.T2.value)
    critical.add_argument("--flat-tolerance", type=float, default=anisotropy.DEFAULT_FLAT_TOLERANCE)
    critical.add_argument(
        "--persistence", type=float, default=anisotropy.DEFAULT_PERSISTENCE,
        help="Drop critical pairs closer in value than this many (grid step)^2 map spans",
    )
    critical.add_argument(
        "--merge-radius", type=float, default=anisotropy.DEFAULT_MERGE_RADIUS,
        help="Drop critical pairs closer than this many grid steps",
    )

    validate = sub.add_parser("validate-config", help="Validate a device or run config")
    validate.add_argument("config_file")

    reproduce = sub.add_parser("reproduce-paper", help="Recompute the bundled case study")
    reproduce.add_argument("--device", help="Device config JSON (defaults to the bundled case)")
    reproduce.add_argument("--out", help="Output directory")
    reproduce.add_argument("--tau", type=_positive, help="Switching time, seconds")
    reproduce.add_argument("--resolution", type=_resolution, help="NxM grid")
    return parser


# ---------------------------------------------------------------------------
# Run config assembly


def _read_document(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: malformed JSON at line {e.lineno}: {e.msg}")


def assemble_run(args: argparse.Namespace) -> Tuple[RunConfig, Optional[Path]]:
    """Merge the run config file with command-line overrides; flags win"""
    raw: Dict[str, Any] = {}
    config_path = Path(args.config) if args.config else None
    if config_path is not None:
        raw = _read_document(args.config)
        if not isinstance(raw, dict):
            raise ConfigError("run config must be a JSON object")

    if args.device:
        raw["device"] = str(Path(args.device).resolve())
    if args.models:
        models = _read_document(args.models)
        raw["models"] = models.get("models") if isinstance(models, dict) else models
    if args.reference_t2:
        raw["reference"] = {**raw.get("reference", {}), "t2_s": args.reference_t2}
    if args.tau:
        raw["tau_s"] = args.tau
    if args.sigma:
        raw["sigma_S_per_m"] = args.sigma
    if args.out:
        raw["output"] = {**raw.get("output", {}), "directory": args.out}
    if getattr(args, "quantity", None):
        raw["quantity"] = args.quantity
    if getattr(args, "resolution", None):
        raw["resolution"] = args.resolution.model_dump()
    if getattr(args, "format", None):
        raw["output"] = {**raw.get("output", {}), "formats": [f.value for f in args.format]}
    if getattr(args, "include_t1", False):
        raw["include_t1_in_t2"] = True

    try:
        return RunConfig(**raw), config_path
    except ValidationError as e:
        raise ConfigError("; ".join(error_messages(e)))


def prepare_run(
    run: RunConfig, config_path: Optional[Path], settings: Config
) -> Tuple[DeviceParams, List[Any]]:
    """Device in internal units and the noise models with tau overrides applied"""
    device = load_config(resolve_relative(config_path, run.device))
    if run.sigma_S_per_m is not None:
        device = device.with_sigma(run.sigma_S_per_m)
    check_near_field_regime(device)

    models = []
    for model in run.models:
        if is_charge_model(model):
            if run.tau_s is not None:
                model = model.model_copy(update={"tau_s": run.tau_s})
            elif "tau_s" not in model.model_fields_set:
                model = model.model_copy(update={"tau_s": settings.default_tau_s})
        models.append(model)
    return device, models


# ---------------------------------------------------------------------------
# Subcommands


def cmd_calibrate(args: argparse.Namespace, settings: Config) -> int:
    run, config_path = assemble_run(args)
    device, models = prepare_run(run, config_path, settings)
    calibrated, records = anisotropy.calibrate_models(models, device, run.reference)
    if not records:
        print("⚠️  No model is marked fit=true; nothing to calibrate")
        return 0

    reference = run.reference
    direction = FieldDirection(reference.theta_rad, reference.phi_rad)
    t2 = anisotropy.t2_at(direction, calibrated, device, run.include_t1_in_t2)
    print("\n📋 Calibration")
    for record in records:
        print(f"  ✅ {record.model}: {record.parameter} = {record.fitted_value:.6g}")
        print(f"     charge-only T_phi = {record.charge_tphi_s:.6g} s, hyperfine share = {record.hyperfine_share:.3f}")
    print(f"  ✅ T2 at the reference direction = {t2 * 1e9:.6g} ns (target {reference.t2_s * 1e9:.6g} ns)")

    out = Path(run.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "calibration.json"
    document = {
        "device_sha256": device.config_hash(),
        "records": [r.model_dump() for r in records],
        "models": dump_models(calibrated),
        "reference_t2_check_s": t2,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2)
        f.write("\n")
    print(f"  📁 {path}")
    return 0


def cmd_map(args: argparse.Namespace, settings: Config) -> int:
    run, config_path = assemble_run(args)
    device, models = prepare_run(run, config_path, settings)
    calibrated, records = anisotropy.calibrate_models(models, device, run.reference)
    amap = anisotropy.sweep(
        run.quantity, calibrated, device, run.resolution, run.include_t1_in_t2, calibration=records
    )
    files = export_map(amap, run.output.directory, run.output.formats)
    print(f"\n🗺️  {run.quantity.value.upper()} map at {run.resolution}")
    for path in files:
        print(f"  ✅ {path}")
    return 0


def cmd_critical_points(args: argparse.Namespace, settings: Config) -> int:
    amap = load_map(args.map_file, Quantity(args.quantity))
    result = anisotropy.census(amap, args.flat_tolerance, args.persistence, args.merge_radius)
    print(f"\n🔎 Critical points of {args.map_file}")
    print(f"  N_max = {result.n_max}, N_min = {result.n_min}, N_s = {result.n_saddle}")
    if result.degenerate:
        print("  ⚠️  degenerate census; N_max + N_min = N_s + 2 not applicable")
        for reason in result.reasons:
            print(f"     {reason}")
        return 0
    if anisotropy.euler_check(result):
        print("  ✅ N_max + N_min = N_s + 2 holds")
        return 0
    print("  ❌ N_max + N_min = N_s + 2 fails")
    return 1


def cmd_validate_config(args: argparse.Namespace, settings: Config) -> int:
    result = validate_config_file(args.config_file)
    if result["valid"]:
        print(f"✅ {args.config_file} is a valid {result['kind']} config")
        return 0
    print(f"❌ {args.config_file} is not a valid {result['kind']} config")
    for message in result["errors"]:
        print(f"   {message}")
    return 1


def cmd_reproduce_paper(args: argparse.Namespace, settings: Config) -> int:
    workflow = ReproductionWorkflow(settings)
    result = workflow.run(
        device_path=args.device, output_dir=args.out, tau_s=args.tau, resolution=args.resolution
    )
    failed = [c for c in result["checks"] if not c["informational"] and not c["passed"]]
    for check in failed:
        print(f"  ❌ {check['name']}: {check['computed']} vs {check['reference']}")
    print(f"\n{'✅' if result['success'] else '❌'} reproduction {'passed' if result['success'] else 'failed'}")
    return result["exit_code"]


COMMANDS = {
    "calibrate": cmd_calibrate,
    "map": cmd_map,
    "critical-points": cmd_critical_points,
    "validate-config": cmd_validate_config,
    "reproduce-paper": cmd_reproduce_paper,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = Config()
    except ValueError as e:
        print(f"❌ {e}")
        return 1
    settings.setup_logging()
    try:
        return COMMANDS[args.command](args, settings)
    except SimulatorError as e:
        print(f"❌ {e}")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
