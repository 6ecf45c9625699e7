"""lpskit command line: simulate campaigns, train ranging models, locate devices.

Subcommands
    simulate   generate a synthetic campaign from a scenario file or preset
    train      fit ranging models from fused per-gateway CSVs
    range      apply one trained model to a fused CSV
    position   trilaterate device positions from readings CSVs
    report     evaluate trained models against fused test data
    pipeline   full case-study flow for the shipped presets

Every command is deterministic given its flags and seed.  Exit codes:
0 success, 1 runtime failure, 2 usage or configuration error.  Set
LPSKIT_LOG=error|info|debug to control logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from . import dataset as ds_mod
from .dataset import RangingDataset, SitePlan, fuse, split_train_test, summarize
from .errors import (
    InsufficientGateways,
    LpskitError,
    MissingGateway,
    ParseError,
    ValidationError,
)
from .evaluate import (
    AccuracyRow,
    emit_report,
    positioning_accuracy,
    ranging_rmse,
    testpoint_profile,
    write_accuracy_csv,
)
from .position import position_from_rssi
from .ranging import (
    FITTERS,
    MODEL_KINDS,
    RangingModel,
    TrainReport,
    load_model,
    predict_distance,
    save_model,
)
from .simulate import SimScenario, generate_campaign, load_scenario, parse_scenario

log = logging.getLogger("lpskit")

PRESETS = ("outdoor-paper", "indoor-paper")
PIPELINE_PRESETS = PRESETS + ("paper-both",)

CONFIG_ERRORS = (ParseError, ValidationError, FileNotFoundError)


@dataclass(frozen=True)
class TrainOptions:
    """Model hyperparameters exposed on the command line."""

    clamp_factor: float = 2.0
    svr_c: float = 1.0
    svr_eps: float | None = None
    spline_p: float | None = None
    learners: int = 30


def fit_model(kind: str, train: RangingDataset, opts: TrainOptions) -> TrainReport:
    if kind == "svr_linear":
        return FITTERS[kind](
            train, c=opts.svr_c, epsilon=opts.svr_eps, clamp_factor=opts.clamp_factor
        )
    if kind == "smoothing_spline":
        return FITTERS[kind](train, p=opts.spline_p, clamp_factor=opts.clamp_factor)
    if kind == "lsboost":
        return FITTERS[kind](train, n_learners=opts.learners, clamp_factor=opts.clamp_factor)
    return FITTERS[kind](train, clamp_factor=opts.clamp_factor)


def load_preset(name: str) -> tuple[SimScenario, tuple[str, ...]]:
    if name not in PRESETS:
        raise ParseError(f"unknown preset {name!r}; available: {', '.join(PIPELINE_PRESETS)}")
    text = resources.files("lpskit.presets").joinpath(f"{name}.scn").read_text(encoding="utf-8")
    return parse_scenario(text, name=f"preset:{name}")


def _parse_kinds(raw: str | None) -> tuple[str, ...]:
    if not raw:
        return MODEL_KINDS
    kinds = tuple(k.strip() for k in raw.split(",") if k.strip())
    unknown = [k for k in kinds if k not in MODEL_KINDS]
    if unknown:
        raise ParseError(f"unknown model kinds {unknown}; choose from {', '.join(MODEL_KINDS)}")
    return kinds


def _options(args: argparse.Namespace) -> TrainOptions:
    return TrainOptions(
        clamp_factor=args.clamp_factor,
        svr_c=args.svr_c,
        svr_eps=args.svr_eps,
        spline_p=args.spline_p,
        learners=args.learners,
    )


def _scenario_from_args(args: argparse.Namespace) -> tuple[SimScenario, tuple[str, ...]]:
    if bool(args.scenario) == bool(args.preset):
        raise ParseError("give exactly one of --scenario or --preset")
    if args.scenario:
        scenario, test_points = load_scenario(args.scenario)
    else:
        scenario, test_points = load_preset(args.preset)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    return scenario, test_points


def _write_campaign(scenario: SimScenario, out_dir: Path) -> list[RangingDataset]:
    uplinks, point_of_msg = generate_campaign(scenario)
    datasets = fuse(uplinks, scenario.plan, point_of_msg)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds_mod.save_site_plan(scenario.plan, out_dir / "site.csv")
    ds_mod.save_raw_log(uplinks, out_dir / "raw.csv")
    for ds in datasets:
        ds_mod.save_fused(ds, out_dir / f"fused_{ds.gateway_id}.csv")
    return datasets


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario, _ = _scenario_from_args(args)
    datasets = _write_campaign(scenario, Path(args.out))
    for ds in datasets:
        s = summarize(ds)
        print(
            f"gateway {ds.gateway_id}: records={s.n_records} points={s.n_points} "
            f"mean_rssi={s.mean_rssi:.2f} dBm distance {s.min_distance:.2f}..{s.max_distance:.2f} m"
        )
    log.info("campaign written to %s", args.out)
    return 0


def _load_fused_dir(data_dir: Path) -> dict[str, RangingDataset]:
    paths = sorted(data_dir.glob("fused_*.csv"))
    if not paths:
        raise ParseError(f"no fused_*.csv files in {data_dir}")
    datasets = {}
    for path in paths:
        ds = ds_mod.load_fused(path)
        datasets[ds.gateway_id] = ds
    return datasets


def cmd_train(args: argparse.Namespace) -> int:
    kinds = _parse_kinds(args.kinds)
    opts = _options(args)
    datasets = _load_fused_dir(Path(args.data_dir))
    results: list[tuple[str, str, TrainReport | Exception]] = []
    for gateway_id, ds in datasets.items():
        for kind in kinds:
            try:
                results.append((gateway_id, kind, fit_model(kind, ds, opts)))
            except LpskitError as err:
                log.warning("fit %s/%s failed: %s", kind, gateway_id, err)
                results.append((gateway_id, kind, err))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["gateway_id,kind,n_train,train_rmse,solver_status"]
    n_written = 0
    for gateway_id, kind, result in results:
        if isinstance(result, Exception):
            lines.append(f"{gateway_id},{kind},0,,failed:{type(result).__name__}")
            continue
        save_model(result.model, out_dir / f"model_{kind}_{gateway_id}.lpsm")
        log.debug("trained %s/%s in %.3f s", kind, gateway_id, result.wall_time)
        lines.append(
            f"{gateway_id},{kind},{result.n_train},{result.model.train_rmse!r},{result.solver_status}"
        )
        n_written += 1
    (out_dir / "train_report.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"trained {n_written} models ({len(results) - n_written} failures)")
    return 0


def cmd_range(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    ds = ds_mod.load_fused(args.data)
    lines = ["gateway_id,point_id,rssi_dbm,distance_m,predicted_m"]
    for rec in ds.records:
        predicted = predict_distance(model, rec.rssi)
        lines.append(
            f"{rec.gateway_id},{rec.point_id},{rec.rssi!r},{rec.distance!r},{predicted!r}"
        )
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"ranged {len(ds.records)} records with {model.kind}/{model.gateway_id}")
    return 0


def _load_models_dir(models_dir: Path, kinds: tuple[str, ...]) -> dict[str, dict[str, RangingModel]]:
    """Model files grouped as kind -> gateway_id -> model."""
    paths = sorted(models_dir.glob("model_*.lpsm"))
    if not paths:
        raise ParseError(f"no model_*.lpsm files in {models_dir}")
    grid: dict[str, dict[str, RangingModel]] = {}
    for path in paths:
        model = load_model(path)
        if model.kind not in kinds:
            continue
        grid.setdefault(model.kind, {})[model.gateway_id] = model
    if not grid:
        raise ParseError(f"no models of kinds {kinds} in {models_dir}")
    return grid


def _read_reading_groups(path: Path) -> list[dict[str, list[float]]]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as err:
        raise ParseError(f"cannot read readings {path}: {err}") from err
    if not lines or lines[0].strip() != "gateway_id,rssi_dbm":
        raise ParseError(f"{path}: expected header 'gateway_id,rssi_dbm'")
    groups: list[dict[str, list[float]]] = []
    current: dict[str, list[float]] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            if current:
                groups.append(current)
                current = {}
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"{path}:{line_no}: expected 'gateway_id,rssi_dbm'")
        try:
            current.setdefault(parts[0].strip(), []).append(float(parts[1]))
        except ValueError as err:
            raise ParseError(f"{path}:{line_no}: bad rssi {parts[1]!r}") from err
    if current:
        groups.append(current)
    return groups


def cmd_position(args: argparse.Namespace) -> int:
    kinds = _parse_kinds(args.kinds)
    grid = _load_models_dir(Path(args.models), kinds)
    if len(grid) != 1:
        raise ParseError(
            f"models directory holds kinds {sorted(grid)}; pick one with --kinds"
        )
    models = next(iter(grid.values()))
    plan = ds_mod.load_site_plan(args.site)
    groups = _read_reading_groups(Path(args.readings))
    lines = ["x_m,y_m,residual_rms,status"]
    located = 0
    for group in groups:
        try:
            fix = position_from_rssi(models, plan, group)
        except InsufficientGateways:
            lines.append(",,,insufficient_gateways")
            continue
        except MissingGateway:
            lines.append(",,,missing_gateway")
            continue
        lines.append(f"{fix.x!r},{fix.y!r},{fix.residual_rms!r},{fix.status}")
        located += 1
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"positioned {located}/{len(groups)} queries")
    return 0


def _evaluate_environment(
    plan: SitePlan,
    train: Mapping[str, RangingDataset],
    test: Mapping[str, RangingDataset],
    kinds: Sequence[str],
    opts: TrainOptions,
    d_norm_policy: str,
) -> dict:
    """Train the kind x gateway grid and compute every report artifact."""
    models: dict[str, dict[str, RangingModel]] = {}
    reports: list[tuple[str, str, TrainReport]] = []
    failures: list[tuple[str, str, str]] = []
    for kind in kinds:
        for gateway_id, tr in train.items():
            try:
                report = fit_model(kind, tr, opts)
            except LpskitError as err:
                log.warning("fit %s/%s failed: %s", kind, gateway_id, err)
                failures.append((kind, gateway_id, type(err).__name__))
                continue
            models.setdefault(kind, {})[gateway_id] = report.model
            reports.append((gateway_id, kind, report))

    rows_test: list[AccuracyRow] = []
    rows_train: list[AccuracyRow] = []
    rmse_rows: list[str] = []
    for kind, kind_models in models.items():
        if len(kind_models) < 3:
            continue
        rows_test.append(positioning_accuracy(kind_models, plan, test, d_norm_policy))
        rows_train.append(positioning_accuracy(kind_models, plan, train, d_norm_policy))
        for gateway_id, model in kind_models.items():
            rmse_rows.append(
                f"{plan.environment},{kind},{gateway_id},train,{ranging_rmse(model, train[gateway_id])!r}"
            )
            rmse_rows.append(
                f"{plan.environment},{kind},{gateway_id},test,{ranging_rmse(model, test[gateway_id])!r}"
            )
    if not models:
        raise ValidationError("every model fit failed; nothing to evaluate")
    profile_kind = "smoothing_spline" if "smoothing_spline" in models else sorted(models)[0]
    profiles = testpoint_profile(models[profile_kind], test, plan)
    return {
        "models": models,
        "reports": reports,
        "failures": failures,
        "rows_test": rows_test,
        "rows_train": rows_train,
        "rmse_rows": rmse_rows,
        "profiles": profiles,
    }


def run_pipeline(
    preset: str,
    out_dir: Path,
    seed: int | None = None,
    kinds: Sequence[str] = MODEL_KINDS,
    opts: TrainOptions = TrainOptions(),
    d_norm_policy: str = "centroid",
) -> dict:
    """Full case-study flow; returns the per-environment evaluation dict."""
    if preset not in PIPELINE_PRESETS:
        raise ParseError(
            f"unknown preset {preset!r}; available: {', '.join(PIPELINE_PRESETS)}"
        )
    preset_names = PRESETS if preset == "paper-both" else (preset,)
    out_dir.mkdir(parents=True, exist_ok=True)

    all_rows_test: list[AccuracyRow] = []
    all_rows_train: list[AccuracyRow] = []
    all_rmse_rows: list[str] = []
    profiles_by_env: dict[str, list] = {}
    report_lines = ["environment,gateway_id,kind,n_train,train_rmse,solver_status"]
    outcome: dict[str, dict] = {}

    for name in preset_names:
        scenario, test_points = load_preset(name)
        if seed is not None:
            scenario = replace(scenario, seed=seed)
        log.info("pipeline: simulating %s (seed %d)", name, scenario.seed)
        env_dir = out_dir / "data" / name
        datasets = _write_campaign(scenario, env_dir)
        train: dict[str, RangingDataset] = {}
        test: dict[str, RangingDataset] = {}
        for ds in datasets:
            tr, te = split_train_test(ds, set(test_points))
            train[ds.gateway_id] = tr
            test[ds.gateway_id] = te
        log.info("pipeline: training %d kinds x %d gateways", len(kinds), len(train))
        result = _evaluate_environment(
            scenario.plan, train, test, kinds, opts, d_norm_policy
        )
        outcome[name] = result
        all_rows_test.extend(result["rows_test"])
        all_rows_train.extend(result["rows_train"])
        all_rmse_rows.extend(result["rmse_rows"])
        profiles_by_env[scenario.plan.environment] = result["profiles"]
        models_dir = out_dir / "models"
        models_dir.mkdir(exist_ok=True)
        for gateway_id, kind, report in result["reports"]:
            save_model(
                report.model, models_dir / f"model_{scenario.plan.environment}_{kind}_{gateway_id}.lpsm"
            )
            report_lines.append(
                f"{scenario.plan.environment},{gateway_id},{kind},{report.n_train},"
                f"{report.model.train_rmse!r},{report.solver_status}"
            )
        for kind, gateway_id, err_name in result["failures"]:
            report_lines.append(f"{scenario.plan.environment},{gateway_id},{kind},0,,failed:{err_name}")

    emit_report(all_rows_test, profiles_by_env, out_dir)
    write_accuracy_csv(all_rows_train, out_dir / "accuracy_train.csv")
    (out_dir / "ranging_rmse.csv").write_text(
        "\n".join(["environment,model,gateway,split,rmse_m"] + sorted(all_rmse_rows)) + "\n",
        encoding="utf-8",
    )
    (out_dir / "train_report.csv").write_text("\n".join(report_lines) + "\n", encoding="utf-8")
    return outcome


def cmd_pipeline(args: argparse.Namespace) -> int:
    kinds = _parse_kinds(args.kinds)
    outcome = run_pipeline(
        args.preset,
        Path(args.out),
        seed=args.seed,
        kinds=kinds,
        opts=_options(args),
        d_norm_policy=args.d_norm_policy,
    )
    n_rows = sum(len(result["rows_test"]) for result in outcome.values())
    print(f"pipeline complete: {n_rows} accuracy rows in {args.out}/accuracy.csv")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    kinds = _parse_kinds(args.kinds)
    grid = _load_models_dir(Path(args.models), kinds)
    plan = ds_mod.load_site_plan(args.site)
    datasets = _load_fused_dir(Path(args.data_dir))
    rows = []
    for kind, kind_models in sorted(grid.items()):
        if len(kind_models) < 3:
            continue
        rows.append(positioning_accuracy(kind_models, plan, datasets, args.d_norm_policy))
    profile_kind = "smoothing_spline" if "smoothing_spline" in grid else sorted(grid)[0]
    profiles = {plan.environment: testpoint_profile(grid[profile_kind], datasets, plan)}
    written = emit_report(rows, profiles, Path(args.out))
    print(f"wrote {', '.join(str(p) for p in written)}")
    return 0


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kinds", help="comma-separated model kinds (default: all nine)")
    parser.add_argument("--clamp-factor", type=float, default=2.0)
    parser.add_argument("--svr-c", type=float, default=1.0)
    parser.add_argument("--svr-eps", type=float, default=None)
    parser.add_argument("--spline-p", type=float, default=None)
    parser.add_argument("--learners", type=int, default=30)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpskit", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic campaign")
    p.add_argument("--scenario", help="scenario file path")
    p.add_argument("--preset", help=f"shipped preset ({', '.join(PRESETS)})")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train ranging models from fused CSVs")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("range", help="apply one model to a fused CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_range)

    p = sub.add_parser("position", help="trilaterate readings")
    p.add_argument("--models", required=True, help="directory of model_*.lpsm files")
    p.add_argument("--site", required=True)
    p.add_argument("--readings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kinds", help="model kind to use when several are present")
    p.set_defaults(func=cmd_position)

    p = sub.add_parser("report", help="evaluate models against fused data")
    p.add_argument("--models", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--site", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kinds")
    p.add_argument("--d-norm-policy", default="centroid")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="full case-study flow for shipped presets")
    p.add_argument("--preset", default="paper-both", help=f"one of {', '.join(PIPELINE_PRESETS)}")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--d-norm-policy", default="centroid")
    _add_train_flags(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("LPSKIT_LOG", "error").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.ERROR),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CONFIG_ERRORS as err:
        print(f"lpskit: configuration error: {err}", file=sys.stderr)
        return 2
    except LpskitError as err:
        print(f"lpskit: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
