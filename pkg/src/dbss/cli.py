"""Command-line benchmark driver.

Subcommands:
  simulate  generate one synthetic instance and save it as an npz dataset
  run       run the selected methods on one instance and print the criteria
  sweep     run a full Monte-Carlo sweep from a JSON config
  report    re-render the CSV tables from a saved JSON result

Exit codes: 0 on success, 1 on configuration errors (bad flags, unreadable
or invalid config), 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    METHOD_IDS,
    SweepSpec,
    evaluate_instance,
    load_result,
    realize_instance,
    report,
    run_sweep,
)
from .simulation import ExperimentSpec, save_dataset

__all__ = ["main", "entrypoint", "build_parser"]


class ConfigError(Exception):
    """Raised when flags or config-file contents are invalid."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbss-bench",
        description="Benchmark driver for joint deconvolution and blind "
        "source separation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser(
        "simulate", help="generate one synthetic instance as an npz dataset"
    )
    simulate.add_argument(
        "--config", help="JSON file of experiment fields (defaults otherwise)"
    )
    simulate.add_argument("--seed", type=int, help="override the experiment seed")
    simulate.add_argument("--out-dir", default=".", help="output directory")

    run = sub.add_parser(
        "run", help="run methods on a single instance and print the criteria"
    )
    run.add_argument(
        "--config",
        help="JSON file: {experiment: {...}, methods: [...], refine: bool, "
        "refine_iterations: int, solver: {...}}",
    )
    run.add_argument("--seed", type=int, help="override the experiment seed")
    run.add_argument("--out-dir", help="also write run.json here")

    sweep = sub.add_parser("sweep", help="run a Monte-Carlo sweep")
    sweep.add_argument(
        "--config", required=True, help="JSON file of sweep fields"
    )
    sweep.add_argument("--seed", type=int, help="override the sweep seed")
    sweep.add_argument("--threads", type=int, default=1, help="worker threads")
    sweep.add_argument("--out-dir", default=".", help="output directory")

    rep = sub.add_parser(
        "report", help="re-render tables from a saved result.json"
    )
    rep.add_argument("result_json", help="path to a result.json mirror")
    rep.add_argument("--out-dir", default=".", help="output directory")
    rep.add_argument(
        "--format",
        choices=("csv", "json", "both"),
        default="csv",
        help="artifacts to write",
    )
    return parser


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return config


def _experiment_spec(fields: dict, seed) -> ExperimentSpec:
    try:
        spec = ExperimentSpec(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc
    if seed is not None:
        spec.seed = seed
    return spec


def _cmd_simulate(args) -> int:
    config = _load_config(args.config)
    spec = _experiment_spec(config, args.seed)
    sources, mixing, kernel, data = realize_instance(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "dataset.npz"
    save_dataset(path, spec, sources, mixing, kernel, data)
    print(f"wrote {path}")
    return 0


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    spec = _experiment_spec(config.get("experiment", {}), args.seed)
    methods = config.get("methods", ["decgmca"])
    refine = bool(config.get("refine", True))
    refine_iterations = int(config.get("refine_iterations", 500))
    solver = config.get("solver")
    if "mc_gmca" in methods and spec.kernel.kind != "mask":
        raise ConfigError("mc_gmca is only defined for mask kernels")
    unknown = [m for m in methods if m not in METHOD_IDS]
    if unknown:
        raise ConfigError(f"unknown methods {unknown}")
    rows = evaluate_instance(
        spec,
        methods,
        spec.seed,
        refine=refine,
        refine_iterations=refine_iterations,
        solver_overrides=solver,
    )
    for row in rows:
        print(
            f"method={row['method']} delta_A={row['delta_A']:.4f} "
            f"sdr_db={row['sdr_db']:.4f} rel_err_pct={row['rel_err_pct']:.4f} "
            f"seconds={row['seconds']:.2f}"
        )
    if args.out_dir is not None:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "run.json"
        path.write_text(json.dumps({"experiment": config.get("experiment", {}),
                                    "seed": spec.seed, "rows": rows}, indent=2))
        print(f"wrote {path}")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args.config)
    try:
        spec = SweepSpec(**config)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sweep config: {exc}") from exc
    if args.seed is not None:
        spec.seed = args.seed
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    result = run_sweep(spec, n_threads=args.threads)
    paths = report(result, args.out_dir, formats=("csv", "json"))
    for cell in result.cells:
        print(
            f"method={cell.method} n_channels={cell.n_channels} "
            f"{spec.variable}={cell.value} "
            f"median_delta_A={cell.median_delta_a:.4f} "
            f"median_sdr_db={cell.median_sdr_db:.4f} "
            f"failed={cell.n_failed}/{cell.n_realizations}"
        )
    for name, path in paths.items():
        print(f"wrote {path}")
    return 0


def _cmd_report(args) -> int:
    try:
        result = load_result(args.result_json)
    except OSError as exc:
        raise ConfigError(
            f"cannot read result {args.result_json}: {exc}"
        ) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(
            f"result {args.result_json} is not a valid result mirror: {exc}"
        ) from exc
    formats = ("csv", "json") if args.format == "both" else (args.format,)
    paths = report(result, args.out_dir, formats=formats)
    for name, path in paths.items():
        print(f"wrote {path}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))
