"""Monte-Carlo benchmark harness.

Sweeps one experiment variable over a grid, runs the selected methods on
R independently seeded realizations per grid cell, scores every run with
the alignment-aware criteria, and aggregates medians with central-60%
bands (the lowest and highest 20% of ordered values dropped).

Determinism contract: the sweep spec and seed fully determine every emitted
number. Data for a (cell, realization) pair is generated from a
method-independent seed stream so all methods score the same instance;
each method owns a second stream keyed by a fixed method id, so adding or
removing methods never perturbs the numbers of other cells. Work items are
independent, and the reduction is ordered, so results are identical for any
thread count.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .metrics import align, mixing_criterion, relative_error, scale_fit, sdr
from .model import add_noise, forward_observe
from .refinement import condat_vu_refine, default_params
from .simulation import ExperimentSpec, gen_kernel, gen_mixing, gen_sources
from .solver import SolverConfig, decgmca

__all__ = [
    "SweepSpec",
    "SweepResult",
    "RawRecord",
    "CellSummary",
    "run_sweep",
    "report",
    "load_result",
    "evaluate_instance",
    "realize_instance",
    "default_solver_config",
]

SWEEP_VARIABLES = ("active_fraction", "n_sources", "snr_db", "resolution_ratio")

# Fixed method ids keep seed streams stable when the method subset changes.
METHOD_IDS = {"decgmca": 1, "gmca": 2, "mc_gmca": 3, "forward_gmca": 4}

_DATA_STREAM = 101
_RAW_COLUMNS = (
    "method",
    "n_channels",
    "variable",
    "value",
    "realization",
    "delta_A",
    "sdr_db",
    "rel_err_pct",
)
_SUMMARY_COLUMNS = (
    "method",
    "n_channels",
    "variable",
    "value",
    "n_realizations",
    "n_failed",
    "cell_failed",
    "median_delta_A",
    "band_lo_delta_A",
    "band_hi_delta_A",
    "median_sdr_db",
    "band_lo_sdr_db",
    "band_hi_sdr_db",
    "median_rel_err_pct",
    "wall_seconds",
)


@dataclass
class SweepSpec:
    """One benchmark sweep: a variable, its grid, and the run protocol."""

    variable: str
    values: list
    fixed: ExperimentSpec
    channel_counts: list = None
    methods: list = field(default_factory=lambda: ["decgmca"])
    n_realizations: int = 10
    seed: int = 0
    refine: bool = True
    refine_iterations: int = 500
    solver: dict = None

    def __post_init__(self):
        if isinstance(self.fixed, dict):
            self.fixed = ExperimentSpec(**self.fixed)
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        if not self.values:
            raise ValueError("values must be nonempty")
        if self.channel_counts is None:
            self.channel_counts = [self.fixed.n_channels]
        if not self.channel_counts:
            raise ValueError("channel_counts must be nonempty")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be at least 1")
        unknown = [m for m in self.methods if m not in METHOD_IDS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        if "mc_gmca" in self.methods and self.fixed.kernel.kind != "mask":
            raise ValueError("mc_gmca is only defined for mask kernels")


@dataclass
class RawRecord:
    """Scores of one (method, cell, realization) run."""

    method: str
    n_channels: int
    value: float
    value_index: int
    realization: int
    delta_a: float
    sdr_db: float
    rel_err_pct: float
    seconds: float
    failed: bool = False
    error: str = ""


@dataclass
class CellSummary:
    """Aggregates of one (method, n_channels, value) cell."""

    method: str
    n_channels: int
    value: float
    value_index: int
    n_realizations: int
    n_failed: int
    cell_failed: bool
    median_delta_a: float
    band_delta_a: tuple
    median_sdr_db: float
    band_sdr_db: tuple
    median_rel_err_pct: float
    wall_seconds: float


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list
    cells: list


def default_solver_config(kernel_kind: str, rng_seed: int, overrides: dict = None
                          ) -> SolverConfig:
    """Solver defaults per degradation kind.

    Mask kernels: completion-based initialization and eps 1 -> 1e-3.
    Beam kernels (masked or not): svd initialization and eps 1 -> 1e-5.
    """
    settings = {
        "n_iterations": 50,
        "eps_start": 1.0,
        "eps_decay": "exponential",
        "tau_final": 3.0,
        "p0": 0.05,
        "n_wavelet_scales": 5,
        "threshold_mode": "hard",
        "rng_seed": rng_seed,
    }
    if kernel_kind == "mask":
        settings.update(init="mc_svd", eps_final=1e-3)
    else:
        settings.update(init="svd", eps_final=1e-5)
    settings.update(overrides or {})
    return SolverConfig(**settings)


def _cell_spec(spec: SweepSpec, n_channels: int, value) -> ExperimentSpec:
    kernel = dataclasses.replace(spec.fixed.kernel)
    out = dataclasses.replace(spec.fixed, n_channels=n_channels, kernel=kernel)
    if spec.variable == "active_fraction":
        out.kernel.active_fraction = float(value)
    elif spec.variable == "n_sources":
        out.n_sources = int(value)
    elif spec.variable == "snr_db":
        out.snr_db = float(value)
    else:
        out.kernel.ratio = float(value)
    if out.n_channels < out.n_sources:
        raise ValueError("cell has fewer channels than sources")
    return out


def realize_instance(spec: ExperimentSpec, seed_key=None):
    """Generate one full instance (sources, mixing, kernel, noisy data).

    ``seed_key`` is a sequence of ints keying the generator streams; by
    default the spec's own seed is used.
    """
    if seed_key is None:
        seed_key = [spec.seed, _DATA_STREAM, 0, 0]
    state = np.random.SeedSequence(list(seed_key)).generate_state(4)
    sources = gen_sources(spec, np.random.default_rng(int(state[0])))
    mixing = gen_mixing(
        spec.n_channels, spec.n_sources, np.random.default_rng(int(state[1]))
    )
    kernel = gen_kernel(spec, np.random.default_rng(int(state[2])))
    clean = forward_observe(mixing, _spectra(sources), kernel)
    data = add_noise(clean, spec.snr_db, int(state[3]))
    return sources, mixing, kernel, data


def _spectra(sources):
    from .model import SpectralSourceSet

    return SpectralSourceSet(np.fft.fft(sources.data, axis=1))


def _run_method(name, Y, kernel, n_sources, config, refine, refine_iterations):
    """Run one method and, when asked, refine its estimate against the
    data/kernel pair that method actually models."""
    if name == "decgmca":
        A, S, _ = decgmca(Y, kernel, n_sources, config)
        Y_eff, H_eff = Y, kernel
    elif name == "gmca":
        A, S = baselines.gmca(Y, n_sources, config)
        Y_eff = Y
        H_eff = baselines.ones_kernel(Y.n_channels, Y.n_samples)
    elif name == "mc_gmca":
        completed = baselines.svt_complete(Y, kernel)
        A, S = baselines.gmca(completed, n_sources, config)
        Y_eff = completed
        H_eff = baselines.ones_kernel(Y.n_channels, Y.n_samples)
    elif name == "forward_gmca":
        deconvolved = baselines.deconvolved_data(
            Y, kernel, config.n_wavelet_scales, tau=config.tau_final
        )
        A, S = baselines.gmca(deconvolved, n_sources, config)
        Y_eff = deconvolved
        H_eff = baselines.ones_kernel(Y.n_channels, Y.n_samples)
    else:
        raise ValueError(f"unknown method {name!r}")
    if refine:
        params = default_params(
            A,
            H_eff,
            S,
            config.n_wavelet_scales,
            tau_final=config.tau_final,
            n_iterations=refine_iterations,
        )
        S = condat_vu_refine(Y_eff, H_eff, A, S, params)
    return A, S


def _score(A_est, S_est, A_true, S_true):
    result = align(A_est, S_est, A_true)
    delta = mixing_criterion(result.aligned_A, A_true)
    sdr_db = sdr(result.aligned_S, S_true)
    fitted = scale_fit(result.aligned_S, S_true)
    worst = max(
        relative_error(fitted.data[j], S_true.data[j])
        for j in range(S_true.n_sources)
    )
    return delta, sdr_db, worst


def evaluate_instance(
    spec: ExperimentSpec,
    methods,
    seed: int,
    refine: bool = True,
    refine_iterations: int = 500,
    solver_overrides: dict = None,
    cell_index: int = 0,
    realization: int = 0,
):
    """Generate one instance and score every method on it.

    Returns a list of dicts (method, delta_A, sdr_db, rel_err_pct, seconds).
    Used by the sweep for each (cell, realization) and by the single-run
    CLI command.
    """
    data_key = [seed, _DATA_STREAM, cell_index, realization]
    S_true, A_true, kernel, Y = realize_instance(spec, data_key)
    rows = []
    for name in methods:
        method_key = [seed, METHOD_IDS[name], cell_index, realization]
        method_seed = int(np.random.SeedSequence(method_key).generate_state(1)[0])
        config = default_solver_config(
            spec.kernel.kind, method_seed, solver_overrides
        )
        start = time.perf_counter()
        A_est, S_est = _run_method(
            name, Y, kernel, spec.n_sources, config, refine, refine_iterations
        )
        delta, sdr_db, rel = _score(A_est, S_est, A_true, S_true)
        rows.append(
            {
                "method": name,
                "delta_A": delta,
                "sdr_db": sdr_db,
                "rel_err_pct": rel,
                "seconds": time.perf_counter() - start,
            }
        )
    return rows


def _median_and_band(values):
    vals = sorted(v for v in values if not math.isnan(v))
    if not vals:
        return math.nan, (math.nan, math.nan)
    med = float(np.median(vals))
    drop = int(0.2 * len(vals))
    if 2 * drop >= len(vals):
        drop = (len(vals) - 1) // 2
    return med, (vals[drop], vals[-1 - drop])


def run_sweep(spec: SweepSpec, n_threads: int = 1) -> SweepResult:
    """Run the full sweep and aggregate per-cell summaries.

    A failing realization is recorded (not fatal); a cell is marked failed
    when more than 20% of its realizations errored.
    """
    items = []
    for ci, n_c in enumerate(spec.channel_counts):
        for vi, value in enumerate(spec.values):
            cell = _cell_spec(spec, n_c, value)
            cell_index = ci * len(spec.values) + vi
            for name in spec.methods:
                for r in range(spec.n_realizations):
                    items.append((name, n_c, vi, value, cell, cell_index, r))

    def work(item):
        name, n_c, vi, value, cell, cell_index, r = item
        start = time.perf_counter()
        try:
            rows = evaluate_instance(
                cell,
                [name],
                spec.seed,
                refine=spec.refine,
                refine_iterations=spec.refine_iterations,
                solver_overrides=spec.solver,
                cell_index=cell_index,
                realization=r,
            )
            row = rows[0]
            return RawRecord(
                method=name,
                n_channels=n_c,
                value=float(value),
                value_index=vi,
                realization=r,
                delta_a=row["delta_A"],
                sdr_db=row["sdr_db"],
                rel_err_pct=row["rel_err_pct"],
                seconds=row["seconds"],
            )
        except Exception as exc:  # noqa: BLE001 - per-realization isolation
            return RawRecord(
                method=name,
                n_channels=n_c,
                value=float(value),
                value_index=vi,
                realization=r,
                delta_a=math.nan,
                sdr_db=math.nan,
                rel_err_pct=math.nan,
                seconds=time.perf_counter() - start,
                failed=True,
                error=f"{type(exc).__name__}: {exc}",
            )

    if n_threads <= 1:
        records = [work(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            records = list(pool.map(work, items))

    method_order = {name: i for i, name in enumerate(spec.methods)}
    records.sort(
        key=lambda rec: (
            method_order[rec.method],
            rec.n_channels,
            rec.value_index,
            rec.realization,
        )
    )

    cells = []
    for name in spec.methods:
        for n_c in spec.channel_counts:
            for vi, value in enumerate(spec.values):
                group = [
                    rec
                    for rec in records
                    if rec.method == name
                    and rec.n_channels == n_c
                    and rec.value_index == vi
                ]
                n_failed = sum(rec.failed for rec in group)
                med_d, band_d = _median_and_band([rec.delta_a for rec in group])
                med_s, band_s = _median_and_band([rec.sdr_db for rec in group])
                med_r, _ = _median_and_band([rec.rel_err_pct for rec in group])
                cells.append(
                    CellSummary(
                        method=name,
                        n_channels=n_c,
                        value=float(value),
                        value_index=vi,
                        n_realizations=len(group),
                        n_failed=n_failed,
                        cell_failed=n_failed > 0.2 * len(group),
                        median_delta_a=med_d,
                        band_delta_a=band_d,
                        median_sdr_db=med_s,
                        band_sdr_db=band_s,
                        median_rel_err_pct=med_r,
                        wall_seconds=sum(rec.seconds for rec in group),
                    )
                )
    return SweepResult(spec=spec, rows=records, cells=cells)


def _spec_dict(spec: SweepSpec) -> dict:
    out = dataclasses.asdict(spec)
    return out


def report(result: SweepResult, out_dir, formats=("csv", "json")) -> dict:
    """Write the raw table, the summary table, and a JSON mirror.

    Raw CSV columns: method, n_channels, variable, value, realization,
    delta_A, sdr_db, rel_err_pct — every field a pure function of
    (spec, seed), so reruns are byte-identical. Wall-clock timing is
    inherently nondeterministic and therefore lives in the summary CSV and
    the JSON mirror only.

    Returns the written paths keyed by artifact name.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    variable = result.spec.variable
    paths = {}
    if "csv" in formats:
        raw_path = out_dir / "raw.csv"
        try:
            with raw_path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(_RAW_COLUMNS)
                for rec in result.rows:
                    writer.writerow(
                        [
                            rec.method,
                            rec.n_channels,
                            variable,
                            rec.value,
                            rec.realization,
                            rec.delta_a,
                            rec.sdr_db,
                            rec.rel_err_pct,
                        ]
                    )
        except OSError as exc:
            raise OSError(f"cannot write raw table {raw_path}: {exc}") from exc
        paths["raw"] = raw_path

        summary_path = out_dir / "summary.csv"
        try:
            with summary_path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(_SUMMARY_COLUMNS)
                for cell in result.cells:
                    writer.writerow(
                        [
                            cell.method,
                            cell.n_channels,
                            variable,
                            cell.value,
                            cell.n_realizations,
                            cell.n_failed,
                            int(cell.cell_failed),
                            cell.median_delta_a,
                            cell.band_delta_a[0],
                            cell.band_delta_a[1],
                            cell.median_sdr_db,
                            cell.band_sdr_db[0],
                            cell.band_sdr_db[1],
                            cell.median_rel_err_pct,
                            cell.wall_seconds,
                        ]
                    )
        except OSError as exc:
            raise OSError(
                f"cannot write summary table {summary_path}: {exc}"
            ) from exc
        paths["summary"] = summary_path

    if "json" in formats:
        json_path = out_dir / "result.json"
        payload = {
            "spec": _spec_dict(result.spec),
            "rows": [dataclasses.asdict(rec) for rec in result.rows],
            "cells": [dataclasses.asdict(cell) for cell in result.cells],
        }
        try:
            json_path.write_text(json.dumps(payload, indent=2))
        except OSError as exc:
            raise OSError(f"cannot write JSON mirror {json_path}: {exc}") from exc
        paths["json"] = json_path
    return paths


def load_result(path) -> SweepResult:
    """Rebuild a SweepResult from a JSON mirror written by ``report``."""
    payload = json.loads(Path(path).read_text())
    spec_dict = payload["spec"]
    spec = SweepSpec(**spec_dict)
    rows = [RawRecord(**row) for row in payload["rows"]]
    cells = [
        CellSummary(
            **{
                **cell,
                "band_delta_a": tuple(cell["band_delta_a"]),
                "band_sdr_db": tuple(cell["band_sdr_db"]),
            }
        )
        for cell in payload["cells"]
    ]
    return SweepResult(spec=spec, rows=rows, cells=cells)
