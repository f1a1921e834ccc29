"""
Lambda sweep over the Dicke model.

A first pass takes the parity-sector spectra at every lambda for the spacing
summaries; the widest of them fixes one beta per thermal ratio for the whole grid.
The second pass treats every lambda point as an independent work item: build H and
H', restrict to the requested parity sector, diagonalize (through the eigensystem
cache when one is configured), rotate H' once and evaluate chi1/chi2 for every
(t, beta) pair.
A point that fails is logged and marked, the rest of the sweep continues.
"""
import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

import cache
import config as settings
from exceptions import DimensionError, OpfidError, UnfoldingError
from schemas import (
    ConvergenceReport,
    DickeParams,
    EigenSystem,
    HermitianMatrix,
    SpectralSummary,
    SweepConfig,
    SweepResult,
    SweepRow,
)
from services import fidelity_service, hilbert_service, spectra_service

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["lambda", "t", "beta", "chi1", "chi1_normalized", "chi2", "dim", "sector", "status"]
SUMMARY_COLUMNS = ["lambda", "sector", "relative_entropy_wigner", "ground_energy", "n_levels"]

CONVERGENCE_TOLERANCE = {"ground_energy": 1e-3, "chi1": 5e-2}
MIN_CONVERGENCE_CUTOFF = 8


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _restrict(params: DickeParams, sector: str) -> Tuple[HermitianMatrix, HermitianMatrix]:
    """(H, H') in the requested sector."""
    H, basis = hilbert_service.build_dicke_hamiltonian(params)
    Hprime = hilbert_service.build_dicke_derivative(params)
    if sector == "full":
        return H, Hprime
    H_sector = hilbert_service.parity_split(H, basis).block(sector)
    Hprime_sector = hilbert_service.parity_split(Hprime, basis).block(sector)
    return H_sector, Hprime_sector


def _eigensystem(cfg: SweepConfig, params: DickeParams, H: HermitianMatrix) -> EigenSystem:
    if not cfg.cache_dir:
        return spectra_service.eigendecompose(H, max_dim=params.max_dim)

    key = cache.eigensystem_key(params, params.coupling, cfg.sector)
    eig = cache.load_eigensystem(cfg.cache_dir, key)
    if eig is not None and eig.dim == H.dim:
        logger.debug(f"Cache hit for lambda={params.coupling}")
        return eig
    eig = spectra_service.eigendecompose(H, max_dim=params.max_dim)
    cache.cache_eigensystem(cfg.cache_dir, key, eig)
    return eig


def _summary(cfg: SweepConfig, coupling: float, sector: str, levels: np.ndarray) -> SpectralSummary:
    n_levels = max(int(math.floor(cfg.level_fraction * levels.size)), 1)
    levels = levels[:n_levels]
    try:
        _, entropy = spectra_service.level_statistics([levels], degree=cfg.unfold_degree)
    except UnfoldingError as e:
        logger.debug(f"No spacing statistics at lambda={coupling} ({sector}): {e}")
        entropy = math.nan
    return SpectralSummary(
        coupling=coupling,
        sector=sector,
        relative_entropy_wigner=entropy,
        ground_energy=float(levels[0]),
        n_levels=n_levels,
    )


def _scan_point(cfg: SweepConfig, coupling: float) -> Tuple[List[SpectralSummary], Optional[float]]:
    """Per-sector spacing summaries at one lambda, and the width of the spectrum the metric is evaluated on."""
    params = cfg.dicke.model_copy(update={"coupling": float(coupling)})
    try:
        H, basis = hilbert_service.build_dicke_hamiltonian(params)
        blocks = hilbert_service.parity_split(H, basis)
        levels = {sector: scipy.linalg.eigvalsh(blocks.block(sector).entries) for sector in ("even", "odd")}
    except (OpfidError, np.linalg.LinAlgError) as e:
        logger.warning(f"Spectral scan at lambda={coupling} failed: {e}")
        return [], None

    summaries = [_summary(cfg, params.coupling, sector, levels[sector]) for sector in ("even", "odd")]
    if cfg.sector == "full":
        evaluated = np.concatenate([levels["even"], levels["odd"]])
    else:
        evaluated = levels[cfg.sector]
    return summaries, float(evaluated.max() - evaluated.min())


def _thermal_betas(cfg: SweepConfig, widths: List[float]) -> List[float]:
    """One beta per thermal ratio for the whole grid, calibrated on the widest spectrum."""
    if not cfg.thermal_ratios:
        return []
    if not widths:
        return [math.nan] * len(cfg.thermal_ratios)
    widest = max(widths)
    betas = [spectra_service.beta_for_spectral_width(widest, ratio) for ratio in cfg.thermal_ratios]
    logger.info(f"Thermal ratios {cfg.thermal_ratios} -> beta {betas} (widest spectrum {widest:.6g})")
    return betas


def _failed_rows(cfg: SweepConfig, thermal_betas: List[float], coupling: float, dim: int) -> List[SweepRow]:
    betas = list(cfg.betas) + list(thermal_betas)
    return [
        SweepRow(
            coupling=coupling, t=t, beta=beta, chi1=math.nan, chi1_normalized=math.nan,
            chi2=math.nan, dim=dim, sector=cfg.sector, status="failed", beta_choice=choice,
        )
        for t in cfg.times
        for choice, beta in enumerate(betas)
    ]


def _evaluate_point(cfg: SweepConfig, thermal_betas: List[float], coupling: float) -> List[SweepRow]:
    params = cfg.dicke.model_copy(update={"coupling": float(coupling)})
    try:
        H, Hprime = _restrict(params, cfg.sector)
        eig = _eigensystem(cfg, params, H)
        W = fidelity_service.perturbation_in_eigenbasis(eig, Hprime)

        weights = [spectra_service.thermal_weights(eig, beta) for beta in list(cfg.betas) + thermal_betas]
        rows = []
        for t in cfg.times:
            for choice, rho in enumerate(weights):
                chi1 = fidelity_service.chi1(eig, W, rho, t)
                rows.append(
                    SweepRow(
                        coupling=params.coupling, t=t, beta=rho.beta, chi1=chi1, chi1_normalized=chi1,
                        chi2=fidelity_service.chi2(W, rho, t), dim=eig.dim, sector=cfg.sector,
                        beta_choice=choice,
                    )
                )
    except (OpfidError, np.linalg.LinAlgError) as e:
        logger.warning(f"Sweep point lambda={coupling} failed: {e}")
        return _failed_rows(cfg, thermal_betas, params.coupling, params.dim)

    logger.info(f"lambda={params.coupling:.6g} done (d={eig.dim})")
    return rows


def _normalize(rows: List[SweepRow]) -> List[SweepRow]:
    """Divide chi1 by its maximum over lambda within each (t, beta choice) group."""
    maxima: Dict[Tuple[float, int], float] = {}
    for row in rows:
        if row.status == "ok":
            group = (row.t, row.beta_choice)
            maxima[group] = max(maxima.get(group, 0.0), row.chi1)

    normalized = []
    for row in rows:
        if row.status != "ok":
            normalized.append(row)
            continue
        peak = maxima[(row.t, row.beta_choice)]
        value = row.chi1 / peak if peak > 0 else 0.0
        normalized.append(row.model_copy(update={"chi1_normalized": value}))
    return normalized


def run_sweep(cfg: SweepConfig) -> SweepResult:
    if cfg.dicke.dim > cfg.dicke.max_dim:
        raise DimensionError(
            f"Dicke space of dimension {cfg.dicke.dim} exceeds the guard {cfg.dicke.max_dim}; "
            f"raise OPFID_MAX_DIM to proceed"
        )
    grid = cfg.lambda_grid()
    logger.info(
        f"Sweeping {grid.size} lambda points on [{cfg.lambda_min}, {cfg.lambda_max}] "
        f"(d={cfg.dicke.dim}, sector={cfg.sector}, workers={cfg.max_workers})"
    )
    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=cfg.max_workers) as executor:
        scans = list(executor.map(partial(_scan_point, cfg), grid))
        thermal_betas = _thermal_betas(cfg, [width for _, width in scans if width is not None])
        if any(math.isnan(beta) for beta in thermal_betas):
            results = [_failed_rows(cfg, thermal_betas, float(c), cfg.dicke.dim) for c in grid]
        else:
            results = list(executor.map(partial(_evaluate_point, cfg, thermal_betas), grid))

    rows = [row for point_rows in results for row in point_rows]
    summaries = [summary for point_summaries, _ in scans for summary in point_summaries]
    if cfg.normalize:
        rows = _normalize(rows)

    failed = sum(1 for point_rows in results if point_rows and point_rows[0].status == "failed")
    if failed:
        logger.warning(f"{failed} of {grid.size} lambda points failed")

    metadata = {
        "config": cfg.model_dump(),
        "thermal_betas": thermal_betas,
        "version": settings.VERSION,
        "wall_time_seconds": time.perf_counter() - started,
    }
    return SweepResult(rows=rows, summaries=summaries, metadata=metadata)


def cutoff_convergence_check(
    p: DickeParams,
    coupling: float,
    quantity: str = "ground_energy",
    t: float = 100.0,
    beta: float = 0.0,
) -> ConvergenceReport:
    """Recompute `quantity` at boson cutoffs M/2, 3M/4 and M and report the relative changes."""
    if quantity not in CONVERGENCE_TOLERANCE:
        raise ValueError(f"Unknown convergence quantity '{quantity}'")
    if p.boson_cutoff < MIN_CONVERGENCE_CUTOFF:
        raise ValueError(f"Convergence checks need boson_cutoff >= {MIN_CONVERGENCE_CUTOFF}, got {p.boson_cutoff}")

    M = p.boson_cutoff
    cutoffs = [M // 2, (3 * M) // 4, M]
    values = []
    for cutoff in cutoffs:
        params = p.model_copy(update={"boson_cutoff": cutoff, "coupling": float(coupling)})
        H, _ = hilbert_service.build_dicke_hamiltonian(params)
        if quantity == "ground_energy":
            values.append(float(scipy.linalg.eigvalsh(H.entries)[0]))
        else:
            eig = spectra_service.eigendecompose(H, max_dim=params.max_dim)
            W = fidelity_service.perturbation_in_eigenbasis(eig, hilbert_service.build_dicke_derivative(params))
            values.append(fidelity_service.chi1(eig, W, spectra_service.thermal_weights(eig, beta), t))

    changes = []
    for previous, current in zip(values, values[1:]):
        scale = max(abs(current), np.finfo(float).tiny)
        changes.append(abs(current - previous) / scale)

    tolerance = CONVERGENCE_TOLERANCE[quantity]
    converged = changes[-1] <= tolerance
    if not converged:
        logger.warning(
            f"{quantity} at lambda={coupling} not converged in the boson cutoff: "
            f"relative change {changes[-1]:.3e} > {tolerance:g} (cutoffs {cutoffs})"
        )
    return ConvergenceReport(
        quantity=quantity,
        coupling=coupling,
        cutoffs=cutoffs,
        values=values,
        relative_changes=changes,
        tolerance=tolerance,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def write_results_csv(path: str, result: SweepResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in result.rows:
            writer.writerow([
                _fmt(row.coupling), _fmt(row.t), _fmt(row.beta), _fmt(row.chi1),
                _fmt(row.chi1_normalized), _fmt(row.chi2), row.dim, row.sector, row.status,
            ])


def write_summary_csv(path: str, result: SweepResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for s in result.summaries:
            writer.writerow([_fmt(s.coupling), s.sector, _fmt(s.relative_entropy_wigner), _fmt(s.ground_energy), s.n_levels])


def _json_safe(value):
    """Non-finite floats become the strings "inf", "-inf" and "nan"."""
    if isinstance(value, float) and not math.isfinite(value):
        if math.isnan(value):
            return "nan"
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    return value


def write_metadata(path: str, result: SweepResult) -> None:
    payload = json.dumps(_json_safe(result.metadata), sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(payload + "\n")


def peak_row(result: SweepResult, t: Optional[float] = None) -> Optional[SweepRow]:
    """Row with the largest chi1 (optionally at a given t), ignoring failed points."""
    candidates = [r for r in result.rows if r.status == "ok" and (t is None or r.t == t)]
    return max(candidates, key=lambda r: r.chi1) if candidates else None
