import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

import config
from exceptions import DimensionError, EnsembleError
from schemas import EigenSystem, EnsembleEstimate, EnsembleSpec, HermitianMatrix, StateWeights
from services import fidelity_service, spectra_service

logger = logging.getLogger(__name__)

# variance of a diagonal perturbation element in units of sigma^2
DIAGONAL_VARIANCE_FACTOR = {"GOE": 2.0, "GUE": 1.0}
CENTRAL_FRACTION = 0.8

ESTIMATE_COLUMNS = ["ensemble", "dim", "t", "n_samples", "mean", "stderr", "seed"]


def _generator(spec: EnsembleSpec, draw_index: int) -> np.random.Generator:
    # one stream per (seed, draw_index): draws are independent of evaluation order
    return np.random.default_rng([spec.seed, draw_index])


def sample_matrix(spec: EnsembleSpec, draw_index: int) -> HermitianMatrix:
    """
    GOE: off-diagonal variance sigma^2, diagonal variance 2 sigma^2.
    GUE: E|H_nm|^2 = sigma^2 off the diagonal, real diagonal of variance sigma^2.
    PoissonDiagonal: sorted i.i.d. Gaussian levels (scaled by sigma) on the diagonal.
    """
    rng = _generator(spec, draw_index)
    d, sigma = spec.dim, spec.sigma
    if spec.kind == "GOE":
        a = rng.normal(0.0, sigma, size=(d, d))
        entries = (a + a.T) / math.sqrt(2.0)
    elif spec.kind == "GUE":
        scale = sigma / math.sqrt(2.0)
        a = rng.normal(0.0, scale, size=(d, d)) + 1j * rng.normal(0.0, scale, size=(d, d))
        entries = (a + a.conj().T) / math.sqrt(2.0)
    else:
        entries = np.diag(np.sort(sigma * rng.standard_normal(d)))
    return HermitianMatrix(entries=entries)


def unit_mean_spacing(energies, central_fraction: float = CENTRAL_FRACTION) -> np.ndarray:
    """Rescale levels so the mean spacing over the central fraction of the spectrum is 1."""
    energies = np.sort(np.asarray(energies, dtype=np.float64))
    n = energies.size
    trim = int(math.floor(0.5 * (1.0 - central_fraction) * n))
    central = energies[trim:n - trim]
    if central.size < 2 or central[-1] == central[0]:
        raise ValueError("Spectrum has no spread in its central part")
    return energies / ((central[-1] - central[0]) / (central.size - 1))


def avg_chi1_from_levels(energies, probs, t: float, sigma: float = 1.0) -> float:
    """sigma^2 sum over n != m of rho_nn delta_t(E_n - E_m)."""
    energies = np.asarray(energies, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if energies.size != probs.size:
        raise DimensionError(f"Dimension mismatch: {energies.size} levels, {probs.size} weights")
    if t == 0:
        return 0.0
    row_sums = spectra_service.pair_kernel_row_sums(energies, t)
    return sigma ** 2 * float(np.dot(probs, row_sums))


def avg_chi1_analytic(eig: EigenSystem, rho: StateWeights, t: float, sigma: float = 1.0) -> float:
    return avg_chi1_from_levels(eig.energies, rho.probs, t, sigma)


def avg_chi2_analytic(rho: StateWeights, t: float, sigma: float = 1.0, kind: str = "GOE") -> float:
    """factor sigma^2 t^2 (1 - tr rho^2), factor 2 for GOE perturbations and 1 for GUE."""
    if kind not in DIAGONAL_VARIANCE_FACTOR:
        raise ValueError(f"Perturbation ensemble must be GOE or GUE, got {kind}")
    return DIAGONAL_VARIANCE_FACTOR[kind] * sigma ** 2 * t ** 2 * (1.0 - rho.purity())


def monte_carlo_avg_chi(
    H: HermitianMatrix,
    rho: StateWeights,
    t: float,
    spec: EnsembleSpec,
    n_samples: int,
    max_workers: Optional[int] = None,
    keep_samples: bool = False,
) -> Tuple[EnsembleEstimate, EnsembleEstimate]:
    """
    Average chi1 and chi2 over random perturbations V drawn from `spec`.
    For GOE perturbations H must be real symmetric so that V stays GOE in the eigenbasis of H.
    """
    if n_samples < 2:
        raise EnsembleError(f"Monte Carlo averages need at least 2 samples, got {n_samples}")
    if spec.dim != H.dim:
        raise DimensionError(f"Ensemble dimension {spec.dim} does not match H dimension {H.dim}")
    if spec.kind not in DIAGONAL_VARIANCE_FACTOR:
        raise ValueError(f"Perturbations must be drawn from GOE or GUE, got {spec.kind}")

    eig = spectra_service.eigendecompose(H)

    def draw(index: int) -> Tuple[float, float]:
        V = sample_matrix(spec, index)
        W = fidelity_service.perturbation_in_eigenbasis(eig, V)
        return fidelity_service.chi1(eig, W, rho, t), fidelity_service.chi2(W, rho, t)

    with ThreadPoolExecutor(max_workers=max_workers or config.MAX_WORKERS) as executor:
        results = list(executor.map(draw, range(n_samples)))

    extra = dict(ensemble=spec.kind, dim=spec.dim, seed=spec.seed)
    chi1_values, chi2_values = zip(*results)
    return (
        EnsembleEstimate.from_samples(chi1_values, t, keep_samples, **extra),
        EnsembleEstimate.from_samples(chi2_values, t, keep_samples, **extra),
    )


def ensemble_conjecture_experiment(
    specH: EnsembleSpec,
    times: Sequence[float],
    n_samples: int,
    rho_rule: str = "uniform",
    max_workers: Optional[int] = None,
) -> List[EnsembleEstimate]:
    """
    For every t, the ensemble mean of avg_chi1(H, uniform rho, t, sigma=1) / t over sampled H,
    with each spectrum rescaled to unit mean spacing first.
    """
    if rho_rule != "uniform":
        raise ValueError(f"Only the uniform state is supported, got '{rho_rule}'")
    if not times:
        raise ValueError("At least one time is required")
    if n_samples < 2:
        raise EnsembleError(f"The conjecture experiment needs at least 2 samples, got {n_samples}")

    def draw(index: int) -> np.ndarray:
        H = sample_matrix(specH, index)
        return unit_mean_spacing(scipy.linalg.eigvalsh(H.entries))

    with ThreadPoolExecutor(max_workers=max_workers or config.MAX_WORKERS) as executor:
        spectra = list(executor.map(draw, range(n_samples)))

    uniform = np.full(specH.dim, 1.0 / specH.dim)
    estimates = []
    for t in times:
        if t == 0:
            values = [0.0] * n_samples
        else:
            values = [avg_chi1_from_levels(levels, uniform, t) / t for levels in spectra]
        estimate = EnsembleEstimate.from_samples(values, t, ensemble=specH.kind, dim=specH.dim, seed=specH.seed)
        logger.info(f"{specH.kind} dim={specH.dim} t={t}: chi1/t = {estimate.mean:.6g} +- {estimate.stderr:.2g}")
        estimates.append(estimate)
    return estimates


def write_estimates_csv(path: str, estimates: Sequence[EnsembleEstimate]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(ESTIMATE_COLUMNS)
        for e in estimates:
            writer.writerow([
                e.ensemble,
                e.dim,
                format(e.t, ".17g"),
                e.n_samples,
                format(e.mean, ".17g"),
                format(e.stderr, ".17g"),
                e.seed,
            ])
