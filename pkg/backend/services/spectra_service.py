import csv
import hashlib
import logging
import math
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
import scipy.linalg
from numpy.polynomial import Polynomial
from scipy.integrate import trapezoid

import config
from exceptions import DimensionError, EigensolverError, UnfoldingError
from schemas import EigenSystem, HermitianMatrix, Histogram, SpacingSample, StateWeights

logger = logging.getLogger(__name__)

ORTHONORMALITY_TOL = 1e-10
RESIDUAL_RTOL = 1e-8
DEGENERACY_TOL = 1e-10
SERIES_THRESHOLD = 1e-4
MAX_FIT_CONDITION = 1e12
EDGE_FRACTION = 0.02
ENTROPY_FLOOR = 1e-12
# rows of the d x d pair kernel evaluated at once
PAIR_BLOCK_ROWS = 512

Density = Callable[[np.ndarray], np.ndarray]


def matrix_fingerprint(entries: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(entries).tobytes()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Eigendecomposition
# ---------------------------------------------------------------------------

def eigendecompose(H: HermitianMatrix, validate: bool = True, max_dim: Optional[int] = None) -> EigenSystem:
    """
    Dense Hermitian eigendecomposition (LAPACK through scipy.linalg.eigh).
    The solver is trusted for the algorithm; its output is checked against H.
    """
    limit = max_dim or config.MAX_DIMENSION
    if H.dim > limit:
        raise DimensionError(f"Matrix dimension {H.dim} exceeds the dense guard {limit}")
    try:
        energies, vectors = scipy.linalg.eigh(H.entries)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigensolverError(f"Dense eigensolver failed: {e}", matrix_fingerprint(H.entries)) from e

    eig = EigenSystem(energies=energies, vectors=vectors)
    if validate:
        check_eigensystem(eig, H)
    return eig


def check_eigensystem(eig: EigenSystem, H: HermitianMatrix) -> Tuple[float, float]:
    """Returns (orthonormality defect, residual); raises EigensolverError when either bound fails."""
    V = eig.vectors
    ortho = float(np.max(np.abs(V.conj().T @ V - np.eye(eig.dim)))) if eig.dim else 0.0
    residual = float(np.max(np.abs(H.entries @ V - V * eig.energies))) if eig.dim else 0.0
    bound = RESIDUAL_RTOL * max(H.max_norm, np.finfo(float).tiny)
    if ortho > ORTHONORMALITY_TOL or residual > bound:
        raise EigensolverError(
            f"Eigensystem check failed: orthonormality {ortho:.2e}, residual {residual:.2e} (bound {bound:.2e})",
            matrix_fingerprint(H.entries),
        )
    return ortho, residual


# ---------------------------------------------------------------------------
# State weights
# ---------------------------------------------------------------------------

def thermal_weights(eig: EigenSystem, beta: float) -> StateWeights:
    if math.isnan(beta) or beta < 0:
        raise ValueError(f"Inverse temperature must be >= 0, got {beta}")
    shifted = eig.energies - eig.energies[0]
    if not np.all(np.isfinite(shifted)):
        raise ValueError("Energies must be finite")

    if beta == 0:
        probs = np.full(eig.dim, 1.0 / eig.dim)
    elif math.isinf(beta):
        ground = (shifted <= DEGENERACY_TOL).astype(np.float64)
        probs = ground / ground.sum()
    else:
        boltzmann = np.exp(-beta * shifted)
        probs = boltzmann / boltzmann.sum()
    return StateWeights(probs=probs, beta=beta)


def beta_for_probability_ratio(eig: EigenSystem, ratio: float = 0.05) -> float:
    """Inverse temperature at which the highest level carries `ratio` times the ground-level weight."""
    return beta_for_spectral_width(float(eig.energies[-1] - eig.energies[0]), ratio)


def beta_for_spectral_width(width: float, ratio: float = 0.05) -> float:
    if not 0 < ratio < 1:
        raise ValueError(f"Probability ratio must lie in (0, 1), got {ratio}")
    if not width > 0:
        raise ValueError("Spectrum has zero width; no temperature sets a probability ratio")
    return -math.log(ratio) / width


# ---------------------------------------------------------------------------
# delta_t kernel
# ---------------------------------------------------------------------------

def delta_t(x, t: float):
    """
    [sin(x t/2) / (x/2)]^2 = t^2 sinc^2(x t / 2).
    Below |x t| < 1e-4 the series t^2 (1 - (x t)^2 / 12) is used.
    """
    if t < 0:
        raise ValueError(f"Time must be >= 0, got {t}")
    x_arr = np.asarray(x, dtype=np.float64)
    u = x_arr * t
    small = np.abs(u) < SERIES_THRESHOLD
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (2.0 * np.sin(0.5 * u) / x_arr) ** 2
    out = np.where(small, t * t * (1.0 - u * u / 12.0), direct)
    if np.ndim(x) == 0:
        return float(out)
    return out


def pair_kernel_row_sums(energies, t: float, weights: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Row sums over m != n of weights_nm delta_t(E_n - E_m); unit weights when none are given.
    Rows are reduced block by block in a fixed order, so the value does not depend on threading.
    """
    energies = np.asarray(energies, dtype=np.float64)
    d = energies.size
    if weights is not None and np.shape(weights) != (d, d):
        raise DimensionError(f"Pair weights of shape {np.shape(weights)} do not match {d} levels")
    row_sums = np.empty(d)
    for start in range(0, d, PAIR_BLOCK_ROWS):
        stop = min(start + PAIR_BLOCK_ROWS, d)
        terms = delta_t(energies[start:stop, None] - energies[None, :], t)
        if weights is not None:
            terms = weights[start:stop] * terms
        terms[np.arange(stop - start), np.arange(start, stop)] = 0.0
        row_sums[start:stop] = terms.sum(axis=1)
    return row_sums


def delta_t_integral_check(t: float, grid: np.ndarray) -> float:
    """Trapezoid estimate of the integral of delta_t(x)/t over the grid (tends to 2 pi)."""
    if t <= 0:
        raise ValueError("The normalized kernel needs t > 0")
    grid = np.asarray(grid, dtype=np.float64)
    return float(trapezoid(delta_t(grid, t) / t, grid))


# ---------------------------------------------------------------------------
# Level statistics
# ---------------------------------------------------------------------------

def wigner_pdf(s):
    """Unit-mean GOE Wigner surmise (pi/2) s exp(-pi s^2 / 4)."""
    s = np.asarray(s, dtype=np.float64)
    out = np.where(s >= 0, 0.5 * np.pi * s * np.exp(-0.25 * np.pi * s * s), 0.0)
    return float(out) if out.ndim == 0 else out


def poisson_pdf(s):
    s = np.asarray(s, dtype=np.float64)
    out = np.where(s >= 0, np.exp(-np.abs(s)), 0.0)
    return float(out) if out.ndim == 0 else out


REFERENCES: Dict[str, Density] = {
    "wigner": wigner_pdf,
    "poisson": poisson_pdf,
}


def unfold(levels, degree: int = 10, edge_fraction: float = EDGE_FRACTION) -> SpacingSample:
    """
    Unfold by a least-squares polynomial fit to the staircase N(E).
    The outer `edge_fraction` of levels on each side is dropped, the fit is
    evaluated on the remaining levels and rescaled to unit mean spacing.
    """
    levels = np.asarray(levels, dtype=np.float64)
    n = levels.size
    if n < degree + 10:
        raise UnfoldingError(f"Unfolding with degree {degree} needs at least {degree + 10} levels, got {n}")
    if np.any(np.diff(levels) < 0):
        raise ValueError("Levels must be sorted ascending")
    if levels[-1] == levels[0]:
        raise UnfoldingError("All levels coincide; the staircase cannot be fitted")

    cut = int(math.floor(edge_fraction * n))
    kept = levels[cut:n - cut]
    staircase = np.arange(cut + 1, n - cut + 1, dtype=np.float64)

    poly, (_, rank, singular_values, _) = Polynomial.fit(kept, staircase, degree, full=True)
    condition = singular_values[0] / singular_values[-1] if singular_values[-1] > 0 else math.inf
    if rank < degree + 1 or condition > MAX_FIT_CONDITION:
        raise UnfoldingError(
            f"Staircase fit of degree {degree} is ill-conditioned (condition {condition:.2e}); try a lower degree"
        )

    unfolded = poly(kept)
    spacings = np.diff(unfolded)
    mean_spacing = float(np.mean(spacings))
    if mean_spacing <= 0:
        raise UnfoldingError("Fitted staircase is not increasing; try a lower degree")
    return SpacingSample(
        raw_levels=levels,
        unfolded_levels=unfolded / mean_spacing,
        spacings=spacings / mean_spacing,
    )


def spacing_histogram(spacings, n_bins: int = 50, s_max: float = 4.0) -> Histogram:
    spacings = np.asarray(spacings, dtype=np.float64)
    if spacings.size == 0:
        raise ValueError("Cannot histogram an empty spacing sample")
    if n_bins < 5:
        raise ValueError(f"At least 5 bins are required, got {n_bins}")
    if s_max <= 0:
        raise ValueError("s_max must be positive")

    edges = np.linspace(0.0, s_max, n_bins + 1)
    counts, _ = np.histogram(spacings, bins=edges)
    inside = int(counts.sum())
    widths = np.diff(edges)
    densities = counts / (inside * widths) if inside else np.zeros(n_bins)
    return Histogram(
        bin_edges=edges,
        densities=densities,
        overflow=1.0 - inside / spacings.size,
        n_samples=int(spacings.size),
    )


def reference_histogram(reference: Density, edges) -> Histogram:
    """Reference density binned by the midpoint rule and renormalized over the window."""
    edges = np.asarray(edges, dtype=np.float64)
    widths = np.diff(edges)
    masses = np.asarray(reference(0.5 * (edges[:-1] + edges[1:])), dtype=np.float64) * widths
    masses = masses / masses.sum()
    return Histogram(bin_edges=edges, densities=masses / widths)


def relative_entropy(hist: Histogram, reference: Density) -> float:
    """sum_i p_i ln(p_i / q_i) over bins; empty bins contribute nothing."""
    p = hist.masses
    q = np.maximum(reference_histogram(reference, hist.bin_edges).masses, ENTROPY_FLOOR)
    occupied = p > 0
    return float(np.sum(p[occupied] * np.log(p[occupied] / q[occupied])))


def level_statistics(
    level_sets: Iterable[np.ndarray],
    degree: int = 10,
    n_bins: int = 50,
    s_max: float = 4.0,
    reference: str = "wigner",
) -> Tuple[SpacingSample, float]:
    """Unfold every level set on its own, pool the spacings, and compare to the reference."""
    if reference not in REFERENCES:
        raise ValueError(f"Unknown reference distribution '{reference}'")
    pooled: List[np.ndarray] = [unfold(levels, degree).spacings for levels in level_sets]
    if not pooled:
        raise ValueError("No level sets given")
    spacings = np.concatenate(pooled)
    hist = spacing_histogram(spacings, n_bins, s_max)
    sample = SpacingSample(spacings=spacings, histogram=hist)
    return sample, relative_entropy(hist, REFERENCES[reference])


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def read_levels_csv(path: str) -> np.ndarray:
    """Single-column CSV with a one-line header."""
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        next(reader, None)
        values = [float(row[0]) for row in reader if row and row[0].strip()]
    return np.asarray(values, dtype=np.float64)


def write_column_csv(path: str, header: str, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([header])
        for value in np.asarray(values, dtype=np.float64):
            writer.writerow([format(float(value), ".17g")])
