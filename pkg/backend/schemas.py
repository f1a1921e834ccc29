import math
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

import config
from exceptions import EnsembleError

HERMITIAN_RTOL = 1e-12
PERTURBATION_RTOL = 1e-10

Sector = Literal["full", "even", "odd"]
EnsembleKind = Literal["GOE", "GUE", "PoissonDiagonal"]


def _readonly_array(value, dtype=None) -> np.ndarray:
    """Coerce to ndarray and hand back a read-only view (the caller's array keeps its flags)."""
    arr = np.asarray(value, dtype=dtype).view()
    arr.flags.writeable = False
    return arr


def _hermitian_defect(entries: np.ndarray) -> Tuple[float, float]:
    scale = float(np.max(np.abs(entries))) if entries.size else 0.0
    defect = float(np.max(np.abs(entries - entries.conj().T))) if entries.size else 0.0
    return defect, scale


# ---------------------------------------------------------------------------
# hilbert
# ---------------------------------------------------------------------------

class DickeParams(BaseModel):
    n_atoms: int = Field(8, ge=1)
    omega: float = Field(1.0, gt=0)
    omega0: float = Field(1.0, gt=0)
    coupling: float = 0.0
    boson_cutoff: int = Field(48, ge=2)
    rwa: bool = False
    # "printed" rescales H' by 2j to match the prefactor quoted next to the numerical formula
    derivative_prefactor: Literal["exact", "printed"] = "exact"
    max_dim: int = Field(default_factory=lambda: config.MAX_DIMENSION, ge=1)

    class Config:
        frozen = True

    @property
    def j(self) -> float:
        return self.n_atoms / 2

    @property
    def spin_dim(self) -> int:
        return self.n_atoms + 1

    @property
    def dim(self) -> int:
        return self.boson_cutoff * self.spin_dim


class ProductBasis(BaseModel):
    """Boson-major product basis: idx = n_b * (2j+1) + (m + j), m ascending from -j."""

    boson_dim: int = Field(ge=1)
    spin_dim: int = Field(ge=1)

    class Config:
        frozen = True

    @property
    def j(self) -> float:
        return (self.spin_dim - 1) / 2

    @property
    def dim(self) -> int:
        return self.boson_dim * self.spin_dim

    @property
    def labels(self) -> List[Tuple[int, float]]:
        return [self.label(idx) for idx in range(self.dim)]

    def index(self, n_b: int, m: float) -> int:
        k = m + self.j
        if not (0 <= n_b < self.boson_dim) or abs(k - round(k)) > 1e-9 or not (0 <= round(k) < self.spin_dim):
            raise ValueError(f"State (n_b={n_b}, m={m}) is outside the basis")
        return n_b * self.spin_dim + int(round(k))

    def label(self, idx: int) -> Tuple[int, float]:
        if not 0 <= idx < self.dim:
            raise ValueError(f"Index {idx} is outside the basis of dimension {self.dim}")
        n_b, k = divmod(idx, self.spin_dim)
        return n_b, k - self.j

    def quanta(self, idx: int) -> int:
        """Total excitation number n_b + m + j of basis state idx."""
        n_b, k = divmod(idx, self.spin_dim)
        return n_b + k


class HermitianMatrix(BaseModel):
    entries: np.ndarray
    basis: Optional[ProductBasis] = None

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("entries", mode="before")
    @classmethod
    def _coerce_entries(cls, value):
        arr = np.asarray(value)
        if not np.iscomplexobj(arr):
            arr = arr.astype(np.float64, copy=False)
        return _readonly_array(arr)

    @model_validator(mode="after")
    def _check_hermitian(self):
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ValueError(f"Expected a square matrix, got shape {self.entries.shape}")
        if self.basis is not None and self.basis.dim != self.entries.shape[0]:
            raise ValueError(f"Basis dimension {self.basis.dim} does not match matrix dimension {self.entries.shape[0]}")
        defect, scale = _hermitian_defect(self.entries)
        if defect > HERMITIAN_RTOL * max(scale, np.finfo(float).tiny):
            raise ValueError(f"Matrix is not Hermitian: max |A - A^H| = {defect:.3e}")
        return self

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def max_norm(self) -> float:
        return float(np.max(np.abs(self.entries))) if self.entries.size else 0.0


class ParityBlocks(BaseModel):
    even: HermitianMatrix
    odd: HermitianMatrix
    even_indices: np.ndarray
    odd_indices: np.ndarray
    parent_dim: int

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("even_indices", "odd_indices", mode="before")
    @classmethod
    def _coerce_indices(cls, value):
        return _readonly_array(value, dtype=np.intp)

    @model_validator(mode="after")
    def _check_partition(self):
        if self.even_indices.size + self.odd_indices.size != self.parent_dim:
            raise ValueError("Parity sectors do not partition the parent basis")
        return self

    def block(self, sector: str) -> HermitianMatrix:
        if sector not in ("even", "odd"):
            raise ValueError(f"Unknown parity sector '{sector}'")
        return self.even if sector == "even" else self.odd

    def embed(self) -> np.ndarray:
        dtype = np.result_type(self.even.entries, self.odd.entries)
        full = np.zeros((self.parent_dim, self.parent_dim), dtype=dtype)
        full[np.ix_(self.even_indices, self.even_indices)] = self.even.entries
        full[np.ix_(self.odd_indices, self.odd_indices)] = self.odd.entries
        return full


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

class EigenSystem(BaseModel):
    energies: np.ndarray
    vectors: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("energies", mode="before")
    @classmethod
    def _coerce_energies(cls, value):
        return _readonly_array(value, dtype=np.float64)

    @field_validator("vectors", mode="before")
    @classmethod
    def _coerce_vectors(cls, value):
        return _readonly_array(value)

    @model_validator(mode="after")
    def _check_shapes(self):
        d = self.energies.size
        if self.energies.ndim != 1:
            raise ValueError("Energies must be a vector")
        if self.vectors.shape != (d, d):
            raise ValueError(f"Eigenvectors shape {self.vectors.shape} does not match {d} energies")
        if d > 1 and np.any(np.diff(self.energies) < 0):
            raise ValueError("Energies must be sorted ascending")
        return self

    @property
    def dim(self) -> int:
        return self.energies.size


class StateWeights(BaseModel):
    probs: np.ndarray
    # 0 = uniform, math.inf = ground state
    beta: float = 0.0

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("probs", mode="before")
    @classmethod
    def _coerce_probs(cls, value):
        return _readonly_array(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check_normalized(self):
        if self.probs.ndim != 1 or self.probs.size == 0:
            raise ValueError("Weights must be a non-empty vector")
        if np.any(self.probs < 0):
            raise ValueError("Weights must be non-negative")
        total = float(np.sum(self.probs))
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"Weights sum to {total!r}, expected 1")
        if math.isnan(self.beta) or self.beta < 0:
            raise ValueError(f"Inverse temperature must be >= 0, got {self.beta}")
        return self

    @property
    def dim(self) -> int:
        return self.probs.size

    def purity(self) -> float:
        return float(np.sum(self.probs ** 2))


class Histogram(BaseModel):
    bin_edges: np.ndarray
    densities: np.ndarray
    # fraction of the sample that fell outside [bin_edges[0], bin_edges[-1])
    overflow: float = 0.0
    n_samples: int = 0

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("bin_edges", "densities", mode="before")
    @classmethod
    def _coerce(cls, value):
        return _readonly_array(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check(self):
        if self.bin_edges.size != self.densities.size + 1:
            raise ValueError("Histogram needs one more edge than densities")
        if np.any(self.densities < 0):
            raise ValueError("Histogram densities must be non-negative")
        total = float(np.sum(self.masses))
        if total > 0 and abs(total - 1.0) > 1e-6:
            raise ValueError(f"Histogram integrates to {total!r}, expected 1")
        return self

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def masses(self) -> np.ndarray:
        return self.densities * self.widths


class SpacingSample(BaseModel):
    raw_levels: Optional[np.ndarray] = None
    unfolded_levels: Optional[np.ndarray] = None
    spacings: np.ndarray
    histogram: Optional[Histogram] = None

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("raw_levels", "unfolded_levels", "spacings", mode="before")
    @classmethod
    def _coerce(cls, value):
        if value is None:
            return None
        return _readonly_array(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check_unit_mean(self):
        if self.spacings.size and abs(float(np.mean(self.spacings)) - 1.0) > 0.02:
            raise ValueError(f"Mean spacing {np.mean(self.spacings):.4f} is not unit")
        return self


# ---------------------------------------------------------------------------
# fidelity
# ---------------------------------------------------------------------------

class PerturbationInEigenbasis(BaseModel):
    """Matrix elements W_nm = <n|H'|m> in the eigenbasis of H."""

    matrix: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("matrix", mode="before")
    @classmethod
    def _coerce(cls, value):
        return _readonly_array(value)

    @model_validator(mode="after")
    def _check_hermitian(self):
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"Expected a square matrix, got shape {self.matrix.shape}")
        defect, scale = _hermitian_defect(self.matrix)
        if defect > PERTURBATION_RTOL * max(scale, np.finfo(float).tiny):
            raise ValueError(f"Perturbation is not Hermitian: max |W - W^H| = {defect:.3e}")
        return self

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


class WorkDistribution(BaseModel):
    frequencies: np.ndarray
    weights: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("frequencies", "weights", mode="before")
    @classmethod
    def _coerce(cls, value):
        return _readonly_array(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check(self):
        if self.frequencies.shape != self.weights.shape:
            raise ValueError("Frequencies and weights must have the same length")
        if np.any(self.weights < 0):
            raise ValueError("Work weights must be non-negative")
        total = float(np.sum(self.weights))
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"Work weights sum to {total!r}, expected 1")
        return self

    @property
    def atoms(self) -> List[Tuple[float, float]]:
        return list(zip(self.frequencies.tolist(), self.weights.tolist()))

    def characteristic(self, t: float) -> complex:
        """sum_k w_k exp(i omega_k t)."""
        return complex(np.sum(self.weights * np.exp(1j * self.frequencies * t)))


# ---------------------------------------------------------------------------
# rmt
# ---------------------------------------------------------------------------

class EnsembleSpec(BaseModel):
    kind: EnsembleKind = "GOE"
    dim: int = Field(ge=2)
    # off-diagonal standard deviation; GOE diagonal variance is 2 sigma^2
    sigma: float = Field(1.0, gt=0)
    seed: int = Field(0, ge=0, lt=2 ** 64)

    class Config:
        frozen = True


class EnsembleEstimate(BaseModel):
    mean: float
    stderr: float
    n_samples: int = Field(ge=2)
    t: float
    per_sample: Optional[List[float]] = None
    ensemble: Optional[str] = None
    dim: Optional[int] = None
    seed: Optional[int] = None

    @classmethod
    def from_samples(cls, values, t: float, keep_samples: bool = False, **extra) -> "EnsembleEstimate":
        values = np.asarray(values, dtype=np.float64)
        n = values.size
        if n < 2:
            raise EnsembleError(f"A standard error needs at least 2 samples, got {n}")
        return cls(
            mean=float(np.mean(values)),
            stderr=float(np.std(values, ddof=1) / math.sqrt(n)),
            n_samples=n,
            t=t,
            per_sample=values.tolist() if keep_samples else None,
            **extra,
        )

    def z_score(self, reference: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == reference else math.inf
        return (self.mean - reference) / self.stderr


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

class SweepConfig(BaseModel):
    dicke: DickeParams = Field(default_factory=DickeParams)
    lambda_min: float = 0.05
    lambda_max: float = 1.0
    steps: int = Field(60, ge=2)
    times: List[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0])
    # 0 = uniform weights, math.inf = ground state
    betas: List[float] = Field(default_factory=lambda: [0.0])
    # per-lambda beta with exp[-beta (E_max - E_min)] = ratio
    thermal_ratios: List[float] = Field(default_factory=list)
    sector: Sector = "full"
    normalize: bool = True
    cache_dir: Optional[str] = None
    seed: int = 0
    level_fraction: float = Field(0.5, gt=0, le=1)
    unfold_degree: int = Field(10, ge=1)
    max_workers: int = Field(default_factory=lambda: config.MAX_WORKERS, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if not self.lambda_min < self.lambda_max:
            raise ValueError(f"lambda_min ({self.lambda_min}) must be < lambda_max ({self.lambda_max})")
        if not self.times:
            raise ValueError("At least one time is required")
        if any(t < 0 for t in self.times):
            raise ValueError("Times must be non-negative")
        if not self.betas and not self.thermal_ratios:
            raise ValueError("At least one beta or thermal ratio is required")
        if any(math.isnan(b) or b < 0 for b in self.betas):
            raise ValueError("Betas must be >= 0 (inf selects the ground state)")
        if any(not 0 < r < 1 for r in self.thermal_ratios):
            raise ValueError("Thermal ratios must lie in (0, 1)")
        return self

    def lambda_grid(self) -> np.ndarray:
        return np.linspace(self.lambda_min, self.lambda_max, self.steps)


class SweepRow(BaseModel):
    coupling: float
    t: float
    beta: float
    chi1: float
    chi1_normalized: float
    chi2: float
    dim: int
    sector: Sector
    status: Literal["ok", "failed"] = "ok"
    beta_choice: int = 0


class SpectralSummary(BaseModel):
    coupling: float
    sector: Literal["even", "odd"]
    relative_entropy_wigner: float
    ground_energy: float
    n_levels: int


class SweepResult(BaseModel):
    rows: List[SweepRow]
    summaries: List[SpectralSummary]
    metadata: Dict[str, Any] = Field(default_factory=dict)


class ConvergenceReport(BaseModel):
    quantity: Literal["ground_energy", "chi1"]
    coupling: float
    cutoffs: List[int]
    values: List[float]
    relative_changes: List[float]
    tolerance: float
    converged: bool


# ---------------------------------------------------------------------------
# cli
# ---------------------------------------------------------------------------

class PlotSeries(BaseModel):
    x: List[float]
    y: List[float]
    label: str

    @model_validator(mode="after")
    def _check(self):
        if not self.x:
            raise ValueError(f"Series '{self.label}' is empty")
        if len(self.x) != len(self.y):
            raise ValueError(f"Series '{self.label}' has {len(self.x)} x values and {len(self.y)} y values")
        return self


class PlotSpec(BaseModel):
    series: List[PlotSeries]
    title: str = ""
    x_label: str = ""
    y_label: str = ""
    width: int = Field(900, ge=100)
    height: int = Field(500, ge=100)
    y_scale: Literal["linear", "log"] = "linear"

    @model_validator(mode="after")
    def _check(self):
        if not self.series:
            raise ValueError("A plot needs at least one series")
        return self
