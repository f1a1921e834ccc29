import logging
from typing import Optional

import numpy as np

from exceptions import DimensionError, NormalizationError
from schemas import EigenSystem, HermitianMatrix, PerturbationInEigenbasis, StateWeights, WorkDistribution
from services import spectra_service

logger = logging.getLogger(__name__)

WORK_WEIGHT_FLOOR = 1e-16


def _require_same_dim(*dims: int) -> None:
    if len(set(dims)) != 1:
        raise DimensionError(f"Dimension mismatch: {dims}")


def perturbation_in_eigenbasis(eig: EigenSystem, Hprime: HermitianMatrix) -> PerturbationInEigenbasis:
    """W = V^dagger H' V."""
    _require_same_dim(eig.dim, Hprime.dim)
    V = eig.vectors
    W = V.conj().T @ Hprime.entries @ V
    # symmetrize away rounding so W is Hermitian to machine precision
    W = 0.5 * (W + W.conj().T)
    return PerturbationInEigenbasis(matrix=W)


def chi1(eig: EigenSystem, W: PerturbationInEigenbasis, rho: StateWeights, t: float) -> float:
    """Off-diagonal term: sum over n != m of rho_nn |W_nm|^2 delta_t(E_n - E_m)."""
    _require_same_dim(eig.dim, W.dim, rho.dim)
    if t < 0:
        raise ValueError(f"Time must be >= 0, got {t}")
    if t == 0:
        return 0.0

    row_sums = spectra_service.pair_kernel_row_sums(eig.energies, t, np.abs(W.matrix) ** 2)
    return float(np.dot(rho.probs, row_sums))


def chi2(W: PerturbationInEigenbasis, rho: StateWeights, t: float) -> float:
    """Diagonal term: t^2 times the rho-variance of the diagonal of W."""
    _require_same_dim(W.dim, rho.dim)
    diagonal = np.real(np.diag(W.matrix))
    mean = float(np.dot(rho.probs, diagonal))
    variance = float(np.dot(rho.probs, (diagonal - mean) ** 2))
    return t * t * max(variance, 0.0)


def chi_total(eig: EigenSystem, W: PerturbationInEigenbasis, rho: StateWeights, t: float) -> float:
    return chi1(eig, W, rho, t) + chi2(W, rho, t)


def _transition_probabilities(eigA: EigenSystem, eigB: EigenSystem) -> np.ndarray:
    _require_same_dim(eigA.dim, eigB.dim)
    overlap = eigA.vectors.conj().T @ eigB.vectors
    return np.abs(overlap) ** 2


def operator_fidelity_exact(eigA: EigenSystem, eigB: EigenSystem, rho: StateWeights, t: float) -> float:
    """
    |sum_n rho_nn <n| exp(+i t H_A) exp(-i t H_B) |n>| with |n> the eigenbasis of H_A.
    Both propagators are applied spectrally.
    """
    _require_same_dim(eigA.dim, rho.dim)
    probs = _transition_probabilities(eigA, eigB)
    forward = rho.probs * np.exp(1j * t * eigA.energies)
    backward = probs @ np.exp(-1j * t * eigB.energies)
    return min(float(abs(np.dot(forward, backward))), 1.0)


def _shifted_pair(eig: EigenSystem, W: PerturbationInEigenbasis, dlambda: float):
    """H(lambda) and H(lambda + dlambda) expressed in the eigenbasis of H(lambda)."""
    eig_local = EigenSystem(energies=eig.energies, vectors=np.eye(eig.dim))
    shifted = HermitianMatrix(entries=np.diag(eig.energies) + dlambda * W.matrix)
    return eig_local, spectra_service.eigendecompose(shifted)


def taylor_residual(
    eig: EigenSystem,
    Hprime: HermitianMatrix,
    rho: StateWeights,
    t: float,
    dlambda: float,
    W: Optional[PerturbationInEigenbasis] = None,
) -> float:
    """|F(U_lambda, U_lambda+dlambda) - (1 - dlambda^2 chi / 2)|, expected to scale as dlambda^3."""
    if dlambda < 0:
        raise ValueError(f"dlambda must be >= 0, got {dlambda}")
    if W is None:
        W = perturbation_in_eigenbasis(eig, Hprime)
    if dlambda == 0 or not np.any(W.matrix):
        return 0.0
    eig_local, eig_shifted = _shifted_pair(eig, W, dlambda)
    exact = operator_fidelity_exact(eig_local, eig_shifted, rho, t)
    expansion = 1.0 - 0.5 * dlambda ** 2 * chi_total(eig, W, rho, t)
    return abs(exact - expansion)


def chi_from_fidelity(
    eig: EigenSystem,
    Hprime: HermitianMatrix,
    rho: StateWeights,
    t: float,
    dlambda: float,
) -> float:
    """Finite-difference metric 2 (1 - F) / dlambda^2 from the exact fidelity."""
    if dlambda <= 0:
        raise ValueError(f"dlambda must be > 0, got {dlambda}")
    W = perturbation_in_eigenbasis(eig, Hprime)
    eig_local, eig_shifted = _shifted_pair(eig, W, dlambda)
    return 2.0 * (1.0 - operator_fidelity_exact(eig_local, eig_shifted, rho, t)) / dlambda ** 2


def work_distribution(eigA: EigenSystem, eigB: EigenSystem, rho: StateWeights) -> WorkDistribution:
    """Atoms at E_n - E'_m with weight rho_nn |<n|m'>|^2."""
    _require_same_dim(eigA.dim, rho.dim)
    weights = rho.probs[:, None] * _transition_probabilities(eigA, eigB)
    frequencies = eigA.energies[:, None] - eigB.energies[None, :]
    keep = weights >= WORK_WEIGHT_FLOOR
    return WorkDistribution(frequencies=frequencies[keep], weights=weights[keep])


def loschmidt_echo(eigB: EigenSystem, psi0, t: float) -> float:
    """|<psi0| exp(-i t H_B) |psi0>|."""
    psi0 = np.asarray(psi0)
    _require_same_dim(eigB.dim, psi0.size)
    norm = float(np.linalg.norm(psi0))
    if abs(norm - 1.0) > 1e-10:
        raise NormalizationError(f"Initial state has norm {norm!r}, expected 1")
    populations = np.abs(eigB.vectors.conj().T @ psi0) ** 2
    return min(float(abs(np.dot(populations, np.exp(-1j * t * eigB.energies)))), 1.0)
