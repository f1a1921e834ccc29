import logging
import math
from typing import Tuple

import numpy as np

from exceptions import DimensionError, ParityViolationError
from schemas import DickeParams, HermitianMatrix, ParityBlocks, ProductBasis

logger = logging.getLogger(__name__)

PARITY_RTOL = 1e-10


def build_spin_operators(j: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Collective spin operators (Jz, J+, J-) of length j in the basis m = -j, ..., j.
    Index k of the basis holds m = k - j.
    """
    two_j = 2 * j
    if j < 0 or abs(two_j - round(two_j)) > 1e-12:
        raise ValueError(f"Spin length must be a non-negative half-integer, got {j}")
    j = round(two_j) / 2
    m = np.arange(round(two_j) + 1) - j

    jz = np.diag(m)
    # <m+1|J+|m> sits one row below column m
    raising = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    jplus = np.diag(raising, k=-1)
    jminus = jplus.T.copy()
    return jz, jplus, jminus


def build_boson_operators(M: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Truncated ladder operators on Fock levels 0..M-1: (a, a^dagger, a^dagger a)."""
    if M < 2:
        raise ValueError(f"Boson cutoff must be >= 2, got {M}")
    a = np.diag(np.sqrt(np.arange(1, M, dtype=np.float64)), k=1)
    a_dagger = a.T.copy()
    number = np.diag(np.arange(M, dtype=np.float64))
    return a, a_dagger, number


def product_basis(p: DickeParams) -> ProductBasis:
    return ProductBasis(boson_dim=p.boson_cutoff, spin_dim=p.spin_dim)


def _check_dimension(p: DickeParams) -> None:
    if p.dim > p.max_dim:
        raise DimensionError(
            f"Dicke space of dimension {p.dim} (N={p.n_atoms}, M={p.boson_cutoff}) exceeds the guard {p.max_dim}; "
            f"raise max_dim or OPFID_MAX_DIM to proceed"
        )


def _interaction(p: DickeParams) -> np.ndarray:
    """Coupling operator without the lambda factor, i.e. dH/dlambda."""
    _, jplus, jminus = build_spin_operators(p.j)
    a, a_dagger, _ = build_boson_operators(p.boson_cutoff)
    scale = 1.0 / math.sqrt(2 * p.j)
    if p.rwa:
        return scale * (np.kron(a_dagger, jminus) + np.kron(a, jplus))
    return scale * np.kron(a_dagger + a, jplus + jminus)


def build_dicke_hamiltonian(p: DickeParams) -> Tuple[HermitianMatrix, ProductBasis]:
    _check_dimension(p)
    basis = product_basis(p)
    jz, _, _ = build_spin_operators(p.j)
    _, _, number = build_boson_operators(p.boson_cutoff)

    h = p.omega0 * np.kron(np.eye(p.boson_cutoff), jz) + p.omega * np.kron(number, np.eye(p.spin_dim))
    if p.coupling != 0.0:
        h = h + p.coupling * _interaction(p)
    logger.debug(f"Built Dicke Hamiltonian d={basis.dim} lambda={p.coupling} rwa={p.rwa}")
    return HermitianMatrix(entries=h, basis=basis), basis


def build_dicke_derivative(p: DickeParams) -> HermitianMatrix:
    _check_dimension(p)
    h_prime = _interaction(p)
    if p.derivative_prefactor == "printed":
        h_prime = (2 * p.j) * h_prime
    return HermitianMatrix(entries=h_prime, basis=product_basis(p))


def parity_labels(basis: ProductBasis) -> np.ndarray:
    """True for basis states with an even number of total quanta n_b + m + j."""
    n_b, k = np.divmod(np.arange(basis.dim), basis.spin_dim)
    return (n_b + k) % 2 == 0


def parity_split(H: HermitianMatrix, basis: ProductBasis) -> ParityBlocks:
    if H.dim != basis.dim:
        raise DimensionError(f"Matrix dimension {H.dim} does not match basis dimension {basis.dim}")
    even_mask = parity_labels(basis)
    even_idx = np.flatnonzero(even_mask)
    odd_idx = np.flatnonzero(~even_mask)

    cross = np.abs(H.entries[np.ix_(even_idx, odd_idx)])
    tolerance = PARITY_RTOL * H.max_norm
    if cross.size and cross.max() > tolerance:
        r, c = np.unravel_index(np.argmax(cross), cross.shape)
        raise ParityViolationError(float(cross[r, c]), (int(even_idx[r]), int(odd_idx[c])), tolerance)

    return ParityBlocks(
        even=HermitianMatrix(entries=H.entries[np.ix_(even_idx, even_idx)]),
        odd=HermitianMatrix(entries=H.entries[np.ix_(odd_idx, odd_idx)]),
        even_indices=even_idx,
        odd_indices=odd_idx,
        parent_dim=H.dim,
    )
