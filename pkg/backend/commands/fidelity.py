import logging
import math

import numpy as np

import config
from commands.parsing import dicke_spec, positive_float, positive_int
from schemas import DickeParams, EnsembleSpec, HermitianMatrix
from services import fidelity_service, hilbert_service, rmt_service, spectra_service

logger = logging.getLogger(__name__)

# residual(dlambda) / residual(dlambda / 2) for cubic scaling is 8
RATIO_RANGE = (4.0, 16.0)


def register(subparsers) -> None:
    parser = subparsers.add_parser("fidelity-check", help="cubic scaling of the fidelity Taylor residual")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--dim", type=positive_int, default=30, help="dimension of a random GOE pair")
    source.add_argument("--dicke", type=dicke_spec, help="N,M,lambda[,sector] of a Dicke instance")
    parser.add_argument("--t", type=float, default=3.0)
    parser.add_argument("--dlambda", type=positive_float, default=1e-3)
    parser.add_argument("--beta", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--zero-perturbation", action="store_true", help="use H' = 0")
    parser.set_defaults(handler=cmd_fidelity_check)


def _instance(args):
    if args.dicke is None:
        H = rmt_service.sample_matrix(EnsembleSpec(kind="GOE", dim=args.dim, seed=args.seed), 0)
        Hprime = rmt_service.sample_matrix(EnsembleSpec(kind="GOE", dim=args.dim, seed=args.seed), 1)
        return H, Hprime

    spec = args.dicke
    params = DickeParams(n_atoms=spec.n_atoms, boson_cutoff=spec.boson_cutoff, coupling=spec.coupling,
                         max_dim=config.MAX_DIMENSION)
    H, basis = hilbert_service.build_dicke_hamiltonian(params)
    Hprime = hilbert_service.build_dicke_derivative(params)
    if spec.sector != "full":
        H = hilbert_service.parity_split(H, basis).block(spec.sector)
        Hprime = hilbert_service.parity_split(Hprime, basis).block(spec.sector)
    return H, Hprime


def cmd_fidelity_check(args) -> int:
    if args.t < 0:
        raise ValueError(f"Time must be >= 0, got {args.t}")
    H, Hprime = _instance(args)
    if args.zero_perturbation:
        Hprime = HermitianMatrix(entries=np.zeros_like(Hprime.entries))

    eig = spectra_service.eigendecompose(H)
    rho = spectra_service.thermal_weights(eig, args.beta)
    W = fidelity_service.perturbation_in_eigenbasis(eig, Hprime)
    full = fidelity_service.taylor_residual(eig, Hprime, rho, args.t, args.dlambda, W=W)
    half = fidelity_service.taylor_residual(eig, Hprime, rho, args.t, args.dlambda / 2, W=W)

    print(f"chi = {fidelity_service.chi_total(eig, W, rho, args.t):.6g} (t={args.t:g}, d={eig.dim})")
    print(f"residual(dlambda={args.dlambda:g}) = {full:.6e}")
    print(f"residual(dlambda={args.dlambda / 2:g}) = {half:.6e}")
    if full == 0 and half == 0:
        print("residuals vanish; nothing to scale")
        return 0

    ratio = full / half if half > 0 else math.inf
    print(f"ratio = {ratio:.4g}")
    lo, hi = RATIO_RANGE
    if not lo <= ratio <= hi:
        logger.error(f"Residual ratio {ratio:.4g} is outside [{lo:g}, {hi:g}]")
        return 1
    return 0
