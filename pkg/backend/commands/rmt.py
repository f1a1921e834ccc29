import logging

from commands.parsing import float_list, positive_int
from schemas import EnsembleSpec
from services import rmt_service, spectra_service

logger = logging.getLogger(__name__)

ENSEMBLES = {"goe": "GOE", "gue": "GUE", "poisson": "PoissonDiagonal"}
MAX_ABS_Z = 4.0


def register(subparsers) -> None:
    parser = subparsers.add_parser("rmt", help="random-matrix experiments")
    rmt_commands = parser.add_subparsers(dest="rmt_command", required=True)

    conjecture = rmt_commands.add_parser("conjecture", help="ensemble mean of chi1/t at unit mean spacing")
    conjecture.add_argument("--ensemble", choices=sorted(ENSEMBLES), default="goe")
    conjecture.add_argument("--dim", type=positive_int, default=200)
    conjecture.add_argument("--samples", type=positive_int, default=100)
    conjecture.add_argument("--times", type=float_list, default=[400.0])
    conjecture.add_argument("--seed", type=int, default=0)
    conjecture.add_argument("--workers", type=positive_int, default=None)
    conjecture.add_argument("--out", required=True, help="estimate CSV")
    conjecture.set_defaults(handler=cmd_conjecture)

    verify = rmt_commands.add_parser("verify-average", help="Monte Carlo check of the perturbation averages")
    verify.add_argument("--dim", type=positive_int, default=32)
    verify.add_argument("--samples", type=positive_int, default=500)
    verify.add_argument("--t", type=float_list, default=[1.0, 5.0, 20.0])
    verify.add_argument("--beta", type=float, default=0.0, help="inverse temperature of the weights")
    verify.add_argument("--perturbation", choices=["goe", "gue"], default="goe")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--workers", type=positive_int, default=None)
    verify.set_defaults(handler=cmd_verify_average)


def cmd_conjecture(args) -> int:
    spec = EnsembleSpec(kind=ENSEMBLES[args.ensemble], dim=args.dim, seed=args.seed)
    estimates = rmt_service.ensemble_conjecture_experiment(spec, args.times, args.samples, max_workers=args.workers)
    rmt_service.write_estimates_csv(args.out, estimates)
    for e in estimates:
        print(f"{spec.kind} dim={spec.dim} t={e.t:g}: chi1/t = {e.mean:.6g} +- {e.stderr:.2g}")
    return 0


def cmd_verify_average(args) -> int:
    # H and the perturbations come from separate seed streams
    H = rmt_service.sample_matrix(EnsembleSpec(kind="GOE", dim=args.dim, seed=args.seed), 0)
    kind = args.perturbation.upper()
    perturbations = EnsembleSpec(kind=kind, dim=args.dim, seed=(args.seed + 1) % 2 ** 64)
    eig = spectra_service.eigendecompose(H)
    rho = spectra_service.thermal_weights(eig, args.beta)

    worst = 0.0
    for t in args.t:
        mc1, mc2 = rmt_service.monte_carlo_avg_chi(H, rho, t, perturbations, args.samples, max_workers=args.workers)
        exact1 = rmt_service.avg_chi1_analytic(eig, rho, t, perturbations.sigma)
        exact2 = rmt_service.avg_chi2_analytic(rho, t, perturbations.sigma, kind)
        z1, z2 = mc1.z_score(exact1), mc2.z_score(exact2)
        worst = max(worst, abs(z1), abs(z2))
        print(f"t={t:g} chi1: MC {mc1.mean:.6g} +- {mc1.stderr:.2g}, analytic {exact1:.6g}, z={z1:+.2f}")
        print(f"t={t:g} chi2: MC {mc2.mean:.6g} +- {mc2.stderr:.2g}, analytic {exact2:.6g}, z={z2:+.2f}")

    if worst > MAX_ABS_Z:
        logger.error(f"Monte Carlo deviates from the analytic average (|z| = {worst:.2f} > {MAX_ABS_Z:g})")
        return 1
    return 0
