import csv
import logging
import math

import numpy as np
import scipy.linalg

import config
from commands.parsing import dicke_spec, fraction, positive_float, positive_int
from schemas import DickeParams
from services import hilbert_service, spectra_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("spacing-stats", help="unfolded nearest-neighbour spacing statistics")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--levels", help="single-column CSV of energy levels")
    source.add_argument("--dicke", type=dicke_spec, help="N,M,lambda[,sector] of a Dicke instance")
    parser.add_argument("--level-fraction", type=fraction, default=0.5,
                        help="lowest fraction of each Dicke sector that enters the statistics")
    parser.add_argument("--unfold-degree", type=positive_int, default=10)
    parser.add_argument("--bins", type=positive_int, default=50)
    parser.add_argument("--smax", type=positive_float, default=4.0)
    parser.add_argument("--reference", choices=sorted(spectra_service.REFERENCES), default="wigner")
    parser.add_argument("--out", required=True, help="histogram CSV")
    parser.set_defaults(handler=cmd_spacing_stats)


def _dicke_level_sets(spec, level_fraction: float):
    params = DickeParams(n_atoms=spec.n_atoms, boson_cutoff=spec.boson_cutoff, coupling=spec.coupling,
                         max_dim=config.MAX_DIMENSION)
    H, basis = hilbert_service.build_dicke_hamiltonian(params)
    blocks = hilbert_service.parity_split(H, basis)
    # a full spectrum mixes both sectors, so each is unfolded on its own and pooled
    sectors = ("even", "odd") if spec.sector == "full" else (spec.sector,)
    level_sets = []
    for sector in sectors:
        levels = scipy.linalg.eigvalsh(blocks.block(sector).entries)
        level_sets.append(levels[:max(int(math.floor(level_fraction * levels.size)), 1)])
    return level_sets


def cmd_spacing_stats(args) -> int:
    if args.levels:
        level_sets = [np.sort(spectra_service.read_levels_csv(args.levels))]
    else:
        level_sets = _dicke_level_sets(args.dicke, args.level_fraction)

    sample, entropy = spectra_service.level_statistics(
        level_sets, degree=args.unfold_degree, n_bins=args.bins, s_max=args.smax, reference=args.reference
    )
    hist = sample.histogram
    reference = spectra_service.reference_histogram(spectra_service.REFERENCES[args.reference], hist.bin_edges)

    with open(args.out, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["bin_left", "bin_right", "density", "reference_density"])
        for left, right, density, ref in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.densities, reference.densities):
            writer.writerow([format(left, ".17g"), format(right, ".17g"), format(density, ".17g"), format(ref, ".17g")])

    print(
        f"relative entropy to {args.reference}: {entropy:.6g} "
        f"({sample.spacings.size} spacings, {hist.overflow:.2%} beyond s={args.smax:g})"
    )
    return 0
