import argparse
import logging
import math
from collections import defaultdict

import config
import sweep
from commands.parsing import beta_list, float_list, fraction, positive_int, sidecar_paths
from schemas import DickeParams, PlotSeries, PlotSpec, SweepConfig, SweepResult
from services import plot_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("dicke-sweep", help="chi1/chi2 of the Dicke model over a lambda grid")
    parser.add_argument("--n-atoms", type=positive_int, default=8)
    parser.add_argument("--boson-cutoff", type=positive_int, default=48)
    parser.add_argument("--omega", type=float, default=1.0)
    parser.add_argument("--omega0", type=float, default=1.0)
    parser.add_argument("--rwa", action="store_true", help="drop the counter-rotating terms")
    parser.add_argument("--derivative-prefactor", choices=["exact", "printed"], default="exact")
    parser.add_argument("--lambda-min", type=float, default=0.05)
    parser.add_argument("--lambda-max", type=float, default=1.0)
    parser.add_argument("--steps", type=positive_int, default=60)
    parser.add_argument("--times", type=float_list, default=[1.0, 10.0, 100.0, 1000.0])
    parser.add_argument(
        "--beta", type=beta_list, default=beta_list("0"),
        help="comma list: 0 (uniform), finite values, inf (ground state), "
             "ratio:x (one beta for the sweep, set by its widest spectrum)",
    )
    parser.add_argument("--sector", choices=["full", "even", "odd"], default="full")
    parser.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True)
    parser.add_argument("--level-fraction", type=fraction, default=0.5)
    parser.add_argument("--unfold-degree", type=positive_int, default=10)
    parser.add_argument("--max-dim", type=positive_int, default=None)
    parser.add_argument("--workers", type=positive_int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="result CSV")
    parser.add_argument("--plot", help="SVG of chi1 against lambda")
    parser.add_argument("--entropy-plot", help="SVG of the per-sector relative entropy against lambda")
    parser.add_argument("--cache", default=config.default_cache_dir(), help="eigensystem cache directory")
    parser.set_defaults(handler=cmd_dicke_sweep)


def _sweep_config(args) -> SweepConfig:
    dicke = DickeParams(
        n_atoms=args.n_atoms,
        boson_cutoff=args.boson_cutoff,
        omega=args.omega,
        omega0=args.omega0,
        rwa=args.rwa,
        derivative_prefactor=args.derivative_prefactor,
        max_dim=args.max_dim or config.MAX_DIMENSION,
    )
    return SweepConfig(
        dicke=dicke,
        lambda_min=args.lambda_min,
        lambda_max=args.lambda_max,
        steps=args.steps,
        times=args.times,
        betas=args.beta.betas,
        thermal_ratios=args.beta.thermal_ratios,
        sector=args.sector,
        normalize=args.normalize,
        cache_dir=args.cache,
        seed=args.seed,
        level_fraction=args.level_fraction,
        unfold_degree=args.unfold_degree,
        max_workers=args.workers or config.MAX_WORKERS,
    )


def _beta_label(cfg: SweepConfig, choice: int) -> str:
    if choice < len(cfg.betas):
        beta = cfg.betas[choice]
        return "ground" if math.isinf(beta) else f"beta={beta:g}"
    return f"ratio={cfg.thermal_ratios[choice - len(cfg.betas)]:g}"


def _chi1_plot(cfg: SweepConfig, result: SweepResult) -> PlotSpec:
    groups = defaultdict(list)
    for row in result.rows:
        if row.status == "ok":
            groups[(row.t, row.beta_choice)].append(row)
    series = [
        PlotSeries(
            x=[r.coupling for r in rows],
            y=[r.chi1_normalized if cfg.normalize else r.chi1 for r in rows],
            label=f"t={t:g}, {_beta_label(cfg, choice)}",
        )
        for (t, choice), rows in sorted(groups.items())
    ]
    if not series:
        raise ValueError("Every lambda point failed; nothing to plot")
    return PlotSpec(
        series=series,
        title=f"Dicke model N={cfg.dicke.n_atoms}, M={cfg.dicke.boson_cutoff}, sector {cfg.sector}",
        x_label="lambda",
        y_label="chi1 / max chi1" if cfg.normalize else "chi1",
    )


def _entropy_plot(cfg: SweepConfig, result: SweepResult) -> PlotSpec:
    series = []
    for sector in ("even", "odd"):
        summaries = [s for s in result.summaries if s.sector == sector]
        if summaries:
            series.append(PlotSeries(
                x=[s.coupling for s in summaries],
                y=[s.relative_entropy_wigner for s in summaries],
                label=f"{sector} sector",
            ))
    if not series:
        raise ValueError("No spectral summaries to plot")
    return PlotSpec(
        series=series,
        title="Spacing distribution vs Wigner surmise",
        x_label="lambda",
        y_label="relative entropy",
    )


def cmd_dicke_sweep(args) -> int:
    cfg = _sweep_config(args)
    result = sweep.run_sweep(cfg)

    summary_path, meta_path = sidecar_paths(args.out)
    sweep.write_results_csv(args.out, result)
    sweep.write_summary_csv(summary_path, result)
    sweep.write_metadata(meta_path, result)
    if args.plot:
        plot_service.render_plot(_chi1_plot(cfg, result), args.plot)
    if args.entropy_plot:
        plot_service.render_plot(_entropy_plot(cfg, result), args.entropy_plot)

    peak = sweep.peak_row(result)
    if peak is None:
        print(f"wrote {len(result.rows)} rows to {args.out}; every lambda point failed")
        return 1
    print(
        f"wrote {len(result.rows)} rows to {args.out}; "
        f"max chi1 = {peak.chi1:.6g} at lambda={peak.coupling:.6g} (t={peak.t:g}, beta={peak.beta:g})"
    )
    return 0
