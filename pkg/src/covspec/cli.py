"""Command line interface: simulate, fit, summarize.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .basis import BasisError
from .chainio import ChainIOError, config_family_hash, read_chain, write_chain
from .dataset import DataError, load_dataset, save_dataset
from .partition import PartitionError
from .sampler import ConfigError, Sampler, SamplerConfig
from .simulate import gen_ar1, gen_piecewise_ar, gen_slowly_varying_ar
from .summarize import (
    collapsed_measure,
    drop_burn_in,
    model_posterior,
    spectrum_surface,
    write_collapsed_csv,
    write_cov_cuts_csv,
    write_model_posterior_csv,
    write_surface_csv,
    write_time_cuts_csv,
)
from .whittle import Tau2Prior

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_IO = 4

# sampler flags shared by `fit` and overridable through --config files
_SAMPLER_KEYS = {
    "iterations": int,
    "burnin": int,
    "tmin": int,
    "wmin": int,
    "max_time_seg": int,
    "max_cov_seg": int,
    "nbasis": int,
    "sigma2_alpha": float,
    "pi_time": float,
    "pi_cov": float,
    "pair_prob": float,
    "seed": int,
    "tau2_prior": str,
    "tau2_a0": float,
    "tau2_b0": float,
    "tau2_max": float,
    "audit_every": int,
    "no_relocation_density": bool,
    "prior_only": bool,
    "chains": int,
}

_SAMPLER_DEFAULTS = {
    "iterations": 10_000,
    "burnin": 2_000,
    "tmin": 40,
    "wmin": 2,
    "max_time_seg": 10,
    "max_cov_seg": 10,
    "nbasis": 7,
    "sigma2_alpha": 100.0,
    "pi_time": 0.2,
    "pi_cov": 0.2,
    "pair_prob": 0.2,
    "seed": 0,
    "tau2_prior": "flat",
    "tau2_a0": 2.0,
    "tau2_b0": 1.0,
    "tau2_max": 1e5,
    "audit_every": 1000,
    "no_relocation_density": False,
    "prior_only": False,
    "chains": 1,
}


def _parse_config_file(path: str) -> dict:
    """key=value lines, # comments; keys match the long fit flags."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _SAMPLER_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown setting {key!r}")
            typ = _SAMPLER_KEYS[key]
            try:
                if typ is bool:
                    if value.lower() not in ("true", "false"):
                        raise ValueError("expected true or false")
                    out[key] = value.lower() == "true"
                else:
                    out[key] = typ(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def _resolve_settings(args: argparse.Namespace) -> dict:
    """Merge precedence: command line flag > config file > built-in default."""
    from_file = _parse_config_file(args.config) if args.config else {}
    settings = {}
    for key, default in _SAMPLER_DEFAULTS.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            settings[key] = flag_value
        elif key in from_file:
            settings[key] = from_file[key]
        else:
            settings[key] = default
    return settings


def _build_config(settings: dict, seed: int | None = None) -> SamplerConfig:
    return SamplerConfig(
        iterations=settings["iterations"],
        burn_in=settings["burnin"],
        t_min=settings["tmin"],
        w_min=settings["wmin"],
        max_time_segments=settings["max_time_seg"],
        max_cov_segments=settings["max_cov_seg"],
        n_basis=settings["nbasis"],
        sigma2_alpha=settings["sigma2_alpha"],
        pi_mix_time=settings["pi_time"],
        pi_mix_cov=settings["pi_cov"],
        pair_relocation_prob=settings["pair_prob"],
        seed=settings["seed"] if seed is None else seed,
        tau2_prior=Tau2Prior(
            kind=settings["tau2_prior"],
            a0=settings["tau2_a0"],
            b0=settings["tau2_b0"],
            tau2_max=settings["tau2_max"],
        ),
        include_relocation_density=not settings["no_relocation_density"],
        prior_only=settings["prior_only"],
        audit_every=settings["audit_every"],
    )


def _add_fit_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--iterations", type=int, default=None)
    sub.add_argument("--burnin", type=int, default=None)
    sub.add_argument("--tmin", type=int, default=None)
    sub.add_argument("--wmin", type=int, default=None)
    sub.add_argument("--max-time-seg", dest="max_time_seg", type=int, default=None)
    sub.add_argument("--max-cov-seg", dest="max_cov_seg", type=int, default=None)
    sub.add_argument("--nbasis", type=int, default=None)
    sub.add_argument("--sigma2-alpha", dest="sigma2_alpha", type=float, default=None)
    sub.add_argument("--pi-time", dest="pi_time", type=float, default=None)
    sub.add_argument("--pi-cov", dest="pi_cov", type=float, default=None)
    sub.add_argument("--pair-prob", dest="pair_prob", type=float, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument(
        "--tau2-prior",
        dest="tau2_prior",
        choices=("flat", "uniform", "reciprocal", "inverse_gamma"),
        default=None,
    )
    sub.add_argument("--tau2-a0", dest="tau2_a0", type=float, default=None)
    sub.add_argument("--tau2-max", dest="tau2_max", type=float, default=None)
    sub.add_argument("--tau2-b0", dest="tau2_b0", type=float, default=None)
    sub.add_argument("--audit-every", dest="audit_every", type=int, default=None)
    sub.add_argument(
        "--no-relocation-density",
        dest="no_relocation_density",
        action="store_const",
        const=True,
        default=None,
    )
    sub.add_argument(
        "--prior-only", dest="prior_only", action="store_const", const=True, default=None
    )
    sub.add_argument("--chains", type=int, default=None)
    sub.add_argument("--config", default=None, help="key=value file; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covspec",
        description="Covariate-indexed time-varying spectral estimation for replicated series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic panel of series")
    sim.add_argument(
        "--kind", choices=("piecewise", "slowly-varying", "ar1"), default="piecewise"
    )
    sim.add_argument("--subjects", type=int, default=8)
    sim.add_argument("--length", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--phi", type=float, default=None, help="AR coefficient (kind=ar1)")
    sim.add_argument("--out", required=True, help="output directory")

    fit = sub.add_parser("fit", help="run the sampler and write a chain file")
    fit.add_argument("--series", required=True, help="one subject per row, delimited text")
    fit.add_argument("--covariates", required=True, help="one value per subject")
    fit.add_argument("--out", required=True, help="chain file path (JSON lines)")
    _add_fit_flags(fit)

    summ = sub.add_parser("summarize", help="tables and figures from chain files")
    summ.add_argument("--chain", action="append", required=True, help="chain file (repeatable)")
    summ.add_argument("--out", required=True, help="output directory")
    summ.add_argument("--burnin", type=int, default=None, help="override the fit burn-in")
    summ.add_argument(
        "--quantile-level",
        dest="quantile_level",
        type=float,
        default=0.05,
        help="total tail mass of the equal-tailed band",
    )
    summ.add_argument("--band", nargs=2, type=float, default=(0.15, 0.40), metavar=("LO", "HI"))
    summ.add_argument(
        "--norm-band", dest="norm_band", nargs=2, type=float, default=(0.04, 0.40),
        metavar=("LO", "HI"),
    )
    summ.add_argument("--sampling-rate", dest="sampling_rate", type=float, default=1.0)
    summ.add_argument("--u-points", dest="u_points", type=int, default=25)
    summ.add_argument("--freq-points", dest="freq_points", type=int, default=101)
    summ.add_argument("--no-plots", dest="no_plots", action="store_true")
    return parser


def _chain_path(out: str, index: int, n_chains: int) -> str:
    if n_chains == 1:
        return out
    stem, ext = os.path.splitext(out)
    return f"{stem}.{index}{ext or '.jsonl'}"


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.subjects < 2:
        raise ConfigError("--subjects must be at least 2")
    if args.kind == "ar1":
        if args.phi is None:
            raise ConfigError("--phi is required for kind=ar1")
        data = gen_ar1(L=args.subjects, T=args.length, phi=args.phi, seed=args.seed)
    elif args.kind == "slowly-varying":
        data = gen_slowly_varying_ar(L=args.subjects, T=args.length, seed=args.seed)
    else:
        data = gen_piecewise_ar(L=args.subjects, T=args.length, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    series_path = os.path.join(args.out, "series.csv")
    cov_path = os.path.join(args.out, "covariates.csv")
    save_dataset(data, series_path, cov_path)
    manifest = {
        "kind": args.kind,
        "subjects": args.subjects,
        "length": args.length,
        "seed": args.seed,
        "phi": args.phi,
        "series": os.path.basename(series_path),
        "covariates": os.path.basename(cov_path),
    }
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {series_path} ({args.subjects} x {args.length})")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    settings = _resolve_settings(args)
    n_chains = settings.pop("chains")
    if n_chains < 1:
        raise ConfigError("--chains must be at least 1")
    base = _build_config(settings)
    base.validate()
    data = load_dataset(args.series, args.covariates, t_min=base.t_min)

    def run_one(index: int):
        config = _build_config(settings, seed=base.seed + index)
        sampler = Sampler(data, config)
        t0 = time.perf_counter()
        records = sampler.run()
        elapsed = time.perf_counter() - t0
        path = _chain_path(args.out, index, n_chains)
        write_chain(path, records, config, data)
        return {
            "chain_file": path,
            "seed": config.seed,
            "wall_time_sec": round(elapsed, 3),
            "acceptance": sampler.acceptance_rates(),
        }

    t0 = time.perf_counter()
    if n_chains == 1:
        results = [run_one(0)]
    else:
        with ThreadPoolExecutor(max_workers=n_chains) as pool:
            results = list(pool.map(run_one, range(n_chains)))
    total = time.perf_counter() - t0
    report = {
        "command": "fit",
        "series": args.series,
        "covariates": args.covariates,
        "n_chains": n_chains,
        "iterations": base.iterations,
        "burn_in": base.burn_in,
        "total_wall_time_sec": round(total, 3),
        "chains": results,
    }
    report_path = os.path.splitext(args.out)[0] + ".report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for entry in results:
        print(f"wrote {entry['chain_file']} (seed {entry['seed']}, {entry['wall_time_sec']}s)")
    print(f"wrote {report_path}")
    return EXIT_OK


def cmd_summarize(args: argparse.Namespace) -> int:
    loaded = [read_chain(path) for path in args.chain]
    first = loaded[0]
    family = config_family_hash(first.config)
    if any(config_family_hash(lc.config) != family for lc in loaded[1:]):
        raise ConfigError(
            "chain files were fitted with different configurations; refusing to pool them"
        )
    burn_in = args.burnin if args.burnin is not None else first.config.burn_in
    if not 0.0 < args.quantile_level < 1.0:
        raise ConfigError("--quantile-level must lie in (0, 1)")
    quantiles = (args.quantile_level / 2.0, 1.0 - args.quantile_level / 2.0)
    records = []
    for lc in loaded:
        records.extend(drop_burn_in(lc.records, burn_in))
    if not records:
        raise ConfigError("no post burn-in records; lower --burnin or run more iterations")

    os.makedirs(args.out, exist_ok=True)
    mp = model_posterior(records)
    write_model_posterior_csv(os.path.join(args.out, "model_posterior.csv"), mp)
    n_times = first.data["n_times"]
    write_time_cuts_csv(os.path.join(args.out, "time_cuts.csv"), records, mp.modal_m, n_times)
    write_cov_cuts_csv(os.path.join(args.out, "cov_cuts.csv"), records, mp.modal_p)

    w_values = sorted(set(first.data["covariates"]))
    u_grid = (np.arange(args.u_points) + 0.5) / args.u_points
    freqs = np.linspace(0.0, 0.5, args.freq_points)
    surface = spectrum_surface(records, w_values, u_grid, freqs, quantiles=quantiles)
    write_surface_csv(os.path.join(args.out, "surface.csv"), surface)
    cm = collapsed_measure(
        records,
        band=tuple(args.band),
        norm_band=tuple(args.norm_band),
        sampling_rate=args.sampling_rate,
        quantiles=quantiles,
    )
    write_collapsed_csv(os.path.join(args.out, "collapsed.csv"), cm)

    summary = {
        "n_records": mp.n_records,
        "burn_in": burn_in,
        "modal_m": mp.modal_m,
        "modal_p": mp.modal_p,
        "m_marginal": {str(k): v for k, v in mp.m_marginal.items()},
        "p_marginal": {str(k): v for k, v in mp.p_marginal.items()},
        "collapsed_modal_shape": [cm.m, cm.p],
    }
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if not args.no_plots:
        from . import plots

        plots.plot_model_posterior(mp, os.path.join(args.out, "model_posterior.png"))
        plots.plot_time_cuts(records, mp.modal_m, n_times, os.path.join(args.out, "time_cuts.png"))
        plots.plot_cov_cuts(records, mp.modal_p, os.path.join(args.out, "cov_cuts.png"))
        plots.plot_surface(surface, os.path.join(args.out, "surface.png"))
        plots.plot_collapsed(cm, os.path.join(args.out, "collapsed.png"))
    print(f"wrote summaries to {args.out} ({mp.n_records} records, modal m={mp.modal_m}, p={mp.modal_p})")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"simulate": cmd_simulate, "fit": cmd_fit, "summarize": cmd_summarize}
    try:
        return handlers[args.command](args)
    except (ConfigError, PartitionError, BasisError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ChainIOError as exc:
        print(f"chain file error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
