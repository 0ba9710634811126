"""Command line entry point: ``elliptic-edge sample|theory|experiment``."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from ..ensembles import EnsembleSpec, SeededStream, sample
from ..errors import (ConfigError, DomainError, EllipticEdgeError, InsufficientSamplesError,
                      RangeError, WorkerError)
from ..spectral import spectral_sample
from ..theory_asymptotic import (conditional_wnh_eginoe, rho_snh_edge_normalized,
                                 shifted_conditional_wnh_eginue, weighted_conditional_snh,
                                 wnh_marginals)
from ..theory_finite import FiniteNContext, finite_n_profile
from .config import DEFAULT_BINS, EXPERIMENTS, default_config, env_workers, parse_bins
from .experiments import Table, run_experiment
from .io import OutputError, write_csv, emit

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STATISTICAL = 3
EXIT_IO = 4
EXIT_WORKER = 5

THEORY_CURVES = ("snh_density", "snh_overlap", "wnh_density", "wnh_overlap", "finite")


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ensemble", choices=("real", "complex"), default="complex")
    p.add_argument("--n", type=int, default=None, help="matrix size")
    regime = p.add_mutually_exclusive_group()
    regime.add_argument("--tau", type=float, default=None, help="fixed ellipticity")
    regime.add_argument("--alpha", type=float, default=None,
                        help="weak non-Hermiticity, tau = 1 - (pi alpha)^2 / (2 N)")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing output files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elliptic-edge",
                                     description="Elliptic Ginibre edge statistics: theory and sampling.")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("sample", help="sample matrices and write eigenvalues with self-overlaps")
    _common(ps)
    ps.add_argument("--eigenvalues", type=int, default=None,
                    help="number of eigenvalues; rounded up to whole matrices")
    ps.add_argument("--seed", type=_u64, default=0)

    pt = sub.add_parser("theory", help="evaluate a theory curve on a grid")
    pt.add_argument("name", choices=THEORY_CURVES)
    _common(pt)
    pt.add_argument("--bins", default=None,
                    help="grid as name=lo:hi:count items; 'finite' takes x=...,y=...")

    pe = sub.add_parser("experiment", help="run a Monte Carlo experiment against theory")
    pe.add_argument("name", choices=EXPERIMENTS)
    _common(pe)
    pe.add_argument("--eigenvalues", type=int, default=None, help="retained eigenvalue target")
    pe.add_argument("--seed", type=_u64, default=0)
    pe.add_argument("--workers", type=int, default=None,
                    help="worker processes (default: $ELLIPTIC_EDGE_WORKERS or 1)")
    pe.add_argument("--bins", default=None, help="binning spec, name=lo:hi:count items")
    pe.add_argument("--paper-scale", action="store_true", help="use the full-scale presets")
    pe.add_argument("--exclusion", choices=("imag", "theta"), default="imag",
                    help="real-ensemble cut for strong non-Hermiticity runs")
    pe.add_argument("--max-matrices", type=int, default=None, help="hard cap on sampled matrices")
    return parser


def _cmd_sample(args) -> int:
    n = args.n or 16
    if args.alpha is not None:
        spec = EnsembleSpec.wnh(args.ensemble, n, args.alpha)
    else:
        spec = EnsembleSpec.fixed(args.ensemble, n, 0.5 if args.tau is None else args.tau)
    count = args.eigenvalues if args.eigenvalues is not None else n
    if count < 1:
        raise ConfigError("--eigenvalues must be positive")
    out = args.out or Path(".")
    target = out / "eigenvalues.csv"
    if target.exists() and not args.force:
        raise OutputError("refusing to overwrite without --force", target)
    rows = []
    for index in range(math.ceil(count / n)):
        X = sample(spec, SeededStream(args.seed, index))
        s = spectral_sample(X)
        real = s.is_real_eigenvalue if s.is_real_eigenvalue is not None else np.zeros(n, dtype=bool)
        for z, o, r in zip(s.eigenvalues, s.self_overlaps, real):
            rows.append((index, float(z.real), float(z.imag), float(o), int(bool(r))))
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(target, Table(("stream_index", "re", "im", "self_overlap", "is_real"), rows))
    except OSError as exc:
        raise OutputError(exc.strerror or str(exc), target) from exc
    print(f"wrote {len(rows)} eigenvalues from {math.ceil(count / n)} matrices to {target}")
    return EXIT_OK


def _theory_tables(args):
    name = args.name
    if name in ("snh_density", "snh_overlap", "finite"):
        if args.alpha is not None:
            raise ConfigError(f"theory {name} takes --tau, not --alpha")
        tau = 0.5 if args.tau is None else args.tau
    else:
        if args.tau is not None:
            raise ConfigError(f"theory {name} takes --alpha, not --tau")
        alpha = 0.5 if args.alpha is None else args.alpha
        kappa = (math.pi * alpha) ** 2 / 2.0
    if name == "finite":
        axes = parse_bins(args.bins or "x=-6:6:25,y=0.25:6:24")
        ctx = FiniteNContext(args.n or 16, tau, args.ensemble)
        xs, ys = np.meshgrid(axes["x"].points(), axes["y"].points(), indexing="ij")
        z = (xs + 1j * ys).ravel()
        lr, lo = finite_n_profile(ctx, z)
        rows = [(float(a.real), float(a.imag), float(math.exp(r)), float(math.exp(o)))
                for a, r, o in zip(z, lr, lo)]
        return {"finite.csv": Table(("re", "im", "density", "overlap"), rows)}
    axes = parse_bins(args.bins or DEFAULT_BINS[name])

    def one(grid, values):
        return Table(("grid", "value"), [(float(g), float(v)) for g, v in zip(grid, values)])

    if name == "snh_density":
        g = axes["eta"].points()
        return {"theory.csv": one(g, rho_snh_edge_normalized(g, tau))}
    if name == "snh_overlap":
        g = axes["eta_tilde"].points()
        return {"theory.csv": one(g, weighted_conditional_snh(g))}
    if name == "wnh_density":
        xm, ym = wnh_marginals(args.ensemble, kappa)
        gx, gy = axes["x"].points(), axes["y"].points()
        return {"theory.csv": one(gx, xm(gx)), "theory_y.csv": one(gy, ym(gy))}
    if args.ensemble == "complex":
        g = axes["x"].points()
        return {"theory.csv": one(g, [shifted_conditional_wnh_eginue(v, kappa) for v in g])}
    g = axes["y"].points()
    return {"theory.csv": one(g, conditional_wnh_eginoe(g, kappa))}


def _cmd_theory(args) -> int:
    tables = _theory_tables(args)
    out = args.out or Path(".")
    paths = [out / name for name in sorted(tables)]
    clash = [str(p) for p in paths if p.exists()]
    if clash and not args.force:
        raise OutputError(f"refusing to overwrite {', '.join(clash)} without --force", out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for p in paths:
            write_csv(p, tables[p.name])
    except OSError as exc:
        raise OutputError(exc.strerror or str(exc), out) from exc
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    workers = args.workers if args.workers is not None else env_workers()
    kw = {"master_seed": args.seed, "worker_count": workers, "exclusion": args.exclusion,
          "max_matrices": args.max_matrices}
    if args.bins:
        kw["bins"] = args.bins
    out = args.out or Path("results") / f"{args.name}-{args.ensemble}"
    kw["output_dir"] = str(out)
    config = default_config(args.name, args.ensemble, tau=args.tau, alpha=args.alpha, n=args.n,
                            eigenvalues=args.eigenvalues, paper_scale=args.paper_scale, **kw)
    bundle = run_experiment(config)
    emit(bundle, out, force=args.force, workers=workers)
    acc = bundle.summary["acceptance"]
    for check, ok in sorted(acc["checks"].items()):
        print(f"{'PASS' if ok else 'FAIL'} {check}")
    print(f"results in {out}")
    return EXIT_OK if acc["passed"] else EXIT_STATISTICAL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"sample": _cmd_sample, "theory": _cmd_theory, "experiment": _cmd_experiment}
    try:
        return handlers[args.command](args)
    except (ConfigError, DomainError, RangeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientSamplesError as exc:
        print(f"statistical failure: {exc}", file=sys.stderr)
        return EXIT_STATISTICAL
    except (OutputError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except WorkerError as exc:
        print(f"worker error at stream {exc.stream_index}: {exc}", file=sys.stderr)
        return EXIT_WORKER
    except EllipticEdgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
