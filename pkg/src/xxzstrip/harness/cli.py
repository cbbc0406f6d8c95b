"""Command line entry point.

Exit codes: 0 when every check passes, 1 when a bound is violated, 2 on
invalid input.  Records go to ``--outdir``, else ``$XXZSTRIP_OUTPUT_DIR``,
else ``./results``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..lattice import build_strip
from .experiments import (
    BoundGrid,
    default_outdir,
    run_bound_suite,
    run_ee_scaling,
    run_f_sum,
    run_mc_arealaw,
    run_spectrum_scan,
)
from .fields import RandomFieldSpec, sample_field

EXIT_OK, EXIT_VIOLATION, EXIT_INVALID = 0, 1, 2


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _physics(p: argparse.ArgumentParser, delta: float = 0.5):
    p.add_argument("--M", type=int, default=1, help="strip width")
    p.add_argument("--Delta", type=float, default=4.0, help="anisotropy, > 1")
    p.add_argument("--delta", type=float, default=delta, help="droplet interval parameter")
    p.add_argument("--max-dim", type=int, default=4000, help="dense eigensolver cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xxzstrip", description=__doc__.splitlines()[0])
    parser.add_argument("--outdir", type=Path, default=None, help="output directory")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file of option defaults (flat, or keyed by subcommand)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="sector spectra with droplet-band flags")
    _physics(p)
    p.add_argument("--ell", type=int, default=2)
    p.add_argument("--N", type=_ints, default=None, help="comma-separated particle numbers")
    p.add_argument("--field", default=None, help="field law, e.g. bernoulli:1,0.5 (default V=0)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-index", type=int, default=0)

    p = sub.add_parser("bounds", help="run the bound-verification suite")
    p.add_argument("--widths", type=_ints, default=[1, 2])
    p.add_argument("--mus", type=_floats, default=[0.25, 0.5, 1.0, 2.0])
    p.add_argument("--pads", type=_ints, default=[0, 1, 2, 3])
    p.add_argument("--lemma53-columns", type=int, default=10)
    p.add_argument("--lemma61-ell", type=int, default=2)
    p.add_argument("--lemma61-columns", type=int, default=12)
    p.add_argument("--lemma61-mus", type=_floats, default=[0.5, 1.0, 2.0])
    p.add_argument("--Delta", type=float, default=4.0)
    p.add_argument("--deltas", type=_floats, default=[1.0, 0.5])
    p.add_argument("--alphas", type=_floats, default=[0.3, 0.5, 0.7])
    p.add_argument("--random-fields", type=int, default=5)
    p.add_argument("--field", default="uniform:1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-dim", type=int, default=4000)

    p = sub.add_parser("ee-scaling", help="droplet entropy versus the finite-ell log cap (V=0)")
    _physics(p)
    p.add_argument("--ell", type=_ints, default=[2, 3, 4])
    p.add_argument("--samples", type=int, default=20, help="random vectors per droplet subspace")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("mc-arealaw", help="disorder-averaged entropy and projector decay")
    _physics(p)
    p.add_argument("--ell", type=_ints, default=[2, 3, 4])
    p.add_argument("--field", default="bernoulli:1,0.5")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-samples", type=int, default=100)
    p.add_argument("--ee-samples", type=int, default=0, help="random vectors per droplet subspace")
    p.add_argument("--lemma-samples", type=int, default=200)
    p.add_argument("--lemma-js", type=_ints, default=[1, 2, 3])
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("f-sum", help="brackets on f(R, mu)")
    p.add_argument("--M", type=int, default=1)
    p.add_argument("--N", type=int, default=None, help="defaults to M*M")
    p.add_argument("--mus", type=_floats, default=[0.25, 0.5, 1.0, 2.0])
    p.add_argument("--pads", type=_ints, default=[0, 1, 2, 3])
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path, default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return
    cfg = json.loads(known.config.read_text())
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in subparsers.choices.items():
        dests = {a.dest for a in sp._actions}
        flat = {k.replace("-", "_"): v for k, v in cfg.items() if not isinstance(v, dict)}
        section = {k.replace("-", "_"): v for k, v in cfg.get(name, {}).items()}
        sp.set_defaults(**{k: v for k, v in {**flat, **section}.items() if k in dests})


def _dispatch(args):
    if args.command == "spectrum":
        geometry = build_strip(args.ell, args.M)
        V, label = None, "zero"
        if args.field:
            law = RandomFieldSpec.parse(args.field, args.seed)
            V = sample_field(law, geometry, args.sample_index)
            label = f"{law.describe()}#seed={args.seed}#sample={args.sample_index}"
        return run_spectrum_scan(geometry, args.Delta, args.delta, V, args.N, args.max_dim, label)
    if args.command == "bounds":
        grid = BoundGrid(
            widths=tuple(args.widths), mus=tuple(args.mus), pads=tuple(args.pads),
            lemma53_columns=args.lemma53_columns, lemma61_mus=tuple(args.lemma61_mus),
            lemma61_ell=args.lemma61_ell, lemma61_columns=args.lemma61_columns,
            Delta=args.Delta, deltas=tuple(args.deltas), alphas=tuple(args.alphas),
            random_fields=args.random_fields, field=args.field, seed=args.seed, max_dim=args.max_dim,
        )
        return run_bound_suite(grid)
    if args.command == "ee-scaling":
        return run_ee_scaling(args.M, args.Delta, args.delta, args.ell, samples=args.samples,
                              seed=args.seed, max_dim=args.max_dim)
    if args.command == "mc-arealaw":
        law = RandomFieldSpec.parse(args.field, args.seed)
        return run_mc_arealaw(args.M, args.Delta, args.delta, args.ell, law, args.n_samples,
                              ee_samples=args.ee_samples, lemma_samples=args.lemma_samples,
                              lemma_js=args.lemma_js, workers=args.workers, max_dim=args.max_dim)
    if args.command == "f-sum":
        return run_f_sum(args.M, args.mus, args.pads, args.N)
    raise ValueError(f"unknown command {args.command}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (OSError, ValueError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    args = parser.parse_args(argv)
    try:
        record = _dispatch(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    paths = record.write(args.outdir or default_outdir())
    for path in paths:
        print(path)
    print(json.dumps(record.aggregates, default=str))
    return EXIT_OK if record.passed else EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
