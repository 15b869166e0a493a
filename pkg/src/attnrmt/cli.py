"""Command line entry point: ``run``, ``spectrum`` and ``predict``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, ensembles, freeprob
from .errors import AttnRMTError, ConfigParseError
from .rng import PRNG_ALGORITHM, RngStream

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_DIVERGED = 2

SPECTRUM_KINDS = ("random_markov", "random_markov_softmax", "key_query_attention",
                  "uniform_attention", "identity_attention", "gaussian_iid")


def _cmd_run(args) -> int:
    from .config import load_config
    from .experiments import run

    try:
        spec = load_config(args.config)
    except (ConfigParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    outcome = run(spec, workers=args.workers, figures=not args.no_figures)
    for f in outcome.files:
        print(f)
    for name, fit in outcome.summary["loglog_fits"].items():
        print(f"slope[{name}] = {fit['slope']:.4f}")
    return EXIT_DIVERGED if outcome.all_diverged else EXIT_OK


def _cmd_spectrum(args) -> int:
    from .spectra import summarize

    stream = RngStream(args.seed, 0)
    sigma = args.sigma_a
    if args.kind == "key_query_attention":
        sigma = args.sigma_qk
    spec = ensembles.EnsembleSpec(args.kind, args.T, args.T, sigma=sigma, seed=args.seed)
    m = ensembles.sample(spec, stream)
    if args.remove_gap:
        m = ensembles.remove_gap(m)
    summ = summarize(m, args.outlier_threshold)
    payload = {
        "kind": args.kind, "T": args.T, "sigma_a": args.sigma_a, "seed": args.seed,
        "remove_gap": args.remove_gap, "prng": PRNG_ALGORITHM, "version": f"attnrmt {__version__}",
        "summary": summ.as_dict(),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "spectrum.json"
    path.write_text(json.dumps(payload, indent=2))
    short = {k: v for k, v in payload["summary"].items() if k != "singular_values"}
    print(json.dumps(short))
    print(path)
    return EXIT_OK


def _cmd_predict(args) -> int:
    if args.prop == "cov":
        pred = freeprob.covariance_prediction(args.ell, args.sigma_a, args.sigma_v, args.gamma)
    else:
        pred = freeprob.jacobian_prediction(args.ell, args.sigma_a, args.sigma_v)
    print(json.dumps(pred.as_dict()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="attnrmt", description=__doc__)
    p.add_argument("--version", action="version", version=f"attnrmt {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario sweep from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("spectrum", help="dump the spectral summary of one sampled matrix")
    s.add_argument("--kind", choices=SPECTRUM_KINDS, default="random_markov")
    s.add_argument("--T", type=int, required=True)
    s.add_argument("--sigma-a", type=float, default=1.0)
    s.add_argument("--sigma-qk", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--remove-gap", action="store_true")
    s.add_argument("--outlier-threshold", type=float, default=0.5)
    s.add_argument("--out", default=".")
    s.set_defaults(func=_cmd_spectrum)

    q = sub.add_parser("predict", help="print a closed-form moment prediction as JSON")
    q.add_argument("--prop", choices=("cov", "jac"), required=True)
    q.add_argument("--ell", type=int, required=True)
    q.add_argument("--sigma-a", type=float, default=1.0)
    q.add_argument("--sigma-v", type=float, default=1.0)
    q.add_argument("--gamma", type=float, default=1.0)
    q.set_defaults(func=_cmd_predict)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except AttnRMTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
