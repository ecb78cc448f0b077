"""Command-line front end: generate benchmark data, fit models,
evaluate them, and push data through the encoder or decoder.

Exit codes: 0 on success (and, for fits, the error target met), 2 for
invalid usage or infeasible configurations, 1 for unexpected internal
failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import benchgen
from .baselines import QuadraticModel, fit_linear, fit_quadratic, quadratic_metrics
from .cpn import CpnModel, FitConfig, decode_matrix, encode_matrix, evaluate, fit_adaptive
from .modelio import load_model, save_model
from .snapdata import SnapshotSet, load_snapshots, save_snapshots

__all__ = ["main"]


def _limit_threads():
    """Honor the CPN_THREADS cap when a thread-pool controller is
    importable; linear algebra backends otherwise keep their defaults."""
    cap = os.environ.get("CPN_THREADS")
    if not cap:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=int(cap))
    except (ImportError, ValueError):
        pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpnrom")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate benchmark snapshot files")
    g.add_argument("bench", choices=["toy", "kdv", "allen_cahn"])
    g.add_argument("--out", default=".", help="output directory")
    g.add_argument("--num-t", type=int, default=201, help="toy: number of samples")
    g.add_argument("--grid-size", type=int, default=None)
    g.add_argument("--dt-record", type=float, default=None)
    g.add_argument("--horizon", type=float, default=None)
    g.add_argument("--substeps", type=int, default=None)
    g.add_argument("--train-horizon", type=float, default=None, help="kdv: end of the training window")
    g.add_argument("--diffusion", type=float, default=None, help="allen_cahn: diffusion coefficient")

    f = sub.add_parser("fit", help="fit a model to a snapshot file")
    f.add_argument("train", help="training snapshots (SNP1)")
    f.add_argument("--out", required=True, help="model output directory")
    f.add_argument("--method", choices=["cpn", "linear", "quadratic"], default="cpn")
    f.add_argument("--setting", choices=["ms", "wc"], default="ms")
    f.add_argument("--epsilon", type=float, default=None)
    f.add_argument("--beta", type=float, default=None)
    f.add_argument("--alpha", type=float, default=1.0)
    f.add_argument("--lipschitz", type=float, default=100.0)
    f.add_argument("--degree", type=int, default=5)
    f.add_argument("--index-set", choices=["hyperbolic", "total", "partial"],
                   default="hyperbolic")
    f.add_argument("--interaction", type=int, default=None)
    f.add_argument("--eps0", type=float, default=None)
    f.add_argument("--n0", type=int, default=None,
                   help="starting encoder dimension; the dimension n for baseline methods")
    f.add_argument("--conservative", action="store_true")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--pair-budget", type=int, default=500_000)

    e = sub.add_parser("eval", help="evaluate a model on a snapshot file")
    e.add_argument("model", help="model directory")
    e.add_argument("data", help="snapshots (SNP1)")
    e.add_argument("--out", default=None, help="write metrics JSON here as well")
    e.add_argument("--per-coefficient", default=None, help="write per-coefficient errors CSV")
    e.add_argument("--reconstruction", default=None, help="write reconstructed states CSV")

    enc = sub.add_parser("encode", help="map snapshots to encoder coefficients (CSV)")
    enc.add_argument("model")
    enc.add_argument("data", help="snapshots (SNP1)")
    enc.add_argument("out", help="coefficient CSV, one row per encoder coordinate")

    dec = sub.add_parser("decode", help="map coefficient CSV back to snapshots (SNP1)")
    dec.add_argument("model")
    dec.add_argument("data", help="coefficient CSV")
    dec.add_argument("out", help="reconstructed snapshots (SNP1)")
    return parser


def _cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def pick(value, default):
        return default if value is None else value

    if args.bench == "toy":
        train = benchgen.gen_toy(args.num_t)
        save_snapshots(train, out / "toy_train.snp")
        spec = {"name": "toy", "num_t": args.num_t}
        test = None
    elif args.bench == "kdv":
        train, test, bench = benchgen.gen_kdv(
            grid_size=pick(args.grid_size, 256),
            dt_record=pick(args.dt_record, 2e-4),
            horizon=pick(args.horizon, 1.0),
            train_horizon=pick(args.train_horizon, 0.2),
            substeps=pick(args.substeps, 4),
        )
        save_snapshots(train, out / "kdv_train.snp")
        save_snapshots(test, out / "kdv_test.snp")
        spec = bench.as_dict()
    else:
        train, test, bench = benchgen.gen_allen_cahn(
            grid_size=pick(args.grid_size, 512),
            diffusion=pick(args.diffusion, 1e-2),
            dt_record=pick(args.dt_record, 0.1),
            horizon=pick(args.horizon, 60.0),
            substeps=pick(args.substeps, 10),
        )
        save_snapshots(train, out / "allen_cahn_train.snp")
        save_snapshots(test, out / "allen_cahn_test.snp")
        spec = bench.as_dict()

    with open(out / f"{args.bench}_spec.json", "w") as fh:
        json.dump(spec, fh, indent=2, sort_keys=True)
        fh.write("\n")
    shapes = {"train": list(train.states.shape)}
    if test is not None:
        shapes["test"] = list(test.states.shape)
    print(json.dumps({"bench": args.bench, "out": str(out), **shapes}))
    return 0


def _metrics_json(metrics) -> dict:
    return {
        "re": metrics.re,
        "n": metrics.n,
        "N": metrics.N,
        "N_comp": metrics.n_comp,
        "per_coefficient_errors": {str(k): v for k, v in metrics.per_coefficient.items()},
        "wall_time": metrics.wall_time,
    }


def _cmd_fit(args) -> int:
    train = load_snapshots(args.train)
    geom = train.geometry()
    out = Path(args.out)

    if args.method == "cpn":
        if args.epsilon is None:
            raise ValueError("--epsilon is required for the cpn method")
        cfg = FitConfig(
            epsilon=args.epsilon,
            setting=args.setting,
            beta=args.beta,
            alpha=args.alpha,
            lipschitz=args.lipschitz,
            degree=args.degree,
            index_kind=args.index_set,
            interaction=args.interaction,
            eps0=args.eps0,
            n0=args.n0,
            conservative_budgets=args.conservative,
            seed=args.seed,
            pair_budget=args.pair_budget,
        )
        model, trace = fit_adaptive(train, cfg, geom)
        metrics = model.achieved
        save_model(model, out)
        with open(out / "trace.json", "w") as fh:
            json.dump(trace, fh, indent=2)
            fh.write("\n")
    elif args.method == "linear":
        if args.n0 is None:
            raise ValueError("--n0 (the dimension) is required for the linear method")
        model = fit_linear(train, geom, n=args.n0)
        if args.setting != model.setting:
            model = dataclasses.replace(model, setting=args.setting)
        metrics = evaluate(model, train, geom)
        save_model(model, out)
    else:
        if args.n0 is None:
            raise ValueError("--n0 (the dimension) is required for the quadratic method")
        model = fit_quadratic(train, geom, n=args.n0, seed=args.seed)
        metrics = quadratic_metrics(model, train, geom, setting=args.setting)
        save_model(model, out)

    payload = {"re_train": metrics.re, **_metrics_json(metrics)}
    with open(out / "metrics.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(payload))
    if args.epsilon is not None and metrics.re > args.epsilon:
        return 2
    return 0


def _cmd_eval(args) -> int:
    model = load_model(args.model)
    data = load_snapshots(args.data)
    if isinstance(model, QuadraticModel):
        metrics = quadratic_metrics(model, data, setting=model.setting)
        recon = model.reconstruct(data.states) if args.reconstruction else None
    else:
        metrics = evaluate(model, data)
        recon = None
        if args.reconstruction:
            recon = decode_matrix(model, encode_matrix(model, data.states))
    payload = _metrics_json(metrics)
    print(json.dumps(payload))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.per_coefficient:
        items = sorted(metrics.per_coefficient.items())
        with open(args.per_coefficient, "w") as fh:
            for idx, err in items:
                fh.write(f"{idx},{err!r}\n")
    if recon is not None:
        np.savetxt(args.reconstruction, recon, delimiter=",")
    return 0


def _cmd_encode(args) -> int:
    model = load_model(args.model)
    data = load_snapshots(args.data)
    if isinstance(model, QuadraticModel):
        coeffs = model.encode_states(data.states)
    else:
        coeffs = encode_matrix(model, data.states)
    np.savetxt(args.out, coeffs, delimiter=",")
    return 0


def _cmd_decode(args) -> int:
    model = load_model(args.model)
    coeffs = np.loadtxt(args.data, delimiter=",", ndmin=2, dtype=np.float64)
    if isinstance(model, QuadraticModel):
        states = model.decode_coeffs(coeffs)
    else:
        states = decode_matrix(model, coeffs)
    save_snapshots(SnapshotSet(states), args.out)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "fit": _cmd_fit,
    "eval": _cmd_eval,
    "encode": _cmd_encode,
    "decode": _cmd_decode,
}


def main(argv=None) -> int:
    _limit_threads()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal failures
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
