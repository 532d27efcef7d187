"""Command-line front end: solve, synth, eval-q, query, heatmap, check.

Exit codes are a stable scripting contract: 0 success, 2 config error,
3 non-convergence, 4 I/O error.  A single --seed (or HETSIM_SEED) drives
all randomness through derived streams, so runs are one-flag reproducible;
every command prints its effective configuration first.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio, dense, lowrank, model, synth

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOCONVERGE = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


def _seed_default() -> int:
    env = os.environ.get("HETSIM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"HETSIM_SEED must be an integer, got {env!r}") from None


def _echo_config(command: str, args: argparse.Namespace) -> None:
    shown = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print(f"config: {json.dumps({'command': command, **shown}, default=str)}")


def _parse_counts(text: str) -> tuple[int, ...]:
    try:
        counts = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"malformed layer counts {text!r}") from None
    return counts


def _parse_sweep(text: str) -> list[float]:
    try:
        r0, r1, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"malformed sweep spec {text!r} (want r0:r1:step)") from None
    if step <= 0 or r1 < r0:
        raise ConfigError("sweep spec needs r1 >= r0 and step > 0")
    grid = []
    r = r0
    while r <= r1 + 1e-12:
        grid.append(round(r, 12))
        r += step
    return grid


def _resolve_ranks(text: str, network: model.HeteroNetwork):
    if text == "full":
        return {t.name: t.size for t in network.types}
    try:
        rank = int(text)
    except ValueError:
        raise ConfigError(f"--ranks must be an integer or 'full', got {text!r}") from None
    if rank < 1:
        raise ConfigError("--ranks must be at least 1")
    return {t.name: min(rank, t.size) for t in network.types}


def cmd_check(args) -> int:
    network, weights = dataio.load_network(args.bundle)
    if weights is None:
        weights = model.default_weights(network)
    report = model.check_convergence_conditions(network, weights)
    for rel, direction, col in report.nonstochastic:
        print(f"non-stochastic column: relation={rel} direction={direction} col={col}")
    for t in report.overweight:
        print(f"overweight type: {t} (sum={report.weight_sums[t]:.6g})")
    for t, bound in sorted(report.lyapunov_bounds.items()):
        print(f"lyapunov bound[{t}] = {bound:.6g}")
    print("check: PASS" if report.ok else "check: FAIL")
    return EXIT_OK if report.ok else EXIT_CONFIG


def cmd_solve(args) -> int:
    network, weights = dataio.load_network(args.bundle)
    if weights is None:
        weights = model.default_weights(network)
    config = dense.SolverConfig(tol=args.tol, max_iter=args.max_iter, damping=args.c)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    check = not args.force

    if args.solver == "lowrank":
        svd = lowrank.SvdConfig(
            rank=_resolve_ranks(args.ranks, network),
            oversample=args.oversample,
            power=args.power,
            seed=args.seed,
        )
        states, trace = lowrank.solve_lowrank(network, weights, config, svd, check=check)
        dataio.save_factors(states, network, out / "factors", args.seed, trace.iterations)
    elif args.solver == "dense":
        state, trace = dense.solve_dense(network, weights, config, check=check)
        dataio.save_similarity(state, network, out / "similarity.csv")
    else:  # lyapunov
        state, trace = dense.solve_lyapunov(network, weights, config, check=check)
        dataio.save_similarity(state, network, out / "similarity.csv")

    trace.write_csv(out / "trace.csv")
    for i, r in enumerate(trace.residuals, start=1):
        print(f"iteration {i}: residual={r:.6g}")
    if not trace.converged:
        print(f"did not converge within {config.max_iter} iterations", file=sys.stderr)
        return EXIT_NOCONVERGE
    print(f"converged in {trace.iterations} iterations")
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.out)
    if args.mode == "random":
        spec = synth.RandomNetworkSpec(k=args.K, n=args.N, seed=args.seed)
        network = synth.random_network(spec)
        dataio.save_network(network, out)
        print(f"wrote bundle with {len(network.types)} types, "
              f"{len(network.relations)} relations to {out}")
    else:
        counts = _parse_counts(args.counts)
        if args.layers is not None and args.layers != len(counts):
            raise ConfigError("--layers disagrees with --counts")
        spec = synth.LayeredGraphSpec(counts=counts, radius=args.r, seed=args.seed)
        network, points = synth.layered_points_graph(spec)
        dataio.save_network(network, out)
        dataio.save_points(points, out / "points.csv")
        print(f"wrote layered bundle ({len(counts)} layers) to {out}")
    return EXIT_OK


def _solve_layer_blocks(network, solver, config, ranks_text, oversample, power, seed):
    weights = model.default_weights(network)
    if solver == "lowrank":
        svd = lowrank.SvdConfig(
            rank=_resolve_ranks(ranks_text, network),
            oversample=oversample,
            power=power,
            seed=seed,
        )
        states, _ = lowrank.solve_lowrank(network, weights, config, svd)
        return {name: f.dense() for name, f in states.items()}
    state, _ = dense.solve_dense(network, weights, config)
    return state.blocks


def cmd_eval_q(args) -> int:
    config = dense.SolverConfig(tol=args.tol, max_iter=args.max_iter)
    if args.sweep:
        counts = _parse_counts(args.counts)
        grid = _parse_sweep(args.sweep)
        for ridx, r in enumerate(grid):
            qs = []
            for trial in range(args.trials):
                seed = int(
                    np.random.SeedSequence(
                        entropy=args.seed, spawn_key=(ridx, trial)
                    ).generate_state(1)[0]
                )
                spec = synth.LayeredGraphSpec(counts=counts, radius=r, seed=seed)
                network, points = synth.layered_points_graph(spec)
                blocks = _solve_layer_blocks(
                    network, args.solver, config, args.ranks,
                    args.oversample, args.power, seed,
                )
                qs.append(synth.layer_quality(points, blocks)[0])
            print(f"r={r:g} meanQ={np.mean(qs):.6g} trials={len(qs)}")
        return EXIT_OK

    if not args.bundle or not args.similarity:
        raise ConfigError("eval-q needs either --sweep or both --bundle and --similarity")
    network, _ = dataio.load_network(args.bundle)
    points = dataio.load_points(Path(args.bundle) / "points.csv")
    state = dataio.load_similarity(args.similarity, network)
    qs = synth.layer_quality(points, state.blocks)
    for k, q in enumerate(qs):
        print(f"Q[layer{k}] = {q:.6g}")
    print(f"Q = {qs[0]:.6g}")
    return EXIT_OK


def cmd_query(args) -> int:
    if args.factors:
        states = dataio.load_factors(args.factors)
        manifest = json.loads((Path(args.factors) / dataio.FACTORS_NAME).read_text())
        # Entity ids live in the bundle; the factors container stores indices.
        if not args.bundle:
            raise ConfigError("--factors queries need --bundle for entity ids")
        network, _ = dataio.load_network(args.bundle)
        del manifest
        t = network.type(args.type)
        if args.id not in t.index:
            raise ConfigError(f"unknown entity id {args.id!r} in type {args.type!r}")
        a = t.index[args.id]
        if args.type not in states:
            raise ConfigError(f"no factors for type {args.type!r}")
        results = lowrank.top_k(states[args.type], a, args.k)
        for rank, (j, score) in enumerate(results, start=1):
            print(f"{rank},{t.ids[j]},{'%.17g' % score}")
    elif args.similarity:
        ids, block = dataio.read_similarity_block(args.similarity, args.type)
        index = {eid: i for i, eid in enumerate(ids)}
        if args.id not in index:
            raise ConfigError(f"unknown entity id {args.id!r} in type {args.type!r}")
        a = index[args.id]
        scores = block[a].copy()
        order = np.lexsort((np.arange(len(ids)), -scores))
        shown = 0
        for j in order:
            if j == a:
                continue
            print(f"{shown + 1},{ids[j]},{'%.17g' % scores[j]}")
            shown += 1
            if shown == args.k:
                break
    else:
        raise ConfigError("query needs --factors or --similarity")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    if args.similarity:
        _, block = dataio.read_similarity_block(args.similarity, args.type)
    elif args.factors:
        states = dataio.load_factors(args.factors)
        if args.type not in states:
            raise ConfigError(f"no factors for type {args.type!r}")
        block = states[args.type].dense()
    else:
        raise ConfigError("heatmap needs --similarity or --factors")
    dataio.export_heatmap(block, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetsim",
        description="Per-type similarity over heterogeneous networks.",
    )
    parser.add_argument(
        "--threads", type=int, default=None,
        help="cap worker parallelism (solvers are sequential; recorded for reproducibility)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run convergence-condition checks on a bundle")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve", help="solve a bundle and write similarity + trace")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--solver", choices=["dense", "lowrank", "lyapunov"], default="dense")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--c", type=float, default=0.8, help="damping for the lyapunov solver")
    p.add_argument("--ranks", default="10", help="per-type rank (integer) or 'full'")
    p.add_argument("--oversample", type=int, default=10)
    p.add_argument("--power", type=int, default=2)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--force", action="store_true",
                   help="skip the convergence-condition precheck")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("synth", help="generate a synthetic bundle")
    mode = p.add_subparsers(dest="mode", required=True)
    pr = mode.add_parser("random", help="fully-connected typed network")
    pr.add_argument("--K", type=int, required=True)
    pr.add_argument("--N", type=int, required=True)
    pr.add_argument("--seed", type=int, default=None)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_synth, mode="random")
    pl = mode.add_parser("layered", help="layered geometric graph with points")
    pl.add_argument("--layers", type=int, default=None)
    pl.add_argument("--counts", required=True, help="comma-separated points per layer")
    pl.add_argument("--r", type=float, required=True)
    pl.add_argument("--seed", type=int, default=None)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_synth, mode="layered")

    p = sub.add_parser("eval-q", help="ordering-quality evaluation")
    p.add_argument("--bundle")
    p.add_argument("--similarity")
    p.add_argument("--sweep", help="radius sweep r0:r1:step over fresh layered graphs")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--counts", default="40,40,40")
    p.add_argument("--solver", choices=["dense", "lowrank"], default="dense")
    p.add_argument("--ranks", default="10")
    p.add_argument("--oversample", type=int, default=10)
    p.add_argument("--power", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_eval_q)

    p = sub.add_parser("query", help="top-k most similar entities")
    p.add_argument("--factors")
    p.add_argument("--similarity")
    p.add_argument("--bundle")
    p.add_argument("--type", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--k", type=int, default=6)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("heatmap", help="similarity block as an SVG heatmap")
    p.add_argument("--similarity")
    p.add_argument("--factors")
    p.add_argument("--type", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "seed", None) is None and hasattr(args, "seed"):
            args.seed = _seed_default()
        _echo_config(args.command, args)
        return args.func(args)
    except (dataio.BundleError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except dense.DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONVERGE
    except (ConfigError, model.NetworkError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
