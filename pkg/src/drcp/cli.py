"""Command-line interface for scenario generation, consensus runs and bounds."""

import argparse
import json
import sys

import numpy as np

from .bounds import epsilon_bound, min_samples, phi
from .consensus import run_acc, run_qvcc, run_vcc
from .experiments import bench_grid, make_graph, run_experiment, write_csv
from .pool import ConstraintPool
from .removal import remove_constraints
from .scenarios import ScenarioSpec, build_program, partition_ids


def _add_scenario_flags(sub):
    sub.add_argument("--kind", default="ellipsoid_mixture",
                     choices=["ellipsoid_mixture", "gaussian_classification", "uncertain_lp"])
    sub.add_argument("--n-constraints", type=int, default=200)
    sub.add_argument("--dim", type=int, default=2)
    sub.add_argument("--seed", type=int, default=0)


def _add_run_flags(sub):
    _add_scenario_flags(sub)
    sub.add_argument("--topology", default="chain", choices=["chain", "geometric", "complete"])
    sub.add_argument("--nodes", type=int, default=5)
    sub.add_argument("--bandwidth", type=int, default=5)
    sub.add_argument("--pool", help="load the constraint pool from a JSON file instead")
    sub.add_argument("--out", help="write the report to this path (.csv or .json)")


def _build_parser():
    parser = argparse.ArgumentParser(prog="drcp", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen", help="generate a constraint pool as JSON")
    _add_scenario_flags(gen)
    gen.add_argument("--out", required=True)

    for name in ("run-acc", "run-vcc", "run-qvcc"):
        sub = subs.add_parser(name, help=f"run {name.split('-')[1]} consensus")
        _add_run_flags(sub)

    rem = subs.add_parser("remove", help="distributed constraint removal")
    _add_run_flags(rem)
    rem.add_argument("--r", type=int, required=True, dest="r")
    rem.add_argument("--protocol", default="acc", choices=["acc", "vcc", "qvcc"])

    bnd = subs.add_parser("bounds", help="scenario probability calculus")
    bnd.add_argument("--beta", type=float, required=True)
    bnd.add_argument("--zeta", type=int, required=True)
    bnd.add_argument("--n", type=int)
    bnd.add_argument("--epsilon", type=float)
    bnd.add_argument("--q", type=int, help="also report the binomial tail at this q")

    bench = subs.add_parser("bench", help="grid of experiments, CSV output")
    _add_scenario_flags(bench)
    bench.add_argument("--topology", default="chain,geometric",
                       help="comma-separated topologies")
    bench.add_argument("--protocols", default="acc,vcc,qvcc")
    bench.add_argument("--nodes", default="10,50")
    bench.add_argument("--seeds", default="0:20", help="range start:stop or comma list")
    bench.add_argument("--bandwidth", type=int, default=5)
    bench.add_argument("--out", required=True)
    return parser


def _parse_seeds(text):
    if ":" in text:
        a, b = text.split(":")
        return list(range(int(a), int(b)))
    return [int(s) for s in text.split(",")]


def _load_problem(args):
    if args.pool:
        pool = ConstraintPool.load(args.pool)
        program = build_program(pool)
    else:
        spec = ScenarioSpec(args.kind, args.n_constraints, args.dim, args.seed)
        pool = spec.build_pool()
        program = spec.build_program(pool)
    graph = make_graph(args.topology, args.nodes, seed=args.seed + 101)
    partition = partition_ids(pool, args.nodes, seed=args.seed + 7)
    return program, graph, partition


def _emit_report(report, out):
    if out is None:
        print(json.dumps(report.to_json(), indent=2, default=float))
    elif out.endswith(".csv"):
        with open(out, "w") as fh:
            report.to_csv(fh)
    else:
        report.save(out)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "gen":
        spec = ScenarioSpec(args.kind, args.n_constraints, args.dim, args.seed)
        spec.build_pool().save(args.out)
        return 0

    if args.command == "bounds":
        out = {}
        if args.n is not None:
            out["epsilon_bound"] = epsilon_bound(args.beta, args.zeta, args.n)
            if args.q is not None:
                eps = args.epsilon if args.epsilon is not None else out["epsilon_bound"]
                out["phi"] = phi(eps, args.q, args.n)
        if args.epsilon is not None:
            out["min_samples"] = min_samples(args.beta, args.zeta, args.epsilon)
        print(json.dumps(out))
        return 0

    if args.command == "bench":
        results = bench_grid(
            args.kind,
            args.n_constraints,
            args.dim,
            args.topology.split(","),
            args.protocols.split(","),
            [int(x) for x in args.nodes.split(",")],
            _parse_seeds(args.seeds),
            bandwidth=args.bandwidth,
        )
        with open(args.out, "w") as fh:
            write_csv(results, fh)
        bad = [r for r in results if not r.converged]
        print(f"{len(results)} runs, {len(bad)} failed")
        return 1 if bad else 0

    program, graph, partition = _load_problem(args)

    if args.command == "remove":
        report = remove_constraints(
            program, graph, partition, args.r, args.protocol, bandwidth=args.bandwidth
        )
        if args.out:
            report.save(args.out)
        else:
            print(json.dumps(report.to_json(), default=float))
        return 0

    runner = {"run-acc": run_acc, "run-vcc": run_vcc}.get(args.command)
    if runner is not None:
        report = runner(program, graph, partition)
    else:
        report = run_qvcc(program, graph, partition, args.bandwidth)
    _emit_report(report, args.out)
    if not report.converged:
        print("consensus failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
