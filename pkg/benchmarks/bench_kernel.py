#!/usr/bin/env python3
"""Benchmark the pure-Python kernel against the compiled one.

Builds a synthetic obligation graph, runs the budget sweep used by the
multiplier experiment on each available backend, checks the outputs are
identical, and prints per-backend timings.

Usage:
    python3 benchmarks/bench_kernel.py [--nodes N] [--edges M] [--seed S]
                                       [--points K]
"""

from __future__ import annotations

import argparse
import time

from setoff import SyntheticGraphConfig, attach_default_liquidity, generate, kernel
from setoff.graph import build_network, compute_nid
from setoff.solver import solve_network


def run_sweep(g, budgets):
    results = []
    for budget in budgets:
        net = build_network(g, budget=budget)
        _, solution = solve_network(net)
        results.append((budget, solution.cleared_debt, dict(solution.liquidity_used)))
    return results


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=500)
    parser.add_argument("--edges", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--points", type=int, default=10)
    args = parser.parse_args()

    config = SyntheticGraphConfig(
        nodes=args.nodes,
        edges=args.edges,
        seed=args.seed,
        amount_dist="lognormal",
    )
    g = generate(config)
    total = g.total_debt()
    g = attach_default_liquidity(g, placement="net_debtors")
    nid = compute_nid(g)
    budgets = [int(total * k / (2 * max(1, args.points - 1))) for k in range(args.points)]
    print(
        f"instance: {args.nodes} nodes, {args.edges} edges, seed {args.seed}, "
        f"total debt {total}, nid {nid}"
    )
    print(f"sweep: {len(budgets)} budgets from 0 to {budgets[-1]}")

    backends = kernel.available_backends()
    if "compiled" not in backends:
        print("note: compiled backend unavailable, timing python only")

    timings: dict[str, float] = {}
    outputs: dict[str, list] = {}
    for name in sorted(backends):
        kernel.set_backend(name)
        start = time.perf_counter()
        outputs[name] = run_sweep(g, budgets)
        timings[name] = time.perf_counter() - start
        cleared = outputs[name][-1][1]
        print(f"{name:>9}: {timings[name]:8.3f} s  (cleared at max budget: {cleared})")

    if len(outputs) == 2:
        if outputs["python"] != outputs["compiled"]:
            print("MISMATCH: backends disagree")
            return 1
        speedup = timings["python"] / timings["compiled"]
        print(f"outputs identical; compiled speedup: {speedup:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
