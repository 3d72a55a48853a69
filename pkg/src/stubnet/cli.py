"""Command-line front end.

Subcommands: solve, centrality, optimize, simulate, validate,
classify-stubborn. All read the same two tabular inputs (--edges,
--agents), write JSON or CSV to --output (default stdout), and echo the
seed where randomness is involved. Exit codes: 0 success, 1 bad input or
configuration, 2 numerical failure. Reports are byte-identical across
reruns with the same inputs and seed, including across --threads
settings, because timing and thread counts never enter a payload.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import dynamics, reporting
from .centrality import rank_all
from .equilibrium import (
    DIRECT_THRESHOLD,
    Modification,
    assemble,
    full_opinion_vector,
    solve_equilibrium,
)
from .errors import ConfigError, NumericalError, StubnetError
from .network import (
    Network,
    classify_stubborn,
    load_network,
    normalize_rates,
    validate,
)
from .placement import (
    AllCandidates,
    MeanShift,
    PlacementProblem,
    ThresholdCount,
    TopHic,
    baseline_place,
    brute_force_place,
    greedy_place,
    mean_rate_probability,
)

BASELINE_ORDERINGS = ("out_degree", "posting_rate", "hic")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    started = time.perf_counter()
    try:
        payload, table = args.handler(args)
        with reporting.open_sink(args.output) as sink:
            reporting.render(payload, args.format, sink, table)
    except (StubnetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    if args.timing:
        print(f"elapsed_seconds={time.perf_counter() - started:.3f}", file=sys.stderr)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--edges", required=True, help="edge list (src,dst,prob)")
    common.add_argument(
        "--agents", required=True, help="agent table (id,opinion,rate,stubborn)"
    )
    common.add_argument("--delimiter", default=",", help="input field delimiter")
    common.add_argument("--output", default="-", help="output path, '-' for stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads (default: STUBNET_THREADS or 1; never changes results)",
    )
    common.add_argument(
        "--timing", action="store_true", help="print elapsed wall time to stderr"
    )

    parser = argparse.ArgumentParser(
        prog="stubnet",
        description="Equilibrium, influence, and simulation tools for "
        "opinion networks with stubborn agents.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "solve", parents=[common], help="expected limiting opinions"
    )
    p.add_argument("--method", choices=("auto", "direct", "iterative"), default="auto")
    p.add_argument("--direct-threshold", type=int, default=DIRECT_THRESHOLD)
    p.add_argument(
        "--mod-targets",
        default=None,
        help="comma-separated persuadable agents a placed source also reaches",
    )
    p.add_argument("--mod-prob", type=float, default=None)
    p.add_argument("--mod-theta", type=float, default=1.0)
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser(
        "centrality", parents=[common], help="harmonic influence scores"
    )
    p.add_argument(
        "--mixed-ranking",
        action="store_true",
        help="also rank stubborn and persuadable agents on one list",
    )
    p.set_defaults(handler=_cmd_centrality)

    p = sub.add_parser(
        "optimize", parents=[common], help="greedy placement of a new source"
    )
    p.add_argument("-k", "--budget", type=int, required=True)
    p.add_argument(
        "--method",
        choices=("greedy", "hic", "outdeg", "rate"),
        default="greedy",
        help="greedy selection or a fixed-ordering benchmark",
    )
    p.add_argument(
        "--p-agent",
        type=float,
        default=None,
        help="reading probability of the placed source "
        "(default: derived from the mean persuadable posting rate)",
    )
    p.add_argument("--theta-agent", type=float, default=1.0)
    p.add_argument(
        "--objective",
        default="mean",
        help="'mean' or 'threshold:TAU' (count strictly above TAU)",
    )
    p.add_argument(
        "--pool", default="top:1000", help="'all' or 'top:M' candidate restriction"
    )
    p.add_argument(
        "--baseline",
        action="append",
        choices=BASELINE_ORDERINGS,
        default=None,
        help="also evaluate a fixed-ordering baseline (repeatable)",
    )
    p.add_argument(
        "--brute-force",
        action="store_true",
        help="also compute the exact optimum (small networks only)",
    )
    p.set_defaults(handler=_cmd_optimize)

    p = sub.add_parser(
        "simulate", parents=[common], help="stochastic replica simulation"
    )
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument(
        "--schedule",
        required=True,
        help="stubbornness weights: 'constant:W' or 'power:C,TAU,DELTA'",
    )
    p.add_argument(
        "--verbalization", choices=("exact", "bernoulli"), default="bernoulli"
    )
    p.add_argument("--sample-every", type=int, default=None)
    p.add_argument(
        "--sample-times", default=None, help="comma-separated explicit sample steps"
    )
    p.add_argument(
        "--init",
        default=None,
        help="initial persuadable opinion in [0,1], or 'agents' to use the "
        "agents file (default: 0.5, or the agents file under --consensus)",
    )
    p.add_argument(
        "--track-equilibrium",
        action="store_true",
        help="solve the expected equilibrium and record L2 distance to it",
    )
    p.add_argument(
        "--consensus",
        action="store_true",
        help="stubborn-free consensus run; checks the contraction hypotheses",
    )
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser(
        "validate", parents=[common], help="structural checks, exit 0 either way"
    )
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser(
        "classify-stubborn",
        parents=[common],
        help="label agents stubborn by opinion extremity",
    )
    p.add_argument(
        "--low", required=True, help="closed interval 'LO,HI' near opinion 0"
    )
    p.add_argument(
        "--high", required=True, help="closed interval 'LO,HI' near opinion 1"
    )
    p.set_defaults(handler=_cmd_classify)

    return parser


def _threads(args) -> int:
    if args.threads is not None:
        value = args.threads
    else:
        raw = os.environ.get("STUBNET_THREADS", "1")
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"STUBNET_THREADS={raw!r} is not an integer") from None
    if value < 1:
        raise ConfigError("thread count must be positive")
    return value


def _load(args) -> Network:
    net = load_network(args.edges, args.agents, delimiter=args.delimiter)
    if not net.weighted:
        if net.posting_rates is None:
            raise ConfigError(
                "edges carry no probabilities and agents carry no posting rates; "
                "provide one of the two"
            )
        net = normalize_rates(net)
        print(
            "note: derived reading probabilities from posting rates",
            file=sys.stderr,
        )
    return net


def _dense_id(net: Network, raw: str, flag: str) -> int:
    try:
        return net.original_ids.index(raw)
    except ValueError:
        raise ConfigError(f"{flag}: unknown agent id {raw!r}") from None


def _cmd_solve(args):
    net = _load(args)
    sys_ = assemble(net)
    mod = None
    if (args.mod_targets is None) != (args.mod_prob is None):
        raise ConfigError("--mod-targets and --mod-prob must be given together")
    if args.mod_targets is not None:
        targets = []
        for raw in args.mod_targets.split(","):
            agent = _dense_id(net, raw.strip(), "--mod-targets")
            if agent in net.stubborn:
                raise ConfigError(f"--mod-targets: agent {raw.strip()!r} is stubborn")
            targets.append(agent)
        mod = Modification(tuple(targets), args.mod_prob, args.mod_theta)
    sol = solve_equilibrium(
        sys_,
        net.stubborn_opinions(),
        mod,
        method=args.method,
        direct_threshold=args.direct_threshold,
    )
    theta = reporting.clamp_unit(sol.theta, what="equilibrium opinions")
    oid = net.original_ids
    payload = {
        "command": "solve",
        "opinions": {oid[a]: float(v) for a, v in zip(sol.free_ids, theta)},
        "stubborn_opinions": {
            oid[a]: float(net.opinions[a]) for a in sorted(net.stubborn)
        },
        "mean_opinion": float(theta.mean()) if theta.size else None,
        "residual_norm": sol.residual_norm,
        "method": sol.method,
        "iterations": sol.iterations,
        "refinements": sol.refinements,
        "modification": None
        if mod is None
        else {
            "targets": [oid[a] for a in mod.targets],
            "p_agent": mod.p_agent,
            "theta_agent": mod.theta_agent,
        },
    }
    solved = dict(zip(sol.free_ids, theta))
    rows = []
    for i in range(net.n_agents):
        if i in net.stubborn:
            rows.append((oid[i], "stubborn", float(net.opinions[i])))
        else:
            rows.append((oid[i], "persuadable", float(solved[i])))
    return payload, (("agent", "kind", "opinion"), rows)


def _cmd_centrality(args):
    net = _load(args)
    report = rank_all(net, workers=_threads(args))
    oid = net.original_ids
    payload = {
        "command": "centrality",
        "scores": {oid[a]: s for a, s in report.scores.items()},
        "kind": {oid[a]: k for a, k in report.kind.items()},
        "notes": list(report.notes),
        "ranking_stubborn": [oid[a] for a, _ in report.ranked("stubborn")],
        "ranking_persuadable": [oid[a] for a, _ in report.ranked("persuadable")],
    }
    if args.mixed_ranking:
        listing = report.ranked()
        payload["ranking"] = [oid[a] for a, _ in listing]
    else:
        listing = report.ranked("stubborn") + report.ranked("persuadable")
    rows = [
        (rank, oid[a], report.kind[a], score)
        for rank, (a, score) in enumerate(listing, start=1)
    ]
    return payload, (("rank", "agent", "kind", "score"), rows)


def _parse_objective(raw: str):
    if raw == "mean":
        return MeanShift()
    if raw.startswith("threshold:"):
        return ThresholdCount(float(raw.split(":", 1)[1]))
    raise ConfigError(f"unknown objective {raw!r}; use 'mean' or 'threshold:TAU'")


def _parse_pool(raw: str):
    if raw == "all":
        return AllCandidates()
    if raw.startswith("top:"):
        return TopHic(int(raw.split(":", 1)[1]))
    raise ConfigError(f"unknown pool {raw!r}; use 'all' or 'top:M'")


def _cmd_optimize(args):
    net = _load(args)
    sys_ = assemble(net)
    if args.p_agent is not None:
        p_agent = args.p_agent
    elif net.posting_rates is not None:
        p_agent = mean_rate_probability(net)
    else:
        raise ConfigError("pass --p-agent or provide posting rates to derive it")
    problem = PlacementProblem(
        k=args.budget,
        p_agent=p_agent,
        theta_agent=args.theta_agent,
        objective=_parse_objective(args.objective),
        pool=_parse_pool(args.pool),
    )
    orderings = {"hic": "hic", "outdeg": "out_degree", "rate": "posting_rate"}
    if args.method == "greedy":
        result = greedy_place(net, problem, sys=sys_, workers=_threads(args))
    else:
        result = baseline_place(net, problem, orderings[args.method], sys=sys_)
    oid = net.original_ids

    def summary(res):
        return {
            "targets": [oid[a] for a in res.targets],
            "objective_values": list(res.objective_values),
            "method": res.method,
        }

    payload = {
        "command": "optimize",
        "objective": args.objective,
        "p_agent": p_agent,
        "theta_agent": args.theta_agent,
        "fallback_iterations": list(result.fallback_iterations),
        **summary(result),
    }
    if args.baseline:
        payload["baselines"] = {
            name: summary(baseline_place(net, problem, name, sys=sys_))
            for name in dict.fromkeys(args.baseline)
        }
    if args.brute_force:
        payload["brute_force"] = summary(brute_force_place(net, problem, sys=sys_))
    rows = [(0, "", result.objective_values[0])]
    rows += [
        (j + 1, oid[t], result.objective_values[j + 1])
        for j, t in enumerate(result.targets)
    ]
    return payload, (("round", "target", "objective_value"), rows)


def _parse_schedule(raw: str) -> dynamics.ScheduleKind:
    kind, _, params = raw.partition(":")
    try:
        if kind == "constant":
            return dynamics.Constant(float(params))
        if kind == "power":
            c, tau, delta = (float(x) for x in params.split(","))
            return dynamics.PowerLaw(c, tau, delta)
    except ValueError:
        raise ConfigError(f"malformed schedule {raw!r}") from None
    raise ConfigError(
        f"unknown schedule {raw!r}; use 'constant:W' or 'power:C,TAU,DELTA'"
    )


def _cmd_simulate(args):
    net = _load(args)
    schedule = dynamics.StubbornnessSchedule.uniform(
        _parse_schedule(args.schedule), net.n_agents
    )
    verbalization = dynamics.Verbalization(args.verbalization)
    sample_times = None
    if args.sample_times is not None:
        sample_times = [int(x) for x in args.sample_times.split(",")]

    if args.init is None:
        initial = None if args.consensus else 0.5
    elif args.init == "agents":
        if any(v is None for v in net.opinions):
            raise ConfigError("--init agents needs an opinion for every agent")
        initial = [float(v) for v in net.opinions]
    else:
        initial = float(args.init)

    equilibrium = None
    if args.track_equilibrium:
        if not net.stubborn:
            raise ConfigError(
                "cannot track equilibrium on a stubborn-free network; "
                "use --consensus instead"
            )
        sys_ = assemble(net)
        sol = solve_equilibrium(sys_, net.stubborn_opinions())
        equilibrium = full_opinion_vector(net, sol)

    kwargs = dict(
        steps=args.steps,
        replicas=args.replicas,
        seed=args.seed,
        sample_every=args.sample_every,
        sample_times=sample_times,
        workers=_threads(args),
    )
    if args.consensus:
        trace = dynamics.consensus_run(
            net, schedule, verbalization=verbalization, initial=initial, **kwargs
        )
    else:
        trace = dynamics.run(
            net,
            schedule,
            verbalization,
            initial=0.5 if initial is None else initial,
            equilibrium=equilibrium,
            **kwargs,
        )

    oid = net.original_ids
    payload = {
        "command": "simulate",
        "seed": trace.seed,
        "replicas": trace.replicas,
        "steps": args.steps,
        "schedule": args.schedule,
        "verbalization": verbalization.value,
        "times": [int(t) for t in trace.times],
        "agents": [oid[a] for a in trace.free_ids],
        "mean": trace.mean,
        "variance": trace.variance,
        "dist_to_eq": trace.dist_to_eq,
        "centering_norm": trace.centering_norm,
    }
    rows = []
    for s, t in enumerate(trace.times):
        dist = "" if trace.dist_to_eq is None else trace.dist_to_eq[s]
        cent = "" if trace.centering_norm is None else trace.centering_norm[s]
        for q, agent in enumerate(trace.free_ids):
            rows.append(
                (
                    int(t),
                    oid[agent],
                    trace.mean[s, q],
                    trace.variance[s, q],
                    dist,
                    cent,
                )
            )
    header = ("t", "agent", "mean", "variance", "dist_to_eq", "centering_norm")
    return payload, (header, rows)


def _cmd_validate(args):
    net = _load(args)
    report = validate(net)
    oid = net.original_ids
    payload = {
        "command": "validate",
        "ok": report.ok,
        "n_agents": net.n_agents,
        "n_stubborn": len(net.stubborn),
        "row_sum_violations": {oid[a]: total for a, total in report.row_sum_violations},
        "unreachable": [oid[a] for a in report.unreachable_nonstubborn],
        "isolated_components": report.isolated_components,
    }
    rows = [("ok", "", report.ok)]
    rows += [("row_sum", oid[a], total) for a, total in report.row_sum_violations]
    rows += [("unreachable", oid[a], "") for a in report.unreachable_nonstubborn]
    rows.append(("isolated_components", "", report.isolated_components))
    return payload, (("check", "agent", "value"), rows)


def _parse_interval(raw: str, flag: str) -> tuple[float, float]:
    parts = raw.split(",")
    if len(parts) != 2:
        raise ConfigError(f"{flag} expects 'LO,HI', got {raw!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"{flag} expects numbers, got {raw!r}") from None


def _cmd_classify(args):
    net = load_network(args.edges, args.agents, delimiter=args.delimiter)
    low = _parse_interval(args.low, "--low")
    high = _parse_interval(args.high, "--high")
    missing = [net.original_ids[i] for i, v in enumerate(net.opinions) if v is None]
    if missing:
        raise ConfigError(
            f"classification needs an opinion for every agent; missing: "
            f"{', '.join(missing[:5])}" + ("..." if len(missing) > 5 else "")
        )
    stubborn, values = classify_stubborn(net.opinions, low, high)
    oid = net.original_ids
    payload = {
        "command": "classify-stubborn",
        "low": list(low),
        "high": list(high),
        "n_stubborn": len(stubborn),
        "stubborn": sorted(oid[a] for a in stubborn),
        "values": {oid[a]: v for a, v in values.items()},
    }
    rows = [
        (oid[i], float(net.opinions[i]), i in stubborn) for i in range(net.n_agents)
    ]
    return payload, (("agent", "opinion", "stubborn"), rows)


if __name__ == "__main__":
    sys.exit(main())
