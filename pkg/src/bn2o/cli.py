"""``bn2o`` command line: infer, approx, gen and partition-stats.

Exit codes: 0 success, 1 bad input (parse, validation, missing file, bad
flags), 2 evidence of probability zero, 3 engine size cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import Sequence

from bn2o import approx, engine, gen, oracle, quickscore
from bn2o.errors import BN2OError, CapExceeded, ParseError, ZeroEvidence
from bn2o.model import Network, parse_case, parse_network, serialize_network

EXIT_INPUT, EXIT_ZERO, EXIT_CAP = 1, 2, 3
COST_KEYS = ("multiplications", "additions", "distributions", "partition_calls", "savings")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load(args) -> tuple[Network, "engine.CaseEvidence"]:
    net = parse_network(_read(args.net))
    case = parse_case(_read(args.case), net)
    return net, case


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None


def _int_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN:MAX, got {text!r}") from None


def _fmt(p: float) -> str:
    return f"{p:.12g}"


def cmd_infer(args) -> int:
    net, case = _load(args)
    t0 = time.perf_counter()
    timings: dict[str, float] = {}
    costs = None
    if args.target is not None:
        target = net.disease_index.get(args.target)
        if target is None:
            raise ParseError(f"unknown disease {args.target}")
    else:
        target = None

    if args.engine == "recursive":
        if target is not None:
            single = engine.posterior_single(net, case, target)
            p_e, marginals, costs = single.p_evidence, {target: single.probability}, single.cost
        else:
            res = engine.posteriors(net, case)
            p_e, costs, timings = res.p_evidence, res.cost, res.timings
            marginals = dict(enumerate(res.marginals))
    elif args.engine == "quickscore":
        p_e, ms, costs = quickscore.quickscore_posteriors(net, case)
        marginals = dict(enumerate(ms))
    else:
        p_e, ms = oracle.enumerate_posteriors(net, case)
        if p_e == 0.0:
            raise ZeroEvidence("evidence has probability zero under this network")
        marginals = dict(enumerate(ms))
    if target is not None:
        marginals = {target: marginals[target]}
    timings.setdefault("total", time.perf_counter() - t0)

    cost_dict = {k: costs.as_dict()[k] for k in COST_KEYS} if costs is not None else None
    if args.json:
        report = {
            "p_evidence": p_e,
            "marginals": {net.diseases[i].id: p for i, p in sorted(marginals.items())},
            "costs": cost_dict,
        }
        print(json.dumps(report, indent=2))
    else:
        rows = sorted(marginals.items(), key=lambda kv: (-kv[1], net.diseases[kv[0]].id))
        for i, p in rows:
            print(f"{net.diseases[i].id}\t{_fmt(p)}")
        if args.costs:
            for k in COST_KEYS:
                print(f"# {k}\t{cost_dict[k] if cost_dict else 0}")
    if args.time:
        for phase, seconds in timings.items():
            print(f"time {phase}\t{seconds:.6f}s", file=sys.stderr)
    return 0


def _policy(args, net: Network) -> approx.Policy:
    if args.order.startswith("given:"):
        ids = _read(args.order[len("given:"):]).split()
        try:
            order = [net.finding_index[f] for f in ids]
        except KeyError as exc:
            raise ParseError(f"unknown finding {exc.args[0]} in given order") from None
        return approx.Policy.given(order)
    if args.order not in ("heuristic", "ascending", "descending"):
        raise ParseError(f"unknown order {args.order!r}")
    return approx.Policy(args.order, k=args.k)


def cmd_approx(args) -> int:
    net, case = _load(args)
    policy = _policy(args, net)
    trace = approx.run_incremental(net, case, policy, prior_mode=args.prior_mode)
    sys.stdout.write(trace.to_tsv(net))
    if args.metrics:
        sys.stdout.write("\n" + approx.settling_metrics(trace).to_tsv())
    return 0


def cmd_gen(args) -> int:
    net = gen.random_network(
        args.diseases,
        args.findings,
        args.parents[0],
        args.parents[1],
        prior_range=args.prior_range,
        c_range=args.c_range,
        leak_range=args.leak_range,
        seed=args.seed,
    )
    sys.stdout.write(serialize_network(net))
    return 0


def cmd_partition_stats(args) -> int:
    net, case = _load(args)
    res = engine.posteriors(net, case)
    print("remaining_findings\tpartition_sizes")
    for n, sizes in res.trace:
        print(f"{n}\t{','.join(map(str, sizes))}")
    print(f"total_savings\t{res.cost.savings}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bn2o", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("infer", help="posterior marginals for a case")
    p.add_argument("--net", required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--engine", choices=("recursive", "quickscore", "oracle"), default="recursive")
    p.add_argument("--target", help="report a single disease")
    p.add_argument("--costs", action="store_true", help="append arithmetic cost counters")
    p.add_argument("--json", action="store_true")
    p.add_argument("--time", action="store_true", help="wall-clock per phase on stderr")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("approx", help="incremental finding-by-finding trace")
    p.add_argument("--net", required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--order", default="heuristic", help="heuristic|ascending|descending|given:FILE")
    p.add_argument("--k", type=int, default=8, help="findings taken by ascending parent count before the heuristic")
    p.add_argument("--prior-mode", choices=("exact", "marginal"), default="marginal")
    p.add_argument("--metrics", action="store_true")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("gen", help="write a seeded random network")
    p.add_argument("--diseases", type=int, required=True)
    p.add_argument("--findings", type=int, required=True)
    p.add_argument("--parents", type=_int_range, required=True, metavar="MIN:MAX")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--prior-range", type=_range, default=(0.05, 0.95), metavar="LO:HI")
    p.add_argument("--c-range", type=_range, default=(0.05, 0.95), metavar="LO:HI")
    p.add_argument("--leak-range", type=_range, default=(0.0, 0.0), metavar="LO:HI")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("partition-stats", help="trace of partition sizes during exact inference")
    p.add_argument("--net", required=True)
    p.add_argument("--case", required=True)
    p.set_defaults(func=cmd_partition_stats)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    try:
        return args.func(args)
    except ZeroEvidence as exc:
        print(f"bn2o: {exc}", file=sys.stderr)
        return EXIT_ZERO
    except CapExceeded as exc:
        print(f"bn2o: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (BN2OError, OSError, ValueError) as exc:
        print(f"bn2o: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
