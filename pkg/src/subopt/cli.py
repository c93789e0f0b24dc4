"""Command line entry point: ``subopt {gen,run,bench,brute}``.

Exit codes: 0 on success, 1 on configuration errors, 2 when some bench cells
failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import (
    ALGORITHMS,
    BenchCell,
    ConfigError,
    IngestError,
    InstanceSpec,
    generate_instance,
    open_trace,
    run_algorithm,
    run_bench,
)
from .exhaustive import brute_force_opt
from .oracle import RunLedger


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        parts.append("".join(cur))
    return parts


def parse_kind(text: str, flag: str) -> dict:
    """``"uniform:k=3"`` -> ``{"kind": "uniform", "k": 3}``; values are JSON when they parse."""
    kind, _, rest = text.partition(":")
    out = {"kind": kind.strip()}
    for item in _split_top(rest):
        if not item.strip():
            continue
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(flag, f"expected key=value, got {item!r}")
        out[key.strip()] = _value(val.strip())
    return out


def _instance(args) -> InstanceSpec:
    if getattr(args, "instance", None):
        try:
            data = json.loads(Path(args.instance).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("--instance", str(exc)) from None
        return InstanceSpec.from_dict(data)
    if args.objective is None or args.n is None:
        raise ConfigError("--objective", "give --instance or --objective, --constraint and --n")
    return InstanceSpec(parse_kind(args.objective, "--objective"),
                        parse_kind(args.constraint or "free", "--constraint"),
                        args.n, args.instance_seed)


def _algo_params(args) -> dict:
    params = {}
    if args.algo == "rep-sampling":
        params["preset"] = args.preset
        params["epsilon"] = args.epsilon
        for k in ("m", "phi1", "phi2"):
            if getattr(args, k) is not None:
                params[k] = getattr(args, k)
    if args.p is not None:
        params["p"] = args.p
    if args.iterations is not None:
        params["iterations"] = args.iterations
    if args.probability is not None:
        params["probability"] = args.probability
    return params


def _add_instance_flags(sp, seed_help="generator seed"):
    sp.add_argument("--instance", help="instance JSON file")
    sp.add_argument("--objective", help="objective kind with parameters, e.g. 'logdet:features=4'")
    sp.add_argument("--constraint", help="constraint kind with parameters, e.g. 'uniform:k=3'")
    sp.add_argument("--n", type=int, help="ground set size")
    sp.add_argument("--instance-seed", type=int, default=0, help=seed_help)


def _add_algo_flags(sp):
    sp.add_argument("--algo", choices=ALGORITHMS, default="rep-sampling")
    sp.add_argument("--preset", choices=["p-system", "p-extendible"], default="p-system")
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--m", type=int)
    sp.add_argument("--phi1", type=float)
    sp.add_argument("--phi2", type=float)
    sp.add_argument("--p", type=int, help="override the constraint's declared p")
    sp.add_argument("--iterations", type=int, help="repeated-greedy iterations")
    sp.add_argument("--probability", type=float, help="sample-greedy sampling probability")
    sp.add_argument("--seed", type=int, default=0, help="algorithm seed")
    sp.add_argument("--budget", type=int, help="stop after this many value queries")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subopt", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write an instance description")
    g.add_argument("--objective", required=True)
    g.add_argument("--constraint", default="free")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0, help="generator seed")
    g.add_argument("--id")
    g.add_argument("--out", help="output JSON path (stdout if omitted)")

    r = sub.add_parser("run", help="run one algorithm once")
    _add_instance_flags(r)
    _add_algo_flags(r)
    r.add_argument("--trace", help="JSON-lines trace path (.gz to compress)")
    r.add_argument("--out", help="result JSON path (stdout if omitted)")

    b = sub.add_parser("bench", help="run a benchmark plan")
    b.add_argument("--plan", help="plan JSON file: a list of cells")
    _add_instance_flags(b)
    _add_algo_flags(b)
    b.add_argument("--trials", type=int, default=1, help="number of seeds starting at --seed")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--no-timing", action="store_true", help="record wall time as 0")
    b.add_argument("--out", required=True, help="output prefix; writes .csv and .jsonl")

    br = sub.add_parser("brute", help="exhaustive optimum of a small instance")
    _add_instance_flags(br)
    br.add_argument("--out")
    return ap


def _emit(obj, dest):
    text = json.dumps(obj, indent=2)
    if dest:
        Path(dest).write_text(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen":
            spec = InstanceSpec(parse_kind(args.objective, "--objective"),
                                parse_kind(args.constraint, "--constraint"), args.n, args.seed, args.id)
            generate_instance(spec)
            _emit(spec.to_dict(), args.out)
            return 0
        if args.command == "run":
            spec = _instance(args)
            oracle, system = generate_instance(spec)
            emit, close = open_trace(args.trace) if args.trace else (None, None)
            try:
                if args.budget is not None:
                    res = run_bench([BenchCell(spec, args.algo, _algo_params(args), [args.seed], args.budget)],
                                    timing=False)
                    if res.failures:
                        raise RuntimeError(res.failures[0]["error"])
                    rec = res[0]
                    out = {"instance_id": rec.instance_id, "algorithm": rec.algorithm, "seed": rec.seed,
                           "value": rec.value, "budget": args.budget,
                           "ledger": {"value_queries": rec.value_queries, "value_rounds": rec.value_rounds,
                                      "indep_queries": rec.indep_queries, "indep_rounds": rec.indep_rounds}}
                else:
                    S, value, ledger = run_algorithm(oracle, system, args.algo, _algo_params(args), args.seed,
                                                     RunLedger(), emit)
                    out = {"instance_id": spec.instance_id, "algorithm": args.algo, "seed": args.seed,
                           "solution": sorted(S), "value": value, "ledger": ledger.snapshot()}
            finally:
                if close:
                    close()
            _emit(out, args.out)
            return 0
        if args.command == "bench":
            if args.plan:
                try:
                    plan = json.loads(Path(args.plan).read_text())
                except (OSError, json.JSONDecodeError) as exc:
                    raise ConfigError("--plan", str(exc)) from None
                if not isinstance(plan, list):
                    raise ConfigError("plan", "expected a list of cells")
                cells = [BenchCell.from_dict(c, f"plan[{i}]") for i, c in enumerate(plan)]
            else:
                seeds = list(range(args.seed, args.seed + args.trials))
                cells = [BenchCell(_instance(args), args.algo, _algo_params(args), seeds, args.budget)]
            res = run_bench(cells, args.out, workers=args.workers, timing=not args.no_timing)
            for f in res.failures:
                print(f"cell failed: {json.dumps(f)}", file=sys.stderr)
            print(f"{len(res)} records written to {args.out}.csv and {args.out}.jsonl", file=sys.stderr)
            return 2 if res.failures else 0
        if args.command == "brute":
            spec = _instance(args)
            oracle, system = generate_instance(spec)
            bf = brute_force_opt(oracle, system)
            _emit({"instance_id": spec.instance_id, "opt_set": sorted(bf.opt_set), "opt_value": bf.opt_value,
                   "feasible_count": bf.feasible_count}, args.out)
            return 0
    except (ConfigError, IngestError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
