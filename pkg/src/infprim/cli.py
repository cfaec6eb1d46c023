"""Command-line entry point: ``infprim {gen,solve,fig2,oracle,bp}``.

Outputs go to ``--out`` or, when omitted, under ``$INFPRIM_OUT`` (default
the working directory).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .bp import BPParams, bp_run, marginal_to_belief
from .errors import InfprimError
from .experiments import ExperimentConfig, calibration_histogram, instance_seed, monotone_trend
from .ising import exhaustive_solve, read_instance, sk_fix, write_instance
from .protocol import parse_protocol, run_protocol

OUT_ENV = "INFPRIM_OUT"


def default_out(name: str) -> Path:
    return Path(os.environ.get(OUT_ENV, ".")) / name


def _comment(config: dict) -> str:
    return "config: " + json.dumps(config, sort_keys=True, default=str)


def cmd_gen(args) -> int:
    if args.n < 3:
        raise InfprimError("gen: n must be >= 3")
    out = Path(args.out) if args.out else default_out("instances")
    out.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(args.count - 1)))
    for k in range(args.count):
        write_instance(sk_fix(args.n, instance_seed(args.seed, k)), out / f"sk_fix_n{args.n}_{k:0{width}d}.ising")
    print(f"wrote {args.count} instances to {out}")
    return 0


def cmd_solve(args) -> int:
    problem = read_instance(args.instance)
    graph = parse_protocol(Path(args.protocol))
    seed = args.seed if args.seed is not None else graph.seed
    record = run_protocol(graph, problem, seed, args.workers)
    out = Path(args.out) if args.out else default_out("run")
    config = {"instance": str(args.instance), "protocol": str(args.protocol), "seed": record.seed}
    record.write(out, _comment(config))
    print(f"best energy {float(record.best_energy)!r} after {record.calls} primitive calls; record in {out}")
    return 0


def cmd_fig2(args) -> int:
    fields = {"instances": args.instances, "n": args.n, "reads": args.reads, "bins": args.bins,
              "seed": args.seed, "temperature": args.T, "tau": args.tau,
              "trotter_slices": args.slices, "backend": args.backend, "workers": args.workers}
    fields = {k: v for k, v in fields.items() if v is not None}
    cfg = ExperimentConfig.full_scale(**fields) if args.full_scale else ExperimentConfig(**fields)
    hist = calibration_histogram(cfg)
    out = Path(args.out) if args.out else default_out("fig2.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(hist.to_csv())
    ok, detail = monotone_trend(hist.error_fraction)
    print(f"histogram written to {out}; trend {'rising' if ok else 'not rising'} ({detail})")
    return 0


def cmd_oracle(args) -> int:
    problem = read_instance(args.instance)
    configs, e0 = exhaustive_solve(problem)
    out = Path(args.out) if args.out else default_out(Path(args.instance).stem + ".ground.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {_comment({'instance': str(args.instance), 'n': problem.n})}",
             "index,energy," + ",".join(f"s{i}" for i in range(problem.n))]
    lines += [f"{k},{float(e0)!r}," + ",".join(str(int(v)) for v in c) for k, c in enumerate(configs)]
    out.write_text("\n".join(lines) + "\n")
    print(f"{len(configs)} ground configuration(s) at energy {float(e0)!r}; written to {out}")
    return 0


def cmd_bp(args) -> int:
    problem = read_instance(args.instance)
    params = BPParams(T=args.T, max_iters=args.max_iters, damping=args.damping, tolerance=args.tolerance)
    marg = bp_run(problem, params)
    out = Path(args.out) if args.out else default_out(Path(args.instance).stem + ".marginals.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    config = {"instance": str(args.instance), "T": params.T, "max_iters": params.max_iters,
              "damping": params.damping, "tolerance": params.tolerance}
    out.write_text(marg.to_csv(marginal_to_belief(marg), _comment(config)))
    print(f"converged={marg.converged} after {marg.iterations} iterations; written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infprim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate SK instances with the last spin fixed down")
    p.add_argument("--n", type=int, default=12, help="SK size before fixing (instances have n-1 spins)")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="run a protocol file on an instance")
    p.add_argument("instance")
    p.add_argument("protocol")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output directory for events.jsonl, summary.csv, best.txt")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("fig2", help="calibration histogram of P against ground-state agreement")
    p.add_argument("--instances", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--reads", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--T", type=float)
    p.add_argument("--tau", type=int)
    p.add_argument("--slices", type=int)
    p.add_argument("--backend", choices=("piqa", "sa", "bp"))
    p.add_argument("--workers", type=int)
    p.add_argument("--full-scale", action="store_true", help="1500 instances, n=17, 1001 reads")
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("oracle", help="exhaustive ground states of an instance")
    p.add_argument("instance")
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bp", help="belief-propagation marginals of an instance")
    p.add_argument("instance")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--damping", type=float, default=0.3)
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(func=cmd_bp)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InfprimError, OSError) as exc:
        print(f"infprim {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
