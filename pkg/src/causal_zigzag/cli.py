"""Command-line interface: ``causal-zigzag <command> [options]``.

Exit codes: 0 on success, 2 on usage or input errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ._rng import chain_seed
from .ges import ges_run
from .graph import PDAG, format_graph, parse_graph
from .operators import count_operators
from .samplers import ZANELLA, ZIGZAG, Balancing, StuckError, occupation, read_trace, run
from .scoring import BicScore, DataMatrix, ScoreError, TargetDistribution
from .synthetic import synthetic_dataset


class UsageError(Exception):
    pass


# -- inputs ----------------------------------------------------------------


def _load_graph(path: str, names=None) -> PDAG:
    try:
        with open(path) as fh:
            g, found = parse_graph(fh.read())
    except (OSError, ValueError) as e:
        raise UsageError(f"cannot read graph {path}: {e}") from None
    if names is None:
        return g
    index = {nm: i for i, nm in enumerate(names)}
    unknown = [nm for nm in found if nm not in index]
    if unknown:
        raise UsageError(f"graph {path} names unknown vertices {unknown}")
    out = PDAG(len(names))
    for u, v in g.directed_edges():
        out.add_directed(index[found[u]], index[found[v]])
    for u, v in g.undirected_edges():
        out.add_undirected(index[found[u]], index[found[v]])
    return out


def _load_data(args) -> DataMatrix | None:
    if args.data and args.synthetic:
        raise UsageError("use either --data or --synthetic, not both")
    if args.data:
        try:
            return DataMatrix.from_csv(args.data)
        except (OSError, ValueError) as e:
            raise UsageError(str(e)) from None
    if args.synthetic:
        if args.n is None:
            raise UsageError("--synthetic needs --n")
        data, _ = synthetic_dataset(args.n, args.synthetic, args.density, args.data_seed)
        return data
    return None


def _target(args, data) -> TargetDistribution:
    if args.uniform:
        if data is not None:
            raise UsageError("--uniform takes no data")
        return TargetDistribution.uniform()
    if data is None:
        raise UsageError("a scored target needs --data or --synthetic (or pass --uniform)")
    if not args.beta > 0:
        raise UsageError("--beta must be positive")
    return TargetDistribution.scored(BicScore(data, args.penalty), args.beta)


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _chain_path(out: str, chain: int, chains: int) -> str:
    if chains == 1:
        return out
    if "{chain}" in out:
        return out.format(chain=chain)
    root, ext = os.path.splitext(out)
    return f"{root}.chain{chain}{ext}"


# -- commands --------------------------------------------------------------


def _sample_chain(job) -> dict:
    kind, start, target, g_fn, jumps, time, seed, chain, direction, stride, path, names, memo = job
    tr = run(kind, start, target, g_fn, max_jumps=jumps, max_time=time, seed=chain_seed(seed, chain),
             start_direction=direction, stride=stride, memo=memo)
    tr.header["seed"] = seed
    tr.header["chain"] = chain
    with open(path, "w") as fh:
        tr.write_jsonl(fh, names, stride)
    if jumps is not None:
        reason = "jumps" if tr.num_jumps == jumps else "absorbed"
    else:
        reason = "time" if tr.end_time == time else "absorbed"
    return {"chain": chain, "trace": path, "jumps": tr.num_jumps, "end_time": tr.end_time if math.isfinite(tr.end_time) else None,
            "final_edges": tr.edges[-1], "stop": reason}


def cmd_sample(args) -> int:
    if (args.jumps is None) == (args.time is None):
        raise UsageError("exactly one stop criterion is required: --jumps or --time")
    data = _load_data(args)
    target = _target(args, data)
    if data is not None:
        names = data.names
    elif args.n is not None:
        names = [str(v) for v in range(args.n)]
    else:
        raise UsageError("give --n for a uniform target")
    if data is not None and args.n is not None and args.n != data.p:
        raise UsageError("--n disagrees with the number of data columns")
    start = _load_graph(args.start, names) if args.start else PDAG(len(names))
    jobs = [(args.kind, start, target, args.g, args.jumps, args.time, args.seed, c, args.direction,
             args.stride, _chain_path(args.out, c, args.chains), names, None) for c in range(args.chains)]
    if args.chains == 1:
        results = [_sample_chain(jobs[0])]
    else:
        with ProcessPoolExecutor(min(args.chains, os.cpu_count() or 1)) as pool:
            results = list(pool.map(_sample_chain, jobs))
    print(json.dumps(results if args.chains > 1 else results[0]))
    return 0


def cmd_ges(args) -> int:
    data = _load_data(args)
    if data is None:
        raise UsageError("ges needs --data or --synthetic")
    start = _load_graph(args.start, data.names) if args.start else PDAG(data.p)
    traj = ges_run(data, args.penalty, start)
    lines = [{"header": {"command": "ges", "n": data.p, "penalty": args.penalty, "names": data.names,
                         "start": format_graph(start, data.names), "start_score": traj.start_score,
                         "steps": len(traj), "score": traj.score, "evaluations": traj.evaluations}}]
    g_score = traj.start_score
    for i, s in enumerate(traj.steps, 1):
        g_score += s.delta
        lines.append({"t": i, "kind": s.op.kind, "x": s.op.x, "y": s.op.y, "set": list(s.op.subset),
                      "edges": s.graph.num_edges, "logscore": g_score, "delta": s.delta, "phase": s.phase,
                      "graph": format_graph(s.graph, data.names)})
    text = "".join(json.dumps(rec) + "\n" for rec in lines)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.out:
        print(json.dumps({"steps": len(traj), "final_edges": traj.final.num_edges, "score": traj.score,
                          "evaluations": traj.evaluations}))
    return 0


def cmd_count(args) -> int:
    g = _load_graph(args.graph)
    print(json.dumps(count_operators(g).to_dict()))
    return 0


def cmd_enumerate(args) -> int:
    from .oracle import MAX_ENUMERATION_N, enumerate_mecs

    if not 0 <= args.n <= MAX_ENUMERATION_N:
        raise UsageError(f"enumerate supports 0 <= n <= {MAX_ENUMERATION_N}")
    cat = enumerate_mecs(args.n)
    sizes = cat.class_sizes
    hist: dict[int, int] = {}
    for s in sizes:
        hist[s] = hist.get(s, 0) + 1
    print(json.dumps({"n": args.n, "classes": len(cat), "dags": cat.num_dags, "largest_class": max(sizes),
                      "class_size_histogram": {str(k): hist[k] for k in sorted(hist)}}))
    return 0


def cmd_verify(args) -> int:
    from .oracle import verification_report

    if not 1 <= args.n <= 4:
        raise UsageError("verify supports 1 <= n <= 4")
    report = verification_report(args.n, seed=args.seed)
    print(json.dumps(report, indent=2))
    return 0 if report["ok"] else 1


def summarize_trace(tr, names, burn_in: float = 0.5, top: int = 5) -> dict:
    """Occupation summary; ``burn_in`` is the discarded fraction of the total time."""
    times = np.frombuffer(tr.times, dtype=float)
    end = tr.end_time
    if not math.isfinite(end):
        cut = times[-1]
    else:
        cut = burn_in * end
    occ = occupation(tr.graphs, times, end, cut)
    ranked = sorted(occ.items(), key=lambda kv: (-kv[1], kv[0].key()))
    logscore = {}
    for g, s in zip(tr.graphs, tr.logscores):
        logscore.setdefault(g, s)
    return {
        "jumps": tr.num_jumps,
        "end_time": end if math.isfinite(end) else None,
        "burn_in_time": float(cut),
        "states": len(occ),
        "top": [{"probability": p, "edges": g.num_edges, "logscore": logscore[g], "graph": format_graph(g, names)}
                for g, p in ranked[:top]],
        "edge_series": {"t": [float(t) for t in times], "edges": list(tr.edges)},
    }


def cmd_summarize(args) -> int:
    if not 0 <= args.burn_in < 1:
        raise UsageError("--burn-in must be in [0, 1)")
    try:
        with open(args.trace) as fh:
            tr, names = read_trace(fh)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read trace {args.trace}: {e}") from None
    print(json.dumps(summarize_trace(tr, names, args.burn_in, args.top)))
    return 0


def cmd_synth(args) -> int:
    data, dag = synthetic_dataset(args.n, args.N, args.density, args.seed)
    data.to_csv(args.out)
    if args.truth:
        with open(args.truth, "w") as fh:
            fh.write(format_graph(dag, data.names) + "\n")
    return 0


# -- parser ----------------------------------------------------------------


def _data_options(p):
    p.add_argument("--data", help="CSV file: header of names, one row per observation")
    p.add_argument("--synthetic", type=int, metavar="N", help="simulate N rows from a random linear-Gaussian SEM")
    p.add_argument("--n", type=int, help="number of variables (uniform target or synthetic data)")
    p.add_argument("--density", type=float, default=0.3, help="edge probability of the synthetic DAG")
    p.add_argument("--data-seed", type=int, default=0, help="seed of the synthetic dataset")
    p.add_argument("--penalty", type=_positive_float, default=1.0, help="BIC penalty multiplier")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="causal-zigzag", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run a Zig-Zag or Zanella chain and write a JSONL trace")
    p.add_argument("--kind", choices=[ZIGZAG, ZANELLA], default=ZIGZAG)
    p.add_argument("--uniform", action="store_true", help="uniform target over equivalence classes")
    _data_options(p)
    p.add_argument("--beta", type=float, default=1.0, help="inverse temperature of the scored target")
    p.add_argument("--g", choices=[b.value for b in Balancing], default="sqrt", help="balancing function")
    p.add_argument("--jumps", type=int, help="stop after this many jumps")
    p.add_argument("--time", type=_positive_float, help="stop at this simulated time")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stride", type=int, default=100, help="write the full graph every k-th event")
    p.add_argument("--start", help="start graph file (default: empty graph)")
    p.add_argument("--direction", type=int, choices=[1, -1], default=1, help="start direction (zigzag)")
    p.add_argument("--chains", type=int, default=1, help="independent chains, run concurrently")
    p.add_argument("--out", default="trace.jsonl", help="trace path; '{chain}' or a suffix marks chains")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("ges", help="greedy equivalence search")
    _data_options(p)
    p.add_argument("--start", help="start graph file (default: empty graph)")
    p.add_argument("--out", help="trajectory path (default: stdout)")
    p.set_defaults(func=cmd_ges)

    p = sub.add_parser("count", help="count Insert and Delete operators of a CPDAG")
    p.add_argument("graph", help="graph file")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("enumerate", help="enumerate all equivalence classes on n vertices")
    p.add_argument("n", type=int)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("verify", help="compare fast algorithms against brute-force oracles")
    p.add_argument("--n", type=int, default=3, help="largest number of vertices to check exhaustively")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("summarize", help="time-weighted occupation summary of a trace")
    p.add_argument("trace")
    p.add_argument("--burn-in", type=float, default=0.5, help="discarded fraction of the simulated time")
    p.add_argument("--top", type=int, default=5)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("synth", help="write a synthetic linear-Gaussian dataset as CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="also write the generating DAG here")
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (StuckError, ScoreError, OSError, ValueError, RuntimeError) as e:
        print(f"{parser.prog} {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
