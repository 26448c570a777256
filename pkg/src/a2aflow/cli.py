"""Command-line entry point.

Subcommands: gen, solve, routes, bound, compile, layers, eval, compare,
bench. Every command that writes an artifact also writes a sidecar
`<artifact>.manifest.json` recording the argument vector, seed, version, and
sha256 digests of inputs and outputs, so runs can be reproduced exactly.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

from . import __version__
from .graphs import (GraphError, augment_host_bottleneck, diameter,
                     gen_complete_bipartite, gen_de_bruijn, gen_gen_kautz,
                     gen_hypercube, gen_random_regular,
                     gen_shortest_path_expander, gen_torus,
                     gen_twisted_hypercube, load_graph, puncture, save_graph)
from .lp import LpOptions

TOPOS = ("genkautz", "debruijn", "torus", "hypercube", "thypercube",
         "bipartite", "rrg", "spx")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(args, inputs: list[str], outputs: list[str],
                    started: float) -> None:
    if not outputs:
        return
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:],
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "inputs": {p: _sha256(p) for p in inputs if os.path.exists(p)},
        "outputs": {p: _sha256(p) for p in outputs if os.path.exists(p)},
        "wall_clock_s": time.time() - started,
    }
    with open(outputs[0] + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def _lp_options(args) -> LpOptions:
    return LpOptions(solver=args.solver)


def _parse_dims(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dims {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="a2a",
        description="All-to-all schedule synthesis for direct-connect "
                    "topologies")
    ap.add_argument("--version", action="version",
                    version=f"%(prog)s {__version__}")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--solver", default="external",
                    choices=("external", "reference"))
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a topology")
    g.add_argument("--topo", required=True, choices=TOPOS)
    g.add_argument("--n", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--k", type=int, help="hypercube dimension")
    g.add_argument("--dims", type=_parse_dims)
    g.add_argument("--eps", type=float, default=0.01)
    g.add_argument("--augment-host", type=float, default=None,
                   metavar="CAP", help="3-way host/NIC split at capacity CAP")
    g.add_argument("--puncture", default=None, metavar="MODE:COUNT",
                   help="remove COUNT random edges or nodes")
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="solve an MCF formulation")
    s.add_argument("--algo", required=True,
                   choices=("link", "decomp", "ts", "path"))
    s.add_argument("--graph", required=True)
    s.add_argument("--lmax", type=int, default=None)
    s.add_argument("--paths", default="disjoint",
                   help="path source for --algo path: disjoint|bounded|FILE")
    s.add_argument("--force", action="store_true")
    s.add_argument("--out", default=None)

    r = sub.add_parser("routes", help="compute routes / path sets")
    r.add_argument("--algo", required=True,
                   choices=("extp", "pmcf", "sssp", "ewsp", "dor", "ilp",
                            "lasp"))
    r.add_argument("--graph", required=True)
    r.add_argument("--alpha", type=float, default=0.0)
    r.add_argument("--out", required=True)

    b = sub.add_parser("bound", help="lower bounds")
    b.add_argument("--n", type=int)
    b.add_argument("--d", type=int)
    b.add_argument("--graph", default=None)

    c = sub.add_parser("compile", help="compile a schedule")
    c.add_argument("--mode", required=True, choices=("ts", "path"))
    c.add_argument("--graph", required=True)
    c.add_argument("--sol", required=True,
                   help="solution JSON (ts) or route JSON (path)")
    c.add_argument("--m", type=float, default=1.0, help="shard bytes")
    c.add_argument("--qmax", type=int, default=1024)
    c.add_argument("--out", required=True)

    ly = sub.add_parser("layers", help="virtual-channel layering")
    ly.add_argument("--graph", required=True)
    ly.add_argument("--routes", required=True)
    ly.add_argument("--max-layers", type=int, default=8)
    ly.add_argument("--out", default=None)

    e = sub.add_parser("eval", help="replay / evaluate a schedule")
    e.add_argument("--graph", required=True)
    e.add_argument("--sched", default=None, help="XML schedule (ts mode)")
    e.add_argument("--routes", default=None, help="route JSON (path mode)")
    e.add_argument("--m", type=float, default=1.0)
    e.add_argument("--b", type=float, default=1.0)
    e.add_argument("--sync", type=float, default=0.0)

    cp = sub.add_parser("compare", help="compare topologies vs lower bound")
    cp.add_argument("--topos", required=True,
                    help="comma list, e.g. genkautz,torus")
    cp.add_argument("--n-range", required=True, type=_parse_dims)
    cp.add_argument("--d", type=int, required=True)
    cp.add_argument("--algo", default="decomp")
    cp.add_argument("--format", default="json", choices=("json", "csv"))
    cp.add_argument("--out", default=None)

    bn = sub.add_parser("bench", help="algorithm runtime scaling")
    bn.add_argument("--n-range", required=True, type=_parse_dims)
    bn.add_argument("--d", type=int, required=True)
    bn.add_argument("--algos", default="link,decomp")
    bn.add_argument("--timeout", type=float, default=600.0)
    bn.add_argument("--format", default="json", choices=("json", "csv"))
    bn.add_argument("--out", default=None)
    return ap


def _cmd_gen(args) -> list[str]:
    topo = args.topo
    if topo == "genkautz":
        g = gen_gen_kautz(args.n, args.d)
    elif topo == "debruijn":
        g = gen_de_bruijn(args.n, args.d)
    elif topo == "torus":
        if not args.dims:
            raise GraphError("torus needs --dims")
        g = gen_torus(args.dims)
    elif topo == "hypercube":
        g = gen_hypercube(args.k if args.k else args.d)
    elif topo == "thypercube":
        g = gen_twisted_hypercube(args.k if args.k else args.d)
    elif topo == "bipartite":
        g = gen_complete_bipartite(args.n)
    elif topo == "rrg":
        g = gen_random_regular(args.n, args.d, seed=args.seed)
    else:
        g = gen_shortest_path_expander(args.n, args.d, seed=args.seed,
                                       eps=args.eps)
    if args.puncture:
        mode, count = args.puncture.split(":")
        g = puncture(g, mode, int(count), seed=args.seed)
    if args.augment_host is not None:
        g, _ = augment_host_bottleneck(g, args.augment_host)
    save_graph(g, args.out)
    print(f"wrote {args.out}: n={g.n} edges={g.num_edges}")
    return [args.out]


def _cmd_solve(args) -> list[str]:
    from . import mcf
    from .paths import disjoint_paths, enum_paths_bounded, load_routes

    g = load_graph(args.graph)
    opts = _lp_options(args)
    if args.algo == "link":
        sol = mcf.mcf_link(g, options=opts, force=args.force)
        print(f"F = {sol.F:.9g}")
    elif args.algo == "decomp":
        sol = mcf.mcf_decomposed(g, workers=args.workers, options=opts)
        print(f"F = {sol.F:.9g}")
    elif args.algo == "ts":
        lmax = args.lmax if args.lmax else diameter(g)
        sol = mcf.mcf_timestepped(g, lmax, options=opts)
        print(f"l_max = {lmax}, sum U_t = {sol.total_utilization:.9g}")
    else:
        if args.paths == "disjoint":
            ps = disjoint_paths(g)
        elif args.paths == "bounded":
            ps = enum_paths_bounded(g, diameter(g) + 1)
        else:
            ps = load_routes(args.paths)
        F, wps = mcf.mcf_path(g, ps, options=opts)
        print(f"F = {F:.9g}")
        if args.out:
            from .paths import save_routes
            save_routes(wps, args.out)
            return [args.out]
        return []
    if args.out:
        mcf.save_solution(sol, args.out)
        return [args.out]
    return []


def _cmd_routes(args) -> list[str]:
    from . import mcf, paths

    g = load_graph(args.graph)
    opts = _lp_options(args)
    algo = args.algo
    if algo == "extp":
        sol = mcf.mcf_decomposed(g, workers=args.workers, options=opts)
        out = paths.extract_widest_paths(g, sol)
    elif algo == "pmcf":
        _, out = mcf.mcf_path(g, paths.disjoint_paths(g), options=opts)
    elif algo == "sssp":
        out = paths.sssp_routes(g, seed=args.seed)
    elif algo == "ewsp":
        out = paths.ewsp_routes(g)
    elif algo == "dor":
        out = paths.dor_routes(g)
    elif algo == "lasp":
        out = paths.load_aware_sp(g, seed=args.seed)
    else:
        out, load, gap = paths.ilp_min_congestion(
            g, paths.disjoint_paths(g), alpha=args.alpha, options=opts)
        print(f"max load = {load:.9g} (gap {gap:.3g})")
    max_load, _ = paths.eval_link_load(g, out)
    print(f"max normalized link load = {max_load:.9g}")
    paths.save_routes(out, args.out)
    return [args.out]


def _cmd_bound(args) -> list[str]:
    from .bounds import bound_report, graph_distance_bound

    doc = {}
    if args.graph:
        g = load_graph(args.graph)
        doc["graph_distance_bound"] = graph_distance_bound(g)
        if args.d and not args.n:
            args.n = g.n
    if args.n and args.d:
        doc.update(bound_report(args.d, args.n).as_dict())
    if not doc:
        raise GraphError("bound needs --n and --d, or --graph")
    print(json.dumps(doc, indent=1))
    return []


def _cmd_compile(args) -> list[str]:
    from .mcf import load_solution
    from .schedule import (compile_path_schedule, compile_timestep_schedule,
                           emit_schedule_xml)

    g = load_graph(args.graph)
    if args.mode == "ts":
        ts = load_solution(args.sol, g)
        sched = compile_timestep_schedule(g, ts, m=args.m, q_max=args.qmax)
        emit_schedule_xml(sched, args.out)
        print(f"wrote {args.out}: nsteps={sched.nsteps} Q={sched.Q}")
        return [args.out]
    from .paths import load_routes
    wps = load_routes(args.sol)
    routes, sched = compile_path_schedule(g, wps, m=args.m, q_max=args.qmax)
    emit_schedule_xml(sched, args.out)
    routes_out = args.out + ".routes.json"
    with open(routes_out, "w") as fh:
        json.dump({"routes": routes}, fh, indent=1)
        fh.write("\n")
    print(f"wrote {args.out} (+{routes_out}): Q={sched.Q} "
          f"routes={len(routes)}")
    return [args.out, routes_out]


def _cmd_layers(args) -> list[str]:
    from .deadlock import lash_sequential, verify_layers
    from .paths import RouteTable, load_routes

    g = load_graph(args.graph)
    wps = load_routes(args.routes)
    table = RouteTable(routes={})
    for (s, d), plist in wps.paths.items():
        if len(plist) != 1:
            raise GraphError(
                f"layering needs single-path routes; ({s},{d}) has "
                f"{len(plist)}")
        table.routes[(s, d)] = plist[0][0]
    assignment = lash_sequential(g, table, max_layers=args.max_layers)
    ok, cert = verify_layers(g, table, assignment)
    print(f"layers = {assignment.num_layers}, verified = {ok}")
    if not ok:
        raise GraphError(f"layer verification failed: {cert}")
    if args.out:
        doc = {f"{s}-{d}": layer
               for (s, d), layer in sorted(assignment.layers.items())}
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        return [args.out]
    return []


def _cmd_eval(args) -> list[str]:
    from .evaluate import eval_path_alltoall, replay_timestep_schedule

    g = load_graph(args.graph)
    if args.sched:
        from .schedule import parse_schedule_xml
        sched = parse_schedule_xml(args.sched)
        T, ok = replay_timestep_schedule(g, sched, m=args.m, b=args.b,
                                         sync_latency=args.sync)
        print(f"T = {T:.9g}, delivered = {ok}")
    elif args.routes:
        from .paths import load_routes
        wps = load_routes(args.routes)
        T = eval_path_alltoall(g, wps, m=args.m, b=args.b)
        print(f"T = {T:.9g}")
    else:
        raise GraphError("eval needs --sched or --routes")
    return []


def _gen_topo_for_compare(topo: str, n: int, d: int, seed: int):
    if topo == "genkautz":
        return gen_gen_kautz(n, d)
    if topo == "debruijn":
        return gen_de_bruijn(n, d)
    if topo == "torus":
        side = round(n ** 0.5)
        if side * side != n:
            raise GraphError(f"torus in compare needs square n, got {n}")
        return gen_torus([side, side])
    if topo == "rrg":
        return gen_random_regular(n, d, seed=seed)
    raise GraphError(f"unsupported compare topology {topo!r}")


def _emit_rows(rows: list[dict], fmt: str, out: str | None) -> list[str]:
    if fmt == "csv":
        keys = sorted({k for r in rows for k in r})
        target = open(out, "w", newline="") if out else sys.stdout
        w = csv.DictWriter(target, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)
        if out:
            target.close()
    else:
        text = "\n".join(json.dumps(r) for r in rows) + "\n"
        if out:
            with open(out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    return [out] if out else []


def _cmd_compare(args) -> list[str]:
    from .evaluate import compare_topologies

    entries = []
    for topo in args.topos.split(","):
        for n in args.n_range:
            try:
                entries.append((f"{topo}-{n}",
                                _gen_topo_for_compare(topo, n, args.d,
                                                      args.seed)))
            except GraphError as ex:
                print(f"skipping {topo} n={n}: {ex}", file=sys.stderr)
    reports = compare_topologies(entries, d=args.d, algo=args.algo,
                                 workers=args.workers,
                                 options=_lp_options(args))
    return _emit_rows([r.as_dict() for r in reports], args.format, args.out)


def _cmd_bench(args) -> list[str]:
    from .evaluate import bench_runtimes

    rows = bench_runtimes(args.n_range, args.d, args.algos.split(","),
                          workers=args.workers, timeout_s=args.timeout)
    return _emit_rows(rows, args.format, args.out)


_COMMANDS = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "routes": _cmd_routes,
    "bound": _cmd_bound,
    "compile": _cmd_compile,
    "layers": _cmd_layers,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    inputs = [getattr(args, name, None)
              for name in ("graph", "sol", "routes", "sched")]
    try:
        outputs = _COMMANDS[args.command](args)
    except Exception as ex:   # noqa: BLE001 - CLI boundary
        print(f"error: {ex}", file=sys.stderr)
        return 1
    _write_manifest(args, [p for p in inputs if p], outputs, started)
    return 0


if __name__ == "__main__":
    sys.exit(main())
