"""Evaluate schedules, path sets, and topologies.

Replay uses a store-and-forward step model for link schedules and a
cut-through fluid model for path schedules. Topology comparisons report
all-to-all time against the analytical lower bound.
"""
from __future__ import annotations

import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor, TimeoutError as FuturesTimeout
from dataclasses import dataclass, field

import numpy as np

from .bounds import alltoall_time_lower_bound, graph_distance_bound
from .graphs import Digraph, gen_gen_kautz
from .lp import LpOptions

__all__ = [
    "EvalError",
    "EvalReport",
    "replay_timestep_schedule",
    "eval_path_alltoall",
    "compare_topologies",
    "bench_runtimes",
]


class EvalError(RuntimeError):
    pass


@dataclass
class EvalReport:
    label: str
    n: int
    algo: str
    alltoall_time: float            # 1/F equivalent, in units of m/b
    lower_bound: float
    ratio: float
    runtime_s: float
    F: float | None = None
    extra: dict = field(default_factory=dict)

    def throughput(self, m: float, b: float) -> float:
        return (self.n - 1) * m / (self.alltoall_time * m / b)

    def as_dict(self) -> dict:
        return {"label": self.label, "n": self.n, "algo": self.algo,
                "alltoall_time": self.alltoall_time,
                "lower_bound": self.lower_bound, "ratio": self.ratio,
                "runtime_s": self.runtime_s, "F": self.F, **self.extra}


def replay_timestep_schedule(
    g: Digraph,
    sched,
    m: float = 1.0,
    b: float = 1.0,
    sync_latency: float = 0.0,
) -> tuple[float, bool]:
    """Simulate a link schedule; returns (completion time, delivered).

    Store-and-forward: a step costs max over links of bytes/(cap*b), plus
    sync_latency. Verifies that every chunk sent is present at its source at
    the start of the step and that each shard arrives at its destination
    exactly once.
    """
    if sched.mode != "ts":
        raise EvalError("replay_timestep_schedule expects a ts-mode schedule")
    if g.n != sched.n:
        raise EvalError(f"graph has {g.n} nodes, schedule says {sched.n}")
    chunk_bytes = m / sched.Q
    # holdings[node][(s,d)] = set of chunk ids present
    holdings = [defaultdict(set) for _ in range(g.n)]
    for s in range(g.n):
        for d in range(g.n):
            if s != d:
                holdings[s][(s, d)] = set(range(sched.Q))
    arrivals: dict[tuple[int, int, int], int] = defaultdict(int)
    by_step = defaultdict(list)
    for ins in sched.instructions:
        by_step[ins.t].append(ins)
    eidx = g.edge_index
    T = 0.0
    for t in range(sched.nsteps):
        link_bytes = defaultdict(float)
        incoming = []
        for ins in by_step.get(t, ()):
            if (ins.src, ins.dst) not in eidx:
                raise EvalError(f"step {t}: no link {ins.src}->{ins.dst}")
            chunks = range(ins.c0, ins.c1)
            have = holdings[ins.src][(ins.s, ins.d)]
            missing = [c for c in chunks if c not in have]
            if missing:
                raise EvalError(
                    f"step {t}: node {ins.src} sends chunk {missing[0]} of "
                    f"shard ({ins.s},{ins.d}) it does not hold"
                )
            link_bytes[(ins.src, ins.dst)] += (ins.c1 - ins.c0) * chunk_bytes
            incoming.append(ins)
        step_time = 0.0
        for (u, v), bts in link_bytes.items():
            cap = g.capacities[eidx[(u, v)]]
            step_time = max(step_time, bts / (cap * b))
        T += step_time + sync_latency
        for ins in incoming:
            tgt = holdings[ins.dst][(ins.s, ins.d)]
            for c in range(ins.c0, ins.c1):
                tgt.add(c)
                if ins.dst == ins.d:
                    arrivals[(ins.s, ins.d, c)] += 1
    # transpose check: every chunk of every shard at its destination, once
    for s in range(g.n):
        for d in range(g.n):
            if s == d:
                continue
            for c in range(sched.Q):
                got = arrivals[(s, d, c)]
                if got == 0:
                    raise EvalError(
                        f"shard ({s},{d}) chunk {c} never delivered")
                if got > 1:
                    raise EvalError(
                        f"shard ({s},{d}) chunk {c} delivered {got} times")
    return T, True


def eval_path_alltoall(g: Digraph, wps, m: float = 1.0,
                       b: float = 1.0) -> float:
    """Completion time of a path schedule in the cut-through fluid model."""
    from .paths import eval_link_load

    for (s, d), plist in wps.paths.items():
        if sum(w for _, w in plist) <= 0:
            raise EvalError(f"commodity ({s},{d}) has zero total weight")
    max_load, _ = eval_link_load(g, wps)
    return max_load * m / b


def _solve_time(g: Digraph, algo: str, workers=None,
                options: LpOptions | None = None) -> tuple[float, float]:
    """(alltoall time 1/F or max load, F or None) for one algorithm."""
    from .mcf import mcf_decomposed, mcf_link, mcf_path
    from .paths import disjoint_paths, eval_link_load, sssp_routes

    if algo == "decomp":
        F = mcf_decomposed(g, workers=workers, options=options,
                           want_flows=False).F
        return 1.0 / F, F
    if algo == "link":
        F = mcf_link(g, options=options, force=True).F
        return 1.0 / F, F
    if algo == "pmcf-disjoint":
        F, _ = mcf_path(g, disjoint_paths(g), options=options)
        return 1.0 / F, F
    if algo == "sssp":
        load, _ = eval_link_load(g, sssp_routes(g))
        return load, None
    raise EvalError(f"unknown algorithm {algo!r}")


def compare_topologies(
    entries: list[tuple[str, Digraph]],
    d: int,
    algo: str = "decomp",
    workers=None,
    options: LpOptions | None = None,
) -> list[EvalReport]:
    """All-to-all time and bound ratio per labelled topology.

    Generator failures are recorded as reports with NaN times rather than
    aborting the sweep.
    """
    reports = []
    for label, g in entries:
        t0 = time.perf_counter()
        try:
            tval, F = _solve_time(g, algo, workers=workers, options=options)
        except Exception as ex:   # noqa: BLE001 - sweep must survive
            reports.append(EvalReport(label=label, n=g.n, algo=algo,
                                      alltoall_time=float("nan"),
                                      lower_bound=float("nan"),
                                      ratio=float("nan"),
                                      runtime_s=time.perf_counter() - t0,
                                      extra={"error": str(ex)}))
            continue
        lb = max(alltoall_time_lower_bound(d, g.n), graph_distance_bound(g))
        reports.append(EvalReport(
            label=label, n=g.n, algo=algo, alltoall_time=tval,
            lower_bound=lb, ratio=tval / lb,
            runtime_s=time.perf_counter() - t0, F=F))
    return reports


def _bench_task(algo: str, n: int, d: int) -> float:
    from .mcf import mcf_decomposed, mcf_link, mcf_path
    from .paths import (disjoint_paths, enum_paths_bounded, eval_link_load,
                        ilp_min_congestion, sssp_routes)

    g = gen_gen_kautz(n, d)
    t0 = time.perf_counter()
    if algo == "link":
        mcf_link(g, force=True)
    elif algo == "decomp":
        mcf_decomposed(g, workers=1)
    elif algo == "pmcf-disjoint":
        mcf_path(g, disjoint_paths(g))
    elif algo == "sssp":
        sssp_routes(g)
    elif algo == "ilp":
        _, _, _ = ilp_min_congestion(g, disjoint_paths(g), alpha=0.1)
    else:
        raise EvalError(f"unknown algorithm {algo!r}")
    return time.perf_counter() - t0


def bench_runtimes(
    n_list: list[int],
    d: int,
    algos: list[str],
    workers: int | None = None,
    timeout_s: float = 600.0,
) -> list[dict]:
    """Wall-clock per (algo, n) on generalized Kautz graphs.

    Each run executes in a worker process so timeouts can be enforced;
    timed-out runs are recorded with runtime None.
    """
    rows = []
    for algo in algos:
        for n in n_list:
            with ProcessPoolExecutor(max_workers=1) as pool:
                fut = pool.submit(_bench_task, algo, n, d)
                try:
                    rt = fut.result(timeout=timeout_s)
                    rows.append({"algo": algo, "n": n, "d": d,
                                 "runtime_s": rt, "timeout": False})
                except FuturesTimeout:
                    for p in pool._processes.values():
                        p.terminate()
                    rows.append({"algo": algo, "n": n, "d": d,
                                 "runtime_s": None, "timeout": True})
                except Exception as ex:   # noqa: BLE001
                    rows.append({"algo": algo, "n": n, "d": d,
                                 "runtime_s": None, "timeout": False,
                                 "error": str(ex)})
    return rows
