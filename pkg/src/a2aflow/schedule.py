"""Lower flow solutions to executable chunked schedules.

Two lowerings: time-stepped solutions become per-step link sends on the
time-expanded graph, and weighted path sets become chunk-to-route
assignments. Both quantize fractional rates into integer chunk counts and
serialize to a small XML dialect.
"""
from __future__ import annotations

import math
import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from fractions import Fraction

from .graphs import Digraph

__all__ = [
    "Chunking",
    "ChunkedSchedule",
    "Instruction",
    "ScheduleError",
    "quantize_flows",
    "compile_timestep_schedule",
    "compile_path_schedule",
    "emit_schedule_xml",
    "parse_schedule_xml",
]

DEFAULT_Q_MAX = 1024


class ScheduleError(RuntimeError):
    pass


@dataclass(frozen=True)
class Chunking:
    """Integer chunk counts approximating fractional rates at denominator Q."""

    Q: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.Q < 1 or any(c < 0 for c in self.counts):
            raise ScheduleError("invalid chunking")


@dataclass(frozen=True)
class Instruction:
    """One send: chunks [c0, c1) of shard (s, d) cross src->dst at step t.

    In path mode `dst` holds a route id instead of a next-hop node and t is 0.
    """

    t: int
    src: int
    dst: int
    s: int
    d: int
    c0: int
    c1: int


@dataclass
class ChunkedSchedule:
    n: int
    nsteps: int
    chunk_bytes: float
    Q: int
    mode: str                       # "ts" or "path"
    instructions: list[Instruction] = field(default_factory=list)


def _as_fraction(x, q_max: int) -> Fraction | None:
    f = Fraction(x).limit_denominator(q_max)
    return f if abs(float(f) - x) <= 1e-9 else None


def quantize_flows(rates, q_max: int = DEFAULT_Q_MAX) -> Chunking:
    """Integer chunk counts for rates that sum to 1.

    Uses the exact common denominator when the rates are rationals whose LCM
    of denominators fits in q_max; otherwise rounds at Q = q_max and repairs
    the total with largest-remainder adjustments. A positive rate never gets
    0 chunks: it is bumped to 1 (with a warning) and the excess is taken from
    the largest counts.
    """
    rates = list(rates)
    if not rates:
        raise ScheduleError("no rates to quantize")
    if any(r <= 0 or r > 1 + 1e-12 for r in rates):
        raise ScheduleError(f"rates must lie in (0, 1]: {rates}")
    if q_max < 1:
        raise ScheduleError("q_max must be >= 1")
    fracs = [_as_fraction(r, q_max) for r in rates]
    if all(f is not None for f in fracs):
        Q = 1
        for f in fracs:
            Q = Q * f.denominator // math.gcd(Q, f.denominator)
        if Q <= q_max:
            counts = [int(f * Q) for f in fracs]
            if sum(counts) == Q:
                return Chunking(Q=Q, counts=tuple(counts))
    return Chunking(Q=q_max, counts=_counts_at(rates, q_max))


def _counts_at(rates, Q: int) -> tuple[int, ...]:
    """Integer counts summing to Q, largest-remainder rounded, none zero."""
    exact = [r * Q for r in rates]
    counts = [int(round(e)) if abs(e - round(e)) <= 1e-9 else int(e)
              for e in exact]
    short = Q - sum(counts)
    order = sorted(range(len(rates)), key=lambda i: exact[i] - counts[i],
                   reverse=short > 0)
    step = 1 if short > 0 else -1
    for i in order[:abs(short)]:
        counts[i] += step
    bumped = [i for i, c in enumerate(counts) if c == 0]
    if bumped:
        warnings.warn(
            f"{len(bumped)} rate(s) quantized to 0 chunks at Q={Q}; "
            "bumping to 1", stacklevel=3
        )
        for i in bumped:
            counts[i] = 1
            j = max(range(len(counts)), key=lambda k: counts[k])
            counts[j] -= 1
    if min(counts) < 1 or sum(counts) != Q:
        raise ScheduleError("quantization repair failed; increase q_max")
    return tuple(counts)


# ---------------------------------------------------------------------------
# time-stepped lowering

def _decompose_trajectories(g: Digraph, ts, ci: int):
    """Split one commodity's time-expanded flow into weighted trajectories.

    A trajectory is a list of (t, edge) hops from the source at step 0 to the
    destination; waiting in a node buffer between hops is implicit. Greedy
    peeling consumes every transport value exactly (flow conservation on the
    time-expanded DAG guarantees a source-to-destination path while any
    residual remains).
    """
    com = ts.commodities[ci]
    T = ts.l_max
    residual = {
        (e, t): v for (c, e, t), v in ts.flows.items() if c == ci and v > 1e-12
    }
    out_by_node: dict[int, list] = {}
    for (e, t) in residual:
        u = g.edges[e][0]
        out_by_node.setdefault(u, []).append((t, e))
    for u in out_by_node:
        out_by_node[u].sort()
    def find_path():
        # earliest-departure DFS with backtracking; waiting is free, so the
        # state is (node, earliest usable step)
        dead = set()

        def dfs(node, t_now, hops):
            if node == com.dst:
                return hops
            if (node, t_now) in dead:
                return None
            for (t, e) in out_by_node.get(node, ()):
                if t >= t_now and residual.get((e, t), 0.0) > 1e-12:
                    got = dfs(g.edges[e][1], t + 1, hops + [(t, e)])
                    if got is not None:
                        return got
            dead.add((node, t_now))
            return None

        return dfs(com.src, 0, [])

    trajectories = []
    remaining = 1.0
    while remaining > 1e-9:
        hops = find_path()
        if hops is None:
            raise ScheduleError(
                f"trajectory decomposition stuck for commodity "
                f"({com.src},{com.dst}); residual {remaining:.3g}"
            )
        w = min(remaining, min(residual[(e, t)] for t, e in hops))
        for (t, e) in hops:
            residual[(e, t)] -= w
        trajectories.append((list(hops), w))
        remaining -= w
    return trajectories


def compile_timestep_schedule(
    g: Digraph,
    ts,
    m: float = 1.0,
    q_max: int = DEFAULT_Q_MAX,
) -> ChunkedSchedule:
    """Chunked per-step link schedule from a TimeExpandedSolution.

    Each commodity's flow is decomposed into trajectories, trajectory weights
    are quantized to chunks of m/Q bytes, and every chunk follows its
    trajectory hop by hop (buffering between hops). Delivery of all shards is
    then structural; quantization affects only per-step link volumes.
    """
    sched = ChunkedSchedule(n=g.n, nsteps=ts.l_max, chunk_bytes=0.0, Q=1,
                            mode="ts")
    per_comm = []
    Q = 1
    for ci, com in enumerate(ts.commodities):
        trajs = _decompose_trajectories(g, ts, ci)
        weights = [w for _, w in trajs]
        chunking = quantize_flows(weights, q_max)
        Q = Q * chunking.Q // math.gcd(Q, chunking.Q)
        per_comm.append((com, trajs, chunking))
    if Q > q_max:
        Q = q_max
    sched.Q = Q
    sched.chunk_bytes = m / Q
    for com, trajs, chunking in per_comm:
        counts = chunking.counts
        if chunking.Q != Q:
            counts = _counts_at([w for _, w in trajs], Q)
        off = 0
        for (hops, _), cnt in zip(trajs, counts):
            if cnt == 0:
                continue
            for (t, e) in hops:
                u, v, _ = g.edges[e]
                sched.instructions.append(
                    Instruction(t=t, src=u, dst=v, s=com.src, d=com.dst,
                                c0=off, c1=off + cnt))
            off += cnt
        if off != Q:
            raise ScheduleError("chunk accounting error in ts lowering")
    sched.instructions.sort(key=lambda i: (i.t, i.src, i.dst, i.s, i.d, i.c0))
    return sched


# ---------------------------------------------------------------------------
# path lowering

def compile_path_schedule(
    g: Digraph,
    wps,
    m: float = 1.0,
    q_max: int = DEFAULT_Q_MAX,
):
    """Chunk-to-route assignment for a weighted path set.

    Path weights are normalized per commodity; the chunk size is the highest
    common factor of all normalized weights (one global denominator Q), with
    a largest-remainder fallback at Q = q_max when the HCF is degenerate.
    Returns (route list, ChunkedSchedule) where instruction.dst indexes the
    route list.
    """
    items = sorted(wps.paths.items())
    normalized = []
    for (s, d), plist in items:
        if not plist:
            raise ScheduleError(f"commodity ({s},{d}) has no paths")
        tot = sum(w for _, w in plist)
        if tot <= 0:
            raise ScheduleError(f"commodity ({s},{d}) has zero total weight")
        normalized.append(((s, d), [(p, w / tot) for p, w in plist]))

    # global HCF over all normalized weights, as exact rationals if possible
    fracs = []
    exact = True
    for _, plist in normalized:
        for _, w in plist:
            f = _as_fraction(w, 10 ** 6)
            if f is None or f <= 0:
                exact = False
                break
            fracs.append(f)
        if not exact:
            break
    Q = None
    if exact:
        hcf = fracs[0]
        for f in fracs[1:]:
            hcf = Fraction(math.gcd(hcf.numerator, f.numerator),
                           hcf.denominator * f.denominator
                           // math.gcd(hcf.denominator, f.denominator))
        if 1 / hcf <= q_max and (1 / hcf).denominator == 1:
            Q = int(1 / hcf)
    if Q is None:
        warnings.warn(
            f"weight HCF degenerate or > 1/{q_max}; falling back to "
            f"largest-remainder quantization at Q={q_max}", stacklevel=2
        )
        Q = q_max

    routes = []
    sched = ChunkedSchedule(n=g.n, nsteps=1, chunk_bytes=m / Q, Q=Q,
                            mode="path")
    for (s, d), plist in normalized:
        counts = _counts_at([w for _, w in plist], Q)
        off = 0
        for (path, _), cnt in zip(plist, counts):
            rid = len(routes)
            routes.append({"s": s, "d": d, "nodes": list(path)})
            if cnt:
                sched.instructions.append(
                    Instruction(t=0, src=s, dst=rid, s=s, d=d,
                                c0=off, c1=off + cnt))
            off += cnt
        if off != Q:
            raise ScheduleError("chunk accounting error in path lowering")
    return routes, sched


# ---------------------------------------------------------------------------
# XML dialect

def emit_schedule_xml(sched: ChunkedSchedule, path: str) -> None:
    root = ET.Element("schedule", {
        "n": str(sched.n),
        "nsteps": str(sched.nsteps),
        "chunkbytes": repr(sched.chunk_bytes),
        "q": str(sched.Q),
        "mode": sched.mode,
    })
    steps: dict[int, ET.Element] = {}
    for ins in sched.instructions:
        el = steps.get(ins.t)
        if el is None:
            el = ET.SubElement(root, "step", {"t": str(ins.t)})
            steps[ins.t] = el
        ET.SubElement(el, "send", {
            "src": str(ins.src), "dst": str(ins.dst),
            "s": str(ins.s), "d": str(ins.d),
            "c0": str(ins.c0), "c1": str(ins.c1),
        })
    tree = ET.ElementTree(root)
    ET.indent(tree)
    tree.write(path, encoding="unicode", xml_declaration=True)


def _req(el, attr, line=""):
    v = el.get(attr)
    if v is None:
        raise ScheduleError(f"missing attribute {attr!r} on <{el.tag}>{line}")
    return v


def parse_schedule_xml(path: str) -> ChunkedSchedule:
    try:
        tree = ET.parse(path)
    except ET.ParseError as ex:
        raise ScheduleError(f"malformed XML: {ex}") from ex
    root = tree.getroot()
    if root.tag != "schedule":
        raise ScheduleError(f"root element is <{root.tag}>, not <schedule>")
    sched = ChunkedSchedule(
        n=int(_req(root, "n")),
        nsteps=int(_req(root, "nsteps")),
        chunk_bytes=float(_req(root, "chunkbytes")),
        Q=int(_req(root, "q")),
        mode=_req(root, "mode"),
    )
    if sched.mode not in ("ts", "path"):
        raise ScheduleError(f"unknown mode {sched.mode!r}")
    for step in root:
        if step.tag != "step":
            raise ScheduleError(f"unexpected element <{step.tag}>")
        t = int(_req(step, "t"))
        if not 0 <= t < sched.nsteps:
            raise ScheduleError(f"step t={t} outside [0, {sched.nsteps})")
        for send in step:
            if send.tag != "send":
                raise ScheduleError(f"unexpected element <{send.tag}>")
            ins = Instruction(
                t=t,
                src=int(_req(send, "src")), dst=int(_req(send, "dst")),
                s=int(_req(send, "s")), d=int(_req(send, "d")),
                c0=int(_req(send, "c0")), c1=int(_req(send, "c1")),
            )
            if not (0 <= ins.c0 < ins.c1 <= sched.Q):
                raise ScheduleError(f"bad chunk range [{ins.c0},{ins.c1})")
            sched.instructions.append(ins)
    return sched
