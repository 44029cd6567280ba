"""Functional streaming execution of the pipeline DAGs.

Each stage is a generator that communicates only through named FIFOs,
yielding ``("get", fifo)`` / ``("put", fifo, value)`` effects. Two executors
drive the same workers: a single-threaded round-robin scheduler (used by CI
and anywhere determinism of progress matters) and a thread-per-stage executor
with bounded blocking queues. FIFO capacities change scheduling only; values
and outputs are identical under both executors and any capacity.

Kernel groups run back to back: a group's workers all finish before the next
group starts, with intermediate arrays standing in for the memory roundtrip
between kernels.
"""

from __future__ import annotations

import itertools
import queue
import threading
import time
from collections import deque

import numpy as np

from .graphs import CsrGraph, pseudo_coordinates, partition_contiguous
from .params import ModelError
from .pipeline import PipelineSpec
from .reference import (F32, elu, leaky_relu, relu, sigmoid, tanh, vmm,
                        gaussian_weights, DimensionError)


class StreamError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# executors

class _CoopFifo:
    __slots__ = ("items", "capacity")

    def __init__(self, capacity):
        self.items = deque()
        self.capacity = capacity

    def full(self):
        return self.capacity is not None and len(self.items) >= self.capacity


def run_cooperative(workers: dict, fifos: dict[str, int | None]) -> None:
    """Round-robin the stage generators until all finish.

    A stage blocked on an empty input or full output simply loses its turn.
    A full pass with no progress while stages remain raises a diagnostic
    instead of hanging.
    """
    chans = {name: _CoopFifo(cap) for name, cap in fifos.items()}
    gens = list(workers.items())
    state: dict[str, tuple] = {name: ("start",) for name, _ in gens}

    live = {name for name, _ in gens}
    while live:
        progressed = False
        for name, gen in gens:
            if name not in live:
                continue
            while True:
                op = state[name]
                try:
                    if op[0] == "start":
                        ev = next(gen)
                        progressed = True
                    elif op[0] == "get":
                        ch = chans[op[1]]
                        if not ch.items:
                            break
                        ev = gen.send(ch.items.popleft())
                        progressed = True
                    else:  # put
                        ch = chans[op[1]]
                        if ch.full():
                            break
                        ch.items.append(op[2])
                        ev = next(gen)
                        progressed = True
                except StopIteration:
                    live.discard(name)
                    break
                state[name] = ev
        if not progressed and live:
            blocked = {name: state[name][:2] for name in live}
            raise StreamError(f"pipeline deadlock; blocked stages: {blocked}")


def run_threaded(workers: dict, fifos: dict[str, int | None],
                 stall_timeout: float = 10.0) -> None:
    """One thread per stage over bounded blocking queues.

    A global progress counter guards against protocol bugs: if nothing moves
    for ``stall_timeout`` seconds the run aborts with a diagnostic instead of
    hanging.
    """
    chans = {name: queue.Queue(maxsize=cap or 0) for name, cap in fifos.items()}
    abort = threading.Event()
    progress = itertools.count()
    marker = [0]
    errors: list[BaseException] = []

    def drive(name, gen):
        try:
            ev = next(gen)
            while True:
                if abort.is_set():
                    return
                try:
                    if ev[0] == "get":
                        try:
                            val = chans[ev[1]].get(timeout=0.05)
                        except queue.Empty:
                            continue
                        marker[0] = next(progress)
                        ev = gen.send(val)
                    else:
                        try:
                            chans[ev[1]].put(ev[2], timeout=0.05)
                        except queue.Full:
                            continue
                        marker[0] = next(progress)
                        ev = next(gen)
                except StopIteration:
                    return
        except BaseException as exc:  # noqa: BLE001 - propagated to caller
            errors.append(exc)
            abort.set()

    threads = [threading.Thread(target=drive, args=(name, gen), daemon=True)
               for name, gen in workers.items()]
    for t in threads:
        t.start()
    last, last_change = marker[0], time.monotonic()
    while any(t.is_alive() for t in threads):
        time.sleep(0.02)
        cur = marker[0]
        if cur != last:
            last, last_change = cur, time.monotonic()
        elif time.monotonic() - last_change > stall_timeout:
            abort.set()
            for t in threads:
                t.join(timeout=1.0)
            raise StreamError("pipeline stalled (producer/consumer item counts "
                              "disagree or a stage crashed)")
    for t in threads:
        t.join()
    if errors:
        raise StreamError(f"stage failed: {errors[0]!r}") from errors[0]


# ---------------------------------------------------------------------------
# per-model stage workers

def _grouped_vmm(x: np.ndarray, M: np.ndarray, groups: int = 4):
    """Column-grouped partial products of ``vmm(x, M)``, ascending inside each
    contiguous column group."""
    d = M.shape[1]
    bounds = np.linspace(0, d, min(groups, d) + 1, dtype=int)
    parts = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        acc = np.zeros(M.shape[0], dtype=F32)
        for c in range(lo, hi):
            acc += M[:, c] * x[c]
        parts.append(acc)
    return parts


def _gcn_workers(g, H, p, rng_nodes, out, _ctx):
    def read_nbr():
        for i in rng_nodes:
            for j in g.row(i):
                yield ("put", "read_nbr->aggregate", H[j])

    def aggregate():
        d = H.shape[1]
        for i in rng_nodes:
            acc = np.zeros(d, dtype=F32)
            for _ in range(len(g.row(i))):
                v = yield ("get", "read_nbr->aggregate")
                acc += v
            yield ("put", "aggregate->vmm_grouped", acc)

    def vmm_grouped():
        for _ in rng_nodes:
            x = yield ("get", "aggregate->vmm_grouped")
            yield ("put", "vmm_grouped->sum_write", _grouped_vmm(x, p.U))

    def sum_write():
        for i in rng_nodes:
            parts = yield ("get", "vmm_grouped->sum_write")
            acc = parts[0].copy()
            for part in parts[1:]:
                acc += part
            out[i] = relu(acc)

    return {"read_nbr": read_nbr(), "aggregate": aggregate(),
            "vmm_grouped": vmm_grouped(), "sum_write": sum_write()}


def _sage_workers(g, H, p, rng_nodes, out, _ctx):
    def read_tar():
        for i in rng_nodes:
            yield ("put", "read_tar->vmm_target", H[i])

    def vmm_target():
        for _ in rng_nodes:
            x = yield ("get", "read_tar->vmm_target")
            yield ("put", "vmm_target->sum_write", vmm(x, p.V))

    def read_nbr():
        for i in rng_nodes:
            for j in g.row(i):
                yield ("put", "read_nbr->aggregate", H[j])

    def aggregate():
        d = H.shape[1]
        for i in rng_nodes:
            deg = len(g.row(i))
            acc = np.zeros(d, dtype=F32)
            for _ in range(deg):
                v = yield ("get", "read_nbr->aggregate")
                acc += v
            if deg:
                acc = acc / F32(deg)
            yield ("put", "aggregate->vmm_neighbor", acc)

    def vmm_neighbor():
        for _ in rng_nodes:
            x = yield ("get", "aggregate->vmm_neighbor")
            yield ("put", "vmm_neighbor->sum_write", vmm(x, p.W))

    def sum_write():
        for i in rng_nodes:
            a = yield ("get", "vmm_target->sum_write")
            b = yield ("get", "vmm_neighbor->sum_write")
            out[i] = relu(a + b)

    return {"read_tar": read_tar(), "vmm_target": vmm_target(),
            "read_nbr": read_nbr(), "aggregate": aggregate(),
            "vmm_neighbor": vmm_neighbor(), "sum_write": sum_write()}


def _gin_workers(g, H, p, rng_nodes, out, _ctx):
    def read_self():
        for i in rng_nodes:
            yield ("put", "read_self->aggregate", H[i])

    def read_nbr():
        for i in rng_nodes:
            for j in g.row(i):
                yield ("put", "read_nbr->aggregate", H[j])

    def aggregate():
        scale = F32(1.0 + p.eps)
        for i in rng_nodes:
            hi = yield ("get", "read_self->aggregate")
            acc = scale * hi
            for _ in range(len(g.row(i))):
                v = yield ("get", "read_nbr->aggregate")
                acc = acc + v
            yield ("put", "aggregate->vmm_inner", acc)

    def vmm_inner():
        for _ in rng_nodes:
            x = yield ("get", "aggregate->vmm_inner")
            yield ("put", "vmm_inner->vmm_outer", relu(vmm(x, p.V)))

    def vmm_outer():
        for _ in rng_nodes:
            x = yield ("get", "vmm_inner->vmm_outer")
            yield ("put", "vmm_outer->write", relu(vmm(x, p.U)))

    def write():
        for i in rng_nodes:
            out[i] = yield ("get", "vmm_outer->write")

    return {"read_self": read_self(), "read_nbr": read_nbr(),
            "aggregate": aggregate(), "vmm_inner": vmm_inner(),
            "vmm_outer": vmm_outer(), "write": write()}


def _gat_kernel1_workers(g, H, p, rng_nodes, _out, ctx):
    K, q, _ = p.U.shape

    def read_h():
        for i in rng_nodes:
            yield ("put", "read_h->vmm_heads", H[i])

    def vmm_heads():
        for _ in rng_nodes:
            x = yield ("get", "read_h->vmm_heads")
            z = np.stack([vmm(x, p.U[k]) for k in range(K)])
            yield ("put", "vmm_heads->ewm_src", z)
            yield ("put", "vmm_heads->ewm_dest", z)
            yield ("put", "vmm_heads->write_scores", z)

    def _score(fifo_in, fifo_out, vecs):
        def worker():
            for _ in rng_nodes:
                z = yield ("get", fifo_in)
                s = np.zeros(K, dtype=F32)
                for k in range(K):
                    acc = F32(0)
                    for c in range(q):
                        acc += vecs[k, c] * z[k, c]
                    s[k] = acc
                yield ("put", fifo_out, s)
        return worker

    def write_scores():
        for i in rng_nodes:
            z = yield ("get", "vmm_heads->write_scores")
            el = yield ("get", "ewm_src->write_scores")
            er = yield ("get", "ewm_dest->write_scores")
            ctx["z"][i] = z
            ctx["el"][i] = el
            ctx["er"][i] = er

    return {"read_h": read_h(), "vmm_heads": vmm_heads(),
            "ewm_src": _score("vmm_heads->ewm_src", "ewm_src->write_scores", p.a_src)(),
            "ewm_dest": _score("vmm_heads->ewm_dest", "ewm_dest->write_scores", p.a_dest)(),
            "write_scores": write_scores()}


def _gat_kernel2_workers(g, H, p, rng_nodes, out, ctx):
    K, q, _ = p.U.shape
    slope = p.leaky_slope
    z, el, er = ctx["z"], ctx["el"], ctx["er"]

    def read_pairs(fifo):
        def worker():
            for i in rng_nodes:
                for j in g.row(i):
                    yield ("put", fifo, (el[i], er[j]))
        return worker

    def edge_score(fifo_in, fifo_out):
        def worker():
            for i in rng_nodes:
                for _ in range(len(g.row(i))):
                    a, b = yield ("get", fifo_in)
                    yield ("put", fifo_out, leaky_relu(a + b, slope))
        return worker

    def agg_scores():
        for i in rng_nodes:
            deg = len(g.row(i))
            mx = np.zeros(K, dtype=F32)
            s = np.zeros(K, dtype=F32)
            es = []
            for _ in range(deg):
                e = yield ("get", "edge_score_b->agg_scores")
                es.append(e)
            if deg:
                mx = es[0].copy()
                for e in es[1:]:
                    np.maximum(mx, e, out=mx)
                for e in es:
                    s += np.exp(e - mx, dtype=F32)
            yield ("put", "agg_scores->softmax", (mx, s))

    def softmax():
        for i in rng_nodes:
            mx, s = yield ("get", "agg_scores->softmax")
            for _ in range(len(g.row(i))):
                e = yield ("get", "edge_score_a->softmax")
                yield ("put", "softmax->attend", np.exp(e - mx, dtype=F32) / s)

    def read_proj():
        for i in rng_nodes:
            for j in g.row(i):
                yield ("put", "read_proj->attend", z[j])

    def attend():
        for i in rng_nodes:
            acc = np.zeros((K, q), dtype=F32)
            for _ in range(len(g.row(i))):
                alpha = yield ("get", "softmax->attend")
                zj = yield ("get", "read_proj->attend")
                acc += alpha[:, None] * zj
            yield ("put", "attend->write", elu(acc).reshape(-1))

    def write():
        for i in rng_nodes:
            out[i] = yield ("get", "attend->write")

    return {"read_pairs_a": read_pairs("read_pairs_a->edge_score_a")(),
            "edge_score_a": edge_score("read_pairs_a->edge_score_a",
                                       "edge_score_a->softmax")(),
            "read_pairs_b": read_pairs("read_pairs_b->edge_score_b")(),
            "edge_score_b": edge_score("read_pairs_b->edge_score_b",
                                       "edge_score_b->agg_scores")(),
            "agg_scores": agg_scores(), "softmax": softmax(),
            "read_proj": read_proj(), "attend": attend(), "write": write()}


def _monet_workers(g, H, p, rng_nodes, out, ctx):
    K, d, _ = p.U.shape
    pseudo = ctx["pseudo"]
    v2 = np.asarray(p.v2, dtype=F32)

    def read_coords():
        for i in rng_nodes:
            lo, hi = g.row_offsets[i], g.row_offsets[i + 1]
            for pos in range(lo, hi):
                yield ("put", "read_coords->vmm_coords", pseudo[pos])

    def vmm_coords():
        for i in rng_nodes:
            for _ in range(len(g.row(i))):
                c = yield ("get", "read_coords->vmm_coords")
                yield ("put", "vmm_coords->gaussian", tanh(vmm(c, p.V2) + v2))

    def gaussian():
        for i in rng_nodes:
            for _ in range(len(g.row(i))):
                u = yield ("get", "vmm_coords->gaussian")
                w = gaussian_weights(u[None, :], p.mu, p.sigma_inv)[0]
                yield ("put", "gaussian->weight_agg", w)

    def read_nbr():
        for i in rng_nodes:
            for j in g.row(i):
                yield ("put", "read_nbr->weight_agg", H[j])

    def weight_agg():
        for i in rng_nodes:
            acc = np.zeros((K, d), dtype=F32)
            for _ in range(len(g.row(i))):
                w = yield ("get", "gaussian->weight_agg")
                hj = yield ("get", "read_nbr->weight_agg")
                acc += w[:, None] * hj
            yield ("put", "weight_agg->vmm_heads", acc)

    def vmm_heads():
        for _ in rng_nodes:
            agg = yield ("get", "weight_agg->vmm_heads")
            proj = np.stack([vmm(agg[k], p.U[k]) for k in range(K)])
            yield ("put", "vmm_heads->head_sum", proj)

    def head_sum():
        for _ in rng_nodes:
            proj = yield ("get", "vmm_heads->head_sum")
            acc = proj[0].copy()
            for k in range(1, K):
                acc += proj[k]
            yield ("put", "head_sum->write", relu(acc))

    def write():
        for i in rng_nodes:
            out[i] = yield ("get", "head_sum->write")

    return {"read_coords": read_coords(), "vmm_coords": vmm_coords(),
            "gaussian": gaussian(), "read_nbr": read_nbr(),
            "weight_agg": weight_agg(), "vmm_heads": vmm_heads(),
            "head_sum": head_sum(), "write": write()}


def _gatedgcn_workers(g, H, p, rng_nodes, out, ctx):
    d = H.shape[1]
    efeat = ctx["efeat"]
    e_out = ctx["e_out"]
    eps = F32(p.eps_stab)

    def read_target():
        for i in rng_nodes:
            yield ("put", "read_target->vmm_a", H[i])
            yield ("put", "read_target->vmm_e", H[i])

    def vmm_node(fifo_in, fifo_out, M):
        def worker():
            for _ in rng_nodes:
                x = yield ("get", fifo_in)
                yield ("put", fifo_out, vmm(x, M))
        return worker

    def read_sources():
        for i in rng_nodes:
            for j in g.row(i):
                yield ("put", "read_sources->vmm_b", H[j])
                yield ("put", "read_sources->vmm_d", H[j])

    def vmm_edge(fifo_in, fifo_out, M):
        def worker():
            for i in rng_nodes:
                for _ in range(len(g.row(i))):
                    x = yield ("get", fifo_in)
                    yield ("put", fifo_out, vmm(x, M))
        return worker

    def read_edges():
        for i in rng_nodes:
            lo, hi = g.row_offsets[i], g.row_offsets[i + 1]
            for pos in range(lo, hi):
                yield ("put", "read_edges->vmm_c", efeat[pos])

    def soft_attention():
        for i in rng_nodes:
            ah = yield ("get", "vmm_a->soft_attention")
            eh = yield ("get", "vmm_e->soft_attention")
            num = np.zeros(d, dtype=F32)
            den = np.zeros(d, dtype=F32)
            for _ in range(len(g.row(i))):
                bh = yield ("get", "vmm_b->soft_attention")
                dh = yield ("get", "vmm_d->soft_attention")
                ce = yield ("get", "vmm_c->soft_attention")
                e_new = eh + dh + ce
                yield ("put", "soft_attention->write_edges", e_new)
                s = sigmoid(e_new)
                num += bh * s
                den += s
            yield ("put", "soft_attention->sum_write", ah + num / (den + eps))

    def sum_write():
        for i in rng_nodes:
            v = yield ("get", "soft_attention->sum_write")
            out[i] = relu(v)

    def write_edges():
        for i in rng_nodes:
            lo, hi = g.row_offsets[i], g.row_offsets[i + 1]
            for pos in range(lo, hi):
                e_out[pos] = yield ("get", "soft_attention->write_edges")

    return {"read_target": read_target(),
            "vmm_a": vmm_node("read_target->vmm_a", "vmm_a->soft_attention", p.A)(),
            "vmm_e": vmm_node("read_target->vmm_e", "vmm_e->soft_attention", p.E)(),
            "read_sources": read_sources(),
            "vmm_b": vmm_edge("read_sources->vmm_b", "vmm_b->soft_attention", p.B)(),
            "vmm_d": vmm_edge("read_sources->vmm_d", "vmm_d->soft_attention", p.D)(),
            "read_edges": read_edges(),
            "vmm_c": vmm_edge("read_edges->vmm_c", "vmm_c->soft_attention", p.C)(),
            "soft_attention": soft_attention(), "sum_write": sum_write(),
            "write_edges": write_edges()}


_BUILDERS = {
    "gcn": [_gcn_workers],
    "sage": [_sage_workers],
    "gin": [_gin_workers],
    "gat": [_gat_kernel1_workers, _gat_kernel2_workers],
    "monet": [_monet_workers],
    "gatedgcn": [_gatedgcn_workers],
}


def execute_streaming(spec: PipelineSpec, g: CsrGraph, H: np.ndarray, params,
                      efeat: np.ndarray | None = None,
                      executor: str = "cooperative"):
    """Run the model through its stage DAG; equals the sequential reference.

    ``executor`` is ``"cooperative"`` (single-threaded round-robin) or
    ``"threaded"`` (one worker thread per stage). Returns the node feature
    output, plus updated edge features for the gated model.
    """
    if executor not in ("cooperative", "threaded"):
        raise ModelError(f"unknown executor {executor!r}")
    H = np.ascontiguousarray(H, dtype=F32)
    model = spec.model
    dims = spec.dims
    if H.shape != (g.num_nodes, dims.in_dim):
        raise DimensionError(
            f"H: expected ({g.num_nodes}, {dims.in_dim}), got {H.shape}")

    wout = dims.width_out if model == "gat" else dims.out_dim
    out = np.zeros((g.num_nodes, wout), dtype=F32)
    ctx: dict = {}
    if model == "gat":
        K, q = dims.heads, dims.out_dim
        ctx = {"z": np.zeros((g.num_nodes, K, q), dtype=F32),
               "el": np.zeros((g.num_nodes, K), dtype=F32),
               "er": np.zeros((g.num_nodes, K), dtype=F32)}
    elif model == "monet":
        ctx = {"pseudo": pseudo_coordinates(g)}
    elif model == "gatedgcn":
        if efeat is None:
            raise DimensionError("gatedgcn requires edge features")
        efeat = np.ascontiguousarray(efeat, dtype=F32)
        if efeat.shape != (g.num_edges, dims.in_dim):
            raise DimensionError(
                f"edge features: expected ({g.num_edges}, {dims.in_dim}), "
                f"got {efeat.shape}")
        ctx = {"efeat": efeat, "e_out": np.zeros_like(efeat)}

    num_cus = min(spec.num_cus, g.num_nodes) if g.num_nodes else 1
    ranges = partition_contiguous(g.num_nodes, num_cus) if g.num_nodes else []
    run = run_cooperative if executor == "cooperative" else run_threaded
    for group_idx, group in enumerate(spec.kernels):
        fifo_caps = {f.name: f.capacity for f in spec.fifos
                     if f.src in group and f.dst in group}
        for r in ranges:
            nodes = range(r.start, r.end)
            builder = _BUILDERS[model][group_idx]
            workers = builder(g, H, params, nodes, out, ctx)
            if set(workers) != set(group):
                raise ModelError(
                    f"worker set {sorted(workers)} does not match stage group "
                    f"{sorted(group)}")
            run(workers, fifo_caps)

    if model == "gatedgcn":
        return out, ctx["e_out"]
    return out
