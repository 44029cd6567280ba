"""Abstract instruction/memory traces and locality characterization.

A traced run replays the sequential reference kernel over a sampled set of
target nodes and records three event classes: one branch event per loop
iteration, one memory event per array-element access (weights, features,
adjacency, named intermediates), and one compute event per scalar arithmetic
or activation operation. Scalars held in registers produce no memory events.
Each named array lives at its own base address, a distinct multiple of 2**24
words; an element's address is base + row-major flat index. Event content is
independent of feature values, so traces are deterministic for fixed inputs.

Traces are stored as blocks (runs of branch/compute counts and memory-address
vectors) rather than per-event objects; the block sequence preserves the
exact event order, which the binary dump and the locality scores consume.

Scores follow the pinned formulas: spatial locality averages 1/stride over
consecutive memory accesses (stride in words over the global memory-event
sequence, zero strides contribute nothing); temporal locality averages
``max(0, (log2 D - log2(r + 1)) / log2 D)`` with cap D = 2**16, where r is
the number of distinct addresses touched since the previous access to the
same address and first touches contribute 0. Both sums use exact (fsum)
accumulation so independent recomputations agree bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import CsrGraph
from .params import Dims, ModelError
from .reference import DimensionError

ARRAY_REGION = 1 << 24
CAP_LOG2 = 16.0
CAP = 1 << 16

KIND_BRANCH, KIND_MEMORY, KIND_COMPUTE = 0, 1, 2
ACCESS_READ, ACCESS_WRITE = 0, 1

TRACE_MAGIC = b"GNNT"

#: contributions for reuse distance r = index; r >= 2**16 - 1 scores zero
_TEMPORAL_TABLE = np.array(
    [(CAP_LOG2 - math.log2(r + 1)) / CAP_LOG2 for r in range(CAP)],
    dtype=np.float64)


class TraceError(ValueError):
    pass


@dataclass
class Trace:
    """Block-encoded event stream of one traced kernel run."""

    model: str
    graph: str
    nodes: list[int]
    blocks: list = field(default_factory=list, repr=False)
    n_branch: int = 0
    n_memory: int = 0
    n_compute: int = 0

    @property
    def n_events(self) -> int:
        return self.n_branch + self.n_memory + self.n_compute

    def memory_addresses(self) -> np.ndarray:
        arrs = [b[1] for b in self.blocks if b[0] == "m"]
        if not arrs:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(arrs)

    def iter_events(self):
        """Yield (kind, access, address) per event, in order. Intended for
        dumps and small-trace oracles; the block form is the fast path."""
        for b in self.blocks:
            if b[0] == "b":
                for _ in range(b[1]):
                    yield (KIND_BRANCH, ACCESS_READ, 0)
            elif b[0] == "c":
                for _ in range(b[1]):
                    yield (KIND_COMPUTE, ACCESS_READ, 0)
            else:
                access = b[2]
                for addr in b[1]:
                    yield (KIND_MEMORY, access, int(addr))

    def dump(self, path: str | Path) -> None:
        """Binary dump: magic, then one 10-byte record per event
        (kind u8, access u8, address u64 LE; address 0 for non-memory)."""
        rec = np.dtype([("kind", "u1"), ("access", "u1"), ("addr", "<u8")])
        out = np.zeros(self.n_events, dtype=rec)
        pos = 0
        for b in self.blocks:
            if b[0] == "b":
                out["kind"][pos:pos + b[1]] = KIND_BRANCH
                pos += b[1]
            elif b[0] == "c":
                out["kind"][pos:pos + b[1]] = KIND_COMPUTE
                pos += b[1]
            else:
                k = len(b[1])
                out["kind"][pos:pos + k] = KIND_MEMORY
                out["access"][pos:pos + k] = b[2]
                out["addr"][pos:pos + k] = b[1].astype(np.uint64)
                pos += k
        with open(path, "wb") as f:
            f.write(TRACE_MAGIC)
            out.tofile(f)


def load_trace_events(path: str | Path) -> np.ndarray:
    """Read a dumped trace back as a structured array (kind, access, addr)."""
    data = Path(path).read_bytes()
    if data[:4] != TRACE_MAGIC:
        raise TraceError(f"{path}: bad magic {data[:4]!r}")
    rec = np.dtype([("kind", "u1"), ("access", "u1"), ("addr", "<u8")])
    if (len(data) - 4) % rec.itemsize:
        raise TraceError(f"{path}: truncated trace record")
    return np.frombuffer(data, dtype=rec, offset=4)


class _Builder:
    """Accumulates blocks; adjacent branch/compute runs are merged."""

    def __init__(self, base_offset: int = 0):
        self.blocks: list = []
        self.n_branch = 0
        self.n_memory = 0
        self.n_compute = 0
        self._bases: dict[str, int] = {}
        self._base_offset = base_offset

    def register(self, name: str, size: int) -> int:
        if name in self._bases:
            raise TraceError(f"array {name!r} registered twice")
        base = self._base_offset + len(self._bases) * ARRAY_REGION
        if size > ARRAY_REGION:
            raise TraceError(f"array {name!r} exceeds its address region")
        self._bases[name] = base
        return base

    def branch(self, count: int):
        if count <= 0:
            return
        if self.blocks and self.blocks[-1][0] == "b":
            self.blocks[-1] = ("b", self.blocks[-1][1] + count)
        else:
            self.blocks.append(("b", count))
        self.n_branch += count

    def compute(self, count: int):
        if count <= 0:
            return
        if self.blocks and self.blocks[-1][0] == "c":
            self.blocks[-1] = ("c", self.blocks[-1][1] + count)
        else:
            self.blocks.append(("c", count))
        self.n_compute += count

    def mem(self, addrs: np.ndarray, access: int = ACCESS_READ):
        k = int(addrs.shape[0])
        if k == 0:
            return
        self.blocks.append(("m", addrs, access))
        self.n_memory += k

    def mem1(self, addr: int, access: int = ACCESS_READ):
        self.mem(np.array([addr], dtype=np.int64), access)


def _row_block(base: int, row: int, width: int) -> np.ndarray:
    start = base + row * width
    return np.arange(start, start + width, dtype=np.int64)


def _needed_nodes(g: CsrGraph, nodes: list[int]) -> list[int]:
    need = set(nodes)
    for i in nodes:
        need.update(int(j) for j in g.row(i))
    return sorted(need)


# ---------------------------------------------------------------------------
# per-model event emitters


def _trace_gcn(b: _Builder, g, nodes, dims):
    d = dims.in_dim
    off = b.register("row_offsets", g.n + 1)
    col = b.register("col_indices", max(g.m, 1))
    hb = b.register("h", g.n * d)
    ub = b.register("U", d * d)
    ob = b.register("out", g.n * d)
    u_block = np.arange(ub, ub + d * d, dtype=np.int64)
    for i in nodes:
        b.branch(1)
        b.mem(np.array([off + i, off + i + 1], dtype=np.int64))
        lo, hi = int(g.row_offsets[i]), int(g.row_offsets[i + 1])
        for pos in range(lo, hi):
            j = int(g.col_indices[pos])
            b.branch(1)
            b.mem1(col + pos)
            b.branch(d)
            b.mem(_row_block(hb, j, d))
            b.compute(d)                      # accumulate adds
        b.branch(d + d * d)                   # row and column loops
        b.mem(u_block)
        b.compute(2 * d * d)                  # multiply + add per weight
        b.branch(d)
        b.compute(d)                          # relu
        b.mem(_row_block(ob, i, d), ACCESS_WRITE)


def _trace_sage(b: _Builder, g, nodes, dims):
    d = dims.in_dim
    off = b.register("row_offsets", g.n + 1)
    col = b.register("col_indices", max(g.m, 1))
    hb = b.register("h", g.n * d)
    vb = b.register("V", d * d)
    wb = b.register("W", d * d)
    ob = b.register("out", g.n * d)
    v_block = np.arange(vb, vb + d * d, dtype=np.int64)
    w_block = np.arange(wb, wb + d * d, dtype=np.int64)
    for i in nodes:
        b.branch(1)
        b.mem(np.array([off + i, off + i + 1], dtype=np.int64))
        b.mem(_row_block(hb, i, d))
        lo, hi = int(g.row_offsets[i]), int(g.row_offsets[i + 1])
        for pos in range(lo, hi):
            j = int(g.col_indices[pos])
            b.branch(1)
            b.mem1(col + pos)
            b.branch(d)
            b.mem(_row_block(hb, j, d))
            b.compute(d)
        if hi > lo:
            b.compute(d)                      # mean division
        for blk in (v_block, w_block):
            b.branch(d + d * d)
            b.mem(blk)
            b.compute(2 * d * d)
        b.compute(d)                          # join the two paths
        b.branch(d)
        b.compute(d)                          # relu
        b.mem(_row_block(ob, i, d), ACCESS_WRITE)


def _trace_gin(b: _Builder, g, nodes, dims):
    d = dims.in_dim
    off = b.register("row_offsets", g.n + 1)
    col = b.register("col_indices", max(g.m, 1))
    hb = b.register("h", g.n * d)
    vb = b.register("V", d * d)
    ub = b.register("U", d * d)
    ob = b.register("out", g.n * d)
    v_block = np.arange(vb, vb + d * d, dtype=np.int64)
    u_block = np.arange(ub, ub + d * d, dtype=np.int64)
    for i in nodes:
        b.branch(1)
        b.mem(np.array([off + i, off + i + 1], dtype=np.int64))
        b.mem(_row_block(hb, i, d))
        b.compute(d)                          # (1 + eps) scale
        lo, hi = int(g.row_offsets[i]), int(g.row_offsets[i + 1])
        for pos in range(lo, hi):
            j = int(g.col_indices[pos])
            b.branch(1)
            b.mem1(col + pos)
            b.branch(d)
            b.mem(_row_block(hb, j, d))
            b.compute(d)
        for blk in (v_block, u_block):
            b.branch(d + d * d)
            b.mem(blk)
            b.compute(2 * d * d)
            b.branch(d)
            b.compute(d)                      # relu after each projection
        b.mem(_row_block(ob, i, d), ACCESS_WRITE)


def _trace_gat(b: _Builder, g, nodes, dims):
    d, K, q = dims.in_dim, dims.heads, dims.out_dim
    wout = K * q
    off = b.register("row_offsets", g.n + 1)
    col = b.register("col_indices", max(g.m, 1))
    hb = b.register("h", g.n * d)
    ub = b.register("U", K * q * d)
    asb = b.register("a_src", wout)
    adb = b.register("a_dest", wout)
    zb = b.register("z", g.n * wout)
    elb = b.register("el", g.n * K)
    erb = b.register("er", g.n * K)
    max_deg = int(np.diff(g.row_offsets).max()) if g.n else 0
    scr = b.register("e_scratch", max(max_deg * K, 1))
    ob = b.register("out", g.n * wout)
    u_block = np.arange(ub, ub + K * q * d, dtype=np.int64)
    as_block = np.arange(asb, asb + wout, dtype=np.int64)
    ad_block = np.arange(adb, adb + wout, dtype=np.int64)

    # node-wise projections for every node the sample touches
    for v in _needed_nodes(g, nodes):
        b.branch(1)
        b.mem(_row_block(hb, v, d))
        b.branch(wout + wout * d)
        b.mem(u_block)
        b.compute(2 * wout * d)
        b.mem(_row_block(zb, v, wout), ACCESS_WRITE)
        for blk, dest in ((as_block, elb), (ad_block, erb)):
            b.branch(wout)
            b.mem(blk)
            b.compute(2 * wout)
            b.mem(_row_block(dest, v, K), ACCESS_WRITE)

    # per-target attention
    for i in nodes:
        b.branch(1)
        b.mem(np.array([off + i, off + i + 1], dtype=np.int64))
        b.mem(_row_block(elb, i, K))
        lo, hi = int(g.row_offsets[i]), int(g.row_offsets[i + 1])
        deg = hi - lo
        for t, pos in enumerate(range(lo, hi)):
            j = int(g.col_indices[pos])
            b.branch(1)
            b.mem1(col + pos)
            b.mem(_row_block(erb, j, K))
            b.compute(2 * K)                  # add + leaky relu
            b.mem(_row_block(scr, t, K), ACCESS_WRITE)
        for t in range(deg):                  # running max
            b.branch(1)
            b.mem(_row_block(scr, t, K))
            b.compute(K)
        for t in range(deg):                  # exp-sum
            b.branch(1)
            b.mem(_row_block(scr, t, K))
            b.compute(3 * K)
        for t, pos in enumerate(range(lo, hi)):   # apply attention
            j = int(g.col_indices[pos])
            b.branch(1)
            b.mem(_row_block(scr, t, K))
            b.compute(3 * K)                  # sub, exp, divide
            b.mem(_row_block(zb, j, wout))
            b.compute(2 * wout)
        b.branch(wout)
        b.compute(wout)                       # elu
        b.mem(_row_block(ob, i, wout), ACCESS_WRITE)


def _trace_monet(b: _Builder, g, nodes, dims):
    d, K = dims.in_dim, dims.heads
    off = b.register("row_offsets", g.n + 1)
    col = b.register("col_indices", max(g.m, 1))
    deg_b = b.register("degrees", g.n)
    hb = b.register("h", g.n * d)
    v2b = b.register("V2", 4)
    vvb = b.register("v2", 2)
    mub = b.register("mu", K * 2)
    sgb = b.register("sigma_inv", K * 2)
    ub = b.register("U", K * d * d)
    ob = b.register("out", g.n * d)
    v2_block = np.arange(v2b, v2b + 4, dtype=np.int64)
    vv_block = np.arange(vvb, vvb + 2, dtype=np.int64)
    mu_block = np.arange(mub, mub + 2 * K, dtype=np.int64)
    sg_block = np.arange(sgb, sgb + 2 * K, dtype=np.int64)
    u_block = np.arange(ub, ub + K * d * d, dtype=np.int64)
    for i in nodes:
        b.branch(1)
        b.mem(np.array([off + i, off + i + 1], dtype=np.int64))
        lo, hi = int(g.row_offsets[i]), int(g.row_offsets[i + 1])
        for pos in range(lo, hi):
            j = int(g.col_indices[pos])
            b.branch(1)
            b.mem1(col + pos)
            b.mem(np.array([deg_b + i, deg_b + j], dtype=np.int64))
            b.compute(2)                      # the two degree powers
            b.mem(v2_block)
            b.mem(vv_block)
            b.compute(12)                     # 2x2 projection, shift, tanh
            b.mem(mu_block)
            b.mem(sg_block)
            b.compute(10 * K)                 # per-head gaussian weight
            b.branch(K * d)
            b.mem(_row_block(hb, j, d))
            b.compute(2 * K * d)              # weighted accumulate
        b.branch(K * d + K * d * d)
        b.mem(u_block)
        b.compute(2 * K * d * d)              # per-head projection
        b.compute((K - 1) * d if K > 1 else 0)
        b.branch(d)
        b.compute(d)                          # relu
        b.mem(_row_block(ob, i, d), ACCESS_WRITE)


def _trace_gatedgcn(b: _Builder, g, nodes, dims):
    d = dims.in_dim
    off = b.register("row_offsets", g.n + 1)
    col = b.register("col_indices", max(g.m, 1))
    hb = b.register("h", g.n * d)
    efb = b.register("edge_features", max(g.m * d, 1))
    mats = {name: b.register(name, d * d) for name in ("A", "B", "C", "D", "E")}
    proj = {name: b.register(f"{name}h", g.n * d) for name in ("A", "B", "D", "E")}
    eob = b.register("edge_out", max(g.m * d, 1))
    ob = b.register("out", g.n * d)
    mat_blocks = {name: np.arange(base, base + d * d, dtype=np.int64)
                  for name, base in mats.items()}

    targets = set(nodes)
    sources = {int(j) for i in nodes for j in g.row(i)}
    for v in sorted(targets | sources):
        b.branch(1)
        b.mem(_row_block(hb, v, d))
        wanted = ([("A", "A"), ("E", "E")] if v in targets else []) + \
                 ([("B", "B"), ("D", "D")] if v in sources else [])
        for mat, dest in wanted:
            b.branch(d + d * d)
            b.mem(mat_blocks[mat])
            b.compute(2 * d * d)
            b.mem(_row_block(proj[dest], v, d), ACCESS_WRITE)

    for i in nodes:
        b.branch(1)
        b.mem(np.array([off + i, off + i + 1], dtype=np.int64))
        b.mem(_row_block(proj["E"], i, d))
        lo, hi = int(g.row_offsets[i]), int(g.row_offsets[i + 1])
        for pos in range(lo, hi):
            j = int(g.col_indices[pos])
            b.branch(1)
            b.mem1(col + pos)
            b.mem(_row_block(efb, pos, d))
            b.branch(d + d * d)
            b.mem(mat_blocks["C"])
            b.compute(2 * d * d)              # edge-feature projection
            b.mem(_row_block(proj["D"], j, d))
            b.compute(2 * d)                  # gate pre-activation adds
            b.mem(_row_block(eob, pos, d), ACCESS_WRITE)
            b.compute(d)                      # sigmoid
            b.mem(_row_block(proj["B"], j, d))
            b.compute(3 * d)                  # gated accumulate + denominator
        b.mem(_row_block(proj["A"], i, d))
        b.compute(2 * d)                      # divide + add
        b.branch(d)
        b.compute(d)                          # relu
        b.mem(_row_block(ob, i, d), ACCESS_WRITE)


_TRACERS = {
    "gcn": _trace_gcn,
    "sage": _trace_sage,
    "gin": _trace_gin,
    "gat": _trace_gat,
    "monet": _trace_monet,
    "gatedgcn": _trace_gatedgcn,
}


def run_traced(model: str, g: CsrGraph, H: np.ndarray, params, nodes: list[int],
               dims: Dims | None = None, graph_name: str = "",
               base_offset: int = 0) -> Trace:
    """Trace the reference kernel restricted to ``nodes``.

    ``H`` fixes the feature dimensions (events do not depend on values).
    ``base_offset`` shifts every array base uniformly; scores are invariant
    under it.
    """
    if model not in _TRACERS:
        raise ModelError(f"unknown model {model!r}")
    for i in nodes:
        if not (0 <= i < g.num_nodes):
            raise TraceError(f"sampled node {i} out of range [0, {g.num_nodes})")
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != g.num_nodes:
        raise DimensionError(f"H must be ({g.num_nodes}, d), got {H.shape}")
    if dims is None:
        dims = Dims(H.shape[1])
    if dims.in_dim != H.shape[1]:
        raise DimensionError(f"H width {H.shape[1]} != dims.in_dim {dims.in_dim}")
    b = _Builder(base_offset)
    _TRACERS[model](b, g, list(nodes), dims)
    return Trace(model=model, graph=graph_name, nodes=list(nodes),
                 blocks=b.blocks, n_branch=b.n_branch, n_memory=b.n_memory,
                 n_compute=b.n_compute)


# ---------------------------------------------------------------------------
# metrics

def instruction_mix(trace: Trace) -> tuple[float, float, float]:
    """(branch, memory, compute) fractions; they sum to 1."""
    total = trace.n_events
    if total == 0:
        raise TraceError("instruction mix of an empty trace")
    return (trace.n_branch / total, trace.n_memory / total,
            trace.n_compute / total)


def spatial_score(trace: Trace) -> float:
    """Mean of 1/stride over consecutive memory accesses (see module doc)."""
    addrs = trace.memory_addresses()
    if addrs.shape[0] < 2:
        raise TraceError("spatial score needs at least 2 memory events")
    strides = np.abs(np.diff(addrs))
    safe = np.where(strides == 0, 1, strides)
    contribs = np.where(strides == 0, 0.0, 1.0 / safe)
    return math.fsum(contribs.tolist()) / (addrs.shape[0] - 1)


def temporal_score(trace: Trace) -> float:
    """Mean reuse-distance contribution over all memory accesses (see module
    doc); first touches count with weight 0."""
    addrs = trace.memory_addresses()
    if addrs.shape[0] < 1:
        raise TraceError("temporal score needs at least 1 memory event")
    contribs = _reuse_contributions(addrs)
    return math.fsum(contribs.tolist()) / addrs.shape[0]


def _reuse_contributions(addrs: np.ndarray) -> np.ndarray:
    try:
        return _reuse_contributions_numba(addrs)
    except ImportError:
        return _reuse_contributions_py(addrs)


def _reuse_contributions_py(addrs: np.ndarray) -> np.ndarray:
    """Fenwick-tree reuse distances: each seen address marks its most recent
    position; the distance is the count of marks strictly between accesses."""
    n = addrs.shape[0]
    tree = np.zeros(n + 1, dtype=np.int64)
    contribs = np.zeros(n, dtype=np.float64)
    last: dict[int, int] = {}

    def add(i, v):
        while i <= n:
            tree[i] += v
            i += i & (-i)

    def prefix(i):
        s = 0
        while i > 0:
            s += tree[i]
            i -= i & (-i)
        return int(s)

    for p in range(n):
        a = int(addrs[p])
        q = last.get(a)
        if q is not None:
            r = prefix(p) - prefix(q + 1)
            contribs[p] = _TEMPORAL_TABLE[min(r, CAP - 1)]
            add(q + 1, -1)
        add(p + 1, 1)
        last[a] = p
    return contribs


_NUMBA_IMPL = None


def _reuse_contributions_numba(addrs: np.ndarray):
    global _NUMBA_IMPL
    if _NUMBA_IMPL is None:
        from numba import njit, types
        from numba.typed import Dict

        @njit(cache=True)
        def impl(addrs, table):
            n = addrs.shape[0]
            tree = np.zeros(n + 1, dtype=np.int64)
            contribs = np.zeros(n, dtype=np.float64)
            last = Dict.empty(key_type=types.int64, value_type=types.int64)
            cap = table.shape[0]
            for p in range(n):
                a = addrs[p]
                if a in last:
                    q = last[a]
                    s = 0
                    i = p
                    while i > 0:
                        s += tree[i]
                        i -= i & (-i)
                    i = q + 1
                    while i > 0:
                        s -= tree[i]
                        i -= i & (-i)
                    if s >= cap:
                        s = cap - 1
                    contribs[p] = table[s]
                    i = q + 1
                    while i <= n:
                        tree[i] -= 1
                        i += i & (-i)
                i = p + 1
                while i <= n:
                    tree[i] += 1
                    i += i & (-i)
                last[a] = p
            return contribs

        _NUMBA_IMPL = impl
    return _NUMBA_IMPL(np.ascontiguousarray(addrs, dtype=np.int64),
                       _TEMPORAL_TABLE)
