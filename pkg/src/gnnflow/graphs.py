"""Graph ingestion, CSR adjacency, degree statistics, sampling, partitioning.

The CSR stores in-neighbors: row ``i`` holds the sources ``j`` of all edges
``j -> i``, sorted ascending, duplicates kept. Every kernel aggregates over
the source neighbors of a target node, so this is the only orientation the
rest of the package ever sees. Edge-list files use ``src dst`` lines with the
same meaning (a message from src to dst).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import SplitMix64, u64_block


class GraphError(ValueError):
    """Malformed graph input (parse errors, out-of-range ids, bad arguments)."""


@dataclass(frozen=True)
class EdgeList:
    num_nodes: int
    edges: list[tuple[int, int]]

    def __post_init__(self):
        for src, dst in self.edges:
            if not (0 <= src < self.num_nodes) or not (0 <= dst < self.num_nodes):
                raise GraphError(
                    f"edge ({src}, {dst}) out of range for {self.num_nodes} nodes"
                )


@dataclass(frozen=True)
class CsrGraph:
    """In-neighbor CSR: ``col_indices[row_offsets[i]:row_offsets[i+1]]`` are the
    sources of edges into node ``i``, ascending."""

    num_nodes: int
    num_edges: int
    row_offsets: np.ndarray
    col_indices: np.ndarray

    @property
    def n(self) -> int:
        return self.num_nodes

    @property
    def m(self) -> int:
        return self.num_edges

    def row(self, i: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[i]:self.row_offsets[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    @staticmethod
    def from_arrays(num_nodes, row_offsets, col_indices, validate: bool = True) -> "CsrGraph":
        """Build directly from arrays. ``validate=False`` skips the sorted-row
        check; only tests probing permutation sensitivity should use it."""
        row_offsets = np.asarray(row_offsets, dtype=np.int64)
        col_indices = np.asarray(col_indices, dtype=np.int64)
        g = CsrGraph(int(num_nodes), int(col_indices.shape[0]), row_offsets, col_indices)
        if validate:
            _check_csr(g)
        return g


def _check_csr(g: CsrGraph) -> None:
    if g.row_offsets.shape[0] != g.num_nodes + 1:
        raise GraphError("row_offsets must have length n+1")
    if g.row_offsets[0] != 0 or g.row_offsets[-1] != g.num_edges:
        raise GraphError("row_offsets must start at 0 and end at m")
    if np.any(np.diff(g.row_offsets) < 0):
        raise GraphError("row_offsets must be nondecreasing")
    if g.num_edges and (g.col_indices.min() < 0 or g.col_indices.max() >= g.num_nodes):
        raise GraphError("col_indices out of range")
    for i in range(g.num_nodes):
        r = g.row(i)
        if r.shape[0] > 1 and np.any(np.diff(r) < 0):
            raise GraphError(f"row {i} not sorted ascending")


@dataclass(frozen=True)
class DegreeStats:
    """Node/edge counts plus degree summary; ``degrees`` is present only when
    built from a concrete graph."""

    n: int
    m: int
    max_degree: int
    avg_degree: float
    degrees: np.ndarray | None = field(default=None, repr=False)

    @property
    def has_degrees(self) -> bool:
        return self.degrees is not None


@dataclass(frozen=True)
class NodeRange:
    start: int
    end: int

    def __len__(self) -> int:
        return self.end - self.start


def parse_edge_list(text: str) -> EdgeList:
    """Parse the line-oriented edge-list format.

    First non-comment line is ``n m``; each following line is ``src dst``.
    Lines starting with ``#`` are ignored. The declared edge count must match.
    """
    header: tuple[int, int] | None = None
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected two fields, got {raw!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"line {lineno}: non-integer field in {raw!r}") from None
        if header is None:
            if a < 0 or b < 0:
                raise GraphError(f"line {lineno}: negative counts in header")
            header = (a, b)
            continue
        n = header[0]
        if not (0 <= a < n) or not (0 <= b < n):
            raise GraphError(f"line {lineno}: node id out of range [0, {n})")
        edges.append((a, b))
    if header is None:
        raise GraphError("missing 'n m' header line")
    if len(edges) != header[1]:
        raise GraphError(f"header declares {header[1]} edges, file has {len(edges)}")
    return EdgeList(header[0], edges)


def load_edge_list(path: str | Path) -> EdgeList:
    return parse_edge_list(Path(path).read_text())


def write_edge_list(el: EdgeList, path: str | Path) -> None:
    lines = [f"{el.num_nodes} {len(el.edges)}"]
    lines.extend(f"{s} {d}" for s, d in el.edges)
    Path(path).write_text("\n".join(lines) + "\n")


def build_csr(el: EdgeList) -> CsrGraph:
    """In-neighbor CSR from an edge list; within each row sources are sorted
    ascending and duplicate edges are kept."""
    n = el.num_nodes
    m = len(el.edges)
    if m == 0:
        return CsrGraph(n, 0, np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))
    src = np.fromiter((e[0] for e in el.edges), dtype=np.int64, count=m)
    dst = np.fromiter((e[1] for e in el.edges), dtype=np.int64, count=m)
    order = np.lexsort((src, dst))
    counts = np.bincount(dst, minlength=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return CsrGraph(n, m, offsets, src[order])


def degree_stats(g: CsrGraph) -> DegreeStats:
    degs = g.degrees()
    max_deg = int(degs.max()) if g.num_nodes else 0
    avg = g.num_edges / g.num_nodes if g.num_nodes else 0.0
    return DegreeStats(g.num_nodes, g.num_edges, max_deg, avg, degs)


def load_summary(path: str | Path) -> DegreeStats:
    """Load a graph summary JSON with keys {name, n, m, max_degree, avg_degree}."""
    obj = json.loads(Path(path).read_text())
    return DegreeStats(int(obj["n"]), int(obj["m"]), int(obj["max_degree"]),
                       float(obj["avg_degree"]))


def sample_nodes(g: CsrGraph, count: int, seed: int) -> list[int]:
    """Uniform sample of ``count`` distinct node ids, without replacement.

    Pinned generator: SplitMix64 driving a partial Fisher-Yates shuffle over
    the identity permutation (sparse, dict-backed), so the same seed yields
    the same node sequence in any implementation of this scheme.
    """
    n = g.num_nodes
    if count > n:
        raise GraphError(f"cannot sample {count} nodes from {n}")
    rng = SplitMix64(seed)
    perm: dict[int, int] = {}
    out: list[int] = []
    for t in range(count):
        r = t + rng.next_below(n - t)
        vt = perm.get(t, t)
        vr = perm.get(r, r)
        out.append(vr)
        perm[r] = vt
        perm[t] = vr
    return out


def pseudo_coordinates(g: CsrGraph) -> np.ndarray:
    """Per-edge pair ``(deg_i ** -0.5, deg_j ** 0.5)`` for edge ``j -> i``, in
    CSR order. Degrees are smoothed to min 1 so isolated endpoints stay finite.

    The second exponent is +0.5, matching the update rule this models; the
    asymmetry is deliberate, not a typo.
    """
    degs = np.maximum(g.degrees(), 1).astype(np.float64)
    out = np.empty((g.num_edges, 2), dtype=np.float32)
    if g.num_edges == 0:
        return out
    tgt = np.repeat(np.arange(g.num_nodes), np.diff(g.row_offsets))
    out[:, 0] = degs[tgt] ** -0.5
    out[:, 1] = degs[g.col_indices] ** 0.5
    return out


def partition_contiguous(n: int, num_cus: int) -> list[NodeRange]:
    """Split [0, n) into ``num_cus`` contiguous ranges with sizes differing by
    at most 1; the remainder goes to the leading ranges."""
    if num_cus < 1:
        raise GraphError("num_cus must be >= 1")
    if num_cus > n:
        raise GraphError(f"num_cus={num_cus} exceeds n={n}")
    base, rem = divmod(n, num_cus)
    ranges = []
    start = 0
    for k in range(num_cus):
        size = base + (1 if k < rem else 0)
        ranges.append(NodeRange(start, start + size))
        start += size
    return ranges


def generate_regular(n: int, avg_degree: float, seed: int) -> EdgeList:
    """Regular-like synthetic graph: every node draws ``ceil(avg_degree)``
    sources uniformly (self-loops and duplicates possible)."""
    if n < 1:
        raise GraphError("n must be >= 1")
    if avg_degree < 0:
        raise GraphError("avg_degree must be >= 0")
    k = int(np.ceil(avg_degree))
    if k == 0:
        return EdgeList(n, [])
    draws = u64_block(seed, 0, n * k) % np.uint64(n)
    edges = []
    pos = 0
    for i in range(n):
        for _ in range(k):
            edges.append((int(draws[pos]), i))
            pos += 1
    return EdgeList(n, edges)


def generate_powerlaw(n: int, avg_degree: float, seed: int) -> EdgeList:
    """Powerlaw-like synthetic graph via preferential attachment.

    Each new node sends ``round(avg_degree)`` edges to existing nodes chosen
    with probability proportional to (in-degree + 1), producing hub nodes with
    degree far above the average.
    """
    if n < 1:
        raise GraphError("n must be >= 1")
    if avg_degree < 0:
        raise GraphError("avg_degree must be >= 0")
    k = int(round(avg_degree))
    if k == 0 or n == 1:
        return EdgeList(n, [])
    rng = SplitMix64(seed)
    edges: list[tuple[int, int]] = []
    # endpoint pool: each node appears once plus once per received edge
    pool = [0]
    for i in range(1, n):
        for _ in range(min(i, k)):
            dst = pool[rng.next_below(len(pool))]
            edges.append((i, dst))
            pool.append(dst)
        pool.append(i)
    return EdgeList(n, edges)
