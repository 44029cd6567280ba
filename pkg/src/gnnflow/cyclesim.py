"""Discrete-event cycle simulation of a pipeline spec.

Every stage walks the node sequence of its compute unit. Per node it consumes
one item from each node-granular input, then one item per incoming edge from
each edge-granular input (spending its per-edge cycles on each), runs its
per-node epilogue, and emits to its outputs. A get blocks on an empty FIFO, a
put blocks on a full one; FIFO transfers themselves are free. The first timed
delay of a stage is widened to its pipeline-fill latency, so a lone stage
with unit interval and latency L finishes N items in N + L - 1 cycles.

Compute units partition the node range contiguously and are simulated
independently; kernel groups of one CU run back to back (intermediate results
cross groups through memory, not FIFOs).
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import CsrGraph, DegreeStats, partition_contiguous
from .pipeline import EDGE, NODE, PipelineSpec, StageSpec


class SimulationError(RuntimeError):
    pass


@dataclass
class CycleReport:
    """Cycle totals of one pipeline run (simulated or closed-form).

    ``stage_cycles`` holds each stage's total work over the full graph,
    identical between the simulator and the analytic model by construction.
    ``bound_cycles`` is the bottleneck bound: per kernel group the maximum
    stage work, summed over groups (full graph, undivided by CUs).
    ``kernel_cycles`` is per-group makespan for a simulation, per-group
    bottleneck work for the analytic model. ``total_cycles`` divides ideally
    across CUs for the analytic model and is the slowest CU's makespan for a
    simulation.
    """

    model: str
    source: str                       # "simulation" | "analytic"
    n: int
    m: int
    num_cus: int
    frequency_hz: float
    stage_cycles: dict[str, int]
    kernel_cycles: list[int]
    total_cycles: float
    bound_cycles: int
    sum_latencies: int
    bottleneck: str
    cu_totals: list[int] = field(default_factory=list)
    dataset: str = ""

    @property
    def seconds(self) -> float:
        return self.total_cycles / self.frequency_hz if self.frequency_hz else 0.0

    def to_dict(self) -> dict:
        return {
            "model": self.model, "source": self.source, "dataset": self.dataset,
            "n": self.n, "m": self.m, "num_cus": self.num_cus,
            "frequency_hz": self.frequency_hz,
            "stage_cycles": dict(self.stage_cycles),
            "kernel_cycles": list(self.kernel_cycles),
            "total_cycles": self.total_cycles,
            "bound_cycles": self.bound_cycles,
            "sum_latencies": self.sum_latencies,
            "bottleneck": self.bottleneck,
            "cu_totals": list(self.cu_totals),
            "seconds": self.seconds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_rows(self) -> list[dict]:
        rows = []
        for sid, cyc in self.stage_cycles.items():
            rows.append({"model": self.model, "dataset": self.dataset, "stage": sid,
                         "cycles": cyc, "bottleneck": int(sid == self.bottleneck),
                         "seconds": cyc / self.frequency_hz if self.frequency_hz else 0.0})
        rows.append({"model": self.model, "dataset": self.dataset, "stage": "TOTAL",
                     "cycles": self.total_cycles, "bottleneck": self.bottleneck,
                     "seconds": self.seconds})
        return rows


def _degree_array(source: CsrGraph | DegreeStats) -> np.ndarray:
    if isinstance(source, CsrGraph):
        return source.degrees()
    if isinstance(source, DegreeStats):
        if not source.has_degrees:
            raise SimulationError(
                "cycle simulation needs per-node degrees; summary-only stats "
                "belong to the analytic model")
        return source.degrees
    raise SimulationError(f"unsupported degree source {type(source).__name__}")


class _Fifo:
    __slots__ = ("capacity", "count", "waiting_get", "waiting_put")

    def __init__(self, capacity: int | None):
        self.capacity = capacity
        self.count = 0
        self.waiting_get: int | None = None
        self.waiting_put: int | None = None


def _stage_proc(stage: StageSpec, in_node, in_edge, out_node, out_edge,
                degs: np.ndarray, latency: int):
    """Generator of ('delay', c) | ('get', fifo) | ('put', fifo) events."""
    f = stage.formula
    per_edge = f.per_edge
    epilogue = f.per_node if f.work == NODE else 0
    edge_phase = per_edge > 0 or in_edge or out_edge
    first = True
    for deg in degs:
        for q in in_node:
            yield ("get", q)
        if edge_phase:
            for _ in range(int(deg)):
                for q in in_edge:
                    yield ("get", q)
                if per_edge:
                    d = max(latency, per_edge) if first else per_edge
                    first = False
                    yield ("delay", d)
                for q in out_edge:
                    yield ("put", q)
        if epilogue:
            d = max(latency, epilogue) if first else epilogue
            first = False
            yield ("delay", d)
        for q in out_node:
            yield ("put", q)


def _run_group(spec: PipelineSpec, group: tuple[str, ...], degs: np.ndarray,
               latencies: dict[str, int]) -> int:
    """Simulate one kernel group over one CU's node slice; returns makespan."""
    stage_ids = list(group)
    fifo_specs = [f for f in spec.fifos
                  if f.src in stage_ids and f.dst in stage_ids]
    fifos = [_Fifo(f.capacity) for f in fifo_specs]
    index = {f.name: i for i, f in enumerate(fifo_specs)}

    procs = []
    for sid in stage_ids:
        st = spec.stage(sid)
        ins = [f for f in fifo_specs if f.dst == sid]
        outs = [f for f in fifo_specs if f.src == sid]
        procs.append(_stage_proc(
            st,
            [index[f.name] for f in ins if f.granularity == NODE],
            [index[f.name] for f in ins if f.granularity == EDGE],
            [index[f.name] for f in outs if f.granularity == NODE],
            [index[f.name] for f in outs if f.granularity == EDGE],
            degs, latencies[sid]))

    pending: list[tuple[str, int] | None] = [None] * len(procs)
    done = [False] * len(procs)
    heap: list[tuple[int, int, int]] = []
    seq = 0
    for si in range(len(procs)):
        heapq.heappush(heap, (0, seq, si))
        seq += 1
    now = 0

    def wake(si: int, t: int):
        nonlocal seq
        heapq.heappush(heap, (t, seq, si))
        seq += 1

    while heap:
        now, _, si = heapq.heappop(heap)
        if done[si]:
            continue
        gen = procs[si]
        while True:
            op = pending[si]
            pending[si] = None
            if op is not None:
                kind, qi = op
                q = fifos[qi]
                if kind == "get":
                    if q.count == 0:
                        pending[si] = op
                        q.waiting_get = si
                        break
                    q.count -= 1
                    if q.waiting_put is not None:
                        # claim the parked producer so a later op cannot
                        # wake it a second time
                        wake(q.waiting_put, now)
                        q.waiting_put = None
                else:  # put
                    if q.capacity is not None and q.count >= q.capacity:
                        pending[si] = op
                        q.waiting_put = si
                        break
                    q.count += 1
                    if q.waiting_get is not None:
                        wake(q.waiting_get, now)
                        q.waiting_get = None
            try:
                ev = next(gen)
            except StopIteration:
                done[si] = True
                break
            if ev[0] == "delay":
                wake(si, now + ev[1])
                break
            pending[si] = (ev[0], ev[1])

    if not all(done):
        stuck = [group[i] for i, d in enumerate(done) if not d]
        raise SimulationError(
            f"FIFO protocol violation: stages {stuck} blocked forever "
            f"(producer/consumer item counts disagree)")
    return now


def simulate_cycles(spec: PipelineSpec, degree_source: CsrGraph | DegreeStats,
                    frequency_hz: float, dataset: str = "") -> CycleReport:
    """Discrete-event simulation of ``spec`` over a concrete degree sequence."""
    degs = _degree_array(degree_source)
    n = int(degs.shape[0])
    m = int(degs.sum())
    avg = m / n if n else 0.0
    latencies = {s.id: s.default_latency(avg) for s in spec.stages}

    stage_cycles = {s.id: s.formula.total(n, m) for s in spec.stages}
    bound = 0
    kernel_work: list[int] = []
    for group in spec.kernels:
        w = max(stage_cycles[sid] for sid in group)
        kernel_work.append(w)
        bound += w

    num_cus = min(spec.num_cus, n) if n else 1
    ranges = partition_contiguous(n, num_cus) if n else []
    cu_totals: list[int] = []
    kernel_makespans = [0] * len(spec.kernels)
    for r in ranges:
        total = 0
        for gi, group in enumerate(spec.kernels):
            span = _run_group(spec, group, degs[r.start:r.end], latencies)
            kernel_makespans[gi] = max(kernel_makespans[gi], span)
            total += span
        cu_totals.append(total)

    total_cycles = max(cu_totals) if cu_totals else 0
    bottleneck = max(stage_cycles, key=stage_cycles.get)
    return CycleReport(
        model=spec.model, source="simulation", n=n, m=m, num_cus=num_cus,
        frequency_hz=frequency_hz, stage_cycles=stage_cycles,
        kernel_cycles=kernel_makespans, total_cycles=total_cycles,
        bound_cycles=bound, sum_latencies=sum(latencies.values()),
        bottleneck=bottleneck, cu_totals=cu_totals, dataset=dataset)


def write_report(report: CycleReport, out_dir: str | Path, stem: str) -> None:
    """Emit ``<stem>.json`` and ``<stem>.csv`` under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stem}.json").write_text(report.to_json() + "\n")
    rows = report.csv_rows()
    header = ["model", "dataset", "stage", "cycles", "bottleneck", "seconds"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(row[h]) for h in header))
    (out_dir / f"{stem}.csv").write_text("\n".join(lines) + "\n")
