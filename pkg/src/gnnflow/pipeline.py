"""Pipeline stage DAGs for the six models, with per-stage timing formulas.

Each model executes as one or two kernels: ordered groups of stages connected
by bounded FIFOs. A stage's cost is an affine function of the node degree:
node-work stages spend ``per_edge`` cycles per incoming edge plus a
``per_node`` epilogue, edge-work stages spend a constant per edge item. The
same formulas drive the discrete-event simulator and the closed-form model,
which is what makes the two agree exactly on a stage's total work.

Published intervals used here: aggregation 4*deg + 2 and grouped VMM d + 36
(reused for every unpublished linear projection); the attention model's
element-wise score stages K + 112 in kernel 1 and, in kernel 2,
K*deg + 2K + 38 (score aggregation), K*deg + K + 17 (softmax), and
K*deg + K + 14 (weighted apply, reused for the duplicated per-edge score
stages); the mixture model's 1, 1, 4 edge stages, d + K + 28 head projection,
and 7K + 10 head sum; the gated model's 10*deg + 72 soft attention and 31
final sum (the 31 is also reused for every unpublished join/sum stage).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .params import DEFAULT_DIMS, MODELS, Dims, ModelError, check_dims

NODE = "node"
EDGE = "edge"

DEFAULT_FIFO_CAPACITY = 16

#: Default compute-unit counts per model.
DEFAULT_NUM_CUS = {"gcn": 2, "sage": 1, "gin": 1, "gat": 1, "monet": 2, "gatedgcn": 1}

STAGE_KINDS = ("memory-read", "memory-write", "aggregation", "vmm", "mhewm",
               "softmax", "gaussian", "soft-attention", "sum", "elementwise")


@dataclass(frozen=True)
class IiFormula:
    """Initiation-interval formula of one stage.

    ``work == "node"``: one item per node, ii(deg) = per_edge*deg + per_node.
    ``work == "edge"``: one item per edge, ii = per_edge (per_node must be 0).
    """

    work: str
    per_edge: int = 0
    per_node: int = 0

    def __post_init__(self):
        if self.work not in (NODE, EDGE):
            raise ModelError(f"bad work class {self.work!r}")
        if self.work == EDGE and self.per_node != 0:
            raise ModelError("edge-work formulas carry no per-node term")
        if self.per_edge < 0 or self.per_node < 0:
            raise ModelError("formula coefficients must be nonnegative")
        floor = self.per_edge if self.work == EDGE else self.per_node
        if floor < 1:
            raise ModelError("ii must evaluate to >= 1 for all degrees")

    def ii(self, degree: int) -> int:
        """Cycles per item at the given node degree."""
        if degree < 0:
            raise ModelError("degree must be >= 0")
        if self.work == EDGE:
            return self.per_edge
        return self.per_edge * degree + self.per_node

    def total(self, n: int, m: int) -> int:
        """Total cycles over a graph with n nodes and m edges; exact because
        the formula is affine in degree."""
        if self.work == EDGE:
            return self.per_edge * m
        return self.per_edge * m + self.per_node * n


def ii_eval(formula: IiFormula, degree: int) -> int:
    return formula.ii(degree)


@dataclass(frozen=True)
class StageSpec:
    id: str
    kind: str
    formula: IiFormula
    latency: int | None = None  # None: default to ii at the graph's average degree

    def __post_init__(self):
        if self.kind not in STAGE_KINDS:
            raise ModelError(f"unknown stage kind {self.kind!r}")
        if self.latency is not None and self.latency < 1:
            raise ModelError("latency must be >= 1")

    def default_latency(self, avg_degree: float) -> int:
        if self.latency is not None:
            return self.latency
        return max(1, math.ceil(self.formula.per_edge * avg_degree + self.formula.per_node))


@dataclass(frozen=True)
class FifoSpec:
    src: str
    dst: str
    capacity: int | None = DEFAULT_FIFO_CAPACITY  # None = unbounded
    width: int = 1          # elements per item (feature-vector length)
    granularity: str = NODE  # items per node: 1 (node) or deg (edge)

    def __post_init__(self):
        if self.capacity is not None and self.capacity < 1:
            raise ModelError("FIFO capacity must be >= 1")
        if self.granularity not in (NODE, EDGE):
            raise ModelError(f"bad FIFO granularity {self.granularity!r}")

    @property
    def name(self) -> str:
        return f"{self.src}->{self.dst}"


@dataclass(frozen=True)
class PipelineSpec:
    model: str
    dims: Dims
    stages: tuple[StageSpec, ...]
    fifos: tuple[FifoSpec, ...]
    kernels: tuple[tuple[str, ...], ...]
    num_cus: int

    def stage(self, stage_id: str) -> StageSpec:
        for s in self.stages:
            if s.id == stage_id:
                return s
        raise ModelError(f"no stage {stage_id!r}")

    def inputs_of(self, stage_id: str) -> list[FifoSpec]:
        return [f for f in self.fifos if f.dst == stage_id]

    def outputs_of(self, stage_id: str) -> list[FifoSpec]:
        return [f for f in self.fifos if f.src == stage_id]

    def kernel_of(self, stage_id: str) -> int:
        for gi, group in enumerate(self.kernels):
            if stage_id in group:
                return gi
        raise ModelError(f"stage {stage_id!r} not in any kernel group")

    def with_capacity(self, capacity: int | None, fifo_name: str | None = None) -> "PipelineSpec":
        """Copy with one FIFO's capacity (or all, when no name given) replaced."""
        fifos = []
        for f in self.fifos:
            if fifo_name is None or f.name == fifo_name:
                fifos.append(FifoSpec(f.src, f.dst, capacity, f.width, f.granularity))
            else:
                fifos.append(f)
        return PipelineSpec(self.model, self.dims, self.stages, tuple(fifos),
                            self.kernels, self.num_cus)

    def to_json(self) -> str:
        obj = {
            "model": self.model,
            "dims": {"in_dim": self.dims.in_dim, "heads": self.dims.heads,
                     "out_dim": self.dims.out_dim},
            "num_cus": self.num_cus,
            "kernels": [list(k) for k in self.kernels],
            "stages": [
                {"id": s.id, "kind": s.kind, "work": s.formula.work,
                 "ii_per_edge": s.formula.per_edge, "ii_per_node": s.formula.per_node,
                 "latency": s.latency}
                for s in self.stages
            ],
            "fifos": [
                {"src": f.src, "dst": f.dst, "capacity": f.capacity,
                 "width": f.width, "granularity": f.granularity}
                for f in self.fifos
            ],
        }
        return json.dumps(obj, indent=2, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def _node(per_node: int) -> IiFormula:
    return IiFormula(NODE, 0, per_node)


def _deg(per_edge: int, per_node: int) -> IiFormula:
    return IiFormula(NODE, per_edge, per_node)


def _edge(per_edge: int) -> IiFormula:
    return IiFormula(EDGE, per_edge)


def _validate(spec: PipelineSpec) -> PipelineSpec:
    ids = [s.id for s in spec.stages]
    if len(set(ids)) != len(ids):
        raise ModelError("duplicate stage ids")
    grouped = [sid for group in spec.kernels for sid in group]
    if sorted(grouped) != sorted(ids):
        raise ModelError("kernel groups must partition the stage set")
    for f in spec.fifos:
        if f.src not in ids or f.dst not in ids:
            raise ModelError(f"FIFO {f.name} references unknown stage")
        if spec.kernel_of(f.src) != spec.kernel_of(f.dst):
            raise ModelError(f"FIFO {f.name} crosses kernel groups")
    for group in spec.kernels:
        _check_acyclic(group, spec)
    return spec


def _check_acyclic(group: tuple[str, ...], spec: PipelineSpec) -> None:
    indeg = {sid: 0 for sid in group}
    succs: dict[str, list[str]] = {sid: [] for sid in group}
    for f in spec.fifos:
        if f.src in indeg and f.dst in indeg:
            indeg[f.dst] += 1
            succs[f.src].append(f.dst)
    ready = [sid for sid, k in indeg.items() if k == 0]
    seen = 0
    while ready:
        sid = ready.pop()
        seen += 1
        for nxt in succs[sid]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
    if seen != len(group):
        raise ModelError("stage graph within a kernel must be acyclic")


def build_pipeline(model: str, dims: Dims | None = None,
                   num_cus: int | None = None) -> PipelineSpec:
    """Stage DAG for ``model`` at ``dims`` (defaults to the shipped dimensions
    and per-model CU counts)."""
    if model not in MODELS:
        raise ModelError(f"unknown model {model!r}")
    dims = check_dims(model, dims or DEFAULT_DIMS[model])
    num_cus = DEFAULT_NUM_CUS[model] if num_cus is None else num_cus
    if num_cus < 1:
        raise ModelError("num_cus must be >= 1")
    d, k, q = dims.in_dim, dims.heads, dims.out_dim
    vmm_ii = d + 36

    if model == "gcn":
        stages = [
            StageSpec("read_nbr", "memory-read", _edge(1)),
            StageSpec("aggregate", "aggregation", _deg(4, 2)),
            StageSpec("vmm_grouped", "vmm", _node(vmm_ii)),
            StageSpec("sum_write", "sum", _node(31)),
        ]
        fifos = [
            FifoSpec("read_nbr", "aggregate", granularity=EDGE, width=d),
            FifoSpec("aggregate", "vmm_grouped", width=d),
            FifoSpec("vmm_grouped", "sum_write", width=d),
        ]
        kernels = [[s.id for s in stages]]

    elif model == "sage":
        stages = [
            StageSpec("read_tar", "memory-read", _node(1)),
            StageSpec("vmm_target", "vmm", _node(vmm_ii)),
            StageSpec("read_nbr", "memory-read", _edge(1)),
            StageSpec("aggregate", "aggregation", _deg(4, 2)),
            StageSpec("vmm_neighbor", "vmm", _node(vmm_ii)),
            StageSpec("sum_write", "sum", _node(31)),
        ]
        fifos = [
            FifoSpec("read_tar", "vmm_target", width=d),
            FifoSpec("vmm_target", "sum_write", width=d),
            FifoSpec("read_nbr", "aggregate", granularity=EDGE, width=d),
            FifoSpec("aggregate", "vmm_neighbor", width=d),
            FifoSpec("vmm_neighbor", "sum_write", width=d),
        ]
        kernels = [[s.id for s in stages]]

    elif model == "gin":
        stages = [
            StageSpec("read_self", "memory-read", _node(1)),
            StageSpec("read_nbr", "memory-read", _edge(1)),
            StageSpec("aggregate", "aggregation", _deg(4, 2)),
            StageSpec("vmm_inner", "vmm", _node(vmm_ii)),
            StageSpec("vmm_outer", "vmm", _node(vmm_ii)),
            StageSpec("write", "memory-write", _node(1)),
        ]
        fifos = [
            FifoSpec("read_self", "aggregate", width=d),
            FifoSpec("read_nbr", "aggregate", granularity=EDGE, width=d),
            FifoSpec("aggregate", "vmm_inner", width=d),
            FifoSpec("vmm_inner", "vmm_outer", width=d),
            FifoSpec("vmm_outer", "write", width=d),
        ]
        kernels = [[s.id for s in stages]]

    elif model == "gat":
        wout = k * q
        k1 = [
            StageSpec("read_h", "memory-read", _node(1)),
            StageSpec("vmm_heads", "vmm", _node(d + 36)),
            StageSpec("ewm_src", "mhewm", _node(k + 112)),
            StageSpec("ewm_dest", "mhewm", _node(k + 112)),
            StageSpec("write_scores", "memory-write", _node(1)),
        ]
        k2 = [
            StageSpec("read_pairs_a", "memory-read", _edge(1)),
            StageSpec("edge_score_a", "mhewm", _deg(k, k + 14)),
            StageSpec("read_pairs_b", "memory-read", _edge(1)),
            StageSpec("edge_score_b", "mhewm", _deg(k, k + 14)),
            StageSpec("agg_scores", "aggregation", _deg(k, 2 * k + 38)),
            StageSpec("softmax", "softmax", _deg(k, k + 17)),
            StageSpec("read_proj", "memory-read", _edge(1)),
            StageSpec("attend", "mhewm", _deg(k, k + 14)),
            StageSpec("write", "memory-write", _node(1)),
        ]
        stages = k1 + k2
        fifos = [
            FifoSpec("read_h", "vmm_heads", width=d),
            FifoSpec("vmm_heads", "ewm_src", width=wout),
            FifoSpec("vmm_heads", "ewm_dest", width=wout),
            FifoSpec("vmm_heads", "write_scores", width=wout),
            FifoSpec("ewm_src", "write_scores", width=k),
            FifoSpec("ewm_dest", "write_scores", width=k),
            FifoSpec("read_pairs_a", "edge_score_a", granularity=EDGE, width=2 * k),
            FifoSpec("edge_score_a", "softmax", granularity=EDGE, width=k),
            FifoSpec("read_pairs_b", "edge_score_b", granularity=EDGE, width=2 * k),
            FifoSpec("edge_score_b", "agg_scores", granularity=EDGE, width=k),
            FifoSpec("agg_scores", "softmax", width=2 * k),
            FifoSpec("softmax", "attend", granularity=EDGE, width=k),
            FifoSpec("read_proj", "attend", granularity=EDGE, width=wout),
            FifoSpec("attend", "write", width=wout),
        ]
        kernels = [[s.id for s in k1], [s.id for s in k2]]

    elif model == "monet":
        stages = [
            StageSpec("read_coords", "memory-read", _edge(1)),
            StageSpec("vmm_coords", "vmm", _edge(1)),
            StageSpec("gaussian", "gaussian", _edge(1)),
            StageSpec("read_nbr", "memory-read", _edge(1)),
            StageSpec("weight_agg", "mhewm", _edge(4)),
            StageSpec("vmm_heads", "vmm", _node(d + k + 28)),
            StageSpec("head_sum", "sum", _node(7 * k + 10)),
            StageSpec("write", "memory-write", _node(1)),
        ]
        fifos = [
            FifoSpec("read_coords", "vmm_coords", granularity=EDGE, width=2),
            FifoSpec("vmm_coords", "gaussian", granularity=EDGE, width=2),
            FifoSpec("gaussian", "weight_agg", granularity=EDGE, width=k),
            FifoSpec("read_nbr", "weight_agg", granularity=EDGE, width=d),
            FifoSpec("weight_agg", "vmm_heads", width=k * d),
            FifoSpec("vmm_heads", "head_sum", width=k * d),
            FifoSpec("head_sum", "write", width=d),
        ]
        kernels = [[s.id for s in stages]]

    elif model == "gatedgcn":
        stages = [
            StageSpec("read_target", "memory-read", _node(1)),
            StageSpec("vmm_a", "vmm", _node(vmm_ii)),
            StageSpec("vmm_e", "vmm", _node(vmm_ii)),
            StageSpec("read_sources", "memory-read", _edge(1)),
            StageSpec("vmm_b", "vmm", _edge(vmm_ii)),
            StageSpec("vmm_d", "vmm", _edge(vmm_ii)),
            StageSpec("read_edges", "memory-read", _edge(1)),
            StageSpec("vmm_c", "vmm", _edge(vmm_ii)),
            StageSpec("soft_attention", "soft-attention", _deg(10, 72)),
            StageSpec("sum_write", "sum", _node(31)),
            StageSpec("write_edges", "memory-write", _edge(1)),
        ]
        fifos = [
            FifoSpec("read_target", "vmm_a", width=d),
            FifoSpec("read_target", "vmm_e", width=d),
            FifoSpec("vmm_a", "soft_attention", width=d),
            FifoSpec("vmm_e", "soft_attention", width=d),
            FifoSpec("read_sources", "vmm_b", granularity=EDGE, width=d),
            FifoSpec("read_sources", "vmm_d", granularity=EDGE, width=d),
            FifoSpec("vmm_b", "soft_attention", granularity=EDGE, width=d),
            FifoSpec("vmm_d", "soft_attention", granularity=EDGE, width=d),
            FifoSpec("read_edges", "vmm_c", granularity=EDGE, width=d),
            FifoSpec("vmm_c", "soft_attention", granularity=EDGE, width=d),
            FifoSpec("soft_attention", "sum_write", width=d),
            FifoSpec("soft_attention", "write_edges", granularity=EDGE, width=d),
        ]
        kernels = [[s.id for s in stages]]

    else:  # pragma: no cover - guarded above
        raise ModelError(model)

    return _validate(PipelineSpec(model, dims, tuple(stages), tuple(fifos),
                                  tuple(tuple(g) for g in kernels), num_cus))
