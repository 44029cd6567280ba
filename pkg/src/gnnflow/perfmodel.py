"""Closed-form cycle and runtime estimation from the published II formulas.

Every stage interval is affine in node degree, so its total over a graph
depends only on the node and edge counts: a node-work stage costs
``per_edge * m + per_node * n`` cycles, an edge-work stage ``ii * m``. A
kernel group is paced by its most expensive stage, groups run back to back,
and compute units divide the total ideally. This evaluates the same stage
catalog the simulator executes, so the model equals the simulator's
bottleneck bound exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .graphs import CsrGraph, DegreeStats, degree_stats
from .params import MODELS, Dims, ModelError
from .pipeline import IiFormula, PipelineSpec, build_pipeline, ii_eval  # noqa: F401
from .cyclesim import CycleReport


@dataclass(frozen=True)
class HardwareProfile:
    """Per-model deployment point: achieved clock and compute-unit count."""

    model: str
    frequency_hz: float
    num_cus: int

    def __post_init__(self):
        if self.frequency_hz <= 0:
            raise ModelError("frequency must be positive")
        if self.num_cus < 1:
            raise ModelError("num_cus must be >= 1")


def load_hardware_profiles() -> dict[str, HardwareProfile]:
    """Shipped per-model profiles (achieved frequencies, CU counts)."""
    text = resources.files("gnnflow.data").joinpath("hardware.json").read_text()
    obj = json.loads(text)
    return {name: HardwareProfile(name, float(rec["frequency_mhz"]) * 1e6,
                                  int(rec["num_cus"]))
            for name, rec in obj.items()}


def default_profile(model: str) -> HardwareProfile:
    if model not in MODELS:
        raise ModelError(f"unknown model {model!r}")
    return load_hardware_profiles()[model]


def analytic_cycles(model: str, stats: DegreeStats | CsrGraph,
                    dims: Dims | None = None,
                    profile: HardwareProfile | None = None,
                    num_cus: int | None = None,
                    dataset: str = "") -> CycleReport:
    """Closed-form cycle report for ``model`` on a graph summary.

    ``stats`` needs only node and edge counts; a concrete graph is reduced to
    its summary. The profile defaults to the shipped hardware table, and
    ``num_cus`` (when given) overrides the profile's CU count.
    """
    if isinstance(stats, CsrGraph):
        stats = degree_stats(stats)
    profile = profile or default_profile(model)
    cus = num_cus if num_cus is not None else profile.num_cus
    spec = build_pipeline(model, dims, cus)
    return analytic_from_spec(spec, stats, profile.frequency_hz, dataset)


def analytic_from_spec(spec: PipelineSpec, stats: DegreeStats,
                       frequency_hz: float, dataset: str = "") -> CycleReport:
    """Evaluate a concrete pipeline spec against (n, m) in closed form."""
    n, m = stats.n, stats.m
    stage_cycles = {s.id: s.formula.total(n, m) for s in spec.stages}
    kernel_cycles = []
    for group in spec.kernels:
        kernel_cycles.append(max(stage_cycles[sid] for sid in group))
    bound = sum(kernel_cycles)
    total = bound / spec.num_cus if n else 0.0
    bottleneck = max(stage_cycles, key=stage_cycles.get)
    avg = stats.avg_degree if n else 0.0
    lat = sum(s.default_latency(avg) for s in spec.stages)
    return CycleReport(
        model=spec.model, source="analytic", n=n, m=m, num_cus=spec.num_cus,
        frequency_hz=frequency_hz, stage_cycles=stage_cycles,
        kernel_cycles=kernel_cycles, total_cycles=total, bound_cycles=bound,
        sum_latencies=lat, bottleneck=bottleneck,
        cu_totals=[], dataset=dataset)


def stage_formulas(model: str, dims: Dims | None = None) -> dict[str, IiFormula]:
    """The II formula catalog of one model, keyed by stage id."""
    spec = build_pipeline(model, dims, 1)
    return {s.id: s.formula for s in spec.stages}
