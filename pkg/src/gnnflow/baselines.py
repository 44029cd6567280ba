"""Shipped CPU/GPU/HLS measurement tables and speedup/energy ratios.

The baseline CSV records previously measured execution times and energies per
(model, dataset, platform); this artifact never re-measures them. GPU runs of
the anisotropic models on PT ran out of memory and carry an ``oom`` flag
instead of numbers.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

log = logging.getLogger(__name__)

DATASETS = ("MT", "MH", "AX", "PT")


@dataclass(frozen=True)
class BaselineRow:
    model: str
    dataset: str
    platform: str  # cpu | gpu | hls
    time_s: float | None
    energy_j: float | None
    oom: bool


def _parse_rows(text: str) -> list[BaselineRow]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        oom = rec["oom"].strip() == "1"
        rows.append(BaselineRow(
            model=rec["model"], dataset=rec["dataset"], platform=rec["platform"],
            time_s=None if oom else float(rec["time_s"]),
            energy_j=None if oom else float(rec["energy_j"]),
            oom=oom))
    return rows


def load_baselines(path: str | Path | None = None) -> list[BaselineRow]:
    """Load the shipped baselines CSV (or a user-provided one)."""
    if path is None:
        text = resources.files("gnnflow.data").joinpath("baselines.csv").read_text()
    else:
        text = Path(path).read_text()
    return _parse_rows(text)


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    dataset: str
    hls_time_s: float
    cpu_speedup: float | None
    gpu_speedup: float | None
    cpu_energy_reduction: float | None
    gpu_energy_reduction: float | None
    gpu_oom: bool


def speedup_table(baselines: list[BaselineRow],
                  hls_times: dict[tuple[str, str], float] | None = None
                  ) -> list[ComparisonRow]:
    """Per (model, dataset) ratios of baseline cost to HLS cost.

    By default the HLS column of the shipped table provides the denominator;
    ``hls_times`` substitutes other predictions (e.g. the analytic model) for
    the time ratios, in which case energy ratios for those keys are omitted.
    Missing keys produce a warning, never a failure.
    """
    by_key: dict[tuple[str, str, str], BaselineRow] = {
        (r.model, r.dataset, r.platform): r for r in baselines}
    keys = sorted({(r.model, r.dataset) for r in baselines},
                  key=lambda k: (k[0], DATASETS.index(k[1]) if k[1] in DATASETS else 99))
    out: list[ComparisonRow] = []
    for model, dataset in keys:
        cpu = by_key.get((model, dataset, "cpu"))
        gpu = by_key.get((model, dataset, "gpu"))
        hls = by_key.get((model, dataset, "hls"))
        substituted = hls_times is not None and (model, dataset) in hls_times
        hls_time = hls_times[(model, dataset)] if substituted else (
            hls.time_s if hls else None)
        if hls_time is None or hls_time <= 0:
            log.warning("no HLS time for (%s, %s); skipping", model, dataset)
            continue
        hls_energy = hls.energy_j if (hls and not substituted) else None

        def ratio(base: BaselineRow | None, attr: str, denom: float | None):
            if base is None:
                log.warning("missing %s row for (%s, %s)", attr, model, dataset)
                return None
            if base.oom or denom is None:
                return None
            value = getattr(base, attr)
            return None if value is None else value / denom

        out.append(ComparisonRow(
            model=model, dataset=dataset, hls_time_s=hls_time,
            cpu_speedup=ratio(cpu, "time_s", hls_time),
            gpu_speedup=ratio(gpu, "time_s", hls_time),
            cpu_energy_reduction=ratio(cpu, "energy_j", hls_energy),
            gpu_energy_reduction=ratio(gpu, "energy_j", hls_energy),
            gpu_oom=bool(gpu.oom) if gpu else False))
    return out


def comparison_csv(rows: list[ComparisonRow]) -> str:
    """Long-format CSV: model,dataset,metric,value (plus gpu_oom flag rows)."""
    lines = ["model,dataset,metric,value"]
    for r in rows:
        for metric in ("cpu_speedup", "gpu_speedup",
                       "cpu_energy_reduction", "gpu_energy_reduction"):
            v = getattr(r, metric)
            if v is not None:
                lines.append(f"{r.model},{r.dataset},{metric},{v:.6g}")
        if r.gpu_oom:
            lines.append(f"{r.model},{r.dataset},gpu_oom,1")
    return "\n".join(lines) + "\n"


def headline_ratios(rows: list[ComparisonRow]) -> dict[str, float | None]:
    """Maxima across the table, OoM cells excluded."""
    def _max(metric):
        vals = [getattr(r, metric) for r in rows if getattr(r, metric) is not None]
        return max(vals) if vals else None

    return {
        "max_cpu_speedup": _max("cpu_speedup"),
        "max_gpu_speedup": _max("gpu_speedup"),
        "max_cpu_energy_reduction": _max("cpu_energy_reduction"),
        "max_gpu_energy_reduction": _max("gpu_energy_reduction"),
    }
