"""Command-line front end.

Subcommands: ``gen`` (synthetic edge lists), ``run`` (sequential reference),
``pipeline`` (streaming run verified against the reference), ``sim``
(discrete-event cycle simulation), ``model`` (closed-form estimate from a
graph summary), ``characterize`` (instruction mix and locality scores), and
``compare`` (speedup/energy ratios against the shipped baseline tables).

A JSON config file can provide any long-form flag value; explicit flags win.
Reports are plain JSON/CSV without timestamps, so identical configurations
produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import baselines as bl
from . import characterize as ch
from .cyclesim import simulate_cycles, write_report
from .graphs import (DegreeStats, build_csr, generate_powerlaw,
                     generate_regular, load_edge_list, load_summary,
                     sample_nodes, write_edge_list)
from .params import (DEFAULT_DIMS, MODELS, Dims, gen_edge_features,
                     gen_features, gen_params, params_from_tensors,
                     params_to_tensors, parse_dims)
from .perfmodel import HardwareProfile, analytic_cycles, default_profile
from .pipeline import build_pipeline
from .reference import forward
from .streaming import execute_streaming
from .tensorio import load_manifest, save_manifest, save_tensor

SUMMARY_NAMES = ("MT", "MH", "AX", "PT")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _cfg(args, name: str, default=None):
    """Flag value, falling back to the config file, then to ``default``."""
    val = getattr(args, name.replace("-", "_"), None)
    if val is not None:
        return val
    return args._config.get(name, default)


def _resolve_dims(args, model: str) -> Dims:
    text = _cfg(args, "dims")
    if text is None:
        return DEFAULT_DIMS[model]
    if isinstance(text, (list, tuple)):
        text = ",".join(str(x) for x in text)
    return parse_dims(model, str(text))


def _resolve_model(args) -> str:
    model = _cfg(args, "model")
    if model not in MODELS:
        raise SystemExit(f"error: --model must be one of {', '.join(MODELS)}")
    return model


def _load_graph(args):
    path = _cfg(args, "graph")
    if not path:
        raise SystemExit("error: --graph is required")
    g = build_csr(load_edge_list(path))
    return g, Path(path).stem


def _resolve_summary(args) -> tuple[DegreeStats, str]:
    src = _cfg(args, "summary")
    if not src:
        raise SystemExit("error: --summary is required")
    if src in SUMMARY_NAMES:
        with resources.as_file(
                resources.files("gnnflow.data").joinpath(f"{src.lower()}.json")) as p:
            return load_summary(p), src
    return load_summary(src), Path(src).stem


def _resolve_inputs(args, model, dims, g):
    seed = int(_cfg(args, "seed", 42))
    pdir = _cfg(args, "params")
    if pdir:
        manifest_model, tensors = load_manifest(Path(pdir) / "manifest.json")
        if manifest_model != model:
            raise SystemExit(
                f"error: parameter manifest is for {manifest_model!r}, not {model!r}")
        p = params_from_tensors(model, tensors)
    else:
        p = gen_params(model, dims, seed)
    H = gen_features(g.num_nodes, dims.in_dim, seed + 1)
    efeat = (gen_edge_features(g.num_edges, dims.in_dim, seed + 2)
             if model == "gatedgcn" else None)
    return p, H, efeat


def _out_dir(args) -> Path:
    out = Path(_cfg(args, "out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_gen(args) -> int:
    n = int(_cfg(args, "n", 1000))
    avg = float(_cfg(args, "avg-degree", 4))
    topology = _cfg(args, "topology", "regular")
    seed = int(_cfg(args, "seed", 42))
    out = Path(_cfg(args, "out", "graph.txt"))
    if topology == "regular":
        el = generate_regular(n, avg, seed)
    elif topology == "powerlaw":
        el = generate_powerlaw(n, avg, seed)
    else:
        raise SystemExit("error: --topology must be regular or powerlaw")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_edge_list(el, out)
    print(f"wrote {out} (n={n}, m={len(el.edges)}, topology={topology})")
    return 0


def cmd_run(args) -> int:
    model = _resolve_model(args)
    g, gname = _load_graph(args)
    dims = _resolve_dims(args, model)
    p, H, efeat = _resolve_inputs(args, model, dims, g)
    out = _out_dir(args)
    result = forward(model, g, H, p, efeat)
    if model == "gatedgcn":
        nodes, edges = result
        save_tensor(edges, out / "edge_output.gnnh")
    else:
        nodes = result
    save_tensor(nodes, out / "output.gnnh")
    save_manifest(model, params_to_tensors(model, p), out / "params")
    _write_json(out / "report.json", {
        "command": "run", "model": model, "graph": gname,
        "n": g.num_nodes, "m": g.num_edges,
        "output_rows": int(nodes.shape[0]), "output_cols": int(nodes.shape[1]),
        "output_abs_max": float(np.abs(nodes).max()) if nodes.size else 0.0,
    })
    print(f"reference output written to {out / 'output.gnnh'}")
    return 0


def cmd_pipeline(args) -> int:
    model = _resolve_model(args)
    g, gname = _load_graph(args)
    dims = _resolve_dims(args, model)
    p, H, efeat = _resolve_inputs(args, model, dims, g)
    executor = _cfg(args, "executor", "cooperative")
    cus = _cfg(args, "cus")
    spec = build_pipeline(model, dims, None if cus is None else int(cus))
    out = _out_dir(args)

    ref = forward(model, g, H, p, efeat)
    got = execute_streaming(spec, g, H, p, efeat, executor=executor)
    if model == "gatedgcn":
        pairs = [(ref[0], got[0]), (ref[1], got[1])]
    else:
        pairs = [(ref, got)]
    max_rel = 0.0
    for want, have in pairs:
        denom = np.maximum(np.abs(want), 1.0)
        if want.size:
            max_rel = max(max_rel, float((np.abs(want - have) / denom).max()))
    ok = max_rel <= 1e-4
    spec.save(out / "pipeline.json")
    _write_json(out / "report.json", {
        "command": "pipeline", "model": model, "graph": gname,
        "executor": executor, "num_cus": spec.num_cus,
        "max_rel_err": max_rel, "tolerance": 1e-4, "pass": ok,
    })
    print(f"max rel err {'<=' if ok else '>'} 1e-4 ({max_rel:.3e})")
    return 0 if ok else 1


def cmd_sim(args) -> int:
    model = _resolve_model(args)
    g, gname = _load_graph(args)
    dims = _resolve_dims(args, model)
    freq_mhz = _cfg(args, "freq-mhz")
    profile = default_profile(model)
    freq = float(freq_mhz) * 1e6 if freq_mhz is not None else profile.frequency_hz
    cus = _cfg(args, "cus")
    spec = build_pipeline(model, dims, None if cus is None else int(cus))
    cap = _cfg(args, "fifo-capacity")
    if cap is not None:
        spec = spec.with_capacity(None if str(cap) == "unbounded" else int(cap))
    report = simulate_cycles(spec, g, freq, dataset=gname)
    out = _out_dir(args)
    write_report(report, out, "sim")
    spec.save(out / "pipeline.json")
    print(f"simulated {report.total_cycles:.0f} cycles "
          f"({report.seconds:.6g} s at {freq / 1e6:.0f} MHz), "
          f"bottleneck {report.bottleneck}")
    return 0


def cmd_model(args) -> int:
    model = _resolve_model(args)
    stats, dsname = _resolve_summary(args)
    dims = _resolve_dims(args, model)
    profile = default_profile(model)
    freq_mhz = _cfg(args, "freq-mhz")
    cus = _cfg(args, "cus")
    profile = HardwareProfile(
        model,
        float(freq_mhz) * 1e6 if freq_mhz is not None else profile.frequency_hz,
        int(cus) if cus is not None else profile.num_cus)
    report = analytic_cycles(model, stats, dims, profile, dataset=dsname)
    out = _out_dir(args)
    write_report(report, out, "model")
    print(f"predicted {report.total_cycles:.0f} cycles -> {report.seconds:.6g} s "
          f"on {dsname} at {profile.frequency_hz / 1e6:.0f} MHz "
          f"x{profile.num_cus} CU")
    return 0


def cmd_characterize(args) -> int:
    model = _resolve_model(args)
    g, gname = _load_graph(args)
    dims = _resolve_dims(args, model)
    seed = int(_cfg(args, "seed", 42))
    count = min(int(_cfg(args, "sample", 500)), g.num_nodes)
    nodes = sample_nodes(g, count, seed)
    H = gen_features(g.num_nodes, dims.in_dim, seed + 1)
    trace = ch.run_traced(model, g, H, None, nodes, dims=dims, graph_name=gname)
    branch, memory, compute = ch.instruction_mix(trace)
    spatial = ch.spatial_score(trace)
    temporal = ch.temporal_score(trace)
    out = _out_dir(args)
    _write_json(out / "report.json", {
        "command": "characterize", "model": model, "graph": gname,
        "sample_size": count, "seed": seed,
        "events": {"branch": trace.n_branch, "memory": trace.n_memory,
                   "compute": trace.n_compute},
        "instruction_mix": {"branch": branch, "memory": memory,
                            "compute": compute},
        "spatial_score": spatial, "temporal_score": temporal,
    })
    rows = ["model,graph,metric,value",
            f"{model},{gname},branch_fraction,{branch:.6g}",
            f"{model},{gname},memory_fraction,{memory:.6g}",
            f"{model},{gname},compute_fraction,{compute:.6g}",
            f"{model},{gname},spatial_score,{spatial:.6g}",
            f"{model},{gname},temporal_score,{temporal:.6g}"]
    (out / "scores.csv").write_text("\n".join(rows) + "\n")
    if _cfg(args, "dump-trace"):
        trace.dump(out / "trace.gnnt")
    print(f"mix(branch/mem/compute) = {branch:.3f}/{memory:.3f}/{compute:.3f}, "
          f"spatial {spatial:.4f}, temporal {temporal:.4f}")
    return 0


def cmd_compare(args) -> int:
    path = _cfg(args, "baselines")
    rows = bl.load_baselines(path)
    hls_times = {}
    for rp in (_cfg(args, "model-reports") or []):
        obj = json.loads(Path(rp).read_text())
        hls_times[(obj["model"], obj["dataset"])] = obj["seconds"]
    table = bl.speedup_table(rows, hls_times or None)
    out = _out_dir(args)
    (out / "comparison.csv").write_text(bl.comparison_csv(table))
    headed = bl.headline_ratios(table)
    oom = [
        {"model": r.model, "dataset": r.dataset}
        for r in table if r.gpu_oom
    ]
    _write_json(out / "report.json", {
        "command": "compare", "headline": headed, "gpu_oom_rows": oom,
        "rows": len(table),
    })
    print(f"max CPU speedup {headed['max_cpu_speedup']:.3g}x, "
          f"max GPU speedup {headed['max_gpu_speedup']:.3g}x, "
          f"{len(oom)} GPU OoM rows flagged")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gnnflow",
        description="GNN dataflow pipelines: reference runs, streaming "
                    "verification, cycle simulation, analytic modeling, "
                    "characterization, and baseline comparison.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file with default flag values")
        p.add_argument("--out", help="output directory or file")
        p.add_argument("--seed", type=int, help="seed for generated inputs")

    p = sub.add_parser("gen", help="generate a synthetic edge-list file")
    common(p)
    p.add_argument("--n", type=int, help="node count")
    p.add_argument("--avg-degree", type=float, help="target average in-degree")
    p.add_argument("--topology", choices=("regular", "powerlaw"))

    for name, fn_help in (("run", "sequential reference forward"),
                          ("pipeline", "streaming run checked against the reference"),
                          ("sim", "discrete-event cycle simulation"),
                          ("characterize", "instruction mix and locality scores")):
        p = sub.add_parser(name, help=fn_help)
        common(p)
        p.add_argument("--model", choices=MODELS)
        p.add_argument("--graph", help="edge-list file")
        p.add_argument("--dims", help="feature dims: d or in,heads,out")
        if name in ("run", "pipeline"):
            p.add_argument("--params", help="directory with a parameter manifest")
        if name == "pipeline":
            p.add_argument("--executor", choices=("cooperative", "threaded"))
            p.add_argument("--cus", type=int)
        if name == "sim":
            p.add_argument("--cus", type=int)
            p.add_argument("--freq-mhz", type=float)
            p.add_argument("--fifo-capacity",
                           help="items per FIFO, or 'unbounded'")
        if name == "characterize":
            p.add_argument("--sample", type=int, help="sampled node count")
            p.add_argument("--dump-trace", action="store_true", default=None)

    p = sub.add_parser("model", help="closed-form estimate from a graph summary")
    common(p)
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--summary", help="summary name (MT/MH/AX/PT) or JSON path")
    p.add_argument("--dims")
    p.add_argument("--cus", type=int)
    p.add_argument("--freq-mhz", type=float)

    p = sub.add_parser("compare", help="speedup/energy ratios vs shipped baselines")
    common(p)
    p.add_argument("--baselines", help="override the shipped baselines CSV")
    p.add_argument("--model-reports", nargs="*",
                   help="model report.json files supplying predicted seconds")

    return ap


COMMANDS = {
    "gen": cmd_gen, "run": cmd_run, "pipeline": cmd_pipeline, "sim": cmd_sim,
    "model": cmd_model, "characterize": cmd_characterize, "compare": cmd_compare,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args._config = _load_config(args.config)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
