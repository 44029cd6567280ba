"""GNN inference as FIFO dataflow pipelines.

Six message-passing layers (isotropic: gcn, sage, gin; anisotropic: gat,
monet, gatedgcn) each come with a sequential reference implementation, a
streaming stage-DAG execution that must match it, a discrete-event cycle
simulation, a closed-form performance model built on per-stage initiation
intervals, and a workload characterizer producing instruction mixes and
memory locality scores.
"""

from .graphs import (CsrGraph, DegreeStats, EdgeList, NodeRange, build_csr,
                     degree_stats, generate_powerlaw, generate_regular,
                     load_edge_list, load_summary, parse_edge_list,
                     partition_contiguous, pseudo_coordinates, sample_nodes)
from .params import (DEFAULT_DIMS, MODELS, Dims, GatParams, GatedParams,
                     GcnParams, GinParams, MonetParams, SageParams,
                     gen_edge_features, gen_features, gen_params)
from .pipeline import (DEFAULT_NUM_CUS, FifoSpec, IiFormula, PipelineSpec,
                       StageSpec, build_pipeline, ii_eval)
from .reference import (activation, forward, gat_forward, gatedgcn_forward,
                        gcn_forward, gin_forward, monet_forward, sage_forward,
                        vmm)
from .streaming import execute_streaming
from .cyclesim import CycleReport, simulate_cycles
from .perfmodel import HardwareProfile, analytic_cycles, default_profile
from .baselines import BaselineRow, load_baselines, speedup_table
from .characterize import (Trace, instruction_mix, run_traced, spatial_score,
                           temporal_score)

__version__ = "0.1.0"
