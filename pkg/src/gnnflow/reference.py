"""Sequential reference implementations of the six GNN layers.

These are the plainly-correct forms every other execution path is checked
against. All arithmetic is float32 with a pinned accumulation order: neighbor
sums run over ascending source index, vector-matrix products accumulate over
ascending input column. The column-stepped helpers below reproduce that
scalar order exactly while staying vectorized across rows, so outputs are
bit-stable for a given platform.

Conventions: ``H`` is (n, d) float32, node ``i`` aggregates over its CSR row
(the sources of edges into ``i``); an empty row contributes a zero vector.
"""

from __future__ import annotations

import numpy as np

from .graphs import CsrGraph, pseudo_coordinates
from .params import (Dims, GatParams, GatedParams, GcnParams, GinParams,
                     ModelError, MonetParams, SageParams)

F32 = np.float32


class DimensionError(ValueError):
    pass


def _check(H: np.ndarray, g: CsrGraph, d_expected: int, what: str = "H") -> np.ndarray:
    H = np.ascontiguousarray(H, dtype=F32)
    if H.ndim != 2 or H.shape[0] != g.num_nodes or H.shape[1] != d_expected:
        raise DimensionError(
            f"{what}: expected ({g.num_nodes}, {d_expected}), got {H.shape}")
    return H


# ---------------------------------------------------------------------------
# activations

def relu(x):
    return np.maximum(np.asarray(x, dtype=F32), F32(0))


def elu(x):
    x = np.asarray(x, dtype=F32)
    neg = np.expm1(np.minimum(x, F32(0)), dtype=F32)
    return np.where(x > 0, x, neg).astype(F32)


def leaky_relu(x, slope: float = 0.2):
    x = np.asarray(x, dtype=F32)
    return np.where(x > 0, x, F32(slope) * x).astype(F32)


def sigmoid(x):
    x = np.asarray(x, dtype=F32)
    pos = 1.0 / (1.0 + np.exp(-np.abs(x, dtype=F32), dtype=F32))
    return np.where(x >= 0, pos, 1.0 - pos).astype(F32)


def tanh(x):
    return np.tanh(np.asarray(x, dtype=F32), dtype=F32)


def activation(kind: str, x, slope: float = 0.2):
    """Scalar/array activation dispatch: relu, elu, leaky_relu, sigmoid, tanh."""
    table = {"relu": relu, "elu": elu, "sigmoid": sigmoid, "tanh": tanh}
    if kind == "leaky_relu":
        return leaky_relu(x, slope)
    if kind not in table:
        raise ModelError(f"unknown activation {kind!r}")
    return table[kind](x)


# ---------------------------------------------------------------------------
# pinned-order linear algebra

def vmm(x: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``out[r] = sum_c M[r, c] * x[c]`` accumulated over ascending ``c``.

    Bitwise identical to the scalar double loop in float32.
    """
    x = np.asarray(x, dtype=F32)
    M = np.asarray(M, dtype=F32)
    if M.ndim != 2 or x.ndim != 1 or M.shape[1] != x.shape[0]:
        raise DimensionError(f"vmm: M {M.shape} incompatible with x {x.shape}")
    acc = np.zeros(M.shape[0], dtype=F32)
    for c in range(M.shape[1]):
        acc += M[:, c] * x[c]
    return acc


def vmm_rows(X: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Row-wise ``X @ M.T`` with the same ascending-column order as :func:`vmm`,
    one fused multiply-free step per input column."""
    X = np.asarray(X, dtype=F32)
    M = np.asarray(M, dtype=F32)
    if X.shape[1] != M.shape[1]:
        raise DimensionError(f"vmm_rows: M {M.shape} incompatible with X {X.shape}")
    acc = np.zeros((X.shape[0], M.shape[0]), dtype=F32)
    for c in range(M.shape[1]):
        acc += X[:, c:c + 1] * M[:, c]
    return acc


def aggregate_sum(g: CsrGraph, H: np.ndarray) -> np.ndarray:
    """Per-node neighbor sum over ascending source index; zeros for empty rows."""
    out = np.zeros((g.num_nodes, H.shape[1]), dtype=F32)
    for i in range(g.num_nodes):
        acc = out[i]
        for j in g.row(i):
            acc += H[j]
    return out


# ---------------------------------------------------------------------------
# forwards

def gcn_forward(g: CsrGraph, H: np.ndarray, p: GcnParams) -> np.ndarray:
    """ReLU(U . sum_j h_j) per node."""
    d = p.U.shape[1]
    if p.U.shape[0] != p.U.shape[1]:
        raise DimensionError("GCN weight must be square")
    H = _check(H, g, d)
    agg = aggregate_sum(g, H)
    return relu(vmm_rows(agg, p.U))


def sage_forward(g: CsrGraph, H: np.ndarray, p: SageParams) -> np.ndarray:
    """ReLU(V . h_i + W . mean_j h_j); the mean over an empty row is zero."""
    d = p.V.shape[1]
    if p.V.shape != p.W.shape or p.V.shape[0] != d:
        raise DimensionError("GraphSage weights must be square and equal-shaped")
    H = _check(H, g, d)
    mean = aggregate_sum(g, H)
    degs = g.degrees()
    nz = degs > 0
    mean[nz] = mean[nz] / degs[nz, None].astype(F32)
    return relu(vmm_rows(H, p.V) + vmm_rows(mean, p.W))


def gin_forward(g: CsrGraph, H: np.ndarray, p: GinParams) -> np.ndarray:
    """ReLU(U . ReLU(V . ((1 + eps) h_i + sum_j h_j)))."""
    d = p.U.shape[1]
    if p.U.shape != p.V.shape or p.U.shape[0] != d:
        raise DimensionError("GIN weights must be square and equal-shaped")
    H = _check(H, g, d)
    acc = (F32(1.0 + p.eps) * H) + aggregate_sum(g, H)
    inner = relu(vmm_rows(acc, p.V))
    return relu(vmm_rows(inner, p.U))


def gat_forward(g: CsrGraph, H: np.ndarray, p: GatParams) -> np.ndarray:
    """Multi-head attention layer; heads concatenated over ascending head index.

    Per head: z = U h; e_ij = LeakyReLU(a_src . z_i + a_dest . z_j) for source
    neighbor j of target i; attention is the softmax of e over the row
    (computed with max subtraction); head output is ELU(sum_j alpha_ij z_j).
    An empty row yields ELU(0) = 0.
    """
    K, q, d_in = p.U.shape
    H = _check(H, g, d_in)
    if p.a_src.shape != (K, q) or p.a_dest.shape != (K, q):
        raise DimensionError("attention vectors must be (heads, out_dim)")
    slope = F32(p.leaky_slope)

    # node-wise projections and attention halves, per head
    z = np.empty((g.num_nodes, K, q), dtype=F32)
    for k in range(K):
        z[:, k, :] = vmm_rows(H, p.U[k])
    el = np.empty((g.num_nodes, K), dtype=F32)
    er = np.empty((g.num_nodes, K), dtype=F32)
    for k in range(K):
        el[:, k] = _dot_cols(z[:, k, :], p.a_src[k])
        er[:, k] = _dot_cols(z[:, k, :], p.a_dest[k])

    out = np.zeros((g.num_nodes, K * q), dtype=F32)
    for i in range(g.num_nodes):
        row = g.row(i)
        if row.shape[0] == 0:
            continue
        e = leaky_relu(el[i][None, :] + er[row], slope)     # (deg, K)
        mx = e.max(axis=0)
        ex = np.exp(e - mx, dtype=F32)
        s = _sum_rows(ex)                                   # (K,)
        alpha = ex / s
        acc = np.zeros((K, q), dtype=F32)
        for t, j in enumerate(row):
            acc += alpha[t][:, None] * z[j]
        out[i] = elu(acc).reshape(-1)
    return out


def _dot_cols(Z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Row-wise dot product ``sum_c Z[:, c] * a[c]`` over ascending ``c``."""
    acc = np.zeros(Z.shape[0], dtype=F32)
    for c in range(Z.shape[1]):
        acc += Z[:, c] * a[c]
    return acc


def _sum_rows(E: np.ndarray) -> np.ndarray:
    """Column sums accumulated over ascending row index."""
    acc = np.zeros(E.shape[1], dtype=F32)
    for t in range(E.shape[0]):
        acc += E[t]
    return acc


def monet_forward(g: CsrGraph, H: np.ndarray, p: MonetParams) -> np.ndarray:
    """Gaussian-mixture weighted aggregation with the head projection hoisted
    to node level: ReLU(sum_k U_k . sum_j w_k(u_ij) h_j).

    u_ij = Tanh(V2 . pseudo_ij + v2); w_k uses the diagonal inverse covariance.
    """
    K, d, d2 = p.U.shape
    if d != d2:
        raise DimensionError("MoNet head weights must be square")
    if p.mu.shape != (K, 2) or p.sigma_inv.shape != (K, 2):
        raise DimensionError("mu and sigma_inv must be (heads, 2)")
    H = _check(H, g, d)
    pseudo = pseudo_coordinates(g)                           # (m, 2)
    u = tanh(vmm_rows(pseudo, np.asarray(p.V2, dtype=F32)) + np.asarray(p.v2, dtype=F32))
    w = gaussian_weights(u, p.mu, p.sigma_inv)               # (m, K)

    agg = np.zeros((g.num_nodes, K, d), dtype=F32)
    for i in range(g.num_nodes):
        lo, hi = g.row_offsets[i], g.row_offsets[i + 1]
        acc = agg[i]
        for pos in range(lo, hi):
            acc += w[pos][:, None] * H[g.col_indices[pos]]
    out = np.zeros((g.num_nodes, d), dtype=F32)
    for k in range(K):
        out += vmm_rows(agg[:, k, :], p.U[k])
    return relu(out)


def gaussian_weights(u: np.ndarray, mu: np.ndarray, sigma_inv: np.ndarray) -> np.ndarray:
    """(m, K) weights exp(-0.5 * sum_c sigma_inv[k, c] * (u[:, c] - mu[k, c])**2)."""
    m = u.shape[0]
    K = mu.shape[0]
    w = np.empty((m, K), dtype=F32)
    for k in range(K):
        dist = np.zeros(m, dtype=F32)
        for c in range(2):
            diff = u[:, c] - F32(mu[k, c])
            dist += F32(sigma_inv[k, c]) * (diff * diff)
        w[:, k] = np.exp(F32(-0.5) * dist, dtype=F32)
    return w


def gatedgcn_forward(g: CsrGraph, H: np.ndarray, efeat: np.ndarray,
                     p: GatedParams) -> tuple[np.ndarray, np.ndarray]:
    """Edge-gated layer; returns the updated node and edge features.

    e'_ij = E h_i + D h_j + C e_ij per edge; the node update is
    ReLU(A h_i + (sum_j B h_j * sig(e'_ij)) / (sum_j sig(e'_ij) + eps)),
    elementwise in the feature dimension.
    """
    d = p.A.shape[1]
    for name in ("A", "B", "C", "D", "E"):
        if getattr(p, name).shape != (d, d):
            raise DimensionError("GatedGCN weights must all be (d, d)")
    H = _check(H, g, d)
    efeat = np.ascontiguousarray(efeat, dtype=F32)
    if efeat.shape != (g.num_edges, d):
        raise DimensionError(
            f"edge features: expected ({g.num_edges}, {d}), got {efeat.shape}")

    Ah = vmm_rows(H, p.A)
    Bh = vmm_rows(H, p.B)
    Dh = vmm_rows(H, p.D)
    Eh = vmm_rows(H, p.E)
    Ce = vmm_rows(efeat, p.C)

    e_out = np.empty_like(efeat)
    out = np.zeros((g.num_nodes, d), dtype=F32)
    eps = F32(p.eps_stab)
    for i in range(g.num_nodes):
        lo, hi = g.row_offsets[i], g.row_offsets[i + 1]
        num = np.zeros(d, dtype=F32)
        den = np.zeros(d, dtype=F32)
        for pos in range(lo, hi):
            j = g.col_indices[pos]
            e_new = Eh[i] + Dh[j] + Ce[pos]
            e_out[pos] = e_new
            s = sigmoid(e_new)
            num += Bh[j] * s
            den += s
        out[i] = relu(Ah[i] + num / (den + eps))
    return out, e_out


def forward(model: str, g: CsrGraph, H: np.ndarray, params,
            efeat: np.ndarray | None = None):
    """Dispatch a forward pass by model kind. GatedGCN returns (nodes, edges)."""
    if model == "gcn":
        return gcn_forward(g, H, params)
    if model == "sage":
        return sage_forward(g, H, params)
    if model == "gin":
        return gin_forward(g, H, params)
    if model == "gat":
        return gat_forward(g, H, params)
    if model == "monet":
        return monet_forward(g, H, params)
    if model == "gatedgcn":
        if efeat is None:
            raise DimensionError("gatedgcn requires edge features")
        return gatedgcn_forward(g, H, efeat, params)
    raise ModelError(f"unknown model {model!r}")


def output_width(model: str, dims: Dims) -> int:
    return dims.width_out if model == "gat" else dims.out_dim
