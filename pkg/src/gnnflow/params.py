"""Model kinds, dimension records, and learnable-parameter containers.

Seeded generation fills every tensor with float32 values uniform in
[-0.5, 0.5) from one SplitMix64 stream, consumed in the declaration order of
each container's fields. That makes parameter fixtures reproducible from a
single integer without shipping trained weights. The diagonal inverse
covariance of the mixture model takes absolute values so the edge weights
stay in (0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import uniform_block

MODELS = ("gcn", "sage", "gin", "gat", "monet", "gatedgcn")

ISOTROPIC = ("gcn", "sage", "gin")
ANISOTROPIC = ("gat", "monet", "gatedgcn")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Dims:
    """Feature dimensions of one layer.

    in_dim/out_dim are per-head for multi-headed models; ``heads`` is 1
    elsewhere. ``width_out`` is the concatenated output width.
    """

    in_dim: int
    heads: int = 1
    out_dim: int | None = None

    def __post_init__(self):
        if self.out_dim is None:
            object.__setattr__(self, "out_dim", self.in_dim)
        if self.in_dim < 1 or self.heads < 1 or self.out_dim < 1:
            raise ModelError(f"invalid dims {self}")

    @property
    def width_out(self) -> int:
        return self.heads * self.out_dim


#: Shipped default dimensions per model.
DEFAULT_DIMS = {
    "gcn": Dims(128),
    "sage": Dims(128),
    "gin": Dims(128),
    "gat": Dims(128, 8, 16),
    "monet": Dims(64, 2, 64),
    "gatedgcn": Dims(32),
}


def parse_dims(model: str, text: str) -> Dims:
    """Parse a ``--dims`` value: ``128`` or ``128,8,16`` (in, heads, out)."""
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 1:
        dims = Dims(parts[0])
    elif len(parts) == 2:
        dims = Dims(parts[0], parts[1], parts[0])
    elif len(parts) == 3:
        dims = Dims(parts[0], parts[1], parts[2])
    else:
        raise ModelError(f"cannot parse dims {text!r} for {model}")
    return check_dims(model, dims)


def check_dims(model: str, dims: Dims) -> Dims:
    """Reject dimension records the model's weight shapes cannot satisfy."""
    if model in ("gcn", "sage", "gin", "gatedgcn"):
        if dims.heads != 1 or dims.out_dim != dims.in_dim:
            raise ModelError(
                f"{model} uses single-head square weights; dims must be (d,)")
    elif model == "monet":
        if dims.out_dim != dims.in_dim:
            raise ModelError("monet head weights are square: out_dim must "
                             "equal in_dim")
    elif model != "gat":
        raise ModelError(f"unknown model {model!r}")
    return dims


@dataclass(frozen=True)
class GcnParams:
    U: np.ndarray  # (d, d)


@dataclass(frozen=True)
class SageParams:
    V: np.ndarray  # (d, d), applied to the target feature
    W: np.ndarray  # (d, d), applied to the neighbor mean


@dataclass(frozen=True)
class GinParams:
    U: np.ndarray  # (d, d), outer projection
    V: np.ndarray  # (d, d), inner projection
    eps: float = 0.0


@dataclass(frozen=True)
class GatParams:
    U: np.ndarray       # (K, out_dim, in_dim)
    a_src: np.ndarray   # (K, out_dim), paired with the target projection
    a_dest: np.ndarray  # (K, out_dim), paired with the neighbor projection
    leaky_slope: float = 0.2


@dataclass(frozen=True)
class MonetParams:
    V2: np.ndarray         # (2, 2) pseudo-coordinate projection
    v2: np.ndarray         # (2,)
    mu: np.ndarray         # (K, 2) mixture means
    sigma_inv: np.ndarray  # (K, 2) diagonal inverse covariance, nonnegative
    U: np.ndarray          # (K, d, d)


@dataclass(frozen=True)
class GatedParams:
    A: np.ndarray  # (d, d) target path
    B: np.ndarray  # (d, d) gated neighbor path
    C: np.ndarray  # (d, d) edge-feature path
    D: np.ndarray  # (d, d) neighbor part of the gate
    E: np.ndarray  # (d, d) target part of the gate
    eps_stab: float = 1e-6


class _Filler:
    def __init__(self, seed: int):
        self.seed = seed
        self.pos = 0

    def take(self, *shape: int) -> np.ndarray:
        count = int(np.prod(shape))
        vals = uniform_block(self.seed, self.pos, count, -0.5, 0.5)
        self.pos += count
        return vals.astype(np.float32).reshape(shape)


def gen_params(model: str, dims: Dims, seed: int):
    """Seeded parameters for ``model`` at ``dims`` (see module docstring)."""
    check_dims(model, dims)
    f = _Filler(seed)
    d = dims.in_dim
    if model == "gcn":
        return GcnParams(U=f.take(d, d))
    if model == "sage":
        return SageParams(V=f.take(d, d), W=f.take(d, d))
    if model == "gin":
        return GinParams(U=f.take(d, d), V=f.take(d, d))
    if model == "gat":
        k, q = dims.heads, dims.out_dim
        return GatParams(U=f.take(k, q, d), a_src=f.take(k, q), a_dest=f.take(k, q))
    if model == "monet":
        k = dims.heads
        return MonetParams(V2=f.take(2, 2), v2=f.take(2),
                           mu=f.take(k, 2), sigma_inv=np.abs(f.take(k, 2)),
                           U=f.take(k, d, d))
    if model == "gatedgcn":
        return GatedParams(A=f.take(d, d), B=f.take(d, d), C=f.take(d, d),
                           D=f.take(d, d), E=f.take(d, d))
    raise ModelError(f"unknown model {model!r}")


def gen_features(n: int, d: int, seed: int) -> np.ndarray:
    """Seeded (n, d) float32 feature matrix, uniform in [-0.5, 0.5)."""
    return uniform_block(seed, 0, n * d, -0.5, 0.5).astype(np.float32).reshape(n, d)


def gen_edge_features(m: int, d: int, seed: int) -> np.ndarray:
    """Seeded (m, d) float32 edge features in CSR edge order."""
    return uniform_block(seed, 0, m * d, -0.5, 0.5).astype(np.float32).reshape(m, d)


def params_to_tensors(model: str, params) -> dict[str, np.ndarray]:
    """Flatten a parameter container to named 2-D tensors for the binary format."""
    if model == "gcn":
        return {"U": params.U}
    if model == "sage":
        return {"V": params.V, "W": params.W}
    if model == "gin":
        return {"U": params.U, "V": params.V,
                "eps": np.array([[params.eps]], dtype=np.float32)}
    if model == "gat":
        out = {f"U{k}": params.U[k] for k in range(params.U.shape[0])}
        out["a_src"] = params.a_src
        out["a_dest"] = params.a_dest
        out["leaky_slope"] = np.array([[params.leaky_slope]], dtype=np.float32)
        return out
    if model == "monet":
        out = {f"U{k}": params.U[k] for k in range(params.U.shape[0])}
        out.update({"V2": params.V2, "v2": params.v2.reshape(1, -1),
                    "mu": params.mu, "sigma_inv": params.sigma_inv})
        return out
    if model == "gatedgcn":
        return {"A": params.A, "B": params.B, "C": params.C, "D": params.D,
                "E": params.E,
                "eps_stab": np.array([[params.eps_stab]], dtype=np.float32)}
    raise ModelError(f"unknown model {model!r}")


def params_from_tensors(model: str, tensors: dict[str, np.ndarray]):
    """Rebuild a parameter container from named tensors (manifest loading)."""
    if model == "gcn":
        return GcnParams(U=tensors["U"])
    if model == "sage":
        return SageParams(V=tensors["V"], W=tensors["W"])
    if model == "gin":
        eps = float(tensors["eps"][0, 0]) if "eps" in tensors else 0.0
        return GinParams(U=tensors["U"], V=tensors["V"], eps=eps)
    if model == "gat":
        heads = sorted(int(k[1:]) for k in tensors if k.startswith("U"))
        U = np.stack([tensors[f"U{k}"] for k in heads])
        slope = float(tensors["leaky_slope"][0, 0]) if "leaky_slope" in tensors else 0.2
        return GatParams(U=U, a_src=tensors["a_src"], a_dest=tensors["a_dest"],
                         leaky_slope=slope)
    if model == "monet":
        heads = sorted(int(k[1:]) for k in tensors if k.startswith("U") and k != "U")
        U = np.stack([tensors[f"U{k}"] for k in heads])
        return MonetParams(V2=tensors["V2"], v2=tensors["v2"].reshape(-1),
                           mu=tensors["mu"], sigma_inv=tensors["sigma_inv"], U=U)
    if model == "gatedgcn":
        eps = float(tensors["eps_stab"][0, 0]) if "eps_stab" in tensors else 1e-6
        return GatedParams(A=tensors["A"], B=tensors["B"], C=tensors["C"],
                           D=tensors["D"], E=tensors["E"], eps_stab=eps)
    raise ModelError(f"unknown model {model!r}")
