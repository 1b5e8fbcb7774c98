"""Bipartite graph reasoning between the source and target shape codes.

Each branch projects one pose's features onto a small set of latent nodes
whose layout is decided by the *other* pose, reasons over those nodes with a
single graph convolution ``(I - A) V W``, and scatters the result back to
pixel space through the transpose of the same projection, adding it to the
branch input as a residual.

Shapes per sample: features are ``C × h × w`` with ``L = h·w`` locations,
the projection is ``N × L`` and node states are ``N × D``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .errors import ConfigurationError, DimensionError
from .layers import uniform_fan_in
from .tensor import Tensor


@dataclass
class BGRBranchParams:
    theta: Tensor  # N × C × 1 × 1, projection from the other pose
    phi_reduce: Tensor  # D × C × 1 × 1
    adjacency: Tensor  # N × N
    edge_weights: Tensor  # D × D
    phi_back: Tensor  # C × D × 1 × 1
    normalize: bool = True  # average node states over locations instead of summing

    @property
    def n_nodes(self) -> int:
        return self.theta.shape[0]

    @property
    def d_state(self) -> int:
        return self.phi_reduce.shape[0]


@dataclass
class BGRBlockParams:
    b2a: Optional[BGRBranchParams]
    a2b: Optional[BGRBranchParams]
    share_gcn: bool = False


def init_branch(rng: np.random.Generator, channels: int, n_nodes: int, d_state: int,
                normalize: bool = True) -> BGRBranchParams:
    return BGRBranchParams(
        theta=uniform_fan_in(rng, (n_nodes, channels, 1, 1), channels),
        phi_reduce=uniform_fan_in(rng, (d_state, channels, 1, 1), channels),
        adjacency=Tensor(rng.normal(0.0, 0.01, (n_nodes, n_nodes)), requires_grad=True),
        edge_weights=Tensor(rng.normal(0.0, 0.01, (d_state, d_state)), requires_grad=True),
        phi_back=uniform_fan_in(rng, (channels, d_state, 1, 1), d_state),
        normalize=normalize,
    )


def init_bgr_block(rng, channels: int, n_nodes: int = 16, d_state: int = 32, *,
                   use_b2a: bool = True, use_a2b: bool = True, share_gcn: bool = False,
                   n_nodes_a2b: Optional[int] = None, normalize: bool = True) -> BGRBlockParams:
    """Build one block; disabled branches get no parameters at all."""
    n_a2b = n_nodes if n_nodes_a2b is None else n_nodes_a2b
    b2a = init_branch(rng, channels, n_nodes, d_state, normalize) if use_b2a else None
    a2b = init_branch(rng, channels, n_a2b, d_state, normalize) if use_a2b else None
    if share_gcn and b2a is not None and a2b is not None:
        if n_a2b != n_nodes:
            raise ConfigurationError("share_gcn needs equal node counts in both branches")
        a2b.adjacency = b2a.adjacency
        a2b.edge_weights = b2a.edge_weights
    return BGRBlockParams(b2a, a2b, share_gcn)


def project_to_graph(source_feat: Tensor, target_feat: Tensor, branch: BGRBranchParams):
    """Return ``(node_states, projection)``.

    ``projection`` is θ(target) flattened to N × L; node states are that
    projection applied to φ(source) viewed as L × D, divided by L when the
    branch normalizes. Without the division the block's residual grows with
    the cube of the feature scale and with L, which overflows deep cascades.
    """
    if source_feat.shape != target_feat.shape:
        raise DimensionError(f"source {source_feat.shape} and target {target_feat.shape} features differ in shape")
    b, _, h, w = source_feat.shape
    projection = T.conv2d(target_feat, branch.theta).reshape(b, branch.n_nodes, h * w)
    reduced = T.conv2d(source_feat, branch.phi_reduce).reshape(b, branch.d_state, h * w)
    node_states = T.matmul(projection, T.swap_last(reduced))
    if branch.normalize:
        node_states = T.mul(node_states, 1.0 / (h * w))
    return node_states, projection


def graph_reason(node_states: Tensor, adjacency: Tensor, edge_weights: Tensor) -> Tensor:
    """M = (I - A) · V · W for every sample in the batch."""
    n, d = node_states.shape[-2:]
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise DimensionError(f"adjacency must be square, got {adjacency.shape}")
    if edge_weights.ndim != 2 or edge_weights.shape[0] != edge_weights.shape[1]:
        raise DimensionError(f"edge weights must be square, got {edge_weights.shape}")
    if adjacency.shape[0] != n or edge_weights.shape[0] != d:
        raise DimensionError(
            f"node states {node_states.shape} do not match adjacency {adjacency.shape} / edge weights {edge_weights.shape}"
        )
    laplacian = T.sub(np.eye(n, dtype=adjacency.dtype), adjacency)
    return T.matmul(T.matmul(laplacian, node_states), edge_weights)


def project_back(reasoned: Tensor, projection: Tensor, residual_input: Tensor, branch: BGRBranchParams) -> Tensor:
    """ϕ(projectionᵀ · M) reshaped to pixel space, plus the residual input."""
    b, c, h, w = residual_input.shape
    if projection.shape[-1] != h * w:
        raise DimensionError(
            f"projection covers {projection.shape[-1]} locations but residual input has {h}×{w}={h * w}"
        )
    if projection.shape[-2] != reasoned.shape[-2]:
        raise DimensionError(f"projection {projection.shape} and node states {reasoned.shape} disagree on node count")
    # (Pᵀ M)ᵀ = Mᵀ P, giving D × L directly
    scattered = T.matmul(T.swap_last(reasoned), projection).reshape(b, reasoned.shape[-1], h, w)
    return T.add(T.conv2d(scattered, branch.phi_back), residual_input)


def branch_forward(own: Tensor, other: Tensor, branch: BGRBranchParams) -> Tensor:
    node_states, projection = project_to_graph(own, other, branch)
    reasoned = graph_reason(node_states, branch.adjacency, branch.edge_weights)
    return project_back(reasoned, projection, own, branch)


def bgr_forward(F_pa: Tensor, F_pb: Tensor, params: BGRBlockParams):
    """One bipartite reasoning block; a disabled branch passes its code through."""
    if F_pa.shape != F_pb.shape:
        raise DimensionError(f"shape codes differ: {F_pa.shape} vs {F_pb.shape}")
    new_pa = branch_forward(F_pa, F_pb, params.b2a) if params.b2a is not None else F_pa
    new_pb = branch_forward(F_pb, F_pa, params.a2b) if params.a2b is not None else F_pb
    return new_pa, new_pb
