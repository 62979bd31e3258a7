"""Gated dense/sparse selective attention, in temporal, spatial, and cross roles.

Two score matrices are computed from the same scaled dot products: a dense
row-softmax ("every key gets some weight") and a sparse squared-ReLU path
("negative scores vanish, strong ones amplify"). A per-pair sigmoid gate,
produced by an MLP over the concatenated query/key vectors, blends the two:

    A = G * dense + (1 - G) * sparse

The blended scores weight the values, followed by an output projection,
residual connection, and layer norm. The temporal wrapper (tsam) runs this
causally over a patch sequence with a prepended summary token that may read
every position; the spatial wrapper (ssam) runs it across agents with
invalid agents masked out of the keys.

The spatial forward uses correctly rounded (order-independent) reductions so
its permutation equivariance over agents holds bit-exactly, not just to
rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nn import LayerNorm, Linear, Mlp
from .tensor import Tensor, broadcast_to, concat, matmul, softmax


@dataclass
class CausalMask:
    """Additive [L, L] mask: 0 where a query may attend, -inf where it may not.

    Row 0 is the summary token and reads the whole sequence; every other row
    i may attend positions j <= i only.
    """
    m: np.ndarray

    @staticmethod
    def create(length: int) -> "CausalMask":
        m = np.full((length, length), -np.inf)
        m[np.tril_indices(length)] = 0.0
        m[0, :] = 0.0
        return CausalMask(m)


@dataclass
class AttentionScores:
    """Diagnostic snapshot of one attention application (numpy copies)."""
    dense: np.ndarray          # [B, H, Lq, Lk]
    sparse: np.ndarray         # [B, H, Lq, Lk]
    gate: np.ndarray           # [B, Lq, Lk]
    blended: np.ndarray        # [B, H, Lq, Lk]


@dataclass
class SelectiveAttentionParams:
    """Gate MLP, output projection, and post-attention layer norm."""
    n_heads: int
    gate_mlp: Mlp              # 2D -> D -> 1, sigmoid applied outside
    out_proj: Linear           # D -> D
    ln: LayerNorm

    @staticmethod
    def create(rng: np.random.Generator, dim: int, n_heads: int) -> "SelectiveAttentionParams":
        return SelectiveAttentionParams(
            n_heads=n_heads,
            gate_mlp=Mlp.create(rng, 2 * dim, dim, 1),
            out_proj=Linear.create(rng, dim, dim),
            ln=LayerNorm.create(dim),
        )

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {**self.gate_mlp.named(f"{prefix}.gate"),
                **self.out_proj.named(f"{prefix}.out"),
                **self.ln.named(f"{prefix}.ln")}


def _linear(x: Tensor, lin: Linear, exact_sum: bool) -> Tensor:
    return matmul(x, lin.w, exact_sum=exact_sum) + lin.b


def _mlp(x: Tensor, mlp: Mlp, exact_sum: bool) -> Tensor:
    return _linear(_linear(x, mlp.fc1, exact_sum).relu(), mlp.fc2, exact_sum)


def selective_attention(q: Tensor, k: Tensor, v: Tensor,
                        params: SelectiveAttentionParams,
                        mask: CausalMask | None = None,
                        key_mask: np.ndarray | None = None,
                        exact_sum: bool = False,
                        return_scores: bool = False):
    """Blend dense and sparse attention over projected queries/keys/values.

    q: [B, Lq, D] (or [Lq, D]); k, v: [B, Lk, D]. `mask` is an additive
    causal mask over (Lq, Lk); `key_mask` a [B, Lk] validity array whose
    False columns are excluded from both score paths. Returns [B, Lq, D]
    (2-D in, 2-D out), optionally with an AttentionScores snapshot.

    `exact_sum` makes every reduction correctly rounded, so the forward
    output is bit-exactly equivariant to a permutation of the keys/queries.
    """
    squeeze = q.ndim == 2
    if squeeze:
        q, k, v = (t.reshape(1, *t.shape) for t in (q, k, v))
    B, Lq, D = q.shape
    Lk = k.shape[1]
    H = params.n_heads
    if D % H:
        raise ValueError(f"selective_attention: dim {D} not divisible by {H} heads")
    dh = D // H

    qh = q.reshape(B, Lq, H, dh).transpose(0, 2, 1, 3)      # [B, H, Lq, dh]
    kh = k.reshape(B, Lk, H, dh).transpose(0, 2, 1, 3)
    vh = v.reshape(B, Lk, H, dh).transpose(0, 2, 1, 3)

    scores = matmul(qh, kh.transpose(0, 1, 3, 2), exact_sum=exact_sum) \
        * (1.0 / math.sqrt(dh))
    additive = np.zeros((1, 1, Lq, Lk))
    if mask is not None:
        additive = additive + mask.m
    if key_mask is not None:
        col = np.where(np.asarray(key_mask, dtype=bool), 0.0, -np.inf)
        additive = additive + col.reshape(B, 1, 1, Lk)
    if mask is not None or key_mask is not None:
        scores = scores + Tensor(additive)

    dense = softmax(scores, exact_sum=exact_sum)            # masked cols -> exactly 0
    sparse = scores.relu().square()                         # -inf -> exactly 0

    # pairwise gate from concatenated (query, key) vectors, shared across heads
    q_pair = broadcast_to(q.reshape(B, Lq, 1, D), (B, Lq, Lk, D))
    k_pair = broadcast_to(k.reshape(B, 1, Lk, D), (B, Lq, Lk, D))
    gate = _mlp(concat([q_pair, k_pair], axis=-1), params.gate_mlp, exact_sum).sigmoid()
    gate = gate.reshape(B, Lq, Lk)
    gate_h = gate.reshape(B, 1, Lq, Lk)

    blended = gate_h * dense + (1.0 - gate_h) * sparse
    ctx = matmul(blended, vh, exact_sum=exact_sum)          # [B, H, Lq, dh]
    merged = ctx.transpose(0, 2, 1, 3).reshape(B, Lq, D)
    out = params.ln(q + _linear(merged, params.out_proj, exact_sum))

    if squeeze:
        out = out.reshape(Lq, D)
    if return_scores:
        snap = AttentionScores(dense=dense.data.copy(), sparse=sparse.data.copy(),
                               gate=gate.data.copy(), blended=blended.data.copy())
        return out, snap
    return out


@dataclass
class AttentionBlockParams:
    """QKV projections + selective attention + feed-forward sublayer."""
    w_q: Linear
    w_k: Linear
    w_v: Linear
    attn: SelectiveAttentionParams
    ffn: Mlp
    ffn_ln: LayerNorm

    @staticmethod
    def create(rng: np.random.Generator, dim: int, n_heads: int) -> "AttentionBlockParams":
        return AttentionBlockParams(
            w_q=Linear.create(rng, dim, dim),
            w_k=Linear.create(rng, dim, dim),
            w_v=Linear.create(rng, dim, dim),
            attn=SelectiveAttentionParams.create(rng, dim, n_heads),
            ffn=Mlp.create(rng, dim, 2 * dim, dim),
            ffn_ln=LayerNorm.create(dim),
        )

    def named(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        out.update(self.w_q.named(f"{prefix}.w_q"))
        out.update(self.w_k.named(f"{prefix}.w_k"))
        out.update(self.w_v.named(f"{prefix}.w_v"))
        out.update(self.attn.named(f"{prefix}.attn"))
        out.update(self.ffn.named(f"{prefix}.ffn"))
        out.update(self.ffn_ln.named(f"{prefix}.ffn_ln"))
        return out


def _block(x_q: Tensor, x_kv: Tensor, params: AttentionBlockParams,
           mask: CausalMask | None, key_mask: np.ndarray | None,
           exact_sum: bool = False) -> Tensor:
    h = selective_attention(_linear(x_q, params.w_q, exact_sum),
                            _linear(x_kv, params.w_k, exact_sum),
                            _linear(x_kv, params.w_v, exact_sum),
                            params.attn, mask=mask, key_mask=key_mask,
                            exact_sum=exact_sum)
    return params.ffn_ln(h + _mlp(h, params.ffn, exact_sum))


def tsam(patches: Tensor, params: AttentionBlockParams) -> Tensor:
    """Causal selective attention over a patch sequence with summary token at 0.

    patches: [P+1, D] or [B, P+1, D]; output has the same shape. Non-token
    outputs depend only on positions up to their own index.
    """
    length = patches.shape[-2]
    return _block(patches, patches, params, CausalMask.create(length), None)


def ssam(agents: Tensor, validity: np.ndarray | None,
         params: AttentionBlockParams) -> Tensor:
    """Selective attention across agents; invalid agents never serve as keys.

    agents: [N, C] or [B, N, C]; validity: matching [N] / [B, N] booleans or
    None for all-valid. Equivariant to agent permutation, bit-exactly.
    """
    key_mask = None
    if validity is not None:
        key_mask = np.asarray(validity, dtype=bool)
        if agents.ndim == 3 and key_mask.ndim == 1:
            key_mask = np.broadcast_to(key_mask, (agents.shape[0], key_mask.shape[0]))
        if agents.ndim == 2:
            key_mask = key_mask.reshape(1, -1)
    return _block(agents, agents, params, None, key_mask, exact_sum=True)


def cross_attention(queries: Tensor, context: Tensor, validity: np.ndarray | None,
                    params: AttentionBlockParams) -> Tensor:
    """Selective cross attention: mode queries over agent context."""
    key_mask = None
    if validity is not None:
        key_mask = np.asarray(validity, dtype=bool)
        if queries.ndim == 3 and key_mask.ndim == 1:
            key_mask = np.broadcast_to(key_mask, (queries.shape[0], key_mask.shape[0]))
        if queries.ndim == 2:
            key_mask = key_mask.reshape(1, -1)
    return _block(queries, context, params, None, key_mask)
