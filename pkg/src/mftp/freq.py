"""Frequency-domain mixture-of-experts filter over embedded histories.

The embedded sequence [B, T, C] is transformed along time with a radix-2
real-input FFT, the half spectrum is split into contiguous frequency bands
(one band per expert), and a gating network scores each expert from the
channel-averaged spectral magnitude. The output spectrum is the gate-weighted
sum of the band-masked spectra, taken back to the time domain.

The FFT itself is built from tape ops (gathers, slices, constant twiddle
multiplies), so the whole filter is differentiable end to end without any
complex-valued node: spectra travel as ComplexTensor real/imag pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import ComplexTensor, Tensor, broadcast_to, concat, matmul, softmax

MAGNITUDE_EPS = 1e-12   # smooths d|z|/dz at the origin


def next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def _fft_stages(re: Tensor, im: Tensor, sign: float) -> tuple[Tensor, Tensor]:
    """Iterative Cooley-Tukey butterflies along axis 1 of [B, T, C] tensors."""
    B, T, C = re.shape
    key = (slice(None), _bit_reverse_indices(T), slice(None))
    re, im = re[key], im[key]

    size = 2
    while size <= T:
        half = size // 2
        blocks = T // size
        re4 = re.reshape(B, blocks, size, C)
        im4 = im.reshape(B, blocks, size, C)
        e_re, o_re = re4[:, :, :half, :], re4[:, :, half:, :]
        e_im, o_im = im4[:, :, :half, :], im4[:, :, half:, :]

        ang = sign * 2.0 * math.pi * np.arange(half) / size
        w_re = Tensor(np.cos(ang).reshape(half, 1))
        w_im = Tensor(np.sin(ang).reshape(half, 1))

        t_re = o_re * w_re - o_im * w_im
        t_im = o_re * w_im + o_im * w_re
        re = concat([e_re + t_re, e_re - t_re], axis=2).reshape(B, T, C)
        im = concat([e_im + t_im, e_im - t_im], axis=2).reshape(B, T, C)
        size *= 2
    return re, im


def rfft(x: Tensor) -> ComplexTensor:
    """Unnormalized half spectrum (bins 0..T/2) of a real [B, T, C] sequence."""
    B, T, C = x.shape
    if T < 2 or T & (T - 1):
        raise ValueError(f"rfft: time length {T} is not a power of two")
    re, im = _fft_stages(x, Tensor(np.zeros((B, T, C))), sign=-1.0)
    half = T // 2 + 1
    return ComplexTensor(re[:, :half, :], im[:, :half, :])


def irfft(s: ComplexTensor, t_len: int) -> Tensor:
    """Inverse of `rfft`; requires F == t_len/2 + 1 for the stated length."""
    B, F, C = s.shape
    if t_len // 2 + 1 != F or t_len < 2 or t_len & (t_len - 1):
        raise ValueError(f"irfft: spectrum with {F} bins does not invert to length {t_len}")
    if t_len > 2:
        mirror = (slice(None), np.arange(F - 2, 0, -1), slice(None))
        full_re = concat([s.re, s.re[mirror]], axis=1)
        full_im = concat([s.im, -s.im[mirror]], axis=1)
    else:
        full_re, full_im = s.re, s.im
    re, _ = _fft_stages(full_re, full_im, sign=+1.0)
    return re * (1.0 / t_len)


# -- expert banding ------------------------------------------------------------------


@dataclass(frozen=True)
class ExpertMask:
    """Half-open frequency-bin interval [lo, hi) owned by one expert."""
    index: int
    lo: int
    hi: int

    def as_array(self, n_bins: int) -> np.ndarray:
        m = np.zeros(n_bins)
        m[self.lo: self.hi] = 1.0
        return m


def build_masks(n_bins: int, n_experts: int) -> list[ExpertMask]:
    """Contiguous bands whose sizes differ by at most one bin.

    Lower bins go to lower expert indices; when bins do not divide evenly,
    the earlier experts take the extra bin.
    """
    if not 1 <= n_experts <= n_bins:
        raise ValueError(f"build_masks: need 1 <= experts <= bins, got {n_experts} > {n_bins}")
    base, rem = divmod(n_bins, n_experts)
    masks, lo = [], 0
    for i in range(n_experts):
        hi = lo + base + (1 if i < rem else 0)
        masks.append(ExpertMask(index=i, lo=lo, hi=hi))
        lo = hi
    return masks


def expert_of_bin(masks: list[ExpertMask], n_bins: int) -> np.ndarray:
    owner = np.empty(n_bins, dtype=np.int64)
    for m in masks:
        owner[m.lo: m.hi] = m.index
    return owner


# -- gating network -------------------------------------------------------------------


@dataclass
class FreqMoEParams:
    """Band layout plus the gate's linear projection (zero init => uniform gate)."""
    t_padded: int
    n_experts: int
    gate_w: Tensor                      # [F, N_e]
    gate_b: Tensor                      # [N_e]
    masks: list[ExpertMask] = field(default_factory=list)
    bin_owner: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n_bins(self) -> int:
        return self.t_padded // 2 + 1

    @staticmethod
    def create(t_len: int, n_experts: int) -> "FreqMoEParams":
        t_padded = next_pow2(max(t_len, 2))
        n_bins = t_padded // 2 + 1
        masks = build_masks(n_bins, n_experts)
        return FreqMoEParams(
            t_padded=t_padded,
            n_experts=n_experts,
            gate_w=Tensor(np.zeros((n_bins, n_experts)), requires_grad=True),
            gate_b=Tensor(np.zeros(n_experts), requires_grad=True),
            masks=masks,
            bin_owner=expert_of_bin(masks, n_bins),
        )

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.gate_w": self.gate_w, f"{prefix}.gate_b": self.gate_b}


def gate(spectrum: ComplexTensor, params: FreqMoEParams) -> Tensor:
    """Per-batch expert weights on the simplex, from channel-averaged magnitude."""
    mag = spectrum.magnitude(eps=MAGNITUDE_EPS)          # [B, F, C]
    pooled = mag.mean(axis=-1)                           # [B, F]
    scores = matmul(pooled, params.gate_w) + params.gate_b
    return softmax(scores)                               # [B, N_e]


def moe_filter(x: Tensor, params: FreqMoEParams) -> Tensor:
    """Gate-weighted band filtering of [B, T, C]; shape-preserving.

    Sequences whose length is not a power of two are right-padded with their
    final value for the transform and truncated back afterwards.
    """
    B, T, C = x.shape
    padded = x
    if T != params.t_padded:
        if T > params.t_padded:
            raise ValueError(f"moe_filter: length {T} exceeds configured {params.t_padded}")
        tail = broadcast_to(x[:, T - 1: T, :], (B, params.t_padded - T, C))
        padded = concat([x, tail], axis=1)

    spectrum = rfft(padded)                              # [B, F, C]
    weights = gate(spectrum, params)                     # [B, N_e]
    per_bin = weights[:, params.bin_owner]               # [B, F] gather over experts
    filtered = spectrum.scale(per_bin.reshape(B, params.n_bins, 1))
    y = irfft(filtered, params.t_padded)
    return y[:, :T, :] if T != params.t_padded else y
