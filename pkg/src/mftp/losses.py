"""Training objective: winner-take-all regression, mode classification, and
the patch-wise structural terms (correlation, variance, mean).

The mode closest to ground truth (mean L2) wins; only it receives the
regression and patch gradients. The patch terms compare non-overlapping
trajectory patches per coordinate: direction consistency through Pearson
correlation, spread through a KL divergence between softmaxed deviations,
and level through the absolute mean gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decoder import PredictionSet
from .tensor import Tensor

CORR_EPS = 1e-8        # regularizes patch standard deviations


@dataclass
class LossWeights:
    alpha: float = 1.0     # regression
    beta: float = 0.5      # classification
    gamma: float = 0.5     # patch structure

    def validate(self) -> None:
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.alpha == self.beta == self.gamma == 0:
            raise ValueError("loss weights must not all be zero")


@dataclass
class LossTerms:
    """Per-target scalar loss tensors, still on the tape."""
    reg: Tensor
    cls: Tensor
    corr: Tensor
    var: Tensor
    mean: Tensor
    best_mode: int

    @property
    def patch(self) -> Tensor:
        return self.corr + self.var + self.mean


@dataclass
class LossReport:
    """Float summary of one batch: components plus the weighted total."""
    reg: float
    cls: float
    corr: float
    var: float
    mean: float
    patch: float
    total: float

    def format_line(self, step: int) -> str:
        return (f"step={step} reg={self.reg!r} cls={self.cls!r} corr={self.corr!r} "
                f"var={self.var!r} mean={self.mean!r} patch={self.patch!r} "
                f"total={self.total!r}")


def smooth_l1(residual: Tensor) -> Tensor:
    """Elementwise smooth L1: 0.5 r^2 inside |r| < 1, |r| - 0.5 outside."""
    a = residual.abs()
    quad = Tensor((a.data < 1.0).astype(np.float64))
    return quad * residual.square() * 0.5 + (1.0 - quad) * (a - 0.5)


def regression_loss(pred: PredictionSet, gt) -> tuple[Tensor, int]:
    """Smooth-L1 between the closest mode and ground truth.

    The winner is the mode with the smallest mean L2 distance (ties go to
    the lowest index); gradient flows only through it.
    """
    gt = gt.data if isinstance(gt, Tensor) else np.asarray(gt, dtype=np.float64)
    if pred.trajs.shape[1:] != gt.shape:
        raise ValueError(f"regression_loss: prediction steps {pred.trajs.shape[1:]} "
                         f"do not match ground truth {gt.shape}")
    dists = np.linalg.norm(pred.trajs.data - gt[None], axis=-1).mean(axis=-1)
    best = int(np.argmin(dists))
    loss = smooth_l1(pred.trajs[best] - Tensor(gt)).mean()
    return loss, best


def classification_loss(probs: Tensor, best_mode: int) -> Tensor:
    """Negative log likelihood of the winning mode (selection is detached)."""
    return -(probs[best_mode].log())


def patchify_trajectory(y: Tensor, patch_len: int) -> Tensor:
    """Split [T_f, 2] into [M, patch_len, 2] non-overlapping patches."""
    t_f = y.shape[0]
    if patch_len < 1 or t_f % patch_len:
        raise ValueError(f"patchify_trajectory: horizon {t_f} not divisible "
                         f"by patch length {patch_len}")
    return y.reshape(t_f // patch_len, patch_len, 2)


def _log_softmax(x: Tensor) -> Tensor:
    shift = x - Tensor(x.data.max(axis=-1, keepdims=True))
    return shift - shift.exp().sum(axis=-1, keepdims=True).log()


def patch_loss(pred_traj: Tensor, gt_traj, patch_len: int,
               eps: float = CORR_EPS) -> tuple[Tensor, Tensor, Tensor]:
    """(correlation, variance, mean) patch terms, averaged over x and y.

    Correlation: mean over patches of 1 - Pearson r, with each standard
    deviation regularized to sqrt(var + eps); a constant patch therefore
    contributes ~1, not a division by zero. Variance: KL between softmaxed
    within-patch deviations, ground truth side first. Mean: |mu - mu_hat|.
    """
    gt_traj = gt_traj if isinstance(gt_traj, Tensor) else Tensor(gt_traj)
    pred_p = patchify_trajectory(pred_traj, patch_len)      # [M, P, 2]
    gt_p = patchify_trajectory(gt_traj, patch_len)

    corr_acc, var_acc, mean_acc = [], [], []
    for c in (0, 1):
        yp = pred_p[:, :, c]
        yg = gt_p[:, :, c]
        mu_p = yp.mean(axis=-1, keepdims=True)
        mu_g = yg.mean(axis=-1, keepdims=True)
        dp = yp - mu_p
        dg = yg - mu_g

        cov = (dg * dp).sum(axis=-1)                        # [M]
        sd_p = (dp.square().mean(axis=-1) + eps).sqrt()
        sd_g = (dg.square().mean(axis=-1) + eps).sqrt()
        pearson = cov / (sd_g * sd_p * float(patch_len))
        corr_acc.append((1.0 - pearson).mean())

        log_pg = _log_softmax(dg)
        log_pp = _log_softmax(dp)
        kl = (log_pg.exp() * (log_pg - log_pp)).sum(axis=-1)
        var_acc.append(kl.mean())

        mean_acc.append((mu_g - mu_p).abs().mean())

    half = 0.5
    return ((corr_acc[0] + corr_acc[1]) * half,
            (var_acc[0] + var_acc[1]) * half,
            (mean_acc[0] + mean_acc[1]) * half)


def target_loss(pred: PredictionSet, gt, patch_len: int) -> LossTerms:
    """All loss terms for one target; patch terms supervise the winner mode."""
    reg, best = regression_loss(pred, gt)
    cls = classification_loss(pred.probs, best)
    corr, var, mean = patch_loss(pred.trajs[best], gt, patch_len)
    return LossTerms(reg=reg, cls=cls, corr=corr, var=var, mean=mean, best_mode=best)


def total_loss(terms: list[LossTerms], weights: LossWeights) -> tuple[Tensor, LossReport]:
    """Weighted sum of components averaged over the batch targets."""
    weights.validate()
    if not terms:
        raise ValueError("total_loss: empty batch")
    n = float(len(terms))

    def avg(values: list[Tensor]) -> Tensor:
        acc = values[0]
        for v in values[1:]:
            acc = acc + v
        return acc * (1.0 / n)

    reg = avg([t.reg for t in terms])
    cls = avg([t.cls for t in terms])
    corr = avg([t.corr for t in terms])
    var = avg([t.var for t in terms])
    mean = avg([t.mean for t in terms])
    patch = corr + var + mean
    total = reg * weights.alpha + cls * weights.beta + patch * weights.gamma
    report = LossReport(reg=reg.item(), cls=cls.item(), corr=corr.item(),
                        var=var.item(), mean=mean.item(), patch=patch.item(),
                        total=total.item())
    return total, report
