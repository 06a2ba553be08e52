"""Loss values and logit-gradient coefficients.

All functions accept a single probability vector or a batch (rows).  The
coefficient returned for a loss is its gradient with respect to the logits,
so ``model.grad_from_coeffs`` turns it into a parameter gradient.

Sign convention: the regularized objective is ``ce + lambda * reg`` with
``reg = log(1 - <p, t>)``.  The penalty is negative once ``<p, t> > 0``, so
adding it rewards agreement with the targets.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

LOG_FLOOR = 1e-12
ELR_FLOOR = 1e-8


class Mode(str, Enum):
    CE = "CE"
    KL = "KL"
    ELR = "ELR"
    ELR_PLUS = "ELR_PLUS"


@dataclass(frozen=True)
class LossBreakdown:
    ce_value: float
    reg_value: float
    total: float
    lam: float


def ce_loss(p, y):
    """Cross entropy ``-sum_c y_c log p_c``; equals ``-log p_{c*}`` for one-hot y."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    return -(y * np.log(np.maximum(p, LOG_FLOOR))).sum(axis=-1)


def ce_coeff(p, y):
    return np.asarray(p, dtype=float) - np.asarray(y, dtype=float)


def elr_penalty(p, t):
    """``log(max(1 - <p, t>, 1e-8))``; t may be unnormalized (e.g. all zeros)."""
    inner = (np.asarray(p, dtype=float) * np.asarray(t, dtype=float)).sum(axis=-1)
    return np.log(np.maximum(1.0 - inner, ELR_FLOOR))


def elr_g(p, t):
    """The vector g with ``g_c = p_c / (1 - <p,t>) * sum_k (t_k - t_c) p_k``."""
    p = np.asarray(p, dtype=float)
    t = np.asarray(t, dtype=float)
    inner = (p * t).sum(axis=-1, keepdims=True)
    denom = np.maximum(1.0 - inner, ELR_FLOOR)
    # sum_k (t_k - t_c) p_k, written term by term so that uniform t gives exact zeros
    diff = (t[..., None, :] - t[..., :, None]) * p[..., None, :]
    return p / denom * diff.sum(axis=-1)


def elr_coeff(p, t, lam: float):
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return lam * elr_g(p, t)


def binary_elr_grad_scale(s, q):
    """Logit-gradient magnitude of the binary regularizer.

    ``(2q - 1) s (1 - s) / (q + s - 2qs)`` with the denominator floored at
    1e-8.  Equal to ``-g_1`` for ``p = (s, 1 - s)`` and ``t = (q, 1 - q)``.
    """
    s = np.asarray(s, dtype=float)
    q = np.asarray(q, dtype=float)
    return (2 * q - 1) * s * (1 - s) / np.maximum(q + s - 2 * q * s, ELR_FLOOR)


def normalize_targets(t):
    """Rows scaled onto the simplex; an all-zero row becomes uniform."""
    t = np.asarray(t, dtype=float)
    s = t.sum(axis=-1, keepdims=True)
    uniform = np.full_like(t, 1.0 / t.shape[-1])
    return np.where(s > 0, t / np.where(s > 0, s, 1.0), uniform)


def kl_penalty(p, t):
    """Cross entropy of p against the normalized targets, ``-sum_c t_c log p_c``."""
    return ce_loss(p, normalize_targets(t))


def kl_coeff(p, t, lam: float):
    return lam * (np.asarray(p, dtype=float) - normalize_targets(t))


def total_coeff(p, y, t, lam: float, mode: Mode | str):
    mode = Mode(mode)
    e = ce_coeff(p, y)
    if mode is Mode.CE:
        return e
    if mode in (Mode.ELR, Mode.ELR_PLUS):
        return e + elr_coeff(p, t, lam)
    if mode is Mode.KL:
        return e + kl_coeff(p, t, lam)
    raise ValueError(mode)


def reg_value(p, t, mode: Mode | str):
    """Per-example regularizer.  CE mode reports the ELR penalty as a diagnostic."""
    if Mode(mode) is Mode.KL:
        return kl_penalty(p, t)
    return elr_penalty(p, t)


def loss_breakdown(p, y, t, lam: float, mode: Mode | str) -> LossBreakdown:
    """Batch-mean losses.  In CE mode lambda is treated as zero."""
    mode = Mode(mode)
    ce = float(np.mean(ce_loss(p, y)))
    reg = float(np.mean(reg_value(p, t, mode)))
    lam_eff = 0.0 if mode is Mode.CE else float(lam)
    return LossBreakdown(ce, reg, ce + lam_eff * reg, lam_eff)


def total_loss(p, y, t, lam: float, mode: Mode | str):
    """Per-example objective whose logit gradient is ``total_coeff``."""
    mode = Mode(mode)
    out = ce_loss(p, y)
    if mode is Mode.CE:
        return out
    return out + lam * reg_value(p, t, mode)
