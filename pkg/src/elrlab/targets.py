"""Target estimation: temporal ensembling, mixup, label refinement, ramp-up."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np


class TargetTable:
    """Per-example target probabilities, zero-initialized.

    ``update(idx, p)`` applies ``t <- beta * t + (1 - beta) * p`` to the
    selected rows only.
    """

    def __init__(self, n: int, n_classes: int, beta: float = 0.7):
        if not 0.0 <= beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        self.t = np.zeros((n, n_classes))
        self.beta = float(beta)
        self.frozen = False

    @classmethod
    def uniform(cls, n: int, n_classes: int) -> "TargetTable":
        """A table pinned at 1/C everywhere; updates are ignored."""
        table = cls(n, n_classes, 0.0)
        table.t[:] = 1.0 / n_classes
        table.frozen = True
        return table

    def __getitem__(self, idx):
        return self.t[idx]

    def __len__(self) -> int:
        return len(self.t)

    def update(self, idx, p) -> np.ndarray:
        if self.frozen:
            return self.t[idx]
        idx = np.asarray(idx)
        if idx.size and (idx.min() < 0 or idx.max() >= len(self.t)):
            raise IndexError("example index out of range")
        self.t[idx] = self.beta * self.t[idx] + (1.0 - self.beta) * np.asarray(p, dtype=float)
        return self.t[idx]

    @property
    def cold(self) -> bool:
        return not self.t.any()

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(f"t{c}" for c in range(self.t.shape[1])) + "\n")
        for row in self.t:
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()


def ensemble_update(table: TargetTable, i, p, beta: float | None = None) -> np.ndarray:
    """Functional wrapper around :meth:`TargetTable.update` with an optional beta override."""
    if beta is not None:
        if not 0.0 <= beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        table.beta = float(beta)
    return table.update(i, p)


@dataclass(frozen=True)
class MixedBatch:
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    ell_prime: np.ndarray   # one weight per example, in [0.5, 1]
    partner: np.ndarray     # index into the batch


def mixup_batch(x, y, t, alpha: float = 1.0, rng: np.random.Generator | int | None = None,
                ell=None, partner=None) -> MixedBatch:
    """Mix every example with a uniformly drawn partner from the same batch.

    ``ell`` and ``partner`` override the random draws (for tests and for
    switching mixup off with ``ell=1``).
    """
    x, y, t = (np.asarray(a, dtype=float) for a in (x, y, t))
    b = len(x)
    if b == 0:
        raise ValueError("empty batch")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    rng = np.random.default_rng(rng)
    if ell is None:
        ell = rng.beta(alpha, alpha, size=b)
    if partner is None:
        partner = rng.integers(0, b, size=b)
    ell = np.broadcast_to(np.asarray(ell, dtype=float), (b,))
    partner = np.asarray(partner)
    lp = np.maximum(ell, 1.0 - ell)[:, None]

    def mix(a):
        return lp * a + (1.0 - lp) * a[partner]

    return MixedBatch(mix(x), mix(y), mix(t), lp[:, 0], partner)


def refine_labels(y, t):
    """``y_c t_c / sum_c y_c t_c`` row-wise; rows with a zero product keep y."""
    y = np.asarray(y, dtype=float)
    t = np.maximum(np.asarray(t, dtype=float), 1e-12)
    prod = y * t
    s = prod.sum(axis=-1, keepdims=True)
    return np.where(s > 0, prod / np.where(s > 0, s, 1.0), y)


def ramp(i, ramp_steps: int, cap: float = 1.0) -> float:
    """Sigmoid-shaped ramp ``cap * exp(-5 (1 - min(i, T)/T)^2)``."""
    if ramp_steps <= 0:
        raise ValueError("ramp length must be positive")
    frac = min(i, ramp_steps) / ramp_steps
    return cap * float(np.exp(-5.0 * (1.0 - frac) ** 2))
