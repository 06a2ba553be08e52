"""Gaussian-mixture datasets with injected label noise.

Two-class data follow ``x = mean(y*) + sigma * z`` with means ``+v`` and ``-v``
for a unit vector ``v``; with more classes the means are orthonormal.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field

import numpy as np


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def one_hot(classes: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((len(classes), n_classes))
    out[np.arange(len(classes)), classes] = 1.0
    return out


@dataclass(frozen=True)
class CleanDataset:
    inputs: np.ndarray          # n x p
    true_labels: np.ndarray     # n x C one-hot
    means: np.ndarray           # C x p class means (rows +v, -v when C == 2)
    sigma: float
    seed: int

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def p(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_classes(self) -> int:
        return self.true_labels.shape[1]

    @property
    def v(self) -> np.ndarray:
        """Class-mean direction of the two-class model."""
        if self.n_classes != 2:
            raise ValueError("v is only defined for two classes")
        return self.means[0]

    @property
    def true_class(self) -> np.ndarray:
        return self.true_labels.argmax(axis=1)


@dataclass(frozen=True)
class NoisyDataset(CleanDataset):
    observed_labels: np.ndarray = field(default=None)
    clean_set: np.ndarray = field(default=None)
    wrong_set: np.ndarray = field(default=None)
    delta: float = 0.0

    @property
    def observed_class(self) -> np.ndarray:
        return self.observed_labels.argmax(axis=1)

    @property
    def true_sign(self) -> np.ndarray:
        """+1 for the ``+v`` cluster, -1 otherwise (two classes only)."""
        return np.where(self.true_class == 0, 1.0, -1.0)

    @property
    def observed_sign(self) -> np.ndarray:
        return np.where(self.observed_class == 0, 1.0, -1.0)

    @property
    def wrong_fraction(self) -> float:
        return len(self.wrong_set) / self.n


def _streams(seed: int) -> tuple[np.random.Generator, ...]:
    # means, class assignment + inputs
    return tuple(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))


def gen_mixture(n: int, p: int, n_classes: int = 2, sigma: float = 0.1,
                seed: int = 0, v: np.ndarray | None = None) -> CleanDataset:
    """Draw ``n`` points from a mixture of ``n_classes`` spherical Gaussians in R^p.

    Class assignment is uniform.  For two classes the means are ``+v`` and
    ``-v`` with ``v`` uniform on the unit sphere (or the supplied vector,
    normalized); otherwise they are orthonormalized Gaussian draws.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    mean_rng, data_rng = _streams(seed)
    if n_classes == 2:
        if v is None:
            v = mean_rng.standard_normal(p)
        v = np.asarray(v, dtype=float)
        if v.shape != (p,):
            raise ValueError(f"v must have shape ({p},)")
        v = v / np.linalg.norm(v)
        means = np.stack([v, -v])
    else:
        if p < n_classes:
            raise ValueError(f"orthonormal class means need p >= C (got p={p}, C={n_classes})")
        q, r = np.linalg.qr(mean_rng.standard_normal((p, n_classes)))
        means = (q * np.sign(np.diag(r))).T
    classes = data_rng.integers(0, n_classes, size=n)
    inputs = means[classes] + sigma * data_rng.standard_normal((n, p))
    return CleanDataset(
        inputs=_frozen(inputs),
        true_labels=_frozen(one_hot(classes, n_classes)),
        means=_frozen(means),
        sigma=float(sigma),
        seed=int(seed),
    )


def _with_labels(data: CleanDataset, observed: np.ndarray, delta: float) -> NoisyDataset:
    truth = data.true_class
    wrong = observed != truth
    return NoisyDataset(
        inputs=data.inputs,
        true_labels=data.true_labels,
        means=data.means,
        sigma=data.sigma,
        seed=data.seed,
        observed_labels=_frozen(one_hot(observed, data.n_classes)),
        clean_set=_frozen(np.flatnonzero(~wrong)),
        wrong_set=_frozen(np.flatnonzero(wrong)),
        delta=float(delta),
    )


def _check_delta(delta: float) -> None:
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"noise level must lie in [0, 1], got {delta}")


def inject_symmetric_noise(data: CleanDataset, delta: float, seed: int = 0,
                           exclude_true_class: bool = False) -> NoisyDataset:
    """Keep each label with probability ``1 - delta``, else redraw it uniformly.

    By default the redraw ranges over all classes, so the true class can come
    back and the expected wrong fraction is ``delta * (C - 1) / C``.  With
    ``exclude_true_class`` the redraw is over the other ``C - 1`` classes.
    """
    _check_delta(delta)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    truth = data.true_class
    c = data.n_classes
    redraw = rng.random(data.n) < delta
    if exclude_true_class:
        shift = rng.integers(1, c, size=data.n)
        replacement = (truth + shift) % c
    else:
        replacement = rng.integers(0, c, size=data.n)
    observed = np.where(redraw, replacement, truth)
    return _with_labels(data, observed, delta)


def inject_asymmetric_noise(data: CleanDataset, delta: float, seed: int = 0) -> NoisyDataset:
    """With probability ``delta`` move a label of class c to class (c + 1) mod C."""
    _check_delta(delta)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    truth = data.true_class
    flip = rng.random(data.n) < delta
    observed = np.where(flip, (truth + 1) % data.n_classes, truth)
    return _with_labels(data, observed, delta)


def relabel(data: NoisyDataset, observed_class: np.ndarray) -> NoisyDataset:
    """Same inputs and truth, different observed labels."""
    return _with_labels(data, np.asarray(observed_class), data.delta)


def make_dataset(n: int, p: int, n_classes: int = 2, sigma: float = 0.1,
                 delta: float = 0.0, seed: int = 0, noise: str = "symmetric",
                 exclude_true_class: bool = False) -> NoisyDataset:
    """Convenience wrapper: mixture plus noise, both derived from one root seed."""
    clean = gen_mixture(n, p, n_classes, sigma, seed)
    if noise == "symmetric":
        return inject_symmetric_noise(clean, delta, seed, exclude_true_class)
    if noise == "asymmetric":
        return inject_asymmetric_noise(clean, delta, seed)
    raise ValueError(f"unknown noise model {noise!r}")


# ---------------------------------------------------------------------------
# Columnar text format: header row, then p input coordinates, true class,
# observed class per example.

def dumps_dataset(data: NoisyDataset) -> str:
    buf = io.StringIO()
    header = [f"x{j}" for j in range(data.p)] + ["true", "observed"]
    buf.write(",".join(header) + "\n")
    for x, t, o in zip(data.inputs, data.true_class, data.observed_class):
        buf.write(",".join(f"{v:.17g}" for v in x))
        buf.write(f",{t},{o}\n")
    return buf.getvalue()


def loads_dataset(text: str, sigma: float = float("nan"), delta: float = float("nan"),
                  n_classes: int | None = None) -> NoisyDataset:
    """Parse the columnar format.  Generating parameters are not stored in it."""
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    if header[-2:] != ["true", "observed"]:
        raise ValueError("last two columns must be 'true' and 'observed'")
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    inputs = rows[:, :-2]
    truth = rows[:, -2].astype(int)
    observed = rows[:, -1].astype(int)
    c = n_classes or int(max(truth.max(), observed.max()) + 1)
    clean = CleanDataset(
        inputs=_frozen(inputs),
        true_labels=_frozen(one_hot(truth, c)),
        means=_frozen(np.full((c, inputs.shape[1]), np.nan)),
        sigma=sigma,
        seed=-1,
    )
    return _with_labels(clean, observed, delta)


def fingerprint(data: NoisyDataset) -> str:
    """SHA-256 over the raw little-endian float64 inputs and both label vectors."""
    h = hashlib.sha256()
    h.update(np.asarray(data.inputs, dtype="<f8").tobytes())
    h.update(np.asarray(data.true_class, dtype="<i8").tobytes())
    h.update(np.asarray(data.observed_class, dtype="<i8").tobytes())
    return h.hexdigest()
