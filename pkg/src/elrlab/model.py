"""Linear softmax classifier and a one-hidden-layer tanh network.

The backward pass takes one coefficient vector per example and returns the
batch-averaged gradient of ``<e, logits>``.  Every loss in :mod:`elrlab.regularizers`
only has to produce those coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DivergenceError(FloatingPointError):
    """Raised when weights or gradients stop being finite."""


@dataclass(frozen=True)
class Linear:
    n_classes: int
    dim: int

    @property
    def names(self) -> tuple[str, ...]:
        return ("W",)


@dataclass(frozen=True)
class MLP:
    dim: int
    hidden: int
    n_classes: int
    activation: str = "tanh"

    @property
    def names(self) -> tuple[str, ...]:
        return ("W1", "b1", "W2", "b2")


@dataclass
class ModelParams:
    arch: Linear | MLP
    weights: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, {k: w.copy() for k, w in self.weights.items()})

    @property
    def theta_binary(self) -> np.ndarray:
        """theta = Theta_1 - Theta_2 for a two-class linear model."""
        if not isinstance(self.arch, Linear) or self.arch.n_classes != 2:
            raise ValueError("theta_binary needs Linear with two classes")
        W = self.weights["W"]
        return W[0] - W[1]

    def is_finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights.values())


@dataclass
class AveragedParams:
    weights: dict[str, np.ndarray]
    gamma: float = 0.997
    updates: int = field(default=0)


def init_params(arch: Linear | MLP, seed: int = 0, radius: float = 2.0) -> ModelParams:
    """Random initialization.

    Two-class linear models get rows ``+theta0/2`` and ``-theta0/2`` with
    ``theta0`` uniform on the sphere of the given radius.  Other linear models
    use Gaussian rows scaled to that radius; the MLP uses fan-in scaling.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    if isinstance(arch, Linear):
        if arch.n_classes == 2:
            theta0 = rng.standard_normal(arch.dim)
            theta0 *= radius / np.linalg.norm(theta0)
            W = np.stack([theta0 / 2, -theta0 / 2])
        else:
            W = rng.standard_normal((arch.n_classes, arch.dim))
            W *= radius / np.linalg.norm(W, axis=1, keepdims=True)
        return ModelParams(arch, {"W": W})
    if isinstance(arch, MLP):
        if arch.activation != "tanh":
            raise ValueError("only tanh hidden units are supported")
        W1 = rng.standard_normal((arch.hidden, arch.dim)) / np.sqrt(arch.dim)
        W2 = rng.standard_normal((arch.n_classes, arch.hidden)) / np.sqrt(arch.hidden)
        return ModelParams(arch, {
            "W1": W1, "b1": np.zeros(arch.hidden),
            "W2": W2, "b2": np.zeros(arch.n_classes),
        })
    raise TypeError(f"unknown architecture {arch!r}")


def _check_dim(params: ModelParams, X: np.ndarray) -> None:
    if X.shape[-1] != params.arch.dim:
        raise ValueError(f"input dimension {X.shape[-1]} != model dimension {params.arch.dim}")


def forward(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Logits for one input vector (shape ``(C,)``) or a batch (``(B, C)``)."""
    X = np.asarray(X, dtype=float)
    _check_dim(params, X)
    w = params.weights
    if isinstance(params.arch, Linear):
        return X @ w["W"].T
    h = np.tanh(X @ w["W1"].T + w["b1"])
    return h @ w["W2"].T + w["b2"]


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    with np.errstate(over="ignore"):
        # logits near the float limit: the shifted gap may saturate to -inf, giving p = 0
        z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def grad_from_coeffs(params: ModelParams, X: np.ndarray, coeffs: np.ndarray) -> dict[str, np.ndarray]:
    """Batch-averaged gradient of ``sum_i <coeffs_i, logits_i>`` w.r.t. the weights."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    E = np.atleast_2d(np.asarray(coeffs, dtype=float))
    _check_dim(params, X)
    if E.shape != (X.shape[0], params.arch.n_classes):
        raise ValueError(f"coefficients have shape {E.shape}, expected {(X.shape[0], params.arch.n_classes)}")
    B = X.shape[0]
    w = params.weights
    if isinstance(params.arch, Linear):
        return {"W": E.T @ X / B}
    h = np.tanh(X @ w["W1"].T + w["b1"])
    da = (E @ w["W2"]) * (1.0 - h * h)
    return {
        "W1": da.T @ X / B,
        "b1": da.sum(axis=0) / B,
        "W2": E.T @ h / B,
        "b2": E.sum(axis=0) / B,
    }


def sgd_step(params: ModelParams, grad: dict[str, np.ndarray], eta: float) -> ModelParams:
    if eta <= 0:
        raise ValueError("step size must be positive")
    for k, g in grad.items():
        if not np.isfinite(g).all():
            raise DivergenceError(f"non-finite gradient in {k}")
    with np.errstate(over="ignore", invalid="ignore"):
        new = ModelParams(params.arch, {k: w - eta * grad[k] for k, w in params.weights.items()})
    if not new.is_finite():
        raise DivergenceError("non-finite weights after step")
    return new


def averaged_init(params: ModelParams, gamma: float) -> AveragedParams:
    """Zero-initialized running average, matching the ELR+ pseudocode."""
    return AveragedParams({k: np.zeros_like(w) for k, w in params.weights.items()}, gamma)


def weight_average(avg: AveragedParams, params: ModelParams, gamma: float | None = None) -> AveragedParams:
    g = avg.gamma if gamma is None else gamma
    if not 0.0 <= g < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    weights = {k: g * avg.weights[k] + (1.0 - g) * w for k, w in params.weights.items()}
    return AveragedParams(weights, avg.gamma, avg.updates + 1)


def as_params(avg: AveragedParams, arch: Linear | MLP) -> ModelParams:
    return ModelParams(arch, avg.weights)


# ---------------------------------------------------------------------------
# Plain-text weights: one header line naming the architecture, then for each
# array a line ``NAME rows cols`` followed by ``rows`` lines of decimals.

def dumps_weights(params: ModelParams) -> str:
    a = params.arch
    if isinstance(a, Linear):
        lines = [f"arch linear {a.n_classes} {a.dim}"]
    else:
        lines = [f"arch mlp {a.dim} {a.hidden} {a.n_classes}"]
    for name in a.names:
        w = np.atleast_2d(params.weights[name])
        lines.append(f"{name} {w.shape[0]} {w.shape[1]}")
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in w)
    return "\n".join(lines) + "\n"


def loads_weights(text: str) -> ModelParams:
    lines = text.strip().splitlines()
    head = lines[0].split()
    if head[:2] == ["arch", "linear"]:
        arch: Linear | MLP = Linear(int(head[2]), int(head[3]))
    elif head[:2] == ["arch", "mlp"]:
        arch = MLP(int(head[2]), int(head[3]), int(head[4]))
    else:
        raise ValueError(f"bad weights header: {lines[0]!r}")
    weights = {}
    i = 1
    while i < len(lines):
        name, r, c = lines[i].split()
        r, c = int(r), int(c)
        w = np.array([[float(v) for v in ln.split()] for ln in lines[i + 1:i + 1 + r]])
        weights[name] = w[0] if name.startswith("b") else w
        i += 1 + r
    return ModelParams(arch, weights)
