"""Measurement instruments for training runs and for the linear theory."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import model as M
from . import regularizers as R


@dataclass(frozen=True)
class Breakdown:
    clean_correct: float
    clean_incorrect: float
    wrong_correct: float
    wrong_memorized: float
    wrong_other: float
    empty: bool = False


def predict(probs) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest class
    return np.asarray(probs).argmax(axis=-1)


def breakdown(probs, observed, truth, clean_set, wrong_set) -> Breakdown:
    """Accuracy split into clean-set and wrong-set categories.

    ``observed`` and ``truth`` are class indices or one-hot rows.
    """
    pred = predict(probs)
    observed = _as_class(observed)
    truth = _as_class(truth)
    clean_set = np.asarray(clean_set, dtype=int)
    wrong_set = np.asarray(wrong_set, dtype=int)
    cc = float(np.mean(pred[clean_set] == truth[clean_set])) if len(clean_set) else 0.0
    if len(wrong_set) == 0:
        return Breakdown(cc, 1.0 - cc if len(clean_set) else 0.0, 0.0, 0.0, 0.0, empty=True)
    pw = pred[wrong_set]
    wc = float(np.mean(pw == truth[wrong_set]))
    wm = float(np.mean(pw == observed[wrong_set]))
    return Breakdown(cc, 1.0 - cc if len(clean_set) else 0.0, wc, wm, 1.0 - wc - wm)


def _as_class(labels) -> np.ndarray:
    labels = np.asarray(labels)
    return labels.argmax(axis=1) if labels.ndim == 2 else labels.astype(int)


def mislabeled_accuracy(theta, data) -> float:
    """Fraction of the wrong set where ``sign(theta . x)`` equals the true sign."""
    if len(data.wrong_set) == 0:
        raise ValueError("wrong set is empty")
    X = data.inputs[data.wrong_set]
    return float(np.mean(np.sign(X @ theta) == data.true_sign[data.wrong_set]))


@dataclass(frozen=True)
class GradCorrelation:
    value: float
    zero_grad: bool = False


def grad_correlation(grad, v) -> GradCorrelation:
    """``-grad . v / |grad|``; a zero gradient gives 0 with ``zero_grad`` set."""
    grad = np.asarray(grad, dtype=float)
    norm = np.linalg.norm(grad)
    if norm == 0:
        return GradCorrelation(0.0, zero_grad=True)
    return GradCorrelation(float(-grad @ v / norm))


def kappa(theta, data) -> np.ndarray:
    """Per-example CE coefficient of the binary model, ``tanh(theta.x / 2) - eps``.

    This is ``2 (p_1 - y_1)`` for ``theta = Theta_1 - Theta_2``; the gradient of
    the logistic loss in theta is ``(1/2n) sum_i x_i kappa_i``.
    """
    with np.errstate(over="ignore"):
        return np.tanh(data.inputs @ theta / 2.0) - data.observed_sign


@dataclass(frozen=True)
class KappaStats:
    mean_sq_clean: float
    mean_sq_wrong: float
    empty_clean: bool = False
    empty_wrong: bool = False


def kappa_stats(theta, data) -> KappaStats:
    k2 = kappa(theta, data) ** 2
    c, w = data.clean_set, data.wrong_set
    return KappaStats(
        float(k2[c].mean()) if len(c) else 0.0,
        float(k2[w].mean()) if len(w) else 0.0,
        empty_clean=len(c) == 0,
        empty_wrong=len(w) == 0,
    )


@dataclass(frozen=True)
class TargetAgreement:
    match_observed: float
    match_true: float
    cold: bool = False


def target_agreement(t, observed, truth, subset=None) -> TargetAgreement:
    """Fractions of examples whose target argmax equals the observed / true label."""
    t = np.asarray(getattr(t, "t", t))
    observed = _as_class(observed)
    truth = _as_class(truth)
    if subset is not None:
        subset = np.asarray(subset, dtype=int)
        t, observed, truth = t[subset], observed[subset], truth[subset]
    if len(t) == 0:
        return TargetAgreement(0.0, 0.0, cold=True)
    cold = not np.asarray(t).any()
    arg = predict(t)
    return TargetAgreement(float(np.mean(arg == observed)), float(np.mean(arg == truth)), cold)


# ---------------------------------------------------------------------------
# finite-difference oracle

@dataclass(frozen=True)
class FDResult:
    max_rel_err: float
    clamped: bool = False

    def ok(self, tol: float) -> bool:
        return self.clamped or self.max_rel_err <= tol


def fd_gradient_check(f: Callable[[np.ndarray], float], z, analytic, h: float = 1e-5,
                      valid: Callable[[np.ndarray], bool] | None = None) -> FDResult:
    """Compare ``analytic`` against central differences of ``f`` at ``z``.

    Error per coordinate is ``|a - n| / max(1, |a|)``.  If ``valid`` rejects
    any stencil point the check is skipped and reported as clamped.
    """
    if not 1e-7 <= h <= 1e-4:
        raise ValueError("step must lie in [1e-7, 1e-4]")
    z = np.asarray(z, dtype=float)
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e.flat[i] = h
        if valid is not None and not (valid(z + e) and valid(z - e)):
            return FDResult(float("nan"), clamped=True)
        numeric.flat[i] = (f(z + e) - f(z - e)) / (2 * h)
    err = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
    return FDResult(float(err.max()))


@dataclass
class SuiteReport:
    worst: dict[str, float] = field(default_factory=dict)
    failures: list[tuple[str, int, int, float]] = field(default_factory=list)
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return not self.failures


def _random_instance(rng, c):
    z = rng.normal(scale=2.0, size=c)
    y = np.zeros(c)
    y[rng.integers(c)] = 1.0
    t = rng.dirichlet(np.ones(c)) * rng.uniform(0.0, 1.0)
    lam = rng.uniform(0.1, 5.0)
    return z, y, t, lam


def gradient_suite(trials: int = 100, classes=(2, 3, 10), seed: int = 0, tol: float = 1e-6,
                   binary_trials: int = 1000, binary_tol: float = 1e-12,
                   elr_coeff: Callable = R.elr_coeff) -> SuiteReport:
    """Finite-difference checks of every coefficient mode plus the binary identities.

    ``elr_coeff`` is injectable so that a deliberately broken implementation
    can be shown to fail.
    """
    rep = SuiteReport()

    def note(name, c, i, err, tol_):
        rep.worst[name] = max(rep.worst.get(name, 0.0), err)
        if err > tol_:
            rep.failures.append((name, c, i, err))

    for c in classes:
        rng = np.random.default_rng(np.random.SeedSequence([seed, c]))
        for i in range(trials):
            z, y, t, lam = _random_instance(rng, c)
            p = M.softmax(z)
            cases = {
                "CE": (lambda zz: R.ce_loss(M.softmax(zz), y), R.ce_coeff(p, y), None),
                "ELR": (lambda zz: lam * R.elr_penalty(M.softmax(zz), t), elr_coeff(p, t, lam),
                        lambda zz: 1.0 - M.softmax(zz) @ t > R.ELR_FLOOR),
                "KL": (lambda zz: lam * R.kl_penalty(M.softmax(zz), t), R.kl_coeff(p, t, lam), None),
                "ELR_total": (lambda zz: R.total_loss(M.softmax(zz), y, t, lam, "ELR"),
                              R.ce_coeff(p, y) + elr_coeff(p, t, lam),
                              lambda zz: 1.0 - M.softmax(zz) @ t > R.ELR_FLOOR),
            }
            for name, (f, a, valid) in cases.items():
                res = fd_gradient_check(f, z, a, 1e-5, valid)
                if res.clamped:
                    rep.skipped += 1
                    continue
                note(name, c, i, res.max_rel_err, tol)
            # chain-rule form of the softmax Jacobian applied to dR/dp
            dR = -t / (1.0 - p @ t)
            chain = -p * (p @ dR - dR)
            g = elr_coeff(p, t, 1.0)
            note("activation_identity", c, i, float(np.max(np.abs(chain - g) / np.maximum(1.0, np.abs(g)))), 1e-10)

    rng = np.random.default_rng(np.random.SeedSequence([seed, 2, 2]))
    s = rng.uniform(1e-3, 1 - 1e-3, size=binary_trials)
    q = rng.uniform(0.0, 1.0, size=binary_trials)
    g1 = np.array([elr_coeff(np.array([a, 1 - a]), np.array([b, 1 - b]), 1.0)[0] for a, b in zip(s, q)])
    diff = np.abs(R.binary_elr_grad_scale(s, q) + g1)
    for i in np.flatnonzero(diff > binary_tol)[:10]:
        rep.failures.append(("binary", 2, int(i), float(diff[i])))
    rep.worst["binary"] = float(diff.max())
    return rep


# ---------------------------------------------------------------------------
# early-learning dynamics of the two-class linear model

@dataclass
class EarlyLearningTrace:
    horizon: int                     # T, first t >= 1 with theta_t . v >= 0.1
    theta0: np.ndarray
    thetaT: np.ndarray
    grad_corr: list[float]           # for t = 0 .. T-1
    kappa0: KappaStats
    kappaT: KappaStats
    acc0: float
    accT: float
    reached: bool = True


def early_learning_trace(data, eta: float = 0.1, init_seed: int = 0, max_steps: int = 100_000,
                         threshold: float = 0.1) -> EarlyLearningTrace:
    """Full-batch CE gradient descent on ``Linear(2, p)`` until ``theta . v >= threshold``."""
    arch = M.Linear(2, data.p)
    params = M.init_params(arch, init_seed, radius=2.0)
    X, Y, v = data.inputs, data.observed_labels, data.v
    theta0 = params.theta_binary
    corrs = []
    t = 0
    reached = False
    while t < max_steps:
        P = M.softmax(M.forward(params, X))
        grad = M.grad_from_coeffs(params, X, R.ce_coeff(P, Y))
        # logistic-loss gradient in theta: half the Theta-space difference
        corrs.append(grad_correlation((grad["W"][0] - grad["W"][1]) / 2.0, v).value)
        params = M.sgd_step(params, grad, eta)
        t += 1
        if params.theta_binary @ v >= threshold:
            reached = True
            break
    thetaT = params.theta_binary
    return EarlyLearningTrace(
        horizon=t,
        theta0=theta0,
        thetaT=thetaT,
        grad_corr=corrs,
        kappa0=kappa_stats(theta0, data),
        kappaT=kappa_stats(thetaT, data),
        acc0=mislabeled_accuracy(theta0, data),
        accT=mislabeled_accuracy(thetaT, data),
        reached=reached,
    )
