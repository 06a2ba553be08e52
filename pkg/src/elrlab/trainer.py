"""Training loops: cross entropy, KL-to-targets, ELR, and the two-network ELR+."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import analysis as A
from . import model as M
from . import regularizers as R
from .datagen import NoisyDataset
from .regularizers import Mode
from .runlog import RunLog
from .targets import TargetTable, mixup_batch, ramp, refine_labels


@dataclass(frozen=True)
class TrainConfig:
    mode: Mode = Mode.CE
    eta: float = 0.1
    epochs: int = 100
    batch_size: int | None = None        # None means full batch
    lam: float = 3.0
    beta: float = 0.7
    gamma: float = 0.997
    alpha_mixup: float = 1.0
    mixup: bool = True
    ramp_steps: int | None = None        # lambda ramp-up length in steps
    gamma_ramp_steps: int | None = None
    refine_labels: bool = False
    targets: str = "ensemble"            # or "uniform" (fixed 1/C targets)
    arch: str = "linear"
    hidden: int = 16
    init_radius: float = 2.0
    cadence: str = "epoch"               # or "step"
    seed: int = 0
    seed2: int | None = None             # second ELR+ network; derived from seed if None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.mode is Mode.ELR_PLUS and self.alpha_mixup <= 0:
            raise ValueError("alpha_mixup must be positive")
        if self.targets not in ("ensemble", "uniform"):
            raise ValueError("targets must be 'ensemble' or 'uniform'")
        if self.arch not in ("linear", "mlp"):
            raise ValueError("arch must be 'linear' or 'mlp'")
        if self.cadence not in ("epoch", "step"):
            raise ValueError("cadence must be 'epoch' or 'step'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d


def make_arch(cfg: TrainConfig, data: NoisyDataset) -> M.Linear | M.MLP:
    if cfg.arch == "linear":
        return M.Linear(data.n_classes, data.p)
    return M.MLP(data.p, cfg.hidden, data.n_classes)


def _batches(n: int, batch_size: int | None, rng: np.random.Generator):
    if batch_size is None or batch_size >= n:
        yield np.arange(n)
        return
    order = rng.permutation(n)
    for s in range(0, n, batch_size):
        yield order[s:s + batch_size]


def _new_table(cfg: TrainConfig, data: NoisyDataset) -> TargetTable:
    if cfg.targets == "uniform":
        return TargetTable.uniform(data.n, data.n_classes)
    return TargetTable(data.n, data.n_classes, cfg.beta)


def _lam(cfg: TrainConfig, step: int) -> float:
    return ramp(step, cfg.ramp_steps, cfg.lam) if cfg.ramp_steps else cfg.lam


def _gamma(cfg: TrainConfig, step: int) -> float:
    return ramp(step, cfg.gamma_ramp_steps, cfg.gamma) if cfg.gamma_ramp_steps else cfg.gamma


def _binary_linear(params: M.ModelParams) -> bool:
    return isinstance(params.arch, M.Linear) and params.arch.n_classes == 2


def epoch_metrics(params: M.ModelParams, table: TargetTable, data: NoisyDataset, mode: Mode,
                  lam: float, ens_probs: np.ndarray | None = None) -> dict:
    """Full-data metrics for one network and its target table."""
    X, Y = data.inputs, data.observed_labels
    with np.errstate(over="ignore", invalid="ignore"):
        # a blown-up model yields NaN metrics, which the log rejects as divergence
        P = M.softmax(M.forward(params, X))
    t = table.t
    loss_mode = Mode.ELR if mode is Mode.ELR_PLUS else mode
    lb = R.loss_breakdown(P, Y, t, lam, loss_mode)
    bd = A.breakdown(P, data.observed_class, data.true_class, data.clean_set, data.wrong_set)
    out = dict(
        ce=lb.ce_value, reg=lb.reg_value, total=lb.total, **{"lambda": lb.lam},
        clean_correct=bd.clean_correct, clean_incorrect=bd.clean_incorrect,
        wrong_correct=bd.wrong_correct if not bd.empty else None,
        wrong_memorized=bd.wrong_memorized if not bd.empty else None,
        wrong_other=bd.wrong_other if not bd.empty else None,
    )
    if _binary_linear(params) and data.n_classes == 2:
        theta = params.theta_binary
        ks = A.kappa_stats(theta, data)
        out["kappa_sq_clean"] = None if ks.empty_clean else ks.mean_sq_clean
        out["kappa_sq_wrong"] = None if ks.empty_wrong else ks.mean_sq_wrong
        out["theta_dot_v"] = float(theta @ data.v)
        E = R.total_coeff(P, Y, t, lb.lam, loss_mode)
        g = M.grad_from_coeffs(params, X, E)["W"]
        gc = A.grad_correlation(g[0] - g[1], data.v)
        out["grad_corr"] = None if gc.zero_grad else gc.value
    if not table.cold:
        ta = A.target_agreement(t, data.observed_class, data.true_class)
        out["target_match_observed"] = ta.match_observed
        out["target_match_true"] = ta.match_true
        if len(data.wrong_set):
            tw = A.target_agreement(t, data.observed_class, data.true_class, data.wrong_set)
            out["target_wrong_match_observed"] = tw.match_observed
            out["target_wrong_match_true"] = tw.match_true
    if ens_probs is not None:
        be = A.breakdown(ens_probs, data.observed_class, data.true_class, data.clean_set, data.wrong_set)
        out["ens_clean_correct"] = be.clean_correct
        if not be.empty:
            out["ens_wrong_correct"] = be.wrong_correct
            out["ens_wrong_memorized"] = be.wrong_memorized
    return out


def _probs(params: M.ModelParams, X: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        z = M.forward(params, X)
    if not np.isfinite(z).all():
        raise M.DivergenceError("non-finite logits")
    return M.softmax(z)


def _record(log: RunLog, epoch: int, step: int, metrics: dict) -> bool:
    try:
        log.append(epoch=epoch, step=step, **metrics)
    except ValueError as exc:
        log.diverged = True
        log.message = str(exc)
        return False
    return True


def train(cfg: TrainConfig, data: NoisyDataset) -> RunLog:
    """Single-network training following the ELR-with-temporal-ensembling loop.

    Per minibatch: evaluate outputs, update the targets of those examples,
    form the loss coefficients, take a gradient step.  Targets are maintained
    in every mode so that target agreement can be logged for CE as well.
    """
    if cfg.mode is Mode.ELR_PLUS:
        raise ValueError("use train_elr_plus for ELR_PLUS")
    arch = make_arch(cfg, data)
    params = M.init_params(arch, cfg.seed, cfg.init_radius)
    table = _new_table(cfg, data)
    shuffle = np.random.default_rng(np.random.SeedSequence([cfg.seed, 3]))
    X, Y = data.inputs, data.observed_labels
    log = RunLog()
    step = 0
    _record(log, 0, 0, epoch_metrics(params, table, data, cfg.mode, _lam(cfg, 0)))
    for epoch in range(1, cfg.epochs + 1):
        for idx in _batches(data.n, cfg.batch_size, shuffle):
            xb = X[idx]
            try:
                P = _probs(params, xb)
                tb = table.update(idx, P)
                yb = refine_labels(Y[idx], tb) if cfg.refine_labels else Y[idx]
                E = R.total_coeff(P, yb, tb, _lam(cfg, step), cfg.mode)
                params = M.sgd_step(params, M.grad_from_coeffs(params, xb, E), cfg.eta)
            except M.DivergenceError as exc:
                log.diverged, log.message = True, str(exc)
                break
            step += 1
            if cfg.cadence == "step" and not _record(
                    log, epoch, step, epoch_metrics(params, table, data, cfg.mode, _lam(cfg, step))):
                break
        if log.diverged:
            break
        if cfg.cadence == "epoch" and not _record(
                log, epoch, step, epoch_metrics(params, table, data, cfg.mode, _lam(cfg, step))):
            break
    log.params = params
    log.targets = table
    return log


def train_elr_plus(cfg: TrainConfig, data: NoisyDataset) -> tuple[RunLog, RunLog]:
    """Two networks with weight averaging, cross targets and mixup.

    Both networks see the same minibatch at each step.  Their weight averages
    are refreshed first; then network k updates its targets from the other
    network's averaged weights on the un-mixed inputs and takes a step on the
    mixed inputs, labels and targets.  Logged accuracy for each network is
    its own; the ``ens_*`` columns use the mean of both networks' softmax
    outputs.
    """
    if cfg.mode is not Mode.ELR_PLUS:
        raise ValueError("train_elr_plus needs mode ELR_PLUS")
    arch = make_arch(cfg, data)
    seed2 = cfg.seed2 if cfg.seed2 is not None else int(np.random.SeedSequence([cfg.seed, 5]).generate_state(1)[0])
    params = [M.init_params(arch, cfg.seed, cfg.init_radius), M.init_params(arch, seed2, cfg.init_radius)]
    avg = [M.averaged_init(p, cfg.gamma) for p in params]
    tables = [_new_table(cfg, data), _new_table(cfg, data)]
    shuffle = np.random.default_rng(np.random.SeedSequence([cfg.seed, 3]))
    mix_rngs = [np.random.default_rng(np.random.SeedSequence([cfg.seed, 4, k])) for k in (0, 1)]
    X, Y = data.inputs, data.observed_labels
    logs = (RunLog(), RunLog())

    def record(epoch, step, mix_weights):
        with np.errstate(over="ignore", invalid="ignore"):
            ens = (M.softmax(M.forward(params[0], X)) + M.softmax(M.forward(params[1], X))) / 2.0
        ok = True
        for k in (0, 1):
            m = epoch_metrics(params[k], tables[k], data, cfg.mode, _lam(cfg, step), ens)
            m["mix_weight_mean"] = float(np.mean(mix_weights[k])) if mix_weights[k] else None
            ok &= _record(logs[k], epoch, step, m)
        return ok

    step = 0
    record(0, 0, ([], []))
    diverged = ""
    for epoch in range(1, cfg.epochs + 1):
        mix_weights: tuple[list, list] = ([], [])
        for idx in _batches(data.n, cfg.batch_size, shuffle):
            xb = X[idx]
            gamma = _gamma(cfg, step)
            avg = [M.weight_average(a, p, gamma) for a, p in zip(avg, params)]
            new = []
            for k in (0, 1):
                other = M.as_params(avg[1 - k], arch)
                try:
                    tb = tables[k].update(idx, _probs(other, xb))
                    yb = refine_labels(Y[idx], tb) if cfg.refine_labels else Y[idx]
                    if cfg.mixup:
                        mixed = mixup_batch(xb, yb, tb, cfg.alpha_mixup, mix_rngs[k])
                    else:
                        mixed = mixup_batch(xb, yb, tb, cfg.alpha_mixup, ell=1.0, partner=np.arange(len(idx)))
                    mix_weights[k].extend(mixed.ell_prime.tolist())
                    P = _probs(params[k], mixed.x)
                    E = R.total_coeff(P, mixed.y, mixed.t, _lam(cfg, step), Mode.ELR)
                    new.append(M.sgd_step(params[k], M.grad_from_coeffs(params[k], mixed.x, E), cfg.eta))
                except M.DivergenceError as exc:
                    diverged = f"network {k + 1}: {exc}"
                    break
            if diverged:
                break
            params = new
            step += 1
            if cfg.cadence == "step" and not record(epoch, step, mix_weights):
                break
        if diverged or any(lg.diverged for lg in logs):
            break
        if cfg.cadence == "epoch" and not record(epoch, step, mix_weights):
            break
    for k in (0, 1):
        if diverged:
            logs[k].diverged, logs[k].message = True, diverged
        logs[k].params = params[k]
        logs[k].targets = tables[k]
    return logs


def run(cfg: TrainConfig, data: NoisyDataset) -> RunLog:
    """Dispatch on mode; ELR+ returns the first network's log (ensemble columns included)."""
    if cfg.mode is Mode.ELR_PLUS:
        return train_elr_plus(cfg, data)[0]
    return train(cfg, data)
