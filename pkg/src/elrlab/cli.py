"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 divergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as A
from . import model as M
from .config import ConfigError, RunConfig, load_config
from .datagen import fingerprint
from .runlog import COLUMNS, INT_COLUMNS, from_csv, to_csv
from .separability import memorization_prob_bound, separability_sweep
from .trainer import train, train_elr_plus
from .regularizers import Mode

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def with_seed(cfg: RunConfig, seed: int | None) -> RunConfig:
    """Override both the training and the dataset seed."""
    if seed is None:
        return cfg
    return RunConfig(replace(cfg.train, seed=seed), replace(cfg.data, data_seed=seed))


def execute(cfg_dict: dict, out: str | None, save_targets: bool = False,
            save_weights: bool = False) -> dict:
    """Run one configuration; optionally write its files under ``out``.

    Top-level so it can be shipped to worker processes.
    """
    cfg = RunConfig.from_dict(cfg_dict)
    try:
        data = cfg.data.build()
    except ValueError as exc:
        raise ConfigError(f"dataset: {exc}") from None
    t0 = time.perf_counter()
    if cfg.train.mode is Mode.ELR_PLUS:
        logs = list(train_elr_plus(cfg.train, data))
    else:
        logs = [train(cfg.train, data)]
    duration = time.perf_counter() - t0
    diverged = any(lg.diverged for lg in logs)
    csvs = [to_csv(lg) for lg in logs]
    manifest = {
        "config": cfg.to_dict(),
        "seed": cfg.train.seed,
        "data_seed": cfg.data.data_seed,
        "dataset_fingerprint": fingerprint(data),
        "version": __version__,
        "duration_s": duration,
        "diverged": diverged,
        "message": "; ".join(lg.message for lg in logs if lg.message),
        "realized_wrong_fraction": data.wrong_fraction,
    }
    if out is not None:
        d = Path(out)
        suffixes = [""] if len(logs) == 1 else ["", "_net2"]
        for sfx, text, lg in zip(suffixes, csvs, logs):
            write_atomic(d / f"metrics{sfx}.csv", text)
            if save_targets:
                write_atomic(d / f"targets{sfx}.csv", lg.targets.dumps())
            if save_weights:
                write_atomic(d / f"weights{sfx}.txt", M.dumps_weights(lg.params))
        write_atomic(d / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return {"csv": csvs[0], "manifest": manifest, "diverged": diverged}


def _map(fn, jobs: int, arglists: list[tuple]) -> list:
    if jobs <= 1 or len(arglists) <= 1:
        return [fn(*a) for a in arglists]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        futs = [ex.submit(fn, *a) for a in arglists]
        return [f.result() for f in futs]


# ---------------------------------------------------------------------------
# subcommands

def cmd_run(args) -> int:
    if (args.config is None) == (args.manifest is None):
        raise UsageError("run needs exactly one of CONFIG or --manifest")
    expected = None
    if args.manifest is not None:
        try:
            man = json.loads(Path(args.manifest).read_text())
            cfg = RunConfig.from_dict(man["config"])
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"{args.manifest}: unreadable manifest ({exc})") from None
        expected = man.get("dataset_fingerprint")
    else:
        cfg = load_config(args.config)
    cfg = with_seed(cfg, args.seed)
    res = execute(cfg.to_dict(), args.out or ".", args.save_targets, args.save_weights)
    final = from_csv(res["csv"]).final
    print(f"mode={cfg.train.mode.value} epochs={final['epoch']} ce={final['ce']:.6g} "
          f"clean_correct={final['clean_correct']:.4f} wrong_memorized={final['wrong_memorized']:.4f}")
    if res["diverged"]:
        print(f"diverged: {res['manifest']['message']}", file=sys.stderr)
        return EXIT_DIVERGED
    if expected is not None and args.seed is None and expected != res["manifest"]["dataset_fingerprint"]:
        print("dataset fingerprint differs from the manifest", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _flipped_elr(p, t, lam):
    from .regularizers import elr_coeff
    return -elr_coeff(p, t, lam)


def cmd_gradcheck(args) -> int:
    seed = 0 if args.seed is None else args.seed
    coeff = _flipped_elr if args.mutate == "elr-sign" else None
    kw = {"elr_coeff": coeff} if coeff else {}
    t0 = time.perf_counter()
    rep = A.gradient_suite(trials=args.trials, seed=seed, **kw)
    for name, err in rep.worst.items():
        print(f"{name:20s} worst rel-err {err:.3e}")
    print(f"stencils skipped near the clamp: {rep.skipped}; {time.perf_counter() - t0:.2f}s")
    if rep.failures:
        for name, c, i, err in rep.failures[:20]:
            print(f"FAIL mode={name} C={c} seed={seed} instance={i} err={err:.3e}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_separability(args) -> int:
    if args.trials < 1 or args.n < 1 or args.p < 1 or not 0 <= args.delta <= 1:
        raise UsageError("need n, p, trials >= 1 and delta in [0, 1]")
    seed = 0 if args.seed is None else args.seed
    rows = separability_sweep(args.n, args.p, args.delta, args.trials, seed, args.sigma)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "n", "p", "delta", "separable", "bound"])
    for r in rows:
        sep = "" if r.separable is None else str(r.separable).lower()
        w.writerow([r.seed, r.n, r.p, f"{r.delta:.17g}", sep, f"{r.bound:.17g}"])
    if args.out:
        write_atomic(Path(args.out) / "separability.csv", buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    n_sep = sum(r.separable is True for r in rows)
    n_non = sum(r.separable is False for r in rows)
    n_und = sum(r.separable is None for r in rows)
    bound = memorization_prob_bound(args.n, args.p, args.delta)
    freq = n_non / args.trials
    se = float(np.sqrt(bound * (1 - bound) / args.trials)) if bound < 1 else 0.0
    print(f"separable={n_sep} non_separable={n_non} undecided={n_und} trials={args.trials}",
          file=sys.stderr)
    print(f"non_separable_freq={freq:.4f} bound={bound:.6g} se={se:.4g}", file=sys.stderr)
    return EXIT_OK


def _label(path: str, used: set) -> str:
    base = Path(path).stem
    label, k = base, 2
    while label in used:
        label, k = f"{base}_{k}", k + 1
    used.add(label)
    return label


def cmd_compare(args) -> int:
    if len(args.configs) < 2:
        raise UsageError("compare needs at least two configs")
    cfgs = [with_seed(load_config(p), args.seed) for p in args.configs]
    for path, c in zip(args.configs[1:], cfgs[1:]):
        if c.data != cfgs[0].data:
            raise UsageError(f"{path}: dataset settings differ from {args.configs[0]}")
    used: set = set()
    labels = [_label(p, used) for p in args.configs]
    outs = [None if args.out is None else str(Path(args.out) / lb) for lb in labels]
    results = _map(execute, args.jobs, [(c.to_dict(), o) for c, o in zip(cfgs, outs)])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "mode", "epoch", "metric", "value"])
    for lb, c, res in zip(labels, cfgs, results):
        for rec in from_csv(res["csv"]).records:
            for col in COLUMNS:
                if col in INT_COLUMNS or rec[col] is None:
                    continue
                w.writerow([lb, c.train.mode.value, rec["epoch"], col, f"{rec[col]:.17g}"])
    if args.out:
        write_atomic(Path(args.out) / "compare.csv", buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_DIVERGED if any(r["diverged"] for r in results) else EXIT_OK


def cmd_sweep(args) -> int:
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    base = load_config(args.config)
    start = base.train.seed if args.seed is None else args.seed
    seeds = list(range(start, start + args.runs))
    cfgs = [with_seed(base, s) for s in seeds]
    outs = [None if args.out is None else str(Path(args.out) / f"seed{s}") for s in seeds]
    results = _map(execute, args.jobs, [(c.to_dict(), o) for c, o in zip(cfgs, outs)])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "diverged", *COLUMNS])
    for s, res in zip(seeds, results):
        fin = from_csv(res["csv"]).final
        w.writerow([s, str(res["diverged"]).lower(),
                     *("" if fin[c] is None else (str(fin[c]) if c in INT_COLUMNS else f"{fin[c]:.17g}")
                       for c in COLUMNS)])
    if args.out:
        write_atomic(Path(args.out) / "sweep.csv", buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_DIVERGED if any(r["diverged"] for r in results) else EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the root seed")
    common.add_argument("--out", default=None, metavar="DIR", help="output directory")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="concurrent runs")

    ap = argparse.ArgumentParser(prog="elrlab", description="Noisy-label early-learning lab.")
    ap.add_argument("--version", action="version", version=f"elrlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="one training run")
    p.add_argument("config", nargs="?")
    p.add_argument("--manifest", help="re-run the configuration stored in a manifest")
    p.add_argument("--save-targets", action="store_true", help="also write targets.csv")
    p.add_argument("--save-weights", action="store_true", help="also write weights.txt")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient suite")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--mutate", choices=["elr-sign"], default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("separability", parents=[common], help="Monte Carlo separability")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--sigma", type=float, default=0.1)
    p.set_defaults(func=cmd_separability)

    p = sub.add_parser("compare", parents=[common], help="several configs on one dataset")
    p.add_argument("configs", nargs="+")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", parents=[common], help="one config over consecutive seeds")
    p.add_argument("config")
    p.add_argument("--runs", type=int, default=5)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
