"""Command-line front end: every experiment as a subcommand with seeded,
byte-reproducible CSV/JSON/SVG outputs.

Each run writes one self-describing directory (config echo, results table,
summary, optional plot) under --out, named by a hash of the configuration so
identical invocations land in identical files.  Exit codes: 0 success,
2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import assumptions as asm
from . import datasets as dsets
from . import linear as lin
from . import oracle as orc
from . import recovery as rec
from . import svgplot
from . import training as trn
from .mixing import InvalidDistributionError, MixingDistribution
from .oracle import GridSpec, OutsideMixSupportError

__all__ = ["ExperimentConfig", "main"]

_OUT_ENV = "MIXLAB_OUT"


class ConfigError(ValueError):
    pass


class NumericFailure(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    """Flat record of one run's settings; JSON round-trips losslessly."""

    subcommand: str
    dataset: str = ""
    alpha: list = field(default_factory=list)  # empty = uniform mixing
    eps: float | None = None
    limit: bool = False
    probe: list = field(default_factory=list)
    grid: str = ""
    mode: str = "mixup"
    seeds: int = 1
    seed: int = 0
    epochs: int = 3000
    batch_size: int | None = None
    hidden: int = 512
    sep: float = 0.5
    noise: float = 0.1
    n_per_class: int = 100
    n: int = 20
    d: int = 650
    trials: int = 50
    m: int = 6
    dim: int = 2
    unlabeled: bool = False
    rank_trials: int = 0
    fraction: float = 0.2
    samples: int = 0
    delta: float = 0.25
    tol: float = 1e-9
    nodes: int = 64
    mnist_dir: str = ""
    out: str = ""
    name: str = ""
    workers: int = 1

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "subcommand" not in data:
            raise ConfigError("config must name a subcommand")
        return cls(**data)

    def run_dir(self) -> Path:
        root = Path(self.out or os.environ.get(_OUT_ENV, "runs"))
        if self.name:
            return root / self.name
        payload = dataclasses.asdict(self)
        for volatile in ("out", "name", "workers"):
            payload.pop(volatile)
        digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
        return root / f"{self.subcommand}-{digest[:10]}"


# ---------------------------------------------------------------------- #
# shared helpers
# ---------------------------------------------------------------------- #

_XMK_RE = re.compile(r"^x(\d+)k(\d+)$")


def build_dataset(cfg: ExperimentConfig) -> dsets.LabeledDataset:
    spec = cfg.dataset
    m = _XMK_RE.match(spec)
    if m:
        return dsets.alternating_line(int(m.group(1)), int(m.group(2)))
    if spec == "cross":
        return dsets.four_point_cross()
    if spec == "moons":
        return dsets.two_moons(cfg.n_per_class, cfg.sep, cfg.noise, cfg.seed)
    if spec == "gauss":
        return dsets.gaussian_binary(cfg.n, cfg.d, cfg.seed)
    if spec.startswith("csv:"):
        return dsets.load_csv(spec[4:])
    if spec == "mnist":
        root = Path(cfg.mnist_dir or "data")
        images = root / "train-images-idx3-ubyte"
        labels = root / "train-labels-idx1-ubyte"
        if not images.exists() or not labels.exists():
            raise ConfigError(f"mnist IDX files not found under {root}")
        return dsets.load_idx(images, labels, cfg.fraction, cfg.seed)
    raise ConfigError(f"unknown dataset spec {spec!r}")


def build_mixing(cfg: ExperimentConfig, alpha: float | None = None) -> MixingDistribution:
    if alpha is None:
        alpha = cfg.alpha[0] if cfg.alpha else None
    if alpha is None:
        return MixingDistribution.uniform()
    return MixingDistribution.beta(float(alpha))


def _parse_probe(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad probe {text!r}") from exc


def _parse_grid(cfg: ExperimentConfig, ds) -> GridSpec:
    if cfg.grid:
        parts = cfg.grid.split(",")
        if len(parts) != 5:
            raise ConfigError("grid must be 'xmin,xmax,ymin,ymax,n'")
        x0, x1, y0, y1 = (float(v) for v in parts[:4])
        n = int(parts[4])
        return GridSpec(x0, x1, y0, y1, n, n)
    lo = ds.points.min(axis=0) - 0.5
    hi = ds.points.max(axis=0) + 0.5
    return GridSpec(float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]), 101, 101)


def _prepare_dir(cfg: ExperimentConfig) -> Path:
    run = cfg.run_dir()
    run.mkdir(parents=True, exist_ok=True)
    (run / "config.json").write_text(cfg.to_json() + "\n")
    return run


def _write_summary(run: Path, payload: dict) -> None:
    (run / "summary.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------- #
# oracle
# ---------------------------------------------------------------------- #


def cmd_oracle(cfg: ExperimentConfig) -> int:
    ds = build_dataset(cfg)
    dist = build_mixing(cfg)
    if not cfg.probe and not cfg.grid and ds.dim != 2:
        raise ConfigError("oracle needs --probe (or --grid on 2-D data)")
    if not cfg.limit and cfg.eps is None:
        raise ConfigError("oracle needs --eps or --limit")
    run = _prepare_dir(cfg)
    rows = []
    summary = {"probes": []}
    for text in cfg.probe:
        x = _parse_probe(text)
        if cfg.limit:
            probs = orc.mixture_limit_probs(ds, dist, x)
        else:
            table = orc.mix_mass_table(ds, dist, x, cfg.eps)
            probs = (
                orc.mixture_optimal_probs(ds, dist, x, cfg.eps)
                if table.in_mix_support
                else None
            )
        label = 0 if probs is None else orc.argmax_class(probs)
        vec = [0.0] * ds.k if probs is None else [float(v) for v in probs]
        rows.append([",".join(map(repr, map(float, x))), label] + vec)
        summary["probes"].append({"probe": [float(v) for v in x], "label": label, "probs": vec})
    with open(run / "results.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["probe", "label"] + [f"p{i+1}" for i in range(ds.k)])
        writer.writerows(rows)
    if cfg.grid or (not cfg.probe and ds.dim == 2):
        grid = _parse_grid(cfg, ds)
        labels, probs = orc.boundary_grid(
            ds, dist, grid, eps=cfg.eps, limit=cfg.limit
        )
        orc.save_grid_csv(run / "grid.csv", grid, labels, probs)
        svgplot.svg_decision_grid(
            run / "plot.svg", grid, labels, ds.points, ds.labels,
            title=f"optimal classifier regions: {cfg.dataset}",
        )
        summary["grid_cells_defined"] = int((labels > 0).sum())
    _write_summary(run, summary)
    print(run)
    return 0


# ---------------------------------------------------------------------- #
# train
# ---------------------------------------------------------------------- #


def _run_one_training(job) -> dict:
    (cfg_dict, mode, alpha, seed_index) = job
    cfg = ExperimentConfig(**cfg_dict)
    ds = build_dataset(cfg)
    alpha_key = 0 if alpha is None else int(round(1000 * alpha))
    mode_key = {"erm": 1, "mixup": 2}[mode]
    ss = np.random.SeedSequence((cfg.seed, seed_index, alpha_key, mode_key))
    init_seed, train_seed = ss.spawn(2)
    model = trn.init_mlp([ds.dim, cfg.hidden, ds.k], seed=init_seed)
    dist = None if alpha is None else MixingDistribution.beta(alpha)
    history = trn.train(
        model, ds, mode=mode, dist=dist, epochs=cfg.epochs,
        seed=train_seed, batch_size=cfg.batch_size,
    )
    ev = trn.evaluate(model, ds)
    result = {
        "mode": mode,
        "alpha": alpha,
        "seed_index": seed_index,
        "losses": history.losses,
        "train_errors": history.train_errors,
        "probs": ev.probs.tolist(),
        "accuracy": ev.accuracy,
    }
    if ds.dim == 2:
        grid = _parse_grid(cfg, ds)
        xs, ys = grid.xs(), grid.ys()
        gx, gy = np.meshgrid(xs, ys)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        result["grid_probs"] = model.forward(pts)[:, 0].reshape(len(ys), len(xs)).tolist()
    return result


def cmd_train(cfg: ExperimentConfig) -> int:
    ds = build_dataset(cfg)
    run = _prepare_dir(cfg)
    modes = ["erm", "mixup"] if cfg.mode == "both" else [cfg.mode]
    if cfg.mode not in ("erm", "mixup", "both"):
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    jobs = []
    cfg_dict = dataclasses.asdict(cfg)
    for mode in modes:
        alphas = [None] if mode == "erm" else (cfg.alpha or [None])
        for alpha in alphas:
            if mode == "mixup" and alpha is None:
                raise ConfigError("mixup training needs --alpha")
            for s in range(cfg.seeds):
                jobs.append((cfg_dict, mode, alpha, s))
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one_training, jobs))
    else:
        results = [_run_one_training(j) for j in jobs]

    with open(run / "results.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["mode", "alpha", "seed_index", "point_index", "label"]
            + [f"p{i+1}" for i in range(ds.k)]
        )
        for res in results:
            for p_idx, prob_row in enumerate(res["probs"]):
                writer.writerow(
                    [res["mode"], "" if res["alpha"] is None else repr(float(res["alpha"])),
                     res["seed_index"], p_idx, int(ds.labels[p_idx])]
                    + [repr(float(v)) for v in prob_row]
                )
    groups = {}
    for res in results:
        groups.setdefault((res["mode"], res["alpha"]), []).append(res)
    summary = {"runs": []}
    curves = []
    for (mode, alpha), members in sorted(groups.items(), key=lambda kv: str(kv[0])):
        errs = np.array([mb["train_errors"] for mb in members])
        probs = np.array([mb["probs"] for mb in members])
        tag = mode if alpha is None else f"{mode}_a{alpha:g}"
        for mb in members:
            hist = trn.TrainHistory(
                epochs=list(range(cfg.epochs)), losses=mb["losses"],
                train_errors=mb["train_errors"],
            )
            trn.save_history_csv(run / f"history_{tag}_s{mb['seed_index']}.csv", hist)
        summary["runs"].append(
            {
                "mode": mode,
                "alpha": alpha,
                "final_error_mean": float(errs[:, -1].mean()),
                "final_error_sd": float(errs[:, -1].std()),
                "class1_prob_mean_per_point": probs[:, :, 0].mean(axis=0).tolist(),
                "class1_prob_sd_per_point": probs[:, :, 0].std(axis=0).tolist(),
                "accuracy_mean": float(np.mean([mb["accuracy"] for mb in members])),
            }
        )
        curves.append((tag, list(range(cfg.epochs)), errs.mean(axis=0).tolist()))
        if ds.dim == 2 and "grid_probs" in members[0]:
            grid = _parse_grid(cfg, ds)
            mean_p1 = np.mean([mb["grid_probs"] for mb in members], axis=0)
            labels = np.where(mean_p1 >= 0.5, 1, 2)
            svgplot.svg_decision_grid(
                run / f"boundary_{tag}.svg", grid, labels, ds.points, ds.labels,
                title=f"{cfg.dataset}: {tag} (mean of {len(members)} runs)",
            )
    svgplot.svg_curves(
        run / "plot.svg", curves, title=f"training error on {cfg.dataset}",
        xlabel="epoch", ylabel="train error",
    )
    _write_summary(run, summary)
    print(run)
    return 0


# ---------------------------------------------------------------------- #
# recover
# ---------------------------------------------------------------------- #


def cmd_recover(cfg: ExperimentConfig) -> int:
    run = _prepare_dir(cfg)
    rng = np.random.default_rng(cfg.seed)
    summary = {}
    if cfg.unlabeled and cfg.dim != 1:
        raise ConfigError("unlabeled recovery is 1-D only")
    points = rng.standard_normal((cfg.m, cfg.dim))
    mids = rec.form_midpoints(points)
    pairs = rec.pair_index(cfg.m)
    labeled = {pair: mids[i] for i, pair in enumerate(pairs)}
    rec.save_labeled_midpoints_csv(run / "midpoints.csv", labeled)
    recovered, residual = rec.recover_labeled(labeled, cfg.m)
    err = float(np.abs(recovered - points).max())
    summary["labeled"] = {"residual": residual, "max_error": err}
    if err > 1e-8:
        raise NumericFailure(f"labeled recovery error {err:.3g} exceeds 1e-8")
    if cfg.unlabeled:
        sols = rec.recover_unlabeled_bruteforce(mids.ravel().tolist())
        match = any(
            np.allclose(np.sort(points.ravel()), s, atol=1e-8) for s in sols
        )
        summary["unlabeled"] = {"n_solutions": len(sols), "contains_original": bool(match)}
    if cfg.rank_trials > 0:
        report = rec.permutation_rank_trials(cfg.m, cfg.rank_trials, cfg.seed)
        summary["rank_trials"] = dataclasses.asdict(report)
    _write_summary(run, summary)
    print(run)
    return 0


# ---------------------------------------------------------------------- #
# assumptions
# ---------------------------------------------------------------------- #


def cmd_assumptions(cfg: ExperimentConfig) -> int:
    ds = build_dataset(cfg)
    run = _prepare_dir(cfg)
    summary = {"dataset": cfg.dataset, "m": ds.m, "k": ds.k}
    if ds.m <= 400:  # the exact audit enumerates O(m^3) triples
        violations = asm.collinearity_violations(ds, tol=cfg.tol)
        asm.save_violations_csv(run / "violations.csv", violations)
        summary["collinearity_violations"] = len(violations)
    summary["margin_radius"] = {
        str(i): asm.margin_radius(ds, i) for i in range(1, ds.k + 1)
    }
    if cfg.alpha or cfg.samples:
        dist = build_mixing(cfg)
        n_samples = cfg.samples or ds.m  # one epoch's worth by default
        reference = ds
        if cfg.dataset == "mnist" and cfg.mnist_dir:
            test_images = Path(cfg.mnist_dir) / "t10k-images-idx3-ubyte"
            test_labels = Path(cfg.mnist_dir) / "t10k-labels-idx1-ubyte"
            if test_images.exists() and test_labels.exists():
                test_ds = dsets.load_idx(test_images, test_labels, cfg.fraction, cfg.seed)
                d_test, _ = asm.min_mix_clearance(ds, dist, n_samples, test_ds, cfg.seed)
                summary["min_distance_test"] = d_test
        d_train, contributing = asm.min_mix_clearance(ds, dist, n_samples, reference, cfg.seed)
        summary["min_distance_train"] = d_train if np.isfinite(d_train) else "inf"
        summary["clearance_samples_contributing"] = contributing
        if not np.isfinite(d_train):
            print("warning: no sample had an eligible reference class", file=sys.stderr)
    _write_summary(run, summary)
    print(run)
    return 0


# ---------------------------------------------------------------------- #
# linear
# ---------------------------------------------------------------------- #


def cmd_linear(cfg: ExperimentConfig) -> int:
    run = _prepare_dir(cfg)
    alphas = cfg.alpha or [None]
    rows = []
    n_max_margin = 0
    cosines = []
    for trial in range(cfg.trials):
        ds = dsets.gaussian_binary(cfg.n, cfg.d, seed=cfg.seed + trial)
        interp, cert = lin.min_norm_interpolator(ds)
        if cert.is_max_margin:
            n_max_margin += 1
        for alpha in alphas:
            dist = build_mixing(cfg, alpha)
            if not cert.is_max_margin:
                rows.append((cfg.seed + trial, cert.is_max_margin, float("nan"),
                             float("nan"), float("nan"), 0))
                continue
            res = lin.minimize_mixup_linear(
                ds, dist, quadrature_nodes=cfg.nodes
            )
            if not res.converged:
                raise NumericFailure(
                    f"mix minimization stalled at grad norm {res.grad_norm:.3g}"
                )
            cos = lin.cosine(res.classifier.theta, interp.theta)
            margins = res.classifier.margins(dsets.signed_labels(ds))
            rows.append((cfg.seed + trial, cert.is_max_margin, cos,
                         float(margins.mean()), res.grad_norm, res.iters))
            cosines.append(cos)
    lin.save_trials_csv(run / "results.csv", rows)
    summary = {
        "trials": cfg.trials,
        "max_margin_fraction": n_max_margin / cfg.trials,
        "mean_cosine": float(np.mean(cosines)) if cosines else None,
        "k_constants": {
            str(a if a is not None else "uniform"): lin.optimal_margin_constant(
                build_mixing(cfg, a), quadrature_nodes=cfg.nodes
            )
            for a in alphas
        },
    }
    _write_summary(run, summary)
    print(run)
    return 0


# ---------------------------------------------------------------------- #
# parsing + dispatch
# ---------------------------------------------------------------------- #


def _add_common(sp):
    sp.add_argument("--config", help="JSON config file; explicit flags override it")
    sp.add_argument("--out", help=f"output root (default ${_OUT_ENV} or ./runs)")
    sp.add_argument("--name", help="run directory name (default: config hash)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixlab", description="mixture-training analysis experiments"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("oracle", help="evaluate the optimal classifier at probes or on a grid")
    p.add_argument("--dataset", required=False)
    p.add_argument("--alpha", type=str, help="comma-separated Beta parameter(s)")
    p.add_argument("--eps", type=float)
    p.add_argument("--limit", action="store_true", default=None)
    p.add_argument("--probe", action="append", default=None, help="comma-separated coords; repeatable")
    p.add_argument("--grid", type=str, help="xmin,xmax,ymin,ymax,n")
    p.add_argument("--sep", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--n-per-class", dest="n_per_class", type=int)
    _add_common(p)

    p = sub.add_parser("train", help="train models with and without mixture augmentation")
    p.add_argument("--dataset", required=False)
    p.add_argument("--mode", choices=["erm", "mixup", "both"])
    p.add_argument("--alpha", type=str)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seeds", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--sep", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--n-per-class", dest="n_per_class", type=int)
    _add_common(p)

    p = sub.add_parser("recover", help="reconstruct points from pair midpoints")
    p.add_argument("--m", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--unlabeled", action="store_true", default=None)
    p.add_argument("--rank-trials", dest="rank_trials", type=int)
    _add_common(p)

    p = sub.add_parser("assumptions", help="audit collinearity/margin conditions")
    p.add_argument("--dataset", required=False)
    p.add_argument("--alpha", type=str)
    p.add_argument("--tol", type=float)
    p.add_argument("--fraction", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--mnist-dir", dest="mnist_dir")
    p.add_argument("--sep", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--n-per-class", dest="n_per_class", type=int)
    _add_common(p)

    p = sub.add_parser("linear", help="max-margin equivalence trials on Gaussian data")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--alpha", type=str)
    p.add_argument("--nodes", type=int)
    _add_common(p)
    return parser


_COMMANDS = {
    "oracle": cmd_oracle,
    "train": cmd_train,
    "recover": cmd_recover,
    "assumptions": cmd_assumptions,
    "linear": cmd_linear,
}


def _merge_config(args: argparse.Namespace) -> ExperimentConfig:
    if getattr(args, "config", None):
        cfg = ExperimentConfig.from_json(Path(args.config).read_text())
        if cfg.subcommand != args.subcommand:
            raise ConfigError(
                f"config is for {cfg.subcommand!r}, invoked as {args.subcommand!r}"
            )
    else:
        cfg = ExperimentConfig(subcommand=args.subcommand)
    for key, value in vars(args).items():
        if key in ("config", "subcommand") or value is None:
            continue
        if key == "alpha":
            try:
                value = [float(v) for v in str(value).split(",") if v]
            except ValueError as exc:
                raise ConfigError(f"bad --alpha {value!r}") from exc
        if key == "probe":
            value = list(value)
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown option {key}")
        setattr(cfg, key, value)
    if cfg.subcommand in ("oracle", "train", "assumptions") and not cfg.dataset:
        raise ConfigError("--dataset is required")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        return _COMMANDS[cfg.subcommand](cfg)
    except (ConfigError, InvalidDistributionError, dsets.DatasetError, dsets.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        NumericFailure,
        OutsideMixSupportError,
        lin.SingularGramError,
        lin.DegenerateMixError,
        rec.InconsistentMidpointsError,
    ) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
