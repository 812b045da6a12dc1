"""Command-line front end: simulate, fit, predict, eval.

Every command exits 0 on success and nonzero with a single-line
``<ErrorCategory>: <message>`` diagnostic on stderr otherwise.
"""

import argparse
import json
import pathlib
import sys

import numpy as np

from . import io as iomod
from .errors import ImtregError, InvalidConfig
from .geometry import build_triangulation
from .model import Dataset, FittedModel, bootstrap_ci, fit, reconstruct_beta
from .sim import SimConfig, generate, run_study
from .spline import build_space

_SIM_KEYS = {
    "n",
    "q",
    "r",
    "grid",
    "alpha1",
    "alpha2",
    "beta1",
    "beta2",
    "noise_sd",
    "treat_prob",
    "seed",
}


def _load_sim_config(path, seed_override=None):
    doc = json.loads(pathlib.Path(path).read_text())
    unknown = set(doc) - _SIM_KEYS
    if unknown:
        raise InvalidConfig(f"unknown config key: {sorted(unknown)[0]!r}")
    kwargs = dict(doc)
    if "grid" in kwargs:
        kwargs["grid_shape"] = tuple(kwargs.pop("grid"))
    if seed_override is not None:
        kwargs["seed"] = seed_override
    if "n" not in kwargs:
        raise InvalidConfig("config must set 'n'")
    return SimConfig(**kwargs)


def _domain_polygon(grid):
    """Bounding rectangle of a pixel grid, padded by half the pixel spacing."""
    s1 = np.unique(grid[:, 0])
    s2 = np.unique(grid[:, 1])
    h1 = s1[1] - s1[0] if len(s1) > 1 else 1.0
    h2 = s2[1] - s2[0] if len(s2) > 1 else 1.0
    x0, x1 = s1[0] - h1 / 2, s1[-1] + h1 / 2
    y0, y1 = s2[0] - h2 / 2, s2[-1] + h2 / 2
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def cmd_simulate(args):
    cfg = _load_sim_config(args.config, args.seed)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data, truth = generate(cfg)
    iomod.write_dataset_csv(out / "dataset.csv", data.ids, data.Y, data.A, data.X)
    iomod.write_images_csv(out / "images.csv", data.ids, data.grid, data.images)
    truth_doc = json.loads(truth.to_json())
    truth_doc["config"] = {
        "n": cfg.n,
        "q": cfg.q,
        "r": cfg.r,
        "grid": list(cfg.grid_shape),
        "noise_sd": cfg.noise_sd,
        "treat_prob": cfg.treat_prob,
        "seed": cfg.seed,
        "alpha1": cfg.alpha1.tolist(),
        "alpha2": cfg.alpha2.tolist(),
    }
    (out / "truth.json").write_text(json.dumps(truth_doc, sort_keys=True))
    return 0


def _read_inputs(args):
    ids_d, y, a, x = iomod.read_dataset_csv(args.dataset)
    ids_i, grid, images = iomod.read_images_csv(args.images)
    if not np.array_equal(ids_d, ids_i):
        raise InvalidConfig("dataset.csv and images.csv list different subjects")
    return Dataset(X=x, A=a, Y=y, images=images, grid=grid, ids=ids_d)


def cmd_fit(args):
    data = _read_inputs(args)
    mesh = build_triangulation(_domain_polygon(data.grid), args.triangles)
    space = build_space(mesh, args.degree, args.smoothness)
    selection = args.criterion
    if args.fixed_k is not None:
        k1, k2 = (int(v) for v in args.fixed_k.split(","))
        selection = (k1, k2)
    model = fit(data, space, selection=selection, alpha=args.alpha, penalty=args.penalty)
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(model.to_json())

    lines = [
        f"criterion: {model.selection}",
        f"k1: {model.k1}",
        f"k2: {model.k2}",
        f"n: {model.diagnostics['n']}",
        f"residual_variance: {model.diagnostics['residual_variance']!r}",
        f"condition_number: {model.diagnostics['condition_number']!r}",
        "alpha1: " + ",".join(repr(v) for v in model.alpha1),
        "alpha2: " + ",".join(repr(v) for v in model.alpha2),
        "gamma1: " + ",".join(repr(v) for v in model.gamma1),
        "gamma2: " + ",".join(repr(v) for v in model.gamma2),
        "eigvals1: " + ",".join(repr(v) for v in model.basis1.eigvals[:8]),
        "eigvals2: " + ",".join(repr(v) for v in model.basis2.eigvals[:8]),
    ]
    summary_path = out.with_suffix(".summary.txt") if args.summary is None else pathlib.Path(args.summary)
    summary_path.write_text("\n".join(lines) + "\n")

    if args.export_rasters is not None:
        rdir = pathlib.Path(args.export_rasters)
        rdir.mkdir(parents=True, exist_ok=True)
        pts = data.grid
        for channel in (1, 2):
            beta = reconstruct_beta(model, channel)
            iomod.write_raster_csv(rdir / f"beta{channel}.csv", pts, beta.evaluate(pts))
            basis = model.basis1 if channel == 1 else model.basis2
            for k in range(min(3, basis.eigvecs.shape[1])):
                iomod.write_raster_csv(
                    rdir / f"phi{channel}_{k + 1}.csv", pts, basis.raster(pts, k)
                )
    if args.bootstrap > 0:
        result = bootstrap_ci(
            data,
            space,
            n_replicates=args.bootstrap,
            level=0.95,
            seed=args.seed,
            selection=selection,
            alpha=args.alpha,
            penalty=args.penalty,
        )
        out.with_suffix(".bootstrap.json").write_text(result.to_json())
    return 0


def cmd_predict(args):
    model = FittedModel.from_json(pathlib.Path(args.model).read_text())
    ids_d, _, _, x = iomod.read_dataset_csv(args.dataset)
    ids_i, grid, images = iomod.read_images_csv(args.images)
    if not np.array_equal(ids_d, ids_i):
        raise InvalidConfig("dataset.csv and images.csv list different subjects")
    q0, q1, contrast = model.q_values_batch(x, images, grid)
    actions = (contrast > 0).astype(int)
    iomod.write_recommendations_csv(args.out, ids_d, actions, contrast, q0, q1)
    return 0


_STUDY_KEYS = {
    "configs",
    "n_reps",
    "criteria",
    "seed",
    "n_eval",
    "triangles",
    "degree",
    "smoothness",
    "alpha",
    "penalty",
}


def cmd_eval(args):
    doc = json.loads(pathlib.Path(args.config).read_text())
    unknown = set(doc) - _STUDY_KEYS
    if unknown:
        raise InvalidConfig(f"unknown config key: {sorted(unknown)[0]!r}")
    if "configs" not in doc:
        raise InvalidConfig("study config must set 'configs'")
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kwargs = dict(doc)
    configs = kwargs.pop("configs")
    for c in configs:
        if "grid" in c:
            c["grid_shape"] = tuple(c.pop("grid"))
    if args.reps is not None:
        kwargs["n_reps"] = args.reps
    report = run_study(
        configs,
        checkpoint_dir=out / "checkpoints",
        resume=args.resume,
        **kwargs,
    )
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.value_table_csv())
    (out / "report_mse.csv").write_text(report.mse_table_csv())
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="imtreg",
        description="Treatment-regime estimation from 2D imaging covariates",
    )
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="generate a synthetic dataset")
    ps.add_argument("--config", required=True)
    ps.add_argument("--out", required=True)
    ps.add_argument("--seed", type=int, default=None)
    ps.set_defaults(func=cmd_simulate)

    pf = sub.add_parser("fit", help="fit the outcome model")
    pf.add_argument("--dataset", required=True)
    pf.add_argument("--images", required=True)
    pf.add_argument("--out", required=True)
    pf.add_argument("--summary", default=None)
    pf.add_argument("--criterion", choices=("pve", "pave"), default="pve")
    pf.add_argument("--alpha", type=float, default=0.99)
    pf.add_argument("--triangles", type=int, default=32)
    pf.add_argument("--degree", type=int, default=5)
    pf.add_argument("--smoothness", type=int, default=1)
    pf.add_argument("--penalty", type=float, default=0.0)
    pf.add_argument("--fixed-k", default=None, metavar="K1,K2")
    pf.add_argument("--export-rasters", default=None)
    pf.add_argument("--bootstrap", type=int, default=0)
    pf.add_argument("--seed", type=int, default=None)
    pf.set_defaults(func=cmd_fit)

    pp = sub.add_parser("predict", help="recommend treatments for subjects")
    pp.add_argument("--model", required=True)
    pp.add_argument("--dataset", required=True)
    pp.add_argument("--images", required=True)
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=cmd_predict)

    pe = sub.add_parser("eval", help="run a Monte Carlo study")
    pe.add_argument("--config", required=True)
    pe.add_argument("--out", required=True)
    pe.add_argument("--reps", type=int, default=None)
    pe.add_argument("--resume", action="store_true")
    pe.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ImtregError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
