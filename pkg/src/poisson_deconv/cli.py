"""Command-line interface.

Subcommands: ``simulate``, ``deconvolve``, ``sweep``, ``metrics`` and
``replay``.  Every command that writes files also writes ``manifest.json``
holding the fully resolved configuration, so ``replay`` can regenerate the
outputs bit-for-bit.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

from .dictionary import parse_dictionary
from .estimator import PoissonDeconvolver, check_counts
from .fidelity import ANSCOMBE_OFFSET
from .image import ImageIOError, metrics, phantom, poissonize, read_image, rescale_peak, write_image
from .model_select import sweep_lambda, write_sweep_csv
from .operators import ConvOperator, parse_psf
from .prox import L1
from .solver import SolverError, initial_coefs, write_history_csv

logger = logging.getLogger("poisson_deconv")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


SOLVER_DEFAULTS = {
    "dict": "tidwt:J=2",
    "lam": "gcv",
    "algo": None,
    "grid": "1e-3:1:12log",
    "n_iter": 200,
    "n_dr": 1,
    "relaxation": 0.5,
    "mu": "auto",
    "beta": 1.0,
    "tau": 0.5,
    "theta": 0.9,
    "sigma": 1.0,
    "tol": 0.0,
    "offset": ANSCOMBE_OFFSET,
    "init": "zero",
    "seed": 0,
}

SIMULATE_DEFAULTS = {
    "phantom": "lines_gaussians",
    "input": None,
    "size": 128,
    "width": None,
    "height": None,
    "peak": 30.0,
    "psf": "moving_average:7",
    "seed": 0,
    "format": "rawf32",
}

# JSON config keys that mirror SolverConfig / DrConfig field names
CONFIG_ALIASES = {"lambda": "lam", "dictionary": "dict", "n_fb": "n_iter", "n_dr": "n_dr"}


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _ext(fmt):
    return ".pgm" if fmt == "pgm" else ".raw"


def _write_manifest(out, command, config, inputs, outputs):
    manifest = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "inputs": inputs,
        "outputs": outputs,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "version": _version(),
    }
    (Path(out) / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _psf(spec):
    try:
        return parse_psf(spec)
    except ImageIOError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_dict_spec(spec, shape):
    try:
        parse_dictionary(spec, shape)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad dictionary spec {spec!r}: {exc}") from None


# --------------------------------------------------------------------------
# commands; each takes a resolved config dict
# --------------------------------------------------------------------------

def run_simulate(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    psf = _psf(cfg["psf"])
    if cfg.get("input"):
        truth = read_image(cfg["input"])
    else:
        width = cfg.get("width") or cfg["size"]
        height = cfg.get("height") or cfg["size"]
        try:
            truth = phantom(cfg["phantom"], width, height)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    truth = rescale_peak(truth, float(cfg["peak"]))
    blurred = ConvOperator(psf, truth.shape).apply(truth)
    # round-off can leave tiny negatives in an otherwise nonnegative blur
    blurred[blurred < 0] = 0.0
    noisy = poissonize(blurred, int(cfg["seed"]))
    ext = _ext(cfg["format"])
    outputs = {}
    for name, img in (("truth", truth), ("blurred", blurred), ("noisy", noisy)):
        path = out / f"{name}{ext}"
        write_image(img, path, cfg["format"])
        outputs[name] = str(path)
    _write_manifest(out, "simulate", cfg, {"input": cfg.get("input")}, outputs)
    return outputs


def _estimator(cfg):
    lam = cfg["lam"]
    if lam != "gcv":
        try:
            lam = float(lam)
        except (TypeError, ValueError):
            raise UsageError(f"--lambda must be a number or 'gcv', got {lam!r}") from None
    mu = cfg["mu"]
    if mu != "auto":
        mu = float(mu)
    return PoissonDeconvolver(
        psf=_psf(cfg["psf"]), dictionary=cfg["dict"], lam=lam, algo=cfg["algo"],
        grid=cfg["grid"], n_iter=int(cfg["n_iter"]), n_dr=int(cfg["n_dr"]),
        relaxation=float(cfg["relaxation"]), mu=mu, beta=float(cfg["beta"]),
        tau=float(cfg["tau"]), theta=float(cfg["theta"]), sigma=float(cfg["sigma"]),
        tol=float(cfg["tol"]), offset=float(cfg["offset"]), init=cfg["init"],
    )


def _load_observation(cfg):
    y = read_image(cfg["input"])
    try:
        y = check_counts(y)
    except ValueError as exc:
        raise ImageIOError(str(exc)) from None
    _check_dict_spec(cfg["dict"], y.shape)
    reference = None
    if cfg.get("reference"):
        reference = read_image(cfg["reference"])
        if reference.shape != y.shape:
            raise ImageIOError(f"reference shape {reference.shape} != input shape {y.shape}")
    return y, reference


def run_deconvolve(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    y, reference = _load_observation(cfg)
    est = _estimator(cfg).fit(y, reference)
    outputs = {"restored": str(out / "restored.raw"), "objective_log": str(out / "objective.csv"),
               "summary": str(out / "summary.json")}
    write_image(est.restored_, outputs["restored"], "rawf32")
    write_history_csv(est.report_, outputs["objective_log"])
    if est.sweep_ is not None:
        outputs["gcv"] = str(out / "gcv.csv")
        write_sweep_csv(est.sweep_, outputs["gcv"])
    summary = {
        "lambda": est.lambda_,
        "algo": cfg["algo"] or ("tseng" if est.sweep_ is not None else "fb"),
        "support_size": est.report_.support_size,
        "iterations": est.report_.iterations_run,
        "mu": est.report_.last_mu,
        "objective": est.report_.final_objective,
    }
    Path(outputs["summary"]).write_text(json.dumps(summary, indent=2))
    _write_manifest(out, "deconvolve", cfg,
                    {"input": cfg["input"], "reference": cfg.get("reference")}, outputs)
    return outputs


def run_sweep(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    y, reference = _load_observation(cfg)
    est = _estimator(dict(cfg, lam="gcv"))
    model = est._build_model(y)
    result = sweep_lambda(model, L1, est._config("fb", 0.0), est._grid(model), reference,
                          initial_coefs(model, est.init))
    outputs = {"gcv": str(out / "gcv.csv"), "selected": str(out / "selected.json")}
    write_sweep_csv(result, outputs["gcv"])
    best = result.best_point
    Path(outputs["selected"]).write_text(
        json.dumps({"lambda": best.lam, "gcv": best.gcv, "df": best.df}, indent=2)
    )
    _write_manifest(out, "sweep", cfg,
                    {"input": cfg["input"], "reference": cfg.get("reference")}, outputs)
    return outputs


def run_metrics(cfg):
    ref = read_image(cfg["reference"])
    est = read_image(cfg["estimate"])
    if ref.shape != est.shape:
        raise ImageIOError(f"image sizes differ: {ref.shape} vs {est.shape}")
    report = metrics(ref, est).as_dict()
    print(json.dumps(report))
    return report


RUNNERS = {
    "simulate": run_simulate,
    "deconvolve": run_deconvolve,
    "sweep": run_sweep,
    "metrics": run_metrics,
}


def run_replay(manifest_path, out=None):
    manifest = json.loads(Path(manifest_path).read_text())
    cfg = dict(manifest["config"])
    if out is not None:
        cfg["out"] = str(out)
    return RUNNERS[manifest["command"]](cfg)


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _add_solver_args(p):
    p.add_argument("--input", required=True, help="observed counts (PGM or rawf32)")
    p.add_argument("--psf", required=True,
                   help="moving_average:k | gaussian:sigma | delta | file:<path>")
    p.add_argument("--dict", help="identity | dwt:J=4 | tidwt:J=4 | union:A+B (default tidwt:J=2)")
    p.add_argument("--algo", choices=["fb", "tseng"])
    p.add_argument("--grid", help="relative lambda grid low:high:num[log|lin] (default 1e-3:1:12log)")
    p.add_argument("--n-iter", dest="n_iter", type=int, help="outer iterations (default 200)")
    p.add_argument("--n-dr", dest="n_dr", type=int, help="Douglas-Rachford sub-iterations (default 1)")
    p.add_argument("--relaxation", type=float, help="sub-iteration relaxation in (0,1)")
    p.add_argument("--mu", help="forward-backward step or 'auto'")
    p.add_argument("--beta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--offset", type=float, help="stabilization offset (3/8 default)")
    p.add_argument("--init", choices=["zero", "analysis"])
    p.add_argument("--seed", type=int)
    p.add_argument("--reference", help="ground truth, adds MAE/MSE to the sweep table")
    p.add_argument("--config", help="JSON file with defaults (flags take precedence)")
    p.add_argument("--out", required=True, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="poisson-deconv", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="blur a phantom or image and add Poisson noise")
    p.add_argument("--phantom", choices=["lines_gaussians", "point_grid", "flat"])
    p.add_argument("--input", help="use this image as ground truth instead of a phantom")
    p.add_argument("--size", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--peak", type=float, help="maximum intensity of the ground truth")
    p.add_argument("--psf")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["rawf32", "pgm"])
    p.add_argument("--config")
    p.add_argument("--out", required=True)

    p = sub.add_parser("deconvolve", help="restore an observed count image")
    _add_solver_args(p)
    p.add_argument("--lambda", dest="lam", help="regularization weight or 'gcv'")

    p = sub.add_parser("sweep", help="GCV table over a lambda grid")
    _add_solver_args(p)

    p = sub.add_parser("metrics", help="MAE/MSE between two images")
    p.add_argument("reference")
    p.add_argument("estimate")

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write outputs here instead of the recorded directory")
    return parser


def resolve_config(args, defaults):
    """Built-in defaults < JSON ``--config`` file < explicit flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot load config {args.config}: {exc}") from None
        for key, value in loaded.items():
            key = CONFIG_ALIASES.get(key, key)
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r}")
            cfg[key] = value
    for key, value in vars(args).items():
        if key in ("command", "config", "verbose"):
            continue
        if value is not None:
            cfg[key] = value
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            run_replay(args.manifest, args.out)
        elif args.command == "metrics":
            run_metrics(vars(args))
        elif args.command == "simulate":
            run_simulate(resolve_config(args, SIMULATE_DEFAULTS))
        else:
            defaults = dict(SOLVER_DEFAULTS, input=None, psf=None, reference=None, out=None)
            if args.command == "sweep":
                defaults.pop("lam")
            run = run_deconvolve if args.command == "deconvolve" else run_sweep
            run(resolve_config(args, defaults))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ImageIOError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
