"""Command-line interface.

Subcommands: denoise, analyze-pr, flops, train, experiment.  Every command
that produces files does so under one run directory (``--out``, or a
default under ``./runs``) containing a ``manifest.json`` with the command
line, the resolved configuration, the seed, and the files written.
Re-running a command with the same arguments and ``--threads 1``
reproduces every output byte for byte (the manifest differs only in its
wall-clock field).

Exit codes: 0 success, 2 unreadable input, 3 bad parameters or config,
4 numeric failure.

BLAS thread pinning must happen before numpy is first imported, which is
why this module defers all package imports into the command handlers.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

EXIT_OK = 0
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4

_THREAD_VARS = (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


class CommandLineError(Exception):
    pass


class _IoError(Exception):
    pass


def _pin_threads(argv):
    """Fix the BLAS thread count before numpy loads; default is 1."""
    n = "1"
    for i, arg in enumerate(argv):
        if arg == "--threads" and i + 1 < len(argv):
            n = argv[i + 1]
        elif arg.startswith("--threads="):
            n = arg.split("=", 1)[1]
    for var in _THREAD_VARS:
        os.environ.setdefault(var, n)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CommandLineError(message)


def _build_parser():
    parser = _Parser(prog="fdl", description="Framelet denoising lab")
    parser.add_argument("--threads", type=int, default=1, help="BLAS thread count (default 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="denoise a grayscale image")
    p.add_argument("input", help="PGM (P2/P5) or PNG image")
    p.add_argument(
        "--method",
        choices=("wavelet-shrink", "svd-lowrank", "model"),
        default="wavelet-shrink",
    )
    p.add_argument("--threshold", default="auto", help="shrinkage threshold, or 'auto' (MAD)")
    p.add_argument(
        "--activation",
        choices=("soft_shrink", "garrote", "dog_shrink"),
        default="soft_shrink",
    )
    p.add_argument("--undecimated", action="store_true", help="skip the factor-2 decimation")
    p.add_argument(
        "--rank",
        help="singular values to keep (svd-lowrank); a comma list runs the "
        "per-rank demo on a clean input",
    )
    p.add_argument(
        "--sigma", type=float, default=0.1, help="noise level for the per-rank demo"
    )
    p.add_argument("--checkpoint", help="model checkpoint directory (model)")
    p.add_argument("--bias-scale", type=float, default=1.0)
    p.add_argument("--zero-bias", action="store_true")
    p.add_argument("--reference", help="clean reference image for SNR metrics")
    p.add_argument("--out", help="run directory (default runs/denoise)")

    p = sub.add_parser("analyze-pr", help="perfect-reconstruction analysis of a network spec")
    p.add_argument("spec", help="spec JSON path or bundled name (unet, red, lwfsn, rlwfsn, toy)")
    p.add_argument("--out", help="optional run directory for the report")

    p = sub.add_parser("flops", help="operation count of a network spec")
    p.add_argument("spec", help="spec JSON path or bundled name")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--out", help="optional run directory for the report")

    p = sub.add_parser("train", help="train the reference model from a config file")
    p.add_argument("config", help="training config JSON")
    p.add_argument("--out", help="run directory (default runs/train-seed<seed>)")

    p = sub.add_parser("experiment", help="run a bundled experiment")
    p.add_argument("name", help="tight-frame | bias-zero | generalization")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=25)
    p.add_argument("--images-per-epoch", type=int, default=192)
    p.add_argument("--image-size", type=int, default=64, help="training image side length")
    p.add_argument("--test-image-size", type=int, default=256)
    p.add_argument("--out", help="run directory (default runs/<name>-seed<seed>)")
    return parser


def _env_seed():
    raw = os.environ.get("FDL_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise CommandLineError(f"FDL_SEED must be an integer, got {raw!r}") from exc


def _write_manifest(run_dir, argv, config, seed, outputs, started):
    manifest = {
        "command": ["fdl"] + list(argv),
        "config": config,
        "seed": seed,
        "version": _version(),
        "outputs": sorted(outputs),
        "wall_clock_s": round(time.time() - started, 3),
    }
    path = os.path.join(run_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _version():
    from fdl import __version__

    return __version__


def _listdir_rel(run_dir):
    out = []
    for root, _, files in os.walk(run_dir):
        for name in files:
            if name == "manifest.json":
                continue
            out.append(os.path.relpath(os.path.join(root, name), run_dir))
    return out


def _resolve_spec(ref):
    import importlib.resources as resources

    from fdl.network import load_spec, spec_from_json

    if os.path.exists(ref):
        return load_spec(ref)
    candidate = resources.files("fdl") / "specs" / f"{ref}.json"
    if candidate.is_file():
        return spec_from_json(json.loads(candidate.read_text(encoding="utf-8")))
    raise _IoError(f"no such spec file or bundled spec: {ref}")


def _read_input_image(path):
    from fdl.pnm import read_image

    try:
        return read_image(path)
    except OSError as exc:
        raise _IoError(f"cannot read {path}: {exc}") from exc
    except Exception as exc:
        from fdl.errors import FdlError

        if isinstance(exc, FdlError):
            raise _IoError(f"cannot parse {path}: {exc}") from exc
        raise


def _cmd_denoise(args, argv):
    import numpy as np

    from fdl.activations import ActivationSpec
    from fdl.errors import ConfigError
    from fdl.framelets import denoise_framelet, detail_band_mask, framelet_forward, haar_dwt
    from fdl.lowrank import lowrank_approx, svd
    from fdl.metrics import estimate_sigma_mad, snr_db
    from fdl.pnm import write_pgm
    from fdl.tensor import as_image

    started = time.time()
    y = as_image(_read_input_image(args.input), "input image")
    params = {"method": args.method}

    if args.method == "wavelet-shrink":
        basis = haar_dwt().basis()
        decimated = not args.undecimated
        if args.threshold == "auto":
            sigma_hat = estimate_sigma_mad(y)
            bands = framelet_forward(basis, y, decimated=decimated)
            detail = detail_band_mask(basis)
            sigma_d = np.sqrt(
                np.maximum(bands[detail].var(axis=(1, 2, 3)) - sigma_hat**2, 1e-12)
            )
            t = sigma_hat**2 / sigma_d
            params.update(sigma_hat=sigma_hat, threshold=[float(v) for v in t])
        else:
            try:
                t = float(args.threshold)
            except ValueError as exc:
                raise ConfigError(f"--threshold must be a number or 'auto', got {args.threshold!r}") from exc
            params.update(threshold=t)
        params.update(activation=args.activation, decimated=decimated)
        out = denoise_framelet(basis, y, ActivationSpec(args.activation, t=t), decimated=decimated)
    elif args.method == "svd-lowrank":
        if args.rank is None:
            raise ConfigError("svd-lowrank needs --rank")
        try:
            ranks = [int(r) for r in str(args.rank).split(",")]
        except ValueError as exc:
            raise ConfigError(f"--rank must be an integer or comma list, got {args.rank!r}") from exc
        if len(ranks) > 1:
            # per-rank demo: the input is treated as the clean reference
            from fdl.lowrank import lowrank_denoise_demo, write_lowrank_demo

            demo = lowrank_denoise_demo(y, sigma=args.sigma, ranks=ranks, seed=0)
            run_dir = args.out or os.path.join("runs", "denoise")
            os.makedirs(run_dir, exist_ok=True)
            write_lowrank_demo(demo, run_dir)
            metrics = {
                "method": "svd-lowrank-demo",
                "ranks": ranks,
                "sigma": args.sigma,
                "snr_noisy_input_db": demo.snr_noisy_input,
                "snr_clean_recon_db": list(demo.snr_clean),
                "snr_noisy_recon_db": list(demo.snr_noisy),
            }
            with open(os.path.join(run_dir, "metrics.json"), "w", encoding="utf-8") as fh:
                json.dump(metrics, fh, indent=2, sort_keys=True)
                fh.write("\n")
            _write_manifest(run_dir, argv, metrics, None, _listdir_rel(run_dir), started)
            print(json.dumps(metrics, indent=2, sort_keys=True))
            return EXIT_OK
        factors = svd(y[0, 0])
        out = lowrank_approx(factors, ranks[0])[None, None]
        params.update(rank=ranks[0], n_sv=factors.n_sv)
    else:  # model
        if not args.checkpoint:
            raise ConfigError("model method needs --checkpoint")
        from fdl.training import load_checkpoint

        model = load_checkpoint(args.checkpoint)
        out = model.predict(y, bias_scale=args.bias_scale, zero_bias=args.zero_bias)
        params.update(
            checkpoint=args.checkpoint, bias_scale=args.bias_scale, zero_bias=args.zero_bias
        )

    metrics = dict(params)
    if args.reference:
        reference = as_image(_read_input_image(args.reference), "reference image")
        metrics["snr_input_db"] = snr_db(reference, y)
        metrics["snr_output_db"] = snr_db(reference, out)
        metrics["snr_gain_db"] = metrics["snr_output_db"] - metrics["snr_input_db"]

    run_dir = args.out or os.path.join("runs", "denoise")
    os.makedirs(run_dir, exist_ok=True)
    write_pgm(os.path.join(run_dir, "denoised.pgm"), out)
    with open(os.path.join(run_dir, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(run_dir, argv, params, None, _listdir_rel(run_dir), started)
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_analyze_pr(args, argv):
    from fdl.analysis import pr_analyze

    started = time.time()
    spec = _resolve_spec(args.spec)
    report = pr_analyze(spec)
    payload = report.to_json()
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "pr_report.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_manifest(args.out, argv, {"spec": args.spec}, None, _listdir_rel(args.out), started)
    return EXIT_OK


def _cmd_flops(args, argv):
    from fdl.analysis import count_flops

    started = time.time()
    spec = _resolve_spec(args.spec)
    total = count_flops(spec, args.rows, args.cols)
    print(total)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        payload = {"spec": args.spec, "rows": args.rows, "cols": args.cols, "flops": total}
        with open(os.path.join(args.out, "flops.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_manifest(args.out, argv, payload, None, _listdir_rel(args.out), started)
    return EXIT_OK


def _cmd_train(args, argv):
    from fdl.training import TrainConfig, build_toy, save_checkpoint, train

    started = time.time()
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise _IoError(f"cannot read {args.config}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _IoError(f"cannot parse {args.config}: {exc}") from exc
    env_seed = _env_seed()
    if env_seed is not None:
        payload["seed"] = env_seed
    cfg = TrainConfig.from_json(payload)
    model = build_toy(seed=cfg.seed, init_mode=cfg.init_mode, bias_mode=cfg.bias_mode)
    history = train(model, cfg)
    run_dir = args.out or os.path.join("runs", f"train-seed{cfg.seed}")
    os.makedirs(run_dir, exist_ok=True)
    save_checkpoint(model, os.path.join(run_dir, "checkpoint"))
    with open(os.path.join(run_dir, "history.json"), "w", encoding="utf-8") as fh:
        json.dump(history.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(run_dir, argv, cfg.to_json(), cfg.seed, _listdir_rel(run_dir), started)
    last = history.epochs[-1] if history.epochs else {}
    print(json.dumps({"run_dir": run_dir, "final": last}, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_experiment(args, argv):
    from fdl.experiments import ExperimentConfig, experiment_names, run_named_experiment

    started = time.time()
    if args.name not in experiment_names():
        raise CommandLineError(
            f"unknown experiment {args.name!r}; valid names: {', '.join(experiment_names())}"
        )
    seed = _env_seed()
    seed = args.seed if seed is None else seed
    cfg = ExperimentConfig(
        seed=seed,
        epochs=args.epochs,
        images_per_epoch=args.images_per_epoch,
        image_size=(args.image_size, args.image_size),
        test_image_size=args.test_image_size,
    )
    run_dir = args.out or os.path.join("runs", f"{args.name}-seed{seed}")
    os.makedirs(run_dir, exist_ok=True)
    report = run_named_experiment(args.name, cfg, run_dir)
    config_snapshot = {
        "experiment": args.name,
        "seed": seed,
        "epochs": cfg.epochs,
        "images_per_epoch": cfg.images_per_epoch,
        "image_size": list(cfg.image_size),
        "test_image_size": cfg.test_image_size,
        "sigma_train": cfg.sigma_train,
        "lr_initial": cfg.lr_initial,
        "batch_size": cfg.batch_size,
    }
    _write_manifest(run_dir, argv, config_snapshot, seed, _listdir_rel(run_dir), started)
    print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return EXIT_OK


_HANDLERS = {
    "denoise": _cmd_denoise,
    "analyze-pr": _cmd_analyze_pr,
    "flops": _cmd_flops,
    "train": _cmd_train,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _pin_threads(argv)
    try:
        args = _build_parser().parse_args(argv)
        return _HANDLERS[args.command](args, argv)
    except CommandLineError as exc:
        print(f"fdl: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _IoError as exc:
        print(f"fdl: {exc}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as exc:
        print(f"fdl: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # map package errors without importing them eagerly
        from fdl.errors import ConfigError, NumericError, ShapeError

        if isinstance(exc, NumericError):
            print(f"fdl: numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        if isinstance(exc, (ConfigError, ShapeError)):
            print(f"fdl: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        raise


if __name__ == "__main__":
    sys.exit(main())
