"""Command-line front end: factorize, recognize, check, gen-corpus.

Runs are fully seeded: one configuration writes byte-identical trace CSV
and JSON report files on repeated invocations (wall-clock timings are
zeroed in files unless ``--timing`` is given; measured times still go to
stderr).  Setting ``QUATFACT_THREADS`` caps the BLAS thread pools used by
the matrix kernels.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SOLVER = 4

_PG_METHODS = ("qipgm", "ripgm")
_ADMM_METHODS = ("qadmm", "radmm")
_QUAT_METHODS = ("qipgm", "qadmm")


def _apply_thread_cap() -> None:
    cap = os.environ.get("QUATFACT_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


class ConfigError(ValueError):
    pass


def _resolve_method_params(args) -> dict:
    """Fill per-method defaults, rejecting flags foreign to the method."""
    method = args.method
    if method in _PG_METHODS:
        if args.alpha is not None or args.beta is not None:
            raise ConfigError(
                f"--alpha/--beta are penalty parameters of the multiplier "
                f"methods and do not apply to {method}")
        return {"rho": 0.01 if args.rho is None else args.rho,
                "sigma": 0.001 if args.sigma is None else args.sigma,
                "alpha": None, "beta": None}
    if method in _ADMM_METHODS:
        if args.rho is not None or args.sigma is not None:
            raise ConfigError(
                f"--rho/--sigma are line-search parameters of the gradient "
                f"methods and do not apply to {method}")
        return {"alpha": 0.01 if args.alpha is None else args.alpha,
                "beta": 0.01 if args.beta is None else args.beta,
                "rho": None, "sigma": None}
    raise ConfigError(f"unknown method {method!r}")


def _write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# factorize
# ---------------------------------------------------------------------------

def _cmd_factorize(args) -> int:
    from .baselines import ChannelTriple, channel_factorize
    from .imaging import (from_quaternion, load_image, psnr, save_image,
                          to_quaternion)
    from .initializers import InitBundle
    from .qmatrix import QMatrix
    from .solvers import PGConfig, qadmm_run, qipg_run, write_trace_csv

    params = _resolve_method_params(args)
    if args.l <= 0:
        raise ConfigError("--l must be positive")
    img = load_image(args.image)
    x = to_quaternion(img)
    m, n = x.shape
    if args.l >= min(m, n):
        raise ConfigError(
            f"--l {args.l} must be below min(image dims) = {min(m, n)}")

    started = time.perf_counter()
    bundle = InitBundle.draw(args.seed, m, args.l, n)

    if args.method == "qipgm":
        cfg = PGConfig(rho=params["rho"], sigma=params["sigma"],
                       max_iters=args.iters, stop_tol=args.stop_tol)
        result = qipg_run(x, bundle.factor_pair(), cfg)
        trace = result.trace
        pair = result.pair
        z = pair.product().imag()
    elif args.method == "qadmm":
        state = bundle.admm_state(params["alpha"], params["beta"])
        result = qadmm_run(x, state, args.iters, stop_tol=args.stop_tol)
        trace = result.trace
        # Residuals track (W, H); the reconstruction uses them as well.
        z = (result.state.W @ result.state.H).imag()
    else:
        channels = ChannelTriple(img.r, img.g, img.b)
        method = "pg" if args.method == "ripgm" else "admm"
        cfg = PGConfig(rho=params["rho"] or 0.01,
                       sigma=params["sigma"] or 0.001,
                       max_iters=args.iters, stop_tol=args.stop_tol)
        result = channel_factorize(channels, method, bundle.channel_pairs(),
                                   cfg=cfg, alpha=params["alpha"] or 0.01,
                                   beta=params["beta"] or 0.01)
        trace = result.trace
        pairs = result.pairs
        z = QMatrix.from_imag(pairs[0].W @ pairs[0].H,
                              pairs[1].W @ pairs[1].H,
                              pairs[2].W @ pairs[2].H)
    elapsed_ms = (time.perf_counter() - started) * 1e3

    report_quality = psnr(x, z)
    write_trace_csv(trace, args.trace, timing=args.timing)
    payload = {
        "method": args.method,
        "l": args.l,
        "iters": args.iters,
        "seed": args.seed,
        "psnr_db": report_quality.psnr_db,
        "res_final": trace[-1].res if trace else report_quality.res,
        "objective_final": trace[-1].objective if trace else None,
        "elapsed_ms": elapsed_ms if args.timing else 0.0,
    }
    _write_json(args.report, payload)
    if args.recon:
        save_image(from_quaternion(z), args.recon)
    print(f"{args.method}: l={args.l} iters={args.iters} "
          f"psnr={report_quality.psnr_db:.4f} dB res={payload['res_final']:.6g}")
    print(f"wall time: {elapsed_ms:.1f} ms", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# recognize
# ---------------------------------------------------------------------------

def _cmd_recognize(args) -> int:
    import csv

    from . import facerec

    params = _resolve_method_params(args)
    dataset = facerec.load_corpus(args.manifest, eta=args.eta,
                                  seed=args.seed)
    test_idx = dataset.indices("test")
    if not test_idx:
        raise ConfigError("corpus has no test images")

    started = time.perf_counter()
    if args.gray:
        if args.method in _QUAT_METHODS:
            raise ConfigError("--gray applies to the channel methods "
                              "(ripgm/radmm)")
        model = facerec.train_gray(
            dataset, args.l, method=args.method, iters=args.iters,
            seed=args.seed, alpha=params["alpha"] or 0.01,
            beta=params["beta"] or 0.01, rho=params["rho"] or 0.01,
            sigma=params["sigma"] or 0.001, ridge=args.ridge)
        classify = lambda probe: facerec.classify_gray(model, probe)
        labels = model.labels
    elif args.method in _QUAT_METHODS:
        model = facerec.train(
            dataset, args.l, method=args.method, iters=args.iters,
            seed=args.seed, alpha=params["alpha"] or 0.01,
            beta=params["beta"] or 0.01, rho=params["rho"] or 0.01,
            sigma=params["sigma"] or 0.001, ridge=args.ridge)
        classify = lambda probe: facerec.classify(model, probe)
        labels = model.labels
    else:
        model = facerec.train_channels(
            dataset, args.l, method=args.method, iters=args.iters,
            seed=args.seed, alpha=params["alpha"] or 0.01,
            beta=params["beta"] or 0.01, rho=params["rho"] or 0.01,
            sigma=params["sigma"] or 0.001, ridge=args.ridge)
        classify = lambda probe: facerec.classify_channels(model, probe)
        labels = model.labels

    predictions = []
    rows = []
    for i in test_idx:
        idx, score = classify(dataset.images[i])
        predicted = labels[idx]
        predictions.append(predicted)
        probe_path = dataset.paths[i] if dataset.paths else f"probe_{i}"
        rows.append((probe_path, predicted, dataset.labels[i],
                     repr(float(score))))
    truth = [dataset.labels[i] for i in test_idx]
    rate = facerec.accuracy(predictions, truth)
    elapsed_ms = (time.perf_counter() - started) * 1e3

    with open(args.predictions, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["probe_path", "predicted_label", "true_label",
                         "score"])
        writer.writerows(rows)
    payload = {
        "method": ("%s-gray" % args.method) if args.gray else args.method,
        "l": args.l,
        "iters": args.iters,
        "seed": args.seed,
        "accuracy": rate,
        "n_train": len(labels),
        "n_test": len(test_idx),
        "elapsed_ms": elapsed_ms if args.timing else 0.0,
    }
    _write_json(args.report, payload)
    print(f"accuracy: {rate:.4f} ({len(test_idx)} probes, "
          f"{len(labels)} training images)")
    print(f"wall time: {elapsed_ms:.1f} ms", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def _cmd_check(args) -> int:
    from .properties import run_suite, suite_names

    names = suite_names() if args.suite == "all" else [args.suite]
    failed = 0
    for name in names:
        try:
            report = run_suite(name, seed=args.seed)
        except KeyError as exc:
            print(f"config error: {exc.args[0]}", file=sys.stderr)
            return EXIT_CONFIG
        status = "PASS" if report.passed else "FAIL"
        print(f"{status} {report.name}")
        for line in report.lines:
            print(f"  {line}")
        failed += 0 if report.passed else 1
    return EXIT_OK if failed == 0 else 1


# ---------------------------------------------------------------------------
# gen-corpus
# ---------------------------------------------------------------------------

def _cmd_gen_corpus(args) -> int:
    from . import facerec

    bundle = facerec.generate_corpus(
        n_ids=args.ids, per_id=args.per_id, height=args.height,
        width=args.width, seed=args.seed, shared=args.shared)
    manifest = facerec.write_corpus(args.out_dir, bundle, eta=args.eta)
    print(f"wrote {len(bundle.images)} images and {manifest}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quatfact",
        description="Quaternion-encoded low-rank color image factorization "
                    "and face recognition")
    sub = parser.add_subparsers(dest="command", required=True)

    fac = sub.add_parser("factorize",
                         help="low-rank reconstruct one color image")
    fac.add_argument("image", help="input image (.ppm or .png)")
    fac.add_argument("--method", required=True,
                     choices=["qipgm", "qadmm", "ripgm", "radmm"])
    fac.add_argument("--l", "--rank", dest="l", type=int, required=True,
                     help="inner rank of the factorization")
    fac.add_argument("--iters", type=int, default=50)
    fac.add_argument("--seed", type=int, default=0)
    fac.add_argument("--rho", type=float, default=None,
                     help="backtracking ratio (gradient methods; "
                          "default 0.01)")
    fac.add_argument("--sigma", type=float, default=None,
                     help="sufficient-decrease constant (gradient methods; "
                          "default 0.001)")
    fac.add_argument("--alpha", type=float, default=None,
                     help="W-side penalty (multiplier methods; default 0.01)")
    fac.add_argument("--beta", type=float, default=None,
                     help="H-side penalty (multiplier methods; default 0.01)")
    fac.add_argument("--stop-tol", type=float, default=0.0,
                     help="relative-progress stop (0 = run all iterations)")
    fac.add_argument("--trace", default="trace.csv")
    fac.add_argument("--report", default="report.json")
    fac.add_argument("--recon", default=None,
                     help="write the reconstructed image here")
    fac.add_argument("--timing", action="store_true",
                     help="write measured wall times into output files "
                          "(breaks byte-identical reruns)")
    fac.set_defaults(handler=_cmd_factorize)

    rec = sub.add_parser("recognize",
                         help="train on a corpus and classify its test split")
    rec.add_argument("manifest", help="corpus manifest.csv (path,label[,split])")
    rec.add_argument("--method", default="qadmm",
                     choices=["qipgm", "qadmm", "ripgm", "radmm"])
    rec.add_argument("--gray", action="store_true",
                     help="single-channel gray pipeline (channel methods)")
    rec.add_argument("--l", "--rank", dest="l", type=int, required=True)
    rec.add_argument("--iters", type=int, default=4)
    rec.add_argument("--seed", type=int, default=0)
    rec.add_argument("--eta", type=int, default=None,
                     help="training images per identity when the manifest "
                          "has no split column")
    rec.add_argument("--ridge", type=float, default=0.0,
                     help="Gram-matrix regularization for probe encoding")
    rec.add_argument("--rho", type=float, default=None)
    rec.add_argument("--sigma", type=float, default=None)
    rec.add_argument("--alpha", type=float, default=None)
    rec.add_argument("--beta", type=float, default=None)
    rec.add_argument("--predictions", default="predictions.csv")
    rec.add_argument("--report", default="report.json")
    rec.add_argument("--timing", action="store_true")
    rec.set_defaults(handler=_cmd_recognize)

    chk = sub.add_parser("check", help="run a named property suite")
    chk.add_argument("suite",
                     help="projection-lemmas | gradients | admm-invariants "
                          "| descent | real-rep | oracle-recognition | all")
    chk.add_argument("--seed", type=int, default=0)
    chk.set_defaults(handler=_cmd_check)

    gen = sub.add_parser("gen-corpus",
                         help="emit a synthetic labeled face corpus")
    gen.add_argument("out_dir")
    gen.add_argument("--ids", type=int, default=10)
    gen.add_argument("--per-id", type=int, default=5)
    gen.add_argument("--height", type=int, default=24)
    gen.add_argument("--width", type=int, default=24)
    gen.add_argument("--shared", type=int, default=15,
                     help="shared perturbation basis columns")
    gen.add_argument("--eta", type=int, default=None,
                     help="training images per identity in the manifest "
                          "(equal to --per-id lists every image as both "
                          "train and test)")
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(handler=_cmd_gen_corpus)

    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = _build_parser()
    args = parser.parse_args(argv)

    from .facerec import ManifestError
    from .imaging import PpmParseError
    from .qmatrix import DomainError, ShapeError, SingularMatrixError
    from .solvers import SolverError

    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PpmParseError, ManifestError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, ShapeError, SingularMatrixError,
            SolverError) as exc:
        print(f"solver diagnostic: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
