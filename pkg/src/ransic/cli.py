"""Command line front end: synthesize problems, solve files, run benchmarks.

Subcommands
-----------
synth
    Write a synthetic problem as a correspondence file (with the ground-truth
    inlier column) plus a ``<out>.truth.json`` sidecar holding the transform.
solve
    Run one solver on a correspondence file, print the estimate and the
    1-based inlier indices, and append a result record when the truth sidecar
    sits next to the input.
bench
    Monte-Carlo sweeps over problem sizes, outlier ratios and solvers. Every
    (cell, run) gets its seed from a stable hash of the cell coordinates, so
    adding a ratio or a solver never perturbs the randomness of other cells,
    and ``--jobs`` parallelism cannot change any record.

Verbosity is controlled by the environment variable RANSIC_LOG
(off | info | debug); diagnostics go to stderr, results to files or stdout.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io as result_io
from .exceptions import InvalidParam, ParseError, UnsupportedFormat
from .geometry import geodesic_distance
from .ransac import RansacRegistration, RansacRotationSearch
from .registration import (
    DEFAULT_ALPHA_MULTS,
    DEFAULT_BETA_MULTS,
    DEFAULT_GAMMA,
    RansicRegistration,
)
from .rotation_search import (
    DEFAULT_TAU,
    DEFAULT_THETA,
    DEFAULT_UPSILON,
    DEFAULT_ZETA,
    RansicRotationSearch,
)
from .synthetic import gen_registration_problem, gen_rotation_problem

logger = logging.getLogger("ransic.cli")

_RANSAC_DEFAULT_CAP = 1000

AGGREGATE_COLUMNS = (
    "problem", "solver", "n", "outlier_ratio", "runs",
    "rot_err_deg_median", "rot_err_deg_max",
    "scale_err_median", "scale_err_max",
    "trans_err_median", "trans_err_max",
    "wall_ms_mean", "recall_mean",
)


def derive_seed(base_seed, problem, solver, n, ratio, run, role):
    """Stable 64-bit seed for one role of one benchmark run.

    Hashes the cell coordinates with SHA-256 and keeps the first 8 bytes
    (little-endian). Independent of execution order and of any other cell.
    """
    key = f"{base_seed}|{problem}|{solver}|{n}|{ratio:.17g}|{run}|{role}"
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")


def main(argv=None):
    _configure_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidParam as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, UnsupportedFormat, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _configure_logging():
    name = os.environ.get("RANSIC_LOG", "off").strip().lower()
    levels = {"off": logging.CRITICAL + 10, "info": logging.INFO, "debug": logging.DEBUG}
    if name not in levels:
        print(f"warning: RANSIC_LOG={name!r} not recognized; using 'off'",
              file=sys.stderr)
        name = "off"
    logging.basicConfig(
        stream=sys.stderr,
        level=levels[name],
        format="%(levelname)s %(name)s: %(message)s",
    )


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="ransic",
        description="Robust rotation search and point cloud registration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic problem file")
    synth.add_argument("--problem", required=True, choices=["rotation", "register"])
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--outlier-ratio", type=float, default=0.0)
    synth.add_argument("--sigma", type=float, default=0.01)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--scale-mode", choices=["unknown", "known"], default="unknown")
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=_cmd_synth)

    solve = sub.add_parser("solve", help="run a solver on a correspondence file")
    solve.add_argument("--problem", required=True, choices=["rotation", "register"])
    solve.add_argument("--in", dest="input", required=True)
    solve.add_argument("--solver", choices=["ransic", "ransac"], default="ransic")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--max-samples", type=int, default=None,
                       help="sample cap (ransic) or iteration cap (ransac)")
    _add_solver_params(solve)
    solve.add_argument("--out", default=None,
                       help="result record path; '-' writes a JSON line to stdout")
    solve.set_defaults(func=_cmd_solve)

    bench = sub.add_parser("bench", help="Monte-Carlo benchmark sweep")
    bench.add_argument("--problem", required=True,
                       choices=["rotation", "register", "register-known-scale"])
    bench.add_argument("--n", type=int, nargs="+", default=[1000])
    bench.add_argument("--outlier-ratio", type=float, nargs="+", default=[0.5])
    bench.add_argument("--runs", type=int, default=50)
    bench.add_argument("--seed", type=int, default=0, help="base seed for cell hashing")
    bench.add_argument("--solvers", nargs="+", default=["ransic"],
                       help="tokens: ransic, ransac, ransac:<cap>")
    bench.add_argument("--max-samples", type=int, default=None)
    _add_solver_params(bench)
    bench.add_argument("--jobs", type=int, default=1,
                       help="parallel runs; records are identical for any value")
    bench.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    bench.add_argument("--out", required=True,
                       help="per-run records; '-' for stdout (aggregate then goes to stderr)")
    bench.set_defaults(func=_cmd_bench)

    return parser


def _add_solver_params(cmd):
    """Solver threshold flags shared by solve and bench.

    Defaults are left as None and resolved per problem kind: upsilon and tau
    differ between the rotation and registration setups.
    """
    cmd.add_argument("--sigma", type=float, default=0.01)
    cmd.add_argument("--upsilon", type=float, default=None)
    cmd.add_argument("--tau", type=int, default=None)
    cmd.add_argument("--zeta", type=float, default=None)
    cmd.add_argument("--theta", type=float, default=None, help="degrees")
    cmd.add_argument("--alpha-mult1", type=float, default=None)
    cmd.add_argument("--beta-mult1", type=float, default=None)
    cmd.add_argument("--alpha-mult2", type=float, default=None)
    cmd.add_argument("--beta-mult2", type=float, default=None)
    cmd.add_argument("--gamma", type=float, default=None, help="degrees")
    cmd.add_argument("--known-scale", action="store_true",
                     help="treat the scale as fixed at 1")


def _solver_params_from_args(args):
    return {
        "sigma": args.sigma,
        "upsilon": args.upsilon,
        "tau": args.tau,
        "zeta": args.zeta,
        "theta": args.theta,
        "alpha_mult1": args.alpha_mult1,
        "beta_mult1": args.beta_mult1,
        "alpha_mult2": args.alpha_mult2,
        "beta_mult2": args.beta_mult2,
        "gamma": args.gamma,
        "max_samples": args.max_samples,
    }


def build_solver(problem, token, params, seed):
    """Construct an estimator from a problem kind and a solver token.

    `problem` is rotation | register | register-known-scale; `token` is
    ransic | ransac | ransac:<cap>. Unset params fall back to the benchmark
    defaults of the problem kind.
    """
    p = dict(params)
    sigma = p.get("sigma") or 0.01
    known = 1.0 if problem == "register-known-scale" else None
    if token == "ransic":
        if problem == "rotation":
            return RansicRotationSearch(
                zeta=_or(p.get("zeta"), DEFAULT_ZETA),
                theta=np.radians(_or(p.get("theta"), np.degrees(DEFAULT_THETA))),
                upsilon=_or(p.get("upsilon"), DEFAULT_UPSILON),
                tau=_or(p.get("tau"), DEFAULT_TAU),
                sigma=sigma,
                max_samples=_or(p.get("max_samples"), 10_000_000),
                random_state=seed,
            )
        return RansicRegistration(
            alpha_mult1=_or(p.get("alpha_mult1"), DEFAULT_ALPHA_MULTS[0]),
            alpha_mult2=_or(p.get("alpha_mult2"), DEFAULT_ALPHA_MULTS[1]),
            beta_mult1=_or(p.get("beta_mult1"), DEFAULT_BETA_MULTS[0]),
            beta_mult2=_or(p.get("beta_mult2"), DEFAULT_BETA_MULTS[1]),
            gamma=np.radians(_or(p.get("gamma"), np.degrees(DEFAULT_GAMMA))),
            upsilon=_or(p.get("upsilon"), 3.2),
            tau=_or(p.get("tau"), 9),
            sigma=sigma,
            known_scale=known,
            max_samples=_or(p.get("max_samples"), 10_000_000),
            random_state=seed,
        )
    if token.startswith("ransac"):
        cap = _ransac_cap(token, p.get("max_samples"))
        if problem == "rotation":
            return RansacRotationSearch(
                max_iterations=cap, sigma=sigma, random_state=seed
            )
        return RansacRegistration(
            max_iterations=cap, sigma=sigma, known_scale=known, random_state=seed
        )
    raise InvalidParam(f"unknown solver token {token!r}")


def _or(value, default):
    return default if value is None else value


def _ransac_cap(token, max_samples):
    if ":" in token:
        name, _, cap = token.partition(":")
        if name != "ransac":
            raise InvalidParam(f"unknown solver token {token!r}")
        try:
            return int(cap)
        except ValueError:
            raise InvalidParam(f"bad ransac iteration cap in {token!r}") from None
    return max_samples if max_samples is not None else _RANSAC_DEFAULT_CAP


def _cmd_synth(args):
    if args.out == "-":
        raise InvalidParam("synth needs a real output path (a sidecar is written too)")
    if args.problem == "rotation":
        prob = gen_rotation_problem(args.n, args.outlier_ratio, args.sigma, args.seed)
        truth = {
            "problem": "rotation",
            "n": int(prob.n),
            "outlier_ratio": args.outlier_ratio,
            "sigma": args.sigma,
            "seed": args.seed,
            "rotation": prob.rotation.tolist(),
        }
    else:
        prob = gen_registration_problem(
            args.n, args.outlier_ratio, args.sigma, args.scale_mode, args.seed
        )
        truth = {
            "problem": "register",
            "n": int(prob.n),
            "outlier_ratio": args.outlier_ratio,
            "sigma": args.sigma,
            "seed": args.seed,
            "scale_mode": args.scale_mode,
            "scale": prob.scale,
            "rotation": prob.rotation.tolist(),
            "translation": prob.translation.tolist(),
        }
    result_io.write_correspondences(args.out, prob.src, prob.dst, prob.inlier_mask)
    sidecar = args.out + ".truth.json"
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=1)
        fh.write("\n")
    logger.info("wrote %s and %s", args.out, sidecar)
    return 0


def _fmt9(x):
    return format(float(x), ".9g")


def _cmd_solve(args):
    src, dst, mask = result_io.read_correspondences(args.input)
    problem = args.problem
    if problem == "register" and args.known_scale:
        problem = "register-known-scale"
    solver = build_solver(problem, args.solver, _solver_params_from_args(args), args.seed)
    logger.debug("solver config: %r", solver)

    start = time.perf_counter()
    solver.fit(src, dst)
    wall_ms = (time.perf_counter() - start) * 1000.0
    logger.info("%s on %d pairs: %.1f ms, terminated=%s",
                args.solver, len(src), wall_ms, solver.terminated_)

    if problem == "rotation":
        print("rotation:", " ".join(_fmt9(v) for v in solver.rotation_.ravel()))
    else:
        print("scale:", _fmt9(solver.scale_))
        print("rotation:", " ".join(_fmt9(v) for v in solver.rotation_.ravel()))
        print("translation:", " ".join(_fmt9(v) for v in solver.translation_))
    print("inliers:", " ".join(str(i + 1) for i in solver.inlier_indices_))

    record = _make_record(problem, args.solver, solver, mask, wall_ms,
                          args.seed, _load_sidecar(args.input))
    if record is not None and args.out is not None:
        if args.out == "-":
            result_io.write_results([record], "jsonl", sys.stdout)
        else:
            result_io.write_results([record], "csv", args.out)
            logger.info("wrote %s", args.out)
    return 0 if solver.terminated_ else 3


def _load_sidecar(path):
    sidecar = path + ".truth.json"
    if not os.path.exists(sidecar):
        return None
    with open(sidecar, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _samples_of(solver):
    if hasattr(solver, "samples_drawn_"):
        s = solver.samples_drawn_
        return int(sum(s)) if isinstance(s, tuple) else int(s)
    return int(solver.iterations_)


def _make_record(problem, solver_token, solver, mask, wall_ms, seed, truth):
    """Build a ResultRecord; returns None without a truth sidecar."""
    if truth is None:
        return None
    rot_true = np.asarray(truth["rotation"], dtype=float)
    rot_err = float(np.degrees(geodesic_distance(solver.rotation_, rot_true)))
    scale_err = trans_err = None
    if problem != "rotation" and "scale" in truth:
        scale_err = abs(float(solver.scale_) - float(truth["scale"]))
        trans_err = float(np.linalg.norm(
            solver.translation_ - np.asarray(truth["translation"], dtype=float)
        ))
    recall = precision = None
    if mask is not None:
        true_idx = np.flatnonzero(mask)
        pred_idx = solver.inlier_indices_
        hit = np.intersect1d(true_idx, pred_idx).size
        recall = hit / true_idx.size if true_idx.size else 0.0
        precision = hit / pred_idx.size if pred_idx.size else 0.0
    return result_io.ResultRecord(
        problem=problem,
        solver=solver_token,
        n=int(truth["n"]),
        outlier_ratio=float(truth["outlier_ratio"]),
        seed=int(seed),
        rot_err_deg=rot_err,
        scale_err=scale_err,
        trans_err=trans_err,
        recall=recall,
        precision=precision,
        samples_drawn=_samples_of(solver),
        wall_ms=float(wall_ms),
        terminated=bool(solver.terminated_),
    )


def _bench_worker(job):
    """One benchmark run; a pure function of its job dict so parallel
    execution cannot change anything but the wall clock."""
    problem = job["problem"]
    token = job["solver"]
    n = job["n"]
    ratio = job["ratio"]
    sigma = job["sigma"]
    run = job["run"]
    gen_seed = derive_seed(job["base_seed"], problem, token, n, ratio, run, "gen")
    fit_seed = derive_seed(job["base_seed"], problem, token, n, ratio, run, "fit")

    if problem == "rotation":
        prob = gen_rotation_problem(n, ratio, sigma, gen_seed)
    else:
        mode = "known" if problem == "register-known-scale" else "unknown"
        prob = gen_registration_problem(n, ratio, sigma, mode, gen_seed)

    solver = build_solver(problem, token, job["params"], fit_seed)
    start = time.perf_counter()
    failure = None
    try:
        solver.fit(prob.src, prob.dst)
    except Exception as exc:  # a failed run is a record, never a crash
        failure = exc
    wall_ms = (time.perf_counter() - start) * 1000.0

    if failure is not None:
        logger.warning("run failed (%s n=%d ratio=%.3g run=%d): %s",
                       token, n, ratio, run, failure)
        return result_io.ResultRecord(
            problem=problem, solver=token, n=n, outlier_ratio=ratio,
            seed=gen_seed, samples_drawn=0, wall_ms=wall_ms, terminated=False,
        )

    rot_err = float(np.degrees(geodesic_distance(solver.rotation_, prob.rotation)))
    scale_err = trans_err = None
    if problem != "rotation":
        scale_err = abs(float(solver.scale_) - prob.scale)
        trans_err = float(np.linalg.norm(solver.translation_ - prob.translation))
    true_idx = np.flatnonzero(prob.inlier_mask)
    pred_idx = solver.inlier_indices_
    hit = np.intersect1d(true_idx, pred_idx).size
    return result_io.ResultRecord(
        problem=problem, solver=token, n=n, outlier_ratio=ratio, seed=gen_seed,
        rot_err_deg=rot_err, scale_err=scale_err, trans_err=trans_err,
        recall=hit / true_idx.size if true_idx.size else 0.0,
        precision=hit / pred_idx.size if pred_idx.size else 0.0,
        samples_drawn=_samples_of(solver), wall_ms=float(wall_ms),
        terminated=bool(solver.terminated_),
    )


def _cmd_bench(args):
    if args.runs < 1:
        raise InvalidParam("--runs must be >= 1")
    if args.jobs < 1:
        raise InvalidParam("--jobs must be >= 1")
    for r in args.outlier_ratio:
        if not 0.0 <= r < 1.0:
            raise InvalidParam("outlier ratios must lie in [0, 1)")
    params = _solver_params_from_args(args)

    cells = [
        (n, ratio, token)
        for n in args.n
        for ratio in args.outlier_ratio
        for token in args.solvers
    ]
    jobs = [
        {
            "problem": args.problem, "solver": token, "n": n, "ratio": ratio,
            "sigma": args.sigma, "run": run, "base_seed": args.seed,
            "params": params,
        }
        for (n, ratio, token) in cells
        for run in range(args.runs)
    ]
    logger.info("bench: %d cells x %d runs, jobs=%d",
                len(cells), args.runs, args.jobs)

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(_bench_worker, jobs))
    else:
        records = [_bench_worker(job) for job in jobs]

    if args.out == "-":
        result_io.write_results(records, args.format, sys.stdout)
    else:
        result_io.write_results(records, args.format, args.out)
        logger.info("wrote %s", args.out)

    agg_rows = _aggregate(cells, args.runs, records, args.problem)
    if args.out == "-":
        _write_aggregate(sys.stderr, agg_rows)
    else:
        agg_path = args.out + ".agg.csv"
        with open(agg_path, "w", encoding="utf-8", newline="") as fh:
            _write_aggregate(fh, agg_rows)
        logger.info("wrote %s", agg_path)
    return 0


def _aggregate(cells, runs, records, problem):
    rows = []
    for c, (n, ratio, token) in enumerate(cells):
        chunk = records[c * runs:(c + 1) * runs]
        rot = [r.rot_err_deg for r in chunk if r.rot_err_deg is not None]
        sc = [r.scale_err for r in chunk if r.scale_err is not None]
        tr = [r.trans_err for r in chunk if r.trans_err is not None]
        rc = [r.recall for r in chunk if r.recall is not None]
        rows.append({
            "problem": problem,
            "solver": token,
            "n": n,
            "outlier_ratio": ratio,
            "runs": runs,
            "rot_err_deg_median": _med(rot),
            "rot_err_deg_max": max(rot) if rot else None,
            "scale_err_median": _med(sc),
            "scale_err_max": max(sc) if sc else None,
            "trans_err_median": _med(tr),
            "trans_err_max": max(tr) if tr else None,
            "wall_ms_mean": sum(r.wall_ms for r in chunk) / len(chunk),
            "recall_mean": sum(rc) / len(rc) if rc else None,
        })
    return rows


def _med(values):
    return float(np.median(values)) if values else None


def _write_aggregate(fh, rows):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(AGGREGATE_COLUMNS)
    for row in rows:
        writer.writerow(
            "" if row[c] is None else
            (_fmt9(row[c]) if isinstance(row[c], float) else row[c])
            for c in AGGREGATE_COLUMNS
        )


if __name__ == "__main__":
    sys.exit(main())
