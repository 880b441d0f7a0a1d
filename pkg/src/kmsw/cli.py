"""Command-line interface.

Subcommands: ``distance``, ``test``, ``rankcheck``, ``sweep``, ``generate``.
Every command is deterministic given ``--seed``: JSON output uses a fixed
field order and repr float formatting, CSV uses %.17g, and wall-clock timings
are only emitted under ``--timings``.

Exit codes: 0 success, 1 usage, 2 input parse, 3 numerical precondition,
4 solver failure.  Failures print a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import dataio
from ._parallel import default_workers, run_trials
from ._rng import substream
from .datagen import KINDS, DatasetSpec, generate
from .errors import InputError, KmswError, PreconditionError, SolverError
from .kernels import (
    GAUSSIAN,
    Kernel,
    PointCloud,
    assemble,
    dot_product,
    gaussian,
    median_bandwidth,
)
from .kms import kms2
from .ot import BACKEND
from .rankred import rank_bound, reduce
from .sdr import SolverConfig, solve_sdr
from .stats import (
    CriticalValueParams,
    rate_sweep,
    theorem_test,
    two_sample_test,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_SOLVER = 4

log = logging.getLogger("kmsw")


class UsageError(KmswError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="ascii", newline="\n")


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _finite_or_none(x: float):
    x = float(x)
    return x if np.isfinite(x) else None


def _kernel_from_args(args, x: PointCloud, y: PointCloud) -> Kernel:
    if args.kernel == "dot_product":
        return dot_product()
    sigma = args.sigma if args.sigma is not None else median_bandwidth(x, y)
    return gaussian(sigma, convention=args.convention)


def _kernel_json(k: Kernel) -> dict:
    return {
        "kind": k.kind,
        "bandwidth": k.bandwidth,
        "convention": k.convention if k.kind == GAUSSIAN else None,
    }


def _solver_overrides(args) -> dict:
    ov = {}
    if getattr(args, "max_iters", None) is not None:
        ov["max_iters"] = args.max_iters
    if getattr(args, "exact_threshold", None) is not None:
        ov["exact_threshold"] = args.exact_threshold
    return ov


def _load_pair(args) -> tuple[PointCloud, PointCloud]:
    x = dataio.read_points(args.x)
    y = dataio.read_points(args.y)
    if x.n != y.n:
        raise PreconditionError(f"sample sizes differ: {x.n} vs {y.n}")
    return x, y


def cmd_distance(args) -> int:
    x, y = _load_pair(args)
    kernel = _kernel_from_args(args, x, y)
    t0 = time.perf_counter()
    res = kms2(
        x, y, kernel, delta=args.delta, seed=args.seed, cfg_overrides=_solver_overrides(args)
    )
    elapsed = time.perf_counter() - t0
    payload = {
        "schema": "kmsw.distance.v1",
        "distance": res.distance,
        "value": res.value,
        "sdr_value": res.sdr_value,
        "rank": res.rank_after_reduction,
        "rank_bound": res.k_bound,
        "n": res.n,
        "d": res.d,
        "kernel": _kernel_json(kernel),
        "delta": res.sdr.config.delta,
        "seed": args.seed,
        "solver": {
            "iterations": res.sdr.iterations,
            "max_iters": res.sdr.config.max_iters,
            "early_stopped": res.sdr.early_stopped,
            "backend": BACKEND,
        },
        "reduction": {
            "iterations": res.reduction.iterations,
            "wall_steps": res.reduction.wall_steps,
        },
    }
    if args.timings:
        payload["timings"] = {"total_s": elapsed}
    _write_text(args.out, _json_dumps(payload))
    if args.projector_out:
        coeffs = np.column_stack([res.projector.coef_x, res.projector.coef_y])
        dataio.write_matrix_csv(args.projector_out, coeffs, header=["coef_x", "coef_y"])
    if args.trace_out:
        dataio.write_matrix_csv(
            args.trace_out, res.sdr.trace_log, header=["iteration", "inexact_value", "step_norm"]
        )
    if args.eigen_out:
        rows = [
            (float(it), float(pos), float(lam))
            for it, lams in enumerate(res.reduction.eigen_trace)
            for pos, lam in enumerate(lams)
        ]
        dataio.write_matrix_csv(
            args.eigen_out, np.asarray(rows), header=["iteration", "position", "eigenvalue"]
        )
    if args.s_out:
        dataio.write_matrix_bin(args.s_out, res.reduction.s)
    return EXIT_OK


def cmd_test(args) -> int:
    if not (0.0 < args.alpha < 1.0):
        raise UsageError(f"--alpha must be in (0, 1), got {args.alpha}")
    if args.permutations < 1:
        raise UsageError("--permutations must be >= 1")
    x, y = _load_pair(args)
    kernel = _kernel_from_args(args, x, y)
    overrides = _solver_overrides(args)
    if args.mode == "bootstrap":
        res = two_sample_test(
            x, y, kernel,
            alpha=args.alpha,
            permutations=args.permutations,
            seed=args.seed,
            cfg_overrides=overrides,
        )
    else:
        a_bound = args.a_bound if args.a_bound is not None else kernel.bound(x, y)
        params = CriticalValueParams(
            a_bound=a_bound, c_univ=args.c_univ, p=args.p, alpha=args.alpha
        )
        res = theorem_test(x, y, kernel, params, seed=args.seed, cfg_overrides=overrides)
    payload = {
        "schema": "kmsw.test.v1",
        "mode": res.mode,
        "statistic": res.statistic,
        "threshold": _finite_or_none(res.threshold),
        "reject": res.reject,
        "p_value": _finite_or_none(res.p_value),
        "alpha": res.alpha,
        "permutations": args.permutations if res.mode == "bootstrap" else None,
        "n": x.n,
        "seed": args.seed,
        "kernel": _kernel_json(kernel),
        "meta": {k: _finite_or_none(v) if isinstance(v, float) else v
                 for k, v in res.meta.items()},
    }
    _write_text(args.out, _json_dumps(payload))
    return EXIT_OK


def _rankcheck_trial(spec_args: dict, seed: int, max_iters: int, sigma: float | None):
    spec = DatasetSpec(**spec_args)
    x, y = generate(spec)
    kernel = gaussian(sigma) if sigma is not None else gaussian(median_bandwidth(x, y))
    ga = assemble(kernel, x, y)
    cfg = SolverConfig.from_assembly(ga, seed=seed, max_iters=max_iters)
    sol = solve_sdr(ga, cfg)
    red = reduce(sol, ga, seed=seed)
    rank_before = int(np.sum(np.linalg.eigvalsh(sol.s_avg) > 1e-6))
    return rank_before, red.rank, red.k_bound


def cmd_rankcheck(args) -> int:
    sizes = _parse_int_list(args.n_list)
    if not sizes:
        raise UsageError("--n-list needs at least one size")
    if args.dataset == "circulant_adversarial":
        raise UsageError("rankcheck needs a point-cloud dataset kind")
    jobs = []
    meta = []
    for si, n in enumerate(sizes):
        for t in range(args.trials):
            trial_seed = int(substream(args.seed, "trial", si, t).integers(2**63 - 1))
            spec_args = {"kind": args.dataset, "n": int(n), "d": args.dim, "seed": trial_seed}
            jobs.append((spec_args, trial_seed, args.max_iters or 150, args.sigma))
            meta.append((n, t))
    results = run_trials(_rankcheck_trial, jobs, workers=args.threads)
    lines = ["n,trial,rank_before,rank_after,bound"]
    violations = 0
    for (n, t), (rb, ra, bound) in zip(meta, results):
        lines.append(f"{n},{t},{rb},{ra},{bound}")
        if ra > bound:
            violations += 1
    _write_text(args.out, "\n".join(lines) + "\n")
    if violations:
        raise SolverError(f"{violations} trials exceeded the rank bound")
    return EXIT_OK


def cmd_sweep(args) -> int:
    sizes = _parse_int_list(args.sizes)
    if len(sizes) < 2:
        raise UsageError("--sizes needs at least two values to fit a slope")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.p < 1:
        raise UsageError("--p must be >= 1")
    spec = DatasetSpec(kind=args.dataset, n=sizes[0], d=args.dim, seed=args.seed)
    kernel = dot_product() if args.kernel == "dot_product" else gaussian(args.sigma or 1.0)
    overrides = _solver_overrides(args)
    res = rate_sweep(
        spec, kernel, args.p, sizes, args.trials,
        seed=args.seed, workers=args.threads, cfg_overrides=overrides,
    )
    lines = ["n,trial,statistic"]
    for si, n in enumerate(sizes):
        for t in range(args.trials):
            lines.append(f"{n},{t},{res.statistics[si, t]:.17g}")
    _write_text(args.out_prefix + ".csv", "\n".join(lines) + "\n")
    ci = None
    if np.isfinite(res.slope) and np.isfinite(res.stderr):
        ci = [res.slope - 1.96 * res.stderr, res.slope + 1.96 * res.stderr]
    payload = {
        "schema": "kmsw.sweep.v1",
        "slope": _finite_or_none(res.slope),
        "intercept": _finite_or_none(res.intercept),
        "stderr": _finite_or_none(res.stderr),
        "ci95": ci,
        "sizes": [int(v) for v in sizes],
        "means": [float(v) for v in res.means],
        "p": args.p,
        "trials": args.trials,
        "path": res.path,
        "degenerate": res.degenerate,
        "seed": args.seed,
    }
    _write_text(args.out_prefix + ".json", _json_dumps(payload))
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        text = Path(args.spec).read_text(encoding="ascii")
    except OSError as exc:
        raise InputError(f"cannot read {args.spec}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.spec}: {exc}") from exc
    if obj.get("kind") not in KINDS:
        raise UsageError(f"unknown dataset kind {obj.get('kind')!r}; choices: {', '.join(KINDS)}")
    spec = DatasetSpec.from_json(text)
    x, y = generate(spec)
    dataio.write_points_csv(args.out_prefix + "_x.csv", x)
    dataio.write_points_csv(args.out_prefix + "_y.csv", y)
    return EXIT_OK


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> _Parser:
    p = _Parser(prog="kmsw", description="Kernel max-sliced Wasserstein distances")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, solver=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=None, help="worker processes for trials")
        if solver:
            sp.add_argument("--max-iters", type=int, default=None)
            sp.add_argument("--exact-threshold", type=int, default=None)

    def add_kernel(sp):
        sp.add_argument("--kernel", choices=["gaussian", "dot_product"], default="gaussian")
        sp.add_argument("--sigma", type=float, default=None,
                        help="gaussian bandwidth; defaults to the median heuristic")
        sp.add_argument("--median", action="store_true",
                        help="use the median-distance bandwidth (the default)")
        sp.add_argument("--convention", choices=["half", "plain"], default="half")

    d = sub.add_parser("distance", help="compute the KMS 2-Wasserstein distance")
    d.add_argument("x")
    d.add_argument("y")
    add_kernel(d)
    d.add_argument("--delta", type=float, default=None, help="target solver accuracy (absolute)")
    d.add_argument("--out", default=None)
    d.add_argument("--projector-out", default=None)
    d.add_argument("--trace-out", default=None)
    d.add_argument("--eigen-out", default=None,
                   help="per-reduction-iteration eigenvalue mass as tidy CSV")
    d.add_argument("--s-out", default=None)
    d.add_argument("--timings", action="store_true")
    add_common(d)
    d.set_defaults(func=cmd_distance)

    t = sub.add_parser("test", help="two-sample test")
    t.add_argument("x")
    t.add_argument("y")
    add_kernel(t)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--permutations", type=int, default=500)
    t.add_argument("--mode", choices=["bootstrap", "theorem"], default="bootstrap")
    t.add_argument("--p", type=float, default=2.0)
    t.add_argument("--c-univ", type=float, default=1.0)
    t.add_argument("--a-bound", type=float, default=None)
    t.add_argument("--out", default=None)
    add_common(t)
    t.set_defaults(func=cmd_test)

    r = sub.add_parser("rankcheck", help="solver rank vs the closed-form bound")
    r.add_argument("--n-list", required=True)
    r.add_argument("--dataset", choices=[k for k in KINDS], default="gauss_cov_shift")
    r.add_argument("--dim", type=int, default=40)
    r.add_argument("--trials", type=int, default=1)
    r.add_argument("--sigma", type=float, default=None)
    r.add_argument("--out", default=None)
    add_common(r)
    r.set_defaults(func=cmd_rankcheck)

    s = sub.add_parser("sweep", help="sample-complexity rate sweep")
    s.add_argument("--dataset", choices=[k for k in KINDS], default="two_point_1d")
    s.add_argument("--dim", type=int, default=None)
    s.add_argument("--sizes", required=True)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--kernel", choices=["gaussian", "dot_product"], default="dot_product")
    s.add_argument("--sigma", type=float, default=None)
    s.add_argument("--out-prefix", required=True)
    add_common(s)
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("generate", help="write a dataset pair as CSV")
    g.add_argument("--spec", required=True, help="DatasetSpec JSON file")
    g.add_argument("--out-prefix", required=True)
    add_common(g, solver=False)
    g.set_defaults(func=cmd_generate)

    return p


def _emit_error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(_json_dumps({"error": kind, "message": message, "exit_code": code}))
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("KMS_LOG", "WARNING").upper())
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads is None:
            args.threads = default_workers()
        return args.func(args)
    except UsageError as exc:
        return _emit_error("usage", str(exc), EXIT_USAGE)
    except InputError as exc:
        return _emit_error("input", str(exc), EXIT_PARSE)
    except PreconditionError as exc:
        return _emit_error("precondition", str(exc), EXIT_PRECONDITION)
    except SolverError as exc:
        return _emit_error("solver", str(exc), EXIT_SOLVER)


if __name__ == "__main__":
    sys.exit(main())
