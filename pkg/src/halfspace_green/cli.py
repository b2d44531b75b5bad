"""Command-line interface: ``halfspace-green {check-system, eval, solve, verify}``.

Exit codes: 0 success, 1 a verification check failed, 2 bad configuration
or input, 3 the requested construction is unavailable for the system.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import DEFAULT_CONFIG
from .errors import (
    HalfspaceError,
    NonpositiveT,
    NotInHalfSpace,
    NotWeaklyElliptic,
    RouteUnavailable,
    SpecError,
)
from .fundamental import make_evaluator
from .specs import (
    DatumSpec,
    GridSpec,
    QuadratureOverrides,
    build_datum,
    load_system,
    parse_model,
    read_points_csv,
    write_csv,
)
from .system import BUILTIN_NAMES, builtin, classify, reflect

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_UNAVAILABLE = 0, 1, 2, 3
KINDS = ("E", "dE", "green", "poisson", "adn_kernel")
THREADS_ENV = "HALFSPACE_GREEN_THREADS"


def _complex_arg(text: str) -> complex:
    try:
        return complex(text.strip().replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _vector_arg(text: str):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return max(1, os.cpu_count() or 1)
    try:
        return max(1, int(raw))
    except ValueError:
        raise SpecError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def chunked_map(fn, pts: np.ndarray, *extra, min_chunk: int = 16):
    """Apply ``fn`` to row chunks of ``pts`` (and matching rows of ``extra``) on a thread pool.

    Every chunk is evaluated independently and results are concatenated in
    order, so output does not depend on the thread count.
    """
    workers = thread_count()
    n = len(pts)
    if workers == 1 or n <= min_chunk:
        return fn(pts, *extra)
    bounds = np.linspace(0, n, min(workers, max(1, n // min_chunk)) + 1).astype(int)
    pieces = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda b: fn(pts[b[0]:b[1]], *(e[b[0]:b[1]] for e in extra)), pieces))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[k] for p in parts]) for k in range(len(parts[0])))
    return np.concatenate(parts)


# -- argument plumbing --------------------------------------------------------------

def _add_system_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("system")
    g.add_argument("--builtin", choices=[b for b in BUILTIN_NAMES if b != "custom"])
    g.add_argument("--system", metavar="JSON", help="system spec file or inline JSON")
    g.add_argument("--n", type=int, default=2, help="space dimension")
    g.add_argument("--lambda", dest="lam_param", type=_complex_arg, default=1.0,
                   help="parameter of l_lambda, e.g. 2 or -1+0.1i")
    g.add_argument("--mu", type=float, default=1.0, help="Lame shear modulus")
    g.add_argument("--lam", type=float, default=1.0, help="Lame first parameter")
    g.add_argument("--c", type=lambda s: [_complex_arg(v) for v in s.split(",")],
                   help="diag_anisotropic coefficients, comma separated")
    g.add_argument("--coupling", type=_complex_arg, default=0.5, help="coupled_pair coupling")
    q = p.add_argument_group("quadrature overrides")
    for name, typ in (("circle-nodes", int), ("fd-step", float), ("richardson-levels", int),
                      ("delta-test-radius", float), ("tol", float), ("panel-nodes", int),
                      ("graded-panels", int), ("angular-nodes", int)):
        q.add_argument(f"--{name}", type=typ, default=None)
    p.add_argument("--output", "-o", metavar="PATH", help="write here instead of stdout")
    p.add_argument("--seed", type=int, default=0, help="seed for sampled check points")


def _system_from(args):
    if args.system:
        return load_system(args.system)
    if not args.builtin:
        raise SpecError("give --builtin NAME or --system JSON")
    params = {
        "l_lambda": {"lam": args.lam_param},
        "lame": {"mu": args.mu, "lam": args.lam},
        "diag_anisotropic": {"c": args.c},
        "coupled_pair": {"coupling": args.coupling},
    }.get(args.builtin, {})
    try:
        return builtin(args.builtin, args.n, **params)
    except (ValueError, TypeError) as exc:
        raise SpecError(str(exc)) from None


def _config_from(args):
    keys = ("circle_nodes", "fd_step", "richardson_levels", "delta_test_radius", "tol",
            "panel_nodes", "graded_panels", "angular_nodes")
    try:
        over = QuadratureOverrides(**{k: getattr(args, k) for k in keys})
        return over.apply(DEFAULT_CONFIG)
    except ValueError as exc:
        raise SpecError(f"quadrature overrides: {exc}") from None


def _points_from(args, dim: int, what: str = "--x") -> np.ndarray:
    sources = [bool(args.x), bool(args.points), bool(args.grid)]
    if sum(sources) != 1:
        raise SpecError(f"give exactly one of {what}, --points or --grid")
    if args.x:
        pts = np.array(args.x, dtype=float)
    elif args.points:
        pts = read_points_csv(args.points, dim)
    else:
        pts = parse_model(GridSpec, args.grid, "grid spec").points()
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise SpecError(f"points need {dim} coordinates, got shape {pts.shape}")
    return pts


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = open(self.path, "w", encoding="utf-8", newline="") if self.path else sys.stdout
        return self.fh

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()


# -- commands -----------------------------------------------------------------------

def cmd_check_system(args) -> int:
    S = _system_from(args)
    rep = classify(S, _config_from(args))
    out = {"system": S.name, "n": S.n, "M": S.M, **rep.to_dict()}
    with _Output(args.output) as fh:
        fh.write(json.dumps(out, indent=2) + "\n")
    return EXIT_OK


def _entry_rows(coords, vals, errs):
    """One row per (point, alpha, beta) with 1-based entry indices."""
    rows = []
    for c, V, e in zip(coords, vals, errs):
        V = np.asarray(V).reshape(V.shape[0], -1)
        for a in range(V.shape[0]):
            for b in range(V.shape[1]):
                rows.append([*map(float, c), a + 1, b + 1, float(V[a, b].real), float(V[a, b].imag), float(e)])
    return rows


def cmd_eval(args) -> int:
    from . import fundamental as fs
    from . import halfspace as hk

    S = _system_from(args)
    cfg = _config_from(args)
    n = S.n
    F = make_evaluator(S, cfg)
    meta = {"system": S.name, "kind": args.kind, "config_digest": cfg.digest()}
    tail = 0.0

    if args.kind in ("E", "dE"):
        x = _points_from(args, n)
        if args.kind == "E":
            vals, errs = chunked_map(F.values_and_errors, x)
            tail = F.fourier_tail
        else:
            if args.gamma is None:
                raise SpecError("--kind dE needs --gamma, e.g. 0,1")
            gamma = tuple(int(g) for g in args.gamma.split(","))
            vals, errs = chunked_map(lambda p: fs.eval_dE_with_error(F, p, gamma), x)
            meta["gamma"] = ",".join(map(str, gamma))
        coords, header = x, [f"x{k + 1}" for k in range(n)]

    elif args.kind == "green":
        x = _points_from(args, n)
        if args.y is None:
            raise SpecError("--kind green needs --y")
        y = np.broadcast_to(np.asarray(args.y, dtype=float), x.shape)
        K = hk.make_kernels(S, args.route, cfg, F)
        meta["route"] = args.route
        if args.route == "convolution":
            vals, errs = chunked_map(lambda a, b: hk.green_convolution(K, a, b, with_error=True), x, y)
            tail = K.poisson.tail_bound
        else:
            vals = chunked_map(lambda a, b: hk.green_reflection(K, a, b), x, y)
            e1 = F.values_and_errors(x - y)[1]
            e2 = F.values_and_errors(x - reflect(y))[1]
            errs = e1 + e2
            tail = 2 * F.fourier_tail
        coords = np.concatenate([x, y], 1)
        header = [f"x{k + 1}" for k in range(n)] + [f"y{k + 1}" for k in range(n)]

    else:
        available, why = hk.poisson_availability(S, cfg)
        if not available:
            raise RouteUnavailable(f"{args.kind}: {why}")
        d = n - 1
        if args.kind == "poisson":
            xp = _points_from(args, d)
            vals, errs = chunked_map(lambda p: hk.poisson_values_and_errors(F, p), xp)
            coords, header = xp, [f"x{k + 1}" for k in range(d)]
        else:
            if args.t is not None:
                xp = _points_from(args, d)
                x = np.concatenate([xp, np.full((len(xp), 1), args.t)], 1)
            else:
                x = _points_from(args, n)
            if np.any(x[:, -1] <= 0):
                raise NonpositiveT("t must be positive")
            t = x[:, -1:]

            def kern(p, tt):
                v, e = hk.poisson_values_and_errors(F, p / tt)
                s = tt[:, 0] ** (1 - n)
                return v * s[:, None, None], e * s

            vals, errs = chunked_map(kern, x[:, :-1], t)
            coords, header = x, [f"x{k + 1}" for k in range(d)] + ["t"]

    meta["points"] = len(coords)
    meta["tail_bound_total"] = "%.17g" % (tail * len(coords))
    meta["error_estimate_max"] = "%.17g" % (float(np.max(errs)) if len(coords) else 0.0)
    rows = _entry_rows(coords, vals, errs)
    with _Output(args.output) as fh:
        write_csv(fh, header + ["alpha", "beta", "re", "im", "err"], rows, meta)
    return EXIT_OK


def cmd_solve(args) -> int:
    from . import dirichlet as dp
    from . import halfspace as hk

    S = _system_from(args)
    cfg = _config_from(args)
    if not args.datum:
        raise SpecError("solve needs --datum JSON")
    spec = parse_model(DatumSpec, args.datum, "datum spec")
    available, why = hk.poisson_availability(S, cfg)
    if not available:
        raise RouteUnavailable(why)
    P = hk.build_poisson_kernel(make_evaluator(S, cfg))
    base = Path(args.datum).parent if Path(args.datum).exists() else None
    f = build_datum(spec, P, base)
    sol = dp.solve(P, f)
    x = _points_from(args, S.n)
    if np.any(x[:, -1] <= 0):
        raise NotInHalfSpace("solve points must satisfy x_n > 0")
    vals, errs = chunked_map(lambda p: sol.evaluate(p, with_error=True), x)
    resid = np.full(len(x), np.nan)
    if not args.no_residual:
        for i, p in enumerate(x):
            h = min(1e-3, p[-1] / 4)
            resid[i] = dp.residual_L(sol, p, h=h, relative=True)[1]
    meta = {
        "system": S.name, "datum": f.name, "config_digest": cfg.digest(), "points": len(x),
        "normalization_defect": "%.17g" % P.normalization_defect,
        "tail_bound_total": "%.17g" % (sol.tail_bound() * len(x)),
        "residual_max": "%.17g" % (float(np.nanmax(resid)) if not args.no_residual and len(x) else float("nan")),
    }
    rows = []
    for p, V, e, r in zip(x, vals, errs, resid):
        for a in range(len(V)):
            rows.append([*map(float, p), a + 1, float(V[a].real), float(V[a].imag), float(e), float(r)])
    header = [f"x{k + 1}" for k in range(S.n)] + ["alpha", "re", "im", "err", "residual"]
    with _Output(args.output) as fh:
        write_csv(fh, header, rows, meta)
    sys.stderr.write(f"residual max {meta['residual_max']} over {len(x)} points\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import has_unavailable, run_suite

    S = _system_from(args)
    cfg = _config_from(args)
    rep = run_suite(args.suite, S, cfg, args.seed)
    out = {"system": S.name, "n": S.n, "suite": args.suite, "config_digest": cfg.digest(), **rep.to_dict()}
    with _Output(args.output) as fh:
        fh.write(json.dumps(out, indent=2) + "\n")
    for r in rep.records:
        defect = "-" if r.skipped else "%.3g" % r.max_defect
        sys.stderr.write(f"{r.status:5s} {r.check_id:36s} {defect:>10s}  {r.note}\n")
    if not rep.passed:
        return EXIT_FAIL
    return EXIT_UNAVAILABLE if has_unavailable(rep) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="halfspace-green",
                                description="Fundamental solutions, half-space Green functions and "
                                            "Poisson kernels of constant-coefficient elliptic systems.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check-system", help="classify ellipticity and reflection invariance")
    _add_system_args(c)
    c.set_defaults(func=cmd_check_system)

    e = sub.add_parser("eval", help="tabulate E, its derivatives, G, P or K as CSV")
    _add_system_args(e)
    e.add_argument("--kind", choices=KINDS, required=True)
    e.add_argument("--x", type=_vector_arg, action="append", help="evaluation point (repeatable)")
    e.add_argument("--y", type=_vector_arg, help="pole of the Green function")
    e.add_argument("--t", type=float, help="height for adn_kernel when --x gives x' only")
    e.add_argument("--gamma", help="derivative multi-index for dE, e.g. 1,0,0")
    e.add_argument("--points", metavar="CSV")
    e.add_argument("--grid", metavar="JSON", help='{"axes": [[lo, hi, num], ...]}')
    e.add_argument("--route", choices=("reflection", "convolution"), default="reflection")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("solve", help="solve the Dirichlet problem by Poisson convolution")
    _add_system_args(s)
    s.add_argument("--datum", metavar="JSON", help="datum spec file or inline JSON")
    s.add_argument("--x", type=_vector_arg, action="append")
    s.add_argument("--points", metavar="CSV")
    s.add_argument("--grid", metavar="JSON")
    s.add_argument("--no-residual", action="store_true", help="skip the finite-difference residual column")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="run property suites and print a JSON report")
    _add_system_args(v)
    v.add_argument("--suite", choices=("fundamental", "green", "poisson", "dirichlet", "maximal", "all"),
                   default="all")
    v.set_defaults(func=cmd_verify)
    return p


_VALUE_FLAGS = {"--lambda", "--coupling", "--c", "--x", "--y", "--t", "--mu", "--lam"}


def _attach_values(argv):
    """Join ``--x -1,0`` into ``--x=-1,0`` so argparse does not read the value as a flag."""
    out, k = [], 0
    while k < len(argv):
        tok = argv[k]
        if tok in _VALUE_FLAGS and k + 1 < len(argv) and argv[k + 1].startswith("-") \
                and not argv[k + 1].startswith("--"):
            out.append(f"{tok}={argv[k + 1]}")
            k += 2
            continue
        out.append(tok)
        k += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_attach_values(list(sys.argv[1:] if argv is None else argv)))
    try:
        return args.func(args)
    except RouteUnavailable as exc:
        sys.stderr.write(f"route unavailable: {exc}\n")
        return EXIT_UNAVAILABLE
    except (SpecError, NotWeaklyElliptic, HalfspaceError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
