"""Property suites behind the ``verify`` command.

Each suite returns a :class:`VerificationReport`; checks that need a
construction the system does not admit are recorded as skipped with the
reason, and flagged ``route_unavailable`` in their note.
"""

from __future__ import annotations

import math

import numpy as np

from .config import DEFAULT_CONFIG, QuadratureConfig
from .dirichlet import (
    boundary_trace_check,
    combine,
    constant_datum,
    domination_constant,
    gaussian_datum,
    poisson_slice_datum,
    residual_L,
    solve,
)
from .errors import NotWeaklyElliptic, RouteUnavailable
from .fundamental import default_bumps, delta_residual, eval_dE, eval_E, make_evaluator, unit_index
from .halfspace import (
    GreenSampleSpec,
    adn_kernel,
    green,
    make_kernels,
    poisson_availability,
    poisson_from_green,
    poisson_kernel,
    remainder,
    sample_pairs,
    verify_green_identities,
)
from .nontangential import ConeProbe, ExcludedRegion, hl_maximal, maximal_bracket, nt_max
from .report import CheckRecord, VerificationReport
from .system import EllipticSystem, is_reflection_invariant, laplacian, transpose_system

SUITES = ("fundamental", "green", "poisson", "dirichlet", "maximal", "all")
UNAVAILABLE = "route_unavailable"


def _unavailable(check_id, anchor, why) -> CheckRecord:
    return CheckRecord.skip(check_id, anchor, f"{UNAVAILABLE}: {why}")


def has_unavailable(rep: VerificationReport) -> bool:
    return any(r.skipped and r.note.startswith(UNAVAILABLE) for r in rep.records)


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(b))), 1e-300))


def laplacian_E(x):
    x = np.atleast_2d(x)
    r = np.linalg.norm(x, axis=1)
    if x.shape[1] == 2:
        return np.log(r / 2) / (2 * np.pi)
    return -1.0 / (4 * np.pi * r)


def laplacian_P(xp, n):
    xp = np.asarray(xp, dtype=float).reshape(-1, n - 1)
    omega = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    return 2.0 / omega * (1 + np.sum(xp**2, axis=1)) ** (-n / 2)


def _random_points(n, count, rng, lo=0.1, hi=10.0):
    v = rng.standard_normal((count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * np.exp(rng.uniform(np.log(lo), np.log(hi), count))[:, None]


# -- suites ---------------------------------------------------------------------------

def fundamental_suite(S: EllipticSystem, cfg: QuadratureConfig = DEFAULT_CONFIG, seed: int = 0):
    rep = VerificationReport()
    try:
        F = make_evaluator(S, cfg)
    except NotWeaklyElliptic as exc:
        rep.add(CheckRecord("fundamental.elliptic", "characteristic matrix invertible off the origin",
                            float("inf"), 0.0, note=str(exc)))
        return rep
    rng = np.random.default_rng(seed)
    n = S.n
    x = _random_points(n, 100, rng)
    E = eval_E(F, x)
    if S.same_operator(laplacian(n)):
        ref = laplacian_E(x)
        err = float(np.max(np.abs(E[:, 0, 0] - ref) / np.abs(ref)))
        rep.add(CheckRecord("fundamental.closed_form", "closed-form Laplacian fundamental solution",
                            err, 1e-8))
    rep.add(CheckRecord("fundamental.even", "E is even", _rel(eval_E(F, -x), E), 1e-10))
    lam = 3.0
    if n == 3:
        hom = _rel(lam * eval_E(F, lam * x), E)
    else:
        hom = _rel(eval_E(F, lam * x) - E, np.broadcast_to(np.log(lam) * F.log_coefficient, E.shape))
    rep.add(CheckRecord("fundamental.homogeneity", "homogeneity of E (log-corrected when n=2)", hom, 1e-10))
    FT = make_evaluator(transpose_system(S), cfg)
    rep.add(CheckRecord("fundamental.transpose", "fundamental solution of the transpose",
                        _rel(eval_E(FT, x[:20]), E[:20].transpose(0, 2, 1)), 1e-10))
    d1 = eval_dE(F, x[:20], unit_index(n, 0))
    d2 = eval_dE(F, 2 * x[:20], unit_index(n, 0))
    rep.add(CheckRecord("fundamental.derivative_homogeneity", "first derivatives homogeneous of degree 1-n",
                        _rel(2.0 ** (n - 1) * d2, d1), 1e-6))
    worst = max(float(np.abs(delta_residual(F, b)).max()) for b in default_bumps(n))
    rep.add(CheckRecord("fundamental.delta", "L E = delta I in the sense of distributions", worst, 1e-3,
                        note="3 bumps"))
    return rep


def _remainder_stability(K, rng, n):
    """Band maxima of ``|R| |x - ybar|^{n-2}`` (n=3) or ``|R| / (1 + |ln|x - ybar||)`` (n=2)."""
    bands = []
    for lo, hi in ((0.1, 1.0), (1.0, 10.0)):
        pts = []
        while len(pts) < 25:
            y = np.concatenate([rng.uniform(-1, 1, n - 1), rng.uniform(0.05, 0.5 * hi, 1)])
            dxy = rng.standard_normal(n)
            dxy *= rng.uniform(lo, hi) / np.linalg.norm(dxy)
            xx = y + dxy
            xx[-1] = abs(xx[-1]) + 1e-3
            dist = np.linalg.norm(xx - np.concatenate([y[:-1], -y[-1:]]))
            if lo <= dist <= hi and np.linalg.norm(xx - y) > 1e-3:
                pts.append((xx, y, dist))
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        ds = np.array([p[2] for p in pts])
        R = np.abs(remainder(K, xs, ys)).reshape(len(xs), -1).max(axis=1)
        scaled = R * ds if n == 3 else R / (1 + np.abs(np.log(ds)))
        bands.append(float(scaled.max()))
    return max(bands) / max(min(bands), 1e-300)


def green_suite(S: EllipticSystem, cfg: QuadratureConfig = DEFAULT_CONFIG, seed: int = 0):
    rep = VerificationReport()
    available, why = poisson_availability(S, cfg)
    if not is_reflection_invariant(S):
        reason = "system is not reflection invariant"
        for cid in ("green.reflection", "green.identities"):
            rep.add(CheckRecord.skip(cid, "reflection-route Green function", f"skipped: {reason}"))
        rep.add(_unavailable("green.convolution", "Poisson-convolution Green function", why))
        return rep
    K = make_kernels(S, "reflection", cfg)
    ident = verify_green_identities(K, GreenSampleSpec(seed=seed))
    for r in ident.records:
        r.check_id = "green." + r.check_id
    rep.extend(ident)
    rng = np.random.default_rng(seed + 7)
    ratio = _remainder_stability(K, rng, S.n)
    rep.add(CheckRecord("green.remainder_bound", "size bound of the remainder near the boundary",
                        ratio, 5.0, note="band-maximum spread"))
    if not available:
        rep.add(_unavailable("green.convolution", "Poisson-convolution Green function", why))
        return rep
    Kc = make_kernels(S, "convolution", cfg, F=K.F)
    x, y = sample_pairs(S.n, GreenSampleSpec(seed=seed + 3))
    rep.add(CheckRecord("green.cross_route", "convolution Green function coincides with the reflection one",
                        _rel(green(Kc, x, y), green(K, x, y)), 1e-3, note=f"{len(x)} pairs"))
    return rep


def poisson_suite(S: EllipticSystem, cfg: QuadratureConfig = DEFAULT_CONFIG, seed: int = 0):
    rep = VerificationReport()
    available, why = poisson_availability(S, cfg)
    if not available:
        rep.add(_unavailable("poisson.kernel", "Poisson kernel", why))
        return rep
    K = make_kernels(S, "reflection", cfg)
    P = poisson_kernel(K)
    n, d = S.n, S.n - 1
    rep.add(CheckRecord("poisson.normalization", "Poisson kernel integrates to the identity",
                        P.normalization_defect, 1e-3))
    rep.add(CheckRecord("poisson.decay", "decay envelope (1+|x'|^2)^(-n/2) with stable constant",
                        P.decay_spread, 3.0, note=f"C={P.decay_constant:.6g}"))
    r = np.linspace(0.0, 10.0, 41)
    if d == 1:
        xp = np.concatenate([-r[::-1], r])[:, None]
    else:
        th = np.linspace(0, 2 * np.pi, 7)[:-1]
        xp = (r[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None]).reshape(-1, 2)
    Pv = P(xp)
    rep.add(CheckRecord("poisson.from_green", "Poisson kernel recovered from the Green function",
                        _rel(poisson_from_green(K, xp), Pv), 1e-6))
    if S.same_operator(laplacian(n)):
        rep.add(CheckRecord("poisson.closed_form", "closed-form Poisson kernel of the Laplacian",
                            float(np.max(np.abs(Pv[:, 0, 0] - laplacian_P(xp, n)))), 1e-6))
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2, 2, (10, d))
    ts = rng.uniform(0.2, 2, 10)
    hom = 0.0
    for lam in (0.5, 3.0):
        hom = max(hom, _rel(lam ** (n - 1) * adn_kernel(P, lam * pts, lam * ts), adn_kernel(P, pts, ts)))
    rep.add(CheckRecord("poisson.adn_homogeneity", "dilation law of the kernel K(x', t)", hom, 1e-8))
    rep.add(CheckRecord("poisson.null_solution", "L K = 0 in the half-space",
                        _adn_residual(P, np.zeros(d), 1.0), 1e-5, note="relative FD residual at (0', 1)"))
    return rep


def _hessian_fd(K, x0, h, n, M):
    I = np.eye(n) * h
    D = np.empty((n, n, M, M), dtype=complex)
    k0 = K(x0)
    for r in range(n):
        D[r, r] = (K(x0 + I[r]) - 2 * k0 + K(x0 - I[r])) / h**2
        for s in range(r + 1, n):
            D[r, s] = D[s, r] = (K(x0 + I[r] + I[s]) - K(x0 + I[r] - I[s])
                                 - K(x0 - I[r] + I[s]) + K(x0 - I[r] - I[s])) / (4 * h * h)
    return D


def _adn_residual(P, xp, t, h=1e-2):
    n, M = P.n, P.system.M
    a = P.system.coeff
    x0 = np.concatenate([xp, [t]])

    def K(x):
        return adn_kernel(P, x[:-1], x[-1])

    # one Richardson step removes the h^2 term of the stencil
    D = (4 * _hessian_fd(K, x0, h, n, M) - _hessian_fd(K, x0, 2 * h, n, M)) / 3
    LK = np.einsum("abrs,rsbc->ac", a, D)
    scale = np.einsum("abrs,rsbc->ac", np.abs(a), np.abs(D))
    return float(np.max(np.abs(LK)) / max(float(np.max(scale)), 1e-300))


def dirichlet_suite(S: EllipticSystem, cfg: QuadratureConfig = DEFAULT_CONFIG, seed: int = 0,
                    domination_samples: int = 12):
    rep = VerificationReport()
    available, why = poisson_availability(S, cfg)
    if not available:
        rep.add(_unavailable("dirichlet.solve", "Poisson-integral solution of the Dirichlet problem", why))
        return rep
    P = poisson_kernel(make_kernels(S, "reflection", cfg))
    n, d, M = S.n, S.n - 1, S.M
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.uniform(-2, 2, (20, d)), rng.uniform(0.3, 2, (20, 1))], 1)

    u = solve(P, constant_datum(d, M))(x)
    rep.add(CheckRecord("dirichlet.constant", "constant data are reproduced",
                        float(np.abs(u - 1).max()), max(P.normalization_defect, 1e-12)))

    s = 1.0
    semi = solve(P, poisson_slice_datum(P, s, 0))(x)
    ref = adn_kernel(P, x[:, :-1], x[:, -1] + s)[:, :, 0]
    rep.add(CheckRecord("dirichlet.semigroup", "P_t * P_s = P_(t+s)", float(np.abs(semi - ref).max()), 1e-5))

    g = gaussian_datum(d, M)
    sol = solve(P, g)
    res = max(residual_L(sol, p, 1e-3, relative=True)[1] for p in x)
    rep.add(CheckRecord("dirichlet.residual", "L u = 0 in the half-space", res, 1e-3,
                        note="relative FD residual, 20 points"))

    g2 = gaussian_datum(d, M, center=np.full(d, 0.5), width=0.7)
    lin = combine(2.0, g, -1.5j, g2)
    lhs = solve(P, lin)(x[:5])
    rhs = 2.0 * sol(x[:5]) - 1.5j * solve(P, g2)(x[:5])
    rep.add(CheckRecord("dirichlet.linearity", "solution operator is linear", _rel(lhs, rhs), 1e-10))

    worst = 0.0
    for p in rng.uniform(-2, 2, (10, d)):
        rec = boundary_trace_check(sol, p, 1.0)
        worst = max(worst, rec.final_gap if rec.certified else float("inf"))
    rep.add(CheckRecord("dirichlet.trace", "nontangential trace equals f at continuity points", worst, 1e-3,
                        note="10 points"))

    second = gaussian_datum(d, M, center=np.eye(d)[0], width=0.5)
    verts = rng.uniform(-3, 3, (domination_samples, d))
    spread = 0.0
    for kappa in (0.5, 1.0, 2.0):
        c1 = domination_constant(sol, verts, kappa)
        c2 = domination_constant(solve(P, second), verts, kappa)
        spread = max(spread, max(c1, c2) / min(c1, c2))
    rep.add(CheckRecord("dirichlet.domination", "N_kappa u <= C M f with one constant",
                        spread, 3.0, note="max over kappa of fitted-constant ratio across two data"))
    return rep


def maximal_suite(n: int, seed: int = 0):
    rep = VerificationReport()
    d = n - 1

    def power(z):
        return (1 + np.linalg.norm(z, axis=1)) ** (1 - n)

    ratios = []
    for r in (0.0, 1.0, 10.0, 100.0):
        xp = np.zeros(d)
        xp[0] = r
        ratios.append(hl_maximal(power, xp) / maximal_bracket(xp, n))
    rep.add(CheckRecord("maximal.bracket", "maximal function of (1+|x'|)^(1-n)",
                        max(ratios) / min(ratios), 20.0, note="C/c over |x'| in {0,1,10,100}"))
    one = hl_maximal(lambda z: np.ones(len(z)), np.zeros(d))
    rep.add(CheckRecord("maximal.constant", "maximal function of a constant", abs(one - 1), 1e-10))
    if d == 1:
        ind = hl_maximal(lambda z: ((z[:, 0] >= 0) & (z[:, 0] <= 1)).astype(float), [2.0], breakpoints=(0, 1))
        rep.add(CheckRecord("maximal.indicator", "maximal function of an interval indicator", abs(ind - 0.25), 1e-6))

    def decay(y):
        return 1.0 / (1.0 + np.linalg.norm(y, axis=1))

    val = nt_max(decay, ConeProbe(np.zeros(d), 1.0))
    rep.add(CheckRecord("maximal.nt_vertex", "nontangential maximum attained near the vertex", abs(val - 1), 1e-3))
    rng = np.random.default_rng(seed)
    mono = 0.0
    for v in rng.uniform(-3, 3, (5, d)):
        a = nt_max(decay, ConeProbe(v, 0.5))
        b = nt_max(decay, ConeProbe(v, 2.0))
        c = nt_max(decay, ConeProbe(v, 2.0), ExcludedRegion.ball(np.concatenate([v, [1.0]]), 0.5))
        mono = max(mono, max(a - b, 0.0), max(c - b, 0.0))
    rep.add(CheckRecord("maximal.monotone", "monotone in aperture and in the excluded set", mono, 0.0))
    return rep


def run_suite(suite: str, S: EllipticSystem, cfg: QuadratureConfig = DEFAULT_CONFIG,
              seed: int = 0) -> VerificationReport:
    if suite not in SUITES:
        raise ValueError(f"suite must be one of {SUITES}")
    chosen = SUITES[:-1] if suite == "all" else (suite,)
    rep = VerificationReport()
    for name in chosen:
        if name == "maximal":
            rep.extend(maximal_suite(S.n, seed))
            continue
        try:
            part = {"fundamental": fundamental_suite, "green": green_suite,
                    "poisson": poisson_suite, "dirichlet": dirichlet_suite}[name](S, cfg, seed)
        except RouteUnavailable as exc:
            part = VerificationReport([_unavailable(f"{name}.route", name, str(exc))])
        except NotWeaklyElliptic as exc:
            part = VerificationReport([CheckRecord(f"{name}.elliptic", "weak ellipticity",
                                                   float("inf"), 0.0, note=str(exc))])
        rep.extend(part)
    return rep
