"""Half-space Green function, Poisson kernel and their identities.

Two constructions of ``G^L`` are offered.  The reflection route
``G(x, y) = E(x - y) - E(x - ybar)`` is exact for reflection-invariant
systems.  The convolution route replaces the image term by the Poisson
extension of the boundary values of ``E(. - y)``:

    G(x, y) = E(x - y) - int P_t(x' - z') E((z', 0) - y) dz',

and is used to cross-check the first one.  The Poisson kernel itself is
``P(x') = -d_{y_n} G((x', 1), y) |_{y=0} A`` with ``A[beta, alpha] =
a^{beta alpha}_{nn}``; on reflection-invariant systems this reduces to
``2 (d_n E)(x', 1) A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import DEFAULT_CONFIG, QuadratureConfig
from .errors import (
    CoincidentPoints,
    NonpositiveT,
    NotInHalfSpace,
    RouteUnavailable,
)
from .fundamental import (
    FundamentalEvaluator,
    delta_residual,
    eval_dE,
    eval_dE_with_error,
    eval_E,
    make_evaluator,
    operator_on_bump,
)
from .nontangential import ConeProbe, ExcludedRegion, nt_max
from .quadrature import Bump, MappedPlaneRule, gauss_panels, graded_edges, sphere_rule
from .report import CheckRecord, VerificationReport
from .system import (
    EllipticSystem,
    classify,
    is_reflection_invariant,
    reflect,
    transpose_system,
)

ROUTES = ("reflection", "convolution")

# beyond this |x'| the Poisson kernel is taken from the second normal derivative of E on the boundary
FAR_FIELD_RADIUS = 1e3


def _as_pairs(x, y, n):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scalar = x.ndim == 1 and y.ndim == 1
    x, y = np.broadcast_arrays(np.atleast_2d(x), np.atleast_2d(y))
    if x.shape[-1] != n:
        raise ValueError(f"points must have {n} coordinates")
    if np.any(x[:, -1] <= 0) or np.any(y[:, -1] <= 0):
        raise NotInHalfSpace("both points must satisfy x_n > 0")
    sep = np.linalg.norm(x - y, axis=1)
    if np.any(sep <= 1e-14 * np.maximum(1.0, np.linalg.norm(x, axis=1))):
        raise CoincidentPoints("G(x, y) is singular at x = y")
    return x, y, scalar


@dataclass(frozen=True, eq=False)
class PoissonKernel:
    """``P^L`` for a reflection-invariant, Legendre-Hadamard system.

    ``integral`` is the quadrature value of ``int P``; ``normalization_defect``
    bounds ``|int P - I|`` and includes the quadrature disagreement between
    two rules and the analytic tail past the rule's outer radius, using the
    fitted envelope ``|P(x')| <= decay_constant (1 + |x'|^2)^{-n/2}``.
    """

    system: EllipticSystem
    F: FundamentalEvaluator
    rule: MappedPlaneRule
    node_values: np.ndarray = field(repr=False)
    check_rule: MappedPlaneRule = field(repr=False)
    check_values: np.ndarray = field(repr=False)
    integral: np.ndarray = field(repr=False)
    normalization_defect: float = 0.0
    decay_constant: float = 0.0
    decay_spread: float = 1.0
    tail_bound: float = 0.0

    @property
    def n(self) -> int:
        return self.system.n

    def __call__(self, xp) -> np.ndarray:
        return poisson_values(self.F, xp)

    def values(self, xp) -> np.ndarray:
        return poisson_values(self.F, xp)


def _boundary_points(xp, d):
    """Accept one point of R^d, an ``(N, d)`` batch, or (d=1) a flat array of abscissae."""
    xp = np.asarray(xp, dtype=float)
    single = xp.ndim == 0 or (xp.ndim == 1 and xp.size == d)
    return xp.reshape(-1, d), single


def poisson_values(F: FundamentalEvaluator, xp) -> np.ndarray:
    """``2 (d_n E)(x', 1) A``, switching to ``2 |x'|^{-n} (d_n^2 E)(x'/|x'|, 0) A`` in the far field."""
    return poisson_values_and_errors(F, xp)[0]


def poisson_values_and_errors(F: FundamentalEvaluator, xp):
    """Values of ``P`` with the difference-quotient error estimate carried through."""
    n = F.n
    xp, scalar = _boundary_points(xp, n - 1)
    A = F.system.normal_block
    a_norm = float(np.linalg.norm(A, ord=2))
    r = np.linalg.norm(xp, axis=1)
    out = np.empty((len(xp), F.M, F.M), dtype=complex)
    err = np.empty(len(xp))
    near = r <= FAR_FIELD_RADIUS
    en = [0] * n
    en[-1] = 1
    if np.any(near):
        pts = np.concatenate([xp[near], np.ones((near.sum(), 1))], 1)
        v, e = eval_dE_with_error(F, pts, tuple(en))
        out[near] = 2 * v @ A
        err[near] = 2 * a_norm * e
    if np.any(~near):
        far = ~near
        dirs = xp[far] / r[far, None]
        v, e = _odd_expansion(F, dirs)
        rf = r[far]
        scale = 2 * rf ** (-n)
        coef = v[0] + v[1] / rf[:, None, None] ** 2
        out[far] = scale[:, None, None] * (coef @ A)
        err[far] = scale * a_norm * (e[0] + e[1] / rf**2 + np.abs(v[2]).max(axis=(1, 2)) / rf**4)
    if scalar:
        return out[0], err[0]
    return out, err


def _odd_expansion(F: FundamentalEvaluator, dirs, s=0.05):
    """Coefficients of ``d_n E(w, h) = a h + b h^3 + c h^5 + ...`` for unit tangential ``w``.

    Reflection invariance makes ``E`` even in ``x_n``, so ``d_n E`` is odd.
    ``a`` is the second normal derivative on the plane; ``b`` and ``c`` come
    from samples at heights ``s`` and ``2 s``.
    """
    n = F.n
    k = len(dirs)
    base = np.concatenate([dirs, np.zeros((k, 1))], 1)
    g2 = [0] * n
    g2[-1] = 2
    a, ea = eval_dE_with_error(F, base, tuple(g2))
    g1 = [0] * n
    g1[-1] = 1
    up = np.zeros(n)
    up[-1] = s
    pts = np.concatenate([base + up, base + 2 * up])
    h, eh = eval_dE_with_error(F, pts, tuple(g1))
    d1 = h[:k] / s - a
    d2 = h[k:] / (2 * s) - a
    b = (16 * d1 - d2) / (12 * s**2)
    c = (d2 - 4 * d1) / (12 * s**4)
    eb = (16 * (eh[:k] / s + ea) + eh[k:] / (2 * s) + ea) / (12 * s**2)
    return (a, b, c), (ea, eb)


def _fit_decay(F, d):
    r = np.geomspace(1.0, 100.0, 24)
    if d == 1:
        pts = np.concatenate([r, -r])[:, None]
    else:
        th = 2 * np.pi * np.arange(8) / 8
        pts = (r[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None]).reshape(-1, 2)
    rr = np.linalg.norm(pts, axis=1)
    vals = np.abs(poisson_values(F, pts)).reshape(len(pts), -1).max(axis=1)
    prod = vals * (1 + rr**2) ** ((d + 1) / 2)
    per_radius = prod.reshape(-1, len(r)).max(axis=0) if d == 1 else prod.reshape(len(r), -1).max(axis=1)
    return float(per_radius.max()), float(per_radius.max() / max(per_radius.min(), 1e-300))


def build_poisson_kernel(F: FundamentalEvaluator) -> PoissonKernel:
    S, cfg = F.system, F.config
    d = S.n - 1
    rule = MappedPlaneRule.build(d, cfg.panel_nodes, cfg.graded_panels, cfg.angular_nodes)
    check = MappedPlaneRule.build(d, max(4, cfg.panel_nodes // 2), cfg.graded_panels,
                                  max(8, cfg.angular_nodes // 2))
    vals = poisson_values(F, rule.u)
    cvals = poisson_values(F, check.u)
    integral = np.einsum("q,qab->ab", rule.w, vals)
    other = np.einsum("q,qab->ab", check.w, cvals)
    C, spread = _fit_decay(F, d)
    tail = C * rule.tail_measure(S.n)
    defect = float(np.max(np.abs(integral - np.eye(S.M))) + np.max(np.abs(integral - other)) + tail)
    return PoissonKernel(S, F, rule, vals, check, cvals, integral, defect, C, spread, tail)


@dataclass(frozen=True, eq=False)
class HalfSpaceKernels:
    system: EllipticSystem
    F: FundamentalEvaluator
    route: str
    poisson_available: bool
    cfg: QuadratureConfig
    poisson: Optional[PoissonKernel] = field(default=None, repr=False)
    e_sup: float = 0.0

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def M(self) -> int:
        return self.system.M


def poisson_availability(S: EllipticSystem, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """``(available, reason)``: a Poisson kernel is built only for reflection-invariant LH systems."""
    if not is_reflection_invariant(S):
        return False, "system is not reflection invariant; no Poisson kernel formula"
    if not classify(S, cfg).legendre_hadamard:
        return False, "system is not Legendre-Hadamard elliptic; Poisson kernel undefined"
    return True, ""


def make_kernels(S: EllipticSystem, route: str = "reflection",
                 cfg: QuadratureConfig = DEFAULT_CONFIG,
                 F: Optional[FundamentalEvaluator] = None) -> HalfSpaceKernels:
    if route not in ROUTES:
        raise ValueError(f"route must be one of {ROUTES}")
    F = F or make_evaluator(S, cfg)
    available, why = poisson_availability(S, cfg)
    if route == "reflection" and not is_reflection_invariant(S):
        raise RouteUnavailable("reflection route needs a reflection-invariant system")
    poisson = None
    if route == "convolution":
        if not available:
            raise RouteUnavailable(f"convolution route: {why}")
        poisson = build_poisson_kernel(F)
    dirs, _ = sphere_rule(S.n, 64)
    e_sup = float(np.abs(eval_E(F, dirs)).max())
    return HalfSpaceKernels(S, F, route, available, cfg, poisson, e_sup)


def poisson_kernel(K: HalfSpaceKernels) -> PoissonKernel:
    if not K.poisson_available:
        raise RouteUnavailable(poisson_availability(K.system, K.cfg)[1])
    return K.poisson if K.poisson is not None else build_poisson_kernel(K.F)


def adn_kernel(P: PoissonKernel, xp, t) -> np.ndarray:
    """``K(x', t) = t^{1-n} P(x'/t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise NonpositiveT("t must be positive")
    pts, single = _boundary_points(xp, P.n - 1)
    tt = np.broadcast_to(t.reshape(-1), (len(pts),)) if t.size == 1 else t.reshape(-1)
    vals = poisson_values(P.F, pts / tt[:, None]) * (tt ** (1 - P.n))[:, None, None]
    return vals[0] if single and t.size == 1 else vals


# -- Green function -------------------------------------------------------------------

def green_reflection(K: HalfSpaceKernels, x, y) -> np.ndarray:
    if not is_reflection_invariant(K.system):
        raise RouteUnavailable("reflection route needs a reflection-invariant system")
    x, y, scalar = _as_pairs(x, y, K.n)
    G = eval_E(K.F, x - y) - eval_E(K.F, x - reflect(y))
    return G[0] if scalar else G


def _image_convolution(K: HalfSpaceKernels, x, y, with_error=False):
    """``int P(u) E((x' - t u, 0) - y) du`` for each pair; optionally with an error estimate."""
    P = K.poisson
    n, d = K.n, K.n - 1
    out = np.empty((len(x), K.M, K.M), dtype=complex)
    err = np.zeros(len(x))
    for i in range(len(x)):
        xp, t = x[i, :d], x[i, -1]
        z = np.concatenate([xp - t * P.rule.u, np.zeros((len(P.rule.u), 1))], 1)
        Ez = eval_E(K.F, z - y[i])
        out[i] = np.einsum("q,qab,qbc->ac", P.rule.w, P.node_values, Ez)
        if with_error:
            zc = np.concatenate([xp - t * P.check_rule.u, np.zeros((len(P.check_rule.u), 1))], 1)
            Ec = eval_E(K.F, zc - y[i])
            other = np.einsum("q,qab,qbc->ac", P.check_rule.w, P.check_values, Ec)
            rho = t * P.rule.u_max
            if n == 3:
                e_far = K.e_sup / max(rho - np.linalg.norm(y[i]), 1.0)
            else:
                e_far = K.e_sup + float(np.abs(K.F.log_coefficient).max()) * np.log(rho + np.linalg.norm(y[i]))
            tail = P.decay_constant * e_far * P.rule.tail_measure(n)
            err[i] = float(np.max(np.abs(out[i] - other))) + tail
    return out, err


def green_convolution(K: HalfSpaceKernels, x, y, with_error: bool = False):
    if K.route != "convolution" or K.poisson is None:
        raise RouteUnavailable("kernels were not built for the convolution route")
    x, y, scalar = _as_pairs(x, y, K.n)
    R, err = _image_convolution(K, x, y, with_error)
    G = eval_E(K.F, x - y) - R
    if with_error:
        return (G[0], err[0]) if scalar else (G, err)
    return G[0] if scalar else G


def green(K: HalfSpaceKernels, x, y) -> np.ndarray:
    """``G^L(x, y)`` by the route the kernels were built for."""
    if K.route == "convolution":
        return green_convolution(K, x, y)
    return green_reflection(K, x, y)


def remainder(K: HalfSpaceKernels, x, y) -> np.ndarray:
    """``R(x, y) = E(x - y) - G(x, y)``."""
    if K.route == "convolution":
        xx, yy, scalar = _as_pairs(x, y, K.n)
        if K.poisson is None:
            raise RouteUnavailable("kernels were not built for the convolution route")
        R, _ = _image_convolution(K, xx, yy)
        return R[0] if scalar else R
    if not is_reflection_invariant(K.system):
        raise RouteUnavailable("reflection route needs a reflection-invariant system")
    xx, yy, scalar = _as_pairs(x, y, K.n)
    R = eval_E(K.F, xx - reflect(yy))
    return R[0] if scalar else R


def poisson_from_green(K: HalfSpaceKernels, xp, steps=(1e-2, 5e-3, 2.5e-3)) -> np.ndarray:
    """``-d_{y_n} G((x', 1), y)|_{y=0} A`` from difference quotients ``G((x',1), (0', h))/h``.

    The quotient is even in ``h``, so two Richardson sweeps with factors 4
    and 16 remove the ``h^2`` and ``h^4`` terms.
    """
    if not is_reflection_invariant(K.system):
        raise RouteUnavailable("Poisson recovery uses the reflection-route Green function")
    n = K.n
    xp = np.asarray(xp, dtype=float).reshape(-1, n - 1)
    x = np.concatenate([xp, np.ones((len(xp), 1))], 1)
    D = []
    for h in steps:
        y = np.zeros(n)
        y[-1] = h
        D.append(green_reflection(K, x, np.broadcast_to(y, x.shape)) / h)
    table = D
    for fac in (4.0, 16.0)[: len(steps) - 1]:
        table = [table[j] + (table[j] - table[j - 1]) / (fac - 1) for j in range(1, len(table))]
    return -table[-1] @ K.system.normal_block


# -- identity suite -------------------------------------------------------------------

ANCHORS = {
    "transposition": "Green function of the transpose is the transposed Green function",
    "symmetry": "reflection-invariant Green function is symmetric in its arguments",
    "translation": "translation invariance in the tangential variables",
    "homogeneity": "positive homogeneity of the Green function",
    "delta": "distributional identity L G(., y) = delta_y I in the half-space",
    "boundary": "vanishing boundary trace of G(., y)",
    "nt_decay": "nontangential maximal decay of G(., y) away from its pole",
}


@dataclass(frozen=True)
class GreenSampleSpec:
    pairs: int = 50
    seed: int = 0
    box: float = 2.0
    height: tuple = (0.2, 2.0)
    min_separation: float = 0.2
    bumps: int = 3
    nt_vertices: tuple = (2.0, 5.0, 10.0, 20.0, 50.0)
    nt_radial_levels: int = 40
    boundary_eps: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


def sample_pairs(n: int, spec: GreenSampleSpec = GreenSampleSpec()):
    rng = np.random.default_rng(spec.seed)
    xs, ys = [], []
    while len(xs) < spec.pairs:
        x = np.concatenate([rng.uniform(-spec.box, spec.box, n - 1), rng.uniform(*spec.height, 1)])
        y = np.concatenate([rng.uniform(-spec.box, spec.box, n - 1), rng.uniform(*spec.height, 1)])
        if np.linalg.norm(x - y) >= spec.min_separation:
            xs.append(x)
            ys.append(y)
    return np.array(xs), np.array(ys)


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(b))), 1e-300))


def _interior_bump_rule(bump: Bump, n: int, panels=8, p=8, levels=6):
    """Polar nodes about the bump centre, radially graded toward the support edge."""
    inner = bump.radius - graded_edges(0.0, bump.radius, levels)[::-1]
    edges = np.unique(np.concatenate([np.linspace(0.0, inner[1], panels + 1), inner[1:]]))
    r, wr = gauss_panels(edges, p)
    dirs, dw = sphere_rule(n, 24 if n == 2 else 8)
    pts = bump.center + r[:, None, None] * dirs[None]
    w = (wr * r ** (n - 1))[:, None] * dw[None]
    return pts.reshape(-1, n), w.ravel()


def green_delta_residual(K: HalfSpaceKernels, y, bump: Bump) -> np.ndarray:
    """``int (L^T phi) G(., y) dx - phi(y) I`` for a bump supported in the half-space.

    The singular part ``E(x - y)`` goes through the polar pairing about the
    pole; the smooth remainder is integrated with a rule centred on the bump.
    """
    y = np.asarray(y, dtype=float)
    shifted = Bump(bump.center - y, bump.radius)
    singular = delta_residual(K.F, shifted)
    pts, w = _interior_bump_rule(bump, K.n)
    T = operator_on_bump(K.system, bump, pts)
    inside = np.abs(T).reshape(len(T), -1).max(axis=1) > 0
    R = remainder(K, pts[inside], np.broadcast_to(y, pts[inside].shape))
    smooth = np.einsum("q,qga,qab->gb", w[inside], T[inside], R)
    return singular - smooth


def _test_bumps(n, ys, count):
    bumps = []
    for j, y in enumerate(ys[:count]):
        c = y.copy()
        c[0] += 0.05 * (j - 1)
        c[-1] += 0.03 * j
        rho = 0.8 * c[-1]
        bumps.append((y, Bump(c, rho)))
    return bumps


def verify_green_identities(K: HalfSpaceKernels, spec: GreenSampleSpec = GreenSampleSpec(),
                            tol: float = 1e-3) -> VerificationReport:
    n, S = K.n, K.system
    rep = VerificationReport()
    x, y = sample_pairs(n, spec)
    G = green(K, x, y)

    KT = make_kernels(transpose_system(S), K.route, K.cfg)
    GT = green(KT, y, x).transpose(0, 2, 1)
    rep.add(CheckRecord("transposition", ANCHORS["transposition"], _rel(G, GT), tol))
    if is_reflection_invariant(S):
        rep.add(CheckRecord("symmetry", ANCHORS["symmetry"], _rel(G, green(K, y, x)), tol))

    rng = np.random.default_rng(spec.seed + 1)
    shift = np.zeros((len(x), n))
    shift[:, :-1] = rng.uniform(-3, 3, (len(x), n - 1))
    rep.add(CheckRecord("translation", ANCHORS["translation"],
                        _rel(green(K, x + shift, y + shift), G), tol))

    hom = 0.0
    for lam in (0.5, 2.0, 4.0):
        hom = max(hom, _rel(lam ** (n - 2) * green(K, lam * x, lam * y), G))
    if n == 2:
        def d1(xx, yy, hstep=1e-3):
            e = np.zeros(n)
            e[0] = hstep
            a = green(K, xx + e, yy) - green(K, xx - e, yy)
            b = green(K, xx + 2 * e, yy) - green(K, xx - 2 * e, yy)
            return (8 * a - b) / (12 * hstep)
        base = d1(x[:10], y[:10])
        for lam in (0.5, 2.0):
            hom = max(hom, _rel(lam * d1(lam * x[:10], lam * y[:10], 1e-3 * lam), base))
    rep.add(CheckRecord("homogeneity", ANCHORS["homogeneity"], hom, tol,
                        note="G degree 2-n" + ("; d_1 G degree -1" if n == 2 else "")))

    delta = 0.0
    for yy, b in _test_bumps(n, y, spec.bumps):
        delta = max(delta, float(np.abs(green_delta_residual(K, yy, b)).max()))
    rep.add(CheckRecord("delta", ANCHORS["delta"], delta, tol, note=f"{spec.bumps} bumps"))

    zp = np.zeros((8, n))
    zp[:, :-1] = np.linspace(-2, 2, 8)[:, None]
    ypole = np.zeros(n)
    ypole[-1] = 1.0
    sizes = []
    for eps in spec.boundary_eps:
        pts = zp.copy()
        pts[:, -1] = eps
        sizes.append(float(np.abs(green(K, pts, np.broadcast_to(ypole, pts.shape))).max()))
    monotone = all(b < a for a, b in zip(sizes[:-1], sizes[1:]))
    ratio = sizes[-1] / max(sizes[0], 1e-300)
    rep.add(CheckRecord("boundary", ANCHORS["boundary"], ratio if monotone else float("inf"), tol,
                        note=f"eps down to {spec.boundary_eps[-1]:g}"))

    excl = ExcludedRegion.ball(ypole, 0.5)

    def u(pts):
        return green(K, pts, np.broadcast_to(ypole, pts.shape))

    nts = []
    for v in spec.nt_vertices:
        vertex = np.zeros(n - 1)
        vertex[0] = v
        probe = ConeProbe(vertex, 1.0, radial_levels=spec.nt_radial_levels)
        nts.append(nt_max(u, probe, excl))
    slope = float(np.polyfit(np.log(spec.nt_vertices), np.log(nts), 1)[0])
    rep.add(CheckRecord("nt_decay", ANCHORS["nt_decay"], slope + (n - 1), 0.1,
                        note=f"fitted exponent {slope:.4f}"))
    return rep
