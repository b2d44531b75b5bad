"""Half-space Dirichlet problem by Poisson convolution, ``u(x', t) = (P_t * f)(x')``.

Evaluation substitutes ``z' = x' - t u`` so the integral runs against the
fixed mapped rule of the Poisson kernel, whose values at the nodes are
precomputed.  One-dimensional data with declared jumps get a per-point rule
whose panels break exactly at the jumps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DatumNotIntegrable, DivergentNorm, StepTooLarge
from .halfspace import PoissonKernel, poisson_values
from .nontangential import (
    ConeProbe,
    hl_maximal,
    nt_max,
    pointwise_size,
    weighted_integral,
    weighted_norms,
)
from .quadrature import mapped_line_rule
from .report import CheckRecord, VerificationReport

DECAY_CLASSES = ("compact_support", "algebraic", "bounded")
_CHUNK = 1_000_000


@dataclass(frozen=True, eq=False)
class BoundaryDatum:
    """Boundary data ``f: R^{n-1} -> C^M`` as a batch callable ``(N, d) -> (N, M)``.

    ``breakpoints`` lists jump locations (d=1); ``sup_norm`` bounds ``|f|``
    and feeds the tail estimate; ``support`` lets the solver skip quadrature
    nodes that cannot reach the data.
    """

    f: Callable
    d: int
    M: int
    decay_class: str = "bounded"
    decay_power: float = 0.0
    sup_norm: float = 1.0
    breakpoints: tuple = ()
    name: str = "datum"
    support: Optional[tuple] = None   # (center, radius) outside which f vanishes to double precision
    weighted_l1_norm: float = field(default=float("nan"))

    def __post_init__(self):
        if self.decay_class not in DECAY_CLASSES:
            raise ValueError(f"decay_class must be one of {DECAY_CLASSES}")
        if np.isnan(self.weighted_l1_norm):
            try:
                w = weighted_norms(self, self.d + 1, self.d, with_maximal=False,
                                   breakpoints=self.breakpoints).weighted_l1
            except DivergentNorm as exc:
                raise DatumNotIntegrable(f"{self.name}: {exc}") from None
            object.__setattr__(self, "weighted_l1_norm", w)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float).reshape(-1, self.d)
        v = np.asarray(self.f(z), dtype=complex)
        return v.reshape(len(z), self.M)

    def continuous_at(self, xp) -> bool:
        xp = np.atleast_1d(np.asarray(xp, dtype=float))
        return all(abs(xp[0] - b) > 1e-12 for b in self.breakpoints)

    def __add__(self, other: "BoundaryDatum") -> "BoundaryDatum":
        return combine(1.0, self, 1.0, other)


def combine(a: complex, f: BoundaryDatum, b: complex, g: BoundaryDatum) -> BoundaryDatum:
    """The datum ``a f + b g``."""
    if (f.d, f.M) != (g.d, g.M):
        raise ValueError("data must share dimension and component count")
    order = [f.decay_class, g.decay_class]
    cls = max(order, key=lambda c: DECAY_CLASSES.index(c))
    return BoundaryDatum(lambda z: a * f(z) + b * g(z), f.d, f.M, cls,
                         min(f.decay_power, g.decay_power),
                         abs(a) * f.sup_norm + abs(b) * g.sup_norm,
                         tuple(sorted(set(f.breakpoints) | set(g.breakpoints))),
                         name=f"{a}*{f.name}+{b}*{g.name}", support=_union(f.support, g.support))


def _union(s1, s2):
    if s1 is None or s2 is None:
        return None
    c1, r1 = s1
    c2, r2 = s2
    return c1, max(r1, float(np.linalg.norm(np.asarray(c2) - c1)) + r2)


def _vec(amplitude, M):
    a = np.asarray(amplitude if amplitude is not None else np.ones(M), dtype=complex).reshape(-1)
    if a.size == 1 and M > 1:
        a = np.full(M, a[0])
    if a.size != M:
        raise ValueError(f"amplitude must have {M} components")
    return a


def constant_datum(d: int, M: int, value=None) -> BoundaryDatum:
    c = _vec(value, M)
    return BoundaryDatum(lambda z: np.broadcast_to(c, (len(z), M)), d, M, "bounded", 0.0,
                         float(np.linalg.norm(c)), name="constant")


def gaussian_datum(d: int, M: int, center=None, width: float = 1.0, amplitude=None) -> BoundaryDatum:
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float).reshape(d)
    a = _vec(amplitude, M)

    def f(z):
        return np.exp(-np.sum((z - c) ** 2, axis=1) / width**2)[:, None] * a

    return BoundaryDatum(f, d, M, "algebraic", np.inf, float(np.linalg.norm(a)), name="gaussian",
                         support=(c, 7.0 * width))


def indicator_datum(d: int, M: int, lower: float = 0.0, upper: float = 1.0, amplitude=None,
                    center=None, radius: Optional[float] = None) -> BoundaryDatum:
    """``1_[lower, upper]`` on the line, or the indicator of a disc when d=2."""
    a = _vec(amplitude, M)
    if d == 1:
        def f(z):
            return ((z[:, 0] >= lower) & (z[:, 0] <= upper)).astype(float)[:, None] * a
        return BoundaryDatum(f, 1, M, "compact_support", np.inf, float(np.linalg.norm(a)),
                             (float(lower), float(upper)), name="indicator",
                             support=(np.array([0.5 * (lower + upper)]), 0.5 * (upper - lower)))
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    rad = 1.0 if radius is None else float(radius)

    def g(z):
        return (np.linalg.norm(z - c, axis=1) <= rad).astype(float)[:, None] * a

    return BoundaryDatum(g, d, M, "compact_support", np.inf, float(np.linalg.norm(a)), name="indicator",
                         support=(c, rad))


def poisson_slice_datum(P: PoissonKernel, s: float = 1.0, column: int = 0) -> BoundaryDatum:
    """Column ``column`` of ``P_s`` as boundary data."""
    n, M = P.n, P.system.M

    def f(z):
        return poisson_values(P.F, z / s)[:, :, column] * s ** (1 - n)

    sup = float(np.abs(poisson_values(P.F, np.zeros(n - 1))).max()) * s ** (1 - n)
    return BoundaryDatum(f, n - 1, M, "algebraic", float(n), sup, name=f"poisson_slice({s})")


def grid_datum(coords: np.ndarray, values: np.ndarray) -> BoundaryDatum:
    """Piecewise-linear data from samples, zero outside the sampled box.

    ``coords`` is ``(N,)`` on the line, or a tuple of two axes for a
    tensor grid with ``values`` of shape ``(len(ax0), len(ax1), M)``.
    """
    values = np.asarray(values, dtype=complex)
    if isinstance(coords, tuple):
        from scipy.interpolate import RegularGridInterpolator

        M = values.shape[-1]
        interp = RegularGridInterpolator(coords, values, bounds_error=False, fill_value=0.0)
        sup = float(np.abs(values).max()) if values.size else 0.0
        lo = np.array([coords[0][0], coords[1][0]])
        hi = np.array([coords[0][-1], coords[1][-1]])
        return BoundaryDatum(lambda z: interp(z), 2, M, "compact_support", np.inf, sup, name="grid",
                             support=(0.5 * (lo + hi), 0.5 * float(np.linalg.norm(hi - lo))))
    x = np.asarray(coords, dtype=float).reshape(-1)
    order = np.argsort(x)
    x, values = x[order], values.reshape(len(x), -1)[order]
    M = values.shape[1]

    def f(z):
        out = np.empty((len(z), M), dtype=complex)
        for k in range(M):
            out[:, k] = np.interp(z[:, 0], x, values[:, k].real, left=0.0, right=0.0) \
                + 1j * np.interp(z[:, 0], x, values[:, k].imag, left=0.0, right=0.0)
        return out

    sup = float(np.abs(values).max()) if values.size else 0.0
    return BoundaryDatum(f, 1, M, "compact_support", np.inf, sup, (float(x[0]), float(x[-1])), name="grid",
                         support=(np.array([0.5 * (x[0] + x[-1])]), 0.5 * float(x[-1] - x[0])))


# -- solution -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Solution:
    P: PoissonKernel
    datum: BoundaryDatum

    @property
    def n(self) -> int:
        return self.P.n

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)[0]

    def u(self, x) -> np.ndarray:
        return self.evaluate(x)[0]

    def evaluate(self, x, with_error: bool = False):
        """Values ``(N, M)`` (or ``(M,)`` for one point) and per-point error estimates."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.n:
            raise ValueError(f"points must have {self.n} coordinates")
        if np.any(x[:, -1] <= 0):
            raise ValueError("evaluation points must lie in the open upper half-space")
        if self.datum.breakpoints and self.datum.d == 1:
            vals, err = self._with_cuts(x, with_error)
        else:
            vals = _apply(self.P.rule, self.P.node_values, self.datum, x)
            err = np.zeros(len(x))
            if with_error:
                other = _apply(self.P.check_rule, self.P.check_values, self.datum, x)
                err = np.abs(vals - other).max(axis=1)
        if with_error:
            err = err + self.tail_bound()
        if single:
            return vals[0], (err[0] if with_error else None)
        return vals, (err if with_error else None)

    def tail_bound(self) -> float:
        return self.P.decay_constant * self.datum.sup_norm * self.P.rule.tail_measure(self.n)

    def _with_cuts(self, x, with_error):
        cfg = self.P.F.config
        vals = np.empty((len(x), self.datum.M), dtype=complex)
        err = np.zeros(len(x))
        for i, (xp, t) in enumerate(zip(x[:, 0], x[:, 1])):
            cuts = (xp - np.asarray(self.datum.breakpoints)) / t
            u, w, _ = mapped_line_rule(cfg.panel_nodes, cfg.graded_panels, cuts)
            Pv = poisson_values(self.P.F, u[:, None])
            fv = self.datum(xp - t * u[:, None])
            vals[i] = np.einsum("q,qab,qb->a", w, Pv, fv)
            if with_error:
                u2, w2, _ = mapped_line_rule(max(4, cfg.panel_nodes // 2), cfg.graded_panels, cuts)
                other = np.einsum("q,qab,qb->a", w2, poisson_values(self.P.F, u2[:, None]),
                                  self.datum(xp - t * u2[:, None]))
                err[i] = float(np.abs(vals[i] - other).max())
        return vals, err


def _apply(rule, Pq, datum, x):
    n = x.shape[1]
    Q = len(rule.u)
    out = np.empty((len(x), datum.M), dtype=complex)
    if datum.support is None:
        need = np.full(len(x), Q)
    else:
        c, rad = datum.support
        reach = (np.linalg.norm(x[:, :-1] - c, axis=1) + rad) / x[:, -1]
        need = np.minimum(np.searchsorted(rule.radii, reach, side="right") + 1, Q)
    order = np.argsort(need, kind="stable")
    lo = 0
    while lo < len(x):
        q = int(need[order[lo]])
        step = max(1, _CHUNK // max(q, 1))
        hi = lo + step
        # upper end of the chunk sets the prefix length
        q = int(need[order[min(hi, len(x)) - 1]])
        idx = order[lo:hi]
        xs = x[idx]
        z = xs[:, None, :-1] - xs[:, None, -1:] * rule.u[None, :q]
        fv = datum(z.reshape(-1, n - 1)).reshape(len(xs), q, datum.M)
        out[idx] = np.einsum("q,qab,pqb->pa", rule.w[:q], Pq[:q], fv)
        lo = hi
    return out


def solve(P: PoissonKernel, f: BoundaryDatum) -> Solution:
    if f.d != P.n - 1 or f.M != P.system.M:
        raise ValueError(f"datum is R^{f.d} -> C^{f.M}, kernel needs R^{P.n - 1} -> C^{P.system.M}")
    if not np.isfinite(f.weighted_l1_norm):
        raise DatumNotIntegrable(f"{f.name}: weighted L1 norm is not finite")
    return Solution(P, f)


# -- checks -------------------------------------------------------------------------

def _second_derivatives(sol: Solution, x, h):
    n = sol.n
    E = np.eye(n) * h
    u0 = sol(x)
    D = np.empty((n, n, sol.datum.M), dtype=complex)
    for r in range(n):
        D[r, r] = (sol(x + E[r]) - 2 * u0 + sol(x - E[r])) / h**2
        for s in range(r + 1, n):
            D[r, s] = D[s, r] = (sol(x + E[r] + E[s]) - sol(x + E[r] - E[s])
                                 - sol(x - E[r] + E[s]) + sol(x - E[r] - E[s])) / (4 * h * h)
    return D


def residual_L(sol: Solution, x, h: float = 1e-3, relative: bool = False):
    """``(L u)(x)`` by second-order central differences with step ``h``.

    With ``relative=True`` returns ``(vector, |Lu| / sum |a||d_r d_s u|)``.
    """
    x = np.asarray(x, dtype=float)
    if h >= x[-1] / 3:
        raise StepTooLarge(f"h={h} must be below x_n/3={x[-1] / 3}")
    D = _second_derivatives(sol, x, h)
    a = sol.P.system.coeff
    vec = np.einsum("abrs,rsb->a", a, D)
    if not relative:
        return vec
    scale = float(np.einsum("abrs,rsb->", np.abs(a), np.abs(D)))
    return vec, float(np.linalg.norm(vec)) / max(scale, 1e-300)


@dataclass(frozen=True)
class TraceRecord:
    x: np.ndarray
    kappa: float
    heights: np.ndarray
    gaps: np.ndarray = field(repr=False)
    certified: bool
    final_gap: float


def boundary_trace_check(sol: Solution, xp, kappa: float = 1.0, levels: int = 12,
                         trace_tol: float = 1e-3) -> TraceRecord:
    """Gaps ``|u(y) - f(x')|`` along cone points ``y = (x' + (kappa/2) t e_1, t)``, ``t = 2^{-k}``.

    Certified when the final gap is below ``trace_tol`` and the last four
    gaps do not increase beyond the quadrature noise floor.
    """
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    t = 0.5 ** np.arange(1, levels + 1)
    pts = np.zeros((levels, sol.n))
    pts[:, :-1] = xp
    pts[:, 0] += 0.5 * kappa * t
    pts[:, -1] = t
    vals, err = sol.evaluate(pts, with_error=True)
    fx = sol.datum(xp[None])[0]
    gaps = np.linalg.norm(vals - fx, axis=1)
    noise = 10 * float(np.max(err)) + 1e-12
    tail = gaps[-4:]
    monotone = bool(np.all(tail[1:] <= tail[:-1] + noise))
    return TraceRecord(xp, kappa, t, gaps, monotone and gaps[-1] < trace_tol, float(gaps[-1]))


def domination_constant(sol: Solution, vertices, kappa: float, probe_levels: int = 12,
                        probe_samples: int = 8) -> float:
    """``max_x' N_kappa u(x') / M f(x')`` over the given vertices."""
    ratios = []
    for v in vertices:
        probe = ConeProbe(np.atleast_1d(v), kappa, radial_levels=probe_levels,
                          angular_samples=probe_samples)
        N = nt_max(sol, probe)
        Mf = hl_maximal(sol.datum, v, breakpoints=sol.datum.breakpoints, angular=128)
        ratios.append(N / Mf)
    return float(max(ratios))


def well_posedness_check(sol: Solution, kappa: float = 1.0, samples: int = 6, seed: int = 0,
                         tol: float = 1e-3) -> VerificationReport:
    """The three conditions of the well-posed Dirichlet problem for weight exponent n.

    Null solution (relative FD residual), finiteness of the weighted integral
    of ``N_kappa u``, and nontangential trace at continuity points; the datum's
    membership in the maximal-function class is recorded first.
    """
    n, d = sol.n, sol.n - 1
    rep = VerificationReport()
    try:
        z = weighted_norms(sol.datum, n, d, breakpoints=sol.datum.breakpoints).z_norm
        rep.add(CheckRecord("datum_class", "maximal function of f in weighted L1", 0.0, tol,
                            note=f"z_norm={z:.6g}"))
    except DivergentNorm as exc:
        rep.add(CheckRecord("datum_class", "maximal function of f in weighted L1",
                            float("inf"), tol, note=str(exc)))
        return rep
    rng = np.random.default_rng(seed)
    pts = np.concatenate([rng.uniform(-2, 2, (samples, d)), rng.uniform(0.3, 2, (samples, 1))], 1)
    res = max(residual_L(sol, p, 1e-3, relative=True)[1] for p in pts)
    rep.add(CheckRecord("null_solution", "L u = 0 in the half-space", res, tol))

    def nt(zs):
        out = []
        for zz in zs:
            probe = ConeProbe(zz, kappa, radial_levels=12, angular_samples=8 if d == 1 else 16)
            out.append(nt_max(sol, probe))
        return np.array(out)

    try:
        val = weighted_integral(nt, d, n, p=4, angular=8, rel_tol=1e-2)
        rep.add(CheckRecord("nt_integrable", "weighted integral of N_kappa u is finite", 0.0, tol,
                            note=f"integral={val:.6g}"))
    except DivergentNorm as exc:
        rep.add(CheckRecord("nt_integrable", "weighted integral of N_kappa u is finite",
                            float("inf"), tol, note=str(exc)))
    worst = 0.0
    for p in pts[:, :-1]:
        if sol.datum.continuous_at(p):
            rec = boundary_trace_check(sol, p, kappa)
            worst = max(worst, rec.final_gap if rec.certified else float("inf"))
    rep.add(CheckRecord("trace", "nontangential boundary trace equals f", worst, tol))
    return rep
