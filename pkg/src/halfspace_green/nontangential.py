"""Cones, nontangential maximal functions and limits, and the Hardy-Littlewood maximal operator.

Functions handed to this module are batch callables: ``u`` maps an
``(N, n)`` array of points in the upper half-space to ``(N,)``, ``(N, M)`` or
``(N, M, M)`` values, and boundary data ``f`` map ``(N, n-1)`` arrays the
same way.  Sizes are measured with the Euclidean (Frobenius) norm of the
value at each point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DivergentNorm, EmptyCone
from .quadrature import gauss_panels


def pointwise_size(values) -> np.ndarray:
    v = np.asarray(values)
    if v.ndim == 1:
        return np.abs(v)
    return np.sqrt(np.sum(np.abs(v.reshape(len(v), -1)) ** 2, axis=1))


def _slope_lattice(d: int, step: float, kappa: float) -> np.ndarray:
    """Lattice ``step * Z^d`` cut to the open ball of radius ``kappa``."""
    k = int(np.ceil(kappa / step))
    ax = step * np.arange(-k, k + 1)
    if d == 1:
        pts = ax[:, None]
    else:
        g = np.meshgrid(*([ax] * d), indexing="ij")
        pts = np.stack([a.ravel() for a in g], -1)
    return pts[np.linalg.norm(pts, axis=1) < kappa]


@dataclass(frozen=True)
class ConeProbe:
    """Truncated cone ``{(y', t): |x' - y'| < kappa t, t_min <= t <= t_max}`` and its sample grid.

    Heights are ``radial_levels`` geometric levels.  Each cross-section is
    ``vertex + t * s`` for slopes ``s`` on a fixed lattice in the aperture
    ball, with lattice step chosen so that ``kappa = 1`` yields roughly
    ``angular_samples`` slopes.  Because the lattice does not depend on
    ``kappa``, widening the aperture or removing an exclusion only ever adds
    grid points.
    """

    vertex: np.ndarray
    kappa: float = 1.0
    t_min: float = 1e-4
    t_max: float = 1e3
    radial_levels: int = 40
    angular_samples: int = 64

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.vertex, dtype=float))
        object.__setattr__(self, "vertex", v)
        if self.kappa <= 0:
            raise ValueError("aperture must be positive")
        if not 0 < self.t_min < self.t_max:
            raise ValueError("need 0 < t_min < t_max")
        if self.radial_levels < 2 or self.angular_samples < 1:
            raise ValueError("grid too coarse")

    @property
    def d(self) -> int:
        return len(self.vertex)

    @property
    def slope_step(self) -> float:
        if self.d == 1:
            return 2.0 / self.angular_samples
        return float(np.sqrt(np.pi / self.angular_samples))

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        t = pts[:, -1]
        return (np.linalg.norm(pts[:, :-1] - self.vertex, axis=1) < self.kappa * t) & (t > 0)

    def heights(self) -> np.ndarray:
        return np.geomspace(self.t_min, self.t_max, self.radial_levels)

    def grid(self) -> np.ndarray:
        slopes = _slope_lattice(self.d, self.slope_step, self.kappa)
        t = self.heights()
        xs = self.vertex + t[:, None, None] * slopes[None, :, :]
        tt = np.broadcast_to(t[:, None, None], xs.shape[:2] + (1,))
        return np.concatenate([xs, tt], -1).reshape(-1, self.d + 1)

    def refined(self) -> "ConeProbe":
        """A probe whose grid contains this one."""
        return ConeProbe(self.vertex, self.kappa, self.t_min, self.t_max,
                         2 * self.radial_levels - 1,
                         self.angular_samples * (2 if self.d == 1 else 4))

    def describe(self) -> dict:
        return {"vertex": self.vertex.tolist(), "kappa": self.kappa, "t_min": self.t_min,
                "t_max": self.t_max, "radial_levels": self.radial_levels,
                "slope_step": self.slope_step, "points": int(len(self.grid()))}


@dataclass(frozen=True)
class ExcludedRegion:
    """Nothing (``kind='none'``) or a closed ball removed from the cone."""

    kind: str = "none"
    center: Optional[np.ndarray] = None
    radius: float = 0.0

    @classmethod
    def ball(cls, center, radius: float) -> "ExcludedRegion":
        return cls("closed_ball", np.asarray(center, dtype=float), float(radius))

    def __post_init__(self):
        if self.kind not in ("none", "closed_ball"):
            raise ValueError(f"unknown excluded region {self.kind!r}")
        if self.kind == "closed_ball" and (self.center is None or self.radius < 0):
            raise ValueError("closed_ball needs a center and a nonnegative radius")

    def keep(self, pts) -> np.ndarray:
        if self.kind == "none":
            return np.ones(len(pts), dtype=bool)
        return np.linalg.norm(pts - self.center, axis=1) > self.radius


NO_EXCLUSION = ExcludedRegion()


def nt_max(u: Callable, probe: ConeProbe, excl: ExcludedRegion = NO_EXCLUSION) -> float:
    """Grid supremum of ``|u|`` over the truncated cone minus ``excl``."""
    pts = probe.grid()
    pts = pts[excl.keep(pts)]
    if len(pts) == 0:
        raise EmptyCone("the excluded region covers every grid point of the cone")
    return float(np.max(pointwise_size(u(pts))))


@dataclass(frozen=True)
class NTLimit:
    value: np.ndarray
    oscillation: float
    certified: bool
    heights: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)


def nt_limit(u: Callable, probe: ConeProbe, levels: int = 20, limit_tol: float = 1e-3,
             t_start: float = 1.0) -> NTLimit:
    """Limit of ``u`` along ``(x' + (kappa/2) t e_1, t)`` with ``t = t_start 2^{-k}``.

    The returned value is the linear extrapolation of the last two samples;
    the certificate requires the last five samples to stay within
    ``limit_tol`` of it.
    """
    t = t_start * 0.5 ** np.arange(levels)
    pts = np.zeros((levels, probe.d + 1))
    pts[:, :-1] = probe.vertex
    pts[:, 0] += 0.5 * probe.kappa * t
    pts[:, -1] = t
    vals = np.asarray(u(pts))
    limit = 2 * vals[-1] - vals[-2]
    tail = vals[-5:] - limit
    osc = float(np.max(pointwise_size(np.asarray(tail).reshape(len(tail), -1))))
    return NTLimit(limit, osc, bool(np.all(np.isfinite(vals)) and osc <= limit_tol), t, vals)


# -- Hardy-Littlewood maximal function ------------------------------------------

def _ball_mean(f, x, r, breakpoints=(), panels=8, p=16, angular=32):
    """Mean of ``|f|`` over ``B(x, r)`` in R^d, d in {1, 2}."""
    d = len(x)
    if d == 1:
        inner = [b for b in breakpoints if x[0] - r < b < x[0] + r]
        edges = np.unique(np.concatenate([np.linspace(x[0] - r, x[0] + r, panels + 1), inner]))
        z, w = gauss_panels(edges, p)
        return float(np.sum(w * pointwise_size(f(z[:, None])))) / (2 * r)
    rho, wr = gauss_panels(np.linspace(0.0, r, panels + 1), p)
    th = 2 * np.pi * (np.arange(angular) + 0.5) / angular
    pts = x + (rho[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None])
    vals = pointwise_size(f(pts.reshape(-1, 2))).reshape(len(rho), angular)
    return float(np.sum((wr * rho)[:, None] * vals) * (2 * np.pi / angular)) / (np.pi * r * r)


def hl_maximal(f: Callable, x, r_max: float = 1e3, levels: int = 60, r_min: float = 1e-3,
               breakpoints: Sequence[float] = (), refine: bool = True, angular: int = 32) -> float:
    """Sup of ball averages of ``|f|`` over radii in ``[r_min, r_max]``.

    The geometric radius grid is followed by a bounded scalar search around
    the best grid radius; ``breakpoints`` (d=1) mark jumps of ``f``.  In the
    plane, ``angular`` must resolve the angle that features of ``f`` subtend
    from ``x``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    radii = np.geomspace(r_min, r_max, levels)
    means = np.array([_ball_mean(f, x, r, breakpoints, angular=angular) for r in radii])
    k = int(np.argmax(means))
    best = means[k]
    if refine:
        lo = np.log(radii[max(k - 1, 0)])
        hi = np.log(radii[min(k + 1, levels - 1)])
        res = minimize_scalar(lambda s: -_ball_mean(f, x, np.exp(s), breakpoints, angular=angular),
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
        best = max(best, -float(res.fun))
    return float(best)


def maximal_bracket(x, n: int) -> float:
    """``(1 + log_+ |x'|) / (1 + |x'|^{n-1})``, the size of ``M[(1+|.|)^{1-n}]``."""
    r = float(np.linalg.norm(np.atleast_1d(x)))
    return (1.0 + max(0.0, np.log(r) if r > 0 else 0.0)) / (1.0 + r ** (n - 1))


# -- weighted norms -------------------------------------------------------------------

@dataclass(frozen=True)
class WeightedNorms:
    weighted_l1: float
    z_norm: Optional[float]

    def to_dict(self) -> dict:
        return {"weighted_l1": self.weighted_l1, "z_norm": self.z_norm}


def _shell_rule(d, a, b, p, angular):
    if d == 1:
        z, w = gauss_panels(np.array([a, b]), p)
        return np.concatenate([z, -z])[:, None], np.concatenate([w, w])
    rho, wr = gauss_panels(np.array([a, b]), p)
    th = 2 * np.pi * (np.arange(angular) + 0.5) / angular
    pts = rho[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None]
    w = (wr * rho)[:, None] * np.full(angular, 2 * np.pi / angular)
    return pts.reshape(-1, 2), w.ravel()


def weighted_integral(g: Callable, d: int, m: float, breakpoints: Sequence[float] = (),
                      max_shells: int = 40, rel_tol: float = 1e-6, p: int = 16,
                      angular: int = 32) -> float:
    """``int g(x) / (1 + |x|^m) dx`` over growing dyadic shells, for nonnegative batch ``g``.

    Raises ``DivergentNorm`` when shell contributions stop shrinking.
    """
    edges = [0.0, 1.0] + [2.0**k for k in range(1, max_shells + 1)]
    total = 0.0
    incs = []
    for a, b in zip(edges[:-1], edges[1:]):
        if d == 1:
            cuts = [c for c in breakpoints if a < abs(c) < b]
            sub = np.unique(np.concatenate([[a, b], np.abs(cuts)]))
            pts = []
            wts = []
            for lo, hi in zip(sub[:-1], sub[1:]):
                z, w = _shell_rule(1, lo, hi, p, angular)
                pts.append(z)
                wts.append(w)
            z, w = np.concatenate(pts), np.concatenate(wts)
        else:
            z, w = _shell_rule(d, a, b, p, angular)
        r = np.linalg.norm(z, axis=1)
        inc = float(np.sum(w * g(z) / (1.0 + r**m)))
        total += inc
        incs.append(inc)
        if len(incs) >= 4:
            last = np.array(incs[-4:])
            shrinking = np.all(last[1:] <= 0.75 * last[:-1] + 1e-300)
            if total == 0.0 or (shrinking and last[-1] <= rel_tol * max(total, 1e-300)):
                return total
    tail = np.array(incs[-6:])
    if np.all(tail[1:] >= 0.9 * tail[:-1]) and tail[-1] > rel_tol * total:
        raise DivergentNorm("weighted integral keeps growing with the truncation radius")
    return total


def weighted_norms(f: Callable, m: int, d: int, with_maximal: bool = True,
                   breakpoints: Sequence[float] = (), max_shells: int = 40,
                   rel_tol: float = 1e-6) -> WeightedNorms:
    """``int |f| dx'/(1+|x'|^m)`` and the same integral of ``M f``.

    Shells ``[2^{k-1}, 2^k]`` are added until their contributions shrink
    geometrically below ``rel_tol``; if they stall, ``DivergentNorm`` is raised.
    """
    l1 = weighted_integral(lambda z: pointwise_size(f(z)), d, m, breakpoints, max_shells, rel_tol)
    z_norm = None
    if with_maximal:
        def maximal(z):
            return np.array([hl_maximal(f, zi, r_max=1e3 * (1 + np.linalg.norm(zi)), levels=30,
                                        breakpoints=breakpoints, refine=False) for zi in z])
        z_norm = weighted_integral(maximal, d, m, breakpoints, max_shells, max(rel_tol, 1e-3),
                                   p=6, angular=8)
    return WeightedNorms(l1, z_norm)
