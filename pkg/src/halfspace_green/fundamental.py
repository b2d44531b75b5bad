"""The canonical fundamental solution ``E^L`` for n in {2, 3}.

n=2
    ``E(x) = (1/4pi^2) int_{S^1} ln|<x, xi>| L(xi)^{-1} dH^1(xi)``.  With
    ``g(theta) = L(xi(theta))^{-1}`` expanded in its Fourier series and the
    classical expansion ``ln|cos psi| = -ln 2 + sum_k (-1)^(k+1) cos(2k psi)/k``
    the integral is evaluated term by term.  The log kink is absorbed
    analytically, so accuracy is limited only by the decay of the Fourier
    coefficients of ``g`` (geometric for an analytic symbol).

n=3
    Applying the Laplacian once under the sphere integral collapses it onto
    the great circle orthogonal to ``x``:
    ``E(x) = -(1/(8 pi^2 |x|)) oint_{S^2 cap x^perp} L(xi)^{-1} dH^1``,
    evaluated with a trapezoid rule that is doubled per point until it stops
    changing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import DEFAULT_CONFIG, QuadratureConfig
from .errors import (
    DimensionMismatch,
    NotWeaklyElliptic,
    PointAtSingularity,
    StepUnderflow,
    UnsupportedDimension,
)
from .quadrature import Bump, gauss_panels, graded_edges, sphere_rule
from .system import EllipticSystem, characteristic_matrix, classify

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_CHUNK_ENTRIES = 2_000_000

# 1D central-difference stencils (offsets, weights), all O(h^2) with even error expansions
_STENCILS = {
    0: (np.array([0.0]), np.array([1.0])),
    1: (np.array([-1.0, 1.0]), np.array([-0.5, 0.5])),
    2: (np.array([-1.0, 0.0, 1.0]), np.array([1.0, -2.0, 1.0])),
    3: (np.array([-2.0, -1.0, 1.0, 2.0]), np.array([-0.5, 1.0, -1.0, 0.5])),
}


def _batch_inv(A: np.ndarray) -> np.ndarray:
    if A.shape[-1] == 1:
        return 1.0 / A
    return np.linalg.inv(A)


@dataclass(frozen=True, eq=False)
class FundamentalEvaluator:
    system: EllipticSystem
    config: QuadratureConfig
    log_coefficient: np.ndarray
    # n=2 only: Fourier data of theta -> L(xi(theta))^{-1}
    _modes: np.ndarray = field(default=None, repr=False)        # k = 1..K
    _c_pos: np.ndarray = field(default=None, repr=False)        # c_{2k},  (K, M, M)
    _c_neg: np.ndarray = field(default=None, repr=False)        # c_{-2k}, (K, M, M)
    _phi_const: np.ndarray = field(default=None, repr=False)
    fourier_tail: float = 0.0

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def M(self) -> int:
        return self.system.M

    # -- values ---------------------------------------------------------------

    def __call__(self, x) -> np.ndarray:
        return eval_E(self, x)

    def values_and_errors(self, x):
        x, scalar = _as_points(x, self.n)
        r = np.linalg.norm(x, axis=1)
        if np.any(r < 1e-300):
            raise PointAtSingularity("E is singular at the origin")
        if self.n == 2:
            vals = self._eval_2d(x, r)
            errs = np.full(len(x), self.fourier_tail)
        else:
            vals, errs = self._eval_3d(x, r)
        if scalar:
            return vals[0], errs[0]
        return vals, errs

    def _eval_2d(self, x, r):
        phi = np.arctan2(x[:, 1], x[:, 0])
        out = np.broadcast_to(self._phi_const, (len(x), self.M, self.M)).astype(complex)
        K = len(self._modes)
        if K:
            w = ((-1.0) ** (self._modes + 1) / self._modes) / (4 * np.pi)
            step = max(1, _CHUNK_ENTRIES // K)
            for lo in range(0, len(x), step):
                sl = slice(lo, lo + step)
                e = np.exp(2j * np.outer(phi[sl], self._modes))
                out[sl] += np.einsum("pk,kab->pab", e * w, self._c_pos) \
                    + np.einsum("pk,kab->pab", np.conj(e) * w, self._c_neg)
        return out + np.log(r)[:, None, None] * self.log_coefficient

    def _eval_3d(self, x, r):
        vals = np.empty((len(x), self.M, self.M), dtype=complex)
        errs = np.empty(len(x))
        n_cap = max(8, self.config.circle_nodes // 2)
        step = max(1, _CHUNK_ENTRIES // (n_cap * self.M * self.M))
        for lo in range(0, len(x), step):
            sl = slice(lo, lo + step)
            circ, err = self._great_circle(x[sl] / r[sl, None], n_cap)
            vals[sl] = -circ / (8 * np.pi**2 * r[sl, None, None])
            errs[sl] = err / (8 * np.pi**2 * r[sl])
        return vals, errs

    def _great_circle(self, e, n_cap):
        """``oint_{S^2 cap e^perp} L^{-1}`` for unit vectors ``e``, adaptive per point."""
        k = np.argmin(np.abs(e), axis=1)
        a = np.zeros_like(e)
        a[np.arange(len(e)), k] = 1.0
        u = a - np.sum(a * e, axis=1, keepdims=True) * e
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        v = np.cross(e, u)
        S = 0.5 * self.system.symmetrized()
        Luu = np.einsum("abrs,pr,ps->pab", S, u, u)
        Luv = np.einsum("abrs,pr,ps->pab", S, u, v)
        Lvv = np.einsum("abrs,pr,ps->pab", S, v, v)

        def circle_sum(idx, theta):
            c, s = np.cos(theta), np.sin(theta)
            Lx = (c * c)[None, :, None, None] * Luu[idx, None] \
                + (2 * c * s)[None, :, None, None] * Luv[idx, None] \
                + (s * s)[None, :, None, None] * Lvv[idx, None]
            return _batch_inv(Lx).sum(axis=1)

        # g is pi-periodic on the circle, so the half circle with N nodes suffices
        N = 8
        everyone = np.arange(len(e))
        total = circle_sum(everyone, np.pi * np.arange(N) / N)
        integral = 2 * np.pi / N * total
        err = np.full(len(e), np.inf)
        active = everyone
        while len(active) and N < n_cap:
            mids = circle_sum(active, np.pi * (np.arange(N) + 0.5) / N)
            total[active] += mids
            N2 = 2 * N
            new = 2 * np.pi / N2 * total[active]
            diff = np.max(np.abs(new - integral[active]), axis=(1, 2))
            scale = np.max(np.abs(new), axis=(1, 2))
            integral[active] = new
            err[active] = diff
            done = diff <= 4 * _EPS * np.maximum(scale, 1e-300)
            active = active[~done]
            # nodes of the unconverged points now sit on the 2N grid
            N = N2
            if len(active) and N < n_cap:
                continue
        return integral, np.where(np.isfinite(err), err, 0.0)


def _as_points(x, n):
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != n:
        raise DimensionMismatch(f"points have {x.shape[-1]} coordinates, expected {n}")
    return x, scalar


def make_evaluator(S: EllipticSystem, cfg: QuadratureConfig = DEFAULT_CONFIG,
                   check_ellipticity: bool = True) -> FundamentalEvaluator:
    if S.n not in (2, 3):
        raise UnsupportedDimension(f"fundamental solution implemented for n in {{2, 3}}, got {S.n}")
    if check_ellipticity and not classify(S, cfg).weakly_elliptic:
        raise NotWeaklyElliptic(f"{S.name}: det L(xi) vanishes on the unit sphere")
    if S.n == 3:
        return FundamentalEvaluator(S, cfg, np.zeros((S.M, S.M), dtype=complex))

    N = cfg.circle_nodes
    th = 2 * np.pi * np.arange(N) / N
    xi = np.stack([np.cos(th), np.sin(th)], -1)
    Lx = characteristic_matrix(S, xi)
    if np.min(np.abs(np.linalg.det(Lx))) == 0.0:
        raise NotWeaklyElliptic(f"{S.name}: singular characteristic matrix on the circle nodes")
    g = _batch_inv(Lx)
    c = np.fft.fft(g, axis=0) / N
    c0 = c[0]
    kmax = N // 4 - 1
    ks = np.arange(1, kmax + 1)
    c_pos, c_neg = c[2 * ks], c[N - 2 * ks]
    mag = np.maximum(np.abs(c_pos).max(axis=(1, 2)), np.abs(c_neg).max(axis=(1, 2)))
    scale = max(float(np.abs(c0).max()), 1e-300)
    keep = np.nonzero(mag > 1e-17 * scale)[0]
    K = int(keep[-1]) + 1 if len(keep) else 0
    tail = float(np.sum(mag[K:] / ks[K:])) / (4 * np.pi) + float(np.abs(c[N // 2]).max())
    if tail > 1e-10 * scale:
        log.warning("%s: Fourier tail %.2e; increase circle_nodes", S.name, tail)
    return FundamentalEvaluator(
        S, cfg,
        log_coefficient=c0 / (2 * np.pi),
        _modes=ks[:K].astype(float),
        _c_pos=c_pos[:K],
        _c_neg=c_neg[:K],
        _phi_const=-np.log(2.0) * c0 / (2 * np.pi),
        fourier_tail=tail,
    )


def eval_E(F: FundamentalEvaluator, x) -> np.ndarray:
    """``E^L(x)`` for one point ``(n,)`` or a batch ``(N, n)``."""
    return F.values_and_errors(x)[0]


def _check_gamma(gamma, n):
    gamma = tuple(int(g) for g in gamma)
    if len(gamma) != n or min(gamma) < 0:
        raise DimensionMismatch(f"multi-index {gamma} does not match n={n}")
    if sum(gamma) > 3:
        raise ValueError("derivatives implemented up to order 3")
    return gamma


def unit_index(n: int, j: int) -> tuple:
    g = [0] * n
    g[j] = 1
    return tuple(g)


def eval_dE_with_error(F: FundamentalEvaluator, x, gamma):
    """Nested central differences of ``E`` with Richardson extrapolation."""
    gamma = _check_gamma(gamma, F.n)
    x, scalar = _as_points(x, F.n)
    order = sum(gamma)
    if order == 0:
        v, e = F.values_and_errors(x)
        return (v[0], e[0]) if scalar else (v, e)
    r = np.linalg.norm(x, axis=1)
    if np.any(r < 1e-300):
        raise PointAtSingularity("derivative requested at the origin")
    cfg = F.config
    if np.any(cfg.fd_step * r < 1e-12):
        raise StepUnderflow("fd_step * |x| below 1e-12")
    # after L Richardson sweeps the truncation error is O(h^{2L+2}); balance it against roundoff
    rel = max(cfg.fd_step, _EPS ** (1.0 / (order + 2 * cfg.richardson_levels + 2)))

    # tensor-product stencil
    offs = [np.zeros((1, F.n))]
    wts = [np.ones(1)]
    for axis, k in enumerate(gamma):
        o, w = _STENCILS[k]
        step = np.zeros((len(o), F.n))
        step[:, axis] = o
        offs = [(a[:, None, :] + step[None, :, :]).reshape(-1, F.n) for a in offs]
        wts = [(b[:, None] * w[None, :]).ravel() for b in wts]
    offs, wts = offs[0], wts[0]

    L = cfg.richardson_levels
    hs = rel * r[:, None] / 2.0 ** np.arange(L + 1)[None, :]          # (N, L+1)
    pts = x[:, None, None, :] + hs[:, :, None, None] * offs[None, None, :, :]
    vals = F.values_and_errors(pts.reshape(-1, F.n))[0]
    vals = vals.reshape(len(x), L + 1, len(offs), F.M, F.M)
    D = np.einsum("s,plsab->plab", wts, vals) / hs[:, :, None, None] ** order

    table = [D[:, j] for j in range(L + 1)]
    prev = table[-1]
    for m in range(1, L + 1):
        prev = table[-1]
        fac = 4.0**m - 1.0
        table = [table[j] + (table[j] - table[j - 1]) / fac for j in range(1, len(table))]
    best = table[-1]
    err = np.max(np.abs(best - prev), axis=(1, 2)) if L else np.zeros(len(x))
    if scalar:
        return best[0], err[0]
    return best, err


def eval_dE(F: FundamentalEvaluator, x, gamma, validate: bool = False) -> np.ndarray:
    """``(d^gamma E^L)(x)`` for ``|gamma| <= 3``.

    With ``validate=True`` the value is compared against the homogeneity
    relation at ``2x`` and a warning is logged when they disagree by more
    than ``10 * tol`` (relative).
    """
    val, _ = eval_dE_with_error(F, x, gamma)
    if validate and sum(gamma) >= 1:
        other, _ = eval_dE_with_error(F, 2 * np.asarray(x, dtype=float), gamma)
        expect = 2.0 ** (2 - F.n - sum(gamma)) * val
        scale = max(float(np.max(np.abs(val))), 1e-300)
        if np.max(np.abs(other - expect)) > 10 * F.config.tol * scale:
            log.warning("homogeneity check failed for gamma=%s", gamma)
    return val


# -- distributional identity ---------------------------------------------------

def operator_on_bump(S: EllipticSystem, bump: Bump, pts: np.ndarray) -> np.ndarray:
    """``T[gamma, alpha] = a^{gamma alpha}_{rs} d_r d_s b``: row gamma of ``L^T`` applied to ``b e_gamma``."""
    return np.einsum("gars,...rs->...ga", S.coeff, bump.hessian(pts))


def _radial_rule(r_in, r_out, patch, levels=10, p=8, panels=24):
    """Radial nodes on [r_in, r_out] per direction, graded toward 0 inside the patch."""
    xg, wg = np.polynomial.legendre.leggauss(p)
    inner_edges = graded_edges(0.0, 1.0, levels)
    t_in, w_in = gauss_panels(inner_edges, p)
    t_out, w_out = gauss_panels(np.linspace(0.0, 1.0, panels + 1), p)
    split = np.clip(patch, r_in, r_out)
    has_patch = r_in <= 0.0
    a = np.where(has_patch, split, r_in)
    nodes_in = split[:, None] * t_in[None, :]
    weights_in = split[:, None] * w_in[None, :] * has_patch[:, None]
    nodes_out = a[:, None] + (r_out - a)[:, None] * t_out[None, :]
    weights_out = (r_out - a)[:, None] * w_out[None, :]
    return np.concatenate([nodes_in, nodes_out], 1), np.concatenate([weights_in, weights_out], 1)


def polar_pairing(S: EllipticSystem, kernel: Callable, center, bump: Bump,
                  cfg: QuadratureConfig = DEFAULT_CONFIG) -> np.ndarray:
    """``int T(x) K(x) dx`` in polar coordinates about ``center``.

    ``kernel(dirs, radii)`` returns K at ``center + radii * dirs`` with shape
    ``(D, R, M, M)``; the polar Jacobian tames an integrable singularity of K
    at ``center``.
    """
    center = np.asarray(center, dtype=float)
    dirs, dw = sphere_rule(S.n, cfg.polar_angular_nodes)
    c = bump.center - center
    b = dirs @ c
    disc = b * b - c @ c + bump.radius**2
    hit = disc > 0
    dirs, dw, b, disc = dirs[hit], dw[hit], b[hit], disc[hit]
    r_out = b + np.sqrt(disc)
    r_in = np.maximum(b - np.sqrt(disc), 0.0)
    patch = np.full(len(dirs), cfg.delta_test_radius)
    radii, rw = _radial_rule(r_in, r_out, patch)
    pts = center + radii[..., None] * dirs[:, None, :]
    T = operator_on_bump(S, bump, pts)
    K = kernel(dirs, radii)
    w = dw[:, None] * rw * radii ** (S.n - 1)
    return np.einsum("dr,drga,drab->gb", w, T, K)


def delta_residual(F: FundamentalEvaluator, bump: Bump) -> np.ndarray:
    """``int (L^T phi) E dx - phi(0) I`` for ``phi = bump * e_gamma``; row gamma, column beta."""

    def kernel(dirs, radii):
        Ew = eval_E(F, dirs)
        if F.n == 3:
            return Ew[:, None] / radii[..., None, None]
        return Ew[:, None] + np.log(np.maximum(radii, 1e-300))[..., None, None] * F.log_coefficient

    pairing = polar_pairing(F.system, kernel, np.zeros(F.n), bump, F.config)
    return pairing - bump.value(np.zeros(F.n)) * np.eye(F.M)


def verify_delta_identity(F: FundamentalEvaluator, bump: Bump, beta: int) -> np.ndarray:
    """Column ``beta`` of :func:`delta_residual` (an M-vector)."""
    return delta_residual(F, bump)[:, beta]


DEFAULT_BUMPS: Sequence[tuple] = ((0.0, 1.0), (0.25, 0.8), (-0.1, 0.5))


def default_bumps(n: int):
    """Three test bumps (centre offsets/radii) that all contain the origin."""
    out = []
    for shift, rad in DEFAULT_BUMPS:
        c = np.full(n, shift)
        c[-1] = -0.6 * shift
        out.append(Bump(c, rad))
    return out
