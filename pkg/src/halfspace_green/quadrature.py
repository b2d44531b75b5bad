"""Quadrature building blocks shared by the kernel, solver and maximal-function code."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _gauss_legendre(p: int):
    x, w = np.polynomial.legendre.leggauss(p)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_panels(edges, p: int):
    """Composite Gauss-Legendre nodes/weights on consecutive ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _gauss_legendre(p)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def graded_edges(a: float, b: float, levels: int, ratio: float = 0.5):
    """Edges on [a, b] refined geometrically toward ``a``."""
    h = (b - a) * ratio ** np.arange(levels, -1, -1)
    return np.concatenate([[a], a + h])


def sphere_rule(n: int, n_polar: int, n_azimuth: int | None = None):
    """Directions on S^{n-1} with surface weights (n in {2, 3}).

    n=2: trapezoid with ``n_polar`` angles.  n=3: Gauss-Legendre in the
    polar cosine times a trapezoid in azimuth.
    """
    if n == 2:
        th = 2 * np.pi * (np.arange(n_polar) + 0.5) / n_polar
        return np.stack([np.cos(th), np.sin(th)], -1), np.full(n_polar, 2 * np.pi / n_polar)
    if n == 3:
        m = n_azimuth or 2 * n_polar
        c, wc = _gauss_legendre(n_polar)
        ph = 2 * np.pi * (np.arange(m) + 0.5) / m
        C, PH = np.meshgrid(c, ph, indexing="ij")
        S = np.sqrt(1 - C**2)
        dirs = np.stack([S * np.cos(PH), S * np.sin(PH), C], -1).reshape(-1, 3)
        wts = (wc[:, None] * np.full(m, 2 * np.pi / m)[None, :]).ravel()
        return dirs, wts
    raise ValueError("sphere_rule supports n in {2, 3}")


@dataclass(frozen=True)
class MappedPlaneRule:
    """Rule for ``int_{R^d} F(u) du`` with ``|u| = tan(s)``, d = n-1 in {1, 2}.

    The s-interval [0, pi/2) is split into one panel [0, pi/4] followed by
    panels graded geometrically toward pi/2, so algebraically decaying
    integrands become bounded and the far field is resolved on a relative
    scale.  The rule stops at ``u_max = tan(s_max)``; callers add their own
    tail bound past it.
    """

    d: int
    u: np.ndarray       # (Q, d) nodes
    w: np.ndarray       # (Q,) weights, Jacobian included
    u_max: float

    @classmethod
    def build(cls, d: int, panel_nodes: int = 16, graded_panels: int = 40,
              angular_nodes: int = 64, u_max: float | None = None) -> "MappedPlaneRule":
        if u_max is not None:
            # choose the number of graded panels so that the last edge reaches u_max
            gap = np.pi / 2 - np.arctan(u_max)
            graded_panels = max(1, int(np.ceil(np.log2((np.pi / 4) / gap))))
        h = (np.pi / 4) * 0.5 ** np.arange(graded_panels + 1)
        edges = np.concatenate([[0.0], np.pi / 2 - h])
        s, ws = gauss_panels(edges, panel_nodes)
        r = np.tan(s)
        sec2 = 1.0 + r * r
        if d == 1:
            u = np.concatenate([r, -r])[:, None]
            w = np.concatenate([ws * sec2, ws * sec2])
        elif d == 2:
            th = 2 * np.pi * np.arange(angular_nodes) / angular_nodes
            R, TH = np.meshgrid(r, th, indexing="ij")
            u = np.stack([R * np.cos(TH), R * np.sin(TH)], -1).reshape(-1, 2)
            w = ((ws * sec2 * r)[:, None] * np.full(angular_nodes, 2 * np.pi / angular_nodes)).ravel()
        else:
            raise ValueError("MappedPlaneRule supports d in {1, 2}")
        # sorted by |u| so that callers can truncate to a prefix
        order = np.argsort(np.linalg.norm(u, axis=1), kind="stable")
        return cls(d, u[order], w[order], float(np.tan(edges[-1])))

    @property
    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.u, axis=1)

    def tail_measure(self, decay_power: float) -> float:
        """``int_{|u|>u_max} |u|^{-p} du`` for p > d."""
        area = 2.0 if self.d == 1 else 2 * np.pi
        return area * self.u_max ** (self.d - decay_power) / (decay_power - self.d)


# -- smooth compactly supported test profiles --------------------------------

@dataclass(frozen=True)
class Bump:
    """``exp(1/(|x-x0|^2/rho^2 - 1))`` on the open ball ``B(x0, rho)``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = np.sum((x - self.center) ** 2, axis=-1) / self.radius**2
        out = np.zeros(s.shape)
        inside = s < 1
        out[inside] = np.exp(1.0 / (s[inside] - 1.0))
        return out

    def hessian(self, x) -> np.ndarray:
        """Exact second derivatives, shape ``(..., n, n)``."""
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        d = x - self.center
        rho2 = self.radius**2
        s = np.sum(d * d, axis=-1) / rho2
        inside = s < 1
        sm = np.where(inside, s, 0.0) - 1.0
        b = np.where(inside, np.exp(1.0 / sm), 0.0)
        w1 = -1.0 / sm**2
        w2 = 2.0 / sm**3
        ds = d * (2.0 / rho2)
        H = (b * (w1**2 + w2))[..., None, None] * ds[..., :, None] * ds[..., None, :]
        H += (b * w1 * (2.0 / rho2))[..., None, None] * np.eye(n)
        return H

    def exit_radius(self, origin, dirs) -> np.ndarray:
        """Distance from ``origin`` along unit ``dirs`` to the support boundary."""
        c = self.center - np.asarray(origin, dtype=float)
        b = dirs @ c
        disc = b * b - c @ c + self.radius**2
        return np.where(disc > 0, b + np.sqrt(np.maximum(disc, 0.0)), 0.0)


def mapped_line_rule(panel_nodes: int = 16, graded_panels: int = 40, cuts=()):
    """1D version of :class:`MappedPlaneRule` on all of R with extra panel breaks at ``cuts``.

    Returns ``(u, w, u_max)``; the cuts are abscissae where the integrand jumps.
    """
    h = (np.pi / 4) * 0.5 ** np.arange(graded_panels + 1)
    half = np.concatenate([[0.0], np.pi / 2 - h])
    s_max = half[-1]
    cut_s = np.arctan(np.asarray(cuts, dtype=float))
    cut_s = cut_s[np.abs(cut_s) < s_max]
    edges = np.unique(np.concatenate([-half[::-1], half, cut_s]))
    s, ws = gauss_panels(edges, panel_nodes)
    u = np.tan(s)
    return u, ws * (1.0 + u * u), float(np.tan(s_max))
