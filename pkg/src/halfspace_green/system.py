"""Constant-coefficient second-order systems and their algebraic classification.

A system is stored as the raw coefficient tensor ``coeff[alpha, beta, r, s]``
(0-based) of ``L = (a^{alpha beta}_{rs} d_r d_s)``.  Two tensors describe the
same operator iff their symmetrizations in ``(r, s)`` agree, so every
comparison below goes through :meth:`EllipticSystem.symmetrized`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .config import DEFAULT_CONFIG, QuadratureConfig
from .errors import DimensionMismatch, UnknownSystem

REFLECTION_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class EllipticSystem:
    n: int
    M: int
    coeff: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        if int(self.n) < 1 or int(self.M) < 1:
            raise ValueError("n and M must be positive integers")
        a = np.array(self.coeff, dtype=complex)
        if a.shape != (self.M, self.M, self.n, self.n):
            raise DimensionMismatch(
                f"coefficient tensor has shape {a.shape}, expected "
                f"{(self.M, self.M, self.n, self.n)}"
            )
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficients must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "coeff", a)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "M", int(self.M))

    def symmetrized(self) -> np.ndarray:
        """Return ``a_rs + a_sr`` (the operator-level invariant)."""
        return self.coeff + self.coeff.transpose(0, 1, 3, 2)

    def same_operator(self, other: "EllipticSystem", atol: float = 1e-12) -> bool:
        if (self.n, self.M) != (other.n, other.M):
            return False
        return bool(np.allclose(self.symmetrized(), other.symmetrized(), rtol=0, atol=atol))

    @property
    def normal_block(self) -> np.ndarray:
        """``A[beta, alpha] = a^{beta alpha}_{nn}``."""
        return self.coeff[:, :, -1, -1]

    def __repr__(self):
        return f"EllipticSystem(name={self.name!r}, n={self.n}, M={self.M})"


@dataclass(frozen=True)
class EllipticityReport:
    weakly_elliptic: bool
    min_abs_det: float
    legendre_hadamard: bool
    lh_constant: float
    reflection_invariant: bool
    samples: int

    def to_dict(self) -> dict:
        return {
            "weakly_elliptic": self.weakly_elliptic,
            "min_abs_det": self.min_abs_det,
            "legendre_hadamard": self.legendre_hadamard,
            "lh_constant": self.lh_constant,
            "reflection_invariant": self.reflection_invariant,
            "samples": self.samples,
        }


def reflect(x: np.ndarray) -> np.ndarray:
    """Map ``(x', x_n)`` to ``(x', -x_n)``; works on the last axis."""
    out = np.array(x, dtype=float, copy=True)
    out[..., -1] *= -1.0
    return out


def reflection_matrix(n: int) -> np.ndarray:
    W = np.eye(n)
    W[-1, -1] = -1.0
    return W


def characteristic_matrix(S: EllipticSystem, xi) -> np.ndarray:
    """``L(xi)_{alpha beta} = a^{alpha beta}_{rs} xi_r xi_s``.

    ``xi`` may be a single n-vector or an array of shape ``(..., n)``.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != S.n:
        raise DimensionMismatch(f"xi has {xi.shape[-1]} components, system has n={S.n}")
    return np.einsum("abrs,...r,...s->...ab", S.coeff, xi, xi)


def _sphere_points(n: int, count: Optional[int]) -> np.ndarray:
    if n == 1:
        return np.array([[1.0]])
    if n == 2:
        m = count or 2048
        th = 2 * np.pi * np.arange(m) / m
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    if n == 3:
        m = count or 8192
        k = np.arange(m) + 0.5
        z = 1 - 2 * k / m
        phi = np.pi * (1 + np.sqrt(5.0)) * k
        rho = np.sqrt(1 - z * z)
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
    rng = np.random.default_rng(0)
    v = rng.standard_normal((count or 8192, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _abs_det(S, xi):
    return np.abs(np.linalg.det(characteristic_matrix(S, xi)))


def _lh_value(S, xi):
    Lx = characteristic_matrix(S, xi)
    H = 0.5 * (Lx + np.conj(np.swapaxes(Lx, -1, -2)))
    return np.linalg.eigvalsh(H)[..., 0]


def _refine_min(fun, v0: np.ndarray) -> float:
    """One Nelder-Mead pass on the sphere (parametrized by ``v/|v|``)."""

    def obj(v):
        nv = np.linalg.norm(v)
        if nv < 1e-12:
            return np.inf
        return float(fun(v / nv))

    res = minimize(obj, v0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 2000})
    return min(float(res.fun), obj(v0))


def classify(S: EllipticSystem, cfg: QuadratureConfig = DEFAULT_CONFIG) -> EllipticityReport:
    """Sample the unit sphere to decide weak and Legendre-Hadamard ellipticity.

    Both thresholds are applied to quantities normalized by the largest
    spectral norm of ``L(xi)`` over the samples, so that rescaling the
    operator does not change the verdict.
    """
    pts = _sphere_points(S.n, cfg.sphere_samples)
    Lx = characteristic_matrix(S, pts)
    scale = float(np.max(np.linalg.norm(Lx, ord=2, axis=(-2, -1))))
    if scale == 0.0:
        return EllipticityReport(False, 0.0, False, 0.0, is_reflection_invariant(S), len(pts))

    dets = np.abs(np.linalg.det(Lx))
    i = int(np.argmin(dets))
    min_det = min(float(dets[i]), _refine_min(lambda v: _abs_det(S, v), pts[i]))

    lh = _lh_value(S, pts)
    j = int(np.argmin(lh))
    lh_c = min(float(lh[j]), _refine_min(lambda v: _lh_value(S, v), pts[j]))

    weak = min_det / scale**S.M > cfg.det_tolerance
    strong = weak and lh_c / scale > cfg.lh_tolerance
    return EllipticityReport(
        weakly_elliptic=bool(weak),
        min_abs_det=min_det,
        legendre_hadamard=bool(strong),
        lh_constant=lh_c,
        reflection_invariant=is_reflection_invariant(S),
        samples=len(pts),
    )


def is_reflection_invariant(S: EllipticSystem) -> bool:
    sym = S.symmetrized()
    mixed = sym[:, :, : S.n - 1, S.n - 1]
    scale = max(1.0, float(np.max(np.abs(S.coeff))))
    return bool(np.all(np.abs(mixed) <= REFLECTION_TOL * scale))


def transpose_system(S: EllipticSystem) -> EllipticSystem:
    return EllipticSystem(S.n, S.M, S.coeff.transpose(1, 0, 2, 3), name=f"{S.name}^T")


def compose_with(S: EllipticSystem, W) -> EllipticSystem:
    """The system ``L o W`` with tensor ``b_jk = a_rs w_rj w_sk``."""
    W = np.asarray(W, dtype=float)
    if W.shape != (S.n, S.n):
        raise DimensionMismatch(f"W must be {S.n}x{S.n}, got {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValueError("W must be finite")
    b = np.einsum("abrs,rj,sk->abjk", S.coeff, W, W)
    return EllipticSystem(S.n, S.M, b, name=f"{S.name}oW")


def scaled(S: EllipticSystem, lam: complex) -> EllipticSystem:
    return EllipticSystem(S.n, S.M, lam * S.coeff, name=f"{lam}*{S.name}")


# -- builtin systems ----------------------------------------------------------

def laplacian(n: int) -> EllipticSystem:
    return EllipticSystem(n, 1, np.eye(n)[None, None], name="laplacian")


def l_lambda(lam: complex, n: int = 2) -> EllipticSystem:
    """``d_1^2 + ... + d_{n-1}^2 + lam d_n^2``."""
    a = np.eye(n, dtype=complex)
    a[-1, -1] = lam
    return EllipticSystem(n, 1, a[None, None], name=f"l_lambda({lam})")


def lame(mu: float, lam: float, n: int = 2) -> EllipticSystem:
    d = np.eye(n)
    a = mu * np.einsum("rs,ab->abrs", d, d) + (lam + mu) * np.einsum("ra,sb->abrs", d, d)
    return EllipticSystem(n, n, a, name=f"lame({mu},{lam})")


def l_d(n: int = 2) -> EllipticSystem:
    """``Delta - 2 grad div`` acting on n-vector fields."""
    d = np.eye(n)
    a = np.einsum("rs,ab->abrs", d, d) - 2 * np.einsum("ra,sb->abrs", d, d)
    return EllipticSystem(n, n, a, name="l_d")


def diag_anisotropic(c: Sequence[complex]) -> EllipticSystem:
    c = np.asarray(c, dtype=complex)
    return EllipticSystem(len(c), 1, np.diag(c)[None, None], name="diag_anisotropic(" + ",".join(f"{v:g}" for v in c.real) + ")")


def coupled_pair(n: int = 2, coupling: complex = 0.5) -> EllipticSystem:
    """A 2x2 reflection-invariant, strongly elliptic system with ``L^T != L``.

    Diagonal blocks are anisotropic Laplacians; the off-diagonal blocks carry
    ``coupling * Delta`` in one corner and ``0.2 * Delta`` in the other, so
    the transpose is a genuinely different operator.
    """
    d = np.eye(n, dtype=complex)
    a = np.zeros((2, 2, n, n), dtype=complex)
    a[0, 0] = d
    a[1, 1] = np.diag(np.linspace(1.0, 2.0, n))
    a[0, 1] = coupling * d
    a[1, 0] = 0.2 * d
    return EllipticSystem(n, 2, a, name=f"coupled_pair({coupling})")


BUILTIN_NAMES = ("laplacian", "l_lambda", "lame", "l_d", "diag_anisotropic", "coupled_pair", "custom")


def builtin(name: str, n: int = 2, **params) -> EllipticSystem:
    """Look up a named system.

    Parameters: ``lam`` (l_lambda), ``mu``/``lam`` (lame), ``c`` (diag_anisotropic,
    its length fixes n), ``coupling`` (coupled_pair), ``coeff`` (custom).
    """
    key = name.lower()
    if key == "laplacian":
        return laplacian(n)
    if key == "l_lambda":
        return l_lambda(complex(params.get("lam", 1.0)), n)
    if key == "lame":
        return lame(float(params.get("mu", 1.0)), float(params.get("lam", 1.0)), n)
    if key == "l_d":
        return l_d(n)
    if key == "diag_anisotropic":
        c = params.get("c")
        if c is None:
            raise UnknownSystem("diag_anisotropic needs coefficients c")
        return diag_anisotropic(c)
    if key == "coupled_pair":
        return coupled_pair(n, complex(params.get("coupling", 0.5)))
    if key == "custom":
        coeff = np.asarray(params["coeff"], dtype=complex)
        return EllipticSystem(coeff.shape[2], coeff.shape[0], coeff)
    raise UnknownSystem(f"unknown builtin system {name!r}; choose from {BUILTIN_NAMES}")
