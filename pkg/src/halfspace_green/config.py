"""Numerical knobs for every quadrature, difference quotient and tolerance."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class QuadratureConfig:
    """Node counts, steps and tolerances.

    ``circle_nodes`` caps the trapezoid rule on unit circles (n=2 Fourier
    sampling, n=3 great-circle integrals).  ``fd_step`` is relative to
    ``|x|``.  ``panel_nodes``/``graded_panels``/``angular_nodes`` define the
    mapped rule used for convolutions over the boundary plane.
    """

    circle_nodes: int = 4096
    fd_step: float = 1e-5
    richardson_levels: int = 2
    delta_test_radius: float = 0.1
    truncation_radius: Optional[float] = None
    tol: float = 1e-8
    sphere_samples: Optional[int] = None
    det_tolerance: float = 1e-9
    lh_tolerance: float = 1e-9
    panel_nodes: int = 16
    graded_panels: int = 40
    angular_nodes: int = 64
    polar_radial_nodes: int = 48
    polar_angular_nodes: int = 48

    def __post_init__(self):
        positive = (
            "circle_nodes", "fd_step", "delta_test_radius", "tol",
            "det_tolerance", "lh_tolerance", "panel_nodes", "graded_panels",
            "angular_nodes", "polar_radial_nodes", "polar_angular_nodes",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.richardson_levels < 0:
            raise ValueError("richardson_levels must be nonnegative")
        if self.circle_nodes % 2:
            raise ValueError("circle_nodes must be even")
        if self.truncation_radius is not None and self.truncation_radius <= 0:
            raise ValueError("truncation_radius must be positive")
        if self.sphere_samples is not None and self.sphere_samples < 16:
            raise ValueError("sphere_samples must be at least 16")

    def replace(self, **changes) -> "QuadratureConfig":
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


DEFAULT_CONFIG = QuadratureConfig()
