"""JSON specs for systems, boundary data and cone probes; CSV reading and writing."""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import QuadratureConfig
from .errors import SpecError
from .system import BUILTIN_NAMES, EllipticSystem, builtin

Number = Union[float, List[float]]  # real, or [re, im]


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError("complex numbers are written [re, im]")
        return complex(v[0], v[1])
    return complex(v)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CoeffEntry(_Strict):
    alpha: int = Field(ge=1)
    beta: int = Field(ge=1)
    r: int = Field(ge=1)
    s: int = Field(ge=1)
    re: float = 0.0
    im: float = 0.0


class SystemSpec(_Strict):
    """``coeff`` entries use 1-based indices; unlisted entries are zero."""

    n: int = Field(ge=1)
    M: int = Field(default=1, ge=1)
    builtin: Optional[str] = None
    params: Dict[str, Union[float, List[float], List[List[float]]]] = Field(default_factory=dict)
    coeff: List[CoeffEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self):
        if self.builtin is None and not self.coeff:
            raise ValueError("give either 'builtin' or a nonempty 'coeff' list")
        if self.builtin is not None and self.builtin.lower() not in BUILTIN_NAMES:
            raise ValueError(f"unknown builtin {self.builtin!r}; choose from {BUILTIN_NAMES}")
        for k, e in enumerate(self.coeff):
            if e.alpha > self.M or e.beta > self.M:
                raise ValueError(f"coeff[{k}]: alpha/beta must be <= M={self.M}")
            if e.r > self.n or e.s > self.n:
                raise ValueError(f"coeff[{k}]: r/s must be <= n={self.n}")
        return self

    def build(self) -> EllipticSystem:
        if self.coeff:
            a = np.zeros((self.M, self.M, self.n, self.n), dtype=complex)
            for e in self.coeff:
                a[e.alpha - 1, e.beta - 1, e.r - 1, e.s - 1] += complex(e.re, e.im)
            return EllipticSystem(self.n, self.M, a, name=self.builtin or "custom")
        params = {}
        for key, v in self.params.items():
            if key == "c":
                params[key] = [_complex(c) for c in v]
            else:
                params[key] = _complex(v)
        if "mu" in params:
            params["mu"] = params["mu"].real
        if self.builtin.lower() == "lame" and "lam" in params:
            params["lam"] = params["lam"].real
        return builtin(self.builtin, self.n, **params)


DatumType = Literal["gaussian", "indicator", "constant", "poisson_kernel_slice", "grid"]


class DatumSpec(_Strict):
    type: DatumType
    amplitude: Optional[List[Number]] = None
    value: Optional[List[Number]] = None
    center: Optional[List[float]] = None
    width: float = Field(default=1.0, gt=0)
    lower: float = 0.0
    upper: float = 1.0
    radius: Optional[float] = Field(default=None, gt=0)
    s: float = Field(default=1.0, gt=0)
    column: int = Field(default=1, ge=1)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        if self.type == "grid" and not self.path:
            raise ValueError("grid data need a 'path' to a CSV file")
        if self.type == "indicator" and self.upper <= self.lower:
            raise ValueError("indicator needs lower < upper")
        return self


class ProbeSpec(_Strict):
    vertex: List[float]
    kappa: float = Field(default=1.0, gt=0)
    t_min: float = Field(default=1e-4, gt=0)
    t_max: float = Field(default=1e3, gt=0)
    radial_levels: int = Field(default=40, ge=2)
    angular_samples: int = Field(default=64, ge=1)

    def build(self):
        from .nontangential import ConeProbe

        return ConeProbe(np.asarray(self.vertex), self.kappa, self.t_min, self.t_max,
                         self.radial_levels, self.angular_samples)


class GridSpec(_Strict):
    """Tensor grid: one ``[lo, hi, num]`` triple per axis."""

    axes: List[List[float]]

    @model_validator(mode="after")
    def _check(self):
        for k, ax in enumerate(self.axes):
            if len(ax) != 3 or int(ax[2]) < 1 or int(ax[2]) != ax[2]:
                raise ValueError(f"axes[{k}] must be [lo, hi, num] with integer num >= 1")
        return self

    def points(self) -> np.ndarray:
        grids = np.meshgrid(*[np.linspace(lo, hi, int(num)) for lo, hi, num in self.axes], indexing="ij")
        return np.stack([g.ravel() for g in grids], -1)


class QuadratureOverrides(_Strict):
    circle_nodes: Optional[int] = None
    fd_step: Optional[float] = None
    richardson_levels: Optional[int] = None
    delta_test_radius: Optional[float] = None
    tol: Optional[float] = None
    panel_nodes: Optional[int] = None
    graded_panels: Optional[int] = None
    angular_nodes: Optional[int] = None

    def apply(self, cfg: QuadratureConfig) -> QuadratureConfig:
        changes = {k: v for k, v in self.model_dump().items() if v is not None}
        return cfg.replace(**changes) if changes else cfg


def _describe(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        parts.append(f"field {loc}: {e['msg']}")
    return "; ".join(parts)


def _load_json(text_or_path: str, what: str):
    text = text_or_path
    p = Path(text_or_path)
    if not text_or_path.lstrip().startswith(("{", "[")) and p.exists():
        text = p.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{what}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def parse_model(model, text_or_path: str, what: str):
    """Validate inline JSON or a JSON file against ``model``; errors name line or field."""
    data = _load_json(text_or_path, what)
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise SpecError(f"{what}: {_describe(exc)}") from None


def load_system(text_or_path: str) -> EllipticSystem:
    spec = parse_model(SystemSpec, text_or_path, "system spec")
    try:
        return spec.build()
    except (ValueError, KeyError) as exc:
        raise SpecError(f"system spec: {exc}") from None


def build_datum(spec: DatumSpec, P, base_dir: Optional[Path] = None):
    """Turn a datum spec into a :class:`BoundaryDatum` for the kernel ``P``."""
    from . import dirichlet as D

    d, M = P.n - 1, P.system.M
    amp = None if spec.amplitude is None else [_complex(a) for a in spec.amplitude]
    if spec.type == "constant":
        val = spec.value if spec.value is not None else spec.amplitude
        return D.constant_datum(d, M, None if val is None else [_complex(a) for a in val])
    if spec.type == "gaussian":
        return D.gaussian_datum(d, M, spec.center, spec.width, amp)
    if spec.type == "indicator":
        return D.indicator_datum(d, M, spec.lower, spec.upper, amp, spec.center, spec.radius)
    if spec.type == "poisson_kernel_slice":
        if spec.column > M:
            raise SpecError(f"datum spec: column {spec.column} exceeds M={M}")
        return D.poisson_slice_datum(P, spec.s, spec.column - 1)
    path = Path(spec.path)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    coords, values = read_grid_csv(path, d, M)
    return D.grid_datum(coords, values)


# -- CSV ------------------------------------------------------------------------

def _data_rows(path: Path):
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from None
    rows = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = next(csv.reader([line]))
        try:
            rows.append((lineno, [float(f) for f in fields]))
        except ValueError:
            if rows:
                raise SpecError(f"{path}: line {lineno}: non-numeric field") from None
            continue  # header
    return rows


def read_points_csv(path, n: int) -> np.ndarray:
    rows = _data_rows(Path(path))
    for lineno, r in rows:
        if len(r) != n:
            raise SpecError(f"{path}: line {lineno}: expected {n} coordinates, got {len(r)}")
    return np.array([r for _, r in rows], dtype=float).reshape(-1, n)


def read_grid_csv(path, d: int, M: int):
    """Rows ``x'_1..x'_d, re_1, im_1, ..., re_M, im_M``; d=2 rows must fill a tensor grid."""
    rows = _data_rows(Path(path))
    width = d + 2 * M
    for lineno, r in rows:
        if len(r) != width:
            raise SpecError(f"{path}: line {lineno}: expected {width} fields, got {len(r)}")
    if not rows:
        raise SpecError(f"{path}: no data rows")
    A = np.array([r for _, r in rows])
    values = A[:, d::2] + 1j * A[:, d + 1::2]
    if d == 1:
        return A[:, 0], values
    ax0, ax1 = np.unique(A[:, 0]), np.unique(A[:, 1])
    if len(ax0) * len(ax1) != len(A):
        raise SpecError(f"{path}: d=2 samples do not form a tensor grid")
    grid = np.zeros((len(ax0), len(ax1), M), dtype=complex)
    i = np.searchsorted(ax0, A[:, 0])
    j = np.searchsorted(ax1, A[:, 1])
    grid[i, j] = values
    return (ax0, ax1), grid


def fmt(v: float) -> str:
    return "%.17g" % v


def write_csv(stream, header: Sequence[str], rows, metadata: Optional[dict] = None):
    """``#``-prefixed ``key=value`` metadata lines, a header row, then rows with 17-digit floats."""
    for key, val in (metadata or {}).items():
        stream.write(f"# {key}={val}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def csv_text(header, rows, metadata=None) -> str:
    buf = _io.StringIO()
    write_csv(buf, header, rows, metadata)
    return buf.getvalue()


def read_csv_table(text: str):
    """Parse :func:`write_csv` output into ``(metadata, header, rows)`` (testing and regression diffs)."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]
