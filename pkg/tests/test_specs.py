import io
import json

import numpy as np
import pytest

from halfspace_green import system as sc
from halfspace_green.config import DEFAULT_CONFIG
from halfspace_green.errors import SpecError
from halfspace_green.specs import (
    DatumSpec,
    GridSpec,
    ProbeSpec,
    QuadratureOverrides,
    csv_text,
    load_system,
    parse_model,
    read_csv_table,
    read_grid_csv,
    read_points_csv,
)


def test_builtin_spec():
    S = load_system('{"n": 2, "builtin": "l_lambda", "params": {"lam": [2, 1]}}')
    assert S.same_operator(sc.l_lambda(2 + 1j, 2))


def test_coefficient_spec_is_one_based(tmp_path):
    spec = {"n": 2, "M": 1, "coeff": [{"alpha": 1, "beta": 1, "r": 1, "s": 1, "re": 1},
                                      {"alpha": 1, "beta": 1, "r": 2, "s": 2, "re": 3}]}
    path = tmp_path / "sys.json"
    path.write_text(json.dumps(spec), encoding="utf-8")
    assert load_system(str(path)).same_operator(sc.diag_anisotropic([1, 3]))


def test_field_diagnostics():
    with pytest.raises(SpecError, match=r"coeff\.0\.r"):
        load_system('{"n": 2, "coeff": [{"alpha": 1, "beta": 1, "r": 0, "s": 1}]}')
    with pytest.raises(SpecError, match="r/s must be <= n"):
        load_system('{"n": 2, "coeff": [{"alpha": 1, "beta": 1, "r": 3, "s": 1}]}')
    with pytest.raises(SpecError, match="unknown builtin"):
        load_system('{"n": 2, "builtin": "wave"}')
    with pytest.raises(SpecError, match="field colour"):
        load_system('{"n": 2, "builtin": "laplacian", "colour": 1}')


def test_json_syntax_diagnostics():
    with pytest.raises(SpecError, match="line 2 column"):
        load_system('{"n": 2,\n "builtin": }')


def test_datum_and_probe_specs():
    d = parse_model(DatumSpec, '{"type": "indicator", "lower": -1, "upper": 2}', "datum")
    assert d.upper == 2
    with pytest.raises(SpecError):
        parse_model(DatumSpec, '{"type": "indicator", "lower": 1, "upper": 0}', "datum")
    with pytest.raises(SpecError, match="path"):
        parse_model(DatumSpec, '{"type": "grid"}', "datum")
    probe = parse_model(ProbeSpec, '{"vertex": [1.0], "kappa": 2}', "probe").build()
    assert probe.kappa == 2.0 and probe.d == 1


def test_grid_spec_points():
    g = parse_model(GridSpec, '{"axes": [[0, 1, 3], [1, 2, 2]]}', "grid")
    pts = g.points()
    assert pts.shape == (6, 2)
    assert np.allclose(pts[0], [0, 1]) and np.allclose(pts[-1], [1, 2])
    with pytest.raises(SpecError):
        parse_model(GridSpec, '{"axes": [[0, 1, 2.5]]}', "grid")


def test_overrides():
    cfg = QuadratureOverrides(panel_nodes=8).apply(DEFAULT_CONFIG)
    assert cfg.panel_nodes == 8 and cfg.circle_nodes == DEFAULT_CONFIG.circle_nodes
    assert QuadratureOverrides().apply(DEFAULT_CONFIG) is DEFAULT_CONFIG


def test_points_csv(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("# comment\nx1,x2\n0,1\n2,3\n", encoding="utf-8")
    assert np.array_equal(read_points_csv(p, 2), [[0, 1], [2, 3]])
    p.write_text("x1,x2\n0,1\n2\n", encoding="utf-8")
    with pytest.raises(SpecError, match="line 3"):
        read_points_csv(p, 2)


def test_grid_csv_roundtrip(tmp_path):
    p = tmp_path / "g.csv"
    rows = ["x1,x2,re,im"] + [f"{a},{b},{a + b},0" for a in (0, 1) for b in (0, 1, 2)]
    p.write_text("\n".join(rows) + "\n", encoding="utf-8")
    (ax0, ax1), vals = read_grid_csv(p, 2, 1)
    assert len(ax0) == 2 and len(ax1) == 3
    assert vals[1, 2, 0] == 3
    p.write_text("x1,x2,re,im\n0,0,1,0\n1,1,1,0\n1,0,1,0\n", encoding="utf-8")
    with pytest.raises(SpecError, match="tensor grid"):
        read_grid_csv(p, 2, 1)


def test_csv_writer_precision():
    v = 1 / 3
    text = csv_text(["a", "b"], [[v, 2]], {"digest": "abc"})
    meta, header, rows = read_csv_table(text)
    assert meta == {"digest": "abc"}
    assert header == ["a", "b"]
    assert float(rows[0][0]) == v
    assert rows[0][0] == "0.33333333333333331"
