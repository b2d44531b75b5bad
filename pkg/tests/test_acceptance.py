"""Acceptance criteria, one test per criterion.

Each test records a single pass/fail line that is printed in the terminal
summary under "acceptance criteria". Run directly with
``python3 tests/test_acceptance.py``.
"""

import sys

import numpy as np
import pytest

from conftest import record_criterion
from halfspace_green import system as sc
from halfspace_green.errors import RouteUnavailable
from halfspace_green.fundamental import default_bumps, delta_residual, eval_E, make_evaluator
from halfspace_green.halfspace import (
    GreenSampleSpec,
    build_poisson_kernel,
    green,
    make_kernels,
    poisson_availability,
    sample_pairs,
    verify_green_identities,
)
from halfspace_green.verify import (
    _remainder_stability,
    dirichlet_suite,
    has_unavailable,
    laplacian_E,
    laplacian_P,
    maximal_suite,
    run_suite,
)

RI_SYSTEMS = {
    "laplacian n=2": lambda: sc.laplacian(2),
    "laplacian n=3": lambda: sc.laplacian(3),
    "l_lambda(2) n=2": lambda: sc.l_lambda(2.0, 2),
    "coupled_pair n=2": lambda: sc.coupled_pair(2),
}


def _fmt(values):
    return ", ".join(f"{k} {v:.2e}" for k, v in values.items())


@pytest.fixture(scope="module")
def identity_reports():
    out = {}
    for name, make in RI_SYSTEMS.items():
        K = make_kernels(make(), "reflection")
        out[name] = (K, verify_green_identities(K, GreenSampleSpec(seed=0)))
    return out


def _record(rep, check_id):
    return next(r for r in rep.records if r.check_id == check_id)


def test_closed_form_fundamental_solution():
    rng = np.random.default_rng(11)
    errs = {}
    for n in (2, 3):
        x = rng.uniform(-5, 5, (100, n))
        ref = laplacian_E(x)
        got = eval_E(make_evaluator(sc.laplacian(n)), x)[:, 0, 0]
        errs[f"n={n}"] = float(np.max(np.abs(got - ref) / np.abs(ref)))
    ok = max(errs.values()) < 1e-8
    record_criterion(1, ok, f"Laplacian E relative error: {_fmt(errs)} (tol 1e-8)")
    assert ok


def test_delta_identity():
    systems = {
        "laplacian n=2": sc.laplacian(2),
        "laplacian n=3": sc.laplacian(3),
        "l_lambda(2) n=2": sc.l_lambda(2.0, 2),
        "l_lambda(2) n=3": sc.l_lambda(2.0, 3),
        "l_lambda(2+i) n=2": sc.l_lambda(2 + 1j, 2),
        "l_lambda(2+i) n=3": sc.l_lambda(2 + 1j, 3),
        "diag_anisotropic(2,3)": sc.diag_anisotropic([2.0, 3.0]),
        "lame(1,1) n=2": sc.lame(1.0, 1.0, 2),
        "lame(1,1) n=3": sc.lame(1.0, 1.0, 3),
    }
    res = {}
    for name, S in systems.items():
        F = make_evaluator(S)
        res[name] = max(float(np.abs(delta_residual(F, b)).max()) for b in default_bumps(S.n))
    worst = max(res.values())
    ok = worst < 1e-3
    record_criterion(2, ok, f"delta residual max {worst:.2e} over {len(res)} systems x 3 bumps (tol 1e-3)")
    assert ok, res


def test_poisson_kernel_closed_form_and_normalization():
    defects = {}
    closed = {}
    for n in (2, 3):
        P = build_poisson_kernel(make_evaluator(sc.laplacian(n)))
        r = np.linspace(0.0, 10.0, 101)
        if n == 2:
            xp = np.concatenate([-r[::-1], r])[:, None]
        else:
            th = np.linspace(0, 2 * np.pi, 9)[:-1]
            xp = (r[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None]).reshape(-1, 2)
        closed[f"laplacian n={n}"] = float(np.max(np.abs(P(xp)[:, 0, 0] - laplacian_P(xp, n))))
    available = {
        "laplacian n=2": sc.laplacian(2),
        "laplacian n=3": sc.laplacian(3),
        "l_lambda(2) n=2": sc.l_lambda(2.0, 2),
        "l_lambda(2) n=3": sc.l_lambda(2.0, 3),
        "l_lambda(2+i) n=2": sc.l_lambda(2 + 1j, 2),
        "diag_anisotropic(2,3)": sc.diag_anisotropic([2.0, 3.0]),
        "coupled_pair n=2": sc.coupled_pair(2),
        "coupled_pair n=3": sc.coupled_pair(3),
    }
    for name, S in available.items():
        assert poisson_availability(S)[0]
        defects[name] = build_poisson_kernel(make_evaluator(S)).normalization_defect
    ok = max(closed.values()) < 1e-6 and max(defects.values()) < 1e-3
    record_criterion(3, ok, f"closed-form error {_fmt(closed)} (tol 1e-6); "
                            f"normalization defect max {max(defects.values()):.2e} "
                            f"over {len(defects)} kernels (tol 1e-3)")
    assert ok, (closed, defects)


def test_cross_route_agreement():
    res = {}
    for name in ("laplacian n=2", "laplacian n=3", "l_lambda(2) n=2"):
        S = RI_SYSTEMS[name]()
        Kr = make_kernels(S, "reflection")
        Kc = make_kernels(S, "convolution", F=Kr.F)
        x, y = sample_pairs(S.n, GreenSampleSpec(pairs=50, seed=5))
        ref = green(Kr, x, y)
        res[name] = float(np.max(np.abs(green(Kc, x, y) - ref)) / np.max(np.abs(ref)))
    ok = max(res.values()) < 1e-3
    record_criterion(4, ok, f"reflection vs convolution at 50 pairs: {_fmt(res)} (tol 1e-3)")
    assert ok


def test_transposition_and_symmetry(identity_reports):
    K, rep = identity_reports["coupled_pair n=2"]
    assert not K.system.same_operator(sc.transpose_system(K.system))
    vals = {cid: _record(rep, cid).max_defect for cid in ("transposition", "symmetry")}
    ok = max(vals.values()) < 1e-3
    record_criterion(5, ok, f"coupled_pair n=2 over 50 pairs: {_fmt(vals)} (tol 1e-3)")
    assert ok


def test_boundary_homogeneity_translation(identity_reports):
    vals = {}
    for name, (_, rep) in identity_reports.items():
        for cid in ("boundary", "homogeneity", "translation"):
            vals[f"{name} {cid}"] = _record(rep, cid).max_defect
    worst = max(vals, key=vals.get)
    ok = vals[worst] < 1e-3
    record_criterion(6, ok, f"worst defect {vals[worst]:.2e} ({worst}) over {len(identity_reports)} systems "
                            "(tol 1e-3)")
    assert ok, vals


def test_remainder_bound():
    spreads = {}
    systems = {
        "laplacian n=3": sc.laplacian(3),
        "l_lambda(2) n=3": sc.l_lambda(2.0, 3),
        "laplacian n=2": sc.laplacian(2),
        "l_lambda(2) n=2": sc.l_lambda(2.0, 2),
    }
    for name, S in systems.items():
        K = make_kernels(S, "reflection")
        spreads[name] = _remainder_stability(K, np.random.default_rng(7), S.n)
    ok = max(spreads.values()) < 5.0
    record_criterion(7, ok, f"band spread of the scaled remainder: {_fmt(spreads)} (tol 5)")
    assert ok


@pytest.fixture(scope="module")
def dirichlet_reports():
    systems = {
        "laplacian n=2": sc.laplacian(2),
        "laplacian n=3": sc.laplacian(3),
        "l_lambda(2) n=2": sc.l_lambda(2.0, 2),
    }
    return {name: dirichlet_suite(S, seed=0) for name, S in systems.items()}


def test_dirichlet_contract(dirichlet_reports):
    lines = []
    ok = True
    for name, rep in dirichlet_reports.items():
        ok = ok and rep.passed and not has_unavailable(rep)
        worst = {r.check_id.split(".")[1]: r.max_defect for r in rep.records}
        lines.append(f"{name} [semigroup {worst['semigroup']:.1e}, residual {worst['residual']:.1e}, "
                     f"trace {worst['trace']:.1e}, domination {worst['domination']:.2f}]")
    record_criterion(8, ok, "; ".join(lines))
    failing = [r.check_id for rep in dirichlet_reports.values() for r in rep.records if not r.passed]
    assert ok, failing


def test_maximal_bracket():
    ratios = {}
    for n in (2, 3):
        rep = maximal_suite(n)
        ratios[f"n={n}"] = _record(rep, "maximal.bracket").max_defect
    ok = max(ratios.values()) < 20.0
    record_criterion(9, ok, f"C/c over |x'| in {{0,1,10,100}}: {_fmt(ratios)} (tol 20)")
    assert ok


def test_classification_table():
    wrong = []
    for lam in (2, 1, 1j, -1 + 0.1j, -1):
        rep = sc.classify(sc.l_lambda(lam, 2))
        weak = not (abs(complex(lam).imag) == 0 and complex(lam).real <= 0)
        if rep.weakly_elliptic != weak or rep.legendre_hadamard != (complex(lam).real > 0):
            wrong.append(f"l_lambda({lam})")
    rep = sc.classify(sc.l_d(2))
    if not rep.weakly_elliptic or rep.legendre_hadamard:
        wrong.append("l_d")
    L = sc.lame(1.0, 1.0, 2)
    if sc.is_reflection_invariant(L):
        wrong.append("lame reflection invariance")
    for route in ("reflection", "convolution"):
        try:
            make_kernels(L, route)
            wrong.append(f"lame {route} route built")
        except RouteUnavailable:
            pass
    if not has_unavailable(run_suite("poisson", L)):
        wrong.append("lame Poisson kernel not reported unavailable")
    ok = not wrong
    record_criterion(10, ok, "classification table matches" if ok else "mismatch: " + ", ".join(wrong))
    assert ok


def test_nontangential_decay(identity_reports):
    vals = {}
    for name, (_, rep) in identity_reports.items():
        vals[name] = _record(rep, "nt_decay").max_defect
    worst = max(vals.values())
    ok = worst <= 0.1
    record_criterion(11, ok, f"fitted exponent + (n-1): {_fmt(vals)} (tol 0.1)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
