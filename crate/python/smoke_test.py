#!/usr/bin/env python3
"""Builds the bfr_py extension module and exercises every exported name.

Run from anywhere: python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_and_import():
    subprocess.run(
        ["cargo", "build", "-p", "bfr-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "debug" / "libbfr_py.so"
    if not lib.exists():
        lib = ROOT / "target" / "debug" / "libbfr_py.dylib"
    stage = Path(tempfile.mkdtemp(prefix="bfr_py_"))
    shutil.copy(lib, stage / "bfr_py.so")
    sys.path.insert(0, str(stage))
    import bfr_py

    return bfr_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    m = build_and_import()

    # Scalar helpers.
    assert m.kl_to_mean(1.0, 0.5) == 1.0 / 16.0
    approx(m.tribes_survival_formula(4, 44), 0.16182, 2e-4)

    # BooleanFunction basics: exact means, influences, evaluation.
    t2 = m.BooleanFunction("tribes:w=2")
    assert t2.n == 6
    assert t2.mean() == 27.0 / 64.0
    assert t2.negated().mean() == 37.0 / 64.0

    m3 = m.BooleanFunction("maj:n=3")
    assert m3.mean() == 0.5 and m3.variance() == 0.25
    assert m3.is_monotone()
    assert m3.influences_flip() == [0.5, 0.5, 0.5]
    assert m3.max_influence_flip() == 0.5
    for i in range(3):
        assert m3.influence_flip(i) == 4.0 * m3.influence_spectral(i)
    assert m3.max_influence_spectral() == 0.125
    assert m3.eval(0b011) and not m3.eval(0b000)

    # Conditional means and derivatives on a partial point.
    assert m3.cond_mean([-1, 0, 0]) == 0.75
    assert m3.derivative_at([0, 0, 0], 0) == -0.25
    assert m3.max_abs_derivative([0, 0, 0]) == 0.25

    # Restriction reindexes onto the alive coordinates.
    r = t2.restricted([-1, 1, 0, 0, 0, 0])
    assert r.n == 4
    assert r.mean() == t2.cond_mean([-1, 1, 0, 0, 0, 0])

    # Table round trip and Fourier coefficients.
    assert m.BooleanFunction.from_table(t2.to_table()).mean() == t2.mean()
    p3 = m.BooleanFunction("parity:n=3")
    coeffs = p3.fourier()
    assert coeffs[0] == 0.5 and abs(coeffs[7]) == 0.5
    assert not p3.is_monotone()

    # Multilinear oracle against the same function.
    g = m.MultilinearFunction.from_function(m3)
    assert g.n == 3 and len(g.coeffs()) == 8
    assert g.l2_squared() == 0.5
    assert g.sup_norm() == 1.0
    assert g.influence(0) == m3.influence_spectral(0)
    assert g.eval(0b011) == 1.0 and g.eval(0) == 0.0
    approx(g.second_moment(1.0), 0.5)
    approx(g.moment(0.5, 2.0), g.second_moment(0.5))
    assert g.gradient_second_moment(0.0) == 3.0 / 16.0

    rnd = m.MultilinearFunction.random(6, 3)
    hc = rnd.hc_check(0.3, 0.8)
    assert hc["holds"] and hc["margin"] >= -1e-9
    p51 = rnd.prop51(0.6)
    assert p51["holds"] and p51["min_coord_slack"] >= -1e-9

    same = m.MultilinearFunction(3, g.coeffs())
    assert same.coeffs() == g.coeffs()

    # Restriction scan is deterministic in (seed, trials), worker-free.
    a = m.scan(t2, [0.25, 0.5], trials=2000, seed=9, mode="indep")
    b = m.scan(t2, [0.25, 0.5], trials=2000, seed=9, mode="indep")
    assert a == b
    assert a[0]["rho"] == 0.25 and 0.0 <= a[0]["p_constant"] <= 1.0

    # Conditioned run ends on the preimage.
    run = m.run_conditioned(m3, seed=5)
    end = run["path"][-1]["states"]
    assert all(s in (-1, 1) for s in end)
    idx = sum(1 << i for i, s in enumerate(end) if s == -1)
    assert m3.eval(idx)

    # Controlled run: reproducible, mixture residual at noise level,
    # paths withheld unless asked for.
    m5 = m.BooleanFunction("maj:n=5")
    r1 = m.run_controlled(m5, 0.4, 0.4, seed=11)
    r2 = m.run_controlled(m5, 0.4, 0.4, seed=11)
    assert r1 == r2
    assert r1["max_mixture_residual"] <= 1e-12
    assert "y_path" not in r1
    assert "y_path" in m.run_controlled(m5, 0.4, 0.4, seed=11, emit_path=True)

    s = m.stopping_stats(m5, 0.4, 0.4, trials=500, seed=2)
    assert s["trials"] == 500 and 0.0 <= s["empirical"] <= 1.0

    m7 = m.BooleanFunction("maj:n=7")
    d = m.default_parameters(m7, 0.5)
    assert d["eps_steps"] == 1 and d["delta"] == 1.0 / 64.0

    # Query and sensitivity measures.
    p6 = m.BooleanFunction("parity:n=6")
    assert m.dt_exact(p6) == 6 and m.dt_exact(m3) == 3
    assert m.sensitivity(p6, 0) == 6
    bs, blocks = m.bs_exact(m.BooleanFunction("and:n=4"), 0b1111)
    assert bs == 4
    assert sorted(tuple(b) for b in blocks) == [(0,), (1,), (2,), (3,)]
    est = m.bs_partition_estimate(t2, 3, trials=500, seed=1)
    assert isinstance(est["double_count_holds"], bool)
    assert m.osss_check(m3)["holds"]
    assert m.osss_check(m3, influence="spectral")["holds"]
    lvl = m.level1(m3)
    approx(lvl["grad_norm_sq"], 3.0 / 16.0)
    assert 0.0 < lvl["ratio"] < 1.0

    # Tail estimates on both clocks plus the coupling check.
    bt = m.beta_tail(m7, 0.5, 0.3, trials=500, seed=4)
    assert 0.0 <= bt["empirical"] <= 1.0
    dbt = m.discrete_beta_tail(m7, 0.5, 0.45, trials=500, seed=4)
    assert 0.0 <= dbt["empirical"] <= 1.0
    cpl = m.couple_to_discrete(m7, 0.5, trials=500, seed=4)
    assert isinstance(cpl["endpoint_ok_3sigma"], bool)

    # Errors surface as ValueError.
    for bad in (lambda: m.BooleanFunction("nope:n=3"),
                lambda: m3.eval(0b1000),
                lambda: m3.cond_mean([0, 0]),
                lambda: m.scan(t2, [0.5], mode="diagonal")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
