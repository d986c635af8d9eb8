"""Smoke test for the bgk Python module.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/bgk-*.whl
"""

import math

import bgk


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    p = bgk.ModelParams(1, 2.0, 1.0, 0.1)
    assert p.n == 1 and not p.is_endpoint
    assert p.c0 is not None

    peak = bgk.maxwellian(p, 1.0, [0.0], [0.0])
    assert peak > 0.0
    assert bgk.maxwellian(p, 1.0, [0.0], [p.support_radius(1.0) * 1.01]) == 0.0

    end = bgk.ModelParams(1, "3", 1.0, 1.0)
    assert end.is_endpoint and end.c0 is None
    rep = bgk.counterexample(end, 0.5)
    assert close(rep["lhs"], 1.0 / 3.0, 1e-12) and close(rep["rhs"], 1.0, 1e-12)
    assert rep["violated"]
    try:
        bgk.counterexample(end, 0.1)
    except bgk.BgkError as e:
        assert "c2" in str(e)
    else:
        raise AssertionError("a <= c2 must be rejected")

    try:
        bgk.ModelParams(1, 5.0, 1.0, 1.0)
    except bgk.BgkError:
        pass
    else:
        raise AssertionError("gamma = 5 must be rejected for n = 1")

    d = bgk.ball_l1_distance(1.0, [0.0, 0.0], [0.3, 0.0], 2)
    assert d <= bgk.ball_stability_bound(1.0, [0.0, 0.0], [0.3, 0.0], 2)
    assert close(bgk.ball_l1_distance(1.0, [0.0], [0.5], 1), 1.0, 1e-12)

    run = bgk.simulate(p, "sine_wave", 32, 48, 0.01, 0.1, amplitude=0.2)
    mass = run["mass"]
    assert len(mass) == len(run["t"]) == 11
    assert max(abs(m - mass[0]) for m in mass) <= 1e-12 * mass[0]
    assert all(b <= a + 1e-9 for a, b in zip(run["entropy"], run["entropy"][1:]))
    assert run["min_value"] >= 0.0
    assert len(run["rho"]) == 32 and all(math.isfinite(r) for r in run["rho"])

    rows = bgk.verify(p, seed=3, cases=4)
    assert rows and all(r[5] for r in rows), [r for r in rows if not r[5]]
    assert rows == bgk.verify(p, seed=3, cases=4)

    print(f"smoke test passed: {len(rows)} checks, {len(mass)} ledger rows")


if __name__ == "__main__":
    main()
